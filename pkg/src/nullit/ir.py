"""Bytecode IR: textual format, validation, hierarchy and CFG queries.

The IR is a tiny JVML-like stack language.  A program is a set of classes
in single inheritance rooted at the built-in `Object` (no fields, empty
constructor).  Each method carries a flat instruction list; branch operands
are resolved to instruction indices at parse time.

Values have two kinds, `ref` and `int` (integers are only the constants
0/1, just enough to carry `instanceof` results to `ifeq`/`ifne`).  A
verifier-style pre-pass (`validate_stack_shapes`) assigns every program
point a fixed stack height and per-slot kind, unifying unknown kinds
(e.g. of method parameters) across call sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Set, Tuple

# method id: (class name, method name, arity)
MethodId = Tuple[str, str, int]
# program point: (method id, pc)
ProgramPoint = Tuple[MethodId, int]
# field id: "DeclaringClass.name"
FieldId = str

REF = "ref"
INT = "int"

CTOR = "ctor"
STATIC = "static"
VIRTUAL = "virtual"

OBJECT = "Object"
INIT = "<init>"

# opcodes that dereference their receiver (receiver stack depth noted in
# RECEIVER_DEPTH; invoke* receivers sit below the arguments)
DEREF_OPS = {
    "getfield", "putfield", "invokevirtual", "invokespecial",
    "aaload", "aastore", "arraylength",
}

BRANCH_OPS = {"ifnull", "ifnonnull", "ifeq", "ifne", "goto"}
RETURN_OPS = {"areturn", "return"}


class NirError(Exception):
    """Any diagnosable problem with a .nir input."""

    def __init__(self, message: str, line: Optional[int] = None,
                 col: Optional[int] = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class NirSyntaxError(NirError):
    pass


class NirValidationError(NirError):
    pass


@dataclass(frozen=True, slots=True)
class Instr:
    op: str
    cls: Optional[str] = None     # new/invoke*/getfield/putfield/instanceof
    member: Optional[str] = None  # method or field name
    num: Optional[int] = None     # iconst k, load/store r, invoke arity
    target: Optional[int] = None  # branch target pc

    def receiver_depth(self) -> Optional[int]:
        """Stack depth of the dereferenced receiver, if this op derefs."""
        if self.op in ("getfield", "arraylength"):
            return 0
        if self.op in ("putfield", "aaload"):
            return 1
        if self.op == "aastore":
            return 2
        if self.op in ("invokevirtual", "invokespecial"):
            return self.num
        return None


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: str  # REF or INT


@dataclass(frozen=True)
class MethodDecl:
    name: str
    kind: str  # CTOR, STATIC or VIRTUAL
    param_count: int
    locals_count: int  # total slots, including receiver and parameters
    code: Tuple[Instr, ...]

    def has_this(self) -> bool:
        return self.kind != STATIC

    def returns_ref(self) -> bool:
        return any(i.op == "areturn" for i in self.code)


@dataclass(frozen=True)
class ClassDecl:
    name: str
    super_name: Optional[str]  # None only for Object
    fields: Tuple[FieldDecl, ...]
    methods: Tuple[MethodDecl, ...]


OBJECT_DECL = ClassDecl(
    OBJECT, None, (),
    (MethodDecl(INIT, CTOR, 0, 1, (Instr("return"),)),),
)


@dataclass(frozen=True)
class Program:
    classes: Tuple[ClassDecl, ...]  # user classes; Object is implicit
    entry: MethodId

    def all_classes(self) -> Tuple[ClassDecl, ...]:
        return (OBJECT_DECL,) + self.classes


def method_id(cls: str, m: MethodDecl) -> MethodId:
    return (cls, m.name, m.param_count)


def field_id(cls: str, name: str) -> FieldId:
    return f"{cls}.{name}"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_OPS_NO_ARG = {"nop", "aconst_null", "dup", "pop", "areturn", "return",
               "newarray", "aaload", "aastore", "arraylength"}
_OPS_NUM = {"iconst", "load", "store"}
_OPS_CLS = {"new", "instanceof"}
_OPS_FIELD = {"getfield", "putfield"}
_OPS_INVOKE = {"invokespecial", "invokevirtual", "invokestatic"}

_WORD_CHARS = set("abcdefghijklmnopqrstuvwxyz"
                  "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_<>$.")


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            i += 1
            col += 1
        elif ch == "/" and text[i:i + 2] == "//":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "{}(),:":
            toks.append(_Tok(ch, line, col))
            i += 1
            col += 1
        elif ch in _WORD_CHARS:
            j = i
            while j < n and text[j] in _WORD_CHARS:
                j += 1
            toks.append(_Tok(text[i:j], line, col))
            col += j - i
            i = j
        else:
            raise NirSyntaxError(f"unexpected character {ch!r}", line, col)
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def err(self, msg: str):
        if self.pos < len(self.toks):
            t = self.toks[self.pos]
            raise NirSyntaxError(msg, t.line, t.col)
        last = self.toks[-1] if self.toks else None
        raise NirSyntaxError(msg + " (at end of input)",
                             last.line if last else 1)

    def peek(self, k: int = 0) -> Optional[str]:
        i = self.pos + k
        return self.toks[i].text if i < len(self.toks) else None

    def next(self) -> str:
        if self.pos >= len(self.toks):
            self.err("unexpected end of input")
        t = self.toks[self.pos]
        self.pos += 1
        return t.text

    def expect(self, text: str) -> str:
        if self.peek() != text:
            self.err(f"expected {text!r}, got {self.peek()!r}")
        return self.next()

    def ident(self, what: str) -> str:
        t = self.peek()
        if t is None or t in "{}(),:" or t[0].isdigit():
            self.err(f"expected {what}")
        return self.next()

    def number(self, what: str = "integer") -> int:
        t = self.peek()
        if t is None or not t.isdigit():
            self.err(f"expected {what}")
        return int(self.next())

    def parse(self) -> List[ClassDecl]:
        classes = []
        while self.peek() is not None:
            classes.append(self.parse_class())
        return classes

    def parse_class(self) -> ClassDecl:
        self.expect("class")
        cname = self.ident("class name")
        self.expect("extends")
        sname = self.ident("superclass name")
        self.expect("{")
        fields: List[FieldDecl] = []
        methods: List[MethodDecl] = []
        while self.peek() != "}":
            kw = self.peek()
            if kw == "field":
                self.next()
                fname = self.ident("field name")
                kind = self.next()
                if kind not in (REF, INT):
                    self.err("field kind must be ref or int")
                fields.append(FieldDecl(fname, kind))
            elif kw in ("ctor", "method", "static"):
                methods.append(self.parse_method())
            else:
                self.err("expected field, ctor, method or static")
        self.expect("}")
        return ClassDecl(cname, sname, tuple(fields), tuple(methods))

    def parse_method(self) -> MethodDecl:
        kw = self.next()
        if kw == "ctor":
            name, kind = INIT, CTOR
        else:
            kind = STATIC if kw == "static" else VIRTUAL
            name = self.ident("method name")
        self.expect("(")
        nparams = self.number("parameter count")
        self.expect(",")
        nlocals = self.number("locals count")
        self.expect(")")
        self.expect("{")
        raw: List[Tuple[_Tok, Instr]] = []
        labels: Dict[str, int] = {}
        fixups: List[Tuple[int, str, _Tok]] = []  # (instr index, label, tok)
        while self.peek() != "}":
            if self.peek() is None:
                self.err("unterminated method body")
            if self.peek(1) == ":":
                lab = self.ident("label")
                self.expect(":")
                if lab in labels:
                    self.err(f"duplicate label {lab}")
                labels[lab] = len(raw)
                continue
            tok = self.toks[self.pos]
            raw.append((tok, self.parse_instr(len(raw), fixups)))
        self.expect("}")
        code = [ins for _, ins in raw]
        for idx, lab, tok in fixups:
            if lab not in labels:
                raise NirSyntaxError(f"unknown label {lab}", tok.line, tok.col)
            code[idx] = Instr(code[idx].op, target=labels[lab])
        return MethodDecl(name, kind, nparams, nlocals, tuple(code))

    def parse_instr(self, idx: int, fixups) -> Instr:
        op = self.next()
        if op in _OPS_NO_ARG:
            return Instr(op)
        if op in _OPS_NUM:
            k = self.number(f"operand of {op}")
            if op == "iconst" and k not in (0, 1):
                self.err("iconst operand must be 0 or 1")
            return Instr(op, num=k)
        if op in _OPS_CLS:
            return Instr(op, cls=self.ident("class name"))
        if op in _OPS_FIELD or op in _OPS_INVOKE:
            qual = self.ident("qualified member name")
            if "." not in qual:
                self.err(f"{op} takes a dotted C.member operand")
            cls, member = qual.split(".", 1)
            if op in _OPS_FIELD:
                return Instr(op, cls=cls, member=member)
            if op == "invokespecial" and member != INIT:
                self.err("invokespecial only calls <init>")
            return Instr(op, cls=cls, member=member,
                         num=self.number("argument count"))
        if op in BRANCH_OPS:
            tok = self.toks[self.pos] if self.pos < len(self.toks) else None
            lab = self.ident("label")
            fixups.append((idx, lab, tok))
            return Instr(op, target=-1)
        self.err(f"unknown instruction {op!r}")


def parse_program(text: str) -> Program:
    """Parse and validate a .nir program."""
    classes = _Parser(text).parse()
    return _resolve_and_validate(classes)


# ---------------------------------------------------------------------------
# printing (canonical form)
# ---------------------------------------------------------------------------

def print_program(program: Program) -> str:
    out: List[str] = []
    for c in program.classes:
        out.append(f"class {c.name} extends {c.super_name} {{")
        for f in c.fields:
            out.append(f"  field {f.name} {f.kind}")
        for m in c.methods:
            out.extend(_print_method(m))
        out.append("}")
    return "\n".join(out) + "\n"


def _print_method(m: MethodDecl) -> List[str]:
    if m.kind == CTOR:
        head = f"  ctor ({m.param_count}, {m.locals_count}) {{"
    elif m.kind == STATIC:
        head = f"  static {m.name} ({m.param_count}, {m.locals_count}) {{"
    else:
        head = f"  method {m.name} ({m.param_count}, {m.locals_count}) {{"
    targets = sorted({i.target for i in m.code if i.target is not None})
    label_of = {pc: f"L{k}" for k, pc in enumerate(targets)}
    out = [head]
    for pc, ins in enumerate(m.code):
        if pc in label_of:
            out.append(f"  {label_of[pc]}:")
        out.append("    " + _print_instr(ins, label_of))
    # a label may sit one past the last instruction only if unused; targets
    # are always in range, so nothing to flush here
    out.append("  }")
    return out


def _print_instr(ins: Instr, label_of: Dict[int, str]) -> str:
    op = ins.op
    if op in _OPS_NO_ARG:
        return op
    if op in _OPS_NUM:
        return f"{op} {ins.num}"
    if op in _OPS_CLS:
        return f"{op} {ins.cls}"
    if op in _OPS_FIELD:
        return f"{op} {ins.cls}.{ins.member}"
    if op in ("invokespecial", "invokevirtual", "invokestatic"):
        return f"{op} {ins.cls}.{ins.member} {ins.num}"
    if op in BRANCH_OPS:
        return f"{op} {label_of[ins.target]}"
    raise AssertionError(op)


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------

class Hierarchy:
    """Subclass tests, lcs, override relation and member resolution."""

    def __init__(self, program: Program):
        self.program = program
        self.class_index: Dict[str, ClassDecl] = {
            c.name: c for c in program.all_classes()
        }
        self.super_of: Dict[str, Optional[str]] = {
            c.name: c.super_name for c in program.all_classes()
        }
        self._ancestors: Dict[str, Tuple[str, ...]] = {}
        for name in self.class_index:
            chain = []
            cur: Optional[str] = name
            while cur is not None:
                chain.append(cur)
                cur = self.super_of[cur]
            self._ancestors[name] = tuple(chain)  # name first, Object last
        self.methods: Dict[MethodId, MethodDecl] = {}
        for c in program.all_classes():
            for m in c.methods:
                self.methods[method_id(c.name, m)] = m
        self._subclasses: Dict[str, Set[str]] = {n: set() for n in self.class_index}
        for name in self.class_index:
            for anc in self._ancestors[name]:
                self._subclasses[anc].add(name)  # reflexive

    def is_subclass(self, a: str, b: str) -> bool:
        return b in self._ancestors[a]

    def ancestors(self, c: str) -> Tuple[str, ...]:
        return self._ancestors[c]

    def subclasses(self, c: str) -> Set[str]:
        return self._subclasses[c]

    def depth(self, c: str) -> int:
        return len(self._ancestors[c]) - 1

    def least_common_superclass(self, a: str, b: str) -> str:
        bs = set(self._ancestors[b])
        for anc in self._ancestors[a]:
            if anc in bs:
                return anc
        raise AssertionError("hierarchy not rooted")

    def fields_of(self, c: str) -> Tuple[FieldDecl, ...]:
        """Fields declared exactly in c."""
        return self.class_index[c].fields

    def field_ids_of(self, c: str, kind: Optional[str] = None) -> Tuple[FieldId, ...]:
        return tuple(field_id(c, f.name) for f in self.fields_of(c)
                     if kind is None or f.kind == kind)

    def all_fields(self, c: str) -> Tuple[Tuple[str, FieldDecl], ...]:
        """(declaring class, decl) pairs for the whole chain of c."""
        out = []
        for anc in self._ancestors[c]:
            for f in self.fields_of(anc):
                out.append((anc, f))
        return tuple(out)

    def resolve(self, cls: str, name: str, arity: int,
                kinds: Tuple[str, ...]) -> Optional[MethodId]:
        """Nearest declaration of name/arity walking up from cls."""
        for anc in self._ancestors.get(cls, ()):
            mid = (anc, name, arity)
            m = self.methods.get(mid)
            if m is not None and m.kind in kinds:
                return mid
        return None

    def ctor_of(self, cls: str) -> Optional[MethodId]:
        mid = (cls, INIT, 0)
        for m in self.class_index[cls].methods:
            if m.kind == CTOR:
                return (cls, INIT, m.param_count)
        return None if cls != OBJECT else mid

    def dispatch_targets(self, cls: str, name: str, arity: int) -> Set[MethodId]:
        """CHA: the static target plus all overriding declarations below cls."""
        out: Set[MethodId] = set()
        static = self.resolve(cls, name, arity, (VIRTUAL,))
        if static is not None:
            out.add(static)
        for sub in self._subclasses.get(cls, ()):
            mid = (sub, name, arity)
            m = self.methods.get(mid)
            if m is not None and m.kind == VIRTUAL:
                out.add(mid)
        return out

    def overridden_by(self, mid: MethodId) -> Optional[MethodId]:
        """The nearest strict-ancestor declaration this method overrides."""
        cls, name, arity = mid
        sup = self.super_of[cls]
        if sup is None:
            return None
        return self.resolve(sup, name, arity, (VIRTUAL,))

    def overrides(self, m_sub: MethodId, m_sup: MethodId) -> bool:
        if m_sub[1:] != m_sup[1:] or m_sub == m_sup:
            return False
        a, b = self.methods.get(m_sub), self.methods.get(m_sup)
        if a is None or b is None or a.kind != VIRTUAL or b.kind != VIRTUAL:
            return False
        return self.is_subclass(m_sub[0], m_sup[0])

    def override_pairs(self) -> List[Tuple[MethodId, MethodId]]:
        """All (overriding, overridden) pairs, transitively."""
        pairs = []
        for mid, m in self.methods.items():
            if m.kind != VIRTUAL:
                continue
            cur = self.overridden_by(mid)
            while cur is not None:
                pairs.append((mid, cur))
                cur = self.overridden_by(cur)
        return pairs


# ---------------------------------------------------------------------------
# whole-program validation
# ---------------------------------------------------------------------------

def _resolve_and_validate(classes: List[ClassDecl]) -> Program:
    names = [c.name for c in classes]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})[0]
        raise NirValidationError(f"duplicate class {dup}")
    if OBJECT in names:
        raise NirValidationError("class Object is built in and cannot be redefined")
    index = {c.name: c for c in classes}
    for c in classes:
        if c.super_name != OBJECT and c.super_name not in index:
            raise NirValidationError(
                f"class {c.name} extends undeclared class {c.super_name}")
    # acyclicity
    for c in classes:
        seen = {c.name}
        cur = c.super_name
        while cur is not None and cur != OBJECT:
            if cur in seen:
                raise NirValidationError(f"inheritance cycle through {c.name}")
            seen.add(cur)
            cur = index[cur].super_name

    entries = [method_id(c.name, m) for c in classes for m in c.methods
               if m.kind == STATIC and m.name == "main"]
    if len(entries) != 1:
        raise NirValidationError(
            f"program must declare exactly one static main, found {len(entries)}")

    program = Program(tuple(classes), entries[0])
    hierarchy = Hierarchy(program)

    for c in classes:
        fnames = [f.name for f in c.fields]
        if len(set(fnames)) != len(fnames):
            raise NirValidationError(f"duplicate field name in class {c.name}")
        sigs = [(m.name, m.param_count) for m in c.methods]
        if len(set(sigs)) != len(sigs):
            raise NirValidationError(f"duplicate method signature in class {c.name}")
        if sum(1 for m in c.methods if m.kind == CTOR) > 1:
            raise NirValidationError(f"class {c.name} has more than one constructor")
        for m in c.methods:
            _validate_method(c, m, hierarchy)
    return program


def _validate_method(c: ClassDecl, m: MethodDecl, h: Hierarchy):
    where = f"{c.name}.{m.name}"
    if not m.code:
        raise NirValidationError(f"{where}: empty method body")
    min_locals = m.param_count + (1 if m.has_this() else 0)
    if m.locals_count < min_locals:
        raise NirValidationError(
            f"{where}: locals_count {m.locals_count} < {min_locals} slots "
            f"needed for receiver and parameters")
    if m.kind == CTOR and m.returns_ref():
        raise NirValidationError(f"{where}: constructors must return void")
    ret_kinds = {i.op for i in m.code if i.op in RETURN_OPS}
    if len(ret_kinds) > 1:
        raise NirValidationError(f"{where}: mixes areturn and return")
    last = m.code[-1]
    if last.op not in RETURN_OPS and last.op != "goto":
        raise NirValidationError(f"{where}: control can fall off the end")
    for pc, ins in enumerate(m.code):
        if ins.target is not None and not (0 <= ins.target < len(m.code)):
            raise NirValidationError(f"{where}:{pc}: branch target out of range")
        if ins.num is not None and ins.op in ("load", "store") \
                and ins.num >= m.locals_count:
            raise NirValidationError(f"{where}:{pc}: local {ins.num} out of range")
        _validate_refs(where, pc, ins, h)
    # constructor convention: explicit super-call prefix unless direct child
    # of Object (then the super-call is implicit)
    if m.kind == CTOR and c.super_name != OBJECT:
        ok = (len(m.code) >= 2
              and m.code[0] == Instr("load", num=0)
              and m.code[1].op == "invokespecial"
              and m.code[1].cls == c.super_name and m.code[1].num == 0)
        if not ok:
            raise NirValidationError(
                f"{where}: constructor must begin with 'load 0; "
                f"invokespecial {c.super_name}.<init> 0'")


def _validate_refs(where: str, pc: int, ins: Instr, h: Hierarchy):
    def fail(msg):
        raise NirValidationError(f"{where}:{pc}: {msg}")

    if ins.cls is not None and ins.cls not in h.class_index:
        fail(f"unresolved class {ins.cls}")
    if ins.op in ("getfield", "putfield"):
        decls = {f.name for f in h.fields_of(ins.cls)}
        if ins.member not in decls:
            fail(f"class {ins.cls} declares no field {ins.member}")
    elif ins.op == "invokespecial":
        ctor = h.ctor_of(ins.cls)
        if ctor is None or ctor[2] != ins.num:
            fail(f"no constructor {ins.cls}.<init>/{ins.num}")
    elif ins.op == "invokevirtual":
        if h.resolve(ins.cls, ins.member, ins.num, (VIRTUAL,)) is None:
            fail(f"unresolved virtual method {ins.cls}.{ins.member}/{ins.num}")
    elif ins.op == "invokestatic":
        if h.resolve(ins.cls, ins.member, ins.num, (STATIC,)) is None:
            fail(f"unresolved static method {ins.cls}.{ins.member}/{ins.num}")
    elif ins.op == "new":
        if h.ctor_of(ins.cls) is None:
            fail(f"class {ins.cls} has no constructor")


# ---------------------------------------------------------------------------
# stack-shape validation
# ---------------------------------------------------------------------------

class _Kinds:
    """Union-find over slot-kind terms; terms may be bound to REF or INT."""

    def __init__(self):
        self.parent: List[int] = []
        self.const: List[Optional[str]] = []

    def fresh(self, const: Optional[str] = None) -> int:
        self.parent.append(len(self.parent))
        self.const.append(const)
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def unify(self, a: int, b: int, fail):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        ca, cb = self.const[ra], self.const[rb]
        if ca is not None and cb is not None and ca != cb:
            fail(f"slot kind mismatch: {ca} vs {cb}")
        self.parent[ra] = rb
        if cb is None:
            self.const[rb] = ca

    def require(self, a: int, kind: str, fail):
        r = self.find(a)
        if self.const[r] is None:
            self.const[r] = kind
        elif self.const[r] != kind:
            fail(f"expected {kind} slot, found {self.const[r]}")

    def resolve(self, a: int) -> str:
        # unconstrained slots default to ref
        return self.const[self.find(a)] or REF


@dataclass
class StackShapes:
    """Per-point stack heights/kinds plus resolved parameter kinds."""

    heights: Dict[ProgramPoint, int]
    kinds: Dict[ProgramPoint, Tuple[str, ...]]  # bottom of stack first
    param_kinds: Dict[MethodId, Tuple[str, ...]]

    def height(self, point: ProgramPoint) -> int:
        return self.heights[point]

    def covered(self, point: ProgramPoint) -> bool:
        return point in self.heights


def validate_stack_shapes(program: Program,
                          hierarchy: Optional[Hierarchy] = None) -> StackShapes:
    """Verifier pre-pass: fixed stack height and slot kind per point.

    Parameter kinds are inferred by unification across call sites; a method
    whose parameter kind is never constrained defaults to ref.
    """
    h = hierarchy or Hierarchy(program)
    uf = _Kinds()
    param_vars: Dict[MethodId, List[int]] = {}
    for mid, m in h.methods.items():
        param_vars[mid] = [uf.fresh() for _ in range(m.param_count)]

    # the dataflow works on a small per-method table; the global maps are
    # assembled once afterwards
    per_method: Dict[MethodId, Dict[int, tuple]] = {}
    for mid, m in h.methods.items():
        per_method[mid] = _check_method_shapes(mid, m, h, uf, param_vars)

    heights = {(mid, pc): len(st)
               for mid, states in per_method.items()
               for pc, (st, _) in states.items()}
    cache: Dict[tuple, tuple] = {}
    kinds = {(mid, pc): cache.setdefault(row, row)
             for mid, states in per_method.items()
             for pc, (st, _) in states.items()
             for row in (tuple(uf.resolve(t) for t in st),)}
    param_kinds = {mid: tuple(uf.resolve(v) for v in vs)
                   for mid, vs in param_vars.items()}
    return StackShapes(heights, kinds, param_kinds)


def _check_method_shapes(mid, m, h, uf, param_vars):
    def fail_at(pc, msg):
        raise NirValidationError(f"{mid[0]}.{mid[1]}:{pc}: {msg}")

    entry_locals: List[Optional[int]] = []
    if m.has_this():
        entry_locals.append(uf.fresh(REF))
    entry_locals.extend(param_vars[mid])
    entry_locals.extend([None] * (m.locals_count - len(entry_locals)))
    states: Dict[int, tuple] = {0: ((), tuple(entry_locals))}
    work = [0]
    while work:
        pc = work.pop()
        stack, locals_ = states[pc]
        ins = m.code[pc]
        outs = _shape_transfer(mid, pc, ins, list(stack), list(locals_),
                               h, uf, param_vars,
                               lambda msg, pc=pc: fail_at(pc, msg))
        for succ, (ostack, olocals) in outs:
            if succ not in states:
                states[succ] = (tuple(ostack), tuple(olocals))
                work.append(succ)
                continue
            sstack, slocals = states[succ]
            if len(sstack) != len(ostack):
                fail_at(succ, f"inconsistent stack heights at merge: "
                              f"{len(sstack)} vs {len(ostack)}")
            for a, b in zip(sstack, ostack):
                uf.unify(a, b, lambda msg, pc=succ: fail_at(pc, msg))
            changed = False
            merged = list(slocals)
            for idx, (a, b) in enumerate(zip(slocals, olocals)):
                if a is None:
                    continue
                if b is None:
                    merged[idx] = None
                    changed = True
                else:
                    uf.unify(a, b, lambda msg, pc=succ: fail_at(pc, msg))
            if changed:
                states[succ] = (sstack, tuple(merged))
                work.append(succ)
    return states


def _shape_transfer(mid, pc, ins, stack, locals_, h, uf, param_vars, fail):
    def pop(kind=None):
        if not stack:
            fail("stack underflow")
        t = stack.pop()
        if kind is not None:
            uf.require(t, kind, fail)
        return t

    def push(kind=None, term=None):
        stack.append(term if term is not None else uf.fresh(kind))

    op = ins.op
    succs = [pc + 1]
    if op == "nop":
        pass
    elif op == "aconst_null":
        push(REF)
    elif op == "iconst":
        push(INT)
    elif op == "load":
        t = locals_[ins.num]
        if t is None:
            fail(f"local {ins.num} may be used before assignment")
        push(term=t)
    elif op == "store":
        locals_[ins.num] = pop()
    elif op == "dup":
        if not stack:
            fail("stack underflow")
        push(term=stack[-1])
    elif op == "pop":
        pop()
    elif op == "new":
        push(REF)
    elif op in ("invokespecial", "invokevirtual", "invokestatic"):
        if op == "invokespecial":
            tgt = h.ctor_of(ins.cls)
        elif op == "invokevirtual":
            tgt = h.resolve(ins.cls, ins.member, ins.num, (VIRTUAL,))
        else:
            tgt = h.resolve(ins.cls, ins.member, ins.num, (STATIC,))
        for i in range(ins.num - 1, -1, -1):
            t = pop()
            uf.unify(t, param_vars[tgt][i], fail)
        if op != "invokestatic":
            pop(REF)
        if op != "invokespecial" and h.methods[tgt].returns_ref():
            push(REF)
    elif op == "getfield":
        pop(REF)
        fk = next(f.kind for f in h.fields_of(ins.cls) if f.name == ins.member)
        push(fk)
    elif op == "putfield":
        fk = next(f.kind for f in h.fields_of(ins.cls) if f.name == ins.member)
        pop(fk)
        pop(REF)
    elif op == "instanceof":
        pop(REF)
        push(INT)
    elif op in ("ifnull", "ifnonnull"):
        pop(REF)
        succs = [pc + 1, ins.target]
    elif op in ("ifeq", "ifne"):
        pop(INT)
        succs = [pc + 1, ins.target]
    elif op == "goto":
        succs = [ins.target]
    elif op == "areturn":
        pop(REF)
        succs = []
    elif op == "return":
        succs = []
    elif op == "newarray":
        pop(INT)
        push(REF)
    elif op == "aaload":
        pop(INT)
        pop(REF)
        push(REF)
    elif op == "aastore":
        pop(REF)
        pop(INT)
        pop(REF)
    elif op == "arraylength":
        pop(REF)
        push(INT)
    else:
        raise AssertionError(op)
    return [(s, (tuple(stack), tuple(locals_))) for s in succs]


def stack_effect(ins: Instr, h: Hierarchy) -> Tuple[int, int]:
    """(pops, pushes) of an instruction; `dup` reported as (0, 1)."""
    op = ins.op
    if op in ("nop", "goto", "return"):
        return (0, 0)
    if op in ("aconst_null", "iconst", "load", "new", "dup"):
        return (0, 1)
    if op in ("store", "pop", "areturn", "ifnull", "ifnonnull", "ifeq", "ifne"):
        return (1, 0)
    if op in ("getfield", "instanceof", "arraylength"):
        return (1, 1)
    if op == "putfield":
        return (2, 0)
    if op == "newarray":
        return (1, 1)
    if op == "aaload":
        return (2, 1)
    if op == "aastore":
        return (3, 0)
    if op == "invokespecial":
        return (ins.num + 1, 0)
    if op in ("invokevirtual", "invokestatic"):
        if op == "invokevirtual":
            tgt = h.resolve(ins.cls, ins.member, ins.num, (VIRTUAL,))
            pops = ins.num + 1
        else:
            tgt = h.resolve(ins.cls, ins.member, ins.num, (STATIC,))
            pops = ins.num
        return (pops, 1 if h.methods[tgt].returns_ref() else 0)
    raise AssertionError(op)


# ---------------------------------------------------------------------------
# control-flow graph
# ---------------------------------------------------------------------------

NORMAL = "normal"
DEREF = "deref"


def build_cfg(method: MethodDecl) -> List[List[Tuple[int, str]]]:
    """Successor list per pc; edges tagged normal or deref-guarded.

    The fallthrough edge of any dereferencing instruction is deref-guarded:
    the receiver is non-null whenever that edge is taken.
    """
    cfg: List[List[Tuple[int, str]]] = []
    for pc, ins in enumerate(method.code):
        op = ins.op
        if op in RETURN_OPS:
            cfg.append([])
        elif op == "goto":
            cfg.append([(ins.target, NORMAL)])
        elif op in BRANCH_OPS:
            cfg.append([(pc + 1, NORMAL), (ins.target, NORMAL)])
        elif op in DEREF_OPS:
            cfg.append([(pc + 1, DEREF)])
        else:
            cfg.append([(pc + 1, NORMAL)])
    return cfg


# ---------------------------------------------------------------------------
# reachability (class-hierarchy-analysis dispatch)
# ---------------------------------------------------------------------------

def reachable_methods(program: Program, hierarchy: Hierarchy) -> Set[MethodId]:
    h = hierarchy
    seen: Set[MethodId] = set()
    work = [program.entry]
    while work:
        mid = work.pop()
        if mid in seen:
            continue
        seen.add(mid)
        m = h.methods[mid]
        targets: Set[MethodId] = set()
        for ins in m.code:
            if ins.op == "invokestatic":
                targets.add(h.resolve(ins.cls, ins.member, ins.num, (STATIC,)))
            elif ins.op == "invokevirtual":
                targets |= h.dispatch_targets(ins.cls, ins.member, ins.num)
            elif ins.op == "invokespecial":
                targets.add(h.ctor_of(ins.cls))
            elif ins.op == "new":
                # constructor chain of the instantiated class
                cur = ins.cls
                while cur is not None:
                    ctor = h.ctor_of(cur)
                    if ctor is not None:
                        targets.add(ctor)
                    cur = h.super_of[cur]
        # the implicit super-call of a direct-child-of-Object constructor
        if m.kind == CTOR and h.super_of[mid[0]] == OBJECT:
            targets.add((OBJECT, INIT, 0))
        work.extend(t for t in targets if t not in seen)
    return seen

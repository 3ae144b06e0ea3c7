"""Random program generator for differential testing.

Programs are produced from statement templates over a typed model of
locals, so every emitted program passes parsing, validation and
stack-shape checking by construction, and never commits a runtime type
error: dereferences either happen on `this`, behind a null test or an
`instanceof` guard, or (with low probability) unguarded on a possibly
null local, which at worst stops execution with a null-dereference
fault -- exactly the behaviour the trace checks want to observe.

The same machinery scaled up (many classes, long straight-line method
bodies) serves as the performance workload.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import ir


@dataclass
class GenParams:
    n_classes: int = 4
    max_fields: int = 2
    max_methods: int = 2
    max_stmts: int = 6
    max_if_depth: int = 2
    unguarded_deref_prob: float = 0.15
    extra_locals: int = 3


# --- hierarchy / signature planning ---------------------------------------

@dataclass
class _MethodPlan:
    name: str
    params: Tuple[Tuple[str, str], ...]  # (kind, class bound for refs)
    returns: str                         # "ref" | "void"


@dataclass
class _ClassPlan:
    name: str
    super_name: str
    ref_fields: List[str] = field(default_factory=list)
    int_fields: List[str] = field(default_factory=list)
    methods: List[_MethodPlan] = field(default_factory=list)   # new + overrides
    inherited: List[Tuple[str, _MethodPlan]] = field(default_factory=list)


class _Gen:
    def __init__(self, seed: int, params: GenParams):
        self.rng = random.Random(seed)
        self.p = params
        self.classes: List[_ClassPlan] = []
        self.label_n = 0
        self._plan()

    # --- planning --------------------------------------------------------

    def _plan(self):
        rng = self.rng
        depth: Dict[str, int] = {ir.OBJECT: 0}
        names = [f"K{i}" for i in range(self.p.n_classes)]
        for i, name in enumerate(names):
            candidates = [ir.OBJECT] + [c.name for c in self.classes
                                        if depth[c.name] < 4]
            sup = rng.choice(candidates) if i > 0 else ir.OBJECT
            depth[name] = depth[sup] + 1
            cp = _ClassPlan(name, sup)
            for j in range(rng.randint(0, self.p.max_fields)):
                cp.ref_fields.append(f"f{j}")
            if rng.random() < 0.4:
                cp.int_fields.append("g0")
            # visible virtual methods: everything the super chain declares
            sup_plan = self._plan_of(sup)
            visible: Dict[str, Tuple[str, _MethodPlan]] = {}
            while sup_plan is not None:
                for mp in sup_plan.methods:
                    visible.setdefault(mp.name, (sup_plan.name, mp))
                sup_plan = self._plan_of(sup_plan.super_name)
            for mname, (_, mp) in visible.items():
                if rng.random() < 0.5:
                    cp.methods.append(mp)          # override, same signature
                else:
                    cp.inherited.append((mname, mp))
            for j in range(rng.randint(0, self.p.max_methods)):
                mname = f"m{i}_{j}"
                nparams = rng.randint(0, 2)
                params = []
                for _ in range(nparams):
                    if rng.random() < 0.3:
                        params.append((ir.INT, ""))
                    else:
                        bound = rng.choice([ir.OBJECT] +
                                           [c.name for c in self.classes] +
                                           [name])
                        params.append((ir.REF, bound))
                ret = "ref" if rng.random() < 0.5 else "void"
                cp.methods.append(_MethodPlan(mname, tuple(params), ret))
            self.classes.append(cp)

    def _plan_of(self, name: str) -> Optional[_ClassPlan]:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def _subclasses_of(self, name: str) -> List[str]:
        out = [name] if name != ir.OBJECT else [c.name for c in self.classes]
        for c in self.classes:
            cur = c.super_name
            while cur != ir.OBJECT and cur is not None:
                if cur == name and c.name not in out:
                    out.append(c.name)
                cur = self._plan_of(cur).super_name if self._plan_of(cur) else None
        if name == ir.OBJECT:
            out = out or [ir.OBJECT]
        return sorted(set(out))

    def _chain(self, name: str) -> List[_ClassPlan]:
        out = []
        cur = self._plan_of(name)
        while cur is not None:
            out.append(cur)
            cur = self._plan_of(cur.super_name)
        return out

    def _is_sub(self, a: str, b: str) -> bool:
        if b == ir.OBJECT:
            return True
        return any(c.name == b for c in self._chain(a))

    def _callable_sigs(self, cls: str) -> List[Tuple[str, _MethodPlan]]:
        """(static target class, plan) for methods callable on a cls value."""
        out = []
        seen = set()
        for cp in self._chain(cls):
            for mp in cp.methods:
                if mp.name not in seen:
                    seen.add(mp.name)
                    out.append((cp.name, mp))
        return out

    def _label(self) -> str:
        self.label_n += 1
        return f"L{self.label_n}"

    # --- emission --------------------------------------------------------

    def source(self) -> str:
        lines = []
        for i, cp in enumerate(self.classes):
            lines.append(f"class {cp.name} extends {cp.super_name} {{")
            for f in cp.ref_fields:
                lines.append(f"  field {f} ref")
            for f in cp.int_fields:
                lines.append(f"  field {f} int")
            lines.extend(self._emit_ctor(cp))
            for mp in cp.methods:
                lines.extend(self._emit_method(cp, mp))
            if i == 0:
                lines.extend(self._emit_main())
            lines.append("}")
        return "\n".join(lines) + "\n"

    def _emit_ctor(self, cp: _ClassPlan) -> List[str]:
        env = _Env(self, cls=cp.name, is_static=False, nparams=0)
        body: List[str] = []
        if cp.super_name != ir.OBJECT:
            body += ["load 0", f"invokespecial {cp.super_name}.<init> 0"]
        body += env.init_locals()
        # sometimes the half-built object escapes before its fields are set
        escape = env.this_escape() if self.rng.random() < 0.35 else []
        if escape and self.rng.random() < 0.5:
            body += escape
            escape = []
        # initialize a random subset of the declared fields; the rest stay
        # implicitly null
        for f in cp.ref_fields:
            r = self.rng.random()
            if r < 0.6:
                body += ["load 0"] + env.ref_value(ir.OBJECT) + \
                        [f"putfield {cp.name}.{f}"]
        body += escape
        body += env.stmts(self.rng.randint(0, self.p.max_stmts // 2))
        body += ["return"]
        return _format_method(f"ctor (0, {env.nlocals})", body)

    def _emit_method(self, cp: _ClassPlan, mp: _MethodPlan) -> List[str]:
        env = _Env(self, cls=cp.name, is_static=False,
                   nparams=len(mp.params), param_types=mp.params)
        body = env.init_locals()
        body += env.stmts(self.rng.randint(1, self.p.max_stmts))
        if mp.returns == "ref":
            body += env.ref_value(ir.OBJECT) + ["areturn"]
        else:
            body += ["return"]
        return _format_method(
            f"method {mp.name} ({len(mp.params)}, {env.nlocals})", body)

    def _emit_main(self) -> List[str]:
        env = _Env(self, cls=None, is_static=True, nparams=0)
        body = env.init_locals()
        body += env.stmts(self.rng.randint(2, self.p.max_stmts + 2))
        body += ["return"]
        return _format_method(f"static main (0, {env.nlocals})", body)


def _format_method(header: str, body: List[str]) -> List[str]:
    out = [f"  {header} {{"]
    for line in body:
        if line.endswith(":"):
            out.append(f"  {line}")
        else:
            out.append(f"    {line}")
    out.append("  }")
    return out


class _Env:
    """Typed locals of one method body under construction."""

    def __init__(self, gen: _Gen, cls: Optional[str], is_static: bool,
                 nparams: int, param_types: Sequence[Tuple[str, str]] = ()):
        self.g = gen
        self.rng = gen.rng
        self.cls = cls
        # local -> ("ref", static class) | ("int",) | ("arr",)
        self.types: Dict[int, Tuple] = {}
        base = 0
        if not is_static:
            self.types[0] = ("ref", cls)
            base = 1
        for i, (kind, bound) in enumerate(param_types):
            self.types[base + i] = (("ref", bound or ir.OBJECT)
                                    if kind == ir.REF else ("int",))
        self.first_extra = base + nparams
        self.extra: List[int] = []
        self.nlocals = self.first_extra
        # receiver/`this` must never be reassigned
        self.assignable: List[int] = [base + i
                                      for i, (k, _) in enumerate(param_types)
                                      if k == ir.REF]

    # --- local planning --------------------------------------------------

    def init_locals(self) -> List[str]:
        out = []
        for _ in range(self.g.p.extra_locals):
            r = self.nlocals
            self.nlocals += 1
            self.extra.append(r)
            roll = self.rng.random()
            if roll < 0.55:
                bound = self.rng.choice(
                    [ir.OBJECT] + [c.name for c in self.g.classes])
                # build the initializer before registering r: it must not
                # read the still-unassigned slot
                init = self.ref_value(bound)
                self.types[r] = ("ref", bound)
                out += init + [f"store {r}"]
                self.assignable.append(r)
            elif roll < 0.8:
                self.types[r] = ("int",)
                out += [f"iconst {self.rng.randint(0, 1)}", f"store {r}"]
            else:
                self.types[r] = ("arr",)
                out += ["iconst 1", "newarray", f"store {r}"]
        return out

    def _locals_of(self, pred) -> List[int]:
        return [r for r, t in sorted(self.types.items()) if pred(t)]

    def _ref_locals(self) -> List[int]:
        return self._locals_of(lambda t: t[0] == "ref")

    # --- value producers (leave one value on the stack) ------------------

    def ref_value(self, bound: str) -> List[str]:
        """Push a null-or-instance-of-`bound` value."""
        subs = [c for c in self.g._subclasses_of(bound)
                if c != ir.OBJECT] if bound != ir.OBJECT \
            else [c.name for c in self.g.classes]
        choices = ["null"]
        compat = [r for r in self._ref_locals()
                  if self.g._is_sub(self.types[r][1], bound)
                  or self.types[r][1] == bound]
        if compat:
            choices.append("local")
        if subs or bound == ir.OBJECT:
            choices += ["new", "new"]
        pick = self.rng.choice(choices)
        if pick == "null":
            return ["aconst_null"]
        if pick == "local":
            return [f"load {self.rng.choice(compat)}"]
        target = self.rng.choice(subs) if subs else ir.OBJECT
        return [f"new {target}", "dup", f"invokespecial {target}.<init> 0"]

    # --- statements ------------------------------------------------------

    def stmts(self, n: int, depth: int = 0) -> List[str]:
        out = []
        for _ in range(n):
            out += self._stmt(depth)
        return out

    def this_escape(self) -> List[str]:
        """Inside a constructor: hand the half-built object to a method."""
        sigs = [(c, mp) for c, mp in self.g._callable_sigs(self.cls)]
        if not sigs:
            return []
        tgt_cls, mp = self.rng.choice(sigs)
        out = ["load 0"]
        for kind, bound in mp.params:
            if kind == ir.INT:
                out.append(f"iconst {self.rng.randint(0, 1)}")
            elif self.g._is_sub(self.cls, bound or ir.OBJECT):
                out.append("load 0")       # escape this as an argument too
            else:
                out += self.ref_value(bound or ir.OBJECT)
        out.append(f"invokevirtual {tgt_cls}.{mp.name} {len(mp.params)}")
        if mp.returns == "ref":
            out.append("pop")
        return out

    def _stmt(self, depth: int) -> List[str]:
        makers = [self._s_reassign, self._s_guarded_field,
                  self._s_guarded_call, self._s_instanceof_guard,
                  self._s_array, self._s_int_flip]
        if self.cls is not None:
            makers += [self._s_this_field, self._s_this_field]
        if depth < self.g.p.max_if_depth:
            makers.append(lambda: self._s_if_block(depth))
        if self.rng.random() < self.g.p.unguarded_deref_prob:
            makers = [self._s_unguarded_deref]
        for _ in range(6):
            out = self.rng.choice(makers)()
            if out:
                return out
        return ["nop"]

    def _pick_field(self, cls: str) -> Optional[Tuple[str, str]]:
        """A ref field readable on a value of static class cls."""
        opts = [(cp.name, f) for cp in self.g._chain(cls)
                for f in cp.ref_fields]
        return self.rng.choice(opts) if opts else None

    def _s_reassign(self) -> List[str]:
        cands = [r for r in self.assignable if self.types[r][0] == "ref"]
        if not cands:
            return []
        r = self.rng.choice(cands)
        return self.ref_value(self.types[r][1]) + [f"store {r}"]

    def _s_guarded_field(self) -> List[str]:
        cands = [r for r in self._ref_locals() if r != 0
                 and self._pick_field(self.types[r][1])]
        if not cands:
            return []
        r = self.rng.choice(cands)
        dcls, f = self._pick_field(self.types[r][1])
        lbl = self.g._label()
        if self.rng.random() < 0.5:
            body = [f"load {r}", f"getfield {dcls}.{f}", "pop"]
        else:
            body = [f"load {r}"] + self.ref_value(ir.OBJECT) + \
                   [f"putfield {dcls}.{f}"]
        return [f"load {r}", f"ifnull {lbl}"] + body + [f"{lbl}:"]

    def _s_unguarded_deref(self) -> List[str]:
        cands = [r for r in self._ref_locals()
                 if self._pick_field(self.types[r][1])]
        if not cands:
            return []
        r = self.rng.choice(cands)
        dcls, f = self._pick_field(self.types[r][1])
        return [f"load {r}", f"getfield {dcls}.{f}", "pop"]

    def _s_guarded_call(self) -> List[str]:
        cands = [(r, sig) for r in self._ref_locals() if r != 0
                 for sig in [self.g._callable_sigs(self.types[r][1])] if sig]
        if not cands:
            return []
        r, sigs = self.rng.choice(cands)
        tgt_cls, mp = self.rng.choice(sigs)
        lbl = self.g._label()
        call = [f"load {r}"]
        for kind, bound in mp.params:
            if kind == ir.INT:
                call.append(f"iconst {self.rng.randint(0, 1)}")
            else:
                call += self.ref_value(bound or ir.OBJECT)
        call.append(f"invokevirtual {tgt_cls}.{mp.name} {len(mp.params)}")
        if mp.returns == "ref":
            call.append("pop")
        return [f"load {r}", f"ifnull {lbl}"] + call + [f"{lbl}:"]

    def _s_instanceof_guard(self) -> List[str]:
        refs = self._ref_locals()
        tested = [c.name for c in self.g.classes if c.ref_fields]
        if not refs or not tested:
            return []
        r = self.rng.choice(refs)
        cls = self.rng.choice(tested)
        f = self.rng.choice(self.g._plan_of(cls).ref_fields)
        lbl = self.g._label()
        return [f"load {r}", f"instanceof {cls}", f"ifeq {lbl}",
                f"load {r}", f"getfield {cls}.{f}", "pop", f"{lbl}:"]

    def _s_this_field(self) -> List[str]:
        cp = self.g._plan_of(self.cls)
        if not cp or not cp.ref_fields:
            return []
        f = self.rng.choice(cp.ref_fields)
        if self.rng.random() < 0.5:
            return ["load 0"] + self.ref_value(ir.OBJECT) + \
                   [f"putfield {self.cls}.{f}"]
        return ["load 0", f"getfield {self.cls}.{f}", "pop"]

    def _s_array(self) -> List[str]:
        arrs = self._locals_of(lambda t: t[0] == "arr")
        if not arrs:
            return []
        a = self.rng.choice(arrs)
        roll = self.rng.random()
        if roll < 0.4:
            return [f"load {a}", "iconst 0"] + self.ref_value(ir.OBJECT) + \
                   ["aastore"]
        if roll < 0.7:
            return [f"load {a}", "iconst 0", "aaload", "pop"]
        return [f"load {a}", "arraylength", "pop"]

    def _s_int_flip(self) -> List[str]:
        ints = self._locals_of(lambda t: t[0] == "int")
        if not ints:
            return []
        r = self.rng.choice(ints)
        return [f"iconst {self.rng.randint(0, 1)}", f"store {r}"]

    def _s_if_block(self, depth: int) -> List[str]:
        ints = self._locals_of(lambda t: t[0] == "int")
        if not ints:
            return []
        r = self.rng.choice(ints)
        l_else, l_end = self.g._label(), self.g._label()
        then = self.stmts(self.rng.randint(1, 2), depth + 1)
        other = self.stmts(self.rng.randint(1, 2), depth + 1)
        return ([f"load {r}", f"ifeq {l_else}"] + then +
                [f"goto {l_end}", f"{l_else}:"] + other + [f"{l_end}:"])


# --- public API ------------------------------------------------------------

def gen_source(seed: int, params: Optional[GenParams] = None) -> str:
    return _Gen(seed, params or GenParams()).source()


def gen_program(seed: int, params: Optional[GenParams] = None) -> ir.Program:
    return ir.parse_program(gen_source(seed, params))


def gen_scale_program(n_classes: int = 200,
                      target_instrs: int = 100_000) -> ir.Program:
    """Deterministic large workload for performance measurements."""
    per_method = 40
    lines = []
    made = 0
    n_methods = max(1, target_instrs // (n_classes * (per_method * 4 + 2)))
    for i in range(n_classes):
        sup = f"K{i - 1}" if i % 4 != 0 else ir.OBJECT
        lines.append(f"class K{i} extends {sup} {{")
        lines.append("  field f ref")
        lines.append("  ctor (0, 2) {")
        if sup != ir.OBJECT:
            lines += ["    load 0", f"    invokespecial {sup}.<init> 0"]
        lines += ["    load 0", "    aconst_null", f"    putfield K{i}.f",
                  "    return", "  }"]
        for j in range(n_methods):
            lines.append(f"  method m{j} (1, 3) {{")
            lines.append("    aconst_null")
            lines.append("    store 2")
            for _ in range(per_method):
                lines += ["    load 1", f"    ifnull E{made}",
                          f"    load 1", f"    getfield K{i}.f",
                          "    store 2", f"  E{made}:"]
                made += 1
            lines += ["    load 2", "    areturn", "  }"]
        if i == 0:
            # construct every class and call every method so the whole
            # program is reachable and actually analyzed
            main = ["  static main (0, 2) {"]
            for k in range(n_classes):
                main += [f"    new K{k}", "    dup",
                         f"    invokespecial K{k}.<init> 0", "    store 1"]
                for j in range(n_methods):
                    main += ["    load 1", "    load 1",
                             f"    invokevirtual K{k}.m{j} 1", "    pop"]
            main += ["    return", "  }"]
            lines += main
        lines.append("}")
    return ir.parse_program("\n".join(lines) + "\n")

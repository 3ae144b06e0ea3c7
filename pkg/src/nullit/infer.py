"""The whole-program non-null analysis.

Four components make up the abstract state:

  * per-method signatures (field-initialization precondition on `this`,
    one abstract value per parameter, initialization postcondition, and
    an abstract return value),
  * a flow-insensitive heap giving one abstract value per field,
  * flow-sensitive initialization facts for the current object, and
  * flow-sensitive abstract values for locals and stack slots.

Signatures are context-insensitive joins over all call sites (0-CFA
style).  Argument annotations are contravariant across overriding and
return values covariant; methods involved in overriding lose their
initialization pre/postconditions because a virtual call may resolve to
any implementation.

Solving is a FIFO worklist over program points with recorded
dependencies (field readers, callers); `solve_naive` computes the same
least fixpoint by chaotic round-robin iteration and exists as an
independent cross-check of the worklist bookkeeping.
"""

from __future__ import annotations

import gc
import json
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from . import ir
from .alias import AliasState, analyze_aliases
from .condition import CondFacts, analyze_conditions, branch_refinement
from .domain import (
    AVal, NONNULL, NULLABLE, NULLABLE_INIT, RAW_MINUS,
    join, leq, nonnull_refine, raw, tval_top,
)

Point = ir.ProgramPoint
Stack = Tuple[Optional[AVal], ...]  # None marks an integer slot
Locals = Dict[int, AVal]            # absent local = NonNull (bottom)
TVal = FrozenSet[str]               # names of still-UnDef current-class fields


@dataclass(frozen=True)
class AnalysisConfig:
    nullable_init: bool = False
    test_recovery: bool = False
    instanceof_recovery: bool = False
    deref_edge_refinement: bool = False

    @property
    def name(self) -> str:
        if self == BASIC:
            return "BASIC"
        if self == OPT:
            return "OPT"
        flags = [k for k, v in self.__dict__.items() if v]
        return "+".join(flags) or "BASIC"


BASIC = AnalysisConfig()
OPT = AnalysisConfig(True, True, True, True)


@dataclass
class MethodSig:
    this_pre: TVal
    args: List[Optional[AVal]]  # None for integer parameters
    post: TVal
    ret: Optional[AVal]         # None for void / int-free methods


@dataclass
class AbstractState:
    methods: Dict[ir.MethodId, MethodSig]
    heap: Dict[ir.FieldId, AVal]          # absent field = NonNull
    tvals: Dict[Point, TVal]
    locals: Dict[Point, Locals]
    stacks: Dict[Point, Stack]


@dataclass
class Solution:
    state: AbstractState
    config: AnalysisConfig
    reachable: Set[ir.MethodId]
    iterations: int
    program: ir.Program
    hierarchy: ir.Hierarchy
    shapes: ir.StackShapes
    aliases: Dict[ir.MethodId, AliasState]
    conds: Dict[ir.MethodId, CondFacts]

    def local_at(self, point: Point, r: int) -> AVal:
        return self.state.locals.get(point, {}).get(r, NONNULL)

    def heap_at(self, fid: ir.FieldId) -> AVal:
        return self.state.heap.get(fid, NONNULL)


def field_read_abstraction(receiver: AVal, fid: ir.FieldId, heap_value: AVal,
                           hierarchy: ir.Hierarchy,
                           trusted_via_this: bool = False) -> AVal:
    """Abstract result of reading `fid` through `receiver`.

    The heap annotation is only valid once the declaring class's
    constructor has finished for the object read from; otherwise the read
    may observe the implicit null.
    """
    decl_cls = fid.split(".", 1)[0]
    k = receiver.kind
    if k.value in ("NonNull", "NullableInit"):
        return heap_value
    if k.value == "Raw" and hierarchy.is_subclass(receiver.cls, decl_cls):
        return heap_value
    if trusted_via_this:
        return heap_value
    return NULLABLE


class _Solver:
    def __init__(self, program: ir.Program, config: AnalysisConfig,
                 hierarchy: Optional[ir.Hierarchy] = None,
                 shapes: Optional[ir.StackShapes] = None,
                 aliases: Optional[Dict[ir.MethodId, AliasState]] = None,
                 conds: Optional[Dict[ir.MethodId, CondFacts]] = None):
        self.program = program
        self.config = config
        self.h = hierarchy or ir.Hierarchy(program)
        self.shapes = shapes or ir.validate_stack_shapes(program, self.h)
        self.reach = ir.reachable_methods(program, self.h)
        self.cfgs = {mid: ir.build_cfg(self.h.methods[mid])
                     for mid in self.reach}
        if aliases is None:
            aliases = {mid: analyze_aliases(self.h.methods[mid],
                                            self.cfgs[mid], self.h)
                       for mid in self.reach}
        if conds is None:
            conds = {mid: analyze_conditions(self.h.methods[mid],
                                             self.cfgs[mid], aliases[mid],
                                             self.h)
                     for mid in self.reach}
        self.aliases = aliases
        self.conds = conds

        self.M: Dict[ir.MethodId, MethodSig] = {}
        self.H: Dict[ir.FieldId, AVal] = {}
        # per-point state is stored as per-method rows indexed by pc; a None
        # stack entry marks the point as not yet covered
        self.Ls: Dict[ir.MethodId, List[Optional[Locals]]] = {}
        self.Ss: Dict[ir.MethodId, List[Optional[Stack]]] = {}
        self.Ts: Dict[ir.MethodId, List[Optional[TVal]]] = {}
        self.kindrows: Dict[ir.MethodId, list] = {}
        for mid in self.reach:
            n = len(self.h.methods[mid].code) + 1
            self.Ss[mid] = [None] * n
            self.Ls[mid] = [None] * n
            self.Ts[mid] = [None] * n
            self.kindrows[mid] = [self.shapes.kinds.get((mid, pc))
                                  for pc in range(n)]

        # compact per-pc answers to the alias queries the transfer function
        # makes, so the hot loop does not walk the full alias states
        self.slotq: Dict[ir.MethodId, list] = {}
        for mid in self.reach:
            code = self.h.methods[mid].code
            al = aliases[mid]
            row = []
            for pc, ins in enumerate(code):
                op = ins.op
                if op in ("getfield", "putfield", "invokevirtual",
                          "aaload", "aastore", "arraylength"):
                    row.append(al.slot_aliases(pc, ins.receiver_depth())
                               if al.reachable(pc) else frozenset())
                elif op in ("ifnull", "ifnonnull"):
                    row.append(al.slot_aliases(pc, 0)
                               if al.reachable(pc) else frozenset())
                elif op == "invokespecial":
                    st = al.states.get(pc)
                    if st is None:
                        row.append((frozenset(), None, ()))
                    else:
                        rcv_aliases, fresh = st[0][-1 - ins.num]
                        idxs = ()
                        if fresh is not None:
                            keep = len(st[0]) - ins.num - 1
                            idxs = tuple(i for i in range(keep)
                                         if st[0][i][1] == fresh)
                        row.append((rcv_aliases, fresh, idxs))
                else:
                    row.append(None)
            self.slotq[mid] = row

        self.field_readers: Dict[ir.FieldId, Set[Point]] = {}
        self.ret_readers: Dict[ir.MethodId, Set[Point]] = {}
        self.post_readers: Dict[ir.MethodId, Set[Point]] = {}

        self.work: deque = deque()
        self.inwork: Set[Point] = set()
        self.iterations = 0
        self._scache: Dict[Stack, Stack] = {}
        self._lcache: Dict[tuple, Locals] = {}

        # closures of the override relation, restricted to reachable methods
        self.down: Dict[ir.MethodId, List[ir.MethodId]] = {}
        self.up: Dict[ir.MethodId, List[ir.MethodId]] = {}
        pairs = [(sub, sup) for sub, sup in self.h.override_pairs()
                 if sub in self.reach and sup in self.reach]
        for mid in self.reach:
            self.down[mid] = [mid]
            self.up[mid] = [mid]
        for sub, sup in pairs:
            self.down[sup].append(sub)
            self.up[sub].append(sup)

        self._init_state(pairs)

    # --- initial constraints (override variance, entry seeding) ----------

    def _init_state(self, override_pairs):
        for mid in sorted(self.reach):
            m = self.h.methods[mid]
            kinds = self.shapes.param_kinds[mid]
            args: List[Optional[AVal]] = [
                NONNULL if k == ir.REF else None for k in kinds
            ]
            sig = MethodSig(this_pre=frozenset(), args=args,
                            post=frozenset(),
                            ret=NONNULL if m.returns_ref() else None)
            self.M[mid] = sig
        # entry parameters are unconstrained inputs
        entry_sig = self.M[self.program.entry]
        entry_sig.args = [NULLABLE if a is not None else None
                          for a in entry_sig.args]
        # dynamic dispatch: overriding methods assume nothing about `this`,
        # overridden methods promise nothing about initialization
        for sub, sup in override_pairs:
            self.M[sub].this_pre = tval_top(
                f.name for f in self.h.fields_of(sub[0]))
            self.M[sup].post = tval_top(
                f.name for f in self.h.fields_of(sup[0]))
        for mid in sorted(self.reach):
            self._seed_entry(mid)

    def _seed_entry(self, mid: ir.MethodId):
        m = self.h.methods[mid]
        sig = self.M[mid]
        locals_: Locals = {}
        base = 0
        if m.has_this():
            if m.kind == ir.CTOR and self.h.super_of[mid[0]] == ir.OBJECT:
                locals_[0] = raw(ir.OBJECT)  # implicit super-call done
            else:
                locals_[0] = RAW_MINUS
            base = 1
        for i, a in enumerate(sig.args):
            if a is not None and a != NONNULL:
                locals_[base + i] = a
        if m.kind == ir.CTOR:
            tval = tval_top(f.name for f in self.h.fields_of(mid[0]))
        elif m.kind == ir.VIRTUAL:
            tval = sig.this_pre
        else:
            tval = frozenset()
        self._join_into((mid, 0), (), locals_, tval)

    # --- state joins ------------------------------------------------------

    def _intern_locals(self, locals_: Locals) -> Locals:
        key = tuple(sorted(locals_.items()))
        got = self._lcache.get(key)
        if got is None:
            self._lcache[key] = got = locals_
        return got

    def _enqueue(self, point: Point):
        if point not in self.inwork:
            self.work.append(point)
            self.inwork.add(point)

    def _join_into(self, point: Point, stack: Stack, locals_: Locals,
                   tval: TVal):
        changed = False
        mid, pc = point
        srow = self.Ss[mid]
        old_stack = srow[pc]
        if old_stack is None:
            t = tuple(stack)
            srow[pc] = self._scache.setdefault(t, t)
            self.Ls[mid][pc] = self._intern_locals(
                {r: v for r, v in locals_.items() if v != NONNULL})
            self.Ts[mid][pc] = tval
            changed = True
        else:
            new_stack = []
            for a, b in zip(old_stack, stack):
                if a is None or b is None:
                    new_stack.append(None)
                else:
                    new_stack.append(join(a, b, self.h))
            new_stack = tuple(new_stack)
            if new_stack != old_stack:
                srow[pc] = self._scache.setdefault(new_stack, new_stack)
                changed = True
            old_locals = self.Ls[mid][pc]
            updates = None
            for r, v in locals_.items():
                if v == NONNULL:
                    continue
                old = old_locals.get(r, NONNULL)
                nv = join(old, v, self.h)
                if nv != old:
                    if updates is None:
                        updates = {}
                    updates[r] = nv
            if updates:
                # locals maps are interned and shared between points, so a
                # change replaces the map instead of mutating it
                nl = dict(old_locals)
                nl.update(updates)
                self.Ls[mid][pc] = self._intern_locals(nl)
                changed = True
            trow = self.Ts[mid]
            if not tval <= trow[pc]:
                trow[pc] = trow[pc] | tval
                changed = True
        if changed:
            self._enqueue(point)

    def _raise_heap(self, fid: ir.FieldId, v: AVal):
        if v == NONNULL:
            return
        old = self.H.get(fid, NONNULL)
        nv = join(old, v, self.h)
        if nv != old:
            self.H[fid] = nv
            for p in self.field_readers.get(fid, ()):
                self._enqueue(p)

    def _raise_arg(self, mid: ir.MethodId, i: int, v: AVal):
        # argument contravariance: the constraint flows down to overriders
        for tgt in self.down.get(mid, (mid,)):
            sig = self.M.get(tgt)
            if sig is None or sig.args[i] is None:
                continue
            nv = join(sig.args[i], v, self.h)
            if nv != sig.args[i]:
                sig.args[i] = nv
                self._seed_entry(tgt)

    def _raise_this(self, mid: ir.MethodId, undefs: TVal):
        sig = self.M.get(mid)
        if sig is None:
            return
        if not undefs <= sig.this_pre:
            sig.this_pre = sig.this_pre | undefs
            self._seed_entry(mid)

    def _raise_ret(self, mid: ir.MethodId, v: AVal):
        # return covariance: the value flows up to overridden declarations
        for tgt in self.up.get(mid, (mid,)):
            sig = self.M.get(tgt)
            if sig is None or sig.ret is None:
                continue
            nv = join(sig.ret, v, self.h)
            if nv != sig.ret:
                sig.ret = nv
                for p in self.ret_readers.get(tgt, ()):
                    self._enqueue(p)

    def _raise_post(self, mid: ir.MethodId, undefs: TVal):
        sig = self.M[mid]
        if not undefs <= sig.post:
            sig.post = sig.post | undefs
            for p in self.post_readers.get(mid, ()):
                self._enqueue(p)

    # --- solving ----------------------------------------------------------

    def _covered_points(self):
        return [(mid, pc) for mid in sorted(self.Ss)
                for pc, st in enumerate(self.Ss[mid]) if st is not None]

    def solve_worklist(self) -> Solution:
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            while self.work:
                point = self.work.popleft()
                self.inwork.discard(point)
                self.iterations += 1
                self._process(point)
        finally:
            if was_enabled:
                gc.enable()
        return self._solution()

    def solve_naive(self) -> Solution:
        """Chaotic round-robin iteration to the same least fixpoint."""
        self.work.clear()
        self.inwork.clear()
        changed = True
        while changed:
            # covered points may grow between sweeps
            points = self._covered_points()
            before = self._fingerprint()
            for point in points:
                self.iterations += 1
                self._process(point)
            self.work.clear()
            self.inwork.clear()
            changed = self._fingerprint() != before
        return self._solution()

    def _fingerprint(self):
        return (
            {mid: (s.this_pre, tuple(s.args), s.post, s.ret)
             for mid, s in self.M.items()},
            dict(self.H),
            {(mid, pc): dict(l) for mid in self.Ls
             for pc, l in enumerate(self.Ls[mid]) if l is not None},
            {(mid, pc): st for mid in self.Ss
             for pc, st in enumerate(self.Ss[mid]) if st is not None},
            {(mid, pc): t for mid in self.Ts
             for pc, t in enumerate(self.Ts[mid]) if t is not None},
        )

    def _solution(self) -> Solution:
        stacks = {(mid, pc): st for mid in self.Ss
                  for pc, st in enumerate(self.Ss[mid]) if st is not None}
        locs = {(mid, pc): l for mid in self.Ls
                for pc, l in enumerate(self.Ls[mid]) if l is not None}
        tvals = {(mid, pc): t for mid in self.Ts
                 for pc, t in enumerate(self.Ts[mid]) if t is not None}
        state = AbstractState(self.M, self.H, tvals, locs, stacks)
        return Solution(state, self.config, self.reach, self.iterations,
                        self.program, self.h, self.shapes, self.aliases,
                        self.conds)

    # --- per-instruction transfer ----------------------------------------

    def _process(self, point: Point):
        for succ, stack, locals_, tval in self._transfer(point):
            self._join_into(succ, stack, locals_, tval)

    def _transfer(self, point: Point):
        mid, pc = point
        m = self.h.methods[mid]
        ins = m.code[pc]
        op = ins.op
        stack = list(self.Ss[mid][pc])
        # locals maps are interned/shared: copy before the one op (store)
        # that mutates, everything else only reads or replaces
        locals_ = self.Ls[mid][pc]
        tval = self.Ts[mid][pc]
        aset = self.slotq[mid][pc]
        out = []

        def push(v):
            stack.append(v)

        def fall(stack_=None, locals__=None, tval_=None):
            out.append(((mid, pc + 1),
                        tuple(stack_ if stack_ is not None else stack),
                        locals__ if locals__ is not None else locals_,
                        tval_ if tval_ is not None else tval))

        def refined(locs, alias_set):
            nl = dict(locs)
            for r in alias_set:
                nv = nonnull_refine(nl.get(r, NONNULL))
                if nv == NONNULL:
                    nl.pop(r, None)
                else:
                    nl[r] = nv
            return nl

        if op in ("nop",):
            fall()
        elif op == "goto":
            out.append(((mid, ins.target), tuple(stack), locals_, tval))
        elif op == "aconst_null":
            push(NULLABLE_INIT if self.config.nullable_init else NULLABLE)
            fall()
        elif op == "iconst":
            push(None)
            fall()
        elif op == "load":
            kind = self.kindrows[mid][pc + 1][len(stack)]
            if kind == ir.REF:
                push(locals_.get(ins.num, NONNULL))
            else:
                push(None)
            fall()
        elif op == "store":
            v = stack.pop()
            locals_ = dict(locals_)
            if v is None or v == NONNULL:
                locals_.pop(ins.num, None)
            else:
                locals_[ins.num] = v  # strong update
            fall()
        elif op == "dup":
            push(stack[-1])
            fall()
        elif op == "pop":
            stack.pop()
            fall()
        elif op == "new":
            push(RAW_MINUS)
            fall()
        elif op == "instanceof":
            stack.pop()
            push(None)
            fall()
        elif op == "getfield":
            fid = ir.field_id(ins.cls, ins.member)
            rcv = stack.pop()
            fkind = next(f.kind for f in self.h.fields_of(ins.cls)
                         if f.name == ins.member)
            if fkind == ir.INT:
                push(None)
            else:
                self.field_readers.setdefault(fid, set()).add(point)
                trusted = (m.has_this() and 0 in aset
                           and ins.cls == mid[0]
                           and ins.member not in tval)
                push(field_read_abstraction(
                    rcv, fid, self.H.get(fid, NONNULL), self.h, trusted))
            self._deref_fall(out, point, ins, stack, locals_, tval,
                             aset)
        elif op == "putfield":
            fid = ir.field_id(ins.cls, ins.member)
            v = stack.pop()
            stack.pop()
            if v is not None:
                self._raise_heap(fid, v)
            ntval = tval
            if m.has_this() and 0 in aset and ins.cls == mid[0]:
                ntval = tval - {ins.member}  # strong update on T
            self._deref_fall(out, point, ins, stack, locals_, ntval,
                             aset)
        elif op == "invokestatic":
            tgt = self.h.resolve(ins.cls, ins.member, ins.num, (ir.STATIC,))
            args = [stack.pop() for _ in range(ins.num)][::-1]
            for i, a in enumerate(args):
                if a is not None:
                    self._raise_arg(tgt, i, a)
            if self.h.methods[tgt].returns_ref():
                self.ret_readers.setdefault(tgt, set()).add(point)
                push(self.M[tgt].ret)
            fall()
        elif op == "invokevirtual":
            tgt = self.h.resolve(ins.cls, ins.member, ins.num, (ir.VIRTUAL,))
            args = [stack.pop() for _ in range(ins.num)][::-1]
            rcv = stack.pop()
            rcv_aliases = aset
            for i, a in enumerate(args):
                if a is not None:
                    self._raise_arg(tgt, i, a)
            self._raise_this(tgt, self._this_pre_contrib(
                mid, m, tgt, rcv, rcv_aliases, tval))
            ntval = tval
            if m.has_this() and 0 in rcv_aliases and tgt[0] == mid[0]:
                # trust the callee's postcondition on our own fields
                self.post_readers.setdefault(tgt, set()).add(point)
                newly_def = frozenset(
                    f.name for f in self.h.fields_of(tgt[0])
                ) - self.M[tgt].post
                ntval = tval - newly_def
            if self.h.methods[tgt].returns_ref():
                self.ret_readers.setdefault(tgt, set()).add(point)
                push(self.M[tgt].ret)
            self._deref_fall(out, point, ins, stack, locals_, ntval,
                             aset)
        elif op == "invokespecial":
            tgt = self.h.ctor_of(ins.cls)
            args = [stack.pop() for _ in range(ins.num)][::-1]
            stack.pop()
            for i, a in enumerate(args):
                if a is not None:
                    self._raise_arg(tgt, i, a)
            rcv_aliases, rcv_fresh, fresh_idxs = aset
            nlocals = locals_
            if rcv_fresh is not None:
                # construction of a fresh object completes here: every
                # copy of the reference is fully initialized afterwards
                for idx in fresh_idxs:
                    stack[idx] = NONNULL
                nlocals = dict(locals_)
                for r in rcv_aliases:
                    nlocals[r] = NONNULL
            elif m.kind == ir.CTOR and 0 in rcv_aliases \
                    and self.h.super_of[mid[0]] == ins.cls:
                # super-call: this advances one rawness stage
                nlocals = dict(locals_)
                nlocals[0] = raw(ins.cls)
            self._deref_fall(out, point, ins, stack, nlocals, tval,
                             rcv_aliases)
        elif op in ("ifnull", "ifnonnull"):
            stack.pop()
            aliases = aset
            taken_locals, fall_locals = locals_, locals_
            if self.config.test_recovery and aliases:
                if op == "ifnull":
                    fall_locals = refined(locals_, aliases)
                else:
                    taken_locals = refined(locals_, aliases)
            out.append(((mid, pc + 1), tuple(stack), fall_locals, tval))
            out.append(((mid, ins.target), tuple(stack), taken_locals, tval))
        elif op in ("ifeq", "ifne"):
            stack.pop()
            taken_locals, fall_locals = locals_, locals_
            if self.config.instanceof_recovery:
                facts = self.conds[mid]
                taken = branch_refinement(facts, pc, op, edge_taken=True)
                fallset = branch_refinement(facts, pc, op, edge_taken=False)
                if taken:
                    taken_locals = refined(locals_, taken)
                if fallset:
                    fall_locals = refined(locals_, fallset)
            out.append(((mid, pc + 1), tuple(stack), fall_locals, tval))
            out.append(((mid, ins.target), tuple(stack), taken_locals, tval))
        elif op == "areturn":
            v = stack.pop()
            self._raise_ret(mid, v)
            self._raise_post(mid, tval)
        elif op == "return":
            self._raise_post(mid, tval)
            if m.kind == ir.CTOR:
                # fields never written in the constructor are implicitly
                # initialized to null at its end
                injected = NULLABLE_INIT if self.config.nullable_init \
                    else NULLABLE
                for f in self.h.fields_of(mid[0]):
                    if f.kind == ir.REF and f.name in tval:
                        self._raise_heap(ir.field_id(mid[0], f.name), injected)
        elif op == "newarray":
            stack.pop()
            push(NONNULL)
            fall()
        elif op == "aaload":
            stack.pop()
            stack.pop()
            push(NULLABLE)  # array cells are untracked
            self._deref_fall(out, point, ins, stack, locals_, tval, aset)
        elif op == "aastore":
            stack.pop()
            stack.pop()
            stack.pop()
            self._deref_fall(out, point, ins, stack, locals_, tval, aset)
        elif op == "arraylength":
            stack.pop()
            push(None)
            self._deref_fall(out, point, ins, stack, locals_, tval, aset)
        else:
            raise AssertionError(op)
        return out

    def _deref_fall(self, out, point, ins, stack, locals_, tval,
                    aliases=frozenset()):
        """Fallthrough of a dereference: the receiver was non-null."""
        mid, pc = point
        if self.config.deref_edge_refinement:
            if aliases:
                nl = dict(locals_)
                for r in aliases:
                    nv = nonnull_refine(nl.get(r, NONNULL))
                    if nv == NONNULL:
                        nl.pop(r, None)
                    else:
                        nl[r] = nv
                locals_ = nl
        out.append(((mid, pc + 1), tuple(stack), locals_, tval))

    def _this_pre_contrib(self, mid, m, tgt, rcv: AVal, rcv_aliases,
                          tval: TVal) -> TVal:
        """Initialization assumption a call imposes on the callee's this."""
        tgt_fields = frozenset(f.name for f in self.h.fields_of(tgt[0]))
        if m.has_this() and 0 in rcv_aliases and tgt[0] == mid[0]:
            return tval & tgt_fields
        if rcv.kind.value in ("NonNull", "NullableInit"):
            return frozenset()
        if rcv.kind.value == "Raw" and self.h.is_subclass(rcv.cls, tgt[0]):
            return frozenset()
        return tgt_fields  # no guarantee: everything may be uninitialized


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def solve(program: ir.Program, config: AnalysisConfig = OPT,
          **kw) -> Solution:
    return _Solver(program, config, **kw).solve_worklist()


def solve_naive(program: ir.Program, config: AnalysisConfig = OPT,
                **kw) -> Solution:
    return _Solver(program, config, **kw).solve_naive()


# ---------------------------------------------------------------------------
# solution checking
# ---------------------------------------------------------------------------

def check_solution(solution: Solution) -> List[str]:
    """Re-evaluate every constraint against a finished solution.

    Returns a list of violated-constraint descriptions (empty = valid).
    Raising any component strictly is allowed; lowering is not.
    """
    s = _Solver(solution.program, solution.config,
                hierarchy=solution.hierarchy, shapes=solution.shapes,
                aliases=solution.aliases, conds=solution.conds)
    state = solution.state
    h = solution.hierarchy
    violations: List[str] = []
    # adopt the candidate state
    s.M = {mid: MethodSig(sig.this_pre, list(sig.args), sig.post, sig.ret)
           for mid, sig in state.methods.items()}
    s.H = dict(state.heap)
    for mid in s.Ss:
        n = len(s.Ss[mid])
        s.Ss[mid] = [None] * n
        s.Ls[mid] = [None] * n
        s.Ts[mid] = [None] * n
    for p, st in state.stacks.items():
        if p[0] in s.Ss and p[1] < len(s.Ss[p[0]]):
            s.Ss[p[0]][p[1]] = st
            s.Ls[p[0]][p[1]] = dict(state.locals[p])
            s.Ts[p[0]][p[1]] = state.tvals[p]
    s.work.clear()
    s.inwork.clear()

    def covered(point):
        row = s.Ss.get(point[0])
        return row is not None and point[1] < len(row) \
            and row[point[1]] is not None

    # rule-1 style global constraints
    for sub, sup in h.override_pairs():
        if sub not in s.M or sup not in s.M:
            continue
        for i, (a, b) in enumerate(zip(s.M[sup].args, s.M[sub].args)):
            if a is not None and b is not None and not leq(a, b, h):
                violations.append(
                    f"argument contravariance broken for {sub} arg {i}")
        top_sub = frozenset(f.name for f in h.fields_of(sub[0]))
        if not top_sub <= s.M[sub].this_pre:
            violations.append(f"this precondition of override {sub} not top")
        top_sup = frozenset(f.name for f in h.fields_of(sup[0]))
        if not top_sup <= s.M[sup].post:
            violations.append(f"postcondition of overridden {sup} not top")
        if s.M[sub].ret is not None and s.M[sup].ret is not None \
                and not leq(s.M[sub].ret, s.M[sup].ret, h):
            violations.append(f"return covariance broken for {sub}")
    # entry wiring
    entry_sig = s.M.get(solution.program.entry)
    if entry_sig is not None:
        for i, a in enumerate(entry_sig.args):
            if a is not None and not leq(NULLABLE, a, h):
                violations.append("entry parameters must admit null")

    fingerprint = s._fingerprint()
    for mid in sorted(solution.reachable):
        if mid not in s.M:
            violations.append(f"reachable method {mid} missing from solution")
            continue
        if not covered((mid, 0)):
            violations.append(f"entry point of {mid} not covered")
            continue
        m = h.methods[mid]
        for pc in range(len(m.code)):
            point = (mid, pc)
            if not covered(point):
                continue
            for succ, stack, locals_, tval in s._transfer(point):
                if not covered(succ):
                    violations.append(f"{point}: successor {succ} not covered")
                    continue
                succ_stack = s.Ss[succ[0]][succ[1]]
                succ_locals = s.Ls[succ[0]][succ[1]]
                for i, (a, b) in enumerate(zip(stack, succ_stack)):
                    if a is not None and b is not None and not leq(a, b, h):
                        violations.append(
                            f"{point}: stack slot {i} not covered at {succ}")
                for r, v in locals_.items():
                    if not leq(v, succ_locals.get(r, NONNULL), h):
                        violations.append(
                            f"{point}: local {r} not covered at {succ}")
                if not tval <= s.Ts[succ[0]][succ[1]]:
                    violations.append(
                        f"{point}: initialization facts not covered at {succ}")
    # global raises performed by the sweep must have been no-ops
    if s._fingerprint() != fingerprint:
        violations.append("global constraints not at fixpoint "
                          "(heap or signature below required value)")
    # re-seeding entries must also be subsumed
    return violations


# ---------------------------------------------------------------------------
# annotations and dereference classification
# ---------------------------------------------------------------------------

@dataclass
class Annotations:
    fields: Dict[ir.FieldId, AVal]
    params: Dict[ir.MethodId, Dict[int, AVal]]
    returns: Dict[ir.MethodId, AVal]

    def counts(self) -> Dict[str, Tuple[int, int]]:
        """category -> (total, non-null) counts."""
        def tally(vals):
            vals = list(vals)
            return (len(vals), sum(1 for v in vals if v.excludes_null()))
        return {
            "fields": tally(self.fields.values()),
            "parameters": tally(v for d in self.params.values()
                                for v in d.values()),
            "returns": tally(self.returns.values()),
        }

    def total_nonnull_pct(self) -> float:
        counts = self.counts()
        total = sum(t for t, _ in counts.values())
        nn = sum(n for _, n in counts.values())
        return 100.0 * nn / total if total else 100.0


def derive_annotations(solution: Solution) -> Annotations:
    h = solution.hierarchy
    # classes that contribute annotations: those with a reachable method
    # or instantiated from reachable code
    live: Set[str] = {mid[0] for mid in solution.reachable}
    for mid in solution.reachable:
        for ins in h.methods[mid].code:
            if ins.op == "new":
                live.add(ins.cls)
    live.discard(ir.OBJECT)
    fields = {}
    for cls in sorted(live):
        for f in h.fields_of(cls):
            if f.kind == ir.REF:
                fid = ir.field_id(cls, f.name)
                fields[fid] = solution.heap_at(fid)
    params: Dict[ir.MethodId, Dict[int, AVal]] = {}
    returns: Dict[ir.MethodId, AVal] = {}
    for mid in sorted(solution.reachable):
        if mid[0] == ir.OBJECT:
            continue
        sig = solution.state.methods[mid]
        ps = {i: a for i, a in enumerate(sig.args) if a is not None}
        if ps:
            params[mid] = ps
        if sig.ret is not None:
            returns[mid] = sig.ret
    return Annotations(fields, params, returns)


DEREF_CATEGORY = {
    "getfield": "field read",
    "putfield": "field write",
    "invokevirtual": "method call",
    "invokespecial": "method call",
    "aaload": "array operation",
    "aastore": "array operation",
    "arraylength": "array operation",
}


@dataclass
class DerefReport:
    # point -> (category, safe?)
    entries: Dict[Point, Tuple[str, bool]]

    def counts(self) -> Dict[str, Tuple[int, int]]:
        out: Dict[str, List[int]] = {}
        for cat, safe in self.entries.values():
            t = out.setdefault(cat, [0, 0])
            t[0] += 1
            t[1] += int(safe)
        return {cat: (t, s) for cat, (t, s) in out.items()}

    def totals(self) -> Tuple[int, int]:
        total = len(self.entries)
        safe = sum(1 for _, s in self.entries.values() if s)
        return total, safe

    def safe_pct(self) -> float:
        total, safe = self.totals()
        return 100.0 * safe / total if total else 100.0

    def is_safe(self, point: Point) -> Optional[bool]:
        e = self.entries.get(point)
        return None if e is None else e[1]


def classify_dereferences(solution: Solution) -> DerefReport:
    h = solution.hierarchy
    entries: Dict[Point, Tuple[str, bool]] = {}
    for mid in sorted(solution.reachable):
        m = h.methods[mid]
        for pc, ins in enumerate(m.code):
            if ins.op not in ir.DEREF_OPS:
                continue
            point = (mid, pc)
            stack = solution.state.stacks.get(point)
            if stack is None:
                continue  # never reached abstractly
            depth = ins.receiver_depth()
            if ins.op == "invokespecial":
                _, fresh = solution.aliases[mid].slot(pc, depth)
                if fresh is not None:
                    continue  # constructing a fresh object: not a deref
            rcv = stack[-1 - depth]
            safe = rcv is not None and rcv.excludes_null()
            entries[point] = (DEREF_CATEGORY[ins.op], safe)
    return DerefReport(entries)


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def _point_key(point: Point) -> str:
    (cls, name, arity), pc = point
    return f"{cls}.{name}/{arity}:{pc}"


def _mid_key(mid: ir.MethodId) -> str:
    return f"{mid[0]}.{mid[1]}/{mid[2]}"


def solution_to_json(solution: Solution) -> str:
    st = solution.state

    def aval(v):
        return v.annotation() if v is not None else None

    doc = {
        "config": solution.config.name,
        "iterations_note": "solver-dependent, excluded",
        "methods": {
            _mid_key(mid): {
                "this_pre": sorted(sig.this_pre),
                "args": [aval(a) for a in sig.args],
                "post": sorted(sig.post),
                "ret": aval(sig.ret),
            }
            for mid, sig in sorted(st.methods.items())
        },
        "heap": {fid: aval(v) for fid, v in sorted(st.heap.items())},
        "locals": {
            _point_key(p): {str(r): aval(v) for r, v in sorted(l.items())}
            for p, l in sorted(st.locals.items()) if l
        },
        "stacks": {
            _point_key(p): [aval(v) for v in s]
            for p, s in sorted(st.stacks.items()) if s
        },
        "tvals": {
            _point_key(p): sorted(t)
            for p, t in sorted(st.tvals.items()) if t
        },
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def annotations_to_json(ann: Annotations) -> str:
    doc = {
        "fields": {fid: v.annotation() for fid, v in sorted(ann.fields.items())},
        "params": {
            _mid_key(mid): {str(i): v.annotation() for i, v in sorted(d.items())}
            for mid, d in sorted(ann.params.items())
        },
        "returns": {_mid_key(mid): v.annotation()
                    for mid, v in sorted(ann.returns.items())},
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def deref_report_to_json(report: DerefReport) -> str:
    doc = {
        _point_key(p): {"category": cat, "safe": safe}
        for p, (cat, safe) in sorted(report.entries.items())
    }
    return json.dumps(doc, indent=1, sort_keys=True)

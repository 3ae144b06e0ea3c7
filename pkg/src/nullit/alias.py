"""Must-alias analysis between operand-stack slots and local variables.

Each reference slot carries the set of locals it provably equals on every
execution reaching the point, plus an optional freshness token marking the
still-unconstructed result of a `new`.  Branch tests consume stack slots,
so this is what lets a test refine the *local* the tested value came from.

A store also records local-to-local equalities (storing a slot that equals
local 1 into local 3 makes 3 ~ 1), so a later load of either local pushes
the full equality class.  Merges intersect everything (must-semantics);
freshness tokens only survive a merge when both sides carry the same one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

from . import ir

# one stack slot: (locals the slot must equal, freshness token or None);
# the token is the pc of the `new` that produced the value
Slot = Tuple[FrozenSet[int], Optional[int]]
# (stack, local equalities as a symmetric+transitive set per local)
State = Tuple[Tuple[Slot, ...], Tuple[FrozenSet[int], ...]]

EMPTY: FrozenSet[int] = frozenset()


@dataclass
class AliasState:
    """Per-pc slot information for one method; absent pc = unreachable."""

    states: Dict[int, State]

    def reachable(self, pc: int) -> bool:
        return pc in self.states

    def slot(self, pc: int, depth: int) -> Slot:
        """depth 0 is the top of the stack."""
        st = self.states.get(pc)
        if st is None:
            return (EMPTY, None)  # unreachable: all-unknown
        stack = st[0]
        if depth >= len(stack):
            raise IndexError(f"depth {depth} out of range at pc {pc}")
        return stack[-1 - depth]

    def slot_aliases(self, pc: int, depth: int) -> FrozenSet[int]:
        return self.slot(pc, depth)[0]


def analyze_aliases(method: ir.MethodDecl, cfg, hierarchy: ir.Hierarchy) -> AliasState:
    """Forward must-alias dataflow over one method."""
    nlocals = method.locals_count
    entry: State = ((), (EMPTY,) * nlocals)
    states: Dict[int, State] = {0: entry}
    work: List[int] = [0]
    while work:
        pc = work.pop()
        out = _transfer(method.code[pc], pc, states[pc], hierarchy)
        for succ, _tag in cfg[pc]:
            if succ not in states:
                states[succ] = out
                work.append(succ)
            else:
                merged = _merge(states[succ], out)
                if merged != states[succ]:
                    states[succ] = merged
                    work.append(succ)
    return AliasState(states)


def _merge(a: State, b: State) -> State:
    if a is b:
        return a
    (sa, ea), (sb, eb) = a, b
    if sa is sb and ea is eb:
        return a
    assert len(sa) == len(sb), "stack heights diverge at merge"
    stack = tuple((xa & xb, fa if fa == fb else None)
                  for (xa, fa), (xb, fb) in zip(sa, sb))
    equiv = tuple(x & y for x, y in zip(ea, eb))
    return (stack, equiv)


UNKNOWN_SLOT: Slot = (EMPTY, None)


def _transfer(ins: ir.Instr, pc: int, state: State, h: ir.Hierarchy) -> State:
    # unchanged components are returned by reference so that states of
    # consecutive points share structure
    op = ins.op
    stack0, equiv = state
    if op == "load":
        r = ins.num
        return (stack0 + ((frozenset({r}) | equiv[r], None),), equiv)
    if op == "store":
        stack = list(stack0)
        aliases, fresh = stack.pop()
        r = ins.num
        # r is reassigned: kill the old r everywhere, then record the new
        # equalities carried by the stored value
        stack = [(s - {r}, f) if r in s else (s, f) for (s, f) in stack]
        nequiv = [e - {r} if r in e else e for e in equiv]
        cls = set(aliases) - {r}
        for l in list(cls):
            cls |= nequiv[l]  # keep classes transitively closed
        cls.discard(r)
        nequiv[r] = frozenset(cls)
        for l in cls:
            nequiv[l] = nequiv[l] | {r}
        if fresh is not None:
            # copies of the same fresh object now equal r as well
            stack = [(s | {r} if f == fresh else s, f) for (s, f) in stack]
        return (tuple(stack), tuple(nequiv))
    if op == "dup":
        return (stack0 + (stack0[-1],), equiv)
    if op == "new":
        return (stack0 + ((EMPTY, pc),), equiv)
    if op == "invokespecial":
        stack = list(stack0)
        del stack[len(stack) - ins.num:]
        _, fresh = stack.pop()
        if fresh is not None:
            # the object is constructed now; drop the marker from copies
            stack = [(s, None) if f == fresh else (s, f) for (s, f) in stack]
        return (tuple(stack), equiv)
    pops, pushes = ir.stack_effect(ins, h)
    stack0 = stack0[:len(stack0) - pops] if pops else stack0
    if pushes:
        stack0 = stack0 + (UNKNOWN_SLOT,) * pushes
    return (stack0, equiv)

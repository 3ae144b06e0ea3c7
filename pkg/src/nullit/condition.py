"""Tracking `instanceof` results to the conditional jump that consumes them.

`instanceof C` pushes 1 only when the tested reference is non-null, but the
later `ifeq`/`ifne` sees just an integer.  For every integer stack slot we
keep an under-approximated set of locals that are non-null whenever that
slot holds 1: `instanceof` seeds the set with the must-aliases of the
tested reference, kills and merges shrink it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Tuple

from . import ir
from .alias import AliasState

Facts = Tuple[FrozenSet[int], ...]  # aligned with the stack, bottom first

EMPTY: FrozenSet[int] = frozenset()


@dataclass
class CondFacts:
    """Fact sets per pc; `jump_facts` keeps only ifeq/ifne consumers."""

    states: Dict[int, Facts]
    jump_facts: Dict[int, FrozenSet[int]]  # pc of ifeq/ifne -> top-slot facts

    def top_facts(self, pc: int) -> FrozenSet[int]:
        return self.jump_facts.get(pc, EMPTY)


def analyze_conditions(method: ir.MethodDecl, cfg, aliases: AliasState,
                       hierarchy: ir.Hierarchy) -> CondFacts:
    states: Dict[int, Facts] = {0: ()}
    work: List[int] = [0]
    while work:
        pc = work.pop()
        out = _transfer(method.code[pc], pc, states[pc], aliases, hierarchy)
        for succ, _tag in cfg[pc]:
            if succ not in states:
                states[succ] = out
                work.append(succ)
            else:
                cur = states[succ]
                if cur is out:
                    continue
                merged = tuple(a if a is b else a & b
                               for a, b in zip(cur, out))
                if merged != cur:
                    states[succ] = merged
                    work.append(succ)
    jump_facts = {
        pc: states[pc][-1]
        for pc, ins in enumerate(method.code)
        if ins.op in ("ifeq", "ifne") and pc in states and states[pc]
    }
    return CondFacts(states, jump_facts)


def _transfer(ins: ir.Instr, pc: int, facts: Facts, aliases: AliasState,
              h: ir.Hierarchy) -> Facts:
    # unchanged fact tuples are returned by reference so that states of
    # consecutive points share structure
    op = ins.op
    if op == "instanceof":
        # result is 1 only if the tested reference was non-null, so every
        # local it must-aliases is non-null too
        return facts[:-1] + (aliases.slot_aliases(pc, 0),)
    if op == "dup":
        return facts + (facts[-1],)
    if op == "store":
        r = ins.num
        return tuple(s - {r} if r in s else s for s in facts[:-1])
    pops, pushes = ir.stack_effect(ins, h)
    if pops:
        facts = facts[:len(facts) - pops]
    if pushes:
        facts = facts + (EMPTY,) * pushes
    return facts


def branch_refinement(facts: CondFacts, pc: int, op: str,
                      edge_taken: bool) -> FrozenSet[int]:
    """Locals known non-null on one outgoing edge of an ifeq/ifne.

    The consumed slot is known to be 1 on the taken edge of `ifne` and on
    the fallthrough edge of `ifeq`.
    """
    if op not in ("ifeq", "ifne"):
        raise ValueError(f"not a boolean branch: {op}")
    one_edge_taken = (op == "ifne")
    if edge_taken == one_edge_taken:
        return facts.top_facts(pc)
    return EMPTY

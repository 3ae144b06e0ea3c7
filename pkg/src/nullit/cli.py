"""Command-line front end.

Subcommands:

  infer  -- run the pipeline on .nir files and report annotations,
            dereference safety and run statistics
  check  -- self-check: solve with both fixpoint engines, compare, and
            re-verify every constraint against the solution
  run    -- execute a program concretely, optionally dumping the trace
  fuzz   -- differential testing: generated programs, both configs,
            concrete traces checked against the inference results

Exit codes: 0 success, 1 input error, 2 internal invariant breach.
The oracle step budget can be set with the NULLIT_BUDGET environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import resource
import sys
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import gen, infer, ir, oracle
from .domain import NONNULL, NULLABLE


def _budget(args) -> int:
    if getattr(args, "budget", None):
        return args.budget
    return int(os.environ.get("NULLIT_BUDGET", "100000"))


def _config(args) -> infer.AnalysisConfig:
    if getattr(args, "basic", False):
        cfg = infer.BASIC
    else:
        cfg = infer.OPT
    return infer.AnalysisConfig(
        nullable_init=cfg.nullable_init and not args.no_nullable_init,
        test_recovery=cfg.test_recovery and not args.no_test_recovery,
        instanceof_recovery=cfg.instanceof_recovery and not args.no_instanceof,
        deref_edge_refinement=(cfg.deref_edge_refinement
                               and not args.no_deref_edges),
    )


def _add_config_flags(sub):
    g = sub.add_mutually_exclusive_group()
    g.add_argument("--basic", action="store_true",
                   help="plain analysis, all extensions off")
    g.add_argument("--opt", action="store_true",
                   help="all extensions on (default)")
    sub.add_argument("--no-nullable-init", action="store_true")
    sub.add_argument("--no-test-recovery", action="store_true")
    sub.add_argument("--no-instanceof", action="store_true")
    sub.add_argument("--no-deref-edges", action="store_true")


@dataclass
class RunStats:
    instructions: int
    iterations: int
    wall_seconds: float
    peak_mb: float
    annotation_counts: Dict[str, Tuple[int, int]]
    deref_counts: Dict[str, Tuple[int, int]]

    def to_dict(self):
        ann_total = sum(t for t, _ in self.annotation_counts.values())
        ann_nn = sum(n for _, n in self.annotation_counts.values())
        d_total = sum(t for t, _ in self.deref_counts.values())
        d_safe = sum(s for _, s in self.deref_counts.values())
        return {
            "instructions": self.instructions,
            "iterations": self.iterations,
            "wall_seconds": round(self.wall_seconds, 3),
            "peak_mb": round(self.peak_mb, 1),
            "annotations": {
                cat: {"total": t, "nonnull": n,
                      "pct": _pct(n, t)}
                for cat, (t, n) in sorted(self.annotation_counts.items())
            },
            "annotations_total": {"total": ann_total, "nonnull": ann_nn,
                                  "pct": _pct(ann_nn, ann_total)},
            "dereferences": {
                cat: {"total": t, "safe": s, "pct": _pct(s, t)}
                for cat, (t, s) in sorted(self.deref_counts.items())
            },
            "dereferences_total": {"total": d_total, "safe": d_safe,
                                   "pct": _pct(d_safe, d_total)},
        }


def _pct(n, t):
    return round(100.0 * n / t, 1) if t else 100.0


def _peak_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _load(path: str) -> ir.Program:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ir.NirError(f"{path}: {e.strerror or e}")
    try:
        return ir.parse_program(text)
    except ir.NirError as e:
        raise type(e)(f"{path}: {e.message}", e.line, e.col) from None


def _print_stats_text(stats: RunStats, out):
    d = stats.to_dict()
    print(f"instructions analyzed: {d['instructions']}", file=out)
    print(f"solver iterations:     {d['iterations']}", file=out)
    print(f"wall time:             {d['wall_seconds']} s", file=out)
    print(f"peak memory:           {d['peak_mb']} MB", file=out)
    print("annotations:", file=out)
    rows = list(d["annotations"].items()) + [("total", d["annotations_total"])]
    for cat, row in rows:
        print(f"  {cat:<12} {row['nonnull']:>6} / {row['total']:<6} "
              f"non-null ({row['pct']}%)", file=out)
    print("dereferences:", file=out)
    rows = list(d["dereferences"].items()) + [("total", d["dereferences_total"])]
    for cat, row in rows:
        print(f"  {cat:<16} {row['safe']:>6} / {row['total']:<6} "
              f"safe ({row['pct']}%)", file=out)


# --- infer -----------------------------------------------------------------

def cmd_infer(args) -> int:
    cfg = _config(args)
    exit_code = 0
    docs = []
    for path in args.paths:
        t0 = time.time()
        program = _load(path)
        sol = infer.solve(program, cfg)
        ann = infer.derive_annotations(sol)
        rep = infer.classify_dereferences(sol)
        wall = time.time() - t0
        problems = infer.check_solution(sol)
        if problems:
            print(f"{path}: internal error: inference result fails "
                  f"its own constraints:", file=sys.stderr)
            for pr in problems[:10]:
                print(f"  {pr}", file=sys.stderr)
            exit_code = 2
        n_instr = sum(len(sol.hierarchy.methods[mid].code)
                      for mid in sol.reachable)
        stats = RunStats(n_instr, sol.iterations, wall, _peak_mb(),
                         ann.counts(), rep.counts())
        if args.format == "json":
            doc = {
                "file": path,
                "config": cfg.name,
                "annotations": json.loads(infer.annotations_to_json(ann)),
                "dereferences": json.loads(infer.deref_report_to_json(rep)),
            }
            if args.stats:
                doc["stats"] = stats.to_dict()
            docs.append(doc)
        else:
            print(f"== {path} ({cfg.name}) ==")
            for fid, v in sorted(ann.fields.items()):
                print(f"field  {fid}: {v.annotation()}")
            for mid, d in sorted(ann.params.items()):
                for i, v in sorted(d.items()):
                    print(f"param  {infer._mid_key(mid)}#{i}: {v.annotation()}")
            for mid, v in sorted(ann.returns.items()):
                print(f"return {infer._mid_key(mid)}: {v.annotation()}")
            if args.stats:
                _print_stats_text(stats, sys.stdout)
        if args.dump_alias or args.dump_cond:
            _dump_analyses(sol, args)
    if args.format == "json":
        print(json.dumps(docs if len(docs) > 1 else docs[0],
                         indent=1, sort_keys=True))
    return exit_code


def _dump_analyses(sol, args):
    for mid in sorted(sol.reachable):
        m = sol.hierarchy.methods[mid]
        if args.dump_alias:
            st = sol.aliases[mid]
            print(f"-- aliases {infer._mid_key(mid)} --")
            for pc in range(len(m.code)):
                if st.reachable(pc):
                    slots = [f"{sorted(s)}{'*' if f is not None else ''}"
                             for s, f in st.states[pc][0]]
                    print(f"  {pc}: [{' '.join(slots)}]")
        if args.dump_cond:
            facts = sol.conds[mid]
            print(f"-- instanceof facts {infer._mid_key(mid)} --")
            for pc, fs in sorted(facts.jump_facts.items()):
                print(f"  {pc}: nonnull-if-1 locals {sorted(fs)}")


# --- check -----------------------------------------------------------------

def cmd_check(args) -> int:
    cfg = _config(args)
    code = 0
    for path in args.paths:
        program = _load(path)
        sol = infer.solve(program, cfg)
        problems = infer.check_solution(sol)
        naive = infer.solve_naive(program, cfg)
        same = (infer.solution_to_json(sol) == infer.solution_to_json(naive))
        budget = _budget(args)
        trace_viol: List[str] = []
        rep = infer.classify_dereferences(sol)
        for seed in range(args.runs):
            tr = oracle.run(program, budget=budget, seed=seed,
                            hierarchy=sol.hierarchy, shapes=sol.shapes)
            trace_viol += oracle.check_correctness(tr, sol)
            trace_viol += oracle.check_dereference_safety(tr, rep)
        ok = not problems and same and not trace_viol
        print(f"{path}: constraints {'ok' if not problems else 'VIOLATED'}, "
              f"fixpoint engines {'agree' if same else 'DISAGREE'}, "
              f"{args.runs} traces "
              f"{'clean' if not trace_viol else 'VIOLATING'}")
        for pr in (problems + trace_viol)[:10]:
            print(f"  {pr}")
        if not ok:
            code = 2
    return code


# --- run -------------------------------------------------------------------

def _fmt_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, int):
        return str(v)
    if v is oracle.UNASSIGNED:
        return "_"
    if v.is_array:
        return f"arr#{v.loc}[{v.length}]"
    u = f" undef={sorted(v.undef)}" if v.undef else ""
    return f"obj#{v.loc}<{v.cls}>{u}"


def cmd_run(args) -> int:
    program = _load(args.path)
    tr = oracle.run(program, budget=_budget(args), seed=args.seed)
    if args.trace:
        h = tr.hierarchy
        for step in tr.steps:
            m = h.methods[step.mid]
            ins = m.code[step.pc]
            stack = " ".join(_fmt_value(v) for v in step.stack) or "-"
            locs = " ".join(_fmt_value(v) for v in step.locals) or "-"
            print(f"{step.mid[0]}.{step.mid[1]}:{step.pc} {ins.op}"
                  f" | {stack} | {locs}")
            for ev in step.events:
                if ev[0] == "field_write":
                    print(f"    heap {ev[1]} <- {_fmt_value(ev[3])}")
                else:
                    print(f"    constructed {ev[1]} on {_fmt_value(ev[2])}")
    print(f"status: {tr.status}"
          + (f" at {tr.fault[0][0]}.{tr.fault[0][1]}:{tr.fault[1]}"
             if tr.fault else "")
          + (f" ({tr.error})" if tr.error else ""))
    print(f"steps: {len(tr.steps)}")
    return 0


# --- fuzz ------------------------------------------------------------------

def _parse_seed_range(text: str) -> range:
    if ".." in text:
        a, b = text.split("..", 1)
        return range(int(a), int(b))
    return range(int(text))


def _inject(sol, kind: str) -> bool:
    """Deliberately lower one component of a solution below the fixpoint."""
    st = sol.state
    if kind == "lower-heap":
        for fid, v in sorted(st.heap.items()):
            if v != NONNULL:
                st.heap[fid] = NONNULL
                return True
        return False
    if kind == "lower-locals":
        for p, l in sorted(st.locals.items()):
            for r, v in sorted(l.items()):
                if v != NONNULL:
                    l[r] = NONNULL
                    return True
        return False
    if kind == "lower-ret":
        for mid, sig in sorted(st.methods.items()):
            if sig.ret is not None and sig.ret != NONNULL:
                sig.ret = NONNULL
                return True
        return False
    if kind == "mark-safe":
        return True  # handled on the dereference report
    raise ValueError(f"unknown fault kind: {kind}")


def cmd_fuzz(args) -> int:
    cfg = _config(args)
    seeds = _parse_seed_range(args.seeds)
    budget = _budget(args)
    programs = 0
    traces = 0
    violations = 0
    detected_injections = 0
    first: Optional[str] = None
    for seed in seeds:
        program = gen.gen_program(seed)
        programs += 1
        h = ir.Hierarchy(program)
        shapes = ir.validate_stack_shapes(program, h)
        for c in ((infer.BASIC, infer.OPT) if args.both_configs else (cfg,)):
            sol = infer.solve(program, c, hierarchy=h, shapes=shapes)
            injected = bool(args.inject_fault) and \
                _inject(sol, args.inject_fault)
            rep = infer.classify_dereferences(sol)
            if args.inject_fault == "mark-safe":
                for p, (cat, safe) in sorted(rep.entries.items()):
                    if not safe:
                        rep.entries[p] = (cat, True)
                        injected = True
                        break
            for s in range(args.runs):
                tr = oracle.run(program, budget=budget, seed=s,
                                hierarchy=h, shapes=shapes)
                traces += 1
                viol = oracle.check_correctness(tr, sol)
                viol += oracle.check_dereference_safety(tr, rep)
                if viol:
                    violations += len(viol)
                    if injected:
                        detected_injections += 1
                    if first is None:
                        first = (f"seed {seed} run {s} config {c.name}: "
                                 f"{viol[0]}")
                        if not args.inject_fault:
                            sys.stderr.write(
                                "offending program:\n"
                                + ir.print_program(program))
    print(f"{programs} programs, {traces} traces, {violations} violations")
    if args.inject_fault:
        print(f"injected fault '{args.inject_fault}' detected in "
              f"{detected_injections} traces")
    if first:
        print(f"first: {first}")
    return 0 if violations == 0 else 2


# --- entry -----------------------------------------------------------------

def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="nullit",
        description="nullability inference for .nir programs")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_inf = sub.add_parser("infer", help="infer annotations")
    p_inf.add_argument("paths", nargs="+")
    _add_config_flags(p_inf)
    p_inf.add_argument("--format", choices=("text", "json"), default="text")
    p_inf.add_argument("--stats", action="store_true")
    p_inf.add_argument("--dump-alias", action="store_true")
    p_inf.add_argument("--dump-cond", action="store_true")
    p_inf.set_defaults(fn=cmd_infer)

    p_chk = sub.add_parser("check", help="self-check the solver")
    p_chk.add_argument("paths", nargs="+")
    _add_config_flags(p_chk)
    p_chk.add_argument("--runs", type=int, default=5)
    p_chk.add_argument("--budget", type=int)
    p_chk.set_defaults(fn=cmd_check)

    p_run = sub.add_parser("run", help="execute a program concretely")
    p_run.add_argument("path")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--budget", type=int)
    p_run.add_argument("--trace", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_fz = sub.add_parser("fuzz", help="differential soundness testing")
    _add_config_flags(p_fz)
    p_fz.add_argument("--seeds", default="0..100",
                      help="seed range A..B (or a count)")
    p_fz.add_argument("--runs", type=int, default=10,
                      help="input seeds per program")
    p_fz.add_argument("--budget", type=int)
    p_fz.add_argument("--both-configs", action="store_true")
    p_fz.add_argument("--inject-fault",
                      choices=("lower-heap", "lower-locals", "lower-ret",
                               "mark-safe"))
    p_fz.set_defaults(fn=cmd_fuzz)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ir.NirError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except Exception as e:  # never crash with a bare traceback
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

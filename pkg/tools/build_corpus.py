"""Regenerate the committed corpus/ directory.

The corpus is fixed: 2 motivating examples (kept as hand-edited files),
12 guard-pattern programs where the optimized configuration is strictly
more precise (ifnull tests, instanceof tests, null-or-constructed
merges), 2 programs exercising refinement on dereference fallthrough
edges, and 14 plain generator outputs.  Run from the repository root:

    python3 tools/build_corpus.py

Also refreshes tests/data/corpus_counts.json, the frozen per-file
annotation/dereference counts that the regression tests compare against.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from nullit import gen, infer, ir  # noqa: E402

ROOT = os.path.join(os.path.dirname(__file__), "..")
CORPUS = os.path.join(ROOT, "corpus")

BASE_CLASS = """\
class A extends Object {
  field f ref
  ctor (0, 1) {
    load 0
    new Object
    dup
    invokespecial Object.<init> 0
    putfield A.f
    return
  }
  method id (1, 2) {
    load 1
    areturn
  }
"""

MAYBE_NULL_A = """\
    iconst 1
    ifeq Lmk
    aconst_null
    store 2
    goto Lmk2
  Lmk:
    new A
    dup
    invokespecial A.<init> 0
    store 2
  Lmk2:
"""


def guard01():
    # ifnull guard, then a field read and a call through the tested local
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    ifnull Ld
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }}
}}
"""


def guard02():
    # same refinement via ifnonnull: the taken edge is the non-null one
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    ifnonnull Lgo
    goto Ld
  Lgo:
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }}
}}
"""


def guard03():
    # the guard protects only a virtual call; its return is the parameter
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    ifnull Ld
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }}
}}
"""


def guard04():
    # the guard sits inside a virtual method, on a parameter the call
    # sites may pass null into
    return """\
class A extends Object {
  field f ref
  ctor (0, 1) {
    load 0
    new Object
    dup
    invokespecial Object.<init> 0
    putfield A.f
    return
  }
  method use (1, 2) {
    load 1
    ifnull Ld
    load 1
    getfield A.f
    pop
    load 1
    load 1
    invokevirtual A.id 1
    pop
  Ld:
    return
  }
  method id (1, 2) {
    load 1
    areturn
  }
  static main (0, 2) {
    new A
    dup
    invokespecial A.<init> 0
    store 1
    load 1
    aconst_null
    invokevirtual A.use 1
    load 1
    load 1
    invokevirtual A.use 1
    return
  }
}
"""


def guard05():
    # two guarded locals; the second guard must survive work on the first
    return BASE_CLASS + f"""\
  static main (0, 4) {{
{MAYBE_NULL_A}\
    aconst_null
    store 3
    load 2
    ifnull Ld
    load 3
    ifnull Lmid
    nop
  Lmid:
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }}
}}
"""


def guard06():
    # guarded field write through the tested local
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    ifnull Ld
    load 2
    new Object
    dup
    invokespecial Object.<init> 0
    putfield A.f
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }}
}}
"""


def inst_prog(body):
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
{body}\
    return
  }}
}}
"""


def inst01():
    # instanceof evidence flows through ifne to the taken edge
    return inst_prog("""\
    load 2
    instanceof A
    ifne Lgo
    goto Ld
  Lgo:
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
""")


def inst02():
    # the same evidence used through ifeq: the fallthrough edge is safe
    return inst_prog("""\
    load 2
    instanceof A
    ifeq Ld
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
""")


def inst03():
    # instanceof guard around a virtual call
    return inst_prog("""\
    load 2
    instanceof A
    ifeq Ld
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
""")


def inst04():
    # evidence survives unrelated instructions before the jump
    return inst_prog("""\
    load 2
    instanceof A
    iconst 1
    pop
    nop
    ifeq Ld
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
""")


def ninit01():
    # null-or-fully-constructed merge: stripping null leaves a fully
    # initialized object, so the guarded region reads the field annotation
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    ifnull Ld
    load 2
    getfield A.f
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }}
}}
"""


def ninit02():
    # a field holding null-or-constructed, read back and guarded
    return """\
class A extends Object {
  field f ref
  field g ref
  ctor (0, 2) {
    load 0
    aconst_null
    putfield A.f
    load 0
    new Object
    dup
    invokespecial Object.<init> 0
    putfield A.g
    return
  }
  static main (0, 3) {
    new A
    dup
    invokespecial A.<init> 0
    store 1
    load 1
    getfield A.f
    store 2
    load 2
    ifnull Ld
    load 2
    load 2
    invokevirtual A.id 1
    pop
  Ld:
    return
  }
  method id (1, 2) {
    load 1
    areturn
  }
}
"""


def dedge01():
    # back-to-back unguarded reads: after the first survives, the second
    # receiver is known non-null
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    getfield A.f
    pop
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
    return
  }}
}}
"""


def dedge02():
    # a call dereference licenses the following field write
    return BASE_CLASS + f"""\
  static main (0, 3) {{
{MAYBE_NULL_A}\
    load 2
    getfield A.f
    pop
    load 2
    load 2
    invokevirtual A.id 1
    pop
    load 2
    new Object
    dup
    invokespecial Object.<init> 0
    putfield A.f
    return
  }}
}}
"""


HANDWRITTEN = {
    "guard01": guard01, "guard02": guard02, "guard03": guard03,
    "guard04": guard04, "guard05": guard05, "guard06": guard06,
    "inst01": inst01, "inst02": inst02, "inst03": inst03, "inst04": inst04,
    "ninit01": ninit01, "ninit02": ninit02,
    "dedge01": dedge01, "dedge02": dedge02,
}

PLAIN_SEEDS = [3, 7, 11, 19, 23, 31, 42, 57, 64, 71, 88, 93, 101, 115]


def main():
    for name, maker in HANDWRITTEN.items():
        src = maker()
        ir.parse_program(src)  # must validate
        with open(os.path.join(CORPUS, f"{name}.nir"), "w") as fh:
            fh.write(src)
    for i, seed in enumerate(PLAIN_SEEDS, 1):
        src = gen.gen_source(seed)
        ir.parse_program(src)
        with open(os.path.join(CORPUS, f"plain{i:02d}.nir"), "w") as fh:
            fh.write(src)

    counts = {}
    for fn in sorted(os.listdir(CORPUS)):
        if not fn.endswith(".nir"):
            continue
        with open(os.path.join(CORPUS, fn)) as fh:
            program = ir.parse_program(fh.read())
        row = {}
        for cfg in (infer.BASIC, infer.OPT):
            sol = infer.solve(program, cfg)
            ann = infer.derive_annotations(sol)
            rep = infer.classify_dereferences(sol)
            total, safe = rep.totals()
            a = ann.counts()
            row[cfg.name] = {
                "annotations_total": sum(t for t, _ in a.values()),
                "annotations_nonnull": sum(n for _, n in a.values()),
                "derefs_total": total,
                "derefs_safe": safe,
            }
        counts[fn] = row
    out = os.path.join(ROOT, "tests", "data", "corpus_counts.json")
    with open(out, "w") as fh:
        json.dump(counts, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(counts)} corpus entries")
    for fn, row in counts.items():
        b, o = row["BASIC"], row["OPT"]
        print(f"{fn}: ann {b['annotations_nonnull']}/{b['annotations_total']}"
              f" -> {o['annotations_nonnull']}/{o['annotations_total']}  "
              f"safe {b['derefs_safe']}/{b['derefs_total']}"
              f" -> {o['derefs_safe']}/{o['derefs_total']}")


if __name__ == "__main__":
    main()

"""Run the shipped cases and print each rendered result plus a summary line."""

from __future__ import annotations

import argparse
import sys

from itb.testkit import Verdict, load_case, render_text, run_suite, shipped_case_paths


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--fault", action="append", default=[], metavar="SERVICE=STATE")
    args = ap.parse_args(argv)
    faults = dict(f.split("=", 1) for f in args.fault)
    results = run_suite([load_case(p) for p in shipped_case_paths()], jobs=args.jobs, faults=faults)
    for r in results:
        print(render_text(r))
    counts = {v: sum(r.verdict is v for r in results) for v in Verdict}
    print(" ".join(f"{v.value}={n}" for v, n in counts.items()))
    return 0 if counts[Verdict.PASS] == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())

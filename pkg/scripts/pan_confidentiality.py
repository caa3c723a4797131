"""Scan traces of random sessions for raw PAN digits beyond the last four."""

from __future__ import annotations

import argparse
import random
import sys

from itb.testkit.workloads import random_session


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sessions", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20120101)
    args = ap.parse_args(argv)
    rng = random.Random(args.seed)
    leaks = 0
    for n in range(args.sessions):
        run = random_session(rng)
        blob = "\n".join((e.payload + b"\n" + (e.reply or b"")).decode("latin-1") for e in run.trace)
        for pan in run.pans:
            for i in range(len(pan) - 4):
                if pan[i : i + 5] in blob:
                    leaks += 1
                    print(f"session {n}: window {pan[i:i + 5]} of a {len(pan)}-digit PAN found in trace")
    print(f"sessions={args.sessions} seed={args.seed} leaks={leaks}")
    return 1 if leaks else 0


if __name__ == "__main__":
    sys.exit(main())

"""Check final stock on hand against seed minus released quantities."""

from __future__ import annotations

import argparse
import random
import sys

from itb.testkit.workloads import random_batch, run_batch


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batches", type=int, default=60)
    ap.add_argument("--max-orders", type=int, default=50)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    rng = random.Random(args.seed)
    bad = 0
    for n in range(args.batches):
        batch = random_batch(rng, args.max_orders)
        env = run_batch(batch, chunks=rng.randint(1, 3))
        expected = dict(batch.seed_soh)
        for o in batch.orders:
            if o.ip not in batch.fraud_ips:
                expected[o.item_id] -= o.qty
        if env.oms.inventory != expected:
            bad += 1
            print(f"batch {n}: got {env.oms.inventory}, expected {expected}")
    print(f"batches={args.batches} seed={args.seed} mismatches={bad}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())

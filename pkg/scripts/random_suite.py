#!/usr/bin/env python3
"""Run every oracle cross-check on the randomized and boundary instances."""

import argparse
import time

from jumpdelay.suite import SUITE_SEED, SUITE_SIZE, boundary_instances, random_suite
from jumpdelay.verify import verify_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=SUITE_SIZE)
    ap.add_argument("--seed", type=int, default=SUITE_SEED)
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args()
    worst, failures = {}, 0
    t0 = time.perf_counter()
    for inst in random_suite(args.size, args.seed) + boundary_instances():
        rep = verify_instance(inst.model, inst.init, args.tol)
        for c in rep["checks"]:
            worst[c["name"]] = max(worst.get(c["name"], 0.0), c["value"])
        tag = "ok" if rep["passed"] else "FAIL"
        failures += not rep["passed"]
        print(f"{inst.name:<32} solvable={rep['solvable']!s:<5} {tag}")
    print(f"\n{failures} failures, {time.perf_counter() - t0:.1f} s")
    for name, v in worst.items():
        if name != "solvability_equivalence":
            print(f"  worst {name:<24} {v:.2e}")


if __name__ == "__main__":
    main()

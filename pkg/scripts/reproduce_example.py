#!/usr/bin/env python3
"""Compare the two-mode example against the reference table, gains and cost."""

import argparse

from jumpdelay import two_mode_example
from jumpdelay.verify import reproduce


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rep = reproduce(*two_mode_example(), mc_runs=args.runs, seed=args.seed)
    print(rep["alignment"]["note"], "\n")
    for e in rep["table"] + rep["gains"]:
        comp = ", ".join(f"{v:.4f}" for v in e["computed"])
        ref = ", ".join(f"{v:.4f}" for v in e["printed"])
        print(f"{e['entry']:<22} {e['status']:<10} computed [{comp}]  reference [{ref}]")
    c = rep["optimal_cost"]
    mc = c["monte_carlo"]
    print(f"\nJ* closed form   {c['closed_form']:.7f}")
    print(f"QP minimum       {c['qp_minimum']:.7f}")
    print(f"exact closed loop {c['exact_expected_cost']:.7f}")
    print(f"Monte Carlo      {mc['mean']:.4f} +/- {mc['stderr']:.4f} ({mc['runs']} runs, seed {mc['seed']})")
    print(f"reference figure {c['printed']}  ({c['status']}: {c['note']})")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Cost-model sweep over n = 20..50 for 2, 3 and 4 near-equal stages.

Writes the sweep CSV and prints the n=20 and n=50 values plus every place
where failure, overhead or break-even moves against the overall trend.
"""
import argparse

from partialsearch.costmodel import SCENARIOS, rows_to_csv, sweep


def against_trend(rows, key, decreasing):
    ns = [r["n"] for r in rows]
    vals = [r[key] for r in rows]
    if decreasing:
        return [n for n, a, b in zip(ns[1:], vals, vals[1:]) if b >= a]
    return [n for n, a, b in zip(ns[1:], vals, vals[1:]) if b <= a]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lo", type=int, default=20)
    ap.add_argument("--hi", type=int, default=50)
    ap.add_argument("--out", default="scaling_sweep.csv")
    args = ap.parse_args()

    ns = range(args.lo, args.hi + 1)
    rows = sweep(ns, [2, 3, 4], SCENARIOS, [1.0, 5.0, 10.0])
    with open(args.out, "w") as fh:
        fh.write(rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")

    for k in (2, 3, 4):
        base = [r for r in rows if r["stages"] == k and r["scenario"] == "S3" and r["oracle_multiplier"] == 1.0]
        first, last = base[0], base[-1]
        print(f"{k}-stage: n={first['n']} failure {first['failure_probability']:.3g}"
              f" overhead {first['relative_overhead']:.3f};"
              f" n={last['n']} failure {last['failure_probability']:.3g}"
              f" overhead {last['relative_overhead']:.4f}")
        print(f"  failure rises at {against_trend(base, 'failure_probability', True)}")
        print(f"  overhead rises at {against_trend(base, 'relative_overhead', True)}")
        for sc in SCENARIOS:
            sub = [r for r in rows if r["stages"] == k and r["scenario"] == sc and r["oracle_multiplier"] == 1.0]
            rel = {m: [r for r in rows if r["stages"] == k and r["scenario"] == sc
                       and r["oracle_multiplier"] == m][-1]["relative_depth"] for m in (1.0, 5.0, 10.0)}
            print(f"  {sc}: break-even at n={last['n']} {sub[-1]['break_even']:.1f},"
                  f" dips at {against_trend(sub, 'break_even', False)};"
                  f" relative depth x1/x5/x10 {rel[1.0]:.3f}/{rel[5.0]:.3f}/{rel[10.0]:.3f}")


if __name__ == "__main__":
    main()

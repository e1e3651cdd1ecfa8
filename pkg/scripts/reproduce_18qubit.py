#!/usr/bin/env python3
"""18-qubit runs of the 3-stage [6,6,6] and 2-stage [9,9] unstructured searches.

Prints the analytic schedule next to a sampled run (1000 shots by default)
and, with --out, writes everything as JSON.
"""
import argparse
import json
import math

from partialsearch.search import SearchSpec, run_search

CONFIGS = {"3-stage": [6, 6, 6], "2-stage": [9, 9]}


def run(sizes, shots, seed):
    spec = SearchSpec.uniform(sizes, shots=shots, seed=seed)
    plan = spec.plan()
    rep = run_search(spec)
    p = plan.overall_success
    sigma = math.sqrt(p * (1 - p) / shots) if shots else float("nan")
    return {
        "partition": sizes,
        "iterates": list(plan.final_iterates),
        "predicted_success": p,
        "predicted_prefix": plan.prefix_success,
        "sampled_success": rep.success,
        "sampled_prefix": rep.prefix_success,
        "z_score": (rep.success - p) / sigma if shots else None,
        "oracle_calls": plan.total_oracle_calls,
        "grover_calls": plan.grover.oracle_calls,
        "failure_prefix_fractions": rep.failure_prefix_fractions,
        "cached_branches": rep.branches,
        "wall_time": rep.wall_time,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shots", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", help="optional JSON output path")
    args = ap.parse_args()

    results = {}
    for name, sizes in CONFIGS.items():
        r = results[name] = run(sizes, args.shots, args.seed)
        print(f"{name} {sizes}: iterates {tuple(r['iterates'])}")
        print(f"  predicted {r['predicted_success']:.4f}  sampled {r['sampled_success']:.4f}"
              f"  (z = {r['z_score']:+.2f}, {r['wall_time']:.1f} s)")
        print("  prefix predicted " + ", ".join(f"{x:.4f}" for x in r["predicted_prefix"]))
        print(f"  oracle calls {r['oracle_calls']} vs Grover {r['grover_calls']}"
              f" (overhead {r['oracle_calls'] / r['grover_calls']:.3f})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"shots": args.shots, "seed": args.seed, "results": results}, fh, indent=2)


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python backends on every builtin scenario.

Both backends simulate the same replicate range; the script checks that the
martingale paths agree bit for bit and reports the time per replicate.

    python benchmarks/bench_backends.py [--replicates 200] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from brwstable import engine
from brwstable.harness.scenarios import get_scenario, list_scenarios


def bench(name: str, replicates: int, repeat: int = 3) -> dict:
    cfg = get_scenario(name)
    pol = cfg.simulation_policy()
    law = cfg.build_law()
    row = {"scenario": name, "replicates": replicates}
    results = {}
    for backend in engine.available_backends():
        prepared = engine.prepare(law, cfg.theta, cfg.alpha, pol.offspring_truncation_epsilon,
                                  backend)
        reps = repeat if backend == "compiled" else 1
        best = float("inf")
        for _ in range(reps):
            t0 = time.perf_counter()
            batch = engine.simulate_batch(prepared, cfg.theta, cfg.alpha, pol, cfg.seed,
                                          replicates)
            best = min(best, time.perf_counter() - t0)
        results[backend] = batch
        row[f"{backend}_us_per_replicate"] = 1e6 * best / replicates
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        row["bit_identical"] = all(np.array_equal(x, y) for x, y in (
            (a.W_theta, b.W_theta), (a.W_alpha_theta, b.W_alpha_theta),
            (a.extinct_at, b.extinct_at), (a.capped, b.capped),
            (a.pruned_mass_bound, b.pruned_mass_bound)))
        row["speedup"] = row["python_us_per_replicate"] / row["compiled_us_per_replicate"]
    return row


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replicates", type=int, default=200)
    parser.add_argument("--json", help="write the results here as JSON")
    args = parser.parse_args(argv)
    rows = [bench(name, args.replicates) for name in list_scenarios()]
    header = f"{'scenario':20s} {'compiled us/rep':>16s} {'python us/rep':>14s} " \
             f"{'speedup':>8s} {'identical':>9s}"
    print(header)
    for r in rows:
        print(f"{r['scenario']:20s} {r.get('compiled_us_per_replicate', float('nan')):16.1f} "
              f"{r['python_us_per_replicate']:14.1f} {r.get('speedup', float('nan')):8.1f} "
              f"{str(r.get('bit_identical', 'n/a')):>9s}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r.get("bit_identical", True) for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Time each pipeline stage under the compiled and the pure-Python backend.

    python benchmarks/bench_backends.py --size 120 --roi 15

Both backends must produce identical results; the script checks that too.
"""

import argparse
import time

import numpy as np

from towersite import (SiteParams, compute_all_viewsheds, estimate_vix, find_candidates,
                       generate_fractal, partition, site)
from towersite import _backend


def run_stages(grid, params, threads):
    times, out = {}, {}
    t0 = time.perf_counter()
    out["vix"] = estimate_vix(grid, params, seed=1, threads=threads)
    times["vix"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    part = partition(grid.nrows, grid.ncols, params.roi)
    out["cands"] = find_candidates(out["vix"], part, params.per_block, threads=threads)
    times["findmax"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cands = out["cands"]
    out["sheds"] = compute_all_viewsheds(grid, (cands.rows, cands.cols), params, threads=threads)
    times["viewshed"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out["result"] = site(out["sheds"], grid.nrows, grid.ncols, params)
    times["site"] = time.perf_counter() - t0
    return times, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=120, help="terrain is size x size posts")
    ap.add_argument("--roi", type=int, default=15)
    ap.add_argument("--threads", type=int, default=0)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    grid = generate_fractal(args.size, args.size, seed=args.seed)
    params = SiteParams(roi=args.roi)
    names = _backend.available()
    results = {}
    for name in names:
        prev = _backend.use(name)
        try:
            results[name] = run_stages(grid, params, args.threads)
        finally:
            _backend.use(prev)

    stages = ["vix", "findmax", "viewshed", "site"]
    print(f"{args.size}x{args.size} terrain, roi {args.roi}")
    print(f"{'stage':<10}" + "".join(f"{n:>12}" for n in names)
          + ("     speedup" if len(names) == 2 else ""))
    for s in stages + ["total"]:
        row = [sum(results[n][0].values()) if s == "total" else results[n][0][s] for n in names]
        line = f"{s:<10}" + "".join(f"{t:>11.3f}s" for t in row)
        if len(names) == 2:
            line += f"{row[1] / max(row[0], 1e-9):>11.1f}x"
        print(line)

    if len(names) == 2:
        a, b = (results[n][1] for n in names)
        same = (a["vix"] == b["vix"]
                and np.array_equal(a["cands"].rows, b["cands"].rows)
                and np.array_equal(a["sheds"].words, b["sheds"].words)
                and a["result"].selected == b["result"].selected)
        print("results identical:", same)
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

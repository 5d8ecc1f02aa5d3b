"""Print a per-policy table for one or more sweep output directories.

    python scripts/summarize_runs.py runs/synthetic [runs/glucose_constant ...]

For every policy: number of finished seeds, final lenient and RS regret
(mean +- sd across seeds) and the first/last-quarter slopes of the seed-averaged
cumulative curves.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from robos.metrics import sublinearity_stat


def summarize_dir(out: Path) -> list[dict]:
    agg = json.loads((out / "aggregate.json").read_text())["policies"]
    rows = []
    for label, rec in agg.items():
        seeds = sorted((out / label).glob("seed_*/summary.json"))
        finals = [json.loads(p.read_text()) for p in seeds]
        len_final = np.array([s["final_lenient_regret"] for s in finals])
        rs_final = np.array([s["final_rs_regret"] for s in finals])
        len_mean, rs_mean = np.array(rec["lenient_mean"]), np.array(rec["rs_mean"])
        rows.append(dict(
            label=label, runs=rec["runs"],
            lenient=(len_final.mean(), len_final.std()), rs=(rs_final.mean(), rs_final.std()),
            lenient_slopes=(sublinearity_stat(len_mean, "first"), sublinearity_stat(len_mean, "last")),
            rs_slopes=(sublinearity_stat(rs_mean, "first"), sublinearity_stat(rs_mean, "last")),
        ))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dirs", nargs="+", type=Path)
    args = ap.parse_args(argv)
    for out in args.dirs:
        failed = (out / "FAILED").exists()
        print(f"== {out}{'  [FAILED runs present]' if failed else ''}")
        print(f"{'policy':<28}{'runs':>5}  {'lenient':>17}  {'rs':>17}  {'lenient slope':>15}  {'rs slope':>15}")
        for r in summarize_dir(out):
            print(f"{r['label']:<28}{r['runs']:>5}  "
                  f"{r['lenient'][0]:>9.2f} +- {r['lenient'][1]:<5.2f}{r['rs'][0]:>11.2f} +- {r['rs'][1]:<5.2f}"
                  f"{r['lenient_slopes'][0]:>8.3f}->{r['lenient_slopes'][1]:<6.3f}"
                  f"{r['rs_slopes'][0]:>9.3f}->{r['rs_slopes'][1]:<6.3f}")


if __name__ == "__main__":
    main()

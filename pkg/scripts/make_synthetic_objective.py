"""Build the tabular objective used by the synthetic preset and report its structure.

The objective has three bumps along the action axis:

* a "peaked" action whose rewards are high near c = 2 (where the reference
  distribution sits) and low elsewhere: best in expectation under P_t,
* a "robust" action with moderate rewards that decay slowly in c: the robust
  satisficing choice,
* a "flat" action with constant reward: best in the worst case over contexts.

The report lists, per action, the expected reward under P_t and P*_t, the true
fragility at the configured threshold, and the DRO values at r = eps/3, eps, 3 eps.

    python scripts/make_synthetic_objective.py [--out PATH] [--check]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from robos.environment import write_tabular
from robos.fragility import dro_worst_case, true_fragility
from robos.kernels import KernelSpec
from robos.simplex import MmdMetric, discretized_gaussian

ACTIONS = np.linspace(0.0, 1.0, 11)
CONTEXTS = np.linspace(-12.0, 12.0, 9)
CONTEXT_KERNEL = KernelSpec("rbf", (5.0,))
REF = (2.0, 1.0)      # mean, variance of P_t
TRUE = (0.0, 25.0)    # mean, variance of P*_t
TAU_FRACTION = 0.6

PEAKED = dict(center=0.2, profile=lambda c: 0.2 + 1.0 * np.exp(-((c - 2.0) ** 2) / 12.5))
ROBUST = dict(center=0.5, profile=lambda c: 0.25 + 0.6 * np.exp(-(c ** 2) / 98.0))
FLAT = dict(center=0.8, profile=lambda c: np.full_like(c, 0.5))
BACKGROUND = 0.3
WIDTH = 0.08


def objective(actions=ACTIONS, contexts=CONTEXTS) -> np.ndarray:
    f = np.full((len(actions), len(contexts)), BACKGROUND)
    for bump in (PEAKED, ROBUST, FLAT):
        weight = np.exp(-((actions - bump["center"]) ** 2) / (2.0 * WIDTH ** 2))[:, None]
        f += weight * (bump["profile"](contexts)[None, :] - BACKGROUND)
    return f


def report(f: np.ndarray) -> dict:
    metric = MmdMetric.from_kernel(CONTEXT_KERNEL, CONTEXTS)
    w = discretized_gaussian(CONTEXTS, *REF)
    w_star = discretized_gaussian(CONTEXTS, *TRUE)
    eps = metric.distance(w, w_star)
    tau = TAU_FRACTION * f.max()
    rows = []
    for x, row in enumerate(f):
        rows.append(dict(
            action=ACTIONS[x], ref=row @ w, true=row @ w_star, worst=row.min(),
            kappa=true_fragility(row, w, tau, metric).kappa,
            **{f"dro_{name}": dro_worst_case(row, w, scale * eps, metric)[0]
               for name, scale in (("small", 1 / 3), ("mid", 1.0), ("large", 3.0))},
        ))
    pick = dict(
        so=int(np.argmax([r["ref"] for r in rows])),
        rs=int(np.argmin([r["kappa"] for r in rows])),
        dro_small=int(np.argmax([r["dro_small"] for r in rows])),
        dro_mid=int(np.argmax([r["dro_mid"] for r in rows])),
        dro_large=int(np.argmax([r["dro_large"] for r in rows])),
        wro=int(np.argmax([r["worst"] for r in rows])),
    )
    return dict(eps=eps, tau=tau, rows=rows, pick=pick)


def main(argv=None):
    default_out = Path(__file__).resolve().parents[1] / "src" / "robos" / "presets" / "synthetic_objective.txt"
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=default_out)
    ap.add_argument("--check", action="store_true", help="only print the report")
    args = ap.parse_args(argv)

    f = objective()
    rep = report(f)
    print(f"eps = {rep['eps']:.4f}   tau = {rep['tau']:.4f}")
    print(" x     E_ref   E_true  min     kappa    dro/3    dro      dro*3")
    for r in rep["rows"]:
        print(f"{r['action']:.1f}  {r['ref']:.4f}  {r['true']:.4f}  {r['worst']:.4f}  {r['kappa']:7.4f}"
              f"  {r['dro_small']:.4f}  {r['dro_mid']:.4f}  {r['dro_large']:.4f}")
    print("choices:", {k: float(ACTIONS[v]) for k, v in rep["pick"].items()})
    if not args.check:
        header = ("Synthetic objective for the 'synthetic' preset.\n"
                  "Generated by scripts/make_synthetic_objective.py; rows are actions, columns contexts.")
        write_tabular(args.out, ACTIONS, CONTEXTS, f, header)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

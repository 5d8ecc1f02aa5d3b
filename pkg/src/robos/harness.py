"""Seeded policy x environment sweeps and their on-disk artifacts.

Layout under the output directory::

    config.resolved.yaml
    <policy label>/seed_<k>/trace.csv
    <policy label>/seed_<k>/summary.json
    aggregate.json
    manifest.json        (sha256 of every other file; written last)
    FAILED               (only when some run hit a numerical failure)
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, dump_config
from .environment import Environment, EnvironmentTape, build_objective
from .fragility import SolverError
from .gp import ConditioningError, GPPosterior, GridSpec
from .metrics import (
    TRACE_VERSION,
    BenchmarkFragility,
    RoundRecord,
    instantaneous_lenient,
    instantaneous_rs,
    lenient_regret,
    rs_regret,
    summarize,
    trace_to_csv,
)
from .policies import PolicyConfig, dynamic_tau, select
from .rng import RngStreams
from .simplex import MmdMetric, b_prime

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
NUMERICAL_ERRORS = (ConditioningError, SolverError, np.linalg.LinAlgError, FloatingPointError)


@dataclass
class Problem:
    """Seed-specific pieces shared by every policy run on that seed."""

    grid: GridSpec
    metric: MmdMetric
    f: np.ndarray
    tape: EnvironmentTape
    b_prime: float


def build_problem(cfg: ExperimentConfig, seed: int) -> Problem:
    grid = cfg.build_grid()
    metric = MmdMetric.from_kernel(cfg.kernel.context, grid.contexts)
    streams = RngStreams(seed)
    f = build_objective(cfg.environment.objective, grid, cfg.kernel, streams)
    tape = Environment(cfg.environment, grid, metric, streams).record_tape()
    return Problem(grid, metric, f, tape, b_prime(metric, f))


def run_policy(cfg: ExperimentConfig, policy: PolicyConfig, problem: Problem) -> list[RoundRecord]:
    """One run of one policy. The GP confidence level is delta/2, as in the regret analysis."""
    grid, metric, f, tape = problem.grid, problem.metric, problem.f, problem.tape
    env = cfg.environment
    gp = GPPosterior(grid, cfg.kernel, noise=max(env.noise, 1e-9), rkhs_bound=cfg.rkhs_bound,
                     delta=cfg.delta / 2.0, lam=cfg.lam)
    rule = policy.tau or cfg.tau
    static_tau = rule.static_value(f)
    benchmark = BenchmarkFragility(f, metric)
    trace = []
    for t in range(1, tape.horizon + 1):
        w, w_star, eps = tape.w[t - 1], tape.w_star[t - 1], float(tape.eps[t - 1])
        beta = gp.beta()
        mu, var = gp.mean_var()
        sd = np.sqrt(var)
        ucb = mu + beta * sd
        tau = static_tau if static_tau is not None else dynamic_tau(mu - beta * sd, w, rule.value)
        decision = select(policy, ucb, w, tau, eps, metric)
        x = decision.action
        c = int(tape.contexts[t - 1])
        y = float(f[x, c] + tape.noise[t - 1])
        expected = float(f[x] @ w_star)
        kappa = benchmark(w, tau)
        kappa_hat = np.array([fr.kappa for fr in decision.fragilities]) if decision.fragilities else np.zeros(0)
        gp.update(x, c, y)
        trace.append(RoundRecord(
            t=t, w=w, w_star=w_star, eps=eps, tau=tau, action=x, context=c, y=y,
            expected_reward=expected, kappa=kappa,
            lenient=instantaneous_lenient(tau, expected),
            rs=instantaneous_rs(tau, kappa, eps, expected),
            beta=beta, sigma_w=float(sd[x] @ w_star), info_gain=gp.info_gain(),
            infeasible=decision.infeasible, kappa_hat=kappa_hat,
        ))
    return trace


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def run_dir(out: Path, label: str, seed: int) -> Path:
    return out / label / f"seed_{seed}"


def _run_task(args):
    cfg, policy, seed, out = args
    d = run_dir(Path(out), policy.label, seed)
    d.mkdir(parents=True, exist_ok=True)
    try:
        problem = build_problem(cfg, seed)
        trace = run_policy(cfg, policy, problem)
    except NUMERICAL_ERRORS as exc:
        (d / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        return policy.label, seed, None, f"{policy.label}/seed_{seed}: {type(exc).__name__}: {exc}"
    (d / "trace.csv").write_text(trace_to_csv(trace))
    summary = summarize(trace, cfg.delta, problem.b_prime)
    summary.update(policy=policy.label, seed=seed, trace_version=TRACE_VERSION, b_prime=problem.b_prime)
    write_json(d / "summary.json", summary)
    return policy.label, seed, (lenient_regret(trace), rs_regret(trace)), None


def aggregate(results, cfg: ExperimentConfig) -> dict:
    """Mean and standard deviation of the cumulative regret curves across seeds."""
    out = {}
    for policy in cfg.policies:
        curves = [r for (label, _, r) in results if label == policy.label and r is not None]
        if not curves:
            continue
        len_ = np.array([c[0] for c in curves])
        rs = np.array([c[1] for c in curves])
        out[policy.label] = {
            "runs": len(curves),
            "lenient_mean": len_.mean(axis=0), "lenient_sd": len_.std(axis=0),
            "rs_mean": rs.mean(axis=0), "rs_sd": rs.std(axis=0),
        }
    return out


def write_manifest(out: Path) -> None:
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    entries = {p.relative_to(out).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in files}
    write_json(out / "manifest.json", {"files": entries})


def run_experiment(cfg: ExperimentConfig, out: Path | str, jobs: int = 1) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.yaml").write_text(dump_config(cfg))
    tasks = [(cfg, p, s, str(out)) for p in cfg.policies for s in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_run_task, tasks))
    else:
        raw = [_run_task(t) for t in tasks]
    failures = [err for (*_, err) in raw if err]
    results = [(label, seed, curves) for (label, seed, curves, _) in raw]
    write_json(out / "aggregate.json", {"policies": aggregate(results, cfg), "seeds": list(cfg.seeds)})
    if failures:
        (out / "FAILED").write_text("\n".join(failures) + "\n")
        for line in failures:
            log.error("numerical failure: %s", line)
    elif (out / "FAILED").exists():
        os.remove(out / "FAILED")
    write_manifest(out)
    return EXIT_NUMERICAL if failures else EXIT_OK

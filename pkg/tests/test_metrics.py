import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robos.metrics import (
    BenchmarkFragility,
    RoundRecord,
    concentration_slack,
    instantaneous_lenient,
    instantaneous_rs,
    lenient_regret,
    rs_regret,
    sublinearity_stat,
    summarize,
    theorem_bound_curves,
    trace_from_csv,
    trace_to_csv,
)
from robos.fragility import true_fragility
from robos.simplex import MmdMetric


def record(t, tau, expected, kappa=0.0, eps=0.0, beta=1.0, sigma_w=0.1, gain=0.0):
    return RoundRecord(
        t=t, w=np.array([0.5, 0.5]), w_star=np.array([0.25, 0.75]), eps=eps, tau=tau,
        action=0, context=1, y=expected, expected_reward=expected, kappa=kappa,
        lenient=instantaneous_lenient(tau, expected),
        rs=instantaneous_rs(tau, kappa, eps, expected),
        beta=beta, sigma_w=sigma_w, info_gain=gain, kappa_hat=np.array([kappa, np.inf]),
    )


def test_lenient_examples():
    assert np.all(lenient_regret([record(t, 0.0, 0.5) for t in range(1, 6)]) == 0)
    assert lenient_regret([record(1, 2.0, 1.0)])[-1] == 1.0


def test_rs_examples():
    assert instantaneous_rs(1.0, np.inf, 0.5, -3.0) == 0.0
    assert instantaneous_rs(1.0, 2.0, 0.25, 0.0) == pytest.approx(0.5)
    trace = [record(t, 1.0, 0.5 * t % 1.3) for t in range(1, 20)]
    assert np.array_equal(lenient_regret(trace), rs_regret(trace))


@given(st.floats(-5, 5), st.floats(0, 10), st.floats(0, 3), st.floats(-5, 5))
def test_rs_below_lenient(tau, kappa, eps, expected):
    rs = instantaneous_rs(tau, kappa, eps, expected)
    assert 0.0 <= rs <= instantaneous_lenient(tau, expected) + 1e-9


def test_twenty_round_hand_recomputation():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(3, 2))
    metric = MmdMetric(np.array([[1.0, 0.3], [0.3, 1.0]]))
    bench = BenchmarkFragility(f, metric)
    w = np.array([0.6, 0.4])
    trace, len_sum, rs_sum = [], 0.0, 0.0
    for t in range(1, 21):
        x = int(rng.integers(3))
        w_star = rng.dirichlet([1, 1])
        tau = float((f @ w).max()) - 0.1
        kappa = bench(w, tau)
        eps = metric.distance(w, w_star)
        exp_r = float(f[x] @ w_star)
        rec = record(t, tau, exp_r, kappa=kappa, eps=eps)
        trace.append(rec)
        len_sum += max(tau - exp_r, 0)
        k_ref = min(true_fragility(row, w, tau, metric).kappa for row in f)
        rs_sum += max(tau - k_ref * eps - exp_r, 0)
    assert lenient_regret(trace)[-1] == pytest.approx(len_sum)
    assert rs_regret(trace)[-1] == pytest.approx(rs_sum)
    assert len(bench._cache) == 1


def test_bound_curves():
    assert theorem_bound_curves([], 0.1).theorem1.size == 0
    trace = [record(t, 0.0, 0.0, beta=1.0 + 0.1 * t, sigma_w=1.0 / t, gain=np.log(t + 1), eps=0.2)
             for t in range(1, 30)]
    c = theorem_bound_curves(trace, 0.1, b_prime=2.0)
    for curve in (c.theorem1, c.intermediate, c.theorem2):
        assert np.all(np.diff(curve) >= 0)
    t = np.arange(1, 30)
    beta = 1.0 + 0.1 * t
    expected = 2 * beta * np.cumsum(1.0 / t) + 2 * beta * np.sqrt(8 * t * np.log(120))
    assert np.allclose(c.intermediate, expected)
    assert np.allclose(c.theorem2 - c.theorem1, 2.0 * 0.2 * t)
    assert concentration_slack(0, 0.1) == 0.0


def test_sublinearity_examples():
    assert sublinearity_stat(np.full(100, 3.0)) == 0.0
    assert sublinearity_stat(np.arange(100.0)) == pytest.approx(1.0)
    t = np.arange(1, 401, dtype=float)
    assert sublinearity_stat(np.sqrt(t)) == pytest.approx(1 / (2 * np.sqrt(350)), rel=0.2)
    assert sublinearity_stat(t ** 2, "first") < sublinearity_stat(t ** 2, "last")
    with pytest.raises(ValueError):
        sublinearity_stat(t, "middle")


def test_csv_round_trip_is_exact():
    trace = [record(t, 0.1 * t, 1.0 / 3 + t, kappa=np.inf if t == 2 else 0.7) for t in range(1, 5)]
    text = trace_to_csv(trace)
    back = trace_from_csv(text)
    assert trace_to_csv(back) == text
    assert back[1].kappa == np.inf and back[0].expected_reward == trace[0].expected_reward
    assert text.splitlines()[0].startswith("t,action,context,y,tau")


def test_summary_fields():
    trace = [record(t, 1.0, 0.0) for t in range(1, 41)]
    s = summarize(trace, 0.1, 0.0)
    assert s["final_lenient_regret"] == 40.0 and s["lenient_slope_last"] == pytest.approx(1.0)
    assert summarize([], 0.1, 0.0) == {"rounds": 0}

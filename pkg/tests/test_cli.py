import json

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from robos import harness
from robos.cli import main, preset_names, resolve_config_path
from robos.config import ConfigError, dump_config, load_config, parse_config, parse_seeds
from robos.fragility import SolverError
from robos.harness import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK

MINIMAL = {
    "name": "tiny",
    "horizon": 3,
    "seeds": [0],
    "kernel": {"action": {"kind": "rbf", "lengthscales": [0.3]}, "context": {"kind": "rbf", "lengthscales": [1.0]}},
    "grid": {"actions": {"start": 0, "stop": 1, "num": 4}, "contexts": {"start": -2, "stop": 2, "num": 3}},
    "environment": {
        "noise": 0.05,
        "objective": {"kind": "rkhs_sample", "rkhs_norm": 1.0, "centers": 4},
        "reference": {"kind": "fixed_gaussian", "mean": 0.0, "variance": 1.0},
        "truth": {"kind": "fixed_gaussian", "mean": 0.5, "variance": 1.0},
    },
    "tau": {"mode": "fraction_of_max", "value": 0.5},
    "policies": [{"kind": "robos"}, {"kind": "so_ucb"}],
}


def write_cfg(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_presets_validate(capsys):
    names = preset_names()
    assert {"synthetic", "glucose_constant", "glucose_decaying", "data_driven", "sensitivity"} <= set(names)
    for name in names:
        assert main(["validate", name]) == EXIT_OK
    out = capsys.readouterr().out
    assert "# ok" in out


def test_synthetic_preset_has_six_policies():
    cfg = load_config(resolve_config_path("synthetic"))
    assert [p.label for p in cfg.policies] == ["robos", "drbo_3eps", "drbo_eps", "drbo_eps_over_3", "so_ucb", "wrbo"]
    assert cfg.horizon == 400 and cfg.seeds == tuple(range(20))


def test_sensitivity_preset_sweeps_tau_and_radius():
    cfg = load_config(resolve_config_path("sensitivity"))
    assert len(cfg.policies) == 30
    radii = sorted({p.radius for p in cfg.policies if p.kind == "drbo"})
    assert radii[0] == pytest.approx(0.1) and radii[-1] == pytest.approx(10.0)
    assert cfg.horizon == 200 and len(cfg.seeds) == 10


def test_resolved_config_round_trips(tmp_path):
    for name in preset_names():
        cfg = load_config(resolve_config_path(name))
        text = dump_config(cfg)
        again = parse_config(yaml.safe_load(text), base_dir=cfg.base_dir)
        assert dump_config(again) == text


def test_empty_and_bad_configs(tmp_path, capsys):
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert main(["validate", str(empty)]) == EXIT_CONFIG
    bad = dict(MINIMAL, colour="blue")
    assert main(["validate", str(write_cfg(tmp_path, bad))]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().out
    assert main(["run", str(write_cfg(tmp_path, bad)), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_errors_are_collected():
    data = json.loads(json.dumps(MINIMAL))
    data["delta"] = 2.0
    data["policies"] = [{"kind": "nope"}]
    data["environment"]["noise"] = -1
    with pytest.raises(ConfigError) as info:
        parse_config(data)
    assert len(info.value.errors) >= 3


def test_parse_seeds():
    assert parse_seeds("2..4") == (2, 3, 4)
    assert parse_seeds(7) == (7,)
    assert parse_seeds([1, 3]) == (1, 3)
    for bad in ("4..2", "x", -1, [1, 1]):
        with pytest.raises(ValueError):
            parse_seeds(bad)


def _mutations():
    leaf = st.one_of(st.none(), st.booleans(), st.integers(-5, 5), st.floats(allow_nan=True), st.text(max_size=5),
                     st.lists(st.integers(-2, 2), max_size=3))
    paths = st.sampled_from([
        ("horizon",), ("seeds",), ("delta",), ("lam",), ("rkhs_bound",), ("tau", "mode"), ("tau", "value"),
        ("kernel", "action", "kind"), ("kernel", "context", "lengthscales"), ("kernel", "action", "nu"),
        ("grid", "actions", "num"), ("grid", "contexts"), ("environment", "noise"),
        ("environment", "objective", "kind"), ("environment", "objective", "centers"),
        ("environment", "reference", "kind"), ("environment", "truth", "shift"), ("policies",), ("name",),
        ("environment",), ("kernel",), ("extra_key",),
    ])
    return st.lists(st.tuples(paths, leaf), min_size=1, max_size=4)


@given(_mutations())
def test_fuzzed_configs_fail_cleanly(mutations):
    data = json.loads(json.dumps(MINIMAL))
    for path, value in mutations:
        node = data
        for key in path[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[path[-1]] = value
    try:
        cfg = parse_config(data)
    except ConfigError as exc:
        assert exc.errors and all(isinstance(e, str) for e in exc.errors)
    else:
        cfg.build_grid()


@given(st.one_of(st.text(max_size=30), st.integers(), st.lists(st.integers(), max_size=3)))
def test_non_mapping_documents(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_single_round_single_row(tmp_path):
    data = dict(MINIMAL, horizon=1, policies=[{"kind": "wrbo"}])
    out = tmp_path / "run"
    assert main(["run", str(write_cfg(tmp_path, data)), "--out", str(out)]) == EXIT_OK
    rows = (out / "wrbo" / "seed_0" / "trace.csv").read_text().splitlines()
    assert len(rows) == 2
    assert (out / "config.resolved.yaml").exists() and (out / "aggregate.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())["files"]
    assert "wrbo/seed_0/summary.json" in manifest


def test_outputs_are_byte_identical_and_parallel_safe(tmp_path):
    cfg_path = write_cfg(tmp_path, dict(MINIMAL, seeds="0..1"))
    runs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        assert main(["run", str(cfg_path), "--out", str(out), "--jobs", jobs]) == EXIT_OK
        runs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in out.rglob("*") if p.is_file()})
    assert runs[0] == runs[1] == runs[2]


def test_cli_overrides(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(write_cfg(tmp_path, MINIMAL)), "--out", str(out), "--seeds", "3..4", "--horizon", "2"]) == EXIT_OK
    assert sorted(p.name for p in (out / "robos").iterdir()) == ["seed_3", "seed_4"]
    assert len((out / "robos" / "seed_4" / "trace.csv").read_text().splitlines()) == 3
    assert main(["run", str(write_cfg(tmp_path, MINIMAL)), "--seeds", "5..1"]) == EXIT_CONFIG
    assert main(["run", str(write_cfg(tmp_path, MINIMAL)), "--horizon", "0"]) == EXIT_CONFIG


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ROBOS_OUTPUT_ROOT", str(tmp_path / "root"))
    data = dict(MINIMAL, horizon=1, policies=[{"kind": "so_ucb"}])
    assert main(["run", str(write_cfg(tmp_path, data))]) == EXIT_OK
    assert (tmp_path / "root" / "tiny" / "so_ucb" / "seed_0" / "trace.csv").exists()


def test_numerical_failure_marks_run(tmp_path, monkeypatch):
    real = harness.run_policy

    def flaky(cfg, policy, problem):
        if policy.kind == "robos":
            raise SolverError("synthetic failure")
        return real(cfg, policy, problem)

    monkeypatch.setattr(harness, "run_policy", flaky)
    out = tmp_path / "o"
    assert main(["run", str(write_cfg(tmp_path, MINIMAL)), "--out", str(out)]) == EXIT_NUMERICAL
    assert (out / "FAILED").exists() and (out / "robos" / "seed_0" / "FAILED").exists()
    assert (out / "so_ucb" / "seed_0" / "trace.csv").exists()
    agg = json.loads((out / "aggregate.json").read_text())["policies"]
    assert list(agg) == ["so_ucb"]
    # a clean rerun into the same directory clears the sweep-level marker
    monkeypatch.setattr(harness, "run_policy", real)
    assert main(["run", str(write_cfg(tmp_path, MINIMAL)), "--out", str(out)]) == EXIT_OK
    assert not (out / "FAILED").exists()


def test_presets_commands(capsys):
    assert main(["presets", "list"]) == EXIT_OK
    assert "synthetic" in capsys.readouterr().out.split()
    assert main(["presets", "show", "synthetic"]) == EXIT_OK
    assert "rkhs_bound" in capsys.readouterr().out
    assert main(["presets", "show", "nope"]) == EXIT_CONFIG
    assert main(["presets", "show"]) == EXIT_CONFIG


def test_trace_columns_and_invariants(tmp_path):
    data = dict(MINIMAL, horizon=15, policies=[{"kind": "robos"}, {"kind": "drbo", "radius": 1.0, "radius_mode": "epsilon"}])
    out = tmp_path / "o"
    assert main(["run", str(write_cfg(tmp_path, data)), "--out", str(out)]) == EXIT_OK
    from robos.metrics import trace_from_csv
    for label in ("robos", "drbo_r1eps"):
        trace = trace_from_csv((out / label / "seed_0" / "trace.csv").read_text())
        assert [r.t for r in trace] == list(range(1, 16))
        for r in trace:
            assert 0 <= r.rs <= r.lenient + 1e-9
            assert abs(r.w.sum() - 1) < 1e-9 and abs(r.w_star.sum() - 1) < 1e-9
        assert np.all(np.diff([r.beta for r in trace]) >= -1e-12)

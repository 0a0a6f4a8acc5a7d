import json
import importlib.util
import pathlib

import numpy as np
import pytest

from core.experiment.artifacts import read_artifact, read_header, run_directory, version_folder
from core.experiment.config import config_hash, load_config, parse_document
from core.experiment.run_manager import (
    RunManager, cmd_bilateral, cmd_clear, cmd_dispatch, cmd_risk_boundary, cmd_simulate, cmd_sweep,
)
from core.scenario.scenario import SQRT3, rng_identifier
from core.utils.errors import ConfigError, NumericalError
from core.utils.version import TOOL_VERSION


APP_DIR = pathlib.Path(__file__).resolve().parents[1]
CONFIGS = APP_DIR / "configs"
EXAMPLE = str(CONFIGS / "example.json")
CLEARING = str(CONFIGS / "clearing.json")

EXAMPLE_MARKET = {"example": {"demand_mw": 2.0, "mu_mw": 1.0, "sigma_mw": 0.2, "rho": 0.5}}


def _artifact(base, name):
    found = sorted(pathlib.Path(base).rglob(name))
    assert len(found) == 1, f"expected one {name} under {base}, found {found}"
    return found[0]


def _write_config(tmp_path, document, name="experiment.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def test_example_config_loads_with_defaults():
    config = load_config(EXAMPLE)
    assert config.example.rho == 0.5
    assert config.option_mode == "bilateral"
    assert config.bilateral.trade.delta == pytest.approx(SQRT3 * 0.2)
    assert config.box.q_max == pytest.approx(2.0)
    assert config.box.delta_max == pytest.approx(SQRT3 * 0.2)
    assert config.risk.delta_cap == pytest.approx(2.0 * SQRT3 * 0.2 / 5.0)
    assert config.risk.participant_for("buyer") == "W"
    assert config.risk.participant_for("seller") == "P"
    assert config.scenario_count == 20000


def test_config_hash_ignores_key_order():
    a = {"market": EXAMPLE_MARKET, "run": {"scenarios": 10, "sampling": "quadrature"}}
    b = {"run": {"sampling": "quadrature", "scenarios": 10}, "market": EXAMPLE_MARKET}
    assert config_hash(a) == config_hash(b)
    assert load_config(EXAMPLE).hash == load_config(EXAMPLE).hash


def test_unknown_keys_are_reported_with_their_path():
    with pytest.raises(ConfigError, match=r"run\.colour"):
        parse_document({"market": EXAMPLE_MARKET, "run": {"scenarios": 10, "colour": "red"}})
    with pytest.raises(ConfigError, match=r"option\.bids\[1\]\.weight"):
        parse_document({"market": EXAMPLE_MARKET, "option": {"bids": [
            {"id": "W", "side": "buyer"}, {"id": "P", "side": "seller", "weight": 1},
        ]}})


def test_invalid_values_are_rejected():
    with pytest.raises(ConfigError):
        parse_document({"market": {"example": dict(EXAMPLE_MARKET["example"], rho=1.5)}})
    with pytest.raises(ConfigError):
        parse_document({"market": EXAMPLE_MARKET, "option": {"mode": "exotic"}})
    with pytest.raises(ConfigError):
        parse_document({"market": EXAMPLE_MARKET, "run": {"sampling": "monte_carlo"}}).scenarios()
    with pytest.raises(ConfigError):
        load_config(str(CONFIGS / "missing.json"))


def test_yaml_config():
    config = load_config(str(CONFIGS / "risk_frontier.yaml"))
    assert config.risk.alphas == (0.0, 0.25, 0.5, 0.75)
    assert len(config.risk.strike_grid) == 21
    assert config.risk.strike_grid[-1] == pytest.approx(2.0)
    assert config.model.sigma == pytest.approx(0.4)


def test_seeded_scenarios_switch_to_monte_carlo():
    config = load_config(EXAMPLE)
    grid = config.scenarios(100)
    draws = config.scenarios(100, seed=5)
    assert np.all(np.diff(grid.omegas) > 0)
    assert not np.all(np.diff(draws.omegas) > 0)
    np.testing.assert_array_equal(draws.omegas, config.scenarios(100, seed=5).omegas)
    assert config.effective_seed(5) == 5
    assert config.effective_seed() is None


def test_run_directory_is_deterministic(tmp_path):
    path = run_directory(str(tmp_path), "clear", "ab" * 32)
    assert path == str(tmp_path / version_folder() / ("clear_" + "ab" * 6))
    assert version_folder("1.2.0") == "v1_2_0"


def test_dispatch_command(tmp_path):
    assert cmd_dispatch(EXAMPLE, omega=0.8, output_dir=str(tmp_path)) == 0
    forward = read_artifact(_artifact(tmp_path, "forward.csv"))
    assert list(forward.columns) == ["id", "X", "P_star"]
    assert dict(zip(forward["id"], forward["X"])) == pytest.approx({"B": 1.0, "P": 0.0, "W": 1.0})
    assert np.all(forward["P_star"] == 1.0)
    realtime = read_artifact(_artifact(tmp_path, "realtime.csv"))
    assert np.all(realtime["p"] == 2.0)
    payments = dict(zip(realtime["id"], realtime["payment"]))
    assert payments["W"] == pytest.approx(0.6)
    assert payments["P"] == pytest.approx(0.4)

    header = read_header(_artifact(tmp_path, "forward.csv"))
    assert header["tool_version"] == TOOL_VERSION
    assert header["config_hash"] == load_config(EXAMPLE).hash
    assert header["seed"] == "none"
    assert header["rng"] == rng_identifier()


def test_dispatch_without_omega_writes_forward_only(tmp_path):
    paths = RunManager(load_config(EXAMPLE), str(tmp_path)).dispatch()
    assert set(paths) == {"forward"}


def test_explicit_market_dispatch(tmp_path):
    assert cmd_dispatch(str(CONFIGS / "explicit.json"), omega=0.9, output_dir=str(tmp_path)) == 0
    forward = read_artifact(_artifact(tmp_path, "forward.csv"))
    assert set(forward["id"]) == {"B", "P", "W"}


def test_clear_command(tmp_path):
    assert cmd_clear(CLEARING, output_dir=str(tmp_path)) == 0
    trades = read_artifact(_artifact(tmp_path, "trades.csv")).set_index("id")
    for pid in ("W", "P"):
        assert trades.loc[pid, "status"] == "cleared"
        assert trades.loc[pid, "q"] == pytest.approx(0.5, abs=1e-9)
        assert trades.loc[pid, "K"] == pytest.approx(1.0, abs=1e-9)
    assert trades.loc["W", "side"] == "buyer"

    ms = read_artifact(_artifact(tmp_path, "ms.csv"))
    assert np.sum(ms["weight"] * ms["ms"]) == pytest.approx(0.0, abs=1e-9)

    ledger = read_artifact(_artifact(tmp_path, "ledger.csv"))
    for _, group in ledger.groupby(["stage", ledger["spot"].fillna(-1.0)]):
        assert group["amount"].sum() == pytest.approx(0.0, abs=1e-9)
    assert not list(pathlib.Path(tmp_path).rglob("newton.csv"))


def test_zero_ms_clearing_writes_the_newton_trace(tmp_path):
    assert cmd_clear(CLEARING, mode="zero-ms", output_dir=str(tmp_path)) == 0
    ms = read_artifact(_artifact(tmp_path, "ms.csv"))
    assert np.all(ms["ms"] == 0.0)
    trades = read_artifact(_artifact(tmp_path, "trades.csv")).set_index("id")
    assert trades.loc["W", "q"] == pytest.approx(trades.loc["P", "q"], abs=1e-10)
    newton = read_artifact(_artifact(tmp_path, "newton.csv"))
    assert newton["residual"].iloc[-1] < 1e-10
    assert newton["q_W"].iloc[-1] == pytest.approx(newton["q_P"].iloc[-1], abs=1e-10)


def test_two_sellers_share_the_exercise(tmp_path):
    assert cmd_clear(str(CONFIGS / "two_sellers.json"), output_dir=str(tmp_path)) == 0
    exercise = read_artifact(_artifact(tmp_path, "exercise.csv"))
    p = exercise[exercise["seller"] == "P"]["delta_exercised"].to_numpy()
    p2 = exercise[exercise["seller"] == "P2"]["delta_exercised"].to_numpy()
    np.testing.assert_allclose(p, p2, atol=1e-9)
    trades = read_artifact(_artifact(tmp_path, "trades.csv")).set_index("id")
    total = p + p2
    assert set(np.round(total, 9)) == {0.0, round(trades.loc["W", "delta"], 9)}


@pytest.mark.slow
def test_bilateral_command(tmp_path):
    assert cmd_bilateral(EXAMPLE, q=0.5, K=1.0, output_dir=str(tmp_path)) == 0
    row = read_artifact(_artifact(tmp_path, "bilateral.csv")).iloc[0]
    assert row["equilibrium"] == "N2"
    assert row["best_response"] == "interval"
    assert row["analytic_delta"] == pytest.approx(-0.03)
    assert row["simulated_delta_W"] == pytest.approx(-0.03, abs=2e-4)
    assert row["simulated_delta_P"] == pytest.approx(-0.03, abs=2e-4)


def test_bilateral_command_rejects_volumes_above_the_cap(tmp_path):
    assert cmd_bilateral(EXAMPLE, q=0.5, K=1.0, delta=1.0, output_dir=str(tmp_path)) == 2


def test_risk_boundary_command(tmp_path):
    config = str(CONFIGS / "risk_frontier.yaml")
    assert cmd_risk_boundary(config, alpha=0.75, output_dir=str(tmp_path)) == 0
    frontier = read_artifact(_artifact(tmp_path, "frontier.csv"))
    assert set(frontier["alpha"]) == {0.75}
    inner = frontier[(frontier["K"] > 0) & (frontier["K"] < 2)]
    assert len(inner) == 19
    assert set(inner["status"]) == {"ok"}
    np.testing.assert_allclose(inner["q_boundary"], 2.0 - inner["K"], atol=1e-5)


def test_simulate_command(tmp_path):
    assert cmd_simulate(EXAMPLE, n=2000, output_dir=str(tmp_path)) == 0
    stats = read_artifact(_artifact(tmp_path, "moments.csv")).set_index("participant")
    assert stats.loc["W", "variance_no_option"] == pytest.approx(0.05, abs=1e-3)
    assert stats.loc["W", "variance_delta"] == pytest.approx(-0.03, abs=1e-3)
    assert stats.loc["W", "variance_delta"] == pytest.approx(
        stats.loc["W", "cov_term"] + stats.loc["W", "var_term"], abs=1e-9)
    assert stats.loc["B", "variance"] == pytest.approx(0.0, abs=1e-12)
    trace = read_artifact(_artifact(tmp_path, "payments.csv"))
    assert list(trace.columns) == ["scenario", "weight", "participant", "payment"]
    assert len(trace) == 3 * 2000


def test_centralized_simulation_reports_the_market_maker(tmp_path):
    assert cmd_simulate(CLEARING, n=1000, output_dir=str(tmp_path)) == 0
    stats = read_artifact(_artifact(tmp_path, "moments.csv")).set_index("participant")
    assert "M" in stats.index
    assert stats.loc["M", "mean"] == pytest.approx(0.0, abs=1e-9)


def test_seeded_runs_are_byte_identical(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    for base in (first, second):
        assert cmd_simulate(EXAMPLE, n=300, seed=42, output_dir=str(base)) == 0
    names = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert names
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert read_header(_artifact(first, "payments.csv"))["seed"] == "42"


def test_bilateral_header_records_the_monte_carlo_seed(tmp_path):
    config = _write_config(tmp_path, {
        "market": EXAMPLE_MARKET,
        "run": {"scenarios": 2000, "sampling": "monte_carlo", "seed": 11},
    })
    assert cmd_bilateral(config, q=0.5, K=1.0, output_dir=str(tmp_path / "out")) == 0
    header = read_header(_artifact(tmp_path / "out", "bilateral.csv"))
    assert header["seed"] == "11"
    assert header["scenarios"] == "2000"


def test_cli_overrides_get_their_own_run_directory(tmp_path):
    for omega in (0.8, 1.2):
        assert cmd_dispatch(EXAMPLE, omega=omega, output_dir=str(tmp_path)) == 0
    realtime = sorted(pathlib.Path(tmp_path).rglob("realtime.csv"))
    assert len(realtime) == 2
    prices = sorted(float(read_artifact(path)["p"].iloc[0]) for path in realtime)
    assert prices == [0.0, 2.0]
    headers = [read_header(path) for path in realtime]
    assert {h["overrides"] for h in headers} == {'{"omega":0.8}', '{"omega":1.2}'}
    assert len({h["run_hash"] for h in headers}) == 2
    assert all(h["config_hash"] == load_config(EXAMPLE).hash for h in headers)


def test_plain_runs_are_keyed_on_the_config_hash(tmp_path):
    assert cmd_dispatch(EXAMPLE, output_dir=str(tmp_path)) == 0
    path = _artifact(tmp_path, "forward.csv")
    digest = load_config(EXAMPLE).hash
    assert path.parent == pathlib.Path(run_directory(str(tmp_path), "dispatch", digest))
    header = read_header(path)
    assert header["run_hash"] == digest
    assert header["overrides"] == "{}"
    assert header["scenarios"] == "none"


def test_simulate_records_the_scenario_count(tmp_path):
    for n in (300, 400):
        assert cmd_simulate(EXAMPLE, n=n, seed=3, output_dir=str(tmp_path)) == 0
    counts = sorted(read_header(p)["scenarios"] for p in pathlib.Path(tmp_path).rglob("moments.csv"))
    assert counts == ["300", "400"]


def test_output_dir_under_a_file_exits_with_config_error(tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory", encoding="utf-8")
    assert cmd_dispatch(EXAMPLE, output_dir=str(blocker / "runs")) == 2


def test_sweep_command(tmp_path):
    assert cmd_sweep(str(CONFIGS / "sweep.yaml"), output_dir=str(tmp_path)) == 0
    sweep = read_artifact(_artifact(tmp_path, "sweep.csv"))
    assert len(sweep) == 6
    rho_quarter = sweep[sweep["value"] == 0.25]
    np.testing.assert_allclose(rho_quarter["analytic_delta"], -0.09)
    np.testing.assert_allclose(sweep["simulated_delta"], sweep["analytic_delta"], atol=1e-3)


def test_sweep_needs_a_parameter(tmp_path):
    assert cmd_sweep(EXAMPLE, output_dir=str(tmp_path)) == 2


def test_exit_codes(tmp_path, monkeypatch):
    bad = _write_config(tmp_path, {"market": EXAMPLE_MARKET, "runs": {}})
    assert cmd_dispatch(bad, output_dir=str(tmp_path)) == 2
    assert cmd_dispatch(str(tmp_path / "nowhere.json"), output_dir=str(tmp_path)) == 2

    infeasible = _write_config(tmp_path, {"market": {
        "demand_mw": 5.0,
        "wind": {"mu_mw": 1.0, "sigma_mw": 0.2},
        "dispatchables": [{"id": "B", "cap_mw": 1.0, "ramp_mw": 0.0,
                           "cost_blocks": [{"capacity_mw": None, "marginal_cost_per_mwh": 1.0}]}],
        "renewables": [{"id": "W", "cap_mw": 1.4,
                        "cost_blocks": [{"capacity_mw": None, "marginal_cost_per_mwh": 0.0}]}],
    }}, name="infeasible.json")
    assert cmd_dispatch(infeasible, output_dir=str(tmp_path)) == 4

    def broken(self, omega=None):
        raise NumericalError("solver failed")

    monkeypatch.setattr(RunManager, "dispatch", broken)
    assert cmd_dispatch(EXAMPLE, output_dir=str(tmp_path)) == 3


def _load_entry_script():
    spec = importlib.util.spec_from_file_location("option_market_cli", APP_DIR / "OptionMarket.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_main_runs_a_subcommand(tmp_path, capsys):
    cli = _load_entry_script()
    code = cli.main(["--output-dir", str(tmp_path), "dispatch", EXAMPLE, "--omega", "1.2"])
    assert code == 0
    out = capsys.readouterr().out
    assert "P* = 1 $/MWh" in out
    assert "p = 0 $/MWh" in out
    realtime = read_artifact(_artifact(tmp_path, "realtime.csv"))
    assert np.all(realtime["p"] == 0.0)


def test_main_requires_a_subcommand():
    cli = _load_entry_script()
    with pytest.raises(SystemExit):
        cli.main([])

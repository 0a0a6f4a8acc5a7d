"""
Run Manager for OptionMarket.

Runs one CLI pipeline (dispatch, bilateral, clear, risk-boundary, simulate,
sweep) on an experiment config, prints a short summary and writes the CSV
artifacts into a deterministic run directory.
"""

import math
import logging
from dataclasses import asdict
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from colorama import Fore, Style

from core.analytics.analytics import (
    PaymentSample, loss_probability, moments, payment_trace_frame, simulate_payments,
    variance_decomposition, variance_reduction_sweep,
)
from core.bilateral.bilateral import (
    EquilibriumClass, best_response, classify_equilibrium, expected_buyer_option_payoff, volume_cap,
    variance_delta_analytic,
)
from core.clearing.analytic import newton_zero_ms
from core.clearing.clearing import ZERO_MS, ClearingProblem, ClearingSolution, clear as clear_market
from core.clearing.settlement import settle_day_ahead, settle_real_time
from core.dispatch.cost import MARKET_MAKER_ID
from core.dispatch.dispatch import day_ahead, payment_matrix, payments, real_time
from core.dispatch.example import PEAKER_ID, WIND_ID
from core.experiment.artifacts import ArtifactWriter, run_directory, run_hash
from core.experiment.config import ExperimentConfig, load_config
from core.options.trade import BilateralContract, TradeTriple
from core.scenario.scenario import ScenarioSet
from core.risk.frontier import boundary_trace
from core.utils.errors import ConfigError, OptionMarketError
from core.utils.security import secure_output_dir

logger = logging.getLogger(__name__)

ConfigLike = Union[str, ExperimentConfig]


def _ok(message: str) -> None:
    print(f"{Fore.GREEN}{message}{Style.RESET_ALL}")


class RunManager:
    """Pipelines behind the CLI commands, one artifact directory per run."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[str] = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.base_dir = secure_output_dir(output_dir or config.output_dir)
        self.writer: Optional[ArtifactWriter] = None

    def _open(self, command: str, seed: Optional[int] = None, scenarios: Optional[int] = None,
              overrides: Optional[Dict[str, object]] = None) -> ArtifactWriter:
        """Run folder keyed on the config hash and the CLI overrides that were given."""
        run_dir = run_directory(self.base_dir, command, run_hash(self.config.hash, overrides))
        self.writer = ArtifactWriter(run_dir, self.config.hash, seed, scenarios, dict(overrides or {}))
        print(f"📁 Writing artifacts to: {run_dir}")
        return self.writer

    def _energy(self, scenarios: ScenarioSet):
        forward = day_ahead(self.config.market)
        energy, spot = payment_matrix(self.config.market, forward, scenarios)
        return forward, energy, spot

    def dispatch(self, omega: Optional[float] = None) -> Dict[str, str]:
        """Day-ahead dispatch, plus the real-time dispatch of one scenario when omega is given."""
        instance = self.config.market
        writer = self._open("dispatch", overrides={"omega": None if omega is None else float(omega)})
        forward = day_ahead(instance)
        print(f"⚡ Day-ahead price P* = {forward.price:.6g} $/MWh")
        for unit_id in sorted(forward.quantities):
            print(f"   {unit_id}: X = {forward.quantities[unit_id]:.6g} MW")
        paths = {"forward": writer.write("forward.csv", pd.DataFrame({
            "id": sorted(forward.quantities),
            "X": [forward.quantities[i] for i in sorted(forward.quantities)],
            "P_star": forward.price,
        }))}
        if forward.price_at_capacity:
            print(f"{Fore.YELLOW}⚠️ Demand equals available capacity; P* is the last dispatched cost{Style.RESET_ALL}")

        if omega is not None:
            rt = real_time(instance, forward, float(omega))
            records = {r.id: r for r in payments(instance, forward, rt)}
            ids = sorted(rt.quantities)
            print(f"🌬️ Real time at omega = {omega:.6g} MW: p = {rt.price:.6g} $/MWh")
            paths["realtime"] = writer.write("realtime.csv", pd.DataFrame({
                "id": ids,
                "x": [rt.quantities[i] for i in ids],
                "p": rt.price,
                "payment": [records[i].total for i in ids],
            }))
        return paths

    def bilateral(self, q: float, K: float, delta: Optional[float] = None) -> Dict[str, str]:
        """Best response, equilibrium class and variance deltas of one posted (q, K)."""
        example = self.config.require_example("bilateral")
        model = self.config.model
        cap = volume_cap(model)
        trade = TradeTriple(q=q, K=K, delta=cap if delta is None else delta).check_cap(cap)
        scenarios = self.config.scenarios()
        writer = self._open("bilateral", self.config.effective_seed(), len(scenarios), {
            "q": float(q), "K": float(K), "delta": None if delta is None else float(delta)})

        response = best_response(q, K, model, example.rho)
        equilibrium = classify_equilibrium(q, K, example.rho)
        expected_v = expected_buyer_option_payoff(model, example.rho, trade)
        analytic = math.nan
        if equilibrium is EquilibriumClass.N2 and abs(trade.delta - cap) <= 1e-12:
            analytic = variance_delta_analytic(q, K, model.sigma)

        contract = BilateralContract(buyer=WIND_ID, seller=PEAKER_ID, trade=trade)
        without = simulate_payments(self.config.market, scenarios)
        with_option = simulate_payments(self.config.market, scenarios, contract)
        simulated = {
            pid: moments([with_option[pid]]).variance[pid] - moments([without[pid]]).variance[pid]
            for pid in (WIND_ID, PEAKER_ID)
        }

        print(f"🎯 Best response of {WIND_ID}: {response.describe()}")
        print(f"🏷️ Equilibrium class: {equilibrium.value}")
        print(f"💵 E[V_W] = {expected_v:.6g}")
        print(f"📉 Variance delta: analytic {analytic:.6g}, simulated W {simulated[WIND_ID]:.6g}, "
              f"P {simulated[PEAKER_ID]:.6g}")
        return {"bilateral": writer.write("bilateral.csv", pd.DataFrame([{
            "q": q, "K": K, "delta": trade.delta,
            "best_response": response.kind.value,
            "best_response_low": response.values[0],
            "best_response_high": response.values[1],
            "equilibrium": equilibrium.value,
            "expected_V_W": expected_v,
            "analytic_delta": analytic,
            "simulated_delta_W": simulated[WIND_ID],
            "simulated_delta_P": simulated[PEAKER_ID],
        }]))}

    def _clear(self, scenarios: ScenarioSet, objective: str) -> ClearingSolution:
        _, energy, spot = self._energy(scenarios)
        bids = self.config.bids(energy, spot, scenarios)
        problem = ClearingProblem(bids=bids, scenarios=scenarios, spot=spot, objective=objective,
                                  exercise_split=self.config.exercise_split)
        return clear_market(problem)

    def clear(self, mode: Optional[str] = None) -> Dict[str, str]:
        """Centralized clearing under max-ms or zero-ms."""
        objective = mode or self.config.objective
        scenarios = self.config.scenarios()
        writer = self._open("clear", self.config.effective_seed(), len(scenarios), {"mode": mode})
        solution = self._clear(scenarios, objective)

        ids = sorted(solution.sides)
        rows = []
        for pid in ids:
            trade = solution.trades.get(pid)
            rows.append({
                "id": pid, "side": solution.sides[pid].value,
                "q": trade.q if trade else 0.0, "K": trade.K if trade else 0.0,
                "delta": trade.delta if trade else 0.0,
                "status": "cleared" if trade else "no_trade",
            })
        paths = {"trades": writer.write("trades.csv", pd.DataFrame(rows))}

        index = np.arange(len(scenarios))
        sellers = sorted(solution.exercise)
        paths["exercise"] = writer.write("exercise.csv", pd.DataFrame({
            "seller": [g for g in sellers for _ in index],
            "scenario": np.tile(index, len(sellers)),
            "delta_exercised": np.concatenate([solution.exercise[g] for g in sellers]) if sellers else [],
        }))
        paths["ms"] = writer.write("ms.csv", pd.DataFrame({
            "scenario": index, "weight": scenarios.weights, "ms": solution.ms,
        }))
        paths["ledger"] = writer.write("ledger.csv", self._ledger_frame(solution))

        if solution.is_empty:
            print(f"{Fore.YELLOW}🚫 No acceptable trade with positive volume; nothing cleared{Style.RESET_ALL}")
        else:
            for pid in ids:
                if pid in solution.trades:
                    t = solution.trades[pid]
                    print(f"   {pid} ({solution.sides[pid].value}): q = {t.q:.6g}, K = {t.K:.6g}, "
                          f"delta = {t.delta:.6g}")
        _ok(f"💰 E[MS] = {solution.expected_ms:.6g}")

        if objective == ZERO_MS and self._newton_applies(solution):
            paths["newton"] = self._newton(writer)
        return paths

    @staticmethod
    def _ledger_frame(solution: ClearingSolution) -> pd.DataFrame:
        rows = []
        day_ahead_ledger = settle_day_ahead(solution)
        for pid in sorted(day_ahead_ledger.entries):
            rows.append({"stage": day_ahead_ledger.stage, "spot": math.nan, "participant": pid,
                         "amount": day_ahead_ledger.entries[pid]})
        first_omega = {}
        for omega, p in zip(solution.scenarios.omegas.tolist(), solution.spot.tolist()):
            first_omega.setdefault(p, omega)
        for p in sorted(first_omega):
            ledger = settle_real_time(solution, first_omega[p], p)
            for pid in sorted(ledger.entries):
                rows.append({"stage": ledger.stage, "spot": p, "participant": pid, "amount": ledger.entries[pid]})
        return pd.DataFrame(rows, columns=["stage", "spot", "participant", "amount"])

    def _newton_applies(self, solution: ClearingSolution) -> bool:
        if self.config.example is None or set(solution.sides) != {WIND_ID, PEAKER_ID}:
            return False
        return len(np.unique(solution.spot)) == 2

    def _newton(self, writer: ArtifactWriter) -> str:
        example = self.config.example
        result = newton_zero_ms(example.mu, example.sigma, example.rho, self.config.newton_init)
        print(f"🔁 Newton-Raphson converged in {result.iterations} iterations: q_W = q_P = {result.q:.10g}")
        return writer.write("newton.csv", pd.DataFrame([
            {"iteration": s.iteration, "residual": s.residual, "q_W": s.q_W, "K_W": s.K_W,
             "q_P": s.q_P, "K_P": s.K_P}
            for s in result.history
        ]))

    def risk_boundary(self, side: Optional[str] = None, alpha: Optional[float] = None,
                      delta: Optional[float] = None) -> Dict[str, str]:
        """CVaR acceptability frontier in the (K, q) plane for each risk level."""
        risk = self.config.risk
        overrides = {"side": side, "alpha": None if alpha is None else float(alpha),
                     "delta": None if delta is None else float(delta)}
        side = side or risk.side
        participant = risk.participant_for(side)
        alphas = risk.alphas if alpha is None else (float(alpha),)
        delta = risk.delta_cap if delta is None else float(delta)
        scenarios = self.config.scenarios()
        writer = self._open("risk-boundary", self.config.effective_seed(), len(scenarios), overrides)
        _, energy, spot = self._energy(scenarios)
        if participant not in energy:
            raise ConfigError(f"risk.participant {participant!r} is not a market participant")

        frames = []
        for a in alphas:
            points = boundary_trace(side, a, delta, risk.strike_grid, risk.q_bracket,
                                    energy[participant], spot, scenarios)
            frames.append(pd.DataFrame([
                {"K": p.K, "q_boundary": p.q_boundary, "alpha": p.alpha, "delta": p.delta, "status": p.status}
                for p in points
            ]))
            traced = sum(1 for p in points if not math.isnan(p.q_boundary))
            print(f"🛡️ {participant} ({side}) alpha = {a:g}: {traced}/{len(points)} strikes on the frontier")
        return {"frontier": writer.write("frontier.csv", pd.concat(frames, ignore_index=True))}

    def _option(self, scenarios: ScenarioSet):
        mode = self.config.option_mode
        if mode == "bilateral":
            if self.config.bilateral is None:
                raise ConfigError("option.mode = bilateral needs option.bilateral")
            return self.config.bilateral
        if mode == "centralized":
            return self._clear(scenarios, self.config.objective)
        return None

    def simulate(self, n: Optional[int] = None, seed: Optional[int] = None) -> Dict[str, str]:
        """Per-scenario payments with and without the configured option, and their moments."""
        scenarios = self.config.scenarios(n, seed)
        writer = self._open("simulate", self.config.effective_seed(seed), len(scenarios), {
            "n": None if n is None else int(n), "seed": None if seed is None else int(seed)})
        option = self._option(scenarios)
        without = simulate_payments(self.config.market, scenarios)
        with_option = simulate_payments(self.config.market, scenarios, option)
        if MARKET_MAKER_ID in with_option and MARKET_MAKER_ID not in without:
            without[MARKET_MAKER_ID] = PaymentSample(MARKET_MAKER_ID, scenarios, np.zeros(len(scenarios)))

        stats_with = moments(with_option)
        stats_without = moments(without)
        rows = []
        for pid in sorted(with_option):
            v = PaymentSample(pid, scenarios, with_option[pid].values - without[pid].values)
            split = variance_decomposition(without[pid], v)
            rows.append({
                "participant": pid,
                "mean": stats_with.mean[pid],
                "variance": stats_with.variance[pid],
                "loss_probability": loss_probability(with_option[pid]),
                "mean_no_option": stats_without.mean[pid],
                "variance_no_option": stats_without.variance[pid],
                "loss_probability_no_option": loss_probability(without[pid]),
                "variance_delta": stats_with.variance[pid] - stats_without.variance[pid],
                "cov_term": split.cov_term,
                "var_term": split.var_term,
            })
            print(f"📊 {pid}: mean {stats_with.mean[pid]:.6g}, variance {stats_with.variance[pid]:.6g} "
                  f"(without option {stats_without.variance[pid]:.6g})")
        return {
            "payments": writer.write("payments.csv", payment_trace_frame(with_option)),
            "moments": writer.write("moments.csv", pd.DataFrame(rows)),
        }

    def sweep(self, parameter: Optional[str] = None, values: Optional[Sequence[float]] = None,
              q: Optional[float] = None) -> Dict[str, str]:
        """Variance reduction of the canonical N2 trade across rho or sigma."""
        example = self.config.require_example("sweep")
        section = self.config.run.get("sweep") or {}
        overrides = {"parameter": parameter, "q": None if q is None else float(q),
                     "values": None if values is None else [float(v) for v in values]}
        parameter = parameter or section.get("parameter")
        values = list(values if values is not None else section.get("values") or [])
        if parameter is None or not values:
            raise ConfigError("sweep needs a parameter and values (run.sweep or CLI flags)")
        if q is None:
            q = section.get("q")
        if q is None:
            rhos = values if parameter == "rho" else [example.rho]
            q = 0.25 / max(rhos)
        writer = self._open("sweep", None, self.config.scenario_count, overrides)
        rows = variance_reduction_sweep(parameter, values, example.demand, example.mu, example.sigma,
                                        example.rho, float(q), self.config.scenario_count)
        for row in rows:
            print(f"📈 {parameter} = {row.value:g} {row.participant}: analytic {row.analytic_delta:.6g}, "
                  f"simulated {row.simulated_delta:.6g}")
        return {"sweep": writer.write("sweep.csv", pd.DataFrame([asdict(row) for row in rows]))}


def _run(config: ConfigLike, output_dir: Optional[str], action) -> int:
    try:
        if isinstance(config, str):
            config = load_config(config)
        manager = RunManager(config, output_dir)
        action(manager)
    except OptionMarketError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"{Fore.RED}❌ {type(e).__name__}: {e}{Style.RESET_ALL}")
        return e.exit_code
    _ok("✅ Done")
    return 0


def cmd_dispatch(config: ConfigLike, omega: Optional[float] = None, output_dir: Optional[str] = None) -> int:
    return _run(config, output_dir, lambda m: m.dispatch(omega))


def cmd_bilateral(config: ConfigLike, q: float, K: float, delta: Optional[float] = None,
                  output_dir: Optional[str] = None) -> int:
    return _run(config, output_dir, lambda m: m.bilateral(q, K, delta))


def cmd_clear(config: ConfigLike, mode: Optional[str] = None, output_dir: Optional[str] = None) -> int:
    return _run(config, output_dir, lambda m: m.clear(mode))


def cmd_risk_boundary(config: ConfigLike, side: Optional[str] = None, alpha: Optional[float] = None,
                      delta: Optional[float] = None, output_dir: Optional[str] = None) -> int:
    return _run(config, output_dir, lambda m: m.risk_boundary(side, alpha, delta))


def cmd_simulate(config: ConfigLike, n: Optional[int] = None, seed: Optional[int] = None,
                 output_dir: Optional[str] = None) -> int:
    return _run(config, output_dir, lambda m: m.simulate(n, seed))


def cmd_sweep(config: ConfigLike, parameter: Optional[str] = None, values: Optional[Sequence[float]] = None,
              q: Optional[float] = None, output_dir: Optional[str] = None) -> int:
    return _run(config, output_dir, lambda m: m.sweep(parameter, values, q))

"""Experiment drivers behind the command line: comparisons, training, oracle sweeps.

All randomness is derived from one integer seed; results are ordered by
(strategy, batch) regardless of how many workers ran them.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .baselines import asm_place, ghp_place, pmd_place, ra_place
from .deployment import (Deployment, EnergyReport, InfeasibleError, crossover_time,
                         deployment_to_dict, energy_vs_idle, objective_energy)
from .maddpg import AgentEnsemble, TrainConfig, policy_deployment
from .oracle import SweepRow, best_rfdh_activation
from .scenario import EnergyParams, Network, RequestSet, generate_requests

STRATEGY_ORDER = ("DRL", "ORACLE", "PMD", "RA", "GHP", "ASM")
BASELINES = ("PMD", "RA", "GHP", "ASM")
THREADS_ENV = "ORAN_PLACER_THREADS"


class MissingCheckpointError(ValueError):
    pass


def worker_count(requested: int | None = None) -> int:
    """Requested workers (default: CPU count), capped by ``ORAN_PLACER_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def random_batches(network: Network, n: int, seed: int) -> list[list[RequestSet]]:
    return [generate_requests(network, derived_seed(seed, i)) for i in range(n)]


# -- comparison ----------------------------------------------------------------------

@dataclass
class StrategyOutcome:
    strategy: str
    batch: int
    deployment: Deployment | None
    report: EnergyReport | None
    note: str = ""

    @property
    def served(self) -> bool:
        return self.report is not None


def run_strategy(name: str, network: Network, requests: Sequence[RequestSet],
                 params: EnergyParams, seed: int = 0,
                 ensemble: AgentEnsemble | None = None) -> Deployment:
    if name == "DRL":
        if ensemble is None:
            raise MissingCheckpointError("the DRL strategy needs a trained checkpoint")
        dep, _ = policy_deployment(ensemble, network, requests, params)
        if dep.info.get("unserved"):
            raise InfeasibleError(f"DRL: requests {dep.info['unserved']} unserved")
        return dep
    if name == "ORACLE":
        return best_rfdh_activation(network, requests, params, workers=1)[0]
    if name == "PMD":
        return pmd_place(network, requests, params)
    if name == "GHP":
        return ghp_place(network, requests, params, seed)
    if name == "RA":
        return ra_place(network, requests, params, seed)
    if name == "ASM":
        return asm_place(network, requests, params)
    raise ValueError(f"unknown strategy {name!r}; choose from {STRATEGY_ORDER}")


def _batch_job(args) -> list[StrategyOutcome]:
    network, params, requests, strategies, seed, index, ensemble = args
    out = []
    for name in strategies:
        try:
            dep = run_strategy(name, network, requests, params, derived_seed(seed, index, 7),
                               ensemble)
            out.append(StrategyOutcome(name, index, dep, objective_energy(dep, network, params)))
        except InfeasibleError as exc:
            out.append(StrategyOutcome(name, index, None, None, f"infeasible: {exc}"))
    return out


@dataclass
class Comparison:
    strategies: tuple[str, ...]
    horizon_s: float
    outcomes: list[StrategyOutcome]
    reference: str | None

    def get(self, strategy: str, batch: int) -> StrategyOutcome:
        return next(o for o in self.outcomes if o.strategy == strategy and o.batch == batch)

    @property
    def n_batches(self) -> int:
        return 1 + max((o.batch for o in self.outcomes), default=-1)

    def saving_pct(self, strategy: str, batch: int) -> float | None:
        """Reference saving against ``strategy`` at the horizon, in percent."""
        if self.reference is None or strategy == self.reference:
            return None
        ref, other = self.get(self.reference, batch), self.get(strategy, batch)
        if not (ref.served and other.served):
            return None
        total = other.report.total_kj(self.horizon_s)
        if total <= 0:
            return None
        return 100.0 * (total - ref.report.total_kj(self.horizon_s)) / total

    def crossover_s(self, batch: int) -> float | None:
        if self.reference is None or "ASM" not in self.strategies:
            return None
        asm, ref = self.get("ASM", batch), self.get(self.reference, batch)
        if not (asm.served and ref.served):
            return None
        return crossover_time(asm.report, ref.report)


def compare(network: Network, params: EnergyParams, batches: Sequence[Sequence[RequestSet]],
            strategies: Sequence[str] = STRATEGY_ORDER, ensemble: AgentEnsemble | None = None,
            horizon_s: float = 150.0, seed: int = 0, workers: int = 1) -> Comparison:
    """Run every strategy on every batch. Infeasible runs are kept and flagged."""
    unknown = set(strategies) - set(STRATEGY_ORDER)
    if unknown:
        raise ValueError(f"unknown strategies {sorted(unknown)}; choose from {STRATEGY_ORDER}")
    strategies = tuple(s for s in STRATEGY_ORDER if s in set(strategies))
    if "DRL" in strategies:
        if ensemble is None:
            raise MissingCheckpointError("the DRL strategy needs a trained checkpoint")
        ensemble.check_network(network)
    jobs = [(network, params, list(b), strategies, seed, i, ensemble)
            for i, b in enumerate(batches)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_batch_job, jobs))
    else:
        parts = [_batch_job(j) for j in jobs]
    rank = {s: i for i, s in enumerate(strategies)}
    outcomes = sorted((o for part in parts for o in part), key=lambda o: (rank[o.strategy], o.batch))
    reference = "DRL" if "DRL" in strategies else "ORACLE" if "ORACLE" in strategies else None
    return Comparison(strategies, float(horizon_s), outcomes, reference)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == 0:
        return "0"
    return repr(round(x, 9))


COMPARE_HEADER = ("kind", "strategy", "batch", "served", "n_awake", "activation_kj",
                  "switching_kj", "idle_kw", "total_kj_t0", "total_kj_horizon", "saving_pct",
                  "crossover_s", "note")


def comparison_rows(cmp: Comparison) -> list[tuple]:
    rows = []
    for o in cmp.outcomes:
        rep = o.report
        cross = cmp.crossover_s(o.batch) if o.strategy == "ASM" else None
        rows.append(("batch", o.strategy, o.batch, o.served,
                     len(o.deployment.activations) if o.deployment is not None else None,
                     rep and rep.activation_kj, rep and rep.switching_kj, rep and rep.idle_power_kw,
                     rep and rep.total_kj(0.0), rep and rep.total_kj(cmp.horizon_s),
                     cmp.saving_pct(o.strategy, o.batch), cross, o.note))
    both = [b for b in range(cmp.n_batches)
            if all(cmp.get(s, b).served for s in cmp.strategies)]
    for s in cmp.strategies:
        mine = [cmp.get(s, b) for b in both]
        savings = [cmp.saving_pct(s, b) for b in both]
        savings = [v for v in savings if v is not None]
        cross = [cmp.crossover_s(b) for b in both] if s == "ASM" else []
        cross = [c for c in cross if c is not None]
        served = sum(cmp.get(s, b).served for b in range(cmp.n_batches))
        rows.append(("summary", s, "mean", f"{served}/{cmp.n_batches}", None,
                     np.mean([o.report.activation_kj for o in mine]) if mine else None,
                     np.mean([o.report.switching_kj for o in mine]) if mine else None,
                     np.mean([o.report.idle_power_kw for o in mine]) if mine else None,
                     np.mean([o.report.total_kj(0.0) for o in mine]) if mine else None,
                     np.mean([o.report.total_kj(cmp.horizon_s) for o in mine]) if mine else None,
                     np.mean(savings) if savings else None,
                     np.mean(cross) if cross else None,
                     f"over {len(both)} batches served by every strategy"))
    return rows


def curve_rows(cmp: Comparison, network: Network, params: EnergyParams,
               step_s: float = 10.0) -> tuple[tuple[str, ...], list[tuple]]:
    """Mean total energy per strategy against idle time, over batches served by all."""
    both = [b for b in range(cmp.n_batches)
            if all(cmp.get(s, b).served for s in cmp.strategies)]
    header = ("t_s",) + cmp.strategies
    if not both:
        return header, []
    curves = [energy_vs_idle({s: cmp.get(s, b).deployment for s in cmp.strategies}, network,
                             params, cmp.horizon_s, step_s, check=False) for b in both]
    times = curves[0][cmp.strategies[0]].times
    rows = [(t,) + tuple(np.mean([c[s].totals[i] for c in curves]) for s in cmp.strategies)
            for i, t in enumerate(times)]
    return header, rows


def deployments_doc(cmp: Comparison, batches: Sequence[Sequence[RequestSet]]) -> dict:
    return {"horizon_s": cmp.horizon_s,
            "batches": [[r.to_dict() for r in b] for b in batches],
            "results": [{"strategy": o.strategy, "batch": o.batch,
                         "deployment": deployment_to_dict(o.deployment)}
                        for o in cmp.outcomes if o.deployment is not None]}


# -- oracle sweep ---------------------------------------------------------------------

SWEEP_HEADER = ("kind", "mask", "served", "objective_kj", "reward")


def sweep_rows(rows: Sequence[SweepRow], network: Network,
               requests: Sequence[RequestSet], params: EnergyParams) -> tuple[list[tuple], bool]:
    out = [("subset", " ".join(map(str, r.mask)), r.served, r.objective_kj, r.reward)
           for r in rows]
    try:
        dep, kj = best_rfdh_activation(network, requests, params, rows=rows)
    except InfeasibleError:
        out.append(("best", "", False, None, None))
        return out, False
    best = next(r for r in rows if r.served and set(r.mask) | network.pre_activated
                == set(dep.activations) and abs(r.objective_kj - kj) < 1e-9)
    out.append(("best", " ".join(map(str, best.mask)), True, kj, best.reward))
    return out, True


# -- training presets -----------------------------------------------------------------

def train_preset(name: str) -> TrainConfig:
    """Default training configuration for a bundled sample."""
    if name == "sample8":
        return TrainConfig(episodes=1000, groups=((1, 2, 3, 4), (5, 6, 7, 8)))
    if name == "sample14":
        return TrainConfig(episodes=1000, groups=((1, 2, 9, 10, 11), (4, 5, 6, 7, 13),
                                                  (3, 8, 12, 14)))
    raise ValueError(f"no training preset for {name!r}")


def history_rows(history) -> list[tuple]:
    return [(r.episode, r.step, r.reward) for r in history]


# -- files ------------------------------------------------------------------------------

def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def config_echo_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".config.json")


def write_config_echo(path, command: str, settings: dict) -> Path:
    """``<result>.config.json`` beside a result file."""
    doc = {"command": command, "version": __version__, "settings": settings}
    return atomic_write_text(config_echo_path(path),
                             json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")

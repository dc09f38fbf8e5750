"""Experiment plans: cells of (instance, mechanism, fairness mode, seed), run in parallel."""

from __future__ import annotations

import csv
import hashlib
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..clearing import Mechanism
from ..learning import TrainConfig, nashconv, train
from ..learning.train import evaluate
from ..sim import Fairness
from .instances import InstanceSpec, generate_instance

FAIRNESS_MODES = {"free": (Fairness.FREE_MARKET, 1), "rights-k1": (Fairness.RIGHTS, 1),
                  "rights-k2": (Fairness.RIGHTS, 2)}


@dataclass(frozen=True)
class Cell:
    mechanism: Mechanism
    fairness: str
    seed: int
    episodes: int
    instance: InstanceSpec = InstanceSpec()
    nashconv_at: tuple[int, ...] = ()  # episode counts after which NashConv is measured

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        if self.fairness not in FAIRNESS_MODES:
            raise ValueError(f"unknown fairness mode {self.fairness!r}")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        if any(not 0 <= e <= self.episodes for e in self.nashconv_at):
            raise ValueError("NashConv checkpoints must lie within the training run")

    @property
    def group(self) -> tuple[str, str, int]:
        return (self.mechanism.value, self.fairness, self.instance.num_buyers)

    @property
    def key(self) -> str:
        i = self.instance
        return f"{self.mechanism.value}/{self.fairness}/{i.num_buyers}x{i.num_sellers}/seed{self.seed}"

    def seed_sequence(self, master_seed: int) -> np.random.SeedSequence:
        """Depends only on the master seed and this cell, not on its position in a plan."""
        digest = int.from_bytes(hashlib.sha256(self.key.encode()).digest()[:8], "little")
        return np.random.SeedSequence([master_seed, digest])

    def instance_seed_sequence(self, master_seed: int) -> np.random.SeedSequence:
        """Shared by all mechanisms and fairness modes with the same seed and size."""
        i = self.instance
        key = f"instance/{i.num_buyers}x{i.num_sellers}/{int(i.fixed_roles)}/seed{self.seed}"
        digest = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
        return np.random.SeedSequence([master_seed, digest])


@dataclass
class ExperimentPlan:
    cells: list[Cell]
    train: TrainConfig = field(default_factory=TrainConfig)
    master_seed: int = 0
    eval_episodes: int = 1


@dataclass
class CellResult:
    cell: Cell
    poa: list[float] = field(default_factory=list)
    ask_price: list[float] = field(default_factory=list)
    frustration: list[float] = field(default_factory=list)  # per buyer, mean-action evaluation
    eval_poa: float = float("nan")
    nashconv: dict[int, float] = field(default_factory=dict)
    seconds: float = 0.0
    error: str | None = None

    def tail_poa(self, fraction: float = 0.1) -> float:
        """Mean training PoA over the last ``fraction`` of episodes."""
        n = max(1, int(round(len(self.poa) * fraction)))
        return float(np.mean(self.poa[-n:])) if self.poa else float("nan")


def run_cell(cell: Cell, cfg: TrainConfig, master_seed: int = 0, eval_episodes: int = 1) -> CellResult:
    result = CellResult(cell)
    start = time.perf_counter()
    try:
        fairness, k = FAIRNESS_MODES[cell.fairness]
        crisis = generate_instance(cell.instance,
                                   np.random.default_rng(cell.instance_seed_sequence(master_seed)),
                                   cell.mechanism, fairness, k)
        learn_ss, eval_ss, nc_ss = cell.seed_sequence(master_seed).spawn(3)
        rng = np.random.default_rng(learn_ss)
        nc_rng = np.random.default_rng(nc_ss)
        policies = None
        done = 0
        for stop in sorted(set(cell.nashconv_at) | {cell.episodes}):
            out = train(crisis, cfg, rng, policies, stop - done)
            policies, done = out.policies, stop
            result.poa += [m.poa for m in out.metrics]
            result.ask_price += [m.mean_ask_price for m in out.metrics]
            if stop in cell.nashconv_at:
                result.nashconv[stop] = nashconv(policies, crisis, cfg, nc_rng,
                                                 eval_episodes=eval_episodes).value
        eval_seed = int(eval_ss.generate_state(1)[0])
        traces = evaluate(policies, crisis, eval_episodes, eval_seed)
        result.eval_poa = float(np.mean([t.poa for t in traces]))
        per_market = [[o.frustrations.per_buyer for o in t.outcomes] for t in traces]
        result.frustration = list(np.mean(np.array(per_market), axis=(0, 1)))
    except Exception:  # recorded per cell so the sweep can continue
        result.error = traceback.format_exc(limit=3).strip().splitlines()[-1]
    result.seconds = time.perf_counter() - start
    return result


def _run(args):
    return run_cell(*args)


def run_plan(plan: ExperimentPlan, workers: int = 1) -> list[CellResult]:
    """All cells, sorted by cell key whatever order they finish in."""
    jobs = [(c, plan.train, plan.master_seed, plan.eval_episodes) for c in plan.cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, jobs))
    else:
        results = [_run(j) for j in jobs]
    return sorted(results, key=lambda r: r.cell.key)


def _fmt(x: float) -> str:
    return repr(round(float(x), 12))


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return float("nan"), float("nan")
    se = float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(np.mean(v)), se


def _groups(results: list[CellResult]) -> dict[tuple, list[CellResult]]:
    out: dict[tuple, list[CellResult]] = {}
    for r in results:
        if r.error is None:
            out.setdefault(r.cell.group, []).append(r)
    return dict(sorted(out.items()))


GROUP_COLUMNS = ("mechanism", "fairness", "num_buyers")
CSV_COLUMNS = {
    "poa.csv": GROUP_COLUMNS + ("episode", "mean", "stderr", "n"),
    "prices.csv": GROUP_COLUMNS + ("episode", "mean", "stderr", "n"),
    "frustration.csv": GROUP_COLUMNS + ("buyer", "mean", "stderr", "n"),
    "nashconv.csv": GROUP_COLUMNS + ("episode", "mean", "stderr", "n"),
    "cells.csv": ("cell", "mechanism", "fairness", "num_buyers", "seed", "episodes",
                  "final_poa", "eval_poa", "final_ask_price"),
    "failures.csv": ("cell", "error"),
    "timing.csv": ("cell", "num_buyers", "num_sellers", "episodes", "seconds"),
}


def _curve_rows(group, cells, series):
    n_ep = min(len(getattr(r, series)) for r in cells)
    for ep in range(n_ep):
        m, se = _mean_se([getattr(r, series)[ep] for r in cells])
        yield [*group, ep, _fmt(m), _fmt(se), len(cells)]


def write_results(results: list[CellResult], out_dir: str | Path, timing: bool = False) -> list[Path]:
    """Write the aggregate CSVs; ``timing.csv`` only on request since wall-clock is not reproducible."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = _groups(results)
    rows: dict[str, list] = {name: [] for name in CSV_COLUMNS}
    for group, cells in groups.items():
        rows["poa.csv"] += _curve_rows(group, cells, "poa")
        rows["prices.csv"] += _curve_rows(group, cells, "ask_price")
        for b in range(len(cells[0].frustration)):
            m, se = _mean_se([r.frustration[b] for r in cells])
            rows["frustration.csv"].append([*group, b, _fmt(m), _fmt(se), len(cells)])
        for ep in sorted(set.intersection(*(set(r.nashconv) for r in cells))):
            m, se = _mean_se([r.nashconv[ep] for r in cells])
            rows["nashconv.csv"].append([*group, ep, _fmt(m), _fmt(se), len(cells)])
    for r in results:
        c = r.cell
        if r.error is not None:
            rows["failures.csv"].append([c.key, r.error])
            continue
        price = r.ask_price[-1] if r.ask_price else float("nan")
        rows["cells.csv"].append([c.key, c.mechanism.value, c.fairness, c.instance.num_buyers,
                                  c.seed, c.episodes, _fmt(r.tail_poa()), _fmt(r.eval_poa),
                                  _fmt(price)])
        rows["timing.csv"].append([c.key, c.instance.num_buyers, c.instance.num_sellers,
                                   c.episodes, f"{r.seconds:.3f}"])
    written = []
    for name, header in CSV_COLUMNS.items():
        if name == "timing.csv" and not timing:
            continue
        path = out_dir / name
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows[name])
        written.append(path)
    return written


def run_experiment(plan: ExperimentPlan, out_dir: str | Path, workers: int = 1,
                   timing: bool = False) -> list[CellResult]:
    results = run_plan(plan, workers)
    write_results(results, out_dir, timing)
    return results


def grid(mechanisms, fairness_modes, seeds, episodes: int, instance: InstanceSpec = InstanceSpec(),
         nashconv_at: tuple[int, ...] = ()) -> list[Cell]:
    return [Cell(Mechanism(m), f, s, episodes, instance, nashconv_at)
            for m in mechanisms for f in fairness_modes for s in seeds]


def scaling_cells(sizes, mechanism, seeds, episodes: int, fairness: str = "rights-k1") -> list[Cell]:
    """Cells for the trader-count study: |B| = |S| = N and probabilistic rich/poor roles."""
    return [Cell(Mechanism(mechanism), fairness, s, episodes,
                 replace(InstanceSpec(), num_buyers=n, num_sellers=n, fixed_roles=False))
            for n in sizes for s in seeds]

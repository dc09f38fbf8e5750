"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed again in the terminal summary.
Criteria 7 and 8 share one training plan (see ``trend_results``).
"""

import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from critmarket.clearing import (LedgerViolation, Mechanism, check_ledger, clear, clear_greedy,
                                 clear_lp_average, clear_maxflow_absolute, clear_random, settle)
from critmarket.core import OfferBook, Resource, cgd_allocate
from critmarket.harness import Cell, ExperimentPlan, InstanceSpec, run_oracle_suite, run_plan
from critmarket.harness.experiment import scaling_cells
from critmarket.learning import TrainConfig
from critmarket.sim import run_market, transition
from helpers import ACCEPTANCE, random_market
from test_learning import ARCHITECTURES, FD_TOL
from test_sim import EXAMPLE, example_config

# desk-scale learner for the learning criteria: smaller batches, 10 updates per episode
DESK = TrainConfig(batch_size=256, gradient_steps=10, nashconv_episodes=30)
SEEDS = (0, 1, 2)
EPISODES = 300


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_criterion_01_contested_garment():
    start = time.perf_counter()
    golden = cgd_allocate(2, (1, 3))
    ok = bool(np.allclose(golden, [0.5, 1.5], rtol=0, atol=1e-9))
    rng = np.random.default_rng(1)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        d = rng.uniform(0, 5, n) * (rng.random(n) > 0.15)
        v = float(rng.uniform(0, d.sum()))
        r = cgd_allocate(v, d)
        perm = rng.permutation(n)
        bad += not (abs(r.sum() - v) <= 1e-9 * max(1.0, v)  # whole offered volume allocated
                    and np.all(r[d == 0] == 0)  # no claim, no Rights
                    and np.allclose(cgd_allocate(v, d[perm]), r[perm], atol=1e-9)  # anonymous
                    and np.all(r >= 0) and np.all(r <= d + 1e-12))  # claim-bounded
    seconds = time.perf_counter() - start
    record(1, ok and bad == 0 and seconds < 5,
           f"golden={golden.tolist()} violations={bad}/1000 time={seconds:.2f}s")


def test_criterion_02_worked_example():
    details, ok = [], True
    reallocations = {}
    for mech in Mechanism:
        cfg = example_config(mech)
        state = cfg.initial_state()
        out = run_market(state, EXAMPLE.seller_offers(state, cfg), EXAMPLE, cfg,
                         np.random.default_rng(0), terminal=False)
        end = out.end_state
        nxt = transition(out, cfg)
        reallocations[mech] = np.concatenate([end.buyer_good, end.buyer_total_money, end.seller_money])
        if mech is Mechanism.GREEDY:
            checks = [(end.buyer_good, [1, 1]), (end.buyer_total_money, [0.5, 0.5]),
                      (end.seller_money, [2]), (out.buyer_utilities, [1, 1]),
                      (nxt.buyer_money, [2.5, 1.5])]
            ok &= all(np.allclose(a, b, rtol=0, atol=1e-9) for a, b in checks)
            details.append(f"greedy good={end.buyer_good.tolist()} money={end.buyer_total_money.tolist()} "
                           f"revenue={end.seller_money.tolist()} utility={out.buyer_utilities.tolist()} "
                           f"next money={nxt.buyer_money.tolist()}")
    for mech in (Mechanism.MAXFLOW, Mechanism.LP_AVERAGE):
        same = np.allclose(reallocations[mech], reallocations[Mechanism.GREEDY], rtol=0, atol=1e-9)
        ok &= bool(same)
        details.append(f"{mech.value} same={same}")
    record(2, ok, "; ".join(details))


def test_criterion_03_clearing_oracle():
    start = time.perf_counter()
    report = run_oracle_suite(np.random.default_rng(3), cases=200)
    seconds = time.perf_counter() - start
    record(3, report.passed and report.cases == 200 and seconds < 60,
           f"cases={report.cases} mismatches={len(report.mismatches)} "
           f"non-integral={len(report.non_integral)} illegal={len(report.illegal)} time={seconds:.1f}s")


def test_criterion_04_dominance():
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(100):
        state, book = random_market(rng)
        lp = clear_lp_average(state, book).good_volume()
        mf = clear_maxflow_absolute(state, book).good_volume()
        greedy = clear_greedy(state, book).good_volume()
        rand = [clear_random(state, book, np.random.default_rng(s)).good_volume() for s in range(5)]
        violations += lp < mf - 1e-7
        violations += mf < greedy - 1e-9
        violations += sum(mf < r - 1e-9 for r in rand)
    record(4, violations == 0, f"instances=100 violations={violations}")


def _mutations(rng, state, book, ledger):
    """(mutated state, mutated book, expected condition) around one random Good trade."""
    goods = [t for t in ledger if t.resource is Resource.GOOD]
    t = goods[int(rng.integers(len(goods)))]
    s, b = t.seller.index, t.buyer.index
    sold = sum(x.volume for x in goods if x.seller.index == s)
    bought = sum(x.volume for x in goods if x.buyer.index == b)
    spent = sum(x.value for x in ledger if x.buyer.index == b)
    offers = list(book.seller_offers)
    offers[s] = replace(offers[s], volume=sold / 2)
    actions = list(book.buyer_actions)
    actions[b] = replace(actions[b], good_bid_volume=bought / 2)
    money = state.buyer_money.copy()
    money[b] = spent / 2
    return [(state, OfferBook(offers, book.buyer_actions), 1),
            (state, OfferBook(book.seller_offers, actions), 2),
            (state.copy(buyer_money=money), book, "budget")]


def test_criterion_05_legality_and_conservation():
    rng = np.random.default_rng(5)
    cycles = failures = 0
    mutated = wrong = 0
    mechanisms = list(Mechanism)
    instances = 0
    while cycles < 10_000:
        state, book = random_market(rng)
        instances += 1
        for mech in mechanisms:
            ledger = clear(mech, state, book, rng)
            try:
                check_ledger(ledger, book, state, average=mech.average)
                end = settle(ledger, state, book, average=mech.average)
                failures += not (abs(end.total_good() - state.total_good()) <= 1e-9
                                 and abs(end.total_money() - state.total_money()) <= 1e-9)
            except LedgerViolation:
                failures += 1
            cycles += 1
            if mech is Mechanism.MAXFLOW and instances % 5 == 0 and ledger.good_volume() > 1e-6:
                for bad_state, bad_book, expected in _mutations(rng, state, book, ledger):
                    mutated += 1
                    try:
                        settle(ledger, bad_state, bad_book)
                        wrong += 1
                    except LedgerViolation as e:
                        wrong += e.condition != expected
    record(5, failures == 0 and wrong == 0 and mutated >= 300,
           f"cycles={cycles} failures={failures} mutations={mutated} misclassified={wrong}")


def test_criterion_06_gradients():
    worst = {}
    for name, check in ARCHITECTURES.items():
        rng = np.random.default_rng(600 + len(name))
        worst[name] = max(check(rng) for _ in range(100))
    record(6, all(w < FD_TOL for w in worst.values()),
           " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


@pytest.fixture(scope="module")
def trend_results():
    """Greedy, 4+4 traders, three fairness modes x three seeds, 300 episodes.

    The Rights k=1 cells also measure NashConv before training and at the end.
    """
    cells = []
    for seed in SEEDS:
        for mode in ("free", "rights-k1", "rights-k2"):
            at = (0, EPISODES) if mode == "rights-k1" else ()
            cells.append(Cell(Mechanism.GREEDY, mode, seed, EPISODES, InstanceSpec(), at))
    start = time.perf_counter()
    results = run_plan(ExperimentPlan(cells, DESK, master_seed=0, eval_episodes=3))
    return results, time.perf_counter() - start


def _by_seed(results):
    out = {}
    for r in results:
        assert r.error is None, r.error
        out.setdefault(r.cell.seed, {})[r.cell.fairness] = r
    return out


@pytest.mark.slow
def test_criterion_07_poa_trend(trend_results):
    results, seconds = trend_results
    wins, parts = 0, []
    for seed, modes in sorted(_by_seed(results).items()):
        free, k1, k2 = (modes[m].tail_poa() for m in ("free", "rights-k1", "rights-k2"))
        win = free > k1 and k1 >= k2 - 0.05
        wins += win
        parts.append(f"seed{seed}: free={free:.3f} k1={k1:.3f} k2={k2:.3f} {'ok' if win else 'no'}")
    train_seconds = sum(r.seconds for r in results)
    record(7, wins >= 2 and train_seconds <= 30 * 60,
           f"{wins}/3 seed groups; " + "; ".join(parts) + f"; plan time={seconds / 60:.1f} min")


@pytest.mark.slow
def test_criterion_08_nashconv_decreases(trend_results):
    results, _ = trend_results
    wins, parts = 0, []
    for seed, modes in sorted(_by_seed(results).items()):
        nc = modes["rights-k1"].nashconv
        wins += nc[EPISODES] < nc[0]
        parts.append(f"seed{seed}: initial={nc[0]:.3f} trained={nc[EPISODES]:.3f}")
    record(8, wins >= 2, f"{wins}/3 seeds lower; " + "; ".join(parts))


@pytest.mark.slow
def test_criterion_09_scaling():
    sizes = (2, 4, 8)
    cells = scaling_cells(sizes, Mechanism.GREEDY, seeds=[0], episodes=40)
    results = run_plan(ExperimentPlan(cells, DESK))
    assert all(r.error is None for r in results), [r.error for r in results]
    seconds = {r.cell.instance.num_buyers: r.seconds for r in results}
    t = np.array([seconds[n] for n in sizes])
    slope = float(np.polyfit(np.log(sizes), np.log(t), 1)[0])
    ratio = t[-1] / t[0]
    record(9, slope < 2 and ratio < (sizes[-1] / sizes[0]) ** 2 and max(c.episodes for c in cells) <= 100,
           " ".join(f"N={n}:{s:.1f}s" for n, s in zip(sizes, t)) + f" log-log slope={slope:.2f}")


TINY_CONFIG = """\
instance: {num_buyers: 3, num_sellers: 2, horizon: 4, c1: -0.25}
train: {critic_hidden: 16, actor_hidden: 8, batch_size: 32, gradient_steps: 2, min_buffer: 16,
        nashconv_episodes: 2}
plan: {mechanisms: [greedy, random], fairness: [free, rights-k2], seeds: [0, 1], episodes: 3,
       nashconv_at: [3]}
"""


def test_criterion_10_cli_determinism(tmp_path):
    config = tmp_path / "tiny.yaml"
    config.write_text(TINY_CONFIG)
    commands = {
        "simulate": ["--mechanism", "random"],
        "train": ["--episodes", "3", "--fairness", "rights", "--k", "2"],
        "sweep": ["--workers", "2"],
        "oracle": ["--cases", "20"],
    }
    compared, differing = 0, []
    for name, extra in commands.items():
        dirs = [tmp_path / f"{name}{i}" for i in range(2)]
        for d in dirs:
            subprocess.run([sys.executable, "-m", "critmarket", name, "--config", str(config),
                            "--seed", "11", "--out-dir", str(d), *extra], check=True)
        for path in sorted(dirs[0].glob("*.csv")):
            compared += 1
            if path.read_bytes() != (dirs[1] / path.name).read_bytes():
                differing.append(f"{name}/{path.name}")
    # nashconv on the checkpoint written by train
    ckpt = tmp_path / "train0" / "policies.npz"
    outs = [tmp_path / f"nc{i}" for i in range(2)]
    for d in outs:
        subprocess.run([sys.executable, "-m", "critmarket", "nashconv", "--config", str(config),
                        "--seed", "11", "--episodes", "2", "--checkpoint", str(ckpt),
                        "--out-dir", str(d)], check=True)
    compared += 1
    if (outs[0] / "nashconv.csv").read_bytes() != (outs[1] / "nashconv.csv").read_bytes():
        differing.append("nashconv/nashconv.csv")
    record(10, compared >= 10 and not differing,
           f"{compared} CSV files compared, differing={differing or 'none'}")

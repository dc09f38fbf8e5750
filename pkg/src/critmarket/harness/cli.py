"""Command-line entry point.

Every subcommand writes CSV files into ``--out-dir``.  On failure a single
JSON line ``{"error": ..., "kind": ...}`` is printed to stderr and the exit
code is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ..clearing import ClearingLP, ClearingNetwork, Mechanism, budget_scale, build_graphs, max_flow
from ..learning import (PolicySet, load_policies, nashconv, save_policies, train, write_curve_csv)
from ..learning.train import evaluate
from ..sim import Fairness, write_trace_csv
from .config import Config, ConfigError, load_config
from .experiment import FAIRNESS_MODES, run_experiment
from .instances import generate_instance
from .oracle import run_oracle_suite


def _fairness_mode(args) -> str:
    if args.fairness == "free":
        return "free"
    return f"rights-k{args.k or 1}"


def _crisis(cfg: Config, args, seed: int):
    free = args.fairness == "free"
    fairness = Fairness.FREE_MARKET if free else Fairness.RIGHTS
    k = 1 if free else (args.k or 1)
    rng = np.random.default_rng([seed, 0])
    return generate_instance(cfg.instance, rng, Mechanism(args.mechanism or "greedy"), fairness, k)


def _train_cfg(cfg: Config, args):
    if args.episodes is None:
        return cfg.train
    return dataclasses.replace(cfg.train, episodes=args.episodes)


def cmd_simulate(cfg: Config, args, out: Path) -> None:
    crisis = _crisis(cfg, args, args.seed)
    if args.checkpoint:
        policies = load_policies(args.checkpoint, cfg.train)
    else:
        policies = PolicySet(crisis.num_buyers, crisis.num_sellers, cfg.train,
                             np.random.default_rng([args.seed, 1]))
    traces = evaluate(policies, crisis, args.episodes or 1, args.seed)
    with open(out / "trace.csv", "w", newline="") as f:
        write_trace_csv(traces, f)
    if args.dump_dir:
        _dump(traces[0], crisis, Path(args.dump_dir))


def _dump(trace, crisis, dump: Path) -> None:
    """Flow network (DOT) and clearing LP (CSV) of every Market's first round."""
    dump.mkdir(parents=True, exist_ok=True)
    for outcome in trace.outcomes:
        book, _ = outcome.rounds[0]
        state = outcome.start_state.copy(buyer_rights=outcome.rights)
        if crisis.fairness is Fairness.FREE_MARKET:
            state = state.copy(buyer_rights=np.full(state.num_buyers, float(sum(outcome.rights))))
        scaled = budget_scale(book, state.buyer_money)
        cn = ClearingNetwork(state, scaled, build_graphs(scaled))
        (dump / f"market{outcome.market_index:02d}_flow.dot").write_text(
            cn.network.to_dot(max_flow(cn.network)))
        lp = ClearingLP(state, book, build_graphs(book, average=True))
        (dump / f"market{outcome.market_index:02d}_lp.csv").write_text(lp.lp.to_csv())


def cmd_train(cfg: Config, args, out: Path) -> None:
    crisis = _crisis(cfg, args, args.seed)
    tcfg = _train_cfg(cfg, args)
    result = train(crisis, tcfg, np.random.default_rng([args.seed, 1]))
    with open(out / "curve.csv", "w", newline="") as f:
        write_curve_csv(result.metrics, f)
    save_policies(result.policies, out / "policies.npz")


def cmd_sweep(cfg: Config, args, out: Path) -> None:
    if args.mechanism:
        cfg.plan["mechanisms"] = [args.mechanism]
    if args.fairness:
        cfg.plan["fairness"] = [_fairness_mode(args)]
    if args.episodes is not None:
        cfg.plan["episodes"] = args.episodes
    run_experiment(cfg.experiment_plan(args.seed), out, args.workers, args.timing)


def cmd_nashconv(cfg: Config, args, out: Path) -> None:
    crisis = _crisis(cfg, args, args.seed)
    tcfg = cfg.train
    if args.checkpoint:
        policies = load_policies(args.checkpoint, tcfg)
    else:
        policies = PolicySet(crisis.num_buyers, crisis.num_sellers, tcfg,
                             np.random.default_rng([args.seed, 1]))
    if (policies.num_buyers, policies.num_sellers) != (crisis.num_buyers, crisis.num_sellers):
        raise ConfigError("checkpoint trader counts do not match the configured instance")
    res = nashconv(policies, crisis, tcfg, np.random.default_rng([args.seed, 2]), args.episodes)
    with open(out / "nashconv.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("trader", "base_return", "gain"))
        for name, gain in res.gains.items():
            w.writerow((name, repr(round(res.base_returns[name], 12)), repr(round(gain, 12))))
        w.writerow(("total", "", repr(round(res.value, 12))))


def cmd_oracle(cfg: Config, args, out: Path) -> None:
    report = run_oracle_suite(np.random.default_rng(args.seed), args.cases)
    with open(out / "oracle.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("cases", "mismatches", "non_integral", "illegal", "passed"))
        w.writerow((report.cases, len(report.mismatches), len(report.non_integral),
                    len(report.illegal), int(report.passed)))
    if not report.passed:
        raise RuntimeError(f"clearing oracle failed: {report.mismatches[:3]}")


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "sweep": cmd_sweep,
            "nashconv": cmd_nashconv, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critmarket", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML file with instance/train/plan sections")
        s.add_argument("--seed", type=int, default=0, help="master seed")
        s.add_argument("--out-dir", default=".", help="directory for CSV outputs")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--episodes", type=int)
        s.add_argument("--mechanism", choices=[m.value for m in Mechanism])
        s.add_argument("--fairness", choices=[f.value for f in Fairness])
        s.add_argument("--k", type=int, help="buyers' stage repeats (rights mode)")
        s.add_argument("--checkpoint", help="policies.npz written by `train`")
        s.add_argument("--dump-dir", help="write flow networks and LPs for debugging")
        s.add_argument("--timing", action="store_true", help="also write timing.csv")
        s.add_argument("--cases", type=int, default=200, help="oracle cases")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.k is not None and args.k not in (1, 2) and args.command == "sweep":
            raise ConfigError("sweeps support k in {1, 2}")
        if args.k is not None and args.k < 1:
            raise ConfigError("k must be at least 1")
        cfg = load_config(args.config)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args, out)
    except Exception as e:  # one machine-readable line, then a nonzero exit
        kind = "config" if isinstance(e, ConfigError) else type(e).__name__
        print(json.dumps({"error": str(e), "kind": kind}), file=sys.stderr)
        return 2 if kind == "config" else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

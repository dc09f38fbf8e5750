"""The Market game loop and the Crisis: a finite sequence of Markets."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence, TextIO

import numpy as np

from .clearing import Mechanism, clear, settle
from .core import (BuyerAction, FrustrationRecord, MarketState, OfferBook, Role, SellerOffer,
                   TradeLedger, cgd_allocate, frustration, price_of_anarchy)


class Fairness(enum.Enum):
    FREE_MARKET = "free"
    RIGHTS = "rights"


@dataclass
class CrisisConfig:
    demands: np.ndarray
    buyer_earnings: np.ndarray
    seller_supply: np.ndarray
    horizon: int = 10
    k: int = 1
    mechanism: Mechanism = Mechanism.GREEDY
    fairness: Fairness = Fairness.RIGHTS
    price_cap: float = 1.0
    c1: float = -1 / 8
    c2: float = 1 / 2
    c3: float = 1.0
    gamma: float = 0.99

    def __post_init__(self):
        self.demands = np.asarray(self.demands, dtype=float).reshape(-1)
        self.buyer_earnings = np.asarray(self.buyer_earnings, dtype=float).reshape(-1)
        self.seller_supply = np.asarray(self.seller_supply, dtype=float).reshape(-1)
        self.mechanism = Mechanism(self.mechanism)
        self.fairness = Fairness(self.fairness)
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if len(self.buyer_earnings) != len(self.demands):
            raise ValueError("one earning per buyer required")
        if len(self.demands) < 1 or len(self.seller_supply) < 1:
            raise ValueError("need at least one buyer and one seller")
        for name in ("demands", "buyer_earnings", "seller_supply"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} must be non-negative")
        if self.price_cap <= 0:
            raise ValueError("price cap must be positive")
        if self.c1 > 0:
            raise ValueError("storage constant c1 must be non-positive")
        if abs(self.c1) * self.horizon / 2 < self.c2:
            raise ValueError("|c1| * T / 2 < c2: sellers would profit from hoarding")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")

    @property
    def num_buyers(self) -> int:
        return len(self.demands)

    @property
    def num_sellers(self) -> int:
        return len(self.seller_supply)

    def initial_state(self) -> MarketState:
        nb, ns = self.num_buyers, self.num_sellers
        return MarketState(buyer_money=self.buyer_earnings.copy(), buyer_good=np.zeros(nb),
                           buyer_rights=np.zeros(nb), demands=self.demands.copy(),
                           seller_money=np.zeros(ns), seller_good=self.seller_supply.copy())


class Strategy(Protocol):
    """A profile of trader strategies as seen by the simulator.

    ``offer_rights`` returns one ``(volume, price)`` Right offer per buyer and
    ``bid`` one ``(right_volume, right_price, good_volume, good_price)`` bid per
    buyer.  Both are called once per buyers' stage round.
    """

    def seller_offers(self, state: MarketState, config: CrisisConfig) -> Sequence[SellerOffer]: ...

    def offer_rights(self, state: MarketState, offers: Sequence[SellerOffer],
                     config: CrisisConfig, round_index: int) -> Sequence[tuple[float, float]]: ...

    def bid(self, state: MarketState, offers: Sequence[SellerOffer],
            right_offers: Sequence[tuple[float, float]], config: CrisisConfig,
            round_index: int) -> Sequence[tuple[float, float, float, float]]: ...


@dataclass
class MarketOutcome:
    market_index: int
    terminal: bool
    start_state: MarketState
    end_state: MarketState
    seller_offers: list[SellerOffer]
    rights: np.ndarray
    rounds: list[tuple[OfferBook, TradeLedger]]
    ledger: TradeLedger
    buyer_utilities: np.ndarray
    seller_utilities: np.ndarray
    frustrations: FrustrationRecord
    cleared_volume: float

    @property
    def goods_bought(self) -> np.ndarray:
        return self.ledger.goods_bought(len(self.rights))


@dataclass
class CrisisTrace:
    outcomes: list[MarketOutcome]
    poa: float
    buyer_returns: np.ndarray
    seller_returns: np.ndarray
    buyer_totals: np.ndarray
    seller_totals: np.ndarray

    def poa_curve(self) -> list[float]:
        nb = len(self.buyer_returns)
        recs = [o.frustrations for o in self.outcomes]
        return [price_of_anarchy(recs[:i], nb) for i in range(1, len(recs) + 1)]


def legal_seller_offers(offers: Sequence[SellerOffer], state: MarketState,
                        price_cap: float) -> list[SellerOffer]:
    if len(offers) != state.num_sellers:
        raise ValueError("one offer per seller required")
    return [SellerOffer(float(np.clip(o.volume, 0.0, state.seller_good[s])),
                        float(np.clip(o.price, 0.0, price_cap)))
            for s, o in enumerate(offers)]


def seller_observation(state: MarketState, s: int) -> np.ndarray:
    """``(buyer money..., buyer good..., own good)``."""
    if not 0 <= s < state.num_sellers:
        raise IndexError(f"no seller {s}")
    return np.concatenate([state.buyer_money, state.buyer_good, [state.seller_good[s]]])


def buyer_observation(state: MarketState, b: int, offers: Sequence[SellerOffer],
                      right_offers: Sequence[tuple[float, float]] | None = None,
                      fairness: Fairness = Fairness.RIGHTS) -> np.ndarray:
    """Stage-1: ``(offer volumes..., offer prices..., money, good, rights)``.

    Stage-2 (``right_offers`` given) appends ``(volume, price)`` of every other
    buyer's Right offer in buyer order.  Rights read 0 in a free market.
    """
    if not 0 <= b < state.num_buyers:
        raise IndexError(f"no buyer {b}")
    rights = state.buyer_rights[b] if fairness is Fairness.RIGHTS else 0.0
    parts = [[o.volume for o in offers], [o.price for o in offers],
             [state.buyer_money[b], state.buyer_good[b], rights]]
    if right_offers is not None:
        parts.append([v for x, ro in enumerate(right_offers) if x != b for v in ro])
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def utilities(start: MarketState, end: MarketState, terminal: bool,
              config: CrisisConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-market utilities ``(buyers, sellers)`` after settlement."""
    seller_u = (end.seller_money - start.seller_money) + config.c1 * end.seller_good
    buyer_u = np.minimum(end.demands, end.buyer_good)
    if terminal:
        seller_u = seller_u + config.c2 * end.seller_good
        buyer_u = buyer_u + config.c3 * end.buyer_total_money
    return buyer_u, seller_u


def run_market(state: MarketState, seller_offers: Sequence[SellerOffer], strategy: Strategy,
               config: CrisisConfig, rng: np.random.Generator | None = None,
               terminal: bool = False, market_index: int = 1) -> MarketOutcome:
    """Rights allocation, ``k`` buyers' stage rounds, settlement and utilities."""
    start = state
    offers = legal_seller_offers(seller_offers, state, config.price_cap)
    total_offered = sum(o.volume for o in offers)
    rights = cgd_allocate(total_offered, state.demands)
    free = config.fairness is Fairness.FREE_MARKET
    # in a free market nobody is constrained by Rights
    held = np.full(state.num_buyers, total_offered) if free else rights.copy()
    state = state.copy(buyer_rights=held)

    remaining = np.array([o.volume for o in offers])
    rounds = []
    full = TradeLedger()
    for r in range(config.k):
        live = [SellerOffer(float(min(remaining[s], state.seller_good[s])), o.price)
                for s, o in enumerate(offers)]
        right_offers = _legal_right_offers(strategy.offer_rights(state, live, config, r),
                                           state, config)
        bids = strategy.bid(state, live, right_offers, config, r)
        if len(bids) != state.num_buyers:
            raise ValueError("one bid per buyer required")
        actions = []
        for (vr, pr), bid in zip(right_offers, bids):
            rv, rp, gv, gp = (max(float(x), 0.0) for x in bid)
            rp, gp = min(rp, config.price_cap), min(gp, config.price_cap)
            if free:
                rv = rp = 0.0
            actions.append(BuyerAction(vr, pr, rv, rp, gv, gp))
        book = OfferBook(live, actions)
        ledger = clear(config.mechanism, state, book, rng)
        state = settle(ledger, state, book, average=config.mechanism.average)
        for t in ledger:
            if t.seller.role is Role.SELLER:
                remaining[t.seller.index] -= t.volume
        remaining = np.maximum(remaining, 0.0)
        rounds.append((book, ledger))
        full.extend(ledger)

    buyer_u, seller_u = utilities(start, state, terminal, config)
    bought = full.goods_bought(state.num_buyers)
    record = FrustrationRecord(tuple(frustration(float(rights[b]), float(bought[b]))
                                     for b in range(state.num_buyers)), market_index)
    return MarketOutcome(market_index, terminal, start, state, offers, rights, rounds, full,
                         buyer_u, seller_u, record, full.good_volume())


def _legal_right_offers(raw, state: MarketState, config: CrisisConfig):
    if len(raw) != state.num_buyers:
        raise ValueError("one Right offer per buyer required")
    if config.fairness is Fairness.FREE_MARKET:
        return [(0.0, 0.0)] * state.num_buyers
    return [(float(np.clip(v, 0.0, state.buyer_rights[b])), float(np.clip(p, 0.0, config.price_cap)))
            for b, (v, p) in enumerate(raw)]


def transition(outcome: MarketOutcome, config: CrisisConfig) -> MarketState:
    """State at the start of the next Market.

    Sellers keep unsold Good plus resupply and start with no money; buyers keep
    all money plus earnings and consume up to their demand; Rights expire.
    """
    end = outcome.end_state
    nb, ns = end.num_buyers, end.num_sellers
    return MarketState(
        buyer_money=end.buyer_total_money + config.buyer_earnings,
        buyer_good=np.maximum(end.buyer_good - end.demands, 0.0),
        buyer_rights=np.zeros(nb),
        demands=end.demands.copy(),
        seller_money=np.zeros(ns),
        seller_good=end.seller_good + config.seller_supply,
    )


def run_crisis(config: CrisisConfig, strategy: Strategy, rng: np.random.Generator | None = None,
               on_market: Callable[[MarketOutcome], None] | None = None) -> CrisisTrace:
    """Simulate ``config.horizon`` Markets, threading the transition between them."""
    state = config.initial_state()
    outcomes = []
    for tau in range(1, config.horizon + 1):
        terminal = tau == config.horizon
        offers = strategy.seller_offers(state, config)
        outcome = run_market(state, offers, strategy, config, rng, terminal, tau)
        outcomes.append(outcome)
        if on_market is not None:
            on_market(outcome)
        if not terminal:
            state = transition(outcome, config)
    return summarize(outcomes, config)


def summarize(outcomes: list[MarketOutcome], config: CrisisConfig) -> CrisisTrace:
    disc = np.array([config.gamma ** i for i in range(1, len(outcomes) + 1)])
    bu = np.array([o.buyer_utilities for o in outcomes])
    su = np.array([o.seller_utilities for o in outcomes])
    poa = price_of_anarchy([o.frustrations for o in outcomes], config.num_buyers)
    return CrisisTrace(outcomes, poa, disc @ bu, disc @ su, bu.sum(axis=0), su.sum(axis=0))


@dataclass
class FixedStrategy:
    """The same declared actions in every Market (clipped to what is legal)."""

    offers: Sequence[SellerOffer]
    right_offers: Sequence[tuple[float, float]]
    bids: Sequence[tuple[float, float, float, float]]
    calls: list = field(default_factory=list, repr=False)

    def seller_offers(self, state, config):
        return list(self.offers)

    def offer_rights(self, state, offers, config, round_index):
        return list(self.right_offers)

    def bid(self, state, offers, right_offers, config, round_index):
        return list(self.bids)


TRACE_COLUMNS = ("episode", "market", "trader", "money", "good", "rights", "utility",
                 "frustration", "cleared_volume")


def write_trace_csv(traces: Sequence[CrisisTrace], out: TextIO) -> None:
    """One row per (episode, market, trader); holdings are post-trade, pre-transition.

    Seller rows leave ``rights`` and ``frustration`` empty.
    """
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for ep, trace in enumerate(traces):
        for o in trace.outcomes:
            end = o.end_state
            for b in range(end.num_buyers):
                w.writerow([ep, o.market_index, f"b{b}", _fmt(end.buyer_total_money[b]),
                            _fmt(end.buyer_good[b]), _fmt(o.rights[b]),
                            _fmt(o.buyer_utilities[b]), _fmt(o.frustrations.per_buyer[b]),
                            _fmt(o.cleared_volume)])
            for s in range(end.num_sellers):
                w.writerow([ep, o.market_index, f"s{s}", _fmt(end.seller_money[s]),
                            _fmt(end.seller_good[s]), "", _fmt(o.seller_utilities[s]), "",
                            _fmt(o.cleared_volume)])


def _fmt(x: float) -> str:
    return repr(round(float(x), 12))

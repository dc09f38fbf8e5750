"""Exhaustive reference for maximum clearing on tiny integer books.

A vector of per-buyer totals is routable through a bipartite graph with
capacities on both sides exactly when every set of buyers asks for no more
than its neighbourhood supplies.  Enumerating all integer per-buyer Good and
Right totals and keeping the feasible ones gives the maximum cleared Good
volume without any flow algorithm.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..clearing import Mechanism, check_ledger, clear_maxflow_absolute
from ..core import BuyerAction, MarketState, OfferBook, SellerOffer

PRICE_GRID = (0.25, 0.5, 0.75, 1.0)


@dataclass
class OracleCase:
    state: MarketState
    book: OfferBook


def random_case(rng: np.random.Generator, max_traders: int = 3, max_volume: int = 3) -> OracleCase:
    """A book with integer volumes, grid prices and enough money that budgets never bind."""
    nb = int(rng.integers(1, max_traders + 1))
    ns = int(rng.integers(1, max_traders + 1))

    def vol(hi=max_volume):
        return float(rng.integers(0, hi + 1))

    def price():
        return float(rng.choice(PRICE_GRID))

    rights = np.array([vol() for _ in range(nb)])
    offers = [SellerOffer(vol(), price()) for _ in range(ns)]
    actions = [BuyerAction(vol(int(rights[b])), price(), vol(), price(), vol(), price())
               for b in range(nb)]
    state = MarketState(buyer_money=np.full(nb, 100.0), buyer_good=np.zeros(nb),
                        buyer_rights=rights, demands=np.full(nb, float(max_volume)),
                        seller_money=np.zeros(ns),
                        seller_good=np.array([o.volume for o in offers]))
    return OracleCase(state, OfferBook(offers, actions))


def _routable(totals, supply, neighbours) -> bool:
    n = len(totals)
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        reach = set().union(*(neighbours[i] for i in members))
        if sum(totals[i] for i in members) > sum(supply[j] for j in reach) + 1e-9:
            return False
    return True


def brute_force_volume(case: OracleCase) -> float:
    """Maximum Good volume over all integer per-buyer totals that the books can route."""
    book, state = case.book, case.state
    nb, ns = book.num_buyers, book.num_sellers
    acts, offers = book.buyer_actions, book.seller_offers
    good_nb = [{s for s in range(ns) if offers[s].volume > 0 and a.good_bid_volume > 0
                and a.good_bid_price >= offers[s].price} for a in acts]
    right_nb = [{x for x in range(nb) if x != b and acts[x].right_sale_volume > 0
                 and a.right_bid_volume > 0 and a.right_bid_price >= acts[x].right_sale_price}
                for b, a in enumerate(acts)]
    own = [max(state.buyer_rights[b] - acts[b].right_sale_volume, 0.0) for b in range(nb)]
    good_supply = [o.volume for o in offers]
    right_supply = [a.right_sale_volume for a in acts]

    best = 0.0
    right_ranges = [range(int(acts[b].right_bid_volume) + 1) for b in range(nb)]
    for bought_rights in itertools.product(*right_ranges):
        if not _routable(bought_rights, right_supply, right_nb):
            continue
        good_ranges = []
        for b, r in enumerate(bought_rights):
            hi = min(acts[b].good_bid_volume, own[b] + r)
            if r > hi:
                break
            good_ranges.append(range(int(r), int(hi) + 1))
        else:
            for goods in itertools.product(*good_ranges):
                if sum(goods) > best and _routable(goods, good_supply, good_nb):
                    best = float(sum(goods))
    return best


@dataclass
class OracleReport:
    cases: int
    mismatches: list[tuple[int, float, float]]
    non_integral: list[int]
    illegal: list[int]

    @property
    def passed(self) -> bool:
        return not (self.mismatches or self.non_integral or self.illegal)


def run_oracle_suite(rng: np.random.Generator, cases: int = 200) -> OracleReport:
    """Compare max-flow clearing against the exhaustive maximum on random cases."""
    report = OracleReport(cases, [], [], [])
    for i in range(cases):
        case = random_case(rng)
        ledger = clear_maxflow_absolute(case.state, case.book)
        got = ledger.good_volume()
        want = brute_force_volume(case)
        if abs(got - want) > 1e-9:
            report.mismatches.append((i, got, want))
        if any(abs(t.volume - round(t.volume)) > 1e-9 for t in ledger):
            report.non_integral.append(i)
        try:
            check_ledger(ledger, case.book, case.state, Mechanism.MAXFLOW.average)
        except ValueError:
            report.illegal.append(i)
    return report

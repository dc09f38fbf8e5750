"""The four bid-clearing mechanisms.

Every trade executes at the asking price.  The absolute mechanisms (random,
greedy, max-flow) first pass the book through :func:`budget_scale` so that no
buyer can be overdrawn; the average-price LP enforces budgets directly.
"""

from __future__ import annotations

import enum

import numpy as np

from ..core import TOL, MarketState, OfferBook, Resource, Trade, TradeLedger, buyer, seller
from .graphs import CompatibilityGraphs, budget_scale, build_graphs
from .maxflow import FlowNetwork, max_flow
from .simplex import LinearProgram, solve_lp

LP_SPREAD_WEIGHT = 1e-3


class Mechanism(enum.Enum):
    RANDOM = "random"
    GREEDY = "greedy"
    MAXFLOW = "maxflow"
    LP_AVERAGE = "lp"

    @property
    def average(self) -> bool:
        return self is Mechanism.LP_AVERAGE


def _usable_rights(state: MarketState, book: OfferBook) -> np.ndarray:
    sale = np.array([a.right_sale_volume for a in book.buyer_actions])
    return np.maximum(state.buyer_rights - sale, 0.0)


def _sequential(state: MarketState, book: OfferBook, buyer_order, good_order, right_order
                ) -> TradeLedger:
    """Shared two-stage loop of the random and greedy mechanisms.

    ``good_order(b)`` / ``right_order(b)`` give the order in which buyer ``b``
    visits Good sellers and Right sellers.
    """
    ledger = TradeLedger()
    good_left = np.array([o.volume for o in book.seller_offers], dtype=float)
    right_left = np.array([a.right_sale_volume for a in book.buyer_actions], dtype=float)
    own_rights = _usable_rights(state, book)

    for b in buyer_order:
        act = book.buyer_actions[b]
        want = act.good_bid_volume
        want_rights = act.right_bid_volume
        budget = state.buyer_money[b]
        rights = own_rights[b]
        goods = [s for s in good_order(b) if book.seller_offers[s].price <= act.good_bid_price]

        # stage 1: buy Good against own Rights
        for s in goods:
            if want <= TOL or rights <= TOL:
                break
            if good_left[s] <= TOL:
                continue
            price = book.seller_offers[s].price
            vol = min(good_left[s], want, rights, budget / price if price > 0 else np.inf)
            if vol <= TOL:
                continue
            ledger.append(Trade(seller(s), buyer(b), Resource.GOOD, vol, price))
            good_left[s] -= vol
            want -= vol
            rights -= vol
            budget -= vol * price

        # stage 2: buy Right and Good in equal amounts, walking both lists in lockstep
        sellers_r = [x for x in right_order(b) if x != b
                     and book.buyer_actions[x].right_sale_price <= act.right_bid_price]
        i = j = 0
        while i < len(goods) and j < len(sellers_r) and want > TOL and want_rights > TOL:
            s, x = goods[i], sellers_r[j]
            if good_left[s] <= TOL:
                i += 1
                continue
            if right_left[x] <= TOL:
                j += 1
                continue
            pg = book.seller_offers[s].price
            pr = book.buyer_actions[x].right_sale_price
            unit = pg + pr
            vol = min(want, good_left[s], right_left[x], want_rights,
                      budget / unit if unit > 0 else np.inf)
            if vol <= TOL:
                break
            ledger.append(Trade(buyer(x), buyer(b), Resource.RIGHT, vol, pr))
            ledger.append(Trade(seller(s), buyer(b), Resource.GOOD, vol, pg))
            good_left[s] -= vol
            right_left[x] -= vol
            want -= vol
            want_rights -= vol
            budget -= vol * unit
    return ledger


def clear_random(state: MarketState, book: OfferBook, rng: np.random.Generator) -> TradeLedger:
    """Buyers in random order, each walking randomly permuted offer lists."""
    book = budget_scale(book, state.buyer_money)
    order = rng.permutation(book.num_buyers).tolist()
    lists = {b: (rng.permutation(book.num_sellers).tolist(),
                 rng.permutation(book.num_buyers).tolist()) for b in order}
    return _sequential(state, book, order, lambda b: lists[b][0], lambda b: lists[b][1])


def clear_greedy(state: MarketState, book: OfferBook) -> TradeLedger:
    """Buyers by descending Good bid, each taking the cheapest offers first.

    Ties go to the lower trader index.
    """
    book = budget_scale(book, state.buyer_money)
    order = sorted(range(book.num_buyers), key=lambda b: (-book.buyer_actions[b].good_bid_price, b))
    goods = sorted(range(book.num_sellers), key=lambda s: (book.seller_offers[s].price, s))
    rights = sorted(range(book.num_buyers),
                    key=lambda x: (book.buyer_actions[x].right_sale_price, x))
    return _sequential(state, book, order, lambda b: goods, lambda b: rights)


class ClearingNetwork:
    """Flow network whose maximum flows are maximum clearings of a book.

    Per buyer ``b`` there is an own-Rights vertex fed from the source with the
    Rights left after the intended sale, a Right-seller copy fed with the offered
    Right, a Right-buyer copy and its ``'`` copy that couples each bought unit of
    Right to one unit of Good, and a gate that caps total Good bought at the
    declared volume before the Good edges lead to the sellers and the sink.
    """

    def __init__(self, state: MarketState, book: OfferBook, graphs: CompatibilityGraphs):
        self.graphs = graphs
        nb, ns = book.num_buyers, book.num_sellers
        net = FlowNetwork(0, 0, 1)
        net.add_node("source")
        net.add_node("sink")
        own = [net.add_node(f"B{b}") for b in range(nb)]
        r_sell = [net.add_node(f"BS{b}") for b in range(nb)]
        r_buy = [net.add_node(f"BB{b}") for b in range(nb)]
        r_copy = [net.add_node(f"B'{b}") for b in range(nb)]
        gate_in = [net.add_node(f"gate{b}") for b in range(nb)]
        gate_out = [net.add_node(f"gate'{b}") for b in range(nb)]
        sellers = [net.add_node(f"S{s}") for s in range(ns)]
        usable = _usable_rights(state, book)
        inf = float("inf")

        self.good_arcs: dict[tuple[int, int], int] = {}
        self.right_arcs: dict[tuple[int, int], int] = {}
        for b in range(nb):
            net.add_arc(net.source, own[b], usable[b])
            net.add_arc(net.source, r_sell[b], graphs.right_supply[b])
            net.add_arc(r_buy[b], r_copy[b], graphs.right_demand[b])
            net.add_arc(own[b], gate_in[b], inf)
            net.add_arc(r_copy[b], gate_in[b], inf)
            net.add_arc(gate_in[b], gate_out[b], graphs.good_demand[b])
        for x, b in sorted(graphs.right_edges):
            self.right_arcs[(x, b)] = net.add_arc(r_sell[x], r_buy[b], graphs.right_demand[b])
        for s, b in sorted(graphs.good_edges):
            self.good_arcs[(s, b)] = net.add_arc(gate_out[b], sellers[s], graphs.good_supply[s])
        for s in range(ns):
            net.add_arc(sellers[s], net.sink, graphs.good_supply[s])
        self.network = net


def clear_maxflow_absolute(state: MarketState, book: OfferBook) -> TradeLedger:
    """Clear the largest possible Good volume under absolute price compatibility."""
    book = budget_scale(book, state.buyer_money)
    graphs = build_graphs(book)
    cn = ClearingNetwork(state, book, graphs)
    flows = max_flow(cn.network)
    ledger = TradeLedger()
    for (x, b), arc in cn.right_arcs.items():
        if flows[arc] > TOL:
            ledger.append(Trade(buyer(x), buyer(b), Resource.RIGHT, float(flows[arc]),
                                book.buyer_actions[x].right_sale_price))
    for (s, b), arc in cn.good_arcs.items():
        if flows[arc] > TOL:
            ledger.append(Trade(seller(s), buyer(b), Resource.GOOD, float(flows[arc]),
                                book.seller_offers[s].price))
    return ledger


class ClearingLP:
    """Average-price maximum clearing as a linear program.

    Variables: Good volumes on Good edges, Right volumes on Right edges, and the
    min / max Good bought per buyer.  Objective: total Good minus a small
    multiple of the max-min spread.
    """

    def __init__(self, state: MarketState, book: OfferBook, graphs: CompatibilityGraphs,
                 spread_weight: float = LP_SPREAD_WEIGHT):
        nb, ns = book.num_buyers, book.num_sellers
        self.good_edges = sorted(graphs.good_edges)
        self.right_edges = sorted(graphs.right_edges)
        ng, nr = len(self.good_edges), len(self.right_edges)
        n = ng + nr + 2
        i_min, i_max = ng + nr, ng + nr + 1
        c = np.zeros(n)
        c[:ng] = 1.0
        c[i_min] = spread_weight
        c[i_max] = -spread_weight
        rows, rhs, names = [], [], []

        def row():
            return np.zeros(n)

        usable = _usable_rights(state, book)
        for b in range(nb):
            act = book.buyer_actions[b]
            g_in = [k for k, (_, bb) in enumerate(self.good_edges) if bb == b]
            r_in = [ng + k for k, (_, bb) in enumerate(self.right_edges) if bb == b]
            r_out = [ng + k for k, (x, _) in enumerate(self.right_edges) if x == b]

            cover = row(); cover[g_in] = 1.0; cover[r_in] = -1.0
            rows.append(cover); rhs.append(usable[b]); names.append(f"cover_b{b}")
            want = row(); want[g_in] = 1.0
            rows.append(want); rhs.append(act.good_bid_volume); names.append(f"good_bid_b{b}")
            want_r = row(); want_r[r_in] = 1.0
            rows.append(want_r); rhs.append(act.right_bid_volume); names.append(f"right_bid_b{b}")
            sell_r = row(); sell_r[r_out] = 1.0
            rows.append(sell_r); rhs.append(act.right_sale_volume); names.append(f"right_sale_b{b}")
            lo = row(); lo[i_min] = 1.0; lo[g_in] = -1.0
            rows.append(lo); rhs.append(0.0); names.append(f"min_b{b}")
            hi = row(); hi[g_in] = 1.0; hi[i_max] = -1.0
            rows.append(hi); rhs.append(0.0); names.append(f"max_b{b}")
            avg_g = row()
            for k in g_in:
                avg_g[k] = book.seller_offers[self.good_edges[k][0]].price - act.good_bid_price
            rows.append(avg_g); rhs.append(0.0); names.append(f"avg_good_b{b}")
            avg_r = row()
            for k in r_in:
                x = self.right_edges[k - ng][0]
                avg_r[k] = book.buyer_actions[x].right_sale_price - act.right_bid_price
            rows.append(avg_r); rhs.append(0.0); names.append(f"avg_right_b{b}")
            budget = row()
            for k in g_in:
                budget[k] = book.seller_offers[self.good_edges[k][0]].price
            for k in r_in:
                budget[k] = book.buyer_actions[self.right_edges[k - ng][0]].right_sale_price
            rows.append(budget); rhs.append(state.buyer_money[b]); names.append(f"budget_b{b}")
        for s in range(ns):
            supply = row()
            supply[[k for k, (ss, _) in enumerate(self.good_edges) if ss == s]] = 1.0
            rows.append(supply); rhs.append(book.seller_offers[s].volume); names.append(f"supply_s{s}")

        var_names = ([f"g_s{s}_b{b}" for s, b in self.good_edges]
                     + [f"r_b{x}_b{b}" for x, b in self.right_edges] + ["m", "M"])
        self.lp = LinearProgram(c, np.array(rows).reshape(-1, n), np.array(rhs),
                                var_names, names)
        self.usable = usable


def clear_lp_average(state: MarketState, book: OfferBook,
                     ban_goods: set[tuple[int, int]] | None = None,
                     ban_rights: set[tuple[int, int]] | None = None,
                     spread_weight: float = LP_SPREAD_WEIGHT) -> TradeLedger:
    """Clear the largest Good volume with bids read as maximum average prices."""
    graphs = build_graphs(book, average=True, ban_goods=ban_goods, ban_rights=ban_rights)
    clp = ClearingLP(state, book, graphs, spread_weight)
    res = solve_lp(clp.lp)
    ng = len(clp.good_edges)
    goods = res.x[:ng]
    rights = res.x[ng:ng + len(clp.right_edges)].copy()

    # the LP does not penalise Rights bought beyond what covers Good; drop the
    # excess, most expensive first (keeps every constraint satisfied)
    nb = book.num_buyers
    for b in range(nb):
        bought_goods = sum(goods[k] for k, (_, bb) in enumerate(clp.good_edges) if bb == b)
        needed = max(bought_goods - clp.usable[b], 0.0)
        idx = [k for k, (_, bb) in enumerate(clp.right_edges) if bb == b]
        idx.sort(key=lambda k: (-book.buyer_actions[clp.right_edges[k][0]].right_sale_price, k))
        excess = rights[idx].sum() - needed
        for k in idx:
            if excess <= TOL:
                break
            cut = min(rights[k], excess)
            rights[k] -= cut
            excess -= cut

    ledger = TradeLedger()
    for k, (x, b) in enumerate(clp.right_edges):
        if rights[k] > TOL:
            ledger.append(Trade(buyer(x), buyer(b), Resource.RIGHT, float(rights[k]),
                                book.buyer_actions[x].right_sale_price))
    for k, (s, b) in enumerate(clp.good_edges):
        if goods[k] > TOL:
            ledger.append(Trade(seller(s), buyer(b), Resource.GOOD, float(goods[k]),
                                book.seller_offers[s].price))
    return ledger


def clear(mechanism: Mechanism, state: MarketState, book: OfferBook,
          rng: np.random.Generator | None = None) -> TradeLedger:
    if mechanism is Mechanism.RANDOM:
        if rng is None:
            raise ValueError("the random mechanism needs a seeded generator")
        return clear_random(state, book, rng)
    if mechanism is Mechanism.GREEDY:
        return clear_greedy(state, book)
    if mechanism is Mechanism.MAXFLOW:
        return clear_maxflow_absolute(state, book)
    if mechanism is Mechanism.LP_AVERAGE:
        return clear_lp_average(state, book)
    raise ValueError(f"unknown mechanism {mechanism}")

"""Price-compatibility graphs between bids and asks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import TOL, BuyerAction, OfferBook


@dataclass(frozen=True)
class CompatibilityGraphs:
    """Admissible trading pairs.

    ``good_edges`` holds ``(seller, buyer)`` pairs and ``right_edges`` holds
    ``(right_seller, right_buyer)`` pairs of buyer indices.  Vertex weights are
    the offered / desired volumes.
    """

    good_edges: frozenset[tuple[int, int]]
    right_edges: frozenset[tuple[int, int]]
    good_supply: np.ndarray   # w_G on sellers
    good_demand: np.ndarray   # w_G on buyers
    right_supply: np.ndarray  # w_R on right sellers
    right_demand: np.ndarray  # w_R on right buyers

    def sellers_of(self, b: int) -> list[int]:
        return sorted(s for s, bb in self.good_edges if bb == b)

    def right_sellers_of(self, b: int) -> list[int]:
        return sorted(x for x, bb in self.right_edges if bb == b)


def build_graphs(book: OfferBook, average: bool = False,
                 ban_goods: set[tuple[int, int]] | None = None,
                 ban_rights: set[tuple[int, int]] | None = None) -> CompatibilityGraphs:
    """Build the Good and Right compatibility graphs of an offer book.

    With ``average=False`` an edge requires the bid price to cover the ask price
    (inclusive).  With ``average=True`` prices are only enforced on average by the
    clearing LP, so every pair with positive volumes on both sides is admitted.
    ``ban_goods`` / ``ban_rights`` remove pairs a market designer forbids.
    """
    good_supply = np.array([o.volume for o in book.seller_offers], dtype=float)
    good_demand = np.array([a.good_bid_volume for a in book.buyer_actions], dtype=float)
    right_supply = np.array([a.right_sale_volume for a in book.buyer_actions], dtype=float)
    right_demand = np.array([a.right_bid_volume for a in book.buyer_actions], dtype=float)
    ban_goods = ban_goods or set()
    ban_rights = ban_rights or set()

    good_edges = set()
    for s, offer in enumerate(book.seller_offers):
        if offer.volume <= TOL:
            continue
        for b, act in enumerate(book.buyer_actions):
            if act.good_bid_volume <= TOL or (s, b) in ban_goods:
                continue
            if average or act.good_bid_price >= offer.price:
                good_edges.add((s, b))

    right_edges = set()
    for x, seller_act in enumerate(book.buyer_actions):
        if seller_act.right_sale_volume <= TOL:
            continue
        for b, act in enumerate(book.buyer_actions):
            if b == x or act.right_bid_volume <= TOL or (x, b) in ban_rights:
                continue
            if average or act.right_bid_price >= seller_act.right_sale_price:
                right_edges.add((x, b))

    return CompatibilityGraphs(frozenset(good_edges), frozenset(right_edges),
                               good_supply, good_demand, right_supply, right_demand)


def budget_scale(book: OfferBook, money: np.ndarray) -> OfferBook:
    """Shrink each buyer's desired volumes so that no clearing can overdraw them.

    The worst-case spend of buyer ``b`` is its desired Good volume at the dearest
    compatible Good ask plus its desired Right volume at the dearest compatible
    Right ask.  Trades execute at asking prices, so after scaling any clearing
    that respects the desired volumes stays within budget.
    """
    graphs = build_graphs(book)
    actions = []
    for b, act in enumerate(book.buyer_actions):
        good_asks = [book.seller_offers[s].price for s in graphs.sellers_of(b)]
        right_asks = [book.buyer_actions[x].right_sale_price for x in graphs.right_sellers_of(b)]
        worst = (act.good_bid_volume * max(good_asks, default=0.0)
                 + act.right_bid_volume * max(right_asks, default=0.0))
        if worst > money[b] and worst > 0:
            act = act.scaled(max(money[b], 0.0) / worst)
        actions.append(act)
    return OfferBook(book.seller_offers, actions)


def zero_rights_actions(actions) -> list[BuyerAction]:
    return [BuyerAction(good_bid_volume=a.good_bid_volume, good_bid_price=a.good_bid_price)
            for a in actions]

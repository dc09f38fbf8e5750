"""Trade-ledger legality checks and settlement.

Conditions 1-5 are the market-mechanism requirements:

1. nobody sells more Good or Right than offered;
2. no buyer buys more Good or Right than declared;
3. nobody sells below their asking price;
4. no buyer pays more than their bid (per trade, or on average per resource);
5. no buyer buys Rights from themselves.

Two further conditions guard the state: ``"budget"`` (a buyer never spends more
than their spendable money) and ``"cover"`` (Good bought is covered by Rights).
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..core import TOL, MarketState, OfferBook, Resource, Role, TradeLedger

CHECK_TOL = 1e-9


class LedgerViolation(ValueError):
    def __init__(self, condition: int | str, message: str):
        super().__init__(f"condition {condition}: {message}")
        self.condition = condition


def _tol(x: float) -> float:
    return CHECK_TOL * max(1.0, abs(x))


def check_ledger(ledger: TradeLedger, book: OfferBook, state: MarketState,
                 average: bool = False) -> None:
    """Raise :class:`LedgerViolation` if ``ledger`` is not a legal clearing of ``book``."""
    nb, ns = book.num_buyers, book.num_sellers
    good_sold = np.zeros(ns)
    right_sold = np.zeros(nb)
    good_bought = np.zeros(nb)
    right_bought = np.zeros(nb)
    good_paid = np.zeros(nb)
    right_paid = np.zeros(nb)

    for t in ledger:
        if t.volume <= 0:
            raise LedgerViolation(1, f"non-positive trade volume {t.volume}")
        if t.buyer.role is not Role.BUYER:
            raise LedgerViolation(2, f"{t.buyer} cannot buy")
        b = t.buyer.index
        if t.resource is Resource.GOOD:
            if t.seller.role is not Role.SELLER:
                raise LedgerViolation(1, f"{t.seller} has no Good on offer")
            offer = book.seller_offers[t.seller.index]
            ask, bid = offer.price, book.buyer_actions[b].good_bid_price
            good_sold[t.seller.index] += t.volume
            good_bought[b] += t.volume
            good_paid[b] += t.value
        else:
            if t.seller.role is not Role.BUYER:
                raise LedgerViolation(1, f"{t.seller} has no Right on offer")
            if t.seller.index == b:
                raise LedgerViolation(5, f"buyer {b} buys Rights from themselves")
            ask = book.buyer_actions[t.seller.index].right_sale_price
            bid = book.buyer_actions[b].right_bid_price
            right_sold[t.seller.index] += t.volume
            right_bought[b] += t.volume
            right_paid[b] += t.value
        if t.unit_price < ask - _tol(ask):
            raise LedgerViolation(3, f"trade {t} below asking price {ask}")
        if not average and t.unit_price > bid + _tol(bid):
            raise LedgerViolation(4, f"trade {t} above bidding price {bid}")

    for s, offer in enumerate(book.seller_offers):
        if good_sold[s] > offer.volume + _tol(offer.volume):
            raise LedgerViolation(1, f"seller {s} sold {good_sold[s]} > offered {offer.volume}")
    for b, act in enumerate(book.buyer_actions):
        if right_sold[b] > act.right_sale_volume + _tol(act.right_sale_volume):
            raise LedgerViolation(1, f"buyer {b} sold {right_sold[b]} Right > offered")
        if good_bought[b] > act.good_bid_volume + _tol(act.good_bid_volume):
            raise LedgerViolation(2, f"buyer {b} bought {good_bought[b]} Good > declared")
        if right_bought[b] > act.right_bid_volume + _tol(act.right_bid_volume):
            raise LedgerViolation(2, f"buyer {b} bought {right_bought[b]} Right > declared")
        if average:
            if good_paid[b] > act.good_bid_price * good_bought[b] + _tol(good_paid[b]):
                raise LedgerViolation(4, f"buyer {b} pays above bid on average for Good")
            if right_paid[b] > act.right_bid_price * right_bought[b] + _tol(right_paid[b]):
                raise LedgerViolation(4, f"buyer {b} pays above bid on average for Right")
    _check_state(ledger, state)


def _check_state(ledger: TradeLedger, state: MarketState) -> None:
    nb, ns = state.num_buyers, state.num_sellers
    spend = np.zeros(nb)
    good_bought = np.zeros(nb)
    right_net = np.zeros(nb)
    good_sold = np.zeros(ns)
    for t in ledger:
        if t.buyer.role is not Role.BUYER or not 0 <= t.buyer.index < nb:
            raise LedgerViolation(2, f"unknown buyer {t.buyer}")
        spend[t.buyer.index] += t.value
        if t.resource is Resource.GOOD:
            good_bought[t.buyer.index] += t.volume
            good_sold[t.seller.index] += t.volume
        else:
            if t.seller == t.buyer:
                raise LedgerViolation(5, f"buyer {t.buyer.index} buys Rights from themselves")
            right_net[t.buyer.index] += t.volume
            right_net[t.seller.index] -= t.volume
    for s in range(ns):
        if good_sold[s] > state.seller_good[s] + _tol(state.seller_good[s]):
            raise LedgerViolation(1, f"seller {s} sells more Good than held")
    for b in range(nb):
        if spend[b] > state.buyer_money[b] + _tol(state.buyer_money[b]):
            raise LedgerViolation("budget", f"buyer {b} spends {spend[b]} > {state.buyer_money[b]}")
        if state.buyer_rights[b] + right_net[b] < -_tol(state.buyer_rights[b]):
            raise LedgerViolation(1, f"buyer {b} sells more Right than held")
        if good_bought[b] > state.buyer_rights[b] + right_net[b] + _tol(good_bought[b]):
            raise LedgerViolation("cover", f"buyer {b} Good not covered by Rights")


def settle(ledger: TradeLedger, state: MarketState, book: OfferBook | None = None,
           average: bool = False) -> MarketState:
    """Apply ``ledger`` to ``state`` and return the new state.

    Good and Right move from seller to buyer and money from buyer to seller.
    Proceeds of Right sales go to the selling buyer's ``buyer_income``.  Rights
    that cover Good purchases are consumed.  When ``book`` is given the full
    set of legality conditions is checked first; the state conditions are
    always checked.
    """
    if book is not None:
        check_ledger(ledger, book, state, average=average)
    else:
        _check_state(ledger, state)
    new = state.copy()
    for t in ledger:
        b = t.buyer.index
        new.buyer_money[b] -= t.value
        if t.resource is Resource.GOOD:
            new.seller_good[t.seller.index] -= t.volume
            new.seller_money[t.seller.index] += t.value
            new.buyer_good[b] += t.volume
            new.buyer_rights[b] -= t.volume
        else:
            new.buyer_income[t.seller.index] += t.value
            new.buyer_rights[t.seller.index] -= t.volume
            new.buyer_rights[b] += t.volume
    for arr in (new.buyer_money, new.seller_good, new.buyer_rights):
        arr[np.abs(arr) < TOL] = 0.0
        np.maximum(arr, 0.0, out=arr)
    return new


def per_pair_volumes(ledger: TradeLedger) -> dict:
    """Aggregate volumes by ``(resource, seller, buyer)``."""
    out: dict = defaultdict(float)
    for t in ledger:
        out[(t.resource, t.seller, t.buyer)] += t.volume
    return dict(out)

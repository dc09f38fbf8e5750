"""Shared instances for the test suite."""

import numpy as np

from critmarket.core import BuyerAction, MarketState, OfferBook, SellerOffer


def worked_example():
    """Two buyers (money 2 and 1, demand 1 and 3) and one seller with 2 units."""
    state = MarketState(buyer_money=np.array([2.0, 1.0]), buyer_good=np.zeros(2),
                        buyer_rights=np.array([0.5, 1.5]), demands=np.array([1.0, 3.0]),
                        seller_money=np.zeros(1), seller_good=np.array([2.0]))
    book = OfferBook([SellerOffer(2.0, 1.0)],
                     [BuyerAction(0, 0, 0.5, 1, 1, 1), BuyerAction(0.5, 1, 0, 0, 1, 2)])
    return state, book


def random_market(rng, nb=None, ns=None, cap=1.0):
    """A market state with CGD rights and a random legal offer book."""
    from critmarket.core import cgd_allocate
    nb = nb or int(rng.integers(2, 6))
    ns = ns or int(rng.integers(1, 5))
    good = rng.uniform(0, 1, ns)
    offers = [SellerOffer(float(rng.uniform(0, good[s])), float(rng.uniform(0, cap)))
              for s in range(ns)]
    demands = rng.uniform(0.5, 2, nb)
    rights = cgd_allocate(sum(o.volume for o in offers), demands)
    money = rng.uniform(0, 1.5, nb)
    total_good = sum(o.volume for o in offers)
    actions = []
    for b in range(nb):
        actions.append(BuyerAction(
            float(rng.uniform(0, rights[b])) * (rng.random() < 0.7), float(rng.uniform(0, cap)),
            float(rng.uniform(0, total_good)), float(rng.uniform(0, cap)),
            float(rng.uniform(0, total_good)), float(rng.uniform(0, cap))))
    state = MarketState(buyer_money=money, buyer_good=rng.uniform(0, 0.5, nb), buyer_rights=rights,
                        demands=demands, seller_money=np.zeros(ns), seller_good=good)
    return state, OfferBook(offers, actions)


# PASS/FAIL lines of the acceptance suite, echoed in the terminal summary
ACCEPTANCE: list[str] = []

"""Simulation and learning for double-sided markets of a critical good under a
fair-share Rights scheme."""

from .core import (BuyerAction, MarketState, OfferBook, SellerOffer, Trade, TradeLedger,
                   cgd_allocate, frustration, price_of_anarchy)
from .sim import CrisisConfig, Fairness, run_crisis, run_market, transition

__version__ = "0.1.0"

__all__ = [
    "BuyerAction", "CrisisConfig", "Fairness", "MarketState", "OfferBook", "SellerOffer", "Trade",
    "TradeLedger", "cgd_allocate", "frustration", "price_of_anarchy", "run_crisis", "run_market",
    "transition",
]

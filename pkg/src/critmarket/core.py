"""Shared domain types, the contested-garment rights allocation and frustration metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

TOL = 1e-9


class Role(enum.Enum):
    BUYER = "buyer"
    SELLER = "seller"


class Resource(enum.Enum):
    GOOD = "good"
    RIGHT = "right"


class TraderId(NamedTuple):
    role: Role
    index: int

    def __str__(self) -> str:
        return f"{'b' if self.role is Role.BUYER else 's'}{self.index}"


def buyer(i: int) -> TraderId:
    return TraderId(Role.BUYER, i)


def seller(i: int) -> TraderId:
    return TraderId(Role.SELLER, i)


def _arr(x) -> np.ndarray:
    return np.array(x, dtype=float).reshape(-1)


@dataclass
class MarketState:
    """Holdings of every trader during one Market.

    Buyer money is split into ``buyer_money`` (spendable now) and
    ``buyer_income`` (proceeds of Right sales, which only become spendable in
    the next Market). ``buyer_rights`` holds the Rights not yet used to cover
    a Good purchase.
    """

    buyer_money: np.ndarray
    buyer_good: np.ndarray
    buyer_rights: np.ndarray
    demands: np.ndarray
    seller_money: np.ndarray
    seller_good: np.ndarray
    buyer_income: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.buyer_money = _arr(self.buyer_money)
        self.buyer_good = _arr(self.buyer_good)
        self.buyer_rights = _arr(self.buyer_rights)
        self.demands = _arr(self.demands)
        self.seller_money = _arr(self.seller_money)
        self.seller_good = _arr(self.seller_good)
        if self.buyer_income is None:
            self.buyer_income = np.zeros_like(self.buyer_money)
        self.buyer_income = _arr(self.buyer_income)
        nb = len(self.demands)
        for name in ("buyer_money", "buyer_good", "buyer_rights", "buyer_income"):
            if len(getattr(self, name)) != nb:
                raise ValueError(f"{name} must have one entry per buyer ({nb})")
        if len(self.seller_money) != len(self.seller_good):
            raise ValueError("seller_money and seller_good differ in length")
        for name in ("buyer_money", "buyer_good", "buyer_rights", "demands",
                     "seller_money", "seller_good", "buyer_income"):
            if np.any(getattr(self, name) < -TOL):
                raise ValueError(f"{name} has negative entries")

    @property
    def num_buyers(self) -> int:
        return len(self.demands)

    @property
    def num_sellers(self) -> int:
        return len(self.seller_good)

    @property
    def buyer_total_money(self) -> np.ndarray:
        return self.buyer_money + self.buyer_income

    def total_money(self) -> float:
        return float(self.buyer_total_money.sum() + self.seller_money.sum())

    def total_good(self) -> float:
        return float(self.buyer_good.sum() + self.seller_good.sum())

    def copy(self, **changes) -> "MarketState":
        fields = {
            "buyer_money": self.buyer_money.copy(),
            "buyer_good": self.buyer_good.copy(),
            "buyer_rights": self.buyer_rights.copy(),
            "demands": self.demands.copy(),
            "seller_money": self.seller_money.copy(),
            "seller_good": self.seller_good.copy(),
            "buyer_income": self.buyer_income.copy(),
        }
        fields.update(changes)
        return MarketState(**fields)


@dataclass(frozen=True)
class SellerOffer:
    volume: float
    price: float


@dataclass(frozen=True)
class BuyerAction:
    """The six declared quantities of one buyer: Right sale, Right bid, Good bid."""

    right_sale_volume: float = 0.0
    right_sale_price: float = 0.0
    right_bid_volume: float = 0.0
    right_bid_price: float = 0.0
    good_bid_volume: float = 0.0
    good_bid_price: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return (self.right_sale_volume, self.right_sale_price, self.right_bid_volume,
                self.right_bid_price, self.good_bid_volume, self.good_bid_price)

    def scaled(self, factor: float) -> "BuyerAction":
        return replace(self, right_bid_volume=self.right_bid_volume * factor,
                       good_bid_volume=self.good_bid_volume * factor)


@dataclass(frozen=True)
class OfferBook:
    seller_offers: tuple[SellerOffer, ...]
    buyer_actions: tuple[BuyerAction, ...]

    def __init__(self, seller_offers: Sequence[SellerOffer], buyer_actions: Sequence[BuyerAction]):
        object.__setattr__(self, "seller_offers", tuple(seller_offers))
        object.__setattr__(self, "buyer_actions", tuple(buyer_actions))

    @property
    def num_sellers(self) -> int:
        return len(self.seller_offers)

    @property
    def num_buyers(self) -> int:
        return len(self.buyer_actions)

    def validate(self, state: MarketState, price_cap: float | None = None) -> None:
        if self.num_sellers != state.num_sellers or self.num_buyers != state.num_buyers:
            raise ValueError("offer book does not match the market state")
        for s, o in enumerate(self.seller_offers):
            if o.volume < -TOL or o.price < -TOL:
                raise ValueError(f"seller {s}: negative offer")
            if o.volume > state.seller_good[s] + TOL:
                raise ValueError(f"seller {s}: offers more Good than held")
            if price_cap is not None and o.price > price_cap + TOL:
                raise ValueError(f"seller {s}: price above cap")
        for b, a in enumerate(self.buyer_actions):
            if any(x < -TOL for x in a.as_tuple()):
                raise ValueError(f"buyer {b}: negative action entry")
            if a.right_sale_volume > state.buyer_rights[b] + TOL:
                raise ValueError(f"buyer {b}: offers more Right than held")
            if price_cap is not None and max(a.right_sale_price, a.right_bid_price,
                                             a.good_bid_price) > price_cap + TOL:
                raise ValueError(f"buyer {b}: price above cap")


@dataclass(frozen=True)
class Trade:
    seller: TraderId
    buyer: TraderId
    resource: Resource
    volume: float
    unit_price: float

    def __post_init__(self):
        object.__setattr__(self, "volume", float(self.volume))
        object.__setattr__(self, "unit_price", float(self.unit_price))

    @property
    def value(self) -> float:
        return self.volume * self.unit_price


@dataclass
class TradeLedger:
    trades: list[Trade] = field(default_factory=list)

    def __iter__(self):
        return iter(self.trades)

    def __len__(self) -> int:
        return len(self.trades)

    def append(self, trade: Trade) -> None:
        self.trades.append(trade)

    def extend(self, other: "TradeLedger") -> None:
        self.trades.extend(other.trades)

    def good_volume(self) -> float:
        return float(sum(t.volume for t in self.trades if t.resource is Resource.GOOD))

    def goods_bought(self, num_buyers: int) -> np.ndarray:
        out = np.zeros(num_buyers)
        for t in self.trades:
            if t.resource is Resource.GOOD:
                out[t.buyer.index] += t.volume
        return out


@dataclass(frozen=True)
class FrustrationRecord:
    per_buyer: tuple[float, ...]
    market_index: int

    def __post_init__(self):
        if any(not (0.0 <= f <= 1.0) for f in self.per_buyer):
            raise ValueError("frustration entries must lie in [0, 1]")


def _water_level(claims: np.ndarray, estate: float) -> float:
    """Level ``lam`` such that ``sum(min(claims, lam)) == estate``.

    Requires ``0 <= estate <= claims.sum()``.
    """
    order = np.sort(claims)
    n = len(order)
    remaining = estate
    for i, c in enumerate(order):
        if remaining <= c * (n - i):
            return remaining / (n - i)
        remaining -= c
    return float(order[-1]) if n else 0.0


def cgd_allocate(total_volume: float, demands: Sequence[float]) -> np.ndarray:
    """Split ``total_volume`` among buyers by the contested garment (Talmud) rule.

    Claims up to half the total demand are served by equal awards capped at the
    half-claims; beyond that, losses are shared equally, capped at the
    half-claims. An estate larger than the total demand is capped at the demand.

    >>> cgd_allocate(2.0, [1.0, 3.0]).tolist()
    [0.5, 1.5]
    """
    d = np.asarray(demands, dtype=float).reshape(-1)
    if total_volume < 0 or not np.isfinite(total_volume):
        raise ValueError("total volume must be a finite non-negative number")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("demands must be finite and non-negative")
    total_claim = float(d.sum())
    if total_volume >= total_claim:
        return d.copy()
    half = d / 2.0
    if total_volume <= total_claim / 2.0:
        lam = _water_level(half, total_volume)
        return np.minimum(half, lam)
    lam = _water_level(half, total_claim - total_volume)
    return d - np.minimum(half, lam)


def frustration(rights: float, goods_bought: float) -> float:
    """Relative shortfall of Good bought against allocated Rights, in [0, 1]."""
    if rights < 0 or goods_bought < 0:
        raise ValueError("rights and goods bought must be non-negative")
    if rights <= TOL:
        return 0.0
    return max((rights - goods_bought) / rights, 0.0)


def price_of_anarchy(records: Sequence[FrustrationRecord], num_buyers: int) -> float:
    """Mean frustration over buyers and markets."""
    if len(records) == 0:
        raise ValueError("price of anarchy needs at least one market")
    if num_buyers <= 0:
        raise ValueError("num_buyers must be positive")
    total = sum(sum(r.per_buyer) for r in records)
    return total / (len(records) * num_buyers)

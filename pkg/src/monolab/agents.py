"""Baseline opponents: a uniform random-legal agent and a fixed-rule
heuristic agent. Both are deterministic given their seed and exist to
give the harness reproducible competition.
"""
from __future__ import annotations

import random
from typing import Any

from .board import KIND_PROPERTY
from .engine import (
    ACCEPT_TRADE,
    BUY_PROPERTY,
    DECLINE_BUY,
    END_PHASE,
    IMPROVE,
    MORTGAGE,
    PAY_JAIL_FINE,
    REJECT_TRADE,
    Agent,
    Move,
    StateView,
    TradeOffer,
)


class RandomAgent(Agent):
    """Uniformly samples among the offered legal moves."""

    def __init__(self, seat: int, seed: int = 0) -> None:
        self.seat = seat
        self.rng = random.Random(seed)

    def decide(self, view: StateView, legal: tuple[Move, ...]) -> Move:
        return legal[self.rng.randrange(len(legal))]

    def bid(self, view: StateView, square: int, min_next: float) -> Move:
        if min_next <= view.cash_of(self.seat) and self.rng.random() < 0.5:
            return Move.bid(min_next)
        return Move.pass_bid()

    def respond_trade(self, view: StateView, offer: TradeOffer) -> Move:
        return Move(ACCEPT_TRADE if self.rng.random() < 0.5 else REJECT_TRADE)


class SimpleBaselineAgent(Agent):
    """Fixed-rule opponent.

    Buys any property it can afford while keeping a cash reserve,
    improves its cheapest monopolized color first, never proposes trades,
    accepts a trade only when it receives strictly more face value, bids
    up to 75% of face price, and mortgages its cheapest property if its
    cash ever goes negative.
    """

    def __init__(
        self,
        seat: int,
        reserve: float = 150.0,
        bid_cap_fraction: float = 0.75,
    ) -> None:
        self.seat = seat
        self.reserve = reserve
        self.bid_cap_fraction = bid_cap_fraction

    def decide(self, view: StateView, legal: tuple[Move, ...]) -> Move:
        by_kind: dict[str, list[Move]] = {}
        for move in legal:
            by_kind.setdefault(move.kind, []).append(move)
        cash = view.cash_of(self.seat)

        if BUY_PROPERTY in by_kind:
            buy = by_kind[BUY_PROPERTY][0]
            if cash - buy.cost >= self.reserve:
                return buy
            return next(m for m in legal if m.kind == DECLINE_BUY)

        if PAY_JAIL_FINE in by_kind:
            return by_kind[PAY_JAIL_FINE][0]

        if cash < 0 and MORTGAGE in by_kind:
            board = view.board
            return min(by_kind[MORTGAGE], key=lambda m: board.squares[m.square].price)

        if IMPROVE in by_kind:
            board = view.board
            affordable = [
                m for m in by_kind[IMPROVE] if cash - m.cost >= self.reserve
            ]
            if affordable:
                return min(
                    affordable,
                    key=lambda m: (board.squares[m.square].house_cost, m.square),
                )

        return next(m for m in legal if m.kind == END_PHASE)

    def bid(self, view: StateView, square: int, min_next: float) -> Move:
        cap = view.board.squares[square].price * self.bid_cap_fraction
        if min_next <= cap and min_next <= view.cash_of(self.seat):
            return Move.bid(min_next)
        return Move.pass_bid()

    def respond_trade(self, view: StateView, offer: TradeOffer) -> Move:
        board = view.board
        received = board.squares[offer.give_square].price + max(offer.cash, 0.0)
        given = board.squares[offer.get_square].price + max(-offer.cash, 0.0)
        return Move(ACCEPT_TRADE if received > given else REJECT_TRADE)


def make_agent(name: str, seat: int, seed: int, params: dict[str, Any] | None = None) -> Agent:
    """Build an agent by registry name ("random", "simple", or "value")."""
    params = dict(params or {})
    if name == "random":
        return RandomAgent(seat, seed=seed)
    if name == "simple":
        return SimpleBaselineAgent(seat, **params)
    if name == "value":
        from .value_agent import ValueAgent

        return ValueAgent(seat, seed=seed, **params)
    raise ValueError(f"unknown agent name: {name!r}")

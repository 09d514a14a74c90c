"""Independent straight-line reference for the state evaluation function.

Deliberately un-optimized and structurally separate from the package:
landing probabilities come from exhaustive enumeration of dice-sum
sequences, and each term is computed directly from its definition. Used
by tests as the oracle the fast implementation must match.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

from monolab.board import KIND_PROPERTY, BoardSpec


@dataclass
class RefState:
    """Plain-data description of a game situation."""

    board: BoardSpec
    positions: dict[int, int]
    cash: dict[int, float]
    ownership: dict[int, int]
    improvements: dict[int, int] = field(default_factory=dict)
    mortgaged: set[int] = field(default_factory=set)


def dice_sum_outcomes(board: BoardSpec) -> list[tuple[int, float]]:
    """All (total, probability) pairs for one roll of every die."""
    outcomes = [(0, 1.0)]
    for die in board.dice.dice:
        outcomes = [
            (t + f, p * w)
            for t, p in outcomes
            for f, w in zip(die.faces, die.weights)
        ]
    merged: dict[int, float] = {}
    for t, p in outcomes:
        merged[t] = merged.get(t, 0.0) + p
    return sorted(merged.items())


def ref_landing_prob(board: BoardSpec, start: int, k: int) -> list[dict[int, float]]:
    """Turn-by-turn landing distributions via exhaustive sequence
    enumeration (turn index 1..k maps to list index 0..k-1)."""
    sums = dice_sum_outcomes(board)
    per_turn: list[dict[int, float]] = []
    for turn in range(1, k + 1):
        dist: dict[int, float] = {}
        for seq in itertools.product(sums, repeat=turn):
            pos = start
            prob = 1.0
            for total, p in seq:
                pos = (pos + total) % board.n
                prob *= p
            dist[pos] = dist.get(pos, 0.0) + prob
        per_turn.append(dist)
    return per_turn


def owned_by(state: RefState, player: int) -> list[int]:
    return sorted(sq for sq, owner in state.ownership.items() if owner == player)


def has_monopoly(state: RefState, player: int, color: str) -> bool:
    owned = sum(
        1
        for sq in state.board.colors[color]
        if state.ownership.get(sq) == player
    )
    return owned >= state.board.required_for_monopoly(color)


def current_rent(state: RefState, square: int, rents: dict | None = None) -> float:
    """Rent of an owned square at its current tier; 0 when mortgaged."""
    if square in state.mortgaged:
        return 0.0
    owner = state.ownership.get(square)
    if owner is None:
        return 0.0
    sq = state.board.squares[square]
    level = state.improvements.get(square, 0)
    tier = sq.tier_at(level, has_monopoly(state, owner, sq.color))
    if rents is not None:
        return rents[(square, tier)]
    return sq.rent_at(level, has_monopoly(state, owner, sq.color))


def ref_assets_value(state: RefState, agent: int) -> float:
    total = 0.0
    for sq in owned_by(state, agent):
        if sq in state.mortgaged:
            continue
        spec = state.board.squares[sq]
        total += spec.price
        total += state.improvements.get(sq, 0) * spec.house_cost
    return total


def ref_short_term_gain(
    state: RefState, agent: int, k: int, rents: dict | None = None
) -> float:
    """Sum over turns and opponents of expected rent received on the
    agent's squares minus expected rent paid on theirs."""
    board = state.board
    total = 0.0
    mine = owned_by(state, agent)
    my_landings = ref_landing_prob(board, state.positions[agent], k)
    for opponent in state.positions:
        if opponent == agent:
            continue
        their_landings = ref_landing_prob(board, state.positions[opponent], k)
        theirs = owned_by(state, opponent)
        for turn in range(k):
            for sq in mine:
                total += their_landings[turn].get(sq, 0.0) * current_rent(
                    state, sq, rents
                )
            for sq in theirs:
                total -= my_landings[turn].get(sq, 0.0) * current_rent(
                    state, sq, rents
                )
    return total


def ref_long_term_gain(
    state: RefState, agent: int, k_loops: int, rents: dict | None = None
) -> float:
    """Uniform landing rate of 1/E[dice sum] per square per loop."""
    expected_sum = sum(
        sum(f * w for f, w in zip(d.faces, d.weights))
        for d in state.board.dice.dice
    )
    if expected_sum == 0:
        raise ValueError("degenerate dice: expected sum is zero")
    q = 1.0 / expected_sum
    total = 0.0
    mine = owned_by(state, agent)
    for opponent in state.positions:
        if opponent == agent:
            continue
        theirs = owned_by(state, opponent)
        total += sum(q * current_rent(state, sq, rents) for sq in mine)
        total -= sum(q * current_rent(state, sq, rents) for sq in theirs)
    return k_loops * total


def ref_monopoly_gain(
    state: RefState,
    agent: int,
    k_loops: int,
    rents: dict | None = None,
    go_increment: float | None = None,
) -> float:
    """Best scaled potential rent over colors the agent has a stake in.

    Budget = cash + k * go bonus + long-term gain; spend it buying the
    color out at list price, then improving greedily (cheapest next,
    even build); scale the resulting color rent down by a factor of two
    per missing property.
    """
    board = state.board
    go = board.go_increment if go_increment is None else go_increment
    budget_base = (
        state.cash[agent]
        + k_loops * go
        + ref_long_term_gain(state, agent, k_loops, rents)
    )
    best = 0.0
    my_colors = sorted(
        {
            board.squares[sq].color
            for sq in owned_by(state, agent)
            if board.squares[sq].kind == KIND_PROPERTY
        }
    )
    for color in my_colors:
        members = sorted(board.colors[color])
        owned = [sq for sq in members if state.ownership.get(sq) == agent]
        budget = budget_base
        for sq in members:
            if state.ownership.get(sq) != agent:
                budget -= board.squares[sq].price
        levels = {sq: state.improvements.get(sq, 0) for sq in members}
        while True:
            candidates = [sq for sq in members if levels[sq] < board.squares[sq].max_level]
            if not candidates:
                break
            low = min(levels[sq] for sq in candidates)
            lowest = [sq for sq in candidates if levels[sq] == low]
            lowest.sort(key=lambda sq: (board.squares[sq].house_cost, sq))
            sq = lowest[0]
            if budget < board.squares[sq].house_cost:
                break
            budget -= board.squares[sq].house_cost
            levels[sq] += 1
        color_rent = 0.0
        for sq in members:
            spec = board.squares[sq]
            tier = spec.tier_at(levels[sq], True)
            if rents is not None:
                color_rent += rents[(sq, tier)]
            else:
                color_rent += spec.rent_at(levels[sq], True)
        scaled = color_rent / (2.0 ** (len(members) - len(owned)))
        best = max(best, scaled)
    return best


def ref_evaluate_state(
    state: RefState,
    agent: int,
    k_short: int = 5,
    k_loops: int = 5,
    rents: dict | None = None,
    go_increment: float | None = None,
) -> float:
    """Asset value + short-term gain + long-term gain + monopoly gain."""
    return (
        ref_assets_value(state, agent)
        + ref_short_term_gain(state, agent, k_short, rents)
        + ref_long_term_gain(state, agent, k_loops, rents)
        + ref_monopoly_gain(state, agent, k_loops, rents, go_increment)
    )

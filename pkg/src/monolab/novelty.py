"""Novelty specification and injection.

A novelty is one persistent change to the game configuration, applied
from a trigger game onward for the rest of a trial. Three classes are
supported:

* AN (attribute): a numeric board attribute changes — a rent tier, a
  price, a mortgage value, a tax, the Go bonus, the mortgage interest
  rate, or a card amount.
* RN (representation): squares are reordered, or a square moves to a
  different color group.
* CN (class/structure): the number of properties a color requires for a
  monopoly changes, or the dice change (add/remove a die, new faces,
  new weights).

Injection is pure: the input board is never mutated.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Any

from .board import (
    KIND_PROPERTY,
    KIND_TAX,
    BoardSpec,
    CardSpec,
    Die,
    DiceSpec,
    SquareSpec,
    validate_board,
)

CLASS_ATTRIBUTE = "AN"
CLASS_REPRESENTATION = "RN"
CLASS_STRUCTURE = "CN"

NOVELTY_CLASSES = (CLASS_STRUCTURE, CLASS_ATTRIBUTE, CLASS_REPRESENTATION)
DIFFICULTIES = ("easy", "medium", "hard")

# AN attribute kinds and their payload parameters.
AN_RENT = "rent"                 # square, tier, value
AN_PRICE = "price"               # square, value
AN_MORTGAGE_VALUE = "mortgage_value"  # square, value
AN_TAX = "tax"                   # square, value
AN_GO_INCREMENT = "go_increment"  # value
AN_MORTGAGE_RATE = "mortgage_rate"  # value
AN_CARD_AMOUNT = "card_amount"   # deck, index, value


class NoveltyError(ValueError):
    """The novelty payload does not apply to the target board."""


@dataclass(frozen=True)
class NoveltySpec:
    novelty_class: str
    difficulty: str
    trigger_game: int
    payload: dict[str, Any]

    def __post_init__(self) -> None:
        if self.novelty_class not in NOVELTY_CLASSES:
            raise NoveltyError(f"unknown novelty class {self.novelty_class!r}")
        if self.difficulty not in DIFFICULTIES:
            raise NoveltyError(f"unknown difficulty {self.difficulty!r}")
        if self.trigger_game < 0:
            raise NoveltyError("trigger_game must be >= 0")


def novelty_to_json_dict(novelty: NoveltySpec) -> dict[str, Any]:
    return {
        "class": novelty.novelty_class,
        "difficulty": novelty.difficulty,
        "trigger_game": novelty.trigger_game,
        "payload": novelty.payload,
    }


def novelty_from_json_dict(obj: dict[str, Any]) -> NoveltySpec:
    try:
        return NoveltySpec(
            novelty_class=obj["class"],
            difficulty=obj["difficulty"],
            trigger_game=int(obj["trigger_game"]),
            payload=dict(obj["payload"]),
        )
    except (KeyError, TypeError) as exc:
        raise NoveltyError(f"malformed novelty: {exc}") from exc


# ---------------------------------------------------------------------------
# Compatibility validation
# ---------------------------------------------------------------------------


def _require_property(board: BoardSpec, square: Any) -> int:
    if (
        not isinstance(square, int)
        or not 0 <= square < board.n
        or board.squares[square].kind != KIND_PROPERTY
    ):
        raise NoveltyError(f"unknown target: property square {square}")
    return square


def validate_novelty_compat(board: BoardSpec, novelty: NoveltySpec) -> None:
    """Check the novelty's target exists on this board; raise NoveltyError
    naming the target otherwise."""
    payload = novelty.payload
    cls = novelty.novelty_class

    if cls == CLASS_ATTRIBUTE:
        attr = payload.get("attribute")
        if attr == AN_RENT:
            sq = _require_property(board, payload.get("square"))
            tiers = dict(board.squares[sq].rent_tiers())
            if payload.get("tier") not in tiers:
                raise NoveltyError(
                    f"unknown target: rent tier {payload.get('tier')!r} on square {sq}"
                )
        elif attr in (AN_PRICE, AN_MORTGAGE_VALUE):
            _require_property(board, payload.get("square"))
        elif attr == AN_TAX:
            sq = payload.get("square")
            if (
                not isinstance(sq, int)
                or not 0 <= sq < board.n
                or board.squares[sq].kind != KIND_TAX
            ):
                raise NoveltyError(f"unknown target: tax square {sq}")
        elif attr in (AN_GO_INCREMENT, AN_MORTGAGE_RATE):
            pass
        elif attr == AN_CARD_AMOUNT:
            deck = board.chance_deck if payload.get("deck") == "chance" else (
                board.community_deck if payload.get("deck") == "community" else None
            )
            idx = payload.get("index")
            if deck is None or not isinstance(idx, int) or not 0 <= idx < len(deck):
                raise NoveltyError(
                    f"unknown target: card {payload.get('deck')}[{idx}]"
                )
            if deck[idx].amount is None:
                raise NoveltyError(f"unknown target: card {payload.get('deck')}[{idx}] has no amount")
        else:
            raise NoveltyError(f"unknown target: attribute {attr!r}")
        if not isinstance(payload.get("value"), (int, float)):
            raise NoveltyError("attribute novelty needs a numeric value")
        return

    if cls == CLASS_REPRESENTATION:
        if "order" in payload:
            order = payload["order"]
            if sorted(order) != list(range(board.n)):
                raise NoveltyError("unknown target: order is not a permutation")
            if order[0] != 0:
                raise NoveltyError("unknown target: permutation must keep Go at 0")
        elif "recolor" in payload:
            rec = payload["recolor"]
            _require_property(board, rec.get("square"))
            if not isinstance(rec.get("color"), str):
                raise NoveltyError("recolor needs a color name")
        else:
            raise NoveltyError("unknown target: RN payload")
        return

    # CN
    if "set_size" in payload:
        change = payload["set_size"]
        color = change.get("color")
        if color not in board.colors:
            raise NoveltyError(f"unknown target: color {color!r}")
        if not isinstance(change.get("required"), int) or change["required"] < 1:
            raise NoveltyError("set_size change needs required >= 1")
        return
    if "add_die" in payload:
        die = payload["add_die"]
        if not die.get("faces") or len(die["faces"]) != len(die.get("weights", ())):
            raise NoveltyError("add_die needs matching faces and weights")
        return
    if "remove_die" in payload:
        idx = payload["remove_die"]
        if not isinstance(idx, int) or not 0 <= idx < len(board.dice.dice):
            raise NoveltyError(f"unknown target: die {idx}")
        if len(board.dice.dice) == 1:
            raise NoveltyError("unknown target: cannot remove the only die")
        return
    if "die_faces" in payload:
        change = payload["die_faces"]
        idx = change.get("die")
        if not isinstance(idx, int) or not 0 <= idx < len(board.dice.dice):
            raise NoveltyError(f"unknown target: die {idx}")
        if not change.get("faces"):
            raise NoveltyError("die_faces needs a non-empty face list")
        return
    if "die_weights" in payload:
        change = payload["die_weights"]
        idx = change.get("die")
        if not isinstance(idx, int) or not 0 <= idx < len(board.dice.dice):
            raise NoveltyError(f"unknown target: die {idx}")
        weights = change.get("weights")
        if (
            not weights
            or len(weights) != len(board.dice.dice[idx].faces)
            or abs(sum(weights) - 1.0) > 1e-12
        ):
            raise NoveltyError("die_weights must match face count and sum to 1")
        return
    raise NoveltyError("unknown target: CN payload")


# ---------------------------------------------------------------------------
# Injection
# ---------------------------------------------------------------------------


def inject_novelty(board: BoardSpec, novelty: NoveltySpec) -> BoardSpec:
    """Return a new BoardSpec with the novelty applied."""
    validate_novelty_compat(board, novelty)
    payload = novelty.payload
    cls = novelty.novelty_class

    if cls == CLASS_ATTRIBUTE:
        mutated = _inject_attribute(board, payload)
    elif cls == CLASS_REPRESENTATION:
        if "order" in payload:
            squares = tuple(board.squares[i] for i in payload["order"])
            mutated = replace(board, squares=squares)
        else:
            rec = payload["recolor"]
            mutated = _replace_square(
                board,
                rec["square"],
                replace(board.squares[rec["square"]], color=rec["color"]),
            )
    else:
        mutated = _inject_structure(board, payload)

    validate_board(mutated)
    return mutated


def _replace_square(board: BoardSpec, index: int, square: SquareSpec) -> BoardSpec:
    squares = list(board.squares)
    squares[index] = square
    return replace(board, squares=tuple(squares))


def _inject_attribute(board: BoardSpec, payload: dict[str, Any]) -> BoardSpec:
    attr = payload["attribute"]
    value = float(payload["value"])
    if attr == AN_RENT:
        sq = board.squares[payload["square"]]
        tier = payload["tier"]
        if tier == "base":
            sq = replace(sq, base_rent=value)
        elif tier == "monopoly":
            sq = replace(sq, monopoly_rent=value)
        elif tier == "hotel":
            sq = replace(sq, hotel_rent=value)
        else:
            level = int(tier.split("_", 1)[1])
            rents = list(sq.house_rents)
            rents[level - 1] = value
            sq = replace(sq, house_rents=tuple(rents))
        return _replace_square(board, payload["square"], sq)
    if attr == AN_PRICE:
        sq = replace(board.squares[payload["square"]], price=value)
        return _replace_square(board, payload["square"], sq)
    if attr == AN_MORTGAGE_VALUE:
        sq = replace(board.squares[payload["square"]], mortgage_value=value)
        return _replace_square(board, payload["square"], sq)
    if attr == AN_TAX:
        sq = replace(board.squares[payload["square"]], tax_amount=value)
        return _replace_square(board, payload["square"], sq)
    if attr == AN_GO_INCREMENT:
        return replace(board, go_increment=value)
    if attr == AN_MORTGAGE_RATE:
        return replace(board, mortgage_interest_rate=value)
    # card amount
    deck_name = payload["deck"]
    deck = list(board.chance_deck if deck_name == "chance" else board.community_deck)
    deck[payload["index"]] = replace(deck[payload["index"]], amount=value)
    if deck_name == "chance":
        return replace(board, chance_deck=tuple(deck))
    return replace(board, community_deck=tuple(deck))


def _inject_structure(board: BoardSpec, payload: dict[str, Any]) -> BoardSpec:
    if "set_size" in payload:
        change = payload["set_size"]
        required = dict(board.monopoly_required)
        required[change["color"]] = change["required"]
        return replace(board, monopoly_required=tuple(sorted(required.items())))
    if "add_die" in payload:
        die = payload["add_die"]
        new = Die(
            faces=tuple(int(f) for f in die["faces"]),
            weights=tuple(float(w) for w in die["weights"]),
        )
        return replace(board, dice=DiceSpec(dice=board.dice.dice + (new,)))
    if "remove_die" in payload:
        dice = list(board.dice.dice)
        dice.pop(payload["remove_die"])
        return replace(board, dice=DiceSpec(dice=tuple(dice)))
    if "die_faces" in payload:
        change = payload["die_faces"]
        faces = tuple(int(f) for f in change["faces"])
        weights = change.get("weights")
        if weights is None:
            weights = [1.0 / len(faces)] * len(faces)
            weights[-1] = 1.0 - sum(weights[:-1])
        dice = list(board.dice.dice)
        dice[change["die"]] = Die(faces=faces, weights=tuple(float(w) for w in weights))
        return replace(board, dice=DiceSpec(dice=tuple(dice)))
    change = payload["die_weights"]
    dice = list(board.dice.dice)
    dice[change["die"]] = Die(
        faces=dice[change["die"]].faces,
        weights=tuple(float(w) for w in change["weights"]),
    )
    return replace(board, dice=DiceSpec(dice=tuple(dice)))


# ---------------------------------------------------------------------------
# Random generation (our documented stand-in for a hidden novelty source)
# ---------------------------------------------------------------------------

_AN_FACTORS = {"easy": 1.5, "medium": 3.0, "hard": 10.0}


def generate_novelty(
    board: BoardSpec,
    seed: int,
    games_per_trial: int,
    novelty_class: str | None = None,
    difficulty: str | None = None,
) -> NoveltySpec:
    """Deterministically generate one compatible novelty for the board.

    The trigger game is uniform over [1, games_per_trial) so that every
    trial has at least one pre-novelty game.
    """
    if games_per_trial < 2:
        raise NoveltyError("need at least 2 games per trial to place a novelty")
    rng = random.Random(seed)
    cls = novelty_class or rng.choice(NOVELTY_CLASSES)
    diff = difficulty or rng.choice(DIFFICULTIES)
    trigger = rng.randrange(1, games_per_trial)

    if cls == CLASS_ATTRIBUTE:
        payload = _generate_attribute(board, rng, diff)
    elif cls == CLASS_REPRESENTATION:
        payload = _generate_representation(board, rng, diff)
    else:
        payload = _generate_structure(board, rng, diff)

    novelty = NoveltySpec(
        novelty_class=cls, difficulty=diff, trigger_game=trigger, payload=payload
    )
    validate_novelty_compat(board, novelty)
    return novelty


def _generate_attribute(
    board: BoardSpec, rng: random.Random, difficulty: str
) -> dict[str, Any]:
    factor = _AN_FACTORS[difficulty]
    props = list(board.property_squares)
    taxes = [i for i, sq in enumerate(board.squares) if sq.kind == KIND_TAX]
    choices = ["rent", "price", "go_increment", "mortgage_rate"]
    if taxes:
        choices.append("tax")
    kind = rng.choice(choices)
    if kind == "rent":
        sq = rng.choice(props)
        tier, rent = rng.choice(board.squares[sq].rent_tiers())
        return {
            "attribute": AN_RENT,
            "square": sq,
            "tier": tier,
            "value": round(max(rent, 1.0) * factor, 2),
        }
    if kind == "price":
        sq = rng.choice(props)
        return {
            "attribute": AN_PRICE,
            "square": sq,
            "value": round(board.squares[sq].price * factor, 2),
        }
    if kind == "tax":
        sq = rng.choice(taxes)
        return {
            "attribute": AN_TAX,
            "square": sq,
            "value": round(board.squares[sq].tax_amount * factor, 2),
        }
    if kind == "go_increment":
        return {
            "attribute": AN_GO_INCREMENT,
            "value": round(board.go_increment / factor, 2),
        }
    return {
        "attribute": AN_MORTGAGE_RATE,
        "value": round(min(board.mortgage_interest_rate * factor, 0.95), 4),
    }


def _generate_representation(
    board: BoardSpec, rng: random.Random, difficulty: str
) -> dict[str, Any]:
    props = list(board.property_squares)
    if difficulty == "easy":
        a, b = rng.sample(props, 2)
        order = list(range(board.n))
        order[a], order[b] = order[b], order[a]
        return {"order": order}
    if difficulty == "medium":
        colors = sorted(board.colors)
        sq = rng.choice(props)
        others = [c for c in colors if c != board.squares[sq].color]
        return {"recolor": {"square": sq, "color": rng.choice(others)}}
    order = list(range(1, board.n))
    rng.shuffle(order)
    return {"order": [0] + order}


def _generate_structure(
    board: BoardSpec, rng: random.Random, difficulty: str
) -> dict[str, Any]:
    if difficulty == "easy":
        idx = rng.randrange(len(board.dice.dice))
        faces = board.dice.dice[idx].faces
        hot = rng.randrange(len(faces))
        rest = 0.3 / max(len(faces) - 1, 1)
        weights = [rest] * len(faces)
        weights[hot] = 1.0 - rest * (len(faces) - 1)
        return {"die_weights": {"die": idx, "weights": weights}}
    if difficulty == "medium":
        if rng.random() < 0.5:
            die = board.dice.dice[0]
            return {
                "add_die": {"faces": list(die.faces), "weights": list(die.weights)}
            }
        idx = rng.randrange(len(board.dice.dice))
        faces = list(board.dice.dice[idx].faces) + [max(board.dice.dice[idx].faces) + 1]
        weights = [1.0 / len(faces)] * len(faces)
        weights[-1] = 1.0 - sum(weights[:-1])
        return {"die_faces": {"die": idx, "faces": faces, "weights": weights}}
    if len(board.dice.dice) >= 2 and rng.random() < 0.5:
        return {"remove_die": rng.randrange(len(board.dice.dice))}
    colors = sorted(board.colors)
    color = rng.choice(colors)
    size = len(board.colors[color])
    required = max(1, size - 1) if size > 1 else size + 1
    return {"set_size": {"color": color, "required": required}}

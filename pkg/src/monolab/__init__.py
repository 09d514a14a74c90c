"""Monopoly simulation laboratory.

Rules engine with pluggable agents, a value-function agent with
bankruptcy guards, novelty injection and detection, and a seeded trial
harness with win-rate and detection metrics.
"""

from .board import (
    BoardSpec,
    BoardParseError,
    BoardValidationError,
    CardSpec,
    DiceSpec,
    Die,
    SquareSpec,
    dump_board_spec,
    load_board_spec,
    standard_board,
    tb8_board,
)
from .engine import (
    Agent,
    EngineRules,
    GameResult,
    GameState,
    IllegalMoveError,
    Move,
    StateView,
    TradeOffer,
    apply_move,
    legal_moves,
    play_game,
    resolve_bankruptcy,
    resolve_landing,
    roll_and_advance,
    run_auction,
)
from .agents import RandomAgent, SimpleBaselineAgent, make_agent
from .value_agent import (
    EvalState,
    ValueAgent,
    ValueParams,
    adapt_params,
    assets_value,
    choose_move,
    evaluate_state,
    landing_prob,
    long_term_gain,
    monopoly_gain,
    passes_guards,
    short_term_gain,
    simulate_move,
)
from .novelty import (
    NoveltyError,
    NoveltySpec,
    generate_novelty,
    inject_novelty,
    validate_novelty_compat,
)
from .detection import (
    AttributeTracker,
    DetectorConfig,
    DeviationEvent,
    DiceBeliefs,
    NoveltyDetector,
    NoveltyFlag,
    detect_dice_novelty,
    dice_map_estimate,
)
from .harness import (
    AgentSpec,
    MetricsReport,
    TrialConfig,
    TrialRecord,
    compute_metrics,
    replay_verify,
    run_suite,
    run_trial,
)

__version__ = "0.1.0"

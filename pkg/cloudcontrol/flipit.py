"""Closed-form FlipIt analysis for periodic strategies.

Defender and attacker renew or compromise the cloud at fixed frequencies with
random phases. The time-averaged payoffs, the five-case Nash equilibrium and
the resulting share of time the attacker controls the cloud are all closed
form.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class Player(str, Enum):
    DEFENDER = "defender"
    ATTACKER = "attacker"

    @property
    def opponent(self) -> "Player":
        return Player.ATTACKER if self is Player.DEFENDER else Player.DEFENDER


class NashCase(Enum):
    """The five equilibrium regimes, numbered as in the analysis."""

    DEFENDER_FAVORED = 1  # α_D/ū_D < α_A/ū_A
    ATTACKER_FAVORED = 2  # α_D/ū_D > α_A/ū_A
    BALANCED = 3  # α_D/ū_D = α_A/ū_A
    NO_ATTACK = 4  # ū_A ≤ 0
    SINGLE_ATTACK = 5  # ū_A > 0 ≥ ū_D


@dataclass(frozen=True)
class FlipItParams:
    """Move costs and the signaling-game values of controlling the cloud."""

    move_cost_defender: float
    move_cost_attacker: float
    value_defender: float
    value_attacker: float

    def __post_init__(self):
        for name in ("move_cost_defender", "move_cost_attacker"):
            cost = getattr(self, name)
            if not (cost > 0 and math.isfinite(cost)):
                raise ValueError(f"{name} must be strictly positive and finite, got {cost}")
        for name in ("value_defender", "value_attacker"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def move_cost(self, player: Player) -> float:
        return self.move_cost_defender if player is Player.DEFENDER else self.move_cost_attacker

    def value(self, player: Player) -> float:
        return self.value_defender if player is Player.DEFENDER else self.value_attacker


@dataclass(frozen=True)
class PeriodicProfile:
    """Move frequencies; ``attacker_single_move`` encodes one attacker move right after t = 0."""

    freq_defender: float
    freq_attacker: float
    attacker_single_move: bool = False

    def __post_init__(self):
        for name in ("freq_defender", "freq_attacker"):
            freq = getattr(self, name)
            if not (freq >= 0 and math.isfinite(freq)):
                raise ValueError(f"{name} must be non-negative and finite, got {freq}")
        if self.attacker_single_move and self.freq_attacker != 0:
            raise ValueError("attacker_single_move requires freq_attacker == 0")

    def freq(self, player: Player) -> float:
        return self.freq_defender if player is Player.DEFENDER else self.freq_attacker


@dataclass(frozen=True)
class FlipItEquilibrium:
    profile: PeriodicProfile
    control_ratio: float
    payoff_defender: float
    payoff_attacker: float
    case: NashCase


def control_ratio(f_d: float, f_a: float, attacker_single_move: bool = False) -> float:
    """Long-run share of time the attacker controls the cloud."""
    if f_a == 0:
        return 1.0 if attacker_single_move and f_d == 0 else 0.0
    if f_d >= f_a:
        return f_a / (2.0 * f_d)
    return 1.0 - f_d / (2.0 * f_a)


def flipit_payoffs(
    f_d: float,
    f_a: float,
    params: FlipItParams,
    attacker_single_move: bool = False,
) -> Tuple[float, float]:
    """Time-averaged payoffs (ū_D^F, ū_A^F) of a periodic profile.

    A single attacker move keeps the cloud forever when the defender never
    renews and is undone by the first renewal otherwise.
    """
    if f_d < 0 or f_a < 0:
        raise ValueError("frequencies must be non-negative")
    v_d, v_a = params.value_defender, params.value_attacker
    c_d, c_a = params.move_cost_defender, params.move_cost_attacker

    if f_a == 0:
        if attacker_single_move and f_d == 0:
            return (0.0, v_a)
        return (v_d - c_d * f_d, 0.0)
    if f_d >= f_a:
        share = f_a / (2.0 * f_d)
        return (v_d * (1.0 - share) - c_d * f_d, v_a * share - c_a * f_a)
    share = f_d / (2.0 * f_a)
    return (v_d * share - c_d * f_d, v_a * (1.0 - share) - c_a * f_a)


def nash_equilibrium(params: FlipItParams) -> FlipItEquilibrium:
    """Periodic Nash equilibrium of the FlipIt game."""
    v_d, v_a = params.value_defender, params.value_attacker
    c_d, c_a = params.move_cost_defender, params.move_cost_attacker
    single_move = False

    if v_a <= 0:
        case = NashCase.NO_ATTACK
        f_d = f_a = 0.0
    elif v_d <= 0:
        case = NashCase.SINGLE_ATTACK
        f_d = f_a = 0.0
        single_move = True
    else:
        # α_D/ū_D vs α_A/ū_A, cross-multiplied since both values are positive
        lhs, rhs = c_d * v_a, c_a * v_d
        if lhs < rhs:
            case = NashCase.DEFENDER_FAVORED
            f_d = v_a / (2.0 * c_a)
            f_a = c_d * v_a * v_a / (2.0 * c_a * c_a * v_d)
        elif lhs > rhs:
            case = NashCase.ATTACKER_FAVORED
            f_d = c_a * v_d * v_d / (2.0 * c_d * c_d * v_a)
            f_a = v_d / (2.0 * c_d)
        else:
            case = NashCase.BALANCED
            f_d = v_a / (2.0 * c_a)
            f_a = v_d / (2.0 * c_d)

    profile = PeriodicProfile(freq_defender=f_d, freq_attacker=f_a, attacker_single_move=single_move)
    payoff_d, payoff_a = flipit_payoffs(f_d, f_a, params, attacker_single_move=single_move)
    return FlipItEquilibrium(
        profile=profile,
        control_ratio=control_ratio(f_d, f_a, single_move),
        payoff_defender=payoff_d,
        payoff_attacker=payoff_a,
        case=case,
    )


def t_f(
    value_defender: float,
    value_attacker: float,
    move_cost_defender: float,
    move_cost_attacker: float,
) -> float:
    """Equilibrium control ratio for a pair of signaling-game values."""
    params = FlipItParams(
        move_cost_defender=move_cost_defender,
        move_cost_attacker=move_cost_attacker,
        value_defender=value_defender,
        value_attacker=value_attacker,
    )
    return nash_equilibrium(params).control_ratio


def value_ratio(value_defender: float, value_attacker: float) -> float:
    """ū_A/ū_D, mapped onto [0, +inf] by the FlipIt regimes.

    0 when ū_A ≤ 0 (no attack), +inf when ū_D ≤ 0 < ū_A (single attack),
    so the control ratio depends on the values only through this number.
    """
    if value_attacker <= 0:
        return 0.0
    if value_defender <= 0:
        return math.inf
    return value_attacker / value_defender


def payoff_curve(
    side: Player,
    opponent_freq: float,
    params: FlipItParams,
    grid: Sequence[float],
    opponent_single_move: bool = False,
) -> np.ndarray:
    """Payoff of ``side`` for every frequency in ``grid`` against a fixed opponent."""
    f = np.asarray(grid, dtype=float)
    if np.any(f < 0):
        raise ValueError("grid frequencies must be non-negative")
    value = params.value(side)
    cost = params.move_cost(side)
    g = float(opponent_freq)

    if side is Player.DEFENDER:
        if g == 0:
            if opponent_single_move:
                return np.where(f == 0, 0.0, value - cost * f)
            return value - cost * f
        with np.errstate(divide="ignore", invalid="ignore"):
            ahead = value * (1.0 - g / (2.0 * f)) - cost * f
        behind = value * f / (2.0 * g) - cost * f
        return np.where(f >= g, ahead, behind)

    # attacker against a defender moving at g
    with np.errstate(divide="ignore", invalid="ignore"):
        behind = value * f / (2.0 * g) - cost * f if g > 0 else np.zeros_like(f)
        ahead = value * (1.0 - g / (2.0 * f)) - cost * f
    curve = np.where(g >= f, behind, ahead)
    return np.where(f == 0, 0.0, curve)


def best_response_frequency(
    opponent_freq: float,
    side: Player,
    params: FlipItParams,
    search_grid: Sequence[float],
    opponent_single_move: bool = False,
) -> float:
    """Grid frequency maximizing ``side``'s payoff against ``opponent_freq``.

    Ties go to the lowest frequency.
    """
    grid = np.asarray(search_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("search_grid must not be empty")
    curve = payoff_curve(side, opponent_freq, params, grid, opponent_single_move)
    return float(grid[int(np.argmax(curve))])

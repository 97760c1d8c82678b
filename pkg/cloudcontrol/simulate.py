"""Monte Carlo replay of periodic FlipIt, with the signaling game on top.

Each replication draws uniformly random phases, merges both players' move
times into one event-sorted timeline and measures ownership exactly from
interval lengths. The CloudControl replay additionally samples messages and
trust decisions at regular decision epochs.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .flipit import FlipItParams, PeriodicProfile, Player
from .gestalt import CloudControlGame, GestaltSolution
from .signaling import MESSAGES, Action, CloudType, Message

logger = logging.getLogger(__name__)

DEFENDER, ATTACKER = 0, 1


@dataclass(frozen=True)
class SimulationConfig:
    """Horizon, replications and seed of a Monte Carlo run.

    ``params`` prices ownership and moves; ``game`` is needed only for the
    CloudControl replay.
    """

    horizon: float
    replications: int
    seed: int
    profile: PeriodicProfile
    params: FlipItParams
    game: Optional[CloudControlGame] = None
    epoch_rate: float = 1.0
    tie_winner: Player = Player.DEFENDER

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not self.epoch_rate > 0:
            raise ValueError("epoch_rate must be positive")

        periods = [1.0 / f for f in (self.profile.freq_defender, self.profile.freq_attacker) if f > 0]
        if periods and self.horizon < 10 * max(periods):
            logger.warning(
                f"Horizon {self.horizon:g} is short for the longest period {max(periods):g}; "
                "time averages will be noisy"
            )


@dataclass(frozen=True)
class SimulationReport:
    empirical_p: float
    empirical_control: Tuple[float, float]
    empirical_move_rates: Tuple[float, float]
    empirical_payoffs: Tuple[float, float, Optional[float]]
    standard_errors: Dict[str, float] = field(default_factory=dict)
    replications: int = 0
    horizon: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Timeline:
    """Merged move events of one replication, sorted by time."""

    times: np.ndarray
    movers: np.ndarray
    horizon: float

    def moves(self, player: Player) -> int:
        code = DEFENDER if player is Player.DEFENDER else ATTACKER
        return int(np.count_nonzero(self.movers == code))


def _periodic_times(freq: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    if freq <= 0:
        return np.empty(0)
    period = 1.0 / freq
    phase = rng.uniform(0.0, period)
    count = max(0, math.ceil((horizon - phase) * freq))
    times = phase + np.arange(count) / freq
    return times[times < horizon]


def build_timeline(
    profile: PeriodicProfile,
    horizon: float,
    rng: np.random.Generator,
    tie_winner: Player = Player.DEFENDER,
) -> Timeline:
    """Draw phases and merge both players' moves into one timeline.

    At equal times the tie winner's move is ordered last, so it holds the
    cloud afterwards.
    """
    defender_times = _periodic_times(profile.freq_defender, horizon, rng)
    attacker_times = _periodic_times(profile.freq_attacker, horizon, rng)
    if profile.attacker_single_move:
        attacker_times = np.zeros(1)

    times = np.concatenate([defender_times, attacker_times])
    movers = np.concatenate(
        [
            np.full(defender_times.size, DEFENDER, dtype=np.int8),
            np.full(attacker_times.size, ATTACKER, dtype=np.int8),
        ]
    )
    winner = DEFENDER if tie_winner is Player.DEFENDER else ATTACKER
    order = np.lexsort((movers == winner, times))
    return Timeline(times=times[order], movers=movers[order], horizon=horizon)


def owners_at(timeline: Timeline, times: np.ndarray) -> np.ndarray:
    """Owner code at each query time; the defender owns the cloud before the first move."""
    index = np.searchsorted(timeline.times, times, side="right") - 1
    owners = np.full(index.shape, DEFENDER, dtype=np.int8)
    moved = index >= 0
    owners[moved] = timeline.movers[index[moved]]
    return owners


def attacker_share(timeline: Timeline) -> float:
    """Exact fraction of [0, horizon) owned by the attacker."""
    if timeline.times.size == 0:
        return 0.0
    ends = np.append(timeline.times[1:], timeline.horizon)
    durations = ends - timeline.times
    owned = durations[timeline.movers == ATTACKER]
    return math.fsum(owned.tolist()) / timeline.horizon


def _replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    mean = math.fsum(values.tolist()) / values.size
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


def _run(config: SimulationConfig, overlay=None) -> SimulationReport:
    n = config.replications
    w_a = np.empty(n)
    z_d = np.empty(n)
    z_a = np.empty(n)
    receiver = np.empty(n) if overlay is not None else None
    signal_d = np.zeros(n)
    signal_a = np.zeros(n)

    for rep in range(n):
        rng = _replication_rng(config.seed, rep)
        timeline = build_timeline(config.profile, config.horizon, rng, config.tie_winner)
        w_a[rep] = attacker_share(timeline)
        z_d[rep] = timeline.moves(Player.DEFENDER) / config.horizon
        z_a[rep] = timeline.moves(Player.ATTACKER) / config.horizon
        if overlay is not None:
            signal_d[rep], signal_a[rep], receiver[rep] = overlay(timeline, rng)

    w_d = 1.0 - w_a
    if overlay is None:
        payoff_d = config.params.value_defender * w_d - config.params.move_cost_defender * z_d
        payoff_a = config.params.value_attacker * w_a - config.params.move_cost_attacker * z_a
    else:
        payoff_d = signal_d - config.params.move_cost_defender * z_d
        payoff_a = signal_a - config.params.move_cost_attacker * z_a

    p_mean, p_se = _mean_and_se(w_a)
    zd_mean, zd_se = _mean_and_se(z_d)
    za_mean, za_se = _mean_and_se(z_a)
    ud_mean, ud_se = _mean_and_se(payoff_d)
    ua_mean, ua_se = _mean_and_se(payoff_a)
    errors = {
        "empirical_p": p_se,
        "move_rate_defender": zd_se,
        "move_rate_attacker": za_se,
        "payoff_defender": ud_se,
        "payoff_attacker": ua_se,
    }
    ur_mean: Optional[float] = None
    if receiver is not None:
        ur_mean, errors["payoff_receiver"] = _mean_and_se(receiver)

    report = SimulationReport(
        empirical_p=p_mean,
        empirical_control=(1.0 - p_mean, p_mean),
        empirical_move_rates=(zd_mean, za_mean),
        empirical_payoffs=(ud_mean, ua_mean, ur_mean),
        standard_errors=errors,
        replications=n,
        horizon=config.horizon,
        seed=config.seed,
    )
    logger.info(
        f"Simulated {n} replications over horizon {config.horizon:g}: "
        f"p={p_mean:.6f} (se {p_se:.2e})"
    )
    return report


def simulate_flipit(config: SimulationConfig) -> SimulationReport:
    """Empirical control ratio, move rates and FlipIt payoffs of the configured profile."""
    return _run(config)


def simulate_cloudcontrol(config: SimulationConfig, solution: GestaltSolution) -> SimulationReport:
    """Replay FlipIt at the solution's equilibrium with the signaling game on top.

    At every decision epoch k / epoch_rate the current owner sends a message
    drawn from its equilibrium strategy and the receiver responds. Sender
    payoffs are the per-epoch signaling payoffs earned while in control,
    averaged over epochs, minus move costs.
    """
    if not solution.certified:
        raise ValueError("simulate_cloudcontrol requires a certified Gestalt solution")
    if config.game is None:
        raise ValueError("simulate_cloudcontrol requires config.game")

    u = config.game.signaling
    pbe = solution.pbe
    d, a = solution.utilities
    config = replace(
        config,
        profile=solution.flip.profile,
        params=config.game.flipit_params(d, a),
    )

    epochs = np.arange(math.ceil(config.horizon * config.epoch_rate)) / config.epoch_rate
    epochs = epochs[epochs < config.horizon]
    if epochs.size == 0:
        raise ValueError("horizon too short for a single decision epoch")

    types = {DEFENDER: CloudType.DEFENDER, ATTACKER: CloudType.ATTACKER}
    prob_high = np.array([pbe.sender_strategy(types[code]).prob_high for code in (DEFENDER, ATTACKER)])
    trust_prob = np.array([pbe.receiver_strategy.trust(m) for m in MESSAGES])
    actions = (Action.TRUST, Action.NOT_TRUST)

    # Payoff lookups indexed [owner, message, action]; message 0 = HIGH, action 0 = TRUST
    sender_table = np.array(
        [[[u.sender(types[o], m, act) for act in actions] for m in MESSAGES] for o in (0, 1)]
    )
    receiver_table = np.array(
        [
            [[u.receiver_payoff(types[o], m, act) for act in actions] for m in MESSAGES]
            for o in (0, 1)
        ]
    )
    assert MESSAGES[0] is Message.HIGH

    def overlay(timeline: Timeline, rng: np.random.Generator):
        owners = owners_at(timeline, epochs)
        message = np.where(rng.random(epochs.size) < prob_high[owners], 0, 1)
        action = np.where(rng.random(epochs.size) < trust_prob[message], 0, 1)
        sender = sender_table[owners, message, action]
        n_epochs = epochs.size
        defender_total = math.fsum(sender[owners == DEFENDER].tolist()) / n_epochs
        attacker_total = math.fsum(sender[owners == ATTACKER].tolist()) / n_epochs
        receiver_mean = math.fsum(receiver_table[owners, message, action].tolist()) / n_epochs
        return defender_total, attacker_total, receiver_mean

    return _run(config, overlay)

"""Cloud-device signaling game.

A cloud of private type (attacker-controlled or defender-controlled) sends a
high- or low-risk message; the device trusts or rejects it based on a
posterior belief. This module enumerates the pure-strategy perfect Bayesian
equilibria, classifies the trust-benefit regions and exposes the map from
the prior to the selected equilibrium sender utilities.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .config import DEFAULT_ZERO_TOLERANCE
from .error_handling import AssumptionViolationError, NoSelectionError

logger = logging.getLogger(__name__)


class CloudType(str, Enum):
    """Private type of the cloud."""

    ATTACKER = "attacker"
    DEFENDER = "defender"


class Message(str, Enum):
    """Risk level of the command sent to the device."""

    HIGH = "high"
    LOW = "low"

    @property
    def other(self) -> "Message":
        return Message.LOW if self is Message.HIGH else Message.HIGH


class Action(str, Enum):
    """Device response to a message."""

    TRUST = "trust"
    NOT_TRUST = "not_trust"


MESSAGES: Tuple[Message, Message] = (Message.HIGH, Message.LOW)
ACTIONS: Tuple[Action, Action] = (Action.TRUST, Action.NOT_TRUST)
CLOUD_TYPES: Tuple[CloudType, CloudType] = (CloudType.ATTACKER, CloudType.DEFENDER)


class Assumption(str, Enum):
    """Standing assumptions on the utility table, all strict."""

    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"

    @property
    def description(self) -> str:
        return _ASSUMPTION_TEXT[self]


_ASSUMPTION_TEXT = {
    Assumption.A1: "receiver prefers to trust a low-risk message from the defender",
    Assumption.A2: "receiver prefers to reject a high-risk message from the attacker",
    Assumption.A3: "each sender prefers any trusted message to any rejected message",
    Assumption.A4: "attacker prefers a trusted high-risk message to a trusted low-risk one",
}


class EquilibriumId(Enum):
    """Pure-strategy equilibrium families. There is no number 4."""

    EQ1 = 1
    EQ2 = 2
    EQ3 = 3
    EQ5 = 5
    EQ6 = 6
    EQ7 = 7
    EQ8 = 8

    @property
    def label(self) -> str:
        return f"Equilibrium #{self.value}"

    @property
    def description(self) -> str:
        return _EQUILIBRIUM_TEXT[self]


_EQUILIBRIUM_TEXT = {
    EquilibriumId.EQ1: "pool on low, receiver rejects",
    EquilibriumId.EQ2: "separate (defender high, attacker low), receiver rejects both",
    EquilibriumId.EQ3: "pool on low, receiver trusts, belief rejects high",
    EquilibriumId.EQ5: "pool on low, receiver trusts, any off-path belief",
    EquilibriumId.EQ6: "pool on high, receiver rejects",
    EquilibriumId.EQ7: "pool on high, receiver trusts, belief rejects low",
    EquilibriumId.EQ8: "pool on high, receiver trusts, any off-path belief",
}


class Quadrant(str, Enum):
    """Region of the (TB_L, TB_H) plane."""

    I = "I"  # noqa: E741
    II = "II"
    III = "III"
    IV = "IV"


class SelectionPolicy(str, Enum):
    """How the prior-to-utility map picks one equilibrium."""

    PAPER = "paper"
    ENUMERATE = "enumerate"


SenderTable = Mapping[Tuple[Message, Action], float]
ReceiverTable = Mapping[Tuple[CloudType, Message, Action], float]


def _freeze_table(table: Mapping[Any, Any], keys: Iterable[Any], name: str) -> Mapping[Any, float]:
    frozen: Dict[Any, float] = {}
    for key in keys:
        if key not in table:
            raise ValueError(f"{name} table is missing entry {_key_label(key)}")
        value = float(table[key])
        if not math.isfinite(value):
            raise ValueError(f"{name} table entry {_key_label(key)} is not finite")
        frozen[key] = value
    extra = set(table) - set(frozen)
    if extra:
        raise ValueError(f"{name} table has unknown entries: {sorted(map(str, extra))}")
    return MappingProxyType(frozen)


def _key_label(key: Any) -> str:
    return "/".join(part.value for part in key)


_SENDER_KEYS = [(m, a) for m in MESSAGES for a in ACTIONS]
_RECEIVER_KEYS = [(t, m, a) for t in CLOUD_TYPES for m in MESSAGES for a in ACTIONS]


@dataclass(frozen=True)
class SignalingUtilities:
    """Payoff tables u_R(type, message, action), u_A(message, action), u_D(message, action)."""

    receiver: ReceiverTable
    attacker: SenderTable
    defender: SenderTable

    def __post_init__(self):
        object.__setattr__(self, "receiver", _freeze_table(self.receiver, _RECEIVER_KEYS, "receiver"))
        object.__setattr__(self, "attacker", _freeze_table(self.attacker, _SENDER_KEYS, "attacker"))
        object.__setattr__(self, "defender", _freeze_table(self.defender, _SENDER_KEYS, "defender"))

    @classmethod
    def from_nested(cls, data: Mapping[str, Any]) -> "SignalingUtilities":
        """Build from nested mappings keyed by enum values.

        ``data["receiver"][type][message][action]`` and
        ``data["attacker" | "defender"][message][action]``.
        """
        receiver = {
            (t, m, a): data["receiver"][t.value][m.value][a.value] for t, m, a in _RECEIVER_KEYS
        }
        attacker = {(m, a): data["attacker"][m.value][a.value] for m, a in _SENDER_KEYS}
        defender = {(m, a): data["defender"][m.value][a.value] for m, a in _SENDER_KEYS}
        return cls(receiver=receiver, attacker=attacker, defender=defender)

    def to_nested(self) -> Dict[str, Any]:
        """Inverse of from_nested."""
        receiver: Dict[str, Any] = {}
        for (t, m, a), value in self.receiver.items():
            receiver.setdefault(t.value, {}).setdefault(m.value, {})[a.value] = value
        result: Dict[str, Any] = {"receiver": receiver}
        for name, table in (("attacker", self.attacker), ("defender", self.defender)):
            nested: Dict[str, Any] = {}
            for (m, a), value in table.items():
                nested.setdefault(m.value, {})[a.value] = value
            result[name] = nested
        return result

    def sender_table(self, cloud_type: CloudType) -> SenderTable:
        return self.attacker if cloud_type is CloudType.ATTACKER else self.defender

    def sender(self, cloud_type: CloudType, message: Message, action: Action) -> float:
        return self.sender_table(cloud_type)[(message, action)]

    def receiver_payoff(self, cloud_type: CloudType, message: Message, action: Action) -> float:
        return self.receiver[(cloud_type, message, action)]


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SenderStrategy:
    """Probability of sending the high-risk message."""

    prob_high: float

    def __post_init__(self):
        _check_unit("prob_high", self.prob_high)

    @classmethod
    def pure(cls, message: Message) -> "SenderStrategy":
        return cls(prob_high=1.0 if message is Message.HIGH else 0.0)

    def prob(self, message: Message) -> float:
        return self.prob_high if message is Message.HIGH else 1.0 - self.prob_high

    @property
    def pure_message(self) -> Optional[Message]:
        if self.prob_high == 1.0:
            return Message.HIGH
        if self.prob_high == 0.0:
            return Message.LOW
        return None


@dataclass(frozen=True)
class ReceiverStrategy:
    """Probability of trusting each message."""

    trust_given_high: float
    trust_given_low: float

    def __post_init__(self):
        _check_unit("trust_given_high", self.trust_given_high)
        _check_unit("trust_given_low", self.trust_given_low)

    @classmethod
    def from_actions(cls, high: Action, low: Action) -> "ReceiverStrategy":
        return cls(
            trust_given_high=1.0 if high is Action.TRUST else 0.0,
            trust_given_low=1.0 if low is Action.TRUST else 0.0,
        )

    def trust(self, message: Message) -> float:
        return self.trust_given_high if message is Message.HIGH else self.trust_given_low

    def prob(self, action: Action, message: Message) -> float:
        trust = self.trust(message)
        return trust if action is Action.TRUST else 1.0 - trust

    def pure_action(self, message: Message) -> Optional[Action]:
        trust = self.trust(message)
        if trust == 1.0:
            return Action.TRUST
        if trust == 0.0:
            return Action.NOT_TRUST
        return None


@dataclass(frozen=True)
class Belief:
    """Posterior probability that the sender is the attacker, per message."""

    attacker_given_high: float
    attacker_given_low: float

    def __post_init__(self):
        _check_unit("attacker_given_high", self.attacker_given_high)
        _check_unit("attacker_given_low", self.attacker_given_low)

    def attacker(self, message: Message) -> float:
        return self.attacker_given_high if message is Message.HIGH else self.attacker_given_low

    def prob(self, cloud_type: CloudType, message: Message) -> float:
        mu = self.attacker(message)
        return mu if cloud_type is CloudType.ATTACKER else 1.0 - mu

    def with_message(self, message: Message, value: float) -> "Belief":
        if message is Message.HIGH:
            return Belief(attacker_given_high=value, attacker_given_low=self.attacker_given_low)
        return Belief(attacker_given_high=self.attacker_given_high, attacker_given_low=value)


ADVERSARIAL_BELIEF = Belief(attacker_given_high=1.0, attacker_given_low=1.0)


@dataclass(frozen=True)
class TrustBenefits:
    """Receiver's expected gain from trusting over rejecting each message at a prior."""

    tb_high: float
    tb_low: float

    def for_message(self, message: Message) -> float:
        return self.tb_high if message is Message.HIGH else self.tb_low


@dataclass(frozen=True)
class QuadrantClassification:
    """Quadrant of a trust-benefit point with axis flags.

    Values within the zero tolerance count as non-negative, so an axis point
    is assigned to the quadrant on its trusting side.
    """

    quadrant: Quadrant
    on_high_axis: bool
    on_low_axis: bool

    @property
    def on_boundary(self) -> bool:
        return self.on_high_axis or self.on_low_axis

    @property
    def adjacent(self) -> frozenset:
        """Every quadrant whose closure contains the point."""
        low_signs = {self.quadrant in (Quadrant.I, Quadrant.IV)}
        high_signs = {self.quadrant in (Quadrant.I, Quadrant.II)}
        if self.on_low_axis:
            low_signs = {True, False}
        if self.on_high_axis:
            high_signs = {True, False}
        return frozenset(_QUADRANT_BY_SIGN[(lo, hi)] for lo in low_signs for hi in high_signs)

    @property
    def label(self) -> str:
        if not self.on_boundary:
            return self.quadrant.value
        return "/".join(q.value for q in sorted(self.adjacent, key=_QUADRANT_ORDER.index))


_QUADRANT_ORDER = [Quadrant.I, Quadrant.II, Quadrant.III, Quadrant.IV]
_QUADRANT_BY_SIGN = {
    (True, True): Quadrant.I,
    (False, True): Quadrant.II,
    (False, False): Quadrant.III,
    (True, False): Quadrant.IV,
}


@dataclass(frozen=True)
class EquilibriumUtilities:
    """Expected utilities of the three players at an equilibrium."""

    defender: float
    attacker: float
    receiver: float

    @property
    def senders(self) -> Tuple[float, float]:
        return (self.defender, self.attacker)


@dataclass(frozen=True)
class PBEProfile:
    """A perfect Bayesian equilibrium of the signaling game."""

    equilibrium_id: EquilibriumId
    defender_strategy: SenderStrategy
    attacker_strategy: SenderStrategy
    receiver_strategy: ReceiverStrategy
    belief: Belief
    utilities: EquilibriumUtilities
    prior: float
    belief_constrained: bool = False

    def sender_strategy(self, cloud_type: CloudType) -> SenderStrategy:
        if cloud_type is CloudType.ATTACKER:
            return self.attacker_strategy
        return self.defender_strategy

    @property
    def is_pooling(self) -> bool:
        return self.defender_strategy == self.attacker_strategy

    @property
    def pooled_message(self) -> Optional[Message]:
        return self.defender_strategy.pure_message if self.is_pooling else None

    @property
    def off_path_messages(self) -> Tuple[Message, ...]:
        return tuple(
            m
            for m in MESSAGES
            if self.defender_strategy.prob(m) == 0.0 and self.attacker_strategy.prob(m) == 0.0
        )


# --- Assumptions ---


def validate_assumptions(u: SignalingUtilities) -> List[Assumption]:
    """Return the assumptions A1-A4 that the table violates (empty when all hold)."""
    violations: List[Assumption] = []
    r = u.receiver_payoff

    if not r(CloudType.DEFENDER, Message.LOW, Action.TRUST) > r(
        CloudType.DEFENDER, Message.LOW, Action.NOT_TRUST
    ):
        violations.append(Assumption.A1)

    if not r(CloudType.ATTACKER, Message.HIGH, Action.TRUST) < r(
        CloudType.ATTACKER, Message.HIGH, Action.NOT_TRUST
    ):
        violations.append(Assumption.A2)

    a3_holds = all(
        u.sender(x, m, Action.TRUST) > u.sender(x, m_other, Action.NOT_TRUST)
        for x in CLOUD_TYPES
        for m in MESSAGES
        for m_other in MESSAGES
    )
    if not a3_holds:
        violations.append(Assumption.A3)

    if not u.attacker[(Message.HIGH, Action.TRUST)] > u.attacker[(Message.LOW, Action.TRUST)]:
        violations.append(Assumption.A4)

    return violations


def require_assumptions(u: SignalingUtilities) -> None:
    """Raise AssumptionViolationError unless A1-A4 all hold."""
    violations = validate_assumptions(u)
    if violations:
        labels = [v.value for v in violations]
        raise AssumptionViolationError(
            f"Utility table violates {', '.join(labels)}",
            violations=labels,
        )


# --- Expected utilities and beliefs ---


def expected_sender_utility(
    receiver: ReceiverStrategy, sender: SenderStrategy, u_x: SenderTable
) -> float:
    """Sender's expected utility: sum over messages and actions of u_X(m,a)·σ_R(a|m)·σ_X(m)."""
    return math.fsum(
        u_x[(m, a)] * receiver.prob(a, m) * sender.prob(m) for m in MESSAGES for a in ACTIONS
    )


def expected_receiver_utility(
    receiver: ReceiverStrategy, message: Message, belief: Belief, u_r: ReceiverTable
) -> float:
    """Receiver's expected utility for one message under a belief."""
    return math.fsum(
        u_r[(t, message, a)] * belief.prob(t, message) * receiver.prob(a, message)
        for t in CLOUD_TYPES
        for a in ACTIONS
    )


def receiver_trust_gain(u: SignalingUtilities, cloud_type: CloudType, message: Message) -> float:
    """u_R(type, m, trust) − u_R(type, m, not trust)."""
    return u.receiver_payoff(cloud_type, message, Action.TRUST) - u.receiver_payoff(
        cloud_type, message, Action.NOT_TRUST
    )


def bayes_belief(
    attacker: SenderStrategy,
    defender: SenderStrategy,
    p: float,
    message: Message,
    off_path_policy: Belief = ADVERSARIAL_BELIEF,
) -> float:
    """Posterior probability of the attacker type after observing ``message``.

    Falls back to the off-path policy value when no type with positive prior
    sends the message.
    """
    _check_unit("p", p)
    sent_by_attacker = attacker.prob(message)
    sent_by_defender = defender.prob(message)
    denominator = sent_by_attacker * p + sent_by_defender * (1.0 - p)
    if denominator == 0.0:
        return off_path_policy.attacker(message)
    if sent_by_attacker == sent_by_defender:
        return p
    return sent_by_attacker * p / denominator


def _check_prior(p: float) -> None:
    _check_unit("p", p)


# --- Trust benefits and regions ---


def trust_benefits(u: SignalingUtilities, p: float) -> TrustBenefits:
    """Prior-weighted trust gains TB_H(p) and TB_L(p)."""
    _check_prior(p)
    values = {}
    for m in MESSAGES:
        values[m] = p * receiver_trust_gain(u, CloudType.ATTACKER, m) + (
            1.0 - p
        ) * receiver_trust_gain(u, CloudType.DEFENDER, m)
    return TrustBenefits(tb_high=values[Message.HIGH], tb_low=values[Message.LOW])


def classify_quadrant(
    tb: TrustBenefits, zero_tolerance: float = DEFAULT_ZERO_TOLERANCE
) -> QuadrantClassification:
    """Map the signs of (TB_L, TB_H) to a quadrant, flagging near-zero axes."""
    if zero_tolerance < 0:
        raise ValueError("zero_tolerance must be non-negative")
    on_high_axis = abs(tb.tb_high) <= zero_tolerance
    on_low_axis = abs(tb.tb_low) <= zero_tolerance
    low_positive = tb.tb_low >= -zero_tolerance
    high_positive = tb.tb_high >= -zero_tolerance
    return QuadrantClassification(
        quadrant=_QUADRANT_BY_SIGN[(low_positive, high_positive)],
        on_high_axis=on_high_axis,
        on_low_axis=on_low_axis,
    )


def trust_benefit_root(u: SignalingUtilities, message: Message) -> Optional[float]:
    """Prior in [0, 1] where the trust benefit of ``message`` changes sign, if any."""
    at_zero = receiver_trust_gain(u, CloudType.DEFENDER, message)
    at_one = receiver_trust_gain(u, CloudType.ATTACKER, message)
    if at_zero == at_one:
        return None
    root = at_zero / (at_zero - at_one)
    if 0.0 <= root <= 1.0:
        return root
    return None


@dataclass(frozen=True)
class PathPoint:
    p: float
    benefits: TrustBenefits
    classification: QuadrantClassification


@dataclass(frozen=True)
class AxisCrossing:
    """Prior at which the locus crosses the axis of one message's trust benefit."""

    message: Message
    p: float


@dataclass(frozen=True)
class TrustBenefitPath:
    points: Tuple[PathPoint, ...]
    crossings: Tuple[AxisCrossing, ...]


def trust_benefit_path(
    u: SignalingUtilities,
    grid: Sequence[float],
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE,
) -> TrustBenefitPath:
    """Trace (TB_L(p), TB_H(p)) over a sorted grid of priors.

    Crossings are solved in closed form from the affine trust benefits and
    reported when they fall inside the grid's range.
    """
    grid = [float(p) for p in grid]
    if not grid:
        raise ValueError("grid must not be empty")
    for p in grid:
        _check_prior(p)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted in ascending order")

    points = []
    for p in grid:
        benefits = trust_benefits(u, p)
        points.append(PathPoint(p, benefits, classify_quadrant(benefits, zero_tolerance)))

    crossings = []
    for m in MESSAGES:
        root = trust_benefit_root(u, m)
        if root is not None and grid[0] <= root <= grid[-1]:
            crossings.append(AxisCrossing(message=m, p=root))
    crossings.sort(key=lambda c: (c.p, c.message.value))

    return TrustBenefitPath(points=tuple(points), crossings=tuple(crossings))


# --- Equilibrium enumeration ---


def _trust_gain_at(u: SignalingUtilities, message: Message, mu: float) -> float:
    return mu * receiver_trust_gain(u, CloudType.ATTACKER, message) + (
        1.0 - mu
    ) * receiver_trust_gain(u, CloudType.DEFENDER, message)


def _best_responses(gain: float, tol: float) -> Tuple[Action, ...]:
    actions = []
    if gain >= -tol:
        actions.append(Action.TRUST)
    if gain <= tol:
        actions.append(Action.NOT_TRUST)
    return tuple(actions)


def _max_supporting_belief(
    u: SignalingUtilities, message: Message, action: Action, tol: float
) -> Optional[float]:
    """Largest μ in [0, 1] at which ``action`` is a best response to ``message``."""
    g0 = _trust_gain_at(u, message, 0.0)
    g1 = _trust_gain_at(u, message, 1.0)
    supports = (lambda g: g <= tol) if action is Action.NOT_TRUST else (lambda g: g >= -tol)
    if supports(g1):
        return 1.0
    if not supports(g0):
        return None
    # the constraint holds at 0 but not at 1, so the gain line has a root inside
    return min(1.0, max(0.0, g0 / (g0 - g1)))


def _posterior(sender_of: Dict[CloudType, Message], message: Message, p: float) -> Optional[float]:
    """Posterior for a message sent by at least one type under pure sender strategies.

    A message sent by exactly one type identifies that type, which is the
    Bayes posterior for interior priors and its limit at p in {0, 1}.
    """
    by_attacker = sender_of[CloudType.ATTACKER] is message
    by_defender = sender_of[CloudType.DEFENDER] is message
    if by_attacker and by_defender:
        return p
    if by_attacker:
        return 1.0
    if by_defender:
        return 0.0
    return None


def _receiver_utility(
    u: SignalingUtilities,
    p: float,
    defender: SenderStrategy,
    attacker: SenderStrategy,
    receiver: ReceiverStrategy,
    belief: Belief,
) -> float:
    total = []
    for m in MESSAGES:
        weight = p * attacker.prob(m) + (1.0 - p) * defender.prob(m)
        if weight > 0.0:
            total.append(weight * expected_receiver_utility(receiver, m, belief, u.receiver))
    return math.fsum(total)


_CONSTRAINED = frozenset(
    {EquilibriumId.EQ1, EquilibriumId.EQ3, EquilibriumId.EQ6, EquilibriumId.EQ7}
)


def _senders_prefer_trusted(u: SignalingUtilities, message: Message, tol: float) -> bool:
    """Whether both senders weakly prefer ``message`` trusted to the other message trusted."""
    return all(
        u.sender(t, message, Action.TRUST) >= u.sender(t, message.other, Action.TRUST) - tol
        for t in CLOUD_TYPES
    )


def _label(
    u: SignalingUtilities,
    defender_msg: Message,
    attacker_msg: Message,
    actions: Dict[Message, Action],
    tol: float,
) -> Optional[EquilibriumId]:
    if defender_msg is not attacker_msg:
        if (
            defender_msg is Message.HIGH
            and actions[Message.HIGH] is Action.NOT_TRUST
            and actions[Message.LOW] is Action.NOT_TRUST
        ):
            return EquilibriumId.EQ2
        return None
    pooled = defender_msg
    if actions[pooled] is Action.NOT_TRUST:
        return EquilibriumId.EQ1 if pooled is Message.LOW else EquilibriumId.EQ6
    unconstrained = _senders_prefer_trusted(u, pooled, tol)
    if pooled is Message.LOW:
        return EquilibriumId.EQ5 if unconstrained else EquilibriumId.EQ3
    return EquilibriumId.EQ8 if unconstrained else EquilibriumId.EQ7


def _solve_sender_profile(
    u: SignalingUtilities,
    p: float,
    defender_msg: Message,
    attacker_msg: Message,
    off_path: Belief,
    tol: float,
) -> Optional[PBEProfile]:
    sender_of = {CloudType.DEFENDER: defender_msg, CloudType.ATTACKER: attacker_msg}
    beliefs: Dict[Message, float] = {}
    actions: Dict[Message, Action] = {}

    # On path, an indifferent receiver trusts a pooled message (TB >= 0) but
    # rejects a separated one, whose rejection conditions are weak inequalities
    pooling = defender_msg is attacker_msg
    for m in MESSAGES:
        mu = _posterior(sender_of, m, p)
        if mu is None:
            continue
        beliefs[m] = mu
        gain = _trust_gain_at(u, m, mu)
        trusts = gain >= -tol if pooling else gain > tol
        actions[m] = Action.TRUST if trusts else Action.NOT_TRUST

    def senders_stay(response: Dict[Message, Action]) -> bool:
        for cloud_type, sent in sender_of.items():
            stay = u.sender(cloud_type, sent, response[sent])
            deviate = u.sender(cloud_type, sent.other, response[sent.other])
            if deviate > stay + tol:
                return False
        return True

    off_path_msgs = [m for m in MESSAGES if m not in beliefs]

    if off_path_msgs:
        off = off_path_msgs[0]
        feasible = [a for a in ACTIONS if _max_supporting_belief(u, off, a, tol) is not None]
        passing = [a for a in feasible if senders_stay({**actions, off: a})]
        if not passing:
            return None

        preferred = off_path.attacker(off)
        at_witness = [
            a for a in _best_responses(_trust_gain_at(u, off, preferred), tol) if a in passing
        ]
        if at_witness:
            beliefs[off] = preferred
            actions[off] = at_witness[0]
        else:
            action = passing[0]
            witness = _max_supporting_belief(u, off, action, tol)
            assert witness is not None
            beliefs[off] = witness
            actions[off] = action
    elif not senders_stay(actions):
        return None

    equilibrium_id = _label(u, defender_msg, attacker_msg, actions, tol)
    if equilibrium_id is None:
        logger.debug(
            f"Sender profile D->{defender_msg.value}, A->{attacker_msg.value} is an "
            "equilibrium outside the numbered families; skipped"
        )
        return None

    defender = SenderStrategy.pure(defender_msg)
    attacker = SenderStrategy.pure(attacker_msg)
    receiver = ReceiverStrategy.from_actions(high=actions[Message.HIGH], low=actions[Message.LOW])
    belief = Belief(
        attacker_given_high=beliefs[Message.HIGH], attacker_given_low=beliefs[Message.LOW]
    )
    utilities = EquilibriumUtilities(
        defender=expected_sender_utility(receiver, defender, u.defender),
        attacker=expected_sender_utility(receiver, attacker, u.attacker),
        receiver=_receiver_utility(u, p, defender, attacker, receiver, belief),
    )
    return PBEProfile(
        equilibrium_id=equilibrium_id,
        defender_strategy=defender,
        attacker_strategy=attacker,
        receiver_strategy=receiver,
        belief=belief,
        utilities=utilities,
        prior=p,
        belief_constrained=equilibrium_id in _CONSTRAINED,
    )


def enumerate_pbe(
    u: SignalingUtilities,
    p: float,
    off_path: Belief = ADVERSARIAL_BELIEF,
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE,
) -> Tuple[PBEProfile, ...]:
    """All pure-strategy perfect Bayesian equilibria at prior ``p``, ordered by id.

    Off-path beliefs are witnesses: the configured off-path value when it
    supports the equilibrium, otherwise the largest supporting attacker
    probability. An indifferent receiver trusts a pooled message and rejects
    a separated one.

    Raises:
        AssumptionViolationError: If the table violates A1-A4
        ValueError: If p lies outside [0, 1]
    """
    require_assumptions(u)
    _check_prior(p)

    profiles = []
    for defender_msg in MESSAGES:
        for attacker_msg in MESSAGES:
            profile = _solve_sender_profile(u, p, defender_msg, attacker_msg, off_path, zero_tolerance)
            if profile is not None:
                profiles.append(profile)

    profiles.sort(key=lambda prof: prof.equilibrium_id.value)
    logger.debug(
        f"p={p:.6g}: {len(profiles)} equilibria "
        f"({', '.join(prof.equilibrium_id.label for prof in profiles)})"
    )
    return tuple(profiles)


# --- Selection and the prior-to-utility map ---


def select_equilibrium(
    candidates: Sequence[PBEProfile],
    tb: TrustBenefits,
    policy: SelectionPolicy = SelectionPolicy.PAPER,
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE,
) -> PBEProfile:
    """Pick one equilibrium from the candidates.

    Under ``SelectionPolicy.PAPER``: on the TB_H = 0 axis the pooled-on-low trusted
    equilibrium (maximin for the senders); elsewhere the candidate that is
    weakly best for both senders. The enumerate policy never ranks, so it
    only resolves singleton sets.

    Raises:
        NoSelectionError: If the policy cannot single out a candidate
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must not be empty")
    if len(candidates) == 1:
        return candidates[0]

    ids = [c.equilibrium_id.label for c in candidates]
    prior = candidates[0].prior

    if policy is SelectionPolicy.ENUMERATE:
        raise NoSelectionError(
            "Enumerate policy does not rank equilibria; use equilibrium_utility_set",
            candidates=ids,
            prior=prior,
        )

    if abs(tb.tb_high) <= zero_tolerance:
        for candidate in candidates:
            if candidate.equilibrium_id in (EquilibriumId.EQ3, EquilibriumId.EQ5):
                return candidate

    dominant = [
        c
        for c in candidates
        if all(
            c.utilities.defender >= other.utilities.defender - zero_tolerance
            and c.utilities.attacker >= other.utilities.attacker - zero_tolerance
            for other in candidates
        )
    ]
    if dominant:
        return min(dominant, key=lambda c: c.equilibrium_id.value)

    raise NoSelectionError(
        "No candidate is weakly preferred by both senders",
        candidates=ids,
        prior=prior,
    )


def t_s_profile(
    p: float,
    u: SignalingUtilities,
    policy: SelectionPolicy = SelectionPolicy.PAPER,
    off_path: Belief = ADVERSARIAL_BELIEF,
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE,
) -> PBEProfile:
    """The equilibrium selected at prior ``p``."""
    candidates = enumerate_pbe(u, p, off_path=off_path, zero_tolerance=zero_tolerance)
    if not candidates:
        raise NoSelectionError("No pure-strategy equilibrium exists", candidates=[], prior=p)
    return select_equilibrium(candidates, trust_benefits(u, p), policy, zero_tolerance)


def t_s(
    p: float,
    u: SignalingUtilities,
    policy: SelectionPolicy = SelectionPolicy.PAPER,
    off_path: Belief = ADVERSARIAL_BELIEF,
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE,
) -> Tuple[float, float]:
    """Selected equilibrium sender utilities (ū_D, ū_A) at prior ``p``."""
    return t_s_profile(p, u, policy, off_path, zero_tolerance).utilities.senders


def equilibrium_utility_set(
    p: float,
    u: SignalingUtilities,
    off_path: Belief = ADVERSARIAL_BELIEF,
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE,
) -> Dict[EquilibriumId, Tuple[float, float]]:
    """Every equilibrium's sender utilities at ``p``, keyed by equilibrium id."""
    return {
        profile.equilibrium_id: profile.utilities.senders
        for profile in enumerate_pbe(u, p, off_path=off_path, zero_tolerance=zero_tolerance)
    }

"""Pydantic models for scenario files and command reports.

Scenario numbers are decimal strings so that a scenario written by the
exporter re-parses to an identical value. Report models define the JSON
written by every subcommand; each carries a Provenance block.
"""

from decimal import Decimal
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import MIN_GRID_RESOLUTION, get_config
from .flipit import Player
from .gestalt import CloudControlGame
from .signaling import Belief, ReceiverStrategy, SelectionPolicy, SignalingUtilities


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --- Scenario: signaling ---


class ActionPayoffs(_Block):
    """Payoffs of the two receiver actions."""

    trust: Decimal = Field(description="Payoff when the device trusts the message")
    not_trust: Decimal = Field(description="Payoff when the device rejects the message")


class MessagePayoffs(_Block):
    """Payoffs per message, then per action."""

    high: ActionPayoffs = Field(description="High-risk message")
    low: ActionPayoffs = Field(description="Low-risk message")


class ReceiverPayoffs(_Block):
    """Receiver payoffs per cloud type."""

    attacker: MessagePayoffs = Field(description="Attacker-controlled cloud")
    defender: MessagePayoffs = Field(description="Defender-controlled cloud")


class SignalingBlock(_Block):
    """The three utility tables of the signaling game."""

    receiver: ReceiverPayoffs
    attacker: MessagePayoffs
    defender: MessagePayoffs

    def to_utilities(self) -> SignalingUtilities:
        return SignalingUtilities.from_nested(self.model_dump())

    @classmethod
    def from_utilities(cls, u: SignalingUtilities) -> "SignalingBlock":
        nested = u.to_nested()

        def decimals(table):
            if isinstance(table, dict):
                return {key: decimals(value) for key, value in table.items()}
            return Decimal(repr(table))

        return cls.model_validate(decimals(nested))


# --- Scenario: FlipIt and policies ---


class FlipCostsBlock(_Block):
    """Per-move costs α_D and α_A."""

    defender: Decimal = Field(gt=0, description="Defender cost per renewal")
    attacker: Decimal = Field(gt=0, description="Attacker cost per compromise")


class OffPathBlock(_Block):
    """Preferred off-path belief that the sender is the attacker."""

    high: Decimal = Field(default=Decimal("1"), ge=0, le=1)
    low: Decimal = Field(default=Decimal("1"), ge=0, le=1)

    def to_belief(self) -> Belief:
        return Belief(attacker_given_high=float(self.high), attacker_given_low=float(self.low))


class PoliciesBlock(_Block):
    """Equilibrium selection and numerical tolerances.

    Omitted tolerances and grid size fall back to the runtime configuration.
    """

    selection: SelectionPolicy = Field(default=SelectionPolicy.PAPER)
    off_path: OffPathBlock = Field(default_factory=OffPathBlock)
    zero_tolerance: Optional[Decimal] = Field(default=None, ge=0)
    fixed_point_tolerance: Optional[Decimal] = Field(default=None, gt=0)
    grid_resolution: Optional[int] = Field(default=None, ge=MIN_GRID_RESOLUTION)


# --- Scenario: simulation ---


class SimulationBlock(_Block):
    """Monte Carlo settings.

    ``mode`` "flipit" replays FlipIt at the given values (and frequencies, or
    the Nash frequencies when omitted); "cloudcontrol" replays the first
    certified Gestalt equilibrium with the signaling game on top.
    """

    mode: Literal["flipit", "cloudcontrol"] = "cloudcontrol"
    horizon: Decimal = Field(gt=0)
    replications: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    epoch_rate: Decimal = Field(default=Decimal("1"), gt=0)
    tie_winner: Player = Player.DEFENDER
    value_defender: Optional[Decimal] = None
    value_attacker: Optional[Decimal] = None
    freq_defender: Optional[Decimal] = Field(default=None, ge=0)
    freq_attacker: Optional[Decimal] = Field(default=None, ge=0)


# --- Scenario: vehicle ---


class SourceBlock(_Block):
    """A canonical cloud command source."""

    kind: Literal["faithful", "noisy-benign", "adversarial-offset"]
    noise_bound: Decimal = Field(default=Decimal("0"), ge=0)
    offset: Decimal = Field(default=Decimal("0"))


class ReceiverBlock(_Block):
    """Explicit trust probabilities, overriding the selected equilibrium's strategy."""

    trust_high: Decimal = Field(ge=0, le=1)
    trust_low: Decimal = Field(ge=0, le=1)

    def to_strategy(self) -> ReceiverStrategy:
        return ReceiverStrategy(
            trust_given_high=float(self.trust_high), trust_given_low=float(self.trust_low)
        )


class GainsBlock(_Block):
    k1: Decimal
    k2: Decimal


class InitialStateBlock(_Block):
    lateral: Decimal = Decimal("1")
    heading: Decimal = Decimal("0")


class VehicleBlock(_Block):
    """Vehicle geometry, controller, filter and integration settings.

    Without ``gains`` the double-pole placement at ``pole_rate`` is used.
    Without ``attacker_probability`` the prior comes from ``--p`` (default 0).
    """

    speed: Decimal = Field(gt=0)
    cg_to_rear: Decimal = Field(gt=0)
    wheelbase: Decimal = Field(gt=0)
    gains: Optional[GainsBlock] = None
    pole_rate: Decimal = Field(default=Decimal("1"), gt=0)
    threshold: Decimal = Field(ge=0)
    initial: InitialStateBlock = Field(default_factory=InitialStateBlock)
    dt: Decimal = Field(gt=0)
    horizon: Decimal = Field(gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    attacker_probability: Optional[Decimal] = Field(default=None, ge=0, le=1)
    receiver: Optional[ReceiverBlock] = None
    defender_source: SourceBlock = Field(default_factory=lambda: SourceBlock(kind="faithful"))
    attacker_source: SourceBlock = Field(
        default_factory=lambda: SourceBlock(kind="adversarial-offset")
    )
    divergence_bound: Decimal = Field(default=Decimal("1e6"), gt=0)
    small_angle_bound: Decimal = Field(default=Decimal("0.3"), gt=0)


# --- Scenario ---


class Scenario(_Block):
    """A complete scenario file."""

    name: str = Field(min_length=1, description="Scenario name used in reports")
    description: Optional[str] = None
    signaling: SignalingBlock
    flip_costs: FlipCostsBlock
    policies: PoliciesBlock = Field(default_factory=PoliciesBlock)
    simulation: Optional[SimulationBlock] = None
    vehicle: Optional[VehicleBlock] = None

    def to_game(
        self,
        grid_resolution: Optional[int] = None,
        selection: Optional[SelectionPolicy] = None,
    ) -> CloudControlGame:
        """The CloudControl game described by this scenario, with optional overrides.

        Precedence is override, then scenario policy, then ``get_config()``.
        """
        policies = self.policies
        config = get_config()
        zero_tolerance = policies.zero_tolerance
        fixed_point_tolerance = policies.fixed_point_tolerance
        return CloudControlGame(
            signaling=self.signaling.to_utilities(),
            move_cost_defender=float(self.flip_costs.defender),
            move_cost_attacker=float(self.flip_costs.attacker),
            selection_policy=selection or policies.selection,
            off_path_policy=policies.off_path.to_belief(),
            grid_resolution=grid_resolution or policies.grid_resolution or config.grid_resolution,
            fixed_point_tolerance=(
                config.fixed_point_tolerance if fixed_point_tolerance is None else float(fixed_point_tolerance)
            ),
            zero_tolerance=config.zero_tolerance if zero_tolerance is None else float(zero_tolerance),
        )


# --- Reports ---


class Provenance(BaseModel):
    """Where a report came from."""

    scenario: str = Field(description="Scenario name")
    scenario_hash: str = Field(description="sha256 of the canonical scenario JSON")
    seed: Optional[int] = Field(default=None, description="Seed of stochastic runs")
    version: str = Field(description="cloudcontrol package version")


class SenderUtilities(BaseModel):
    defender: float
    attacker: float


class EquilibriumEntry(BaseModel):
    """One perfect Bayesian equilibrium."""

    equilibrium_id: int = Field(description="Equilibrium number (there is no 4)")
    label: str
    description: str
    defender_message: str = Field(description="Message sent by a defender-controlled cloud")
    attacker_message: str = Field(description="Message sent by an attacker-controlled cloud")
    trust_given_high: float = Field(description="Probability the device trusts a high-risk message")
    trust_given_low: float = Field(description="Probability the device trusts a low-risk message")
    belief_high: float = Field(description="Belief the sender is the attacker given high")
    belief_low: float = Field(description="Belief the sender is the attacker given low")
    belief_constrained: bool = Field(description="Whether the off-path belief is restricted")
    utility_defender: float
    utility_attacker: float
    utility_receiver: float
    selected: bool = Field(default=False, description="Chosen by the selection policy")


class SignalingReport(BaseModel):
    """All equilibria of the signaling game at one prior."""

    provenance: Provenance
    p: float = Field(description="Prior probability that the cloud is attacker-controlled")
    tb_high: float = Field(description="Trust benefit of a high-risk message")
    tb_low: float = Field(description="Trust benefit of a low-risk message")
    quadrant: str = Field(description="Quadrant label, e.g. 'I' or 'I/IV' on an axis")
    selection_policy: str
    equilibria: List[EquilibriumEntry]
    selected_id: Optional[int] = Field(default=None, description="Selected equilibrium number")
    selection_error: Optional[str] = Field(
        default=None, description="Why no equilibrium was selected"
    )


class FlipItReport(BaseModel):
    """Periodic Nash equilibrium of FlipIt for one value pair."""

    provenance: Provenance
    value_defender: float
    value_attacker: float
    move_cost_defender: float
    move_cost_attacker: float
    case: int = Field(description="Nash case number, 1 to 5")
    case_name: str
    freq_defender: float
    freq_attacker: float
    attacker_single_move: bool = Field(description="Attacker moves exactly once")
    control_ratio: float = Field(description="Share of time the attacker controls the cloud")
    payoff_defender: float
    payoff_attacker: float


class BoundarySideEntry(BaseModel):
    p: float
    equilibrium_id: int
    utilities: SenderUtilities
    composite: float


class GestaltSolutionEntry(BaseModel):
    """A certified fixed point or an uncertified jump candidate."""

    p_dagger: float
    certified: bool
    residual: float = Field(description="|composite(p) - p| at p_dagger")
    equilibrium_id: int
    utilities: SenderUtilities
    freq_defender: float
    freq_attacker: float
    nash_case: int
    sides: Optional[List[BoundarySideEntry]] = Field(
        default=None, description="Left and right sides of a jump (uncertified only)"
    )


class GestaltReport(BaseModel):
    """Fixed points of the composite map."""

    provenance: Provenance
    selection_policy: str
    grid_resolution: int
    fixed_point_tolerance: float
    solutions: List[GestaltSolutionEntry]
    branches: Optional[Dict[str, List[float]]] = Field(
        default=None, description="Per-equilibrium fixed points (enumerate policy only)"
    )


class SimulationReportModel(BaseModel):
    """Monte Carlo estimates with analytic references."""

    provenance: Provenance
    mode: str
    horizon: float
    replications: int
    freq_defender: float
    freq_attacker: float
    empirical_p: float
    empirical_control_defender: float
    empirical_control_attacker: float
    move_rate_defender: float
    move_rate_attacker: float
    payoff_defender: float
    payoff_attacker: float
    payoff_receiver: Optional[float] = None
    standard_errors: Dict[str, float]
    analytic_p: float = Field(description="Closed-form control ratio of the replayed profile")
    analytic_payoff_defender: float
    analytic_payoff_attacker: float


class VehicleReportModel(BaseModel):
    """Summary of a closed-loop vehicle trajectory."""

    provenance: Provenance
    attacker_probability: float
    threshold: float
    k1: float
    k2: float
    eigenvalues: List[List[float]] = Field(description="Closed-loop eigenvalues as [real, imag]")
    stable: bool
    trust_given_high: float
    trust_given_low: float
    steps: int
    dt: float
    final_lateral: float
    final_heading: float
    max_abs_lateral: float
    high_messages: int
    trusted_steps: int
    small_angle_violations: int

"""Subcommand implementations.

Each ``cmd_*`` function takes a validated Scenario plus its command options
and returns a CommandResult: the report model and the named tables written
as CSV when an output directory is given.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from . import __version__
from .error_handling import NoSelectionError, ScenarioError, ValidationError
from .flipit import PeriodicProfile, control_ratio, flipit_payoffs, nash_equilibrium
from .gestalt import (
    GestaltSolution,
    curve_export,
    scan_fixed_points,
    scan_fixed_points_by_branch,
)
from .scenario import scenario_hash
from .schemas import (
    BoundarySideEntry,
    EquilibriumEntry,
    FlipItReport,
    GestaltReport,
    GestaltSolutionEntry,
    Provenance,
    Scenario,
    SenderUtilities,
    SignalingReport,
    SimulationReportModel,
    SourceBlock,
    VehicleReportModel,
)
from .signaling import (
    Action,
    CloudType,
    Message,
    PBEProfile,
    SelectionPolicy,
    classify_quadrant,
    enumerate_pbe,
    require_assumptions,
    select_equilibrium,
    t_s_profile,
    trust_benefit_path,
    trust_benefits,
)
from .simulate import SimulationConfig, simulate_cloudcontrol, simulate_flipit
from .vehicle import (
    CloudCommandSource,
    CloudSchedule,
    GainVector,
    VehicleParams,
    VehicleState,
    closed_loop_matrix,
    simulate_trajectory,
)

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    report: BaseModel
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    primary_table: Optional[str] = None


def provenance(scenario: Scenario, seed: Optional[int] = None) -> Provenance:
    return Provenance(
        scenario=scenario.name,
        scenario_hash=scenario_hash(scenario),
        seed=seed,
        version=__version__,
    )


# --- signaling ---


def _entry(profile: PBEProfile, selected: bool) -> EquilibriumEntry:
    receiver = profile.receiver_strategy
    return EquilibriumEntry(
        equilibrium_id=profile.equilibrium_id.value,
        label=profile.equilibrium_id.label,
        description=profile.equilibrium_id.description,
        defender_message=profile.defender_strategy.pure_message.value,
        attacker_message=profile.attacker_strategy.pure_message.value,
        trust_given_high=receiver.trust(Message.HIGH),
        trust_given_low=receiver.trust(Message.LOW),
        belief_high=profile.belief.attacker(Message.HIGH),
        belief_low=profile.belief.attacker(Message.LOW),
        belief_constrained=profile.belief_constrained,
        utility_defender=profile.utilities.defender,
        utility_attacker=profile.utilities.attacker,
        utility_receiver=profile.utilities.receiver,
        selected=selected,
    )


def cmd_signaling(
    scenario: Scenario,
    p: float,
    selection: Optional[SelectionPolicy] = None,
    grid: Optional[int] = None,
) -> CommandResult:
    """Every pure-strategy equilibrium at ``p`` with the selected one marked.

    A failed selection is reported, not raised: listing candidates is the
    point of this command.
    """
    game = scenario.to_game(grid_resolution=grid, selection=selection)
    u = game.signaling
    require_assumptions(u)

    candidates = enumerate_pbe(u, p, off_path=game.off_path_policy, zero_tolerance=game.zero_tolerance)
    tb = trust_benefits(u, p)
    selected: Optional[PBEProfile] = None
    selection_error: Optional[str] = None
    if candidates:
        try:
            selected = select_equilibrium(candidates, tb, game.selection_policy, game.zero_tolerance)
        except NoSelectionError as e:
            selection_error = e.message
    else:
        selection_error = "No pure-strategy equilibrium exists"

    entries = [_entry(c, selected is not None and c is selected) for c in candidates]
    report = SignalingReport(
        provenance=provenance(scenario),
        p=p,
        tb_high=tb.tb_high,
        tb_low=tb.tb_low,
        quadrant=classify_quadrant(tb, game.zero_tolerance).label,
        selection_policy=game.selection_policy.value,
        equilibria=entries,
        selected_id=selected.equilibrium_id.value if selected is not None else None,
        selection_error=selection_error,
    )

    path = trust_benefit_path(u, np.linspace(0.0, 1.0, game.grid_resolution), game.zero_tolerance)
    path_frame = pd.DataFrame(
        {
            "p": [pt.p for pt in path.points],
            "tb_high": [pt.benefits.tb_high for pt in path.points],
            "tb_low": [pt.benefits.tb_low for pt in path.points],
            "quadrant": [pt.classification.label for pt in path.points],
        }
    )
    equilibria = pd.DataFrame([e.model_dump() for e in entries])
    return CommandResult(
        report=report,
        tables={"equilibria": equilibria, "trust_benefit_path": path_frame},
        primary_table="equilibria",
    )


# --- flipit ---


def cmd_flipit(
    scenario: Scenario,
    value_defender: Optional[float] = None,
    value_attacker: Optional[float] = None,
    p: float = 0.0,
) -> CommandResult:
    """FlipIt Nash equilibrium for a value pair.

    Missing values are taken from the equilibrium selected at prior ``p``.
    """
    game = scenario.to_game()
    if value_defender is None or value_attacker is None:
        profile = t_s_profile(
            p,
            game.signaling,
            policy=game.selection_policy,
            off_path=game.off_path_policy,
            zero_tolerance=game.zero_tolerance,
        )
        d, a = profile.utilities.senders
        value_defender = d if value_defender is None else value_defender
        value_attacker = a if value_attacker is None else value_attacker
        logger.info(f"Values taken from {profile.equilibrium_id.label} at p={p:g}")

    eq = nash_equilibrium(game.flipit_params(value_defender, value_attacker))
    report = FlipItReport(
        provenance=provenance(scenario),
        value_defender=value_defender,
        value_attacker=value_attacker,
        move_cost_defender=game.move_cost_defender,
        move_cost_attacker=game.move_cost_attacker,
        case=eq.case.value,
        case_name=eq.case.name.lower(),
        freq_defender=eq.profile.freq_defender,
        freq_attacker=eq.profile.freq_attacker,
        attacker_single_move=eq.profile.attacker_single_move,
        control_ratio=eq.control_ratio,
        payoff_defender=eq.payoff_defender,
        payoff_attacker=eq.payoff_attacker,
    )
    table = pd.DataFrame([report.model_dump(exclude={"provenance"})])
    return CommandResult(report=report, tables={"flipit": table}, primary_table="flipit")


# --- gestalt ---


def _solution_entry(solution: GestaltSolution) -> GestaltSolutionEntry:
    d, a = solution.utilities
    sides = None
    if solution.sides is not None:
        sides = [
            BoundarySideEntry(
                p=side.p,
                equilibrium_id=side.equilibrium_id.value,
                utilities=SenderUtilities(defender=side.utilities[0], attacker=side.utilities[1]),
                composite=side.composite,
            )
            for side in solution.sides
        ]
    return GestaltSolutionEntry(
        p_dagger=solution.p_dagger,
        certified=solution.certified,
        residual=solution.residual,
        equilibrium_id=solution.pbe.equilibrium_id.value,
        utilities=SenderUtilities(defender=d, attacker=a),
        freq_defender=solution.flip.profile.freq_defender,
        freq_attacker=solution.flip.profile.freq_attacker,
        nash_case=solution.flip.case.value,
        sides=sides,
    )


def cmd_gestalt(
    scenario: Scenario,
    grid: Optional[int] = None,
    selection: Optional[SelectionPolicy] = None,
) -> CommandResult:
    """Fixed points of the composite map plus curve data for both maps."""
    game = scenario.to_game(grid_resolution=grid, selection=selection)
    solutions = scan_fixed_points(game)

    branches = None
    tables: Dict[str, pd.DataFrame] = {}
    if game.selection_policy is SelectionPolicy.ENUMERATE:
        branches = {
            eq_id.label: [s.p_dagger for s in found]
            for eq_id, found in scan_fixed_points_by_branch(game).items()
        }
    else:
        curves = curve_export(game)
        tables["curve_signaling"] = curves.solid
        tables["curve_flipit"] = curves.dashed

    entries = [_solution_entry(s) for s in solutions]
    report = GestaltReport(
        provenance=provenance(scenario),
        selection_policy=game.selection_policy.value,
        grid_resolution=game.grid_resolution,
        fixed_point_tolerance=game.fixed_point_tolerance,
        solutions=entries,
        branches=branches,
    )
    tables["solutions"] = pd.DataFrame(
        [
            {
                "p_dagger": e.p_dagger,
                "certified": e.certified,
                "residual": e.residual,
                "equilibrium_id": e.equilibrium_id,
                "value_defender": e.utilities.defender,
                "value_attacker": e.utilities.attacker,
                "freq_defender": e.freq_defender,
                "freq_attacker": e.freq_attacker,
                "nash_case": e.nash_case,
            }
            for e in entries
        ],
        columns=[
            "p_dagger",
            "certified",
            "residual",
            "equilibrium_id",
            "value_defender",
            "value_attacker",
            "freq_defender",
            "freq_attacker",
            "nash_case",
        ],
    )
    return CommandResult(report=report, tables=tables, primary_table="solutions")


# --- simulate ---


def cmd_simulate(scenario: Scenario, seed: Optional[int] = None) -> CommandResult:
    """Monte Carlo replay configured by the scenario's simulation block."""
    block = scenario.simulation
    if block is None:
        raise ScenarioError(f"Scenario '{scenario.name}' has no simulation block")
    seed = block.seed if seed is None else seed
    game = scenario.to_game()

    if block.mode == "flipit":
        if block.value_defender is None or block.value_attacker is None:
            raise ScenarioError("simulation mode 'flipit' needs value_defender and value_attacker")
        params = game.flipit_params(float(block.value_defender), float(block.value_attacker))
        if block.freq_defender is not None and block.freq_attacker is not None:
            profile = PeriodicProfile(float(block.freq_defender), float(block.freq_attacker))
        else:
            profile = nash_equilibrium(params).profile
        config = SimulationConfig(
            horizon=float(block.horizon),
            replications=block.replications,
            seed=seed,
            profile=profile,
            params=params,
            epoch_rate=float(block.epoch_rate),
            tie_winner=block.tie_winner,
        )
        result = simulate_flipit(config)
    else:
        certified = [s for s in scan_fixed_points(game) if s.certified]
        if not certified:
            raise ValidationError(
                f"Scenario '{scenario.name}' has no certified Gestalt equilibrium to replay"
            )
        solution = certified[0]
        profile = solution.flip.profile
        params = game.flipit_params(*solution.utilities)
        config = SimulationConfig(
            horizon=float(block.horizon),
            replications=block.replications,
            seed=seed,
            profile=profile,
            params=params,
            game=game,
            epoch_rate=float(block.epoch_rate),
            tie_winner=block.tie_winner,
        )
        result = simulate_cloudcontrol(config, solution)

    analytic_d, analytic_a = flipit_payoffs(
        profile.freq_defender, profile.freq_attacker, params, profile.attacker_single_move
    )
    report = SimulationReportModel(
        provenance=provenance(scenario, seed),
        mode=block.mode,
        horizon=result.horizon,
        replications=result.replications,
        freq_defender=profile.freq_defender,
        freq_attacker=profile.freq_attacker,
        empirical_p=result.empirical_p,
        empirical_control_defender=result.empirical_control[0],
        empirical_control_attacker=result.empirical_control[1],
        move_rate_defender=result.empirical_move_rates[0],
        move_rate_attacker=result.empirical_move_rates[1],
        payoff_defender=result.empirical_payoffs[0],
        payoff_attacker=result.empirical_payoffs[1],
        payoff_receiver=result.empirical_payoffs[2],
        standard_errors=result.standard_errors,
        analytic_p=control_ratio(
            profile.freq_defender, profile.freq_attacker, profile.attacker_single_move
        ),
        analytic_payoff_defender=analytic_d,
        analytic_payoff_attacker=analytic_a,
    )
    summary = report.model_dump(exclude={"provenance", "standard_errors"})
    summary.update({f"se_{key}": value for key, value in result.standard_errors.items()})
    return CommandResult(
        report=report, tables={"simulation": pd.DataFrame([summary])}, primary_table="simulation"
    )


# --- vehicle ---


def _source(block: SourceBlock, issuer: CloudType) -> CloudCommandSource:
    return CloudCommandSource(
        label=block.kind,
        issuer=issuer,
        offset=float(block.offset) if block.kind == "adversarial-offset" else 0.0,
        noise_bound=float(block.noise_bound) if block.kind == "noisy-benign" else 0.0,
    )


def cmd_vehicle(
    scenario: Scenario,
    p: Optional[float] = None,
    seed: Optional[int] = None,
) -> CommandResult:
    """Closed-loop trajectory under the trust strategy of the equilibrium selected at ``p``."""
    block = scenario.vehicle
    if block is None:
        raise ScenarioError(f"Scenario '{scenario.name}' has no vehicle block")
    seed = block.seed if seed is None else seed
    if p is None:
        p = float(block.attacker_probability) if block.attacker_probability is not None else 0.0

    params = VehicleParams(
        speed=float(block.speed),
        cg_to_rear=float(block.cg_to_rear),
        wheelbase=float(block.wheelbase),
    )
    if block.gains is not None:
        gains = GainVector(k1=float(block.gains.k1), k2=float(block.gains.k2))
    else:
        gains = GainVector.for_double_pole(params, float(block.pole_rate))

    if block.receiver is not None:
        receiver = block.receiver.to_strategy()
    else:
        game = scenario.to_game()
        receiver = t_s_profile(
            p,
            game.signaling,
            policy=game.selection_policy,
            off_path=game.off_path_policy,
            zero_tolerance=game.zero_tolerance,
        ).receiver_strategy

    schedule = CloudSchedule(
        defender=_source(block.defender_source, CloudType.DEFENDER),
        attacker=_source(block.attacker_source, CloudType.ATTACKER),
        attacker_share=p,
    )
    threshold = float(block.threshold)
    trajectory = simulate_trajectory(
        initial=VehicleState(float(block.initial.lateral), float(block.initial.heading)),
        params=params,
        gains=gains,
        threshold=threshold,
        receiver=receiver,
        schedule=schedule,
        dt=float(block.dt),
        horizon=float(block.horizon),
        seed=seed,
        divergence_bound=float(block.divergence_bound),
        small_angle_bound=float(block.small_angle_bound),
    )

    loop = closed_loop_matrix(params, gains)
    final = trajectory.final_state
    report = VehicleReportModel(
        provenance=provenance(scenario, seed),
        attacker_probability=p,
        threshold=threshold,
        k1=gains.k1,
        k2=gains.k2,
        eigenvalues=[[ev.real, ev.imag] for ev in loop.eigenvalues],
        stable=loop.is_stable,
        trust_given_high=receiver.trust(Message.HIGH),
        trust_given_low=receiver.trust(Message.LOW),
        steps=len(trajectory.messages),
        dt=float(block.dt),
        final_lateral=final.lateral,
        final_heading=final.heading,
        max_abs_lateral=float(np.max(np.abs(trajectory.states[:, 0]))),
        high_messages=sum(m is Message.HIGH for m in trajectory.messages),
        trusted_steps=sum(a is Action.TRUST for a in trajectory.actions),
        small_angle_violations=int(np.count_nonzero(~trajectory.small_angle_ok)),
    )
    return CommandResult(
        report=report, tables={"trajectory": trajectory.to_frame()}, primary_table="trajectory"
    )

"""Report rendering and file output.

Text renderings are deterministic so they can be diffed between runs. CSV
tables start with a provenance comment line; JSON reports are the pydantic
report models dumped as-is.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List

import pandas as pd
from pydantic import BaseModel

from .schemas import (
    FlipItReport,
    GestaltReport,
    Provenance,
    SignalingReport,
    SimulationReportModel,
    VehicleReportModel,
)

logger = logging.getLogger(__name__)

RULE = "=" * 50


def _header(title: str, provenance: Provenance) -> List[str]:
    lines = [RULE, title, f"Scenario: {provenance.scenario} ({provenance.scenario_hash[:12]})"]
    if provenance.seed is not None:
        lines.append(f"Seed: {provenance.seed}")
    lines.append(RULE)
    return lines


def _num(value: float) -> str:
    return f"{value:.6g}"


def format_signaling(report: SignalingReport) -> str:
    lines = _header(f"Signaling equilibria at p = {_num(report.p)}", report.provenance)
    lines.append(f"Trust benefits: TB_H = {_num(report.tb_high)}, TB_L = {_num(report.tb_low)}")
    lines.append(f"Quadrant: {report.quadrant}")
    lines.append(f"Selection policy: {report.selection_policy}")
    lines.append("")
    if not report.equilibria:
        lines.append("No pure-strategy equilibrium")
    for eq in report.equilibria:
        marker = "*" if eq.selected else " "
        lines.append(f"{marker}{eq.label}: {eq.description}")
        lines.append(
            f"    senders: defender -> {eq.defender_message}, attacker -> {eq.attacker_message}"
        )
        lines.append(
            f"    trust: high {_num(eq.trust_given_high)}, low {_num(eq.trust_given_low)}"
        )
        constrained = " (constrained)" if eq.belief_constrained else ""
        lines.append(
            f"    belief(attacker): high {_num(eq.belief_high)}, "
            f"low {_num(eq.belief_low)}{constrained}"
        )
        lines.append(
            f"    utilities: defender {_num(eq.utility_defender)}, "
            f"attacker {_num(eq.utility_attacker)}, receiver {_num(eq.utility_receiver)}"
        )
    lines.append("")
    if report.selected_id is not None:
        lines.append(f"Selected: Equilibrium #{report.selected_id}")
    elif report.selection_error:
        lines.append(f"No selection: {report.selection_error}")
    return "\n".join(lines)


def format_flipit(report: FlipItReport) -> str:
    lines = _header("FlipIt Nash equilibrium", report.provenance)
    lines.append(
        f"Values: defender {_num(report.value_defender)}, attacker {_num(report.value_attacker)}"
    )
    lines.append(
        f"Move costs: defender {_num(report.move_cost_defender)}, "
        f"attacker {_num(report.move_cost_attacker)}"
    )
    lines.append(f"Case {report.case}: {report.case_name}")
    attacker_freq = "single move" if report.attacker_single_move else _num(report.freq_attacker)
    lines.append(f"Frequencies: defender {_num(report.freq_defender)}, attacker {attacker_freq}")
    lines.append(f"Control ratio p: {_num(report.control_ratio)}")
    lines.append(
        f"Payoffs: defender {_num(report.payoff_defender)}, "
        f"attacker {_num(report.payoff_attacker)}"
    )
    return "\n".join(lines)


def format_gestalt(report: GestaltReport) -> str:
    lines = _header("Gestalt equilibria", report.provenance)
    lines.append(
        f"Policy: {report.selection_policy}, grid {report.grid_resolution}, "
        f"tolerance {report.fixed_point_tolerance:g}"
    )
    lines.append("")
    if not report.solutions:
        lines.append("No fixed point or boundary candidate found")
    for sol in report.solutions:
        kind = "certified" if sol.certified else "boundary candidate"
        lines.append(f"p† = {sol.p_dagger:.9f} [{kind}], Equilibrium #{sol.equilibrium_id}")
        lines.append(
            f"    utilities: defender {_num(sol.utilities.defender)}, "
            f"attacker {_num(sol.utilities.attacker)}; residual {sol.residual:.3g}"
        )
        lines.append(
            f"    FlipIt case {sol.nash_case}: f_D = {_num(sol.freq_defender)}, "
            f"f_A = {_num(sol.freq_attacker)}"
        )
        for side, label in zip(sol.sides or [], ("left", "right")):
            lines.append(
                f"    {label}: Equilibrium #{side.equilibrium_id} at p = {side.p:.9f}, "
                f"composite {_num(side.composite)}"
            )
    if report.branches:
        lines.append("")
        lines.append("Per-equilibrium fixed points:")
        for name, points in report.branches.items():
            shown = ", ".join(f"{p:.9f}" for p in points) or "none"
            lines.append(f"    {name}: {shown}")
    return "\n".join(lines)


def format_simulation(report: SimulationReportModel) -> str:
    se = report.standard_errors
    lines = _header(f"Monte Carlo replay ({report.mode})", report.provenance)
    lines.append(
        f"Horizon {_num(report.horizon)}, {report.replications} replications, "
        f"f_D = {_num(report.freq_defender)}, f_A = {_num(report.freq_attacker)}"
    )
    lines.append(
        f"Empirical p: {_num(report.empirical_p)} ± {se.get('empirical_p', 0.0):.2g} "
        f"(analytic {_num(report.analytic_p)})"
    )
    lines.append(
        f"Move rates: defender {_num(report.move_rate_defender)}, "
        f"attacker {_num(report.move_rate_attacker)}"
    )
    lines.append(
        f"Payoff defender: {_num(report.payoff_defender)} ± {se.get('payoff_defender', 0.0):.2g} "
        f"(analytic {_num(report.analytic_payoff_defender)})"
    )
    lines.append(
        f"Payoff attacker: {_num(report.payoff_attacker)} ± {se.get('payoff_attacker', 0.0):.2g} "
        f"(analytic {_num(report.analytic_payoff_attacker)})"
    )
    if report.payoff_receiver is not None:
        lines.append(
            f"Payoff receiver: {_num(report.payoff_receiver)} "
            f"± {se.get('payoff_receiver', 0.0):.2g}"
        )
    return "\n".join(lines)


def format_vehicle(report: VehicleReportModel) -> str:
    lines = _header("Cloud-controlled vehicle trajectory", report.provenance)
    lines.append(
        f"Attacker probability {_num(report.attacker_probability)}, "
        f"threshold {_num(report.threshold)}"
    )
    eigen = ", ".join(f"{re:.4g}{im:+.4g}j" for re, im in report.eigenvalues)
    stability = "stable" if report.stable else "unstable"
    lines.append(f"Gains k1 = {_num(report.k1)}, k2 = {_num(report.k2)}; eigenvalues {eigen} ({stability})")
    lines.append(
        f"Trust: high {_num(report.trust_given_high)}, low {_num(report.trust_given_low)}"
    )
    lines.append(
        f"{report.steps} steps of {_num(report.dt)}: {report.high_messages} high-risk messages, "
        f"{report.trusted_steps} trusted commands"
    )
    lines.append(
        f"Final state: z = {_num(report.final_lateral)}, θ = {_num(report.final_heading)}; "
        f"max |z| = {_num(report.max_abs_lateral)}"
    )
    if report.small_angle_violations:
        lines.append(f"Small-angle bound exceeded at {report.small_angle_violations} samples")
    return "\n".join(lines)


_TEXT_FORMATTERS: Dict[type, Callable] = {
    SignalingReport: format_signaling,
    FlipItReport: format_flipit,
    GestaltReport: format_gestalt,
    SimulationReportModel: format_simulation,
    VehicleReportModel: format_vehicle,
}


def format_report(report: BaseModel) -> str:
    """Text rendering of any report model."""
    formatter = _TEXT_FORMATTERS.get(type(report))
    if formatter is None:
        raise TypeError(f"No text formatter for {type(report).__name__}")
    return formatter(report)


def provenance_line(provenance: Provenance) -> str:
    return f"# scenario_hash={provenance.scenario_hash}, seed={provenance.seed}"


def render_csv(frame: pd.DataFrame, provenance: Provenance) -> str:
    return provenance_line(provenance) + "\n" + frame.to_csv(index=False, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: Path, provenance: Provenance) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(frame, provenance), encoding="utf-8")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(report: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote report to {path}")
    return path

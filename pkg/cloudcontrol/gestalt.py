"""Gestalt equilibria of the combined CloudControl game.

The signaling game maps the attacker's control ratio p to equilibrium sender
utilities, and FlipIt maps those utilities back to a control ratio. A Gestalt
equilibrium is a fixed point of the composition. The composite map is
piecewise constant with jumps where the selected equilibrium changes, so the
search scans a uniform grid and brackets sign changes of
g(p) = composite(p) − p instead of iterating the map.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .config import (
    DEFAULT_FIXED_POINT_TOLERANCE,
    DEFAULT_GRID_RESOLUTION,
    DEFAULT_ZERO_TOLERANCE,
    MIN_GRID_RESOLUTION,
)
from .error_handling import NoSelectionError
from .flipit import FlipItEquilibrium, FlipItParams, nash_equilibrium, t_f, value_ratio
from .signaling import (
    ADVERSARIAL_BELIEF,
    Belief,
    EquilibriumId,
    PBEProfile,
    SelectionPolicy,
    SignalingUtilities,
    enumerate_pbe,
    require_assumptions,
    t_s_profile,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CloudControlGame:
    """Signaling utilities, FlipIt move costs and the numerical policies of a run."""

    signaling: SignalingUtilities
    move_cost_defender: float
    move_cost_attacker: float
    selection_policy: SelectionPolicy = SelectionPolicy.PAPER
    off_path_policy: Belief = ADVERSARIAL_BELIEF
    grid_resolution: int = DEFAULT_GRID_RESOLUTION
    fixed_point_tolerance: float = DEFAULT_FIXED_POINT_TOLERANCE
    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE

    def __post_init__(self):
        if self.grid_resolution < MIN_GRID_RESOLUTION:
            raise ValueError(f"grid_resolution must be at least {MIN_GRID_RESOLUTION}")
        if not self.fixed_point_tolerance > 0:
            raise ValueError("fixed_point_tolerance must be positive")
        if self.zero_tolerance < 0:
            raise ValueError("zero_tolerance must be non-negative")
        for name in ("move_cost_defender", "move_cost_attacker"):
            cost = getattr(self, name)
            if not (cost > 0 and math.isfinite(cost)):
                raise ValueError(f"{name} must be strictly positive and finite")

    @property
    def flip_costs(self) -> Tuple[float, float]:
        return (self.move_cost_defender, self.move_cost_attacker)

    def flipit_params(self, value_defender: float, value_attacker: float) -> FlipItParams:
        return FlipItParams(
            move_cost_defender=self.move_cost_defender,
            move_cost_attacker=self.move_cost_attacker,
            value_defender=value_defender,
            value_attacker=value_attacker,
        )


@dataclass(frozen=True)
class MapEvaluation:
    """One evaluation of the composite map at a prior."""

    p: float
    profile: PBEProfile
    flip: FlipItEquilibrium

    @property
    def equilibrium_id(self) -> EquilibriumId:
        return self.profile.equilibrium_id

    @property
    def utilities(self) -> Tuple[float, float]:
        return self.profile.utilities.senders

    @property
    def composite(self) -> float:
        return self.flip.control_ratio

    @property
    def gap(self) -> float:
        return self.flip.control_ratio - self.p


@dataclass(frozen=True)
class BoundarySide:
    """The selected equilibrium on one side of a jump."""

    p: float
    equilibrium_id: EquilibriumId
    utilities: Tuple[float, float]
    composite: float


@dataclass(frozen=True)
class GestaltSolution:
    """A fixed point (certified) or a jump where g changes sign (uncertified)."""

    p_dagger: float
    utilities: Tuple[float, float]
    pbe: PBEProfile
    flip: FlipItEquilibrium
    certified: bool
    residual: float
    sides: Optional[Tuple[BoundarySide, BoundarySide]] = field(default=None)


class CurveExport(NamedTuple):
    """Samples of the signaling curve (ratio against p) and the FlipIt curve (p against ratio)."""

    solid: pd.DataFrame
    dashed: pd.DataFrame


def _check_prior(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def _select(p: float, game: CloudControlGame) -> PBEProfile:
    try:
        return t_s_profile(
            p,
            game.signaling,
            policy=game.selection_policy,
            off_path=game.off_path_policy,
            zero_tolerance=game.zero_tolerance,
        )
    except NoSelectionError as error:
        if error.context.prior is None:
            error.context.prior = p
        raise


def evaluate_map(p: float, game: CloudControlGame) -> MapEvaluation:
    """Select the equilibrium at ``p`` and solve FlipIt for its utilities."""
    _check_prior(p)
    profile = _select(p, game)
    d, a = profile.utilities.senders
    flip = nash_equilibrium(game.flipit_params(d, a))
    return MapEvaluation(p=p, profile=profile, flip=flip)


def composite_map(p: float, game: CloudControlGame) -> float:
    """T^F(T^S(p)) under the game's selection policy.

    Raises:
        NoSelectionError: With the offending p attached
    """
    return evaluate_map(p, game).composite


def _grid(game: CloudControlGame) -> np.ndarray:
    return np.linspace(0.0, 1.0, game.grid_resolution)


def _certified(evaluation: MapEvaluation) -> GestaltSolution:
    return GestaltSolution(
        p_dagger=evaluation.p,
        utilities=evaluation.utilities,
        pbe=evaluation.profile,
        flip=evaluation.flip,
        certified=True,
        residual=abs(evaluation.gap),
    )


class _Scanner:
    """Bracketing search over one branch of the composite map."""

    def __init__(self, game: CloudControlGame, evaluate):
        self.game = game
        self.evaluate = evaluate
        self.tol = game.fixed_point_tolerance
        self.solutions: List[GestaltSolution] = []

    def _add(self, solution: GestaltSolution) -> None:
        for existing in self.solutions:
            if existing.certified == solution.certified and abs(
                existing.p_dagger - solution.p_dagger
            ) <= 2 * self.tol:
                return
        self.solutions.append(solution)

    def _root(self, lo: MapEvaluation, hi: MapEvaluation) -> None:
        """Bisect a sign change of g inside a cell where the equilibrium id is constant."""
        root = brentq(
            lambda p: self.evaluate(p).gap,
            lo.p,
            hi.p,
            xtol=self.tol / 4,
        )
        evaluation = self.evaluate(float(root))
        if abs(evaluation.gap) <= self.tol:
            self._add(_certified(evaluation))
        else:
            logger.debug(f"Bracketed root at p={root:.12g} failed certification")

    def _switch(self, lo: MapEvaluation, hi: MapEvaluation) -> Tuple[MapEvaluation, MapEvaluation]:
        """Shrink a cell with an equilibrium change to a bracket of width ≤ tolerance."""
        while hi.p - lo.p > self.tol:
            mid = self.evaluate(0.5 * (lo.p + hi.p))
            if mid.equilibrium_id == lo.equilibrium_id and mid.utilities == lo.utilities:
                lo = mid
            else:
                hi = mid
        return lo, hi

    def _cell(self, lo: MapEvaluation, hi: MapEvaluation) -> None:
        if lo.gap * hi.gap > 0:
            return
        if abs(lo.gap) <= self.tol or abs(hi.gap) <= self.tol:
            return  # grid point zeros are recorded by scan()
        same_branch = lo.equilibrium_id == hi.equilibrium_id and lo.utilities == hi.utilities
        if same_branch:
            self._root(lo, hi)
            return

        left, right = self._switch(lo, hi)
        found = False
        for a, b in ((lo, left), (right, hi)):
            if a.gap * b.gap < 0:
                self._root(a, b)
                found = True
            elif abs(b.gap) <= self.tol or abs(a.gap) <= self.tol:
                zero = a if abs(a.gap) <= self.tol else b
                self._add(_certified(zero))
                found = True
        if not found and left.gap * right.gap < 0:
            self._boundary(left, right)

    def _boundary(self, left: MapEvaluation, right: MapEvaluation) -> None:
        crossing = 0.5 * (left.p + right.p)
        at_crossing = self.evaluate(crossing)
        sides = tuple(
            BoundarySide(
                p=side.p,
                equilibrium_id=side.equilibrium_id,
                utilities=side.utilities,
                composite=side.composite,
            )
            for side in (left, right)
        )
        logger.info(
            f"Uncertified boundary candidate at p={crossing:.9f} between "
            f"{left.equilibrium_id.label} and {right.equilibrium_id.label}"
        )
        self._add(
            GestaltSolution(
                p_dagger=crossing,
                utilities=at_crossing.utilities,
                pbe=at_crossing.profile,
                flip=at_crossing.flip,
                certified=False,
                residual=abs(at_crossing.gap),
                sides=sides,  # type: ignore[arg-type]
            )
        )

    def scan(self, evaluations: List[Optional[MapEvaluation]]) -> List[GestaltSolution]:
        for evaluation in evaluations:
            if evaluation is not None and abs(evaluation.gap) <= self.tol:
                self._add(_certified(evaluation))
        for lo, hi in zip(evaluations, evaluations[1:]):
            if lo is not None and hi is not None:
                self._cell(lo, hi)
        return sorted(self.solutions, key=lambda s: (s.p_dagger, not s.certified))


def scan_fixed_points(game: CloudControlGame) -> List[GestaltSolution]:
    """Certified fixed points and uncertified jump candidates, in ascending p.

    An empty list is a valid outcome. Under the enumerate policy the
    per-branch solutions are merged.
    """
    require_assumptions(game.signaling)

    if game.selection_policy is SelectionPolicy.ENUMERATE:
        merged = [s for branch in scan_fixed_points_by_branch(game).values() for s in branch]
        return sorted(merged, key=lambda s: (s.p_dagger, not s.certified))

    evaluations: List[Optional[MapEvaluation]] = [
        evaluate_map(float(p), game) for p in _grid(game)
    ]
    solutions = _Scanner(game, lambda p: evaluate_map(p, game)).scan(evaluations)

    if not any(s.certified for s in solutions):
        logger.warning("No certified Gestalt equilibrium found")
    logger.info(
        f"Gestalt scan: {sum(s.certified for s in solutions)} certified, "
        f"{sum(not s.certified for s in solutions)} boundary candidates"
    )
    return solutions


def _branch_evaluation(
    p: float, game: CloudControlGame, equilibrium_id: EquilibriumId
) -> Optional[MapEvaluation]:
    for profile in enumerate_pbe(
        game.signaling, p, off_path=game.off_path_policy, zero_tolerance=game.zero_tolerance
    ):
        if profile.equilibrium_id is equilibrium_id:
            d, a = profile.utilities.senders
            return MapEvaluation(p=p, profile=profile, flip=nash_equilibrium(game.flipit_params(d, a)))
    return None


def scan_fixed_points_by_branch(
    game: CloudControlGame,
) -> Dict[EquilibriumId, List[GestaltSolution]]:
    """Fixed points of p -> T^F(utilities of one equilibrium family at p), per family.

    Only priors where the family exists are scanned; jumps in existence are
    never reported as candidates.
    """
    require_assumptions(game.signaling)
    grid = _grid(game)
    per_p = [
        enumerate_pbe(
            game.signaling,
            float(p),
            off_path=game.off_path_policy,
            zero_tolerance=game.zero_tolerance,
        )
        for p in grid
    ]
    present = sorted(
        {prof.equilibrium_id for profiles in per_p for prof in profiles}, key=lambda e: e.value
    )

    results: Dict[EquilibriumId, List[GestaltSolution]] = {}
    for equilibrium_id in present:
        evaluations: List[Optional[MapEvaluation]] = []
        for p, profiles in zip(grid, per_p):
            match = next((prof for prof in profiles if prof.equilibrium_id is equilibrium_id), None)
            if match is None:
                evaluations.append(None)
                continue
            d, a = match.utilities.senders
            evaluations.append(
                MapEvaluation(
                    p=float(p), profile=match, flip=nash_equilibrium(game.flipit_params(d, a))
                )
            )

        def evaluate(p: float, equilibrium_id=equilibrium_id) -> MapEvaluation:
            evaluation = _branch_evaluation(p, game, equilibrium_id)
            if evaluation is None:
                raise ValueError(f"{equilibrium_id.label} does not exist at p={p}")
            return evaluation

        solutions = _Scanner(game, evaluate).scan(evaluations)
        results[equilibrium_id] = [s for s in solutions if s.certified]
        logger.debug(f"{equilibrium_id.label}: {len(results[equilibrium_id])} fixed points")
    return results


def curve_export(game: CloudControlGame) -> CurveExport:
    """Data for plotting both maps on one set of axes.

    ``solid`` holds, per grid prior, the selected equilibrium, its sender
    utilities, their ratio ū_A/ū_D and the composite value. ``dashed`` holds
    T^F sampled over ratios spanning the solid curve.
    """
    rows = []
    for p in _grid(game):
        evaluation = evaluate_map(float(p), game)
        d, a = evaluation.utilities
        rows.append(
            {
                "p": float(p),
                "equilibrium_id": evaluation.equilibrium_id.value,
                "value_defender": d,
                "value_attacker": a,
                "ratio": value_ratio(d, a),
                "composite": evaluation.composite,
            }
        )
    solid = pd.DataFrame(rows)

    finite = solid["ratio"][np.isfinite(solid["ratio"])]
    upper = max(2.0, 1.5 * float(finite.max())) if not finite.empty else 2.0
    ratios = np.linspace(0.0, upper, game.grid_resolution)
    dashed_p = [t_f(1.0, float(r), *game.flip_costs) for r in ratios]
    dashed = pd.DataFrame({"ratio": ratios, "p": dashed_p})
    if np.isinf(solid["ratio"]).any():
        dashed = pd.concat(
            [dashed, pd.DataFrame({"ratio": [math.inf], "p": [t_f(0.0, 1.0, *game.flip_costs)]})],
            ignore_index=True,
        )
    return CurveExport(solid=solid, dashed=dashed)

"""Tests for the closed-form FlipIt analysis."""

import math

import numpy as np
import pytest

from cloudcontrol.flipit import (
    FlipItParams,
    NashCase,
    PeriodicProfile,
    Player,
    best_response_frequency,
    control_ratio,
    flipit_payoffs,
    nash_equilibrium,
    payoff_curve,
    t_f,
    value_ratio,
)

SEARCH_GRID = np.linspace(0.0, 20.0, 20001)


def _params(v_d: float, v_a: float, c_d: float = 0.25, c_a: float = 0.25) -> FlipItParams:
    return FlipItParams(
        move_cost_defender=c_d, move_cost_attacker=c_a, value_defender=v_d, value_attacker=v_a
    )


def _assert_no_profitable_deviation(params: FlipItParams, eps: float = 1e-9) -> None:
    eq = nash_equilibrium(params)
    f_d, f_a = eq.profile.freq_defender, eq.profile.freq_attacker
    single = eq.profile.attacker_single_move
    defender_best = payoff_curve(Player.DEFENDER, f_a, params, SEARCH_GRID, single).max()
    attacker_best = payoff_curve(Player.ATTACKER, f_d, params, SEARCH_GRID).max()
    assert defender_best <= eq.payoff_defender + eps
    if not single:
        assert attacker_best <= eq.payoff_attacker + eps


class TestFlipItParams:
    """Test parameter validation."""

    def test_costs_must_be_positive(self):
        """Test that zero and negative move costs are rejected."""
        with pytest.raises(ValueError, match="move_cost_defender"):
            _params(1.0, 1.0, c_d=0.0)
        with pytest.raises(ValueError, match="move_cost_attacker"):
            _params(1.0, 1.0, c_a=-1.0)

    def test_values_must_be_finite(self):
        """Test that infinite values are rejected."""
        with pytest.raises(ValueError, match="value_attacker"):
            _params(1.0, math.inf)

    def test_negative_values_allowed(self):
        """Test that signaling values may be negative."""
        assert _params(-1.0, -2.0).value(Player.ATTACKER) == -2.0

    def test_profile_validation(self):
        """Test that frequencies are non-negative and the single move excludes a rate."""
        with pytest.raises(ValueError):
            PeriodicProfile(freq_defender=-1.0, freq_attacker=0.0)
        with pytest.raises(ValueError, match="attacker_single_move"):
            PeriodicProfile(freq_defender=0.0, freq_attacker=1.0, attacker_single_move=True)

    def test_player_accessors(self):
        """Test per-player lookups."""
        params = _params(2.0, 1.0, c_d=0.5, c_a=0.25)
        assert params.move_cost(Player.DEFENDER) == 0.5
        assert params.value(Player.DEFENDER) == 2.0
        assert Player.DEFENDER.opponent is Player.ATTACKER
        assert PeriodicProfile(3.0, 1.0).freq(Player.ATTACKER) == 1.0


class TestControlRatio:
    """Test the share of time the attacker holds the cloud."""

    def test_defender_faster(self):
        """Test f_A / (2 f_D) when the defender moves at least as often."""
        assert control_ratio(2.0, 1.0) == 0.25
        assert control_ratio(2.0, 2.0) == 0.5

    def test_attacker_faster(self):
        """Test 1 - f_D / (2 f_A) when the attacker moves more often."""
        assert control_ratio(1.0, 2.0) == 0.75
        assert control_ratio(0.0, 2.0) == 1.0

    def test_no_attack(self):
        """Test that an idle attacker never controls the cloud."""
        assert control_ratio(3.0, 0.0) == 0.0
        assert control_ratio(0.0, 0.0) == 0.0

    def test_single_move(self):
        """Test that one unanswered attacker move keeps the cloud."""
        assert control_ratio(0.0, 0.0, attacker_single_move=True) == 1.0
        assert control_ratio(1.0, 0.0, attacker_single_move=True) == 0.0


class TestPayoffs:
    """Test the time-averaged payoffs of periodic profiles."""

    def test_balanced_profile(self):
        """Test both payoffs vanish at the balanced equilibrium of unit values."""
        assert flipit_payoffs(2.0, 2.0, _params(1.0, 1.0)) == pytest.approx((0.0, 0.0))

    def test_idle_attacker(self):
        """Test the defender pays only its own moves against an idle attacker."""
        assert flipit_payoffs(1.0, 0.0, _params(2.0, 1.0)) == (1.75, 0.0)

    def test_single_move_payoffs(self):
        """Test the single attacker move against a passive and an active defender."""
        params = _params(1.0, 3.0)
        assert flipit_payoffs(0.0, 0.0, params, attacker_single_move=True) == (0.0, 3.0)
        assert flipit_payoffs(1.0, 0.0, params, attacker_single_move=True) == (0.75, 0.0)

    def test_negative_frequency_rejected(self):
        """Test that frequencies must be non-negative."""
        with pytest.raises(ValueError):
            flipit_payoffs(-1.0, 1.0, _params(1.0, 1.0))

    def test_curve_matches_pointwise_payoffs(self):
        """Test the vectorized curve against the scalar payoff formula."""
        params = _params(2.0, 1.0)
        grid = np.linspace(0.0, 6.0, 61)
        defender = payoff_curve(Player.DEFENDER, 1.0, params, grid)
        attacker = payoff_curve(Player.ATTACKER, 2.0, params, grid)
        for i, f in enumerate(grid):
            assert defender[i] == pytest.approx(flipit_payoffs(float(f), 1.0, params)[0])
            assert attacker[i] == pytest.approx(flipit_payoffs(2.0, float(f), params)[1])

    def test_curve_against_single_move(self):
        """Test the defender curve when the attacker moves once."""
        curve = payoff_curve(Player.DEFENDER, 0.0, _params(1.0, 1.0), [0.0, 1.0], True)
        assert curve.tolist() == [0.0, 0.75]

    def test_curve_rejects_negative_grid(self):
        """Test that the grid must be non-negative."""
        with pytest.raises(ValueError):
            payoff_curve(Player.ATTACKER, 1.0, _params(1.0, 1.0), [-1.0, 0.0])


class TestNashEquilibrium:
    """Test the five-case Nash equilibrium."""

    def test_balanced_case(self):
        """Test equal cost-to-value ratios."""
        eq = nash_equilibrium(_params(1.0, 1.0))
        assert eq.case is NashCase.BALANCED
        assert (eq.profile.freq_defender, eq.profile.freq_attacker) == (2.0, 2.0)
        assert eq.control_ratio == 0.5
        assert (eq.payoff_defender, eq.payoff_attacker) == pytest.approx((0.0, 0.0))

    def test_defender_favored_case(self):
        """Test the defender with the lower cost-to-value ratio moves faster."""
        eq = nash_equilibrium(_params(2.0, 1.0))
        assert eq.case is NashCase.DEFENDER_FAVORED
        assert eq.profile.freq_defender == pytest.approx(2.0)
        assert eq.profile.freq_attacker == pytest.approx(1.0)
        assert eq.control_ratio == pytest.approx(0.25)

    def test_attacker_favored_case(self):
        """Test the attacker with the lower cost-to-value ratio moves faster."""
        eq = nash_equilibrium(_params(1.0, 2.0))
        assert eq.case is NashCase.ATTACKER_FAVORED
        assert eq.profile.freq_defender == pytest.approx(1.0)
        assert eq.profile.freq_attacker == pytest.approx(2.0)
        assert eq.control_ratio == pytest.approx(0.75)

    @pytest.mark.parametrize("v_a", [0.0, -1.0])
    def test_no_attack_case(self, v_a):
        """Test that a worthless cloud deters every attack."""
        eq = nash_equilibrium(_params(2.0, v_a))
        assert eq.case is NashCase.NO_ATTACK
        assert eq.control_ratio == 0.0
        assert (eq.payoff_defender, eq.payoff_attacker) == (2.0, 0.0)

    @pytest.mark.parametrize("v_d", [0.0, -0.5])
    def test_single_attack_case(self, v_d):
        """Test that a defender without value concedes after one attacker move."""
        eq = nash_equilibrium(_params(v_d, 1.5))
        assert eq.case is NashCase.SINGLE_ATTACK
        assert eq.profile.attacker_single_move
        assert eq.control_ratio == 1.0
        assert (eq.payoff_defender, eq.payoff_attacker) == (0.0, 1.5)

    def test_t_f_returns_control_ratio(self):
        """Test the value-pair-to-ratio map."""
        assert t_f(2.0, 1.0, 0.25, 0.25) == pytest.approx(0.25)
        assert t_f(1.0, 0.0, 0.25, 0.25) == 0.0

    @pytest.mark.parametrize("values", [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)])
    def test_equilibrium_has_no_profitable_deviation(self, values):
        """Test both frequencies against a fine grid of deviations."""
        _assert_no_profitable_deviation(_params(*values))

    def test_defender_best_response_is_unique_when_favored(self):
        """Test the favored defender's best response is its equilibrium rate."""
        params = _params(2.0, 1.0)
        eq = nash_equilibrium(params)
        br = best_response_frequency(eq.profile.freq_attacker, Player.DEFENDER, params, SEARCH_GRID)
        assert br == pytest.approx(eq.profile.freq_defender, abs=2e-3)

    def test_best_response_ties_go_to_lowest_frequency(self):
        """Test that a flat payoff resolves to the lowest grid frequency."""
        params = _params(1.0, 1.0)
        assert best_response_frequency(2.0, Player.ATTACKER, params, SEARCH_GRID) == 0.0

    def test_best_response_needs_grid(self):
        """Test that an empty search grid is rejected."""
        with pytest.raises(ValueError):
            best_response_frequency(1.0, Player.DEFENDER, _params(1.0, 1.0), [])

    @pytest.mark.slow
    def test_random_draws_per_case(self):
        """Test every regime on random parameters, including exact balanced ties."""
        rng = np.random.default_rng(7)
        seen = {case: 0 for case in NashCase}
        for _ in range(60):
            v_d, v_a = rng.uniform(0.2, 4.0, size=2)
            c_d, c_a = rng.uniform(0.1, 1.0, size=2)
            params = _params(float(v_d), float(v_a), float(c_d), float(c_a))
            seen[nash_equilibrium(params).case] += 1
            _assert_no_profitable_deviation(params)

            scale = 2.0 ** int(rng.integers(-3, 0))
            balanced = _params(float(v_d), float(v_a), float(v_d * scale), float(v_a * scale))
            eq = nash_equilibrium(balanced)
            assert eq.case is NashCase.BALANCED
            seen[eq.case] += 1
            _assert_no_profitable_deviation(balanced)

            assert nash_equilibrium(_params(float(v_d), -float(v_a))).case is NashCase.NO_ATTACK
            assert nash_equilibrium(_params(-float(v_d), float(v_a))).case is NashCase.SINGLE_ATTACK
        assert seen[NashCase.DEFENDER_FAVORED] > 0
        assert seen[NashCase.ATTACKER_FAVORED] > 0


class TestValueRatio:
    """Test the utility ratio used on the shared plot axis."""

    def test_ordinary_ratio(self):
        """Test a plain quotient."""
        assert value_ratio(2.0, 1.0) == 0.5

    def test_zero_defender_value(self):
        """Test the conventions for a zero defender value."""
        assert value_ratio(0.0, 1.0) == math.inf
        assert value_ratio(0.0, 0.0) == 0.0
        assert value_ratio(0.0, -1.0) == 0.0

    def test_negative_values(self):
        """Test that negative values map onto the no-attack and single-attack ends."""
        assert value_ratio(-1.0, 2.0) == math.inf
        assert value_ratio(2.0, -1.0) == 0.0
        assert value_ratio(-2.0, -1.0) == 0.0

    def test_ratio_determines_control_ratio(self):
        """Test T^F(ū_D, ū_A) equals T^F at (1, ratio), or at (0, 1) for an infinite ratio."""
        rng = np.random.default_rng(17)
        for v_d, v_a in rng.uniform(-2.0, 3.0, size=(500, 2)):
            ratio = value_ratio(v_d, v_a)
            assert ratio >= 0.0
            if math.isinf(ratio):
                expected = t_f(0.0, 1.0, 0.25, 0.4)
            else:
                expected = t_f(1.0, ratio, 0.25, 0.4)
            assert t_f(v_d, v_a, 0.25, 0.4) == pytest.approx(expected, abs=1e-12)


class TestControlRatioMap:
    """Test properties of the value-to-control-ratio map."""

    def test_scale_invariant(self):
        """Test that scaling both values by a positive factor keeps the control ratio."""
        rng = np.random.default_rng(23)
        for v_d, v_a, scale in zip(
            rng.uniform(-1.0, 3.0, 300), rng.uniform(-1.0, 3.0, 300), rng.uniform(0.1, 10.0, 300)
        ):
            assert t_f(scale * v_d, scale * v_a, 0.3, 0.2) == pytest.approx(
                t_f(v_d, v_a, 0.3, 0.2), abs=1e-12
            )

    @pytest.mark.parametrize("v_d", [0.5, 1.0, 4.0])
    def test_monotone_in_attacker_value(self, v_d):
        """Test that a more valuable cloud never lowers the attacker's share."""
        ratios = [t_f(v_d, float(v_a), 0.25, 0.5) for v_a in np.linspace(-1.0, 10.0, 1101)]
        assert all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
        assert ratios[0] == 0.0
        assert ratios[-1] > 0.5

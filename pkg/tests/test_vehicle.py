"""Tests for the cloud-controlled vehicle model."""

import logging
import math

import numpy as np
import pytest

from cloudcontrol.error_handling import EXIT_DIVERGENCE, DivergenceError
from cloudcontrol.signaling import Action, CloudType, Message, ReceiverStrategy
from cloudcontrol.vehicle import (
    CloudCommandSource,
    CloudSchedule,
    GainVector,
    VehicleParams,
    VehicleState,
    adversarial_offset_source,
    closed_loop_matrix,
    closed_loop_reference,
    dynamics_derivative,
    faithful_source,
    feedback_control,
    noisy_benign_source,
    risk_filter,
    rk4_step,
    simulate_trajectory,
    system_matrices,
)

NEVER_TRUST = ReceiverStrategy(trust_given_high=0.0, trust_given_low=0.0)
TRUST_HIGH = ReceiverStrategy(trust_given_high=1.0, trust_given_low=1.0)
TRUST_LOW = ReceiverStrategy(trust_given_high=0.0, trust_given_low=1.0)
START = VehicleState(lateral=1.0, heading=0.0)


def _schedule(attacker_share: float = 0.0, defender=None, attacker=None) -> CloudSchedule:
    return CloudSchedule(
        defender=defender or faithful_source(),
        attacker=attacker or adversarial_offset_source(0.2),
        attacker_share=attacker_share,
    )


def _run(params, gains, receiver, schedule, dt=0.01, horizon=10.0, threshold=0.1, seed=7, **kw):
    return simulate_trajectory(
        initial=kw.pop("initial", START),
        params=params,
        gains=gains,
        threshold=threshold,
        receiver=receiver,
        schedule=schedule,
        dt=dt,
        horizon=horizon,
        seed=seed,
        **kw,
    )


class TestVehicleModel:
    """Test parameters, states and the linear model."""

    def test_invalid_geometry_rejected(self):
        """Test that speed and lengths must be positive."""
        with pytest.raises(ValueError, match="speed"):
            VehicleParams(speed=0.0, cg_to_rear=0.5, wheelbase=1.0)
        with pytest.raises(ValueError, match="wheelbase"):
            VehicleParams(speed=1.0, cg_to_rear=0.5, wheelbase=math.nan)

    def test_long_rear_overhang_warns(self, caplog):
        """Test a center of gravity beyond the wheelbase logs a warning."""
        with caplog.at_level(logging.WARNING, logger="cloudcontrol.vehicle"):
            VehicleParams(speed=1.0, cg_to_rear=2.0, wheelbase=1.0)
        assert "not shorter than the wheelbase" in caplog.text

    def test_step_bound(self):
        """Test the integration step bound 0.1·b/v0."""
        assert VehicleParams(speed=2.0, cg_to_rear=0.5, wheelbase=1.0).max_step == 0.05

    def test_state_helpers(self):
        """Test state conversions and the small-angle check."""
        state = VehicleState.from_array(np.array([0.5, -0.4]))
        assert state.as_array().tolist() == [0.5, -0.4]
        assert not state.small_angle_ok()
        assert state.small_angle_ok(bound=0.5)
        with pytest.raises(ValueError):
            VehicleState(lateral=math.inf, heading=0.0)

    def test_system_matrices(self):
        """Test A and B of the linearized bicycle model."""
        params = VehicleParams(speed=2.0, cg_to_rear=0.5, wheelbase=1.0)
        state_matrix, input_vector = system_matrices(params)
        assert state_matrix.tolist() == [[0.0, 2.0], [0.0, 0.0]]
        assert input_vector.tolist() == [1.0, 2.0]

    def test_dynamics_and_feedback(self, unit_vehicle, unit_gains):
        """Test the derivative and the on-board command."""
        assert dynamics_derivative(VehicleState(0.0, 1.0), 1.0, unit_vehicle).tolist() == [2.0, 1.0]
        assert dynamics_derivative(np.array([1.0, 0.0]), 0.0, unit_vehicle).tolist() == [0.0, 0.0]
        assert feedback_control(START, unit_gains) == -1.0
        assert feedback_control(np.array([0.5, 0.5]), GainVector(2.0, 4.0)) == -3.0


class TestClosedLoop:
    """Test gain placement and the closed-loop matrix."""

    def test_unit_closed_loop(self, unit_vehicle, unit_gains):
        """Test both eigenvalues at -1 for the unit vehicle."""
        loop = closed_loop_matrix(unit_vehicle, unit_gains)
        assert loop.matrix.tolist() == [[-1.0, 0.0], [-1.0, -1.0]]
        assert loop.eigenvalues == (complex(-1.0, 0.0), complex(-1.0, 0.0))
        assert loop.is_stable

    def test_double_pole_gains(self, unit_vehicle):
        """Test the placement formula on the unit vehicle and a general one."""
        assert GainVector.for_double_pole(unit_vehicle, 1.0) == GainVector(1.0, 1.0)

        params = VehicleParams(speed=1.0, cg_to_rear=0.5, wheelbase=1.0)
        gains = GainVector.for_double_pole(params, 2.0)
        for eigenvalue in closed_loop_matrix(params, gains).eigenvalues:
            assert eigenvalue.real == pytest.approx(-2.0)
            assert eigenvalue.imag == pytest.approx(0.0, abs=1e-6)

    def test_double_pole_needs_positive_rate(self, unit_vehicle):
        """Test that the pole rate must be positive."""
        with pytest.raises(ValueError):
            GainVector.for_double_pole(unit_vehicle, 0.0)

    def test_unstable_gains(self, unit_vehicle):
        """Test a negative position gain gives an unstable loop."""
        loop = closed_loop_matrix(unit_vehicle, GainVector(-1.0, 0.0))
        assert not loop.is_stable

    def test_reference_solution(self, unit_vehicle, unit_gains):
        """Test the matrix exponential against z = e^-t, θ = -t·e^-t."""
        times = np.array([0.0, 1.0, 2.5])
        states = closed_loop_reference(unit_vehicle, unit_gains, START, times)
        expected = np.column_stack([np.exp(-times), -times * np.exp(-times)])
        np.testing.assert_allclose(states, expected, atol=1e-10)


class TestRiskFilter:
    """Test the High/Low classification of cloud commands."""

    def test_classification(self):
        """Test that only a difference strictly above the threshold is High."""
        assert risk_filter(0.5, 0.0, 0.1) is Message.HIGH
        assert risk_filter(-0.5, 0.0, 0.1) is Message.HIGH
        assert risk_filter(0.05, 0.0, 0.1) is Message.LOW
        assert risk_filter(0.25, 0.0, 0.25) is Message.LOW

    def test_exhaustive_difference_grid(self):
        """Test every difference k/4096 with |k| <= 5000, including both exact boundaries."""
        threshold = 0.25
        steps = np.arange(-5000, 5001)
        differences = steps / 4096.0
        assert threshold in differences and -threshold in differences
        for delta_car in (0.0, 0.5):
            for step, diff in zip(steps, differences):
                expected = Message.HIGH if abs(step) > 1024 else Message.LOW
                assert risk_filter(delta_car + diff, delta_car, threshold) is expected

    def test_symmetric_in_commands(self):
        """Test that swapping the cloud and on-board commands keeps the classification."""
        rng = np.random.default_rng(3)
        for x, y, threshold in zip(
            rng.uniform(-1.0, 1.0, 1000), rng.uniform(-1.0, 1.0, 1000), rng.uniform(0.0, 1.0, 1000)
        ):
            assert risk_filter(x, y, threshold) is risk_filter(y, x, threshold)

    def test_negative_threshold_rejected(self):
        """Test that the threshold must be non-negative."""
        with pytest.raises(ValueError):
            risk_filter(0.0, 0.0, -0.1)


class TestIntegration:
    """Test the RK4 integrator."""

    def test_single_step_accuracy(self):
        """Test one step of x' = -x against e^-dt."""
        value = rk4_step(lambda x: -x, np.array([1.0]), 0.1)[0]
        assert value == pytest.approx(math.exp(-0.1), abs=1e-7)

    def test_never_trust_matches_exact_solution(self, unit_vehicle, unit_gains):
        """Test the on-board loop against the matrix exponential."""
        trajectory = _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), dt=1e-3)
        reference = closed_loop_reference(
            unit_vehicle, unit_gains, START, trajectory.times[::100]
        )
        assert np.max(np.abs(trajectory.states[::100] - reference)) <= 1e-6
        assert np.linalg.norm(trajectory.final_state.as_array()) == pytest.approx(
            math.sqrt(101.0) * math.exp(-10.0), rel=1e-4
        )

    def test_fourth_order_convergence(self, unit_vehicle, unit_gains):
        """Test that halving the step cuts the error about sixteenfold."""
        errors = []
        for dt in (0.1, 0.05):
            trajectory = _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), dt=dt, horizon=5.0)
            exact = closed_loop_reference(unit_vehicle, unit_gains, START, [5.0])[0]
            errors.append(np.max(np.abs(trajectory.states[-1] - exact)))
        assert 12.0 <= errors[0] / errors[1] <= 20.0

    @pytest.mark.parametrize("horizon, steps", [(1.005, 101), (0.004, 1), (2.0, 200)])
    def test_trajectory_ends_at_horizon(self, unit_vehicle, unit_gains, horizon, steps):
        """Test a horizon off the dt grid ends with one shorter step at the horizon itself."""
        trajectory = _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), dt=0.01, horizon=horizon)
        assert len(trajectory.times) == steps + 1
        assert trajectory.times[-1] == horizon
        assert np.all(np.diff(trajectory.times) <= 0.01 + 1e-15)
        exact = closed_loop_reference(unit_vehicle, unit_gains, START, [horizon])[0]
        assert np.max(np.abs(trajectory.states[-1] - exact)) <= 1e-8

    def test_step_above_bound_rejected(self, unit_vehicle, unit_gains):
        """Test that dt must not exceed 0.1·b/v0."""
        with pytest.raises(ValueError, match="step bound"):
            _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), dt=0.2)

    def test_invalid_run_settings(self, unit_vehicle, unit_gains):
        """Test that dt, horizon and threshold are validated."""
        with pytest.raises(ValueError, match="dt"):
            _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), dt=0.0)
        with pytest.raises(ValueError, match="horizon"):
            _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), horizon=0.0)
        with pytest.raises(ValueError, match="threshold"):
            _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule(), threshold=-1.0)


class TestCloudSources:
    """Test command sources and schedules."""

    def test_canonical_sources(self):
        """Test issuers and perturbations of the three canonical sources."""
        rng = np.random.default_rng(0)
        assert faithful_source().perturbation(rng) == 0.0
        assert adversarial_offset_source(0.3).perturbation(rng) == 0.3
        assert adversarial_offset_source(0.3).issuer is CloudType.ATTACKER
        noisy = noisy_benign_source(0.05)
        assert noisy.issuer is CloudType.DEFENDER
        draws = [noisy.perturbation(rng) for _ in range(200)]
        assert all(-0.05 <= d <= 0.05 for d in draws)
        assert len(set(draws)) > 1

    def test_custom_policy(self):
        """Test a policy replaces the feedback term."""
        source = CloudCommandSource(label="hold", issuer=CloudType.DEFENDER, policy=lambda t, w: 0.7)
        assert source.command(0.0, np.zeros(2), GainVector(1.0, 1.0), 0.1) == pytest.approx(0.8)

    def test_non_finite_command_rejected(self):
        """Test a source producing NaN is reported."""
        source = CloudCommandSource(
            label="broken", issuer=CloudType.ATTACKER, policy=lambda t, w: math.nan
        )
        with pytest.raises(ValueError, match="broken"):
            source.command(0.0, np.zeros(2), GainVector(1.0, 1.0), 0.0)

    def test_source_validation(self):
        """Test offset and noise bound validation."""
        with pytest.raises(ValueError):
            CloudCommandSource(label="x", issuer=CloudType.DEFENDER, noise_bound=-0.1)
        with pytest.raises(ValueError):
            CloudCommandSource(label="x", issuer=CloudType.DEFENDER, offset=math.inf)

    def test_schedule_validation(self):
        """Test the attacker share must be a probability."""
        with pytest.raises(ValueError):
            _schedule(attacker_share=1.5)


class TestTrajectories:
    """Test closed-loop runs under different trust strategies."""

    def test_trusted_offset_pushes_vehicle(self, unit_vehicle, unit_gains):
        """Test a trusted adversarial offset of twice the threshold shifts the lateral position."""
        baseline = _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule())
        attacked = _run(unit_vehicle, unit_gains, TRUST_HIGH, _schedule(attacker_share=1.0))

        assert all(m is Message.HIGH for m in attacked.messages)
        assert all(a is Action.TRUST for a in attacked.actions)
        assert all(o is CloudType.ATTACKER for o in attacked.owners)
        assert np.all(attacked.states[1:, 0] > baseline.states[1:, 0])
        difference = attacked.final_state.lateral - baseline.final_state.lateral
        assert difference == pytest.approx(0.2, abs=1e-3)
        np.testing.assert_allclose(attacked.applied_steering, attacked.cloud_steering)

    def test_rejected_offset_is_harmless(self, unit_vehicle, unit_gains):
        """Test rejecting High messages neutralizes the adversarial offset."""
        baseline = _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule())
        guarded = _run(unit_vehicle, unit_gains, TRUST_LOW, _schedule(attacker_share=1.0))
        assert all(a is Action.NOT_TRUST for a in guarded.actions)
        np.testing.assert_array_equal(guarded.states, baseline.states)

    def test_faithful_cloud_reproduces_on_board_loop(self, unit_vehicle, unit_gains):
        """Test trusted Low messages from a faithful cloud change nothing."""
        baseline = _run(unit_vehicle, unit_gains, NEVER_TRUST, _schedule())
        trusted = _run(unit_vehicle, unit_gains, TRUST_LOW, _schedule())
        assert all(m is Message.LOW for m in trusted.messages)
        assert all(a is Action.TRUST for a in trusted.actions)
        np.testing.assert_array_equal(trusted.states, baseline.states)

    def test_small_noise_stays_low(self, unit_vehicle, unit_gains):
        """Test noise below the threshold is always classified Low."""
        schedule = _schedule(defender=noisy_benign_source(0.05))
        trajectory = _run(unit_vehicle, unit_gains, TRUST_LOW, schedule)
        assert all(m is Message.LOW for m in trajectory.messages)
        assert abs(trajectory.final_state.lateral) < 0.1

    def test_same_seed_reproduces(self, unit_vehicle, unit_gains):
        """Test that the seed fixes sources, noise and actions."""
        schedule = _schedule(attacker_share=0.5, defender=noisy_benign_source(0.05))
        receiver = ReceiverStrategy(trust_given_high=0.5, trust_given_low=1.0)
        first = _run(unit_vehicle, unit_gains, receiver, schedule, seed=3)
        second = _run(unit_vehicle, unit_gains, receiver, schedule, seed=3)
        np.testing.assert_array_equal(first.states, second.states)
        assert first.owners == second.owners
        assert first.actions == second.actions

    def test_divergence_raises(self, unit_vehicle):
        """Test an unstable loop stops with the failing step."""
        with pytest.raises(DivergenceError) as exc_info:
            _run(unit_vehicle, GainVector(-1.0, 0.0), NEVER_TRUST, _schedule(), divergence_bound=10.0)
        error = exc_info.value
        assert error.exit_code == EXIT_DIVERGENCE
        assert error.step >= 1
        assert error.norm > 10.0
        assert error.time == pytest.approx(error.step * 0.01)

    def test_small_angle_warning(self, unit_vehicle, unit_gains, caplog):
        """Test a large heading is flagged once and recorded per row."""
        with caplog.at_level(logging.WARNING, logger="cloudcontrol.vehicle"):
            trajectory = _run(
                unit_vehicle,
                unit_gains,
                NEVER_TRUST,
                _schedule(),
                initial=VehicleState(lateral=0.0, heading=0.5),
            )
        warnings = [r for r in caplog.records if "small-angle bound" in r.getMessage()]
        assert len(warnings) == 1
        assert not trajectory.small_angle_ok[0]
        assert trajectory.small_angle_ok[-1]

    def test_frame_layout(self, unit_vehicle, unit_gains):
        """Test the per-step table with an empty command on the final row."""
        trajectory = _run(unit_vehicle, unit_gains, TRUST_LOW, _schedule(), horizon=1.0)
        frame = trajectory.to_frame()
        assert list(frame.columns) == [
            "t",
            "lateral",
            "heading",
            "small_angle_ok",
            "applied_steering",
            "car_steering",
            "cloud_steering",
            "owner",
            "message",
            "action",
        ]
        assert len(frame) == 101
        assert frame["owner"].iloc[0] == "defender"
        assert frame["message"].iloc[0] == "low"
        assert frame["action"].iloc[0] == "trust"
        assert math.isnan(frame["applied_steering"].iloc[-1])
        assert frame["t"].iloc[-1] == pytest.approx(1.0)

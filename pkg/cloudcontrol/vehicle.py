"""Cloud-controlled unmanned vehicle.

Linearized bicycle-model lateral dynamics with on-board state feedback. At
each step a cloud issues a steering command, a risk filter labels it High or
Low by its distance from the on-board command, and the device trusts it or
falls back to its own controller according to a receiver strategy.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import expm

from .error_handling import DivergenceError
from .signaling import Action, CloudType, Message, ReceiverStrategy

logger = logging.getLogger(__name__)

DEFAULT_SMALL_ANGLE_BOUND = 0.3
DEFAULT_DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class VehicleParams:
    """Speed v0, rear-axle-to-center-of-gravity distance a and wheelbase b."""

    speed: float
    cg_to_rear: float
    wheelbase: float

    def __post_init__(self):
        for name in ("speed", "cg_to_rear", "wheelbase"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.cg_to_rear >= self.wheelbase:
            logger.warning(
                f"cg_to_rear ({self.cg_to_rear:g}) is not shorter than the wheelbase "
                f"({self.wheelbase:g})"
            )

    @property
    def max_step(self) -> float:
        """Largest accepted integration step."""
        return 0.1 * self.wheelbase / self.speed


@dataclass(frozen=True)
class VehicleState:
    """Lateral deviation z and heading θ (radians)."""

    lateral: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.lateral) and math.isfinite(self.heading)):
            raise ValueError("vehicle state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.lateral, self.heading], dtype=float)

    @classmethod
    def from_array(cls, values) -> "VehicleState":
        return cls(lateral=float(values[0]), heading=float(values[1]))

    def small_angle_ok(self, bound: float = DEFAULT_SMALL_ANGLE_BOUND) -> bool:
        return abs(self.heading) <= bound


@dataclass(frozen=True)
class GainVector:
    k1: float
    k2: float

    def __post_init__(self):
        if not (math.isfinite(self.k1) and math.isfinite(self.k2)):
            raise ValueError("gains must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.k1, self.k2], dtype=float)

    @classmethod
    def for_double_pole(cls, params: VehicleParams, rate: float = 1.0) -> "GainVector":
        """Gains putting both closed-loop eigenvalues at −rate.

        The characteristic polynomial is s² + v(a·k1 + k2)/b·s + v²·k1/b.
        """
        if not rate > 0:
            raise ValueError("rate must be positive")
        v, a, b = params.speed, params.cg_to_rear, params.wheelbase
        k1 = rate * rate * b / (v * v)
        k2 = 2.0 * rate * b / v - a * k1
        return cls(k1=k1, k2=k2)


@dataclass(frozen=True)
class ClosedLoop:
    matrix: np.ndarray
    eigenvalues: Tuple[complex, complex]

    @property
    def is_stable(self) -> bool:
        return all(ev.real < 0 for ev in self.eigenvalues)


def system_matrices(params: VehicleParams) -> Tuple[np.ndarray, np.ndarray]:
    """State matrix A and input vector B of the linearized model."""
    v, a, b = params.speed, params.cg_to_rear, params.wheelbase
    state_matrix = np.array([[0.0, v], [0.0, 0.0]])
    input_vector = np.array([a * v / b, v / b])
    return state_matrix, input_vector


def dynamics_derivative(state, steering: float, params: VehicleParams) -> np.ndarray:
    """(ż, θ̇) for a state (VehicleState or array) under steering angle δ."""
    z, theta = state.as_array() if isinstance(state, VehicleState) else state
    v, a, b = params.speed, params.cg_to_rear, params.wheelbase
    return np.array([v * theta + (a * v / b) * steering, (v / b) * steering])


def feedback_control(state, gains: GainVector) -> float:
    """On-board command δ_car = −(k1·z + k2·θ)."""
    z, theta = state.as_array() if isinstance(state, VehicleState) else state
    return -(gains.k1 * z + gains.k2 * theta)


def closed_loop_matrix(params: VehicleParams, gains: GainVector) -> ClosedLoop:
    """A − B·K with eigenvalues from the quadratic characteristic polynomial."""
    state_matrix, input_vector = system_matrices(params)
    matrix = state_matrix - np.outer(input_vector, gains.as_array())
    trace = matrix[0, 0] + matrix[1, 1]
    det = matrix[0, 0] * matrix[1, 1] - matrix[0, 1] * matrix[1, 0]
    root = cmath.sqrt(trace * trace / 4.0 - det)
    eigenvalues = (trace / 2.0 + root, trace / 2.0 - root)
    return ClosedLoop(matrix=matrix, eigenvalues=eigenvalues)


def closed_loop_reference(
    params: VehicleParams, gains: GainVector, initial: VehicleState, times: np.ndarray
) -> np.ndarray:
    """Exact closed-loop states exp((A − BK)·t)·w0 at each time."""
    matrix = closed_loop_matrix(params, gains).matrix
    w0 = initial.as_array()
    return np.array([expm(matrix * t) @ w0 for t in np.asarray(times, dtype=float)])


def risk_filter(delta_cloud: float, delta_car: float, threshold: float) -> Message:
    """High when the cloud command differs from the on-board one by more than the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return Message.HIGH if abs(delta_cloud - delta_car) > threshold else Message.LOW


def rk4_step(derivative: Callable[[np.ndarray], np.ndarray], state: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of an autonomous system."""
    k1 = derivative(state)
    k2 = derivative(state + 0.5 * dt * k1)
    k3 = derivative(state + 0.5 * dt * k2)
    k4 = derivative(state + dt * k3)
    return state + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@dataclass(frozen=True)
class CloudCommandSource:
    """Steering commands issued by one type of cloud.

    The command is the on-board feedback command of the stage state plus a
    per-step perturbation: a fixed ``offset`` and, when ``noise_bound`` is
    positive, uniform noise in [−noise_bound, noise_bound]. A custom
    ``policy(t, state)`` replaces the feedback term.
    """

    label: str
    issuer: CloudType
    offset: float = 0.0
    noise_bound: float = 0.0
    policy: Optional[Callable[[float, np.ndarray], float]] = None

    def __post_init__(self):
        if not math.isfinite(self.offset):
            raise ValueError("offset must be finite")
        if not (self.noise_bound >= 0 and math.isfinite(self.noise_bound)):
            raise ValueError("noise_bound must be non-negative and finite")

    def perturbation(self, rng: np.random.Generator) -> float:
        if self.noise_bound > 0:
            return self.offset + float(rng.uniform(-self.noise_bound, self.noise_bound))
        return self.offset

    def command(self, t: float, state: np.ndarray, gains: GainVector, perturbation: float) -> float:
        base = self.policy(t, state) if self.policy is not None else feedback_control(state, gains)
        value = base + perturbation
        if not math.isfinite(value):
            raise ValueError(f"cloud source '{self.label}' produced a non-finite command")
        return value


def faithful_source() -> CloudCommandSource:
    return CloudCommandSource(label="faithful", issuer=CloudType.DEFENDER)


def noisy_benign_source(noise_bound: float) -> CloudCommandSource:
    return CloudCommandSource(label="noisy-benign", issuer=CloudType.DEFENDER, noise_bound=noise_bound)


def adversarial_offset_source(offset: float) -> CloudCommandSource:
    return CloudCommandSource(label="adversarial-offset", issuer=CloudType.ATTACKER, offset=offset)


@dataclass(frozen=True)
class CloudSchedule:
    """Which source issues each step's command: the attacker's with probability ``attacker_share``."""

    defender: CloudCommandSource
    attacker: CloudCommandSource
    attacker_share: float

    def __post_init__(self):
        if not 0.0 <= self.attacker_share <= 1.0:
            raise ValueError("attacker_share must lie in [0, 1]")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    applied_steering: np.ndarray
    car_steering: np.ndarray
    cloud_steering: np.ndarray
    owners: Tuple[CloudType, ...]
    messages: Tuple[Message, ...]
    actions: Tuple[Action, ...]
    small_angle_ok: np.ndarray

    @property
    def final_state(self) -> VehicleState:
        return VehicleState.from_array(self.states[-1])

    def to_frame(self) -> pd.DataFrame:
        """One row per step; the last state row has no command."""
        steps = len(self.messages)
        frame = pd.DataFrame(
            {
                "t": self.times,
                "lateral": self.states[:, 0],
                "heading": self.states[:, 1],
                "small_angle_ok": self.small_angle_ok,
            }
        )
        frame["applied_steering"] = pd.Series(self.applied_steering, index=range(steps))
        frame["car_steering"] = pd.Series(self.car_steering, index=range(steps))
        frame["cloud_steering"] = pd.Series(self.cloud_steering, index=range(steps))
        frame["owner"] = pd.Series([o.value for o in self.owners], index=range(steps), dtype=object)
        frame["message"] = pd.Series([m.value for m in self.messages], index=range(steps), dtype=object)
        frame["action"] = pd.Series([a.value for a in self.actions], index=range(steps), dtype=object)
        return frame


def simulate_trajectory(
    initial: VehicleState,
    params: VehicleParams,
    gains: GainVector,
    threshold: float,
    receiver: ReceiverStrategy,
    schedule: CloudSchedule,
    dt: float,
    horizon: float,
    seed: int,
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND,
    small_angle_bound: float = DEFAULT_SMALL_ANGLE_BOUND,
) -> Trajectory:
    """Closed-loop run under a trust strategy.

    Each step samples the issuing cloud, classifies its command, samples the
    device's action and integrates with RK4. The chosen controller (cloud or
    on-board) is evaluated at every RK4 stage; its per-step perturbation is
    held over the step. The run ends exactly at ``horizon``; when that is not
    a multiple of ``dt`` the last step is shorter.

    Raises:
        DivergenceError: If the state norm exceeds ``divergence_bound``
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > params.max_step * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the step bound {params.max_step:g} (0.1·b/v0)")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")

    rng = np.random.default_rng(seed)
    # A horizon that is not a multiple of dt ends with one shorter step
    steps = max(1, math.ceil(horizon / dt * (1.0 - 1e-12)))
    times = np.append(np.arange(steps) * dt, horizon)
    states = np.empty((steps + 1, 2))
    states[0] = initial.as_array()

    applied = np.empty(steps)
    car = np.empty(steps)
    cloud = np.empty(steps)
    owners: List[CloudType] = []
    messages: List[Message] = []
    actions: List[Action] = []
    warned = False

    for k in range(steps):
        t = times[k]
        w = states[k]
        source = schedule.attacker if rng.random() < schedule.attacker_share else schedule.defender
        perturbation = source.perturbation(rng)

        delta_car = feedback_control(w, gains)
        delta_cloud = source.command(t, w, gains, perturbation)
        message = risk_filter(delta_cloud, delta_car, threshold)
        action = Action.TRUST if rng.random() < receiver.trust(message) else Action.NOT_TRUST

        if action is Action.TRUST:

            def derivative(x, t=t, source=source, perturbation=perturbation):
                return dynamics_derivative(x, source.command(t, x, gains, perturbation), params)

            applied[k] = delta_cloud
        else:

            def derivative(x):
                return dynamics_derivative(x, feedback_control(x, gains), params)

            applied[k] = delta_car

        nxt = rk4_step(derivative, w, times[k + 1] - t)
        norm = float(np.linalg.norm(nxt))
        if not math.isfinite(norm) or norm > divergence_bound:
            raise DivergenceError(
                f"Vehicle state diverged at t={times[k + 1]:g} (|w|={norm:.3g})",
                step=k + 1,
                time=float(times[k + 1]),
                norm=norm,
            )
        states[k + 1] = nxt
        car[k] = delta_car
        cloud[k] = delta_cloud
        owners.append(source.issuer)
        messages.append(message)
        actions.append(action)

        if not warned and abs(nxt[1]) > small_angle_bound:
            logger.warning(
                f"Heading {nxt[1]:.3f} rad exceeds the small-angle bound {small_angle_bound:g} "
                f"at t={times[k + 1]:g}; the linear model may be inaccurate"
            )
            warned = True

    logger.debug(f"Trajectory of {steps} steps, final state {states[-1]}")
    return Trajectory(
        times=times,
        states=states,
        applied_steering=applied,
        car_steering=car,
        cloud_steering=cloud,
        owners=tuple(owners),
        messages=tuple(messages),
        actions=tuple(actions),
        small_angle_ok=np.abs(states[:, 1]) <= small_angle_bound,
    )

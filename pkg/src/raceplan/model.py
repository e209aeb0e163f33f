"""Quadrotor parameters, rigid-body dynamics and differential-flatness maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _flatjet
from .errors import SingularFlatness

GRAVITY = np.array([0.0, 0.0, -9.81])


def _vec(x, n):
    a = np.asarray(x, dtype=float).reshape(n)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class QuadParams:
    """Physical quadrotor parameters.  Inertia is in kg*m^2."""

    mass: float
    arm_length: float
    inertia_diag: np.ndarray
    torque_const: float
    f_min: float
    f_max: float
    omega_max: np.ndarray
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())

    def __post_init__(self):
        object.__setattr__(self, "inertia_diag", _vec(self.inertia_diag, 3))
        object.__setattr__(self, "omega_max", _vec(self.omega_max, 3))
        object.__setattr__(self, "gravity", _vec(self.gravity, 3))
        if self.mass <= 0 or self.arm_length <= 0 or self.torque_const <= 0:
            raise ValueError("mass, arm length and torque constant must be positive")
        if np.any(self.inertia_diag <= 0):
            raise ValueError("inertia entries must be positive")
        if not (0 <= self.f_min < self.f_max):
            raise ValueError("need 0 <= f_min < f_max")
        if np.any(self.omega_max <= 0):
            raise ValueError("omega_max must be positive componentwise")
        if 4.0 * self.f_max <= self.mass * np.linalg.norm(self.gravity):
            raise ValueError("hover infeasible: 4*f_max <= m*g")

    @classmethod
    def quad_a(cls) -> "QuadParams":
        # Inertia specified in g*m^2 by convention; converted here.
        return cls(
            mass=0.85,
            arm_length=0.15,
            inertia_diag=np.array([1.0, 1.0, 1.7]) * 1e-3,
            torque_const=0.05,
            f_min=0.0,
            f_max=6.88,
            omega_max=[15.0, 15.0, 3.0],
        )

    @classmethod
    def quad_b(cls) -> "QuadParams":
        return cls(
            mass=1.05,
            arm_length=0.125,
            inertia_diag=np.array([2.5, 2.1, 4.3]) * 1e-3,
            torque_const=0.022,
            f_min=0.0,
            f_max=6.375,
            omega_max=[8.0, 8.0, 3.0],
        )


@dataclass(frozen=True)
class QuadState:
    """Full state: position, world<-body unit quaternion (w,x,y,z), velocity,
    body rates."""

    position: np.ndarray
    attitude: np.ndarray
    velocity: np.ndarray
    body_rate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position, 3))
        object.__setattr__(self, "attitude", _vec(self.attitude, 4))
        object.__setattr__(self, "velocity", _vec(self.velocity, 3))
        object.__setattr__(self, "body_rate", _vec(self.body_rate, 3))
        if abs(np.linalg.norm(self.attitude) - 1.0) > 1e-9:
            raise ValueError("attitude quaternion must be unit norm")

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.position, self.attitude, self.velocity, self.body_rate]
        )


@dataclass(frozen=True)
class RotorThrusts:
    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", _vec(self.f, 4))
        if not np.all(np.isfinite(self.f)):
            raise ValueError("rotor thrusts must be finite")


@dataclass(frozen=True)
class FlatSample:
    """Flat output [x, y, z, yaw] and its time derivatives at one instant.

    ``derivatives`` has shape (k, 4), rows being orders 0..k-1.  Rows above
    the stored order are treated as zero by the flat maps.
    """

    derivatives: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.derivatives, dtype=float))
        if d.shape[1] != 4:
            raise ValueError("each derivative row must be a 4-vector")
        if d.shape[0] < 5:  # pad with zeros up to snap
            d = np.vstack([d, np.zeros((5 - d.shape[0], 4))])
        d.flags.writeable = False
        object.__setattr__(self, "derivatives", d)

    @classmethod
    def rest(cls, position, yaw: float = 0.0) -> "FlatSample":
        d = np.zeros((5, 4))
        d[0, :3] = position
        d[0, 3] = yaw
        return cls(d)


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s,
             (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(r[i, i] - r[j, j] - r[k, k] + 1.0) * 2
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def mixer_forward(u: RotorThrusts, params: QuadParams):
    """Per-rotor thrusts -> (collective thrust, body torque)."""
    w = _flatjet.mixer_matrix(params) @ u.f
    return float(w[0]), w[1:].copy()


def mixer_inverse(collective_thrust: float, torque, params: QuadParams) -> RotorThrusts:
    w = np.concatenate([[collective_thrust], np.asarray(torque, dtype=float)])
    return RotorThrusts(np.linalg.solve(_flatjet.mixer_matrix(params), w))


def dynamics(state: QuadState, u: RotorThrusts, params: QuadParams) -> np.ndarray:
    """Rigid-body dynamics; returns the 13-vector state derivative."""
    thrust, torque = mixer_forward(u, params)
    q = state.attitude
    omega = state.body_rate
    p_dot = state.velocity
    q_dot = 0.5 * quat_mul(q, np.concatenate([[0.0], omega]))
    body_force = np.array([0.0, 0.0, thrust])
    v_dot = params.gravity + quat_to_rotation(q) @ body_force / params.mass
    inertia = params.inertia_diag
    w_dot = (torque - np.cross(omega, inertia * omega)) / inertia
    return np.concatenate([p_dot, q_dot, v_dot, w_dot])


def _single_outputs(sample: FlatSample, params: QuadParams) -> _flatjet.FlatOutputs:
    out = _flatjet.flat_outputs(sample.derivatives[None, :5, :], params)
    if out.singular[0]:
        raise SingularFlatness(
            "flat sample at free-fall or gimbal-lock configuration"
        )
    return out


def flat_to_state(sample: FlatSample, params: QuadParams) -> QuadState:
    """Flat derivatives -> full state via the flatness construction."""
    out = _single_outputs(sample, params)
    return QuadState(
        position=sample.derivatives[0, :3],
        attitude=rotation_to_quat(out.rotation[0]),
        velocity=sample.derivatives[1, :3],
        body_rate=out.omega[0],
    )


def flat_to_control(sample: FlatSample, params: QuadParams) -> RotorThrusts:
    """Flat derivatives (up to snap) -> per-rotor thrusts."""
    out = _single_outputs(sample, params)
    return RotorThrusts(out.rotor[0])


def constraint_residuals(sample: FlatSample, params: QuadParams) -> np.ndarray:
    """14 residuals, all <= 0 iff thrust and body-rate limits are met.

    Layout: [f_min - f_i, f_i - f_max] for each rotor, then
    [w_j - w_max_j, -w_j - w_max_j] per axis.
    """
    out = _single_outputs(sample, params)
    f = out.rotor[0]
    w = out.omega[0]
    res = np.empty(14)
    res[0:8:2] = params.f_min - f
    res[1:8:2] = f - params.f_max
    res[8:14:2] = w - params.omega_max
    res[9:14:2] = -w - params.omega_max
    return res

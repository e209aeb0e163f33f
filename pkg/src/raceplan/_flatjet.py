"""Vectorized flatness pipeline with optional forward-mode derivatives.

Maps batches of flat-output derivatives (position orders 2..4 and yaw
orders 0..2) to collective thrust, body rates, body-rate derivatives and
per-rotor thrusts.  In gradient mode every intermediate carries its exact
Jacobian with respect to the 12 flat inputs, propagated by the chain rule,
so downstream penalty gradients are analytic rather than finite-differenced.

Input ordering for the 12-column Jacobians:
    0:3  acceleration, 3:6 jerk, 6:9 snap, 9 yaw, 10 yaw rate, 11 yaw accel
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Number of differentiation directions.
NDIR = 12

#: Below this thrust magnitude / axis-cross magnitude the map is singular.
EPS_SING = 1e-6


class Jet:
    """A batch of values with optional Jacobians w.r.t. the 12 flat inputs.

    ``v`` is (N,) for scalars or (N, 3) for vectors; ``g`` appends a trailing
    axis of length NDIR, or is None in value-only mode.
    """

    __slots__ = ("v", "g")

    def __init__(self, v, g=None):
        self.v = v
        self.g = g

    # -- constructors -----------------------------------------------------

    @staticmethod
    def const(v, with_grad):
        v = np.asarray(v, dtype=float)
        g = np.zeros(v.shape + (NDIR,)) if with_grad else None
        return Jet(v, g)

    @staticmethod
    def seed_vec(v, col0, with_grad):
        """Vector input occupying Jacobian columns col0..col0+2."""
        g = None
        if with_grad:
            g = np.zeros(v.shape + (NDIR,))
            for k in range(3):
                g[:, k, col0 + k] = 1.0
        return Jet(v, g)

    @staticmethod
    def seed_scalar(v, col, with_grad):
        g = None
        if with_grad:
            g = np.zeros(v.shape + (NDIR,))
            g[:, col] = 1.0
        return Jet(v, g)

    @staticmethod
    def stack3(a, b, c):
        """Combine three scalar jets into a vector jet."""
        v = np.stack([a.v, b.v, c.v], axis=1)
        g = None
        if a.g is not None:
            g = np.stack([a.g, b.g, c.g], axis=1)
        return Jet(v, g)

    # -- arithmetic -------------------------------------------------------

    def __neg__(self):
        return Jet(-self.v, None if self.g is None else -self.g)

    def __add__(self, other):
        if isinstance(other, Jet):
            g = None if self.g is None else self.g + other.g
            return Jet(self.v + other.v, g)
        return Jet(self.v + other, self.g)

    def __sub__(self, other):
        if isinstance(other, Jet):
            g = None if self.g is None else self.g - other.g
            return Jet(self.v - other.v, g)
        return Jet(self.v - other, self.g)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            g = None if self.g is None else self.g * other
            return Jet(self.v * other, g)
        a, b = self, other
        if a.v.ndim > b.v.ndim:  # vector * scalar -> commute
            a, b = b, a
        if a.v.ndim == b.v.ndim:  # scalar*scalar (elementwise)
            g = None
            if a.g is not None:
                g = a.g * b.v[..., None] + b.g * a.v[..., None]
            return Jet(a.v * b.v, g)
        # scalar a times vector b
        g = None
        if a.g is not None:
            g = b.g * a.v[:, None, None] + a.g[:, None, :] * b.v[..., None]
        return Jet(a.v[:, None] * b.v, g)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / other)
        return self * other.recip()

    def recip(self):
        """1/x for a scalar jet."""
        inv = 1.0 / self.v
        g = None if self.g is None else -self.g * (inv * inv)[..., None]
        return Jet(inv, g)


def jdot(a: Jet, b: Jet) -> Jet:
    v = np.einsum("ni,ni->n", a.v, b.v)
    g = None
    if a.g is not None:
        g = np.einsum("ni,nip->np", b.v, a.g) + np.einsum("ni,nip->np", a.v, b.g)
    return Jet(v, g)


def jcross(a: Jet, b: Jet) -> Jet:
    v = np.cross(a.v, b.v)
    g = None
    if a.g is not None:
        g = np.cross(a.g, b.v[:, :, None], axis=1) + np.cross(
            a.v[:, :, None], b.g, axis=1
        )
    return Jet(v, g)


def jsqrt(a: Jet) -> Jet:
    r = np.sqrt(a.v)
    g = None if a.g is None else a.g * (0.5 / r)[..., None]
    return Jet(r, g)


def jsin(a: Jet) -> Jet:
    g = None if a.g is None else a.g * np.cos(a.v)[..., None]
    return Jet(np.sin(a.v), g)


def jcos(a: Jet) -> Jet:
    g = None if a.g is None else a.g * (-np.sin(a.v))[..., None]
    return Jet(np.cos(a.v), g)


def jscale_diag(a: Jet, diag) -> Jet:
    """Multiply a vector jet componentwise by a constant 3-vector."""
    d = np.asarray(diag, dtype=float)
    g = None if a.g is None else a.g * d[None, :, None]
    return Jet(a.v * d[None, :], g)


@dataclass
class FlatOutputs:
    """Batched outputs of the flatness pipeline.

    Gradient fields are None in value-only mode.  ``singular`` marks samples
    where the map is undefined; their numeric outputs are garbage and must be
    discarded by the caller.
    """

    thrust: np.ndarray          # (N,) collective thrust, N
    rotor: np.ndarray           # (N, 4) per-rotor thrusts, N
    omega: np.ndarray           # (N, 3) body rates, rad/s
    omega_dot: np.ndarray       # (N, 3) body-rate derivatives
    rotation: np.ndarray        # (N, 3, 3) world<-body
    singular: np.ndarray        # (N,) bool
    rotor_grad: np.ndarray | None = None   # (N, 4, 12)
    omega_grad: np.ndarray | None = None   # (N, 3, 12)


def mixer_matrix(params) -> np.ndarray:
    """Map from per-rotor thrusts to (collective thrust, body torque)."""
    l, c = params.arm_length, params.torque_const
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [l, l, -l, -l],
            [-l, l, l, -l],
            [c, -c, c, -c],
        ]
    )


def flat_outputs(derivs: np.ndarray, params, want_grad: bool = False) -> FlatOutputs:
    """Run the flatness pipeline on a batch of samples.

    derivs: (N, K, 4) flat-output derivatives, orders 0..K-1 (K >= 5), for
    dims (x, y, z, yaw).
    """
    derivs = np.asarray(derivs, dtype=float)
    n = derivs.shape[0]
    wg = want_grad

    a = Jet.seed_vec(derivs[:, 2, :3].copy(), 0, wg)
    jrk = Jet.seed_vec(derivs[:, 3, :3].copy(), 3, wg)
    snp = Jet.seed_vec(derivs[:, 4, :3].copy(), 6, wg)
    psi = Jet.seed_scalar(derivs[:, 0, 3].copy(), 9, wg)
    psid = Jet.seed_scalar(derivs[:, 1, 3].copy(), 10, wg)
    psidd = Jet.seed_scalar(derivs[:, 2, 3].copy(), 11, wg)

    f = a - np.asarray(params.gravity)[None, :]
    c2 = jdot(f, f)
    singular = c2.v < EPS_SING**2
    # Clamp singular entries so the remaining algebra stays finite.
    c2.v = np.where(singular, 1.0, c2.v)
    c = jsqrt(c2)
    z = f / c
    thrust = c * params.mass

    cd = jdot(z, jrk)
    u = jrk - cd * z
    zd = u / c
    cdd = jdot(zd, jrk) + jdot(z, snp)
    ud = snp - cdd * z - cd * zd
    zdd = ud / c - u * (cd / c2)

    cs, sn = jcos(psi), jsin(psi)
    zero = Jet.const(np.zeros(n), wg)
    x_c = Jet.stack3(cs, sn, zero)
    y_c = Jet.stack3(-sn, cs, zero)
    x_cd = psid * y_c
    x_cdd = psidd * y_c - (psid * psid) * x_c

    nvec = jcross(z, x_c)
    nd = jcross(zd, x_c) + jcross(z, x_cd)
    ndd = jcross(zdd, x_c) + 2.0 * jcross(zd, x_cd) + jcross(z, x_cdd)

    nn2 = jdot(nvec, nvec)
    singular |= nn2.v < EPS_SING**2
    nn2.v = np.where(nn2.v < EPS_SING**2, 1.0, nn2.v)
    inv = jsqrt(nn2).recip()
    inv3 = inv * inv * inv
    invd = -jdot(nvec, nd) * inv3
    invdd = -((jdot(nd, nd) + jdot(nvec, ndd)) * inv3) - jdot(nvec, nd) * (
        3.0 * (inv * inv) * invd
    )

    y_b = nvec * inv
    y_bd = nd * inv + nvec * invd
    y_bdd = ndd * inv + 2.0 * (nd * invd) + nvec * invdd

    x_b = jcross(y_b, z)
    x_bd = jcross(y_bd, z) + jcross(y_b, zd)

    w_x = -jdot(y_b, zd)
    w_y = jdot(x_b, zd)
    w_z = -jdot(x_b, y_bd)
    w_xd = -(jdot(y_bd, zd) + jdot(y_b, zdd))
    w_yd = jdot(x_bd, zd) + jdot(x_b, zdd)
    w_zd = -(jdot(x_bd, y_bd) + jdot(x_b, y_bdd))

    omega = Jet.stack3(w_x, w_y, w_z)
    omega_dot = Jet.stack3(w_xd, w_yd, w_zd)

    inertia = np.asarray(params.inertia_diag)
    j_w = jscale_diag(omega, inertia)
    tau = jscale_diag(omega_dot, inertia) + jcross(omega, j_w)

    m_inv = np.linalg.inv(mixer_matrix(params))
    wrench_v = np.concatenate([thrust.v[:, None], tau.v], axis=1)  # (N, 4)
    rotor = wrench_v @ m_inv.T

    rotor_grad = omega_grad = None
    if wg:
        wrench_g = np.concatenate([thrust.g[:, None, :], tau.g], axis=1)
        rotor_grad = np.einsum("ij,njp->nip", m_inv, wrench_g)
        omega_grad = omega.g

    rotation = np.stack([x_b.v, y_b.v, z.v], axis=2)

    return FlatOutputs(
        thrust=thrust.v,
        rotor=rotor,
        omega=omega.v,
        omega_dot=omega_dot.v,
        rotation=rotation,
        singular=singular,
        rotor_grad=rotor_grad,
        omega_grad=omega_grad,
    )

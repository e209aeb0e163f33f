"""Minimum-control piecewise-polynomial flat-output trajectories.

The spline of smoothness order s uses degree 2s-1 pieces and is the unique
polynomial satisfying boundary derivatives 0..s-1 at both ends, position
interpolation at interior waypoints, and derivative continuity through order
2s-2 at junctions.  Construction solves one banded linear system per flat
dimension; the cached factorization also drives the adjoint pass that maps
cost gradients on coefficients back onto waypoints and durations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import DimensionMismatch, OutOfDomain, SingularSystem

#: Per-segment duration above which the power basis is too ill-conditioned.
MAX_SEGMENT_DURATION = 60.0


@dataclass(frozen=True)
class SplineConfig:
    s: int = 3          # smoothness order; piece degree is 2s-1
    flat_dims: int = 4  # x, y, z, yaw

    def __post_init__(self):
        if self.s < 2:
            raise ValueError("smoothness order must be >= 2")

    @property
    def ncoef(self) -> int:
        return 2 * self.s


@dataclass(frozen=True)
class BoundaryCondition:
    """Flat output value and derivatives 1..s-1 at an endpoint, (s, 4)."""

    derivatives: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.derivatives, dtype=float)
        if d.ndim != 2 or d.shape[1] != 4:
            raise ValueError("boundary condition must be (s, 4)")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "derivatives", d)

    @classmethod
    def hover(cls, position, yaw: float = 0.0, s: int = 3) -> "BoundaryCondition":
        d = np.zeros((s, 4))
        d[0, :3] = position
        d[0, 3] = yaw
        return cls(d)


def _basis(t: np.ndarray, order: int, ncoef: int) -> np.ndarray:
    """Rows of d^order/dt^order [1, t, t^2, ...] for a batch of times."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((len(t), ncoef))
    for m in range(order, ncoef):
        out[:, m] = (math.factorial(m) // math.factorial(m - order)) * t ** (m - order)
    return out


@dataclass
class TrajectorySpline:
    """Piecewise polynomial in local time per segment, power basis."""

    durations: np.ndarray       # (L+1,)
    coefficients: np.ndarray    # (L+1, 2s, 4)
    waypoints: np.ndarray       # (L, 4) interpolated values at junctions
    config: SplineConfig
    _factor: tuple | None = field(default=None, repr=False)  # (lu, ipiv, kl, ku)

    @property
    def total_time(self) -> float:
        return float(np.sum(self.durations))

    @property
    def junction_times(self) -> np.ndarray:
        return np.cumsum(self.durations)[:-1]

    # -- evaluation -------------------------------------------------------

    def locate(self, ts: np.ndarray):
        """Segment index and local time for each query time."""
        ts = np.asarray(ts, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.durations)])
        if np.any(ts < -1e-9) or np.any(ts > cum[-1] + 1e-9):
            raise OutOfDomain("evaluation time outside [0, total_time]")
        idx = np.clip(np.searchsorted(cum, ts, side="right") - 1, 0,
                      len(self.durations) - 1)
        return idx, np.clip(ts - cum[idx], 0.0, None)

    def eval_local(self, seg_idx, local, max_order: int) -> np.ndarray:
        """Evaluate on given segments at local times; (N, max_order+1, 4)."""
        ncoef = self.config.ncoef
        coeffs = self.coefficients[np.asarray(seg_idx)]  # (N, 2s, 4)
        local = np.asarray(local, dtype=float)
        out = np.empty((len(local), max_order + 1, 4))
        for order in range(max_order + 1):
            if order >= ncoef:
                out[:, order] = 0.0
            else:
                basis = _basis(local, order, ncoef)
                out[:, order] = np.einsum("nm,nmd->nd", basis, coeffs)
        return out

    def eval_batch(self, ts, max_order: int) -> np.ndarray:
        """Flat output derivatives, shape (N, max_order+1, 4)."""
        idx, local = self.locate(np.atleast_1d(ts))
        return self.eval_local(idx, local, max_order)

    def eval(self, t: float, max_order: int = 4):
        from .model import FlatSample

        return FlatSample(self.eval_batch([t], max_order)[0])


def construct(P, T, bc0: BoundaryCondition, bcf: BoundaryCondition,
              cfg: SplineConfig = SplineConfig()) -> TrajectorySpline:
    """Build the minimum-control spline through waypoints P with durations T."""
    T = np.asarray(T, dtype=float)
    P = np.asarray(P, dtype=float)
    if P.size == 0:
        P = P.reshape(0, 3)
    if P.ndim != 2 or P.shape[1] not in (3, 4):
        raise DimensionMismatch("waypoints must be (L, 3) or (L, 4)")
    num_seg = len(T)
    if num_seg != len(P) + 1:
        raise DimensionMismatch("need exactly len(P)+1 durations")
    if np.any(T <= 0):
        raise ValueError("segment durations must be positive")
    if np.any(T > MAX_SEGMENT_DURATION):
        raise ValueError("segment duration exceeds conditioning guard")
    s, ncoef = cfg.s, cfg.ncoef
    if bc0.derivatives.shape[0] != s or bcf.derivatives.shape[0] != s:
        raise DimensionMismatch("boundary conditions must provide s rows")
    if P.shape[1] == 3:
        P = np.hstack([P, np.zeros((len(P), 1))])

    n = ncoef * num_seg
    kl = ku = 3 * s - 1
    ab = np.zeros((2 * kl + ku + 1, n))
    rhs = np.zeros((n, 4))

    def put(row, col, val):
        ab[kl + ku + row - col, col] = val

    for k in range(s):  # start boundary
        put(k, k, math.factorial(k))
        rhs[k] = bc0.derivatives[k]

    for i in range(1, num_seg):  # junction i between segments i-1 and i
        r0 = s + (i - 1) * ncoef
        c_a = (i - 1) * ncoef
        c_b = i * ncoef
        beta0 = _basis([T[i - 1]], 0, ncoef)[0]
        for m in range(ncoef):
            put(r0, c_a + m, beta0[m])
        rhs[r0] = P[i - 1]
        for k in range(ncoef - 1):  # continuity orders 0..2s-2
            beta = _basis([T[i - 1]], k, ncoef)[0]
            for m in range(ncoef):
                if beta[m] != 0.0:
                    put(r0 + 1 + k, c_a + m, beta[m])
            put(r0 + 1 + k, c_b + k, -math.factorial(k))

    for k in range(s):  # end boundary
        r = n - s + k
        beta = _basis([T[-1]], k, ncoef)[0]
        for m in range(ncoef):
            if beta[m] != 0.0:
                put(r, (num_seg - 1) * ncoef + m, beta[m])
        rhs[r] = bcf.derivatives[k]

    lu, ipiv, info = lapack.dgbtrf(ab, kl, ku)
    if info != 0:
        raise SingularSystem(f"banded factorization failed (info={info})")
    sol, info = lapack.dgbtrs(lu, kl, ku, rhs, ipiv)
    if info != 0:
        raise SingularSystem("banded solve failed")

    coeffs = sol.reshape(num_seg, ncoef, 4)
    return TrajectorySpline(
        durations=T.copy(),
        coefficients=coeffs,
        waypoints=P.copy(),
        config=cfg,
        _factor=(lu, ipiv, kl, ku),
    )


def propagate_gradients(spline: TrajectorySpline, dJ_dC, dJ_dT_direct):
    """Adjoint of the construction: gradients on coefficients and durations
    become gradients on waypoints (L, 4) and durations (L+1,)."""
    if spline._factor is None:
        raise SingularSystem("spline carries no cached factorization")
    lu, ipiv, kl, ku = spline._factor
    cfg = spline.config
    s, ncoef = cfg.s, cfg.ncoef
    num_seg = len(spline.durations)
    n = ncoef * num_seg

    dJ_dC = np.asarray(dJ_dC, dtype=float).reshape(n, 4)
    dJ_dT_direct = np.asarray(dJ_dT_direct, dtype=float)
    if len(dJ_dT_direct) != num_seg:
        raise DimensionMismatch("dJ_dT_direct must have one entry per segment")

    lam, info = lapack.dgbtrs(lu, kl, ku, dJ_dC, ipiv, trans=1)
    if info != 0:
        raise SingularSystem("adjoint banded solve failed")

    dJ_dP = np.empty((num_seg - 1, 4))
    dJ_dT = dJ_dT_direct.copy()

    for i in range(1, num_seg):
        r0 = s + (i - 1) * ncoef
        dJ_dP[i - 1] = lam[r0]
        # d/dT of every T-dependent entry in junction rows bumps the
        # derivative order by one on segment i-1.
        coeff = spline.coefficients[i - 1]  # (2s, 4)
        t_loc = spline.durations[i - 1]
        contrib = 0.0
        for k in range(ncoef):  # row orders: 0 (position), then 0..2s-2
            order = 1 if k == 0 else k
            beta = _basis([t_loc], order, ncoef)[0]
            contrib += float(lam[r0 + k] @ (beta @ coeff))
        dJ_dT[i - 1] -= contrib

    coeff = spline.coefficients[-1]
    t_loc = spline.durations[-1]
    contrib = 0.0
    for k in range(s):
        beta = _basis([t_loc], k + 1, ncoef)[0]
        contrib += float(lam[n - s + k] @ (beta @ coeff))
    dJ_dT[-1] -= contrib

    return dJ_dP, dJ_dT

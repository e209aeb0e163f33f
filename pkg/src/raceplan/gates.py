"""Gate regions, containment tests and the smooth parameter maps that
eliminate gate and time-positivity constraints.

Each gate type provides a smooth surjection from an unconstrained parameter
vector onto the gate region, so waypoint optimization can run without
inequality constraints.  Segment durations get the same treatment through
``time_map``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import DimensionMismatch, EmptyAfterShrink, ValidationError

#: Tolerance for the off-plane residual of planar (polygon) gates, meters.
EPS_PLANE = 1e-6

_GEOM_TOL = 1e-9


@dataclass(frozen=True)
class BallGate:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if self.radius < 0:
            raise ValidationError("ball gate radius must be >= 0")

    @property
    def param_dim(self) -> int:
        return 4


@dataclass(frozen=True)
class PolytopeGate:
    """Convex polygon (planar) or polyhedron gate, stored in vertex form.

    Halfspaces are derived at construction; for planar gates they live in the
    gate plane and the plane itself is an extra equality handled separately.
    Build instances through :meth:`from_vertices`.
    """

    vertices: np.ndarray                  # (v, 3)
    halfspaces: tuple                     # (A (m,3), b (m,)), rows unit-norm
    is_planar: bool
    plane: tuple | None = None            # (unit normal, offset) if planar

    @property
    def param_dim(self) -> int:
        return len(self.vertices)

    @classmethod
    def from_vertices(cls, vertices, planar: bool | None = None) -> "PolytopeGate":
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValidationError("polytope vertices must be an (v, 3) array")
        if len(verts) < 3:
            raise ValidationError("polytope gate needs at least 3 vertices")

        centered = verts - verts.mean(axis=0)
        # Smallest singular direction decides coplanarity.
        _, svals, vt = np.linalg.svd(centered, full_matrices=True)
        svals = np.concatenate([svals, np.zeros(3 - len(svals))])
        coplanar = svals[2] <= 1e-9 * max(1.0, svals[0])
        if planar is None:
            planar = coplanar
        if planar and not coplanar:
            raise ValidationError("polygon gate vertices are not coplanar")
        if not planar and coplanar:
            raise ValidationError("polyhedron gate vertices are coplanar")

        try:
            if planar:
                normal = vt[2]
                basis = vt[:2].T  # (3, 2)
                pts2 = centered @ basis
                hull = ConvexHull(pts2)
                if len(hull.vertices) != len(verts):
                    raise ValidationError(
                        "polygon vertices are not in convex position"
                    )
                rows_a, rows_b = [], []
                order = hull.vertices  # counterclockwise in the 2D frame
                for i in range(len(order)):
                    p0 = pts2[order[i]]
                    p1 = pts2[order[(i + 1) % len(order)]]
                    edge = p1 - p0
                    n2 = np.array([edge[1], -edge[0]])
                    n2 /= np.linalg.norm(n2)
                    n3 = basis @ n2
                    rows_a.append(n3)
                    rows_b.append(n3 @ (p0 @ basis.T + verts.mean(axis=0)))
                a_mat = np.array(rows_a)
                b_vec = np.array(rows_b)
                plane = (normal, float(normal @ verts[0]))
            else:
                hull = ConvexHull(verts)
                if len(hull.vertices) != len(verts):
                    raise ValidationError(
                        "polyhedron vertices are not in convex position"
                    )
                a_mat = hull.equations[:, :3].copy()
                b_vec = -hull.equations[:, 3].copy()
                norms = np.linalg.norm(a_mat, axis=1)
                a_mat /= norms[:, None]
                b_vec /= norms
                plane = None
        except QhullError as exc:
            raise ValidationError(f"degenerate polytope vertex set: {exc}") from exc

        # Every vertex must satisfy its own halfspace description.
        if np.max(verts @ a_mat.T - b_vec) > _GEOM_TOL:
            raise ValidationError("derived halfspaces do not contain all vertices")

        a_mat.flags.writeable = False
        b_vec.flags.writeable = False
        verts = verts.copy()
        verts.flags.writeable = False
        return cls(
            vertices=verts,
            halfspaces=(a_mat, b_vec),
            is_planar=bool(planar),
            plane=plane,
        )


Gate = BallGate | PolytopeGate


@dataclass(frozen=True)
class GateSequence:
    """Ordered gates; consecutive indices in a tunnel group form one
    physical tunnel (entrance first)."""

    gates: tuple
    tunnel_groups: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "tunnel_groups", tuple(
            tuple(g) for g in self.tunnel_groups
        ))
        if not self.gates:
            raise ValidationError("gate sequence must be nonempty")

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def param_dims(self) -> list[int]:
        return [g.param_dim for g in self.gates]


@dataclass
class DecisionVector:
    """Stacked unconstrained variables: per-gate parameters D, times K."""

    D: np.ndarray
    K: np.ndarray
    offsets: tuple  # per-gate (start, stop) into D

    @classmethod
    def for_sequence(cls, seq: GateSequence, fill: float = 0.1) -> "DecisionVector":
        dims = seq.param_dims
        offsets = []
        pos = 0
        for d in dims:
            offsets.append((pos, pos + d))
            pos += d
        return cls(
            D=np.full(pos, fill),
            K=np.zeros(len(seq) + 1),
            offsets=tuple(offsets),
        )

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.D, self.K])

    def with_flat(self, x: np.ndarray) -> "DecisionVector":
        nd = len(self.D)
        if len(x) != nd + len(self.K):
            raise DimensionMismatch("flat vector length does not match")
        return DecisionVector(D=x[:nd].copy(), K=x[nd:].copy(), offsets=self.offsets)


# ---------------------------------------------------------------------------
# containment

def ball_contains(gate: BallGate, p) -> float:
    """<= 0 iff p is inside the ball."""
    return float(np.linalg.norm(np.asarray(p, dtype=float) - gate.center) - gate.radius)


def polytope_contains(gate: PolytopeGate, p) -> float:
    """<= 0 iff p is inside the polytope (and on-plane for polygons)."""
    p = np.asarray(p, dtype=float)
    a_mat, b_vec = gate.halfspaces
    res = float(np.max(a_mat @ p - b_vec))
    if gate.is_planar:
        normal, off = gate.plane
        res = max(res, abs(float(normal @ p) - off) - EPS_PLANE)
    return res


def contains(gate: Gate, p) -> float:
    if isinstance(gate, BallGate):
        return ball_contains(gate, p)
    return polytope_contains(gate, p)


def gate_center(gate: Gate) -> np.ndarray:
    """Ball center / polytope vertex centroid (surjection image of d = 0)."""
    if isinstance(gate, BallGate):
        return gate.center.copy()
    return gate.vertices.mean(axis=0)


# ---------------------------------------------------------------------------
# surjective parameter maps

def ball_surject(gate: BallGate, d):
    """Map R^4 onto the ball.  Accepts (4,) or (N, 4); returns the point(s)
    and the exact Jacobian(s) dp/dd."""
    d = np.asarray(d, dtype=float)
    single = d.ndim == 1
    d2 = np.atleast_2d(d)
    if d2.shape[1] != 4:
        raise DimensionMismatch("ball gate parameter must be a 4-vector")
    q = np.einsum("ni,ni->n", d2, d2) + 1.0
    scale = 2.0 * gate.radius / q
    p = gate.center[None, :] + scale[:, None] * d2[:, :3]
    jac = np.zeros((len(d2), 3, 4))
    jac[:, :, :3] = scale[:, None, None] * np.eye(3)[None]
    jac -= (2.0 * scale / q)[:, None, None] * np.einsum("ni,nj->nij", d2[:, :3], d2)
    if single:
        return p[0], jac[0]
    return p, jac


def polytope_surject(gate: PolytopeGate, d):
    """Map R^v onto the polytope through normalized squared weights.

    d = 0 maps to the vertex centroid with a zero Jacobian by convention.
    """
    d = np.asarray(d, dtype=float)
    single = d.ndim == 1
    d2 = np.atleast_2d(d)
    v = gate.param_dim
    if d2.shape[1] != v:
        raise DimensionMismatch("polytope parameter length must equal vertex count")
    s = np.einsum("ni,ni->n", d2, d2)
    zero = s == 0.0
    s_safe = np.where(zero, 1.0, s)
    w = d2 * d2 / s_safe[:, None]
    w[zero] = 1.0 / v
    p = w @ gate.vertices
    # dw_i/dd_k = 2 d_i delta_ik / s - 2 d_k w_i / s
    dw = 2.0 * np.einsum("ni,ik->nik", d2, np.eye(v)) / s_safe[:, None, None]
    dw -= 2.0 * np.einsum("nk,ni->nik", d2, w) / s_safe[:, None, None]
    dw[zero] = 0.0
    jac = np.einsum("ic,nik->nck", gate.vertices, dw)
    if single:
        return p[0], jac[0]
    return p, jac


def surject(gate: Gate, d):
    if isinstance(gate, BallGate):
        return ball_surject(gate, d)
    return polytope_surject(gate, d)


def time_map(K):
    """Unconstrained variable -> strictly positive duration, C^2, T(0) = 1.

    Returns (T, dT/dK); accepts scalars or arrays.
    """
    k = np.asarray(K, dtype=float)
    pos = k >= 0
    t = np.where(pos, 0.5 * k * k + k + 1.0, 2.0 / (k * k - 2.0 * k + 2.0))
    dt = np.where(pos, k + 1.0, (4.0 - 4.0 * k) / (k * k - 2.0 * k + 2.0) ** 2)
    if np.isscalar(K) or np.ndim(K) == 0:
        return float(t), float(dt)
    return t, dt


def time_map_inverse(T):
    """Exact inverse of time_map's duration component."""
    t = np.asarray(T, dtype=float)
    if np.any(t <= 0):
        raise ValueError("durations must be positive")
    k = np.where(
        t >= 1.0,
        -1.0 + np.sqrt(np.maximum(2.0 * t - 1.0, 0.0)),
        1.0 - np.sqrt(np.maximum(2.0 / t - 1.0, 0.0)),
    )
    if np.isscalar(T) or np.ndim(T) == 0:
        return float(k)
    return k


def decode(seq: GateSequence, dec: DecisionVector):
    """Decision variables -> waypoints, durations and their Jacobians.

    Returns (P (L,3), T (L+1,), jac_blocks list of (3, dim_i), dT_dK (L+1,)).
    """
    if len(dec.offsets) != len(seq) or len(dec.K) != len(seq) + 1:
        raise DimensionMismatch("decision vector does not match gate sequence")
    waypoints = np.empty((len(seq), 3))
    jac_blocks = []
    for i, gate in enumerate(seq.gates):
        lo, hi = dec.offsets[i]
        if hi - lo != gate.param_dim:
            raise DimensionMismatch(f"gate {i}: parameter slice has wrong length")
        p, jac = surject(gate, dec.D[lo:hi])
        waypoints[i] = p
        jac_blocks.append(jac)
    durations, dt_dk = time_map(dec.K)
    return waypoints, durations, jac_blocks, dt_dk


# ---------------------------------------------------------------------------
# margin shrinking

def _chebyshev_center(a_mat: np.ndarray, b_vec: np.ndarray) -> np.ndarray:
    # max r s.t. A x + r <= b (rows unit-norm)
    c = np.array([0.0, 0.0, 0.0, -1.0])
    a_ub = np.hstack([a_mat, np.ones((len(a_mat), 1))])
    res = linprog(c, A_ub=a_ub, b_ub=b_vec, bounds=[(None, None)] * 3 + [(0, None)])
    if not res.success:
        raise ValidationError("could not compute polyhedron center")
    return res.x[:3]


def shrink_margin(gate: Gate, margin: float) -> Gate:
    """Shrink a gate so its boundary retreats by the safety margin.

    The margin is a diameter-style allowance: opposite faces of a polytope
    each retreat by margin/2 (a 2.4 m square becomes 2.1 m under a 0.3 m
    margin) and a ball loses the full margin from its radius.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if margin == 0:
        return gate
    if isinstance(gate, BallGate):
        if margin > gate.radius:
            raise EmptyAfterShrink("margin exceeds ball radius")
        return BallGate(center=gate.center, radius=gate.radius - margin)

    a_mat, b_vec = gate.halfspaces
    if gate.is_planar:
        normal, _ = gate.plane
        basis = np.linalg.svd(gate.vertices - gate.vertices.mean(axis=0))[2][:2].T
        pts2 = (gate.vertices - gate.vertices.mean(axis=0)) @ basis
        # Area centroid of the convex polygon via its hull triangulation.
        hull = ConvexHull(pts2)
        order = hull.vertices
        p0 = pts2[order[0]]
        area_total = 0.0
        centroid2 = np.zeros(2)
        for i in range(1, len(order) - 1):
            p1, p2 = pts2[order[i]], pts2[order[i + 1]]
            u, w = p1 - p0, p2 - p0
            area = 0.5 * (u[0] * w[1] - u[1] * w[0])
            area_total += area
            centroid2 += area * (p0 + p1 + p2) / 3.0
        center = gate.vertices.mean(axis=0) + basis @ (centroid2 / area_total)
    else:
        center = _chebyshev_center(a_mat, b_vec)

    r_faces = b_vec - a_mat @ center
    r_min = float(np.min(r_faces))
    lam = 1.0 - margin / (2.0 * r_min)
    if lam <= 0:
        raise EmptyAfterShrink("margin consumes the polytope gate")
    new_vertices = center[None, :] + lam * (gate.vertices - center[None, :])
    return PolytopeGate.from_vertices(new_vertices, planar=gate.is_planar)

"""Tests for the minimum-control piecewise-polynomial spline."""

import math
import time

import numpy as np
import pytest
from scipy.linalg import null_space

from raceplan.errors import DimensionMismatch, OutOfDomain
from raceplan.spline import (
    BoundaryCondition, construct, propagate_gradients,
)


def dpow(t: float, order: int, ncoef: int) -> np.ndarray:
    """Independent derivative-of-power-basis row used by the test oracles."""
    row = np.zeros(ncoef)
    for m in range(order, ncoef):
        row[m] = math.factorial(m) / math.factorial(m - order) * t ** (m - order)
    return row


def dense_oracle(P, T, bc0, bcf, s=3):
    """Assemble and solve the full optimality system with a dense solver."""
    ncoef = 2 * s
    num_seg = len(T)
    n = ncoef * num_seg
    mat = np.zeros((n, n))
    rhs = np.zeros((n, 4))
    row = 0
    for k in range(s):
        mat[row, k] = math.factorial(k)
        rhs[row] = bc0.derivatives[k]
        row += 1
    for i in range(1, num_seg):
        c_a, c_b = (i - 1) * ncoef, i * ncoef
        mat[row, c_a:c_a + ncoef] = dpow(T[i - 1], 0, ncoef)
        rhs[row] = P[i - 1]
        row += 1
        for k in range(ncoef - 1):
            mat[row, c_a:c_a + ncoef] = dpow(T[i - 1], k, ncoef)
            mat[row, c_b + k] = -math.factorial(k)
            row += 1
    for k in range(s):
        mat[row, -ncoef:] = dpow(T[-1], k, ncoef)
        rhs[row] = bcf.derivatives[k]
        row += 1
    sol = np.linalg.solve(mat, rhs)
    return mat, rhs, sol.reshape(num_seg, ncoef, 4)


def random_problem(rng, num_wp, dim4=True):
    P = rng.normal(scale=2.0, size=(num_wp, 4 if dim4 else 3))
    T = rng.uniform(0.6, 1.8, size=num_wp + 1)
    bc0 = BoundaryCondition(rng.normal(scale=0.5, size=(3, 4)))
    bcf = BoundaryCondition(rng.normal(scale=0.5, size=(3, 4)))
    return P, T, bc0, bcf


class TestConstruct:
    def test_quintic_rest_to_rest(self):
        """Single-segment rest-to-rest unit step is the classic minimum-jerk
        polynomial 10t^3 - 15t^4 + 6t^5."""
        bc0 = BoundaryCondition.hover([0.0, 0.0, 0.0])
        bcf = BoundaryCondition.hover([1.0, 0.0, 0.0])
        traj = construct(np.zeros((0, 3)), [1.0], bc0, bcf)
        expected = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
        assert np.allclose(traj.coefficients[0, :, 0], expected, atol=1e-10)
        assert np.allclose(traj.coefficients[0, :, 1:], 0.0, atol=1e-10)

    def test_midpoint_symmetry(self):
        bc0 = BoundaryCondition.hover([0.0, 0.0, 0.0])
        bcf = BoundaryCondition.hover([2.0, 0.0, 0.0])
        traj = construct(np.array([[1.0, 0.0, 0.0]]), [1.0, 1.0], bc0, bcf)
        ts = np.linspace(0.0, 2.0, 41)
        y = traj.eval_batch(ts, 0)[:, 0, 0]
        assert np.allclose(y + y[::-1], 2.0, atol=1e-9)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(0)
        for num_wp in (1, 3, 6):
            P, T, bc0, bcf = random_problem(rng, num_wp)
            traj = construct(P, T, bc0, bcf)
            mat, rhs, coeffs = dense_oracle(P, T, bc0, bcf)
            assert np.max(np.abs(traj.coefficients - coeffs)) < 1e-10
            flat = traj.coefficients.reshape(-1, 4)
            assert np.max(np.abs(mat @ flat - rhs)) < 1e-10

    def test_waypoints_interpolated(self):
        rng = np.random.default_rng(1)
        P, T, bc0, bcf = random_problem(rng, 4)
        traj = construct(P, T, bc0, bcf)
        at = traj.eval_batch(traj.junction_times, 0)[:, 0, :]
        assert np.max(np.abs(at - P)) < 1e-8

    def test_input_validation(self):
        bc = BoundaryCondition.hover([0, 0, 0])
        with pytest.raises(DimensionMismatch):
            construct(np.zeros((2, 3)), [1.0], bc, bc)
        with pytest.raises(ValueError):
            construct(np.zeros((0, 3)), [-1.0], bc, bc)
        with pytest.raises(ValueError):
            construct(np.zeros((0, 3)), [100.0], bc, bc)

    def test_bandwidth_bounded(self):
        """Every nonzero of the optimality system sits within 4s of the
        diagonal, independent of segment count."""
        rng = np.random.default_rng(2)
        s = 3
        for num_wp in (3, 10):
            P, T, bc0, bcf = random_problem(rng, num_wp)
            mat, _, _ = dense_oracle(P, T, bc0, bcf, s=s)
            rows, cols = np.nonzero(mat)
            assert np.max(np.abs(rows - cols)) <= 4 * s

    def test_construct_scales_linearly(self):
        rng = np.random.default_rng(3)
        timings = {}
        for num_seg in (64, 128):
            P, T, bc0, bcf = random_problem(rng, num_seg - 1)
            best = math.inf
            for _ in range(5):
                tic = time.perf_counter()
                construct(P, T, bc0, bcf)
                best = min(best, time.perf_counter() - tic)
            timings[num_seg] = best
        assert timings[128] / timings[64] < 2.5


class TestEval:
    def test_boundary_values(self):
        rng = np.random.default_rng(4)
        P, T, bc0, bcf = random_problem(rng, 2)
        traj = construct(P, T, bc0, bcf)
        at0 = traj.eval(0.0, max_order=2)
        atf = traj.eval(traj.total_time, max_order=2)
        assert np.allclose(at0.derivatives[:3], bc0.derivatives, atol=1e-9)
        assert np.allclose(atf.derivatives[:3], bcf.derivatives, atol=1e-8)

    def test_junction_continuity(self):
        rng = np.random.default_rng(5)
        P, T, bc0, bcf = random_problem(rng, 4)
        traj = construct(P, T, bc0, bcf)
        eps = 1e-9
        for t_j in traj.junction_times:
            left = traj.eval_batch([t_j - eps], 4)[0]
            right = traj.eval_batch([t_j + eps], 4)[0]
            # Continuous through order 2s-2 = 4.
            assert np.max(np.abs(left - right)) < 1e-6

    def test_orders_above_degree_are_zero(self):
        bc = BoundaryCondition.hover([0, 0, 1])
        traj = construct(np.zeros((0, 3)), [1.0], bc, bc)
        sample = traj.eval_batch([0.5], max_order=7)[0]
        assert np.allclose(sample[6:], 0.0)

    def test_out_of_domain(self):
        bc = BoundaryCondition.hover([0, 0, 1])
        traj = construct(np.zeros((0, 3)), [1.0], bc, bc)
        with pytest.raises(OutOfDomain):
            traj.eval(1.5)
        with pytest.raises(OutOfDomain):
            traj.eval(-0.5)


class TestGradients:
    def test_pure_time_gradient(self):
        rng = np.random.default_rng(6)
        P, T, bc0, bcf = random_problem(rng, 3)
        traj = construct(P, T, bc0, bcf)
        dJ_dP, dJ_dT = propagate_gradients(
            traj, np.zeros_like(traj.coefficients), np.ones(len(T))
        )
        assert np.allclose(dJ_dT, 1.0)
        assert np.allclose(dJ_dP, 0.0)

    def test_zero_functional_zero_gradient(self):
        rng = np.random.default_rng(7)
        P, T, bc0, bcf = random_problem(rng, 2)
        traj = construct(P, T, bc0, bcf)
        dJ_dP, dJ_dT = propagate_gradients(
            traj, np.zeros_like(traj.coefficients), np.zeros(len(T))
        )
        assert np.allclose(dJ_dP, 0.0)
        assert np.allclose(dJ_dT, 0.0)

    @pytest.mark.parametrize("num_wp", [1, 3, 7])
    def test_tracking_cost_matches_finite_differences(self, num_wp):
        """J = |y(t*) - y_ref|^2 at a fixed fraction of total time."""
        rng = np.random.default_rng(8 + num_wp)
        P, T, bc0, bcf = random_problem(rng, num_wp)
        y_ref = rng.normal(size=4)
        frac = 0.37

        def cost_and_grads(P_, T_):
            traj = construct(P_, T_, bc0, bcf)
            t_star = frac * traj.total_time
            idx, local = traj.locate([t_star])
            y = traj.eval_local(idx, local, 0)[0, 0]
            value = float(np.sum((y - y_ref) ** 2))
            # dJ/dC through the evaluation basis; dJ/dT_direct through the
            # motion of t_star and the local clock.
            dy = 2.0 * (y - y_ref)
            dJ_dC = np.zeros_like(traj.coefficients)
            basis = dpow(local[0], 0, traj.config.ncoef)
            dJ_dC[idx[0]] = np.outer(basis, dy)
            ydot = traj.eval_local(idx, local, 1)[0, 1]
            dJ_dT = np.zeros(len(T_))
            # t_star = frac * sum(T); local = t_star - cum[idx]
            for k in range(len(T_)):
                dlocal = frac - (1.0 if k < idx[0] else 0.0)
                dJ_dT[k] = float(dy @ ydot) * dlocal
            return value, dJ_dC, dJ_dT, traj

        value, dJ_dC, dJ_dT_direct, traj = cost_and_grads(P, T)
        dJ_dP, dJ_dT = propagate_gradients(traj, dJ_dC, dJ_dT_direct)

        step = 1e-6
        fd_P = np.zeros_like(P)
        for i in range(P.shape[0]):
            for j in range(4):
                Pp, Pm = P.copy(), P.copy()
                Pp[i, j] += step
                Pm[i, j] -= step
                fd_P[i, j] = (cost_and_grads(Pp, T)[0]
                              - cost_and_grads(Pm, T)[0]) / (2 * step)
        fd_T = np.zeros_like(T)
        for k in range(len(T)):
            Tp, Tm = T.copy(), T.copy()
            Tp[k] += step
            Tm[k] -= step
            fd_T[k] = (cost_and_grads(P, Tp)[0]
                       - cost_and_grads(P, Tm)[0]) / (2 * step)

        scale = max(1.0, np.max(np.abs(fd_P)), np.max(np.abs(fd_T)))
        assert np.max(np.abs(dJ_dP - fd_P)) / scale < 1e-5
        assert np.max(np.abs(dJ_dT - fd_T)) / scale < 1e-5


class TestEnergyOptimality:
    def test_minimum_among_admissible_perturbations(self):
        """The constructed spline minimizes the control energy over all
        piecewise quintics matching boundary conditions, waypoints and
        C^{s-1} continuity."""
        s, ncoef = 3, 6
        rng = np.random.default_rng(9)
        num_wp = 3
        P = rng.normal(size=num_wp)        # scalar problem in the x channel
        T = rng.uniform(0.7, 1.5, size=num_wp + 1)
        P4 = np.zeros((num_wp, 4))
        P4[:, 0] = P
        bc0 = BoundaryCondition.hover([0.0, 0.0, 0.0])
        bcf = BoundaryCondition.hover([1.0, 0.0, 0.0])
        traj = construct(P4, T, bc0, bcf)
        c0 = traj.coefficients[:, :, 0].ravel()

        num_seg = len(T)
        n = ncoef * num_seg
        rows = []
        for k in range(s):
            row = np.zeros(n)
            row[k] = math.factorial(k)
            rows.append(row)
        for i in range(1, num_seg):
            c_a, c_b = (i - 1) * ncoef, i * ncoef
            row = np.zeros(n)
            row[c_a:c_a + ncoef] = dpow(T[i - 1], 0, ncoef)
            rows.append(row)          # waypoint value (both sides via cont.)
            for k in range(s):        # C^{s-1} continuity only
                row = np.zeros(n)
                row[c_a:c_a + ncoef] = dpow(T[i - 1], k, ncoef)
                row[c_b + k] = -math.factorial(k)
                rows.append(row)
        for k in range(s):
            row = np.zeros(n)
            row[-ncoef:] = dpow(T[-1], k, ncoef)
            rows.append(row)
        basis = null_space(np.array(rows))
        assert basis.shape[1] == (s - 1) * num_wp

        def energy(c):
            total = 0.0
            for i in range(num_seg):
                ci = c[i * ncoef:(i + 1) * ncoef]
                q = np.zeros((ncoef, ncoef))
                for m in range(s, ncoef):
                    for nn in range(s, ncoef):
                        fm = math.factorial(m) / math.factorial(m - s)
                        fn = math.factorial(nn) / math.factorial(nn - s)
                        q[m, nn] = fm * fn * T[i] ** (m + nn - 2 * s + 1) \
                            / (m + nn - 2 * s + 1)
                total += ci @ q @ ci
            return total

        e0 = energy(c0)
        for _ in range(100):
            delta = basis @ rng.normal(scale=0.5, size=basis.shape[1])
            assert energy(c0 + delta) > e0 - 1e-10

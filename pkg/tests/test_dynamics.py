"""Integrator, action, criticality, Legendre, and CSV tests."""

import csv
import io

import numpy as np
import pytest

from dhamsys import (
    HamiltonianFn,
    IntegrationError,
    LagrangianDef,
    NonAdmissibleError,
    ShapeError,
    Signal,
    TimeGrid,
    action,
    action_criticality,
    integrate_delta_delta,
    integrate_delta_nabla,
    legendre,
    reconstruct,
    write_trajectory_csv,
)
from dhamsys import systems
from dhamsys.field import FieldDef, FieldForm


def harmonic(form=FieldForm.DELTA_NABLA):
    return systems.linear(0.0, 1.0, -1.0, 0.0, form=form)


class TestDeltaNablaIntegrator:
    def test_first_step_hand_computed(self):
        grid = TimeGrid(0.0, 1.0, 10)  # h = 0.1
        traj = integrate_delta_nabla(harmonic(), [1.0], [0.0], grid)
        assert traj.q[1] == pytest.approx([1.0], abs=1e-15)
        assert traj.p[1] == pytest.approx([-0.1], abs=1e-15)

    def test_zero_field_constant_trajectory(self):
        f = FieldDef.from_sources(2, FieldForm.DELTA_NABLA, ["0", "0"], ["0", "0"], {})
        grid = TimeGrid(0.0, 1.0, 20)
        traj = integrate_delta_nabla(f, [0.5, -1.0], [2.0, 0.0], grid)
        assert np.all(traj.q.values == [0.5, -1.0])
        assert np.all(traj.p.values == [2.0, 0.0])

    def test_scheme_equations_hold(self):
        # delta(Q) = X_Q(Q, P) on 0..N-1 and nabla(P) = X_P(Q, P) on 1..N
        grid = TimeGrid(0.0, 2.0, 25)
        f = systems.newton(u="sin(Q1)", m=1.5)
        traj = integrate_delta_nabla(f, [0.4], [0.2], grid)
        h = grid.h
        for k in range(grid.n_steps):
            xq, _ = f.eval(traj.q[k], traj.p[k])
            assert np.allclose((traj.q[k + 1] - traj.q[k]) / h, xq, atol=1e-12)
        for k in range(1, grid.n_steps + 1):
            _, xp = f.eval(traj.q[k], traj.p[k])
            assert np.allclose((traj.p[k] - traj.p[k - 1]) / h, xp, atol=1e-10)

    def test_quadratic_invariant_conserved(self):
        # the one-step map conserves Q^2 + P^2 + h*Q*P exactly for the
        # harmonic field (algebraic identity of the update)
        grid = TimeGrid(0.0, 100.0, 1000)
        traj = integrate_delta_nabla(harmonic(), [1.0], [0.0], grid)
        h = grid.h
        q = traj.q.values.ravel()
        p = traj.p.values.ravel()
        inv = q * q + p * p + h * q * p
        assert np.max(np.abs(inv - inv[0])) <= 1e-10 * abs(inv[0])

    def test_nonconvergent_implicit_solve_raises(self):
        # X_P = 2*P with h = 0.5 makes the momentum update y = p + y, which
        # has no solution and a singular Newton matrix
        f = FieldDef.from_sources(1, FieldForm.DELTA_NABLA, ["P1"], ["2*P1"], {})
        grid = TimeGrid(0.0, 1.0, 2)
        with pytest.raises(IntegrationError) as err:
            integrate_delta_nabla(f, [0.0], [1.0], grid)
        assert err.value.step == 0

    def test_stiff_momentum_update_uses_newton(self):
        # X_P = -50*P with h = 0.1: the fixed-point map has slope 5, so only
        # the Newton fallback converges; the update is y = p/(1 + 50h)
        f = FieldDef.from_sources(1, FieldForm.DELTA_NABLA, ["0"], ["-50*P1"], {})
        grid = TimeGrid(0.0, 1.0, 10)
        traj = integrate_delta_nabla(f, [0.0], [1.0], grid)
        for k in range(1, grid.n_steps + 1):
            assert traj.p[k][0] == pytest.approx(6.0 ** (-k), rel=1e-10)

    def test_form_enforced(self):
        grid = TimeGrid(0.0, 1.0, 4)
        with pytest.raises(ShapeError):
            integrate_delta_nabla(harmonic(FieldForm.DELTA_DELTA), [1.0], [0.0], grid)

    def test_energy_column(self):
        grid = TimeGrid(0.0, 1.0, 5)
        f = harmonic()
        ham = reconstruct(f)
        traj = integrate_delta_nabla(f, [1.0], [0.0], grid, energy=ham)
        assert traj.energy is not None and traj.energy.shape == (6,)
        assert traj.energy[0] == pytest.approx(0.5, abs=1e-13)


class TestDeltaDeltaIntegrator:
    def test_first_step_matches_delta_nabla(self):
        grid = TimeGrid(0.0, 1.0, 10)
        explicit = integrate_delta_delta(harmonic(FieldForm.DELTA_DELTA), [1.0], [0.0], grid)
        implicit = integrate_delta_nabla(harmonic(), [1.0], [0.0], grid)
        assert np.allclose(explicit.q[1], implicit.q[1], atol=1e-15)
        assert np.allclose(explicit.p[1], implicit.p[1], atol=1e-15)
        # from step 2 on the schemes differ
        assert not np.allclose(explicit.p[2], implicit.p[2], atol=1e-12)

    def test_zero_field_constant(self):
        f = FieldDef.from_sources(1, FieldForm.DELTA_DELTA, ["0"], ["0"], {})
        traj = integrate_delta_delta(f, [1.0], [2.0], TimeGrid(0.0, 1.0, 7))
        assert np.all(traj.q.values == 1.0) and np.all(traj.p.values == 2.0)

    def test_energy_grows_monotonically(self):
        grid = TimeGrid(0.0, 100.0, 1000)
        traj = integrate_delta_delta(harmonic(FieldForm.DELTA_DELTA), [1.0], [0.0], grid)
        e = np.sum(traj.q.values ** 2 + traj.p.values ** 2, axis=1)
        assert np.all(np.diff(e) > 0)
        assert e[-1] > 1.01 * e[0]

    def test_schemes_coincide_for_constant_momentum_law(self):
        # when X_P does not depend on the state update order (constant X_P),
        # the implicit and explicit momentum updates agree exactly
        sources = (["P1"], ["3"])
        grid = TimeGrid(0.0, 1.0, 12)
        f_nab = FieldDef.from_sources(1, FieldForm.DELTA_NABLA, *sources, {})
        f_dd = FieldDef.from_sources(1, FieldForm.DELTA_DELTA, *sources, {})
        a = integrate_delta_nabla(f_nab, [0.2], [1.0], grid)
        b = integrate_delta_delta(f_dd, [0.2], [1.0], grid)
        assert np.array_equal(a.q.values, b.q.values)
        assert np.array_equal(a.p.values, b.p.values)


class TestReversal:
    def test_adjoint_scheme_brute_force(self):
        # the update with field -X undoes the adjoint one-step map
        # (momentum explicit, position implicit), checked against explicit
        # matrix arithmetic for linear fields
        rng = np.random.default_rng(11)
        for _ in range(5):
            alpha, beta, gamma_, delta_ = rng.uniform(-2, 2, size=4)
            h = 0.01
            steps = 20
            grid = TimeGrid(0.0, h * steps, steps)
            states = [(1.0, 0.5)]
            q, p = states[0]
            for _ in range(steps):
                p_hat = p + h * (gamma_ * q + delta_ * p)
                q_hat = (q + h * beta * p_hat) / (1.0 - h * alpha)
                states.append((q_hat, p_hat))
                q, p = q_hat, p_hat
            reversed_field = systems.linear(alpha, beta, gamma_, delta_).scaled(-1.0)
            back = integrate_delta_nabla(reversed_field, [states[-1][0]], [states[-1][1]], grid)
            for k in range(steps + 1):
                expect_q, expect_p = states[steps - k]
                assert back.q[k][0] == pytest.approx(expect_q, abs=1e-12)
                assert back.p[k][0] == pytest.approx(expect_p, abs=1e-12)


class TestAction:
    def test_zero_hamiltonian_matches_momentum_sum(self):
        rng = np.random.default_rng(1)
        grid = TimeGrid(0.0, 2.0, 15)
        q = Signal(grid, 0, rng.standard_normal((16, 2)))
        p = Signal(grid, 0, rng.standard_normal((16, 2)))
        got = action(HamiltonianFn.zero(2), q, p)
        expected = 0.0
        for k in range(grid.n_steps):
            expected += grid.h * float(np.dot(p[k], (q[k + 1] - q[k]) / grid.h))
        assert got == pytest.approx(expected, abs=1e-13)

    def test_constant_position_zero_action(self):
        rng = np.random.default_rng(2)
        grid = TimeGrid(0.0, 1.0, 9)
        q = Signal(grid, 0, np.tile([1.7], (10, 1)))
        p = Signal(grid, 0, rng.standard_normal((10, 1)))
        assert action(HamiltonianFn.zero(1), q, p) == 0.0

    def test_trajectory_action_matches_independent_summation(self):
        grid = TimeGrid(0.0, 5.0, 40)
        f = harmonic()
        ham = reconstruct(f)
        traj = integrate_delta_nabla(f, [1.0], [0.0], grid)
        got = action(ham, traj.q, traj.p)
        expected = 0.0
        scale = 0.0
        for k in range(grid.n_steps):
            dq = (traj.q[k + 1] - traj.q[k]) / grid.h
            term = grid.h * (float(np.dot(traj.p[k], dq)) - ham.value(traj.q[k], traj.p[k]))
            expected += term
            scale += abs(term)
        assert abs(got - expected) <= 1e-13 * max(1.0, scale)

    def test_needs_full_grid(self):
        grid = TimeGrid(0.0, 1.0, 5)
        short = Signal(grid, 0, np.ones((3, 1)))
        with pytest.raises(ShapeError):
            action(HamiltonianFn.zero(1), short, short)


class TestActionCriticality:
    def test_solution_is_critical(self):
        grid = TimeGrid(0.0, 5.0, 100)
        f = systems.newton(u="Q1^4", m=1.0)
        ham = reconstruct(f)
        traj = integrate_delta_nabla(f, [0.8], [0.0], grid)
        residual = action_criticality(ham, traj.q, traj.p, n_directions=16)
        assert residual <= 1e-11

    def test_perturbed_trajectory_is_not_critical(self):
        rng = np.random.default_rng(3)
        grid = TimeGrid(0.0, 5.0, 100)
        f = harmonic()
        ham = reconstruct(f)
        traj = integrate_delta_nabla(f, [1.0], [0.0], grid)
        qv = traj.q.values.copy()
        pv = traj.p.values.copy()
        qv[1:-1] += rng.uniform(-1e-2, 1e-2, size=qv[1:-1].shape)
        pv[1:-1] += rng.uniform(-1e-2, 1e-2, size=pv[1:-1].shape)
        residual = action_criticality(ham, Signal(grid, 0, qv), Signal(grid, 0, pv))
        assert residual > 1e-3

    def test_constant_trajectory_zero_hamiltonian(self):
        grid = TimeGrid(0.0, 1.0, 8)
        q = Signal(grid, 0, np.tile([0.4], (9, 1)))
        p = Signal(grid, 0, np.tile([-1.1], (9, 1)))
        assert action_criticality(HamiltonianFn.zero(1), q, p) == 0.0

    def test_explicit_scheme_is_not_critical(self):
        # the forward-embedding trajectory solves a different system, so it
        # is not a critical point of the delta-nabla action functional
        grid = TimeGrid(0.0, 5.0, 100)
        ham = reconstruct(harmonic())
        traj = integrate_delta_delta(harmonic(FieldForm.DELTA_DELTA), [1.0], [0.0], grid)
        assert action_criticality(ham, traj.q, traj.p) > 1e-3

    def test_direction_count_validated(self):
        grid = TimeGrid(0.0, 1.0, 8)
        q = Signal(grid, 0, np.ones((9, 1)))
        with pytest.raises(ShapeError):
            action_criticality(HamiltonianFn.zero(1), q, q, n_directions=0)

    def test_single_node_perturbation_scales_linearly(self):
        grid = TimeGrid(0.0, 2.0, 40)
        f = harmonic()
        ham = reconstruct(f)
        traj = integrate_delta_nabla(f, [1.0], [0.0], grid)
        residuals = []
        for eps in (1e-4, 1e-3, 1e-2):
            qv = traj.q.values.copy()
            qv[17, 0] += eps
            residuals.append(action_criticality(ham, Signal(grid, 0, qv), traj.p, seed=7))
        assert residuals[1] == pytest.approx(10 * residuals[0], rel=0.2)
        assert residuals[2] == pytest.approx(100 * residuals[0], rel=0.2)


class TestLegendre:
    def test_classical_kinetic_plus_potential(self):
        lag = LagrangianDef.from_source("V1^2/2 - Q1^2/2", 1)
        assert legendre(lag, [1.0], [2.0]) == pytest.approx(2.5, abs=1e-12)

    def test_scaled_mass(self):
        lag = LagrangianDef.from_source("m*V1^2/2", 1, {"m": 2.0})
        assert legendre(lag, [0.0], [2.0]) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_lagrangian_rejected(self):
        lag = LagrangianDef.from_source("V1", 1)
        with pytest.raises(NonAdmissibleError):
            legendre(lag, [0.0], [1.0])

    def test_nonquadratic_velocity_dependence(self):
        # L = cosh-like convex velocity term: dL/dv = v^3, g = p^(1/3)
        lag = LagrangianDef.from_source("V1^4/4", 1)
        p = 0.7
        v = p ** (1 / 3)
        assert legendre(lag, [0.0], [p]) == pytest.approx(p * v - v ** 4 / 4, abs=1e-10)

    def test_matches_homotopy_reconstruction_up_to_constant(self):
        # Legendre of L = m v^2/2 - U and the homotopy Hamiltonian of the
        # matching field differ by the constant U(0)
        m = 1.5
        lag = LagrangianDef.from_source("m*V1^2/2 - (Q1 - 1)^2/2", 1, {"m": m})
        f = systems.newton(u="(Q1 - 1)^2/2", m=m)
        ham = reconstruct(f)
        u0 = 0.5
        rng = np.random.default_rng(4)
        for _ in range(10):
            q, p = rng.uniform(-2, 2, size=2)
            lhs = legendre(lag, [q], [p])
            rhs = ham.value([q], [p]) + u0
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_multidimensional(self):
        lag = LagrangianDef.from_source("V1^2/2 + V2^2/2 - Q1*Q2", 2)
        got = legendre(lag, [1.0, 2.0], [3.0, -1.0])
        assert got == pytest.approx(0.5 * 9 + 0.5 * 1 + 2.0, abs=1e-12)


class TestTrajectoryCsv:
    def test_round_trip(self):
        grid = TimeGrid(0.0, 1.0, 4)
        f = harmonic()
        ham = reconstruct(f)
        traj = integrate_delta_nabla(f, [1.0], [0.0], grid, energy=ham)
        buf = io.StringIO()
        write_trajectory_csv(traj, buf)
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert rows[0] == ["k", "t", "Q1", "P1", "H", "iters", "residual"]
        assert len(rows) == 6  # header + N+1 nodes
        assert float(rows[2][1]) == pytest.approx(grid.h)  # t at node 1
        assert float(rows[3][2]) == pytest.approx(traj.q[2][0])
        assert float(rows[4][4]) == pytest.approx(traj.energy[3])

    def test_missing_energy_written_as_nan(self):
        grid = TimeGrid(0.0, 1.0, 3)
        traj = integrate_delta_delta(harmonic(FieldForm.DELTA_DELTA), [1.0], [0.0], grid)
        buf = io.StringIO()
        write_trajectory_csv(traj, buf)
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert rows[1][4] == "nan"

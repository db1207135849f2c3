"""Time integration, the discrete action, and the Legendre transform.

Two one-step maps are provided for a field X = (X_Q, X_P):

* delta-nabla (variationally coherent): ``Q[k+1] = Q[k] + h X_Q(Q[k], P[k])``
  followed by the implicit update ``P[k+1] = P[k] + h X_P(Q[k+1], P[k+1])``.
  The stored trajectory then satisfies ``delta(Q) = X_Q`` on 0..N-1 and
  ``nabla(P) = X_P`` on 1..N, in particular both equations hold on every
  interior node, and (q0, p0) acts as a clean initial condition.
* delta-delta (forward embedding): the fully explicit update in both
  variables, generally not variational.

``action`` evaluates the discrete functional
``h * sum_k [P_k . delta(Q)_k - H(Q_k, P_k)]`` and ``action_criticality``
measures the first variation along random interior directions, which
vanishes exactly on solutions of the delta-nabla system.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import IntegrationError, NonAdmissibleError, ShapeError
from .field import FieldForm, parse_expr
from .grid import Signal, TimeGrid, delta, j_delta, nabla, star
from .reconstruct import HamiltonianFn
from .solvers import solve_fixed_point

SOLVER_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """Paired (Q, P) signals on the full grid with per-step solver diagnostics."""

    grid: TimeGrid
    q: Signal
    p: Signal
    iterations: np.ndarray  # length N, implicit-solve iterations per step
    residuals: np.ndarray  # length N, final solve residual per step
    energy: np.ndarray | None = None  # length N+1, H at each node, if requested

    @property
    def dim(self) -> int:
        return self.q.dim


def _energy_fn(energy):
    if energy is None:
        return None
    return energy.value if isinstance(energy, HamiltonianFn) else energy


def _finish(grid, qs, ps, iters, resids, energy) -> Trajectory:
    q_sig = Signal(grid, 0, np.array(qs))
    p_sig = Signal(grid, 0, np.array(ps))
    fn = _energy_fn(energy)
    column = None
    if fn is not None:
        column = np.array([fn(q_sig[k], p_sig[k]) for k in range(grid.n_steps + 1)], dtype=float)
    return Trajectory(grid, q_sig, p_sig, np.array(iters), np.array(resids), column)


def _initial_point(f, q0, p0) -> tuple[np.ndarray, np.ndarray]:
    q = np.atleast_1d(np.asarray(q0, dtype=float))
    p = np.atleast_1d(np.asarray(p0, dtype=float))
    if q.shape != (f.dim,) or p.shape != (f.dim,):
        raise ShapeError(f"initial condition must be a pair of length-{f.dim} vectors")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise ShapeError("initial condition must be finite")
    return q, p


def integrate_delta_nabla(
    f,
    q0,
    p0,
    grid: TimeGrid,
    energy=None,
    solver_tol: float = SOLVER_TOLERANCE,
) -> Trajectory:
    """Integrate the delta-nabla system of a field from (q0, p0)."""
    if f.form is not FieldForm.DELTA_NABLA:
        raise ShapeError("integrate_delta_nabla needs a delta-nabla field")
    q, p = _initial_point(f, q0, p0)
    h = grid.h
    qs, ps = [q], [p]
    iters, resids = [], []
    for k in range(grid.n_steps):
        xq, _ = f.eval(q, p)
        q_next = q + h * xq

        def pmap(y):
            return p + h * f.eval(q_next, y)[1]

        def pjac(y):
            return h * f.jacobian(q_next, y).dxp_dp

        result = solve_fixed_point(pmap, p, jac_fn=pjac, tol=solver_tol)
        if not result.converged:
            raise IntegrationError(k, result.residual)
        q, p = q_next, result.y
        qs.append(q)
        ps.append(p)
        iters.append(result.iterations)
        resids.append(result.residual)
    return _finish(grid, qs, ps, iters, resids, energy)


def integrate_delta_delta(f, q0, p0, grid: TimeGrid, energy=None) -> Trajectory:
    """Integrate the explicit forward-embedding system of a field from (q0, p0)."""
    if f.form is not FieldForm.DELTA_DELTA:
        raise ShapeError("integrate_delta_delta needs a delta-delta field")
    q, p = _initial_point(f, q0, p0)
    h = grid.h
    qs, ps = [q], [p]
    for _ in range(grid.n_steps):
        xq, xp = f.eval(q, p)
        q, p = q + h * xq, p + h * xp
        qs.append(q)
        ps.append(p)
    n = grid.n_steps
    return _finish(grid, qs, ps, [0] * n, [0.0] * n, energy)


def _hamiltonian_signal(ham: HamiltonianFn, q_sig: Signal, p_sig: Signal, lo: int, hi: int) -> Signal:
    vals = np.array([[ham.value(q_sig[k], p_sig[k])] for k in range(lo, hi + 1)])
    return Signal(q_sig.grid, lo, vals)


def action(ham: HamiltonianFn, q_sig: Signal, p_sig: Signal) -> float:
    """Discrete action ``h * sum_{k=0}^{N-1} [P_k . delta(Q)_k - H(Q_k, P_k)]``."""
    n = q_sig.grid.n_steps
    if q_sig.lo != 0 or q_sig.hi != n or p_sig.lo != 0 or p_sig.hi != n:
        raise ShapeError("action needs Q and P on the full grid")
    pdq = star(p_sig, delta(q_sig))
    h_vals = _hamiltonian_signal(ham, q_sig, p_sig, 0, n - 1)
    return float(j_delta(pdq - h_vals)[n][0])


def action_criticality(
    ham: HamiltonianFn,
    q_sig: Signal,
    p_sig: Signal,
    n_directions: int = 16,
    seed: int = 0,
) -> float:
    """Max first variation of the action along random unit interior directions.

    The directional derivative along a variation (U, V) vanishing at the
    endpoints is

        h * sum_{k=1}^{N-1} [ V_k . (delta(Q)_k - dH/dP_k)
                              - U_k . (nabla(P)_k + dH/dQ_k) ]

    (an exact rearrangement of the functional's linearization).  Directions
    are normalized in the discrete L2 norm; the return value is the largest
    absolute derivative seen, which is zero exactly on trajectories of the
    delta-nabla system generated by H.
    """
    if n_directions < 1:
        raise ShapeError(f"need at least one direction, got {n_directions}")
    n = q_sig.grid.n_steps
    h = q_sig.grid.h
    dq = delta(q_sig).restrict(1, n - 1).values
    dp = nabla(p_sig).restrict(1, n - 1).values
    grads = [ham.gradient(q_sig[k], p_sig[k]) for k in range(1, n)]
    res_v = dq - np.array([g[1] for g in grads])  # delta(Q) - dH/dP
    res_u = dp + np.array([g[0] for g in grads])  # nabla(P) + dH/dQ
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_directions):
        u = rng.standard_normal(res_u.shape)
        v = rng.standard_normal(res_v.shape)
        norm = np.sqrt(h * (np.sum(u * u) + np.sum(v * v)))
        if norm == 0.0:
            continue
        derivative = h * (np.sum(v * res_v) - np.sum(u * res_u)) / norm
        worst = max(worst, abs(float(derivative)))
    return worst


@dataclass(frozen=True, eq=False)
class LagrangianDef:
    """A Lagrangian L(q, v) over variables Q1..Qd, V1..Vd plus constants."""

    dim: int
    lagrangian: ex.Expr
    constants: dict[str, float]

    @classmethod
    def from_source(cls, source: str, dim: int = 1, constants: dict[str, float] | None = None) -> "LagrangianDef":
        constants = dict(constants or {})
        tree = parse_expr(source, dim, constants, kinds=("Q", "V"))
        return cls(dim, tree, constants)

    @cached_property
    def _momentum_exprs(self):
        return tuple(self.lagrangian.diff(f"V{i + 1}") for i in range(self.dim))

    @cached_property
    def _hessian_exprs(self):
        return tuple(
            tuple(m.diff(f"V{j + 1}") for j in range(self.dim)) for m in self._momentum_exprs
        )

    def _env(self, q: np.ndarray, v: np.ndarray) -> dict[str, float]:
        env = dict(self.constants)
        for i in range(self.dim):
            env[f"Q{i + 1}"] = float(q[i])
            env[f"V{i + 1}"] = float(v[i])
        return env

    def momentum(self, q, v) -> np.ndarray:
        """dL/dv at (q, v)."""
        env = self._env(np.atleast_1d(np.asarray(q, float)), np.atleast_1d(np.asarray(v, float)))
        return np.array([e.eval(env) for e in self._momentum_exprs])

    def velocity_hessian(self, q, v) -> np.ndarray:
        env = self._env(np.atleast_1d(np.asarray(q, float)), np.atleast_1d(np.asarray(v, float)))
        return np.array([[e.eval(env) for e in row] for row in self._hessian_exprs])

    def value(self, q, v) -> float:
        env = self._env(np.atleast_1d(np.asarray(q, float)), np.atleast_1d(np.asarray(v, float)))
        return float(self.lagrangian.eval(env))


def legendre(
    lag: LagrangianDef,
    q,
    p,
    tol: float = SOLVER_TOLERANCE,
    max_iter: int = 50,
) -> float:
    """Hamiltonian value H(q, p) = p . g - L(q, g) of an admissible Lagrangian.

    ``g`` inverts the momentum map ``v -> dL/dv(q, v)`` by Newton iteration;
    a singular velocity Hessian or divergence raises
    :class:`NonAdmissibleError`.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if q.shape != (lag.dim,) or p.shape != (lag.dim,):
        raise ShapeError(f"phase point must be a pair of length-{lag.dim} vectors")
    v = p.copy()
    scale = 1.0 + float(np.max(np.abs(p)))
    for _ in range(max_iter):
        residual = lag.momentum(q, v) - p
        hess = lag.velocity_hessian(q, v)
        try:
            step = np.linalg.solve(hess, residual)
        except np.linalg.LinAlgError:
            raise NonAdmissibleError(
                f"velocity Hessian is singular at q={q.tolist()}, v={v.tolist()}"
            ) from None
        if float(np.max(np.abs(residual))) <= tol * scale:
            return float(p @ v - lag.value(q, v))
        v = v - step
        if not np.all(np.isfinite(v)):
            break
    raise NonAdmissibleError(
        f"momentum inversion did not converge at q={q.tolist()}, p={p.tolist()}"
    )


def write_trajectory_csv(traj: Trajectory, stream) -> None:
    """Write a trajectory as CSV: ``k,t,Q1..Qd,P1..Pd,H,iters,residual``.

    Row ``k`` carries the diagnostics of the step that produced node ``k``
    (zeros for the initial node); the H column is ``nan`` when no energy
    evaluator was attached.
    """
    d = traj.dim
    writer = csv.writer(stream, lineterminator="\n")
    header = ["k", "t"]
    header += [f"Q{i + 1}" for i in range(d)]
    header += [f"P{i + 1}" for i in range(d)]
    header += ["H", "iters", "residual"]
    writer.writerow(header)
    times = traj.grid.times()
    for k in range(traj.grid.n_steps + 1):
        row = [k, repr(float(times[k]))]
        row += [repr(float(x)) for x in traj.q[k]]
        row += [repr(float(x)) for x in traj.p[k]]
        row.append("nan" if traj.energy is None else repr(float(traj.energy[k])))
        if k == 0:
            row += [0, repr(0.0)]
        else:
            row += [int(traj.iterations[k - 1]), repr(float(traj.residuals[k - 1]))]
        writer.writerow(row)

"""Hamiltonian structure detection for first-order difference systems.

A delta-nabla system ``delta(Q) = X_Q(Q, P)``, ``nabla(P) = X_P(Q, P)``
comes from a Hamiltonian exactly when the linearization of its defect
operator is self-adjoint under the symplectic discrete L2 pairing.  That
holds iff the pointwise integrability conditions

* CH1:  dX_Q/dQ + (dX_P/dP)^T = 0
* CH2:  dX_Q/dP and dX_P/dQ are symmetric

are satisfied.  ``check`` samples the conditions over a box of phase
points and reports max residuals and a verdict; ``frechet_apply`` and
``frechet_adjoint_apply`` realize the linearized operator and its
symplectic adjoint on interior nodes for direct operator-level tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, EvalDomainError, ShapeError, SingularTransformError
from .field import FieldForm
from .grid import Signal, delta, nabla

DEFAULT_TOLERANCE = 1e-9
DEFAULT_SAMPLE_COUNT = 128
DEFAULT_BOX = 2.0

VERDICT_HAMILTONIAN = "hamiltonian"
VERDICT_NOT_HAMILTONIAN = "not_hamiltonian"


@dataclass(frozen=True)
class SampleCheck:
    """Integrability residuals at one phase point (max-abs-entry norms)."""

    q: tuple[float, ...]
    p: tuple[float, ...]
    ch1: float
    ch2q: float
    ch2p: float


@dataclass(frozen=True)
class HelmholtzReport:
    system: str
    form: str
    tolerance: float
    samples: tuple[SampleCheck, ...]
    max_ch1: float
    max_ch2q: float
    max_ch2p: float
    verdict: str
    skipped: tuple[str, ...] = ()

    @property
    def is_hamiltonian(self) -> bool:
        return self.verdict == VERDICT_HAMILTONIAN

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "form": self.form,
            "tolerance": self.tolerance,
            "samples": [
                {"q": list(s.q), "p": list(s.p), "ch1": s.ch1, "ch2q": s.ch2q, "ch2p": s.ch2p}
                for s in self.samples
            ],
            "max_ch1": self.max_ch1,
            "max_ch2q": self.max_ch2q,
            "max_ch2p": self.max_ch2p,
            "verdict": self.verdict,
            "skipped": list(self.skipped),
        }


def residuals_at(f, q, p) -> tuple[float, float, float]:
    """CH1/CH2 residuals of a delta-nabla field at one phase point."""
    blocks = f.jacobian(q, p)
    ch1 = float(np.max(np.abs(blocks.dxq_dq + blocks.dxp_dp.T)))
    ch2q = float(np.max(np.abs(blocks.dxq_dp - blocks.dxq_dp.T)))
    ch2p = float(np.max(np.abs(blocks.dxp_dq - blocks.dxp_dq.T)))
    return ch1, ch2q, ch2p


def check(f, samples, tol: float = DEFAULT_TOLERANCE, system: str | None = None) -> HelmholtzReport:
    """Decide Hamiltonian structure of a delta-nabla field by sampling.

    ``samples`` is a nonempty iterable of phase points ``(q, p)``.  Points
    where the Jacobian cannot be evaluated are skipped and recorded.  The
    verdict is ``hamiltonian`` iff all three aggregate residuals are at
    most ``tol``.
    """
    _require_delta_nabla(f)
    samples = list(samples)
    if not samples:
        raise ConfigError("check needs a nonempty sample set")
    records = []
    skipped = []
    for q, p in samples:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        try:
            ch1, ch2q, ch2p = residuals_at(f, q, p)
        except (EvalDomainError, SingularTransformError) as err:
            skipped.append(f"q={q.tolist()}, p={p.tolist()}: {err}")
            continue
        records.append(SampleCheck(tuple(q.tolist()), tuple(p.tolist()), ch1, ch2q, ch2p))
    if not records:
        raise SingularTransformError(
            f"all {len(samples)} samples failed; first failure: {skipped[0]}"
        )
    max_ch1 = max(r.ch1 for r in records)
    max_ch2q = max(r.ch2q for r in records)
    max_ch2p = max(r.ch2p for r in records)
    verdict = (
        VERDICT_HAMILTONIAN
        if max(max_ch1, max_ch2q, max_ch2p) <= tol
        else VERDICT_NOT_HAMILTONIAN
    )
    return HelmholtzReport(
        system=system if system is not None else getattr(f, "name", "") or "field",
        form=f.form.value,
        tolerance=tol,
        samples=tuple(records),
        max_ch1=max_ch1,
        max_ch2q=max_ch2q,
        max_ch2p=max_ch2p,
        verdict=verdict,
        skipped=tuple(skipped),
    )


def sample_box(
    dim: int,
    count: int = DEFAULT_SAMPLE_COUNT,
    box: float = DEFAULT_BOX,
    seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Quasi-random (scrambled Sobol) phase points in [-box, box]^(2*dim)."""
    if count < 1:
        raise ConfigError(f"sample count must be positive, got {count}")
    if not box > 0:
        raise ConfigError(f"sample box half-width must be positive, got {box!r}")
    sampler = qmc.Sobol(d=2 * dim, scramble=True, seed=seed)
    pts = (2.0 * sampler.random(count) - 1.0) * box
    return [(pts[i, :dim].copy(), pts[i, dim:].copy()) for i in range(count)]


def frechet_apply(f, q_sig: Signal, p_sig: Signal, u: Signal, v: Signal) -> tuple[Signal, Signal]:
    """Linearized defect operator along the state (Q, P), applied to (U, V).

    Returns, on interior nodes 1..N-1,

        row1 = delta(U) - dX_Q/dQ U - dX_Q/dP V
        row2 = nabla(V) - dX_P/dQ U - dX_P/dP V

    with the Jacobian blocks evaluated at (Q_k, P_k).  U and V must vanish
    at both endpoints.
    """
    blocks = _interior_blocks(f, q_sig, p_sig, u, v, ("U", "V"))
    n = q_sig.grid.n_steps
    du = delta(u).restrict(1, n - 1).values
    dv = nabla(v).restrict(1, n - 1).values
    uv = u.restrict(1, n - 1).values
    vv = v.restrict(1, n - 1).values
    row1 = np.empty_like(du)
    row2 = np.empty_like(dv)
    for i, b in enumerate(blocks):
        row1[i] = du[i] - b.dxq_dq @ uv[i] - b.dxq_dp @ vv[i]
        row2[i] = dv[i] - b.dxp_dq @ uv[i] - b.dxp_dp @ vv[i]
    return Signal(q_sig.grid, 1, row1), Signal(q_sig.grid, 1, row2)


def frechet_adjoint_apply(f, q_sig: Signal, p_sig: Signal, a: Signal, b: Signal) -> tuple[Signal, Signal]:
    """Symplectic adjoint of :func:`frechet_apply` along (Q, P), applied to (A, B).

    On interior nodes 1..N-1,

        row1 = delta(A) + (dX_P/dP)^T A - (dX_Q/dP)^T B
        row2 = nabla(B) - (dX_P/dQ)^T A + (dX_Q/dQ)^T B

    For any field this operator satisfies the pairing identity
    ``<DO(U,V), (A,B)>_J = <DO*(A,B), (U,V)>_J``; it coincides with the
    forward operator exactly when the field is Hamiltonian.
    """
    blocks = _interior_blocks(f, q_sig, p_sig, a, b, ("A", "B"))
    n = q_sig.grid.n_steps
    da = delta(a).restrict(1, n - 1).values
    db = nabla(b).restrict(1, n - 1).values
    av = a.restrict(1, n - 1).values
    bv = b.restrict(1, n - 1).values
    row1 = np.empty_like(da)
    row2 = np.empty_like(db)
    for i, blk in enumerate(blocks):
        row1[i] = da[i] + blk.dxp_dp.T @ av[i] - blk.dxq_dp.T @ bv[i]
        row2[i] = db[i] - blk.dxp_dq.T @ av[i] + blk.dxq_dq.T @ bv[i]
    return Signal(q_sig.grid, 1, row1), Signal(q_sig.grid, 1, row2)


def _require_delta_nabla(f) -> None:
    if f.form is not FieldForm.DELTA_NABLA:
        raise ShapeError(
            "this operation needs a delta-nabla field; "
            "convert delta-delta fields with shift_normal_form first"
        )


def _interior_blocks(f, q_sig: Signal, p_sig: Signal, u: Signal, v: Signal, labels: tuple[str, str]):
    _require_delta_nabla(f)
    grid = q_sig.grid
    n = grid.n_steps
    for name, sig in (("Q", q_sig), ("P", p_sig), (labels[0], u), (labels[1], v)):
        if sig.grid != grid:
            raise ShapeError(f"signal {name} lives on a different grid")
        if sig.dim != f.dim:
            raise ShapeError(f"signal {name} has dim {sig.dim}, field has dim {f.dim}")
        if sig.lo != 0 or sig.hi != n:
            raise ShapeError(f"signal {name} must cover the full grid 0..{n}")
    for name, sig in ((labels[0], u), (labels[1], v)):
        if not sig.is_c0:
            raise ShapeError(f"variation {name} must vanish at both endpoints")
    return [f.jacobian(q_sig[k], p_sig[k]) for k in range(1, n)]

"""Uniform time grids, discrete signals, and the finite-difference calculus.

The grid is ``t_k = a + k*h`` for ``k = 0..N`` with ``h = (b - a)/N``.  A
:class:`Signal` is a vector-valued function on a contiguous index range of
such a grid.  The operators in this module (forward/backward differences,
shifts, discrete antiderivatives, pointwise products, L2 and symplectic
pairings) shrink or grow the index range explicitly instead of padding, so
that domains like "all interior nodes" stay machine-checkable.

Conventions, chosen so the inverse relations are exact up to roundoff:

* ``delta(F)[k] = (F[k+1] - F[k]) / h`` on ``lo..hi-1``
* ``nabla(F)[k] = (F[k] - F[k-1]) / h`` on ``lo+1..hi``
* ``j_delta(F)[k] = h * sum(F[lo..k-1])`` on ``lo..hi+1`` (zero at ``lo``),
  so ``delta(j_delta(F)) == F``
* ``j_nabla(F)[k] = h * sum(F[lo..k])`` on ``lo-1..hi`` (zero at ``lo-1``),
  so ``nabla(j_nabla(F)) == F``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError, ShapeError

# Default absolute / relative comparison tolerances for floating checks.
DEFAULT_ATOL = 1e-12
DEFAULT_RTOL = 1e-10


def allclose(a, b, atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL) -> bool:
    """Absolute-plus-relative comparison: ``|a - b| <= atol + rtol*scale``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.maximum(np.abs(a), np.abs(b))))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform lattice of N+1 nodes on [a, b]."""

    a: float
    b: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ShapeError("grid endpoints must be finite")
        if self.n_steps < 2:
            raise ShapeError(f"need at least 2 steps so the interior is nonempty, got {self.n_steps}")
        if self.b <= self.a:
            raise ShapeError(f"grid needs b > a, got a={self.a}, b={self.b}")

    @property
    def h(self) -> float:
        """Step size (b - a) / N."""
        return (self.b - self.a) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def times(self, lo: int = 0, hi: int | None = None) -> np.ndarray:
        """Node times t_k for k in lo..hi (inclusive)."""
        if hi is None:
            hi = self.n_steps
        return self.a + self.h * np.arange(lo, hi + 1)


@dataclass(frozen=True)
class Signal:
    """Vector-valued function on indices ``lo..lo+len(values)-1`` of a grid.

    ``values`` has shape ``(count, dim)``; each row is the value at one node.
    Signals are immutable: the stored array is a read-only copy.
    """

    grid: TimeGrid
    lo: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ShapeError(f"signal values must be a nonempty (count, dim) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("signal values must be finite (no NaN/Inf)")
        if self.lo < 0 or self.lo + arr.shape[0] - 1 > self.grid.n_steps:
            raise RangeError(
                f"signal range {self.lo}..{self.lo + arr.shape[0] - 1} leaves the grid 0..{self.grid.n_steps}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def hi(self) -> int:
        return self.lo + self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, k: int) -> np.ndarray:
        """Value at global node index ``k``."""
        if not self.lo <= k <= self.hi:
            raise RangeError(f"index {k} outside signal range {self.lo}..{self.hi}")
        return self.values[k - self.lo]

    def restrict(self, lo: int, hi: int) -> "Signal":
        """Copy of the signal on the subrange lo..hi."""
        if not (self.lo <= lo <= hi <= self.hi):
            raise RangeError(f"cannot restrict {self.lo}..{self.hi} to {lo}..{hi}")
        return Signal(self.grid, lo, self.values[lo - self.lo : hi - self.lo + 1])

    @property
    def is_c0(self) -> bool:
        """True if the signal covers the whole grid and vanishes at both ends."""
        return (
            self.lo == 0
            and self.hi == self.grid.n_steps
            and not np.any(self.values[0])
            and not np.any(self.values[-1])
        )

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int = 1, lo: int = 0, hi: int | None = None) -> "Signal":
        if hi is None:
            hi = grid.n_steps
        return cls(grid, lo, np.zeros((hi - lo + 1, dim)))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn, dim: int = 1, lo: int = 0, hi: int | None = None) -> "Signal":
        """Sample ``fn(t)`` (scalar or length-dim) at the node times."""
        if hi is None:
            hi = grid.n_steps
        rows = [np.atleast_1d(np.asarray(fn(t), dtype=float)) for t in grid.times(lo, hi)]
        return cls(grid, lo, np.array(rows))

    def __add__(self, other: "Signal") -> "Signal":
        _check_same_layout(self, other)
        return Signal(self.grid, self.lo, self.values + other.values)

    def __sub__(self, other: "Signal") -> "Signal":
        _check_same_layout(self, other)
        return Signal(self.grid, self.lo, self.values - other.values)

    def __mul__(self, scalar: float) -> "Signal":
        return Signal(self.grid, self.lo, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Signal":
        return Signal(self.grid, self.lo, -self.values)


def _check_same_layout(f: Signal, g: Signal) -> None:
    if f.grid != g.grid:
        raise ShapeError("signals live on different grids")
    if f.dim != g.dim:
        raise ShapeError(f"dimension mismatch: {f.dim} vs {g.dim}")
    if f.lo != g.lo or f.hi != g.hi:
        raise ShapeError(f"range mismatch: {f.lo}..{f.hi} vs {g.lo}..{g.hi}")


def _require_nondegenerate(f: Signal, op: str) -> None:
    if f.hi == f.lo:
        raise RangeError(f"{op} needs at least two nodes, signal has range {f.lo}..{f.hi}")


def delta(f: Signal) -> Signal:
    """Forward difference: output index k holds (F[k+1] - F[k]) / h, on lo..hi-1."""
    _require_nondegenerate(f, "delta")
    v = f.values
    return Signal(f.grid, f.lo, (v[1:] - v[:-1]) / f.grid.h)


def nabla(f: Signal) -> Signal:
    """Backward difference: output index k holds (F[k] - F[k-1]) / h, on lo+1..hi."""
    _require_nondegenerate(f, "nabla")
    v = f.values
    return Signal(f.grid, f.lo + 1, (v[1:] - v[:-1]) / f.grid.h)


def rho(f: Signal) -> Signal:
    """Backward shift: output index k holds F[k-1], on lo+1..hi.

    Identically equal to ``f - h*nabla(f)`` on the shared range.
    """
    _require_nondegenerate(f, "rho")
    return Signal(f.grid, f.lo + 1, f.values[:-1])


def sigma(f: Signal) -> Signal:
    """Forward shift: output index k holds F[k+1], on lo..hi-1.

    Identically equal to ``f + h*delta(f)`` on the shared range.
    """
    _require_nondegenerate(f, "sigma")
    return Signal(f.grid, f.lo, f.values[1:])


def j_delta(f: Signal) -> Signal:
    """Discrete antiderivative inverting ``delta``.

    Output index k holds ``h * sum(F[lo..k-1])``; the output covers
    lo..hi+1 and is zero at lo, so ``delta(j_delta(f)) == f`` exactly up
    to roundoff.
    """
    if f.hi + 1 > f.grid.n_steps:
        raise RangeError(f"antiderivative of a signal on {f.lo}..{f.hi} would leave the grid")
    h = f.grid.h
    acc = np.concatenate([np.zeros((1, f.dim)), np.cumsum(f.values, axis=0) * h])
    return Signal(f.grid, f.lo, acc)


def j_nabla(f: Signal) -> Signal:
    """Discrete antiderivative inverting ``nabla``.

    Output index k holds ``h * sum(F[lo..k])``; the output covers lo-1..hi
    and is zero at lo-1, so ``nabla(j_nabla(f)) == f``.  Needs lo >= 1.
    """
    if f.lo < 1:
        raise RangeError("j_nabla is anchored one index below lo; signal must start at lo >= 1")
    h = f.grid.h
    acc = np.concatenate([np.zeros((1, f.dim)), np.cumsum(f.values, axis=0) * h])
    return Signal(f.grid, f.lo - 1, acc)


def star(f: Signal, g: Signal) -> Signal:
    """Pointwise product on the intersection of ranges.

    Equal dimensions contract to a scalar signal by the pointwise dot
    product (for dim 1 this is the plain product).
    """
    if f.grid != g.grid:
        raise ShapeError("signals live on different grids")
    if f.dim != g.dim:
        raise ShapeError(f"star needs equal dimensions, got {f.dim} and {g.dim}")
    lo = max(f.lo, g.lo)
    hi = min(f.hi, g.hi)
    if lo > hi:
        raise ShapeError(f"ranges {f.lo}..{f.hi} and {g.lo}..{g.hi} do not overlap")
    fv = f.values[lo - f.lo : hi - f.lo + 1]
    gv = g.values[lo - g.lo : hi - g.lo + 1]
    return Signal(f.grid, lo, np.sum(fv * gv, axis=1, keepdims=True))


def _covering(f: Signal, name: str) -> Signal:
    n = f.grid.n_steps
    if f.lo > 0 or f.hi < n - 1:
        raise RangeError(f"{name} needs signals covering 0..{n - 1}, got {f.lo}..{f.hi}")
    return f.restrict(0, n - 1)


def l2_inner(f: Signal, g: Signal) -> float:
    """Discrete L2 pairing ``h * sum_{k=0}^{N-1} F_k . G_k``.

    Realized as the antiderivative of the pointwise product evaluated at
    the final node.
    """
    prod = star(_covering(f, "l2_inner"), _covering(g, "l2_inner"))
    return float(j_delta(prod)[prod.grid.n_steps][0])


def l2_symplectic_inner(x: Signal, y: Signal) -> float:
    """Symplectic L2 pairing ``h * sum_{k=0}^{N-1} X_k . (J Y_k)``.

    Bilinear and antisymmetric; both signals must have the same even
    dimension and cover 0..N-1.  The integrand is accumulated as
    ``sum_i (Xq_i Yp_i - Xp_i Yq_i)`` so that exact cancellations (for
    instance the self-pairing) stay exact in floating point.
    """
    if x.dim != y.dim:
        raise ShapeError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if x.dim % 2 != 0:
        raise ShapeError(f"symplectic pairing needs even dimension, got {x.dim}")
    d = x.dim // 2
    xv = _covering(x, "l2_symplectic_inner").values
    yv = _covering(y, "l2_symplectic_inner").values
    integrand = np.sum(xv[:, :d] * yv[:, d:] - xv[:, d:] * yv[:, :d], axis=1, keepdims=True)
    prod = Signal(x.grid, 0, integrand)
    return float(j_delta(prod)[x.grid.n_steps][0])

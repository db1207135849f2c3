"""Shared test utilities: random signals, variations, and polynomial fields."""

from __future__ import annotations

import numpy as np

from dhamsys import Signal, TimeGrid, l2_symplectic_inner
from dhamsys import expr as ex
from dhamsys.field import FieldDef, FieldForm, parse_expr


def rand_signal(grid: TimeGrid, dim: int, rng, lo: int = 0, hi: int | None = None, scale: float = 1.0) -> Signal:
    if hi is None:
        hi = grid.n_steps
    return Signal(grid, lo, scale * rng.standard_normal((hi - lo + 1, dim)))


def rand_c0(grid: TimeGrid, dim: int, rng, scale: float = 1.0) -> Signal:
    values = scale * rng.standard_normal((grid.n_steps + 1, dim))
    values[0] = 0.0
    values[-1] = 0.0
    return Signal(grid, 0, values)


def embed_interior(sig: Signal) -> Signal:
    """Extend an interior signal (1..N-1) by zero at node 0, covering 0..N-1."""
    return Signal(sig.grid, 0, np.vstack([np.zeros((1, sig.dim)), sig.values]))


def operator_pairing(rows: tuple[Signal, Signal], a: Signal, b: Signal) -> float:
    """Symplectic pairing of interior operator output with a full-grid pair."""
    n = a.grid.n_steps
    x = Signal(a.grid, 0, np.hstack([embed_interior(rows[0]).values, embed_interior(rows[1]).values]))
    y = Signal(a.grid, 0, np.hstack([a.restrict(0, n - 1).values, b.restrict(0, n - 1).values]))
    return l2_symplectic_inner(x, y)


def rand_poly_source(dim: int, degree: int, rng, n_terms: int = 5) -> str:
    """Random polynomial in Q1..Qd, P1..Pd as an expression string."""
    names = [f"Q{i + 1}" for i in range(dim)] + [f"P{i + 1}" for i in range(dim)]
    terms = []
    for _ in range(n_terms):
        coeff = round(float(rng.uniform(-2, 2)), 3)
        total = int(rng.integers(0, degree + 1))
        exponents = np.zeros(len(names), dtype=int)
        for _ in range(total):
            exponents[rng.integers(0, len(names))] += 1
        factors = [repr(coeff)]
        for name, e in zip(names, exponents):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        terms.append("*".join(factors))
    return " + ".join(terms) if terms else "0"


def rand_poly_field(dim: int, degree: int, rng, form: FieldForm = FieldForm.DELTA_NABLA) -> FieldDef:
    xq = [rand_poly_source(dim, degree, rng) for _ in range(dim)]
    xp = [rand_poly_source(dim, degree, rng) for _ in range(dim)]
    return FieldDef.from_sources(dim, form, xq, xp, {}, name="random-poly")


def rand_hamiltonian_field(dim: int, degree: int, rng) -> FieldDef:
    """Field generated by a random polynomial Hamiltonian of the given degree."""
    h_tree = parse_expr(rand_poly_source(dim, degree, rng), dim, {})
    xq = tuple(h_tree.diff(f"P{i + 1}") for i in range(dim))
    xp = tuple(ex.neg(h_tree.diff(f"Q{i + 1}")) for i in range(dim))
    return FieldDef(dim, FieldForm.DELTA_NABLA, xq, xp, {}, name="random-ham")

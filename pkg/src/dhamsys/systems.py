"""Built-in example systems.

Each factory returns a :class:`FieldDef`; parameters mirror the usual
textbook presentations (linear phase flow, Newton's equation with a
potential, linear friction, and a two-dimensional oscillator with a
non-symmetric coupling).
"""

from __future__ import annotations

from . import expr as ex
from .errors import ConfigError
from .field import FieldDef, FieldForm, parse_expr


def _with_h(constants: dict[str, float], h: float | None) -> dict[str, float]:
    if h is not None:
        constants["h"] = float(h)
    return constants


def linear(
    alpha: float = 1.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    delta: float = -1.0,
    dim: int = 1,
    form: FieldForm = FieldForm.DELTA_NABLA,
    h: float | None = None,
) -> FieldDef:
    """X_Q = alpha*Q + beta*P, X_P = gamma*Q + delta*P (componentwise)."""
    constants = _with_h(
        {"alpha": float(alpha), "beta": float(beta), "gamma": float(gamma), "delta": float(delta)}, h
    )
    xq = [f"alpha*Q{i} + beta*P{i}" for i in range(1, dim + 1)]
    xp = [f"gamma*Q{i} + delta*P{i}" for i in range(1, dim + 1)]
    return FieldDef.from_sources(dim, form, xq, xp, constants, name="linear")


def newton(
    u: str = "Q1^2/2",
    m: float = 1.0,
    form: FieldForm = FieldForm.DELTA_NABLA,
    h: float | None = None,
) -> FieldDef:
    """X_Q = P/m, X_P = -U'(Q) for a potential U given as an expression in Q1."""
    if m <= 0:
        raise ConfigError(f"mass must be positive, got {m!r}")
    constants = _with_h({"m": float(m)}, h)
    u_tree = parse_expr(u, 1, constants, kinds=("Q",))
    xp_tree = ex.neg(u_tree.diff("Q1"))
    xq_tree = parse_expr("P1/m", 1, constants)
    return FieldDef(1, form, (xq_tree,), (xp_tree,), constants, name="newton")


def friction(
    gamma: float = 0.1,
    m: float = 1.0,
    form: FieldForm = FieldForm.DELTA_NABLA,
    h: float | None = None,
) -> FieldDef:
    """X_Q = P/m, X_P = -gamma*P - Q."""
    if m <= 0:
        raise ConfigError(f"mass must be positive, got {m!r}")
    constants = _with_h({"gamma": float(gamma), "m": float(m)}, h)
    return FieldDef.from_sources(
        1, form, ["P1/m"], ["-gamma*P1 - Q1"], constants, name="friction"
    )


def modified_oscillator(form: FieldForm = FieldForm.DELTA_NABLA, h: float | None = None) -> FieldDef:
    """Two-dimensional oscillator with skew coupling: X_Q = (P1 + P2, P2), X_P = (Q1, Q2)."""
    return FieldDef.from_sources(
        2, form, ["P1 + P2", "P2"], ["Q1", "Q2"], _with_h({}, h), name="modified-oscillator"
    )


BUILTIN_NAMES = ("linear", "newton", "friction", "modified-oscillator")


def make(name: str, **params) -> FieldDef:
    """Instantiate a builtin by name; unknown names raise :class:`ConfigError`."""
    if name == "linear":
        return linear(**params)
    if name == "newton":
        return newton(**params)
    if name == "friction":
        return friction(**params)
    if name == "modified-oscillator":
        return modified_oscillator(**params)
    raise ConfigError(f"unknown builtin system {name!r}; choose from {', '.join(BUILTIN_NAMES)}")

"""First-order discrete vector fields X(Q, P) = (X_Q, X_P).

A :class:`FieldDef` holds parsed component expressions, named constants,
and a form flag saying which pair of difference operators the field is
meant to drive: ``delta-nabla`` (forward difference in Q, backward in P)
or ``delta-delta`` (forward in both).

Jacobian blocks are produced by exact symbolic differentiation of the
component trees, so structure tests downstream see exact zeros instead of
finite-difference noise.

``shift_normal_form`` converts a delta-delta field into an equivalent
delta-nabla evaluator in the variables (Q, Z) with Z the forward-shifted
momentum; the new momentum component solves a pointwise fixed-point
problem, and its Jacobians come from central differences through that
solve.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import ConfigError, EvalDomainError, ParseError, ShapeError, SingularTransformError
from .grid import TimeGrid
from .solvers import solve_fixed_point

_CBRT_EPS = float(np.finfo(float).eps) ** (1.0 / 3.0)


class FieldForm(enum.Enum):
    DELTA_NABLA = "delta-nabla"
    DELTA_DELTA = "delta-delta"


def phase_names(dim: int, kinds: tuple[str, ...] = ("Q", "P")) -> list[str]:
    """Variable names ``Q1..Qd, P1..Pd`` (or other kinds, e.g. V for velocities)."""
    return [f"{kind}{i}" for kind in kinds for i in range(1, dim + 1)]


def _check_constants(constants: dict[str, float], dim: int, kinds: tuple[str, ...]) -> None:
    reserved = set(phase_names(dim, kinds)) | set(ex.FUNCTIONS)
    ident = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
    for name, value in constants.items():
        if not ident.match(name):
            raise ConfigError(f"invalid constant name {name!r}")
        if name in reserved:
            raise ConfigError(f"constant name {name!r} clashes with a variable or function")
        if not np.isfinite(value):
            raise ConfigError(f"constant {name!r} must be finite, got {value!r}")


def parse_expr(
    source: str,
    dim: int,
    constants: dict[str, float],
    kinds: tuple[str, ...] = ("Q", "P"),
) -> ex.Expr:
    """Parse one component expression and validate its identifiers.

    Allowed names are the declared constants plus the phase variables of
    the given kinds (``Q1..Qd`` and ``P1..Pd`` by default).  Syntax and
    validation failures raise :class:`ParseError` with line/column info.
    """
    tree = ex.parse_expression(source)
    ex.check_names(tree, set(constants) | set(phase_names(dim, kinds)))
    return tree


@dataclass(frozen=True)
class JacobianBlocks:
    """The four d x d partial-derivative blocks of a field at one phase point."""

    dxq_dq: np.ndarray
    dxq_dp: np.ndarray
    dxp_dq: np.ndarray
    dxp_dp: np.ndarray


@dataclass(frozen=True, eq=False)
class FieldDef:
    dim: int
    form: FieldForm
    xq: tuple[ex.Expr, ...]
    xp: tuple[ex.Expr, ...]
    constants: dict[str, float]
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeError(f"field dimension must be positive, got {self.dim}")
        if len(self.xq) != self.dim or len(self.xp) != self.dim:
            raise ShapeError(
                f"need {self.dim} components per block, got {len(self.xq)} X_Q and {len(self.xp)} X_P"
            )
        _check_constants(self.constants, self.dim, ("Q", "P"))
        allowed = set(self.constants) | set(phase_names(self.dim))
        for tree in (*self.xq, *self.xp):
            ex.check_names(tree, allowed)

    @classmethod
    def from_sources(
        cls,
        dim: int,
        form: FieldForm,
        xq_sources,
        xp_sources,
        constants: dict[str, float] | None = None,
        name: str = "",
    ) -> "FieldDef":
        constants = dict(constants or {})
        _check_constants(constants, dim, ("Q", "P"))
        xq = tuple(parse_expr(s, dim, constants) for s in xq_sources)
        xp = tuple(parse_expr(s, dim, constants) for s in xp_sources)
        return cls(dim, form, xq, xp, constants, name)

    def _env(self, q: np.ndarray, p: np.ndarray) -> dict[str, float]:
        env = dict(self.constants)
        for i in range(self.dim):
            env[f"Q{i + 1}"] = float(q[i])
            env[f"P{i + 1}"] = float(p[i])
        return env

    def eval(self, q, p) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (X_Q, X_P) at the phase point (q, p)."""
        q, p = _as_point(q, p, self.dim)
        env = self._env(q, p)
        return _eval_block(self.xq, env, "X_Q"), _eval_block(self.xp, env, "X_P")

    @cached_property
    def _jacobian_exprs(self):
        vq = [f"Q{j + 1}" for j in range(self.dim)]
        vp = [f"P{j + 1}" for j in range(self.dim)]
        return tuple(
            tuple(tuple(comp.diff(v) for v in vars_) for comp in block)
            for block, vars_ in ((self.xq, vq), (self.xq, vp), (self.xp, vq), (self.xp, vp))
        )

    def jacobian(self, q, p) -> JacobianBlocks:
        """Exact partial-derivative blocks at (q, p), from symbolic differentiation."""
        q, p = _as_point(q, p, self.dim)
        env = self._env(q, p)
        dq_q, dq_p, dp_q, dp_p = (
            np.array([[e.eval(env) for e in row] for row in block])
            for block in self._jacobian_exprs
        )
        return JacobianBlocks(dq_q, dq_p, dp_q, dp_p)

    def scaled(self, factor: float) -> "FieldDef":
        """The field with both blocks multiplied by a scalar."""
        c = ex.Num(float(factor))
        return FieldDef(
            self.dim,
            self.form,
            tuple(ex.mul(c, e) for e in self.xq),
            tuple(ex.mul(c, e) for e in self.xp),
            dict(self.constants),
            self.name,
        )


def _as_point(q, p, dim: int) -> tuple[np.ndarray, np.ndarray]:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if q.shape != (dim,) or p.shape != (dim,):
        raise ShapeError(f"phase point must be a pair of length-{dim} vectors, got {q.shape} and {p.shape}")
    return q, p


def _eval_block(block: tuple[ex.Expr, ...], env: dict[str, float], label: str) -> np.ndarray:
    out = np.empty(len(block))
    for i, tree in enumerate(block):
        try:
            out[i] = tree.eval(env)
        except EvalDomainError as err:
            raise EvalDomainError(f"{label}[{i + 1}]: {err}") from None
    return out


@dataclass(frozen=True)
class ShiftedField:
    """Delta-nabla evaluator for a delta-delta field under Z = sigma(P).

    In the shifted variables the momentum equation becomes the pointwise
    fixed point ``Y = X_P(Q, Z - h*Y)``; once solved, the position
    component is ``X_Q(Q, Z - h*Y)``.  Points where the solve has no
    unique solution raise :class:`SingularTransformError`.
    """

    base: FieldDef
    fd_step: float = _CBRT_EPS
    solver_tol: float = 1e-12

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def form(self) -> FieldForm:
        return FieldForm.DELTA_NABLA

    @property
    def constants(self) -> dict[str, float]:
        return self.base.constants

    @property
    def name(self) -> str:
        return f"{self.base.name or 'field'} (shift normal form)"

    @property
    def h(self) -> float:
        return self.base.constants["h"]

    def eval(self, q, z) -> tuple[np.ndarray, np.ndarray]:
        q, z = _as_point(q, z, self.dim)
        y = self._solve_momentum(q, z)
        xq, _ = self.base.eval(q, z - self.h * y)
        return xq, y

    def _solve_momentum(self, q: np.ndarray, z: np.ndarray) -> np.ndarray:
        h = self.h

        def fmap(y):
            _, xp = self.base.eval(q, z - h * y)
            return xp

        def fjac(y):
            return -h * self.base.jacobian(q, z - h * y).dxp_dp

        _, xp0 = self.base.eval(q, z)
        result = solve_fixed_point(fmap, xp0, jac_fn=fjac, tol=self.solver_tol)
        if not result.converged:
            kind = "is singular" if result.singular else "did not converge"
            raise SingularTransformError(
                f"momentum solve {kind} at q={q.tolist()}, z={z.tolist()} "
                f"(residual {result.residual:.3e})"
            )
        return result.y

    def jacobian(self, q, z) -> JacobianBlocks:
        """Central-difference Jacobian blocks through the implicit solve."""
        q, z = _as_point(q, z, self.dim)
        d = self.dim
        x = np.concatenate([q, z])
        cols_q = np.empty((d, 2 * d))
        cols_p = np.empty((d, 2 * d))
        for j in range(2 * d):
            step = self.fd_step * (1.0 + abs(x[j]))
            hi = x.copy()
            lo = x.copy()
            hi[j] += step
            lo[j] -= step
            xq_hi, xp_hi = self.eval(hi[:d], hi[d:])
            xq_lo, xp_lo = self.eval(lo[:d], lo[d:])
            cols_q[:, j] = (xq_hi - xq_lo) / (2.0 * step)
            cols_p[:, j] = (xp_hi - xp_lo) / (2.0 * step)
        return JacobianBlocks(cols_q[:, :d], cols_q[:, d:], cols_p[:, :d], cols_p[:, d:])


def shift_normal_form(f: FieldDef) -> ShiftedField:
    """Convert a delta-delta field to its delta-nabla shift normal form."""
    if f.form is not FieldForm.DELTA_DELTA:
        raise ShapeError("shift normal form applies to delta-delta fields only")
    h = f.constants.get("h")
    if h is None:
        raise ConfigError("shift normal form needs the step size as constant 'h'")
    if not (np.isfinite(h) and h > 0):
        raise ConfigError(f"step constant 'h' must be positive and finite, got {h!r}")
    return ShiftedField(f)


@dataclass(frozen=True)
class SystemSpec:
    """A field plus the optional grid parsed from a system config file."""

    fielddef: FieldDef
    grid: TimeGrid | None = None


_COMPONENT_KEY = re.compile(r"(XQ|XP)(\d+)\Z")


def parse_system_config(text: str, name: str = "") -> SystemSpec:
    """Parse the ``key = value`` system config format.

    Top-level keys: ``dim``, ``form`` (delta-nabla | delta-delta), ``h`` or
    ``grid = a,b,N``, and the component lines ``XQ1..XQd`` / ``XP1..XPd``.
    A ``[constants]`` line opens the named-constant block.  ``#`` starts a
    comment.  Component keys are recognized in any section; constants may
    therefore not be named like ``XQ1``.
    """
    top: dict[str, str] = {}
    constants: dict[str, float] = {}
    components: dict[str, tuple[str, int]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[constants]":
                raise ConfigError(f"line {lineno}: unknown section {line!r}")
            section = "constants"
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if _COMPONENT_KEY.match(key):
            if key in components:
                raise ConfigError(f"line {lineno}: duplicate component {key!r}")
            components[key] = (value, lineno)
        elif section == "constants":
            try:
                constants[key] = float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: constant {key!r} must be a number, got {value!r}") from None
        else:
            if key in top:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            top[key] = value

    try:
        dim = int(top.pop("dim"))
    except KeyError:
        raise ConfigError("config is missing 'dim'") from None
    except ValueError:
        raise ConfigError(f"'dim' must be an integer, got {top['dim']!r}") from None
    if dim < 1:
        raise ConfigError(f"'dim' must be positive, got {dim}")

    form_text = top.pop("form", FieldForm.DELTA_NABLA.value)
    try:
        form = FieldForm(form_text)
    except ValueError:
        choices = " | ".join(f.value for f in FieldForm)
        raise ConfigError(f"'form' must be one of {choices}, got {form_text!r}") from None

    grid = None
    if "grid" in top:
        parts = top.pop("grid").split(",")
        if len(parts) != 3:
            raise ConfigError("'grid' must be 'a,b,N'")
        try:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"'grid' must be 'a,b,N' with numeric entries, got {parts!r}") from None
        grid = TimeGrid(a, b, n)
        constants.setdefault("h", grid.h)
    if "h" in top:
        try:
            constants["h"] = float(top.pop("h"))
        except ValueError:
            raise ConfigError(f"'h' must be a number, got {top['h']!r}") from None

    if top:
        raise ConfigError(f"unknown config keys: {sorted(top)}")

    xq_sources, xp_sources = [], []
    for block, out in (("XQ", xq_sources), ("XP", xp_sources)):
        for i in range(1, dim + 1):
            key = f"{block}{i}"
            if key not in components:
                raise ConfigError(f"config is missing component {key!r}")
            out.append(components.pop(key))
    if components:
        raise ConfigError(f"component keys outside 1..{dim}: {sorted(components)}")

    def build(sources):
        trees = []
        for source, lineno in sources:
            try:
                trees.append(parse_expr(source, dim, constants))
            except ParseError as err:
                raise ConfigError(f"line {lineno}: {err}") from None
        return tuple(trees)

    fielddef = FieldDef(dim, form, build(xq_sources), build(xp_sources), constants, name)
    return SystemSpec(fielddef, grid)


def load_system(path) -> SystemSpec:
    """Read and parse a system config file."""
    from pathlib import Path

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read system file {p}: {err}") from None
    return parse_system_config(text, name=p.stem)

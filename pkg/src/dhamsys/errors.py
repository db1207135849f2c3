"""Exception types shared across the package."""


class DhamsysError(Exception):
    """Base class for all package errors."""


class RangeError(DhamsysError):
    """A signal does not cover the index range an operation requires."""


class ShapeError(DhamsysError):
    """Incompatible dimensions, grids, or index ranges."""


class ParseError(DhamsysError):
    """Syntax or validation failure in an expression or config file.

    Carries 1-based ``line`` and ``column`` of the offending token.
    """

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class EvalDomainError(DhamsysError):
    """Evaluation left the domain of a function (log of a non-positive
    number, division by zero, fractional power of a negative base, ...)."""


class SingularTransformError(DhamsysError):
    """The shift normal form is singular at some phase point: the implicit
    momentum solve has no unique solution there."""


class NonAdmissibleError(DhamsysError):
    """A Lagrangian whose velocity Hessian is singular at the probed point;
    the momentum map cannot be inverted."""


class IntegrationError(DhamsysError):
    """The implicit update of a time stepper failed to converge."""

    def __init__(self, step: int, residual: float, message: str = ""):
        detail = message or "implicit momentum solve did not converge"
        super().__init__(f"step {step}: {detail} (last residual {residual:.3e})")
        self.step = step
        self.residual = residual


class ConfigError(DhamsysError):
    """A run or system configuration is invalid."""

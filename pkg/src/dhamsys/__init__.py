"""Discrete Hamiltonian systems on uniform time grids.

Detects Hamiltonian structure of first-order finite-difference systems
via integrability conditions on the field Jacobians, reconstructs the
generating Hamiltonian by a homotopy integral, integrates trajectories
with the variationally coherent (delta, nabla) pairing, and verifies the
discrete variational principle directly.
"""

from .dynamics import (
    LagrangianDef,
    Trajectory,
    action,
    action_criticality,
    integrate_delta_delta,
    integrate_delta_nabla,
    legendre,
    write_trajectory_csv,
)
from .errors import (
    ConfigError,
    DhamsysError,
    EvalDomainError,
    IntegrationError,
    NonAdmissibleError,
    ParseError,
    RangeError,
    ShapeError,
    SingularTransformError,
)
from .field import (
    FieldDef,
    FieldForm,
    JacobianBlocks,
    ShiftedField,
    SystemSpec,
    load_system,
    parse_expr,
    parse_system_config,
    shift_normal_form,
)
from .grid import (
    Signal,
    TimeGrid,
    delta,
    j_delta,
    j_nabla,
    l2_inner,
    l2_symplectic_inner,
    nabla,
    rho,
    sigma,
    star,
)
from .helmholtz import HelmholtzReport, check, frechet_adjoint_apply, frechet_apply, sample_box
from .reconstruct import GradientCheckReport, HamiltonianFn, reconstruct, verify_generates

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DhamsysError",
    "EvalDomainError",
    "FieldDef",
    "FieldForm",
    "GradientCheckReport",
    "HamiltonianFn",
    "HelmholtzReport",
    "IntegrationError",
    "JacobianBlocks",
    "LagrangianDef",
    "NonAdmissibleError",
    "ParseError",
    "RangeError",
    "ShapeError",
    "ShiftedField",
    "Signal",
    "SingularTransformError",
    "SystemSpec",
    "TimeGrid",
    "Trajectory",
    "action",
    "action_criticality",
    "check",
    "delta",
    "frechet_adjoint_apply",
    "frechet_apply",
    "integrate_delta_delta",
    "integrate_delta_nabla",
    "j_delta",
    "j_nabla",
    "l2_inner",
    "l2_symplectic_inner",
    "legendre",
    "load_system",
    "nabla",
    "parse_expr",
    "parse_system_config",
    "reconstruct",
    "rho",
    "sample_box",
    "shift_normal_form",
    "sigma",
    "star",
    "verify_generates",
    "write_trajectory_csv",
]

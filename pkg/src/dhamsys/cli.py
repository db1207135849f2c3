"""Command-line front end.

Subcommands: ``check`` (Hamiltonian structure verdict), ``reconstruct``
(homotopy Hamiltonian plus gradient verification), ``integrate``
(trajectory CSV), ``action`` (discrete action and criticality),
``normal-form`` (shifted evaluator samples for delta-delta systems), and
``demo`` (one-command reproduction of the built-in example verdicts).

Exit codes: 0 positive verdict / success, 1 negative verdict, 2 usage or
config error, 3 numerical failure.  JSON reports are always written on
exits 0 and 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import helmholtz, systems
from .dynamics import (
    SOLVER_TOLERANCE,
    action,
    action_criticality,
    integrate_delta_delta,
    integrate_delta_nabla,
    write_trajectory_csv,
)
from .errors import (
    ConfigError,
    DhamsysError,
    EvalDomainError,
    IntegrationError,
    NonAdmissibleError,
    ParseError,
    ShapeError,
    SingularTransformError,
)
from .field import FieldDef, FieldForm, load_system, parse_expr, shift_normal_form
from .grid import TimeGrid
from .reconstruct import DEFAULT_QUAD_ORDER, reconstruct, verify_generates

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")], dtype=float)
    except ValueError:
        raise ConfigError(f"expected a comma-separated vector, got {text!r}") from None


def _parse_grid(text: str) -> TimeGrid:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--grid takes 'a,b,N'")
    try:
        return TimeGrid(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError:
        raise ConfigError(f"--grid takes 'a,b,N' with numeric entries, got {text!r}") from None


def _parse_form(text: str) -> FieldForm:
    try:
        return FieldForm(text)
    except ValueError:
        raise ConfigError(
            f"--form must be one of {' | '.join(f.value for f in FieldForm)}, got {text!r}"
        ) from None


def _add_system_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("system", help="system config path or builtin:<name>")
    sub.add_argument("--form", help="field form: delta-nabla | delta-delta")
    sub.add_argument("--dim", type=int, help="phase dimension (builtin:linear)")
    sub.add_argument("--alpha", type=float, help="builtin:linear coefficient")
    sub.add_argument("--beta", type=float, help="builtin:linear coefficient")
    sub.add_argument("--gamma", type=float, help="builtin:linear / builtin:friction coefficient")
    sub.add_argument("--delta", type=float, help="builtin:linear coefficient")
    sub.add_argument("--m", type=float, help="mass (builtin:newton, builtin:friction)")
    sub.add_argument("--U", help="potential expression in Q1 (builtin:newton)")
    sub.add_argument("--h", type=float, help="grid step (also exposed to expressions)")
    sub.add_argument("--grid", help="time grid 'a,b,N'")


def _add_sampling_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--samples", type=int, default=helmholtz.DEFAULT_SAMPLE_COUNT,
                     help="number of quasi-random phase points")
    sub.add_argument("--box", type=float, default=helmholtz.DEFAULT_BOX,
                     help="half-width of the sampling box")
    sub.add_argument("--seed", type=int, default=0, help="sampling seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dhamsys",
        description="Discrete Hamiltonian structure detection, reconstruction, and integration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="decide whether a system is a discrete Hamiltonian system")
    _add_system_args(p_check)
    _add_sampling_args(p_check)
    p_check.add_argument("--tol", type=float, default=helmholtz.DEFAULT_TOLERANCE,
                         help="residual tolerance for the verdict")
    p_check.add_argument("--out", type=Path, help="JSON report path (default stdout)")

    p_rec = sub.add_parser("reconstruct", help="reconstruct the Hamiltonian and verify it generates the field")
    _add_system_args(p_rec)
    _add_sampling_args(p_rec)
    p_rec.add_argument("--quad-order", type=int, default=DEFAULT_QUAD_ORDER)
    p_rec.add_argument("--out", type=Path, help="JSON report path (default stdout)")

    p_int = sub.add_parser("integrate", help="integrate a trajectory and emit CSV")
    _add_system_args(p_int)
    p_int.add_argument("--q0", required=True, help="initial position, comma separated")
    p_int.add_argument("--p0", required=True, help="initial momentum, comma separated")
    p_int.add_argument("--steps", type=int, help="number of steps (with --h; grid starts at 0)")
    p_int.add_argument("--solver-tol", type=float, default=SOLVER_TOLERANCE)
    p_int.add_argument("--out", type=Path, help="CSV path (default stdout)")

    p_act = sub.add_parser("action", help="discrete action of an integrated trajectory plus criticality")
    _add_system_args(p_act)
    p_act.add_argument("--q0", required=True)
    p_act.add_argument("--p0", required=True)
    p_act.add_argument("--steps", type=int)
    p_act.add_argument("--directions", type=int, default=16)
    p_act.add_argument("--seed", type=int, default=0)
    p_act.add_argument("--quad-order", type=int, default=DEFAULT_QUAD_ORDER)
    p_act.add_argument("--out", type=Path, help="JSON report path (default stdout)")

    p_nf = sub.add_parser("normal-form", help="sample the shift normal form of a delta-delta system")
    _add_system_args(p_nf)
    _add_sampling_args(p_nf)
    p_nf.add_argument("--out", type=Path, help="JSON report path (default stdout)")

    p_demo = sub.add_parser("demo", help="reproduce a built-in example's verdicts")
    p_demo.add_argument("name", choices=systems.BUILTIN_NAMES)
    p_demo.add_argument("--h", type=float, default=0.1)
    p_demo.add_argument("--m", type=float, default=1.0)
    p_demo.add_argument("--U", default="Q1^2/2")
    p_demo.add_argument("--out", type=Path, help="optional JSON table path")
    return parser


def _resolve_system(args) -> tuple[FieldDef, TimeGrid | None]:
    grid = _parse_grid(args.grid) if getattr(args, "grid", None) else None
    step = args.h if getattr(args, "h", None) is not None else (grid.h if grid else None)
    name = args.system
    if name.startswith("builtin:"):
        builtin = name[len("builtin:"):]
        params: dict = {}
        for key in ("alpha", "beta", "gamma", "delta", "m"):
            value = getattr(args, key, None)
            if value is not None:
                params[key] = value
        if getattr(args, "U", None) is not None:
            params["u"] = args.U
        if getattr(args, "dim", None) is not None:
            params["dim"] = args.dim
        if getattr(args, "form", None):
            params["form"] = _parse_form(args.form)
        if step is not None:
            params["h"] = step
        return systems.make(builtin, **params), grid
    spec = load_system(name)
    fielddef = spec.fielddef
    if getattr(args, "form", None):
        fielddef = FieldDef(
            fielddef.dim, _parse_form(args.form), fielddef.xq, fielddef.xp,
            dict(fielddef.constants), fielddef.name,
        )
    if step is not None:
        fielddef = FieldDef(
            fielddef.dim, fielddef.form, fielddef.xq, fielddef.xp,
            {**fielddef.constants, "h": float(step)}, fielddef.name,
        )
    return fielddef, grid or spec.grid


def _resolve_run_grid(args, spec_grid: TimeGrid | None) -> TimeGrid:
    if getattr(args, "grid", None):
        return _parse_grid(args.grid)
    if getattr(args, "steps", None):
        if args.h is None:
            raise ConfigError("--steps needs --h")
        if args.steps < 2:
            raise ConfigError(f"--steps must be at least 2, got {args.steps}")
        return TimeGrid(0.0, args.steps * args.h, args.steps)
    if spec_grid is not None:
        return spec_grid
    raise ConfigError("no time grid: pass --grid a,b,N or --h with --steps")


def _write_json(doc: dict, out: Path | None) -> None:
    text = json.dumps(doc, indent=2)
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n", encoding="utf-8")


def _operator_form(fielddef: FieldDef):
    """The delta-nabla evaluator for a field, applying the shift normal form if needed."""
    if fielddef.form is FieldForm.DELTA_DELTA:
        return shift_normal_form(fielddef), True
    return fielddef, False


def cmd_check(args) -> int:
    fielddef, _ = _resolve_system(args)
    operator, shifted = _operator_form(fielddef)
    samples = helmholtz.sample_box(fielddef.dim, args.samples, args.box, args.seed)
    report = helmholtz.check(operator, samples, tol=args.tol, system=fielddef.name or args.system)
    doc = report.to_dict()
    doc["system_form"] = fielddef.form.value
    doc["normal_form_applied"] = shifted
    doc["seed"] = args.seed
    doc["sample_count"] = args.samples
    doc["box"] = args.box
    _write_json(doc, args.out)
    return EXIT_OK if report.is_hamiltonian else EXIT_NEGATIVE


def cmd_reconstruct(args) -> int:
    fielddef, _ = _resolve_system(args)
    operator, shifted = _operator_form(fielddef)
    ham = reconstruct(operator, quad_order=args.quad_order)
    samples = helmholtz.sample_box(fielddef.dim, args.samples, args.box, args.seed)
    points = [
        {"q": q.tolist(), "p": p.tolist(), "H": ham.value(q, p)} for q, p in samples
    ]
    verify = verify_generates(operator, ham, samples)
    doc = {
        "system": fielddef.name or args.system,
        "system_form": fielddef.form.value,
        "normal_form_applied": shifted,
        "quad_order": args.quad_order,
        "seed": args.seed,
        "box": args.box,
        "points": points,
        "verify": verify.to_dict(),
    }
    _write_json(doc, args.out)
    return EXIT_OK if verify.passed else EXIT_NEGATIVE


def cmd_integrate(args) -> int:
    fielddef, spec_grid = _resolve_system(args)
    grid = _resolve_run_grid(args, spec_grid)
    q0 = _parse_vector(args.q0)
    p0 = _parse_vector(args.p0)
    if fielddef.form is FieldForm.DELTA_NABLA:
        energy = None
        try:
            energy = reconstruct(fielddef)
        except DhamsysError as err:
            print(f"note: no energy column ({err})", file=sys.stderr)
        traj = integrate_delta_nabla(fielddef, q0, p0, grid, energy=energy, solver_tol=args.solver_tol)
    else:
        traj = integrate_delta_delta(fielddef, q0, p0, grid)
    if args.out is None:
        write_trajectory_csv(traj, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as stream:
            write_trajectory_csv(traj, stream)
    return EXIT_OK


def cmd_action(args) -> int:
    fielddef, spec_grid = _resolve_system(args)
    if fielddef.form is not FieldForm.DELTA_NABLA:
        raise ConfigError("action applies to delta-nabla systems")
    grid = _resolve_run_grid(args, spec_grid)
    q0 = _parse_vector(args.q0)
    p0 = _parse_vector(args.p0)
    ham = reconstruct(fielddef, quad_order=args.quad_order)
    traj = integrate_delta_nabla(fielddef, q0, p0, grid, energy=ham)
    value = action(ham, traj.q, traj.p)
    residual = action_criticality(ham, traj.q, traj.p, n_directions=args.directions, seed=args.seed)
    threshold = 10.0 * SOLVER_TOLERANCE
    doc = {
        "system": fielddef.name or args.system,
        "grid": {"a": grid.a, "b": grid.b, "n_steps": grid.n_steps},
        "action": value,
        "criticality_residual": residual,
        "n_directions": args.directions,
        "seed": args.seed,
        "threshold": threshold,
        "pass": residual <= threshold,
    }
    _write_json(doc, args.out)
    return EXIT_OK if residual <= threshold else EXIT_NEGATIVE


def cmd_normal_form(args) -> int:
    fielddef, _ = _resolve_system(args)
    if fielddef.form is not FieldForm.DELTA_DELTA:
        raise ConfigError("normal-form applies to delta-delta systems")
    shifted = shift_normal_form(fielddef)
    samples = helmholtz.sample_box(fielddef.dim, args.samples, args.box, args.seed)
    points = []
    for q, z in samples:
        xq, xp = shifted.eval(q, z)
        points.append({"q": q.tolist(), "z": z.tolist(), "XQ": xq.tolist(), "XP": xp.tolist()})
    doc = {
        "system": fielddef.name or args.system,
        "form": FieldForm.DELTA_NABLA.value,
        "h": shifted.h,
        "seed": args.seed,
        "box": args.box,
        "points": points,
    }
    _write_json(doc, args.out)
    return EXIT_OK


def _demo_rows(name: str, h: float, m: float, u: str) -> list[dict]:
    tol = helmholtz.DEFAULT_TOLERANCE
    rows = []

    def row(label: str, ok: bool, detail: str = "") -> None:
        rows.append({"label": label, "pass": bool(ok), "detail": detail})

    if name == "linear":
        ham_field = systems.linear(1.0, 2.0, 3.0, -1.0)
        rep = helmholtz.check(ham_field, helmholtz.sample_box(1), tol)
        row("alpha+delta=0 gives a hamiltonian verdict", rep.is_hamiltonian,
            f"max residual {max(rep.max_ch1, rep.max_ch2q, rep.max_ch2p):.2e}")
        bad = systems.linear(1.0, 1.0, 1.0, 0.0)
        rep = helmholtz.check(bad, helmholtz.sample_box(1), tol)
        row("alpha+delta=1 gives a non-hamiltonian verdict with ch1 = 1",
            not rep.is_hamiltonian and abs(rep.max_ch1 - 1.0) <= 1e-12,
            f"max_ch1 {rep.max_ch1:.12f}")
        ham = reconstruct(ham_field)
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(20):
            q, p = rng.uniform(-2, 2, size=2)
            expected = 0.5 * (2.0 * p * p - 3.0 * q * q) + 1.0 * q * p
            worst = max(worst, abs(ham.value([q], [p]) - expected))
        row("reconstructed H matches (beta*P^2 - gamma*Q^2)/2 + alpha*Q*P", worst <= 1e-12,
            f"max deviation {worst:.2e}")
        return rows

    if name == "newton":
        nab = systems.newton(u=u, m=m, h=h)
        rep = helmholtz.check(nab, helmholtz.sample_box(1), tol)
        row("delta-nabla form is hamiltonian", rep.is_hamiltonian,
            f"max residual {max(rep.max_ch1, rep.max_ch2q, rep.max_ch2p):.2e}")
        dd = systems.newton(u=u, m=m, h=h, form=FieldForm.DELTA_DELTA)
        shifted = shift_normal_form(dd)
        rep = helmholtz.check(shifted, helmholtz.sample_box(1), tol)
        # closed-form residual needs the second derivative of the potential
        u_tree = parse_expr(u, 1, {"m": m, "h": h}, kinds=("Q",))
        upp = u_tree.diff("Q1").diff("Q1")
        worst_rel = 0.0
        worst_closed = 0.0
        for s in rep.samples:
            expected = h * abs(upp.eval({"Q1": s.q[0], "m": m, "h": h})) / m
            worst_closed = max(worst_closed, expected)
            worst_rel = max(worst_rel, abs(s.ch1 - expected) / max(1e-9, expected))
        expect_ham = worst_closed <= tol
        row(
            "delta-delta normal form verdict matches U'' (hamiltonian iff U'' = 0)",
            rep.is_hamiltonian == expect_ham,
            f"verdict {rep.verdict}",
        )
        row("delta-delta ch1 residual matches h*|U''(Q)|/m per sample", worst_rel <= 1e-6,
            f"worst rel err {worst_rel:.2e}")
        lin = shift_normal_form(systems.newton(u="2*Q1", m=m, h=h, form=FieldForm.DELTA_DELTA))
        rep = helmholtz.check(lin, helmholtz.sample_box(1), tol)
        row("delta-delta with a linear potential is hamiltonian", rep.is_hamiltonian,
            f"max_ch1 {rep.max_ch1:.2e}")
        return rows

    if name == "friction":
        threshold = h / m
        sweep = [0.0, 0.05, threshold, 0.15, 0.3]
        ok = True
        details = []
        for gamma in sweep:
            rep = helmholtz.check(systems.friction(gamma=gamma, m=m), helmholtz.sample_box(1), tol)
            ok = ok and (rep.is_hamiltonian == (gamma == 0.0))
            details.append(f"gamma={gamma:g}:{rep.verdict}")
        row("delta-nabla form is hamiltonian iff gamma = 0", ok, "; ".join(details))
        ok = True
        resid_ok = True
        details = []
        for gamma in sweep:
            dd = systems.friction(gamma=gamma, m=m, h=h, form=FieldForm.DELTA_DELTA)
            rep = helmholtz.check(shift_normal_form(dd), helmholtz.sample_box(1), tol)
            expect = abs(gamma - threshold) <= tol
            ok = ok and (rep.is_hamiltonian == expect)
            expected_resid = abs(h / m - gamma) / (1.0 - h * gamma)
            if not expect:
                resid_ok = resid_ok and abs(rep.max_ch1 - expected_resid) <= 1e-6 * max(1.0, expected_resid)
            details.append(f"gamma={gamma:g}:{rep.verdict}")
        row("delta-delta normal form is hamiltonian iff gamma = h/m", ok, "; ".join(details))
        row("off-threshold ch1 residual matches |h/m - gamma|/(1 - h*gamma)", resid_ok)
        return rows

    # modified-oscillator
    rep = helmholtz.check(systems.modified_oscillator(), helmholtz.sample_box(2), tol)
    row("verdict is not hamiltonian", not rep.is_hamiltonian, f"verdict {rep.verdict}")
    row("ch2q residual is exactly 1", abs(rep.max_ch2q - 1.0) <= 1e-12,
        f"max_ch2q {rep.max_ch2q:.15f}")
    return rows


def cmd_demo(args) -> int:
    rows = _demo_rows(args.name, args.h, args.m, args.U)
    print(f"demo: {args.name} (h={args.h:g}, m={args.m:g}, U={args.U})")
    for r in rows:
        status = "PASS" if r["pass"] else "FAIL"
        detail = f"  ({r['detail']})" if r["detail"] else ""
        print(f"  [{status}] {r['label']}{detail}")
    n_ok = sum(r["pass"] for r in rows)
    all_ok = n_ok == len(rows)
    print(f"result: {'PASS' if all_ok else 'FAIL'} ({n_ok}/{len(rows)})")
    if args.out is not None:
        _write_json({"demo": args.name, "rows": rows, "pass": all_ok}, args.out)
    return EXIT_OK if all_ok else EXIT_NEGATIVE


_HANDLERS = {
    "check": cmd_check,
    "reconstruct": cmd_reconstruct,
    "integrate": cmd_integrate,
    "action": cmd_action,
    "normal-form": cmd_normal_form,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, ParseError, ShapeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (EvalDomainError, SingularTransformError, IntegrationError, NonAdmissibleError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())

"""Command line interface.

Subcommands: check, classify, flow, family, rotate, verify-g2.
Exit codes: 0 pass, 1 invalid structure / failed verification, 2 usage or
parse error, 3 flow singularity.  The environment variable NHF_TOL
overrides the default validation tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from nhflat import families, flow
from nhflat.exterior import d
from nhflat.structure import (
    DEFAULT_TOL,
    NhfStructure,
    StructureError,
    InvalidStructureError,
)
from nhflat import torsion as torsion_mod

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_SINGULAR = 3


def _tolerance(args) -> float:
    if getattr(args, "tol", None) is not None:
        return args.tol
    env = os.environ.get("NHF_TOL")
    if env:
        try:
            return float(env)
        except ValueError:
            raise SystemExit(EXIT_USAGE)
    return DEFAULT_TOL


def _load_structure(path: str) -> NhfStructure:
    try:
        if path == "-":
            rec = json.load(sys.stdin)
        else:
            with open(path) as fh:
                rec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read structure record: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    try:
        return NhfStructure.from_record(rec)
    except StructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(payload, out=None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_check(args) -> int:
    tol = _tolerance(args)
    s = _load_structure(args.input)
    report = s.validate(tol=tol)
    payload = {
        "residuals": {k: float(v) for k, v in report.residuals.items()},
        "metric_spd": report.metric_spd,
        "valid": report.passed,
        "tolerance": tol,
    }
    if report.passed:
        data = torsion_mod.extract_torsion(s)
        payload.update(
            {
                "class": data.class_label,
                "w1plus": data.w1plus,
                "w1minus": data.w1minus,
                "s": data.s,
            }
        )
    else:
        payload["failing"] = report.failing()
    _emit(payload, args.out)
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_classify(args) -> int:
    tol = _tolerance(args)
    s = _load_structure(args.input)
    report = s.validate(tol=tol)
    if not report.passed:
        _emit({"valid": False, "failing": report.failing()}, args.out)
        return EXIT_INVALID
    cls = torsion_mod.classify(s)
    data = torsion_mod.extract_torsion(s)
    _emit(
        {
            "class": cls.label,
            "nearly_kahler": cls.nearly_kahler,
            "predicate_residuals": {
                k: float(v) for k, v in cls.predicate_residuals.items()
            },
            "w1plus": data.w1plus,
            "w1minus": data.w1minus,
            "s": data.s,
        },
        args.out,
    )
    return EXIT_OK


def _run_flow_one(s, args):
    traj = flow.integrate(
        s,
        args.t_start,
        args.t_end,
        h=args.h,
        record_every=args.record_every,
    )
    return traj


def cmd_flow(args) -> int:
    inputs = list(args.input)
    if len(inputs) > 1:
        args.batch = True
    code = EXIT_OK
    summaries = []
    for k, path in enumerate(inputs):
        s = _load_structure(path)
        report = s.validate(tol=_tolerance(args))
        if not report.passed:
            print(
                f"error: initial structure invalid "
                f"(worst residual {report.worst[1]:.3e} in {report.worst[0]})",
                file=sys.stderr,
            )
            return EXIT_INVALID
        try:
            traj = _run_flow_one(s, args)
        except flow.FlowSingularityError as exc:
            traj = exc.trajectory
            summary = traj.to_record() if traj.samples else {}
            summary["terminated"] = "singular"
            summary["last_good_t"] = float(traj.times[-1]) if traj.samples else None
            print(f"flow singularity near t = {exc.t:.6f}", file=sys.stderr)
            summaries.append(summary)
            code = EXIT_SINGULAR
            if args.out and traj.samples:
                traj.to_csv(_batch_path(args.out, k, args.batch))
            continue
        summaries.append(traj.to_record())
        if args.out:
            traj.to_csv(_batch_path(args.out, k, args.batch))
        else:
            sys.stdout.write(traj.to_csv())
    for summary in summaries:
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return code


def _batch_path(out: str, index: int, batch: bool) -> str:
    if not batch:
        return out
    root, ext = os.path.splitext(out)
    return f"{root}_{index}{ext or '.csv'}"


def cmd_family(args) -> int:
    try:
        members = _family_members(args)
    except (StructureError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records = [m.to_record() for m in members]
    _emit(records if len(records) != 1 else records[0], args.out)
    return EXIT_OK


def _family_members(args):
    name = args.name
    if name == "nk":
        return [families.nearly_kahler(args.lam, sign_p=args.sign_p)]
    if name == "w1":
        return [families.w1_family(args.lam, args.p, sign_q=args.sign_q)]
    if name == "w1w3":
        return [families.w1w3_family(args.a, sign_p=args.sign_p)]
    if name == "zero-scalar":
        if args.branch is None:
            raise families.FamilyRangeError("zero-scalar requires --branch plus|minus")
        return families.zero_scalar_family(args.branch)
    if name == "berger":
        return [families.berger_trajectory(args.t)]
    if name == "sine-cone":
        return [families.sine_cone_trajectory(args.t, sign_p=args.sign_p)]
    raise families.FamilyRangeError(f"unknown family {name!r}")


def cmd_rotate(args) -> int:
    tol = _tolerance(args)
    s = _load_structure(args.input)
    report = s.validate(tol=tol)
    if not report.passed:
        _emit({"valid": False, "failing": report.failing()}, args.out)
        return EXIT_INVALID
    try:
        theta, gamma_theta, residual = torsion_mod.rotate_to_half_flat(s, tol=tol)
    except InvalidStructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(
        {
            "theta": theta,
            "dgamma_theta_max": residual,
            "gamma_theta": gamma_theta.coeffs.tolist(),
        },
        args.out,
    )
    return EXIT_OK if residual <= max(tol, 1e-8) * 10 else EXIT_INVALID


def cmd_verify_g2(args) -> int:
    """Check the nearly parallel G2 equations along a closed-form trajectory.

    Evaluates the trajectory and its analytic derivative at interior
    samples, reporting the evolution ODE residual and the max-abs residual
    of d(phi) = lambda psi, d(psi) = 0."""
    tol = _tolerance(args)
    if args.family == "sine-cone":
        member = lambda t: families.sine_cone_trajectory(t)
        deriv = lambda t: families.sine_cone_derivative(t)
        t0, t1 = (args.t_start, args.t_end)
    elif args.family == "berger":
        member = families.berger_trajectory
        deriv = families.berger_derivative
        t0, t1 = (args.t_start, args.t_end)
    else:
        print(f"error: unknown trajectory {args.family!r}", file=sys.stderr)
        return EXIT_USAGE
    ts = np.linspace(t0, t1, args.samples)
    worst_ode = 0.0
    worst_g2 = 0.0
    worst_valid = 0.0
    for t in ts:
        s = member(float(t))
        rep = s.validate(tol=1.0)  # collect residuals without raising
        worst_valid = max(worst_valid, rep.worst[1])
        da, db, dQ1, dQ2 = deriv(float(t))
        try:
            ra, rb, rQ1, rQ2 = flow.flow_rhs(s.lam, s.a, s.b, s.Q1, s.Q2, s.det_p)
            ode = max(
                abs(da - ra),
                abs(db - rb),
                float(np.max(np.abs(dQ1 - rQ1))),
                float(np.max(np.abs(dQ2 - rQ2))),
            )
            g2 = flow.g2_residual(s, da, db, dQ1, dQ2)
        except StructureError as exc:
            print(f"error at t = {t:.4f}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        worst_ode = max(worst_ode, ode)
        worst_g2 = max(worst_g2, g2)
    bound = max(tol, 1e-6)
    ok = worst_ode <= bound and worst_g2 <= bound and worst_valid <= bound
    _emit(
        {
            "family": args.family,
            "t_start": t0,
            "t_end": t1,
            "samples": args.samples,
            "max_validation_resid": worst_valid,
            "max_ode_resid": worst_ode,
            "max_g2_resid": worst_g2,
            "bound": bound,
            "passed": ok,
        },
        args.out,
    )
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhflat",
        description="Invariant nearly half-flat SU(3)-structures on S3 x S3",
    )
    parser.add_argument(
        "--tol", type=float, default=None, help="override validation tolerance"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a structure record and report torsion")
    p.add_argument("input", help="JSON structure record ('-' for stdin)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("classify", help="torsion class of a structure record")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("flow", help="integrate the evolution equations")
    p.add_argument("input", nargs="+", help="initial structure record(s)")
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--h", type=float, default=1e-3, help="RK4 step size")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out", default=None, help="trajectory CSV path")
    p.add_argument("--batch", action="store_true", help="integrate several inputs")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("family", help="emit closed-form family members")
    p.add_argument(
        "--name",
        required=True,
        choices=["nk", "w1", "w1w3", "zero-scalar", "berger", "sine-cone"],
    )
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--branch", choices=["plus", "minus"], default=None)
    p.add_argument("--sign-p", type=int, choices=[-1, 1], default=1)
    p.add_argument("--sign-q", type=int, choices=[-1, 1], default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("rotate", help="rotate gamma to a closed (half-flat) form")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser(
        "verify-g2", help="nearly parallel G2 residuals of a closed-form trajectory"
    )
    p.add_argument("--family", required=True, choices=["sine-cone", "berger"])
    p.add_argument("--t-start", type=float, default=0.05)
    p.add_argument("--t-end", type=float, default=0.3)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify_g2)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already; normalize others
        return EXIT_USAGE if exc.code not in (0,) else 0
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except flow.FlowSingularityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except StructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

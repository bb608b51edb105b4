"""``pw``: run computations and verification suites on manifest files.

Exit status: 0 when every check passes, 1 when a check fails, 2 on errors
(bad manifest, bad arguments, singular cometric, ...).
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Callable

import numpy as np

from .connection import curvature, hessian_fields, laplacian, ricci_field, scalar_field
from .einstein import (
    SolverError,
    einstein_check,
    einstein_conditions,
    grw_ricci_flat_check,
    solve_constant_scalar,
    solve_einstein_warp,
)
from .expr import DomainError, ExprError, parse
from .geometry import (
    DEFAULT_POINTS,
    DEFAULT_SEED,
    DEFAULT_TOL,
    GeometryError,
    coframe,
    exterior_derivative,
    first_point,
    jacobi_residual,
    koszul_bracket,
    koszul_bracket_lie,
    point_count,
    tensor_values,
)
from .instances import constant_scalar_instance, einstein_warp_instance
from .manifest import COMMANDS, Manifest, ManifestError, load_manifest
from .report import Check, VerificationReport, absolute_residual, relative_residual
from .warped import PoissonManifold, WarpedSpace, input_covectors, verify_decomposition

NEEDS_MANIFEST = set(COMMANDS) - {"solve-warp", "solve-scalar"}


class UsageError(Exception):
    pass


def _num(v: float) -> float:
    """Round for display; reports stay deterministic either way."""
    return float(f"{v:.12g}") + 0.0  # no negative zero


def _manifold(space: PoissonManifold | WarpedSpace) -> PoissonManifold:
    return space.product if isinstance(space, WarpedSpace) else space


class Context:
    def __init__(self, manifest: Manifest | None, args: argparse.Namespace):
        self.m = manifest
        self.args = args
        self.tol = args.tol
        self.seed = args.seed

    def targets(self, warped_only: bool = False) -> list[str]:
        if self.args.target:
            names = [self.args.target]
            self.m.get(self.args.target)
        else:
            names = list(self.m.warped) if warped_only else self.m.targets()
        if warped_only and not names:
            raise UsageError("manifest defines no warped products")
        if warped_only:
            bad = [n for n in names if n not in self.m.warped]
            if bad:
                raise UsageError(f"{bad[0]!r} is not a warped product")
        return names

    def points(self, name: str) -> dict[str, np.ndarray]:
        space = self.m.get(name)
        return space.sample(self.args.points, self.seed, self.m.box(name))


# commands -----------------------------------------------------------------

def cmd_validate(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        geo = M.at(pts)  # raises on a singular cometric
        report.add(Check.at_most(f"{name}: cometric invertible", 0.0, ctx.tol, n, ctx.seed,
                                 note=f"max condition number {float(np.max(np.linalg.cond(geo.G))):.3e}"))
        report.add(Check.info(f"{name}: jacobi residual", absolute_residual(jacobi_residual(M.pi, pts)), n,
                              ctx.seed, note="zero means Poisson at the sampled points"))
    report.values["targets"] = ctx.m.targets()
    report.values["tasks"] = [t.get("name", t["command"]) for t in ctx.m.tasks]


def _covector_label(chart, values: np.ndarray) -> dict[str, float]:
    return {f"d{c}": _num(v) for c, v in zip(chart.coords, values) if v != 0}


def cmd_connection(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        geo = M.at(pts)
        chart = M.chart
        report.add(Check.at_most(f"{name}: torsion", absolute_residual(geo.torsion), ctx.tol, n, ctx.seed))
        report.add(Check.at_most(f"{name}: metricity", absolute_residual(geo.metricity), ctx.tol, n, ctx.seed))
        symbolic = tensor_values(M.connection.gamma, pts)
        report.add(Check.at_most(f"{name}: field route agreement", relative_residual(symbolic, geo.gamma),
                                 ctx.tol, n, ctx.seed, note="symbolic Gamma against the jet route"))
        frame = coframe(chart)
        ident = 0.0
        for i in range(chart.dim):
            for j in range(chart.dim):
                br = koszul_bracket(M.pi, frame[i], frame[j]).values(pts)
                ident = max(ident, absolute_residual(br - exterior_derivative(chart, M.pi.entry(i, j)).values(pts)))
        report.add(Check.at_most(f"{name}: [dx^i, dx^j] = d Pi^ij", ident, ctx.tol, n, ctx.seed))
        lie = 0.0
        rng = np.random.default_rng(ctx.seed)
        covs = [c for _, c in input_covectors(chart, rng, leibniz=True)]
        for a in covs:
            for b in covs:
                lie = max(lie, absolute_residual(koszul_bracket(M.pi, a, b).values(pts)
                                                 - koszul_bracket_lie(M.pi, a, b).values(pts)))
        report.add(Check.at_most(f"{name}: bracket rules = lie definition", lie, ctx.tol, n, ctx.seed))
        g0 = geo.gamma[0]
        report.values[f"{name}: D at first point"] = {
            "point": {k: _num(v) for k, v in first_point(pts).items()},
            "D(dx^i) dx^j": {f"D_d{chart.coords[i]} d{chart.coords[j]}": _covector_label(chart, g0[i, j])
                             for i in range(chart.dim) for j in range(chart.dim)},
        }


def cmd_curvature(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        geo = M.at(pts)
        chart = M.chart
        R = geo.riemann
        report.add(Check.at_most(f"{name}: first-slot antisymmetry",
                                 absolute_residual(R + np.transpose(R, (0, 2, 1, 3, 4))), ctx.tol, n, ctx.seed))
        frame = coframe(chart)
        D = M.connection
        field = tuple(tuple(tuple(curvature(D, frame[i], frame[j], frame[k]).components
                                  for k in range(chart.dim)) for j in range(chart.dim)) for i in range(chart.dim))
        report.add(Check.at_most(f"{name}: field route agreement",
                                 relative_residual(tensor_values(field, pts), R), ctx.tol, n, ctx.seed,
                                 note="curvature of the symbolic connection against the jet route"))
        r0 = R[0]
        c = chart.coords
        report.values[f"{name}: R at first point"] = {
            "point": {k: _num(v) for k, v in first_point(pts).items()},
            "R(dx^i, dx^j) dx^k": {f"R(d{c[i]}, d{c[j]}) d{c[k]}": _covector_label(chart, r0[i, j, k])
                                   for i in range(chart.dim) for j in range(i + 1, chart.dim)
                                   for k in range(chart.dim) if np.any(r0[i, j, k] != 0)},
        }


def cmd_ricci(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        geo = M.at(pts)
        chart = M.chart
        ric = geo.ricci
        asym = absolute_residual(ric - np.transpose(ric, (0, 2, 1)))
        jac = absolute_residual(jacobi_residual(M.pi, pts))
        if jac <= ctx.tol:
            report.add(Check.at_most(f"{name}: symmetry", asym, ctx.tol, n, ctx.seed))
        else:
            # symmetry of Ricci relies on the Jacobi identity
            report.add(Check.info(f"{name}: symmetry", asym, n, ctx.seed,
                                  note=f"not scored: bivector fails Jacobi (residual {jac:.3e})"))
        frame = coframe(chart)
        field = tuple(tuple(ricci_field(M.connection, a, b) for b in frame) for a in frame)
        report.add(Check.at_most(f"{name}: field route agreement", relative_residual(tensor_values(field, pts), ric),
                                 ctx.tol, n, ctx.seed))
        c = chart.coords
        report.values[f"{name}: Ric at first point"] = {
            "point": {k: _num(v) for k, v in first_point(pts).items()},
            "Ric(dx^i, dx^j)": {f"Ric(d{c[i]}, d{c[j]})": _num(ric[0, i, j])
                                for i in range(chart.dim)
                                for j in range(i if asym <= ctx.tol else 0, chart.dim)},
        }


def cmd_scalar(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        geo = M.at(pts)
        S = geo.scalar
        field = tensor_values((scalar_field(M.connection),), pts)[:, 0]
        report.add(Check.at_most(f"{name}: field route agreement", relative_residual(field, S), ctx.tol, n, ctx.seed))
        try:
            gap = absolute_residual(S - geo.scalar_with("literal"))
            report.add(Check.info(f"{name}: trace convention gap", gap, n, ctx.seed,
                                  note="signature-aware trace against the unsigned orthonormal sum"))
        except GeometryError:
            pass
        report.values[f"{name}: S"] = {"first": _num(S[0]), "min": _num(S.min()), "max": _num(S.max()),
                                       "spread": _num(np.ptp(S))}


def _functions(ctx: Context, M: PoissonManifold) -> list[tuple[str, object]]:
    if ctx.args.function:
        return [(ctx.args.function, parse(ctx.args.function, M.chart.coords))]
    coords = set(M.chart.coords)
    out = [(name, f) for name, (chart, f) in ctx.m.fields.items() if set(chart.coords) <= coords]
    if not out:
        out = [(c, parse(c, M.chart.coords)) for c in M.chart.coords]
    return out


def cmd_laplacian(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        ginv = M.at(pts).Ginv
        out = {}
        for label, f in _functions(ctx, M):
            lap = laplacian(M.connection, f, pts)
            hess = tensor_values(hessian_fields(M.connection, f), pts)
            trace = np.einsum("nkl,nkl->n", ginv, hess)
            report.add(Check.at_most(f"{name}: trace of hessian = -laplacian [{label}]",
                                     relative_residual(trace, -lap), ctx.tol, n, ctx.seed))
            out[label] = {"first": _num(lap[0]), "min": _num(lap.min()), "max": _num(lap.max())}
        report.values[f"{name}: laplacian"] = out


def cmd_compat(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        M = _manifold(ctx.m.get(name))
        pts = ctx.points(name)
        n = point_count(pts)
        dpi = M.at(pts).compatibility
        idx = np.unravel_index(np.argmax(np.abs(dpi)), dpi.shape)
        c = M.chart.coords
        where = f"largest at (D_d{c[idx[1]]} Pi)(d{c[idx[2]]}, d{c[idx[3]]}) = {dpi[idx]:.6g}"
        report.add(Check.at_most(f"{name}: D Pi = 0", absolute_residual(dpi), ctx.tol, n, ctx.seed, note=where))


def cmd_warp_verify(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets(warped_only=True):
        sub = verify_decomposition(ctx.m.warped[name], ctx.points(name), ctx.tol, ctx.seed)
        for c in sub.checks:
            c.name = f"{name}: {c.name}"
            report.add(c)
        report.values.update({f"{name}: {k}": v for k, v in sub.values.items()})


def cmd_einstein(ctx: Context, report: VerificationReport) -> None:
    for name in ctx.targets():
        space = ctx.m.get(name)
        pts = ctx.points(name)
        verdict = einstein_check(space, pts, ctx.tol)
        report.add(verdict.to_check(f"{name}: einstein", point_count(pts), ctx.seed))
        report.values[f"{name}: verdict"] = verdict.to_dict()
        if isinstance(space, WarpedSpace):
            subs = [einstein_conditions(space, pts, ctx.tol, seed=ctx.seed)]
            if space.s1 == 1 and space.base.pi.is_zero:
                subs.append(grw_ricci_flat_check(space, pts, ctx.tol, ctx.seed))
            for sub in subs:
                for c in sub.checks:
                    # the split conditions restate the verdict; only their agreement is scored
                    if sub.command == "einstein-conditions" and c.name != "agreement with product":
                        c = Check.info(c.name, c.max_residual, c.points, c.seed, note=c.note)
                    c.name = f"{name}: {sub.command}: {c.name}"
                    report.add(c)


def _estimate_constant(ctx: Context, space, kind: str) -> float:
    pts = space.sample(ctx.args.points, ctx.seed)
    if kind == "scalar":
        S = space.at(pts).scalar
        if np.ptp(S) > ctx.tol:
            raise UsageError(f"{space.name}: scalar curvature is not constant (spread {np.ptp(S):.3e})")
        return float(np.mean(S))
    v = einstein_check(space, pts, ctx.tol)
    if not v.is_einstein:
        raise UsageError(f"{space.name}: not Einstein (residual {v.max_residual:.3e})")
    return v.lambda_estimate


def cmd_solve_warp(ctx: Context, report: VerificationReport) -> None:
    a = ctx.args
    base_dim = a.s1
    if ctx.m is not None:
        W = ctx.m.warped.get(a.target) if a.target else None
        if W is None:
            raise UsageError("solve-warp with a manifest needs --target naming a warped product")
        a.lam = _estimate_constant(ctx, W.base, "einstein") if a.lam is None else a.lam
        a.lam_hat = _estimate_constant(ctx, W.fiber, "einstein") if a.lam_hat is None else a.lam_hat
        base_dim = W.s1
    if a.lam is None or a.lam_hat is None:
        raise UsageError("solve-warp needs --lambda and --lambda-hat")
    sol = solve_einstein_warp(a.lam, a.lam_hat, base_dim)
    report.values.update({"lambda": a.lam, "lambda_hat": a.lam_hat, "solution": sol.to_dict()})
    if a.verify and sol.kind == "constant-f":
        W = einstein_warp_instance(a.lam, a.lam_hat, sol.f_value)
        pts = W.sample(a.points, ctx.seed)
        v = einstein_check(W, pts, ctx.tol)
        report.add(v.to_check("round trip: product einstein", point_count(pts), ctx.seed))
        report.add(Check.at_most("round trip: lambda estimate", abs(v.lambda_estimate - a.lam), ctx.tol,
                                 point_count(pts), ctx.seed))


def cmd_solve_scalar(ctx: Context, report: VerificationReport) -> None:
    a = ctx.args
    if ctx.m is not None:
        W = ctx.m.warped.get(a.target) if a.target else None
        if W is None:
            raise UsageError("solve-scalar with a manifest needs --target naming a warped product")
        a.sb = _estimate_constant(ctx, W.base, "scalar") if a.sb is None else a.sb
        a.mu = _estimate_constant(ctx, W.fiber, "scalar") if a.mu is None else a.mu
        a.s2 = W.s2 if a.s2 is None else a.s2
    missing = [flag for flag, v in (("--sb", a.sb), ("--mu", a.mu), ("--mu1", a.mu1), ("--s2", a.s2)) if v is None]
    if missing:
        raise UsageError(f"solve-scalar needs {', '.join(missing)}")
    sol = solve_constant_scalar(a.sb, a.mu, a.mu1, a.s2)
    report.values.update({"S_B": a.sb, "mu": a.mu, "mu1": a.mu1, "s2": a.s2, "solution": sol.to_dict()})
    if a.verify and sol.kind == "constant-f":
        W = constant_scalar_instance(a.sb, a.mu, sol.f_value)
        pts = W.sample(a.points, ctx.seed)
        S = W.product.at(pts).scalar
        report.add(Check.at_most("round trip: S = mu1", absolute_residual(S - a.mu1), ctx.tol,
                                 point_count(pts), ctx.seed, note="2-dimensional fiber instance"))


HANDLERS: dict[str, Callable[[Context, VerificationReport], None]] = {
    "validate": cmd_validate,
    "connection": cmd_connection,
    "curvature": cmd_curvature,
    "ricci": cmd_ricci,
    "scalar": cmd_scalar,
    "laplacian": cmd_laplacian,
    "compat": cmd_compat,
    "warp-verify": cmd_warp_verify,
    "einstein": cmd_einstein,
    "solve-warp": cmd_solve_warp,
    "solve-scalar": cmd_solve_scalar,
}


# entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pw", description="Contravariant Poisson geometry on coordinate charts.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("manifest", nargs="?", help="JSON manifest (packaged fixtures are found by file name)")
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--output", choices=("json", "text"), default="text")
    p.add_argument("--target", help="run on one manifold or warped product only")
    p.add_argument("--function", help="scalar field for laplacian (default: manifest fields)")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-hat", dest="lam_hat", type=float)
    p.add_argument("--s1", type=int, help="base dimension (solve-warp wording only)")
    p.add_argument("--sb", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--mu1", type=float)
    p.add_argument("--s2", type=int)
    p.add_argument("--verify", action="store_true", help="round-trip the solved f on a concrete instance")
    p.add_argument("--out", help="also write the report to this file")
    return p


def _error_record(exc: BaseException, command: str) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("location", "position", "identifier"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    if isinstance(exc, DomainError) and exc.subexpression is not None:
        err["subexpression"] = str(exc.subexpression)
    return {"command": command, "passed": False, "error": err}


def run(argv: list[str] | None = None) -> tuple[int, str]:
    """Parse ``argv``, run the command and return ``(exit code, rendered report)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has already printed usage or help
        return int(exc.code or 0), ""
    try:
        if args.points < 1:
            raise UsageError("--points must be positive")
        if args.command in NEEDS_MANIFEST and not args.manifest:
            raise UsageError(f"{args.command} needs a manifest")
        manifest = load_manifest(args.manifest) if args.manifest else None
        report = VerificationReport(args.command, args.manifest or "")
        HANDLERS[args.command](Context(manifest, args), report)
    except (ManifestError, ExprError, GeometryError, SolverError, UsageError) as exc:
        record = _error_record(exc, args.command)
        text = (json.dumps(record, indent=2, sort_keys=True) if args.output == "json"
                else f"error: {record['error']['message']}")
        return 2, text
    text = report.to_json() if args.output == "json" else report.to_text()
    if args.command in ("solve-warp", "solve-scalar") and args.output == "text":
        sol = report.values["solution"]
        head = f"f = {sol['f']:.12g}" if sol["kind"] == "constant-f" else sol["kind"]
        text = f"{head}\n{sol['rationale']}\n\n{text}"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return (0 if report.passed else 1), text


def main(argv: list[str] | None = None) -> int:
    code, text = run(argv)
    if text:
        stream = sys.stderr if code == 2 and not text.startswith("{") else sys.stdout
        print(text, file=stream)
    return code


if __name__ == "__main__":
    sys.exit(main())

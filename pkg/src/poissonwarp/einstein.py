"""Einstein classification and the constant-warping-function solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .connection import apply_connection, laplacian
from .geometry import DEFAULT_TOL, GeometryError, Points, coframe, point_count, tensor_values
from .report import Check, VerificationReport, absolute_residual
from .warped import PoissonManifold, WarpedSpace, casimir_checks


class SolverError(ValueError):
    pass


@dataclass
class EinsteinVerdict:
    is_einstein: bool
    ricci_flat: bool
    lambda_estimate: float
    max_residual: float
    spread: float
    per_point_lambdas: list[float] = field(repr=False)
    tolerance: float = DEFAULT_TOL

    def to_check(self, name: str, points: int, seed: int | None = None) -> Check:
        kind = "ricci-flat" if self.ricci_flat else ("einstein" if self.is_einstein else "not einstein")
        note = f"{kind}; lambda = {self.lambda_estimate:.12g}; lambda spread {self.spread:.3e}"
        return Check(name, self.max_residual, self.tolerance, self.is_einstein, points, seed, note=note)

    def to_dict(self) -> dict:
        return {
            "is_einstein": self.is_einstein,
            "ricci_flat": self.ricci_flat,
            "lambda_estimate": self.lambda_estimate,
            "max_residual": self.max_residual,
            "spread": self.spread,
        }


def _manifold(space) -> PoissonManifold:
    return space.product if isinstance(space, WarpedSpace) else space


def einstein_check(space: PoissonManifold | WarpedSpace, points: Points, tol: float = DEFAULT_TOL) -> EinsteinVerdict:
    """Test ``Ric = lambda g`` on covectors.

    ``lambda(p)`` is the least-squares fit of ``Ric(dx^i, dx^j) = lambda g^{ij}`` over
    all coframe pairs; the residual uses the mean of those per-point values.
    """
    geo = _manifold(space).at(points)
    ric, G = geo.ricci, geo.G
    lam = np.einsum("nij,nij->n", ric, G) / np.einsum("nij,nij->n", G, G)
    mean = float(np.mean(lam))
    resid = absolute_residual(ric - mean * G)
    spread = float(np.ptp(lam)) if lam.size else 0.0
    ok = resid <= tol and spread <= tol
    return EinsteinVerdict(bool(ok), bool(ok and abs(mean) <= tol), mean, resid, spread,
                           [float(v) for v in lam], tol)


def einstein_conditions(W: WarpedSpace, points: Points, tol: float = DEFAULT_TOL,
                        lam: float | None = None, seed: int | None = None) -> VerificationReport:
    """Split test of ``Ric = lambda g^f`` into a base condition, a fiber Einstein
    condition and the induced fiber constant.

    base:   ``Ric_B = lambda g_B + (s2/f^2) (2A - f H^f)`` with ``A = g_B(J df, .) g_B(J df, .)``
    fiber:  ``Ric_F = lambda_F g_F``
    const:  ``lambda_F = (lambda f^2 + (s2+1) |J df|^2 + f Lap_B f) / f^4`` at every point

    The conjunction is compared with :func:`einstein_check` on the product.
    """
    report = VerificationReport("einstein-conditions", W.name)
    n = point_count(points)
    product = einstein_check(W, points, tol)
    if lam is None:
        lam = product.lambda_estimate
    report.values["lambda"] = lam
    report.values["product"] = product.to_dict()

    B = W.base
    DB = B.connection
    f, s2 = W.f, W.s2
    X = W.jdf
    frame = coframe(B.chart)
    phis = [B.g(X, a) for a in frame]
    dx = [apply_connection(DB, a, X) for a in frame]
    # 2A - f H^f, with H^f(a, b) = -g_B(D_a J df, b)
    corr = tuple(tuple(2.0 * phis[i] * phis[j] + f * B.g(dx[i], b) for j, b in enumerate(frame))
                 for i in range(len(frame)))
    corr_v = tensor_values(corr, points)
    fv = np.broadcast_to(f.evaluate(points), (n,))
    rhs = lam * B.g.values(points) + s2 * corr_v / fv[:, None, None] ** 2
    base_res = absolute_residual(B.at(points).ricci - rhs)
    report.add(Check.at_most("base condition", base_res, tol, n, seed))

    fiber = einstein_check(W.fiber, points, tol)
    report.add(fiber.to_check("fiber einstein", n, seed))
    report.values["fiber"] = fiber.to_dict()

    norm = tensor_values((B.g(X, X),), points)[:, 0]
    lap = laplacian(DB, f, points)
    lam_f = (lam * fv ** 2 + (s2 + 1) * norm + fv * lap) / fv ** 4
    const_res = absolute_residual(lam_f - fiber.lambda_estimate)
    report.add(Check.at_most("fiber constant", const_res, tol, n, seed,
                             note=f"induced fiber constant mean {float(np.mean(lam_f)):.12g}"))

    split = all(c.passed for c in report.checks)
    agree = split == product.is_einstein
    report.add(Check("agreement with product", 0.0 if agree else 1.0, 0.0, agree, n, seed,
                     note=f"conditions {'hold' if split else 'fail'}; product "
                          f"{'is' if product.is_einstein else 'is not'} einstein"))
    return report


def grw_ricci_flat_check(W: WarpedSpace, points: Points, tol: float = DEFAULT_TOL,
                         seed: int | None = None) -> VerificationReport:
    """Consistency checks for an interval base with zero bivector.

    Every ``f`` is a Casimir there, ``Ric_I`` vanishes, and the product is
    Einstein exactly when it is Ricci-flat, which happens exactly when the
    fiber is Ricci-flat.
    """
    if W.s1 != 1 or not W.base.pi.is_zero:
        raise GeometryError(f"{W.name}: needs a 1-dimensional base with zero bivector")
    report = VerificationReport("interval-base", W.name)
    n = point_count(points)
    verdict = einstein_check(W, points, tol)
    report.values["product"] = verdict.to_dict()
    base_ric = absolute_residual(W.base.at(points).ricci)
    fiber_ric = absolute_residual(W.fiber.at(points).ricci)
    report.add(Check.at_most("base ricci vanishes", base_ric, tol, n, seed))
    if verdict.is_einstein:
        report.add(Check.at_most("einstein forces lambda = 0", abs(verdict.lambda_estimate), tol, n, seed))
    factors_flat = base_ric <= tol and fiber_ric <= tol
    agree = factors_flat == verdict.ricci_flat
    report.add(Check("ricci-flat iff factors are", 0.0 if agree else 1.0, 0.0, agree, n, seed,
                     note=f"product {'ricci-flat' if verdict.ricci_flat else 'not ricci-flat'}; "
                          f"max |Ric_F| {fiber_ric:.3e}"))
    report.extend(casimir_checks(W, points, tol, seed or 0))
    return report


@dataclass(frozen=True)
class WarpSolution:
    kind: str  # "constant-f", "none" or "any-positive-constant"
    f_value: float | None
    rationale: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "f": self.f_value, "rationale": self.rationale}

    def to_text(self) -> str:
        head = f"f = {self.f_value:.12g}" if self.kind == "constant-f" else self.kind
        return f"{head}\n{self.rationale}"


def solve_constant_scalar(S_B: float, mu: float, mu1: float, s2: int) -> WarpSolution:
    """Constant ``f`` with ``S_B + f^2 mu = mu1`` (Casimir warping, fiber scalar ``mu``)."""
    if mu == 0:
        raise SolverError("fiber scalar curvature mu must be nonzero")
    if int(s2) != s2 or s2 <= 1:
        raise SolverError(f"fiber dimension s2 must be an integer > 1, got {s2}")
    gap = mu1 - S_B
    if gap == 0:
        return WarpSolution("none", None, "mu1 = S_B: f^2 mu = 0 has no positive solution")
    if gap * mu > 0:
        rel = ">" if gap > 0 else "<"
        sign = ">" if mu > 0 else "<"
        return WarpSolution("constant-f", math.sqrt(gap / mu),
                            f"mu1 {rel} S_B and mu {sign} 0: f = sqrt((mu1 - S_B) / mu)")
    return WarpSolution("none", None, "mu1 - S_B and mu have opposite signs: f^2 would be negative")


def solve_einstein_warp(lam: float, lam_hat: float, base_dim: int | None = None) -> WarpSolution:
    """Constant ``f`` with ``lam_hat f^2 = lam`` for Casimir warping of Einstein factors.

    ``base_dim`` only selects the wording (1-dimensional base or ``dim B >= 2``).
    """
    if base_dim is not None and base_dim < 1:
        raise SolverError(f"base dimension must be positive, got {base_dim}")
    where = "" if base_dim is None else (" (dim B = 1)" if base_dim == 1 else " (dim B >= 2)")
    hat = "lambda_hat > 0" if lam_hat > 0 else "lambda_hat < 0" if lam_hat < 0 else "lambda_hat = 0"
    if lam == 0 and lam_hat == 0:
        return WarpSolution("any-positive-constant", None,
                            f"lambda = lambda_hat = 0{where}: every positive constant f works (Ricci-flat family)")
    if lam == 0 or lam_hat == 0:
        return WarpSolution("none", None,
                            f"exactly one of lambda, lambda_hat is zero{where}: lambda_hat f^2 = lambda has no positive root")
    sign = "lambda > 0" if lam > 0 else "lambda < 0"
    if lam * lam_hat > 0:
        return WarpSolution("constant-f", math.sqrt(lam / lam_hat),
                            f"{hat}, {sign}{where}: f = sqrt(lambda / lambda_hat)")
    return WarpSolution("none", None, f"{hat}, {sign}{where}: no warping function exists")

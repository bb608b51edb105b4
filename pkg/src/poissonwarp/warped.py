"""Contravariant warped products ``B x_f F`` with the product bivector ``Pi_B + Pi_F``.

The closed-form decompositions of the connection, curvature, Ricci and
scalar curvature are implemented as oracles evaluated from factor data only
(factor connections through the field-level route, ``J_1 df``, the base
Laplacian). :func:`verify_decomposition` compares them with the pointwise
route run on the assembled product chart.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .connection import (
    ConnectionCoefficients,
    PointwiseGeometry,
    apply_connection,
    curvature,
    laplacian,
    levi_civita,
    ricci_field,
    scalar_field,
)
from .expr import ZERO, ScalarField, add, const, div, mul, neg, power, symbol
from .geometry import (
    DEFAULT_BOX,
    DEFAULT_POINTS,
    DEFAULT_SEED,
    DEFAULT_TOL,
    BivectorField,
    Chart,
    Cometric,
    CovectorField,
    GeometryError,
    Points,
    VectorField,
    coframe,
    exterior_derivative,
    is_casimir,
    j_endomorphism,
    koszul_bracket,
    lie_derivative,
    point_count,
    sample_points,
    sharp,
    tensor_values,
)
from .report import Check, VerificationReport, absolute_residual, relative_residual


class WarpError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class PoissonManifold:
    """A chart with a bivector and a cometric; ``exclude`` lists ``(coord, r)`` sampling holes."""

    name: str
    pi: BivectorField
    g: Cometric
    exclude: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.pi.chart != self.g.chart:
            raise GeometryError(f"{self.name}: bivector and cometric live on different charts")
        object.__setattr__(self, "exclude", tuple((str(c), float(r)) for c, r in self.exclude))

    @property
    def chart(self) -> Chart:
        return self.pi.chart

    @property
    def dim(self) -> int:
        return self.chart.dim

    @cached_property
    def connection(self) -> ConnectionCoefficients:
        return levi_civita(self.pi, self.g)

    def sample(self, n: int = DEFAULT_POINTS, seed: int = DEFAULT_SEED,
               box: tuple[float, float] = DEFAULT_BOX) -> dict[str, np.ndarray]:
        return sample_points(self.chart, n, seed, box, self.exclude)

    def at(self, points: Points) -> PointwiseGeometry:
        return PointwiseGeometry(self.pi, self.g, points)


@dataclass(frozen=True, eq=False)
class WarpedSpace:
    base: PoissonManifold
    fiber: PoissonManifold
    f: ScalarField
    product: PoissonManifold
    name: str = "warped"

    @property
    def s1(self) -> int:
        return self.base.dim

    @property
    def s2(self) -> int:
        return self.fiber.dim

    @property
    def chart(self) -> Chart:
        return self.product.chart

    def lift_h(self, alpha: CovectorField) -> CovectorField:
        if alpha.chart != self.base.chart:
            raise GeometryError("horizontal lift needs a base covector")
        return CovectorField(self.chart, list(alpha.components) + [ZERO] * self.s2)

    def lift_v(self, alpha: CovectorField) -> CovectorField:
        if alpha.chart != self.fiber.chart:
            raise GeometryError("vertical lift needs a fiber covector")
        return CovectorField(self.chart, [ZERO] * self.s1 + list(alpha.components))

    def lift_vector_h(self, x: VectorField) -> VectorField:
        return VectorField(self.chart, list(x.components) + [ZERO] * self.s2)

    def lift_vector_v(self, x: VectorField) -> VectorField:
        return VectorField(self.chart, [ZERO] * self.s1 + list(x.components))

    def mixed(self, alpha1: CovectorField | None, alpha2: CovectorField | None) -> CovectorField:
        """``alpha1^h + alpha2^v`` (either part may be omitted)."""
        a = [ZERO] * self.s1 if alpha1 is None else list(alpha1.components)
        b = [ZERO] * self.s2 if alpha2 is None else list(alpha2.components)
        return CovectorField(self.chart, a + b)

    def sample(self, n: int = DEFAULT_POINTS, seed: int = DEFAULT_SEED,
               box: tuple[float, float] = DEFAULT_BOX) -> dict[str, np.ndarray]:
        return self.product.sample(n, seed, box)

    @cached_property
    def jdf(self) -> CovectorField:
        """``J_1 df`` on the base."""
        return j_endomorphism(self.base.pi, self.base.g, exterior_derivative(self.base.chart, self.f))

    def is_casimir(self, points: Points, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
        return is_casimir(self.base.pi, self.f, points, tol)


def product_chart(base: Chart, fiber: Chart, name: str | None = None) -> Chart:
    clash = set(base.coords) & set(fiber.coords)
    if clash:
        raise WarpError(f"base and fiber share coordinate names: {sorted(clash)}")
    return Chart(name or f"{base.name}x{fiber.name}", base.coords + fiber.coords)


def build_warped(base: PoissonManifold, fiber: PoissonManifold, f: ScalarField | float,
                 name: str = "warped", check_points: int = DEFAULT_POINTS,
                 seed: int = DEFAULT_SEED, box: tuple[float, float] = DEFAULT_BOX) -> WarpedSpace:
    """Assemble ``(B x F, g_B^h + g_F^v / (f^h)^2, Pi_B + Pi_F)``.

    Base coordinates come first. ``f`` must use base coordinates only and be
    positive at ``check_points`` sampled base points.
    """
    chart = product_chart(base.chart, fiber.chart, name)
    f = f if isinstance(f, ScalarField) else const(f)
    stray = f.symbols - set(base.chart.coords)
    if stray:
        where = "fiber" if stray & set(fiber.chart.coords) else "unknown"
        raise WarpError(f"warping function uses {where} coordinate(s) {sorted(stray)}")
    pts = base.sample(check_points, seed, box)
    fv = np.broadcast_to(f.evaluate(pts), (point_count(pts),))
    if np.any(fv <= 0):
        raise WarpError(f"warping function is not positive (min {fv.min():.6g} at a sample point)")

    s1 = base.dim
    upper = dict(base.pi.upper)
    upper.update({(i + s1, j + s1): e for (i, j), e in fiber.pi.upper.items()})
    pi = BivectorField(chart, upper)

    inv_f2 = power(f, -2)
    entries = dict(base.g.entries)
    entries.update({(i + s1, j + s1): mul(inv_f2, e) for (i, j), e in fiber.g.entries.items()})
    g = Cometric(chart, entries)

    product = PoissonManifold(name, pi, g, base.exclude + fiber.exclude)
    return WarpedSpace(base, fiber, f, product, name)


def direct_product(first: PoissonManifold, second: PoissonManifold, name: str | None = None) -> PoissonManifold:
    """Unwarped product (``f = 1``)."""
    return build_warped(first, second, 1.0, name or f"{first.name}x{second.name}").product


# lifts ----------------------------------------------------------------

def input_covectors(chart: Chart, rng: np.random.Generator, leibniz: bool = False) -> list[tuple[str, CovectorField]]:
    """Coordinate covectors, one random constant covector and optionally one with
    polynomial coefficients (exercises the Leibniz terms)."""
    out = [(f"d{c}", cv) for c, cv in zip(chart.coords, coframe(chart))]
    coeffs = rng.uniform(-1.0, 1.0, size=chart.dim)
    out.append(("rand", CovectorField(chart, [const(round(float(c), 12)) for c in coeffs])))
    if leibniz:
        syms = [symbol(c) for c in chart.coords]
        comps = [add(const(1.0), mul(syms[(k + 1) % chart.dim], syms[k % chart.dim])) for k in range(chart.dim)]
        out.append(("poly", CovectorField(chart, comps)))
    return out


def sharp_decomposition_check(W: WarpedSpace, points: Points, tol: float = DEFAULT_TOL,
                              seed: int = DEFAULT_SEED) -> list[Check]:
    """Product-chart sharp map, Lie derivative and Koszul bracket against lifted factor ones."""
    rng = np.random.default_rng(seed)
    bset = input_covectors(W.base.chart, rng, leibniz=True)
    fset = input_covectors(W.fiber.chart, rng, leibniz=True)
    n = point_count(points)
    pi, pb, pf = W.product.pi, W.base.pi, W.fiber.pi
    res = {"sharp": 0.0, "lie": 0.0, "bracket": 0.0}
    for _, a1 in bset:
        for _, a2 in fset:
            alpha = W.mixed(a1, a2)
            x = sharp(pi, alpha)
            x_or = VectorField(W.chart, list(sharp(pb, a1).components) + list(sharp(pf, a2).components))
            res["sharp"] = max(res["sharp"], relative_residual(x.values(points), x_or.values(points)))
            for _, b1 in bset:
                for _, b2 in fset:
                    beta = W.mixed(b1, b2)
                    lie = lie_derivative(x, beta)
                    lie_or = W.mixed(lie_derivative(sharp(pb, a1), b1), lie_derivative(sharp(pf, a2), b2))
                    res["lie"] = max(res["lie"], relative_residual(lie.values(points), lie_or.values(points)))
                    br = koszul_bracket(pi, alpha, beta)
                    br_or = W.mixed(koszul_bracket(pb, a1, b1), koszul_bracket(pf, a2, b2))
                    res["bracket"] = max(res["bracket"], relative_residual(br.values(points), br_or.values(points)))
    return [
        Check.at_most("lift sharp", res["sharp"], tol, n, seed),
        Check.at_most("lift lie derivative", res["lie"], tol, n, seed),
        Check.at_most("lift koszul bracket", res["bracket"], tol, n, seed),
    ]


# oracles ---------------------------------------------------------------

class _Factors:
    """Factor-side ingredients shared by the oracle formulas."""

    def __init__(self, W: WarpedSpace):
        self.W = W
        self.DB = W.base.connection
        self.DF = W.fiber.connection
        self.f = W.f
        self.X = W.jdf
        self.gB = W.base.g
        self.gF = W.fiber.g
        self.normX = self.gB(self.X, self.X)

    def phi(self, alpha1: CovectorField) -> ScalarField:
        """``g_B(J_1 df, alpha_1)``."""
        return self.gB(self.X, alpha1)

    def sharp_f(self, alpha1: CovectorField) -> ScalarField:
        """``sharp_{Pi_B}(alpha_1)(f)``."""
        return sharp(self.W.base.pi, alpha1)(self.f)


def _factors(W: WarpedSpace) -> _Factors:
    cache = W.__dict__.get("_oracle_factors")
    if cache is None:
        cache = _Factors(W)
        W.__dict__["_oracle_factors"] = cache
    return cache


def oracle_connection_field(W: WarpedSpace, case: str, a: CovectorField, b: CovectorField) -> CovectorField:
    """Closed form of ``D`` on lifted factor covectors.

    hh: ``(D^B_a b)^h``; vv: ``(D^F_a b)^v - f^-3 g_F(a, b)^v (J_1 df)^h``;
    hv (``a`` base, ``b`` fiber): ``f^-1 g_B(J_1 df, a)^h b^v``.
    """
    k = _factors(W)
    f = k.f
    if case == "hh":
        return W.lift_h(apply_connection(k.DB, a, b))
    if case == "vv":
        corr = W.lift_h(k.X).scale(neg(mul(power(f, -3), k.gF(a, b))))
        return W.lift_v(apply_connection(k.DF, a, b)) + corr
    if case == "hv":
        return W.lift_v(b).scale(div(k.phi(a), f))
    raise ValueError(f"unknown connection case {case!r}")


def oracle_connection(W: WarpedSpace, case: str, inputs: Sequence[CovectorField], points: Points) -> np.ndarray:
    return oracle_connection_field(W, case, *inputs).values(points)


def oracle_curvature_field(W: WarpedSpace, case: str, inputs: Sequence[CovectorField | None],
                           reading: str = "corrected") -> CovectorField:
    """Closed form of ``R`` for the five block cases.

    a: ``(a1, b1, c1, c2)`` with ``gamma = c1^h + c2^v`` (either may be None);
    b: ``(a1, b2, c1)``; c: ``(a1, b2, c2)``; d: ``(a2, b2, c1)``; e: ``(a2, b2, c2)``.
    For case e, ``reading="corrected"`` uses ``[R_F(a2, b2) c2]^v``; ``"literal"``
    keeps the printed ``[R_B(a2, b2) c2]^h``, which vanishes because lifted
    fiber covectors have no base components.
    """
    k = _factors(W)
    f, X = k.f, k.X
    if case == "a":
        a1, b1, c1, c2 = inputs
        out = W.mixed(None, None)
        if c1 is not None:
            out = out + W.lift_h(curvature(k.DB, a1, b1, c1))
        if c2 is not None:
            first = div(add(k.gB(apply_connection(k.DB, a1, X), b1),
                            neg(k.gB(apply_connection(k.DB, b1, X), a1))), f)
            second = div(add(mul(k.sharp_f(b1), k.phi(a1)), neg(mul(k.sharp_f(a1), k.phi(b1)))), power(f, 2))
            out = out + W.lift_v(c2).scale(add(first, second))
        return out
    if case == "b":
        a1, b2, c1 = inputs
        x_over_f = X.scale(power(f, -1))
        coeff = add(div(mul(k.phi(a1), k.phi(c1)), power(f, 2)),
                    k.gB(apply_connection(k.DB, a1, x_over_f), c1))
        return W.lift_v(b2).scale(coeff)
    if case == "c":
        a1, b2, c2 = inputs
        inner = (apply_connection(k.DB, a1, X).scale(power(f, -3))
                 + X.scale(mul(2.0, power(f, -4), k.phi(a1))))
        return W.lift_h(inner).scale(neg(k.gF(b2, c2)))
    if case == "d":
        return W.mixed(None, None)
    if case == "e":
        a2, b2, c2 = inputs
        tail = W.lift_v(b2.scale(k.gF(a2, c2)) - a2.scale(k.gF(b2, c2))).scale(div(k.normX, power(f, 4)))
        if reading == "corrected":
            return W.lift_v(curvature(k.DF, a2, b2, c2)) + tail
        if reading == "literal":
            return tail
        raise ValueError(f"unknown reading {reading!r}")
    raise ValueError(f"unknown curvature case {case!r}")


def oracle_curvature(W: WarpedSpace, case: str, inputs, points: Points, reading: str = "corrected") -> np.ndarray:
    return oracle_curvature_field(W, case, inputs, reading).values(points)


def base_laplacian(W: WarpedSpace, points: Points) -> np.ndarray:
    return laplacian(W.base.connection, W.f, points)


def oracle_ricci(W: WarpedSpace, case: str, inputs: Sequence[CovectorField], points: Points) -> np.ndarray:
    """Closed form of ``Ric`` on lifted covectors (cases hh, hv, vv)."""
    k = _factors(W)
    f, s2 = k.f, W.s2
    n = point_count(points)
    if case == "hv":
        return np.zeros(n)
    a, b = inputs
    if case == "hh":
        corr = mul(s2, power(f, -2), add(mul(2.0, k.phi(a), k.phi(b)),
                                         mul(f, k.gB(apply_connection(k.DB, a, k.X), b))))
        vals = tensor_values((ricci_field(k.DB, a, b), corr), points)
        return vals[:, 0] - vals[:, 1]
    if case == "vv":
        vals = tensor_values((ricci_field(k.DF, a, b), mul((s2 + 1), k.normX, power(f, -4)),
                              power(f, -3), k.gF(a, b)), points)
        lap = base_laplacian(W, points)
        return vals[:, 0] - (vals[:, 1] + lap * vals[:, 2]) * vals[:, 3]
    raise ValueError(f"unknown Ricci case {case!r}")


def oracle_scalar(W: WarpedSpace, points: Points) -> np.ndarray:
    """``S_B + f^2 S_F - s2 ((s2 + 3) |J_1 df|^2 / f^2 + 2 Lap_B(f) / f)``."""
    k = _factors(W)
    f, s2 = k.f, W.s2
    vals = tensor_values((scalar_field(k.DB), scalar_field(k.DF), f, k.normX), points)
    sb, sf, fv, nx = vals.T
    lap = base_laplacian(W, points)
    return sb + fv ** 2 * sf - s2 * ((s2 + 3) * nx / fv ** 2 + 2.0 * lap / fv)


def casimir_scalar(W: WarpedSpace, points: Points) -> np.ndarray:
    """``S_B + f^2 S_F`` (the Casimir collapse)."""
    k = _factors(W)
    vals = tensor_values((scalar_field(k.DB), scalar_field(k.DF), k.f), points)
    return vals[:, 0] + vals[:, 2] ** 2 * vals[:, 1]


# verification ----------------------------------------------------------

def _curv_apply(R: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("ni,nj,nk,nijkm->nm", a, b, c, R)


def verify_decomposition(W: WarpedSpace, points: Points, tol: float = 1e-8,
                         seed: int = DEFAULT_SEED) -> VerificationReport:
    """Dual-path check of every block formula on ``W`` at ``points``.

    Residuals are relative: ``|direct - oracle| / max(1, |oracle|)``.
    """
    report = VerificationReport("warp-verify", W.name)
    n = point_count(points)
    rng = np.random.default_rng(seed)
    bset = input_covectors(W.base.chart, rng, leibniz=True)
    fset = input_covectors(W.fiber.chart, rng, leibniz=True)
    bten = [c for name, c in bset if name != "poly"]
    ften = [c for name, c in fset if name != "poly"]
    geo = W.product.at(points)

    report.extend(sharp_decomposition_check(W, points, tol, seed))

    # connection
    r = {"hh": 0.0, "vv": 0.0, "hv": 0.0, "vh": 0.0}
    for _, a in bset:
        for _, b in bset:
            r["hh"] = max(r["hh"], relative_residual(geo.apply(W.lift_h(a), W.lift_h(b)),
                                                     oracle_connection(W, "hh", (a, b), points)))
    for _, a in fset:
        for _, b in fset:
            r["vv"] = max(r["vv"], relative_residual(geo.apply(W.lift_v(a), W.lift_v(b)),
                                                     oracle_connection(W, "vv", (a, b), points)))
    for _, a in bset:
        for _, b in fset:
            expect = oracle_connection(W, "hv", (a, b), points)
            r["hv"] = max(r["hv"], relative_residual(geo.apply(W.lift_h(a), W.lift_v(b)), expect))
            r["vh"] = max(r["vh"], relative_residual(geo.apply(W.lift_v(b), W.lift_h(a)), expect))
    report.add(Check.at_most("connection hh", r["hh"], tol, n, seed))
    report.add(Check.at_most("connection vv", r["vv"], tol, n, seed))
    report.add(Check.at_most("connection hv", r["hv"], tol, n, seed))
    report.add(Check.at_most("connection vh", r["vh"], tol, n, seed))

    # curvature
    R = geo.riemann
    h = lambda c: W.lift_h(c).values(points)  # noqa: E731
    v = lambda c: W.lift_v(c).values(points)  # noqa: E731
    rc = dict.fromkeys("abcde", 0.0)
    literal_e = 0.0
    for a1 in bten:
        for b1 in bten:
            for c1 in bten:
                rc["a"] = max(rc["a"], relative_residual(_curv_apply(R, h(a1), h(b1), h(c1)),
                                                         oracle_curvature(W, "a", (a1, b1, c1, None), points)))
            for c2 in ften:
                rc["a"] = max(rc["a"], relative_residual(_curv_apply(R, h(a1), h(b1), v(c2)),
                                                         oracle_curvature(W, "a", (a1, b1, None, c2), points)))
    a1, b1, c1, c2 = bten[-1], bten[0], bten[-1], ften[-1]
    mixed = (W.lift_h(c1) + W.lift_v(c2)).values(points)
    rc["a"] = max(rc["a"], relative_residual(_curv_apply(R, h(a1), h(b1), mixed),
                                             oracle_curvature(W, "a", (a1, b1, c1, c2), points)))
    for a1 in bten:
        for b2 in ften:
            for c1 in bten:
                rc["b"] = max(rc["b"], relative_residual(_curv_apply(R, h(a1), v(b2), h(c1)),
                                                         oracle_curvature(W, "b", (a1, b2, c1), points)))
            for c2 in ften:
                rc["c"] = max(rc["c"], relative_residual(_curv_apply(R, h(a1), v(b2), v(c2)),
                                                         oracle_curvature(W, "c", (a1, b2, c2), points)))
    for a2 in ften:
        for b2 in ften:
            for c1 in bten:
                rc["d"] = max(rc["d"], relative_residual(_curv_apply(R, v(a2), v(b2), h(c1)),
                                                         oracle_curvature(W, "d", (a2, b2, c1), points)))
            for c2 in ften:
                direct = _curv_apply(R, v(a2), v(b2), v(c2))
                rc["e"] = max(rc["e"], relative_residual(direct, oracle_curvature(W, "e", (a2, b2, c2), points)))
                literal_e = max(literal_e, relative_residual(
                    direct, oracle_curvature(W, "e", (a2, b2, c2), points, reading="literal")))
    for case in "abcd":
        report.add(Check.at_most(f"curvature {case}", rc[case], tol, n, seed))
    report.add(Check.at_most("curvature e", rc["e"], tol, n, seed,
                             note="first term evaluated as [R_F(a2,b2)c2]^v"))
    report.add(Check.info("curvature e (literal R_B term)", literal_e, n, seed,
                          note="first term [R_B(a2,b2)c2]^h is ill-typed on fiber covectors and "
                               "is taken as 0; a nonzero residual means this reading disagrees "
                               "with direct computation"))

    # ricci
    ric = geo.ricci
    pair = lambda x, y: np.einsum("ni,niq,nq->n", x, ric, y)  # noqa: E731
    rr = {"hh": 0.0, "hv": 0.0, "vv": 0.0}
    for a in bten:
        for b in bten:
            rr["hh"] = max(rr["hh"], relative_residual(pair(h(a), h(b)), oracle_ricci(W, "hh", (a, b), points)))
        for b in ften:
            rr["hv"] = max(rr["hv"], relative_residual(pair(h(a), v(b)), oracle_ricci(W, "hv", (a, b), points)))
            rr["hv"] = max(rr["hv"], relative_residual(pair(v(b), h(a)), oracle_ricci(W, "hv", (a, b), points)))
    for a in ften:
        for b in ften:
            rr["vv"] = max(rr["vv"], relative_residual(pair(v(a), v(b)), oracle_ricci(W, "vv", (a, b), points)))
    report.add(Check.at_most("ricci hh", rr["hh"], tol, n, seed))
    report.add(Check.at_most("ricci hv", rr["hv"], tol, n, seed))
    report.add(Check.at_most("ricci vv", rr["vv"], tol, n, seed))

    # scalar curvature
    report.add(Check.at_most("scalar", relative_residual(geo.scalar, oracle_scalar(W, points)),
                             tol, n, seed))

    casimir, cas_res = W.is_casimir(points)
    report.values["casimir"] = casimir
    report.values["casimir_residual"] = cas_res
    if casimir:
        report.extend(casimir_checks(W, points, tol, seed, geo))
    trace_note = trace_convention_gap(geo)
    if trace_note is not None:
        report.add(Check.info("trace convention gap (scalar)", trace_note, n, seed,
                              note="max |S_signature - S_unsigned|; nonzero means the orthonormal "
                                   "sum without signature factors gives a different value"))
    return report


def casimir_checks(W: WarpedSpace, points: Points, tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED,
                   geo: PointwiseGeometry | None = None) -> list[Check]:
    """Block identities that hold when ``f`` is a Casimir of the base, plus the compatibility equivalence."""
    geo = geo or W.product.at(points)
    n = point_count(points)
    s1 = W.s1
    ric = geo.ricci
    base_ric = W.base.at(points).ricci
    fiber_ric = W.fiber.at(points).ricci
    checks = [
        Check.at_most("casimir ricci hh = Ric_B", absolute_residual(ric[:, :s1, :s1] - base_ric), tol, n, seed),
        Check.at_most("casimir ricci hv = 0", max(absolute_residual(ric[:, :s1, s1:]),
                                                  absolute_residual(ric[:, s1:, :s1])), tol, n, seed),
        Check.at_most("casimir ricci vv = Ric_F", absolute_residual(ric[:, s1:, s1:] - fiber_ric), tol, n, seed),
        Check.at_most("casimir scalar = S_B + f^2 S_F", absolute_residual(geo.scalar - casimir_scalar(W, points)),
                      tol, n, seed),
    ]
    checks.append(compat_equivalence_check(W, points, tol, seed, geo))
    return checks


def compat_equivalence_check(W: WarpedSpace, points: Points, tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED,
                             geo: PointwiseGeometry | None = None) -> Check:
    """Product ``DPi`` vanishes iff both factor residuals vanish (Casimir ``f``)."""
    geo = geo or W.product.at(points)
    n = point_count(points)
    prod = absolute_residual(geo.compatibility)
    fb = absolute_residual(W.base.at(points).compatibility)
    ff = absolute_residual(W.fiber.at(points).compatibility)
    consistent = (prod <= tol) == (fb <= tol and ff <= tol)
    note = (f"product DPi max {prod:.3e}; base {fb:.3e}; fiber {ff:.3e}; "
            f"equivalence {'holds' if consistent else 'violated'}")
    return Check("compat equivalence", prod, tol, consistent, n, seed, note=note)


def trace_convention_gap(geo: PointwiseGeometry) -> float | None:
    """Gap between signature-aware and unsigned traces, or None for non-diagonal cometrics."""
    try:
        literal = geo.scalar_with("literal")
    except GeometryError:
        return None
    return absolute_residual(geo.scalar - literal)

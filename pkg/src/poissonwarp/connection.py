"""Contravariant Levi-Civita connection of a pair (Pi, g) and its curvatures.

Two routes share only the expression layer:

* field level: ``levi_civita`` builds the symbols ``Gamma^{ij}_k`` as scalar
  fields (Koszul right-hand side times the pointwise inverse cometric);
  ``apply_connection``, ``curvature``, ``hessian`` and ``laplacian`` act on
  arbitrary covector fields through them.
* pointwise: :class:`PointwiseGeometry` evaluates second-order jets of Pi and
  g at a batch of points and assembles Gamma, its derivatives, the curvature
  tensor, Ricci, scalar curvature and the DPi residual with ``einsum``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .expr import ZERO, Evaluator, ScalarField, add, mul, neg
from .geometry import (
    COND_LIMIT,
    BivectorField,
    Chart,
    Cometric,
    CovectorField,
    GeometryError,
    Points,
    _same_chart,
    coordinate_covector,
    exterior_derivative,
    j_endomorphism,
    koszul_bracket,
    point_count,
    sharp,
    tensor_values,
)


class SingularCometricError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class ConnectionCoefficients:
    """``D_{dx^i} dx^j = gamma[i][j][k] dx^k`` together with the pair it came from."""

    chart: Chart
    pi: BivectorField
    g: Cometric
    gamma: tuple[tuple[tuple[ScalarField, ...], ...], ...]

    @property
    def dim(self) -> int:
        return self.chart.dim

    def at(self, points: Points) -> "PointwiseGeometry":
        return PointwiseGeometry(self.pi, self.g, points)


def levi_civita(pi: BivectorField, g: Cometric) -> ConnectionCoefficients:
    """Solve the six-term Koszul formula for the coordinate symbols.

    ``2 g(D_{dx^i} dx^j, dx^k)`` is assembled symbolically and multiplied by
    the pointwise inverse of ``[g^{kl}]``.
    """
    chart = _same_chart(pi, g)
    n = chart.dim
    coords = chart.coords
    P, G = pi.matrix, g.matrix
    inv = g.inverse.entries

    def sharp_of(i, h):  # sharp(dx^i)(h)
        return add(*(mul(P[i][a], h.diff(coords[a])) for a in range(n) if P[i][a] is not ZERO))

    def bracket_pair(i, j, k):  # g([dx^i, dx^j], dx^k) = d_a Pi^{ij} g^{ak}
        return add(*(mul(P[i][j].diff(coords[a]), G[a][k]) for a in range(n) if G[a][k] is not ZERO))

    low = [[[mul(0.5, add(
        sharp_of(i, G[j][k]),
        sharp_of(j, G[i][k]),
        neg(sharp_of(k, G[i][j])),
        bracket_pair(i, j, k),
        neg(bracket_pair(j, k, i)),
        bracket_pair(k, i, j),
    )) for k in range(n)] for j in range(n)] for i in range(n)]

    gamma = tuple(tuple(tuple(
        add(*(mul(low[i][j][k], inv[k][l]) for k in range(n) if low[i][j][k] is not ZERO))
        for l in range(n)) for j in range(n)) for i in range(n))
    return ConnectionCoefficients(chart, pi, g, gamma)


def apply_connection(D: ConnectionCoefficients, alpha: CovectorField, beta: CovectorField) -> CovectorField:
    """``D_alpha beta = alpha_i (beta_j Gamma^{ij}_k + sharp(dx^i)(beta_k)) dx^k``."""
    chart = _same_chart(D, alpha, beta)
    n = chart.dim
    sharps = [sharp(D.pi, coordinate_covector(chart, i)) for i in range(n)]
    out = []
    for k in range(n):
        terms = []
        for i in range(n):
            if alpha[i] is ZERO:
                continue
            inner = [mul(beta[j], D.gamma[i][j][k]) for j in range(n) if beta[j] is not ZERO]
            inner.append(sharps[i](beta[k]))
            terms.append(mul(alpha[i], add(*inner)))
        out.append(add(*terms))
    return CovectorField(chart, out)


def curvature(D: ConnectionCoefficients, alpha: CovectorField, beta: CovectorField,
              gamma: CovectorField) -> CovectorField:
    """``R(alpha, beta) gamma = D_a D_b g - D_b D_a g - D_[a,b] g``."""
    return (apply_connection(D, alpha, apply_connection(D, beta, gamma))
            - apply_connection(D, beta, apply_connection(D, alpha, gamma))
            - apply_connection(D, koszul_bracket(D.pi, alpha, beta), gamma))


def hessian_fields(D: ConnectionCoefficients, f: ScalarField) -> tuple[tuple[ScalarField, ...], ...]:
    """``H^f(dx^k, dx^l) = -g(D_{dx^k} J df, dx^l)`` as scalar fields."""
    chart = D.chart
    n = chart.dim
    jdf = j_endomorphism(D.pi, D.g, exterior_derivative(chart, f))
    rows = []
    for k in range(n):
        djdf = apply_connection(D, coordinate_covector(chart, k), jdf)
        rows.append(tuple(neg(add(*(mul(djdf[m], D.g.matrix[m][l]) for m in range(n)
                                    if D.g.matrix[m][l] is not ZERO)))
                          for l in range(n)))
    return tuple(rows)


def hessian(D: ConnectionCoefficients, f: ScalarField, alpha: CovectorField, beta: CovectorField,
            points: Points) -> np.ndarray:
    """``H^f(alpha, beta) = -g(D_alpha J df, beta)`` at ``points``."""
    jdf = j_endomorphism(D.pi, D.g, exterior_derivative(D.chart, f))
    value = neg(D.g(apply_connection(D, alpha, jdf), beta))
    return tensor_values((value,), points)[:, 0]


def laplacian(D: ConnectionCoefficients, f: ScalarField, points: Points) -> np.ndarray:
    """Contravariant Laplacian: ``sum g~_{kl} g(D_{dx^k} J df, dx^l)``."""
    ev = Evaluator(points)
    h = tensor_values(hessian_fields(D, f), points, ev)
    ginv = tensor_values(D.g.inverse.entries, points, ev)
    return -np.einsum("nkl,nkl->n", ginv, h)


# pointwise route -----------------------------------------------------------

class PointwiseGeometry:
    """Arrays of every connection-derived tensor at a batch of points.

    Index conventions (leading axis is the point):
    ``gamma[n,i,j,k] = Gamma^{ij}_k``, ``riemann[n,i,j,k,l] = R^{ijk}_l`` with
    ``R(dx^i, dx^j) dx^k = R^{ijk}_l dx^l``, ``ricci[n,i,j] = Ric(dx^i, dx^j)``.
    """

    def __init__(self, pi: BivectorField, g: Cometric, points: Points):
        chart = _same_chart(pi, g)
        self.chart = chart
        self.pi, self.g = pi, g
        self.points = points
        self.n = point_count(points)
        ev = Evaluator(points)
        coords = chart.coords
        self.P, self.dP, self.ddP = _jet(pi.matrix, coords, points, ev)
        self.G, self.dG, self.ddG = _jet(g.matrix, coords, points, ev)
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(self.G)
        if np.any(~(cond <= COND_LIMIT)):
            raise SingularCometricError(
                f"cometric on chart {chart.name!r} is singular at a sample point "
                f"(condition number > {COND_LIMIT:g})")
        self.Ginv = np.linalg.inv(self.G)

    @cached_property
    def lowered(self) -> np.ndarray:
        """``g(D_{dx^i} dx^j, dx^k)`` from the six-term Koszul formula."""
        P, dP, G, dG = self.P, self.dP, self.G, self.dG
        t = (np.einsum("nia,njka->nijk", P, dG)
             + np.einsum("nja,nika->nijk", P, dG)
             - np.einsum("nka,nija->nijk", P, dG)
             + np.einsum("nija,nak->nijk", dP, G)
             - np.einsum("njka,nai->nijk", dP, G)
             + np.einsum("nkia,naj->nijk", dP, G))
        return 0.5 * t

    @cached_property
    def lowered_derivative(self) -> np.ndarray:
        """``d_b`` of :attr:`lowered`, last axis ``b``."""
        P, dP, ddP, G, dG, ddG = self.P, self.dP, self.ddP, self.G, self.dG, self.ddG
        t = (np.einsum("niab,njka->nijkb", dP, dG) + np.einsum("nia,njkab->nijkb", P, ddG)
             + np.einsum("njab,nika->nijkb", dP, dG) + np.einsum("nja,nikab->nijkb", P, ddG)
             - np.einsum("nkab,nija->nijkb", dP, dG) - np.einsum("nka,nijab->nijkb", P, ddG)
             + np.einsum("nijab,nak->nijkb", ddP, G) + np.einsum("nija,nakb->nijkb", dP, dG)
             - np.einsum("njkab,nai->nijkb", ddP, G) - np.einsum("njka,naib->nijkb", dP, dG)
             + np.einsum("nkiab,naj->nijkb", ddP, G) + np.einsum("nkia,najb->nijkb", dP, dG))
        return 0.5 * t

    @cached_property
    def inverse_derivative(self) -> np.ndarray:
        """``d_b g~_{kl} = -g~_{ka} d_b g^{ac} g~_{cl}``."""
        return -np.einsum("nka,nacb,ncl->nklb", self.Ginv, self.dG, self.Ginv)

    @cached_property
    def gamma(self) -> np.ndarray:
        return np.einsum("nijk,nkl->nijl", self.lowered, self.Ginv)

    @cached_property
    def gamma_derivative(self) -> np.ndarray:
        """``d_b Gamma^{ij}_l``, last axis ``b``."""
        return (np.einsum("nijkb,nkl->nijlb", self.lowered_derivative, self.Ginv)
                + np.einsum("nijk,nklb->nijlb", self.lowered, self.inverse_derivative))

    @cached_property
    def riemann(self) -> np.ndarray:
        P, dP, gam, dgam = self.P, self.dP, self.gamma, self.gamma_derivative
        r = (np.einsum("nia,njkma->nijkm", P, dgam)
             - np.einsum("nja,nikma->nijkm", P, dgam)
             + np.einsum("njkl,nilm->nijkm", gam, gam)
             - np.einsum("nikl,njlm->nijkm", gam, gam)
             - np.einsum("nija,nakm->nijkm", dP, gam))
        return r

    def ricci_matrix(self, trace: str = "signature") -> np.ndarray:
        """``Ric(dx^i, dx^q) = sum_{k,l} w_{kl} g(R(dx^i, dx^k) dx^l, dx^q)``.

        ``trace="signature"`` uses ``w = g~`` (orthonormal sum with signature
        factors). ``trace="literal"`` drops the signature factors and needs a
        diagonal cometric: ``w = diag(1/|g^{kk}|)``.
        """
        w = self._trace_weights(trace)
        return np.einsum("nkl,niklm,nmq->niq", w, self.riemann, self.G)

    @cached_property
    def ricci(self) -> np.ndarray:
        return self.ricci_matrix("signature")

    @cached_property
    def scalar(self) -> np.ndarray:
        return np.einsum("niq,niq->n", self.Ginv, self.ricci)

    def scalar_with(self, trace: str) -> np.ndarray:
        w = self._trace_weights(trace)
        return np.einsum("niq,niq->n", w, self.ricci_matrix(trace))

    def _trace_weights(self, trace: str) -> np.ndarray:
        if trace == "signature":
            return self.Ginv
        if trace == "literal":
            off = self.G - np.einsum("nii->ni", self.G)[:, :, None] * np.eye(self.chart.dim)
            if np.any(np.abs(off) > 0):
                raise GeometryError("literal (unsigned) trace is only defined here for diagonal cometrics")
            diag = np.einsum("nii->ni", self.G)
            return np.einsum("ni,ij->nij", 1.0 / np.abs(diag), np.eye(self.chart.dim))
        raise ValueError(f"unknown trace convention {trace!r}")

    def apply(self, alpha: CovectorField, beta: CovectorField) -> np.ndarray:
        """``D_alpha beta`` at the points from the evaluated symbols; shape (N, d)."""
        coords = self.chart.coords
        a = alpha.values(self.points)
        b = beta.values(self.points)
        db = tensor_values([[bk.diff(c) for c in coords] for bk in beta.components], self.points)
        return (np.einsum("ni,nj,nijk->nk", a, b, self.gamma)
                + np.einsum("ni,nia,nka->nk", a, self.P, db))

    @cached_property
    def compatibility(self) -> np.ndarray:
        """``(D_{dx^i} Pi)(dx^j, dx^k)``."""
        P, dP, gam = self.P, self.dP, self.gamma
        return (np.einsum("nia,njka->nijk", P, dP)
                - np.einsum("nijl,nlk->nijk", gam, P)
                - np.einsum("nikl,njl->nijk", gam, P))

    @cached_property
    def torsion(self) -> np.ndarray:
        """``Gamma^{ij}_k - Gamma^{ji}_k - d_k Pi^{ij}``; zero for a torsion-free connection."""
        return self.gamma - np.transpose(self.gamma, (0, 2, 1, 3)) - self.dP

    @cached_property
    def metricity(self) -> np.ndarray:
        """``sharp(dx^i) g^{jk} - g(D_i dx^j, dx^k) - g(dx^j, D_i dx^k)``."""
        P, dG, gam, G = self.P, self.dG, self.gamma, self.G
        return (np.einsum("nia,njka->nijk", P, dG)
                - np.einsum("nijl,nlk->nijk", gam, G)
                - np.einsum("nikl,njl->nijk", gam, G))


def _jet(matrix, coords, points, ev):
    """Values, first and second coordinate derivatives of a matrix of fields."""
    vals = tensor_values(matrix, points, ev)
    d1 = tensor_values([[[e.diff(a) for a in coords] for e in row] for row in matrix], points, ev)
    d2 = tensor_values([[[[e.diff(a).diff(b) for b in coords] for a in coords] for e in row]
                        for row in matrix], points, ev)
    return vals, d1, d2



# thin wrappers matching the operation list ---------------------------------

def coefficients_at(D: ConnectionCoefficients, points: Points) -> np.ndarray:
    return D.at(points).gamma


def curvature_at(D: ConnectionCoefficients, points: Points) -> np.ndarray:
    return D.at(points).riemann


def ricci_at(D: ConnectionCoefficients, points: Points) -> np.ndarray:
    return D.at(points).ricci


def ricci(D: ConnectionCoefficients, alpha: CovectorField, beta: CovectorField, points: Points) -> np.ndarray:
    """``Ric(alpha, beta)`` at ``points`` (signature-aware trace)."""
    geo = D.at(points)
    a, b = alpha.values(points), beta.values(points)
    return np.einsum("ni,niq,nq->n", a, geo.ricci, b)


def scalar_curvature(D: ConnectionCoefficients, points: Points) -> np.ndarray:
    return D.at(points).scalar


def compatibility_residual(D: ConnectionCoefficients, points: Points) -> np.ndarray:
    return D.at(points).compatibility


def ricci_field(D: ConnectionCoefficients, alpha: CovectorField, beta: CovectorField) -> ScalarField:
    """Field-level ``Ric(alpha, beta)``, built from :func:`curvature` (no jets)."""
    chart = D.chart
    n = chart.dim
    inv = D.g.inverse.entries
    frame = [coordinate_covector(chart, k) for k in range(n)]
    terms = []
    for k in range(n):
        for l in range(n):
            r = curvature(D, alpha, frame[k], frame[l])
            terms.append(mul(inv[k][l], D.g(r, beta)))
    return add(*terms)


def scalar_field(D: ConnectionCoefficients) -> ScalarField:
    """Field-level scalar curvature ``sum g~_{ij} Ric(dx^i, dx^j)``."""
    chart = D.chart
    n = chart.dim
    inv = D.g.inverse.entries
    frame = [coordinate_covector(chart, k) for k in range(n)]
    return add(*(mul(inv[i][j], ricci_field(D, frame[i], frame[j])) for i in range(n) for j in range(n)))

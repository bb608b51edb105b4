"""Charts, tensor fields in the coordinate (co)frame and the basic Poisson operations."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Evaluator,
    MatrixInverse,
    ScalarField,
    add,
    as_field,
    mul,
    neg,
    sub,
)

DEFAULT_POINTS = 100
DEFAULT_SEED = 42
DEFAULT_BOX = (-2.0, 2.0)
DEFAULT_TOL = 1e-9
COND_LIMIT = 1e12

Points = Mapping[str, np.ndarray]


class GeometryError(Exception):
    pass


class ChartMismatchError(GeometryError):
    def __init__(self, a: "Chart", b: "Chart"):
        super().__init__(f"chart mismatch: {a.name!r} vs {b.name!r}")


@dataclass(frozen=True)
class Chart:
    name: str
    coords: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if not self.coords:
            raise GeometryError(f"chart {self.name!r} needs at least one coordinate")
        if len(set(self.coords)) != len(self.coords):
            raise GeometryError(f"chart {self.name!r} has repeated coordinate names")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, coord: str) -> int:
        return self.coords.index(coord)


def _same_chart(*objs) -> Chart:
    chart = objs[0].chart
    for o in objs[1:]:
        if o.chart != chart:
            raise ChartMismatchError(chart, o.chart)
    return chart


def _components(chart: Chart, comps: Sequence) -> tuple[ScalarField, ...]:
    comps = tuple(as_field(c) for c in comps)
    if len(comps) != chart.dim:
        raise GeometryError(f"expected {chart.dim} components on chart {chart.name!r}, got {len(comps)}")
    return comps


@dataclass(frozen=True, eq=False)
class CovectorField:
    """1-form ``alpha_i dx^i``."""

    chart: Chart
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", _components(self.chart, self.components))

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    def __add__(self, other: "CovectorField") -> "CovectorField":
        _same_chart(self, other)
        return CovectorField(self.chart, [add(a, b) for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "CovectorField") -> "CovectorField":
        _same_chart(self, other)
        return CovectorField(self.chart, [sub(a, b) for a, b in zip(self.components, other.components)])

    def __neg__(self) -> "CovectorField":
        return CovectorField(self.chart, [neg(a) for a in self.components])

    def scale(self, h) -> "CovectorField":
        h = as_field(h)
        return CovectorField(self.chart, [mul(h, a) for a in self.components])

    __rmul__ = scale

    def values(self, points: Points) -> np.ndarray:
        """Components at ``points`` as an array of shape (N, dim)."""
        return field_values(self.components, points)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vector field ``X^k d/dx^k``."""

    chart: Chart
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", _components(self.chart, self.components))

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    def __call__(self, h: ScalarField) -> ScalarField:
        """Directional derivative ``X(h)``."""
        return add(*(mul(xk, h.diff(c)) for xk, c in zip(self.components, self.chart.coords)))

    def values(self, points: Points) -> np.ndarray:
        return field_values(self.components, points)


@dataclass(frozen=True, eq=False)
class BivectorField:
    """Antisymmetric ``Pi^{ij} = Pi(dx^i, dx^j)``; only ``i < j`` entries are stored."""

    chart: Chart
    upper: Mapping[tuple[int, int], ScalarField] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), e in dict(self.upper).items():
            if not (0 <= i < j < self.chart.dim):
                raise GeometryError(f"bivector entry ({i}, {j}) must satisfy 0 <= i < j < {self.chart.dim}")
            e = as_field(e)
            if e is not ZERO:
                clean[(i, j)] = e
        object.__setattr__(self, "upper", clean)

    def entry(self, i: int, j: int) -> ScalarField:
        return self.matrix[i][j]

    @cached_property
    def matrix(self) -> tuple[tuple[ScalarField, ...], ...]:
        n = self.chart.dim
        rows = [[ZERO] * n for _ in range(n)]
        for (i, j), e in self.upper.items():
            rows[i][j] = e
            rows[j][i] = neg(e)
        return tuple(tuple(r) for r in rows)

    @property
    def is_zero(self) -> bool:
        return not self.upper

    def __call__(self, alpha: CovectorField, beta: CovectorField) -> ScalarField:
        _same_chart(self, alpha, beta)
        n = self.chart.dim
        return add(*(mul(alpha[i], beta[j], self.matrix[i][j])
                     for i in range(n) for j in range(n) if self.matrix[i][j] is not ZERO))

    def values(self, points: Points) -> np.ndarray:
        return tensor_values(self.matrix, points)


@dataclass(frozen=True, eq=False)
class Cometric:
    """Symmetric ``g^{ij} = g(dx^i, dx^j)`` on covectors; entries stored for ``i <= j``."""

    chart: Chart
    entries: Mapping[tuple[int, int], ScalarField] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), e in dict(self.entries).items():
            if not (0 <= i <= j < self.chart.dim):
                raise GeometryError(f"cometric entry ({i}, {j}) must satisfy 0 <= i <= j < {self.chart.dim}")
            e = as_field(e)
            if e is not ZERO:
                clean[(i, j)] = e
        object.__setattr__(self, "entries", clean)

    @classmethod
    def diagonal(cls, chart: Chart, diag: Sequence) -> "Cometric":
        return cls(chart, {(i, i): as_field(d) for i, d in enumerate(diag)})

    @cached_property
    def matrix(self) -> tuple[tuple[ScalarField, ...], ...]:
        n = self.chart.dim
        rows = [[ZERO] * n for _ in range(n)]
        for (i, j), e in self.entries.items():
            rows[i][j] = e
            rows[j][i] = e
        return tuple(tuple(r) for r in rows)

    @cached_property
    def inverse(self) -> MatrixInverse:
        """Pointwise metric components ``g~_{kl}`` (matrix inverse of ``g^{kl}``)."""
        return MatrixInverse(self.matrix, cond_limit=COND_LIMIT, label=f"ginv_{self.chart.name}")

    def __call__(self, alpha: CovectorField, beta: CovectorField) -> ScalarField:
        _same_chart(self, alpha, beta)
        n = self.chart.dim
        return add(*(mul(alpha[i], beta[j], self.matrix[i][j])
                     for i in range(n) for j in range(n) if self.matrix[i][j] is not ZERO))

    def values(self, points: Points) -> np.ndarray:
        return tensor_values(self.matrix, points)

    def inverse_values(self, points: Points) -> np.ndarray:
        return tensor_values(self.inverse.entries, points)


# evaluation helpers -------------------------------------------------------

def point_count(points: Points) -> int:
    for v in points.values():
        return int(np.size(v))
    return 1


def tensor_values(nested, points: Points, evaluator: Evaluator | None = None) -> np.ndarray:
    """Evaluate a nested sequence of scalar fields; returns shape (N, *nesting)."""
    ev = evaluator or Evaluator(points)
    n = point_count(points)
    flat: list[ScalarField] = []
    shape: list[int] = []

    def walk(obj, depth):
        if isinstance(obj, ScalarField):
            flat.append(obj)
            return
        if depth == len(shape):
            shape.append(len(obj))
        for item in obj:
            walk(item, depth + 1)

    walk(nested, 0)
    arr = ev.array(flat, (n,))
    return arr.reshape((n, *shape))


def field_values(fields: Sequence[ScalarField], points: Points) -> np.ndarray:
    return tensor_values(tuple(fields), points)


def sample_points(chart: Chart, n: int = DEFAULT_POINTS, seed: int = DEFAULT_SEED,
                  box: tuple[float, float] = DEFAULT_BOX,
                  exclude: Iterable[tuple[str, float]] = ()) -> dict[str, np.ndarray]:
    """Uniform points in ``box^dim``; ``exclude`` lists ``(coord, r)`` meaning drop ``|coord| < r``."""
    rng = np.random.default_rng(seed)
    exclude = [(chart.index(c), float(r)) for c, r in exclude if c in chart.coords]
    lo, hi = box
    rows = np.empty((0, chart.dim))
    while len(rows) < n:
        batch = rng.uniform(lo, hi, size=(max(n, 16), chart.dim))
        keep = np.ones(len(batch), dtype=bool)
        for idx, r in exclude:
            keep &= np.abs(batch[:, idx]) >= r
        rows = np.concatenate([rows, batch[keep]])
    rows = rows[:n]
    return {c: rows[:, i].copy() for i, c in enumerate(chart.coords)}


def first_point(points: Points) -> dict[str, float]:
    return {k: float(np.ravel(v)[0]) for k, v in points.items()}


# covector builders ---------------------------------------------------------

def coordinate_covector(chart: Chart, i: int) -> CovectorField:
    return CovectorField(chart, [ONE if k == i else ZERO for k in range(chart.dim)])


def coframe(chart: Chart) -> list[CovectorField]:
    return [coordinate_covector(chart, i) for i in range(chart.dim)]


def exterior_derivative(chart: Chart, h: ScalarField) -> CovectorField:
    return CovectorField(chart, [h.diff(c) for c in chart.coords])


def zero_covector(chart: Chart) -> CovectorField:
    return CovectorField(chart, [ZERO] * chart.dim)


# operations ----------------------------------------------------------------

def sharp(pi: BivectorField, alpha: CovectorField) -> VectorField:
    """``sharp(alpha)^k = alpha_i Pi^{ik}``, so that ``beta(sharp alpha) = Pi(alpha, beta)``."""
    chart = _same_chart(pi, alpha)
    n = chart.dim
    m = pi.matrix
    return VectorField(chart, [add(*(mul(alpha[i], m[i][k]) for i in range(n) if m[i][k] is not ZERO))
                               for k in range(n)])


def pairing(alpha: CovectorField, x: VectorField) -> ScalarField:
    _same_chart(alpha, x)
    return add(*(mul(a, b) for a, b in zip(alpha.components, x.components)))


def j_endomorphism(pi: BivectorField, g: Cometric, alpha: CovectorField) -> CovectorField:
    """The 1-form ``J alpha`` with ``g(J alpha, beta) = Pi(alpha, beta)``.

    Solved pointwise: ``(J alpha)_l = alpha_i Pi^{ij} g~_{jl}``.
    """
    chart = _same_chart(pi, g, alpha)
    n = chart.dim
    m = pi.matrix
    inv = g.inverse.entries
    # contraction alpha_i Pi^{ij}
    row = [add(*(mul(alpha[i], m[i][j]) for i in range(n) if m[i][j] is not ZERO)) for j in range(n)]
    return CovectorField(chart, [add(*(mul(row[j], inv[j][l]) for j in range(n) if row[j] is not ZERO))
                                 for l in range(n)])


def koszul_bracket(pi: BivectorField, alpha: CovectorField, beta: CovectorField) -> CovectorField:
    """``[alpha, beta]_Pi`` by bilinear expansion of the coordinate rules.

    ``[dx^i, dx^j] = d Pi^{ij}``, plus the Leibniz terms in either slot.
    """
    chart = _same_chart(pi, alpha, beta)
    n = chart.dim
    m = pi.matrix
    coords = chart.coords
    out: list[list[ScalarField]] = [[] for _ in range(n)]
    sharp_dx = [sharp(pi, coordinate_covector(chart, i)) for i in range(n)]
    for i in range(n):
        if alpha[i] is ZERO:
            continue
        for j in range(n):
            if beta[j] is ZERO or m[i][j] is ZERO:
                continue
            coeff = mul(alpha[i], beta[j])
            for a in range(n):
                out[a].append(mul(coeff, m[i][j].diff(coords[a])))
    for i in range(n):
        if alpha[i] is ZERO:
            continue
        for j in range(n):
            out[j].append(mul(alpha[i], sharp_dx[i](beta[j])))
    for j in range(n):
        if beta[j] is ZERO:
            continue
        for i in range(n):
            out[i].append(neg(mul(beta[j], sharp_dx[j](alpha[i]))))
    return CovectorField(chart, [add(*terms) for terms in out])


def lie_derivative(x: VectorField, beta: CovectorField) -> CovectorField:
    """``(L_X beta)_j = X^k d_k beta_j + beta_k d_j X^k``."""
    chart = _same_chart(x, beta)
    coords = chart.coords
    n = chart.dim
    return CovectorField(chart, [
        add(x(beta[j]), *(mul(beta[k], x[k].diff(coords[j])) for k in range(n)))
        for j in range(n)
    ])


def koszul_bracket_lie(pi: BivectorField, alpha: CovectorField, beta: CovectorField) -> CovectorField:
    """``L_{sharp alpha} beta - L_{sharp beta} alpha - d(Pi(alpha, beta))`` taken literally."""
    chart = _same_chart(pi, alpha, beta)
    return (lie_derivative(sharp(pi, alpha), beta)
            - lie_derivative(sharp(pi, beta), alpha)
            - exterior_derivative(chart, pi(alpha, beta)))


def vector_commutator(x: VectorField, y: VectorField) -> VectorField:
    chart = _same_chart(x, y)
    return VectorField(chart, [sub(x(y[k]), y(x[k])) for k in range(chart.dim)])


def _pi_jet(pi: BivectorField, points: Points) -> tuple[np.ndarray, np.ndarray]:
    chart = pi.chart
    ev = Evaluator(points)
    m = pi.matrix
    vals = tensor_values(m, points, ev)
    d = tensor_values([[[e.diff(c) for c in chart.coords] for e in row] for row in m], points, ev)
    return vals, d


def jacobi_residual(pi: BivectorField, points: Points) -> np.ndarray:
    """``J^{ijk} = Pi^{li} d_l Pi^{jk} + Pi^{lj} d_l Pi^{ki} + Pi^{lk} d_l Pi^{ij}``; shape (N, d, d, d)."""
    p, dp = _pi_jet(pi, points)
    # dp[n, j, k, l] = d_l Pi^{jk}
    t = np.einsum("nli,njkl->nijk", p, dp)
    return t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))


def is_casimir(pi: BivectorField, f: ScalarField, points: Points,
               tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Whether ``sharp(df)`` vanishes (sup norm ``<= tol``) at every sample point."""
    x = sharp(pi, exterior_derivative(pi.chart, f))
    vals = x.values(points)
    worst = float(np.max(np.abs(vals))) if vals.size else 0.0
    return worst <= tol, worst

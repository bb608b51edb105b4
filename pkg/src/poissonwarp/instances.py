"""Small concrete spaces with known curvature, used for solver round trips and tests."""
from __future__ import annotations

import math

from .expr import const, mul, symbol
from .geometry import BivectorField, Chart, Cometric
from .warped import PoissonManifold, WarpedSpace, build_warped


def flat(coords: tuple[str, ...] = ("x", "y"), name: str = "flat", signature: tuple[float, ...] | None = None,
         pi_value: float = 1.0) -> PoissonManifold:
    """Constant bivector ``Pi^{01} = pi_value`` with a constant diagonal cometric (zero connection)."""
    chart = Chart(name, tuple(coords))
    upper = {(0, 1): const(pi_value)} if chart.dim > 1 else {}
    diag = signature or (1.0,) * chart.dim
    return PoissonManifold(name, BivectorField(chart, upper), Cometric.diagonal(chart, diag))


def einstein_plane(lam: float, coords: tuple[str, str] = ("x", "y"), name: str = "plane") -> PoissonManifold:
    """A plane with ``Ric = lam g`` at every point.

    ``Pi^{xy} = c x`` with the Euclidean cometric has ``Ric = -c^2 g``. Flipping the
    cometric sign leaves ``Ric`` unchanged, so ``g = -delta`` gives ``Ric = c^2 g``.
    ``lam = 0`` falls back to the flat plane.
    """
    if lam == 0:
        return flat(coords, name)
    chart = Chart(name, tuple(coords))
    c = math.sqrt(abs(lam))
    pi = BivectorField(chart, {(0, 1): mul(c, symbol(coords[0]))})
    sign = 1.0 if lam < 0 else -1.0
    return PoissonManifold(name, pi, Cometric.diagonal(chart, (sign, sign)))


def einstein_warp_instance(lam: float, lam_hat: float, f: float) -> WarpedSpace:
    """Einstein base (``lam``) and fiber (``lam_hat``) warped by the constant ``f``."""
    base = einstein_plane(lam, ("x", "y"), "base")
    fiber = einstein_plane(lam_hat, ("u", "v"), "fiber")
    return build_warped(base, fiber, f, "einstein_roundtrip")


def constant_scalar_instance(S_B: float, mu: float, f: float) -> WarpedSpace:
    """Base with scalar curvature ``S_B`` and a 2-dimensional fiber with scalar curvature ``mu``."""
    base = einstein_plane(S_B / 2.0, ("x", "y"), "base")
    fiber = einstein_plane(mu / 2.0, ("u", "v"), "fiber")
    return build_warped(base, fiber, f, "scalar_roundtrip")

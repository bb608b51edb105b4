from __future__ import annotations

import numpy as np
import pytest

from poissonwarp.expr import parse, symbol
from poissonwarp.geometry import BivectorField, Chart, Cometric, coframe, koszul_bracket, sample_points, sharp
from poissonwarp.manifest import load_manifest
from poissonwarp.warped import (
    PoissonManifold,
    WarpError,
    build_warped,
    compat_equivalence_check,
    oracle_connection,
    oracle_curvature,
    oracle_ricci,
    oracle_scalar,
    sharp_decomposition_check,
    verify_decomposition,
)


def manifold(name, coords, pi, g, exclude=()):
    chart = Chart(name, tuple(coords))
    return PoissonManifold(name, BivectorField(chart, {k: parse(v, coords) for k, v in pi.items()}),
                           Cometric(chart, {k: parse(v, coords) for k, v in g.items()}), exclude)


PLANE = manifold("plane", "xy", {(0, 1): "1"}, {(0, 0): "1", (1, 1): "1"})
LINE = manifold("line", "z", {}, {(0, 0): "1"})
PX_BASE = manifold("px", "xy", {(0, 1): "x"}, {(0, 0): "1", (1, 1): "1"}, (("x", 0.1),))
PX_FIBER = manifold("pxf", "uv", {(0, 1): "u"}, {(0, 0): "1", (1, 1): "1"}, (("u", 0.1),))
FLAT_FIBER = manifold("flatf", "uv", {(0, 1): "1"}, {(0, 0): "1", (1, 1): "1"})
INTERVAL = manifold("I", "t", {}, {(0, 0): "-1"})


@pytest.fixture(scope="module")
def noncasimir():
    return build_warped(PLANE, LINE, parse("exp(x)", ["x", "y"]), "nc")


@pytest.fixture(scope="module")
def grw():
    return load_manifest("grw.json").warped["grw"]


def test_grw_cometric_blocks(grw):
    M = grw.product
    pts = grw.sample(50)
    t = pts["t"]
    assert M.chart.coords == ("t", "z1", "z2")
    assert np.allclose(M.g.values(pts)[:, 1, 1], 1 / (1 + t ** 2) ** 2)
    assert np.all(M.g.values(pts)[:, 0, 1:] == 0)
    assert np.all(M.g.values(pts)[:, 0, 0] == -1)


def test_build_errors():
    with pytest.raises(WarpError):
        build_warped(PLANE, LINE, -1.0)
    with pytest.raises(WarpError, match="fiber"):
        build_warped(PLANE, LINE, parse("z^2 + 1", ["z"]))
    with pytest.raises(WarpError, match="share"):
        build_warped(PLANE, manifold("clash", "y", {}, {(0, 0): "1"}), 1.0)
    with pytest.raises(WarpError):
        build_warped(PLANE, LINE, parse("x", ["x", "y"]))


def test_lifts_and_mixed(noncasimir):
    W = noncasimir
    dx, dy = coframe(W.base.chart)
    (dz,) = coframe(W.fiber.chart)
    pts = W.sample(5)
    assert np.allclose(W.lift_h(dy).values(pts), [0, 1, 0])
    assert np.allclose(W.lift_v(dz).values(pts), [0, 0, 1])
    assert np.allclose(W.mixed(dx, dz.scale(symbol("z"))).values(pts)[:, 2], pts["z"])
    with pytest.raises(Exception):
        W.lift_h(dz)


def test_sharp_decomposition_examples(grw, noncasimir):
    pts = grw.sample(20)
    assert np.all(sharp(grw.product.pi, grw.lift_h(coframe(grw.base.chart)[0])).values(pts) == 0)
    W = noncasimir
    pts = W.sample(20)
    dx, dy = coframe(W.base.chart)
    (dz,) = coframe(W.fiber.chart)
    assert np.allclose(sharp(W.product.pi, W.lift_h(dx)).values(pts), [0, 1, 0])
    assert np.all(koszul_bracket(W.product.pi, W.lift_h(dx), W.lift_v(dz)).values(pts) == 0)
    for W2 in (grw, noncasimir, build_warped(PX_BASE, PX_FIBER, 2.0, "pp")):
        checks = sharp_decomposition_check(W2, W2.sample(100))
        assert all(c.passed for c in checks) and len(checks) == 3


def test_oracle_hand_values(noncasimir):
    W = noncasimir
    pts = W.sample(100)
    ex = np.exp(pts["x"])
    dx, dy = coframe(W.base.chart)
    (dz,) = coframe(W.fiber.chart)
    assert np.allclose(oracle_connection(W, "hv", [dy, dz], pts), [0, 0, 1], atol=1e-12)
    vv = oracle_connection(W, "vv", [dz, dz], pts)
    assert np.allclose(vv[:, 1], -1 / ex ** 2) and np.allclose(vv[:, [0, 2]], 0)
    c = oracle_curvature(W, "c", [dy, dz, dz], pts)
    assert np.allclose(c[:, 1], -1 / ex ** 2) and np.allclose(c[:, [0, 2]], 0)
    assert np.all(oracle_curvature(W, "d", [dz, dz, dx], pts) == 0)
    assert np.allclose(oracle_ricci(W, "hh", [dy, dy], pts), -1)
    assert np.all(oracle_ricci(W, "hv", [dy, dz], pts) == 0)
    direct = W.product.at(pts)
    assert np.allclose(direct.ricci[:, 1, 1], -1, atol=1e-12)
    assert np.allclose(direct.scalar, oracle_scalar(W, pts), atol=1e-10)


def test_casimir_oracles_collapse(grw):
    pts = grw.sample(50)
    (dt,) = coframe(grw.base.chart)
    dz1, dz2 = coframe(grw.fiber.chart)
    assert np.all(oracle_connection(grw, "vv", [dz1, dz2], pts) == 0)
    assert np.all(oracle_ricci(grw, "vv", [dz1, dz1], pts) == 0)
    assert np.allclose(oracle_scalar(grw, pts), 0)


def test_scalar_with_curved_fiber_and_casimir_f():
    W = build_warped(PLANE, PX_FIBER, 3.0, "c")
    pts = W.sample(50)
    assert np.allclose(oracle_scalar(W, pts), -18)
    assert np.allclose(W.product.at(pts).scalar, -18, atol=1e-10)


CASES = [("grw.json", "grw"), ("grw.json", "grw_px"), ("noncasimir_warp.json", "noncasimir"),
         ("noncasimir_warp.json", "noncasimir_px")]


@pytest.mark.parametrize("fixture,name", CASES)
def test_verify_decomposition_fixtures(fixture, name):
    W = load_manifest(fixture).warped[name]
    report = verify_decomposition(W, W.sample(100, 42))
    assert report.passed, report.to_text()
    names = {c.name for c in report.checks}
    for case in ["connection hh", "connection vv", "connection hv", "curvature a", "curvature b",
                 "curvature c", "curvature d", "curvature e", "ricci hh", "ricci hv", "ricci vv", "scalar"]:
        assert case in names
    literal = next(c for c in report.checks if c.name.startswith("curvature e (literal"))
    assert literal.informational


def test_literal_reading_differs_when_fiber_curved():
    W = load_manifest("noncasimir_warp.json").warped["noncasimir_px"]
    report = verify_decomposition(W, W.sample(50, 42))
    literal = next(c for c in report.checks if c.name.startswith("curvature e (literal"))
    assert literal.max_residual > 0.5


def test_constant_f_flat_warp_all_zero():
    W = build_warped(PLANE, FLAT_FIBER, 2.5, "flatwarp")
    report = verify_decomposition(W, W.sample(30))
    assert all(c.max_residual == 0 for c in report.checks if not c.informational)


def test_higher_dimensional_non_casimir():
    base = manifold("b3", ["x1", "x2", "x3"], {(0, 1): "x3", (1, 2): "x1", (0, 2): "-x2"},
                    {(0, 0): "1", (1, 1): "1", (2, 2): "1"})
    W = build_warped(base, PX_FIBER, parse("2 + sin(x1)*x2", ["x1", "x2", "x3"]), "b3f")
    report = verify_decomposition(W, W.sample(40, 3))
    assert report.passed, report.to_text()


def test_compat_equivalence(grw):
    pts = grw.sample(100)
    ok = compat_equivalence_check(grw, pts)
    assert ok.passed and ok.max_residual <= 1e-9
    bad = build_warped(PX_BASE, FLAT_FIBER, 2.0, "bad")
    chk = compat_equivalence_check(bad, bad.sample(100))
    assert chk.passed and chk.max_residual >= 0.05


def test_homogeneity_of_vertical_block():
    pts = sample_points(Chart("p", ("x", "y", "u", "v")), 100, exclude=[("u", 0.1)])
    f = parse("exp(x)", ["x", "y"])
    for c in (0.5, 3.0):
        scaled = manifold("pxs", "uv", {(0, 1): "u"}, {(0, 0): f"{c * c}", (1, 1): f"{c * c}"})
        a = build_warped(PLANE, PX_FIBER, f, "a").product.g.values(pts)
        b = build_warped(PLANE, scaled, f * c, "b").product.g.values(pts)
        assert np.max(np.abs(a - b)) <= 1e-12


def test_direct_gamma_block_structure(noncasimir):
    geo = noncasimir.product.at(noncasimir.sample(100))
    # D_{dz^v} dz^v has no vertical part, D_{dx^h} dy^h has no vertical part
    assert np.all(np.abs(geo.gamma[:, 2, 2, 2]) <= 1e-12)
    assert np.all(np.abs(geo.gamma[:, :2, :2, 2]) <= 1e-12)

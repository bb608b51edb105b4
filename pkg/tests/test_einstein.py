from __future__ import annotations

import math

import numpy as np
import pytest

from poissonwarp.einstein import (
    SolverError,
    einstein_check,
    einstein_conditions,
    grw_ricci_flat_check,
    solve_constant_scalar,
    solve_einstein_warp,
)
from poissonwarp.expr import parse
from poissonwarp.geometry import BivectorField, Chart, Cometric
from poissonwarp.instances import constant_scalar_instance, einstein_plane, einstein_warp_instance, flat
from poissonwarp.manifest import load_manifest
from poissonwarp.warped import PoissonManifold, build_warped


def test_flat_is_ricci_flat():
    M = flat()
    v = einstein_check(M, M.sample(50), 1e-9)
    assert v.is_einstein and v.ricci_flat and v.lambda_estimate == 0


def test_poisson_x_is_einstein_with_minus_one():
    M = load_manifest("poisson_x.json").manifolds["poisson_x"]
    v = einstein_check(M, M.sample(100), 1e-9)
    assert v.is_einstein and not v.ricci_flat
    assert v.lambda_estimate == pytest.approx(-1, abs=1e-10)
    assert len(v.per_point_lambdas) == 100


@pytest.mark.parametrize("lam", [-3.0, -0.5, 0.25, 2.0])
def test_einstein_planes_and_trace_identity(lam):
    M = einstein_plane(lam)
    pts = M.sample(60)
    v = einstein_check(M, pts, 1e-9)
    assert v.is_einstein and v.lambda_estimate == pytest.approx(lam, abs=1e-10)
    assert np.allclose(M.at(pts).scalar, 2 * lam, atol=1e-8)


def test_non_einstein_detected():
    W = build_warped(flat(), flat(("u",), "l"), parse("exp(x)", ["x", "y"]), "nc")
    v = einstein_check(W, W.sample(50), 1e-9)
    assert not v.is_einstein and v.max_residual > 0.1


def test_grw_examples():
    m = load_manifest("grw.json")
    grw, grw_px = m.warped["grw"], m.warped["grw_px"]
    v = einstein_check(grw, grw.sample(100), 1e-9)
    assert v.ricci_flat and abs(v.lambda_estimate) <= 1e-8
    assert not einstein_check(grw_px, grw_px.sample(100), 1e-9).is_einstein
    r = grw_ricci_flat_check(grw, grw.sample(100))
    assert r.passed, r.to_text()
    r = grw_ricci_flat_check(grw_px, grw_px.sample(100))
    assert r.passed, r.to_text()
    # the interval alone
    I = grw.base
    assert np.all(I.at(I.sample(20)).ricci == 0)
    not_interval = build_warped(flat(), flat(("u",), "l"), 1.0)
    with pytest.raises(Exception):
        grw_ricci_flat_check(not_interval, not_interval.sample(5))


def test_einstein_conditions_flat_constant():
    W = build_warped(flat(), flat(("u", "v"), "fl"), 3.0, "ff")
    r = einstein_conditions(W, W.sample(40))
    assert r.passed and all(c.max_residual == 0 for c in r.checks)


def test_einstein_conditions_casimir_reduces():
    W = einstein_warp_instance(-2.0, -0.5, 2.0)
    r = einstein_conditions(W, W.sample(40))
    assert r.passed, r.to_text()
    assert r.values["fiber"]["lambda_estimate"] == pytest.approx(-2.0 / 4, abs=1e-10)


def _by_name(report, name):
    return next(c for c in report.checks if c.name == name)


def test_einstein_conditions_agree_on_non_einstein():
    W = load_manifest("noncasimir_warp.json").warped["noncasimir_px"]
    r = einstein_conditions(W, W.sample(60))
    assert _by_name(r, "agreement with product").passed
    assert not _by_name(r, "base condition").passed
    assert not r.values["product"]["is_einstein"]

    chart = Chart("F", ("u", "v"))
    fiber = PoissonManifold("sq", BivectorField(chart, {(0, 1): parse("u^2", ["u", "v"])}),
                            Cometric.diagonal(chart, [1.0, 1.0]), (("u", 0.2),))
    W = build_warped(flat(), fiber, parse("exp(x)", ["x", "y"]), "nc_sq")
    r = einstein_conditions(W, W.sample(60))
    fiber_check = _by_name(r, "fiber einstein")
    assert not fiber_check.passed and fiber_check.max_residual > 0.1
    assert _by_name(r, "agreement with product").passed


# solver tables: hat>0/<0 crossed with lambda>0/<0, for both base regimes
EINSTEIN_TABLE = [
    (1, 1.0, 4.0, 2.0), (1, 1.0, -4.0, None), (1, -1.0, 4.0, None), (1, -1.0, -4.0, 2.0),
    (3, 2.0, 8.0, 2.0), (3, 2.0, -8.0, None), (3, -2.0, 8.0, None), (3, -2.0, -2.0, 1.0),
]


@pytest.mark.parametrize("dim,hat,lam,expected", EINSTEIN_TABLE)
def test_solve_einstein_table(dim, hat, lam, expected):
    sol = solve_einstein_warp(lam, hat, dim)
    if expected is None:
        assert sol.kind == "none" and sol.f_value is None
    else:
        assert sol.kind == "constant-f" and sol.f_value == expected
        assert sol.f_value ** 2 * hat == pytest.approx(lam)
    assert sol.rationale


def test_solve_einstein_examples_and_boundaries():
    assert solve_einstein_warp(4, 1).f_value == 2
    assert solve_einstein_warp(-1, 2).kind == "none"
    assert solve_einstein_warp(-2, -2).f_value == 1
    assert solve_einstein_warp(0, 0).kind == "any-positive-constant"
    assert solve_einstein_warp(0, 3).kind == "none"
    assert solve_einstein_warp(3, 0).kind == "none"
    with pytest.raises(SolverError):
        solve_einstein_warp(1, 1, 0)


def test_solve_scalar_table():
    assert solve_constant_scalar(1, 1, 5, 2).f_value == 2
    assert solve_constant_scalar(3, -2, 1, 2).f_value == 1
    assert solve_constant_scalar(4, 7, 4, 3).kind == "none"
    assert solve_constant_scalar(1, -1, 5, 2).kind == "none"
    for bad in [(1, 0, 2, 2), (1, 1, 2, 1), (1, 1, 2, 2.5)]:
        with pytest.raises(SolverError):
            solve_constant_scalar(*bad)


@pytest.mark.parametrize("lam,hat", [(4.0, 1.0), (-2.0, -2.0), (-1.5, -6.0), (0.5, 2.0)])
def test_einstein_round_trip(lam, hat):
    f = solve_einstein_warp(lam, hat).f_value
    W = einstein_warp_instance(lam, hat, f)
    pts = W.sample(50)
    v = einstein_check(W, pts, 1e-8)
    assert v.is_einstein and abs(v.lambda_estimate - lam) <= 1e-8
    assert np.allclose(W.product.at(pts).scalar, 4 * lam, atol=1e-8)


@pytest.mark.parametrize("sb,mu,mu1", [(1.0, 1.0, 5.0), (3.0, -2.0, 1.0), (-2.0, 0.5, 0.0)])
def test_scalar_round_trip(sb, mu, mu1):
    f = solve_constant_scalar(sb, mu, mu1, 2).f_value
    W = constant_scalar_instance(sb, mu, f)
    assert np.max(np.abs(W.product.at(W.sample(50)).scalar - mu1)) <= 1e-8
    assert math.isclose(f * f * mu + sb, mu1)

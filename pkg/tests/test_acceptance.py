"""Acceptance gate: one test per criterion, each at its stated tolerance.

The terminal summary (see conftest.py) prints one pass/fail line per criterion.
"""
from __future__ import annotations

import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

import bruteforce
from poissonwarp.cli import run
from poissonwarp.connection import curvature, levi_civita, ricci, scalar_curvature
from poissonwarp.einstein import einstein_check
from poissonwarp.geometry import (
    coframe,
    exterior_derivative,
    jacobi_residual,
    koszul_bracket,
    koszul_bracket_lie,
)
from poissonwarp.manifest import load_manifest
from poissonwarp.warped import build_warped, casimir_checks, verify_decomposition

FIXTURES = ["flat2d.json", "poisson_x.json", "so3_star.json", "grw.json", "noncasimir_warp.json",
            "nonpoisson_compat.json"]
SEED = 42
N = 100


def spaces(manifest):
    for t in manifest.targets():
        s = manifest.get(t)
        yield t, getattr(s, "product", s)


def test_criterion_01_connection_axioms():
    start = time.perf_counter()
    worst_t = worst_m = 0.0
    for name in FIXTURES:
        for _, M in spaces(load_manifest(name)):
            geo = M.at(M.sample(N, SEED))
            worst_t = max(worst_t, float(np.max(np.abs(geo.torsion))))
            worst_m = max(worst_m, float(np.max(np.abs(geo.metricity))))
    elapsed = time.perf_counter() - start
    assert worst_t <= 1e-9, worst_t
    assert worst_m <= 1e-9, worst_m
    assert elapsed < 5.0, elapsed


def test_criterion_02_koszul_coordinate_identity():
    worst_coord = worst_lie = 0.0
    for name in FIXTURES:
        for _, M in spaces(load_manifest(name)):
            pts = M.sample(N, SEED)
            frame = coframe(M.chart)
            for i in range(M.chart.dim):
                for j in range(M.chart.dim):
                    br = koszul_bracket(M.pi, frame[i], frame[j]).values(pts)
                    d_pi = exterior_derivative(M.chart, M.pi.entry(i, j)).values(pts)
                    lie = koszul_bracket_lie(M.pi, frame[i], frame[j]).values(pts)
                    worst_coord = max(worst_coord, float(np.max(np.abs(br - d_pi))))
                    worst_lie = max(worst_lie, float(np.max(np.abs(br - lie))))
    assert worst_coord <= 1e-12, worst_coord
    assert worst_lie <= 1e-10, worst_lie


def test_criterion_03_jacobi_discrimination():
    for name, target in [("flat2d.json", "flat2d"), ("poisson_x.json", "poisson_x"), ("so3_star.json", "so3_star")]:
        M = load_manifest(name).manifolds[target]
        assert np.max(np.abs(jacobi_residual(M.pi, M.sample(N, SEED)))) <= 1e-12
    bad = load_manifest("nonpoisson_compat.json").manifolds["nonpoisson_r3"]
    assert np.max(np.abs(jacobi_residual(bad.pi, bad.sample(N, SEED)))) >= 0.5


def test_criterion_04_poisson_x_hand_values():
    M = load_manifest("poisson_x.json").manifolds["poisson_x"]
    pts = M.sample(N, SEED)
    D = levi_civita(M.pi, M.g)
    dx, dy = coframe(M.chart)
    geo = M.at(pts)
    expected = {
        "D_dx dx": (geo.gamma[:, 0, 0], [0.0, -1.0]),
        "D_dx dy": (geo.gamma[:, 0, 1], [1.0, 0.0]),
        "R(dx,dy)dy": (curvature(D, dx, dy, dy).values(pts), [-1.0, 0.0]),
    }
    for label, (got, want) in expected.items():
        assert np.max(np.abs(got - np.array(want))) <= 1e-10, label
    assert np.max(np.abs(ricci(D, dx, dx, pts) + 1)) <= 1e-10
    assert np.max(np.abs(ricci(D, dy, dy, pts) + 1)) <= 1e-10
    assert np.max(np.abs(scalar_curvature(D, pts) + 2)) <= 1e-10
    # independent finite-difference Koszul evaluation agrees with the frozen values
    Pi = lambda p: np.array([[0.0, p[0]], [-p[0], 0.0]])
    g = lambda p: np.eye(2)
    for p in np.stack([pts["x"], pts["y"]], axis=1)[:5]:
        assert np.allclose(bruteforce.gamma(Pi, g, p)[0], [[0, -1], [1, 0]], atol=1e-8)
        assert bruteforce.scalar(Pi, g, p) == pytest.approx(-2, abs=1e-5)


def test_criterion_05_warped_decomposition_oracle():
    for name in ["grw.json", "noncasimir_warp.json"]:
        for W in load_manifest(name).warped.values():
            report = verify_decomposition(W, W.sample(N, SEED), tol=1e-8, seed=SEED)
            assert report.passed, report.to_text()
            names = {c.name for c in report.checks}
            assert {"connection hh", "connection vv", "connection hv", "curvature a", "curvature b",
                    "curvature c", "curvature d", "curvature e", "ricci hh", "ricci hv", "ricci vv",
                    "scalar"} <= names
            assert any(c.name.startswith("curvature e (literal") and c.informational for c in report.checks)


def test_criterion_06_casimir_block_identities():
    W = load_manifest("grw.json").warped["grw"]
    checks = casimir_checks(W, W.sample(N, SEED), tol=1e-9, seed=SEED)
    assert all(c.passed and c.max_residual <= 1e-9 for c in checks), [(c.name, c.max_residual) for c in checks]


def test_criterion_07_compatibility_of_warped_products():
    m = load_manifest("grw.json")
    W = m.warped["grw"]
    assert np.max(np.abs(W.product.at(W.sample(N, SEED)).compatibility)) <= 1e-9
    base = load_manifest("poisson_x.json").manifolds["poisson_x"]
    bad = build_warped(base, m.manifolds["flat_fiber"], 2.0, "px_base")
    assert np.max(np.abs(bad.product.at(bad.sample(N, SEED)).compatibility)) >= 0.05


def test_criterion_08_grw_einstein():
    code, out = run(["einstein", "grw.json", "--target", "grw", "--output", "json"])
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    m = load_manifest("grw.json")
    v = einstein_check(m.warped["grw"], m.warped["grw"].sample(N, SEED), 1e-9)
    assert v.ricci_flat and abs(v.lambda_estimate) <= 1e-8
    code, _ = run(["einstein", "grw.json", "--target", "grw_px", "--output", "json"])
    assert code == 1
    assert not einstein_check(m.warped["grw_px"], m.warped["grw_px"].sample(N, SEED), 1e-9).is_einstein


EINSTEIN_CLAUSES = [  # (s1, lambda_hat, lambda, f or None)
    (1, 1.0, 4.0, 2.0), (1, 1.0, -4.0, None), (1, -1.0, 4.0, None), (1, -1.0, -4.0, 2.0),
    (2, 2.0, 8.0, 2.0), (2, 2.0, -8.0, None), (2, -2.0, 8.0, None), (2, -2.0, -2.0, 1.0),
]
SCALAR_CLAUSES = [(1.0, 1.0, 5.0, 2, 2.0), (3.0, -2.0, 1.0, 2, 1.0), (4.0, 7.0, 4.0, 3, None)]


def test_criterion_09_solver_tables():
    start = time.perf_counter()
    for s1, hat, lam, want in EINSTEIN_CLAUSES:
        code, out = run(["solve-warp", "--lambda", str(lam), "--lambda-hat", str(hat), "--s1", str(s1),
                         "--verify", "--tol", "1e-8", "--output", "json"])
        sol = json.loads(out)["values"]["solution"]
        assert code == 0
        assert sol["f"] == want and sol["kind"] == ("none" if want is None else "constant-f")
    for sb, mu, mu1, s2, want in SCALAR_CLAUSES:
        code, out = run(["solve-scalar", "--sb", str(sb), "--mu", str(mu), "--mu1", str(mu1), "--s2", str(s2),
                         "--verify", "--tol", "1e-8", "--output", "json"])
        sol = json.loads(out)["values"]["solution"]
        assert code == 0
        assert sol["f"] == want and sol["kind"] == ("none" if want is None else "constant-f")
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, elapsed


SUITE_SCRIPT = """
import hashlib, sys
from poissonwarp.cli import run
names = sys.argv[1:]
h = hashlib.sha256()
for fx in names:
    for cmd in ["validate", "connection", "curvature", "ricci", "scalar", "laplacian", "compat", "einstein"]:
        h.update(run([cmd, fx, "--output", "json", "--seed", "42"])[1].encode())
for fx in ["grw.json", "noncasimir_warp.json"]:
    h.update(run(["warp-verify", fx, "--output", "json", "--seed", "42"])[1].encode())
h.update(run(["solve-warp", "--lambda", "4", "--lambda-hat", "1", "--verify", "--output", "json"])[1].encode())
h.update(run(["solve-scalar", "--sb", "1", "--mu", "1", "--mu1", "5", "--s2", "2", "--verify",
              "--output", "json"])[1].encode())
print(h.hexdigest())
"""


def test_criterion_10_determinism():
    digests = []
    for hash_seed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        proc = subprocess.run([sys.executable, "-c", SUITE_SCRIPT, *FIXTURES], capture_output=True, text=True,
                              env=env, timeout=300)
        assert proc.returncode == 0, proc.stderr
        digests.append(proc.stdout.strip())
    assert digests[0] == digests[1] and len(digests[0]) == 64
    assert hashlib.sha256(b"").hexdigest() not in digests

import numpy as np
import pytest

from nlch import (
    EllipticWorkspace,
    Grid,
    hminus1_norm,
    solve_neumann_poisson,
    solve_weighted,
    validate_coefficient,
    weighted_hminus1_norm,
)
from nlch.errors import NonZeroMean

from conftest import mean_zero


def _mode(n):
    g = Grid.line(n, 1.0)
    X, _ = g.centers()
    lam1 = (2.0 / g.hx**2) * (1.0 - np.cos(np.pi * g.hx))
    return g, np.cos(np.pi * X), lam1


def test_eigenmode_exact():
    g, f, lam1 = _mode(64)
    ws = EllipticWorkspace(g)
    u = solve_neumann_poisson(ws, f)
    assert np.max(np.abs(u - f / lam1)) <= 1e-12
    assert hminus1_norm(ws, f) == pytest.approx(g.l2_norm(f) / np.sqrt(lam1), rel=1e-12)


def test_zero_rhs():
    g = Grid.square(8)
    ws = EllipticWorkspace(g)
    assert not np.any(solve_neumann_poisson(ws, g.zeros()))
    assert hminus1_norm(ws, g.zeros()) == 0.0
    b = validate_coefficient("polynomial", [1.0, 0.5])
    assert not np.any(solve_weighted(ws, g.full(0.3), g.zeros(), b))


def test_nonzero_mean_rejected():
    g = Grid.line(8)
    with pytest.raises(NonZeroMean):
        solve_neumann_poisson(EllipticWorkspace(g), g.full(1.0))


def test_manufactured_refinement():
    errs = []
    for n in (32, 64, 128):
        g = Grid.line(n, 1.0)
        X, _ = g.centers()
        u = solve_neumann_poisson(EllipticWorkspace(g), np.cos(np.pi * X))
        errs.append(np.max(np.abs(u - np.cos(np.pi * X) / np.pi**2)))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(slopes - 2.0) <= 0.1)


def test_defining_identity(rng):
    g = Grid(2, 12, 10, 1.0, 0.8)
    ws = EllipticWorkspace(g)
    f, v = mean_zero(g, rng), rng.standard_normal(g.shape)
    u = solve_neumann_poisson(ws, f)
    lhs = g.face_inner(g.gradient_faces(u), g.gradient_faces(v))
    assert lhs == pytest.approx(g.inner(f, v), rel=1e-10, abs=1e-12)


def test_weighted_reduces_to_poisson(rng):
    g = Grid.square(16)
    ws = EllipticWorkspace(g)
    f = mean_zero(g, rng)
    one = validate_coefficient("constant", [1.0])
    u0 = solve_neumann_poisson(ws, f)
    np.testing.assert_allclose(solve_weighted(ws, g.zeros(), f, one), u0, atol=1e-10)
    # polynomial b that happens to be 1 goes through PCG
    poly_one = validate_coefficient("polynomial", [1.0, 1e-300])
    u1 = solve_weighted(ws, rng.uniform(-0.9, 0.9, g.shape), f, poly_one)
    assert np.max(np.abs(u1 - u0)) <= 1e-10 * max(1.0, np.max(np.abs(u0)))


def test_weighted_solution_satisfies_equation(rng):
    g = Grid.square(24)
    ws = EllipticWorkspace(g)
    b = validate_coefficient("polynomial", [1.0, 0.0, -0.8])
    q = rng.uniform(-0.95, 0.95, g.shape)
    f = mean_zero(g, rng)
    u = solve_weighted(ws, q, f, b)
    bf = g.face_average(q).map(b)
    res = -g.divergence_cells(bf * g.gradient_faces(u)) - f
    assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(f)


def test_norm_equivalence_sandwich(rng):
    b = validate_coefficient("polynomial", [1.0, 0.6, -0.3])
    bm, bM = b.min_on_interval, b.max_on_interval
    for i in range(100):
        g = Grid.square(8) if i % 2 else Grid.line(32, 2.0)
        ws = EllipticWorkspace(g)
        q = rng.uniform(-0.99, 0.99, g.shape)
        f = mean_zero(g, rng)
        w = weighted_hminus1_norm(ws, q, f, b)
        h = hminus1_norm(ws, f)
        assert np.sqrt(bm) * w <= h + 1e-8
        assert h <= np.sqrt(bM) * w + 1e-8


def test_poincare_constant(rng):
    g = Grid(2, 10, 14, 1.0, 1.5)
    ws = EllipticWorkspace(g)
    C = ws.poincare_constant()
    assert np.min(-ws.eigenvalues[ws.eigenvalues != 0]) > 0
    assert ws.eigenvalues[0, 0] == 0.0
    for _ in range(20):
        v = mean_zero(g, rng)
        Dv = g.gradient_faces(v)
        assert g.l2_norm(v) ** 2 <= C * g.face_inner(Dv, Dv) * (1 + 1e-12)

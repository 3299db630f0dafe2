import numpy as np
import pytest

from nlch import (
    Grid,
    StepConfig,
    matano_points,
    potential_eval,
    stability_probe,
    steady_solve,
    verify_matano,
)
from nlch.errors import InvalidSpec
from nlch.steady import h2_surrogate, smooth_perturbation, stationary_residual


def test_residual_of_constant(params):
    g = Grid.square(8)
    _, norm, lam = stationary_residual(params, g, g.full(0.4))
    assert norm == 0.0
    assert lam == pytest.approx(potential_eval(params, 0.4, 1))
    assert stationary_residual(params, g, g.zeros())[2] == 0.0


def test_constant_initial_state(params):
    g = Grid.line(32)
    st = steady_solve(params, g, g.full(0.2))
    assert st.newton_iters == 0 and st.flow_time == 0.0
    np.testing.assert_array_equal(st.u, 0.2)
    assert verify_matano(params, g, st).within


def test_mass_mismatch_rejected(params):
    g = Grid.line(16)
    with pytest.raises(InvalidSpec):
        steady_solve(params, g, g.full(0.2), m=0.3)


def test_constant_minimizer_regime(params, rng):
    g = Grid.line(64, 8.0)
    noise = 1e-2 * rng.uniform(-1, 1, g.shape)
    st = steady_solve(params, g, 0.85 + noise - noise.mean())
    assert np.max(np.abs(st.u - 0.85)) <= 1e-8
    assert abs(g.mean(st.u) - 0.85) <= 1e-12
    assert st.energy <= st.flow_energy + 1e-8 * abs(st.flow_energy)


def test_kink_state(params):
    g = Grid.line(256, 4.0)
    X, _ = g.centers()
    u0 = 0.9 * np.tanh((X - 2.0) / 0.5)
    u0 -= u0.mean()
    st = steady_solve(params, g, u0)
    assert st.residual_norm <= 1e-10
    assert st.separation > 0
    assert np.ptp(st.u) > 1.0
    assert st.energy <= st.flow_energy + 1e-8 * abs(st.flow_energy)
    r, _, _ = stationary_residual(params, g, st.u)
    assert np.max(np.abs(r)) <= 1e-9
    # a nonconstant state is only expected to respect the Matano interval
    rep = verify_matano(params, g, st)
    _, alpha0, beta0 = matano_points(params)
    assert (rep.lower, rep.upper) == (alpha0, beta0)
    assert rep.within


def test_h2_surrogate_and_perturbation(rng):
    g = Grid.square(16, 2.0)
    assert h2_surrogate(g, g.zeros()) == 0.0
    v = smooth_perturbation(g, rng)
    assert abs(np.mean(v)) <= 1e-15
    assert h2_surrogate(g, 2 * v) == pytest.approx(2 * h2_surrogate(g, v))


def test_probe_zero_eta(params):
    g = Grid.line(32, 8.0)
    st = steady_solve(params, g, g.full(0.85))
    rep = stability_probe(params, g, st, 0.0, 1.0)
    assert rep.sup_distance == 0.0 and rep.stayed_within


def test_probe_stable_and_unstable(params):
    g = Grid.line(64, 16.0)
    cfg = StepConfig(dt_max=0.1)
    stable = stability_probe(params, g, steady_solve(params, g, g.full(0.85)), 1e-3, 10.0, cfg)
    assert stable.stayed_within
    assert stable.final_distance < stable.distances[0]
    unstable = stability_probe(params, g, steady_solve(params, g, g.zeros()), 1e-3, 40.0, cfg)
    assert not unstable.stayed_within

"""Stationary states with prescribed mass.

A stationary state solves ``mu_h(u) = lambda`` with ``mean(u) = m``; the
multiplier ``lambda`` is the mean of the chemical potential. States are
found by running the flow close to equilibrium and then polishing with
Newton on the bordered system in ``(u, lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .elliptic import EllipticWorkspace
from .energy import chemical_potential, chemical_potential_hessian, discrete_energy
from .errors import BarrierViolation, InvalidSpec, NoConvergence
from .model import matano_bounds
from .stepper import StepConfig, advance_adaptive

__all__ = [
    "StationaryState",
    "MatanoReport",
    "ProbeReport",
    "stationary_residual",
    "steady_solve",
    "verify_matano",
    "h2_surrogate",
    "stability_probe",
]


@dataclass
class StationaryState:
    u: np.ndarray
    m: float
    multiplier: float
    residual_norm: float
    separation: float
    energy: float
    newton_iters: int = 0
    flow_time: float = 0.0
    flow_energy: float = float("nan")


def stationary_residual(params, grid, u):
    """Return ``(r, ||r||, lambda)`` with ``r = mu_h(u) - mean(mu_h(u))``."""
    mu = chemical_potential(params, grid, u)
    # the averaged sum of a constant field can be off by an ulp
    lam = float(mu.flat[0]) if np.ptp(mu) == 0 else grid.mean(mu)
    r = mu - lam
    return r, grid.l2_norm(r), lam


def _polish(params, grid, u, m, tol, max_iter, margin):
    n = grid.size
    w = np.full(n, grid.cell_volume / grid.volume)
    _, rnorm, lam = stationary_residual(params, grid, u)
    iters = 0

    def full_residual(u_, lam_):
        mu = chemical_potential(params, grid, u_)
        return np.concatenate([(mu - lam_).ravel(), [grid.mean(u_) - m]])

    F = full_residual(u, lam)
    while rnorm > tol:
        if iters >= max_iter:
            raise NoConvergence(f"stationary Newton stalled at residual {rnorm:.3e}")
        iters += 1
        H = chemical_potential_hessian(params, grid, u)
        J = sp.bmat([[H, -np.ones((n, 1))], [w[None, :], None]], format="csc")
        try:
            step = -splu(J).solve(F)
        except RuntimeError as exc:
            raise NoConvergence(f"singular stationary system: {exc}") from None
        du, dlam = step[:n].reshape(grid.shape), step[n]
        fnorm = np.linalg.norm(F)
        alpha = 1.0
        while alpha > 1e-10:
            trial = u + alpha * du
            if np.max(np.abs(trial)) <= 1.0 - margin:
                F_t = full_residual(trial, lam + alpha * dlam)
                if np.linalg.norm(F_t) < fnorm:
                    break
            alpha *= 0.5
        else:
            raise BarrierViolation("stationary Newton cannot keep |u| < 1")
        u, lam, F = trial, lam + alpha * dlam, F_t
        _, rnorm, _ = stationary_residual(params, grid, u)
    return u, iters


def steady_solve(params, grid, u_init, m=None, tol=1e-10, cfg=None, t_max=1e4,
                 max_newton=50):
    """Compute a member of the stationary set with mass ``m``.

    Phase one runs the flow until the equilibrium test fires or ``t_max``
    is reached; phase two polishes with Newton to ``tol``.
    """
    u = grid.check(u_init).copy()
    if m is None:
        m = grid.mean(u)
    if abs(grid.mean(u) - m) > 1e-10:
        raise InvalidSpec(f"initial mean {grid.mean(u):.12g} differs from m={m:.12g}")
    if not np.all(np.abs(u) < 1.0):
        raise BarrierViolation("initial state must satisfy |u| < 1")
    cfg = cfg or StepConfig(dt_init=1e-3, dt_max=1.0)

    _, rnorm, _ = stationary_residual(params, grid, u)
    flow_time = 0.0
    flow_energy = discrete_energy(params, grid, u).total
    if rnorm > tol:
        traj = advance_adaptive(params, grid, u, t_max, cfg)
        u, flow_time = traj.phi, traj.t
        flow_energy = discrete_energy(params, grid, u).total
    u, iters = _polish(params, grid, u, m, tol, max_newton, cfg.barrier_margin)

    r, rnorm, lam = stationary_residual(params, grid, u)
    return StationaryState(
        u=u,
        m=float(m),
        multiplier=lam,
        residual_norm=rnorm,
        separation=1.0 - grid.linf_norm(u),
        energy=discrete_energy(params, grid, u).total,
        newton_iters=iters,
        flow_time=flow_time,
        flow_energy=flow_energy,
    )


@dataclass
class MatanoReport:
    lower: float
    upper: float
    tol: float
    min_u: float
    max_u: float
    within: bool


def verify_matano(params, grid, state, tol=None):
    """Check ``lower - tol <= u <= upper + tol`` for the Matano interval of m.

    For states that are not local minimizers the outcome is informative
    only.
    """
    lower, upper = matano_bounds(params, state.m)
    if tol is None:
        tol = 1e-6 + max(grid.hx, grid.hy if grid.ny > 1 else 0.0) ** 2
    umin, umax = float(np.min(state.u)), float(np.max(state.u))
    return MatanoReport(lower, upper, tol, umin, umax,
                        bool(umin >= lower - tol and umax <= upper + tol))


def h2_surrogate(grid, v):
    """sqrt(||v||^2 + ||Dv||^2 + ||Lap_h v||^2), a discrete H^2 norm."""
    g = grid.gradient_faces(v)
    return float(np.sqrt(grid.l2_norm(v) ** 2 + grid.face_inner(g, g)
                         + grid.l2_norm(grid.laplacian(v)) ** 2))


def smooth_perturbation(grid, rng, modes=8):
    """Random mean-zero combination of the lowest cosine modes."""
    coef = np.zeros(grid.shape)
    ky = min(modes, grid.ny)
    coef[:ky, :modes] = rng.standard_normal((ky, min(modes, grid.nx)))
    coef[0, 0] = 0.0
    axes = (0, 1) if grid.ny > 1 else (1,)
    v = scipy.fft.idctn(coef, type=2, norm="ortho", axes=axes)
    return v - np.mean(v)


@dataclass
class ProbeReport:
    eta: float
    epsilon: float
    times: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    sup_distance: float = 0.0
    stayed_within: bool = True
    final_distance: float = 0.0


def stability_probe(params, grid, state, eta, T, cfg=None, epsilon=0.1, seed=0):
    """Perturb a stationary state by ``eta`` in the H^2 surrogate and evolve.

    Reports the running supremum of the surrogate distance to ``state.u``
    and whether it stayed below ``epsilon`` up to time ``T``.
    """
    if eta < 0:
        raise InvalidSpec("eta must be non-negative")
    cfg = cfg or StepConfig(dt_init=1e-3, dt_max=0.1)
    report = ProbeReport(eta=eta, epsilon=epsilon)
    if eta > 0:
        v = smooth_perturbation(grid, np.random.default_rng(seed))
        v *= eta / h2_surrogate(grid, v)
    else:
        v = grid.zeros()
    u0 = state.u + v
    report.times.append(0.0)
    report.distances.append(h2_surrogate(grid, v))

    def observe(t, phi, mu, outcome):
        report.times.append(t)
        report.distances.append(h2_surrogate(grid, phi - state.u))

    cfg_probe = replace(cfg, equilibrium_tol=0.0)
    advance_adaptive(params, grid, u0, T, cfg_probe, observe,
                     workspace=EllipticWorkspace(grid))
    report.sup_distance = max(report.distances)
    report.final_distance = report.distances[-1]
    report.stayed_within = report.sup_distance <= epsilon
    return report

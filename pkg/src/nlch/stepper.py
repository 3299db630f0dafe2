"""Implicit Euler time stepping with adaptive step control.

One step solves

    R(phi) = phi - phi_n - dt div_h(b(phi_n)_f D mu_h(phi)) = 0

by damped Newton. The mobility is lagged at ``phi_n``; the chemical
potential, including the logarithmic term, is fully implicit. Every Newton
correction is projected onto mean-zero fields, so the mean of ``phi`` never
moves beyond roundoff.

Energy decay is not proven for the discrete scheme. It is enforced a
posteriori: :func:`advance_adaptive` rejects and retries any step whose
energy rises above the configured slack.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from .elliptic import EllipticWorkspace, hminus1_norm
from .energy import (
    chemical_potential,
    chemical_potential_hessian,
    discrete_energy,
)
from .model import safeguarded_eval
from .errors import BarrierViolation, DtUnderflow, InvalidSpec, NewtonDiverged

__all__ = [
    "StepConfig",
    "StepOutcome",
    "Trajectory",
    "step_fixed",
    "advance_adaptive",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepConfig:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1e-1
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    energy_slack: float = 1e-10
    shrink: float = 0.5
    grow: float = 1.2
    barrier_margin: float = 1e-8
    equilibrium_tol: float = 1e-8
    equilibrium_steps: int = 5
    linear_solver: str = "auto"
    krylov_rtol: float = 1e-9

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise InvalidSpec("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.shrink < 1:
            raise InvalidSpec("shrink factor must lie in (0, 1)")
        if not self.grow > 1:
            raise InvalidSpec("grow factor must exceed 1")
        if not 0 < self.barrier_margin < 1e-2:
            raise InvalidSpec("barrier_margin must lie in (0, 1e-2)")
        if self.newton_tol <= 0 or self.newton_max_iter < 1:
            raise InvalidSpec("newton_tol > 0 and newton_max_iter >= 1 required")
        if self.linear_solver not in ("auto", "krylov", "direct"):
            raise InvalidSpec("linear_solver must be 'auto', 'krylov' or 'direct'")

    @classmethod
    def fixed(cls, dt, **kw):
        """Configuration that always uses the step ``dt``."""
        return cls(dt_init=dt, dt_min=dt, dt_max=dt, **kw)


@dataclass
class StepOutcome:
    accepted: bool
    dt_used: float
    newton_iters: int = 0
    energy_before: float = float("nan")
    energy_after: float = float("nan")
    dissipation_estimate: float = 0.0
    mass_drift: float = 0.0
    clamp_events: int = 0
    message: str = ""


class _Residual:
    """Residual and Jacobian of one implicit Euler step."""

    def __init__(self, params, grid, phi_n, dt, workspace):
        self.params = params
        self.grid = grid
        self.phi_n = phi_n
        self.dt = dt
        self.ws = workspace
        G = grid.gradient_matrix
        bf = params.coeff_b(grid.face_average_matrix @ phi_n.ravel())
        self.bf = bf
        # K = -div_h(b_f D .), symmetric positive semi-definite
        self.K = (G.T @ sp.diags(bf) @ G).tocsr()
        self.I = sp.identity(grid.size, format="csr")

    def mu(self, phi):
        return chemical_potential(self.params, self.grid, phi)

    def __call__(self, phi):
        mu = self.mu(phi)
        r = phi - self.phi_n + self.dt * (self.K @ mu.ravel()).reshape(self.grid.shape)
        return r, mu

    def jacobian(self, phi, frozen=False):
        H = chemical_potential_hessian(self.params, self.grid, phi, frozen)
        return (self.I + self.dt * (self.K @ H)).tocsc()

    def solve_direct(self, phi, r, frozen):
        try:
            return splu(self.jacobian(phi, frozen)).solve(r.ravel())
        except RuntimeError as exc:  # singular factorisation
            raise NewtonDiverged(f"singular Newton system: {exc}") from None

    def solve_krylov(self, phi, r, frozen, rtol):
        # J v = v + dt K H v, applied without forming the product
        grid, dt, K = self.grid, self.dt, self.K
        H = chemical_potential_hessian(self.params, grid, phi, frozen)
        n = grid.size
        J = LinearOperator((n, n), matvec=lambda v: v + dt * (K @ (H @ v)), dtype=float)

        # constant-coefficient model: 1 + dt b lam (a lam + c) in the cosine basis
        lam = -self.ws.eigenvalues
        a_bar = float(np.mean(self.params.coeff_a(phi)))
        b_bar = float(np.mean(self.bf)) if self.bf.size else 1.0
        c_bar = float(np.mean(safeguarded_eval(self.params, phi, 2)[0]))
        symbol = np.maximum(1.0 + dt * b_bar * lam * (a_bar * lam + c_bar), 0.5)
        shape = grid.shape
        axes = (0, 1) if grid.ny > 1 else (1,)

        def precond(v):
            vh = scipy.fft.dctn(v.reshape(shape), type=2, norm="ortho", axes=axes)
            return scipy.fft.idctn(vh / symbol, type=2, norm="ortho", axes=axes).ravel()

        M = LinearOperator((n, n), matvec=precond, dtype=float)
        rhs = r.ravel()
        x, info = gmres(J, rhs, rtol=rtol, atol=0.0, restart=60, maxiter=20, M=M)
        if info != 0 and np.linalg.norm(J @ x - rhs) > 1e-4 * np.linalg.norm(rhs):
            return self.solve_direct(phi, r, frozen)
        return x


def _norm(r):
    return float(np.max(np.abs(r)))


def step_fixed(params, grid, phi_n, dt, cfg=StepConfig(), workspace=None):
    """Advance one implicit Euler step of size ``dt``.

    Returns ``(phi_next, outcome)``. ``outcome.accepted`` only reports
    Newton convergence here; the energy test lives in
    :func:`advance_adaptive`.

    Raises
    ------
    NewtonDiverged
        No convergence within ``cfg.newton_max_iter`` iterations.
    BarrierViolation
        The line search could not keep the iterate inside the barrier.
    """
    phi_n = grid.check(phi_n)
    if not np.all(np.abs(phi_n) < 1.0):
        raise BarrierViolation("initial field touches the pure states")
    if dt <= 0:
        raise InvalidSpec("dt must be positive")
    lim = 1.0 - cfg.barrier_margin
    ws = workspace or EllipticWorkspace(grid)
    res = _Residual(params, grid, phi_n, dt, ws)
    scale = max(1.0, _norm(phi_n))
    tol = cfg.newton_tol * scale

    # banded 1D systems factor in O(n); 2D uses preconditioned GMRES
    direct = cfg.linear_solver == "direct" or (cfg.linear_solver == "auto" and grid.dim == 1)
    phi = phi_n.copy()
    r, mu = res(phi)
    rnorm = _norm(r)
    frozen = False
    iters = 0
    while rnorm > tol:
        if iters >= cfg.newton_max_iter:
            raise NewtonDiverged(
                f"Newton residual {rnorm:.3e} after {iters} iterations (dt={dt:.3e})"
            )
        iters += 1
        if direct:
            delta = -res.solve_direct(phi, r, frozen)
        else:
            delta = -res.solve_krylov(phi, r, frozen, cfg.krylov_rtol)
        delta = (delta - delta.mean()).reshape(grid.shape)
        if _norm(delta) <= tol:
            # correction below tolerance: the residual sits at its roundoff floor
            trial = phi + delta
            if np.max(np.abs(trial)) <= lim:
                phi = trial
                r, mu = res(phi)
                break

        alpha = 1.0
        inside_once = False
        while alpha > 1e-10:
            trial = phi + alpha * delta
            if np.max(np.abs(trial)) <= lim:
                inside_once = True
                r_t, mu_t = res(trial)
                if _norm(r_t) < rnorm:
                    break
            alpha *= 0.5
        else:
            if not inside_once:
                raise BarrierViolation(f"iterates leave (-1, 1) at dt={dt:.3e}")
            if frozen:
                raise NewtonDiverged(f"line search stalled at residual {rnorm:.3e}")
            # stalled: retry the iteration with the frozen-coefficient linearisation
            frozen = True
            continue
        phi, r, mu = trial, r_t, mu_t
        rnorm = _norm(r)
        frozen = False

    energy_after = discrete_energy(params, grid, phi)
    g = grid.gradient_faces(mu)
    dissip = float(np.sum(res.bf * g.ravel() ** 2) * grid.cell_volume)
    outcome = StepOutcome(
        accepted=True,
        dt_used=dt,
        newton_iters=iters,
        energy_after=energy_after.total,
        dissipation_estimate=dissip,
        mass_drift=grid.mean(phi) - grid.mean(phi_n),
        clamp_events=energy_after.clamped_cells,
    )
    return phi, outcome


@dataclass
class Trajectory:
    phi: np.ndarray
    t: float
    mu: np.ndarray
    accepted: int = 0
    rejected: int = 0
    equilibrium: bool = False
    outcomes: list = field(default_factory=list)
    min_separation: float = float("inf")


def _energy_ok(before, after, slack):
    # relative slack taken on |E|: energies are negative for most states
    return after <= before + slack * (abs(before) + 1.0)


def advance_adaptive(params, grid, phi0, t_end, cfg=StepConfig(), observer=None,
                     t0=0.0, workspace=None):
    """Integrate from ``t0`` to ``t_end`` with energy-checked adaptive steps.

    ``observer(t, phi, mu, outcome)`` is called after every accepted step and
    must not modify its arguments. The run stops early once the H^-1 norm of
    the discrete time derivative stays below ``cfg.equilibrium_tol`` for
    ``cfg.equilibrium_steps`` consecutive steps.
    """
    phi = grid.check(phi0).copy()
    if not np.all(np.abs(phi) < 1.0):
        raise BarrierViolation("initial field must satisfy |phi| < 1")
    ws = workspace or EllipticWorkspace(grid)
    t = float(t0)
    dt = cfg.dt_init
    energy = discrete_energy(params, grid, phi).total
    traj = Trajectory(phi=phi, t=t, mu=chemical_potential(params, grid, phi))
    traj.min_separation = 1.0 - grid.linf_norm(phi)
    quiet = 0
    span = max(abs(t_end), 1.0)

    while t_end - t > 1e-12 * span:
        step = min(dt, t_end - t)
        try:
            new, out = step_fixed(params, grid, phi, step, cfg, ws)
        except (NewtonDiverged, BarrierViolation) as exc:
            new, out = None, StepOutcome(False, step, message=str(exc))
        if out.accepted:
            out.energy_before = energy
            out.accepted = _energy_ok(energy, out.energy_after, cfg.energy_slack)
            if not out.accepted:
                out.message = "energy increase"
        if not out.accepted:
            traj.rejected += 1
            log.debug("rejected step dt=%.3e at t=%.6g: %s", step, t, out.message)
            dt = step * cfg.shrink
            if dt < cfg.dt_min:
                raise DtUnderflow(
                    f"dt={dt:.3e} below dt_min={cfg.dt_min:.3e} at t={t:.6g} ({out.message})"
                )
            continue

        diff = (new - phi) / step
        diff -= np.mean(diff)
        rate = hminus1_norm(ws, diff)
        phi, t, energy = new, t + step, out.energy_after
        out.mass_drift = grid.mean(phi) - grid.mean(phi0)
        mu = chemical_potential(params, grid, phi)
        traj.accepted += 1
        traj.outcomes.append(out)
        traj.min_separation = min(traj.min_separation, 1.0 - grid.linf_norm(phi))
        traj.phi, traj.t, traj.mu = phi, t, mu
        if observer is not None:
            observer(t, phi, mu, out)
        # only a full-size step can grow dt; a step clipped to t_end keeps it
        if step == dt:
            dt = min(dt * cfg.grow, cfg.dt_max)

        quiet = quiet + 1 if rate < cfg.equilibrium_tol else 0
        if quiet >= cfg.equilibrium_steps:
            traj.equilibrium = True
            break
    return traj

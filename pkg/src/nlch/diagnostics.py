"""Per-step observables and post-processing experiments."""

from __future__ import annotations

from dataclasses import astuple, dataclass, field, fields, replace

import numpy as np

from .elliptic import EllipticWorkspace, hminus1_norm, weighted_hminus1_norm
from .energy import chemical_potential, discrete_energy, dissipation
from .errors import InsufficientData, InvalidSpec
from .model import convex_part_eval
from .stepper import StepConfig, advance_adaptive

__all__ = [
    "TimeSeriesRecord",
    "SeriesRecorder",
    "LojasiewiczFit",
    "record_observables",
    "lojasiewicz_fit",
    "ContinuousDependenceReport",
    "continuous_dependence",
    "MeanMuReport",
    "mean_mu_control",
    "COLUMNS",
]


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    dt: float
    mass: float
    energy: float
    dissipation: float
    min_phi: float
    max_phi: float
    separation: float
    mu_mean: float
    mu_fluct_l2: float
    rate_hminus1: float
    newton_iters: int

    def as_row(self):
        return astuple(self)


COLUMNS = tuple(f.name for f in fields(TimeSeriesRecord))


def record_observables(params, grid, workspace, t, dt, phi, phi_prev, newton_iters=0):
    """Fill a :class:`TimeSeriesRecord` for the state ``phi`` at time ``t``."""
    phi = grid.check(phi)
    mu = chemical_potential(params, grid, phi)
    mu_mean = grid.mean(mu)
    lo, hi = float(np.min(phi)), float(np.max(phi))
    if dt > 0:
        rate = (phi - grid.check(phi_prev)) / dt
        rate = hminus1_norm(workspace, rate - np.mean(rate))
    else:
        rate = 0.0
    return TimeSeriesRecord(
        t=float(t),
        dt=float(dt),
        mass=grid.mean(phi),
        energy=discrete_energy(params, grid, phi).total,
        dissipation=dissipation(params, grid, phi, mu),
        min_phi=lo,
        max_phi=hi,
        separation=1.0 - max(abs(lo), abs(hi)),
        mu_mean=mu_mean,
        mu_fluct_l2=grid.l2_norm(mu - mu_mean),
        rate_hminus1=float(rate),
        newton_iters=int(newton_iters),
    )


class SeriesRecorder:
    """Observer for :func:`advance_adaptive` that collects records.

    ``callback`` receives each record as it is made (used for streaming CSV
    output).
    """

    def __init__(self, params, grid, phi0, workspace=None, callback=None):
        self.params = params
        self.grid = grid
        self.workspace = workspace or EllipticWorkspace(grid)
        self.records = []
        self.callback = callback
        self._prev = grid.check(phi0).copy()

    def __call__(self, t, phi, mu, outcome):
        rec = record_observables(self.params, self.grid, self.workspace, t,
                                 outcome.dt_used, phi, self._prev, outcome.newton_iters)
        self._prev = phi.copy()
        self.records.append(rec)
        if self.callback is not None:
            self.callback(rec)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


# -- Lojasiewicz exponent --------------------------------------------------------

@dataclass(frozen=True)
class LojasiewiczFit:
    theta_hat: float
    c_hat: float
    r_squared: float
    window: tuple
    max_violation: float
    satisfies_inequality: bool
    n_points: int


def _column(series, name):
    if isinstance(series, dict):
        return np.asarray(series[name], dtype=float)
    return np.array([getattr(r, name) for r in series], dtype=float)


def lojasiewicz_fit(series, E_inf, tail_fraction=0.2, min_points=20,
                    violation_tol=0.1):
    """Fit ``log(mu_fluct) = (1 - theta) log(E - E_inf) - log C`` on the tail.

    Only records with ``E - E_inf > 10 eps |E_inf|`` are usable; the fit runs
    on the last ``tail_fraction`` of them. The inequality
    ``mu_fluct >= (E - E_inf)^(1-theta) / C`` is taken as violated when a
    tail point lies more than ``violation_tol`` (natural-log units) below the
    fitted line.

    Raises
    ------
    InsufficientData
        Fewer than ``min_points`` usable records in the tail.
    """
    E = _column(series, "energy")
    g = _column(series, "mu_fluct_l2")
    gap = E - E_inf
    floor = 10.0 * np.finfo(float).eps * abs(E_inf)
    usable = np.flatnonzero((gap > floor) & (g > 0))
    n_tail = int(np.ceil(tail_fraction * usable.size))
    if n_tail < min_points:
        raise InsufficientData(
            f"{n_tail} usable tail records, at least {min_points} required"
        )
    idx = usable[-n_tail:]
    x = np.log(gap[idx])
    y = np.log(g[idx])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    worst = float(np.max(pred - y))
    return LojasiewiczFit(
        theta_hat=float(1.0 - slope),
        c_hat=float(np.exp(-intercept)),
        r_squared=r2,
        window=(int(idx[0]), int(idx[-1])),
        max_violation=max(worst, 0.0),
        satisfies_inequality=bool(worst <= violation_tol),
        n_points=int(idx.size),
    )


# -- continuous dependence ------------------------------------------------------

@dataclass
class ContinuousDependenceReport:
    times: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    initial_distance: float = 0.0
    max_abs_difference: list = field(default_factory=list)

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else 0.0


def continuous_dependence(params, grid, phi1_0, phi2_0, T, cfg=None, samples=10):
    """Evolve two data with one configuration and compare them over time.

    The distance is the weighted H^-1 norm of ``phi1 - phi2`` with the
    mobility frozen at ``phi1``. Ratios are taken against the initial
    distance at ``samples`` equally spaced times in (0, T].
    """
    phi1 = grid.check(phi1_0).copy()
    phi2 = grid.check(phi2_0).copy()
    if abs(grid.mean(phi1) - grid.mean(phi2)) > 1e-12:
        raise InvalidSpec("both initial data must carry the same mass")
    cfg = cfg or StepConfig(dt_init=1e-3, dt_max=1e-2)
    cfg = replace(cfg, equilibrium_tol=0.0)
    ws = EllipticWorkspace(grid)
    b = params.coeff_b

    def distance(p1, p2):
        d = p1 - p2
        d = d - np.mean(d)
        if not np.any(d):
            return 0.0
        return weighted_hminus1_norm(ws, p1, d, b)

    report = ContinuousDependenceReport(initial_distance=distance(phi1, phi2))
    t = 0.0
    for t_next in np.linspace(0.0, T, samples + 1)[1:]:
        phi1 = advance_adaptive(params, grid, phi1, t_next, cfg, t0=t, workspace=ws).phi
        phi2 = advance_adaptive(params, grid, phi2, t_next, cfg, t0=t, workspace=ws).phi
        t = float(t_next)
        d = distance(phi1, phi2)
        report.times.append(t)
        report.max_abs_difference.append(float(np.max(np.abs(phi1 - phi2))))
        report.ratios.append(d / report.initial_distance if report.initial_distance else 0.0)
    return report


# -- mean chemical potential ----------------------------------------------------

@dataclass(frozen=True)
class MeanMuReport:
    convex_l1: float
    mu_mean_abs: float
    grad_mu_l2: float
    ratio: float


def mean_mu_control(params, grid, phi, mu):
    """Report ``||F'(phi)||_L1``, ``|mean mu|`` and ``|mean mu| / (1 + ||D mu||)``."""
    phi, mu = grid.check(phi), grid.check(mu)
    lim = 1.0 - params.clamp_delta
    fp = convex_part_eval(params, np.clip(phi, -lim, lim), 1)
    l1 = float(np.sum(np.abs(fp)) * grid.cell_volume)
    g = grid.gradient_faces(mu)
    dmu = float(np.sqrt(grid.face_inner(g, g)))
    m = abs(grid.mean(mu))
    return MeanMuReport(l1, m, dmu, m / (1.0 + dmu))

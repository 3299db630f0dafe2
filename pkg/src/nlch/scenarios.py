"""Scenario presets and deterministic run orchestration."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import SeriesRecorder, continuous_dependence, lojasiewicz_fit
from .elliptic import EllipticWorkspace
from .energy import classic_chemical_potential
from .errors import NLCHError, ValidationError
from .io import (
    ExperimentBlock,
    GridBlock,
    InitialBlock,
    ModelBlock,
    OutputBlock,
    RunSpec,
    SteppingBlock,
    CsvSeriesWriter,
    read_snapshot,
    write_snapshot,
)
from .model import potential_eval
from .steady import stability_probe, stationary_residual, steady_solve, verify_matano
from .stepper import advance_adaptive

__all__ = ["PRESETS", "preset", "initial_field", "run_scenario", "RunResult"]

log = logging.getLogger(__name__)


PRESETS = {
    # phi = m exactly; stops at the equilibrium test
    "constant": RunSpec(
        scenario="constant",
        grid=GridBlock(dim=1, nx=32, Lx=1.0),
        initial=InitialBlock(kind="constant_noise", m=0.3, amplitude=0.0, seed=0),
        stepping=SteppingBlock(dt_init=1e-2, dt_max=0.1, t_end=10.0),
    ),
    "spinodal1d": RunSpec(
        scenario="spinodal1d",
        grid=GridBlock(dim=1, nx=256, Lx=32.0),
        initial=InitialBlock(kind="constant_noise", m=0.0, amplitude=1e-2, seed=1),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=0.05, t_end=60.0),
        output=OutputBlock(snapshot_every=200),
    ),
    "spinodal2d": RunSpec(
        scenario="spinodal2d",
        grid=GridBlock(dim=2, nx=64, ny=64, Lx=16.0, Ly=16.0),
        initial=InitialBlock(kind="constant_noise", m=0.0, amplitude=1e-2, seed=1),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=0.05, t_end=60.0),
        output=OutputBlock(snapshot_every=200),
    ),
    # unstable branch of the dispersion relation: k = 2 pi / 10
    "dispersion_check": RunSpec(
        scenario="dispersion_check",
        grid=GridBlock(dim=1, nx=64, Lx=10.0),
        initial=InitialBlock(kind="cosine_mode", m=0.0, amplitude=1e-4, modes=(2, 0)),
        stepping=SteppingBlock(dt_init=5e-3, dt_min=5e-3, dt_max=5e-3, t_end=5.0,
                               equilibrium_tol=0.0),
    ),
    "matano_constant": RunSpec(
        scenario="matano_constant",
        grid=GridBlock(dim=1, nx=64, Lx=8.0),
        initial=InitialBlock(kind="constant_noise", m=0.85, amplitude=1e-2, seed=2),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=1.0, t_end=1e4),
    ),
    "stability_probe": RunSpec(
        scenario="stability_probe",
        grid=GridBlock(dim=1, nx=64, Lx=16.0),
        initial=InitialBlock(kind="constant_noise", m=0.85, amplitude=0.0, seed=3),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=0.1, t_end=10.0),
        experiment=ExperimentBlock(eta=1e-3, epsilon=0.1),
    ),
    "contdep": RunSpec(
        scenario="contdep",
        model=ModelBlock(b_kind="polynomial", b_coeffs=(1.0, 0.0, -0.5)),
        grid=GridBlock(dim=2, nx=32, ny=32, Lx=8.0, Ly=8.0),
        initial=InitialBlock(kind="constant_noise", m=0.0, amplitude=0.1, seed=4),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=1e-2, t_end=1.0),
        experiment=ExperimentBlock(offset=1e-3, samples=5),
    ),
    "ls_tail": RunSpec(
        scenario="ls_tail",
        grid=GridBlock(dim=1, nx=256, Lx=4.0),
        initial=InitialBlock(kind="tanh_profile", m=0.0, amplitude=0.5, width=0.5),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=0.05, t_end=1e3),
        experiment=ExperimentBlock(fit_ls=True),
    ),
    "classic_regression": RunSpec(
        scenario="classic_regression",
        grid=GridBlock(dim=2, nx=32, ny=32, Lx=8.0, Ly=8.0),
        initial=InitialBlock(kind="constant_noise", m=0.0, amplitude=1e-2, seed=5),
        stepping=SteppingBlock(dt_init=1e-3, dt_max=0.05, t_end=10.0),
    ),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(
            f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"
        ) from None


def initial_field(spec):
    """Build the initial field described by ``spec.initial``.

    Returns ``(grid, phi0, t0)``; ``t0`` is non-zero only for snapshots.
    """
    ini = spec.initial
    if ini.kind == "from_snapshot":
        grid, values, t, _ = read_snapshot(ini.path)
        return grid, values, t
    grid = spec.grid.build()
    X, Y = grid.centers()
    if ini.kind == "constant_noise":
        noise = grid.zeros()
        if ini.amplitude:
            rng = np.random.default_rng(ini.seed)
            noise = ini.amplitude * rng.uniform(-1.0, 1.0, grid.shape)
            noise -= np.mean(noise)
        phi = ini.m + noise
    elif ini.kind == "cosine_mode":
        jx, jy = ini.modes
        mode = np.cos(jx * np.pi * X / grid.Lx)
        if grid.dim == 2:
            mode = mode * np.cos(jy * np.pi * Y / grid.Ly)
        phi = ini.m + ini.amplitude * mode
    else:  # tanh_profile
        prof = np.tanh((X - 0.5 * grid.Lx) / ini.width)
        phi = ini.m + ini.amplitude * (prof - np.mean(prof))
    if not np.all(np.abs(phi) < 1.0):
        raise ValidationError("initial field must satisfy |phi| < 1")
    return grid, phi, 0.0


@dataclass
class RunResult:
    csv_path: Path
    snapshots: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    summary_path: Path = None

    def summary_line(self):
        return " ".join(f"{k}={_short(v)}" for k, v in self.summary.items())


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


class _Snapshots:
    def __init__(self, directory, grid, every, m):
        self.dir = Path(directory)
        self.grid = grid
        self.every = every
        self.m = m
        self.paths = []
        self.count = 0
        self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, t, phi, tag=None):
        tag = tag or f"{len(self.paths):05d}"
        path = self.dir / f"snap_{tag}.bin"
        write_snapshot(path, self.grid, phi, t, self.m)
        self.paths.append(path)

    def observe(self, t, phi):
        self.count += 1
        if self.every and self.count % self.every == 0:
            self.write(t, phi)


def run_scenario(spec):
    """Execute ``spec`` and write its CSV, snapshots and summary.

    Output is a deterministic function of ``spec``. Partial CSV output is
    flushed if the run fails.
    """
    params = spec.model.build()
    cfg = spec.stepping.build()
    grid, phi0, t0 = initial_field(spec)
    m = grid.mean(phi0)
    ws = EllipticWorkspace(grid)
    result = RunResult(csv_path=Path(spec.output.csv_path))
    snaps = _Snapshots(spec.output.snapshot_dir, grid, spec.output.snapshot_every, m)
    summary = {"scenario": spec.scenario, "mass0": m}
    extra_observers = []

    if spec.scenario == "classic_regression":
        worst = [0.0]

        def compare(t, phi, mu, outcome):
            ref = classic_chemical_potential(params, grid, phi)
            worst[0] = max(worst[0], float(np.max(np.abs(mu - ref))))

        extra_observers.append(compare)

    writer = CsvSeriesWriter(result.csv_path)
    recorder = SeriesRecorder(params, grid, phi0, ws, callback=writer)

    def observer(t, phi, mu, outcome):
        recorder(t, phi, mu, outcome)
        snaps.observe(t, phi)
        for obs in extra_observers:
            obs(t, phi, mu, outcome)

    try:
        traj = advance_adaptive(params, grid, phi0, spec.stepping.t_end, cfg,
                                observer, t0=t0, workspace=ws)
    finally:
        writer.close()
    snaps.write(traj.t, traj.phi, tag="final")

    records = recorder.records
    _, res_norm, lam = stationary_residual(params, grid, traj.phi)
    summary.update(
        t_final=traj.t,
        accepted=traj.accepted,
        rejected=traj.rejected,
        equilibrium=traj.equilibrium,
        mass_drift=max((abs(r.mass - m) for r in records), default=0.0),
        min_separation=traj.min_separation,
        final_residual=res_norm,
        energy_final=records[-1].energy if records else float("nan"),
    )

    if spec.scenario == "classic_regression":
        summary["classic_max_deviation"] = worst[0]
    if spec.scenario == "dispersion_check":
        summary.update(_dispersion_summary(params, grid, spec, phi0, traj))
    if spec.scenario in ("matano_constant", "ls_tail") or spec.experiment.fit_ls:
        summary.update(_steady_summary(params, grid, spec, traj, records))
    if spec.scenario == "stability_probe":
        summary.update(_probe_summary(params, grid, spec, cfg, traj))
    if spec.scenario == "contdep":
        summary.update(_contdep_summary(params, grid, spec, cfg, phi0))

    result.snapshots = snaps.paths
    result.summary = summary
    result.summary_path = result.csv_path.with_suffix(".summary.json")
    result.summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


def _dispersion_summary(params, grid, spec, phi0, traj):
    jx, _ = spec.initial.modes
    X, _ = grid.centers()
    k = jx * np.pi / grid.Lx
    mode = np.cos(k * X)
    amp0 = grid.inner(phi0 - spec.initial.m, mode) / grid.inner(mode, mode)
    amp = grid.inner(traj.phi - spec.initial.m, mode) / grid.inner(mode, mode)
    sigma = -k**2 * (k**2 + potential_eval(params, spec.initial.m, 2))
    rate = float(np.log(amp / amp0) / (traj.t))
    return {"sigma_theory": float(sigma), "sigma_measured": rate,
            "sigma_rel_error": abs(rate / sigma - 1.0)}


def _steady_summary(params, grid, spec, traj, records):
    state = steady_solve(params, grid, traj.phi, tol=spec.experiment.steady_tol,
                         cfg=spec.stepping.build())
    out = {"E_inf": state.energy, "steady_residual": state.residual_norm,
           "steady_separation": state.separation,
           "constant_state": bool(np.ptp(state.u) <= 1e-8)}
    report = verify_matano(params, grid, state)
    out.update(matano_lower=report.lower, matano_upper=report.upper,
               matano_within=report.within)
    if spec.experiment.fit_ls:
        try:
            fit = lojasiewicz_fit(records, state.energy)
        except NLCHError as exc:
            out["ls_fit_error"] = str(exc)
        else:
            out.update(theta_hat=fit.theta_hat, ls_r_squared=fit.r_squared,
                       ls_satisfied=fit.satisfies_inequality)
    return out


def _probe_summary(params, grid, spec, cfg, traj):
    state = steady_solve(params, grid, traj.phi, tol=spec.experiment.steady_tol, cfg=cfg)
    rep = stability_probe(params, grid, state, spec.experiment.eta, spec.stepping.t_end,
                          cfg, epsilon=spec.experiment.epsilon,
                          seed=spec.initial.seed or 0)
    return {"probe_sup_distance": rep.sup_distance,
            "probe_final_distance": rep.final_distance,
            "probe_within": rep.stayed_within}


def _contdep_summary(params, grid, spec, cfg, phi0):
    rng = np.random.default_rng((spec.initial.seed or 0) + 1)
    direction = rng.uniform(-1.0, 1.0, grid.shape)
    direction -= np.mean(direction)
    direction /= np.max(np.abs(direction))
    other = phi0 + spec.experiment.offset * direction
    rep = continuous_dependence(params, grid, phi0, other, spec.stepping.t_end, cfg,
                                samples=spec.experiment.samples)
    return {"contdep_ratio_final": rep.ratios[-1], "contdep_ratio_max": rep.max_ratio}

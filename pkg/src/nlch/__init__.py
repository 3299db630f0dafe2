"""Finite-volume toolkit for the Cahn-Hilliard flow with a logarithmic
potential and concentration dependent gradient and mobility coefficients."""

from .diagnostics import (
    TimeSeriesRecord,
    SeriesRecorder,
    continuous_dependence,
    lojasiewicz_fit,
    mean_mu_control,
    record_observables,
)
from .elliptic import (
    EllipticWorkspace,
    hminus1_norm,
    solve_neumann_poisson,
    solve_weighted,
    weighted_hminus1_norm,
)
from .energy import (
    a_form_consistency,
    chemical_potential,
    chemical_potential_hessian,
    discrete_energy,
    dissipation,
)
from .errors import IoError, NLCHError, NumericalError, ValidationError
from .grid import FaceField, Grid
from .io import RunSpec, parse_config, format_config, read_series, read_snapshot, write_snapshot
from .model import (
    CoefficientFn,
    ModelParams,
    a_transform,
    a_transform_inv,
    matano_bounds,
    matano_points,
    potential_eval,
    validate_coefficient,
)
from .scenarios import PRESETS, run_scenario
from .steady import StationaryState, stability_probe, steady_solve, verify_matano
from .stepper import StepConfig, Trajectory, advance_adaptive, step_fixed

__version__ = "0.1.0"

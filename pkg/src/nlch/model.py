"""Physical model: Flory-Huggins potential, coefficient functions, A-transform.

The free energy density is ``a(phi)/2 |grad phi|^2 + Psi(phi)`` with

    Psi(s) = F(s) - theta0/2 s^2,
    F(s)   = theta/2 [(1+s) log(1+s) + (1-s) log(1-s)],

and ``0 < theta < theta0``. The diffusion coefficient ``a`` and the
mobility ``b`` are positive polynomials on [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import (
    DegeneratePotential,
    InvalidSpec,
    NonPositiveCoefficient,
    OutOfDomain,
)

__all__ = [
    "CoefficientFn",
    "ModelParams",
    "validate_coefficient",
    "potential_eval",
    "convex_part_eval",
    "safeguarded_eval",
    "a_transform",
    "a_transform_inv",
    "matano_points",
    "matano_bounds",
]

_MAX_DEGREE = 4
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class CoefficientFn:
    """Positive polynomial coefficient on [-1, 1] with certified bounds.

    Build instances with :func:`validate_coefficient`; the constructor does
    not re-check positivity.
    """

    kind: str
    coefficients: tuple
    min_on_interval: float
    max_on_interval: float

    def __call__(self, s):
        return self.derivative(s, 0)

    def derivative(self, s, order=1):
        c = np.asarray(self.coefficients, dtype=float)
        if order:
            c = P.polyder(c, order) if c.size > order else np.zeros(1)
        out = P.polyval(np.asarray(s, dtype=float), c)
        if np.ndim(out) == 0:
            return float(out)
        return out

    @property
    def is_constant(self):
        return len(self.coefficients) == 1

    @classmethod
    def constant(cls, value=1.0):
        return validate_coefficient("constant", [value])


def _trim(coefficients):
    c = list(coefficients)
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return c


def validate_coefficient(kind, coefficients):
    """Certify a constant or polynomial coefficient on [-1, 1].

    Coefficients are given constant term first. Bounds are obtained by
    evaluating the polynomial at the endpoints and at every real critical
    point inside the interval.

    Raises
    ------
    InvalidSpec
        Unknown kind, non-finite coefficients or degree above 4.
    NonPositiveCoefficient
        The polynomial is not bounded below by a positive number.
    """
    if kind not in ("constant", "polynomial"):
        raise InvalidSpec(f"unknown coefficient kind {kind!r}")
    try:
        c = [float(v) for v in coefficients]
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"coefficients must be real numbers: {exc}") from None
    if not c or not all(np.isfinite(c)):
        raise InvalidSpec("coefficients must be finite and non-empty")
    if kind == "constant" and len(c) != 1:
        raise InvalidSpec("a constant coefficient takes exactly one value")
    c = _trim(c)
    if len(c) - 1 > _MAX_DEGREE:
        raise InvalidSpec(f"polynomial degree {len(c) - 1} exceeds {_MAX_DEGREE}")

    candidates = [-1.0, 1.0]
    if len(c) > 2:
        for r in P.polyroots(P.polyder(c)):
            if abs(r.imag) <= 1e-12 and -1.0 <= r.real <= 1.0:
                candidates.append(float(r.real))
    values = P.polyval(np.array(candidates), c)
    lo, hi = float(values.min()), float(values.max())
    if lo <= 0.0:
        raise NonPositiveCoefficient(
            f"coefficient {c} has minimum {lo:g} <= 0 on [-1, 1]"
        )
    return CoefficientFn(kind, tuple(c), lo, hi)


@dataclass(frozen=True)
class ModelParams:
    """Model constants. Immutable and safe to share."""

    theta: float = 1.0
    theta0: float = 2.0
    coeff_a: CoefficientFn = field(default_factory=CoefficientFn.constant)
    coeff_b: CoefficientFn = field(default_factory=CoefficientFn.constant)
    clamp_delta: float = 1e-9

    def __post_init__(self):
        if not (self.theta > 0 and self.theta0 > 0):
            raise InvalidSpec("theta and theta0 must be positive")
        if not self.theta < self.theta0:
            raise DegeneratePotential("theta < theta0 required")
        if not 0.0 < self.clamp_delta < 1e-3:
            raise InvalidSpec("clamp_delta must lie in (0, 1e-3)")
        for name in ("coeff_a", "coeff_b"):
            fn = getattr(self, name)
            if fn.min_on_interval <= 0 or fn.min_on_interval > fn.max_on_interval:
                raise NonPositiveCoefficient(f"{name} bounds are not positive")

    @property
    def spinodal_point(self):
        """Positive root of Psi''."""
        return float(np.sqrt(1.0 - self.theta / self.theta0))


# -- potential -----------------------------------------------------------------

def _check_interior(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.abs(s) < 1.0):
        raise OutOfDomain("potential evaluated at |s| >= 1")
    return s


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _psi(params, s, order):
    th, th0 = params.theta, params.theta0
    if order == 0:
        val = 0.5 * th * ((1 + s) * np.log1p(s) + (1 - s) * np.log1p(-s))
        return val - 0.5 * th0 * s * s
    if order == 1:
        return th * np.arctanh(s) - th0 * s
    if order == 2:
        return th / ((1 - s) * (1 + s)) - th0
    raise InvalidSpec(f"potential order must be 0, 1 or 2, got {order}")


def potential_eval(params, s, order=0):
    """Psi, Psi' or Psi'' at points strictly inside (-1, 1)."""
    return _scalar(_psi(params, _check_interior(s), order))


def convex_part_eval(params, s, order=1):
    """F' or F'' of the logarithmic part."""
    s = _check_interior(s)
    if order == 1:
        return _scalar(params.theta * np.arctanh(s))
    if order == 2:
        return _scalar(params.theta / ((1 - s) * (1 + s)))
    raise InvalidSpec(f"convex part order must be 1 or 2, got {order}")


def safeguarded_eval(params, s, order=0):
    """Evaluate Psi after clamping into [-1 + delta, 1 - delta].

    Returns ``(value, clamped)``; ``clamped`` has the shape of ``s``.
    """
    s = np.asarray(s, dtype=float)
    lim = 1.0 - params.clamp_delta
    clamped = np.abs(s) > lim
    v = _psi(params, np.clip(s, -lim, lim), order)
    if np.ndim(v) == 0:
        return float(v), bool(clamped)
    return v, clamped


# -- A-transform ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _gauss(n):
    return np.polynomial.legendre.leggauss(n)


def _integrate_sqrt_a(coeff, s, panels, nodes=24):
    # Composite Gauss-Legendre for int_0^s sqrt(a), vectorised over s.
    x, w = _gauss(nodes)
    s = np.asarray(s, dtype=float)
    total = np.zeros_like(s)
    for p in range(panels):
        lo = s * (p / panels)
        hi = s * ((p + 1) / panels)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[..., None] + half[..., None] * x
        total = total + half * (np.sqrt(coeff(pts)) @ w)
    return total


def a_transform(params, s, tol=1e-12):
    """A(s) = integral of sqrt(a) from 0 to s, for s in [-1, 1]."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.abs(s) <= 1.0):
        raise OutOfDomain("A-transform defined on [-1, 1] only")
    coeff = params.coeff_a
    panels = 1
    prev = _integrate_sqrt_a(coeff, s, panels)
    while panels < 1024:
        panels *= 2
        cur = _integrate_sqrt_a(coeff, s, panels)
        if np.max(np.abs(cur - prev), initial=0.0) <= tol:
            # the coarser value keeps A(s) = c*s exact for constant a
            return _scalar(prev if coeff.is_constant else cur)
        prev = cur
    return _scalar(cur)


def a_transform_inv(params, y, tol=1e-12, max_iter=200):
    """Invert the A-transform with a bracketed Newton iteration."""
    y = np.asarray(y, dtype=float)
    lo_val, hi_val = a_transform(params, -1.0), a_transform(params, 1.0)
    if np.any(y < lo_val - tol) or np.any(y > hi_val + tol):
        raise OutOfDomain("value outside the range of the A-transform")
    coeff = params.coeff_a
    lo = np.full_like(y, -1.0)
    hi = np.ones_like(y)
    s = np.clip(y / np.sqrt(coeff.max_on_interval), -1.0, 1.0)
    for _ in range(max_iter):
        g = np.asarray(a_transform(params, s)) - y
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        step = s - g / np.sqrt(coeff(s))
        bad = (step <= lo) | (step >= hi)
        s_new = np.where(bad, 0.5 * (lo + hi), step)
        done = np.max(np.abs(s_new - s), initial=0.0) <= tol
        s = s_new
        if done:
            break
    return _scalar(s)


# -- Matano construction -------------------------------------------------------

def _bisect_increasing(f, lo, hi, target, tol=1e-12, max_iter=200):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def matano_points(params):
    """Return ``(s_star, alpha0, beta0)``.

    ``s_star`` is the positive inflection point of Psi. ``beta0`` is the
    point of (s_star, 1) where Psi' climbs back to its maximum over (-1, 0);
    ``alpha0`` is the point of (-1, -s_star) where Psi' equals its minimum
    over (0, 1). Both are found by bisection on the monotone outer branches.
    """
    if params.theta >= params.theta0:
        raise DegeneratePotential("theta < theta0 required")
    s_star = params.spinodal_point
    dpsi = lambda s: _psi(params, s, 1)  # noqa: E731
    psi_min = dpsi(s_star)
    psi_max = dpsi(-s_star)
    edge = np.nextafter(1.0, 0.0)
    beta0 = _bisect_increasing(dpsi, s_star, edge, psi_max)
    alpha0 = _bisect_increasing(dpsi, -edge, -s_star, psi_min)
    return s_star, float(alpha0), float(beta0)


def matano_bounds(params, m):
    """Interval ``(a, b)`` with ``a <= m <= b`` confining local minimizers."""
    if not -1.0 < m < 1.0:
        raise OutOfDomain("mass must lie in (-1, 1)")
    _, alpha0, beta0 = matano_points(params)
    if m <= alpha0 or m >= beta0:
        return float(m), float(m)
    return alpha0, beta0

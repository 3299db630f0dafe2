"""Neumann Poisson solves and the H^-1 type norms built on them.

``solve_neumann_poisson`` diagonalises the discrete Neumann Laplacian in the
type-II cosine basis (the cell-centred Neumann eigenvectors) and is exact up
to roundoff. ``solve_weighted`` handles ``-div(b(q) grad u) = f`` by
preconditioned conjugate gradients with the cosine solve as preconditioner.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

from .errors import NoConvergence, NonZeroMean

__all__ = [
    "EllipticWorkspace",
    "solve_neumann_poisson",
    "solve_weighted",
    "hminus1_norm",
    "weighted_hminus1_norm",
    "b_faces",
]

_MEAN_TOL = 1e-10


def _eigs_1d(n, h):
    # eigenvalues of the 1D discrete Neumann Laplacian (non-positive)
    return -(2.0 / h**2) * (1.0 - np.cos(np.pi * np.arange(n) / n))


class EllipticWorkspace:
    """Precomputed spectrum and solver settings for one grid.

    A workspace is not meant to be shared between threads during a solve.
    """

    def __init__(self, grid, rtol=1e-10, max_iter=None):
        self.grid = grid
        self.rtol = rtol
        self.max_iter = max_iter or int(10 * np.ceil(np.sqrt(grid.size)))
        lx = _eigs_1d(grid.nx, grid.hx)
        ly = _eigs_1d(grid.ny, grid.hy) if grid.ny > 1 else np.zeros(1)
        self.eigenvalues = ly[:, None] + lx[None, :]
        inv = np.zeros_like(self.eigenvalues)
        nz = self.eigenvalues != 0.0
        inv[nz] = -1.0 / self.eigenvalues[nz]
        self._inv_neg_lap = inv

    @property
    def smallest_eigenvalue(self):
        """Smallest non-zero eigenvalue of ``-Laplacian``."""
        vals = -self.eigenvalues
        return float(vals[vals > 0].min())

    def poincare_constant(self):
        """Grid constant C with ``||v||^2 <= C ||Dv||^2`` for mean-zero v."""
        return 1.0 / self.smallest_eigenvalue

    def apply_inverse(self, f):
        """Mean-zero solution of ``-Lap u = f`` without the mean check."""
        axes = (0, 1) if self.grid.ny > 1 else (1,)
        fh = scipy.fft.dctn(f, type=2, norm="ortho", axes=axes)
        fh *= self._inv_neg_lap
        return scipy.fft.idctn(fh, type=2, norm="ortho", axes=axes)


def _check_mean(grid, f):
    m = grid.mean(f)
    if abs(m) > _MEAN_TOL * max(grid.l2_norm(f), np.finfo(float).tiny):
        raise NonZeroMean(f"right-hand side has mean {m:.3e}; de-mean it first")


def solve_neumann_poisson(ws, f):
    """Mean-zero ``u`` with ``-Lap_h u = f`` and zero-flux boundaries."""
    grid = ws.grid
    f = grid.check(f)
    _check_mean(grid, f)
    return ws.apply_inverse(f)


def b_faces(grid, q, b):
    """Mobility on interior faces, evaluated at the face average of ``q``."""
    return grid.face_average(q).map(b)


def _weighted_apply(grid, bf, u):
    return -grid.divergence_cells(bf * grid.gradient_faces(u))


def solve_weighted(ws, q, f, b):
    """Mean-zero ``u`` with ``-div(b(q) grad u) = f``.

    Raises
    ------
    NoConvergence
        Relative residual still above ``ws.rtol`` after ``ws.max_iter``
        iterations.
    """
    grid = ws.grid
    f = grid.check(f)
    _check_mean(grid, f)
    if b.is_constant:
        return ws.apply_inverse(f) / b.coefficients[0]
    bf = b_faces(grid, q, b)
    scale = 1.0 / np.mean(np.concatenate([bf.x.ravel(), bf.y.ravel()]))

    fnorm = np.linalg.norm(f)
    u = np.zeros_like(f)
    if fnorm == 0.0:
        return u
    r = f.copy()
    z = ws.apply_inverse(r) * scale
    d = z.copy()
    rz = np.vdot(r, z)
    for _ in range(ws.max_iter):
        Ad = _weighted_apply(grid, bf, d)
        alpha = rz / np.vdot(d, Ad)
        u += alpha * d
        r -= alpha * Ad
        if np.linalg.norm(r) <= ws.rtol * fnorm:
            return u - np.mean(u)
        z = ws.apply_inverse(r) * scale
        rz_new = np.vdot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise NoConvergence(
        f"weighted solve: residual {np.linalg.norm(r) / fnorm:.2e} after {ws.max_iter} iterations"
    )


def hminus1_norm(ws, f):
    u = solve_neumann_poisson(ws, f)
    g = ws.grid.gradient_faces(u)
    return float(np.sqrt(ws.grid.face_inner(g, g)))


def weighted_hminus1_norm(ws, q, f, b):
    grid = ws.grid
    u = solve_weighted(ws, q, f, b)
    g = grid.gradient_faces(u)
    bf = b_faces(grid, q, b)
    return float(np.sqrt(grid.face_inner(bf * g, g)))

"""Uniform cell-centred grids with zero-flux boundaries.

Fields are plain numpy arrays of shape ``grid.shape == (ny, nx)`` so that
the C-order ravel is row-major with x fastest. Face quantities live only on
interior faces; the boundary flux is zero by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, InvalidSpec

__all__ = ["Grid", "FaceField"]


class FaceField(NamedTuple):
    """Values on interior x-faces, shape (ny, nx-1), and y-faces, (ny-1, nx)."""

    x: np.ndarray
    y: np.ndarray

    def ravel(self):
        return np.concatenate([self.x.ravel(), self.y.ravel()])

    def __mul__(self, other):
        if isinstance(other, FaceField):
            return FaceField(self.x * other.x, self.y * other.y)
        return FaceField(self.x * other, self.y * other)

    __rmul__ = __mul__

    def map(self, fn):
        return FaceField(fn(self.x), fn(self.y))


@dataclass(frozen=True)
class Grid:
    """1D or 2D uniform grid on ``[0, Lx] x [0, Ly]``.

    In 1D ``ny`` is 1 and the cell volume is ``hx`` alone.
    """

    dim: int
    nx: int
    ny: int = 1
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidSpec("grid dimension must be 1 or 2")
        if self.dim == 1 and self.ny != 1:
            raise InvalidSpec("a 1D grid has ny = 1")
        if self.nx < 4 or (self.dim == 2 and self.ny < 4):
            raise InvalidSpec("at least 4 cells per direction")
        if not (self.Lx > 0 and self.Ly > 0):
            raise InvalidSpec("side lengths must be positive")

    @classmethod
    def line(cls, n, L=1.0):
        return cls(1, n, 1, L, 1.0)

    @classmethod
    def square(cls, n, L=1.0):
        return cls(2, n, n, L, L)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def hx(self):
        return self.Lx / self.nx

    @property
    def hy(self):
        return self.Ly / self.ny

    @property
    def cell_volume(self):
        return self.hx * self.hy if self.dim == 2 else self.hx

    @property
    def volume(self):
        return self.Lx * self.Ly if self.dim == 2 else self.Lx

    @property
    def n_faces(self):
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    def centers(self):
        """Cell-centre coordinates ``(X, Y)`` as arrays of ``shape``."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        X, Y = np.meshgrid(x, y)
        return X, Y

    def check(self, field):
        field = np.asarray(field, dtype=float)
        if field.shape != self.shape:
            if field.size == self.size and field.ndim == 1:
                return field.reshape(self.shape)
            raise GridMismatch(f"field shape {field.shape} != grid shape {self.shape}")
        return field

    def zeros(self):
        return np.zeros(self.shape)

    def full(self, value):
        return np.full(self.shape, float(value))

    # -- face/cell operators ---------------------------------------------------

    def gradient_faces(self, field):
        f = self.check(field)
        return FaceField(np.diff(f, axis=1) / self.hx, np.diff(f, axis=0) / self.hy)

    def face_average(self, field):
        f = self.check(field)
        return FaceField(0.5 * (f[:, 1:] + f[:, :-1]), 0.5 * (f[1:, :] + f[:-1, :]))

    def divergence_cells(self, faces):
        fx, fy = faces
        out = np.zeros(self.shape)
        out[:, :-1] += fx
        out[:, 1:] -= fx
        out /= self.hx
        if self.ny > 1:
            out_y = np.zeros(self.shape)
            out_y[:-1, :] += fy
            out_y[1:, :] -= fy
            out += out_y / self.hy
        return out

    def laplacian(self, field):
        return self.divergence_cells(self.gradient_faces(field))

    def grad_sq_cells(self, field):
        """Cell value of |grad f|^2 from averaged squared face differences.

        Boundary cells see a single face per direction and use that value.
        """
        gx, gy = self.gradient_faces(field)
        out = _average_to_cells(gx**2, axis=1)
        if self.ny > 1:
            out = out + _average_to_cells(gy**2, axis=0)
        return out

    # -- reductions ------------------------------------------------------------

    def mean(self, field):
        return float(np.sum(self.check(field)) * self.cell_volume / self.volume)

    def inner(self, f, g):
        return float(np.sum(self.check(f) * self.check(g)) * self.cell_volume)

    def l2_norm(self, field):
        f = self.check(field)
        return float(np.sqrt(np.sum(f * f) * self.cell_volume))

    def linf_norm(self, field):
        return float(np.max(np.abs(self.check(field))))

    def face_inner(self, F, G):
        """Sum over interior faces of ``F*G*vol``; face volume = cell volume."""
        s = np.sum(F.x * G.x) + np.sum(F.y * G.y)
        return float(s * self.cell_volume)

    # -- sparse matrices for Jacobians -----------------------------------------

    @cached_property
    def gradient_matrix(self):
        """Sparse ``(n_faces, size)`` matrix of :meth:`gradient_faces`."""
        dx = _diff_matrix(self.nx) / self.hx
        blocks = [sp.kron(sp.identity(self.ny), dx)]
        if self.ny > 1:
            dy = _diff_matrix(self.ny) / self.hy
            blocks.append(sp.kron(dy, sp.identity(self.nx)))
        return sp.vstack(blocks).tocsr()

    @cached_property
    def face_average_matrix(self):
        ax = abs(_diff_matrix(self.nx)) * 0.5
        blocks = [sp.kron(sp.identity(self.ny), ax)]
        if self.ny > 1:
            ay = abs(_diff_matrix(self.ny)) * 0.5
            blocks.append(sp.kron(ay, sp.identity(self.nx)))
        return sp.vstack(blocks).tocsr()


def _diff_matrix(n):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))


def _average_to_cells(face_sq, axis):
    n_faces = face_sq.shape[axis]
    lead = np.take(face_sq, [0], axis=axis)
    tail = np.take(face_sq, [n_faces - 1], axis=axis)
    inner = 0.5 * (np.take(face_sq, range(0, n_faces - 1), axis=axis)
                   + np.take(face_sq, range(1, n_faces), axis=axis))
    return np.concatenate([lead, inner, tail], axis=axis)

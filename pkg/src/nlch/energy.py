"""Discrete free energy and its exact variational derivative.

The discrete energy is

    E_h(phi) = sum_faces a(phi_f) (D phi)^2 / 2 * vol + sum_cells Psi(phi) * vol

with ``phi_f`` the face average of the two adjacent cells. The chemical
potential is ``(1/vol) dE_h/dphi`` in closed form, so the two are consistent
to roundoff and not merely to truncation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import a_transform, safeguarded_eval

__all__ = [
    "EnergyBreakdown",
    "discrete_energy",
    "chemical_potential",
    "classic_chemical_potential",
    "chemical_potential_hessian",
    "dissipation",
    "a_form_consistency",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_part: float
    potential_part: float
    total: float
    clamped_cells: int = 0


def discrete_energy(params, grid, phi):
    phi = grid.check(phi)
    g = grid.gradient_faces(phi)
    af = grid.face_average(phi).map(params.coeff_a)
    # exactly rounded sums: energy gaps near equilibrium reach 1e-15
    dens = (af * g * g).ravel()
    grad = 0.5 * math.fsum(dens) * grid.cell_volume
    psi, clamped = safeguarded_eval(params, phi, 0)
    pot = math.fsum(psi.ravel()) * grid.cell_volume
    return EnergyBreakdown(grad, pot, grad + pot, int(np.count_nonzero(clamped)))


def _faces_to_cells_half(grid, faces):
    # each face hands half of its value to both neighbours
    fx, fy = faces
    out = np.zeros(grid.shape)
    out[:, :-1] += 0.5 * fx
    out[:, 1:] += 0.5 * fx
    if grid.ny > 1:
        out[:-1, :] += 0.5 * fy
        out[1:, :] += 0.5 * fy
    return out


def chemical_potential(params, grid, phi):
    """mu_h = -div_h(a_f D phi) + a'-term + Psi'(phi)."""
    phi = grid.check(phi)
    a = params.coeff_a
    g = grid.gradient_faces(phi)
    favg = grid.face_average(phi)
    mu = -grid.divergence_cells(favg.map(a) * g)
    if not a.is_constant:
        da = favg.map(lambda s: a.derivative(s, 1))
        mu += _faces_to_cells_half(grid, da * g * g * 0.5)
    mu += safeguarded_eval(params, phi, 1)[0]
    return mu


def classic_chemical_potential(params, grid, phi):
    """Constant-coefficient path ``-a0 Lap_h phi + Psi'(phi)``, for reference."""
    a0 = params.coeff_a(0.0)
    return -a0 * grid.laplacian(phi) + safeguarded_eval(params, grid.check(phi), 1)[0]


def chemical_potential_hessian(params, grid, phi, frozen_coefficient=False):
    """Sparse Jacobian of ``mu_h`` with respect to the flattened cell values.

    It is the Hessian of ``E_h`` divided by the cell volume and therefore
    symmetric. With ``frozen_coefficient`` the a' and a'' contributions are
    dropped, giving the Picard linearisation.
    """
    phi = grid.check(phi).ravel()
    G = grid.gradient_matrix
    M = grid.face_average_matrix
    a = params.coeff_a
    g = G @ phi
    s = M @ phi
    H = G.T @ sp.diags(a(s)) @ G
    if not (a.is_constant or frozen_coefficient):
        da = a.derivative(s, 1)
        d2a = a.derivative(s, 2)
        cross = G.T @ sp.diags(da * g) @ M
        H = H + cross + cross.T + M.T @ sp.diags(0.5 * d2a * g * g) @ M
    lim = 1.0 - params.clamp_delta
    d2psi = safeguarded_eval(params, phi, 2)[0]
    d2psi = np.where(np.abs(phi) > lim, 0.0, d2psi)
    return (H + sp.diags(d2psi)).tocsr()


def dissipation(params, grid, phi, mu):
    """sum_faces b(phi_f) (D mu)^2 vol, always non-negative."""
    g = grid.gradient_faces(mu)
    bf = grid.face_average(phi).map(params.coeff_b)
    return grid.face_inner(bf * g, g)


def a_form_consistency(params, grid, phi):
    """L2 distance between the A-form potential and :func:`chemical_potential`.

    The A-form is ``-sqrt(a(phi)) Lap_h A(phi) + Psi'(phi)``; both agree in
    the continuum and differ by O(h^2) on smooth fields.
    """
    phi = grid.check(phi)
    A = np.asarray(a_transform(params, phi))
    mu_a = -np.sqrt(params.coeff_a(phi)) * grid.laplacian(A)
    mu_a = mu_a + safeguarded_eval(params, phi, 1)[0]
    return grid.l2_norm(mu_a - chemical_potential(params, grid, phi))

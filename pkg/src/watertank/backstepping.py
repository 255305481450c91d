"""Truncated Fredholm transform and its residual diagnostics.

All operator actions are modal: the conservative operator is diagonal on
its basis, the damped target operator on its own, and the transform is the
dense change-of-basis matrix

    G[p, n] = <T f_n, dual_p> = -table[n] <I_nu, dual_p> / (mu~_p - mu_n),

assembled over the shared truncation window |p|, |n| <= N. The kernel PDE
is represented only through this coefficient system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from watertank.errors import RegimeError
from watertank.feedback import FeedbackLaw, virtual_profile
from watertank.model import GridFunction2, Params, simpson_weights
from watertank.spectral import Basis, _pairings

__all__ = [
    "TransformMatrix",
    "build_transform",
    "kn_relation_check",
    "tb_residual",
    "dirichlet_sum",
    "operator_equality_residual",
    "closed_loop_spectrum",
    "match_spectrum",
]


@dataclass
class TransformMatrix:
    """Backstepping transform in modal coordinates, with conditioning data."""

    params: Params
    n_list: np.ndarray
    entries: np.ndarray          # (P, N) = (target mode p, source mode n)
    eigenvalues: np.ndarray      # mu_n (source)
    target_eigenvalues: np.ndarray  # mu~_p
    i_nu_target_moments: np.ndarray  # <I_nu, dual_p>
    weighted_condition: float
    law: FeedbackLaw = None

    def index(self, n: int) -> int:
        return int(n) + (self.n_list.size - 1) // 2

    def apply(self, coeffs) -> np.ndarray:
        """Map source coefficients (over f_n) to target coefficients."""
        return self.entries @ np.asarray(coeffs)

    def column_norm_spread(self) -> float:
        """Spread of ||column n|| / (|table[n]| * ||resolvent profile||)."""
        prof = np.sqrt(
            np.sum(
                1.0
                / np.abs(
                    self.target_eigenvalues[:, None] - self.eigenvalues[None, :]
                )
                ** 2,
                axis=0,
            )
        )
        ratios = np.linalg.norm(self.entries, axis=0) / (
            np.abs(self.law.table) * prof
        )
        return float(np.max(ratios) / np.min(ratios))


def build_transform(params: Params, basisA: Basis, basisAtilde: Basis,
                    law: FeedbackLaw) -> TransformMatrix:
    """Assemble the transform over the shared truncation window.

    Requires the damped basis to carry its biorthogonal duals. Raises
    RegimeError when the spectral gap min |mu~_p - mu_n| falls below mu/2.
    """
    if basisAtilde.dual_values is None:
        raise ValueError("target basis must carry biorthogonal duals")
    if basisA.n_list.size != basisAtilde.n_list.size:
        raise ValueError("bases must share the truncation window")
    i_nu = virtual_profile(params, basisA)
    K = basisA.n_list.size
    grid = basisA.grid
    itld = _pairings(
        np.broadcast_to(i_nu.values, (K, 2, grid.size)),
        basisAtilde.dual_values, grid,
    )
    denom = basisAtilde.eigenvalues[:, None] - basisA.eigenvalues[None, :]
    gap = float(np.min(np.abs(denom)))
    if gap <= params.mu / 2.0:
        raise RegimeError(
            f"spectral gap {gap:.3g} <= mu/2; transform denominators unsafe"
        )
    G = -(law.table[None, :] * itld[:, None]) / denom
    wt = np.diag(1.0 + np.abs(basisAtilde.eigenvalues))
    wsrc = np.diag(1.0 / (1.0 + np.abs(basisA.eigenvalues)))
    sv = np.linalg.svd(wt @ G @ wsrc, compute_uv=False)
    cond = float(sv[0] / sv[-1])
    return TransformMatrix(
        params=params, n_list=basisA.n_list.copy(), entries=G,
        eigenvalues=basisA.eigenvalues.copy(),
        target_eigenvalues=basisAtilde.eigenvalues.copy(),
        i_nu_target_moments=itld, weighted_condition=cond, law=law,
    )


def tau_tilde_scalars(params: Params, basisAtilde: Basis) -> np.ndarray:
    """Diagonal action of the boundary-trace operator on the damped family.

    ``tau~ f~_p = conj(dual_p,1(0)) (1 - e^{-2 mu L}) / (2L) * f~_p`` in the
    1/(2L)-product convention.
    """
    phi1_0 = basisAtilde.dual_values[:, 0, 0]
    return (
        np.conj(phi1_0)
        * (1.0 - math.exp(-2.0 * params.mu * params.L))
        / (2.0 * params.L)
    )


def kn_relation_check(params: Params, basisA: Basis, basisAtilde: Basis,
                      n_values=None) -> dict:
    """Residuals of the resolvent-family identity f_n = f1(0) tau~ k_n.

    ``k_n = sum_p f~_p / (mu~_p - mu_n)`` truncated at the target window;
    the residual per n is the relative L2 error of the reconstruction.
    """
    if n_values is None:
        n_values = [n for n in basisA.n_list if abs(n) <= 3]
    taus = tau_tilde_scalars(params, basisAtilde)
    grid = basisA.grid
    w = simpson_weights(grid)
    out = {}
    for n in n_values:
        i = basisA.index(n)
        mu_n = basisA.eigenvalues[i]
        coef = taus / (basisAtilde.eigenvalues - mu_n)
        recon = basisA.f1_at_0[i] * np.tensordot(
            coef, basisAtilde.values, axes=(0, 0)
        )
        diff = recon - basisA.values[i]
        num = np.sum(w * (np.abs(diff[0]) ** 2 + np.abs(diff[1]) ** 2))
        den = np.sum(
            w * (np.abs(basisA.values[i, 0]) ** 2 + np.abs(basisA.values[i, 1]) ** 2)
        )
        out[int(n)] = float(math.sqrt(num / den))
    return out


def dirichlet_sum(basisA: Basis, g: GridFunction2, N: int = None) -> complex:
    """Partial sum ``sum_{|n|<=N} f_{n,1}(0) <f_n, g>``.

    For piecewise-C^1 g compatible with the reflection coupling this
    converges to ``conj(g_1(0) - g_2(0))/2`` (the Dirichlet jump mean).
    """
    n_list = basisA.n_list
    K = n_list.size
    vals = _pairings(
        basisA.values,
        np.broadcast_to(g.values, (K, 2, basisA.grid.size)),
        basisA.grid,
    )
    if N is not None:
        mask = np.abs(n_list) <= N
        return complex(np.sum(basisA.f1_at_0[mask] * vals[mask]))
    return complex(np.sum(basisA.f1_at_0 * vals))


def tb_residual(params: Params, transform: TransformMatrix,
                i_nu_moments: np.ndarray, m: int) -> complex:
    """Weak TB = B residual ``<T I_nu^(N), dual_m> - <I_nu, dual_m>``."""
    p = transform.index(m)
    lhs = complex(np.dot(transform.entries[p, :], i_nu_moments))
    return lhs - complex(transform.i_nu_target_moments[p])


def operator_equality_residual(params: Params, transform: TransformMatrix,
                               law: FeedbackLaw, alpha_coeffs) -> float:
    """Truncated residual of ``T(-A alpha + <alpha,F> I_nu) + A~ T alpha``.

    Measured in the weighted target norm ``sum (1+|mu~_p|^2)|.|^2``, all
    pieces computed modally.
    """
    a = np.asarray(alpha_coeffs, dtype=complex)
    u = law.apply(a)
    rhs = -transform.eigenvalues * a + u * law.i_nu_moments
    lhs_coeffs = transform.apply(rhs) + transform.target_eigenvalues * transform.apply(a)
    wt = 1.0 + np.abs(transform.target_eigenvalues) ** 2
    return float(math.sqrt(np.sum(wt * np.abs(lhs_coeffs) ** 2)))


def closed_loop_spectrum(params: Params, basisA: Basis, law: FeedbackLaw) -> np.ndarray:
    """Eigenvalues of the truncated closed-loop matrix, sorted by imag part.

    ``M[m, n] = -mu_n delta_mn + <I_nu, f_m> table[n]``; the infinite system
    has exactly the reflected target spectrum {-mu~_p}.
    """
    M = np.diag(-basisA.eigenvalues) + np.outer(law.i_nu_moments, law.table)
    eig = np.linalg.eigvals(M)
    return eig[np.argsort(eig.imag)]


def match_spectrum(eig: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Distance from each target to the nearest computed eigenvalue."""
    return np.array([np.min(np.abs(eig - t)) for t in targets])

"""Eigenstructure of the transport operators by shooting.

Four boundary-condition kinds are handled for the first-order system
``L f' + delta(x) J f = lambda f`` on [0, L] (``L = diag(1, -1)``,
``J = [[0, 1/3], [-1/3, 0]]``):

* conservative (reflection at both ends) and its adjoint;
* damped (reflection coefficient ``-exp(-2 mu L)`` at x=0) and its adjoint.

Both adjoint operators are minus the same differential expression on their
own domain, so a single forward integrator covers all four kinds: for the
adjoint kinds the shooting parameter ``lambda`` is minus the operator's
eigenvalue.

The integrator works on modulated variables ``g = (exp(-lambda x) f1,
exp(lambda x) f2)``, which removes the stiff oscillation; at gamma = 0 the
integration is exact to rounding, and for gamma > 0 the error scales like
``gamma * (2 |lambda| h)^4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from watertank.errors import NumericalError
from watertank.model import (
    GridFunction2,
    Params,
    delta,
    diagonal_weight,
    simpson_weights,
    uniform_grid,
)

__all__ = [
    "BcKind",
    "EigenPair",
    "Basis",
    "WModes",
    "shoot",
    "shoot_derivative_check",
    "find_eigenvalues",
    "eigenfunction",
    "build_basis",
    "w_modes",
    "kato_psi",
    "j0_overlap",
    "first_order_perturbation",
    "l1_boundary",
    "reference_mode",
    "gram_matrix",
]


class BcKind(Enum):
    CONSERVATIVE = "conservative"
    CONSERVATIVE_ADJOINT = "conservative_adjoint"
    DAMPED = "damped"
    DAMPED_ADJOINT = "damped_adjoint"


_ADJOINT_KINDS = (BcKind.CONSERVATIVE_ADJOINT, BcKind.DAMPED_ADJOINT)


def _left_seed(kind: BcKind, params: Params) -> np.ndarray:
    muL = params.mu * params.L
    if kind in (BcKind.CONSERVATIVE, BcKind.CONSERVATIVE_ADJOINT):
        return np.array([1.0, -1.0], dtype=complex)
    if kind is BcKind.DAMPED:
        return np.array([-math.exp(-2.0 * muL), 1.0], dtype=complex)
    if kind is BcKind.DAMPED_ADJOINT:
        return np.array([-math.exp(2.0 * muL), 1.0], dtype=complex)
    raise ValueError(kind)


def _ode_lambda(kind: BcKind, eigenvalue):
    """Shooting parameter for a given operator eigenvalue."""
    return -eigenvalue if kind in _ADJOINT_KINDS else eigenvalue


def _seed_eigenvalues(kind: BcKind, params: Params, n_list) -> np.ndarray:
    """Unperturbed operator eigenvalues used as root seeds."""
    base = 1j * math.pi * np.asarray(n_list, dtype=float) / params.L
    if kind in (BcKind.CONSERVATIVE,):
        return base
    if kind is BcKind.CONSERVATIVE_ADJOINT:
        return np.conj(base)
    if kind is BcKind.DAMPED:
        return params.mu + base
    if kind is BcKind.DAMPED_ADJOINT:
        return params.mu + np.conj(base)
    raise ValueError(kind)


def _integrate(params: Params, lams, seed, substeps=2, store=False):
    """Batch RK4 integration of the modulated shooting system.

    Parameters
    ----------
    lams : array of complex
        Shooting parameters (one integration per entry).
    seed : complex 2-vector
        Left boundary values (f1(0), f2(0)), shared by the batch.
    store : bool
        If True, also return f sampled on the params grid, shape (K, 2, nx).

    Returns
    -------
    residuals : array (K,)
        ``f1(L) + f2(L)`` per batch entry.
    values : array (K, 2, nx), only if store.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    K = lams.size
    nx = params.grid_points
    nsteps = (nx - 1) * substeps
    h = params.L / nsteps
    # stage abscissae: step endpoints and midpoints
    xs = np.linspace(0.0, params.L, 2 * nsteps + 1)
    c = -np.asarray(delta(params, xs)) / 3.0
    E = np.exp(2.0 * np.outer(xs, lams))  # e^{2 lam x}, (S, K)
    CEP = c[:, None] * E
    CEM = c[:, None] / E

    g1 = np.full(K, seed[0], dtype=complex)
    g2 = np.full(K, seed[1], dtype=complex)
    if store:
        out = np.empty((K, 2, nx), dtype=complex)
        out[:, 0, 0] = g1
        out[:, 1, 0] = g2

    for k in range(nsteps):
        i0 = 2 * k
        a1 = CEM[i0] * g2
        b1 = CEP[i0] * g1
        t1 = g1 + 0.5 * h * a1
        t2 = g2 + 0.5 * h * b1
        a2 = CEM[i0 + 1] * t2
        b2 = CEP[i0 + 1] * t1
        t1 = g1 + 0.5 * h * a2
        t2 = g2 + 0.5 * h * b2
        a3 = CEM[i0 + 1] * t2
        b3 = CEP[i0 + 1] * t1
        t1 = g1 + h * a3
        t2 = g2 + h * b3
        a4 = CEM[i0 + 2] * t2
        b4 = CEP[i0 + 2] * t1
        g1 = g1 + (h / 6.0) * (a1 + 2.0 * (a2 + a3) + a4)
        g2 = g2 + (h / 6.0) * (b1 + 2.0 * (b2 + b3) + b4)
        if store and (k + 1) % substeps == 0:
            j = (k + 1) // substeps
            out[:, 0, j] = g1
            out[:, 1, j] = g2

    eL = np.exp(lams * params.L)
    residuals = g1 * eL + g2 / eL
    if not store:
        return residuals
    # back to f variables: f1 = e^{lam x} g1, f2 = e^{-lam x} g2
    grid = np.linspace(0.0, params.L, nx)
    Eg = np.exp(np.outer(lams, grid))  # (K, nx)
    out[:, 0, :] *= Eg
    out[:, 1, :] /= Eg
    return residuals, out


def shoot(params: Params, kind: BcKind, lam, substeps=2) -> complex:
    """Boundary residual ``f1(L) + f2(L)`` of the shooting solution.

    Integrates from x=0 with the kind's left seed. Roots in ``lam`` are the
    operator eigenvalues for the direct kinds, and minus the operator
    eigenvalues for the adjoint kinds.
    """
    res = _integrate(params, [lam], _left_seed(kind, params), substeps=substeps)
    return complex(res[0])


def shoot_derivative_check(params: Params, kind: BcKind, lam, h=1e-6):
    """Residual derivatives along the real and imaginary directions.

    For a holomorphic residual these agree (Cauchy-Riemann); returns the
    pair (d/d_real, d/d_imag / i).
    """
    r = lambda z: shoot(params, kind, z)
    d_re = (r(lam + h) - r(lam - h)) / (2.0 * h)
    d_im = (r(lam + 1j * h) - r(lam - 1j * h)) / (2j * h)
    return d_re, d_im


def find_eigenvalues(params: Params, kind: BcKind, n_range, substeps=2):
    """Operator eigenvalues for the requested mode indices.

    Secant refinement in the complex plane, seeded at the unperturbed
    eigenvalues (``i pi n / L``, shifted by ``mu`` for the damped kinds).
    Raises NumericalError on non-convergence or root collision.
    """
    n_list = np.asarray(list(n_range), dtype=int)
    seeds_op = _seed_eigenvalues(kind, params, n_list)
    lam0 = np.asarray([_ode_lambda(kind, s) for s in seeds_op], dtype=complex)
    seed_vec = _left_seed(kind, params)
    tol = min(params.ode_tol, 1e-10)

    lam1 = lam0 + 0.02j / params.L
    r0 = _integrate(params, lam0, seed_vec, substeps=substeps)
    r1 = _integrate(params, lam1, seed_vec, substeps=substeps)
    # freeze entries whose seed already solves the boundary condition
    done = np.abs(r0) < 1e-13
    lam1 = np.where(done, lam0, lam1)
    r1 = np.where(done, r0, r1)

    lam_prev, r_prev = lam0.copy(), r0.copy()
    lam_cur, r_cur = lam1.copy(), r1.copy()
    max_step = 0.3 / params.L  # trust region: roots sit within 1/(2L) of seeds
    for _ in range(14):
        dr = r_cur - r_prev
        safe = np.abs(dr) > 0
        step = np.where(safe, r_cur * (lam_cur - lam_prev) / np.where(safe, dr, 1.0), 0.0)
        big = np.abs(step) > max_step
        step = np.where(big, step * max_step / np.where(big, np.abs(step), 1.0), step)
        lam_new = np.where(done, lam_cur, lam_cur - step)
        moved = np.abs(lam_new - lam_cur)
        done = done | (moved < tol)
        if np.all(done):
            lam_cur = lam_new
            break
        r_new = _integrate(params, lam_new, seed_vec, substeps=substeps)
        lam_prev, r_prev = lam_cur, r_cur
        lam_cur, r_cur = lam_new, np.where(done, r_cur, r_new)
    else:
        bad = n_list[~done]
        raise NumericalError(f"eigenvalue search did not converge for n in {bad.tolist()}")

    roots = lam_cur
    # collision guard: the spectrum is simple in-regime
    order = np.argsort(roots.imag)
    gaps = np.abs(np.diff(roots[order]))
    if roots.size > 1 and np.min(gaps) < 1e-8:
        i = int(np.argmin(gaps))
        a, b = n_list[order[i]], n_list[order[i + 1]]
        raise NumericalError(
            f"root collision between modes {a} and {b}: spectrum not simple at these parameters"
        )
    eigs = -roots if kind in _ADJOINT_KINDS else roots
    drift = np.abs(eigs - seeds_op)
    if np.any(drift > 0.5 / params.L):
        bad = n_list[drift > 0.5 / params.L]
        raise NumericalError(
            f"eigenvalue drift exceeds 1/(2L) for n in {bad.tolist()}; gamma outside the perturbative regime"
        )
    return eigs


@dataclass
class EigenPair:
    """One eigenvalue/eigenfunction with residual diagnostics."""

    eigenvalue: complex
    mode_index: int
    func: GridFunction2
    boundary: tuple
    bc_residual: float
    ode_residual: float


@dataclass
class Basis:
    """Ordered eigenfamily for ``n in [-N, N]``, optionally with duals.

    ``values`` has shape (K, 2, nx) in mode order ``n_list``. For the damped
    kind, ``dual_values`` holds the biorthogonal family (adjoint
    eigenfunctions, rescaled so the cross-Gram is the identity).
    """

    params: Params
    kind: BcKind
    n_list: np.ndarray
    eigenvalues: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    normalization: str
    dual_values: np.ndarray = None
    dual_eigenvalues: np.ndarray = None
    bc_residuals: np.ndarray = None
    ode_residuals: np.ndarray = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {int(n): i for i, n in enumerate(self.n_list)}

    def index(self, n: int) -> int:
        return self._index[int(n)]

    def eigenvalue(self, n: int) -> complex:
        return complex(self.eigenvalues[self.index(n)])

    def func(self, n: int) -> GridFunction2:
        return GridFunction2(self.grid, self.values[self.index(n)])

    def dual(self, n: int) -> GridFunction2:
        if self.dual_values is None:
            # conservative family is orthonormal, hence self-dual
            return self.func(n)
        return GridFunction2(self.grid, self.dual_values[self.index(n)])

    @property
    def f1_at_0(self):
        return self.values[:, 0, 0]

    @property
    def f1_at_L(self):
        return self.values[:, 0, -1]


def gram_matrix(a_values, b_values, grid, prefactor=None, conjugate=True):
    """Pairing matrix ``G[i, j] = <a_i, b_j>`` under Simpson quadrature.

    ``prefactor`` defaults to 1/(2L); pass 1.0 for the plain L2 pairing and
    ``conjugate=False`` for the bilinear one.
    """
    w = simpson_weights(grid)
    L = grid[-1]
    if prefactor is None:
        prefactor = 1.0 / (2.0 * L)
    b1 = b_values[:, 0, :]
    b2 = b_values[:, 1, :]
    if conjugate:
        b1, b2 = np.conj(b1), np.conj(b2)
    G = (a_values[:, 0, :] * w) @ b1.T + (a_values[:, 1, :] * w) @ b2.T
    return prefactor * G


def _pairings(a_values, b_values, grid, prefactor=None, conjugate=True):
    """Diagonal of :func:`gram_matrix` without forming the full matrix."""
    w = simpson_weights(grid)
    L = grid[-1]
    if prefactor is None:
        prefactor = 1.0 / (2.0 * L)
    b1 = b_values[:, 0, :]
    b2 = b_values[:, 1, :]
    if conjugate:
        b1, b2 = np.conj(b1), np.conj(b2)
    vals = np.sum((a_values[:, 0, :] * b1 + a_values[:, 1, :] * b2) * w, axis=1)
    return prefactor * vals


def reference_mode(params: Params, kind: BcKind, n: int, grid=None) -> GridFunction2:
    """Unperturbed (gamma = 0) eigenfunctions in closed form.

    Conservative: ``(e^{i pi n x/L}, -e^{-i pi n x/L})``. Damped and its
    adjoint: the boundary-damped exponential pair with rate ``mu + i pi n/L``
    (resp. ``-mu + i pi n/L``).
    """
    if grid is None:
        grid = uniform_grid(params)
    x = grid
    L = params.L
    if kind in (BcKind.CONSERVATIVE, BcKind.CONSERVATIVE_ADJOINT):
        up = np.exp(1j * math.pi * n * x / L)
        return GridFunction2(grid, np.stack([up, -1.0 / up]))
    if kind is BcKind.DAMPED:
        rate = params.mu + 1j * math.pi * n / L
    else:
        rate = -params.mu + 1j * math.pi * n / L
    return GridFunction2(
        grid, np.stack([np.exp(rate * x), -np.exp(rate * (2 * L - x))])
    )


def _store_modes(params, kind, ode_lams, substeps):
    """Integrate at converged roots and return values + error estimates."""
    seed = _left_seed(kind, params)
    res_f, vals_f = _integrate(params, ode_lams, seed, substeps=substeps, store=True)
    _, vals_c = _integrate(
        params, ode_lams, seed, substeps=max(1, substeps // 2), store=True
    )
    scale = np.max(np.abs(vals_f), axis=(1, 2))
    ode_err = np.max(np.abs(vals_f - vals_c), axis=(1, 2)) / scale
    return vals_f, np.abs(res_f) / scale, ode_err


def eigenfunction(params: Params, kind: BcKind, eigenvalue, mode_index=None,
                  substeps=2) -> EigenPair:
    """Re-integrate at a converged eigenvalue and normalize.

    Conservative kinds are normalized to unit L2 norm (1/(2L)-weighted
    product) with ``f1(0)`` real positive; damped kinds keep the
    perturbation normalization ``<f, ref_dual> = 1`` against the closed-form
    gamma = 0 reference of the matching mode.
    """
    lam = _ode_lambda(kind, eigenvalue)
    vals, bc_res, ode_err = _store_modes(params, kind, [lam], substeps)
    v = vals[0]
    grid = uniform_grid(params)
    if mode_index is None:
        mode_index = int(round(eigenvalue.imag * params.L / math.pi))
        if kind is BcKind.CONSERVATIVE_ADJOINT:
            mode_index = -mode_index
        if kind is BcKind.DAMPED_ADJOINT:
            mode_index = -mode_index
    f = GridFunction2(grid, v)
    if kind in (BcKind.CONSERVATIVE, BcKind.CONSERVATIVE_ADJOINT):
        w = simpson_weights(grid)
        nrm = math.sqrt(
            float(np.sum(w * (np.abs(v[0]) ** 2 + np.abs(v[1]) ** 2)))
            / (2.0 * params.L)
        )
        if nrm == 0.0:
            raise NumericalError("zero-norm eigenfunction")
        v = v / nrm
        phase = v[0, 0] / abs(v[0, 0])
        v = v / phase
    else:
        ref_kind = (
            BcKind.DAMPED_ADJOINT if kind is BcKind.DAMPED else BcKind.DAMPED
        )
        ref = reference_mode(params, ref_kind, mode_index, grid)
        if kind is BcKind.DAMPED:
            # <f, ref_dual> = 1 (linear slot)
            c = _pairings(v[None, :, :], ref.values[None, :, :], grid)[0]
            v = v / c
        else:
            # <ref_direct, f> = 1 (conjugate-linear slot)
            c = _pairings(ref.values[None, :, :], v[None, :, :], grid)[0]
            v = v * np.conj(1.0 / c)
    f = GridFunction2(grid, v)
    return EigenPair(
        eigenvalue=complex(eigenvalue),
        mode_index=mode_index,
        func=f,
        boundary=f.boundary(),
        bc_residual=float(bc_res[0]),
        ode_residual=float(ode_err[0]),
    )


def build_basis(params: Params, kind: BcKind, N=None, with_duals=True,
                substeps=2, check=True) -> Basis:
    """Assemble the eigenfamily for ``|n| <= N`` with invariant checks.

    Conservative: orthonormal family (Gram = identity to 1e-6), self-dual.
    Damped: functions continue the gamma = 0 family (38); duals come from
    the adjoint operator, continue (39), and are rescaled so that
    ``<f_n, dual_m> = delta_nm`` exactly on the diagonal.
    """
    if N is None:
        N = params.n_modes
    n_list = np.arange(-N, N + 1)
    grid = uniform_grid(params)
    eigs = find_eigenvalues(params, kind, n_list, substeps=substeps)
    ode_lams = np.asarray([_ode_lambda(kind, e) for e in eigs])
    vals, bc_res, ode_err = _store_modes(params, kind, ode_lams, substeps)

    if kind in (BcKind.CONSERVATIVE, BcKind.CONSERVATIVE_ADJOINT):
        w = simpson_weights(grid)
        nrm = np.sqrt(
            np.sum(w * (np.abs(vals[:, 0, :]) ** 2 + np.abs(vals[:, 1, :]) ** 2), axis=1)
            / (2.0 * params.L)
        )
        vals = vals / nrm[:, None, None]
        phases = vals[:, 0, 0] / np.abs(vals[:, 0, 0])
        vals = vals / phases[:, None, None]
        basis = Basis(
            params=params, kind=kind, n_list=n_list, eigenvalues=eigs,
            grid=grid, values=vals, normalization="orthonormal",
            bc_residuals=bc_res, ode_residuals=ode_err,
        )
        if check:
            G = gram_matrix(vals, vals, grid)
            dev = np.abs(G - np.eye(n_list.size))
            if np.max(dev) > 1e-6:
                i, j = np.unravel_index(np.argmax(dev), dev.shape)
                raise NumericalError(
                    f"orthonormality failure: |<f_{n_list[i]}, f_{n_list[j]}> - delta| = {np.max(dev):.2e}"
                )
        return basis

    if kind is BcKind.DAMPED_ADJOINT:
        refs = np.stack(
            [reference_mode(params, BcKind.DAMPED, n, grid).values for n in n_list]
        )
        # normalize <ref_direct_n, phi_n> = 1 (phi sits in the conjugate-linear slot)
        c = _pairings(refs, vals, grid)
        vals = vals * np.conj(1.0 / c)[:, None, None]
        return Basis(
            params=params, kind=kind, n_list=n_list, eigenvalues=eigs,
            grid=grid, values=vals, normalization="kato",
            bc_residuals=bc_res, ode_residuals=ode_err,
        )

    # DAMPED: perturbation normalization against the gamma=0 duals
    refs_dual = np.stack(
        [reference_mode(params, BcKind.DAMPED_ADJOINT, n, grid).values for n in n_list]
    )
    c = _pairings(vals, refs_dual, grid)
    vals = vals / c[:, None, None]
    basis = Basis(
        params=params, kind=kind, n_list=n_list, eigenvalues=eigs,
        grid=grid, values=vals, normalization="kato",
        bc_residuals=bc_res, ode_residuals=ode_err,
    )
    if with_duals:
        dual = build_basis(
            params, BcKind.DAMPED_ADJOINT, N, substeps=substeps, check=False
        )
        q = _pairings(vals, dual.values, grid)  # <f_n, phi_n>
        dual_vals = dual.values * np.conj(1.0 / q)[:, None, None]
        basis.dual_values = dual_vals
        basis.dual_eigenvalues = dual.eigenvalues
        basis.normalization = "biorthonormal"
        if check:
            G = gram_matrix(vals, dual_vals, grid)
            dev = np.abs(G - np.eye(n_list.size))
            if np.max(dev) > 1e-6:
                i, j = np.unravel_index(np.argmax(dev), dev.shape)
                raise NumericalError(
                    f"biorthonormality failure at ({n_list[i]}, {n_list[j]}): {np.max(dev):.2e}"
                )
    return basis


@dataclass
class WModes:
    """Kato-normalized eigenfamilies of the w-system and its adjoint.

    ``psi`` solves the system with diagonal-inclusive coupling; ``chi`` the
    adjoint one. Both continue the explicit gamma = 0 exponentials, with
    ``<psi_n(gamma), chi_n^(0)> = 1`` and ``<psi_n^(0), chi_n(gamma)> = 1``
    in the bilinear 1/(2L) pairing.
    """

    params: Params
    n_list: np.ndarray
    eigenvalues: np.ndarray
    grid: np.ndarray
    psi: np.ndarray
    chi: np.ndarray

    def index(self, n):
        return int(n) + (self.n_list.size - 1) // 2

    def psi_func(self, n) -> GridFunction2:
        return GridFunction2(self.grid, self.psi[self.index(n)])

    def chi_func(self, n) -> GridFunction2:
        return GridFunction2(self.grid, self.chi[self.index(n)])


def w_modes(params: Params, basis: Basis) -> WModes:
    """Derive the w-system families from the conservative basis.

    The diagonal weight ``exp(int delta)`` intertwines the two systems:
    ``psi_n = exp(-int delta) f_n`` up to scale, and the adjoint family is
    ``chi_n = exp(+int delta) conj(f_n)`` up to scale.
    """
    if basis.kind is not BcKind.CONSERVATIVE:
        raise ValueError("w_modes requires the conservative basis")
    grid = basis.grid
    ew = diagonal_weight(params, grid)
    psi_raw = basis.values / ew[None, None, :]
    chi_raw = np.conj(basis.values) * ew[None, None, :]
    refs = np.stack(
        [
            reference_mode(params, BcKind.CONSERVATIVE, n, grid).values
            for n in basis.n_list
        ]
    )
    # Kato scales: <psi_raw, psi_n^(0)> sesquilinear = <psi_raw, chi_n^(0)> bilinear
    c_psi = _pairings(psi_raw, refs, grid)
    psi = psi_raw / c_psi[:, None, None]
    c_chi = _pairings(chi_raw, refs, grid, conjugate=False)
    chi = chi_raw / c_chi[:, None, None]
    return WModes(
        params=params, n_list=basis.n_list.copy(),
        eigenvalues=basis.eigenvalues.copy(), grid=grid, psi=psi, chi=chi,
    )


def kato_psi(params: Params, basis: Basis, n: int) -> GridFunction2:
    """Kato-normalized w-system eigenfunction ``psi_n(gamma)`` for one mode."""
    grid = basis.grid
    ew = diagonal_weight(params, grid)
    raw = basis.values[basis.index(n)] / ew[None, :]
    ref = reference_mode(params, BcKind.CONSERVATIVE, n, grid)
    c = _pairings(raw[None], ref.values[None], grid)[0]
    return GridFunction2(grid, raw / c)


def j0_overlap(n: int, k: int) -> complex:
    """Closed-form ``<J0 psi_n^(0), psi_k^(0)>``; zero when |n| = |k|."""
    if abs(n) == abs(k):
        return 0.0 + 0.0j
    return (
        ((-1.0) ** (n + k) - 1.0)
        / (1j * math.pi)
        * (1.0 / (n - k) + (1.0 / 3.0) / (n + k))
    )


def first_order_perturbation(params: Params, n: int, K: int = 2000) -> GridFunction2:
    """First-order Kato correction ``psi_n^(1)`` as a truncated mode series.

    ``psi_n^(1) = (3L/4) sum_{0 < |k-n| <= K} <J0 psi_n^(0), psi_k^(0)>
    / (i pi (k-n)) psi_k^(0)``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    grid = uniform_grid(params)
    L = params.L
    acc = np.zeros((2, grid.size), dtype=complex)
    ks = [k for k in range(n - K, n + K + 1) if k != n]
    coefs = np.array(
        [
            (3.0 * L / 4.0) * j0_overlap(n, k) / (1j * math.pi * (k - n))
            for k in ks
        ]
    )
    block = 256
    for i in range(0, len(ks), block):
        kk = np.array(ks[i : i + block], dtype=float)
        cc = coefs[i : i + block]
        up = np.exp(1j * math.pi * np.outer(kk, grid) / L)  # (b, nx)
        acc[0] += cc @ up
        acc[1] += cc @ (-1.0 / up)
    return GridFunction2(grid, acc)


def l1_boundary(params: Params, n: int, K: int = 2000) -> complex:
    """Boundary combination of ``psi_n^(1)``; zero for odd n.

    ``l1_n = psi^(1)_{n,1}(L) - psi^(1)_{n,1}(0) - psi^(1)_{n,2}(L)
    + psi^(1)_{n,2}(0)``, evaluated from the series (each basis mode
    contributes ``2((-1)^k - 1)``).
    """
    L = params.L
    total = 0.0 + 0.0j
    for k in range(n - K, n + K + 1):
        if k == n:
            continue
        coef = (3.0 * L / 4.0) * j0_overlap(n, k) / (1j * math.pi * (k - n))
        total += coef * 2.0 * ((-1.0) ** k - 1.0)
    return total

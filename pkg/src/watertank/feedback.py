"""Construction of the stabilizing modal feedback law.

The law acts on states expanded over the conservative eigenbasis (f_n):
for a state with coefficients c_n (mode 0 carried by the dynamic-extension
scalar), the control value is ``u = sum_n c_n * table[n]`` with

    table[n] = -2 tanh(mu L) f_{n,1}(0)^2 / (2L <I_nu, f_n>),

where ``I_nu = I + nu f_0`` is the virtual control profile and the bracket
is the 1/(2L)-weighted product the basis is orthonormal under. (The product
``table[n] * <I_nu, f_n>`` is normalization-invariant; this is the unique
scale at which the truncated closed-loop spectrum reproduces the
boundary-damped target eigenvalues and the TB = B partial sums converge to
the identity.)

The table grows linearly in n and is unbounded as a functional; its
singular part ``h_n = +tanh(mu L) f_{n,1}(0) mu_n / tau_n`` (with
``tau_n = e^{int delta} f_{n,1}(L)/f_{n,1}(0) - 1``) captures the growth,
the remainder having a square-summable tail against mu_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from watertank.errors import RegimeError, UncontrollableError
from watertank.model import (
    GridFunction2,
    Params,
    diagonal_weight,
    l_gamma,
    simpson_weights,
    steady_state_height,
    uniform_grid,
    zeta_to_physical,
)
from watertank.spectral import Basis, BcKind, _pairings

__all__ = [
    "FeedbackLaw",
    "PhysicalFeedback",
    "control_profile",
    "virtual_profile",
    "feedback_coefficients",
    "singular_split",
    "apply_feedback",
    "zero_law",
    "physical_feedback",
]


def control_profile(params: Params) -> GridFunction2:
    """The interior control profile ``I = exp(int_0^x delta) (1, 1)``."""
    grid = uniform_grid(params)
    ew = diagonal_weight(params, grid)
    return GridFunction2(grid, np.stack([ew, ew]))


def virtual_profile(params: Params, basis: Basis) -> GridFunction2:
    """Virtual control profile ``I_nu = I + nu f_0``.

    The nu-component restores controllability of the conserved direction;
    ``<I_nu, f_0> = nu`` exactly (I is orthogonal to f_0).
    """
    if params.nu == 0:
        raise RegimeError("nu must be nonzero for the virtual extension")
    prof = control_profile(params)
    f0 = basis.func(0)
    return GridFunction2(prof.grid, prof.values + params.nu * f0.values)


def _synthesis_regime_check(params: Params):
    from watertank.simulate import gamma_s_threshold

    if params.gamma <= 0:
        raise RegimeError("synthesis requires gamma > 0 (gamma = 0 is uncontrollable)")
    gs = gamma_s_threshold(params, 0.75 * params.mu)
    if params.gamma >= gs:
        raise RegimeError(
            f"gamma = {params.gamma} is not below the feasibility threshold "
            f"gamma_s(3mu/4) = {gs:.4g}"
        )


@dataclass
class FeedbackLaw:
    """Modal feedback table with its moment data and singular/regular split."""

    params: Params
    n_list: np.ndarray
    table: np.ndarray          # <f_n, F>, applied linearly to coefficients
    i_nu_moments: np.ndarray   # <I_nu, f_n>
    i_moments: np.ndarray      # <I, f_n>
    eigenvalues: np.ndarray
    f1_at_0: np.ndarray
    tau: np.ndarray            # tau_n = e^{int delta} f1(L)/f1(0) - 1
    singular: np.ndarray       # h_n
    mu_internal: float
    nu: float
    basis: Basis = None

    def index(self, n: int) -> int:
        return int(n) + (self.n_list.size - 1) // 2

    def value(self, n: int) -> complex:
        return complex(self.table[self.index(n)])

    def apply(self, coeffs) -> complex:
        return complex(np.dot(self.table, coeffs))

    def growth_window(self):
        """Fitted (c, C) with c(1+|n|) <= |table| <= C(1+|n|)."""
        g = np.abs(self.table) / (1.0 + np.abs(self.n_list))
        return float(np.min(g)), float(np.max(g))

    def to_json_dict(self) -> dict:
        return {
            "mu_internal": self.mu_internal,
            "nu": self.nu,
            "modes": [
                {
                    "n": int(n),
                    "re": float(t.real),
                    "im": float(t.imag),
                    "tau_re": float(tau.real),
                    "tau_im": float(tau.imag),
                    "h_re": float(h.real),
                    "h_im": float(h.imag),
                }
                for n, t, tau, h in zip(self.n_list, self.table, self.tau, self.singular)
            ],
        }


def feedback_coefficients(params: Params, basis: Basis,
                          i_nu: GridFunction2 = None,
                          check_regime: bool = True) -> FeedbackLaw:
    """Assemble the feedback table from the conservative basis.

    Raises UncontrollableError naming the mode if any virtual moment
    vanishes, and RegimeError outside the synthesis regime
    (gamma in (0, gamma_s(3mu/4))).
    """
    if basis.kind is not BcKind.CONSERVATIVE:
        raise ValueError("feedback_coefficients requires the conservative basis")
    if check_regime:
        _synthesis_regime_check(params)
    if i_nu is None:
        i_nu = virtual_profile(params, basis)
    grid = basis.grid
    K = basis.n_list.size
    inu_m = _pairings(
        np.broadcast_to(i_nu.values, (K, 2, grid.size)), basis.values, grid
    )
    prof = control_profile(params)
    i_m = _pairings(
        np.broadcast_to(prof.values, (K, 2, grid.size)), basis.values, grid
    )
    dead = np.abs(inu_m) < 1e-12
    if np.any(dead):
        raise UncontrollableError(
            f"vanishing virtual moment <I_nu, f_n> at n in {basis.n_list[dead].tolist()}"
        )
    f1_0 = basis.f1_at_0
    L = params.L
    table = -2.0 * math.tanh(params.mu * L) * f1_0**2 / (2.0 * L * inu_m)
    ew_L = float(diagonal_weight(params, np.array([L]))[0])
    tau = ew_L * basis.f1_at_L / f1_0 - 1.0
    if np.any(np.abs(tau) < 1e-6):
        bad = basis.n_list[np.abs(tau) < 1e-6]
        raise RegimeError(f"|tau_n| below 1e-6 at n in {bad.tolist()}")
    h = math.tanh(params.mu * L) * f1_0 * basis.eigenvalues / tau
    return FeedbackLaw(
        params=params, n_list=basis.n_list.copy(), table=table,
        i_nu_moments=inu_m, i_moments=i_m, eigenvalues=basis.eigenvalues.copy(),
        f1_at_0=f1_0.copy(), tau=tau, singular=h,
        mu_internal=params.mu, nu=params.nu, basis=basis,
    )


def singular_split(law: FeedbackLaw, basis: Basis = None):
    """Split the table into its singular part h and the regular remainder.

    Returns ``(h, regular, tail)`` where ``tail[k]`` is the partial-sum
    increment of ``sum |((table - h)/mu_n)|^2`` beyond |n| = k; the sequence
    being numerically Cauchy is the computable stand-in for the X^2
    continuity of the remainder.
    """
    h = law.singular
    regular = law.table - h
    nz = law.n_list != 0
    r = np.zeros(law.n_list.size, dtype=complex)
    r[nz] = regular[nz] / law.eigenvalues[nz]
    r[~nz] = regular[~nz]  # mu_0 = 0: keep the raw value
    N = (law.n_list.size - 1) // 2
    absn = np.abs(law.n_list)
    tail = {}
    total = float(np.sum(np.abs(r) ** 2))
    for k in range(0, N + 1):
        tail[k] = float(np.sum(np.abs(r[absn > k]) ** 2))
    return h, regular, {"partial_tails": tail, "total": total}


def zero_law(params: Params, basis: Basis) -> FeedbackLaw:
    """A zero-table law carrying the basis moments: drives the open loop."""
    K = basis.n_list.size
    grid = basis.grid
    prof = control_profile(params)
    i_m = _pairings(
        np.broadcast_to(prof.values, (K, 2, grid.size)), basis.values, grid
    )
    zeros = np.zeros(K, dtype=complex)
    ew_L = float(diagonal_weight(params, np.array([params.L]))[0])
    tau = ew_L * basis.f1_at_L / basis.f1_at_0 - 1.0
    return FeedbackLaw(
        params=params, n_list=basis.n_list.copy(), table=zeros,
        i_nu_moments=i_m.copy(), i_moments=i_m, eigenvalues=basis.eigenvalues.copy(),
        f1_at_0=basis.f1_at_0.copy(), tau=tau, singular=zeros.copy(),
        mu_internal=params.mu, nu=params.nu, basis=basis,
    )


def apply_feedback(law: FeedbackLaw, coeffs) -> complex:
    """Evaluate the truncated functional on a coefficient vector.

    The stored table is applied linearly: ``u = sum_n coeffs[n] table[n]``
    (any conjugation bookkeeping is absorbed into the table once).
    """
    coeffs = np.asarray(coeffs)
    if coeffs.shape != law.table.shape:
        raise ValueError("coefficient vector must cover n in [-N, N]")
    return law.apply(coeffs)


@dataclass
class PhysicalFeedback:
    """Feedback in physical (h, v) coordinates, with the PI recurrence.

    ``table[n]`` is the value of the physical functional on the physical
    image of f_n; the control is ``u(t) = <(h,v), F1> + u2(t)`` with
    ``u2' = u2_coefficient * (u2 + <(h,v), F1>)``. The internal damping is
    pinned to ``mu_internal = 4 mu_phys`` so the guaranteed physical decay
    rate is ``(3/4) mu_internal L / L_gamma >= mu_phys``.
    """

    mu_phys: float
    mu_internal: float
    table: np.ndarray
    n_list: np.ndarray
    u2_coefficient: complex
    internal_law: FeedbackLaw
    scale_internal_to_physical: float

    def index(self, n: int) -> int:
        return int(n) + (self.n_list.size - 1) // 2


def physical_feedback(params: Params, basis: Basis, mu_phys: float = None,
                      law: FeedbackLaw = None) -> PhysicalFeedback:
    """Physical-coordinate feedback, built as two consistent paths.

    The returned table is computed from physical-space integrals of the
    pulled-back eigenfunctions:

        P[n] = +tanh(4 mu_phys L) sqrt(H(0)) h_n(0)^2
               / int_0^L H(x) v_n(x) dx,                  n != 0,
        P[0] = -tanh(4 mu_phys L) h_0(0)^2 / (H(0) L_gamma nu),

    which is the exact pushforward of the modal table: P[n] = (L/L_gamma) *
    table[n] (the time rescaling contributes the L/L_gamma; the boundary
    factor sqrt(H(0)) accounts for the diagonal weight W(x)^{3/2} carrying
    the constant gauge W(0)^{3/2} at x = 0). The PI coefficient is
    ``nu * P[0]``.
    """
    if mu_phys is None:
        mu_phys = params.mu / 4.0
    mu_int = 4.0 * mu_phys
    p_int = params if params.mu == mu_int else _with_mu(params, mu_int)
    if law is None or law.mu_internal != mu_int:
        law = feedback_coefficients(p_int, basis)
    lg = l_gamma(params)
    H0 = float(steady_state_height(params, 0.0))
    grid = uniform_grid(params)
    wq = simpson_weights(grid)
    Hx = steady_state_height(params, grid)
    tanh4 = math.tanh(4.0 * mu_phys * params.L)
    sqH0 = math.sqrt(H0)
    table = np.empty(law.n_list.size, dtype=complex)
    for i, n in enumerate(law.n_list):
        if n == 0:
            f0 = basis.func(0)
            h0, _v0 = zeta_to_physical(params, f0)
            table[i] = -tanh4 * h0[0] ** 2 / (H0 * lg * params.nu)
            continue
        fn = basis.func(n)
        hn, vn = zeta_to_physical(params, fn)
        denom = complex(np.sum(wq * Hx * vn))
        table[i] = tanh4 * sqH0 * hn[0] ** 2 / denom
    u2_coef = params.nu * table[law.index(0)]
    return PhysicalFeedback(
        mu_phys=mu_phys, mu_internal=mu_int, table=table,
        n_list=law.n_list.copy(), u2_coefficient=complex(u2_coef),
        internal_law=law, scale_internal_to_physical=params.L / lg,
    )


def _with_mu(params: Params, mu: float) -> Params:
    from dataclasses import replace

    return replace(params, mu=mu)

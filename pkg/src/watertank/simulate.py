"""Time integration, Lyapunov certificates, and decay-rate estimation.

Modal integrators use an integrating-factor (Lawson) RK4: the diagonal
transport part is propagated by exact exponentials and RK4 handles only the
smooth feedback/control coupling. The open-loop conservative system is then
amplitude-exact to rounding, and the step size can follow
``dt = min(0.5/|mu_N|, dt_user)`` without dissipating the high modes.

A first-order upwind scheme provides the independent cross-check path for
the same systems on the spatial grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from watertank.errors import ConfigError, DomainError, NumericalError
from watertank.feedback import FeedbackLaw
from watertank.model import (
    GridFunction2,
    Params,
    delta,
    diagonal_weight,
    mass_functional,
    simpson_weights,
    uniform_grid,
)
from watertank.spectral import Basis, BcKind, WModes

__all__ = [
    "Trajectory",
    "LyapunovCertificate",
    "integrate_closed_loop",
    "integrate_target",
    "integrate_open_loop_w",
    "fd_upwind_step",
    "fd_simulate",
    "gamma_s_threshold",
    "lyapunov_certificate",
    "lyapunov_functional",
    "decay_rate_estimate",
]


@dataclass
class Trajectory:
    """Recorded modal time series with derived norms and the mass invariant."""

    params: Params
    n_list: np.ndarray
    times: np.ndarray
    coeffs: np.ndarray          # (nt, K) state coefficients
    zeta0: np.ndarray           # (nt,) dynamic-extension scalar (0 if unused)
    norm_l2: np.ndarray
    norm_da: np.ndarray         # D(A)-weighted norm
    mass: np.ndarray
    control: np.ndarray

    def norm(self, selector: str) -> np.ndarray:
        if selector == "l2":
            return self.norm_l2
        if selector == "da":
            return self.norm_da
        raise ConfigError(f"unknown norm selector {selector!r}")

    def csv_rows(self):
        for i, t in enumerate(self.times):
            row = [t]
            row.extend(np.abs(self.coeffs[i]))
            row.extend([self.zeta0[i].real, self.zeta0[i].imag])
            row.extend([self.norm_l2[i], self.norm_da[i]])
            row.extend([self.mass[i].real, self.mass[i].imag])
            row.extend([self.control[i].real, self.control[i].imag])
            yield row


def _weights_da(eigenvalues):
    return 1.0 + np.abs(eigenvalues) ** 2


def _lawson_step(c, dt, Eh, Eh2, nonlinear):
    """One Lawson-RK4 step for ``c' = diag(log(Eh)/dt) c + g(c)``."""
    k1 = nonlinear(c)
    k2 = nonlinear(Eh2 * (c + 0.5 * dt * k1))
    k3 = nonlinear(Eh2 * c + 0.5 * dt * k2)
    k4 = nonlinear(Eh * c + dt * Eh2 * k3)
    return Eh * c + (dt / 6.0) * (Eh * k1 + 2.0 * Eh2 * (k2 + k3) + k4)


def _mass_from_zeta_coeffs(params, basis, coeffs, ew):
    zeta = np.tensordot(coeffs, basis.values, axes=(0, 0))
    w = GridFunction2(basis.grid, zeta / ew[None, :])
    return mass_functional(params, w)


def integrate_closed_loop(params: Params, law: FeedbackLaw, init,
                          zeta0_init=0.0, t_final=None, dt=None,
                          record_every=None) -> Trajectory:
    """Closed-loop integration of the virtual-extended modal system.

    State: zeta coefficients over |n| <= N (mode 0 must start at zero: the
    physical mass constraint) plus the dynamic-extension scalar zeta0. The
    control value is ``u = sum c_n table[n] + zeta0 table[0]``; the zeta
    modes are forced through the physical profile moments <I, f_n> while
    ``zeta0' = nu u`` carries the virtual direction. A zero-table law (see
    feedback.zero_law) yields the open-loop skew system.
    """
    basis = law.basis
    if basis is None:
        raise ConfigError("integrate_closed_loop needs a law carrying its basis")
    n_list = law.n_list
    K = n_list.size
    init = np.asarray(init, dtype=complex)
    if init.shape != (K,):
        raise ConfigError(f"init must have shape ({K},)")
    i0 = law.index(0)
    if abs(init[i0]) > 1e-10:
        raise ConfigError("init must have zero mode-0 component (mass constraint)")
    eigs = law.eigenvalues
    if t_final is None:
        t_final = params.t_final
    if dt is None:
        dt = min(0.5 / float(np.max(np.abs(eigs))), params.dt)
    nst = int(math.ceil(t_final / dt))
    dt = t_final / nst
    if record_every is None:
        record_every = max(1, nst // 500)

    ext = np.concatenate([-eigs, [0.0]])  # linear part incl. zeta0 slot
    table_ext = np.concatenate([law.table, [law.table[i0]]])
    force_ext = np.concatenate([law.i_moments, [law.nu]])

    def nonlinear(y):
        return (table_ext @ y) * force_ext

    ew = diagonal_weight(params, basis.grid)
    wda = np.concatenate([_weights_da(eigs), [1.0]])

    for attempt in range(4):
        Eh = np.exp(ext * dt)
        Eh2 = np.exp(ext * dt / 2.0)
        y = np.concatenate([init, [complex(zeta0_init)]])
        scale0 = max(float(np.max(np.abs(y))), 1e-300)
        times, coeffs, z0s, l2s, das, masses, us = [], [], [], [], [], [], []

        def record(t, y):
            z = y[:K].copy()
            z0 = y[K]
            zc = z.copy()
            zc[i0] += z0
            times.append(t)
            coeffs.append(z)
            z0s.append(z0)
            l2s.append(float(np.sqrt(np.sum(np.abs(zc) ** 2))))
            das.append(float(np.sqrt(np.sum(wda[:K] * np.abs(zc) ** 2))))
            masses.append(_mass_from_zeta_coeffs(params, basis, z, ew))
            us.append(complex(table_ext @ y))

        record(0.0, y)
        blown = False
        for k in range(nst):
            y = _lawson_step(y, dt, Eh, Eh2, nonlinear)
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1e8 * scale0:
                blown = True
                break
            if (k + 1) % record_every == 0 or k == nst - 1:
                record((k + 1) * dt, y)
        if not blown:
            break
        dt *= 0.5
        nst *= 2
        warnings.warn(
            f"closed-loop step rejected (state blow-up); retrying with dt = {dt:g}"
        )
    else:
        raise NumericalError("closed-loop integration failed after step halvings")

    return Trajectory(
        params=params, n_list=n_list.copy(), times=np.array(times),
        coeffs=np.array(coeffs), zeta0=np.array(z0s),
        norm_l2=np.array(l2s), norm_da=np.array(das),
        mass=np.array(masses), control=np.array(us),
    )


def integrate_target(params: Params, basis: Basis, init, t_final=None,
                     dt=None, n_samples=400) -> Trajectory:
    """Uncontrolled target system: exact diagonal decay on the damped basis."""
    if basis.kind is not BcKind.DAMPED:
        raise ConfigError("integrate_target expects the damped basis")
    init = np.asarray(init, dtype=complex)
    K = basis.n_list.size
    if init.shape != (K,):
        raise ConfigError(f"init must have shape ({K},)")
    if t_final is None:
        t_final = params.t_final
    times = np.linspace(0.0, t_final, n_samples)
    eigs = basis.eigenvalues
    coeffs = init[None, :] * np.exp(-np.outer(times, eigs))
    wda = _weights_da(eigs)
    l2 = np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=1))
    da = np.sqrt(np.sum(wda[None, :] * np.abs(coeffs) ** 2, axis=1))
    zeros = np.zeros(times.size, dtype=complex)
    return Trajectory(
        params=params, n_list=basis.n_list.copy(), times=times, coeffs=coeffs,
        zeta0=zeros, norm_l2=l2, norm_da=da, mass=zeros.copy(),
        control=zeros.copy(),
    )


def integrate_open_loop_w(params: Params, modes: WModes, control, init,
                          t_final, dt=None, record_every=None) -> Trajectory:
    """w-system under a prescribed control: ``w_n' = -mu_n w_n + u(t) beta_n``.

    ``beta_n = b_n / <psi_n, chi_n>`` (plain bilinear pairing in both
    factors); ``control`` is a ControlSignal or None. The recorded mass is
    the quadrature mass functional of the reconstructed state -- a genuine
    cross-check of the conserved-weight closed form against the modal data.
    """
    n_list = modes.n_list
    K = n_list.size
    init = np.asarray(init, dtype=complex)
    if init.shape != (K,):
        raise ConfigError(f"init must have shape ({K},)")
    eigs = modes.eigenvalues
    if dt is None:
        dt = min(0.5 / float(np.max(np.abs(eigs))), params.dt)
    nst = int(math.ceil(t_final / dt))
    dt = t_final / nst
    if record_every is None:
        record_every = max(1, nst // 800)
    wq = simpson_weights(modes.grid)
    b = np.sum(wq * (modes.chi[:, 0, :] + modes.chi[:, 1, :]), axis=1)
    pair = np.sum(
        wq
        * (modes.psi[:, 0, :] * modes.chi[:, 0, :]
           + modes.psi[:, 1, :] * modes.chi[:, 1, :]),
        axis=1,
    )
    beta = b / pair
    Eh = np.exp(-eigs * dt)
    Eh2 = np.exp(-eigs * dt / 2.0)
    y = init.copy()
    wda = _weights_da(eigs)

    times, coeffs, l2s, das, masses, us = [], [], [], [], [], []

    def u_at(t):
        if control is None:
            return 0.0 + 0.0j
        return complex(control(np.array([t]))[0])

    def record(t, y):
        times.append(t)
        coeffs.append(y.copy())
        l2s.append(float(np.sqrt(np.sum(np.abs(y) ** 2))))
        das.append(float(np.sqrt(np.sum(wda * np.abs(y) ** 2))))
        wfun = GridFunction2(
            modes.grid, np.tensordot(y, modes.psi, axes=(0, 0))
        )
        masses.append(mass_functional(params, wfun))
        us.append(u_at(t))

    record(0.0, y)
    for k in range(nst):
        t = k * dt
        k1 = u_at(t) * beta
        k2 = u_at(t + dt / 2) * beta  # midpoint forcing serves both k2 and k3
        k4 = u_at(t + dt) * beta
        y = Eh * y + (dt / 6.0) * (Eh * k1 + 4.0 * Eh2 * k2 + k4)
        if (k + 1) % record_every == 0 or k == nst - 1:
            record((k + 1) * dt, y)

    zeros = np.zeros(len(times), dtype=complex)
    return Trajectory(
        params=params, n_list=n_list.copy(), times=np.array(times),
        coeffs=np.array(coeffs), zeta0=zeros,
        norm_l2=np.array(l2s), norm_da=np.array(das),
        mass=np.array(masses), control=np.array(us),
    )


def fd_upwind_step(params: Params, state: np.ndarray, kind: BcKind, u,
                   dt: float) -> np.ndarray:
    """One first-order upwind step of the zeta system on the grid.

    ``zeta_1`` transports rightward, ``zeta_2`` leftward; the coupling
    ``delta J`` and the control ``u I`` are added explicitly; inflow
    boundary values follow the kind's reflection law. Requires
    ``CFL = dt/dx <= 1``.
    """
    grid = uniform_grid(params)
    nx = grid.size
    state = np.asarray(state)
    if state.shape != (2, nx):
        raise ConfigError(f"state must have shape (2, {nx})")
    dx = grid[1] - grid[0]
    cfl = dt / dx
    if cfl > 1.0 + 1e-12:
        raise ConfigError(f"CFL violation: dt/dx = {cfl:.3f} > 1")
    dlt = delta(params, grid)
    ew = diagonal_weight(params, grid)
    z1, z2 = state[0], state[1]
    s1 = -dlt / 3.0 * z2 + u * ew
    s2 = dlt / 3.0 * z1 + u * ew
    new1 = z1.copy()
    new2 = z2.copy()
    new1[1:] = z1[1:] - cfl * (z1[1:] - z1[:-1]) + dt * s1[1:]
    new2[:-1] = z2[:-1] + cfl * (z2[1:] - z2[:-1]) + dt * s2[:-1]
    if kind is BcKind.CONSERVATIVE:
        new1[0] = -new2[0]
    elif kind is BcKind.DAMPED:
        new1[0] = -math.exp(-2.0 * params.mu * params.L) * new2[0]
    else:
        raise ConfigError("fd_upwind_step supports conservative/damped kinds")
    new2[-1] = -new1[-1]
    return np.stack([new1, new2])


def fd_simulate(params: Params, init: np.ndarray, kind: BcKind, t_final,
                control=None, cfl=1.0):
    """March the upwind scheme to t_final; returns the final state.

    ``control`` is a callable t -> complex (or None). CFL defaults to 1,
    where the pure transport part is exact.
    """
    grid = uniform_grid(params)
    dx = grid[1] - grid[0]
    dt = cfl * dx
    nst = int(math.ceil(t_final / dt))
    dt = t_final / nst
    if dt / dx > 1.0 + 1e-12:
        nst += 1
        dt = t_final / nst
    state = np.asarray(init, dtype=complex).copy()
    for k in range(nst):
        u = 0.0 if control is None else control(k * dt)
        state = fd_upwind_step(params, state, kind, u, dt)
    return state


def gamma_s_threshold(params: Params, lam: float) -> float:
    """Feasibility threshold gamma_s(lambda) for the Lyapunov certificate.

    ``min(7/(16L), 6 lambda (1 - e^{-2(mu-lambda)L}) / (e^{2 lambda L}-1))``
    with the free position in the second bound taken at x = L (worst case).
    Decreasing in lambda on (0, mu).
    """
    if not 0 < lam < params.mu:
        raise DomainError("lambda must lie in (0, mu)")
    L = params.L
    second = (
        6.0 * lam * (1.0 - math.exp(-2.0 * (params.mu - lam) * L))
        / (math.expm1(2.0 * lam * L))
    )
    return min(7.0 / (16.0 * L), second)


@dataclass
class LyapunovCertificate:
    """Weight data certifying exponential decay of the target system."""

    lam: float
    grid: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    gamma_s: float
    feasible: bool
    theta1: np.ndarray
    theta2: np.ndarray
    blowup_x: float = None


def lyapunov_certificate(params: Params, lam: float) -> LyapunovCertificate:
    """Integrate the Riccati-type weight ODE and compare with its supersolution.

    ``eta' = |delta/3| (e^{-2 lam (x-L)} - eta^2 e^{2 lam (x-L)})`` with
    ``eta(0) = e^{-2(mu-lam)L}``; feasible iff eta exists on [0, L] with
    ``eta(L) <= 1``. The closed-form supersolution is
    ``xi = eta(0) + (||delta||_inf / 6 lam)(e^{2 lam L} - e^{2 lam (L-x)})``,
    and the quadratic weights are reconstructed as
    ``theta1 = e^{-2 lam (x-L)}/eta``, ``theta2 = eta e^{2 lam (x-L)}``.
    """
    if not 0 < lam < params.mu:
        raise DomainError("lambda must lie in (0, mu)")
    grid = uniform_grid(params)
    L = params.L
    h = grid[1] - grid[0]
    eta0 = math.exp(-2.0 * (params.mu - lam) * L)

    # stage data on the half-grid (step endpoints and midpoints)
    xs = np.linspace(0.0, L, 2 * (grid.size - 1) + 1)
    dabs = np.abs(delta(params, xs)) / 3.0
    em = np.exp(-2.0 * lam * (xs - L))
    ep = np.exp(2.0 * lam * (xs - L))

    def rhs(j, e):
        return dabs[j] * (em[j] - e * e * ep[j])

    eta = np.empty(grid.size)
    eta[0] = eta0
    e = eta0
    blowup = None
    for i in range(grid.size - 1):
        j = 2 * i
        k1 = rhs(j, e)
        k2 = rhs(j + 1, e + h / 2 * k1)
        k3 = rhs(j + 1, e + h / 2 * k2)
        k4 = rhs(j + 2, e + h * k3)
        e = e + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(e) or abs(e) > 1e6 or e <= 0:
            blowup = float(grid[i + 1])
            eta[i + 1 :] = np.nan
            break
        eta[i + 1] = e

    dmax = float(np.max(np.abs(delta(params, grid))))
    xi = eta0 + (dmax / (6.0 * lam)) * (
        math.exp(2.0 * lam * L) - np.exp(2.0 * lam * (L - grid))
    )
    feasible = blowup is None and eta[-1] <= 1.0 + 1e-12
    if feasible:
        theta1 = np.exp(-2.0 * lam * (grid - L)) / eta
        theta2 = eta * np.exp(2.0 * lam * (grid - L))
    else:
        theta1 = np.full(grid.size, np.nan)
        theta2 = np.full(grid.size, np.nan)
    return LyapunovCertificate(
        lam=lam, grid=grid, eta=eta, xi=xi,
        gamma_s=gamma_s_threshold(params, lam), feasible=feasible,
        theta1=theta1, theta2=theta2, blowup_x=blowup,
    )


def lyapunov_functional(params: Params, basis: Basis, coeffs,
                        cert: LyapunovCertificate) -> float:
    """Quadratic functional ``V = sum_{k=0,1} ||Theta (A~^k z)||^2`` (p = 1).

    The operator power is applied modally (exact on the damped basis), the
    weights come from the certificate.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    z = np.tensordot(coeffs, basis.values, axes=(0, 0))
    az = np.tensordot(coeffs * basis.eigenvalues, basis.values, axes=(0, 0))
    w = simpson_weights(basis.grid)
    L = params.L
    val = 0.0
    for comp in (z, az):
        val += float(
            np.sum(w * (cert.theta1 * np.abs(comp[0]) ** 2
                        + cert.theta2 * np.abs(comp[1]) ** 2))
        ) / (2.0 * L)
    return val


def decay_rate_estimate(traj: Trajectory, selector="da", window=None):
    """Log-linear least-squares decay rate of a recorded norm.

    Returns ``(rate, r_squared)`` where the fitted model is
    ``log norm = a - rate * t`` over the window (defaults to the full run).
    """
    norm = traj.norm(selector)
    t = traj.times
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
    else:
        mask = np.ones(t.size, dtype=bool)
    if mask.sum() < 3:
        raise ConfigError("window contains fewer than 3 samples")
    y = norm[mask]
    if np.any(y <= 0):
        raise NumericalError("norm is not positive on the fit window")
    ly = np.log(y)
    A = np.vstack([t[mask], np.ones(mask.sum())]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        ss_res = float(res[0]) if res.size else float(np.sum((ly - A @ coef) ** 2))
        r2 = 1.0 - ss_res / ss_tot
    return float(-coef[0]), float(r2)

"""Physical model, steady states, coordinate changes, and basic functionals.

The pipeline works in three coordinate systems on [0, L]:

* physical ``(h, v)``: height/velocity perturbations around the accelerated
  steady state ``H(x) = 1 - gamma*(x - L/2)`` (g is normalized to 1);
* ``w``: Riemann invariants after diagonalizing the transport matrix and
  rescaling space/time so both speeds are 1 (coupling matrix has nonzero
  diagonal);
* ``zeta``: the ``w`` variables multiplied by ``exp(int_0^x delta)``, which
  removes the diagonal coupling (coupling matrix J is antidiagonal).

All closed forms below are written in algebraically stable form so that
``gamma -> 0`` needs no special casing (no 0/0 is ever evaluated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from watertank.errors import ConfigError, DomainError, GridMismatchError

__all__ = [
    "Params",
    "GridFunction2",
    "uniform_grid",
    "simpson_weights",
    "steady_state_height",
    "l_gamma",
    "delta",
    "exp_weight",
    "diagonal_weight",
    "height_root_profile",
    "z_of_x",
    "x_of_z",
    "physical_to_zeta",
    "zeta_to_physical",
    "inner_product",
    "plain_product",
    "mass_functional",
]


@dataclass(frozen=True)
class Params:
    """Physical and numerical configuration.

    Parameters
    ----------
    L : float
        Tank length (default 1).
    gamma : float
        Steady tank acceleration. Positive for synthesis; 0 is allowed for
        the uncontrollability diagnostics. ``|gamma|*L/2 < 1`` is required
        so the steady height stays positive.
    mu : float
        Internal decay / boundary damping parameter of the target system.
    nu : float
        Virtual-control weight, ``0 < |nu| < 1``.
    n_modes : int
        Spectral truncation N (modes ``-N..N`` are used).
    grid_points : int
        Spatial samples on [0, L], endpoints included. Must be odd (>= 17)
        so composite Simpson applies.
    ode_tol : float
        Root/integration tolerance for the shooting solver.
    t_final, dt : float
        Simulation horizon and (maximum) time step.
    """

    L: float = 1.0
    gamma: float = 0.03
    mu: float = 2.0
    nu: float = 0.5
    n_modes: int = 20
    grid_points: int = 2049
    ode_tol: float = 1e-9
    t_final: float = 10.0
    dt: float = 5e-3

    def __post_init__(self):
        if self.L <= 0:
            raise ConfigError("L must be positive")
        if abs(self.gamma) * self.L / 2 >= 1:
            raise ConfigError("|gamma|*L/2 must be < 1 (steady height positive)")
        if self.mu <= 0:
            raise ConfigError("mu must be positive")
        if not 0 < abs(self.nu) < 1:
            raise ConfigError("nu must satisfy 0 < |nu| < 1")
        if self.n_modes < 1:
            raise ConfigError("n_modes must be >= 1")
        if self.grid_points < 17 or self.grid_points % 2 == 0:
            raise ConfigError("grid_points must be odd and >= 17 (composite Simpson)")
        if self.ode_tol <= 0 or self.t_final <= 0 or self.dt <= 0:
            raise ConfigError("ode_tol, t_final, dt must be positive")


class GridFunction2:
    """A C^2-valued function sampled on a uniform grid over [0, L].

    ``values`` has shape (2, n); boundary values are exact samples, never
    extrapolated.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values)
        if values.shape != (2, grid.size):
            raise GridMismatchError(
                f"values shape {values.shape} does not match grid of size {grid.size}"
            )
        self.grid = grid
        self.values = values

    @property
    def f1(self):
        return self.values[0]

    @property
    def f2(self):
        return self.values[1]

    def boundary(self):
        """Return (f1(0), f2(0), f1(L), f2(L))."""
        return (
            self.values[0, 0],
            self.values[1, 0],
            self.values[0, -1],
            self.values[1, -1],
        )

    def same_grid(self, other: "GridFunction2") -> bool:
        return self.grid.size == other.grid.size and np.array_equal(
            self.grid, other.grid
        )


def uniform_grid(params: Params) -> np.ndarray:
    return np.linspace(0.0, params.L, params.grid_points)


def simpson_weights(grid: np.ndarray) -> np.ndarray:
    """Composite-Simpson quadrature weights for a uniform odd-size grid."""
    n = grid.size
    if n % 2 == 0 or n < 3:
        raise ConfigError("Simpson weights need an odd number of points >= 3")
    h = grid[1] - grid[0]
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def _check_x(params: Params, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-14) or np.any(x > params.L + 1e-14):
        raise DomainError(f"position outside [0, {params.L}]")
    return x


def steady_state_height(params: Params, x):
    """Steady height ``H(x) = 1 - gamma*(x - L/2)``; integrates to L."""
    x = _check_x(params, x)
    return 1.0 - params.gamma * (x - params.L / 2.0)


def l_gamma(params: Params) -> float:
    """Rescaled domain length after the space change of variables.

    Equals ``(2/gamma)*(sqrt(1+gamma L/2) - sqrt(1-gamma L/2))``, evaluated
    in the stable form ``2L/(sqrt(1+gamma L/2)+sqrt(1-gamma L/2))`` which is
    even in gamma and tends to L as gamma -> 0. ``L_gamma = L + O(gamma^2)``.
    """
    u = params.gamma * params.L / 2.0
    if abs(u) >= 1.0:
        raise DomainError("|gamma|*L/2 must be < 1")
    return 2.0 * params.L / (math.sqrt(1.0 + u) + math.sqrt(1.0 - u))


def height_root_profile(params: Params, z):
    """The profile ``W(z) = sqrt(1+gamma L/2) - (gamma/2)(L_gamma/L) z``.

    ``W(z)^2`` is the steady height seen through the space map, ``W^(3/2)``
    is the diagonalizing weight, ``W^(-1)`` and ``W^2`` are the explicit
    zero modes of the w-system and its adjoint.
    """
    z = _check_x(params, z)
    lg = l_gamma(params)
    w = math.sqrt(1.0 + params.gamma * params.L / 2.0) - (
        params.gamma / 2.0
    ) * (lg / params.L) * z
    if np.any(np.asarray(w) <= 0):
        raise DomainError("height-root profile hit zero: gamma out of range")
    return w


def delta(params: Params, x):
    """Coupling coefficient of the scaled system; negative for gamma > 0.

    ``delta(x) = -(3 L_gamma/(4L)) * gamma / W(x)`` with W the height-root
    profile. Smooth on [0, L]; identically 0 at gamma = 0.
    """
    w = height_root_profile(params, x)
    lg = l_gamma(params)
    return -(3.0 * lg / (4.0 * params.L)) * params.gamma / w


def exp_weight(params: Params, x):
    """The diagonalizing weight in the closed form ``W(x)^(3/2)``.

    Note this equals ``W(0)^(3/2) * exp(int_0^x delta)``: the closed form
    carries the constant gauge ``W(0)^(3/2) = (1 + gamma L/2)^(3/4)`` at
    x = 0 (a constant rescaling of the diagonal change of variables, which
    is immaterial for the dynamics). See :func:`diagonal_weight` for the
    ungauged exponential used by the coordinate maps and control profile.
    """
    return height_root_profile(params, x) ** 1.5


def diagonal_weight(params: Params, x):
    """``exp(int_0^x delta) = (W(x)/W(0))^(3/2)`` exactly; 1 at x = 0."""
    w = height_root_profile(params, x)
    w0 = math.sqrt(1.0 + params.gamma * params.L / 2.0)
    return (w / w0) ** 1.5


def z_of_x(params: Params, x):
    """Scaled coordinate z in [0, L] of a physical position x.

    Stable form of ``(L/L_gamma)*(2/gamma)*(sqrt(1+gamma L/2)-sqrt(H(x)))``.
    """
    x = _check_x(params, x)
    lg = l_gamma(params)
    h = steady_state_height(params, x)
    y = 2.0 * x / (math.sqrt(1.0 + params.gamma * params.L / 2.0) + np.sqrt(h))
    return (params.L / lg) * y


def x_of_z(params: Params, z):
    """Inverse of :func:`z_of_x`, in closed form (no iteration).

    ``x = (L_gamma/L) z sqrt(1+gamma L/2) - gamma L_gamma^2 z^2 / (4 L^2)``.
    """
    z = _check_x(params, z)
    lg = l_gamma(params)
    a = math.sqrt(1.0 + params.gamma * params.L / 2.0)
    x = (lg / params.L) * z * a - params.gamma * lg * lg * z * z / (4.0 * params.L**2)
    return x


def _resample(values, src_grid, dst_points):
    """Monotone cubic (PCHIP) resampling of complex samples."""
    if np.iscomplexobj(values):
        re = PchipInterpolator(src_grid, values.real)(dst_points)
        im = PchipInterpolator(src_grid, values.imag)(dst_points)
        return re + 1j * im
    return PchipInterpolator(src_grid, values)(dst_points)


def physical_to_zeta(params: Params, h, v) -> GridFunction2:
    """Map physical perturbations (h, v) on the x-grid to zeta on the z-grid.

    Applies the Riemann diagonalization ``xi = S(x) (h, v)`` with
    ``S = [[H^(-1/2), 1], [-H^(-1/2), 1]]``, resamples through the space map
    x(z) (monotone cubic), and multiplies by ``exp(int_0^x delta)``.
    """
    grid = uniform_grid(params)
    h = np.asarray(h)
    v = np.asarray(v)
    if h.shape != grid.shape or v.shape != grid.shape:
        raise GridMismatchError("h, v must be sampled on the params grid")
    s = 1.0 / np.sqrt(steady_state_height(params, grid))
    xi1 = s * h + v
    xi2 = -s * h + v
    xq = x_of_z(params, grid)
    # x(z) in [0, L] analytically; clamp rounding spill at the endpoints
    xq = np.clip(xq, 0.0, params.L)
    w1 = _resample(xi1, grid, xq)
    w2 = _resample(xi2, grid, xq)
    ew = diagonal_weight(params, grid)
    return GridFunction2(grid, np.stack([ew * w1, ew * w2]))


def zeta_to_physical(params: Params, zeta: GridFunction2):
    """Inverse of :func:`physical_to_zeta`; returns (h, v) on the x-grid."""
    grid = uniform_grid(params)
    if not np.array_equal(zeta.grid, grid):
        raise GridMismatchError("zeta must be sampled on the params grid")
    ew = diagonal_weight(params, grid)
    w1 = zeta.f1 / ew
    w2 = zeta.f2 / ew
    zq = np.clip(z_of_x(params, grid), 0.0, params.L)
    xi1 = _resample(w1, grid, zq)
    xi2 = _resample(w2, grid, zq)
    sqh = np.sqrt(steady_state_height(params, grid))
    h = 0.5 * sqh * (xi1 - xi2)
    v = 0.5 * (xi1 + xi2)
    return h, v


def inner_product(f: GridFunction2, g: GridFunction2) -> complex:
    """Sesquilinear product ``(1/2L) * int (f1 conj(g1) + f2 conj(g2))``."""
    if not f.same_grid(g):
        raise GridMismatchError("inner_product requires a shared grid")
    w = simpson_weights(f.grid)
    L = f.grid[-1]
    integrand = f.f1 * np.conj(g.f1) + f.f2 * np.conj(g.f2)
    return complex(np.sum(w * integrand) / (2.0 * L))


def plain_product(f: GridFunction2, g: GridFunction2, conjugate=True) -> complex:
    """Unweighted L^2 pairing ``int (f1 g1~ + f2 g2~)``; bilinear if asked.

    The moment closed forms (and the conserved mass) are stated without the
    1/(2L) prefactor, so both pairings are needed.
    """
    if not f.same_grid(g):
        raise GridMismatchError("plain_product requires a shared grid")
    w = simpson_weights(f.grid)
    g1, g2 = (np.conj(g.f1), np.conj(g.f2)) if conjugate else (g.f1, g.f2)
    return complex(np.sum(w * (f.f1 * g1 + f.f2 * g2)))


def mass_functional(params: Params, w: GridFunction2) -> complex:
    """Conserved mass seen in the w-coordinates: ``int W(x)^2 (w1 - w2) dx``.

    Constant along every trajectory of the w/zeta systems regardless of the
    control (the "missing direction"); the immaterial L/L_gamma prefactor is
    dropped.
    """
    grid = uniform_grid(params)
    if not np.array_equal(w.grid, grid):
        raise GridMismatchError("mass_functional expects the params grid")
    weight = height_root_profile(params, grid) ** 2
    sw = simpson_weights(grid)
    return complex(np.sum(sw * weight * (w.f1 - w.f2)))

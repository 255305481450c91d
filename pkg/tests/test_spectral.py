import math

import numpy as np
import pytest

from watertank.errors import NumericalError
from watertank.model import Params, inner_product, uniform_grid
from watertank.spectral import (
    BcKind,
    build_basis,
    eigenfunction,
    find_eigenvalues,
    first_order_perturbation,
    gram_matrix,
    j0_overlap,
    kato_psi,
    l1_boundary,
    reference_mode,
    shoot,
    shoot_derivative_check,
    w_modes,
)


class TestShoot:
    def test_gamma0_conservative_roots(self, p_gamma0):
        for n in (0, 1, 5, 20):
            assert abs(shoot(p_gamma0, BcKind.CONSERVATIVE, 1j * math.pi * n)) < 1e-10

    def test_gamma0_damped_roots(self, p_gamma0):
        for n in (0, 3, 12):
            lam = p_gamma0.mu + 1j * math.pi * n / p_gamma0.L
            assert abs(shoot(p_gamma0, BcKind.DAMPED, lam)) < 1e-10

    def test_nonroot_is_nonzero(self, p_gamma0):
        assert abs(shoot(p_gamma0, BcKind.CONSERVATIVE, 0.5 + 1j)) > 1e-3

    def test_holomorphic_in_lambda(self, p_std):
        # Cauchy-Riemann: the finite-difference derivative along the real
        # axis matches the one along the imaginary axis
        lam = 1j * math.pi * 3 / p_std.L + 0.01
        d_re, d_im = shoot_derivative_check(p_std, BcKind.CONSERVATIVE, lam)
        assert abs(d_re - d_im) < 1e-6 * max(1.0, abs(d_re))


class TestFindEigenvalues:
    def test_gamma0_exact(self, p_gamma0):
        ev = find_eigenvalues(p_gamma0, BcKind.CONSERVATIVE, range(-20, 21))
        exact = 1j * math.pi * np.arange(-20, 21) / p_gamma0.L
        assert np.max(np.abs(ev - exact)) < 1e-9

    def test_perturbed_localization(self, p_std):
        ev = find_eigenvalues(p_std, BcKind.CONSERVATIVE, range(-20, 21))
        exact = 1j * math.pi * np.arange(-20, 21) / p_std.L
        assert np.max(np.abs(ev - exact)) < 0.25 / p_std.L

    def test_real_parts_vanish(self, p_std):
        ev = find_eigenvalues(p_std, BcKind.CONSERVATIVE, range(-20, 21))
        assert np.max(np.abs(ev.real)) < 1e-8

    def test_mu0_exactly_zero(self, p_std):
        ev = find_eigenvalues(p_std, BcKind.CONSERVATIVE, [0])
        assert abs(ev[0]) == 0.0

    def test_out_of_regime_raises(self):
        # the damped operator's perturbation constants grow like e^{2 mu L},
        # so even small gamma pushes its roots out of the localization window
        p = Params(gamma=0.01, mu=4.0, nu=0.5, n_modes=4, grid_points=513)
        with pytest.raises(NumericalError):
            find_eigenvalues(p, BcKind.DAMPED, range(-4, 5))

    def test_damped_adjoint_conjugate(self, p_std):
        ev_d = find_eigenvalues(p_std, BcKind.DAMPED, range(-5, 6))
        ev_a = find_eigenvalues(p_std, BcKind.DAMPED_ADJOINT, range(-5, 6))
        assert np.max(np.abs(ev_a - np.conj(ev_d))) < 1e-9


class TestEigenfunction:
    def test_gamma0_zero_mode_constant(self, p_gamma0):
        pair = eigenfunction(p_gamma0, BcKind.CONSERVATIVE, 0.0, mode_index=0)
        f = pair.func
        assert np.max(np.abs(f.f1 - 1.0)) < 1e-12
        assert np.max(np.abs(f.f2 + 1.0)) < 1e-12
        assert inner_product(f, f) == pytest.approx(1.0, abs=1e-12)

    def test_residuals_within_tolerance(self, p_std):
        ev = find_eigenvalues(p_std, BcKind.CONSERVATIVE, [7])
        pair = eigenfunction(p_std, BcKind.CONSERVATIVE, complex(ev[0]), mode_index=7)
        assert pair.bc_residual < p_std.ode_tol
        assert pair.ode_residual < p_std.ode_tol

    def test_w_system_zero_modes_closed_form(self, p_std, basis_cache):
        from watertank.model import height_root_profile

        basis = basis_cache(p_std, BcKind.CONSERVATIVE, 20)
        modes = w_modes(p_std, basis)
        prof = height_root_profile(p_std, basis.grid)
        psi0 = modes.psi_func(0)
        r = psi0.f1 * prof  # psi_{0,1} ~ prof^{-1}
        assert np.max(np.abs(r - r[0])) / abs(r[0]) < 1e-7
        assert np.max(np.abs(psi0.f1 + psi0.f2)) < 1e-12
        chi0 = modes.chi_func(0)
        r2 = chi0.f1 / prof**2  # chi_{0,1} ~ prof^2
        assert np.max(np.abs(r2 - r2[0])) / abs(r2[0]) < 1e-7

    def test_damped_continues_reference(self, p_gamma0):
        lam = p_gamma0.mu + 1j * math.pi * 4 / p_gamma0.L
        pair = eigenfunction(p_gamma0, BcKind.DAMPED, lam, mode_index=4)
        ref = reference_mode(p_gamma0, BcKind.DAMPED, 4)
        assert np.max(np.abs(pair.func.values - ref.values)) < 1e-9


class TestBuildBasis:
    def test_gamma0_gram_identity(self, p_gamma0, basis_cache):
        basis = basis_cache(p_gamma0, BcKind.CONSERVATIVE, 10)
        G = gram_matrix(basis.values, basis.values, basis.grid)
        assert np.max(np.abs(G - np.eye(21))) < 1e-12

    def test_perturbed_gram_identity(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.CONSERVATIVE, 20)
        G = gram_matrix(basis.values, basis.values, basis.grid)
        assert np.max(np.abs(G - np.eye(41))) < 1e-6

    def test_gram_bound_at_gamma_point1(self, basis_cache):
        # orthonormality deviation < 1e-6 holds up to gamma = 0.1
        p = Params(gamma=0.1, mu=2.0, nu=0.5, n_modes=10, grid_points=2049)
        basis = basis_cache(p, BcKind.CONSERVATIVE, 10)
        G = gram_matrix(basis.values, basis.values, basis.grid)
        assert np.max(np.abs(G - np.eye(21))) < 1e-6

    def test_damped_biorthonormal(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.DAMPED, 10)
        G = gram_matrix(basis.values, basis.dual_values, basis.grid)
        assert np.max(np.abs(G - np.eye(21))) < 1e-6

    def test_eigenfunction_symmetry(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.CONSERVATIVE, 20)
        for n in (1, 7, 20):
            fm = basis.func(-n).values
            fp = basis.func(n).values
            assert np.max(np.abs(fm - np.conj(fp))) < 1e-10
            assert np.max(np.abs(fm[0] + fp[1])) < 1e-10

    def test_phase_fixing(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.CONSERVATIVE, 20)
        f10 = basis.f1_at_0
        assert np.max(np.abs(f10.imag)) < 1e-12
        assert np.all(f10.real > 0)

    def test_eigenvalue_pairing(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.CONSERVATIVE, 20)
        for n in (1, 5, 20):
            mu_p = basis.eigenvalue(n)
            mu_m = basis.eigenvalue(-n)
            assert abs(mu_m + mu_p) < 1e-10
            assert abs(mu_m - np.conj(mu_p)) < 1e-10

    def test_damped_conjugate_pairing(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.DAMPED, 10)
        for n in (1, 6):
            assert abs(basis.eigenvalue(-n) - np.conj(basis.eigenvalue(n))) < 1e-9

    def test_damped_real_part_band(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.DAMPED, 20)
        dev = np.max(np.abs(basis.eigenvalues.real - p_std.mu))
        assert dev < 0.1 * p_std.mu

    def test_boundary_value_uniformity(self, p_std, basis_cache):
        basis = basis_cache(p_std, BcKind.CONSERVATIVE, 20)
        m = float(np.min(np.abs(basis.f1_at_0)))
        M = float(np.max(np.abs(basis.f1_at_0)))
        assert 0.5 < m <= M < 2.0
        bd = basis_cache(p_std, BcKind.DAMPED, 10)
        phi0 = np.abs(bd.dual_values[:, 0, 0])
        assert 0.5 < phi0.min() <= phi0.max() < 2.0

    def test_reference_norm_convention(self, p_gamma0):
        # ||f~_n^(0)||^2 = (e^{4 mu L}-1)/(4 mu L) under the 1/(2L) product;
        # the unprefactored value (e^{4 mu L}-1)/(2 mu) is the plain-product one
        ref = reference_mode(p_gamma0, BcKind.DAMPED, 3)
        val = inner_product(ref, ref).real
        muL = p_gamma0.mu * p_gamma0.L
        assert val == pytest.approx(
            math.expm1(4 * muL) / (4 * muL), rel=1e-10
        )


class TestPerturbationSeries:
    def test_overlap_vanishes_on_diagonal(self):
        assert j0_overlap(3, 3) == 0
        assert j0_overlap(3, -3) == 0

    def test_overlap_closed_form_spot(self, p_gamma0):
        # quadrature cross-check of the closed-form inner product
        g = uniform_grid(p_gamma0)
        from watertank.model import GridFunction2, inner_product as ip

        n, k = 2, 5
        psi_n = reference_mode(p_gamma0, BcKind.CONSERVATIVE, n, g)
        psi_k = reference_mode(p_gamma0, BcKind.CONSERVATIVE, k, g)
        j0psi = np.stack(
            [psi_n.f1 + psi_n.f2 / 3.0, -psi_n.f1 / 3.0 - psi_n.f2]
        )
        val = ip(GridFunction2(g, j0psi), psi_k)
        assert val == pytest.approx(j0_overlap(n, k), abs=1e-10)

    def test_quadratic_remainder_order(self, basis_cache):
        errs = []
        gammas = (0.01, 0.04)
        for g in gammas:
            p = Params(gamma=g, mu=2.0, nu=0.5, n_modes=4, grid_points=1025)
            basis = basis_cache(p, BcKind.CONSERVATIVE, 4)
            psi = kato_psi(p, basis, 1)
            psi0 = reference_mode(p, BcKind.CONSERVATIVE, 1, basis.grid)
            psi1 = first_order_perturbation(p, 1, K=2000)
            errs.append(
                float(np.max(np.abs(psi.values - psi0.values - g * psi1.values)))
            )
        slope = math.log(errs[1] / errs[0]) / math.log(gammas[1] / gammas[0])
        assert 1.8 <= slope <= 2.2

    def test_l1_parity(self):
        p = Params(gamma=0.05, mu=2.0, nu=0.5, grid_points=257)
        for n in (1, 3, 7):
            assert abs(l1_boundary(p, n, K=500)) < 1e-12
        for n in (0, 2, 6):
            assert abs(l1_boundary(p, n, K=4000)) > 2 * p.L / math.pi**2

    def test_l1_values(self):
        # l1_0 -> L and l1_{2m} -> 3L/2: exact limits of the series
        p = Params(gamma=0.05, mu=2.0, nu=0.5, grid_points=257)
        assert abs(l1_boundary(p, 0, K=20000)) == pytest.approx(p.L, rel=1e-3)
        assert abs(l1_boundary(p, 6, K=20000)) == pytest.approx(
            1.5 * p.L, rel=1e-3
        )

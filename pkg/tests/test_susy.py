import numpy as np
import pytest

import pdmsusy as pm
from pdmsusy import (
    DegenerateWronskianError,
    InvalidArgumentError,
    InvalidSeedError,
    NoRegularSubdomainError,
    SampledFunction,
    WrongAlgorithmError,
    WrongModeError,
    build_grid,
    incomplete_elliptic_e,
)
from pdmsusy import susy

M0 = 1.15
DE = 1.0


def _elliptic(x):
    return incomplete_elliptic_e(x / 2, 2.0 / (M0 + 1))


def _closed_form_w1(x):
    e = _elliptic(x)
    return (
        DE * np.sqrt(2) * np.sqrt(M0 + 1) * e
        - 1.0 / (2 * np.sqrt(2) * np.sqrt(M0 + 1) * e)
        + np.sin(x) / (4 * np.sqrt(2) * (M0 + np.cos(x)) ** 1.5)
    )


def _closed_form_v1(x):
    e = _elliptic(x)
    return (
        DE
        + 2 * DE**2 * (M0 + 1) * e**2
        + (3 * np.cos(x) ** 2 - 7 - 4 * M0 * np.cos(x)) / (32 * (M0 + np.cos(x)) ** 3)
        + 1.0 / (4 * (M0 + 1) * e**2)
    )


def _closed_form_w2(x):
    e = _elliptic(x)
    m = M0 + np.cos(x)
    denom = 1 + 8 * DE * (M0 + 1) * e**2
    return (
        np.sin(x) / (4 * np.sqrt(2) * m**1.5)
        + 8 * np.sqrt(2) * DE**2 * ((M0 + 1) * m) ** 1.5 * e**3 / (m**1.5 * denom)
        + (1 - 4 * DE * (M0 + 1) * e**2) / (2 * np.sqrt(2) * np.sqrt(M0 + 1) * e * denom)
    )


def _closed_form_v2(x):
    e = _elliptic(x)
    denom = 1 + 8 * DE * (M0 + 1) * e**2
    return (
        2 * DE**2 * (M0 + 1) * e**2
        + (-8 * M0 * np.cos(x) + 3 * np.cos(2 * x) - 11) / (64 * (M0 + np.cos(x)) ** 3)
        + (-2 * DE + 64 * DE**2 * (M0 + 1) * e**2 * (1 + 2 * DE * (M0 + 1) * e**2))
        / denom**2
    )


class TestSuperpotential:
    def test_constant_mass_gaussian_seed(self, constant_system):
        sys = constant_system
        x = sys.grid.points
        u = SampledFunction(sys.grid, np.exp(-(x**2) / 2))
        du = SampledFunction(sys.grid, -x * np.exp(-(x**2) / 2))
        w = pm.superpotential_from_seed(u, sys.profile, u1_derivative=du)
        assert np.max(np.abs(w.values - x / np.sqrt(2))) < 1e-12

    def test_cosine_seed_matches_closed_form(self, cosine_system):
        sys = cosine_system
        u1, du1 = pm.closed_form_state(sys, 1)
        w = pm.superpotential_from_seed(u1, sys.profile, u1_derivative=du1)
        x = sys.grid.points
        sel = (x > 0.1) & ~w.mask_array()
        assert np.max(np.abs(w.values[sel] - _closed_form_w1(x[sel]))) < 1e-4

    def test_nodeless_seed_has_no_poles(self, cosine_system):
        w = pm.superpotential_from_seed(
            cosine_system.psi0, cosine_system.profile,
            u1_derivative=cosine_system.psi0_derivative,
        )
        assert w.mask is None

    def test_zero_seed_rejected(self, cosine_system):
        zero = SampledFunction(cosine_system.grid, np.zeros(cosine_system.grid.n_points))
        with pytest.raises(InvalidSeedError):
            pm.superpotential_from_seed(zero, cosine_system.profile)


class TestFirstOrderTransform:
    def test_constant_mass_shape_invariance(self, constant_system):
        # seeding with the extremal state shifts the oscillator by delta_e
        sys = constant_system
        t = pm.first_order_transform(sys, sys.psi0, 0.5, sys.psi0_derivative)
        shifted = sys.potential.values + sys.delta_e
        assert np.max(np.abs(t.partner_potential.values - shifted)) < 1e-8

    def test_cosine_partner_matches_closed_form(self, cosine_first_transform):
        t = cosine_first_transform
        x = t.grid.points
        sel = (x > 0.1) & ~t.partner_potential.mask_array()
        diff = np.abs(t.partner_potential.values[sel] - _closed_form_v1(x[sel]))
        assert np.max(diff) < 1e-3

    def test_cosine_partner_includes_delta_e_offset(self, cosine_first_transform):
        # far from the pole the 1/E^2 term dies out; V1 - V0 -> delta_e
        t = cosine_first_transform
        x = t.grid.points
        sel = x > 6.0
        gap = t.partner_potential.values[sel] - t.base_potential.values[sel]
        e = _elliptic(x[sel])
        assert np.max(np.abs(gap - DE - 1.0 / (4 * (M0 + 1) * e**2))) < 1e-4

    def test_singularity_at_origin_only(self, cosine_first_transform):
        locs = cosine_first_transform.singularities.locations
        assert len(locs) == 1
        assert abs(locs[0]) < 1e-10

    def test_two_route_agreement_recorded(self, cosine_first_transform):
        assert cosine_first_transform.riccati_deviation < 5e-3

    def test_wrong_energy_seed_rejected(self, cosine_system):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        with pytest.raises(InvalidSeedError) as info:
            pm.first_order_transform(cosine_system, u1, 2.7, du1)
        assert info.value.residual is not None and info.value.residual > 1e-4

    def test_finite_difference_seed_route(self, cosine_system):
        # without an analytic derivative the transform still works, at the
        # finite-difference accuracy floor
        u1, _ = pm.closed_form_state(cosine_system, 1)
        t = pm.first_order_transform(cosine_system, u1, 1.5)
        x = t.grid.points
        ring = susy.exclusion_ring(t)
        sel = (x > 0.4) & (x < x[-8]) & ~t.partner_potential.mask_array() & ~ring
        diff = np.abs(t.partner_potential.values[sel] - _closed_form_v1(x[sel]))
        assert np.max(diff) < 5e-2


class TestStateMaps:
    def test_seed_maps_to_zero(self, cosine_system, cosine_first_transform):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        out = pm.map_state_first(cosine_first_transform, u1, du1)
        assert np.all(out.values == 0.0)

    def test_mapped_extremal_is_partner_eigenstate(
        self, cosine_system, cosine_first_transform
    ):
        t = cosine_first_transform
        phi0 = pm.map_state_first(t, cosine_system.psi0, cosine_system.psi0_derivative)
        h1 = pm.partner_hamiltonian(t)
        residual = pm.eigen_residual(
            h1, phi0, 0.5 * DE, x_window=susy.residual_window(t)
        )
        assert residual < 1e-3

    def test_constant_mass_map_gives_shifted_ground_state(self, constant_system):
        sys = constant_system
        t = pm.first_order_transform(sys, sys.psi0, 0.5, sys.psi0_derivative)
        psi1 = pm.nth_state(sys, 1).wavefunction
        mapped = pm.map_state_first(t, psi1)
        x = sys.grid.points
        expected = np.exp(-(x**2) / 2)
        expected /= np.sqrt(np.trapezoid(expected**2, x))
        overlap = abs(np.trapezoid(mapped.values * expected, x))
        assert overlap > 1 - 1e-6

    def test_missing_state_reciprocal_gaussian(self, constant_system):
        sys = constant_system
        t = pm.first_order_transform(sys, sys.psi0, 0.5, sys.psi0_derivative)
        missing = pm.missing_state_first(t)
        # exp(+x^2/2) piles its mass at the grid edges: not normalizable on R
        assert not pm.looks_normalizable(missing)
        product = missing.values * sys.psi0.values  # proportional to sqrt(m)
        interior = product[50:-50]
        assert np.max(interior) / np.min(interior) == pytest.approx(1.0, rel=1e-6)

    def test_missing_state_is_partner_eigenstate(
        self, cosine_system, cosine_first_transform
    ):
        t = cosine_first_transform
        missing = pm.missing_state_first(t)
        h1 = pm.partner_hamiltonian(t)
        residual = pm.eigen_residual(
            h1, missing, 1.5 * DE, pointwise=True,
            x_window=susy.residual_window(t, inset_fraction=0.25),
        )
        assert residual < 1e-2

    def test_no_regular_subdomain_error(self, cosine_system):
        rng = np.random.default_rng(5)
        noise = rng.normal(size=cosine_system.grid.n_points)
        sign_flipper = SampledFunction(cosine_system.grid, noise)
        with pytest.raises(NoRegularSubdomainError):
            # a sign-flipping seed masks everything
            t = pm.first_order_transform.__wrapped__ if False else None
            susy._normalize_subdomains(
                cosine_system.grid,
                noise,
                susy.singularity_mask(
                    cosine_system.grid,
                    susy.detect_zeros(cosine_system.grid, sign_flipper.values),
                ),
            )


class TestSecondOrderNonConfluent:
    def test_equal_energies_redirects_to_confluent(self, cosine_system):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        u2, du2 = pm.closed_form_state(cosine_system, 2)
        with pytest.raises(WrongAlgorithmError):
            pm.second_order_nonconfluent(cosine_system, u1, 1.5, u2, 1.5, du1, du2)

    def test_proportional_seeds_rejected(self, cosine_system):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        doubled = SampledFunction(cosine_system.grid, 2 * u1.values)
        ddoubled = SampledFunction(cosine_system.grid, 2 * du1.values)
        with pytest.raises(DegenerateWronskianError):
            pm.second_order_nonconfluent(
                cosine_system, u1, 1.5, doubled, 2.5, du1, ddoubled
            )

    def test_partner_potential_regular_at_origin(self, cosine_second_transform):
        assert cosine_second_transform.singularities.is_regular
        i0 = cosine_second_transform.grid.index_of(0.0)
        assert np.isfinite(cosine_second_transform.partner_potential2.values[i0])

    def test_superpotential_matches_closed_form(self, cosine_second_transform):
        t = cosine_second_transform
        x = t.grid.points
        sel = (x > 0.1) & ~t.superpotential2.mask_array()
        diff = np.abs(t.superpotential2.values[sel] - _closed_form_w2(x[sel]))
        assert np.max(diff) < 1e-4

    def test_partner_potential_matches_closed_form(self, cosine_second_transform):
        t = cosine_second_transform
        x = t.grid.points
        sel = x > 0.1
        diff = np.abs(t.partner_potential2.values[sel] - _closed_form_v2(x[sel]))
        assert np.max(diff) < 1e-4

    def test_spectrum_has_gap(self, cosine_second_transform):
        t = cosine_second_transform
        op = pm.discretize(
            t.first.profile, t.partner_potential2, pm.BoundaryCondition.dirichlet()
        )
        report = pm.solve_spectrum(op, 4)
        expected = np.array([0.5, 3.5, 4.5, 5.5])
        assert np.max(np.abs(report.eigenvalues - expected)) < 1e-2
        for absent in (1.5, 2.5):
            assert np.min(np.abs(report.eigenvalues - absent)) > 0.5

    def test_missing_state_identity_and_residual(self, cosine_second_transform):
        t = cosine_second_transform
        chi = pm.missing_state_second(t)
        # chi * W(u1,u2) / (m u1) must be constant on each subdomain
        grid = t.grid
        m = t.first.profile.m(grid.points)
        u1 = t.first.seed.values
        du1 = t.first.seed_derivative.values
        wr = u1 * t.seed2_derivative.values - du1 * t.seed2.values
        ratio = chi.values * wr / (m * u1)
        x = grid.points
        right = ratio[(x > 0.5) & (x < 4.0)]
        assert np.max(right) / np.min(right) == pytest.approx(1.0, rel=1e-8)
        h2 = pm.partner_hamiltonian(t)
        residual = pm.eigen_residual(
            h2, chi, 2.5 * DE, pointwise=True,
            x_window=susy.residual_window(t, inset_fraction=0.3),
        )
        assert residual < 1e-2

    def test_missing_state_not_normalizable(self, cosine_second_transform):
        # consistent with 5 delta_e / 2 falling in the spectral gap
        chi = pm.missing_state_second(cosine_second_transform)
        assert not pm.looks_normalizable(chi)

    def test_wrong_mode_errors(self, cosine_system, cosine_second_transform):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        conf = pm.confluent_transform(cosine_system, u1, 1.5, 0.2, u1_derivative=du1)
        with pytest.raises(WrongModeError):
            pm.missing_state_second(conf)
        with pytest.raises(WrongModeError):
            pm.confluent_missing_state(cosine_second_transform)

    def test_sequential_equals_combined(self, cosine_system, cosine_second_transform):
        from pdmsusy.verify import _sequential_vs_combined

        deviation = _sequential_vs_combined(cosine_system, cosine_second_transform)
        assert deviation < 5e-3

    def test_map_state_second_reaches_partner_ground(
        self, cosine_system, cosine_second_transform
    ):
        t = cosine_second_transform
        phi0 = pm.map_state_first(
            t.first, cosine_system.psi0, cosine_system.psi0_derivative
        )
        chi0 = pm.map_state_second(t, phi0)
        op = pm.discretize(
            t.first.profile, t.partner_potential2, pm.BoundaryCondition.dirichlet()
        )
        oracle = pm.solve_spectrum(op, 1).eigenfunctions[0]
        keep = ~chi0.mask_array()
        num = abs(np.sum(chi0.values[keep] * oracle.values[keep]))
        den = np.sqrt(
            np.sum(chi0.values[keep] ** 2) * np.sum(oracle.values[keep] ** 2)
        )
        assert num / den > 0.999

    def test_second_seed_image_vanishes(self, cosine_system, cosine_second_transform):
        # chi_2 = A_2 A_1 psi_2 = 0 because A_2 annihilates v_2 = A_1 psi_2
        t = cosine_second_transform
        psi2, dpsi2 = pm.closed_form_state(cosine_system, 2)
        phi2 = pm.map_state_first(t.first, psi2, dpsi2)
        chi2 = pm.map_state_second(t, phi2)
        assert np.all(chi2.values == 0.0)

    def test_first_seed_image_vanishes(self, cosine_system, cosine_second_transform):
        # chi_1 = 0 as well: A_1 already annihilates psi_1
        t = cosine_second_transform
        psi1, dpsi1 = pm.closed_form_state(cosine_system, 1)
        phi1 = pm.map_state_first(t.first, psi1, dpsi1)
        assert np.all(phi1.values == 0.0)


class TestConfluent:
    def test_d_zero_is_identity(self, cosine_system):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        t = pm.confluent_transform(cosine_system, u1, 1.5, 0.0, u1_derivative=du1)
        assert np.max(np.abs(
            t.partner_potential2.values - cosine_system.potential.values
        )) == 0.0
        missing = pm.confluent_missing_state(t)
        overlap = abs(pm.inner_product(missing, pm.l2_normalize(u1)))
        assert overlap > 1 - 1e-12

    def test_d_outside_range_rejected(self, cosine_system):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        with pytest.raises(InvalidArgumentError):
            pm.confluent_transform(cosine_system, u1, 1.5, 1.2, u1_derivative=du1)

    def test_d_one_with_left_anchor_monotone_and_regular(self, cosine_system):
        sys = cosine_system
        u1n = pm.l2_normalize(pm.closed_form_state(sys, 1)[0])
        du1n = None
        t = pm.confluent_transform(
            sys, u1n, 1.5, 1.0, anchor=sys.grid.x_min, u1_derivative=du1n
        )
        w = t.w_function.values
        assert t.singularities.is_regular
        assert np.all(np.diff(w) >= -1e-15)
        assert w[0] == pytest.approx(0.0, abs=1e-15)
        assert w[-1] == pytest.approx(1.0, abs=1e-6)

    def test_singular_only_above_threshold(self, cosine_system):
        sys = cosine_system
        u1, du1 = pm.closed_form_state(sys, 1)
        d_crit, flag = pm.critical_d(sys, u1, 1.5, u1_derivative=du1)
        assert not flag
        below = pm.confluent_transform(sys, u1, 1.5, d_crit - 0.02, u1_derivative=du1)
        above = pm.confluent_transform(sys, u1, 1.5, d_crit + 0.02, u1_derivative=du1)
        assert below.singularities.is_regular
        assert not above.singularities.is_regular

    def test_critical_d_matches_reported_threshold(self, cosine_system):
        u1, du1 = pm.closed_form_state(cosine_system, 1)
        d_crit, flag = pm.critical_d(cosine_system, u1, 1.5, u1_derivative=du1)
        assert not flag
        assert d_crit == pytest.approx(0.360691, abs=1e-3)

    def test_critical_d_dense_scan_oracle(self, cosine_system):
        # brute-force (d, x) scan confirms the bisection threshold
        sys = cosine_system
        u1, du1 = pm.closed_form_state(sys, 1)
        d_crit, _ = pm.critical_d(sys, u1, 1.5, u1_derivative=du1)
        integral = pm.integrate_cumulative(
            SampledFunction(sys.grid, u1.values**2), 0.0
        ).values
        ds = np.linspace(0.0, 1.0, 2001)
        singular = np.array([
            np.min((1 - d) + d * integral[1:-1]) <= 0 for d in ds
        ])
        first_singular = ds[np.argmax(singular)]
        assert abs(first_singular - d_crit) < 1e-3

    def test_nodeless_seed_with_left_anchor_regular_everywhere(self, cosine_system):
        sys = cosine_system
        psi0n = sys.psi0
        d_crit, flag = pm.critical_d(
            sys, psi0n, 0.5, anchor=sys.grid.x_min,
            u1_derivative=sys.psi0_derivative,
        )
        assert flag and d_crit == 1.0
        # dense scan agrees: no d in [0, 1] produces an interior zero
        integral = pm.integrate_cumulative(
            SampledFunction(sys.grid, psi0n.values**2), sys.grid.x_min
        ).values
        for d in np.linspace(0.0, 1.0, 101):
            assert np.min((1 - d) + d * integral[1:-1]) > 0

    def test_constant_mass_sign_criterion(self, constant_system):
        # w keeps one sign whenever (1 - d) and d * integral share theirs
        sys = constant_system
        u1n = pm.l2_normalize(pm.closed_form_state(sys, 1)[0])
        d_crit, flag = pm.critical_d(sys, u1n, 1.5, anchor=sys.grid.x_min)
        assert flag and d_crit == 1.0

    def test_small_d_linear_response(self, cosine_system):
        sys = cosine_system
        u1, du1 = pm.closed_form_state(sys, 1)
        deltas = []
        for d in (1e-3, 2e-3):
            t = pm.confluent_transform(sys, u1, 1.5, d, u1_derivative=du1)
            deltas.append(np.nanmax(np.abs(
                t.partner_potential2.values - sys.potential.values
            )))
        assert deltas[1] / deltas[0] == pytest.approx(2.0, rel=0.15)


class TestOperatorIdentities:
    def test_intertwining_identity_operator_is_exact(self, cosine_system):
        h0 = pm.hamiltonian_operator(cosine_system.profile, cosine_system.potential)
        tests = pm.gaussian_test_functions(cosine_system.grid)
        assert pm.intertwining_residual(h0, h0, lambda f: f, tests) == 0.0

    def test_needs_three_tests(self, cosine_system):
        h0 = pm.hamiltonian_operator(cosine_system.profile, cosine_system.potential)
        tests = pm.gaussian_test_functions(cosine_system.grid, count=2)
        with pytest.raises(InvalidArgumentError):
            pm.intertwining_residual(h0, h0, lambda f: f, tests)

    def test_first_order_intertwining_and_convergence(self):
        profile = pm.cosine_profile(M0)
        residuals = []
        for n in (2001, 4001, 8001):
            grid = pm.auto_grid(profile, DE, n_points=n)
            sys = pm.build_ladder_system(profile, grid, DE)
            u1, du1 = pm.closed_form_state(sys, 1)
            t = pm.first_order_transform(sys, u1, 1.5, du1)
            h0 = pm.hamiltonian_operator(profile, sys.potential)
            h1 = pm.partner_hamiltonian(t)
            a1, _ = pm.first_order_operators(t)
            tests = pm.gaussian_test_functions(
                grid, window=susy.residual_window(t), width_fraction=0.1
            )
            residuals.append(pm.intertwining_residual(
                h0, h1, a1, tests, exclude=susy.exclusion_ring(t)
            ))
        orders = np.log2(np.array(residuals[:-1]) / residuals[1:])
        assert residuals[1] < 5e-3  # n = 4001
        assert np.all(orders > 1.7)

    def test_constant_mass_intertwining(self, constant_system):
        sys = constant_system
        t = pm.first_order_transform(sys, sys.psi0, 0.5, sys.psi0_derivative)
        h0 = pm.hamiltonian_operator(sys.profile, sys.potential)
        h1 = pm.partner_hamiltonian(t)
        a1, _ = pm.first_order_operators(t)
        tests = pm.gaussian_test_functions(sys.grid)
        assert pm.intertwining_residual(h0, h1, a1, tests) < 1e-4

    def test_factorization_identities_full_chain(
        self, cosine_system, cosine_first_transform, cosine_second_transform
    ):
        sys = cosine_system
        t1, t2 = cosine_first_transform, cosine_second_transform
        h0 = pm.hamiltonian_operator(sys.profile, sys.potential)
        h1 = pm.partner_hamiltonian(t1)
        h2 = pm.partner_hamiltonian(t2)
        a1, a1d = pm.first_order_operators(t1)
        a2, a2d = pm.second_order_operators(t2)
        window = susy.residual_window(t1)
        tests = pm.gaussian_test_functions(sys.grid, window=window)
        ring = susy.exclusion_ring(t2)
        assert pm.factorization_residual(h0, a1, a1d, 1.5, tests, True, exclude=ring) < 1e-3
        assert pm.factorization_residual(h1, a1, a1d, 1.5, tests, False, exclude=ring) < 1e-3
        assert pm.factorization_residual(h1, a2, a2d, 2.5, tests, True, exclude=ring) < 1e-3
        assert pm.factorization_residual(h2, a2, a2d, 2.5, tests, False, exclude=ring) < 1e-3


class TestPartnerLadder:
    def test_third_order_raising_annihilates_mapped_extremal(
        self, cosine_system, cosine_first_transform
    ):
        # L_1^+ phi_0 = A_1 L+ A_1^dag phi_0 ~ A_1 (L+ psi_0) ... A_1 u_1 = 0
        t = cosine_first_transform
        sys = cosine_system
        phi0 = pm.map_state_first(t, sys.psi0, sys.psi0_derivative)
        out = pm.partner_ladder_apply(t, sys, phi0, "up")
        window = susy.residual_window(t, inset_fraction=0.2)
        x = sys.grid.points
        sel = (x >= window[0]) & (x <= window[1]) & ~out.mask_array()
        scale = np.nanmax(np.abs(phi0.values[sel]))
        assert np.nanmax(np.abs(out.values[sel])) < 5e-2 * scale

    def test_fifth_order_lowering_annihilates_partner_ground(
        self, cosine_system, cosine_second_transform
    ):
        t = cosine_second_transform
        sys = cosine_system
        op = pm.discretize(
            t.first.profile, t.partner_potential2, pm.BoundaryCondition.dirichlet()
        )
        chi0 = pm.solve_spectrum(op, 1).eigenfunctions[0]
        down = pm.partner_ladder_apply(t, sys, chi0, "down")
        a1, a1d = pm.first_order_operators(t.first)
        a2, a2d = pm.second_order_operators(t)
        intermediate = a1d(a2d(chi0))
        x = sys.grid.points
        sel = (np.abs(x) > 1.0) & (np.abs(x) < 5.0) & ~down.mask_array()
        ratio = np.nanmax(np.abs(down.values[sel])) / np.nanmax(
            np.abs(intermediate.values[sel])
        )
        assert ratio < 2e-2

    def test_fifth_order_raising_moves_up_one_level(
        self, cosine_system, cosine_second_transform
    ):
        t = cosine_second_transform
        sys = cosine_system
        op = pm.discretize(
            t.first.profile, t.partner_potential2, pm.BoundaryCondition.dirichlet()
        )
        report = pm.solve_spectrum(op, 3)  # levels 0.5, 3.5, 4.5
        state_35 = report.eigenfunctions[1]
        up = pm.partner_ladder_apply(t, sys, state_35, "up")
        h2 = pm.partner_hamiltonian(t)
        rq = pm.rayleigh_quotient(h2, up, interior_margin=30)
        assert rq == pytest.approx(4.5, abs=2e-2)
        oracle_45 = report.eigenfunctions[2]
        keep = ~up.mask_array()
        num = abs(np.sum(up.values[keep] * oracle_45.values[keep]))
        den = np.sqrt(np.sum(up.values[keep] ** 2) * np.sum(oracle_45.values[keep] ** 2))
        assert num / den > 0.99

    def test_direction_validated(self, cosine_system, cosine_first_transform):
        with pytest.raises(InvalidArgumentError):
            pm.partner_ladder_apply(
                cosine_first_transform, cosine_system, cosine_system.psi0, "sideways"
            )

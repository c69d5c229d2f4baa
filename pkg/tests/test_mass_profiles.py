import numpy as np
import pytest

from pdmsusy import (
    BDD_ORDERING,
    DomainError,
    InvalidArgumentError,
    OrderingParameters,
    SampledFunction,
    build_grid,
    constant_profile,
    cosine_profile,
    linear_profile,
    load_profile_csv,
    quadratic_profile,
    tabulated_profile,
    v_from_veff,
    veff_from_ordering,
)


class TestConstantProfile:
    def test_values_and_derivatives(self):
        p = constant_profile(1.0)
        assert p.m(np.array([5.0]))[0] == 1.0
        assert p.m1(np.array([5.0]))[0] == 0.0
        assert p.m2(np.array([5.0]))[0] == 0.0

    def test_zero_mass_rejected(self):
        with pytest.raises(InvalidArgumentError):
            constant_profile(0.0)

    def test_second_derivative_everywhere_zero(self):
        p = constant_profile(2.0)
        x = np.linspace(-7, 7, 23)
        assert np.all(p.m2(x) == 0.0)


class TestQuadraticProfile:
    def test_value_at_origin(self):
        assert quadratic_profile(0.15).m(np.array([0.0]))[0] == pytest.approx(0.15)

    def test_value_at_one(self):
        assert quadratic_profile(0.15).m(np.array([1.0]))[0] == pytest.approx(0.65)

    def test_derivative(self):
        assert quadratic_profile(0.15).m1(np.array([2.0]))[0] == pytest.approx(2.0)

    def test_nonpositive_offset_rejected(self):
        with pytest.raises(InvalidArgumentError):
            quadratic_profile(0.0)


class TestCosineProfile:
    def test_minimum_at_pi(self):
        assert cosine_profile(1.15).m(np.array([np.pi]))[0] == pytest.approx(0.15)

    def test_maximum_at_zero(self):
        assert cosine_profile(2.0).m(np.array([0.0]))[0] == pytest.approx(3.0)

    def test_height_boundary_rejected(self):
        with pytest.raises(InvalidArgumentError):
            cosine_profile(1.0)


class TestLinearProfile:
    def test_values(self):
        p = linear_profile()
        assert p.m(np.array([4.0]))[0] == 4.0
        assert p.m1(np.array([4.0]))[0] == 1.0

    def test_negative_argument_rejected(self):
        with pytest.raises(DomainError):
            linear_profile().m(np.array([-1.0]))

    def test_origin_rejected(self):
        with pytest.raises(DomainError):
            linear_profile().m(np.array([0.0]))


class TestTabulatedProfile:
    def test_interpolates_quadratic(self):
        x = np.linspace(-5, 5, 200)
        p = tabulated_profile(x, x**2 / 2 + 0.15)
        assert p.m(np.array([1.0]))[0] == pytest.approx(0.65, abs=1e-6)
        assert p.m1(np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-4)

    def test_too_few_samples_rejected(self):
        with pytest.raises(InvalidArgumentError):
            tabulated_profile([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])

    def test_duplicate_abscissa_rejected(self):
        x = np.linspace(0, 1, 20)
        x[10] = x[9]
        with pytest.raises(InvalidArgumentError):
            tabulated_profile(x, np.ones(20))

    def test_nonpositive_mass_rejected(self):
        x = np.linspace(0, 1, 20)
        m = np.ones(20)
        m[7] = -0.1
        with pytest.raises(InvalidArgumentError):
            tabulated_profile(x, m)

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "profile.csv"
        x = np.linspace(-3, 3, 64)
        m = np.cos(x) + 2.0
        lines = ["x,m"] + [f"{a},{b}" for a, b in zip(x, m)]
        path.write_text("\n".join(lines), encoding="utf-8")
        p = load_profile_csv(path)
        assert p.m(np.array([0.5]))[0] == pytest.approx(np.cos(0.5) + 2.0, abs=1e-6)

    def test_csv_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(InvalidArgumentError):
            load_profile_csv(path)


@pytest.mark.parametrize(
    "profile,where",
    [
        (constant_profile(1.3), (-3.0, 3.0)),
        (quadratic_profile(0.15), (-3.0, 3.0)),
        (cosine_profile(1.15), (-3.0, 3.0)),
        (linear_profile(), (0.5, 4.0)),
    ],
    ids=["constant", "quadratic", "cosine", "linear"],
)
def test_analytic_derivatives_match_central_differences(profile, where):
    """eval_m1/eval_m2 agree with O(h^2) differences of eval_m on refinement."""
    for order, evaluate in ((1, profile.m1), (2, profile.m2)):
        errors = []
        for h in (1e-2, 5e-3, 2.5e-3):
            x = np.linspace(*where, 101)
            if order == 1:
                fd = (profile.m(x + h) - profile.m(x - h)) / (2 * h)
            else:
                fd = (profile.m(x + h) - 2 * profile.m(x) + profile.m(x - h)) / h**2
            errors.append(np.max(np.abs(fd - evaluate(x))))
        if max(errors) < 1e-8:  # differences exact up to roundoff (polynomials)
            continue
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders > 1.8)


class TestOrderingParameters:
    def test_constraint_enforced(self):
        with pytest.raises(InvalidArgumentError):
            OrderingParameters(alpha=0.0, beta=0.0, gamma=0.0)

    def test_bdd_ordering_satisfies_constraint(self):
        assert BDD_ORDERING.alpha + BDD_ORDERING.beta + BDD_ORDERING.gamma == -1.0


class TestEffectivePotential:
    def _potential(self, grid):
        return SampledFunction(grid, np.sin(grid.points))

    def test_bdd_ordering_is_identity(self):
        grid = build_grid(-2.0, 2.0, 101)
        v = self._potential(grid)
        out = veff_from_ordering(v, cosine_profile(1.5), BDD_ORDERING)
        np.testing.assert_array_equal(out.values, v.values)

    def test_constant_mass_is_identity_for_any_ordering(self):
        grid = build_grid(-2.0, 2.0, 101)
        v = self._potential(grid)
        ordering = OrderingParameters(alpha=-0.3, beta=-0.5, gamma=-0.2)
        out = veff_from_ordering(v, constant_profile(2.0), ordering)
        np.testing.assert_array_equal(out.values, v.values)

    def test_quadratic_profile_term_by_term(self):
        # independent evaluation of the correction at x = 0 for
        # alpha = -1, beta = 0, gamma = 0 on m = x^2/2 + 0.15
        grid = build_grid(-1.0, 1.0, 101)
        v = SampledFunction(grid, np.zeros(grid.n_points))
        ordering = OrderingParameters(alpha=-1.0, beta=0.0, gamma=0.0)
        out = veff_from_ordering(v, quadratic_profile(0.15), ordering)
        m0 = 0.15
        m_at_0, m1_at_0, m2_at_0 = m0, 0.0, 1.0
        alpha, beta = -1.0, 0.0
        coeff = alpha**2 + alpha * beta + alpha + beta + 1.0
        expected = (1.0 + beta) * m2_at_0 / (4 * m_at_0**2) - (
            m1_at_0**2 / (2 * m_at_0**3)
        ) * coeff
        i0 = grid.index_of(0.0)
        assert out.values[i0] == pytest.approx(expected, rel=1e-12)

    def test_round_trip_inverse(self):
        grid = build_grid(-2.0, 2.0, 257)
        v = self._potential(grid)
        ordering = OrderingParameters(alpha=0.25, beta=-0.75, gamma=-0.5)
        profile = cosine_profile(1.3)
        back = v_from_veff(veff_from_ordering(v, profile, ordering), profile, ordering)
        assert np.max(np.abs(back.values - v.values)) < 1e-12

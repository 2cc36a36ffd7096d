"""Exponential-family structure, weighted Bregman geometry, identity suite."""

import math

import numpy as np
import pytest
from scipy import integrate

from wchernoff import (
    AffinityCurve,
    Categorical,
    Cauchy,
    ChernoffArc,
    ConstWeight,
    Exponential,
    ExpTiltWeight,
    Gaussian,
    Poisson,
    PreconditionError,
    TableWeight,
    UnsupportedCombinationError,
    chernoff,
    chernoff_arc_derivative,
    chernoff_efficiency,
    exponential_family,
    family_of_pair,
    gaussian_mean_family,
    poisson_family,
    verify_identities,
    weighted_bregman,
    weighted_kl,
    weighted_normaliser,
)
from wchernoff.models import poisson_truncation

P2, P1 = Poisson(2.0), Poisson(1.0)
E2, E1 = Exponential(2.0), Exponential(1.0)
G1 = Gaussian([1.0], [[1.0]])
G0 = Gaussian([0.0], [[1.0]])
CONST = ConstWeight()


def _families_with_grids():
    return [
        (poisson_family(0.0), np.linspace(-1.0, 1.5, 9)),
        (poisson_family(0.25), np.linspace(-1.0, 1.5, 9)),
        (exponential_family(0.0), np.linspace(-4.0, -0.5, 9)),
        (exponential_family(0.5), np.linspace(-4.0, -0.8, 9)),
        (gaussian_mean_family(1.0, 0.0), np.linspace(-2.0, 2.0, 9)),
        (gaussian_mean_family(1.5, 0.25), np.linspace(-2.0, 2.0, 9)),
    ]


class TestExpFamily1D:
    def test_fhat_is_f_plus_lne(self):
        for fam, grid in _families_with_grids():
            for t in grid:
                assert fam.Fhat(t) == pytest.approx(fam.F(t) + fam.lnE(t), abs=1e-10)

    def test_convexity_on_grid(self):
        for fam, grid in _families_with_grids():
            f = np.array([fam.F(t) for t in grid])
            fh = np.array([fam.Fhat(t) for t in grid])
            for arr in (f, fh):
                assert np.all(arr[:-2] + arr[2:] - 2.0 * arr[1:-1] >= -1e-10)

    def test_dfhat_matches_central_differences(self):
        for fam, grid in _families_with_grids():
            for t in grid:
                h = 1e-6 * max(1.0, abs(t))
                numeric = (fam.Fhat(t + h) - fam.Fhat(t - h)) / (2.0 * h)
                assert fam.dFhat(t) == pytest.approx(numeric, rel=1e-6)

    def test_ghat_inverts_dfhat(self):
        for fam, grid in _families_with_grids():
            for t in grid:
                assert fam.Ghat(fam.dFhat(t)) == pytest.approx(t, rel=1e-10, abs=1e-10)

    def test_legendre_dual_consistency(self):
        # F*(F'(t)) = t F'(t) - F(t) and grad F* inverts F'
        for fam, grid in _families_with_grids():
            for t in grid:
                y = fam.dF(t)
                assert fam.Fstar(y) == pytest.approx(t * y - fam.F(t), abs=1e-10)
                assert fam.dFstar(y) == pytest.approx(t, rel=1e-12)

    def test_domain_enforced(self):
        fam = exponential_family(0.5)
        with pytest.raises(PreconditionError):
            fam.check_theta(-0.4)  # rate 0.4 < gamma

    def test_normaliser_matches_models(self):
        # lnE of the family equals the weighted normaliser of the model
        fam = poisson_family(0.25)
        t = math.log(2.0)
        assert fam.E_phi(t) == pytest.approx(
            weighted_normaliser(Poisson(2.0), ExpTiltWeight([0.25])), rel=1e-12)
        fam = exponential_family(0.5)
        assert fam.E_phi(-2.0) == pytest.approx(
            weighted_normaliser(Exponential(2.0), ExpTiltWeight([0.5])), rel=1e-12)


class TestFamilyOfPair:
    def test_poisson_pair(self):
        fam, t1, t2 = family_of_pair(P2, P1, CONST)
        assert fam.name == "poisson"
        assert t1 == pytest.approx(math.log(2.0))
        assert t2 == pytest.approx(0.0)

    def test_mixed_families_rejected(self):
        with pytest.raises(UnsupportedCombinationError):
            family_of_pair(P2, E1, CONST)

    def test_unequal_gaussian_variances_rejected(self):
        with pytest.raises(UnsupportedCombinationError):
            family_of_pair(Gaussian([0.0], [[1.0]]), Gaussian([1.0], [[2.0]]), CONST)

    def test_table_weight_rejected(self):
        with pytest.raises(UnsupportedCombinationError):
            family_of_pair(P2, P1, TableWeight([1.0, 2.0]))


class TestWeightedKL:
    def test_equal_models_zero(self):
        assert weighted_kl(P2, P2, ExpTiltWeight([0.25])) == pytest.approx(0.0, abs=1e-12)

    def test_poisson_const(self):
        assert weighted_kl(P2, P1, CONST) == pytest.approx(2.0 * math.log(2.0) - 1.0,
                                                           rel=1e-12)

    def test_poisson_tilt_vs_summation_oracle(self):
        g = 0.25
        val = weighted_kl(P2, P1, ExpTiltWeight([g]))
        ks = np.arange(poisson_truncation(2.0 * math.exp(g)) + 1)
        lp = P2.log_density(ks)
        lq = P1.log_density(ks)
        oracle = float(np.sum(np.exp(g * ks + lp) * (lp - lq)))
        assert val == pytest.approx(oracle, rel=1e-10)
        # closed form from E_phi and the tilted mean
        closed = math.exp(2.0 * (math.exp(g) - 1.0)) * (2.0 * math.exp(g) * math.log(2.0) - 1.0)
        assert val == pytest.approx(closed, rel=1e-12)

    def test_exponential_tilt_vs_quadrature_oracle(self):
        g = 0.5
        val = weighted_kl(E2, E1, ExpTiltWeight([g]))

        def integrand(x):
            lp = E2.log_density(x)
            return math.exp(g * x + lp) * (lp - E1.log_density(x))

        oracle, _ = integrate.quad(integrand, 0.0, np.inf)
        assert val == pytest.approx(oracle, rel=1e-8)

    def test_gaussian_tilt_vs_quadrature_oracle(self):
        g = 0.3
        val = weighted_kl(G1, G0, ExpTiltWeight([g]))

        def integrand(x):
            lp = G1.log_density([x])
            return math.exp(g * x + lp) * (lp - G0.log_density([x]))

        oracle, _ = integrate.quad(integrand, -np.inf, np.inf)
        assert val == pytest.approx(oracle, rel=1e-8)

    def test_cauchy_const(self):
        assert weighted_kl(Cauchy(0.0, 1.0), Cauchy(3.0, 2.0), CONST) == pytest.approx(
            math.log(18.0 / 8.0), rel=1e-12)

    def test_categorical_with_table(self):
        p = Categorical([0.5, 0.5])
        q = Categorical([0.25, 0.75])
        w = TableWeight([1.0, 2.0])
        expected = (1.0 * 0.5 * math.log(0.5 / 0.25)
                    + 2.0 * 0.5 * math.log(0.5 / 0.75))
        assert weighted_kl(p, q, w) == pytest.approx(expected, rel=1e-12)

    def test_categorical_infinite_when_q_vanishes(self):
        p = Categorical([0.5, 0.5])
        q = Categorical([1.0, 0.0])
        assert weighted_kl(p, q, CONST) == math.inf


class TestWeightedBregman:
    def test_zero_at_equal_arguments(self):
        fam = poisson_family(0.25)
        assert weighted_bregman(fam, 0.3, 0.3) == 0.0

    def test_poisson_const_example(self):
        fam = poisson_family(0.0)
        val = weighted_bregman(fam, math.log(2.0), 0.0)
        assert val == pytest.approx(2.0 - 1.0 - math.log(2.0), rel=1e-12)

    def test_kl_as_bregman(self):
        # D^w_KL(p_t1 || p_t2) = B^w(t2, t1) across families and weights
        cases = [
            (P2, P1, CONST),
            (P2, P1, ExpTiltWeight([0.25])),
            (E2, E1, CONST),
            (E2, E1, ExpTiltWeight([0.5])),
            (G1, G0, ExpTiltWeight([0.25])),
        ]
        for p, q, w in cases:
            fam, t1, t2 = family_of_pair(p, q, w)
            assert weighted_kl(p, q, w) == pytest.approx(
                weighted_bregman(fam, t2, t1), rel=1e-10, abs=1e-10)

    def test_domain_violation(self):
        fam = exponential_family(0.5)
        with pytest.raises(PreconditionError):
            weighted_bregman(fam, -2.0, -0.3)


class TestChernoffArc:
    CASES = [
        (P2, P1, ExpTiltWeight([0.25])),
        (E2, E1, ExpTiltWeight([0.5])),
        (G1, G0, CONST),
    ]

    @pytest.mark.parametrize("p,q,w", CASES)
    def test_normalisation(self, p, q, w):
        arc = ChernoffArc(AffinityCurve(p, q, w))
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            assert arc.total_mass(alpha) == pytest.approx(1.0, abs=1e-8)

    def test_endpoints_are_tilted_densities(self):
        w = ExpTiltWeight([0.25])
        arc = ChernoffArc(AffinityCurve(P2, P1, w))
        e_p = weighted_normaliser(P2, w)
        for k in (0, 1, 3, 6):
            tilted = 0.25 * k + P2.log_density(k) - math.log(e_p)
            assert arc.log_density(1.0, np.array([float(k)]))[0] == pytest.approx(
                tilted, abs=1e-12)

    def test_derivative_endpoint_identities(self):
        # F'(1) = D^w_KL(p||q)/E_phi(p), F'(0) = -D^w_KL(q||p)/E_phi(q)
        for p, q, w in self.CASES:
            curve = AffinityCurve(p, q, w)
            e_p = weighted_normaliser(p, w)
            e_q = weighted_normaliser(q, w)
            assert chernoff_arc_derivative(curve, 1.0) == pytest.approx(
                weighted_kl(p, q, w) / e_p, rel=1e-9)
            assert chernoff_arc_derivative(curve, 0.0) == pytest.approx(
                -weighted_kl(q, p, w) / e_q, rel=1e-9)

    def test_derivative_zero_for_equal_models(self):
        curve = AffinityCurve(P2, P2, CONST)
        for alpha in (0.2, 0.5, 0.9):
            assert chernoff_arc_derivative(curve, alpha) == pytest.approx(0.0, abs=1e-12)

    def test_stationarity_at_alpha_star(self):
        res = chernoff(P2, P1, CONST)
        curve = AffinityCurve(P2, P1, CONST)
        assert chernoff_arc_derivative(curve, res.alpha_star) == pytest.approx(0.0, abs=1e-8)
        assert chernoff_arc_derivative(curve, 1.0) == pytest.approx(
            2.0 * math.log(2.0) - 1.0, rel=1e-10)


class TestVerifyIdentities:
    FIXTURES = [
        (P2, P1, CONST),
        (P2, P1, ExpTiltWeight([0.25])),
        (E2, E1, CONST),
        (E2, E1, ExpTiltWeight([0.5])),
        (G1, G0, CONST),
        (G1, G0, ExpTiltWeight([0.25])),
    ]

    @pytest.mark.parametrize("p,q,w", FIXTURES)
    def test_all_applicable_residuals_small(self, p, q, w):
        report = verify_identities(p, q, w)
        assert report["max_applicable_residual"] < 1e-8
        for name, entry in report["identities"].items():
            if entry["applicable"]:
                assert entry["residual"] < 1e-8, name

    def test_boundary_case_marks_not_applicable(self):
        report = verify_identities(P2, P1, ExpTiltWeight([math.log(2.0)]))
        assert report["boundary"] == "at_zero"
        for name in ("bisector", "chernoff_kl", "bregman_arc", "one_parameter_alpha"):
            assert not report["identities"][name]["applicable"]
        # the alpha-free identities still hold
        assert report["identities"]["kl_as_bregman"]["residual"] < 1e-8
        assert report["identities"]["primal_dual"]["residual"] < 1e-8
        assert report["identities"]["jensen_decomposition"]["residual"] < 1e-8

    def test_equal_models_flat(self):
        report = verify_identities(P2, P2, CONST)
        assert report["boundary"] == "flat"
        assert report["max_applicable_residual"] < 1e-8
        assert not report["identities"]["bisector"]["applicable"]

    def test_unsupported_pair(self):
        with pytest.raises(UnsupportedCombinationError):
            verify_identities(Cauchy(0.0, 1.0), Cauchy(1.0, 1.0), CONST)


class TestChernoffEfficiency:
    def test_equal_designs(self):
        assert chernoff_efficiency(0.3, 0.3) == 1.0

    def test_poisson_doubling(self):
        d1 = chernoff(Poisson(2.0), Poisson(1.0), CONST).d_c_w
        d2 = chernoff(Poisson(4.0), Poisson(2.0), CONST).d_c_w
        assert chernoff_efficiency(d1, d2) == pytest.approx(0.5, rel=1e-10)

    def test_gaussian_separation(self):
        d1 = chernoff(Gaussian([1.0], [[1.0]]), G0, CONST).d_c_w
        d2 = chernoff(Gaussian([2.0], [[1.0]]), G0, CONST).d_c_w
        assert chernoff_efficiency(d1, d2) == pytest.approx(0.25, rel=1e-10)

    def test_zero_reference_rejected(self):
        with pytest.raises(PreconditionError):
            chernoff_efficiency(0.1, 0.0)

"""End-to-end acceptance checks.

Each test covers one numbered criterion, asserts its tolerance and runtime
budget, and prints a single ACCEPTANCE <n> ... PASS line on success.
"""

import json
import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from wchernoff import (
    AffinityCurve,
    BinaryTestProblem,
    Categorical,
    Cauchy,
    ConstWeight,
    Exponential,
    ExpTiltWeight,
    Gaussian,
    MAryProblem,
    Poisson,
    TableWeight,
    cauchy_bhattacharyya_half,
    cauchy_kl,
    chernoff,
    elliptic_k,
    mary_exponent,
    mary_optimal_loss,
    optimal_loss_exact,
    optimal_loss_mc,
    rate_function,
    tail_bound,
    tail_frequency,
    tilted_stats,
    verify_identities,
    weighted_normaliser,
    weighted_tv,
)
from wchernoff.cli import main as cli_main

CONST = ConstWeight()
G0 = Gaussian([0.0], [[1.0]])
G1 = Gaussian([1.0], [[1.0]])
P2, P1 = Poisson(2.0), Poisson(1.0)
E2, E1 = Exponential(2.0), Exponential(1.0)
BERN_P = Categorical([0.5, 0.5])
BERN_Q = Categorical([0.25, 0.75])


def _pass(record, num, message):
    line = f"ACCEPTANCE {num} {message}: PASS"
    record(line)
    print(line)


def _weight(gamma):
    return CONST if gamma == 0.0 else ExpTiltWeight([gamma])


def test_criterion_1_closed_form_cross_validation(acceptance_record):
    start = time.perf_counter()
    fixtures = [
        (G1, G0, "quadrature", [0.0, -0.25, 0.25]),
        (P2, P1, "summation", [0.0, 0.25, math.log(2.0)]),
        (E2, E1, "quadrature", [0.0, 0.5, 1.0]),
    ]
    checked = 0
    for p, q, oracle_mode, gammas in fixtures:
        for gamma in gammas:
            w = _weight(gamma)
            closed = AffinityCurve(p, q, w, mode="closed_form")
            oracle = AffinityCurve(p, q, w, mode=oracle_mode)
            # the Exponential pair with gamma = 1.0 has a pole at alpha = 0,
            # so the comparison grid stays inside the integrable range
            alphas = np.linspace(0.1, 0.9, 9) if (p is E2 and gamma == 1.0) \
                else np.linspace(0.05, 0.95, 10)
            for alpha in alphas:
                a = math.exp(closed.log_rho(float(alpha)))
                b = math.exp(oracle.log_rho(float(alpha)))
                assert abs(a - b) <= 1e-8 * max(abs(a), abs(b)), (p, gamma, alpha)
                checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 89
    assert elapsed < 5.0
    _pass(acceptance_record, 1, f"closed-form vs quadrature/summation (89 points, {elapsed:.2f}s)")


def test_criterion_2_alpha_star_and_chernoff_information(acceptance_record):
    start = time.perf_counter()
    # vectorised log rho formulas serve as the dense-grid brute-force oracle
    def f_gauss(gamma):
        # means 1 and 0, unit variance: -(alpha mu1^2 - mu_tilde^2)/2 with
        # mu_tilde = alpha + gamma
        return lambda a: -0.5 * (a - (a + gamma) ** 2)

    def f_poisson(a):
        return -2.0 * a - (1.0 - a) + 2.0 ** a

    def f_exp(a):
        # rates 2 and 1, tilt gamma = 1: lambda_alpha - gamma = alpha
        return a * math.log(2.0) - np.log(a)

    cases = [
        (G1, G0, CONST, f_gauss(0.0), 0.5, 0.125),
        (G1, G0, ExpTiltWeight([0.25]), f_gauss(0.25), 0.25, None),
        (P2, P1, CONST, f_poisson, 0.528766, 0.086071),
        (E2, E1, ExpTiltWeight([1.0]), f_exp, 1.0, -math.log(2.0)),
    ]
    for p, q, w, f_oracle, alpha_ref, d_ref in cases:
        res = chernoff(p, q, w)
        grid = np.linspace(1e-5, 1.0 - 1e-9, 100000)
        f_vals = f_oracle(grid)
        idx = int(np.argmin(f_vals))
        assert abs(res.d_c_w - (-f_vals[idx])) <= 1e-8
        assert abs(res.alpha_star - grid[idx]) <= 2e-4
        tol = 1e-8 if d_ref in (0.125, -math.log(2.0)) else 1e-6
        assert abs(res.alpha_star - alpha_ref) <= (1e-12 if alpha_ref in (0.5, 1.0)
                                                   else 1e-6)
        if d_ref is not None:
            assert abs(res.d_c_w - d_ref) <= tol
    # Gaussian closed alpha: 1/2 - gamma.delta / (delta Sigma^-1 delta)
    res = chernoff(G1, G0, ExpTiltWeight([0.25]))
    assert res.alpha_star == pytest.approx(0.5 - 0.25 * 1.0 / 1.0, abs=1e-10)
    elapsed = time.perf_counter() - start
    assert elapsed < 2.0
    _pass(acceptance_record, 2, f"solver vs dense-grid oracle on 4 cases ({elapsed:.2f}s)")


def test_criterion_3_identity_suite(acceptance_record):
    start = time.perf_counter()
    fixtures = [
        (P2, P1, CONST),
        (P2, P1, ExpTiltWeight([0.25])),
        (E2, E1, CONST),
        (E2, E1, ExpTiltWeight([0.5])),
        (G1, G0, CONST),
        (G1, G0, ExpTiltWeight([0.25])),
    ]
    worst = 0.0
    for p, q, w in fixtures:
        report = verify_identities(p, q, w)
        applicable = [name for name, entry in report["identities"].items()
                      if entry["applicable"]]
        assert len(applicable) >= 5
        for name in applicable:
            assert report["identities"][name]["residual"] < 1e-8, (p, w, name)
        worst = max(worst, report["max_applicable_residual"])
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _pass(acceptance_record, 3, f"identity residuals on 6 fixtures, max {worst:.2e} ({elapsed:.2f}s)")


def test_criterion_4_exponent_verification(acceptance_record):
    start = time.perf_counter()
    d_c = chernoff(BERN_P, BERN_Q, CONST).d_c_w
    exponents = []
    for n in range(1, 11):
        est = optimal_loss_exact(BinaryTestProblem(BERN_P, BERN_Q, CONST, n))
        assert est.exponent_estimate >= d_c - 1e-12, n
        exponents.append(est.exponent_estimate)
    # the gap to D_C^w oscillates with the parity of n; it shrinks
    # monotonically along the odd and the even sample sizes separately
    for sub in (exponents[0::2], exponents[1::2]):
        gaps = [e - d_c for e in sub]
        assert all(a >= b - 1e-12 for a, b in zip(gaps, gaps[1:]))
    ref = chernoff(P2, P1, CONST).d_c_w
    est = optimal_loss_mc(BinaryTestProblem(P2, P1, CONST, 50), 100000, seed=3)
    assert ref <= est.exponent_estimate <= ref + 0.03
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _pass(acceptance_record, 4, f"exact exponents n=1..10 and MC exponent {est.exponent_estimate:.5f} "
             f"in [{ref:.5f}, {ref + 0.03:.5f}] ({elapsed:.2f}s)")


def test_criterion_5_tv_identity_and_mary_sandwich(acceptance_record):
    start = time.perf_counter()
    for w in (CONST, TableWeight([1.0, 2.0])):
        ep = weighted_normaliser(BERN_P, w)
        eq = weighted_normaliser(BERN_Q, w)
        for n in (1, 2, 3):
            prob = BinaryTestProblem(BERN_P, BERN_Q, w, n)
            lhs = optimal_loss_exact(prob).value
            rhs = 0.5 * (ep ** n + eq ** n) - weighted_tv(prob)
            assert abs(lhs - rhs) < 1e-12
    triple = (BERN_P, BERN_Q, Categorical([0.75, 0.25]))
    total = mary_optimal_loss(MAryProblem(triple, CONST), 1).value
    assert abs(total - 1.5) < 1e-12
    for n in (1, 2):
        total = mary_optimal_loss(MAryProblem(triple, CONST), n).value
        pairwise = [optimal_loss_exact(
            BinaryTestProblem(triple[i], triple[j], CONST, n)).value
            for i in range(3) for j in range(i + 1, 3)]
        assert max(pairwise) <= total + 1e-12 <= sum(pairwise) + 2e-12
    out = mary_exponent(MAryProblem((Poisson(1.0), Poisson(2.0), Poisson(4.0)), CONST))
    pair_val = chernoff(Poisson(1.0), Poisson(2.0), CONST).d_c_w
    assert abs(out["c_m_w"] - pair_val) < 1e-8
    assert out["c_m_w"] == pytest.approx(0.086071, abs=1e-6)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _pass(acceptance_record, 5, f"TV identity and M-ary sandwich exact, C_M^w {out['c_m_w']:.6f} "
             f"({elapsed:.2f}s)")


def test_criterion_6_cauchy_closed_forms(acceptance_record):
    start = time.perf_counter()
    p, q = Cauchy(0.0, 1.0), Cauchy(2.0, 1.0)
    rho_closed = cauchy_bhattacharyya_half(p, q)
    rho_quad = AffinityCurve(p, q, CONST, mode="quadrature").log_rho(0.5)
    assert abs(rho_closed - math.exp(rho_quad)) <= 1e-8 * rho_closed
    assert rho_closed == pytest.approx(0.8346268, abs=1e-6)
    assert elliptic_k(0.0) == pytest.approx(math.pi / 2.0, abs=4.0 * np.finfo(float).eps)
    res = chernoff(p, q, CONST)
    assert abs(res.alpha_star - 0.5) <= 1e-6
    curve = AffinityCurve(p, q, CONST, mode="quadrature")
    grid = np.linspace(0.01, 0.99, 99)
    vals = [-curve.log_rho(float(a)) for a in grid]
    assert grid[int(np.argmax(vals))] == pytest.approx(0.5, abs=1e-6)
    kl_closed = cauchy_kl(p, q)
    from scipy import integrate
    kl_quad, _ = integrate.quad(
        lambda x: math.exp(p.log_density(x)) * (p.log_density(x) - q.log_density(x)),
        -np.inf, np.inf, limit=200)
    assert abs(kl_closed - kl_quad) <= 1e-8
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _pass(acceptance_record, 6, f"Cauchy rho_1/2 {rho_closed:.6f}, K(0)=pi/2, grid max at 0.5, "
             f"KL residual {abs(kl_closed - kl_quad):.2e} ({elapsed:.2f}s)")


def test_criterion_7_concentration(acceptance_record):
    start = time.perf_counter()
    n = 200
    prob = BinaryTestProblem(BERN_P, BERN_Q, CONST, n)
    stats = tilted_stats(prob)
    beta = stats.kl_qp + 0.1
    bound = tail_bound(prob, beta, n)
    freq, se = tail_frequency(prob, beta, n, 100000, seed=0)
    assert bound >= freq + 3.0 * se
    shifted = BinaryTestProblem(BERN_P, BERN_Q, TableWeight([1.0, 2.0]), 1)
    shift = shifted.shift
    for r in (0.02, 0.1, 0.2):
        i_p, i_q = rate_function(shifted, r)
        assert abs(i_q - (i_p - r + shift)) < 1e-8
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _pass(acceptance_record, 7, f"tail bound {bound:.4f} >= {freq:.5f} + 3*{se:.1e}; Legendre "
             f"relation at 3 probes ({elapsed:.2f}s)")


def test_criterion_8_determinism(acceptance_record):
    runner = CliRunner()
    args = ["simulate", "--model-p", '{"family": "poisson", "lambda": 2.0}',
            "--model-q", '{"family": "poisson", "lambda": 1.0}',
            "--n", "10", "--replicates", "2000", "--seed", "4"]
    first = runner.invoke(cli_main, args)
    second = runner.invoke(cli_main, args)
    assert first.exit_code == 0 and second.exit_code == 0
    assert first.output == second.output
    assert json.loads(first.output)["results"]["seed"] == 4
    _pass(acceptance_record, 8, "repeated simulate runs byte-identical")

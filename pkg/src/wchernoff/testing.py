"""Hypothesis-testing engine: optimal weighted losses and concentration.

Binary losses use the pointwise form of the optimal total loss,

    L_n* = integral phi(x_1..n) min{p(x_1..n), q(x_1..n)},

evaluated exactly on small product spaces (multinomial-count enumeration)
or by direct Monte Carlo under each hypothesis.  The M-ary analogue sums
phi (sum_i w_i p_i - max_j w_j p_j).  The tilted log-likelihood section
implements the cumulants psi_P/psi_Q, their Legendre transforms, and the
Bennett-type martingale tail bound, all for the shifted statistic

    L* = sum ln(q/p) + n (ln E_phi(p) - ln E_phi(q)).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _numeric
from .affinity import chernoff
from .errors import (
    ConvergenceError,
    PreconditionError,
    RateInfiniteError,
    StateSpaceOverflowError,
    UnsupportedCombinationError,
)
from .models import (
    Categorical,
    ConstWeight,
    Poisson,
    poisson_truncation,
    rng_stream,
    weighted_normaliser,
)

__all__ = [
    "BinaryTestProblem",
    "LossEstimate",
    "TiltedLikelihoodStats",
    "MAryProblem",
    "SimReport",
    "optimal_loss_exact",
    "optimal_loss_mc",
    "weighted_tv",
    "mary_optimal_loss",
    "mary_exponent",
    "tilted_llr",
    "tilted_stats",
    "cumulants",
    "rate_function",
    "tail_bound",
    "tail_frequency",
    "bernoulli_kl",
    "simulate",
    "convergence_rows",
    "EXACT_ENUMERATION",
    "MONTE_CARLO",
]

EXACT_ENUMERATION = "exact_enumeration"
MONTE_CARLO = "monte_carlo"

STATE_BUDGET = 10_000_000
POISSON_EXACT_MAX_N = 5
MC_CHUNK = 100_000


@dataclass(frozen=True)
class BinaryTestProblem:
    model_p: object
    model_q: object
    weight: object
    n: int

    def __post_init__(self):
        _numeric.common_support(self.model_p, self.model_q)
        if int(self.n) < 1:
            raise PreconditionError("sample size n must be >= 1")
        object.__setattr__(self, "n", int(self.n))

    @property
    def shift(self):
        """ln E_phi(p) - ln E_phi(q); the per-coordinate tilt of L*."""
        return (math.log(weighted_normaliser(self.model_p, self.weight))
                - math.log(weighted_normaliser(self.model_q, self.weight)))


@dataclass(frozen=True)
class LossEstimate:
    value: float
    std_error: float
    method: str
    replicates: int
    exponent_estimate: float


@dataclass(frozen=True)
class TiltedLikelihoodStats:
    kl_qp: float
    d_bound: float
    sigma2: float
    shift: float


@dataclass(frozen=True)
class MAryProblem:
    models: tuple
    weight: object
    priors: tuple = None

    def __post_init__(self):
        models = tuple(self.models)
        if len(models) < 2:
            raise PreconditionError("M-ary problem needs at least two models")
        for m in models[1:]:
            _numeric.common_support(models[0], m)
        object.__setattr__(self, "models", models)
        if self.priors is not None:
            w = tuple(float(x) for x in self.priors)
            if len(w) != len(models):
                raise PreconditionError("priors length must match the model count")
            if any(x <= 0.0 for x in w):
                raise PreconditionError("priors must be strictly positive")
            if abs(sum(w) - 1.0) > 1e-12:
                raise PreconditionError("priors must sum to 1 within 1e-12")
            object.__setattr__(self, "priors", w)


@dataclass(frozen=True)
class SimReport:
    loss: float
    std_error: float
    exponent_estimate: float
    d_c_w_reference: float
    n: int
    replicates: int
    seed: int
    method: str

    def to_dict(self):
        return {
            "loss": self.loss,
            "std_error": self.std_error,
            "exponent_estimate": self.exponent_estimate,
            "d_c_w_reference": self.d_c_w_reference,
            "n": self.n,
            "replicates": self.replicates,
            "seed": self.seed,
            "method": self.method,
        }


# ---------------------------------------------------------------------------
# Exact enumeration on product spaces
# ---------------------------------------------------------------------------


def _single_letter_grid(models, weight, n):
    """Support points for enumeration, or raise for unsupported models."""
    first = models[0]
    if isinstance(first, Categorical):
        return np.arange(first.size)
    if isinstance(first, Poisson):
        if n > POISSON_EXACT_MAX_N:
            raise StateSpaceOverflowError(
                f"exact enumeration for Poisson supports n <= {POISSON_EXACT_MAX_N};"
                " use the Monte Carlo estimator"
            )
        return _numeric.discrete_grid(models[0], models[1 % len(models)], weight)
    raise UnsupportedCombinationError(
        "exact enumeration needs categorical or Poisson models; use Monte Carlo"
    )


def _count_matrix(n, k):
    """All multisets of n draws from k symbols, as a counts matrix.

    Rows are compositions of n into k non-negative parts; the product
    space of size k^n collapses onto comb(n+k-1, n) rows because the
    weight and both densities factorise over i.i.d. coordinates.
    """
    states = math.comb(n + k - 1, n)
    if states > STATE_BUDGET:
        raise StateSpaceOverflowError(
            f"enumeration would need {states} states (budget {STATE_BUDGET});"
            " use the Monte Carlo estimator"
        )
    counts = np.zeros((states, k), dtype=np.int64)
    for row, combo in enumerate(itertools.combinations_with_replacement(range(k), n)):
        counts[row] = np.bincount(combo, minlength=k)
    return counts


def _enumeration_logs(models, weight, n):
    """(log multinomial + log phi, [log p_i(x) for each model]) per state."""
    grid = _single_letter_grid(models, weight, n)
    counts = _count_matrix(n, grid.size)
    log_mult = gammaln(n + 1.0) - np.sum(gammaln(counts + 1.0), axis=1)
    log_phi = counts @ _numeric.log_weight_vec(weight, grid)
    base = log_mult + np.where(np.isnan(log_phi), -np.inf, log_phi)
    logs = []
    for m in models:
        lp = _numeric.logpdf_vec(m, grid)
        row = counts @ np.where(np.isfinite(lp), lp, -1e300)
        # recover exact -inf where a zero-mass symbol is actually used
        dead = counts[:, ~np.isfinite(lp)].sum(axis=1) > 0
        row = np.where(dead, -np.inf, row)
        logs.append(row)
    return base, logs


def optimal_loss_exact(problem):
    """L_n* by exact product-space summation of phi min{p, q}."""
    base, (lp, lq) = _enumeration_logs(
        (problem.model_p, problem.model_q), problem.weight, problem.n)
    with np.errstate(invalid="ignore"):
        terms = np.exp(base + np.minimum(lp, lq))
    value = float(np.sum(np.where(np.isnan(terms), 0.0, terms)))
    exponent = math.inf if value == 0.0 else -math.log(value) / problem.n
    return LossEstimate(value, 0.0, EXACT_ENUMERATION, 0, exponent)


def weighted_tv(problem):
    """TV_phi = half the phi-weighted L1 distance on the product space."""
    base, (lp, lq) = _enumeration_logs(
        (problem.model_p, problem.model_q), problem.weight, problem.n)
    with np.errstate(invalid="ignore"):
        tp = np.exp(base + lp)
        tq = np.exp(base + lq)
    tp = np.where(np.isnan(tp), 0.0, tp)
    tq = np.where(np.isnan(tq), 0.0, tq)
    return float(0.5 * np.sum(np.abs(tp - tq)))


def mary_optimal_loss(problem, n, method=EXACT_ENUMERATION, replicates=None, seed=0):
    """L_{n,M}* (or its priors-weighted version) exactly or by Monte Carlo."""
    models = problem.models
    w = problem.priors if problem.priors is not None else (1.0,) * len(models)
    if method == EXACT_ENUMERATION:
        base, logs = _enumeration_logs(models, problem.weight, n)
        with np.errstate(invalid="ignore"):
            dens = np.stack([wi * np.exp(li) for wi, li in zip(w, logs)])
        dens = np.where(np.isnan(dens), 0.0, dens)
        gap = dens.sum(axis=0) - dens.max(axis=0)
        with np.errstate(invalid="ignore"):
            scale = np.exp(base)
        value = float(np.sum(np.where(np.isnan(scale), 0.0, scale) * gap))
        exponent = math.inf if value == 0.0 else -math.log(value) / n
        return LossEstimate(value, 0.0, EXACT_ENUMERATION, 0, exponent)
    if method != MONTE_CARLO:
        raise PreconditionError(f"unknown method '{method}'")
    if replicates is None or replicates < 1000:
        raise PreconditionError("monte carlo needs replicates >= 1000")
    total, var = 0.0, 0.0
    for i, model in enumerate(models):
        mean_i, var_i = _mc_mean(
            model, problem.weight, n, replicates, seed, i,
            lambda x_flat, count: _mary_error_indicator(models, w, i, x_flat, count, n))
        total += w[i] * mean_i
        var += (w[i] ** 2) * var_i / replicates
    exponent = math.inf if total <= 0.0 else -math.log(total) / n
    return LossEstimate(total, math.sqrt(var), MONTE_CARLO, replicates, exponent)


def _mary_error_indicator(models, w, i, x_flat, count, n):
    scores = np.stack([
        math.log(wj) + _numeric.logpdf_vec(m, x_flat).reshape(count, n).sum(axis=1)
        for wj, m in zip(w, models)
    ])
    decided = np.argmax(scores, axis=0)  # first index wins ties
    return (decided != i).astype(float)


def mary_exponent(problem):
    """Pairwise weighted Chernoff matrix and its minimum C_M^w."""
    models = problem.models
    m = len(models)
    matrix = [[0.0] * m for _ in range(m)]
    best = None
    degenerate = False
    for i in range(m):
        for j in range(i + 1, m):
            res = chernoff(models[i], models[j], problem.weight)
            matrix[i][j] = matrix[j][i] = res.d_c_w
            if res.boundary == "flat":
                degenerate = True
            if best is None or res.d_c_w < best[0]:
                best = (res.d_c_w, (i, j), res.boundary)
    return {
        "matrix": matrix,
        "c_m_w": best[0],
        "pair": list(best[1]),
        "degenerate": degenerate,
    }


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------


def _mc_mean(model, weight, n, replicates, seed, stream_id, error_fn):
    """Mean and variance of phi(x_1..n) * error over i.i.d. n-vectors.

    Chunked with a fixed chunk size so results are deterministic in
    (seed, stream_id) regardless of the replicate total.
    """
    total, total_sq, done, chunk_idx = 0.0, 0.0, 0, 0
    while done < replicates:
        count = min(MC_CHUNK, replicates - done)
        rng = rng_stream(seed, stream_id, chunk_idx)
        x = model.sample(rng, count * n)
        x_flat = np.asarray(x, dtype=float).reshape(-1)
        log_phi = _numeric.log_weight_vec(weight, x_flat).reshape(count, n).sum(axis=1)
        err = error_fn(x_flat, count)
        score = np.zeros(count)
        hit = err > 0.0
        with np.errstate(over="raise"):
            score[hit] = np.exp(log_phi[hit]) * err[hit]
        total += float(score.sum())
        total_sq += float((score * score).sum())
        done += count
        chunk_idx += 1
    mean = total / replicates
    var = max(total_sq / replicates - mean * mean, 0.0)
    return mean, var


def optimal_loss_mc(problem, replicates, seed=0):
    """Monte Carlo estimate of the optimal total loss.

    Decision rule: declare H1 when q(x_1..n) >= p(x_1..n).  The loss is
    E_P[phi 1{decide H1}] + E_Q[phi 1{decide H0}], each term estimated by
    direct sampling under its own hypothesis.
    """
    if replicates < 1000:
        raise PreconditionError("monte carlo needs replicates >= 1000")
    p, q, w, n = problem.model_p, problem.model_q, problem.weight, problem.n

    def llr_sum(x_flat, count):
        return (_numeric.logpdf_vec(q, x_flat)
                - _numeric.logpdf_vec(p, x_flat)).reshape(count, n).sum(axis=1)

    mean_p, var_p = _mc_mean(p, w, n, replicates, seed, 0,
                             lambda xf, c: (llr_sum(xf, c) >= 0.0).astype(float))
    mean_q, var_q = _mc_mean(q, w, n, replicates, seed, 1,
                             lambda xf, c: (llr_sum(xf, c) < 0.0).astype(float))
    value = mean_p + mean_q
    std_error = math.sqrt(var_p / replicates + var_q / replicates)
    exponent = math.inf if value <= 0.0 else -math.log(value) / n
    return LossEstimate(value, std_error, MONTE_CARLO, replicates, exponent)


def simulate(problem, replicates, seed=0):
    """SimReport: Monte Carlo loss plus the closed/solver Chernoff reference."""
    est = optimal_loss_mc(problem, replicates, seed)
    ref = chernoff(problem.model_p, problem.model_q, problem.weight)
    return SimReport(est.value, est.std_error, est.exponent_estimate,
                     ref.d_c_w, problem.n, replicates, seed, est.method)


def convergence_rows(model_p, model_q, weight, ns, replicates, seed=0):
    """(n, exponent_estimate, d_c_w) triples for convergence tables."""
    ref = chernoff(model_p, model_q, weight).d_c_w
    rows = []
    for n in ns:
        est = optimal_loss_mc(BinaryTestProblem(model_p, model_q, weight, n),
                              replicates, seed)
        rows.append((int(n), est.exponent_estimate, ref))
    return rows


# ---------------------------------------------------------------------------
# Tilted log-likelihood, cumulants, rate functions, tail bound
# ---------------------------------------------------------------------------


def tilted_llr(problem, x):
    """L*(x_1..n) = sum ln(q/p) + n shift, with saturating infinities.

    A point with zero density under exactly one hypothesis saturates to
    -inf (zero q-density) or +inf (zero p-density); a point outside both
    supports is rejected.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != problem.n:
        raise PreconditionError("sample vector length must equal n")
    lp = float(np.sum(_numeric.logpdf_vec(problem.model_p, x)))
    lq = float(np.sum(_numeric.logpdf_vec(problem.model_q, x)))
    if lp == -math.inf and lq == -math.inf:
        raise PreconditionError("sample point has zero density under both hypotheses")
    if lq == -math.inf:
        return -math.inf
    if lp == -math.inf:
        return math.inf
    return lq - lp + problem.n * problem.shift


def tilted_stats(problem):
    """Moments of the per-coordinate increment ln(q/p) under Q.

    d_bound = sup |ln(q/p) - KL(Q||P)| over the support of Q; finite only
    for categorical models (every other built-in family has unbounded
    log-ratio), in which case the tail bound is unavailable.
    """
    p, q = problem.model_p, problem.model_q
    if isinstance(q, Categorical):
        lr = np.full(q.size, np.nan)
        mask = q.probs > 0.0
        if np.any(mask & (p.probs == 0.0)):
            kl = math.inf
            d = math.inf
            sigma2 = math.inf
        else:
            lr[mask] = np.log(q.probs[mask]) - np.log(p.probs[mask])
            kl = float(np.sum(q.probs[mask] * lr[mask]))
            sigma2 = float(np.sum(q.probs[mask] * (lr[mask] - kl) ** 2))
            d = float(np.max(np.abs(lr[mask] - kl)))
        return TiltedLikelihoodStats(kl, d, sigma2, problem.shift)

    # unweighted KL(Q||P) and Var_Q(ln(q/p)) numerically; d is infinite
    def log_ratio(x):
        return _numeric.logpdf_vec(q, x) - _numeric.logpdf_vec(p, x)

    kl = _numeric.weighted_power_integral(p, q, ConstWeight(), 0.0, 1.0,
                                          factor=log_ratio)

    def centred_sq(x):
        return (log_ratio(x) - kl) ** 2

    sigma2 = _numeric.weighted_power_integral(p, q, ConstWeight(), 0.0, 1.0,
                                              factor=centred_sq)
    return TiltedLikelihoodStats(kl, math.inf, sigma2, problem.shift)


def cumulants(problem, alpha):
    """(psi_P(alpha), psi_Q(alpha)) of L*/1 at a single coordinate.

    psi_P(alpha) = ln int q^alpha p^(1-alpha) + alpha shift;
    psi_Q(alpha) = ln int q^(alpha+1) p^(-alpha) + alpha shift.
    These satisfy psi_Q(alpha) = psi_P(alpha + 1) - shift where both are
    finite.
    """
    alpha = float(alpha)
    p, q, w = problem.model_p, problem.model_q, ConstWeight()
    shift = problem.shift
    try:
        ip = _numeric.weighted_power_integral(p, q, w, 1.0 - alpha, alpha)
    except (ConvergenceError, FloatingPointError, OverflowError) as exc:
        raise ConvergenceError(
            f"psi_P integral int q^{alpha} p^{1 - alpha} diverged") from exc
    try:
        iq = _numeric.weighted_power_integral(p, q, w, -alpha, 1.0 + alpha)
    except (ConvergenceError, FloatingPointError, OverflowError) as exc:
        raise ConvergenceError(
            f"psi_Q integral int q^{1 + alpha} p^{-alpha} diverged") from exc
    psi_p = math.log(ip) + alpha * shift if ip > 0.0 and math.isfinite(ip) else math.inf
    psi_q = math.log(iq) + alpha * shift if iq > 0.0 and math.isfinite(iq) else math.inf
    return psi_p, psi_q


_LEGENDRE_SPAN = 20.0
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _legendre(psi, r):
    """sup over alpha in [-20, 20] of alpha r - psi(alpha)."""

    def g(a):
        try:
            v = psi(a)
        except ConvergenceError:
            return -math.inf
        return a * r - v if math.isfinite(v) else -math.inf

    grid = np.linspace(-_LEGENDRE_SPAN, _LEGENDRE_SPAN, 81)
    vals = [g(a) for a in grid]
    best = int(np.argmax(vals))
    if vals[best] == -math.inf:
        raise RateInfiniteError("cumulant is nowhere finite on the working interval")
    if best in (0, len(grid) - 1):
        # still climbing at the scan edge: supremum not attained inside
        inner = best + 1 if best == 0 else best - 1
        if vals[best] > vals[inner]:
            raise RateInfiniteError("Legendre supremum unbounded on [-20, 20]")
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    g1, g2 = g(x1), g(x2)
    while hi - lo > 1e-10:
        if g1 >= g2:
            hi, x2, g2 = x2, x1, g1
            x1 = hi - _GOLDEN * (hi - lo)
            g1 = g(x1)
        else:
            lo, x1, g1 = x1, x2, g2
            x2 = lo + _GOLDEN * (hi - lo)
            g2 = g(x2)
    return max(g1, g2)


def rate_function(problem, r):
    """(I_P(r), I_Q(r)) by concave maximisation of the Legendre objective.

    Both transforms are computed independently; they are linked by
    I_Q(r) = I_P(r) - r + shift, and I_P(0) is the tilted-likelihood
    Chernoff exponent.
    """
    r = float(r)
    i_p = _legendre(lambda a: cumulants(problem, a)[0], r)
    i_q = _legendre(lambda a: cumulants(problem, a)[1], r)
    return i_p, i_q


def bernoulli_kl(a, b):
    """D(a || b) between Bernoulli(a) and Bernoulli(b)."""
    a, b = float(a), float(b)
    if not (0.0 <= a <= 1.0 and 0.0 < b < 1.0):
        raise PreconditionError("bernoulli_kl needs a in [0,1] and b in (0,1)")
    out = 0.0
    if a > 0.0:
        out += a * math.log(a / b)
    if a < 1.0:
        out += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    return out


def tail_bound(problem, beta, n):
    """Bennett-type bound on P_Q(L* >= beta n) from the Doob martingale.

    With beta* = beta - shift (required >= 0), the bound is vacuous (1)
    unless the deviation t = beta* - KL(Q||P) is positive; then with
    delta = sigma^2/d^2 and g = t/d,

        bound = exp{-n D((delta + g)/(1 + delta) || delta/(1 + delta))}.

    Needs bounded increments, so categorical models only.
    """
    stats = tilted_stats(problem)
    if not math.isfinite(stats.d_bound):
        raise UnsupportedCombinationError(
            "tail bound needs bounded log-ratio increments (categorical models)"
        )
    beta_star = float(beta) - stats.shift
    if beta_star < 0.0:
        raise PreconditionError("tail bound requires beta - shift >= 0")
    t = beta_star - stats.kl_qp
    if beta_star == 0.0 or t <= 0.0:
        return 1.0
    if stats.d_bound == 0.0:
        return 0.0  # degenerate increment cannot deviate
    delta = stats.sigma2 / (stats.d_bound ** 2)
    g = t / stats.d_bound
    a = min((delta + g) / (1.0 + delta), 1.0)
    b = delta / (1.0 + delta)
    return min(math.exp(-int(n) * bernoulli_kl(a, b)), 1.0)


def tail_frequency(problem, beta, n, replicates, seed=0):
    """Empirical P_Q(L* >= beta n) with its binomial standard error."""
    if replicates < 1000:
        raise PreconditionError("monte carlo needs replicates >= 1000")
    q, p = problem.model_q, problem.model_p
    shift = problem.shift
    hits, done, chunk_idx = 0, 0, 0
    while done < replicates:
        count = min(MC_CHUNK, replicates - done)
        rng = rng_stream(seed, 2, chunk_idx)
        x = np.asarray(q.sample(rng, count * n), dtype=float)
        llr = (_numeric.logpdf_vec(q, x)
               - _numeric.logpdf_vec(p, x)).reshape(count, n).sum(axis=1)
        lstar = llr + n * shift
        hits += int(np.sum(lstar >= float(beta) * n))
        done += count
        chunk_idx += 1
    freq = hits / replicates
    return freq, math.sqrt(freq * (1.0 - freq) / replicates)

"""Weighted Bhattacharyya affinities and weighted Chernoff information.

The central object is the log-affinity curve F(alpha) = ln of

    rho_w(alpha) = integral phi * p^alpha * q^(1-alpha) d(reference),

which is convex on [0, 1] with F(1) = ln E_phi(p) and F(0) = ln E_phi(q).
The weighted Chernoff information is -min F over [0, 1]; the minimiser is
the optimal skewing parameter alpha*.  Closed forms are used for
Gaussian/Poisson/Exponential pairs under constant or exponential-tilt
weights, with a generic bisection-on-derivative solver (golden-section
fallback) for everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _numeric
from .errors import (
    ConvergenceError,
    PreconditionError,
    UnsupportedCombinationError,
)
from .models import (
    Categorical,
    Cauchy,
    ConstWeight,
    Exponential,
    ExpTiltWeight,
    Gaussian,
    Poisson,
    validate_combination,
    weighted_normaliser,
)

__all__ = [
    "AffinityCurve",
    "ChernoffResult",
    "rho_w",
    "weighted_bhattacharyya",
    "chernoff",
    "log_mean",
    "elliptic_k",
    "cauchy_kl",
    "cauchy_bhattacharyya_half",
    "INTERIOR",
    "AT_ZERO",
    "AT_ONE",
    "FLAT",
]

INTERIOR = "interior"
AT_ZERO = "at_zero"
AT_ONE = "at_one"
FLAT = "flat"

DERIVATIVE_TOL = 1e-10
MAX_BISECT_ITER = 200
FLAT_TOL = 1e-12


def log_mean(a, b):
    """Logarithmic mean L(a, b) = (a - b)/(ln a - ln b), L(a, a) = a."""
    a, b = float(a), float(b)
    if a <= 0.0 or b <= 0.0:
        raise PreconditionError("log_mean requires strictly positive arguments")
    if a == b:
        return a
    return (a - b) / (math.log(a) - math.log(b))


def elliptic_k(m):
    """Complete elliptic integral K(m), parameterised by m = modulus^2.

    K(m) = integral_0^{pi/2} (1 - m sin^2 u)^{-1/2} du, computed as
    pi / (2 AGM(1, sqrt(1-m))).  Note the argument is m, not the modulus k
    of the K(k) convention.
    """
    m = float(m)
    if not (0.0 <= m < 1.0):
        raise PreconditionError("elliptic_k requires 0 <= m < 1")
    a, g = 1.0, math.sqrt(1.0 - m)
    # quadratic convergence: far fewer than 60 rounds reach 1 ulp, where
    # the iteration stalls, so stop on non-improvement as well
    for _ in range(60):
        if abs(a - g) <= 2.0 * np.finfo(float).eps * a:
            break
        a, g = 0.5 * (a + g), math.sqrt(a * g)
    return math.pi / (2.0 * a)


def cauchy_kl(p, q):
    """KL divergence between Cauchy laws (symmetric closed form)."""
    if not (isinstance(p, Cauchy) and isinstance(q, Cauchy)):
        raise PreconditionError("cauchy_kl requires two Cauchy models")
    dl = p.location - q.location
    return math.log(((p.scale + q.scale) ** 2 + dl * dl) / (4.0 * p.scale * q.scale))


def cauchy_bhattacharyya_half(p, q, weight=None):
    """rho_{1/2} for two Cauchy laws at phi == 1.

    Closed form 4 sqrt(s1 s2) / (pi sqrt((s1+s2)^2 + delta^2)) * K(m) with
    m = ((s1-s2)^2 + delta^2) / ((s1+s2)^2 + delta^2).  The Cauchy Chernoff
    information is -ln of this value (the maximiser sits at alpha = 1/2 by
    symmetry).  Non-constant weights break that symmetry and are rejected.
    """
    if not (isinstance(p, Cauchy) and isinstance(q, Cauchy)):
        raise PreconditionError("cauchy_bhattacharyya_half requires two Cauchy models")
    if weight is not None and not _is_const(weight):
        raise UnsupportedCombinationError(
            "cauchy closed form is only available for the constant weight"
        )
    delta2 = (p.location - q.location) ** 2
    s1, s2 = p.scale, q.scale
    denom2 = (s1 + s2) ** 2 + delta2
    m = ((s1 - s2) ** 2 + delta2) / denom2
    return 4.0 * math.sqrt(s1 * s2) / (math.pi * math.sqrt(denom2)) * elliptic_k(m)


def _pair_diagnostics(model_p, model_q, weight):
    """Admissibility of the weight for the affinity of a model pair.

    Mostly the per-model diagnostics of each hypothesis.  For an
    exponential pair the affinity integral needs alpha*rate_p +
    (1-alpha)*rate_q > gamma at the evaluated alpha only, so gamma equal
    to the smaller rate is admitted here (one endpoint of the curve
    diverges to +inf, which a minimiser over alpha tolerates) even though
    the single-model normaliser E_phi diverges at that gamma.
    """
    if (isinstance(model_p, Exponential) and isinstance(model_q, Exponential)
            and isinstance(weight, ExpTiltWeight) and not weight.is_null()):
        if weight.gamma.shape[0] != 1:
            return ["exp_tilt gamma must be scalar for exponential models"]
        if weight.scalar >= max(model_p.rate, model_q.rate):
            return [
                "weight not integrable under both hypotheses: requires gamma < max(rate)"
            ]
        return []
    diags = []
    for m in (model_p, model_q):
        for d in validate_combination(m, weight):
            if d not in diags:
                diags.append(d)
    return diags


def _is_const(weight):
    return isinstance(weight, ConstWeight) or (
        isinstance(weight, ExpTiltWeight) and weight.is_null()
    )


def _tilt_gamma(weight, dim=1):
    """Exp-tilt vector of the weight (zeros for the constant weight)."""
    if isinstance(weight, ConstWeight):
        return np.zeros(dim)
    if isinstance(weight, ExpTiltWeight):
        g = weight.gamma
        if g.shape[0] != dim:
            raise PreconditionError("exp_tilt gamma dimension mismatch")
        return g
    return None


# ---------------------------------------------------------------------------
# The affinity curve
# ---------------------------------------------------------------------------

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"
SUMMATION = "summation"


class AffinityCurve:
    """alpha -> ln rho_w(alpha) with derivative access.

    The evaluation mode is chosen automatically: closed form for
    Gaussian/Poisson/Exponential pairs under const/exp-tilt weights, exact
    summation for discrete pairs, adaptive quadrature otherwise.  Pass
    `mode` to force the generic path (used for cross-validation).
    """

    def __init__(self, model_p, model_q, weight, mode=None):
        _numeric.common_support(model_p, model_q)
        diags = _pair_diagnostics(model_p, model_q, weight)
        if diags:
            raise PreconditionError("; ".join(diags))
        self.model_p = model_p
        self.model_q = model_q
        self.weight = weight
        self.mode = mode if mode is not None else self._auto_mode()

    def _auto_mode(self):
        p, q, w = self.model_p, self.model_q, self.weight
        tiltable = _is_const(w) or isinstance(w, ExpTiltWeight)
        if isinstance(p, Gaussian) and isinstance(q, Gaussian) and tiltable:
            return CLOSED_FORM
        if isinstance(p, Poisson) and isinstance(q, Poisson) and tiltable:
            return CLOSED_FORM
        if isinstance(p, Exponential) and isinstance(q, Exponential) and tiltable:
            return CLOSED_FORM
        if p.support in ("finite", "nonneg_int"):
            return SUMMATION
        return QUADRATURE

    # -- evaluation ---------------------------------------------------------

    def log_rho(self, alpha):
        alpha = _check_alpha(alpha)
        if self.mode == CLOSED_FORM:
            return self._closed_log_rho(alpha)
        val = _numeric.weighted_power_integral(
            self.model_p, self.model_q, self.weight, alpha, 1.0 - alpha
        )
        if val <= 0.0:
            raise ConvergenceError("affinity evaluated to a non-positive value")
        return math.log(val)

    def rho(self, alpha):
        return math.exp(self.log_rho(alpha))

    def bhattacharyya(self, alpha):
        return -self.log_rho(alpha)

    def derivative(self, alpha):
        """F'(alpha): the mean of ln(p/q) under the tilted density (pq)_alpha."""
        alpha = _check_alpha(alpha)
        if self.mode == CLOSED_FORM:
            return self._closed_derivative(alpha)
        z = _numeric.weighted_power_integral(
            self.model_p, self.model_q, self.weight, alpha, 1.0 - alpha
        )

        def log_ratio(x):
            return (_numeric.logpdf_vec(self.model_p, x)
                    - _numeric.logpdf_vec(self.model_q, x))

        num = _numeric.weighted_power_integral(
            self.model_p, self.model_q, self.weight, alpha, 1.0 - alpha, factor=log_ratio
        )
        return num / z

    # -- closed forms -------------------------------------------------------

    def _closed_log_rho(self, alpha):
        p, q, w = self.model_p, self.model_q, self.weight
        if isinstance(p, Poisson):
            g = _tilt_gamma(w)[0]
            lam_a = p.lam ** alpha * q.lam ** (1.0 - alpha)
            return -alpha * p.lam - (1.0 - alpha) * q.lam + math.exp(g) * lam_a
        if isinstance(p, Exponential):
            g = _tilt_gamma(w)[0]
            lam_a = alpha * p.rate + (1.0 - alpha) * q.rate
            if lam_a <= g:
                return math.inf  # divergent endpoint when gamma = min(rate)
            return (alpha * math.log(p.rate) + (1.0 - alpha) * math.log(q.rate)
                    - math.log(lam_a - g))
        # Gaussian pair, general covariances
        g = _tilt_gamma(w, p.dim)
        s1inv, s2inv = p.cov_inv(), q.cov_inv()
        prec = alpha * s1inv + (1.0 - alpha) * s2inv
        sigma_a = np.linalg.inv(prec)
        mu_t = sigma_a @ (alpha * s1inv @ p.mean + (1.0 - alpha) * s2inv @ q.mean + g)
        _, logdet_a = np.linalg.slogdet(sigma_a)
        quad = (alpha * p.mean @ s1inv @ p.mean
                + (1.0 - alpha) * q.mean @ s2inv @ q.mean
                - mu_t @ prec @ mu_t)
        return float(0.5 * logdet_a - 0.5 * alpha * p._log_det
                     - 0.5 * (1.0 - alpha) * q._log_det - 0.5 * quad)

    def _closed_derivative(self, alpha):
        p, q, w = self.model_p, self.model_q, self.weight
        if isinstance(p, Poisson):
            g = _tilt_gamma(w)[0]
            lam_a = p.lam ** alpha * q.lam ** (1.0 - alpha)
            return math.exp(g) * lam_a * math.log(p.lam / q.lam) - (p.lam - q.lam)
        if isinstance(p, Exponential):
            g = _tilt_gamma(w)[0]
            lam_a = alpha * p.rate + (1.0 - alpha) * q.rate
            if lam_a <= g:
                # F has a +inf pole at this endpoint; the slope sign points away
                return -math.inf if p.rate > q.rate else math.inf
            return math.log(p.rate / q.rate) - (p.rate - q.rate) / (lam_a - g)
        # Gaussian: E[ln(p/q)] under the tilted gaussian N(mu_t, Sigma_a)
        g = _tilt_gamma(w, p.dim)
        s1inv, s2inv = p.cov_inv(), q.cov_inv()
        prec = alpha * s1inv + (1.0 - alpha) * s2inv
        sigma_a = np.linalg.inv(prec)
        mu_t = sigma_a @ (alpha * s1inv @ p.mean + (1.0 - alpha) * s2inv @ q.mean + g)
        d1 = mu_t - p.mean
        d2 = mu_t - q.mean
        return float(0.5 * (q._log_det - p._log_det)
                     - 0.5 * (np.trace(s1inv @ sigma_a) + d1 @ s1inv @ d1)
                     + 0.5 * (np.trace(s2inv @ sigma_a) + d2 @ s2inv @ d2))


def _check_alpha(alpha):
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise PreconditionError("alpha must lie in [0, 1]")
    return alpha


def rho_w(model_p, model_q, weight, alpha, mode=None):
    """Weighted alpha-skewed Bhattacharyya affinity coefficient."""
    return AffinityCurve(model_p, model_q, weight, mode=mode).rho(alpha)


def weighted_bhattacharyya(model_p, model_q, weight, alpha, mode=None):
    """-ln rho_w; may be negative for non-constant weights."""
    return AffinityCurve(model_p, model_q, weight, mode=mode).bhattacharyya(alpha)


# ---------------------------------------------------------------------------
# Chernoff optimisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChernoffResult:
    alpha_star: float
    d_c_w: float
    boundary: str
    iterations: int
    residual: float

    def to_dict(self):
        return {
            "alpha_star": self.alpha_star,
            "d_c_w": self.d_c_w,
            "boundary": self.boundary,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def _closed_alpha_tilde(model_p, model_q, weight):
    """Unconstrained critical point, when a closed form exists."""
    p, q = model_p, model_q
    if isinstance(p, Poisson) and isinstance(q, Poisson):
        g = _tilt_gamma(weight)
        if g is None:
            return None
        if p.lam == q.lam:
            return None
        num = math.log(log_mean(p.lam, q.lam)) - g[0] - math.log(q.lam)
        return num / (math.log(p.lam) - math.log(q.lam))
    if isinstance(p, Exponential) and isinstance(q, Exponential):
        g = _tilt_gamma(weight)
        if g is None:
            return None
        if p.rate == q.rate:
            return None
        return (g[0] + log_mean(p.rate, q.rate) - q.rate) / (p.rate - q.rate)
    if isinstance(p, Gaussian) and isinstance(q, Gaussian):
        g = _tilt_gamma(weight, p.dim)
        if g is None or not np.allclose(p.cov, q.cov, rtol=1e-12, atol=1e-14):
            return None
        delta = p.mean - q.mean
        norm2 = float(delta @ p.cov_inv() @ delta)
        if norm2 == 0.0:
            return None
        return 0.5 - float(g @ delta) / norm2
    if isinstance(p, Cauchy) and isinstance(q, Cauchy) and _is_const(weight):
        if p == q:
            return None
        return 0.5
    return None


def chernoff(model_p, model_q, weight, solver="auto", mode=None):
    """Maximise the weighted Bhattacharyya distance over alpha in [0, 1].

    `solver="auto"` uses the closed-form critical point when available
    (projected onto [0, 1]); `solver="generic"` forces bisection on the
    derivative of the log-affinity (golden-section fallback).  The curve
    evaluation `mode` is independent of the solver choice.
    """
    curve = AffinityCurve(model_p, model_q, weight, mode=mode)
    f0 = curve.log_rho(0.0)
    f1 = curve.log_rho(1.0)
    # +inf endpoints (weight integrable against only one hypothesis) are
    # harmless for a minimiser of F; -inf or nan endpoints are not.
    for f in (f0, f1):
        if math.isnan(f) or f == -math.inf:
            raise PreconditionError("log-affinity is not finite at the endpoints")
    fh = curve.log_rho(0.5)
    if (math.isfinite(f0) and math.isfinite(f1)
            and abs(f0 - fh) < FLAT_TOL and abs(f1 - fh) < FLAT_TOL):
        return ChernoffResult(0.5, -fh, FLAT, 0, 0.0)

    if solver == "auto":
        tilde = _closed_alpha_tilde(model_p, model_q, weight)
        if tilde is not None:
            alpha = min(1.0, max(0.0, tilde))
            boundary = INTERIOR if 0.0 < alpha < 1.0 else (AT_ZERO if alpha == 0.0 else AT_ONE)
            residual = abs(curve.derivative(alpha)) if boundary == INTERIOR else 0.0
            return ChernoffResult(alpha, -curve.log_rho(alpha), boundary, 0, residual)
    elif solver != "generic":
        raise PreconditionError(f"unknown solver '{solver}'")

    try:
        return _bisect_derivative(curve)
    except ConvergenceError:
        return _golden_section(curve)


def _bisect_derivative(curve):
    """Bisection on F' (monotone by convexity of F)."""
    d0 = curve.derivative(0.0)
    if d0 >= 0.0:
        return ChernoffResult(0.0, -curve.log_rho(0.0), AT_ZERO, 0, 0.0)
    d1 = curve.derivative(1.0)
    if d1 <= 0.0:
        return ChernoffResult(1.0, -curve.log_rho(1.0), AT_ONE, 0, 0.0)
    lo, hi = 0.0, 1.0
    mid, dm = 0.5, None
    for it in range(1, MAX_BISECT_ITER + 1):
        mid = 0.5 * (lo + hi)
        dm = curve.derivative(mid)
        if abs(dm) <= DERIVATIVE_TOL or (hi - lo) <= 1e-15:
            return ChernoffResult(mid, -curve.log_rho(mid), INTERIOR, it, abs(dm))
        if dm < 0.0:
            lo = mid
        else:
            hi = mid
    return ChernoffResult(mid, -curve.log_rho(mid), INTERIOR, MAX_BISECT_ITER, abs(dm))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(curve):
    """Minimise F directly when the derivative integral is unavailable."""
    lo, hi = 0.0, 1.0
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = curve.log_rho(x1), curve.log_rho(x2)
    it = 0
    while (hi - lo) > 1e-12 and it < MAX_BISECT_ITER:
        it += 1
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = curve.log_rho(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = curve.log_rho(x2)
    alpha = 0.5 * (lo + hi)
    # classify against the true endpoints
    if curve.log_rho(0.0) <= curve.log_rho(alpha):
        return ChernoffResult(0.0, -curve.log_rho(0.0), AT_ZERO, it, 0.0)
    if curve.log_rho(1.0) <= curve.log_rho(alpha):
        return ChernoffResult(1.0, -curve.log_rho(1.0), AT_ONE, it, 0.0)
    return ChernoffResult(alpha, -curve.log_rho(alpha), INTERIOR, it, 0.0)

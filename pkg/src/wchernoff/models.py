"""Hypothesis distributions and context weights.

Each model family carries a fixed reference measure: Lebesgue on R^d for
Gaussian, Lebesgue on [0, inf) for Exponential, Lebesgue on R for Cauchy,
counting measure for Poisson and Categorical.  Densities, weighted
normalisers E_phi and exact samplers are provided per family; the tilted
density phi*p / E_phi(p) is again a probability density whenever E_phi is
finite.

All model and weight objects are immutable after construction and all
operations are pure given an explicit rng stream, so they are safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import (
    NonIntegrableWeightError,
    OutsideSupportError,
    PreconditionError,
    UnsupportedCombinationError,
)

__all__ = [
    "Gaussian",
    "Poisson",
    "Exponential",
    "Cauchy",
    "Categorical",
    "ConstWeight",
    "ExpTiltWeight",
    "TableWeight",
    "TiltedDensity",
    "log_density",
    "weight_value",
    "weighted_normaliser",
    "sample",
    "rng_stream",
    "poisson_truncation",
    "model_from_json",
    "weight_from_json",
    "model_to_json",
    "weight_to_json",
    "validate_combination",
]

_MAX_GAUSSIAN_DIM = 64


def rng_stream(seed, *key):
    """Deterministic generator keyed by (seed, *key).

    Splittable streams: distinct keys give statistically independent
    streams, so parallel simulation chunks are reproducible regardless of
    execution order.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key)))


def poisson_truncation(max_mean):
    """Summation cutoff K for Poisson-type tails.

    sum_{k>K} Poi(m, k) < 1e-16 for every mean m <= max_mean with this
    choice, so truncated sums are exact at double precision.
    """
    m = max(float(max_mean), 1.0)
    return int(math.ceil(m + 12.0 * math.sqrt(m) + 30.0))


# ---------------------------------------------------------------------------
# Model families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    """Multivariate normal N(mean, cov) on R^d (Lebesgue reference)."""

    mean: np.ndarray
    cov: np.ndarray
    # cached Cholesky factor and log-determinant, set in __post_init__
    _chol: np.ndarray = field(init=False, repr=False, compare=False)
    _log_det: float = field(init=False, repr=False, compare=False)

    support = "real"

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1:
            raise PreconditionError("gaussian mean must be a vector")
        d = mean.shape[0]
        if d > _MAX_GAUSSIAN_DIM:
            raise PreconditionError(f"gaussian dimension {d} exceeds limit {_MAX_GAUSSIAN_DIM}")
        if cov.shape != (d, d):
            raise PreconditionError("gaussian covariance shape does not match mean")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
            raise PreconditionError("gaussian covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise PreconditionError("gaussian covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_log_det", 2.0 * float(np.sum(np.log(np.diag(chol)))))

    def __eq__(self, other):
        return (isinstance(other, Gaussian)
                and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.cov, other.cov))

    def __hash__(self):
        return hash((tuple(self.mean), self.cov.tobytes()))

    @property
    def dim(self):
        return self.mean.shape[0]

    def cov_inv(self):
        return np.linalg.inv(self.cov)

    def log_density(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != self.mean.shape:
            raise OutsideSupportError("gaussian sample point has wrong dimension")
        z = np.linalg.solve(self._chol, x - self.mean)
        return float(-0.5 * (self.dim * math.log(2.0 * math.pi) + self._log_det + z @ z))

    def sample(self, rng, count):
        z = rng.standard_normal((count, self.dim))
        out = self.mean + z @ self._chol.T
        return out[:, 0] if self.dim == 1 else out


@dataclass(frozen=True)
class Poisson:
    """Poisson(lam) on the non-negative integers (counting reference)."""

    lam: float

    support = "nonneg_int"

    def __post_init__(self):
        if not (float(self.lam) > 0.0):
            raise PreconditionError("poisson rate must be strictly positive")
        object.__setattr__(self, "lam", float(self.lam))

    def log_density(self, k):
        kk = np.asarray(k)
        if np.any(kk < 0) or np.any(kk != np.floor(kk)):
            raise OutsideSupportError("poisson support is the non-negative integers")
        kk = kk.astype(float)
        out = -self.lam + kk * math.log(self.lam) - gammaln(kk + 1.0)
        return float(out) if np.isscalar(k) or np.ndim(k) == 0 else out

    def sample(self, rng, count):
        return rng.poisson(self.lam, size=count)


@dataclass(frozen=True)
class Exponential:
    """Exponential(rate) on [0, inf) (Lebesgue reference)."""

    rate: float

    support = "halfline"

    def __post_init__(self):
        if not (float(self.rate) > 0.0):
            raise PreconditionError("exponential rate must be strictly positive")
        object.__setattr__(self, "rate", float(self.rate))

    def log_density(self, x):
        xf = float(x)
        if xf < 0.0:
            return -math.inf
        return math.log(self.rate) - self.rate * xf

    def sample(self, rng, count):
        return rng.exponential(1.0 / self.rate, size=count)


@dataclass(frozen=True)
class Cauchy:
    """Cauchy(location, scale) on R (Lebesgue reference)."""

    location: float
    scale: float

    support = "real"
    dim = 1

    def __post_init__(self):
        if not (float(self.scale) > 0.0):
            raise PreconditionError("cauchy scale must be strictly positive")
        object.__setattr__(self, "location", float(self.location))
        object.__setattr__(self, "scale", float(self.scale))

    def log_density(self, x):
        z = (float(x) - self.location) / self.scale
        return -math.log(math.pi * self.scale) - math.log1p(z * z)

    def sample(self, rng, count):
        return self.location + self.scale * rng.standard_cauchy(size=count)


@dataclass(frozen=True)
class Categorical:
    """Finite distribution over indices 0..K-1 (counting reference)."""

    probs: np.ndarray

    support = "finite"

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 1:
            raise PreconditionError("categorical probs must be a non-empty vector")
        if np.any(probs < 0.0):
            raise PreconditionError("categorical probabilities must be non-negative")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise PreconditionError("categorical probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other):
        return isinstance(other, Categorical) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    @property
    def size(self):
        return self.probs.shape[0]

    def log_density(self, k):
        kk = int(k)
        if kk != k or kk < 0 or kk >= self.size:
            raise OutsideSupportError("categorical index out of range")
        p = self.probs[kk]
        return math.log(p) if p > 0.0 else -math.inf

    def sample(self, rng, count):
        return rng.choice(self.size, size=count, p=self.probs)


# ---------------------------------------------------------------------------
# Context weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstWeight:
    """phi == 1: the unweighted baseline."""

    kind = "const"

    def log_value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0

    def value(self, x):
        return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0


@dataclass(frozen=True)
class ExpTiltWeight:
    """Exponential tilt phi(x) = exp(gamma^T x)."""

    gamma: np.ndarray

    kind = "exp_tilt"

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if g.ndim != 1:
            raise PreconditionError("exp_tilt gamma must be a scalar or vector")
        object.__setattr__(self, "gamma", g)

    def __eq__(self, other):
        return isinstance(other, ExpTiltWeight) and np.array_equal(self.gamma, other.gamma)

    def __hash__(self):
        return hash(self.gamma.tobytes())

    @property
    def scalar(self):
        if self.gamma.shape[0] != 1:
            raise PreconditionError("exp_tilt gamma is not scalar")
        return float(self.gamma[0])

    def is_null(self):
        return bool(np.all(self.gamma == 0.0))

    def log_value(self, x):
        if self.gamma.shape[0] == 1:
            return float(self.gamma[0]) * np.asarray(x, dtype=float)
        x = np.asarray(x, dtype=float)
        return x @ self.gamma

    def value(self, x):
        return np.exp(self.log_value(x))


@dataclass(frozen=True)
class TableWeight:
    """Tabulated weight on a categorical support."""

    values: np.ndarray

    kind = "table"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise PreconditionError("table weight values must be a non-empty vector")
        if np.any(v < 0.0):
            raise PreconditionError("table weight values must be non-negative")
        if not np.any(v > 0.0):
            raise PreconditionError("table weight must have at least one positive entry")
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return isinstance(other, TableWeight) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def log_value(self, k):
        kk = np.asarray(k)
        if np.any(kk < 0) or np.any(kk >= self.values.size):
            raise PreconditionError("table weight index out of range")
        with np.errstate(divide="ignore"):
            out = np.log(self.values[kk.astype(int)])
        return float(out) if np.ndim(k) == 0 else out

    def value(self, k):
        kk = np.asarray(k)
        if np.any(kk < 0) or np.any(kk >= self.values.size):
            raise PreconditionError("table weight index out of range")
        out = self.values[kk.astype(int)]
        return float(out) if np.ndim(k) == 0 else out


# ---------------------------------------------------------------------------
# Spec-level operations
# ---------------------------------------------------------------------------


def log_density(model, x):
    """ln of the density/mass of `model` at `x` (-inf off support interior)."""
    return model.log_density(x)


def weight_value(weight, x):
    """phi(x) >= 0."""
    return weight.value(x)


def sample(model, rng, count):
    """`count` i.i.d. draws, deterministic given the generator state."""
    if count < 1:
        raise PreconditionError("sample count must be >= 1")
    return model.sample(rng, int(count))


def validate_combination(model, weight):
    """Admissibility diagnostics for a (model, weight) pair.

    Returns a list of human-readable diagnostic strings; empty means the
    combination is admissible (all weighted normalisers finite).
    """
    diags = []
    if isinstance(weight, TableWeight):
        if not isinstance(model, Categorical):
            diags.append("table weights are only supported on categorical models")
        elif weight.values.size != model.size:
            diags.append("table weight length does not match categorical support size")
    elif isinstance(weight, ExpTiltWeight):
        if isinstance(model, Cauchy):
            if not weight.is_null():
                diags.append(
                    "exponential tilt is not integrable against Cauchy tails; only gamma=0 is admissible"
                )
        elif isinstance(model, Exponential):
            if weight.gamma.shape[0] != 1:
                diags.append("exp_tilt gamma must be scalar for exponential models")
            elif weight.scalar >= model.rate:
                diags.append(
                    f"weight not integrable under rate {model.rate}: requires gamma < rate"
                )
        elif isinstance(model, Gaussian):
            if weight.gamma.shape[0] != model.dim:
                diags.append("exp_tilt gamma dimension does not match gaussian dimension")
        elif isinstance(model, (Poisson, Categorical)):
            if weight.gamma.shape[0] != 1:
                diags.append("exp_tilt gamma must be scalar for discrete models")
    return diags


def weighted_normaliser(model, weight):
    """E_phi(model) = integral of phi * density over the support.

    Closed forms: Gaussian exp_tilt exp(g'mu + g'Sigma g / 2), Poisson
    exp_tilt exp(lam (e^g - 1)), Exponential exp_tilt rate/(rate - g);
    discrete families are summed exactly.
    """
    diags = validate_combination(model, weight)
    if diags:
        raise NonIntegrableWeightError("; ".join(diags))
    if isinstance(weight, ConstWeight):
        return 1.0
    if isinstance(weight, ExpTiltWeight) and weight.is_null():
        return 1.0
    if isinstance(weight, TableWeight):
        return float(model.probs @ weight.values)
    # exp_tilt on the remaining families
    if isinstance(model, Gaussian):
        g = weight.gamma
        return float(np.exp(g @ model.mean + 0.5 * g @ model.cov @ g))
    if isinstance(model, Poisson):
        return math.exp(model.lam * math.expm1(weight.scalar))
    if isinstance(model, Exponential):
        return model.rate / (model.rate - weight.scalar)
    if isinstance(model, Categorical):
        k = np.arange(model.size)
        return float(np.sum(model.probs * np.exp(weight.scalar * k)))
    if isinstance(model, Cauchy):
        # only gamma=0 passes validation, handled above
        return 1.0
    raise UnsupportedCombinationError(f"no weighted normaliser for {type(model).__name__}")


@dataclass(frozen=True)
class TiltedDensity:
    """Normalised reweighted density phi * p / E_phi(p)."""

    base: object
    weight: object
    normaliser: float = None

    def __post_init__(self):
        if self.normaliser is None:
            object.__setattr__(self, "normaliser", weighted_normaliser(self.base, self.weight))
        if not (self.normaliser > 0.0 and math.isfinite(self.normaliser)):
            raise NonIntegrableWeightError("tilted density requires a finite positive normaliser")

    def log_density(self, x):
        lphi = self.weight.log_value(x)
        return float(lphi) + self.base.log_density(x) - math.log(self.normaliser)


# ---------------------------------------------------------------------------
# JSON schema (consumed by the CLI)
# ---------------------------------------------------------------------------


def model_from_json(obj):
    """Parse {"family": ...} per the external model schema."""
    if not isinstance(obj, dict) or "family" not in obj:
        raise PreconditionError("model JSON must be an object with a 'family' field")
    fam = obj["family"]
    try:
        if fam == "gaussian":
            return Gaussian(mean=np.asarray(obj["mean"], dtype=float),
                            cov=np.asarray(obj["cov"], dtype=float))
        if fam == "poisson":
            return Poisson(lam=float(obj["lambda"]))
        if fam == "exponential":
            return Exponential(rate=float(obj["rate"]))
        if fam == "cauchy":
            return Cauchy(location=float(obj["location"]), scale=float(obj["scale"]))
        if fam == "categorical":
            return Categorical(probs=np.asarray(obj["probs"], dtype=float))
    except KeyError as exc:
        raise PreconditionError(f"model JSON for family '{fam}' is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise PreconditionError(f"model JSON for family '{fam}': {exc}") from exc
    raise PreconditionError(f"unknown model family '{fam}'")


def weight_from_json(obj):
    """Parse {"kind": ...} per the external weight schema."""
    if obj is None:
        return ConstWeight()
    if not isinstance(obj, dict) or "kind" not in obj:
        raise PreconditionError("weight JSON must be an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "const":
            return ConstWeight()
        if kind == "exp_tilt":
            return ExpTiltWeight(gamma=np.asarray(obj["gamma"], dtype=float))
        if kind == "table":
            return TableWeight(values=np.asarray(obj["values"], dtype=float))
    except KeyError as exc:
        raise PreconditionError(f"weight JSON for kind '{kind}' is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise PreconditionError(f"weight JSON for kind '{kind}': {exc}") from exc
    raise PreconditionError(f"unknown weight kind '{kind}'")


def model_to_json(model):
    if isinstance(model, Gaussian):
        return {"family": "gaussian", "mean": model.mean.tolist(), "cov": model.cov.tolist()}
    if isinstance(model, Poisson):
        return {"family": "poisson", "lambda": model.lam}
    if isinstance(model, Exponential):
        return {"family": "exponential", "rate": model.rate}
    if isinstance(model, Cauchy):
        return {"family": "cauchy", "location": model.location, "scale": model.scale}
    if isinstance(model, Categorical):
        return {"family": "categorical", "probs": model.probs.tolist()}
    raise PreconditionError(f"cannot serialise {type(model).__name__}")


def weight_to_json(weight):
    if isinstance(weight, ConstWeight):
        return {"kind": "const"}
    if isinstance(weight, ExpTiltWeight):
        return {"kind": "exp_tilt", "gamma": weight.gamma.tolist()}
    if isinstance(weight, TableWeight):
        return {"kind": "table", "values": weight.values.tolist()}
    raise PreconditionError(f"cannot serialise {type(weight).__name__}")

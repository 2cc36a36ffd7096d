"""Command-line front-end.

Each command parses model/weight JSON (inline or by file path), validates
weight admissibility before computing, and emits a machine-readable report.
Floats are printed with 17 significant digits so every value reparses
exactly and repeated runs with the same inputs are byte-identical.

Exit status: 0 success, 2 precondition/validation errors, 3 numerical
non-convergence.
"""

from __future__ import annotations

import json
import math
import os
import sys

import click
import numpy as np

from . import __version__, affinity, expfam, testing
from .errors import ConvergenceError, PreconditionError, RateInfiniteError
from .models import (
    Cauchy,
    ConstWeight,
    Exponential,
    ExpTiltWeight,
    model_from_json,
    model_to_json,
    validate_combination,
    weight_from_json,
    weight_to_json,
)

EXIT_PRECONDITION = 2
EXIT_NONCONVERGENCE = 3


# ---------------------------------------------------------------------------
# Serialisation: floats at 17 significant digits
# ---------------------------------------------------------------------------


def _fmt_float(x):
    if math.isnan(x):
        return "NaN"
    if x == math.inf:
        return "Infinity"
    if x == -math.inf:
        return "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent=2, _level=0):
    """Deterministic JSON with 17-significant-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
            for k, v in obj.items())
        return "{\n" + items + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}{dumps(v, indent, _level + 1)}" for v in obj)
        return "[\n" + items + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(obj)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _report(command, inputs, results):
    return dumps({
        "command": command,
        "inputs": inputs,
        "results": results,
        "version": __version__,
    }) + "\n"


# ---------------------------------------------------------------------------
# Input parsing and validation
# ---------------------------------------------------------------------------


def _load_json(text, what):
    text = text.strip()
    if not (text.startswith("{") or text.startswith("[")):
        if not os.path.exists(text):
            raise PreconditionError(f"{what}: file '{text}' not found")
        with open(text) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"{what}: malformed JSON near line {exc.lineno}, "
                                f"column {exc.colno}: {exc.msg}") from exc


def _parse_model(text, what):
    return model_from_json(_load_json(text, what))


def _parse_weight(text):
    if text is None:
        return ConstWeight()
    return weight_from_json(_load_json(text, "--weight"))


def validate_inputs(models, weight):
    """Admissibility diagnostics before any computation (spec `validate`)."""
    pair_exp = len(models) == 2 and all(isinstance(m, Exponential) for m in models)
    if pair_exp:
        return affinity._pair_diagnostics(models[0], models[1], weight)
    diags = []
    for m in models:
        if isinstance(m, Cauchy) and isinstance(weight, ExpTiltWeight) \
                and not weight.is_null():
            d = "exponential tilt is not integrable against Cauchy tails; only gamma=0 is admissible"
            if d not in diags:
                diags.append(d)
            continue
        for d in validate_combination(m, weight):
            if d not in diags:
                diags.append(d)
    return diags


def _require_valid(models, weight):
    diags = validate_inputs(models, weight)
    if diags:
        raise PreconditionError("; ".join(diags))


def _guarded(fn):
    try:
        fn()
    except PreconditionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PRECONDITION)
    except (ConvergenceError, RateInfiniteError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NONCONVERGENCE)


def _inputs_digest(weight, **models):
    digest = {name: model_to_json(m) for name, m in models.items()}
    digest["weight"] = weight_to_json(weight)
    return digest


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.version_option(__version__)
def main():
    """Weighted Chernoff information and context-sensitive testing tools."""


_model_p = click.option("--model-p", "model_p", required=True,
                        help="model JSON (inline or file path)")
_model_q = click.option("--model-q", "model_q", required=True,
                        help="model JSON (inline or file path)")
_weight = click.option("--weight", default=None,
                       help="weight JSON (inline or file path); default const")
_out = click.option("--out", default=None, help="output path (default stdout)")


@main.command("chernoff")
@_model_p
@_model_q
@_weight
@click.option("--solver", default="auto", type=click.Choice(["auto", "generic"]))
@_out
def cmd_chernoff(model_p, model_q, weight, solver, out):
    """Optimal Chernoff parameter and weighted Chernoff information."""

    def run():
        p = _parse_model(model_p, "--model-p")
        q = _parse_model(model_q, "--model-q")
        w = _parse_weight(weight)
        _require_valid([p, q], w)
        res = affinity.chernoff(p, q, w, solver=solver)
        _emit(_report("chernoff", _inputs_digest(w, model_p=p, model_q=q),
                      res.to_dict()), out)

    _guarded(run)


@main.command("curve")
@_model_p
@_model_q
@_weight
@click.option("--grid", default=101, type=int, help="number of alpha points (>= 3)")
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "json"]))
@_out
def cmd_curve(model_p, model_q, weight, grid, fmt, out):
    """Tabulate (alpha, rho_w, D_B_alpha) over [0, 1]."""

    def run():
        if grid < 3:
            raise PreconditionError("--grid must be at least 3")
        p = _parse_model(model_p, "--model-p")
        q = _parse_model(model_q, "--model-q")
        w = _parse_weight(weight)
        _require_valid([p, q], w)
        curve = affinity.AffinityCurve(p, q, w)
        rows = []
        for alpha in np.linspace(0.0, 1.0, grid):
            log_rho = curve.log_rho(float(alpha))
            rows.append((float(alpha), math.exp(log_rho), -log_rho))
        if fmt == "csv":
            lines = ["alpha,rho_w,d_b_alpha"]
            lines += [",".join(_fmt_float(v) for v in row) for row in rows]
            _emit("\n".join(lines) + "\n", out)
        else:
            _emit(_report("curve", _inputs_digest(w, model_p=p, model_q=q),
                          {"rows": [list(r) for r in rows]}), out)

    _guarded(run)


@main.command("divergence")
@_model_p
@_model_q
@_weight
@click.option("--alpha", default=None, type=float,
              help="also report rho_w and D_B at this alpha")
@_out
def cmd_divergence(model_p, model_q, weight, alpha, out):
    """Weighted KL divergence (plus affinities and Cauchy closed forms)."""

    def run():
        p = _parse_model(model_p, "--model-p")
        q = _parse_model(model_q, "--model-q")
        w = _parse_weight(weight)
        _require_valid([p, q], w)
        results = {"weighted_kl": expfam.weighted_kl(p, q, w)}
        if alpha is not None:
            rho = affinity.rho_w(p, q, w, alpha)
            results["alpha"] = float(alpha)
            results["rho_w"] = rho
            results["d_b_alpha"] = -math.log(rho)
        if isinstance(p, Cauchy) and isinstance(q, Cauchy):
            rho_half = affinity.cauchy_bhattacharyya_half(p, q, w)
            results["cauchy_kl"] = affinity.cauchy_kl(p, q)
            results["cauchy_rho_half"] = rho_half
            results["cauchy_d_c"] = -math.log(rho_half)
        _emit(_report("divergence", _inputs_digest(w, model_p=p, model_q=q),
                      results), out)

    _guarded(run)


@main.command("simulate")
@_model_p
@_model_q
@_weight
@click.option("--n", "ns", multiple=True, type=int, required=True,
              help="sample size (repeatable for convergence tables)")
@click.option("--replicates", default=10000, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--format", "fmt", default="json", type=click.Choice(["csv", "json"]))
@_out
def cmd_simulate(model_p, model_q, weight, ns, replicates, seed, fmt, out):
    """Monte Carlo optimal-loss estimate against the Chernoff reference."""

    def run():
        p = _parse_model(model_p, "--model-p")
        q = _parse_model(model_q, "--model-q")
        w = _parse_weight(weight)
        _require_valid([p, q], w)
        reports = [
            testing.simulate(testing.BinaryTestProblem(p, q, w, n), replicates, seed)
            for n in ns
        ]
        if fmt == "csv":
            lines = ["n,exponent_estimate,d_c_w"]
            lines += [f"{r.n},{_fmt_float(r.exponent_estimate)},{_fmt_float(r.d_c_w_reference)}"
                      for r in reports]
            _emit("\n".join(lines) + "\n", out)
        else:
            payload = [r.to_dict() for r in reports]
            results = payload[0] if len(payload) == 1 else {"reports": payload}
            _emit(_report("simulate", _inputs_digest(w, model_p=p, model_q=q),
                          results), out)

    _guarded(run)


@main.command("mary")
@click.option("--models", "models_spec", required=True,
              help="JSON list of models (inline or file path)")
@_weight
@click.option("--priors", default=None,
              help="comma-separated positive priors summing to 1")
@_out
def cmd_mary(models_spec, weight, priors, out):
    """Pairwise weighted Chernoff matrix and its minimum C_M^w."""

    def run():
        raw = _load_json(models_spec, "--models")
        if not isinstance(raw, list) or len(raw) < 2:
            raise PreconditionError("--models must be a JSON list of at least two models")
        models = [model_from_json(m) for m in raw]
        w = _parse_weight(weight)
        _require_valid(models, w)
        pr = None
        if priors is not None:
            try:
                pr = tuple(float(t) for t in priors.split(","))
            except ValueError as exc:
                raise PreconditionError(f"--priors: {exc}") from exc
        problem = testing.MAryProblem(tuple(models), w, pr)
        results = testing.mary_exponent(problem)
        inputs = {"models": [model_to_json(m) for m in models],
                  "weight": weight_to_json(w)}
        if pr is not None:
            inputs["priors"] = list(pr)
        _emit(_report("mary", inputs, results), out)

    _guarded(run)


@main.command("tailbound")
@_model_p
@_model_q
@_weight
@click.option("--beta", required=True, type=float)
@click.option("--n", default=200, type=int)
@click.option("--replicates", default=100000, type=int)
@click.option("--seed", default=0, type=int)
@_out
def cmd_tailbound(model_p, model_q, weight, beta, n, replicates, seed, out):
    """Martingale tail bound for L* versus its empirical frequency under Q."""

    def run():
        p = _parse_model(model_p, "--model-p")
        q = _parse_model(model_q, "--model-q")
        w = _parse_weight(weight)
        _require_valid([p, q], w)
        problem = testing.BinaryTestProblem(p, q, w, n)
        stats = testing.tilted_stats(problem)
        bound = testing.tail_bound(problem, beta, n)
        freq, se = testing.tail_frequency(problem, beta, n, replicates, seed)
        _emit(_report("tailbound", _inputs_digest(w, model_p=p, model_q=q), {
            "beta": float(beta),
            "n": n,
            "bound": bound,
            "empirical_frequency": freq,
            "std_error": se,
            "kl_qp": stats.kl_qp,
            "d_bound": stats.d_bound,
            "sigma2": stats.sigma2,
            "shift": stats.shift,
            "replicates": replicates,
            "seed": seed,
        }), out)

    _guarded(run)


@main.command("identities")
@_model_p
@_model_q
@_weight
@_out
def cmd_identities(model_p, model_q, weight, out):
    """Residuals of the exponential-family divergence identity suite."""

    def run():
        p = _parse_model(model_p, "--model-p")
        q = _parse_model(model_q, "--model-q")
        w = _parse_weight(weight)
        _require_valid([p, q], w)
        results = expfam.verify_identities(p, q, w)
        _emit(_report("identities", _inputs_digest(w, model_p=p, model_q=q),
                      results), out)

    _guarded(run)


if __name__ == "__main__":
    main()

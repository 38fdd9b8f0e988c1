"""Command-line front end.

Every subcommand writes a table as CSV (17 significant digits, fixed column
order) or JSON to ``--out`` (stdout by default). Exit codes: 0 success,
1 invariant violation or numerical failure, 2 invalid input.
"""

from __future__ import annotations

import functools
import io
import json
import math
import re
import sys
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from . import monte_carlo, reports, risk_analysis
from .errors import InternalConsistencyError, InvalidInput, NonConvergence
from .estimators import EstimatorKind, Kind, ProblemSpec, estimate, general_c

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0+unknown"

EXIT_VIOLATION = 1
EXIT_INVALID = 2


class InvariantViolation(Exception):
    """A checked property failed; the command exits with status 1."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return f"{value:.17g}"
    return str(value)


def render(rows: list[dict], columns, fmt: str, meta: dict) -> str:
    if fmt == "json":
        payload = {
            "metadata": meta,
            "columns": list(columns),
            "rows": [{c: _json_value(r.get(c)) for c in columns} for r in rows],
        }
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _emit(ctx_opts: dict, rows, columns, params: dict) -> None:
    meta = {"command": click.get_current_context().info_name, "version": __version__, **params}
    text = render(rows, columns, ctx_opts["fmt"], meta)
    out = ctx_opts["out"]
    if out in (None, "-"):
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
    if ctx_opts.get("manifest"):
        Path(ctx_opts["manifest"]).write_text(json.dumps(meta, indent=2, default=str) + "\n")


def output_options(func):
    @click.option("--out", "-o", default="-", show_default=True, help="Output path; '-' for stdout.")
    @click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
    @click.option("--manifest", type=click.Path(dir_okay=False), default=None,
                  help="Also write a JSON run manifest with every parameter.")
    @click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
    @click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
    @functools.wraps(func)
    def wrapper(*args, out, fmt, manifest, threads, seed, **kwargs):
        opts = {"out": out, "fmt": fmt, "manifest": manifest, "threads": threads, "seed": seed}
        return func(*args, opts=opts, **kwargs)

    return wrapper


def _parse_tau2(ctx, param, value):
    if value is None or value.lower() == "unknown":
        return None
    try:
        return float(value)
    except ValueError:
        raise click.BadParameter("expected a number or 'unknown'") from None


def spec_options(p_required: bool = True):
    def decorate(func):
        @click.option("--p", "p", type=int, required=p_required, default=None, help="Dimension p.")
        @click.option("--n", "n", type=int, required=True, help="Degrees of freedom of S^2.")
        @click.option("--sigma2", type=float, default=1.0, show_default=True)
        @click.option("--tau2", callback=_parse_tau2, default="1.0", show_default=True,
                      help="Prior variance, or 'unknown'.")
        @click.option("--nu-file", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="Prior mean vector file (whitespace or comma separated).")
        @click.option("--nu-zero", is_flag=True, default=False, help="Prior mean 0 (the default).")
        @click.option("--nu-value", type=float, default=None, help="Constant prior mean.")
        @functools.wraps(func)
        def wrapper(*args, nu_file, nu_zero, nu_value, **kwargs):
            if (nu_file is not None) + (nu_value is not None) + nu_zero > 1:
                raise click.UsageError("use only one of --nu-file, --nu-zero, --nu-value")
            nu = None
            if nu_file is not None:
                nu = read_vector(nu_file)
            elif nu_value is not None:
                nu = nu_value
            return func(*args, nu=nu, **kwargs)

        return wrapper

    return decorate


def read_vector(path: str) -> np.ndarray:
    """Read numbers separated by whitespace and/or commas; '-' reads stdin."""
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    tokens = [t for t in re.split(r"[\s,;]+", text) if t]
    try:
        return np.array([float(t) for t in tokens], dtype=float)
    except ValueError as exc:
        raise InvalidInput(f"{path}: not a numeric vector ({exc})") from None


def _kinds(text: str, extra_c: float | None = None) -> list[EstimatorKind]:
    kinds = [EstimatorKind.parse(t) for t in text.split(",") if t.strip()]
    if extra_c is not None:
        kinds.append(general_c(extra_c))
    return kinds


def _grid(lo, hi, points, spacing):
    return reports.GridRequest(lo, hi, points, spacing).values()


def rho_grid_options(func):
    options = [
        click.option("--rho-lo", type=float, default=0.01, show_default=True),
        click.option("--rho-hi", type=float, default=20.0, show_default=True),
        click.option("--points", type=int, default=200, show_default=True),
        click.option("--spacing", type=click.Choice(["log", "linear"]), default="log",
                     show_default=True),
    ]
    for option in reversed(options):
        func = option(func)
    return func


class _Group(click.Group):
    """Maps library exceptions to the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except InvalidInput as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_INVALID)
        except (InternalConsistencyError, NonConvergence, InvariantViolation) as exc:
            click.echo(f"violation: {exc}", err=True)
            ctx.exit(EXIT_VIOLATION)


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="mvn-shrinkage")
def main():
    """Shrinkage estimators of a normal mean under a normal prior: risks,
    minimaxity checks, figure grids and a Monte Carlo oracle."""


@main.command("estimate")
@click.argument("x_file", type=click.Path(allow_dash=True, dir_okay=False))
@click.option("--kind", required=True, help="mle, bayes, modified-bayes, empirical-modified-bayes, "
              "general-c:<c>, james-stein or james-stein-plus.")
@click.option("--c", "c", type=float, default=None, help="Constant for --kind general-c.")
@click.option("--s2", type=float, default=None, help="Observed S^2.")
@spec_options(p_required=False)
@output_options
def estimate_cmd(x_file, kind, c, s2, p, n, sigma2, tau2, nu, opts):
    """Apply one estimator to the vector in X_FILE."""
    x = read_vector(x_file)
    if p is not None and p != x.size:
        raise InvalidInput(f"--p={p} but {x_file} holds {x.size} values")
    if kind.strip().lower() == "general-c" and c is not None:
        kind = f"general-c:{c!r}"
    est_kind = EstimatorKind.parse(kind)
    spec = ProblemSpec(x.size, n, sigma2, tau2, nu)
    if s2 is None and est_kind.tag not in (Kind.MLE, Kind.BAYES):
        raise InvalidInput(f"--s2 is required for {est_kind}")
    values = estimate(est_kind, spec, x, s2)
    rows = [{"estimate": float(v)} for v in values]
    _emit(opts, rows, ("estimate",),
          {"kind": str(est_kind), "p": spec.p, "n": n, "sigma2": sigma2, "tau2": tau2, "s2": s2})


RISK_COLUMNS = ("kind", "p", "n", "sigma2", "tau2", "rho", "risk", "ratio", "lower_bound",
                "upper_bound", "minimax", "limit_ratio")


@main.command("exact-risk")
@click.option("--kind", "kind_text", default=None,
              help="Comma list of estimators (default: every one with a closed form).")
@click.option("--c", "c", type=float, default=None, help="Add general-c with this constant.")
@spec_options()
@output_options
def exact_risk_cmd(kind_text, c, p, n, sigma2, tau2, nu, opts):
    """Closed-form Bayes risk, risk ratio, bounds and minimax verdict."""
    spec = ProblemSpec(p, n, sigma2, tau2, nu)
    if tau2 is None:
        raise InvalidInput("exact risks need a known --tau2")
    if kind_text is None:
        kind_text = "mle,bayes,modified-bayes" + (",empirical-modified-bayes" if p >= 3 else "")
    rows = []
    for kind in _kinds(kind_text, c):
        report = risk_analysis.exact_risk(kind, spec)
        if report is None:
            raise InvalidInput(f"no closed-form risk for {kind}")
        rows.append(report.as_row())
    _emit(opts, rows, RISK_COLUMNS, {"p": p, "n": n, "sigma2": sigma2, "tau2": tau2})


MC_COLUMNS = ("kind", "mse_mean", "std_error", "exact_risk", "z_score")


@main.command("mc-risk")
@click.option("--replicates", "-N", type=click.IntRange(min=2), default=100_000, show_default=True)
@click.option("--estimators", default=None,
              help="Comma list (default: mle,bayes,modified-bayes[,empirical-modified-bayes]).")
@spec_options()
@output_options
def mc_risk_cmd(replicates, estimators, p, n, sigma2, tau2, nu, opts):
    """Monte Carlo Bayes risk of each estimator, with the exact value when known."""
    if estimators is None:
        estimators = "mle,bayes,modified-bayes" + (",empirical-modified-bayes" if p >= 3 else "")
    spec = ProblemSpec(p, n, sigma2, tau2, nu)
    config = monte_carlo.McConfig(spec, tuple(_kinds(estimators)), replicates, opts["seed"])
    rows = [
        {
            "kind": str(e.estimator),
            "mse_mean": e.mse_mean,
            "std_error": e.std_error,
            "exact_risk": e.exact_risk,
            "z_score": e.z_score,
        }
        for e in monte_carlo.empirical_risk(config, threads=opts["threads"])
    ]
    _emit(opts, rows, MC_COLUMNS,
          {"p": p, "n": n, "sigma2": sigma2, "tau2": tau2, "replicates": replicates,
           "seed": opts["seed"], "estimators": estimators})


@main.command("ratio-curve")
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@rho_grid_options
@output_options
def ratio_curve_cmd(n, rho_lo, rho_hi, points, spacing, opts):
    """Modified Bayes risk ratio against rho = tau2/sigma2, with its bounds."""
    rows = reports.ratio_curve(n, _grid(rho_lo, rho_hi, points, spacing), opts["threads"])
    _emit(opts, rows, reports.RATIO_COLUMNS,
          {"n": n, "rho_lo": rho_lo, "rho_hi": rho_hi, "points": points, "spacing": spacing})


@main.command("surface")
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@click.option("--p", "p", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--tau2-lo", type=float, default=0.1, show_default=True)
@click.option("--tau2-hi", type=float, default=10.0, show_default=True)
@click.option("--sigma2-lo", type=float, default=0.1, show_default=True)
@click.option("--sigma2-hi", type=float, default=10.0, show_default=True)
@click.option("--points", type=int, default=50, show_default=True)
@click.option("--spacing", type=click.Choice(["log", "linear"]), default="linear", show_default=True)
@output_options
def surface_cmd(n, p, tau2_lo, tau2_hi, sigma2_lo, sigma2_hi, points, spacing, opts):
    """Risk difference R(modified Bayes) - R(X) over a tau2 x sigma2 grid."""
    rows = reports.risk_difference_surface(
        n,
        _grid(tau2_lo, tau2_hi, points, spacing),
        _grid(sigma2_lo, sigma2_hi, points, spacing),
        p,
        opts["threads"],
    )
    _emit(opts, rows, reports.SURFACE_COLUMNS,
          {"n": n, "p": p, "tau2_lo": tau2_lo, "tau2_hi": tau2_hi, "sigma2_lo": sigma2_lo,
           "sigma2_hi": sigma2_hi, "points": points, "spacing": spacing})


@main.command("bound-curve")
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@rho_grid_options
@output_options
def bound_curve_cmd(n, rho_lo, rho_hi, points, spacing, opts):
    """Closed-form upper bound on (R(modified Bayes) - R(X)) / R(X) against rho."""
    rows = reports.bound_curve(n, _grid(rho_lo, rho_hi, points, spacing))
    _emit(opts, rows, reports.BOUND_COLUMNS,
          {"n": n, "rho_lo": rho_lo, "rho_hi": rho_hi, "points": points, "spacing": spacing})


OPTIMAL_C_COLUMNS = ("p", "n", "c_hat", "c_numeric", "rel_diff", "c_minimax_max",
                     "ratio_at_c_hat", "ratio_at_c_max")


@main.command("optimal-c")
@spec_options()
@output_options
def optimal_c_cmd(p, n, sigma2, tau2, nu, opts):
    """Optimal general-c constant, closed form and numeric."""
    spec = ProblemSpec(p, n, sigma2, 1.0 if tau2 is None else tau2, nu)
    c_hat = risk_analysis.optimal_c(spec)
    c_num = risk_analysis.numeric_optimal_c(spec)
    rel = abs(c_num - c_hat) / c_hat
    c_max = 2.0 * (p - 2) / (n + 2)
    rows = [{
        "p": p, "n": n, "c_hat": c_hat, "c_numeric": c_num, "rel_diff": rel,
        "c_minimax_max": c_max,
        "ratio_at_c_hat": risk_analysis.risk_general_c(spec, c_hat).ratio,
        "ratio_at_c_max": risk_analysis.risk_general_c(spec, c_max).ratio,
    }]
    _emit(opts, rows, OPTIMAL_C_COLUMNS, {"p": p, "n": n, "sigma2": sigma2, "tau2": spec.tau2})
    if rel > 1e-10:
        raise InvariantViolation(f"numeric argmin {c_num!r} differs from {c_hat!r} by {rel:.2e}")


MINIMAX_COLUMNS = ("kind", "p", "n", "rho", "ratio", "upper_bound", "minimax", "ok")


@main.command("minimax-check")
@click.option("--n-min", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--n-max", type=click.IntRange(min=1), default=60, show_default=True)
@click.option("--p", "p", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--rho-lo", type=float, default=0.01, show_default=True)
@click.option("--rho-hi", type=float, default=100.0, show_default=True)
@click.option("--points", type=int, default=41, show_default=True)
@output_options
def minimax_check_cmd(n_min, n_max, p, rho_lo, rho_hi, points, opts):
    """Sweep (n, rho); fail if a case covered by a minimaxity theorem has ratio > 1.

    Covered cases: the modified Bayes estimator for n >= 5 (its closed-form
    upper bound must also stay <= 1) and the empirical modified Bayes
    estimator for p >= 3.
    """
    if n_min > n_max:
        raise InvalidInput("--n-min must not exceed --n-max")
    rhos = _grid(rho_lo, rho_hi, points, "log")
    rows, bad = [], []
    for n in range(n_min, n_max + 1):
        for rho in rhos:
            spec = ProblemSpec(p, n, 1.0, float(rho))
            mb = risk_analysis.risk_modified_bayes(spec)
            ok = n < 5 or (mb.upper_bound <= 1.0 and mb.ratio <= 1.0)
            rows.append({"kind": "modified-bayes", "p": p, "n": n, "rho": float(rho),
                         "ratio": mb.ratio, "upper_bound": mb.upper_bound,
                         "minimax": mb.minimax.value, "ok": ok})
            if not ok:
                bad.append(f"modified-bayes n={n} rho={rho:g}")
            if p >= 3:
                eb = risk_analysis.risk_empirical_modified_bayes(spec)
                ok = eb.ratio < 1.0
                rows.append({"kind": "empirical-modified-bayes", "p": p, "n": n, "rho": float(rho),
                             "ratio": eb.ratio, "upper_bound": None,
                             "minimax": eb.minimax.value, "ok": ok})
                if not ok:
                    bad.append(f"empirical-modified-bayes n={n} rho={rho:g}")
    _emit(opts, rows, MINIMAX_COLUMNS,
          {"n_min": n_min, "n_max": n_max, "p": p, "rho_lo": rho_lo, "rho_hi": rho_hi,
           "points": points})
    if bad:
        raise InvariantViolation(f"{len(bad)} covered case(s) not minimax, first: {bad[0]}")


LEMMA_COLUMNS = ("check", "point", "lhs", "rhs", "margin", "passed")


@main.command("verify-lemmas")
@click.option("--dof-max", type=click.IntRange(min=1), default=60, show_default=True)
@click.option("--replicates", "-N", type=click.IntRange(min=2), default=1_000_000, show_default=True,
              help="Monte Carlo draws for the Stein-identity check.")
@click.option("--suite", "suites", multiple=True,
              type=click.Choice(["monotone", "bracket", "recurrence", "stein"]),
              help="Run only these suites (repeatable).")
@click.option("--failures-only", is_flag=True, default=False)
@output_options
def verify_lemmas_cmd(dof_max, replicates, suites, failures_only, opts):
    """Run the chi-square inequality/identity suites and the Stein-identity check."""
    grid = reports.LemmaGrid(dofs=tuple(range(1, dof_max + 1)), stein_replicates=replicates,
                             seed=opts["seed"])
    report = reports.verify_lemmas(grid, suites or None)
    checks = report.failures if failures_only else report.checks
    _emit(opts, [c.as_row() for c in checks], LEMMA_COLUMNS,
          {"dof_max": dof_max, "replicates": replicates, "seed": opts["seed"],
           "suites": list(suites) or "all"})
    for name, (passed, total) in report.summary().items():
        click.echo(f"{'PASS' if passed == total else 'FAIL'} {name}: {passed}/{total}", err=True)
    if not report.passed:
        first = report.failures[0]
        raise InvariantViolation(
            f"{len(report.failures)} check(s) failed, first: {first.name} at {first.point} "
            f"(margin {first.margin:.3g})"
        )


if __name__ == "__main__":  # pragma: no cover
    main()

"""
Command-line entry point.
Every subcommand runs one library operation and writes a single JSON document
(or a CSV table) embedding the tool version, argv and seed.

Exit status: 0 ok, 2 invalid arguments, 3 budget exceeded,
4 precondition evidence failed, 1 unexpected error.
"""
import json
import logging
import os
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

import click
import numpy as np
from pydantic import BaseModel, ValidationError, field_validator

from convergence import __version__, diagnostics, frame_harness, rearrangement, sgd_harness
from convergence.errors import (
    BudgetExceededError,
    ConvergenceError,
    NotAFrameError,
    NotConditionallyConvergentError,
)
from convergence.io_utils import write_csv
from convergence.series import SeriesSpec, SignSource, series_from_name
from convergence.summation_utils import SummationStrategy
from convergence.workspace import ScalarMode
from runner import db

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = int(float(os.environ.get("UNCOND_DEFAULT_BUDGET", "1e6")))
LOG_LEVEL = os.environ.get("UNCOND_LOG_LEVEL", "INFO")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_PRECONDITION = 4


class RunConfig(BaseModel):
    """Validated inputs shared by every subcommand."""

    subcommand: str
    source: dict = {}
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    output_format: str = "json"
    output_path: Optional[str] = None
    workers: int = 1

    @field_validator("budget", "workers")
    @classmethod
    def positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("output_format")
    @classmethod
    def known_format(cls, v: str) -> str:
        if v not in ("json", "csv"):
            raise ValueError("must be json or csv")
        return v


# Option groups

def series_options(fn):
    fn = click.option("--series", "series_name", required=True, help="Series family name")(fn)
    fn = click.option("--alpha", type=float, default=1.0, show_default=True, help="Decay exponent")(fn)
    fn = click.option("--signs", default="alternating", show_default=True,
                      help="alternating, seeded, or an explicit pattern like +-+ or 1,-1")(fn)
    fn = click.option("--path", "series_path", default=None, help="Series file for from-file")(fn)
    fn = click.option("--mode", type=click.Choice([m.value for m in ScalarMode]), default="float64",
                      show_default=True)(fn)
    return fn


def output_options(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True, help="Seed for sampled steps")(fn)
    fn = click.option("--format", "output_format", type=click.Choice(["json", "csv"]), default="json",
                      show_default=True)(fn)
    fn = click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None,
                      help="Write here instead of stdout")(fn)
    fn = click.option("--workers", type=int, default=1, show_default=True)(fn)
    fn = click.option("--record", is_flag=True, help="Store the run in the ledger")(fn)
    return fn


def _parse_budget(value: str) -> int:
    try:
        budget = float(value)
    except ValueError:
        raise click.BadParameter(f"budget must be a number, got {value!r}")
    if not budget.is_integer():
        raise click.BadParameter(f"budget must be a whole number of terms, got {value!r}")
    return int(budget)


def _parse_signs(text: str, seed: int) -> SignSource:
    if text == "alternating":
        return SignSource("alternating")
    if text == "seeded":
        return SignSource("seeded", seed=seed)
    if set(text) <= {"+", "-"}:
        return SignSource("explicit", signs=tuple(1 if ch == "+" else -1 for ch in text))
    try:
        return SignSource("explicit", signs=tuple(int(s) for s in text.split(",")))
    except ValueError:
        raise click.BadParameter(f"Unrecognised sign source {text!r}")


def _spec(series_name: str, alpha: float, signs: str, series_path: Optional[str], mode: str,
          seed: int) -> SeriesSpec:
    return series_from_name(series_name, alpha=alpha, signs=_parse_signs(signs, seed)
                            if series_name == "signed-coordinate" else None,
                            path=series_path, mode=ScalarMode(mode))


def _config(ctx: click.Context, source: dict, budget: int = DEFAULT_BUDGET, **kwargs) -> RunConfig:
    config = RunConfig(subcommand=ctx.info_name, source=source, budget=budget,
                       seed=kwargs["seed"], output_format=kwargs["output_format"],
                       output_path=kwargs["output_path"], workers=kwargs["workers"])
    ctx.obj["seed"] = config.seed
    ctx.obj["output"] = config.output_path
    return config


def _envelope(ctx: click.Context, config: RunConfig, result: dict) -> dict:
    return {
        "toolVersion": __version__,
        "argv": ctx.obj["argv"],
        "seed": config.seed,
        "subcommand": config.subcommand,
        "generatedAt": datetime.now(timezone.utc).isoformat(),
        "result": result,
    }


def _emit(ctx: click.Context, config: RunConfig, result: dict, header: Optional[Sequence[str]] = None,
          rows: Optional[list] = None) -> None:
    if config.output_format == "csv":
        if rows is None:
            raise click.UsageError(f"{config.subcommand} has no tabular output; use --format json")
        if config.output_path:
            write_csv(config.output_path, header, rows)
        else:
            write_csv(click.get_text_stream("stdout"), header, rows)
        return
    text = json.dumps(_envelope(ctx, config, result), sort_keys=True, indent=2, default=_jsonable)
    if config.output_path:
        with open(config.output_path, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


@click.group()
@click.version_option(__version__)
def cli():
    """Numerical diagnostics for unconditional convergence of series."""


@cli.command()
@series_options
@output_options
@click.option("--budget", default=str(DEFAULT_BUDGET), show_default=True, help="Largest term index examined")
@click.pass_context
def classify(ctx, series_name, alpha, signs, series_path, mode, budget, **opts):
    """Aggregate all diagnostics into a heuristic verdict."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    config = _config(ctx, spec.to_dict(), _parse_budget(budget), **opts)
    report = diagnostics.classify(spec, config.budget, seed=config.seed, workers=config.workers)
    ctx.obj["summary"] = report.verdict
    _emit(ctx, config, report.to_dict(), ("record", "n", "value"), report.checkpoint_rows())


@cli.command()
@series_options
@output_options
@click.option("--target", type=float, required=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--budget", default=str(DEFAULT_BUDGET), show_default=True, help="Maximum terms placed")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Export the trace as JSON lines")
@click.pass_context
def rearrange(ctx, series_name, alpha, signs, series_path, mode, target, tol, budget, trace_path, **opts):
    """Greedy rearrangement of a real series towards a target."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    config = _config(ctx, spec.to_dict(), _parse_budget(budget), **opts)
    try:
        trace = rearrangement.riemann_rearrange(spec, target, tol, config.budget)
    except BudgetExceededError as e:
        if trace_path and e.partial is not None:
            e.partial.export(trace_path)
        raise
    if trace_path:
        trace.export(trace_path)
    ctx.obj["summary"] = f"final sum {trace.final_sum:.12g}"
    rows = [(r["step"], r["termIndex"], r["termValue"], r["runningSum"]) for r in trace.records()]
    _emit(ctx, config, {"series": spec.to_dict(), "trace": trace.summary(), "traceFile": trace_path},
          ("step", "termIndex", "termValue", "runningSum"), rows)


@cli.command("net-sup")
@series_options
@output_options
@click.option("--n", "start", type=int, default=0, show_default=True, help="Window start (exclusive)")
@click.option("--k", "width", type=int, default=20, show_default=True, help="Window width")
@click.option("--method", type=click.Choice([m.value for m in diagnostics.NetSupMethod]), default="exhaustive",
              show_default=True)
@click.pass_context
def net_sup(ctx, series_name, alpha, signs, series_path, mode, start, width, method, **opts):
    """sup over subsets F of the window of ‖Σ_F x_n‖."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    config = _config(ctx, spec.to_dict(), **opts)
    window = diagnostics.TailWindow(start, width)
    value, subset = diagnostics.net_cauchy_witness(spec, window, diagnostics.NetSupMethod(method),
                                                   workers=config.workers)
    ctx.obj["summary"] = f"{value:.12g}"
    _emit(ctx, config, {"series": spec.to_dict(), "window": window.to_dict(), "method": method,
                        "statistic": value, "maximizer": subset})


@cli.command("sign-stress")
@series_options
@output_options
@click.option("--n", "count_terms", type=int, required=True, help="Number of terms")
@click.option("--sign-mode", type=click.Choice([m.value for m in diagnostics.SignMode]), default="exhaustive",
              show_default=True)
@click.option("--count", type=int, default=100, show_default=True, help="Samples for sampled mode")
@click.pass_context
def sign_stress(ctx, series_name, alpha, signs, series_path, mode, count_terms, sign_mode, count, **opts):
    """max over sign patterns of ‖Σ ε_n x_n‖."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    config = _config(ctx, spec.to_dict(), **opts)
    result = diagnostics.sign_stress(spec, count_terms, diagnostics.SignMode(sign_mode), count=count,
                                     seed=config.seed, workers=config.workers)
    ctx.obj["summary"] = f"{result.max_value:.12g}"
    _emit(ctx, config, {"series": spec.to_dict(), **result.to_dict()})


@cli.command("multiplier-stress")
@series_options
@output_options
@click.option("--multiplier", type=click.Choice(["constant", "threshold-mask", "alternating-log", "random-bounded"]),
              default="alternating-log", show_default=True)
@click.option("--c", "constant", type=float, default=1.0, show_default=True, help="Constant value or bound C")
@click.option("--keep", default="", help="Comma-separated kept indices for threshold-mask")
@click.option("--bound", type=float, default=None, help="Declared sup|λ_n|")
@click.option("--n", "count_terms", default=str(DEFAULT_BUDGET), show_default=True, help="Number of terms")
@click.pass_context
def multiplier_stress(ctx, series_name, alpha, signs, series_path, mode, multiplier, constant, keep, bound,
                      count_terms, **opts):
    """Growth of ‖Σ λ_n x_n‖ for a bounded multiplier."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    N = _parse_budget(count_terms)
    config = _config(ctx, spec.to_dict(), N, **opts)
    if multiplier == "constant":
        lam = diagnostics.Multiplier.constant(constant)
    elif multiplier == "threshold-mask":
        try:
            lam = diagnostics.Multiplier.threshold_mask(int(k) for k in keep.split(",") if k.strip())
        except ValueError:
            raise click.BadParameter(f"--keep must list integers, got {keep!r}")
    elif multiplier == "random-bounded":
        lam = diagnostics.Multiplier.random_bounded(constant, config.seed)
    else:
        lam = diagnostics.Multiplier.alternating_log()
    result = diagnostics.multiplier_stress(spec, lam, N, declared_bound=bound)
    ctx.obj["summary"] = result.record.growth_class
    _emit(ctx, config, {"series": spec.to_dict(), **result.to_dict()}, ("n", "value"), result.record.rows())


@cli.command("weak-tail")
@series_options
@output_options
@click.option("--n", "start", type=int, default=0, show_default=True)
@click.option("--k", "width", type=int, default=20, show_default=True)
@click.option("--method", type=click.Choice([m.value for m in diagnostics.WeakTailMethod]),
              default="closed-form-coordinate", show_default=True)
@click.option("--iterations", type=int, default=200, show_default=True)
@click.pass_context
def weak_tail(ctx, series_name, alpha, signs, series_path, mode, start, width, method, iterations, **opts):
    """sup over unit functionals of Σ |⟨x_n, x*⟩| on a window."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    config = _config(ctx, spec.to_dict(), **opts)
    window = diagnostics.TailWindow(start, width)
    result = diagnostics.weak_uniform_tail(spec, window, diagnostics.WeakTailMethod(method),
                                           iterations=iterations, seed=config.seed)
    ctx.obj["summary"] = f"{result.statistic:.12g}"
    _emit(ctx, config, {"series": spec.to_dict(), "window": window.to_dict(), **result.to_dict()})


@cli.command()
@series_options
@output_options
@click.option("--n", "count_terms", default="10000", show_default=True)
@click.option("--count", type=int, default=16, show_default=True)
@click.pass_context
def subseries(ctx, series_name, alpha, signs, series_path, mode, count_terms, count, **opts):
    """Worst tail oscillation across sampled subseries."""
    spec = _spec(series_name, alpha, signs, series_path, mode, opts["seed"])
    N = _parse_budget(count_terms)
    config = _config(ctx, spec.to_dict(), N, **opts)
    result = diagnostics.subseries_sample(spec, N, count, config.seed)
    ctx.obj["summary"] = f"{result.worst:.12g}"
    _emit(ctx, config, {"series": spec.to_dict(), **result.to_dict()})


@cli.command("sgd-sensitivity")
@output_options
@click.option("--stream", "stream_kind", type=click.Choice(["quadratic", "ill-conditioned", "heavy-tailed", "file"]),
              default="quadratic", show_default=True)
@click.option("--path", "stream_path", default=None, help="Gradient file for --stream file")
@click.option("--d", "dim", type=int, default=10, show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--schedule", type=click.Choice(["constant", "inverse-sqrt"]), default="constant", show_default=True)
@click.option("--eta", type=float, default=0.01, show_default=True)
@click.option("--perms", type=int, default=20, show_default=True)
@click.option("--strategies", default="naive,pairwise,compensated,exact-rational", show_default=True)
@click.option("--pairing", type=click.Choice(list(sgd_harness.PAIRINGS)), default="position", show_default=True)
@click.pass_context
def sgd_sensitivity(ctx, stream_kind, stream_path, dim, samples, schedule, eta, perms, strategies, pairing, **opts):
    """Spread of accumulated updates across sample orders."""
    seed = opts["seed"]
    if stream_kind == "file":
        if not stream_path:
            raise click.BadParameter("--stream file needs --path")
        stream = sgd_harness.stream_from_file(stream_path)
    elif stream_kind == "ill-conditioned":
        stream = sgd_harness.ill_conditioned_stream(dim, samples, seed)
    elif stream_kind == "heavy-tailed":
        stream = sgd_harness.heavy_tailed_stream(dim, samples, seed)
    else:
        stream = sgd_harness.quadratic_stream(dim, samples, seed)
    try:
        chosen = [SummationStrategy(s.strip()) for s in strategies.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"Unknown strategy in {strategies!r}")
    config = _config(ctx, stream.to_dict(), **opts)
    sched = sgd_harness.LrSchedule(schedule, eta=eta)
    report = sgd_harness.permutation_sensitivity(stream, sched, perms, config.seed, chosen,
                                                 pairing=pairing, workers=config.workers)
    ctx.obj["summary"] = "flagged" if report.flagged else "ok"
    rows = [(d.strategy, d.num_perms, d.seed, d.max_pairwise_deviation, d.reference_deviation)
            for d in report.strategies.values()]
    _emit(ctx, config, report.to_dict(),
          ("strategy", "numPerms", "seed", "maxPairwiseDeviation", "referenceDeviation"), rows)


def _build_frame(kind: str, dim: int, vectors: int, level: int, path: Optional[str], seed: int):
    if kind == "orthonormal":
        return frame_harness.orthonormal(dim)
    if kind == "mercedes-benz":
        return frame_harness.mercedes_benz()
    if kind == "rotated-bases":
        return frame_harness.rotated_bases_union(dim, max(1, vectors // dim), seed)
    if kind == "random-unit":
        return frame_harness.random_unit_frame(dim, vectors, seed)
    if kind == "haar":
        return frame_harness.haar_system(level)
    if kind == "fourier":
        return frame_harness.fourier_system(level)
    if not path:
        raise click.BadParameter("--frame file needs --path")
    return frame_harness.frame_from_file(path)


@cli.command("frame-threshold")
@output_options
@click.option("--frame", "frame_kind",
              type=click.Choice(["orthonormal", "mercedes-benz", "rotated-bases", "random-unit", "haar", "fourier",
                                 "file"]),
              default="mercedes-benz", show_default=True)
@click.option("--d", "dim", type=int, default=4, show_default=True)
@click.option("--m", "vectors", type=int, default=8, show_default=True, help="Number of frame vectors")
@click.option("--level", type=int, default=4, show_default=True, help="Haar or Fourier resolution 2^level")
@click.option("--path", "frame_path", default=None, help="Frame file for --frame file")
@click.option("--rule", type=click.Choice(["hard", "soft"]), default="hard", show_default=True)
@click.option("--taus", default=None, help="Comma-separated thresholds (default: 20 evenly spaced)")
@click.option("--signals", type=int, default=100, show_default=True, help="Random unit signals")
@click.option("--haar-levels", default="", help="Comma-separated levels for a Haar tail report")
@click.option("--haar-signal", type=click.Choice(sorted(frame_harness.SIGNALS)), default="step", show_default=True)
@click.pass_context
def frame_threshold(ctx, frame_kind, dim, vectors, level, frame_path, rule, taus, signals, haar_levels,
                    haar_signal, **opts):
    """Thresholded canonical-dual reconstruction across τ."""
    seed = opts["seed"]
    frame = _build_frame(frame_kind, dim, vectors, level, frame_path, seed)
    config = _config(ctx, frame.to_dict(), **opts)
    rng = np.random.default_rng(config.seed)
    f = rng.normal(size=(signals, frame.d))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    try:
        tau_list = [float(t) for t in taus.split(",")] if taus else list(np.linspace(0.0, 1.0, 20))
        levels = [int(k) for k in haar_levels.split(",") if k.strip()]
    except ValueError:
        raise click.BadParameter("--taus and --haar-levels take comma-separated numbers")
    sweep = frame_harness.threshold_sweep(frame, f, tau_list, rule)
    result = {"frame": frame.to_dict(), "sweep": sweep.to_dict(), "signals": signals}
    if levels:
        report = frame_harness.haar_tail_report(frame_harness.SIGNALS[haar_signal], levels,
                                                frame_harness.ThresholdRule(rule, tau=tau_list[len(tau_list) // 2]))
        result["haarTail"] = {"signal": haar_signal, "levels": [r.to_dict() for r in report],
                              "fourierContrast": [b.to_dict() for b in frame_harness.basis_contrast(
                                  frame_harness.SIGNALS[haar_signal], levels)]}
    ctx.obj["summary"] = "monotone" if sweep.monotone else "not monotone"
    _emit(ctx, config, result, ("tau", "meanError", "maxError"), sweep.rows())


@cli.command()
@click.option("--limit", type=int, default=20, show_default=True)
def history(limit):
    """List recorded runs, newest first."""
    click.echo(json.dumps({"toolVersion": __version__, "runs": db.list_runs(limit)}, sort_keys=True, indent=2))


def _error(code: str, message: str) -> None:
    click.echo(json.dumps({"error": {"code": code, "message": message}}, sort_keys=True))


def run(argv: Optional[List[str]] = None) -> int:
    """
    Execute one command line and return its exit status.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        0 ok, 2 invalid arguments, 3 budget exceeded, 4 precondition evidence failed, 1 unexpected
    """
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    argv = list(sys.argv[1:] if argv is None else argv)
    state = {"argv": argv, "seed": None, "summary": None, "output": None}
    status = EXIT_OK
    try:
        cli.main(args=argv, prog_name="uncond", standalone_mode=False, obj=state)
    except click.ClickException as e:
        _error("invalid-arguments", e.format_message())
        status = EXIT_INVALID
    except ValidationError as e:
        _error("invalid-arguments", str(e))
        status = EXIT_INVALID
    except BudgetExceededError as e:
        logger.warning(f"Budget exceeded: {e.message}")
        partial = e.partial.summary() if hasattr(e.partial, "summary") else None
        click.echo(json.dumps({"error": e.to_dict(), "partial": partial}, sort_keys=True, default=_jsonable))
        status = EXIT_BUDGET
    except (NotConditionallyConvergentError, NotAFrameError) as e:
        logger.warning(f"Precondition evidence failed: {e.message}")
        _error(e.code, e.message)
        status = EXIT_PRECONDITION
    except ConvergenceError as e:
        _error(e.code, e.message)
        status = EXIT_INVALID
    except click.exceptions.Abort:
        status = EXIT_UNEXPECTED
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        _error("unexpected", str(e))
        status = EXIT_UNEXPECTED
    if "--record" in argv and argv and argv[0] != "history":
        try:
            db.record_run(argv, argv[0], state["seed"], status, state["summary"], state["output"])
        except Exception as e:
            logger.error(f"Could not record run: {e}", exc_info=True)
    return status


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

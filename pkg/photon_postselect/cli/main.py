# photon_postselect/cli/main.py

import logging
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError
from typing_extensions import Annotated

from ..config.models import SweepConfig, parse_detectors, parse_grid, parse_models, parse_state
from ..config.presets import PRESETS, get_preset_config
from ..core.states import DEFAULT_EPSILON, build_distribution
from ..core.sweep_runner import evaluate_record, evaluate_rows, find_crossovers, run_sweep, write_table
from ..core.utils import (
    ConfigError,
    DomainError,
    InsufficientCutoffError,
    NumericRangeError,
    TruncationLeakageError,
    dump_json,
)
from ..core.validation import run_validate

EXIT_CONFIG_ERROR = 1
EXIT_VALIDATION_FAILURE = 2
EXIT_NUMERIC_RANGE = 3

app = typer.Typer(help="photon-postselect - photon subtraction and addition statistics under post-selection.")

logger = logging.getLogger(__name__)


@app.callback()
def main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log at DEBUG level.")] = False,
):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )


def _fail(message: str, code: int):
    typer.echo(f"❌ Error: {message}", err=True)
    raise typer.Exit(code=code)


def _run_guarded(action):
    """Map library errors to the documented exit codes."""
    try:
        return action()
    except ValidationError as exc:
        _fail(f"invalid configuration: {exc.errors()[0].get('msg', exc)}", EXIT_CONFIG_ERROR)
    except (ConfigError, DomainError) as exc:
        _fail(str(exc), EXIT_CONFIG_ERROR)
    except (NumericRangeError, InsufficientCutoffError, TruncationLeakageError) as exc:
        _fail(str(exc), EXIT_NUMERIC_RANGE)


def _emit(text: str, out: Optional[Path]):
    if out is None:
        typer.echo(text, nl=not text.endswith("\n"))
    else:
        out.write_text(text)
        typer.echo(f"✅ Written to {out}", err=True)


@app.command("list-presets")
def list_presets():
    """Lists the sweep presets."""
    typer.echo("📋 Available Presets:")
    for preset in PRESETS:
        typer.echo(f"  - {preset['name']}: {preset['description']}")


@app.command()
def sweep(
    preset: Annotated[Optional[str], typer.Option(help="Preset to start from. Use 'list-presets' to see options.")] = None,
    process: Annotated[Optional[str], typer.Option(help="subtract, add or sequential.")] = None,
    state: Annotated[Optional[str], typer.Option(help="coherent:N0 | thermal:N0 | mixed:NC,NT (only the family is used).")] = None,
    detector: Annotated[Optional[List[str]], typer.Option(help="r:K or n:K; repeat for several detectors.")] = None,
    reflectivity: Annotated[Optional[float], typer.Option(help="Beam-splitter reflectivity R.")] = None,
    gain: Annotated[Optional[float], typer.Option(help="PDC gain lambda.")] = None,
    models: Annotated[Optional[str], typer.Option(help="Comma-separated subset of exact,A,E.")] = None,
    grid: Annotated[Optional[str], typer.Option(help="MIN,MAX,POINTS of the log-spaced n0*R (or n0*r) axis.")] = None,
    sequential_k: Annotated[Optional[int], typer.Option(help="Number of sequential clicks for process=sequential.")] = None,
    output_format: Annotated[Optional[str], typer.Option("--format", help="csv or json.")] = None,
    out: Annotated[Optional[Path], typer.Option(help="Output file; stdout when omitted.")] = None,
    epsilon: Annotated[Optional[float], typer.Option(help="Input truncation tolerance.")] = None,
    workers: Annotated[Optional[int], typer.Option(envvar="PHOTON_POSTSELECT_WORKERS", help="Worker threads.")] = None,
    generic: Annotated[bool, typer.Option("--generic", help="Always use the generic Theta maps.")] = False,
    progress: Annotated[bool, typer.Option(help="Show a progress bar on stderr.")] = False,
):
    """Runs a parameter sweep over n0 and writes a CSV or JSON table."""
    def action():
        config = get_preset_config(preset)
        overrides = {
            "PROCESS": process,
            "STATE": state,
            "DETECTORS": detector or None,
            "REFLECTIVITY": reflectivity,
            "GAIN": gain,
            "MODELS": models,
            "SEQUENTIAL_K": sequential_k,
            "OUTPUT_FORMAT": output_format,
            "EPSILON": epsilon,
            "WORKERS": workers,
            "OUTPUT_PATH": str(out) if out is not None else None,
        }
        config.update({key: value for key, value in overrides.items() if value is not None})
        if grid is not None:
            config["GRID_MIN"], config["GRID_MAX"], config["GRID_POINTS"] = parse_grid(grid)
        if generic:
            config["PREFER_CLOSED_FORM"] = False
        cfg = SweepConfig.from_config(config)
        typer.echo(f"--- Running {cfg.process} sweep ({cfg.preset or 'custom'}): {len(cfg.grid)} grid points ---", err=True)
        table = run_sweep(cfg, progress=progress)
        text = write_table(table, cfg)
        if cfg.output_path:
            typer.echo(f"✅ Written to {cfg.output_path}", err=True)
        else:
            typer.echo(text, nl=not text.endswith("\n"))
        for label, crossing in find_crossovers(table).items():
            axis = "n0*r" if cfg.process == "add" else "n0*R"
            where = f"{axis} ~ {crossing:.3g}" if crossing is not None else "not within the grid"
            typer.echo(f"🔀 A/E crossover for {label}: {where}", err=True)

    _run_guarded(action)


@app.command()
def point(
    state: Annotated[str, typer.Option(help="coherent:N0 | thermal:N0 | mixed:NC,NT | fock:M | custom:PATH")],
    process: Annotated[str, typer.Option(help="subtract, add or sequential.")] = "subtract",
    detector: Annotated[Optional[List[str]], typer.Option(help="r:K or n:K; repeat for several detectors.")] = None,
    reflectivity: Annotated[float, typer.Option(help="Beam-splitter reflectivity R.")] = 1e-2,
    gain: Annotated[float, typer.Option(help="PDC gain lambda.")] = 1e-2,
    models: Annotated[str, typer.Option(help="Comma-separated subset of exact,A,E.")] = "exact,A,E",
    sequential_k: Annotated[Optional[int], typer.Option(help="Number of sequential clicks for process=sequential.")] = None,
    epsilon: Annotated[float, typer.Option(help="Input truncation tolerance.")] = DEFAULT_EPSILON,
    with_posterior: Annotated[bool, typer.Option("--with-posterior", help="Include the post-selected distributions.")] = False,
    generic: Annotated[bool, typer.Option("--generic", help="Always use the generic Theta maps.")] = False,
):
    """Evaluates a single state and prints the outcomes as JSON."""
    def action():
        if process not in ("subtract", "add", "sequential"):
            raise ConfigError(f"unknown process '{process}'")
        spec = parse_state(state)
        detectors = parse_detectors(detector or ["n:1"])
        model_names = parse_models(models)
        strength = gain if process == "add" else reflectivity
        k_seq = (sequential_k or max(d.k for d in detectors)) if process == "sequential" else None
        n0 = spec.mean_photon_number
        results = evaluate_rows(spec, process, strength, detectors, model_names, epsilon, not generic, k_seq)

        p = build_distribution(spec, epsilon) if with_posterior else None
        entries = []
        for model, label, stats in results:
            entry = {"model": model, "detector": label}
            if stats is None:
                entry.update({"P": 0.0, "mean_n": None, "second_factorial": None})
            else:
                entry.update(stats.as_row(n0))
            if with_posterior:
                seq = k_seq if label.startswith("s:") else None
                d = None if seq is not None else next(x for x in detectors if x.label == label)
                record = evaluate_record(p, process, strength, d, model, seq)
                entry["posterior"] = record.posterior.to_dict() if record is not None else None
            entries.append(entry)

        report = {
            "process": process,
            "state": spec.label(),
            "n0": n0,
            "reflectivity" if process != "add" else "gain": strength,
            "epsilon": epsilon,
            "results": entries,
        }
        typer.echo(dump_json(report))

    _run_guarded(action)


@app.command()
def validate(
    profile: Annotated[str, typer.Option(help="default or strict (thresholds 10x tighter).")] = "default",
    only: Annotated[Optional[List[str]], typer.Option(help="Run only the named check; repeatable.")] = None,
    out: Annotated[Optional[Path], typer.Option(help="Report file; stdout when omitted.")] = None,
):
    """Runs the invariant checks and prints a JSON pass/fail report."""
    def action():
        typer.echo(f"--- Running validation ({profile} profile) ---", err=True)
        return run_validate(profile, only)

    report = _run_guarded(action)
    _emit(dump_json(report) + "\n", out)
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    if failed:
        typer.echo(f"❌ {len(failed)} check(s) failed: {', '.join(failed)}", err=True)
        raise typer.Exit(code=EXIT_VALIDATION_FAILURE)
    typer.echo(f"🎉 All {len(report['checks'])} checks passed.", err=True)


if __name__ == "__main__":
    app()

# photon_postselect/core/sweep_runner.py

"""
Parameter sweeps over the mean photon number n0.

Each grid point yields one row per (model, detector); a sequential sweep
puts its S_k row first. Rows are produced in a fixed order whatever the
thread scheduling, so identical configs give byte-identical tables.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import add, subtract
from .detectors import DetectorModel
from .outcome import OutcomeRecord, OutcomeStats
from .states import FieldStateSpec, PhotonNumberDistribution, build_distribution
from .utils import ImpossibleOutcomeError, UnsupportedCombinationError, dump_json

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "n0",
    "n0_times_R_or_r",
    "P",
    "mean_n",
    "mean_n_over_n0",
    "second_factorial",
    "second_factorial_over_n0sq",
    "model",
    "detector",
]


def evaluate_subtraction(
    spec: FieldStateSpec,
    bs: subtract.BeamSplitterParams,
    d: DetectorModel,
    model: str,
    epsilon: float,
    prefer_closed_form: bool = True,
) -> OutcomeStats:
    if model == "A":
        if prefer_closed_form:
            return subtract.model_A_stats(spec, bs.R, d.k)
        return subtract.subtract_model_A(build_distribution(spec, epsilon), bs, d.k).stats()
    if model == "E":
        if prefer_closed_form:
            return subtract.model_E_stats(spec, d.k)
        return subtract.subtract_model_E(build_distribution(spec, epsilon), d.k).stats()
    if prefer_closed_form:
        try:
            return subtract.closed_form_subtraction_stats(spec, bs, d)
        except UnsupportedCombinationError:
            pass
    return subtract.subtract_exact(build_distribution(spec, epsilon), bs, d).stats()


def evaluate_sequential(
    spec: FieldStateSpec,
    bs: subtract.BeamSplitterParams,
    k: int,
    epsilon: float,
    prefer_closed_form: bool = True,
) -> OutcomeStats:
    if prefer_closed_form:
        try:
            return subtract.closed_form_sequential_stats(spec, bs, k)
        except UnsupportedCombinationError:
            pass
    return subtract.subtract_sequential(build_distribution(spec, epsilon), bs, k).stats()


def evaluate_addition(
    spec: FieldStateSpec,
    pdc: add.PdcParams,
    d: DetectorModel,
    model: str,
    epsilon: float,
    prefer_closed_form: bool = True,
) -> OutcomeStats:
    if model == "A":
        if prefer_closed_form:
            return add.model_A_stats(spec, pdc.r, d.k)
        return add.add_model_A(build_distribution(spec, epsilon), pdc, d.k).stats()
    if model == "E":
        if prefer_closed_form:
            return add.model_E_stats(spec, d.k)
        return add.add_model_E(build_distribution(spec, epsilon), d.k).stats()
    if prefer_closed_form:
        try:
            return add.closed_form_addition_stats(spec, pdc, d)
        except UnsupportedCombinationError:
            pass
    return add.add_exact(build_distribution(spec, epsilon), pdc, d).stats()


def _row(n0: float, scale: float, stats: Optional[OutcomeStats], model: str, detector: str) -> dict:
    row = {"n0": n0, "n0_times_R_or_r": n0 * scale}
    if stats is None:
        row.update({
            "P": 0.0,
            "mean_n": math.nan,
            "mean_n_over_n0": math.nan,
            "second_factorial": math.nan,
            "second_factorial_over_n0sq": math.nan,
        })
    else:
        row.update(stats.as_row(n0))
    row.update({"model": model, "detector": detector})
    return row


def _guarded(evaluate, *args, **kwargs) -> Optional[OutcomeStats]:
    try:
        return evaluate(*args, **kwargs)
    except ImpossibleOutcomeError:
        return None


def evaluate_rows(
    spec: FieldStateSpec,
    process: str,
    strength: float,
    detectors: list[DetectorModel],
    models: list[str],
    epsilon: float,
    prefer_closed_form: bool = True,
    sequential_k: Optional[int] = None,
) -> list[tuple[str, str, Optional[OutcomeStats]]]:
    """(model, detector label, stats) for one state; stats is None for an impossible outcome."""
    results = []
    if process == "add":
        pdc = add.PdcParams.from_gain(strength)
        for model in models:
            for d in detectors:
                results.append((model, d.label, _guarded(evaluate_addition, spec, pdc, d, model, epsilon, prefer_closed_form)))
        return results

    bs = subtract.BeamSplitterParams.from_reflectivity(strength)
    if process == "sequential":
        k = sequential_k or max(d.k for d in detectors)
        results.append(("exact", f"s:{k}", _guarded(evaluate_sequential, spec, bs, k, epsilon, prefer_closed_form)))
    for model in models:
        for d in detectors:
            results.append((model, d.label, _guarded(evaluate_subtraction, spec, bs, d, model, epsilon, prefer_closed_form)))
    return results


def evaluate_record(
    p: PhotonNumberDistribution,
    process: str,
    strength: float,
    detector: Optional[DetectorModel],
    model: str,
    sequential_k: Optional[int] = None,
) -> Optional[OutcomeRecord]:
    """Full record (Theta and posterior) from the generic maps; None for an impossible outcome."""
    try:
        if process == "add":
            pdc = add.PdcParams.from_gain(strength)
            if model == "A":
                return add.add_model_A(p, pdc, detector.k)
            if model == "E":
                return add.add_model_E(p, detector.k)
            return add.add_exact(p, pdc, detector)
        bs = subtract.BeamSplitterParams.from_reflectivity(strength)
        if sequential_k is not None:
            return subtract.subtract_sequential(p, bs, sequential_k)
        if model == "A":
            return subtract.subtract_model_A(p, bs, detector.k)
        if model == "E":
            return subtract.subtract_model_E(p, detector.k)
        return subtract.subtract_exact(p, bs, detector)
    except ImpossibleOutcomeError:
        return None


def _process_grid_point(n0: float, cfg) -> list[dict]:
    spec = cfg.state.with_mean(n0)
    results = evaluate_rows(
        spec, cfg.process, cfg.R_or_lambda, cfg.detectors, cfg.models,
        cfg.epsilon, cfg.prefer_closed_form, cfg.sequential_k,
    )
    return [_row(n0, cfg.scale, stats, model, label) for model, label, stats in results]


def run_sweep(cfg, progress: bool = False) -> pd.DataFrame:
    """Evaluate every grid point of a SweepConfig; rows are grid-major, then model, then detector."""
    logger.info(
        "sweep %s on %s: %d grid points, models %s, detectors %s, %d workers",
        cfg.process, cfg.state.label(), len(cfg.grid), ",".join(cfg.models),
        ",".join(d.label for d in cfg.detectors), cfg.workers,
    )
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        per_point = list(tqdm(
            pool.map(lambda n0: _process_grid_point(n0, cfg), cfg.grid),
            total=len(cfg.grid),
            desc=f"{cfg.process} sweep",
            disable=not progress,
        ))
    rows = [row for point_rows in per_point for row in point_rows]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def find_crossovers(table: pd.DataFrame) -> dict[str, Optional[float]]:
    """
    n0*R (n0*r for addition) where the exact mean stops being closer to the
    A-model than to the E-model, per detector.

    The crossing of |<n>_exact - <n>_A| = |<n>_exact - <n>_E| is interpolated
    linearly in log(n0*R) between the bracketing grid points. None when the
    sweep never crosses; empty when the table lacks one of the three models.
    """
    if not {"exact", "A", "E"} <= set(table["model"]):
        return {}
    means = table.pivot_table(
        index=["detector", "n0_times_R_or_r"], columns="model", values="mean_n", aggfunc="first", dropna=False,
    )
    gap = (means["exact"] - means["A"]).abs() - (means["exact"] - means["E"]).abs()
    crossings = {}
    for label, series in gap.groupby(level="detector"):
        series = series.droplevel("detector").dropna().sort_index()
        x = np.log(series.index.to_numpy(dtype=np.float64))
        g = series.to_numpy()
        crossings[label] = None
        for i in range(len(g) - 1):
            if g[i] < 0.0 <= g[i + 1]:
                t = g[i] / (g[i] - g[i + 1])
                crossings[label] = float(np.exp(x[i] + t * (x[i + 1] - x[i])))
                break
    return crossings


def table_to_csv(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, na_rep="", lineterminator="\n")


def table_to_json(table: pd.DataFrame, cfg=None) -> str:
    report = {"rows": table.to_dict("records")}
    if cfg is not None:
        report = {"config": cfg.model_dump(mode="json"), **report}
    return dump_json(report)


def write_table(table: pd.DataFrame, cfg) -> str:
    """Render the table in cfg.output_format; written to cfg.output_path when set."""
    text = table_to_csv(table) if cfg.output_format == "csv" else table_to_json(table, cfg)
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="") as f:
            f.write(text)
        logger.info("sweep table saved to %s", cfg.output_path)
    return text

# photon_postselect/config/models.py

import json
import math
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.detectors import DetectorModel
from ..core.states import DEFAULT_EPSILON, FieldStateSpec, PhotonNumberDistribution
from ..core.utils import ConfigError

Process = Literal["subtract", "add", "sequential"]
ModelName = Literal["exact", "A", "E"]

MODEL_NAMES = ("exact", "A", "E")


# --- CLI spellings ---

def _floats(text: str, count: int, what: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ConfigError(f"{what} needs {count} comma-separated numbers, got '{text}'")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{what} must be numeric, got '{text}'") from None


def parse_state(text: str) -> FieldStateSpec:
    """coherent:N0 | thermal:N0 | mixed:NC,NT | fock:M | custom:PATH"""
    kind, sep, rest = text.strip().partition(":")
    if not sep:
        raise ConfigError(f"state must be spelled KIND:PARAMS, got '{text}'")
    kind = kind.lower()
    if kind in ("coherent", "thermal"):
        (n0,) = _floats(rest, 1, f"{kind} state")
        return FieldStateSpec(kind=kind, n0=n0)
    if kind == "mixed":
        n_c, n_t = _floats(rest, 2, "mixed state")
        return FieldStateSpec.mixed_light(n_c=n_c, n_t=n_t)
    if kind == "fock":
        try:
            return FieldStateSpec.fock(int(rest))
        except ValueError:
            raise ConfigError(f"fock state needs an integer photon number, got '{rest}'") from None
    if kind == "custom":
        return load_custom_state(rest)
    raise ConfigError(f"unknown state kind '{kind}'")


def load_custom_state(path: str) -> FieldStateSpec:
    """Read a distribution JSON ({kind, params, cutoff, probs[]}) as a custom state."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read custom state '{path}': {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"custom state '{path}' is not valid JSON: {exc}") from None
    if isinstance(data, dict) and "posterior" in data and "probs" not in data:
        data = data["posterior"]
    if not isinstance(data, dict) or "probs" not in data:
        raise ConfigError(f"custom state '{path}' has no 'probs' array")
    dist = PhotonNumberDistribution.from_dict(data)
    return FieldStateSpec.custom(dist.probs)


def parse_detectors(texts) -> list[DetectorModel]:
    if isinstance(texts, str):
        texts = [t for t in texts.split(",") if t.strip()]
    detectors = [t if isinstance(t, DetectorModel) else DetectorModel.parse(t) for t in texts]
    if not detectors:
        raise ConfigError("at least one detector is required")
    return detectors


def parse_models(text) -> list[str]:
    names = [t.strip() for t in text.split(",")] if isinstance(text, str) else list(text)
    names = [n for n in names if n]
    for name in names:
        if name not in MODEL_NAMES:
            raise ConfigError(f"unknown model '{name}'; choose from {', '.join(MODEL_NAMES)}")
    if not names:
        raise ConfigError("at least one model is required")
    return names


def parse_grid(text: str) -> tuple[float, float, int]:
    """MIN,MAX,POINTS"""
    lo, hi, points = _floats(text, 3, "grid")
    if points != int(points):
        raise ConfigError(f"grid point count must be an integer, got {points}")
    return lo, hi, int(points)


def make_grid(lo: float, hi: float, points: int, scale: float) -> list[float]:
    """n0 values whose products n0*scale are log-spaced over [lo, hi]."""
    if points < 2:
        raise ConfigError(f"a sweep grid needs at least 2 points, got {points}")
    if not 0 < lo < hi:
        raise ConfigError(f"grid bounds must satisfy 0 < MIN < MAX, got {lo}, {hi}")
    if not scale > 0:
        raise ConfigError(f"grid scale (R or r) must be positive, got {scale}")
    return (np.geomspace(lo, hi, points) / scale).tolist()


def pdc_r(gain: float) -> float:
    return math.sinh(gain) ** 2


# --- Sweep configuration ---

class SweepConfig(BaseModel):
    """Validated sweep definition; n0 is the sweep variable."""
    model_config = ConfigDict(frozen=True)

    process: Process
    state: FieldStateSpec = Field(..., description="State family; its mean is replaced by each grid value.")
    detectors: List[DetectorModel] = Field(..., min_length=1)
    sequential_k: Optional[int] = Field(None, ge=1)
    R_or_lambda: float = Field(..., description="Reflectivity R (subtract, sequential) or PDC gain lambda (add).")
    grid: List[float]
    models: List[ModelName] = Field(default_factory=lambda: list(MODEL_NAMES), min_length=1)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0.0, lt=1.0)
    prefer_closed_form: bool = True
    workers: int = Field(4, ge=1)
    output_format: Literal["csv", "json"] = "csv"
    output_path: Optional[str] = None
    preset: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _default_sequential_k(cls, values):
        if isinstance(values, dict) and values.get("process") == "sequential" and values.get("sequential_k") is None:
            detectors = values.get("detectors") or []
            ks = [d.k if isinstance(d, DetectorModel) else d.get("k", 1) for d in detectors]
            values = {**values, "sequential_k": max(ks, default=1)}
        return values

    @model_validator(mode="after")
    def _check_invariants(self):
        if len(self.grid) < 2:
            raise ConfigError(f"a sweep grid needs at least 2 points, got {len(self.grid)}")
        if any(not b > a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid must be strictly increasing")
        if self.grid[0] <= 0:
            raise ConfigError("grid values must be positive mean photon numbers")
        if self.process == "add":
            if not self.R_or_lambda > 0:
                raise ConfigError(f"PDC gain must be > 0, got {self.R_or_lambda}")
        elif not 0 < self.R_or_lambda < 1:
            raise ConfigError(f"reflectivity must lie in (0, 1), got {self.R_or_lambda}")
        if self.state.kind not in ("coherent", "thermal", "mixed_light"):
            raise ConfigError(f"a {self.state.kind} state has no mean-photon-number axis to sweep")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models must not repeat")
        return self

    @property
    def scale(self) -> float:
        """R, or r = sinh^2(lambda) for addition: the factor in the n0*R axis."""
        return pdc_r(self.R_or_lambda) if self.process == "add" else self.R_or_lambda

    @classmethod
    def from_config(cls, config: dict) -> "SweepConfig":
        """Build from an upper-case preset dictionary (see config/presets.py)."""
        process = config["PROCESS"]
        if process not in ("subtract", "add", "sequential"):
            raise ConfigError(f"unknown process '{process}'")
        strength = config["GAIN"] if process == "add" else config["REFLECTIVITY"]
        scale = pdc_r(strength) if process == "add" else strength
        if "GRID" in config and config["GRID"] is not None:
            grid = [float(x) for x in config["GRID"]]
        else:
            grid = make_grid(config["GRID_MIN"], config["GRID_MAX"], config["GRID_POINTS"], scale)
        state = config["STATE"]
        return cls(
            process=process,
            state=parse_state(state) if isinstance(state, str) else state,
            detectors=parse_detectors(config["DETECTORS"]),
            sequential_k=config.get("SEQUENTIAL_K"),
            R_or_lambda=strength,
            grid=grid,
            models=parse_models(config["MODELS"]),
            epsilon=config["EPSILON"],
            prefer_closed_form=config["PREFER_CLOSED_FORM"],
            workers=config["WORKERS"],
            output_format=config["OUTPUT_FORMAT"],
            output_path=config.get("OUTPUT_PATH"),
            preset=config.get("PRESET_NAME"),
        )

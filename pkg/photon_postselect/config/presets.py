# photon_postselect/config/presets.py

import copy

from ..core.utils import ConfigError

# --- BASE CONFIGURATION ---
BASE_CONFIG = {
    # --- PROCESS ---
    "PROCESS": "subtract",  # 'subtract', 'add' or 'sequential'
    "STATE": "thermal:1",  # only the family (and mixed-light fraction) matters in a sweep
    "DETECTORS": ["n:1", "r:1"],
    "SEQUENTIAL_K": None,  # defaults to the largest detector threshold
    "REFLECTIVITY": 1e-2,
    "GAIN": 1e-2,

    # --- GRID (in units of n0*R, or n0*r for addition) ---
    "GRID_MIN": 1e-3,
    "GRID_MAX": 1e2,
    "GRID_POINTS": 60,

    # --- EVALUATION ---
    "MODELS": ["exact", "A", "E"],
    "EPSILON": 1e-12,
    "PREFER_CLOSED_FORM": True,
    "WORKERS": 4,  # the CLI also reads PHOTON_POSTSELECT_WORKERS

    # --- OUTPUT ---
    "OUTPUT_FORMAT": "csv",
    "OUTPUT_PATH": None,
}

# --- PRESET DEFINITIONS ---
PRESETS = [
    {
        "name": "fig1",
        "description": "Single-photon subtraction from mixed light with n_c = n_t/4, ND1 and RD1 against A and E.",
        "params": {
            "PROCESS": "subtract",
            "STATE": "mixed:0.2,0.8",
            "DETECTORS": ["n:1", "r:1"],
        }
    },
    {
        "name": "fig2",
        "description": "Same as fig1 for coherent-dominated mixed light, n_c = 10 n_t.",
        "params": {
            "PROCESS": "subtract",
            "STATE": "mixed:10,1",
            "DETECTORS": ["n:1", "r:1"],
        }
    },
    {
        "name": "fig3",
        "description": "Two sequential single-photon clicks (S2) against ND2 and RD2 on thermal light.",
        "params": {
            "PROCESS": "sequential",
            "STATE": "thermal:1",
            "DETECTORS": ["n:2", "r:2"],
            "SEQUENTIAL_K": 2,
            "MODELS": ["exact"],
        }
    },
    {
        "name": "fig4",
        "description": "Single-photon addition to thermal light, ND1 and RD1 against A+ and E+.",
        "params": {
            "PROCESS": "add",
            "STATE": "thermal:1",
            "DETECTORS": ["n:1", "r:1"],
        }
    },
]


def get_preset_config(name: str | None = None) -> dict:
    """BASE_CONFIG merged with the named preset (plain BASE_CONFIG for None)."""
    config = copy.deepcopy(BASE_CONFIG)
    if name is None:
        config["PRESET_NAME"] = None
        return config
    preset = next((p for p in PRESETS if p["name"] == name), None)
    if preset is None:
        raise ConfigError(f"unknown preset '{name}'; use 'list-presets' to see options")
    config.update(copy.deepcopy(preset["params"]))
    config["PRESET_NAME"] = preset["name"]
    return config

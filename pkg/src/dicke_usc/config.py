"""YAML run configuration: defaults, schema validation and resolution."""
from __future__ import annotations

import copy
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .algebra import DickeJ, FullProduct
from .emission import EmissionSetup
from .models import ModelParams
from .open_system import BathChannel

MODES = ("energy-sweep", "spectrum-map", "dsc-compare", "validate")

DEFAULTS = {
    "model": {
        "n_emitters": 2,
        "omega_a": [1.0],
        "omega_c": 1.0,
        "include_p2": True,
        "gauge": "dipole",
        "spin_rep": "full",
    },
    "baths": {
        "emitters": "individual",
        "gamma": 1e-3,
        "t_emitters": 0.15,
        "t_cavity": 0.0,
        "halve_mixed": True,
        "cavity_operator": "a",
    },
    "grids": {
        "lambda": {"start": 0.0, "stop": 1.5, "count": 151, "scale": "linear"},
        "omega": {"start": 0.0, "stop": 3.0, "count": 3001},
    },
    "solver": {
        "levels": 12,
        "cutoff_tol": 1e-8,
        "cutoff_ceiling": 4096,
        "window": 6.0,
        "delta_f": None,
        "field": "direct",
        "spectrum_method": "eig",
        "gap_ceiling": 0.15,
    },
    "dsc": {"n_max": 4, "order": 2, "levels": 8},
    "validate": {"criteria": None, "tol_scale": 1.0},
    "output": {"directory": "out", "formats": ["csv", "bin"]},
    "parallelism": {"workers": 0},
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

_CHANNEL = {
    "type": "object",
    "required": ["kind", "gamma"],
    "properties": {
        "kind": {"enum": ["cavity", "collective", "individual"]},
        "gamma": _nonneg,
        "temperature": _nonneg,
        "f": _pos,
        "site": {"type": "integer", "minimum": 0},
        "cavity_operator": {"enum": ["a", "a_D"]},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["mode"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_emitters": {"type": "integer", "minimum": 1},
                "omega_a": {"type": "array", "items": _pos, "minItems": 1},
                "omega_c": _pos,
                "include_p2": {"type": "boolean"},
                "gauge": {"enum": ["dipole", "coulomb"]},
                "spin_rep": {"enum": ["full", "dicke"]},
            },
        },
        "baths": {
            "oneOf": [
                {"type": "array", "items": _CHANNEL, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "emitters": {"enum": ["individual", "collective", "both", "none"]},
                        "gamma": _nonneg,
                        "t_emitters": _nonneg,
                        "t_cavity": _nonneg,
                        "halve_mixed": {"type": "boolean"},
                        "cavity_operator": {"enum": ["a", "a_D"]},
                    },
                },
            ]
        },
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {
                    "oneOf": [
                        {"type": "array", "items": _nonneg, "minItems": 1},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["start", "stop", "count"],
                            "properties": {
                                "start": _nonneg,
                                "stop": _nonneg,
                                "count": {"type": "integer", "minimum": 1},
                                "scale": {"enum": ["linear", "log"]},
                            },
                        },
                    ]
                },
                "omega": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "count"],
                    "properties": {"start": _num, "stop": _num,
                                   "count": {"type": "integer", "minimum": 1}},
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "levels": {"type": "integer", "minimum": 1},
                "cutoff_tol": _pos,
                "cutoff_ceiling": {"type": "integer", "minimum": 2},
                "window": _pos,
                "delta_f": {"oneOf": [_pos, {"type": "null"}]},
                "field": {"enum": ["direct", "trk"]},
                "spectrum_method": {"enum": ["eig", "direct"]},
                "gap_ceiling": _pos,
            },
        },
        "dsc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 0},
                "order": {"enum": [0, 1, 2]},
                "levels": {"type": "integer", "minimum": 1},
            },
        },
        "validate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "criteria": {"oneOf": [{"type": "null"},
                                       {"type": "array", "items": {"type": "integer",
                                                                   "minimum": 1, "maximum": 11}}]},
                "tol_scale": _pos,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "bin"]}},
            },
        },
        "parallelism": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"workers": {"type": "integer", "minimum": 0}},
        },
    },
}


class ConfigError(ValueError):
    """Schema or consistency violation; ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(raw: dict) -> dict:
    """Validate a raw mapping and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, "/".join(str(p) for p in e.absolute_path) or "<root>")
    cfg = _merge({"mode": raw["mode"], **DEFAULTS}, raw)
    model = cfg["model"]
    if len(model["omega_a"]) not in (1, model["n_emitters"]):
        raise ConfigError("needs one frequency or one per emitter", "model/omega_a")
    if model["spin_rep"] == "dicke" and len(set(model["omega_a"])) > 1:
        raise ConfigError("the Dicke basis needs identical emitters", "model/spin_rep")
    grid = cfg["grids"]["lambda"]
    if isinstance(grid, dict):
        if grid["stop"] < grid["start"]:
            raise ConfigError("stop must be >= start", "grids/lambda")
        if grid.get("scale") == "log" and grid["start"] <= 0:
            raise ConfigError("log grids need start > 0", "grids/lambda/start")
    om = cfg["grids"]["omega"]
    if om["stop"] <= om["start"] and om["count"] > 1:
        raise ConfigError("stop must exceed start", "grids/omega")
    if cfg["mode"] != "spectrum-map":
        return cfg
    if isinstance(cfg["baths"], list):
        for i, ch in enumerate(cfg["baths"]):
            if ch["kind"] == "individual" and model["spin_rep"] == "dicke":
                raise ConfigError("individual channels need spin_rep: full", f"baths/{i}")
            if ch.get("site") is not None and ch["site"] >= model["n_emitters"]:
                raise ConfigError("site outside the emitter range", f"baths/{i}/site")
    elif cfg["baths"]["emitters"] in ("individual", "both") and model["spin_rep"] == "dicke":
        raise ConfigError("individual channels need spin_rep: full", "baths/emitters")
    return cfg


def load(path) -> dict:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return resolve(raw)


def lambda_grid(cfg: dict) -> np.ndarray:
    g = cfg["grids"]["lambda"]
    if isinstance(g, list):
        arr = np.asarray(sorted(set(float(x) for x in g)))
    elif g["count"] == 1:
        arr = np.array([float(g["start"])])
    elif g.get("scale", "linear") == "log":
        arr = np.geomspace(g["start"], g["stop"], g["count"])
    else:
        arr = np.linspace(g["start"], g["stop"], g["count"])
    return arr


def omega_grid(cfg: dict) -> np.ndarray:
    g = cfg["grids"]["omega"]
    return np.linspace(g["start"], g["stop"], g["count"])


def model_params(cfg: dict, lam: float = 0.0) -> ModelParams:
    m = cfg["model"]
    n = m["n_emitters"]
    rep = DickeJ(n / 2) if m["spin_rep"] == "dicke" else FullProduct(n)
    return ModelParams(n, tuple(m["omega_a"]), lam, m["omega_c"], m["include_p2"], m["gauge"], rep)


def channels(cfg: dict, params: ModelParams):
    """Explicit channel list; an ``individual`` entry without a site expands to every emitter."""
    baths = cfg["baths"]
    if not isinstance(baths, list):
        return None
    out = []
    for ch in baths:
        ch = dict(ch)
        ch["temperature"] = ch.get("temperature", 0.0)
        if ch["kind"] == "individual" and ch.get("site") is None:
            out.extend(BathChannel(**{**ch, "site": k}) for k in range(params.n_emitters))
        else:
            out.append(BathChannel(**ch))
    return tuple(out)


def emission_setup(cfg: dict, params: ModelParams) -> EmissionSetup:
    s = cfg["solver"]
    common = dict(window=s["window"], delta_f=s["delta_f"], field=s["field"],
                  method=s["spectrum_method"], cutoff_ceiling=s["cutoff_ceiling"])
    explicit = channels(cfg, params)
    if explicit is not None:
        return EmissionSetup(explicit=explicit, **common)
    b = cfg["baths"]
    return EmissionSetup(emitters=b["emitters"], gamma=b["gamma"], t_emitters=b["t_emitters"],
                         t_cavity=b["t_cavity"], halve_mixed=b["halve_mixed"],
                         cavity_operator=b["cavity_operator"], **common)

"""Pipeline configuration: YAML loading, validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from railgnss.classify.mlr import DEFAULT_LAMBDA_GRID
from railgnss.constants import CARRIER_FREQUENCY, SUPPORTED_CONSTELLATIONS
from railgnss.errors import ConfigError
from railgnss.taxonomy import EnvironmentClass

PATH_KEYS = ("obs", "nav", "truth", "labels", "residuals", "features", "models",
             "error_models", "schedule")

DEFAULTS = {
    "seed": 0,
    "signals": {"G": ["C1C", "C5Q"], "E": ["C1C", "C5Q"]},
    "residuals": {
        "elevation_cutoff_deg": 5.0,
        "tropo": True,
        "iono_policy": "require",
        "clock_grouping": "constellation_band",
        "relative_humidity": 0.5,
    },
    "features": {"window": 1, "elevation_cutoff_deg": 5.0, "policy": "clear-only"},
    "train": {
        "train_size": 2000,
        "primary_model": "gbt",
        "importance_repeats": 10,
        "mlr": {"lambda_grid": list(DEFAULT_LAMBDA_GRID), "n_folds": 5, "max_iter": 1000},
        "gbt": {"n_rounds": 200, "max_depth": 4, "learning_rate": 0.1, "min_leaf": 5,
                "reg_lambda": 1.0, "base_score": "prior"},
    },
    "error_models": {"grouping": "class", "h_fraction": 0.75, "min_samples": 50,
                     "reweight": True, "histogram_bins": 60},
    "simulate": {"no_signal_classes": ["Tunnel"], "no_signal_marker": "NOSIGNAL"},
    "synth": {"epochs": 7200, "zero_error": False},
    "paths": {k: None for k in PATH_KEYS},
}


def _merge(base, override, where="config"):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown key {where}.{key}")
        if isinstance(base[key], dict) and key != "signals":
            if not isinstance(value, dict):
                raise ConfigError(f"{where}.{key} must be a mapping")
            out[key] = _merge(base[key], value, f"{where}.{key}")
        else:
            out[key] = value
    return out


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


class PipelineConfig:
    """Validated configuration tree with attribute-free dict access.

    ``base_dir`` anchors relative input paths (the config file's directory).
    """

    def __init__(self, data=None, base_dir="."):
        self.data = _merge(DEFAULTS, data or {})
        self.base_dir = Path(base_dir)
        self.validate()

    @classmethod
    def load(cls, path=None, seed=None):
        data = {}
        base = Path(".")
        if path is not None:
            path = Path(path)
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
            try:
                data = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError("config document must be a mapping")
            base = path.parent
        if seed is not None:
            data["seed"] = seed
        return cls(data, base)

    def __getitem__(self, key):
        return self.data[key]

    def validate(self):
        d = self.data
        _require(isinstance(d["seed"], int) and 0 <= d["seed"] < 2 ** 64,
                 "seed must be an unsigned 64-bit integer")
        sig = d["signals"]
        _require(isinstance(sig, dict) and sig, "signals must map constellations to band codes")
        for sys, codes in sig.items():
            _require(sys in SUPPORTED_CONSTELLATIONS, f"unsupported constellation {sys!r}")
            _require(isinstance(codes, list) and codes, f"signals.{sys} must be a non-empty list")
            for code in codes:
                _require(isinstance(code, str) and len(code) == 3 and code[0] == "C"
                         and (sys, code[1]) in CARRIER_FREQUENCY,
                         f"unsupported signal {sys}:{code}")
        r = d["residuals"]
        _require(0.0 <= r["elevation_cutoff_deg"] < 90.0, "elevation cutoff must be in [0, 90)")
        _require(r["iono_policy"] in ("require", "zero-if-absent"),
                 "iono_policy must be 'require' or 'zero-if-absent'")
        _require(r["clock_grouping"] in ("constellation_band", "band"),
                 "clock_grouping must be 'constellation_band' or 'band'")
        _require(0.0 <= r["relative_humidity"] <= 1.0, "relative_humidity must be in [0, 1]")
        f = d["features"]
        _require(isinstance(f["window"], int) and f["window"] >= 1 and f["window"] % 2 == 1,
                 "features.window must be a positive odd integer")
        _require(f["policy"] in ("clear-only", "all-classes"),
                 "features.policy must be 'clear-only' or 'all-classes'")
        t = d["train"]
        ts = t["train_size"]
        _require((isinstance(ts, int) and ts > 0) or (isinstance(ts, float) and 0 < ts < 1),
                 "train.train_size must be a positive count or a fraction in (0, 1)")
        _require(t["primary_model"] in ("gbt", "mlr"), "train.primary_model must be gbt or mlr")
        _require(len(t["mlr"]["lambda_grid"]) > 0 and all(v > 0 for v in t["mlr"]["lambda_grid"]),
                 "train.mlr.lambda_grid must hold positive values")
        _require(t["mlr"]["n_folds"] >= 2, "train.mlr.n_folds must be at least 2")
        g = t["gbt"]
        _require(g["n_rounds"] >= 0 and g["max_depth"] >= 0, "gbt rounds/depth must be >= 0")
        _require(not (g["n_rounds"] == 0 and g["max_depth"] == 0),
                 "degenerate gbt parameters: no rounds and no depth")
        _require(g["learning_rate"] > 0 and g["min_leaf"] >= 1, "invalid gbt learning rate/leaf")
        e = d["error_models"]
        _require(0.5 <= e["h_fraction"] <= 1.0, "error_models.h_fraction must be in [0.5, 1]")
        _require(e["grouping"] in ("class", "constellation_band"),
                 "error_models.grouping must be 'class' or 'constellation_band'")
        _require(e["min_samples"] >= 2, "error_models.min_samples must be >= 2")
        for name in d["simulate"]["no_signal_classes"]:
            try:
                EnvironmentClass.parse(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        _require(d["synth"]["epochs"] >= 2, "synth.epochs must be at least 2")
        for key, value in d["paths"].items():
            _require(value is None or isinstance(value, str), f"paths.{key} must be a string")

    @property
    def signals(self):
        return {sys: tuple(codes) for sys, codes in self.data["signals"].items()}

    def to_dict(self):
        return copy.deepcopy(self.data)

    @property
    def hash(self):
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def input_path(self, key, out_dir, default_name):
        """Configured path (relative to the config file) or ``out_dir/default_name``."""
        value = self.data["paths"].get(key)
        if value is None:
            return Path(out_dir) / default_name
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

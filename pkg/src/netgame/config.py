"""JSON run configuration, validated against a closed schema.

Every command reads one optional JSON file (``--config`` or the
``NETGAME_CONFIG`` environment variable) and merges it over the defaults
below.  Unknown keys anywhere are rejected before anything runs.
"""
from __future__ import annotations

import copy
import json
import os
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .errors import ConfigError
from .model import COEF_NAMES, ModelParameters, Specification

ENV_VAR = "NETGAME_CONFIG"

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_k_process = {"oneOf": [
    {"type": "integer", "minimum": 2},
    {"const": "mixture"},
    {"type": "object", "patternProperties": {"^[0-9]+$": _prob},
     "additionalProperties": False, "minProperties": 1},
]}
_theta = {"type": "object", "properties": {c: _num for c in COEF_NAMES + ("beta",)},
          "additionalProperties": False}
_coef_list = {"type": "array", "items": {"enum": list(COEF_NAMES)}, "uniqueItems": True}
_fractions = {"type": "array", "items": _prob, "minItems": 1}


def _obj(props: dict, **kw) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, **kw}


SCHEMA = _obj({
    "seed": _nonneg_int,
    "threads": _pos_int,
    "model": _obj({
        "covariate_spec": {"enum": ["price", "log_income"]},
        "q_grade_min": {"type": "integer", "minimum": 7, "maximum": 13},
        "grade9p_min": {"type": "integer", "minimum": 7, "maximum": 13},
    }),
    "theta": _theta,
    "data": _obj({
        "n_schools": _pos_int,
        "sizes": {"oneOf": [{"type": "integer", "minimum": 2},
                            {"type": "array", "items": {"type": "integer", "minimum": 2},
                             "minItems": 1}]},
        "burn_in_sweeps": _nonneg_int,
        "k_process": _k_process,
        "profile": _obj({
            "male": _prob, "race_shares": {"type": "array", "items": _num,
                                           "minItems": 3, "maxItems": 3},
            "grade_min": {"type": "integer"}, "grade_max": {"type": "integer"},
            "price_mean": _num, "price_min": _num, "price_max": _num,
            "price_within_sd": {"type": "number", "minimum": 0},
            "hh_smokes": _prob, "mom_edu": _prob, "income_mean": _num,
            "income_sigma": {"type": "number", "minimum": 0},
            "income_min": _num, "income_max": _num,
        }),
        "directed": {"type": "boolean"},
        "split_by_grade": {"oneOf": [{"type": "boolean"},
                                     {"type": "array", "items": {"type": "string"}}]},
    }),
    "simulate": _obj({
        "steps": _nonneg_int,
        "k_process": _k_process,
        "thin": _pos_int,
        "mode": {"enum": ["perturbed", "deterministic"]},
        "exact_max_bits": {"type": "integer", "minimum": 1, "maximum": 24},
        "start": {"enum": ["empty", "observed", "random"]},
        "school": {"type": "string"},
    }),
    "enumerate": _obj({
        "k": {"type": "integer", "minimum": 2},
        "n": {"type": "integer", "minimum": 2, "maximum": 5},
    }),
    "spectrum": _obj({
        "n": {"type": "integer", "minimum": 2, "maximum": 5},
        "k": {"type": "integer", "minimum": 2},
    }),
    "estimate": _obj({
        "T": _pos_int, "R": _pos_int,
        "k_process": _k_process,
        "large_step_prob": _prob,
        "proposal_scale": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                                     {"type": "array", "items": {"type": "number",
                                                                 "exclusiveMinimum": 0},
                                      "minItems": 13, "maxItems": 13}]},
        "adapt": {"type": "boolean"},
        "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "burn_in_frac": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "scenario": {"enum": ["full", "no-net", "fixed-net", "no-pe", "no-tri"]},
        "init": {"oneOf": [{"enum": ["mple", "prior"]}, _theta]},
        "likelihood": {"enum": ["double_mh", "exact", "none"]},
        "free": _coef_list,
        "clamp": {"type": "object", "properties": {c: _num for c in COEF_NAMES},
                  "additionalProperties": False},
        "prior": _obj({
            "default_sd": {"type": "number", "exclusiveMinimum": 0},
            "center_intercepts": {"type": "boolean"},
            "coefficients": {"type": "object", "additionalProperties": False,
                             "properties": {c: _obj({"mean": _num,
                                                     "sd": {"type": "number",
                                                            "exclusiveMinimum": 0}})
                                            for c in COEF_NAMES}},
        }),
        "levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                              "exclusiveMaximum": 1}, "minItems": 1},
    }),
    "fit": _obj({
        "steps": _pos_int,
        "thin": _pos_int,
        "burn_in": _nonneg_int,
        "k_process": _k_process,
    }),
    "counterfact": _obj({
        "replications": _pos_int,
        "steps": _pos_int,
        "burn_in": _nonneg_int,
        "thin": _pos_int,
        "k_process": _k_process,
        "increases": {"type": "array", "items": {"type": "number", "minimum": 0},
                      "minItems": 1},
        "modes": {"type": "array", "items": {"enum": ["endogenous", "fixed_network",
                                                      "pe_off"]},
                  "minItems": 1, "uniqueItems": True},
        "pe_off": {"enum": ["frozen", "zeroed"]},
        "theta_no_pe": _theta,
        "fractions": _fractions,
        "targeted": {"type": "boolean"},
        "swap_fractions": _fractions,
        "schools": {"type": "array", "items": {"type": "string"}, "minItems": 2,
                    "maxItems": 2},
    }),
})

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "threads": 1,
    "model": {"covariate_spec": "price", "q_grade_min": 9, "grade9p_min": 9},
    "theta": {},
    "data": {"n_schools": 16, "sizes": 30, "burn_in_sweeps": 100_000, "k_process": 2,
             "profile": {}, "directed": False, "split_by_grade": False},
    "simulate": {"steps": 10_000, "k_process": 2, "thin": 1, "mode": "perturbed",
                 "exact_max_bits": 12, "start": "observed"},
    "enumerate": {"k": 2},
    "spectrum": {"n": 3},
    "estimate": {"T": 20_000, "R": 500, "k_process": "mixture", "large_step_prob": 0.02,
                 "proposal_scale": 0.05, "adapt": True, "target_accept": 0.234,
                 "burn_in_frac": 0.2, "scenario": "full", "init": "mple",
                 "likelihood": "double_mh",
                 "prior": {"default_sd": 10.0, "center_intercepts": False,
                           "coefficients": {}},
                 "levels": [0.9, 0.95, 0.99]},
    "fit": {"steps": 100_000, "thin": 1_000, "burn_in": 30_000, "k_process": 2},
    "counterfact": {"replications": 20, "steps": 30_000, "burn_in": 30_000, "thin": 30,
                    "k_process": 2, "increases": [20, 60, 100, 140, 180, 220],
                    "modes": ["endogenous", "fixed_network", "pe_off"], "pe_off": "frozen",
                    "fractions": [0.01, 0.05, 0.1, 0.2, 0.5], "targeted": False,
                    "swap_fractions": [0.0, 0.1, 0.25, 0.5]},
}


def _merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), dict) and key not in (
                "theta", "theta_no_pe", "k_process", "clamp", "coefficients", "init"):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate(raw: Mapping) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {exc.message}") from None


class RunConfig:
    """Validated configuration with defaults filled in.

    ``raw`` is what the user supplied; ``data`` is the merged view used by
    the commands and recorded in output metadata.
    """

    def __init__(self, raw: Mapping | None = None, source: str | None = None):
        raw = dict(raw or {})
        validate(raw)
        self.raw = raw
        self.source = source
        self.data = _merge(DEFAULTS, raw)
        validate(self.data)
        try:
            self.spec = Specification(**self.data["model"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        """Read ``path``, else the file named by ``NETGAME_CONFIG``, else defaults."""
        path = path or os.environ.get(ENV_VAR) or None
        if path is None:
            return cls({})
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls(raw, str(path))

    def override(self, section: str | None, **values) -> "RunConfig":
        """New config with command-line values (``None`` means not given) applied."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        patch = values if section is None else {section: values}
        return RunConfig(_merge(self.raw, patch), self.source)

    def __getitem__(self, key: str):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def theta(self, key: str = "theta", fallback: Mapping | None = None) -> ModelParameters:
        mapping = self.data.get(key)
        if mapping is None:
            mapping = self.data["counterfact"].get(key)
        if not mapping:
            mapping = fallback or {}
        try:
            return ModelParameters.from_mapping(dict(mapping))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {key}: {exc}") from None


def parse_k_process(value):
    """JSON form of a meeting-dimension process to the form dynamics accepts."""
    if isinstance(value, Mapping):
        return {int(k): float(p) for k, p in value.items()}
    return value

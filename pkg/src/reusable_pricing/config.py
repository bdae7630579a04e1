"""Instance configuration files: JSON, validated against the shipped schema."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .demand import KINDS, DemandDomainError, curve_from_dict
from .dynamic_solver import CustomerClass, Instance

log = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {"dynamic": 1e-9, "static": 1e-10}
LAMBDA_RTOL = 1e-9

_PARAM_NAMES = {"linear": ("a", "b"), "exponential": ("a", "b"), "reciprocal_tight": ("a", "b", "Lambda"), "uniform": ("lo", "hi", "Lambda")}


class ConfigError(ValueError):
    pass


class UnknownFieldWarning(UserWarning):
    pass


@dataclass
class LoadedInstance:
    instance: Instance
    seed: int | None = None
    tolerances: dict = field(default_factory=dict)
    source: str | None = None


def load_schema() -> dict:
    return json.loads(resources.files("reusable_pricing").joinpath("schemas/instance.schema.json").read_text())


def example_path(name: str = "example1.json"):
    return resources.files("reusable_pricing").joinpath("data", name)


def _path_str(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _unknown_fields(doc, schema, path=()):
    """Paths of keys the schema does not describe (warned, not rejected)."""
    found = []
    if isinstance(doc, dict) and "properties" in schema:  # free-form objects are not checked
        props = schema.get("properties", {})
        for k, v in doc.items():
            if k not in props:
                found.append(_path_str(path + (k,)))
            else:
                found += _unknown_fields(v, props[k], path + (k,))
    elif isinstance(doc, list) and "items" in schema:
        for i, v in enumerate(doc):
            found += _unknown_fields(v, schema["items"], path + (i,))
    return found


def validate_document(doc: dict) -> list:
    """Raise ConfigError naming the first offending field; return unknown-field paths."""
    schema = load_schema()
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = list(e.path)
        if e.validator == "required":
            missing = e.message.split("'")[1]
            where.append(missing)
            raise ConfigError(f"missing required field {_path_str(where)}")
        raise ConfigError(f"invalid value at {_path_str(where) or '<root>'}: {e.message}")
    return _unknown_fields(doc, schema)


def instance_from_dict(doc: dict) -> LoadedInstance:
    unknown = validate_document(doc)
    for u in unknown:
        warnings.warn(f"unknown config field {u} ignored", UnknownFieldWarning, stacklevel=3)
    classes = []
    for i, c in enumerate(doc["classes"]):
        d = dict(c["demand"])
        kind = d.pop("kind")
        params = dict(d.pop("params", {}) or {})
        params.update({k: v for k, v in d.items() if k in _PARAM_NAMES[kind]})
        if "Lambda" in _PARAM_NAMES[kind] and "Lambda" not in params:
            if "Lambda" not in c:
                raise ConfigError(f"missing required field classes[{i}].Lambda")
            params["Lambda"] = c["Lambda"]
        for name in _PARAM_NAMES[kind]:
            if name not in params:
                raise ConfigError(f"missing required field classes[{i}].demand.{name}")
        try:
            curve = curve_from_dict({"kind": kind, **{k: params[k] for k in _PARAM_NAMES[kind]}})
        except (DemandDomainError, TypeError) as err:
            raise ConfigError(f"classes[{i}].demand: {err}") from err
        if "Lambda" in c:
            lam = float(c["Lambda"])
            if abs(lam - curve.max_rate) > LAMBDA_RTOL * curve.max_rate:
                raise ConfigError(
                    f"classes[{i}].Lambda = {lam} disagrees with the demand curve's market size {curve.max_rate}"
                )
        classes.append(CustomerClass(curve, float(c["mu"])))
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(doc.get("tolerances", {}))
    return LoadedInstance(Instance(int(doc["C"]), tuple(classes)), doc.get("seed"), tol)


def load_instance(path) -> LoadedInstance:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {p}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{p} is not valid JSON: {err}") from err
    out = instance_from_dict(doc)
    out.source = str(p)
    log.info("loaded %s (C=%d, M=%d), tolerances %s", p, out.instance.C, out.instance.M, out.tolerances)
    return out


def instance_to_dict(loaded: LoadedInstance | Instance) -> dict:
    inst = loaded.instance if isinstance(loaded, LoadedInstance) else loaded
    doc = inst.to_dict()
    if isinstance(loaded, LoadedInstance):
        if loaded.seed is not None:
            doc["seed"] = loaded.seed
        doc["tolerances"] = loaded.tolerances
    return doc


assert set(_PARAM_NAMES) == set(KINDS)

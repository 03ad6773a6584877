"""Run configuration: one JSON document per experiment, validated against a
per-experiment schema.

A document looks like::

    {"experiment": "jtheta",
     "id": "optional-name",
     "seed": 0, "threads": 1, "tol": 1e-10,
     "params": {"theta": [0.0], "t": [0.001, 0.01]}}

Only ``experiment`` is required.  Unknown keys at any level raise
``SchemaError`` whose ``path`` names the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import SchemaError

__all__ = ["Field", "SCHEMAS", "TOP_LEVEL", "RunConfig", "load_config", "parse_config", "schema_document"]

U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class Field:
    """One schema entry.

    ``kind`` is one of ``float``, ``int``, ``bool``, ``str``, ``floats`` or
    ``ints`` (nonempty lists).  ``nullable`` admits ``null``.
    """

    kind: str
    default: Any = None
    choices: tuple | None = None
    low: float | None = None
    high: float | None = None
    nullable: bool = False
    doc: str = ""


def _f(default, low=None, high=None, doc="", nullable=False):
    return Field("float", default, low=low, high=high, doc=doc, nullable=nullable)


def _i(default, low=None, high=None, doc="", nullable=False):
    return Field("int", default, low=low, high=high, doc=doc, nullable=nullable)


SCHEMAS: dict[str, dict[str, Field]] = {
    "jtheta": {
        "theta": Field("floats", [0.0], doc="coupling values"),
        "t": Field("floats", [1e-12, 1e-8, 1e-4, 1e-2, 1.0], low=0.0, high=1.0, doc="times in (0, 1]"),
    },
    "moment2": {
        "quantity": Field("str", "w_block", choices=("w_block", "z_block"), doc="block second moment"),
        "theta": _f(0.0),
        "tau": Field("floats", [1e-3], low=0.0, doc="incoming heat variance"),
        "T": _f(1e-3, low=0.0, doc="block length"),
        "r": Field("floats", [1.0], low=0.0, doc="smoothing scales (z_block only)"),
    },
    "diagrams": {
        "n": _i(2, 2, 4, doc="number of particles"),
        "theta": _f(0.0),
        "t": _f(1.0, low=0.0, high=1.0),
        "variance": _f(0.1, low=0.0, doc="variance of the isotropic test"),
        "max_len": _i(2, 1, 6),
        "centered": Field("bool", True),
        "samples": _i(20_000, 100),
    },
    "errterms": {
        "epsilon": _f(1e-8, 0.0, 1.0),
        "b": _f(0.1, 0.0, 1.0),
        "ell": _i(1, 1),
        "m": _i(5, 1),
        "n": _i(7, 2),
        "r": _f(1.0, 0.0, doc="terminal smoothing; use a large value for the limit"),
        "theta": _f(0.0),
        "K_u": _i(12, 2),
        "h": _f(0.25, 0.0),
        "direct": Field("bool", False, doc="also evaluate the direct network sum"),
    },
    "decouple": {
        "chains": _i(200, 1),
        "S": _i(4, 1, 16),
        "M": _i(7, 2, 16),
        "ell": _i(1, 0),
    },
    "polymer": {
        "horizon": _i(512, 4),
        "theta_lattice": _f(0.0),
        "b": _f(0.5, 0.0, 1.0),
        "ell": _i(1, 1),
        "replicas": _i(200, 2),
        "averaging_scale": _f(None, 0.0, nullable=True),
        "markov_r": Field("floats", [0.0, 1.0, 2.0, 3.0], low=0.0),
    },
    "gmc": {
        "points": _i(8, 2, 512),
        "a": _f(1.0, 0.0),
        "rank": _i(None, 1, nullable=True),
        "samples": _i(200_000, 100),
        "r": Field("floats", [float(k) for k in range(1, 21)], low=0.0),
    },
    "clt": {
        "N": _i(200, 3),
        "replicas": _i(10_000, 100),
        "ell": _i(1, 1),
        "family": Field("str", "lognormal", choices=("lognormal", "gamma")),
    },
    "bands": {
        "epsilon": Field("floats", [1e-2, 1e-4, 1e-8, 1e-16], low=0.0, high=math.exp(-1)),
        "alpha_eps": _f(0.0),
    },
}

TOP_LEVEL: dict[str, Field] = {
    "experiment": Field("str", None, choices=tuple(SCHEMAS)),
    "id": Field("str", None, nullable=True),
    "seed": _i(0, 0, U64_MAX),
    "threads": _i(1, 1, 256),
    "tol": _f(1e-10, 0.0, 1.0),
    "params": Field("object", {}),
}


@dataclass(frozen=True)
class RunConfig:
    """A validated document with every default filled in."""

    experiment: str
    seed: int
    threads: int
    tol: float
    params: dict
    id: str | None = None

    def snapshot(self) -> dict:
        """Canonical content: everything that determines the outputs."""
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "tol": self.tol,
            "params": dict(sorted(self.params.items())),
        }


def _number(value, path: str, integer: bool):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected {'an integer' if integer else 'a number'}, got {type(value).__name__}", path)
    if integer:
        if isinstance(value, float):
            if not value.is_integer():
                raise SchemaError("expected an integer", path)
            value = int(value)
        return value
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError("expected a finite number", path)
    return value


def _bounds(value, f: Field, path: str):
    if f.low is not None and value < f.low:
        raise SchemaError(f"must be >= {f.low}", path)
    if f.high is not None and value > f.high:
        raise SchemaError(f"must be <= {f.high}", path)
    return value


def _coerce(value, f: Field, path: str):
    if value is None:
        if f.nullable:
            return None
        raise SchemaError("must not be null", path)
    if f.kind in ("float", "int"):
        return _bounds(_number(value, path, f.kind == "int"), f, path)
    if f.kind in ("floats", "ints"):
        if not isinstance(value, list) or not value:
            raise SchemaError("expected a nonempty list", path)
        integer = f.kind == "ints"
        return [_bounds(_number(v, f"{path}[{k}]", integer), f, f"{path}[{k}]") for k, v in enumerate(value)]
    if f.kind == "bool":
        if not isinstance(value, bool):
            raise SchemaError("expected true or false", path)
        return value
    if f.kind == "str":
        if not isinstance(value, str):
            raise SchemaError("expected a string", path)
        if f.choices is not None and value not in f.choices:
            raise SchemaError(f"unknown value {value!r}; expected one of {', '.join(f.choices)}", path)
        return value
    if f.kind == "object":
        if not isinstance(value, dict):
            raise SchemaError("expected an object", path)
        return value
    raise AssertionError(f.kind)


def _validate(doc: dict, schema: dict[str, Field], prefix: str) -> dict:
    for key in doc:
        if key not in schema:
            raise SchemaError("unknown key", f"{prefix}{key}")
    return {key: _coerce(doc[key], f, f"{prefix}{key}") if key in doc else f.default for key, f in schema.items()}


def parse_config(doc: Any, overrides: dict | None = None) -> RunConfig:
    """Validate a decoded document.

    Parameters
    ----------
    doc : dict
        Decoded JSON.
    overrides : dict, optional
        Top-level values (``seed``, ``threads``, ``tol``) that replace the
        document's; ``None`` entries are ignored.

    Raises
    ------
    SchemaError
        With ``path`` set to the offending field, e.g. ``params.theta[1]``.
    """
    if not isinstance(doc, dict):
        raise SchemaError("the configuration must be a JSON object")
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    if "experiment" not in doc:
        raise SchemaError("missing required key", "experiment")
    exp = doc["experiment"]
    if not isinstance(exp, str) or exp not in SCHEMAS:
        raise SchemaError(f"unknown experiment {exp!r}; expected one of {', '.join(SCHEMAS)}", "experiment")
    top = _validate(doc, TOP_LEVEL, "")
    params = _validate(top["params"], SCHEMAS[exp], "params.")
    return RunConfig(exp, top["seed"], top["threads"], top["tol"], params, top["id"])


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc, overrides)


def schema_document() -> dict:
    """The published schema as plain data (used by ``shflab schema``)."""

    def entry(f: Field):
        out = {"type": f.kind, "default": f.default}
        for name in ("choices", "low", "high", "doc"):
            v = getattr(f, name)
            if v not in (None, ""):
                out[name] = list(v) if name == "choices" else v
        if f.nullable:
            out["nullable"] = True
        return out

    return {
        "top_level": {k: entry(f) for k, f in TOP_LEVEL.items()},
        "experiments": {name: {k: entry(f) for k, f in s.items()} for name, s in SCHEMAS.items()},
    }

"""Loading function and polynomial specs from JSON."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import boolean_fourier as bf
from . import sphere_harmonics as sh


class SpecError(ValueError):
    """A malformed spec file, reported with its path and the reason."""


def _sets_to_mask(s, d, where):
    if not isinstance(s, (list, tuple)):
        raise SpecError(f"{where}: set must be a list of 1-indexed coordinates")
    m = 0
    for i in s:
        if not isinstance(i, int) or not 1 <= i <= d:
            raise SpecError(f"{where}: coordinate {i!r} not in 1..{d}")
        m |= 1 << (i - 1)
    return m


def function_from_obj(obj: dict, where: str = "<spec>") -> bf.HypercubeFunction:
    if not isinstance(obj, dict) or "type" not in obj:
        raise SpecError(f"{where}: expected an object with a 'type' field")
    kind = obj["type"]
    try:
        d = int(obj["d"])
    except (KeyError, TypeError, ValueError):
        raise SpecError(f"{where}: missing or invalid 'd'") from None
    try:
        bf.check_dim(d)
    except bf.DimensionError as e:
        raise SpecError(f"{where}: {e}") from None
    if kind == "spectrum":
        if not isinstance(obj.get("coeffs"), list):
            raise SpecError(f"{where}: spectrum needs a 'coeffs' list of {{set, value}} terms")
        c = np.zeros(1 << d)
        for j, term in enumerate(obj["coeffs"]):
            m = _sets_to_mask(term.get("set"), d, f"{where}: coeffs[{j}]")
            c[m] += float(term["value"])
        return bf.wht_inverse(bf.FourierSpectrum(d, c))
    if kind == "builtin":
        name = obj.get("name")
        params = {}
        if "set" in obj:
            params["subset"] = _sets_to_mask(obj["set"], d, f"{where}: set")
        try:
            return bf.builtin(name, d, **params)
        except (ValueError, KeyError) as e:
            raise SpecError(f"{where}: {e}") from None
    if kind == "table":
        vals = obj.get("values")
        if not isinstance(vals, list) or len(vals) != 1 << d:
            raise SpecError(f"{where}: 'values' must list exactly {1 << d} reals")
        return bf.HypercubeFunction(d, np.asarray(vals, dtype=float))
    raise SpecError(f"{where}: unknown type {kind!r} (spectrum, builtin or table)")


def load_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise SpecError(f"{path}: file not found") from None
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}: invalid JSON ({e})") from None


def load_function(path) -> bf.HypercubeFunction:
    return function_from_obj(load_json(path), str(path))


def load_polynomial(path) -> sh.SpherePolynomial:
    obj = load_json(path)
    try:
        return sh.from_json(obj)
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"{path}: {e}") from None

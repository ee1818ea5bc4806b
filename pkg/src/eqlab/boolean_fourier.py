"""Fourier analysis of real functions on the hypercube {+1,-1}^d.

Conventions used throughout the package:

* A point is stored by its integer code. Bit ``i`` of the code is 0 when
  ``x_i = +1`` and 1 when ``x_i = -1``, so code 0 is the all-ones point.
* A subset ``S`` of ``[d]`` is a bitmask, bit ``i`` set iff ``i`` is in ``S``.
  Subsets are 0-indexed in code and 1-indexed in JSON files.
* The forward transform carries the ``2^-d`` factor, so ``coeffs[S]`` is
  ``E_x[f(x) chi_S(x)]`` and Parseval reads ``sum coeffs**2 == E_x f(x)**2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_DIM = 20


class DimensionError(ValueError):
    """Raised when a dense table would exceed the supported size."""


def check_dim(d: int, cap: int = MAX_DIM) -> None:
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise DimensionError(f"dimension must be a positive integer, got {d!r}")
    if d > cap:
        raise DimensionError(f"d={d} exceeds the dense cap of {cap} (2^{d} entries)")


@dataclass(frozen=True)
class HypercubeFunction:
    d: int
    values: np.ndarray

    def __post_init__(self):
        check_dim(self.d)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (1 << self.d,):
            raise ValueError(f"expected {1 << self.d} values for d={self.d}, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, x) -> float:
        return float(self.values[point_code(x)])

    def __add__(self, other: HypercubeFunction) -> HypercubeFunction:
        _same_dim(self, other)
        return HypercubeFunction(self.d, self.values + other.values)

    def __sub__(self, other: HypercubeFunction) -> HypercubeFunction:
        _same_dim(self, other)
        return HypercubeFunction(self.d, self.values - other.values)

    def scale(self, c: float) -> HypercubeFunction:
        return HypercubeFunction(self.d, c * self.values)


@dataclass(frozen=True)
class FourierSpectrum:
    d: int
    coeffs: np.ndarray

    def __post_init__(self):
        check_dim(self.d)
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (1 << self.d,):
            raise ValueError(f"expected {1 << self.d} coefficients for d={self.d}, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, subset) -> float:
        return float(self.coeffs[as_mask(subset)])

    def support(self, tol: float = 0.0) -> list[int]:
        return [int(s) for s in np.flatnonzero(np.abs(self.coeffs) > tol)]


def _same_dim(f, g):
    if f.d != g.d:
        raise ValueError(f"dimension mismatch: {f.d} vs {g.d}")


def as_mask(subset) -> int:
    """Accept an int mask or an iterable of 0-indexed coordinates."""
    if isinstance(subset, (int, np.integer)):
        return int(subset)
    m = 0
    for i in subset:
        m |= 1 << int(i)
    return m


def mask_to_set(mask: int) -> list[int]:
    return [i for i in range(int(mask).bit_length()) if (mask >> i) & 1]


def popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint64)
    return np.bitwise_count(a).astype(np.int64)


@lru_cache(maxsize=32)
def _points(d: int) -> np.ndarray:
    codes = np.arange(1 << d, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(d)) & 1
    pts = (1 - 2 * bits).astype(float)
    pts.setflags(write=False)
    return pts


def points(d: int) -> np.ndarray:
    """All 2^d points as a (2^d, d) array of +-1, row r is the point with code r."""
    check_dim(d)
    return _points(d)


def point_code(x) -> int:
    x = np.asarray(x)
    bits = (x < 0).astype(np.int64)
    return int(np.sum(bits << np.arange(x.shape[-1])))


def point_codes(X: np.ndarray) -> np.ndarray:
    """Codes of a batch of points with shape (..., d)."""
    X = np.asarray(X)
    bits = (X < 0).astype(np.int64)
    return np.sum(bits << np.arange(X.shape[-1]), axis=-1)


def chi(mask: int, d: int) -> np.ndarray:
    """Truth table of the parity chi_S."""
    codes = np.arange(1 << d, dtype=np.uint64)
    return 1.0 - 2.0 * (popcount(codes & np.uint64(mask)) & 1)


def _fwht(a: np.ndarray) -> np.ndarray:
    # unnormalized butterfly over the last axis; length must be a power of two
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[-1]
    lead = a.shape[:-1]
    h = 1
    while h < n:
        a = a.reshape(*lead, n // (2 * h), 2, h)
        x = a[..., 0, :].copy()
        y = a[..., 1, :]
        a[..., 0, :] += y
        a[..., 1, :] = x - y
        a = a.reshape(*lead, n)
        h *= 2
    return a


def fwht_batch(tables: np.ndarray) -> np.ndarray:
    """Forward transform of many truth tables at once (rows of ``tables``)."""
    tables = np.asarray(tables, dtype=float)
    n = tables.shape[-1]
    return _fwht(tables) / n


def wht_forward(f: HypercubeFunction) -> FourierSpectrum:
    return FourierSpectrum(f.d, _fwht(f.values) / (1 << f.d))


def wht_inverse(spec: FourierSpectrum) -> HypercubeFunction:
    return HypercubeFunction(spec.d, _fwht(spec.coeffs))


def wht_naive(f: HypercubeFunction) -> FourierSpectrum:
    """Direct O(4^d) double sum, kept as an independent check of the butterfly."""
    n = 1 << f.d
    codes = np.arange(n, dtype=np.uint64)
    signs = 1.0 - 2.0 * (popcount(codes[:, None] & codes[None, :]) & 1)
    return FourierSpectrum(f.d, signs @ f.values / n)


def spectrum_from_dict(d: int, coeffs: dict) -> FourierSpectrum:
    c = np.zeros(1 << d)
    for subset, v in coeffs.items():
        m = as_mask(subset)
        if m >> d:
            raise ValueError(f"subset {mask_to_set(m)} not inside [d] for d={d}")
        c[m] += v
    return FourierSpectrum(d, c)


def evaluate_spectrum(spec: FourierSpectrum, x) -> float:
    """sum_S fhat(S) chi_S(x) evaluated term by term at one point."""
    code = np.uint64(point_code(x))
    masks = np.arange(1 << spec.d, dtype=np.uint64)
    signs = 1.0 - 2.0 * (popcount(masks & code) & 1)
    return float(signs @ spec.coeffs)


def l2_norm_sq(f: HypercubeFunction) -> float:
    return float(np.mean(f.values**2))


def level_weights(spec: FourierSpectrum) -> np.ndarray:
    """Fourier weight at each degree k = 0..d."""
    sizes = popcount(np.arange(1 << spec.d))
    return np.bincount(sizes, weights=spec.coeffs**2, minlength=spec.d + 1)


def level_sizes(d: int) -> np.ndarray:
    return popcount(np.arange(1 << d))


# builtin targets ------------------------------------------------------------

def parity(d: int, subset: Iterable[int] | int) -> HypercubeFunction:
    m = as_mask(subset)
    if m >> d:
        raise ValueError(f"subset {mask_to_set(m)} not inside [d] for d={d}")
    return HypercubeFunction(d, chi(m, d))


def full_parity(d: int) -> HypercubeFunction:
    return parity(d, (1 << d) - 1)


def half_parity(d: int) -> HypercubeFunction:
    """Parity of the first floor(d/2) coordinates."""
    return parity(d, (1 << (d // 2)) - 1)


def mod8(d: int) -> HypercubeFunction:
    return HypercubeFunction(d, np.sum(points(d), axis=1) % 8)


def parity_mod4(d: int) -> HypercubeFunction:
    """0 if #{j: x_j=+1} is even, +1 if it is 1 mod 4, -1 if it is 3 mod 4."""
    n_plus = d - level_sizes(d)
    vals = np.zeros(1 << d)
    vals[n_plus % 4 == 1] = 1.0
    vals[n_plus % 4 == 3] = -1.0
    return HypercubeFunction(d, vals)


def junta(h: HypercubeFunction, d: int, embedding: Sequence[int] | None = None) -> HypercubeFunction:
    """Lift h on H_P to H_d, reading h's inputs from the given coordinates."""
    P = h.d
    if P > d:
        raise ValueError(f"junta needs P <= d, got P={P}, d={d}")
    emb = list(range(P)) if embedding is None else [int(i) for i in embedding]
    if len(emb) != P or len(set(emb)) != P or not all(0 <= i < d for i in emb):
        raise ValueError(f"embedding must be {P} distinct coordinates in [0, {d})")
    codes = np.arange(1 << d, dtype=np.int64)
    sub = np.zeros_like(codes)
    for j, i in enumerate(emb):
        sub |= ((codes >> i) & 1) << j
    return HypercubeFunction(d, h.values[sub])


def from_callable(d: int, fn: Callable[[np.ndarray], np.ndarray]) -> HypercubeFunction:
    """Tabulate a vectorized function of the (2^d, d) point array."""
    return HypercubeFunction(d, np.asarray(fn(points(d)), dtype=float))


BUILTINS = ("parity", "full_parity", "half_parity", "mod8", "parity_mod4", "junta")


def builtin(name: str, d: int, **params) -> HypercubeFunction:
    check_dim(d)
    if name == "parity":
        return parity(d, params["subset"])
    if name == "full_parity":
        return full_parity(d)
    if name == "half_parity":
        return half_parity(d)
    if name == "mod8":
        return mod8(d)
    if name == "parity_mod4":
        return parity_mod4(d)
    if name == "junta":
        return junta(params["h"], d, params.get("embedding"))
    raise ValueError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")


def random_function(d: int, rng: np.random.Generator) -> HypercubeFunction:
    return HypercubeFunction(d, rng.standard_normal(1 << d))


def n_subsets(d: int, k: int) -> int:
    return comb(d, k)

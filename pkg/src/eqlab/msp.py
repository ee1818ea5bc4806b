"""Merged-staircase property with leap l, and the resulting GD lower bound."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import sqrt

from . import boolean_fourier as bf


@dataclass(frozen=True)
class FourierSupport:
    """Nonzero Fourier sets of h*: H_P -> R, as 0-indexed masks over [P]."""
    P: int
    sets: tuple[int, ...]
    coeffs: tuple[float, ...] | None = None

    def __post_init__(self):
        sets = tuple(bf.as_mask(s) for s in self.sets)
        if any(m == 0 or m >> self.P for m in sets):
            raise ValueError(f"sets must be nonempty subsets of [P] with P={self.P}")
        if len(set(sets)) != len(sets):
            raise ValueError("duplicate sets in support")
        object.__setattr__(self, "sets", sets)
        if self.coeffs is not None:
            c = tuple(float(v) for v in self.coeffs)
            if len(c) != len(sets) or any(v == 0 for v in c):
                raise ValueError("coeffs must be nonzero, one per set")
            object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_lists(cls, sets, P: int | None = None, coeffs=None, one_indexed: bool = True):
        shift = 1 if one_indexed else 0
        masks = [sum(1 << (i - shift) for i in s) for s in sets]
        if P is None:
            P = max((m.bit_length() for m in masks), default=1)
        return cls(P, tuple(masks), None if coeffs is None else tuple(coeffs))

    def weights(self) -> list[float]:
        return [1.0] * len(self.sets) if self.coeffs is None else list(self.coeffs)


@dataclass
class MspReport:
    leap: int
    satisfies: bool
    ordering: list[int]
    closure: int
    violating_sets: list[int]
    minimal_leap: int | None = None

    def to_dict(self, one_indexed: bool = True) -> dict:
        def show(m):
            return [i + one_indexed for i in bf.mask_to_set(m)]
        return {
            "leap": self.leap,
            "satisfies": self.satisfies,
            "ordering": [show(m) for m in self.ordering],
            "closure": show(self.closure),
            "violating_sets": [show(m) for m in self.violating_sets],
            "minimal_leap": self.minimal_leap,
        }


def _new(m: int, covered: int) -> int:
    return bin(m & ~covered).count("1")


def greedy_closure(sets, l: int) -> tuple[list[int], int]:
    """Keep adding the lowest-mask set that brings at most l new coordinates."""
    left = sorted(sets)
    order, covered = [], 0
    progress = True
    while progress and left:
        progress = False
        for m in left:
            if _new(m, covered) <= l:
                order.append(m)
                covered |= m
                left.remove(m)
                progress = True
                break
    return order, covered


def is_l_msp(support: FourierSupport, l: int) -> MspReport:
    if l < 1:
        raise ValueError("leap must be >= 1")
    order, covered = greedy_closure(support.sets, l)
    rest = sorted(set(support.sets) - set(order))
    return MspReport(l, not rest, order, covered, rest, minimal_leap(support))


def minimal_leap(support: FourierSupport) -> int:
    if not support.sets:
        raise ValueError("empty support")
    top = max(bin(m).count("1") for m in support.sets)
    for l in range(1, top + 1):
        if len(greedy_closure(support.sets, l)[0]) == len(support.sets):
            return l
    return top  # unreachable: at leap max|S| every set is addable


def exhaustive_msp(sets, l: int) -> bool:
    """Try every ordering; the independent check for the greedy rule."""
    for perm in itertools.permutations(sets):
        covered, ok = 0, True
        for m in perm:
            if _new(m, covered) > l:
                ok = False
                break
            covered |= m
        if ok:
            return True
    return False


@dataclass
class NecessityBound:
    bound: float
    eps0: float
    C_h: float
    c_h: float
    alignment_bound: float
    closure: int
    terms: dict = field(default_factory=dict)


def necessity_bound(support: FourierSupport, d: int, l: int, eta: float, R: float, tau: float, k: int) -> NecessityBound:
    """Probability that k noisy GD steps reach loss <= eps0 on a non-l-MSP target.

    With T the greedy closure at leap l and the alignment bound
    A = C_h / d^{l+1}, C_h = 2^{2P} sum_{S not in T} hhat(S)^2, the junk
    trajectory argument gives eta R sqrt(k A) / (2 tau) + A / eps0 with
    eps0 = c_h / 2, c_h the smallest squared coefficient.
    """
    rep = is_l_msp(support, l)
    if rep.satisfies:
        raise ValueError(f"support satisfies {l}-MSP; the bound does not apply")
    P = support.P
    if d < 2 * P:
        raise ValueError(f"need d >= 2P, got d={d}, P={P}")
    w = support.weights()
    T = rep.closure
    outside = sum(c * c for m, c in zip(support.sets, w) if m & ~T)
    C_h = 4.0**P * outside
    c_h = min(c * c for c in w)
    eps0 = c_h / 2
    A = C_h / d ** (l + 1)
    if tau == 0:
        first = float("inf") if eta * R * k * A > 0 else 0.0
    else:
        first = eta * R / (2 * tau) * sqrt(k * A)
    second = A / eps0
    return NecessityBound(min(1.0, max(0.0, first + second)), eps0, C_h, c_h, A, T,
                          {"gd_term": first, "junk_term": second})

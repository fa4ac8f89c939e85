"""Shapley combination weights.

For variable ``j`` and any subset ``s`` of the ``d`` variables the curve
estimate is ``sum_s w(j, s) * m_s(x_s)`` with

    w(j, s) = sgn(j in s) / d * binom(d - 1, |s| - [j in s]) ** -1.

Weights are computed as exact fractions and converted to floats once.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .data import SubsetMask, check_dim


@dataclass(frozen=True)
class ShapleyWeight:
    j: int
    s: SubsetMask
    value: Fraction

    def __float__(self):
        return float(self.value)


def _weight(j: int, bits: int, d: int) -> Fraction:
    inside = bool(bits >> j & 1)
    size = bin(bits).count("1")
    sign = 1 if inside else -1
    return Fraction(sign, d * comb(d - 1, size - inside))


def shapley_weight(j: int, s: SubsetMask, d: int) -> ShapleyWeight:
    check_dim(d)
    if s.d != d or not 0 <= j < d:
        raise ValueError(f"invalid (j={j}, s={s}) for d={d}")
    return ShapleyWeight(j, s, _weight(j, s.bits, d))


@lru_cache(maxsize=None)
def exact_weight_table(d: int) -> tuple:
    """``table[j][bits]`` as Fractions."""
    check_dim(d)
    return tuple(tuple(_weight(j, bits, d) for bits in range(1 << d)) for j in range(d))


@lru_cache(maxsize=None)
def _float_table(d: int) -> np.ndarray:
    t = np.array([[float(w) for w in row] for row in exact_weight_table(d)])
    t.setflags(write=False)
    return t


def weight_table(d: int) -> np.ndarray:
    """``d x 2**d`` float array of weights, rows by variable, columns by bitmask."""
    return _float_table(d)


def combine(components: np.ndarray, d: int, variables=None) -> np.ndarray:
    """Shapley curves from component values.

    ``components`` has shape ``(..., 2**d)`` (last axis by bitmask); returns
    ``(..., len(variables))``.
    """
    table = weight_table(d)
    if variables is not None:
        table = table[list(variables)]
    return components @ table.T

"""Truncated formal Laurent series in the deformation parameter nu.

Coefficients are either plain numbers or numpy arrays of one common shape
(field samples).  Nothing above ``truncation_order`` is ever read or written.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DEFAULT_NU_ORDER = 2


def _space(c) -> tuple:
    if np.isscalar(c) or (isinstance(c, np.ndarray) and c.ndim == 0):
        return ()
    return np.shape(c)


@dataclass(frozen=True, eq=False)
class FormalSeries:
    """``sum_{k=lowest_power}^{truncation_order} coefficients[k - lowest_power] nu^k``."""

    lowest_power: int
    coefficients: tuple
    truncation_order: int

    def __post_init__(self):
        coeffs = tuple(self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != self.truncation_order - self.lowest_power + 1:
            raise ValueError(
                f"{len(coeffs)} coefficients for powers {self.lowest_power}..{self.truncation_order}"
            )
        spaces = {_space(c) for c in coeffs}
        if len(spaces) > 1:
            raise ValueError(f"mixed coefficient spaces {spaces}")

    @classmethod
    def from_coefficients(cls, coeffs: Sequence, lowest_power: int = 0) -> FormalSeries:
        coeffs = tuple(coeffs)
        return cls(lowest_power, coeffs, lowest_power + len(coeffs) - 1)

    @classmethod
    def constant(cls, c, truncation_order: int = DEFAULT_NU_ORDER) -> FormalSeries:
        zero = c * 0
        return cls(0, (c,) + (zero,) * truncation_order, truncation_order)

    @property
    def space(self) -> tuple:
        return _space(self.coefficients[0]) if self.coefficients else ()

    def _zero(self):
        return self.coefficients[0] * 0

    def __getitem__(self, k: int):
        """Coefficient of nu^k (zero below ``lowest_power``)."""
        if k > self.truncation_order:
            raise IndexError(f"nu^{k} is above the truncation order {self.truncation_order}")
        if k < self.lowest_power:
            return self._zero()
        return self.coefficients[k - self.lowest_power]

    def powers(self) -> range:
        return range(self.lowest_power, self.truncation_order + 1)

    def truncate(self, order: int) -> FormalSeries:
        if order > self.truncation_order:
            raise ValueError("cannot raise the truncation order")
        lo = min(self.lowest_power, order)
        return FormalSeries(lo, tuple(self[k] for k in range(lo, order + 1)), order)

    def map(self, fn: Callable) -> FormalSeries:
        return FormalSeries(self.lowest_power, tuple(fn(c) for c in self.coefficients), self.truncation_order)

    def _check(self, other: FormalSeries):
        if self.space != other.space and self.space != () and other.space != ():
            raise ValueError(f"coefficient spaces differ: {self.space} vs {other.space}")

    def __add__(self, other):
        if not isinstance(other, FormalSeries):
            return self + FormalSeries.constant(other, max(self.truncation_order, 0))
        self._check(other)
        lo = min(self.lowest_power, other.lowest_power)
        hi = min(self.truncation_order, other.truncation_order)
        return FormalSeries(lo, tuple(self[k] + other[k] for k in range(lo, hi + 1)), hi)

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda c: -c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> FormalSeries:
        return self.map(lambda c: c * s)

    def shift(self, p: int) -> FormalSeries:
        """Multiply by nu^p."""
        return FormalSeries(self.lowest_power + p, self.coefficients, self.truncation_order + p)

    def __mul__(self, other):
        if not isinstance(other, FormalSeries):
            return self.scale(other)
        self._check(other)
        lo = self.lowest_power + other.lowest_power
        # a is exact through nu^{ta}; a*b is therefore exact through ta + lowest(b).
        hi = min(self.truncation_order + other.lowest_power, other.truncation_order + self.lowest_power)
        coeffs = []
        for k in range(lo, hi + 1):
            acc = None
            for i in range(self.lowest_power, k - other.lowest_power + 1):
                term = self[i] * other[k - i]
                acc = term if acc is None else acc + term
            coeffs.append(acc)
        return FormalSeries(lo, tuple(coeffs), hi)

    __rmul__ = __mul__

    def inverse(self) -> FormalSeries:
        lead = self.coefficients[0]
        if np.any(np.abs(lead) == 0):
            raise ZeroDivisionError("leading coefficient is not invertible")
        n = self.truncation_order - self.lowest_power
        inv0 = 1.0 / lead
        b = [inv0]
        for k in range(1, n + 1):
            acc = self.coefficients[1] * b[k - 1]
            for j in range(2, k + 1):
                acc = acc + self.coefficients[j] * b[k - j]
            b.append(-inv0 * acc)
        return FormalSeries(-self.lowest_power, tuple(b), n - self.lowest_power)

    def max_abs(self) -> list[float]:
        return [float(np.max(np.abs(c))) for c in self.coefficients]

    def __repr__(self):
        if self.space:
            return f"FormalSeries(nu^{self.lowest_power}..nu^{self.truncation_order}, field{self.space})"
        terms = " + ".join(f"({c:.6g})nu^{k}" for k, c in zip(self.powers(), self.coefficients))
        return f"FormalSeries[{terms}]"


def series_add(a: FormalSeries, b: FormalSeries) -> FormalSeries:
    return a + b


def series_mul(a: FormalSeries, b: FormalSeries) -> FormalSeries:
    return a * b


def series_invert(a: FormalSeries) -> FormalSeries:
    return a.inverse()

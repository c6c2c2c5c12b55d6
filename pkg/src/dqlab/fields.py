"""Periodic fields on the flat torus (R/2piZ)^d with spectral calculus.

Two array layouts are used throughout the package:

* geometry arrays put the grid axes *first*: shape ``(n,)*d + components``,
  so that ``np.einsum('...ij,...jk->...ik')`` acts pointwise;
* Weyl-algebra coefficient arrays put the grid axes *last*:
  shape ``(nbasis, *batch) + (n,)*d``.

:class:`Grid` differentiates along either layout through ``first=``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    d: int
    n: int

    def __post_init__(self):
        if self.d not in (2, 4):
            raise ValueError(f"dimension must be 2 or 4, got {self.d}")
        if self.n % 2 or self.n < 8:
            raise ValueError(f"points per axis must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def volume(self) -> float:
        return TWO_PI**self.d

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = TWO_PI * np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    @cached_property
    def _wavenumbers(self) -> tuple[np.ndarray, ...]:
        # rfftn layout: full frequencies on all axes but the last, half on the last.
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        k[self.n // 2] = 0.0
        kr = np.fft.rfftfreq(self.n, 1.0 / self.n)
        kr[-1] = 0.0
        axes = [k] * (self.d - 1) + [kr]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, ...]:
        """Integer frequencies of the full ``fftn`` layout (Nyquist kept signed)."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return tuple(np.meshgrid(*([k] * self.d), indexing="ij"))

    def _axes(self, ndim: int, first: bool) -> tuple[int, ...]:
        return tuple(range(self.d)) if first else tuple(range(ndim - self.d, ndim))

    def _bcast(self, k: np.ndarray, ndim: int, first: bool) -> np.ndarray:
        if first:
            return k.reshape(k.shape + (1,) * (ndim - self.d))
        return k

    def grad(self, a: np.ndarray, first: bool = True) -> np.ndarray:
        """All first partial derivatives of ``a``.

        The derivative index is stacked as a new trailing component axis when
        ``first`` (geometry layout) and as a new leading axis otherwise.
        """
        a = np.asarray(a)
        if np.iscomplexobj(a):
            re = self.grad(a.real, first)
            im = self.grad(a.imag, first)
            return re + 1j * im
        axes = self._axes(a.ndim, first)
        ah = np.fft.rfftn(a, axes=axes)
        out = []
        for i in range(self.d):
            k = self._bcast(self._wavenumbers[i], a.ndim, first)
            out.append(np.fft.irfftn(1j * k * ah, s=self.shape, axes=axes))
        return np.stack(out, axis=-1 if first else 0)

    def deriv(self, a: np.ndarray, i: int, first: bool = True) -> np.ndarray:
        if not 0 <= i < self.d:
            raise ValueError(f"axis {i} out of range for d={self.d}")
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return self.deriv(a.real, i, first) + 1j * self.deriv(a.imag, i, first)
        axes = self._axes(a.ndim, first)
        ah = np.fft.rfftn(a, axes=axes)
        k = self._bcast(self._wavenumbers[i], a.ndim, first)
        return np.fft.irfftn(1j * k * ah, s=self.shape, axes=axes)

    def integrate(self, a: np.ndarray, first: bool = True) -> np.ndarray | float:
        """Integral against the coordinate volume (= omega^m/m! for standard omega)."""
        a = np.asarray(a)
        return a.mean(axis=self._axes(a.ndim, first)) * self.volume

    def spectrum(self, a: np.ndarray) -> np.ndarray:
        """Normalised Fourier coefficients ``c_q`` with ``a = sum_q c_q e^{i q.x}``."""
        return np.fft.fftn(a, axes=tuple(range(-self.d, 0))) / self.size

    def max_frequency_mask(self, max_freq: int) -> np.ndarray:
        return np.max(np.abs(np.stack(self.frequencies)), axis=0) <= max_freq


def half_lattice(d: int, kmax: int) -> list[tuple[int, ...]]:
    """Nonzero integer vectors with sup-norm <= kmax, one of each +-q pair."""
    out = []
    for q in np.ndindex(*([2 * kmax + 1] * d)):
        v = tuple(int(c) - kmax for c in q)
        nz = [c for c in v if c != 0]
        if nz and nz[0] > 0:
            out.append(v)
    return out


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """A scalar field sampled on a :class:`Grid`."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.shape != self.grid.shape:
            raise ValueError(f"samples shape {self.samples.shape} != grid {self.grid.shape}")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.samples) or float(np.max(np.abs(self.samples.imag))) <= 1e-10

    def derivative(self, axis: int) -> PeriodicField:
        return PeriodicField(self.grid, self.grid.deriv(self.samples, axis))

    def integrate(self) -> float:
        return float(np.real(self.grid.integrate(self.samples)))

    def _coerce(self, other):
        if isinstance(other, PeriodicField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return PeriodicField(self.grid, self.samples + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return PeriodicField(self.grid, self.samples - self._coerce(other))

    def __rsub__(self, other):
        return PeriodicField(self.grid, self._coerce(other) - self.samples)

    def __mul__(self, other):
        return PeriodicField(self.grid, self.samples * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return PeriodicField(self.grid, self.samples / self._coerce(other))

    def __neg__(self):
        return PeriodicField(self.grid, -self.samples)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))


def spectral_derivative(f: PeriodicField, axis: int) -> PeriodicField:
    return f.derivative(axis)


def integrate(f: PeriodicField) -> float:
    return f.integrate()


def trig_samples(grid: Grid, rng: np.random.Generator, max_freq: int, zero_mean: bool = True) -> np.ndarray:
    """Real trigonometric polynomial with i.i.d. normal mode coefficients.

    The field is synthesised from an exactly band-limited spectrum, so its
    discrete transform vanishes (to rounding) outside ``|q|_inf <= max_freq``.
    """
    if max_freq > grid.n // 4:
        raise ValueError(f"max_freq={max_freq} exceeds the dealiasing budget n/4={grid.n // 4}")
    modes = half_lattice(grid.d, max_freq)
    spec = np.zeros(grid.shape, dtype=complex)
    scale = 1.0 / math.sqrt(max(len(modes), 1))
    for q in modes:
        c = complex(rng.normal(), rng.normal()) * scale * 0.5
        idx = tuple(c_ % grid.n for c_ in q)
        nidx = tuple((-c_) % grid.n for c_ in q)
        spec[idx] += c
        spec[nidx] += c.conjugate()
    if not zero_mean:
        spec[(0,) * grid.d] = rng.normal()
    return np.real(np.fft.ifftn(spec)) * grid.size


def random_trig_field(grid: Grid, seed: int, max_freq: int = 2, zero_mean: bool = True) -> PeriodicField:
    rng = np.random.default_rng(seed)
    return PeriodicField(grid, trig_samples(grid, rng, max_freq, zero_mean))

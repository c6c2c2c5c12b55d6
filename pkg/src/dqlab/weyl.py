"""Formal Weyl algebra bundle on T^d: forms with values in symmetric y-polynomials.

A :class:`WeylForm` is a dict ``{(mask, D): coeffs}``.  ``mask`` is a bitmask of the
form indices (dx^j for bit j), ``D = 2k + |alpha|`` the total degree and ``coeffs``
an array of shape ``(nbasis(D), *batch, *grid)`` whose first axis runs over the
monomials ``nu^k y^alpha`` of :func:`basis`.  The fiberwise product is

    a o b = exp(nu/2 Lambda^{ij} d_{y^i} d_{z^j}) a(y) b(z) |_{z=y}

and preserves total degree, so each pair of blocks maps to a single block.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fields import Grid
from .geometry import SymplecticData

PRUNE_TOL = 1e-14
_CHUNK = 1 << 23  # elements per product chunk


# ---------------------------------------------------------------- monomial bookkeeping


def _multi_indices(d: int, p: int) -> list[tuple[int, ...]]:
    if d == 1:
        return [(p,)]
    out = []
    for a in range(p, -1, -1):
        out.extend((a,) + rest for rest in _multi_indices(d - 1, p - a))
    return out


@lru_cache(maxsize=None)
def basis(d: int, D: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Monomials ``(k, alpha)`` with ``2k + |alpha| = D`` (k ascending)."""
    return tuple((k, al) for k in range(D // 2 + 1) for al in _multi_indices(d, D - 2 * k))


@lru_cache(maxsize=None)
def basis_index(d: int, D: int) -> dict:
    return {m: i for i, m in enumerate(basis(d, D))}


def nbasis(d: int, D: int) -> int:
    return len(basis(d, D))


@lru_cache(maxsize=None)
def y0_rows(d: int, D: int) -> np.ndarray:
    """Row indices of the y-free monomials nu^k (only when D is even)."""
    return np.array([i for i, (k, al) in enumerate(basis(d, D)) if not any(al)], dtype=int)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def wedge_sign(m1: int, m2: int) -> int:
    """Sign of dx^{m1} ^ dx^{m2} relative to the increasing ordering (0 if they overlap)."""
    if m1 & m2:
        return 0
    s = 0
    for j in range(m2.bit_length()):
        if m2 >> j & 1:
            s += popcount(m1 >> (j + 1))
    return -1 if s % 2 else 1


@lru_cache(maxsize=None)
def _lambda_entries(d: int) -> tuple[tuple[int, int, float], ...]:
    lam = SymplecticData.standard(d).lam
    return tuple((i, j, float(lam[i, j])) for i in range(d) for j in range(d) if lam[i, j] != 0)


@lru_cache(maxsize=None)
def _contract(d: int, a1: tuple[int, ...], a2: tuple[int, ...]) -> tuple:
    """Terms ``(r, beta, c)`` of (1/2^r r!) P^r (y^a1 z^a2)|_{z=y}, P = Lambda^{ij} d_{y_i} d_{z_j}."""
    lam = _lambda_entries(d)
    state = {(a1, a2): 1.0}
    out = []
    r = 0
    while state:
        norm = 1.0 / (2.0**r * math.factorial(r))
        acc: dict = {}
        for (b1, b2), c in state.items():
            beta = tuple(x + y for x, y in zip(b1, b2))
            acc[beta] = acc.get(beta, 0.0) + c * norm
        out.extend((r, beta, c) for beta, c in acc.items() if c != 0.0)
        nxt: dict = {}
        for (b1, b2), c in state.items():
            for i, j, l in lam:
                if b1[i] and b2[j]:
                    n1 = b1[:i] + (b1[i] - 1,) + b1[i + 1 :]
                    n2 = b2[:j] + (b2[j] - 1,) + b2[j + 1 :]
                    key = (n1, n2)
                    nxt[key] = nxt.get(key, 0.0) + c * l * b1[i] * b2[j]
        state = {k: v for k, v in nxt.items() if v != 0.0}
        r += 1
    return tuple(out)


class _Table:
    """Sparse structure constants of one (D1, D2) block pair."""

    def __init__(self, p1, p2, mat, out_D):
        self.p1 = p1
        self.p2 = p2
        self.mat = mat
        self.out_D = out_D


@lru_cache(maxsize=None)
def product_table(d: int, D1: int, D2: int, mode: str = "all", y0: bool = False) -> _Table:
    """Structure constants ``(a o b)[iout] = sum M[iout, p] a[p1[p]] b[p2[p]]``.

    mode: ``'all'`` (full product), ``'odd'``/``'even'`` (contraction-order parity) or
    ``'nucomm'`` (twice the odd part divided by nu: the operator (1/nu)[a, b] for
    scalar coefficients, landing in degree D1 + D2 - 2).
    """
    B1, B2 = basis(d, D1), basis(d, D2)
    shift = 1 if mode == "nucomm" else 0
    Dout = D1 + D2 - 2 * shift
    idx_out = basis_index(d, Dout)
    if y0:
        keep = {m for m in basis(d, Dout) if not any(m[1])}
    rows, pairs, vals = [], {}, []
    cols = []
    for i1, (k1, a1) in enumerate(B1):
        for i2, (k2, a2) in enumerate(B2):
            for r, beta, c in _contract(d, a1, a2):
                if mode in ("odd", "nucomm") and r % 2 == 0:
                    continue
                if mode == "even" and r % 2 == 1:
                    continue
                key = (k1 + k2 + r - shift, beta)
                if y0 and key not in keep:
                    continue
                p = pairs.setdefault((i1, i2), len(pairs))
                rows.append(idx_out[key])
                cols.append(p)
                vals.append(2.0 * c if mode == "nucomm" else c)
    p1 = np.array([k[0] for k in pairs], dtype=int)
    p2 = np.array([k[1] for k in pairs], dtype=int)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(idx_out), len(pairs)))
    mat.sum_duplicates()
    return _Table(p1, p2, mat, Dout)


def _apply_table(tab: _Table, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    S = np.broadcast_shapes(A.shape[1:], B.shape[1:])
    # pad batch axes so broadcasting aligns the trailing (batch, grid) shapes, not the row axis
    A = A.reshape((A.shape[0],) + (1,) * (len(S) - A.ndim + 1) + A.shape[1:])
    B = B.reshape((B.shape[0],) + (1,) * (len(S) - B.ndim + 1) + B.shape[1:])
    size = int(np.prod(S)) if S else 1
    out = np.zeros((tab.mat.shape[0], size))
    npairs = len(tab.p1)
    if npairs == 0:
        return out.reshape((tab.mat.shape[0],) + S)
    step = max(1, _CHUNK // max(size, 1))
    for s in range(0, npairs, step):
        sl = slice(s, s + step)
        prod = (A[tab.p1[sl]] * B[tab.p2[sl]]).reshape(-1, size)
        out += tab.mat[:, sl] @ prod
    return out.reshape((tab.mat.shape[0],) + S)


# ---------------------------------------------------------------- WeylForm


class WeylForm:
    """Element of Gamma(W) (x) Lambda(T^d), stored blockwise by (form mask, total degree)."""

    __slots__ = ("grid", "cap", "terms")

    def __init__(self, grid: Grid, cap: int, terms: dict | None = None, prune: float = PRUNE_TOL):
        self.grid = grid
        self.cap = cap
        self.terms = {}
        for (mask, D), c in (terms or {}).items():
            if D > cap:
                continue
            c = np.asarray(c, dtype=float)
            if c.shape[0] != nbasis(grid.d, D):
                raise ValueError(f"block ({mask}, {D}) has {c.shape[0]} rows, expected {nbasis(grid.d, D)}")
            if prune is not None and c.size and float(np.max(np.abs(c))) <= prune:
                continue
            self.terms[(mask, D)] = c

    @property
    def d(self) -> int:
        return self.grid.d

    # constructors
    @classmethod
    def zero(cls, grid: Grid, cap: int) -> WeylForm:
        return cls(grid, cap)

    @classmethod
    def monomial(cls, grid: Grid, cap: int, k: int, alpha, mask: int = 0, coeff=1.0) -> WeylForm:
        alpha = tuple(alpha)
        D = 2 * k + sum(alpha)
        coeff = np.broadcast_to(np.asarray(coeff, dtype=float), np.shape(coeff) or grid.shape)
        c = np.zeros((nbasis(grid.d, D),) + coeff.shape)
        c[basis_index(grid.d, D)[(k, alpha)]] = coeff
        return cls(grid, cap, {(mask, D): c})

    @classmethod
    def function(cls, grid: Grid, cap: int, F, mask: int = 0) -> WeylForm:
        return cls.monomial(grid, cap, 0, (0,) * grid.d, mask, F)

    @classmethod
    def nu_series(cls, grid: Grid, cap: int, coeffs, mask: int = 0) -> WeylForm:
        """sum_k nu^k coeffs[k] (y-free)."""
        out = cls.zero(grid, cap)
        for k, c in enumerate(coeffs):
            if c is not None:
                out = out + cls.monomial(grid, cap, k, (0,) * grid.d, mask, c)
        return out

    # structure
    def copy_with(self, terms: dict, cap: int | None = None) -> WeylForm:
        return WeylForm(self.grid, self.cap if cap is None else cap, terms)

    def form_degrees(self) -> set[int]:
        return {popcount(m) for m, _ in self.terms}

    def degrees(self) -> set[int]:
        return {D for _, D in self.terms}

    def lowest_degree(self) -> int | None:
        return min(self.degrees(), default=None)

    def degree_part(self, D: int) -> WeylForm:
        return self.copy_with({k: v for k, v in self.terms.items() if k[1] == D})

    def truncate(self, cap: int) -> WeylForm:
        return self.copy_with({k: v for k, v in self.terms.items() if k[1] <= cap}, cap=min(cap, self.cap))

    def with_cap(self, cap: int) -> WeylForm:
        return self.copy_with(dict(self.terms), cap=cap)

    def max_abs(self, max_degree: int | None = None) -> float:
        vals = [float(np.max(np.abs(c))) for (m, D), c in self.terms.items() if max_degree is None or D <= max_degree]
        return max(vals, default=0.0)

    def residual_by_degree(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (m, D), c in self.terms.items():
            out[D] = max(out.get(D, 0.0), float(np.max(np.abs(c))))
        return dict(sorted(out.items()))

    def coefficient(self, k: int, alpha, mask: int = 0) -> np.ndarray:
        alpha = tuple(alpha)
        D = 2 * k + sum(alpha)
        c = self.terms.get((mask, D))
        if c is None:
            return np.zeros(self.grid.shape)
        return c[basis_index(self.d, D)[(k, alpha)]]

    # arithmetic
    def _combine(self, other: WeylForm, s: float) -> WeylForm:
        if other.grid != self.grid:
            raise ValueError("WeylForms on different grids")
        cap = min(self.cap, other.cap)
        terms = {k: v for k, v in self.terms.items()}
        for k, v in other.terms.items():
            terms[k] = terms[k] + s * v if k in terms else s * v
        return WeylForm(self.grid, cap, terms)

    def __add__(self, other: WeylForm) -> WeylForm:
        return self._combine(other, 1.0)

    def __sub__(self, other: WeylForm) -> WeylForm:
        return self._combine(other, -1.0)

    def __neg__(self) -> WeylForm:
        return self.scale(-1.0)

    def scale(self, s) -> WeylForm:
        """Multiply by a number or pointwise by a (broadcastable) field."""
        return self.copy_with({k: v * s for k, v in self.terms.items()})

    __mul__ = scale
    __rmul__ = scale

    def nu_shift(self, p: int) -> WeylForm:
        """Multiply by nu^p (p may be negative if no term underflows)."""
        d = self.d
        terms = {}
        for (m, D), c in self.terms.items():
            src = basis(d, D)
            tgt = basis_index(d, D + 2 * p)
            out = np.zeros((nbasis(d, D + 2 * p),) + c.shape[1:])
            for i, (k, al) in enumerate(src):
                if k + p < 0:
                    if np.any(c[i]):
                        raise ValueError("nu_shift underflow")
                    continue
                out[tgt[(k + p, al)]] = c[i]
            terms[(m, D + 2 * p)] = out
        return self.copy_with(terms)

    # products
    def product(self, other: WeylForm, cap: int | None = None, mode: str = "all", y0: bool = False) -> WeylForm:
        cap = min(self.cap, other.cap) if cap is None else cap
        shift = 2 if mode == "nucomm" else 0
        terms: dict = {}
        for (m1, D1), A in self.terms.items():
            for (m2, D2), B in other.terms.items():
                if D1 + D2 - shift > cap:
                    continue
                sgn = wedge_sign(m1, m2)
                if sgn == 0:
                    continue
                tab = product_table(self.d, D1, D2, mode, y0)
                if tab.mat.nnz == 0:
                    continue
                key = (m1 | m2, tab.out_D)
                val = _apply_table(tab, A, B)
                if sgn < 0:
                    val = -val
                terms[key] = terms[key] + val if key in terms else val
        return WeylForm(self.grid, cap, terms)

    def __matmul__(self, other: WeylForm) -> WeylForm:
        return self.product(other)

    def restrict_y0(self) -> dict[int, np.ndarray]:
        """``a|_{y=0}`` as {mask: array (k, *S)} of nu-coefficients (up to the cap)."""
        out: dict[int, list] = {}
        for (m, D), c in self.terms.items():
            if D % 2:
                continue
            rows = y0_rows(self.d, D)
            out.setdefault(m, {})[D // 2] = c[rows[0]]
        res = {}
        kmax = self.cap // 2
        for m, dct in out.items():
            shape = next(iter(dct.values())).shape
            arr = np.zeros((kmax + 1,) + shape)
            for k, v in dct.items():
                arr[k] = v
            res[m] = arr
        return res

    def y0_coefficients(self, mask: int = 0, order: int | None = None) -> list[np.ndarray]:
        order = self.cap // 2 if order is None else order
        rs = self.restrict_y0().get(mask)
        if rs is None:
            return [np.zeros(self.grid.shape) for _ in range(order + 1)]
        return [rs[k] if k < len(rs) else np.zeros(rs.shape[1:]) for k in range(order + 1)]

    def __repr__(self):
        blocks = ", ".join(f"({m:b},{D})" for m, D in sorted(self.terms))
        return f"WeylForm(d={self.d}, cap={self.cap}, blocks=[{blocks}])"


def weyl_product(a: WeylForm, b: WeylForm, cap: int | None = None) -> WeylForm:
    return a.product(b, cap)


def _pure_degree(a: WeylForm) -> int:
    q = a.form_degrees()
    if len(q) > 1:
        raise ValueError(f"mixed form degrees {sorted(q)}")
    return q.pop() if q else 0


def graded_commutator(a: WeylForm, b: WeylForm, cap: int | None = None) -> WeylForm:
    """``[a, b] = a o b - (-1)^{q1 q2} b o a`` for pure form degrees q1, q2.

    For commuting (scalar-valued) coefficients this equals twice the part of a o b
    with an odd number of contractions.
    """
    _pure_degree(a)
    _pure_degree(b)
    return a.product(b, cap, mode="odd").scale(2.0)


def nu_commutator(a: WeylForm, b: WeylForm, cap: int | None = None, y0: bool = False) -> WeylForm:
    """``(1/nu)[a, b]`` computed without forming the nu^0 cancellation."""
    return a.product(b, cap, mode="nucomm", y0=y0)


# ---------------------------------------------------------------- delta operators


@lru_cache(maxsize=None)
def _y_derivative_map(d: int, D: int, j: int):
    """(src rows, dst rows, factors) for d/dy^j : degree D -> D - 1."""
    src, dst, fac = [], [], []
    tgt = basis_index(d, D - 1)
    for i, (k, al) in enumerate(basis(d, D)):
        if al[j]:
            nal = al[:j] + (al[j] - 1,) + al[j + 1 :]
            src.append(i)
            dst.append(tgt[(k, nal)])
            fac.append(float(al[j]))
    return np.array(src, dtype=int), np.array(dst, dtype=int), np.array(fac)


@lru_cache(maxsize=None)
def _y_multiply_map(d: int, D: int, j: int):
    """(src rows, dst rows) for multiplication by y^j : degree D -> D + 1."""
    src, dst = [], []
    tgt = basis_index(d, D + 1)
    for i, (k, al) in enumerate(basis(d, D)):
        nal = al[:j] + (al[j] + 1,) + al[j + 1 :]
        src.append(i)
        dst.append(tgt[(k, nal)])
    return np.array(src, dtype=int), np.array(dst, dtype=int)


@lru_cache(maxsize=None)
def _y_degrees(d: int, D: int) -> np.ndarray:
    return np.array([sum(al) for k, al in basis(d, D)], dtype=float)


def _insert_sign(j: int, mask: int) -> int:
    """dx^j ^ dx^{mask} = sign * dx^{mask | j}."""
    return -1 if popcount(mask & ((1 << j) - 1)) % 2 else 1


def _add(terms: dict, key, val):
    if key in terms:
        terms[key] = terms[key] + val
    else:
        terms[key] = val


def delta_F(a: WeylForm) -> WeylForm:
    """``dx^j ^ d/dy^j a``."""
    d = a.d
    terms: dict = {}
    for (m, D), c in a.terms.items():
        if D == 0:
            continue
        for j in range(d):
            if m >> j & 1:
                continue
            src, dst, fac = _y_derivative_map(d, D, j)
            if len(src) == 0:
                continue
            out = np.zeros((nbasis(d, D - 1),) + c.shape[1:])
            np.add.at(out, dst, c[src] * fac.reshape((-1,) + (1,) * (c.ndim - 1)))
            _add(terms, (m | 1 << j, D - 1), _insert_sign(j, m) * out)
    return a.copy_with(terms)


def interior(mask: int, j: int) -> tuple[int, int]:
    """iota(d_j) dx^{mask} = sign * dx^{mask without j}."""
    if not mask >> j & 1:
        return 0, mask
    return (-1 if popcount(mask & ((1 << j) - 1)) % 2 else 1), mask & ~(1 << j)


def delta_F_inv(a: WeylForm) -> WeylForm:
    """``(1/(p+q)) y^j iota(d_j) a_pq`` (p = y-degree, q = form degree); zero on a_00."""
    d = a.d
    terms: dict = {}
    for (m, D), c in a.terms.items():
        q = popcount(m)
        if q == 0:
            continue
        p = _y_degrees(d, D)
        inv = (1.0 / (p + q)).reshape((-1,) + (1,) * (c.ndim - 1))
        cs = c * inv
        for j in range(d):
            sgn, m2 = interior(m, j)
            if sgn == 0:
                continue
            src, dst = _y_multiply_map(d, D, j)
            out = np.zeros((nbasis(d, D + 1),) + c.shape[1:])
            out[dst] = cs[src]
            _add(terms, (m2, D + 1), sgn * out)
    return a.copy_with(terms)


def exterior_d(a: WeylForm) -> WeylForm:
    """Exterior derivative acting on the coefficient functions."""
    grid = a.grid
    terms: dict = {}
    for (m, D), c in a.terms.items():
        dc = grid.grad(c, first=False)
        for j in range(a.d):
            if m >> j & 1:
                continue
            _add(terms, (m | 1 << j, D), _insert_sign(j, m) * dc[j])
    return a.copy_with(terms)


def contract_vector(a: WeylForm, X: np.ndarray) -> WeylForm:
    """``iota(X) a`` for a vector field given in geometry layout ``X[..., j]``."""
    terms: dict = {}
    for (m, D), c in a.terms.items():
        for j in range(a.d):
            sgn, m2 = interior(m, j)
            if sgn:
                _add(terms, (m2, D), sgn * c * X[..., j])
    return a.copy_with(terms)


def y0_part(a: WeylForm) -> WeylForm:
    """Keep only the y-free monomials (as a WeylForm)."""
    terms = {}
    for (m, D), c in a.terms.items():
        rows = y0_rows(a.d, D) if D % 2 == 0 else np.array([], dtype=int)
        if len(rows):
            out = np.zeros_like(c)
            out[rows] = c[rows]
            terms[(m, D)] = out
    return a.copy_with(terms)


def form_part(a: WeylForm, degree: int) -> WeylForm:
    return a.copy_with({k: v for k, v in a.terms.items() if popcount(k[0]) == degree})


# ---------------------------------------------------------------- geometric inputs


def polynomial_1form(grid: Grid, cap: int, coeffs: np.ndarray, ydeg: int) -> WeylForm:
    """From ``coeffs[..., i, a1..ap]`` (symmetric in a's): sum c_{i,a} y^a dx^i / (multinomial-free)."""
    d = grid.d
    terms: dict = {}
    B = basis_index(d, ydeg)
    for i in range(d):
        out = np.zeros((nbasis(d, ydeg),) + grid.shape)
        for idx in np.ndindex(*([d] * ydeg)):
            al = [0] * d
            for t in idx:
                al[t] += 1
            out[B[(0, tuple(al))]] += coeffs[(Ellipsis, i) + idx]
        terms[(1 << i, ydeg)] = out
    return WeylForm(grid, cap, terms)


def quadratic_y(grid: Grid, cap: int, M: np.ndarray, mask: int = 0) -> WeylForm:
    """``M_{ab}(x) y^a y^b`` (full double sum)."""
    d = grid.d
    B = basis_index(d, 2)
    out = np.zeros((nbasis(d, 2),) + grid.shape)
    for a in range(d):
        for b in range(d):
            al = [0] * d
            al[a] += 1
            al[b] += 1
            out[B[(0, tuple(al))]] += M[..., a, b]
    return WeylForm(grid, cap, {(mask, 2): out})


def linear_y(grid: Grid, cap: int, v: np.ndarray, mask: int = 0) -> WeylForm:
    """``v_a(x) y^a``."""
    d = grid.d
    B = basis_index(d, 1)
    out = np.zeros((nbasis(d, 1),) + grid.shape)
    for a in range(d):
        al = [0] * d
        al[a] = 1
        out[B[(0, tuple(al))]] = v[..., a]
    return WeylForm(grid, cap, {(mask, 1): out})


def two_form(grid: Grid, cap: int, blocks: dict[tuple[int, int], WeylForm]) -> WeylForm:
    """Assemble sum_{k<l} blocks[(k,l)] dx^k ^ dx^l from 0-form WeylForms."""
    out = WeylForm.zero(grid, cap)
    for (k, l), w in blocks.items():
        mask = (1 << k) | (1 << l)
        out = out + w.copy_with({(mask, D): c for (m, D), c in w.terms.items()})
    return out

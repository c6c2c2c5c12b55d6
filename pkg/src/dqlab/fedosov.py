"""Fedosov construction of the star product *_J from (nabla^J, Omega = nu rho^J).

Everything is organised by total degree D = 2k + |y|: r is solved degree by degree,
Q(F) is obtained as the fixed point Q = F + delta^{-1}(d + (1/nu)ad(Gamma_bar + r))Q,
whose degree-D part only involves lower-degree parts (equivalent to the Neumann
series sum_k (delta^{-1}(d + (1/nu)ad r))^k F).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Grid
from .formal import FormalSeries
from .geometry import CompatibleStructure, SymplecticData, curvature_tensor
from .weyl import (
    WeylForm,
    delta_F,
    delta_F_inv,
    exterior_d,
    nu_commutator,
    quadratic_y,
    two_form,
)

DEFAULT_CAP = 8
R_TOL = 1e-9


class FedosovError(RuntimeError):
    pass


def gamma_bar(grid: Grid, cap: int, gamma: np.ndarray) -> WeylForm:
    """``1/2 omega_lk Gamma^k_ij y^l y^j dx^i`` from Christoffels ``gamma[..., k, i, j]``."""
    om = SymplecticData.standard(grid.d).omega
    low = 0.5 * np.einsum("lk,...kij->...ilj", om, gamma)  # [..., i, l, j]
    out = WeylForm.zero(grid, cap)
    for i in range(grid.d):
        out = out + quadratic_y(grid, cap, low[..., i, :, :], mask=1 << i)
    return out


def r_bar(grid: Grid, cap: int, R: np.ndarray) -> WeylForm:
    """``1/4 omega_ir R^r_jkl y^i y^j dx^k ^ dx^l`` from ``R[..., r, j, k, l]``."""
    om = SymplecticData.standard(grid.d).omega
    low = np.einsum("ir,...rjkl->...klij", om, R)
    blocks = {}
    for k in range(grid.d):
        for l in range(k + 1, grid.d):
            blocks[(k, l)] = quadratic_y(grid, cap, 0.5 * low[..., k, l, :, :])
    return two_form(grid, cap, blocks)


def central_two_form(grid: Grid, cap: int, rho: np.ndarray, nu_power: int = 1) -> WeylForm:
    """``nu^p rho`` as a y-free 2-form."""
    out = WeylForm.zero(grid, cap)
    for k in range(grid.d):
        for l in range(k + 1, grid.d):
            out = out + WeylForm.monomial(grid, cap, nu_power, (0,) * grid.d, (1 << k) | (1 << l), rho[..., k, l])
    return out


def degree_parts(a: WeylForm) -> dict[int, WeylForm]:
    parts: dict[int, dict] = {}
    for (m, D), c in a.terms.items():
        parts.setdefault(D, {})[(m, D)] = c
    return {D: a.copy_with(t) for D, t in sorted(parts.items())}


@dataclass(eq=False)
class FedosovData:
    grid: Grid
    cap: int
    gamma_bar: WeylForm
    r_bar: WeylForm
    omega_central: WeylForm
    r: WeylForm
    structure: CompatibleStructure | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.grid.d

    # connection pieces
    def r_part(self, D: int) -> WeylForm:
        return self._r_parts.get(D, WeylForm.zero(self.grid, self.cap))

    @property
    def _r_parts(self) -> dict[int, WeylForm]:
        if not hasattr(self, "_rp"):
            self._rp = degree_parts(self.r)
        return self._rp

    def partial(self, a: WeylForm) -> WeylForm:
        """``da + (1/nu)[Gamma_bar, a]``."""
        return exterior_d(a) + nu_commutator(self.gamma_bar, a, self.cap)

    def ad_r(self, a: WeylForm, cap: int | None = None) -> WeylForm:
        return nu_commutator(self.r, a, self.cap if cap is None else cap)

    def D_apply(self, a: WeylForm) -> WeylForm:
        a = a.with_cap(min(a.cap, self.cap))
        return self.partial(a) - delta_F(a) + self.ad_r(a)

    def curvature_equation_residual(self) -> WeylForm:
        rr = nu_commutator(self.r, self.r, self.cap).scale(0.5)
        return self.r_bar + self.partial(self.r) - delta_F(self.r) + rr - self.omega_central

    def lift(self, a0: WeylForm) -> WeylForm:
        """Fixed point ``a = a0 + delta^{-1}(partial a + (1/nu)[r, a])`` (= Q applied to a0)."""
        cap = self.cap
        start = degree_parts(a0.with_cap(cap))
        rparts = self._r_parts
        parts: dict[int, WeylForm] = {}
        for D in range(0, cap + 1):
            acc = start.get(D, WeylForm.zero(self.grid, cap))
            rhs = WeylForm.zero(self.grid, cap)
            if D - 1 in parts:
                rhs = rhs + self.partial(parts[D - 1])
            for Dq, q in parts.items():
                Dr = D + 1 - Dq
                if Dr in rparts:
                    rhs = rhs + nu_commutator(rparts[Dr], q, cap)
            rhs = rhs.degree_part(D - 1)
            if rhs.terms:
                acc = acc + delta_F_inv(rhs)
            if acc.terms:
                parts[D] = acc
        out = WeylForm.zero(self.grid, cap)
        for p in parts.values():
            out = out + p
        return out

    def Q(self, F) -> WeylForm:
        """Flat lift of a function (array) or y-free WeylForm / list of nu-coefficients."""
        return self.lift(as_weyl(self.grid, self.cap, F))

    def D_inverse(self, b: WeylForm, tol: float | None = 1e-5, check_degree: int | None = None) -> WeylForm:
        """Solve ``D a = b`` with ``a|_{y=0} = 0`` as ``a = -Q(delta^{-1} b)``."""
        if tol is not None:
            res = self.D_apply(b)
            top = self.cap - 1 if check_degree is None else check_degree
            r = res.max_abs(top)
            scale = max(b.max_abs(top), 1.0)
            if r > tol * scale:
                raise FedosovError(f"D_inverse input is not D-closed: residual {r:.3e}")
        return self.lift(delta_F_inv(b)).scale(-1.0)

    # star product
    def star(self, F, G, nu_order: int, QF: WeylForm | None = None, QG: WeylForm | None = None) -> FormalSeries:
        check_cap(self.cap, nu_order)
        QF = self.Q(F) if QF is None else QF
        QG = self.Q(G) if QG is None else QG
        prod = QF.product(QG, cap=2 * nu_order, y0=True)
        return FormalSeries.from_coefficients(prod.y0_coefficients(0, nu_order))

    def star_commutator(self, F, G, nu_order: int, QF=None, QG=None) -> FormalSeries:
        check_cap(self.cap, nu_order)
        QF = self.Q(F) if QF is None else QF
        QG = self.Q(G) if QG is None else QG
        prod = QF.product(QG, cap=2 * nu_order, mode="odd", y0=True).scale(2.0)
        return FormalSeries.from_coefficients(prod.y0_coefficients(0, nu_order))


def check_cap(cap: int, nu_order: int):
    if cap < 2 * nu_order + 2:
        raise FedosovError(f"degree cap {cap} too small for nu order {nu_order} (need >= {2 * nu_order + 2})")


def as_weyl(grid: Grid, cap: int, F) -> WeylForm:
    if isinstance(F, WeylForm):
        return F
    if isinstance(F, FormalSeries):
        return WeylForm.nu_series(grid, cap, [F[k] if k >= F.lowest_power else None for k in range(F.truncation_order + 1)])
    if isinstance(F, (list, tuple)):
        return WeylForm.nu_series(grid, cap, F)
    return WeylForm.function(grid, cap, np.asarray(F, dtype=float))


def solve_r(grid: Grid, cap: int, gb: WeylForm, rb: WeylForm, om: WeylForm) -> tuple[WeylForm, dict]:
    """Degree-by-degree solution of R_bar + partial r - delta r + (1/nu) r o r = Omega."""
    base = FedosovData(grid, cap, gb, rb, om, WeylForm.zero(grid, cap))
    parts: dict[int, WeylForm] = {}
    src = (rb - om).degree_part(2)
    if src.terms:
        parts[3] = delta_F_inv(src)
    for D in range(4, cap + 1):
        rhs = WeylForm.zero(grid, cap)
        if D - 1 in parts:
            rhs = rhs + base.partial(parts[D - 1])
        for D1, p1 in parts.items():
            D2 = D + 1 - D1
            if D2 in parts:
                rhs = rhs + nu_commutator(p1, parts[D2], cap).scale(0.5)
        rhs = rhs.degree_part(D - 1)
        if rhs.terms:
            parts[D] = delta_F_inv(rhs)
    r = WeylForm.zero(grid, cap)
    for p in parts.values():
        r = r + p
    return r, parts


def build_from_connection(grid: Grid, cap: int, gamma: np.ndarray, rho: np.ndarray | None = None,
                          structure: CompatibleStructure | None = None, check: bool = True,
                          tol: float = R_TOL) -> FedosovData:
    gb = gamma_bar(grid, cap, gamma)
    rb = r_bar(grid, cap, curvature_tensor(grid, gamma))
    om = central_two_form(grid, cap, rho) if rho is not None else WeylForm.zero(grid, cap)
    r, _ = solve_r(grid, cap, gb, rb, om)
    fd = FedosovData(grid, cap, gb, rb, om, r, structure)
    if check:
        res = fd.curvature_equation_residual().residual_by_degree()
        fd.residuals = {D: v for D, v in res.items() if D <= cap - 1}
        fd.residuals.setdefault(2, 0.0)
        worst = max(fd.residuals.values(), default=0.0)
        if worst > tol:
            raise FedosovError(f"r-equation residual {worst:.3e} exceeds {tol:.1e}: {fd.residuals}")
    return fd


def build_fedosov(cs: CompatibleStructure, cap: int = DEFAULT_CAP, check: bool = True, tol: float = R_TOL) -> FedosovData:
    """Fedosov data of *_J: symplectic connection nabla^J and Omega = nu rho^J."""
    return build_from_connection(cs.grid, cap, cs.christoffel_sympl, cs.hermitian_ricci, cs, check, tol)


def flat_fedosov(grid: Grid, cap: int = DEFAULT_CAP) -> FedosovData:
    d = grid.d
    return build_from_connection(grid, cap, np.zeros(grid.shape + (d, d, d)))


# ---------------------------------------------------------------- Moyal oracle


def derivative_tensor(grid: Grid, F: np.ndarray, k: int) -> np.ndarray:
    """``[..., i1..ik] = d_{i1}..d_{ik} F`` (geometry layout)."""
    out = np.asarray(F, dtype=float)
    for _ in range(k):
        out = grid.grad(out)
    return out


def moyal_star(grid: Grid, F: np.ndarray, G: np.ndarray, nu_order: int) -> FormalSeries:
    """sum_k nu^k / (2^k k!) Lambda^{i1 j1}..Lambda^{ik jk} d^k_I F d^k_J G."""
    lam = SymplecticData.standard(grid.d).lam
    coeffs = []
    for k in range(nu_order + 1):
        dF = derivative_tensor(grid, F, k)
        dG = derivative_tensor(grid, G, k)
        M = dG
        for _ in range(k):
            # raise the last G index with Lambda and rotate it to the front
            M = np.einsum("ij,...j->...i", lam, M)
            M = np.moveaxis(M, -1, grid.d)
        axes = tuple(range(grid.d, grid.d + k))
        coeffs.append(np.sum(dF * M, axis=axes) / (2.0**k * math.factorial(k)))
    return FormalSeries.from_coefficients(coeffs)


def moyal_mode_coefficients(d: int, p, q, nu_order: int) -> list[complex]:
    """Scalars c_k with e^{ip.x} * e^{iq.x} = sum_k c_k nu^k e^{i(p+q).x} (Moyal)."""
    lam = SymplecticData.standard(d).lam
    z = float(np.asarray(p) @ lam @ np.asarray(q))  # Lambda(ip, iq) = -p.Lambda.q
    return [(-z / 2.0) ** k / math.factorial(k) for k in range(nu_order + 1)]

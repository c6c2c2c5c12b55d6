"""Connection form alpha, curvature element, traces, Omega-tilde and the formal moment maps.

J-directional derivatives all use the exp-conjugation paths of :mod:`dqlab.geometry`
and a central difference with one Richardson step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fedosov import FedosovData, FedosovError, build_fedosov, check_cap
from .fields import Grid, half_lattice, trig_samples
from .formal import FormalSeries
from .geometry import (
    CompatibleStructure,
    commutator_endo,
    exterior_derivative_1form,
    matmul,
    trace_prod,
)
from .weyl import WeylForm, contract_vector, linear_y, nu_commutator, quadratic_y

FD_STEP = 1e-3
NULL_TOL = 1e-9


def richardson(f: Callable[[float], object], h: float = FD_STEP):
    """(4 D(h/2) - D(h)) / 3 with D the central difference; f returns arrays or WeylForms."""
    fp, fm = f(h), f(-h)
    fp2, fm2 = f(h / 2), f(-h / 2)
    if isinstance(fp, WeylForm):
        d1 = (fp - fm).scale(1.0 / (2 * h))
        d2 = (fp2 - fm2).scale(1.0 / h)
        return (d2.scale(4.0) - d1).scale(1.0 / 3.0)
    d1 = (fp - fm) / (2 * h)
    d2 = (fp2 - fm2) / h
    return (4.0 * d2 - d1) / 3.0


def central_one_form(grid: Grid, cap: int, beta: np.ndarray, nu_power: int = 1) -> WeylForm:
    out = WeylForm.zero(grid, cap)
    for j in range(grid.d):
        out = out + WeylForm.monomial(grid, cap, nu_power, (0,) * grid.d, 1 << j, beta[..., j])
    return out


class FedosovCache:
    """Memoised Fedosov builds keyed by the bytes of J (FD stencils revisit structures)."""

    def __init__(self, cap: int, maxsize: int = 64):
        self.cap = cap
        self.maxsize = maxsize
        self._store: dict = {}

    def __call__(self, cs: CompatibleStructure) -> FedosovData:
        key = cs.J.tobytes()
        fd = self._store.get(key)
        if fd is None:
            fd = build_fedosov(cs, self.cap)
            if len(self._store) >= self.maxsize:
                self._store.pop(next(iter(self._store)))
            self._store[key] = fd
        return fd


# ---------------------------------------------------------------- alpha and curvature


def alpha_source(cs: CompatibleStructure, A: np.ndarray, builder: Callable, h: float = FD_STEP,
                 path: Callable | None = None) -> WeylForm:
    """``d/dt Gamma_bar + d/dt r + (nu/2) delta^J A^b`` along a path with derivative A."""
    if path is None:
        path = lambda t: cs.moved(A, t)

    def piece(t):
        fd = builder(path(t))
        return fd.gamma_bar + fd.r

    fd0 = builder(cs)
    src = richardson(piece, h)
    return src + central_one_form(cs.grid, fd0.cap, 0.5 * cs.delta_endo(A))


def alpha(cs: CompatibleStructure, A: np.ndarray, cap: int = 8, h: float = FD_STEP,
          builder: Callable | None = None, path: Callable | None = None, tol: float = 1e-5) -> WeylForm:
    """Connection 1-form ``alpha_J(A) = (D^J)^{-1}(...)``; checks D-closedness of the source."""
    builder = builder or FedosovCache(cap)
    if not np.any(A):
        return WeylForm.zero(cs.grid, cap)
    fd = builder(cs)
    src = alpha_source(cs, A, builder, h, path)
    return fd.D_inverse(src, tol=tol)


def alpha_closedness(cs: CompatibleStructure, A: np.ndarray, cap: int = 8, h: float = FD_STEP,
                     builder: Callable | None = None) -> float:
    builder = builder or FedosovCache(cap)
    fd = builder(cs)
    src = alpha_source(cs, A, builder, h)
    return fd.D_apply(src).max_abs(fd.cap - 1)


@dataclass(eq=False)
class CurvatureElement:
    value: WeylForm
    structure: CompatibleStructure
    A: np.ndarray
    B: np.ndarray
    alpha_A: WeylForm
    alpha_B: WeylForm
    parts: dict = field(default_factory=dict)

    def y0(self, order: int) -> list[np.ndarray]:
        return self.value.y0_coefficients(0, order)


def hat_derivative_of_alpha(cs: CompatibleStructure, p: np.ndarray, q: np.ndarray, builder: Callable,
                            h: float = FD_STEP) -> WeylForm:
    """``p_hat(alpha(q_hat))`` at J: d/dt alpha_{J_t}([q, J_t]) with J_t = exp(tp) J exp(-tp)."""

    def inner(t):
        Jt = cs.conjugated(p, t)
        Bt = commutator_endo(q, Jt.J)
        return alpha(Jt, Bt, builder.cap, h, builder, path=lambda s: Jt.conjugated(q, s))

    return richardson(inner, h)


def curvature_element(cs: CompatibleStructure, A: np.ndarray, B: np.ndarray, cap: int = 8,
                      h: float = FD_STEP, builder: Callable | None = None) -> CurvatureElement:
    """``R_J(A,B) = (nu/4)Tr(JAB) + a_hat(alpha(b_hat)) - b_hat(alpha(a_hat)) + (1/nu)[alpha(A), alpha(B)]``."""
    builder = builder or FedosovCache(cap)
    grid = cs.grid
    a = 0.5 * matmul(cs.J, A)
    b = 0.5 * matmul(cs.J, B)
    aA = alpha(cs, A, cap, h, builder)
    aB = alpha(cs, B, cap, h, builder)
    ab = hat_derivative_of_alpha(cs, a, b, builder, h)
    ba = hat_derivative_of_alpha(cs, b, a, builder, h)
    tr = WeylForm.monomial(grid, cap, 1, (0,) * grid.d, 0, 0.25 * trace_prod(cs.J, A, B))
    comm = nu_commutator(aA, aB, cap)
    value = tr + (ab - ba) + comm
    return CurvatureElement(value, cs, A, B, aA, aB, {"trace": tr, "d_alpha": ab - ba, "bracket": comm})


# ---------------------------------------------------------------- trace density


@dataclass(eq=False)
class TraceDensity:
    density: FormalSeries
    constant_ambiguity: tuple
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, k):
        return self.density[k]

    @property
    def order(self) -> int:
        return self.density.truncation_order


def fourier_basis(grid: Grid, kmax: int) -> tuple[np.ndarray, list]:
    """Real mean-zero modes cos(q.x), sin(q.x) for q in the half lattice, |q|_inf <= kmax."""
    x = np.stack(grid.coords, axis=-1)
    modes = half_lattice(grid.d, kmax)
    funcs = []
    labels = []
    for q in modes:
        ph = x @ np.asarray(q, dtype=float)
        funcs.append(np.cos(ph))
        funcs.append(np.sin(ph))
        labels.extend([("cos", q), ("sin", q)])
    return np.stack(funcs), labels


def _batch_take(w: WeylForm, idx) -> WeylForm:
    return w.copy_with({k: v[:, idx] for k, v in w.terms.items()})


def commutator_coefficients(fd: FedosovData, fields: np.ndarray, nu_order: int, pairs=None) -> tuple[list, np.ndarray]:
    """nu-coefficients (1..nu_order) of F_i * F_j - F_j * F_i for pairs i < j of a batch of fields."""
    check_cap(fd.cap, nu_order)
    QF = fd.Q(fields)  # batch axis 1 in coefficient arrays
    n = fields.shape[0]
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    by_i: dict[int, list[int]] = {}
    for i, j in pairs:
        by_i.setdefault(i, []).append(j)
    out = []
    order = []
    for i, js in by_i.items():
        qi = _batch_take(QF, i)
        qj = _batch_take(QF, np.array(js))
        prod = qi.product(qj, cap=2 * nu_order, mode="odd", y0=True).scale(2.0)
        coeffs = prod.y0_coefficients(0, nu_order)
        coeffs = [np.broadcast_to(c, (len(js),) + fd.grid.shape) for c in coeffs]
        for t, j in enumerate(js):
            out.append([c[t] for c in coeffs])
            order.append((i, j))
    return order, np.array(out)  # (npairs, nu_order+1, *grid)


def trace_density(fd: FedosovData, nu_order: int = 2, max_freq: int | None = None, n_fields: int | None = None,
                  seed: int = 0, holdout: int = 20, holdout_freq: int = 2, cond_limit: float = 1e8,
                  max_attempts: int = 3) -> TraceDensity:
    """Order-by-order least-squares solve of int (F*G - G*F) rho = 0 on random pairs."""
    grid = fd.grid
    m = grid.d // 2
    if max_freq is None:
        max_freq = min(4 if grid.d == 2 else 1, grid.n // 4, (grid.n // 2 - 1) // 2)
    kmax = 2 * max_freq
    if kmax > grid.n // 2 - 1:
        raise ValueError("density bandwidth exceeds the grid")
    basis_f, labels = fourier_basis(grid, kmax)
    nunk = basis_f.shape[0]
    if n_fields is None:
        n_fields = int(math.ceil((1 + math.sqrt(1 + 8 * 1.5 * nunk)) / 2))
    rng = np.random.default_rng(seed)
    for attempt in range(max_attempts):
        fields = np.stack([trig_samples(grid, rng, max_freq) for _ in range(n_fields)])
        _, C = commutator_coefficients(fd, fields, nu_order + 1)
        # M[p, j] = int C_1^{(p)} phi_j
        M = C[:, 1].reshape(C.shape[0], -1) @ basis_f.reshape(nunk, -1).T * (grid.volume / grid.size)
        sv = np.linalg.svd(M, compute_uv=False)
        keep = sv > sv[0] * NULL_TOL
        cond = sv[0] / sv[keep][-1]
        if cond <= cond_limit and nunk - keep.sum() <= _structural_nullity(grid.d):
            break
        n_fields = int(n_fields * 1.5) + 1
    else:
        raise FedosovError(f"trace-density system ill-conditioned (cond {cond:.2e}, rank {keep.sum()}/{nunk})")
    rho = [np.ones(grid.shape)]
    for k in range(1, nu_order + 1):
        rhs = np.zeros(C.shape[0])
        for l in range(2, k + 2):
            rhs -= grid.integrate(C[:, l] * rho[k + 1 - l], first=False)
        coef, *_ = np.linalg.lstsq(M, rhs, rcond=NULL_TOL)
        rho.append(np.tensordot(coef, basis_f, axes=1))
    td = TraceDensity(FormalSeries.from_coefficients(rho), tuple([False] + [True] * nu_order),
                      {"cond": float(cond), "n_pairs": int(C.shape[0]), "n_unknowns": int(nunk),
                       "rank": int(keep.sum()), "max_freq": max_freq, "fields": n_fields})
    if holdout:
        hf = np.stack([trig_samples(grid, rng, holdout_freq) for _ in range(2 * holdout)])
        td.diagnostics["holdout_defect"] = trace_defects(fd, td, hf[::2], hf[1::2])
    return td


def _structural_nullity(d: int) -> int:
    """Unreachable density modes: in d=2 the corners q = 2p, |p|_inf = K, only arise from {e_p, e_p} = 0."""
    return 4 if d == 2 else 0


def trace_defects(fd: FedosovData, td: TraceDensity, Fs: np.ndarray, Gs: np.ndarray) -> list[float]:
    """max over pairs of |tr(F*G - G*F)| / (|F|_inf |G|_inf), per nu-order 1..order."""
    grid = fd.grid
    nu_order = td.order
    both = np.concatenate([Fs, Gs])
    n = Fs.shape[0]
    pairs = [(i, n + i) for i in range(n)]
    _, C = commutator_coefficients(fd, both, nu_order + 1, pairs)
    norms = np.max(np.abs(Fs), axis=tuple(range(1, Fs.ndim))) * np.max(np.abs(Gs), axis=tuple(range(1, Gs.ndim)))
    out = []
    for k in range(0, nu_order + 1):
        acc = np.zeros(C.shape[0])
        for l in range(1, k + 2):
            acc += grid.integrate(C[:, l] * td.density[k + 1 - l], first=False)
        out.append(float(np.max(np.abs(acc) / norms)))
    return out[1:] if nu_order >= 1 else out


def flat_density(grid: Grid, nu_order: int) -> TraceDensity:
    ones = [np.ones(grid.shape)] + [np.zeros(grid.shape)] * nu_order
    return TraceDensity(FormalSeries.from_coefficients(ones), tuple([False] + [True] * nu_order))


def trace(grid: Grid, F, td: TraceDensity) -> FormalSeries:
    """``tr(F) = (2 pi nu)^{-m} int F rho``; F an array or a FormalSeries of arrays."""
    m = grid.d // 2
    if not isinstance(F, FormalSeries):
        F = FormalSeries.constant(np.asarray(F, dtype=float), td.order)
    prod = F * td.density
    pref = (2 * math.pi) ** (-m)
    coeffs = tuple(pref * float(grid.integrate(c)) for c in prod.coefficients)
    return FormalSeries(prod.lowest_power - m, coeffs, prod.truncation_order - m)


# ---------------------------------------------------------------- symplectic forms and moment maps


def omega_classical(cs: CompatibleStructure, A: np.ndarray, B: np.ndarray) -> float:
    return float(cs.grid.integrate(trace_prod(cs.J, A, B)))


def omega_tilde_from(ce: CurvatureElement, td: TraceDensity, nu_order: int) -> FormalSeries:
    """``4 (2pi)^m nu^{m-1} tr(R|_{y=0}) = (4/nu) int R|_{y=0} rho``, coefficients nu^0..nu_order."""
    grid = ce.structure.grid
    R = ce.y0(nu_order + 1)
    coeffs = []
    for j in range(nu_order + 1):
        acc = 0.0
        for k in range(1, j + 2):
            acc += float(grid.integrate(R[k] * td.density[j + 1 - k]))
        coeffs.append(4.0 * acc)
    return FormalSeries.from_coefficients(coeffs)


def omega_tilde(cs: CompatibleStructure, A, B, nu_order: int = 1, cap: int = 8, td: TraceDensity | None = None,
                builder: Callable | None = None, h: float = FD_STEP) -> FormalSeries:
    builder = builder or FedosovCache(cap)
    if td is None:
        td = trace_density(builder(cs), nu_order, holdout=0)
    ce = curvature_element(cs, A, B, cap, h, builder)
    return omega_tilde_from(ce, td, nu_order)


def _check_zero_mean(grid: Grid, H: np.ndarray, tol: float = 1e-10):
    if abs(float(grid.integrate(H))) > tol * max(1.0, float(np.max(np.abs(H)))) * grid.volume:
        raise ValueError("H must have zero mean (normalised Hamiltonian)")


def mu(cs: CompatibleStructure, H: np.ndarray, td: TraceDensity) -> FormalSeries:
    """``4 (2pi)^m nu^{m-1} tr(H)``; coefficients from nu^{-1}."""
    _check_zero_mean(cs.grid, H)
    t = trace(cs.grid, H, td)
    return t.shift(cs.m - 1).scale(4 * (2 * math.pi) ** cs.m)


def mu_tilde(cs: CompatibleStructure, H: np.ndarray, td: TraceDensity) -> FormalSeries:
    """``4 (2pi)^m nu^{m-1} tr(H - (nu/2) Delta^J H)``."""
    _check_zero_mean(cs.grid, H)
    order = td.order
    lap = cs.laplacian(H)
    F = FormalSeries(0, (H, -0.5 * lap) + (np.zeros_like(H),) * (order - 1), order)
    t = trace(cs.grid, F, td)
    return t.shift(cs.m - 1).scale(4 * (2 * math.pi) ** cs.m)


def mu_classical(cs: CompatibleStructure, H: np.ndarray) -> float:
    """Donaldson-Fujiki value ``-int H S^J``."""
    return -float(cs.grid.integrate(H * cs.hermitian_scalar))


@dataclass
class MomentResidual:
    lhs: list
    rhs: list
    residual: list
    scale: list


def moment_residual(cs: CompatibleStructure, H: np.ndarray, A: np.ndarray, order: int = 1, cap: int = 8,
                    h: float = FD_STEP, tilde: bool = True, density_kw: dict | None = None,
                    builder: Callable | None = None) -> MomentResidual:
    """Per-order |d/dt mu(~)(H)(J_t) + Omega_tilde(L_{X_H}J, A)| (nu^0 .. nu^order)."""
    builder = builder or FedosovCache(cap)
    kw = dict(holdout=0)
    kw.update(density_kw or {})
    nu_order = order + 1
    mapfn = mu_tilde if tilde else mu

    def val(t):
        c = cs.moved(A, t)
        td = trace_density(builder(c), nu_order, **kw)
        s = mapfn(c, H, td)
        return np.array([s[k] for k in range(0, order + 1)])

    lhs = richardson(val, h)
    td0 = trace_density(builder(cs), nu_order, **kw)
    LJ = cs.lie_derivative_J(H)
    ce = curvature_element(cs, LJ, A, cap, h, builder)
    om = omega_tilde_from(ce, td0, order)
    rhs = np.array([-om[k] for k in range(order + 1)])
    res = np.abs(lhs - rhs)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return MomentResidual(list(lhs), list(rhs), list(res), list(scale))


def df_order0(cs: CompatibleStructure, H: np.ndarray, A: np.ndarray, h: float = FD_STEP) -> tuple[float, float]:
    """(d/dt -int H S^{J_t}, Omega^J(L_{X_H}J, A)) along the retraction with derivative A."""
    lhs = float(richardson(lambda t: mu_classical(cs.moved(A, t), H), h))
    rhs = omega_classical(cs, cs.lie_derivative_J(H), A)
    return lhs, rhs


def moment_order0(cs: CompatibleStructure, H: np.ndarray, A: np.ndarray, h: float = FD_STEP) -> tuple[float, float]:
    """nu^0 moment equation with the computed normalisation mu^0 = -2 int H S: (d/dt mu^0, -Omega^J(L_{X_H}J, A))."""
    lhs = 2.0 * float(richardson(lambda t: mu_classical(cs.moved(A, t), H), h))
    rhs = -omega_classical(cs, cs.lie_derivative_J(H), A)
    return lhs, rhs


# ---------------------------------------------------------------- Q(H) oracle


def exact_laplacian_form(cs: CompatibleStructure, H: np.ndarray) -> np.ndarray:
    """``iota(X_H) rho^J + 1/2 (delta^J L_{X_H}J)^b``."""
    X = cs.hamiltonian_field(H)
    return np.einsum("...a,...ab->...b", X, cs.hermitian_ricci) + 0.5 * cs.delta_endo(cs.lie_derivative_J(H))


def q_hamiltonian_oracle(cs: CompatibleStructure, H: np.ndarray, cap: int = 8, kahler: bool = False,
                         h: float = FD_STEP, builder: Callable | None = None, closed_tol: float = 1e-6) -> WeylForm:
    builder = builder or FedosovCache(cap)
    fd = builder(cs)
    grid = cs.grid
    X = cs.hamiltonian_field(H)
    dH = grid.grad(H)
    ddH = grid.grad(dH) - np.einsum("...pkq,...p->...kq", cs.christoffel_sympl, dH)
    out = WeylForm.function(grid, cap, H)
    out = out - linear_y(grid, cap, np.einsum("ij,...j->...i", cs.sd.omega, X))
    out = out + quadratic_y(grid, cap, 0.5 * ddH)
    out = out - contract_vector(fd.r, X)
    LJ = cs.lie_derivative_J(H)
    out = out + alpha(cs, LJ, cap, h, builder)
    if kahler:
        lap = cs.laplacian(H)
        out = out + WeylForm.monomial(grid, cap, 1, (0,) * grid.d, 0, -0.5 * lap)
        return out
    beta = exact_laplacian_form(cs, H)
    closed = float(np.max(np.abs(exterior_derivative_1form(grid, beta))))
    if closed > closed_tol * max(1.0, float(np.max(np.abs(beta)))):
        raise FedosovError(f"iota(X_H)rho + 1/2 (delta L J)^b not closed: {closed:.3e}")
    corr = fd.D_inverse(central_one_form(grid, cap, beta, nu_power=0), tol=1e-6)
    return out - corr.nu_shift(1)


def trace_variation(cs: CompatibleStructure, F: np.ndarray, A: np.ndarray, nu_order: int = 2, cap: int = 8,
                    h: float = FD_STEP, builder: Callable | None = None, density_kw: dict | None = None):
    """(d/dt int F rho^{J_t}, int ((1/nu)[alpha(A), Q(F)])|_{y=0} rho) per nu-order 0..nu_order.

    The (2 pi nu)^{-m} prefactor is common to both sides and dropped. F must have zero mean
    so that the free density constants do not enter.
    """
    builder = builder or FedosovCache(cap)
    _check_zero_mean(cs.grid, F)
    kw = dict(holdout=0)
    kw.update(density_kw or {})
    grid = cs.grid

    def val(t):
        td = trace_density(builder(cs.moved(A, t)), nu_order, **kw)
        return np.array([float(grid.integrate(F * td[k])) for k in range(nu_order + 1)])

    lhs = richardson(val, h)
    fd = builder(cs)
    td = trace_density(fd, nu_order, **kw)
    a = alpha(cs, A, cap, h, builder)
    br = nu_commutator(a, fd.Q(F), cap, y0=True).y0_coefficients(0, nu_order)
    rhs = np.array([sum(float(grid.integrate(br[l] * td[k - l])) for l in range(k + 1)) for k in range(nu_order + 1)])
    return lhs, rhs

"""Registry of named numerical checks and the machinery to run them into a JSON report."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import moment as mm
from .fedosov import build_fedosov, check_cap, flat_fedosov, moyal_star
from .fields import Grid, trig_samples
from .geometry import (
    SymplecticData,
    commutator_endo,
    covariant_derivative,
    exterior_derivative_1form,
    make_structure,
    matmul,
    random_tangent,
    trace_prod,
)
from .weyl import WeylForm, nbasis

REPORT_VERSION = 1


@dataclass(frozen=True)
class CheckConfig:
    dim: int = 2
    grid_n: int = 32
    eps: float = 0.3
    seed: int = 0
    nu_order: int = 2
    weyl_degree_cap: int = 8
    fd_step: float = 1e-3
    n_pairs: int = 5

    def __post_init__(self):
        if self.dim not in (2, 4):
            raise ValueError("dim must be 2 or 4")
        if self.grid_n % 2 or self.grid_n < 8:
            raise ValueError("grid_n must be even and >= 8")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        check_cap(self.weyl_degree_cap, self.nu_order)

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.grid_n)

    @property
    def max_freq(self) -> int:
        return 2 if self.dim == 2 else 1

    def structure(self, eps: float | None = None):
        e = self.eps if eps is None else eps
        kind = "kahler2d" if self.dim == 2 else "perturbed4d"
        return make_structure(self.grid, kind, e, seed=self.seed)

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def field(self, salt: int, max_freq: int | None = None) -> np.ndarray:
        return trig_samples(self.grid, self.rng(salt), max_freq or self.max_freq)

    def tangent(self, cs, salt: int) -> np.ndarray:
        return random_tangent(cs, int(self.rng(salt).integers(2**31)), self.max_freq)


@dataclass
class CheckResult:
    name: str
    paper_anchor: str
    residual: float
    tolerance: float
    passed: bool
    runtime_ms: float
    config_echo: dict
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    tolerance: float
    dims: tuple
    fn: Callable[[CheckConfig], tuple[float, dict]]


REGISTRY: dict[str, Check] = {}


def register(name: str, anchor: str, tolerance: float, dims=(2, 4)):
    def deco(fn):
        REGISTRY[name] = Check(name, anchor, tolerance, tuple(dims), fn)
        return fn

    return deco


def _max(a) -> float:
    return float(np.max(np.abs(a)))


def _rel(lhs, rhs) -> float:
    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale if scale > 0 else abs(lhs - rhs)


def _fd(cfg: CheckConfig, f):
    return mm.richardson(f, cfg.fd_step)


# ---------------------------------------------------------------- geometry


@register("connection_invariants", "nabla^g g = 0, nabla^J omega = 0, nabla-bar g = 0, nabla-bar J = 0", 1e-9)
def _connection_invariants(cfg):
    cs = cfg.structure()
    g = cs.grid
    res = {
        "lc_metric": _max(covariant_derivative(g, cs.g, cs.christoffel_lc, "ll")),
        "sympl_omega": _max(covariant_derivative(g, np.array(cs.omega), cs.christoffel_sympl, "ll")),
        "chern_metric": _max(covariant_derivative(g, cs.g, cs.christoffel_chern, "ll")),
        "chern_J": _max(covariant_derivative(g, cs.J, cs.christoffel_chern, "ul")),
    }
    return max(res.values()), res


@register("ricci_equals_ric", "rho^J = ric on a Kahler surface", 1e-7, dims=(2,))
def _ricci_equals_ric(cfg):
    cs = cfg.structure()
    return _max(cs.hermitian_ricci - cs.ricci_form), {}


@register("scalar_formulas", "rho^J wedge omega^{m-1}/(m-1)! = 1/2 S^J omega^m/m!, S^J = -Lambda^{ql} rho_ql", 1e-8)
def _scalar_formulas(cfg):
    cs = cfg.structure()
    return _max(cs.hermitian_scalar - cs.hermitian_scalar_wedge()), {"max_S": _max(cs.hermitian_scalar)}


@register("frame_independence", "rho^J independent of the unitary frame", 1e-7)
def _frame_independence(cfg):
    cs = cfg.structure()
    alt = (1,) if cfg.dim == 2 else (1, 3)
    return _max(np.real(cs.hermitian_ricci_complex(alt)) - cs.hermitian_ricci), {
        "imag_part": cs.hermitian_ricci_imag_residual()
    }


@register("first_variation", "g(d/dt nabla^g_X Y, Z) = 1/2 [(nabla_X a)(Y,Z) + (nabla_Y a)(X,Z) - (nabla_Z a)(X,Y)]", 1e-6)
def _first_variation(cfg):
    cs = cfg.structure()
    worst = []
    for p in range(cfg.n_pairs):
        A = cfg.tangent(cs, 100 + p)
        G = lambda s: np.einsum("...kl,...kij->...ijl", cs.g, cs.moved(A, s).christoffel_lc)
        worst.append(_max(_fd(cfg, G) - cs.first_variation_levi_civita(A)))
    return max(worst), {"per_pair": worst}


@register("cor_variation", "d/dt rho^{J_t} = -1/2 d(delta^J A)^b, d/dt S^{J_t} = 1/2 Lambda (d delta^J A^b)", 1e-5)
def _cor_variation(cfg):
    cs = cfg.structure()
    worst = []
    for p in range(cfg.n_pairs):
        A = cfg.tangent(cs, 200 + p)
        dr, dS = cs.variation_hermitian_ricci(A)
        er = _max(_fd(cfg, lambda s: cs.moved(A, s).hermitian_ricci) - dr)
        eS = _max(_fd(cfg, lambda s: cs.moved(A, s).hermitian_scalar) - dS)
        worst.append(max(er, eS))
    return max(worst), {"per_pair": worst}


@register("equivariance_ricci", "d iota(X_H) rho^J = d/dt rho^{J_t}, J_t' = L_{X_H}J", 1e-6)
def _equivariance_ricci(cfg):
    cs = cfg.structure()
    H = cfg.field(1)
    X = cs.hamiltonian_field(H)
    ixr = np.einsum("...a,...ab->...b", X, cs.hermitian_ricci)
    var, _ = cs.variation_hermitian_ricci(cs.lie_derivative_J(H))
    return _max(var - exterior_derivative_1form(cs.grid, ixr)), {}


def _formula_sides(cfg, cs, p):
    A = cfg.tangent(cs, 300 + p)
    H = cfg.field(310 + p)
    X = cs.hamiltonian_field(H)
    lhs = float(cs.grid.integrate(np.einsum("...a,...a->...", cs.delta_endo(A), X)))
    rhs = float(cs.grid.integrate(trace_prod(cs.J, A, cs.lie_derivative_J(H))))
    return lhs, rhs


@register("lemma_formula", "int (delta^J A)^b(X_H) = int Tr(JA L_{X_H}J)", 1e-6)
def _lemma_formula(cfg):
    cs = cfg.structure()
    pairs = [_formula_sides(cfg, cs, p) for p in range(cfg.n_pairs)]
    return max(_rel(l, r) for l, r in pairs), {"sides": pairs}


@register("lemma_formula_half", "int (delta^J A)^b(X_H) = 1/2 int Tr(JA L_{X_H}J)", 1e-6)
def _lemma_formula_half(cfg):
    cs = cfg.structure()
    pairs = [_formula_sides(cfg, cs, p) for p in range(cfg.n_pairs)]
    return max(_rel(l, 0.5 * r) for l, r in pairs), {"sides": pairs}


@register("lemma_exact_laplacian", "iota(X_H) rho^J + 1/2 (delta^J L_{X_H}J)^b = d(1/2 Delta^J H)", 1e-5, dims=(2,))
def _lemma_exact_laplacian(cfg):
    cs = cfg.structure()
    H = cfg.field(2)
    lhs = mm.exact_laplacian_form(cs, H)
    rhs = cs.grid.grad(0.5 * cs.laplacian(H))
    return _max(lhs - rhs), {"scale": _max(rhs)}


@register("lemma_ddto_laplacian", "d/dt Delta^{J_t} H = (delta^J A)^b(X_H) - 1/2 Tr(JA L_{X_H}J)", 1e-5, dims=(2,))
def _lemma_ddto_laplacian(cfg):
    cs = cfg.structure()
    worst = []
    for p in range(cfg.n_pairs):
        A = cfg.tangent(cs, 400 + p)
        H = cfg.field(410 + p)
        X = cs.hamiltonian_field(H)
        lhs = _fd(cfg, lambda s: cs.moved(A, s).laplacian(H))
        beta = np.einsum("...a,...a->...", cs.delta_endo(A), X)
        T = trace_prod(cs.J, A, cs.lie_derivative_J(H))
        worst.append(_max(lhs - (beta - 0.5 * T)))
    return max(worst), {"per_pair": worst}


@register("lemma_delta", "a-hat(delta^J B) - b-hat(delta^J A) = -1/2 d Tr(JAB)", 1e-4)
def _lemma_delta(cfg):
    cs = cfg.structure()
    worst = []
    for p in range(max(1, cfg.n_pairs // 2)):
        A = cfg.tangent(cs, 500 + p)
        B = cfg.tangent(cs, 510 + p)
        a = 0.5 * matmul(cs.J, A)
        b = 0.5 * matmul(cs.J, B)

        def hat(p_, q_):
            return _fd(cfg, lambda t: (lambda c: c.delta_endo(commutator_endo(q_, c.J)))(cs.conjugated(p_, t)))

        lhs = hat(a, b) - hat(b, a)
        rhs = -0.5 * cs.grid.grad(trace_prod(cs.J, A, B))
        worst.append(_max(lhs - rhs))
    return max(worst), {"per_pair": worst}


# ---------------------------------------------------------------- Fedosov


def _fedosov(cfg):
    return build_fedosov(cfg.structure(), cfg.weyl_degree_cap)


@register("moyal_oracle", "flat connection, Omega = 0: Fedosov star = Moyal star", 1e-10, dims=(2,))
def _moyal_oracle(cfg):
    order = 3
    cap = max(cfg.weyl_degree_cap, 2 * order + 2)
    g = cfg.grid
    F, G = cfg.field(3), cfg.field(4)
    fd = flat_fedosov(g, cap)
    s = fd.star(F, G, order)
    m = moyal_star(g, F, G, order)
    per = [_max(s[k] - m[k]) for k in range(order + 1)]
    return max(per), {"per_order": per}


@register("fedosov_r_equation", "R-bar + partial r - delta r + (1/nu) r o r = nu rho^J", 1e-9, dims=(2,))
def _fedosov_r(cfg):
    fd = _fedosov(cfg)
    res = fd.curvature_equation_residual().residual_by_degree()
    res = {D: v for D, v in res.items() if D <= fd.cap - 1}
    return max(res.values(), default=0.0), {"per_degree": res}


@register("fedosov_d_squared", "D^2 = 0", 1e-8, dims=(2,))
def _fedosov_d2(cfg):
    fd = _fedosov(cfg)
    g = cfg.grid
    rng = cfg.rng(5)
    terms = {(0, D): rng.normal(size=(nbasis(g.d, D),) + (1,) * g.d) * cfg.field(50 + D) for D in range(1, fd.cap - 1)}
    a = WeylForm(g, fd.cap, terms)
    res = fd.D_apply(fd.D_apply(a)).residual_by_degree()
    res = {D: v for D, v in res.items() if D <= fd.cap - 2}
    return max(res.values(), default=0.0), {"per_degree": res}


@register("fedosov_dq", "D Q(F) = 0", 1e-8, dims=(2,))
def _fedosov_dq(cfg):
    fd = _fedosov(cfg)
    res = fd.D_apply(fd.Q(cfg.field(6))).residual_by_degree()
    res = {D: v for D, v in res.items() if D <= fd.cap - 1}
    return max(res.values(), default=0.0), {"per_degree": res}


@register("fedosov_sigma_q", "sigma(Q(F)) = F (y = 0 part)", 0.0, dims=(2,))
def _fedosov_sigma(cfg):
    fd = _fedosov(cfg)
    F = cfg.field(7)
    Q = fd.Q(F)
    c = Q.y0_coefficients(0, fd.cap // 2)
    return max(_max(c[0] - F), max(_max(x) for x in c[1:])), {}


@register("star_associativity", "(F*G)*H = F*(G*H)", 1e-7, dims=(2,))
def _star_assoc(cfg):
    fd = _fedosov(cfg)
    order = min(cfg.nu_order, (fd.cap - 2) // 2)
    F, G, H = cfg.field(8), cfg.field(9), cfg.field(10)
    FG = fd.star(F, G, order)
    GH = fd.star(G, H, order)
    left = fd.star(list(FG.coefficients), H, order)
    right = fd.star(F, list(GH.coefficients), order)
    per = [_max(left[k] - right[k]) for k in range(order + 1)]
    return max(per), {"per_order": per}


@register("star_poisson", "F*G - G*F = nu {F,G} + O(nu^2)", 1e-8, dims=(2,))
def _star_poisson(cfg):
    fd = _fedosov(cfg)
    g = cfg.grid
    F, G = cfg.field(11), cfg.field(12)
    c = fd.star_commutator(F, G, 1)
    lam = SymplecticData.standard(g.d).lam
    pb = np.einsum("ij,...i,...j->...", lam, g.grad(F), g.grad(G))
    return max(_max(c[0]), _max(c[1] - pb)), {}


@register("q_hamiltonian", "Q(H) = H - omega_ij y^i X^j + 1/2 (nabla^2 H) yy - iota(X)r + alpha(L_X J) - nu D^{-1}(...)",
          1e-6, dims=(2,))
def _q_hamiltonian(cfg):
    cs = cfg.structure()
    b = mm.FedosovCache(cfg.weyl_degree_cap)
    H = cfg.field(13)
    q = mm.q_hamiltonian_oracle(cs, H, cfg.weyl_degree_cap, h=cfg.fd_step, builder=b)
    res = (q - b(cs).Q(H)).residual_by_degree()
    return max(res.values(), default=0.0), {"per_degree": res}


# ---------------------------------------------------------------- curvature element


def _curvature_pairs(cfg, salt):
    cs = cfg.structure()
    b = mm.FedosovCache(cfg.weyl_degree_cap, maxsize=256)
    out = []
    for p in range(min(cfg.n_pairs, 3)):
        A = cfg.tangent(cs, salt + p)
        B = cfg.tangent(cs, salt + 50 + p)
        out.append((A, B, mm.curvature_element(cs, A, B, cfg.weyl_degree_cap, cfg.fd_step, b)))
    return cs, b, out


@register("r_leading", "R_J(A,B) at y = 0 equals (nu/4) Tr(JAB) + O(nu^2)", 1e-5, dims=(2,))
def _r_leading(cfg):
    cs, _, pairs = _curvature_pairs(cfg, 600)
    worst = []
    for A, B, ce in pairs:
        y = ce.y0(1)
        tr = 0.25 * trace_prod(cs.J, A, B)
        worst.append(max(_max(y[0]), _max(y[1] - tr)) / _max(tr))
    return max(worst), {"per_pair": worst}


@register("curvature_flat", "D R_J(A,B) = 0", 1e-6, dims=(2,))
def _curvature_flat(cfg):
    cs, b, pairs = _curvature_pairs(cfg, 600)
    fd = b(cs)
    worst = []
    per = []
    for _, _, ce in pairs:
        res = fd.D_apply(ce.value).residual_by_degree()
        res = {D: v for D, v in res.items() if D <= fd.cap - 2}
        per.append(res)
        worst.append(max(res.values(), default=0.0))
    return max(worst), {"per_degree": per}


@register("curvature_antisymmetry", "R_J(A,B) = -R_J(B,A)", 1e-9, dims=(2,))
def _curvature_antisym(cfg):
    cs, b, pairs = _curvature_pairs(cfg, 700)
    worst = []
    for A, B, ce in pairs[:1]:
        ce2 = mm.curvature_element(cs, B, A, cfg.weyl_degree_cap, cfg.fd_step, b)
        worst.append((ce.value + ce2.value).max_abs())
    return max(worst), {}


# ---------------------------------------------------------------- trace and moment maps


def _density(cfg, cs=None, builder=None, **kw):
    cs = cs or cfg.structure()
    fd = (builder or mm.FedosovCache(cfg.weyl_degree_cap))(cs)
    return mm.trace_density(fd, cfg.nu_order, seed=cfg.seed, **kw)


def _nonconstant(a):
    return a - a.mean()


@register("trace_holdout", "tr(F*G - G*F) = 0 on held-out pairs", 1e-7, dims=(2,))
def _trace_holdout(cfg):
    td = _density(cfg)
    defects = td.diagnostics["holdout_defect"]
    return max(defects), {"per_order": defects, "solver": {k: v for k, v in td.diagnostics.items() if k != "holdout_defect"}}


def _density_order1(cfg, c):
    cs = cfg.structure()
    td = _density(cfg, cs, holdout=0)
    target = _nonconstant(c * cs.hermitian_scalar)
    return _max(_nonconstant(td[1]) - target) / _max(target), {"constant_set_to_zero": True}


@register("density_order1", "rho_1 = -S^J/4 + const", 1e-5, dims=(2,))
def _density_order1_quarter(cfg):
    return _density_order1(cfg, -0.25)


@register("density_order1_half", "rho_1 = -S^J/2 + const", 1e-5, dims=(2,))
def _density_order1_half(cfg):
    return _density_order1(cfg, -0.5)


def _mu_sides(cfg):
    cs = cfg.structure()
    td = _density(cfg, cs, holdout=0)
    H = cfg.field(14)
    return cs, td, H, mm.mu(cs, H, td)


@register("mu_order_minus1", "nu^{-1} coefficient of mu(H) vanishes for zero-mean H", 1e-10, dims=(2,))
def _mu_minus1(cfg):
    cs, td, H, m = _mu_sides(cfg)
    return abs(m[-1]) if cs.m == 1 else 0.0, {}


@register("mu_order0", "nu^0 coefficient of mu(H) = -int H S^J", 1e-5, dims=(2,))
def _mu_order0(cfg):
    cs, td, H, m = _mu_sides(cfg)
    ref = mm.mu_classical(cs, H)
    return _rel(m[0], ref), {"mu0": m[0], "minus_int_HS": ref}


@register("mu_order0_double", "nu^0 coefficient of mu(H) = -2 int H S^J", 1e-5, dims=(2,))
def _mu_order0_double(cfg):
    cs, td, H, m = _mu_sides(cfg)
    ref = 2 * mm.mu_classical(cs, H)
    return _rel(m[0], ref), {"mu0": m[0], "minus_2int_HS": ref}


def _df_pairs(cfg, fn):
    cs = cfg.structure()
    pairs = []
    for p in range(min(cfg.n_pairs, 3)):
        A = cfg.tangent(cs, 800 + p)
        H = cfg.field(810 + p)
        pairs.append(fn(cs, H, A, cfg.fd_step))
    return max(_rel(l, r) for l, r in pairs), {"sides": pairs}


@register("df_order0", "d/dt(-int H S^{J_t}) = Omega^J(L_{X_H}J, A)", 1e-4)
def _df_order0(cfg):
    return _df_pairs(cfg, mm.df_order0)


@register("moment_order0", "d/dt(-2 int H S^{J_t}) = -Omega^J(L_{X_H}J, A)", 1e-4)
def _moment_order0(cfg):
    return _df_pairs(cfg, mm.moment_order0)


@register("kahler_order1", "d/dt mu-tilde(H)(J_t) = -Omega-tilde(L_{X_H}J, A), mu-tilde via H - (nu/2) Delta^J H",
          1e-3, dims=(2,))
def _kahler_order1(cfg):
    cs = cfg.structure()
    A = cfg.tangent(cs, 900)
    H = cfg.field(901)
    r = mm.moment_residual(cs, H, A, order=1, cap=cfg.weyl_degree_cap, h=cfg.fd_step, tilde=True,
                           density_kw={"seed": cfg.seed})
    per = [res / s if s > 0 else res for res, s in zip(r.residual, r.scale)]
    return max(per), {"lhs": r.lhs, "rhs": r.rhs, "relative_per_order": per}


@register("trace_variation", "d/dt tr^{J_t}(F) = tr(sigma((1/nu)[alpha(A), Q(F)]))", 1e-6, dims=(2,))
def _trace_variation(cfg):
    cs = cfg.structure()
    A = cfg.tangent(cs, 950)
    F = cfg.field(951)
    lhs, rhs = mm.trace_variation(cs, F, A, cfg.nu_order, cfg.weyl_degree_cap, cfg.fd_step,
                                  density_kw={"seed": cfg.seed})
    scale = max(float(np.max(np.abs(lhs))), 1.0)
    return float(np.max(np.abs(lhs - rhs))) / scale, {"lhs": list(lhs), "rhs": list(rhs)}


def _omega_pairs(cfg):
    cs, b, pairs = _curvature_pairs(cfg, 1000)
    td = _density(cfg, cs, b, holdout=0)
    return cs, b, td, pairs


@register("omega_tilde_order0", "Omega-tilde = Omega^J + O(nu), Omega^J(A,B) = int Tr(JAB)", 1e-5, dims=(2,))
def _omega_tilde_order0(cfg):
    cs, b, td, pairs = _omega_pairs(cfg)
    worst = []
    for A, B, ce in pairs:
        om = mm.omega_tilde_from(ce, td, 1)
        worst.append(_rel(om[0], mm.omega_classical(cs, A, B)))
    return max(worst), {"per_pair": worst}


@register("omega_tilde_antisymmetry", "Omega-tilde(A,B) = -Omega-tilde(B,A) per order", 1e-9, dims=(2,))
def _omega_tilde_antisym(cfg):
    cs, b, td, pairs = _omega_pairs(cfg)
    A, B, ce = pairs[0]
    ce2 = mm.curvature_element(cs, B, A, cfg.weyl_degree_cap, cfg.fd_step, b)
    o1 = mm.omega_tilde_from(ce, td, 1)
    o2 = mm.omega_tilde_from(ce2, td, 1)
    per = [abs(o1[k] + o2[k]) for k in range(2)]
    return max(per), {"per_order": per}


@register("flat_mu_tilde", "flat J_0: mu-tilde(H) = 0", 1e-10, dims=(2,))
def _flat_mu_tilde(cfg):
    c0 = replace(cfg, eps=0.0)
    cs = c0.structure()
    td = _density(c0, cs, holdout=0)
    m = mm.mu_tilde(cs, c0.field(15), td)
    return max(abs(c) for c in m.coefficients), {}


# ---------------------------------------------------------------- running


def check_names(dim: int | None = None) -> list[str]:
    return [n for n, c in REGISTRY.items() if dim is None or dim in c.dims]


def run_check(name: str, config: CheckConfig | None = None) -> CheckResult:
    config = config or CheckConfig()
    if name not in REGISTRY:
        raise KeyError(f"unknown check {name!r}")
    chk = REGISTRY[name]
    if config.dim not in chk.dims:
        raise ValueError(f"check {name!r} supports dims {chk.dims}, got {config.dim}")
    t = time.perf_counter()
    residual, details = chk.fn(config)
    ms = (time.perf_counter() - t) * 1e3
    residual = float(residual)
    return CheckResult(name, chk.anchor, residual, chk.tolerance, bool(residual <= chk.tolerance), ms,
                       asdict(config), _jsonable(details))


def _safe_run(name: str, config: CheckConfig) -> CheckResult:
    t = time.perf_counter()
    try:
        return run_check(name, config)
    except (ValueError, KeyError):
        raise
    except Exception as exc:  # a failing computation is a failed check, not an aborted suite
        chk = REGISTRY[name]
        return CheckResult(name, chk.anchor, float("inf"), chk.tolerance, False, (time.perf_counter() - t) * 1e3,
                           asdict(config), {"error": f"{type(exc).__name__}: {exc}"})


def threads() -> int:
    try:
        return max(1, int(os.environ.get("DQLAB_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(config: CheckConfig | None = None, names: list[str] | None = None,
              parallelism: int | None = None) -> list[CheckResult]:
    config = config or CheckConfig()
    names = check_names(config.dim) if names is None else list(names)
    for n in names:
        if n not in REGISTRY:
            raise KeyError(f"unknown check {n!r}")
    par = parallelism or threads()
    if par <= 1 or len(names) <= 1:
        return [_safe_run(n, config) for n in names]
    with ThreadPoolExecutor(max_workers=par) as ex:
        return list(ex.map(lambda n: _safe_run(n, config), names))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def report(config: CheckConfig, results: list[CheckResult], extra: dict | None = None) -> dict:
    out = {"version": REPORT_VERSION, "config": asdict(config), "results": [asdict(r) for r in results]}
    if extra:
        out["config"].update(extra)
    return _jsonable(out)


def write_report(path: str, rep: dict):
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")

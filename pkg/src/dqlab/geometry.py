"""Compatible almost complex structures on (T^d, omega_std) and their geometry.

Index conventions (geometry layout, grid axes first):

* ``J[..., a, b] = J^a_b`` so that ``(J X)^a = J^a_b X^b``;
* ``g = omega J`` as matrices, i.e. ``g(X, Y) = omega(X, J Y)``;
* Christoffel arrays ``G[..., k, i, j] = Gamma^k_ij`` with ``nabla_{d_i} d_j = Gamma^k_ij d_k``
  (first lower index is the direction, which matters for the Chern connection);
* curvature ``R[..., r, j, k, l] = (R(d_k, d_l) d_j)^r``;
* 2-forms are antisymmetric component arrays ``alpha[..., a, b] = alpha(d_a, d_b)``.

Sign conventions pinned on flat data: ``X_H^a = -Lambda^{ab} d_b H`` (so
``iota(X_H) omega = dH`` and ``{F, G} = Lambda^{ij} d_i F d_j G = X_F G``), and the
Laplacian ``-1/2 Lambda^{ks} (d(dH o J))_ks`` equals ``-sum_i d_i^2 H`` for the
standard structure.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .fields import Grid, trig_samples

_LETTERS = "abcdefgh"


@dataclass(frozen=True, eq=False)
class SymplecticData:
    omega: np.ndarray
    lam: np.ndarray

    @classmethod
    def standard(cls, d: int) -> SymplecticData:
        omega = np.zeros((d, d))
        for i in range(d // 2):
            omega[2 * i, 2 * i + 1] = 1.0
            omega[2 * i + 1, 2 * i] = -1.0
        return cls(omega, np.linalg.inv(omega))


def standard_J(d: int) -> np.ndarray:
    """The constant structure with g_J = identity (J = Lambda)."""
    return SymplecticData.standard(d).lam.copy()


# ---------------------------------------------------------------- tensor calculus


def covariant_derivative(grid: Grid, T: np.ndarray, gamma: np.ndarray, variance: str) -> np.ndarray:
    """``(nabla T)[..., i, <slots>] = (nabla_{d_i} T)_<slots>``.

    ``variance`` gives one letter per component slot: ``'u'`` (vector) or ``'l'`` (covector).
    """
    p = len(variance)
    if T.ndim != grid.d + p:
        raise ValueError(f"tensor rank {T.ndim - grid.d} does not match variance {variance!r}")
    out = np.moveaxis(grid.grad(T), -1, grid.d)
    if gamma is None:
        return out
    src = _LETTERS[:p]
    for s, v in enumerate(variance):
        t_in = src[:s] + "z" + src[s + 1 :]
        if v == "u":
            out = out + np.einsum(f"...{src[s]}iz,...{t_in}->...i{src}", gamma, T)
        else:
            out = out - np.einsum(f"...zi{src[s]},...{t_in}->...i{src}", gamma, T)
    return out


def exterior_derivative_1form(grid: Grid, beta: np.ndarray) -> np.ndarray:
    db = grid.grad(beta)  # [..., b, a] = d_a beta_b
    return np.swapaxes(db, -1, -2) - db


def curvature_tensor(grid: Grid, gamma: np.ndarray) -> np.ndarray:
    dG = grid.grad(gamma)  # [..., r, l, j, k] = d_k Gamma^r_lj
    R = np.einsum("...rljk->...rjkl", dG) - np.einsum("...rkjl->...rjkl", dG)
    R = R + np.einsum("...rks,...slj->...rjkl", gamma, gamma)
    R = R - np.einsum("...rls,...skj->...rjkl", gamma, gamma)
    return R


def _perm_sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def wedge_top(forms: list[np.ndarray]) -> np.ndarray:
    """Top-degree coefficient of a wedge of 2-forms (coefficient of dx^1 ^ ... ^ dx^d)."""
    k = len(forms)
    d = 2 * k
    acc = 0.0
    for perm in itertools.permutations(range(d)):
        sgn = _perm_sign(perm)
        term = sgn
        for j, f in enumerate(forms):
            term = term * f[..., perm[2 * j], perm[2 * j + 1]]
        acc = acc + term
    return acc / 2**k


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("...ab,...bc->...ac", A, B)


def trace_prod(*mats: np.ndarray) -> np.ndarray:
    M = mats[0]
    for B in mats[1:]:
        M = matmul(M, B)
    return np.einsum("...aa->...", M)


def conjugate_path(J: np.ndarray, a: np.ndarray, t: float) -> np.ndarray:
    """``exp(t a) J exp(-t a)`` pointwise."""
    if t == 0.0:
        return J.copy()
    E = expm(t * a)
    Ei = expm(-t * a)
    return matmul(matmul(E, J), Ei)


def retraction(J: np.ndarray, A: np.ndarray, t: float) -> np.ndarray:
    """The path ``J_t = exp(t a) J exp(-t a)`` with ``a = J A / 2``; ``dJ_t/dt|_0 = A``."""
    return conjugate_path(J, 0.5 * matmul(J, A), t)


# ---------------------------------------------------------------- compatible structures


class GeometryError(ValueError):
    pass


class CompatibleStructure:
    """An omega-compatible almost complex structure with lazily cached geometry."""

    def __init__(self, grid: Grid, J: np.ndarray, frame: tuple[int, ...] | None = None):
        if J.shape != grid.shape + (grid.d, grid.d):
            raise ValueError(f"J has shape {J.shape}, expected {grid.shape + (grid.d, grid.d)}")
        self.grid = grid
        self.d = grid.d
        self.m = grid.d // 2
        self.J = J
        self.sd = SymplecticData.standard(grid.d)
        self.frame = tuple(frame) if frame is not None else tuple(range(0, grid.d, 2))

    # metric data
    @cached_property
    def omega(self) -> np.ndarray:
        return np.broadcast_to(self.sd.omega, self.J.shape)

    @cached_property
    def g(self) -> np.ndarray:
        return np.einsum("ac,...cb->...ab", self.sd.omega, self.J)

    @cached_property
    def g_inv(self) -> np.ndarray:
        return np.linalg.inv(self.g)

    # connections
    @cached_property
    def christoffel_lc(self) -> np.ndarray:
        dg = self.grid.grad(self.g)  # [..., a, b, i] = d_i g_ab
        T = np.einsum("...lji->...lij", dg) + dg - np.einsum("...ijl->...lij", dg)
        return 0.5 * np.einsum("...kl,...lij->...kij", self.g_inv, T)

    @cached_property
    def nabla_J(self) -> np.ndarray:
        """``[..., i, a, b] = (nabla^g_{d_i} J)^a_b``."""
        return covariant_derivative(self.grid, self.J, self.christoffel_lc, "ul")

    @cached_property
    def K(self) -> np.ndarray:
        """``K[..., k, i, j] = K^J(d_i, d_j)^k = -(J (nabla_i J) d_j)^k``."""
        return -np.einsum("...ka,...iaj->...kij", self.J, self.nabla_J)

    @cached_property
    def christoffel_sympl(self) -> np.ndarray:
        K = self.K
        return self.christoffel_lc + (K + np.swapaxes(K, -1, -2)) / 3.0

    @cached_property
    def christoffel_chern(self) -> np.ndarray:
        return self.christoffel_lc + 0.5 * self.K

    def K_from_definition(self) -> np.ndarray:
        """K^J via omega(K(X, Y), Z) = (nabla^g_X omega)(Y, Z)."""
        nw = covariant_derivative(self.grid, np.array(self.omega), self.christoffel_lc, "ll")
        return -np.einsum("kz,...ijz->...kij", self.sd.lam, nw)

    # curvature
    @cached_property
    def riemann(self) -> np.ndarray:
        return curvature_tensor(self.grid, self.christoffel_lc)

    @cached_property
    def ricci(self) -> np.ndarray:
        return np.einsum("...kvku->...uv", self.riemann)

    @cached_property
    def ricci_form(self) -> np.ndarray:
        """``ric(U, V) = Ric(J U, V)``."""
        return np.einsum("...au,...av->...uv", self.J, self.ricci)

    def ricci_form_trace(self) -> np.ndarray:
        """``-1/2 sum_k g(R(e_k, J e_k) U, V)``, frame-free."""
        return -0.5 * np.einsum("...ab,...cb,...ruac,...rv->...uv", self.g_inv, self.J, self.riemann, self.g)

    # Hermitian Ricci form and scalar curvature
    def hermitian_matrix(self, frame=None) -> np.ndarray:
        idx = list(frame if frame is not None else self.frame)
        h = self.g - 1j * self.omega
        return h[..., idx, :][..., :, idx]

    def theta(self, frame=None) -> np.ndarray:
        idx = list(frame if frame is not None else self.frame)
        H = self.hermitian_matrix(idx)
        det = np.abs(np.linalg.det(H))
        if np.min(det) < 1e-6:
            raise GeometryError(f"frame {idx} degenerate: min |det h| = {np.min(det):.3e}")
        Hinv = np.linalg.inv(H)
        h = self.g - 1j * self.omega
        Gc = self.christoffel_chern
        W = Gc[..., :, :, idx]  # [..., p, c, i] = (nabla_c Z_i)^p
        hw = np.einsum("...pci,...pk->...cik", W, h[..., :, idx])  # h(nabla_c Z_i, Z_k)
        return np.einsum("...ki,...cik->...c", Hinv, hw)

    def hermitian_ricci_complex(self, frame=None) -> np.ndarray:
        return 1j * exterior_derivative_1form(self.grid, self.theta(frame))

    @cached_property
    def hermitian_ricci(self) -> np.ndarray:
        return np.real(self.hermitian_ricci_complex())

    def hermitian_ricci_imag_residual(self) -> float:
        return float(np.max(np.abs(np.imag(self.hermitian_ricci_complex()))))

    @cached_property
    def hermitian_scalar(self) -> np.ndarray:
        return -np.einsum("ql,...ql->...", self.sd.lam, self.hermitian_ricci)

    def hermitian_scalar_wedge(self) -> np.ndarray:
        """S from rho ^ omega^{m-1}/(m-1)! = S/2 omega^m/m!."""
        forms = [self.hermitian_ricci] + [np.broadcast_to(self.sd.omega, self.J.shape)] * (self.m - 1)
        return 2.0 * wedge_top(forms) / math.factorial(self.m - 1)

    # operators
    def flat(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("...ab,...a->...b", self.g, X)

    def flat_endo(self, A: np.ndarray) -> np.ndarray:
        """``A^b(X, Y) = g(A X, Y)``."""
        return np.einsum("...cx,...cb->...bx", self.g, A)

    def delta(self, T: np.ndarray) -> np.ndarray:
        """``(delta T)(X...) = -g^{ab} (nabla_a T)(e_b, X...)`` on covariant tensors."""
        p = T.ndim - self.grid.d
        nT = covariant_derivative(self.grid, T, self.christoffel_lc, "l" * p)
        rest = _LETTERS[2 : p + 1]
        return -np.einsum(f"...ab,...ab{rest}->...{rest}", self.g_inv, nT)

    def delta_endo(self, A: np.ndarray) -> np.ndarray:
        """The 1-form ``delta^J A^b``."""
        return self.delta(self.flat_endo(A))

    def laplacian(self, H: np.ndarray) -> np.ndarray:
        dH = self.grid.grad(H)
        beta = np.einsum("...a,...as->...s", dH, self.J)
        dbeta = exterior_derivative_1form(self.grid, beta)
        return -0.5 * np.einsum("ks,...ks->...", self.sd.lam, dbeta)

    def hamiltonian_field(self, H: np.ndarray) -> np.ndarray:
        return hamiltonian_field(self.grid, H)

    def lie_derivative_J(self, H: np.ndarray) -> np.ndarray:
        X = hamiltonian_field(self.grid, H)
        return lie_derivative_endo(self.grid, X, self.J)

    def lie_derivative_J_kahler(self, H: np.ndarray) -> np.ndarray:
        """``L_X J (Y) = -nabla_{JY} X + J nabla_Y X`` (valid when nabla J = 0)."""
        X = hamiltonian_field(self.grid, H)
        nX = covariant_derivative(self.grid, X, self.christoffel_lc, "u")  # [..., c, a] = nabla_c X^a
        DX = np.swapaxes(nX, -1, -2)  # (nabla X)^a_c
        return -matmul(DX, self.J) + matmul(self.J, DX)

    def nijenhuis(self) -> np.ndarray:
        dJ = self.grid.grad(self.J)  # [..., a, b, c] = d_c J^a_b
        J = self.J
        N = np.einsum("...ai,...bja->...bij", J, dJ) - np.einsum("...aj,...bia->...bij", J, dJ)
        N = N + np.einsum("...ba,...aij->...bij", J, dJ) - np.einsum("...ba,...aji->...bij", J, dJ)
        return np.sqrt(np.sum(N**2, axis=(-3, -2, -1)))

    # tangent vectors and variations
    def is_tangent(self, A: np.ndarray) -> tuple[float, float]:
        anti = float(np.max(np.abs(matmul(A, self.J) + matmul(self.J, A))))
        wA = np.einsum("ac,...cb->...ab", self.sd.omega, A)
        sym = float(np.max(np.abs(wA - np.swapaxes(wA, -1, -2))))
        return anti, sym

    def project_tangent(self, M: np.ndarray) -> np.ndarray:
        P = 0.5 * (M + matmul(matmul(self.J, M), self.J))
        # omega-symmetrise: A' = (A - Lambda A^T omega)/2
        PT = np.swapaxes(P, -1, -2)
        return 0.5 * (P - np.einsum("ab,...bc,cd->...ad", self.sd.lam, PT, self.sd.omega))

    def first_variation_levi_civita(self, A: np.ndarray) -> np.ndarray:
        """``[..., i, j, l] = g(d/dt nabla^{g_t}_{d_i} d_j, d_l)`` along any path with J' = A."""
        a = np.einsum("xc,...cy->...xy", self.sd.omega, A)
        na = covariant_derivative(self.grid, a, self.christoffel_lc, "ll")  # [..., p, x, y]
        return 0.5 * (np.einsum("...jil->...ijl", na) + na - np.einsum("...lij->...ijl", na))

    def variation_hermitian_ricci(self, A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ddb = exterior_derivative_1form(self.grid, self.delta_endo(A))
        return -0.5 * ddb, 0.5 * np.einsum("ql,...ql->...", self.sd.lam, ddb)

    def moved(self, A: np.ndarray, t: float) -> CompatibleStructure:
        return CompatibleStructure(self.grid, retraction(self.J, A, t), self.frame)

    def conjugated(self, a: np.ndarray, t: float) -> CompatibleStructure:
        return CompatibleStructure(self.grid, conjugate_path(self.J, a, t), self.frame)

    # invariants
    def invariant_residuals(self) -> dict[str, float]:
        d = self.d
        I = np.eye(d)
        J = self.J
        g = self.g
        res = {
            "J_squared": float(np.max(np.abs(matmul(J, J) + I))),
            "omega_invariant": float(
                np.max(np.abs(np.einsum("...ca,cd,...db->...ab", J, self.sd.omega, J) - self.sd.omega))
            ),
            "g_symmetric": float(np.max(np.abs(g - np.swapaxes(g, -1, -2)))),
            "g_inverse": float(np.max(np.abs(matmul(self.g_inv, g) - I))),
            "g_inv_formula": float(np.max(np.abs(self.g_inv + np.einsum("...ab,bc->...ac", J, self.sd.lam)))),
        }
        res["g_min_eig"] = float(np.min(np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))))
        res["frame_min_det"] = float(np.min(np.abs(np.linalg.det(self.hermitian_matrix()))))
        return res

    def validate(self, tol: float = 1e-10) -> dict[str, float]:
        res = self.invariant_residuals()
        bad = [k for k in ("J_squared", "omega_invariant", "g_symmetric", "g_inverse", "g_inv_formula") if res[k] > tol]
        if bad or res["g_min_eig"] <= 0 or res["frame_min_det"] <= 1e-6:
            raise GeometryError(f"structure rejected: {res}")
        return res


def hamiltonian_field(grid: Grid, H: np.ndarray) -> np.ndarray:
    lam = SymplecticData.standard(grid.d).lam
    return -np.einsum("ab,...b->...a", lam, grid.grad(H))


def lie_derivative_endo(grid: Grid, X: np.ndarray, J: np.ndarray) -> np.ndarray:
    dJ = grid.grad(J)  # [..., a, b, c] = d_c J^a_b
    dX = grid.grad(X)  # [..., a, c] = d_c X^a
    return (
        np.einsum("...c,...abc->...ab", X, dJ)
        - np.einsum("...cb,...ac->...ab", J, dX)
        + np.einsum("...ac,...cb->...ab", J, dX)
    )


def commutator_endo(a: np.ndarray, J: np.ndarray) -> np.ndarray:
    """``[a, J]``: the value at J of the vector field a-hat."""
    return matmul(a, J) - matmul(J, a)


def random_tangent(cs: CompatibleStructure, seed: int, max_freq: int = 2, tries: int = 5) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = cs.d
    for _ in range(tries):
        M = np.empty(cs.grid.shape + (d, d))
        for a in range(d):
            for b in range(d):
                M[..., a, b] = trig_samples(cs.grid, rng, max_freq, zero_mean=False)
        A = cs.project_tangent(M)
        anti, sym = cs.is_tangent(A)
        if anti <= 1e-10 and sym <= 1e-10:
            return A
    raise GeometryError("tangent projection failed repeatedly")


def make_structure(grid: Grid, kind: str, eps: float, seed: int = 0, max_freq: int | None = None) -> CompatibleStructure:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    d = grid.d
    if kind == "kahler2d":
        if d != 2:
            raise ValueError("kahler2d lives on T^2")
        x1, x2 = grid.coords
        p = eps * np.sin(x1 + x2)
        r = np.exp(eps * np.cos(x1))
        q = -(1.0 + p**2) / r
        J = np.empty(grid.shape + (2, 2))
        J[..., 0, 0] = p
        J[..., 0, 1] = q
        J[..., 1, 0] = r
        J[..., 1, 1] = -p
    elif kind == "perturbed4d":
        if d != 4:
            raise ValueError("perturbed4d lives on T^4")
        J0 = np.broadcast_to(standard_J(d), grid.shape + (d, d)).copy()
        if eps == 0:
            J = J0
        else:
            base = CompatibleStructure(grid, J0)
            mf = max_freq if max_freq is not None else 1
            A0 = random_tangent(base, seed, mf)
            A0 = A0 * (eps / float(np.max(np.abs(A0))))
            J = retraction(J0, A0, 1.0)
    else:
        raise ValueError(f"unknown structure kind {kind!r}")
    cs = CompatibleStructure(grid, J)
    cs.validate()
    return cs


def default_structure(grid: Grid, eps: float, seed: int = 0) -> CompatibleStructure:
    return make_structure(grid, "kahler2d" if grid.d == 2 else "perturbed4d", eps, seed)

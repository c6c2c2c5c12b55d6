import numpy as np
import pytest

from dqlab import moment as mm
from dqlab.fields import Grid
from dqlab.geometry import make_structure, random_tangent, trace_prod

from conftest import field_of


def test_richardson_exact_on_quartic():
    f = lambda t: np.array([t**4 + 3 * t])
    assert abs(mm.richardson(f, 0.1)[0] - 3.0) < 1e-12


def test_density_solver(density, kahler):
    assert max(density.diagnostics["holdout_defect"]) < 1e-7
    np.testing.assert_array_equal(density[0], 1.0)
    assert density.constant_ambiguity == (False, True, True)


def test_density_order1_is_minus_half_scalar(density, kahler):
    r1 = density[1] - density[1].mean()
    S = kahler.hermitian_scalar - kahler.hermitian_scalar.mean()
    assert np.abs(r1 + 0.5 * S).max() < 1e-5 * np.abs(S).max()


def test_density_flat(flat_fed):
    td = mm.trace_density(flat_fed, 2, holdout=5)
    assert np.abs(td[1]).max() < 1e-10 and np.abs(td[2]).max() < 1e-10


def test_density_scales_with_omega(kahler):
    from dqlab.fedosov import build_from_connection

    fd0 = build_from_connection(kahler.grid, 8, kahler.christoffel_sympl, None, kahler)
    td0 = mm.trace_density(fd0, 1, holdout=0)
    assert np.abs(td0[1]).max() < 1e-8


def test_trace_defect_on_pairs(fed, density, grid2):
    F = np.stack([field_of(grid2, 100 + s) for s in range(3)])
    G = np.stack([field_of(grid2, 200 + s) for s in range(3)])
    assert max(mm.trace_defects(fed, density, F, G)) < 1e-7


def test_trace_series(density, grid2):
    F = field_of(grid2, 12)
    t = mm.trace(grid2, F, density)
    assert t.lowest_power == -1
    assert abs(t[-1]) < 1e-12  # zero-mean F


def test_alpha_source_closed(kahler, builder):
    A = random_tangent(kahler, 21)
    assert mm.alpha_closedness(kahler, A, 8, builder=builder) < 1e-6


def test_alpha_properties(kahler, builder):
    A = random_tangent(kahler, 22)
    a = mm.alpha(kahler, A, 8, builder=builder)
    assert all(np.abs(c).max() == 0 for c in a.y0_coefficients(0))
    a2 = mm.alpha(kahler, 2 * A, 8, builder=builder)
    assert (a2 - a.scale(2.0)).max_abs(6) < 1e-6
    assert mm.alpha(kahler, 0 * A, 8, builder=builder).terms == {}


def test_curvature_element_leading(kahler, builder):
    A, B = random_tangent(kahler, 31), random_tangent(kahler, 32)
    ce = mm.curvature_element(kahler, A, B, 8, builder=builder)
    y = ce.y0(2)
    np.testing.assert_allclose(y[1], 0.25 * trace_prod(kahler.J, A, B), atol=1e-10)
    fd = builder(kahler)
    res = fd.D_apply(ce.value).residual_by_degree()
    assert max(v for D, v in res.items() if D <= 5) < 1e-6


def test_omega_tilde_classical_limit(kahler, builder, density):
    A, B = random_tangent(kahler, 41), random_tangent(kahler, 42)
    om = mm.omega_tilde(kahler, A, B, 1, 8, density, builder)
    ref = mm.omega_classical(kahler, A, B)
    assert abs(om[0] - ref) < 1e-8 * abs(ref)


def test_mu_rejects_nonzero_mean(kahler, density):
    with pytest.raises(ValueError):
        mm.mu(kahler, np.ones(kahler.grid.shape), density)


def test_mu_leading_orders(kahler, density):
    H = field_of(kahler.grid, 13)
    m = mm.mu(kahler, H, density)
    assert abs(m[-1]) < 1e-10
    assert abs(m[0] - 2 * mm.mu_classical(kahler, H)) < 1e-8 * abs(m[0])
    mt = mm.mu_tilde(kahler, H, density)
    assert abs(mt[0] - m[0]) < 1e-10 * abs(m[0])


def test_flat_mu_tilde_vanishes(flat_fed, grid2):
    cs = make_structure(grid2, "kahler2d", 0.0)
    td = mm.trace_density(flat_fed, 2, holdout=0)
    mt = mm.mu_tilde(cs, field_of(grid2, 14), td)
    assert max(abs(c) for c in mt.coefficients) < 1e-10


def test_moment_order0_d4():
    cs = make_structure(Grid(4, 8), "perturbed4d", 0.2, seed=2)
    A = random_tangent(cs, 5, 1)
    H = field_of(cs.grid, 6, 1)
    lhs, rhs = mm.moment_order0(cs, H, A)
    assert abs(lhs - rhs) < 1e-4 * max(abs(lhs), abs(rhs))
    l2, r2 = mm.df_order0(cs, H, A)
    assert abs(r2 + 2 * l2) < 1e-4 * abs(r2)


def test_q_hamiltonian_kahler(kahler, builder):
    H = field_of(kahler.grid, 15)
    fd = builder(kahler)
    q = mm.q_hamiltonian_oracle(kahler, H, 8, kahler=True, builder=builder)
    ref = fd.Q([H, -0.5 * kahler.laplacian(H)])
    assert (q - ref).max_abs() < 1e-6


def test_exact_laplacian_form_closed(kahler):
    from dqlab.geometry import exterior_derivative_1form

    beta = mm.exact_laplacian_form(kahler, field_of(kahler.grid, 16))
    assert np.abs(exterior_derivative_1form(kahler.grid, beta)).max() < 1e-10

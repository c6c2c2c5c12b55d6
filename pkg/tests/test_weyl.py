import math
from itertools import product as iproduct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqlab.fields import Grid
from dqlab.geometry import SymplecticData
from dqlab.weyl import (
    WeylForm,
    basis,
    contract_vector,
    delta_F,
    delta_F_inv,
    exterior_d,
    graded_commutator,
    linear_y,
    nbasis,
    nu_commutator,
    quadratic_y,
    wedge_sign,
    y0_part,
)

G1 = Grid(2, 8)


# independent oracle: polynomials as {(k, alpha): coeff}, product by explicit differentiation
def _deriv(poly, j):
    out = {}
    for (k, al), c in poly.items():
        if al[j]:
            b = list(al)
            b[j] -= 1
            out[(k, tuple(b))] = out.get((k, tuple(b)), 0.0) + c * al[j]
    return out


def oracle_product(p, q, d, cap):
    lam = SymplecticData.standard(d).lam
    out = {}
    # sum_r (nu/2)^r / r! Lambda^{i1 j1}..Lambda^{ir jr} d_{i..} p d_{j..} q
    frontier = [(1.0, p, q)]
    for r in range(cap + 1):
        for w, a, b in frontier:
            for (k1, a1), c1 in a.items():
                for (k2, a2), c2 in b.items():
                    key = (k1 + k2 + r, tuple(x + y for x, y in zip(a1, a2)))
                    if 2 * key[0] + sum(key[1]) <= cap:
                        out[key] = out.get(key, 0.0) + w * c1 * c2 / (2.0**r * math.factorial(r))
        nxt = []
        for w, a, b in frontier:
            for i, j in iproduct(range(d), repeat=2):
                if lam[i, j]:
                    da, db = _deriv(a, i), _deriv(b, j)
                    if da and db:
                        nxt.append((w * lam[i, j], da, db))
        frontier = nxt
        if not frontier:
            break
    return out


def to_weyl(poly, d, cap):
    g = Grid(d, 8)
    w = WeylForm.zero(g, cap)
    for (k, al), c in poly.items():
        w = w + WeylForm.monomial(g, cap, k, al, 0, c)
    return w


poly2 = st.dictionaries(
    st.tuples(st.integers(0, 1), st.tuples(st.integers(0, 2), st.integers(0, 2))),
    st.floats(-2, 2, allow_nan=False),
    min_size=1,
    max_size=4,
)


@settings(max_examples=30, deadline=None)
@given(poly2, poly2)
def test_product_matches_oracle(p, q):
    cap = 8
    got = to_weyl(p, 2, cap).product(to_weyl(q, 2, cap))
    want = oracle_product(p, q, 2, cap)
    for (k, al), c in want.items():
        assert abs(float(got.coefficient(k, al)[0, 0]) - c) < 1e-12
    assert (got - to_weyl(want, 2, cap)).max_abs() < 1e-12


@settings(max_examples=15, deadline=None)
@given(poly2, poly2, poly2)
def test_product_associative(p, q, r):
    a, b, c = (to_weyl(x, 2, 8) for x in (p, q, r))
    assert ((a @ b) @ c - a @ (b @ c)).max_abs() < 1e-10


def test_basic_commutator_d4():
    g = Grid(4, 8)
    y = [WeylForm.monomial(g, 4, 0, tuple(int(i == j) for i in range(4))) for j in range(4)]
    lam = SymplecticData.standard(4).lam
    for i in range(4):
        for j in range(4):
            c = graded_commutator(y[i], y[j])
            # [y^i, y^j] = nu Lambda^{ij}
            assert abs(float(c.coefficient(1, (0, 0, 0, 0))[0, 0, 0, 0]) - lam[i, j]) < 1e-14


def test_basis_sizes():
    assert nbasis(2, 4) == len(basis(2, 4)) == 9
    assert all(2 * k + sum(a) == 5 for k, a in basis(4, 5))


def test_wedge_sign():
    assert wedge_sign(0b01, 0b10) == 1
    assert wedge_sign(0b10, 0b01) == -1
    assert wedge_sign(0b01, 0b01) == 0


def test_nu_commutator_degree():
    q = quadratic_y(G1, 6, np.broadcast_to(np.eye(2), G1.shape + (2, 2)))
    l = linear_y(G1, 6, np.ones(G1.shape + (2,)))
    c = nu_commutator(q, l)
    assert c.degrees() == {1}


def random_form(grid, cap, rng, masks=(0, 1, 2, 3), degrees=range(0, 6)):
    terms = {}
    for m in masks:
        for D in degrees:
            terms[(m, D)] = rng.normal(size=(nbasis(grid.d, D),) + grid.shape)
    return WeylForm(grid, cap, terms)


def test_hodge_decomposition(rng):
    """delta delta^{-1} + delta^{-1} delta = id - projection onto (y, dx)-degree (0, 0)."""
    a = random_form(G1, 8, rng)
    lhs = delta_F(delta_F_inv(a)) + delta_F_inv(delta_F(a))
    rest = a - y0_part(a.copy_with({k: v for k, v in a.terms.items() if k[0] == 0}))
    assert (lhs - rest).max_abs() < 1e-12


def test_delta_squares(rng):
    a = random_form(G1, 8, rng)
    assert delta_F(delta_F(a)).max_abs() < 1e-12
    assert delta_F_inv(delta_F_inv(a)).max_abs() < 1e-12


def test_delta_is_graded_commutator(rng):
    """delta a = -(1/nu)[omega_ij y^i dx^j, a]."""
    om = SymplecticData.standard(2).omega
    theta = WeylForm.zero(G1, 8)
    for j in range(2):
        theta = theta + linear_y(G1, 8, np.broadcast_to(om[:, j], G1.shape + (2,)), mask=1 << j)
    a = random_form(G1, 8, rng, masks=(0,))
    ad = nu_commutator(theta, a).scale(-1.0)
    assert (ad - delta_F(a)).max_abs(6) < 1e-11


def test_exterior_d_squares(rng):
    g = Grid(2, 16)
    from conftest import field_of

    a = WeylForm.monomial(g, 4, 0, (1, 1), 0, field_of(g, 3))
    assert exterior_d(exterior_d(a)).max_abs() < 1e-12


def test_contract_vector():
    a = WeylForm.monomial(G1, 4, 0, (1, 0), 0b11, 1.0)
    X = np.zeros(G1.shape + (2,))
    X[..., 0] = 2.0
    c = contract_vector(a, X)
    assert float(c.coefficient(0, (1, 0), 0b10)[0, 0]) == 2.0


def test_nu_shift_and_cap():
    a = WeylForm.monomial(G1, 4, 1, (0, 0), 0, 1.0)
    assert a.nu_shift(1).degrees() == {4}
    assert a.nu_shift(2).terms == {}
    with pytest.raises(ValueError):
        WeylForm.monomial(G1, 4, 0, (1, 0)).nu_shift(-1)


def test_batched_product_broadcasts(rng):
    from conftest import field_of

    g = Grid(2, 8)
    F = np.stack([field_of(g, s) for s in range(3)])
    a = WeylForm.function(g, 4, F)  # batch of 3
    q = quadratic_y(g, 4, np.broadcast_to(np.eye(2), g.shape + (2, 2)) * field_of(g, 9)[..., None, None])
    batched = a.product(q)
    for i in range(3):
        single = WeylForm.function(g, 4, F[i]).product(q)
        for k, v in single.terms.items():
            np.testing.assert_allclose(batched.terms[k][:, i], v, atol=1e-14)


def test_mixed_degree_commutator_rejected():
    a = WeylForm.monomial(G1, 4, 0, (1, 0), 0, 1.0) + WeylForm.monomial(G1, 4, 0, (1, 0), 1, 1.0)
    with pytest.raises(ValueError):
        graded_commutator(a, a)

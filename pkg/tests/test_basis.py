import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkdg.basis import (
    GAUSS_NODAL,
    KINDS,
    LOBATTO_NODAL,
    ONB,
    Space,
    eval_basis_grad,
    evaluate,
    evaluate_grad,
    gauss_1d,
    lobatto_1d,
    mass_matrix,
    project,
    volume_quadrature,
)


def exact_mass(space, h):
    """Mass matrix of the scaled basis on a box with sides ``h`` by an overintegrating Gauss rule."""
    q = volume_quadrature(GAUSS_NODAL, space.order + 2, space.dim)
    vol = float(np.prod(h))
    phi = space.eval(q.points) * space.scale(vol)
    return vol * phi.T @ (q.weights[:, None] * phi)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_gauss_rule_exactness(n):
    x, w = gauss_1d(n)
    for p in range(2 * n):
        assert np.dot(w, x**p) == pytest.approx(1.0 / (p + 1), abs=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_lobatto_rule_exactness(n):
    x, w = lobatto_1d(n)
    assert x[0] == 0.0 and x[-1] == 1.0
    for p in range(2 * n - 2):
        assert np.dot(w, x**p) == pytest.approx(1.0 / (p + 1), abs=1e-14)


def test_lobatto_needs_two_points():
    with pytest.raises(ValueError):
        lobatto_1d(1)


@pytest.mark.parametrize("kind, order, dim", [("bad", 1, 1), (ONB, -1, 1), (ONB, 1, 3)])
def test_space_rejects(kind, order, dim):
    with pytest.raises(ValueError):
        Space(kind, order, dim)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("order", [0, 1, 2, 4])
@pytest.mark.parametrize("h", [(0.1, 0.1), (0.5, 0.125)])
def test_onb_mass_is_identity(dim, order, h):
    sp = Space(ONB, order, dim)
    M = exact_mass(sp, h[:dim])
    np.testing.assert_allclose(M, np.eye(sp.basis_size), atol=1e-12)
    np.testing.assert_allclose(mass_matrix(sp, np.prod(h[:dim])), np.eye(sp.basis_size), atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("order", [0, 1, 3])
def test_gauss_mass_is_diagonal(dim, order):
    sp = Space(GAUSS_NODAL, order, dim)
    h = (0.25, 0.5)[:dim]
    vol = float(np.prod(h))
    M = exact_mass(sp, h)
    np.testing.assert_allclose(M, np.diag(vol * sp.quad.weights), atol=1e-12)
    np.testing.assert_allclose(mass_matrix(sp, vol), M, atol=1e-12)


def test_lobatto_k1_lumped_mass():
    sp = Space(LOBATTO_NODAL, 1, 1)
    h = 0.3
    M = mass_matrix(sp, h)
    assert np.array_equal(M, np.diag([h / 2, h / 2]))


def test_lobatto_lumping_is_inexact():
    sp = Space(LOBATTO_NODAL, 1, 1)
    exact = exact_mass(sp, (1.0,))
    np.testing.assert_allclose(exact, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-14)


@pytest.mark.parametrize("kind", [GAUSS_NODAL, LOBATTO_NODAL])
def test_nodal_kronecker(kind):
    sp = Space(kind, 3, 2)
    np.testing.assert_allclose(sp.eval(sp.quad.points), np.eye(sp.basis_size), atol=1e-12)


def test_onb_hierarchy():
    # the first (m+1)^d functions have maximal degree m
    sp = Space(ONB, 3, 2)
    for m in range(4):
        assert np.all(sp.multi[: (m + 1) ** 2].max(axis=1) <= m)
    assert sp.eval(np.array([[0.3, 0.8]]))[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("dim", [1, 2])
def test_polynomial_reproduction(kind, dim):
    k = 3
    sp = Space(kind, k, dim, 2)
    corner, h = np.array([0.2, -1.0])[:dim], np.array([0.5, 0.25])[:dim]

    def f(x):
        p = x[:, 0] ** 3 - 2 * x[:, 0]
        if dim == 2:
            p = p * (1 + x[:, 1] ** 2)
        return np.stack([p, 1 + 0 * p], axis=1)

    block = project(sp, corner, h, f)
    rng = np.random.default_rng(0)
    xi = rng.random((20, dim))
    np.testing.assert_allclose(evaluate(sp, block, xi, np.prod(h)), f(corner + h * xi), atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_differences(kind):
    sp = Space(kind, 2, 2)
    rng = np.random.default_rng(1)
    block = rng.standard_normal((1, sp.basis_size))
    h = np.array([0.5, 2.0])
    xi = rng.random((5, 2)) * 0.8 + 0.1
    g = evaluate_grad(sp, block, xi, h)
    e = 1e-6
    for a in range(2):
        d = np.zeros(2)
        d[a] = e
        vol = np.prod(h)
        fd = (evaluate(sp, block, xi + d, vol) - evaluate(sp, block, xi - d, vol)) / (2 * e * h[a])
        np.testing.assert_allclose(g[:, 0, a], fd[:, 0], atol=1e-7)
    assert eval_basis_grad(sp, xi).shape == (5, sp.basis_size, 2)


@pytest.mark.parametrize("kind", KINDS)
def test_means(kind):
    sp = Space(kind, 2, 1)
    h = 0.5
    block = project(sp, [0.0], [h], lambda x: x[:, :1] ** 2)
    assert sp.means(block[None], np.array([h]))[0, 0] == pytest.approx(h**2 / 3, abs=1e-14)
    const = sp.from_means(np.array([[2.0]]), np.array([h]))
    np.testing.assert_allclose(evaluate(sp, const[0], [[0.2], [0.7]], h), 2.0, atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_prolong_restrict_roundtrip(kind):
    sp = Space(kind, 2, 2)
    rng = np.random.default_rng(2)
    c = rng.standard_normal(sp.basis_size)
    mats = sp.restrict_matrices()
    offsets = [(0, 0), (0, 1), (1, 0), (1, 1)]
    back = sum(R @ (sp.prolong_matrix(off) @ c) for R, off in zip(mats, offsets))
    np.testing.assert_allclose(back, c, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 4), st.integers(1, 2))
def test_partition_of_unity_mean_weights(kind, order, dim):
    sp = Space(kind, order, dim)
    c = sp.project_ref(lambda xi: np.ones(len(xi)))
    xi = np.linspace(0, 1, 7)[:, None].repeat(dim, axis=1)
    np.testing.assert_allclose(sp.eval(xi) @ c, 1.0, atol=1e-12)
    assert sp.mean_weights @ c == pytest.approx(1.0, abs=1e-12)

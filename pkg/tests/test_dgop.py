import numpy as np
import pytest
import sympy as sp

from rkdg.basis import KINDS, Space
from rkdg.dgop import EXPLICIT, IMPLICIT, DiscreteFunction, OperatorError, SpatialOperator, interpolate
from rkdg.mesh import create_cartesian
from rkdg.models import (
    Dirichlet,
    Domain,
    ModelError,
    ModelSpec,
    euler_model,
    euler_preset,
    heat_model,
    linear_advection_model,
    navier_stokes_model,
    reflect,
)

X, Y = sp.symbols("x y")


def hanging_mesh(periodic=(True, True)):
    mesh = create_cartesian((0, 0), (1, 1), (4, 4), periodic=periodic)
    eta = np.zeros(16)
    eta[[0, 5]] = 1.0
    mesh.mark(eta, 0.5, 0.0, 0, 2)
    mesh.adapt()
    mesh.mark(np.r_[1.0, np.zeros(mesh.n_cells - 1)], 0.5, 0.0, 0, 2)
    mesh.adapt()
    assert np.any(mesh.level == 2) and mesh.max_level_jump() == 1
    return mesh


def sym_fn(expr):
    f = sp.lambdify((X, Y), expr, "numpy")
    return lambda x: np.broadcast_to(np.asarray(f(x[:, 0], x[:, 1]), dtype=float), (len(x),))[:, None]


def with_exact_boundary(model, exact):
    return model.with_(boundary={range(1, 5): Dirichlet(lambda t, x, U: exact(x))})


@pytest.mark.parametrize("kind", KINDS)
def test_free_stream_on_hanging_mesh(kind):
    m = euler_model()
    mesh = hanging_mesh()
    space = Space(kind, 2, 2, 4)
    state = np.array([1.0, 0.3, -0.2, 2.5])
    U = interpolate(space, mesh, lambda x: np.tile(state, (len(x), 1)))
    op = SpatialOperator(m.with_(boundary={}), space, mesh)
    assert np.abs(op.apply(U)).max() <= 1e-11


def test_free_stream_walls_navier_stokes():
    m = navier_stokes_model(mu=0.01)
    m = m.with_(boundary={range(1, 5): Dirichlet(lambda t, x, U: U)})
    mesh = hanging_mesh(periodic=(False, False))
    space = Space("onb", 2, 2, 4)
    U = interpolate(space, mesh, lambda x: np.tile([1.0, 0.5, 0.5, 3.0], (len(x), 1)))
    assert np.abs(SpatialOperator(m, space, mesh).apply(U)).max() <= 1e-11


@pytest.mark.parametrize("kind", ["onb", "gauss"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_advection_polynomial_oracle(kind, k):
    a = (0.7, -1.3)
    p = (X**k - 2 * X * Y + 1) * (1 + Y ** (k - 1))
    exact_rhs = -(a[0] * sp.diff(p, X) + a[1] * sp.diff(p, Y))
    u, rhs = sym_fn(p), sym_fn(exact_rhs)
    model = with_exact_boundary(linear_advection_model(a), u)
    mesh = hanging_mesh(periodic=(False, False))
    space = Space(kind, k, 2)
    U = interpolate(space, mesh, u)
    R = SpatialOperator(model, space, mesh).apply(U)
    np.testing.assert_allclose(R, interpolate(space, mesh, rhs).dofs, atol=1e-10)


@pytest.mark.parametrize("k", [2, 3])
def test_diffusion_polynomial_oracle(k):
    eps = 0.3
    p = X**k * Y - Y**2 + X * Y ** (k - 1)
    lap = eps * (sp.diff(p, X, 2) + sp.diff(p, Y, 2))
    u, rhs = sym_fn(p), sym_fn(lap)
    model = with_exact_boundary(heat_model(eps, domain=Domain((0, 0), (1, 1), (4, 4))), u)
    mesh = hanging_mesh(periodic=(False, False))
    space = Space("onb", k, 2)
    U = interpolate(space, mesh, u)
    R = SpatialOperator(model, space, mesh).apply(U)
    np.testing.assert_allclose(R, interpolate(space, mesh, rhs).dofs, atol=1e-9)


def test_diffusion_1d_sine_projection():
    # on the periodic interval the operator applied to the data converges to eps u''
    errs = []
    for n in (8, 16):
        m = heat_model(1.0, domain=Domain((0.0,), (1.0,), (n,), periodic=(True,)))
        mesh = m.domain.make_mesh()
        space = Space("onb", 2, 1)
        U = interpolate(space, mesh, m.U0)
        R = SpatialOperator(m, space, mesh).apply(U)
        ex = interpolate(space, mesh, lambda x: -4 * np.pi**2 * np.sin(2 * np.pi * x[:, :1]))
        errs.append(np.sqrt(np.sum((R - ex.dofs) ** 2)))
    assert errs[1] < 0.6 * errs[0]


@pytest.mark.parametrize("kind", KINDS)
def test_conservation_with_boundary_flux(kind):
    rng = np.random.default_rng(3)
    m = euler_preset("sod")
    mesh = m.domain.make_mesh((12,))
    space = Space(kind, 2, 1, 3)
    U = interpolate(space, mesh, m.U0)
    U.dofs *= 1 + 0.1 * rng.random(U.dofs.shape)
    op = SpatialOperator(m, space, mesh)
    R = DiscreteFunction(space, mesh, op.apply(U))
    np.testing.assert_allclose(R.totals(), -op.boundary_flux, atol=1e-12)


def test_conservation_hanging_walls_2d():
    rng = np.random.default_rng(4)
    m = euler_model()
    walls = {3: Dirichlet(lambda t, x, U: reflect(U, [0.0, -1.0])),
             4: Dirichlet(lambda t, x, U: reflect(U, [0.0, 1.0]))}
    m = m.with_(boundary=walls)
    mesh = hanging_mesh(periodic=(True, False))
    space = Space("onb", 2, 2, 4)
    U = interpolate(space, mesh, lambda x: np.tile([1.0, 0.1, 0.2, 2.5], (len(x), 1)))
    scale = 0.005 * np.sqrt(mesh.volumes)[:, None, None]
    U.dofs[:, :, 1:] += scale * rng.standard_normal(U.dofs[:, :, 1:].shape)
    op = SpatialOperator(m, space, mesh)
    R = DiscreteFunction(space, mesh, op.apply(U))
    tot = R.totals()
    np.testing.assert_allclose(tot, -op.boundary_flux, atol=1e-12)
    assert abs(tot[0]) < 1e-12  # reflecting walls carry no mass


def test_split_consistency():
    m = linear_advection_model((1.0,)).with_(F_v=lambda t, x, U, DU: 0.01 * DU,
                                             S_e=lambda t, x, U, DU=None: -U)
    mesh = m.domain.make_mesh()
    space = Space("onb", 2, 1)
    U = interpolate(space, mesh, m.U0)
    op = SpatialOperator(m, space, mesh)
    full = op.apply(U)
    np.testing.assert_allclose(full, op.apply(U, EXPLICIT) + op.apply(U, IMPLICIT), atol=1e-12)


@pytest.mark.parametrize("k, expected", [(0, 0.1), (1, 0.1 / 3), (4, 0.1 / 9)])
def test_timestep_estimate_1d(k, expected):
    m = linear_advection_model((1.0,), domain=Domain((0.0,), (1.0,), (10,), periodic=(True,)))
    mesh = m.domain.make_mesh()
    space = Space("onb", k, 1)
    op = SpatialOperator(m, space, mesh)
    with pytest.raises(OperatorError):
        op.timestep_estimate()
    op.apply(interpolate(space, mesh, m.U0))
    assert op.timestep_estimate() == pytest.approx(expected, rel=1e-12)


def test_timestep_estimate_directional():
    m = linear_advection_model((1.0, 2.0), domain=Domain((0, 0), (1, 1), (10, 5), periodic=(True, True)))
    mesh = m.domain.make_mesh()
    space = Space("onb", 1, 2)
    op = SpatialOperator(m, space, mesh)
    op.apply(interpolate(space, mesh, m.U0))
    assert op.timestep_estimate() == pytest.approx(1.0 / (3 * (1 / 0.1 + 2 / 0.2)))


def test_timestep_estimate_without_advection():
    m = heat_model()
    mesh = m.domain.make_mesh()
    op = SpatialOperator(m, Space("onb", 1, 1), mesh)
    assert op.timestep_estimate() == np.inf


def test_operator_errors():
    m = linear_advection_model()
    mesh = m.domain.make_mesh()
    with pytest.raises(OperatorError):
        SpatialOperator(m, Space("onb", 1, 1, 2), mesh)
    with pytest.raises(OperatorError):
        SpatialOperator(m, Space("onb", 1, 2), mesh)
    space = Space("onb", 1, 1)
    op = SpatialOperator(m, space, mesh)
    with pytest.raises(OperatorError):
        op.apply(np.zeros((3, 1, 2)))
    with pytest.raises(OperatorError):
        op.apply(interpolate(space, mesh, m.U0), part="bogus")
    other = m.domain.make_mesh()
    with pytest.raises(OperatorError):
        op.apply(interpolate(space, other, m.U0))
    U = interpolate(space, mesh, m.U0)
    mesh.global_refine(1)
    with pytest.raises(OperatorError):
        op.apply(U)


def test_missing_boundary_rejected():
    m = linear_advection_model(domain=Domain((0.0,), (1.0,), (4,))).with_(boundary={1: 0.0})
    with pytest.raises(ModelError):
        SpatialOperator(m, Space("onb", 1, 1), m.domain.make_mesh())


def test_non_finite_reported():
    m = euler_model(dim=1).with_(boundary={}, domain=Domain((0.0,), (1.0,), (4,), periodic=(True,)))
    mesh = m.domain.make_mesh()
    space = Space("onb", 1, 1, 3)
    U = interpolate(space, mesh, lambda x: np.tile([1.0, 0.0, 2.5], (len(x), 1)))
    U.dofs[2, 0, 0] = np.nan
    with pytest.raises(OperatorError, match="non-finite"):
        SpatialOperator(m, space, mesh).apply(U)


def test_workers_agree():
    m = euler_preset("kelvin_helmholtz", navier_stokes_model())
    mesh = m.domain.make_mesh((8, 8))
    space = Space("onb", 2, 2, 4)
    U = interpolate(space, mesh, m.U0)
    R1 = SpatialOperator(m, space, mesh).apply(U)
    R3 = SpatialOperator(m, space, mesh, workers=3).apply(U)
    np.testing.assert_allclose(R1, R3, atol=1e-13)


def test_sources_only():
    m = ModelSpec(dim_range=1, dim=1, S_e=lambda t, x, U, DU=None: 2 * U,
                  domain=Domain((0.0,), (1.0,), (2,)))
    mesh = m.domain.make_mesh()
    space = Space("gauss", 1, 1)
    U = interpolate(space, mesh, lambda x: x[:, :1])
    np.testing.assert_allclose(SpatialOperator(m, space, mesh).apply(U), 2 * U.dofs, atol=1e-14)

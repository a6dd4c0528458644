import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkdg.basis import Space
from rkdg.dgop import DiscreteFunction, interpolate
from rkdg.mesh import Mesh, MeshError, adapt, create_cartesian, global_refine, mark


def face_closure(mesh):
    """Sum of area * outward normal over the faces of every cell (zero for a closed tiling)."""
    fa = mesh.face_arrays
    nrm = fa.normals(mesh.dim)
    acc = np.zeros((mesh.n_cells, mesh.dim))
    np.add.at(acc, fa.inside, fa.area[:, None] * nrm)
    inter = fa.interior
    np.add.at(acc, fa.outside[inter], -fa.area[inter, None] * nrm[inter])
    return acc


def test_create_unit_square():
    m = create_cartesian((0, 0), (1, 1), (10, 10))
    assert m.n_cells == 100
    np.testing.assert_allclose(m.volumes, 0.01)


def test_create_1d():
    m = create_cartesian((0,), (1,), (4,))
    assert m.n_cells == 4
    np.testing.assert_allclose(m.h[:, 0], 0.25)


def test_create_rectangle():
    m = create_cartesian((0, 0), (2, 1), (2, 1))
    assert m.n_cells == 2
    np.testing.assert_allclose(m.volumes, 1.0)


@pytest.mark.parametrize("lower, upper, counts", [
    ((0, 0), (1, 1), (0, 3)),
    ((0, 0), (0, 1), (2, 2)),
    ((0,), (1, 1), (2,)),
])
def test_create_rejects_bad_input(lower, upper, counts):
    with pytest.raises(MeshError):
        create_cartesian(lower, upper, counts)


@pytest.mark.parametrize("counts, levels, expected", [((10, 10), 3, 6400), ((4,), 1, 8), ((3, 2), 0, 6)])
def test_global_refine(counts, levels, expected):
    m = create_cartesian((0,) * len(counts), (1,) * len(counts), counts)
    global_refine(m, levels)
    assert m.n_cells == expected
    assert abs(m.volumes.sum() - 1.0) < 1e-12


def test_face_counts():
    m = create_cartesian((0, 0), (2, 1), (2, 1))
    fa = m.face_arrays
    assert len(fa.interior) == 1 and len(fa.boundary) == 6
    m = create_cartesian((0,), (1,), (4,))
    fa = m.face_arrays
    assert len(fa.interior) == 3 and len(fa.boundary) == 2


def test_boundary_ids():
    m = create_cartesian((0, 0), (1, 1), (3, 3))
    fa = m.face_arrays
    assert m.boundary_ids() == {1, 2, 3, 4}
    for b, axis, side in [(1, 0, 0.0), (2, 0, 1.0), (3, 1, 0.0), (4, 1, 1.0)]:
        ids = fa.boundary[fa.boundary_id[fa.boundary] == b]
        assert len(ids) == 3
        np.testing.assert_allclose(fa.center[ids, axis], side)


def test_periodic_has_no_boundary():
    m = create_cartesian((0, 0), (1, 1), (3, 2), periodic=(True, True))
    assert len(m.face_arrays.boundary) == 0
    assert len(m.face_arrays.interior) == 12


def test_hanging_faces():
    m = create_cartesian((0, 0), (2, 1), (2, 1))
    m.mark(np.array([1.0, 0.0]), 0.5, 0.0, 0, 1)
    m.mark(np.array([1.0, 0.0]), 0.5, 0.0, 0, 1)  # re-marking replaces the flags
    m._marks[1] = 0
    m.adapt()
    hanging = [f for f in m.faces() if f.hanging]
    assert len(hanging) == 2
    for f in hanging:
        assert m.level[f.inside] == 1 and m.level[f.outside] == 0
        assert f.area == pytest.approx(0.5)


def test_mark_neighbour_propagation():
    m = create_cartesian((0, 0), (1, 1), (3, 3))
    eta = np.zeros(9)
    centre = int(np.flatnonzero(np.all(np.isclose(m.centers, 0.5), axis=1))[0])
    eta[centre] = 1.0
    assert mark(m, eta, 0.5, 0.0, 0, 2) == (5, 0)


def test_mark_nothing():
    m = create_cartesian((0, 0), (1, 1), (3, 3))
    assert m.mark(np.zeros(9), 0.0, 0.0, 0, 0) == (0, 0)


def test_coarsen_all_quartets():
    m = create_cartesian((0, 0), (1, 1), (2, 2)).global_refine(1)
    m.mark(np.zeros(16), 1.0, 0.5, 0, 1)
    adapt(m)
    assert m.n_cells == 4 and np.all(m.level == 0)


def test_adapt_without_flags_is_identity():
    m = create_cartesian((0, 0), (1, 1), (2, 2))
    sp = Space("onb", 2, 2, 1)
    U = interpolate(sp, m, lambda x: x[:, :1] ** 2)
    before = U.dofs.copy()
    version = m.version
    m.adapt([U])
    assert m.version == version
    np.testing.assert_array_equal(U.dofs, before)


def test_refine_constant():
    m = create_cartesian((0, 0), (1, 1), (2, 2))
    sp = Space("onb", 3, 2, 1)
    U = interpolate(sp, m, lambda x: np.ones((len(x), 1)))
    m.mark(np.array([1.0, 0, 0, 0]), 0.5, 0.0, 0, 1)
    m._marks[1:] = 0
    m.adapt([U])
    assert m.n_cells == 7
    vals = U.values(np.array([[0.1, 0.2], [0.9, 0.5]]))
    np.testing.assert_allclose(vals, 1.0, atol=1e-13)


def test_coarsen_means():
    m = create_cartesian((0, 0), (1, 1), (1, 1)).global_refine(1)
    sp = Space("gauss", 1, 2, 1)
    dofs = np.zeros((4, 1, sp.basis_size))
    for c in range(4):
        dofs[c] = c + 1.0
    U = DiscreteFunction(sp, m, dofs)
    m.mark(np.zeros(4), 1.0, 0.5, 0, 1)
    m.adapt([U])
    assert m.n_cells == 1
    assert U.means()[0, 0] == pytest.approx(2.5, abs=1e-14)


def test_stale_function_rejected():
    m = create_cartesian((0,), (1,), (4,))
    sp = Space("onb", 1, 1, 1)
    U = DiscreteFunction(sp, m)
    m.global_refine(1)
    m.mark(np.zeros(8), 1.0, 0.5, 0, 1)
    with pytest.raises(MeshError):
        m.adapt([U])


@pytest.mark.parametrize("periodic", [(False, False), (True, True), (True, False)])
@pytest.mark.parametrize("kind", ["onb", "gauss", "lobatto"])
def test_random_adaptation_invariants(periodic, kind):
    rng = np.random.default_rng(7)
    m = create_cartesian((0, 0), (1, 2), (3, 2), periodic=periodic)
    sp = Space(kind, 2, 2, 2)
    U = interpolate(sp, m, lambda x: np.stack([np.sin(3 * x[:, 0]), x[:, 1] ** 2], axis=1))
    total = U.totals()
    for _ in range(6):
        m.mark(rng.random(m.n_cells), 0.7, 0.4, 0, 3)
        m.adapt([U])
        assert m.max_level_jump() <= 1
        assert abs(m.volumes.sum() - 2.0) < 1e-12
        assert np.abs(face_closure(m)).max() < 1e-12
        np.testing.assert_allclose(U.totals(), total, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 15), min_size=1, max_size=6), st.integers(1, 3))
def test_balance_property_1d(cells, rounds):
    m = create_cartesian((0,), (1,), (4,))
    for r in range(rounds):
        eta = np.zeros(m.n_cells)
        eta[[c % m.n_cells for c in cells]] = 1.0
        m.mark(eta, 0.5, 0.0, 0, 4)
        m.adapt()
        assert m.max_level_jump() <= 1
        assert abs(m.volumes.sum() - 1.0) < 1e-12
    order = np.argsort(m.corner[:, 0])
    ends = m.corner[order, 0] + m.h[order, 0]
    np.testing.assert_allclose(ends[:-1], m.corner[order[1:], 0])
    assert ends[-1] == pytest.approx(1.0)

"""Hyperplane slicing, welding, orientation, and mesh exports."""

import numpy as np
import pytest

from iso4d import pipeline as P
from iso4d import slicing as S
from iso4d import toolkit as K
from iso4d.errors import FormatError
from iso4d.field import ExtractionConfig, Mode, Placement, ToxelField

from conftest import bits_of, make_pattern

CFG = ExtractionConfig(0.5, Mode.MIXED)


def single_toxel_mesh():
    scalar = np.zeros((3, 3, 3, 3))
    scalar[1, 1, 1, 1] = 1.0
    return P.extract_hypersurface(ToxelField(scalar), CFG)


def test_slice_tet_cases():
    tet = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1.0]])
    assert S.slice_tet(tet, 0.5).shape == (3, 3)
    tet = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 1], [0, 0, 1, 1.0]])
    assert S.slice_tet(tet, 0.5).shape == (4, 3)
    tet = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0.0]])
    assert S.slice_tet(tet, 0.5).shape == (0, 3)


def test_slice_tet_through_vertices_is_exact():
    tet = np.array([[0, 0, 0, 1], [1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 0.5]])
    poly = S.slice_tet(tet, 1.0)
    assert poly.shape == (0, 3)  # vertices at the plane count as below
    tet[3, 3] = 1.5
    poly = S.slice_tet(tet, 1.0)
    assert sorted(map(tuple, poly.tolist())) == [
        (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)]


def test_octahedron_slice_is_exact():
    mesh = single_toxel_mesh()
    tri = S.slice_mesh(mesh, 1.0, require_closed=True)
    assert tri.n_vertices == 6 and tri.n_triangles == 8
    center = np.array([1.0, 1.0, 1.0])
    expected = {tuple(center + 0.5 * sign * np.eye(3)[axis])
                for axis in range(3) for sign in (-1, 1)}
    got = {tuple(v) for v in tri.vertices.tolist()}
    assert got == expected  # exact, not approximate
    # outward orientation
    p = tri.vertices[tri.triangles]
    normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    outward = ((p.mean(axis=1) - center) * normals).sum(axis=1)
    assert (outward > 0).all()


def test_cross_polytope_sections_shrink_to_points():
    mesh = single_toxel_mesh()
    for tau in (0.51, 0.99, 1.49):
        tri = S.slice_mesh(mesh, tau, require_closed=True)
        assert tri.n_triangles > 0
        assert tri.is_closed()
        radius = np.abs(tri.vertices - [1, 1, 1]).max()
        assert radius == pytest.approx(1.5 - max(tau, 2 - tau), abs=1e-12)
    assert S.slice_mesh(mesh, 1.5).n_triangles == 0
    assert S.slice_mesh(mesh, 0.49).n_triangles == 0


def test_slice_welding_is_deterministic():
    rng = np.random.default_rng(2)
    fld = ToxelField(rng.random((5, 5, 5, 5)))
    mesh = P.extract_hypersurface(
        fld, ExtractionConfig(0.5, Mode.MIXED, Placement.INTERPOLATE))
    a = S.slice_mesh(mesh, 2.3)
    b = S.slice_mesh(mesh, 2.3)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)


def test_slices_of_validated_mesh_are_closed():
    rng = np.random.default_rng(4)
    fld = ToxelField(rng.random((5, 5, 5, 5)))
    mesh = P.extract_hypersurface(
        fld, ExtractionConfig(0.45, Mode.DISCONNECT, Placement.INTERPOLATE))
    for tau in np.linspace(0.0, 5.0, 21):  # includes vertex-coincident times
        tri = S.slice_mesh(mesh, float(tau))
        assert tri.is_closed(), tau


def test_quadrilateral_to_two_triangles_transition():
    # one cell: four past toxels active, two diagonal future ones, disconnect
    bits = bits_of(4, 5, 6, 7, 12, 14)
    mesh = P.cell_mesh(make_pattern(bits), ExtractionConfig(0.5, Mode.DISCONNECT))
    early = S.slice_mesh(mesh, 0.1)
    late = S.slice_mesh(mesh, 0.9)
    assert S.component_count(early) == 1
    assert S.component_count(late) == 2


def test_slice_series_basics():
    mesh = single_toxel_mesh()
    out = S.slice_series(mesh, [0.8, 1.2])
    assert len(out) == 2
    assert S.slice_series(mesh, []) == []
    with pytest.raises(FormatError):
        S.slice_series(mesh, [1.0, 0.5])


def test_slice_series_profile_follows_sphere_radius():
    fld = K.synth(K.SynthSpec("hypersphere", (14, 14, 14, 14), radius=5.0))
    mesh = P.extract_hypersurface(
        fld, ExtractionConfig(0.0, Mode.MIXED, Placement.INTERPOLATE))
    taus = np.linspace(2.0, 11.0, 100)
    counts = [tri.n_vertices for tri in S.slice_series(mesh, taus.tolist())]
    peak = int(np.argmax(counts))
    assert 33 <= peak <= 66  # largest section near the center time
    assert counts[0] < 0.5 * counts[peak]
    assert counts[-1] < 0.5 * counts[peak]


def test_attribute_interpolation_on_slices():
    # attribute equal to the time coordinate interpolates to tau exactly
    scalar = np.zeros((3, 3, 3, 3))
    scalar[1, 1, 1, 1] = 1.0
    t_attr = np.broadcast_to(np.arange(3.0), (3, 3, 3, 3)).copy()
    fld = ToxelField(scalar, aux={"when": t_attr})
    mesh = P.extract_hypersurface(fld, CFG)
    tri = S.slice_mesh(mesh, 1.25)
    assert tri.attrs["when"] == pytest.approx(1.25, abs=1e-12)


def test_obj_and_ply_outputs_are_stable(tmp_path):
    mesh = single_toxel_mesh()
    tri = S.slice_mesh(mesh, 1.1)
    a, b = tmp_path / "a.obj", tmp_path / "b.obj"
    S.write_obj(tri, a)
    S.write_obj(tri, b)
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.startswith("v ")
    assert "vn " in text and "\nf " in text

    scalar = np.zeros((3, 3, 3, 3))
    scalar[1, 1, 1, 1] = 1.0
    fld = ToxelField(scalar, aux={"q": np.full((3, 3, 3, 3), 2.0)})
    mesh2 = P.extract_hypersurface(fld, CFG)
    tri2 = S.slice_mesh(mesh2, 1.0)
    p = tmp_path / "a.ply"
    S.write_ply(tri2, p)
    text = p.read_text()
    assert "property double q" in text
    assert text.splitlines()[-1].startswith("3 ")

"""Cell indexing, labeling reconstruction, and path-table generation."""

import numpy as np
import pytest

from iso4d import topology
from iso4d.errors import FormatError, GeometryError
from iso4d.topology import MINUS, PLUS, X, Y, Z, T


def test_table_has_192_paths(table):
    assert len(table) == 192
    assert len(list(table.lines())) == 192


def test_site_coords_examples():
    assert topology.site_coords(0) == (0, 0, 0, 0)
    assert topology.site_coords(7) == (0, 1, 1, 0)
    assert topology.site_coords(15) == (0, 1, 1, 1)


def test_site_coords_bijective_and_split():
    seen = {topology.site_coords(s) for s in range(16)}
    assert len(seen) == 16
    for s in range(8):
        assert topology.site_coords(s)[3] == 0
        assert topology.site_coords(s + 8)[3] == 1
        assert topology.site_coords(s + 8)[:3] == topology.site_coords(s)[:3]


def test_site_coords_range_check():
    with pytest.raises(GeometryError):
        topology.site_coords(16)


def test_octant_paths_examples(table):
    assert table.octant_paths(0, PLUS).paths == ((32, 33), (33, 38), (38, 32))
    assert table.octant_paths(11, PLUS).paths == ((37, 36), (36, 49), (49, 37))
    assert table.octant_paths(31, MINUS).paths == ((55, 54), (54, 49), (49, 55))


def test_each_face_once_as_source_and_target(table):
    for trip in table:
        sources = [f for f, _ in trip.paths]
        targets = [t for _, t in trip.paths]
        assert sorted(sources) == sorted(targets)
        assert len(set(sources)) == 3


def test_minus_is_reversed_plus(table):
    for edge in range(32):
        plus = table.octant_paths(edge, PLUS)
        minus = table.octant_paths(edge, MINUS)
        assert minus.same_cycle(plus.reversed())


def test_reconstruction_counts(geom):
    assert geom.site_pos.shape == (16, 4)
    assert geom.edge_sites.shape == (32, 2)
    assert geom.face_sites.shape == (24, 4)
    # each edge lies in exactly 3 faces, each face has 4 edges
    assert geom.edge_faces.shape == (32, 3)
    assert geom.face_edges.shape == (24, 4)
    flat = geom.face_edges.ravel()
    assert np.bincount(flat, minlength=32).tolist() == [3] * 32


def test_reconstruction_anchor_edges(geom):
    assert sorted(geom.edge_sites[11]) == [6, 7]
    assert sorted(geom.edge_sites[9]) == [4, 7]
    assert sorted(geom.edge_sites[6]) == [3, 7]
    assert sorted(geom.edge_sites[18]) == [7, 15]


def test_reconstruction_examples(geom, table):
    assert set(geom.edge_faces[11]) == {36, 37, 49}
    assert table.incident_faces(11) & table.incident_faces(9) == {37}
    assert sorted(geom.face_edges[37 - 32]) == [8, 9, 10, 11]
    # face 37 is the xy-face at z=1, t=0
    corners = geom.face_corners(37)
    assert sorted(corners) == [4, 5, 6, 7]
    for s in corners:
        assert topology.site_coords(s)[2:] == (1, 0)


def test_face_corners_are_squares(geom):
    for face in range(32, 56):
        corners = geom.face_corners(face)
        assert len(set(corners)) == 4
        pos = np.array([topology.site_coords(s) for s in corners])
        # consecutive corners are lattice neighbors
        for k in range(4):
            step = np.abs(pos[k] - pos[(k + 1) % 4]).sum()
            assert step == 1


def test_face_corners_contain_edge_endpoints(geom):
    for edge in range(32):
        endpoints = set(int(v) for v in geom.edge_sites[edge])
        for face in geom.edge_faces[edge]:
            assert endpoints <= set(geom.face_corners(int(face)))


def test_edge_positions_are_midpoints(geom):
    lo = geom.site_pos[geom.edge_sites[:, 0]]
    hi = geom.site_pos[geom.edge_sites[:, 1]]
    assert np.array_equal(geom.edge_pos, 0.5 * (lo + hi))


def test_face_positions_are_corner_means(geom):
    for face in range(32, 56):
        corners = geom.face_corners(face)
        mean = np.mean([topology.site_coords(s) for s in corners], axis=0)
        assert np.array_equal(geom.face_pos[face - 32], mean)


def test_site_boundary_examples(geom):
    assert geom.site_boundary(7, X) == (11, PLUS)
    assert geom.site_boundary(7, T) == (18, PLUS)
    assert geom.site_boundary(7, Y) == (9, MINUS)
    assert geom.site_boundary(7, Z) == (6, MINUS)
    # site 0 has all-positive neighbors; its x-edge joins sites 0 and 1
    edge, orient = geom.site_boundary(0, X)
    assert orient == PLUS
    assert sorted(geom.edge_sites[edge]) == [0, 1]


def test_generated_table_matches_transcription(table, geom):
    generated = topology.generate_table(geom)
    assert topology.verify_table(generated, table) == []
    assert generated == table  # includes path order


def test_generated_minus_rows_are_reversed(geom):
    generated = topology.generate_table(geom)
    for edge in range(32):
        plus = generated.octant_paths(edge, PLUS)
        assert generated.octant_paths(edge, MINUS).same_cycle(plus.reversed())


def test_roundtrip_reconstruct_generate(table):
    geom = topology.reconstruct_geometry(table)
    assert topology.generate_table(geom) == table


def test_reconstruction_is_unique(table):
    # exercised implicitly by reconstruct_geometry, which raises on multiple
    # consistent labelings; run it fresh to make the assertion explicit
    geom = topology.reconstruct_geometry(table)
    assert geom is not None


def test_parse_rejects_bad_tables(table):
    text = "\n".join(f"{c} {topology.orientation_symbol(o)} {f} {t}"
                     for c, o, f, t in table.lines())
    topology.parse_table(text)  # sanity: the full dump parses
    truncated = "\n".join(text.splitlines()[:-1])
    with pytest.raises(FormatError):
        topology.parse_table(truncated)
    with pytest.raises(FormatError):
        topology.parse_table(text.replace("11 + 37 36", "11 + 37 99", 1))


def test_corrupt_transcription_is_detected(table):
    # swapping one path's target face breaks the incidence structure
    lines = []
    for c, o, f, t in table.lines():
        if (c, o, f, t) == (0, PLUS, 32, 33):
            t = 34
        if (c, o, f, t) == (0, PLUS, 33, 38):
            f = 34
        lines.append(f"{c} {topology.orientation_symbol(o)} {f} {t}")
    bad = topology.parse_table("\n".join(lines))
    with pytest.raises(GeometryError):
        topology.reconstruct_geometry(bad)

"""Cross-validation against the independent 3D cycle oracle.

Every reduced cycle of a 4-cell is confined to one of its eight bounding
cubes; restricted to that cube, the cycles must equal what the 3D oracle
produces for the cube's eight voxels under the same activity and the same
ambiguity decisions.  Directions agree up to a fixed per-cube relation: the
oracle winds exterior in the cube's own right-handed frame, while the 4-cell
winds in the frame the cube inherits from the cell, so cycles match directed
on cubes whose inherited frame is left-handed and reversed on the others.
"""

import numpy as np
import pytest

from iso4d import _oracle3 as o3
from iso4d import extraction as ex, topology
from iso4d.field import ExtractionConfig, Mode

from conftest import bits_of, make_pattern

LEAD_SIGN = {0: 1, 1: -1, 2: 1, 3: -1}


def _cube_maps(geom, axis, side):
    other = [a for a in range(4) if a != axis]
    site2corner = {}
    for s in range(16):
        p = topology.site_coords(s)
        if p[axis] == side:
            site2corner[s] = p[other[0]] + 2 * p[other[1]] + 4 * p[other[2]]
    corner2site = {v: k for k, v in site2corner.items()}
    edge4to3 = {}
    pair_of = {frozenset(map(int, geom.edge_sites[e])): e for e in range(32)}
    for e3 in range(12):
        lo, hi = int(o3.EDGES[e3, 0]), int(o3.EDGES[e3, 1])
        pair = frozenset((corner2site[lo], corner2site[hi]))
        if pair in pair_of:
            edge4to3[pair_of[pair]] = e3
    face4to3 = {}
    for f3 in range(6):
        quad = frozenset(corner2site[int(c)] for c in o3.FACES[f3])
        for f4 in range(32, 56):
            if frozenset(geom.face_corners(f4)) == quad:
                face4to3[f4] = f3
    assert len(edge4to3) == 12 and len(face4to3) == 6
    return site2corner, edge4to3, face4to3


@pytest.fixture(scope="module")
def cube_maps(geom):
    return {(c, k): _cube_maps(geom, c, k) for c in range(4) for k in (0, 1)}


def _canon(t):
    n = len(t)
    best = min(range(n), key=lambda i: t[i:] + t[:i])
    return t[best:] + t[:best]


def _check_pattern(geom, cube_maps, bits, mode, values):
    config = ExtractionConfig(0.5, mode)
    result = ex.extract_cell(make_pattern(bits, values), config)
    for (axis, side), (s2c, e43, f43) in cube_maps.items():
        bits3 = 0
        for s, corner in s2c.items():
            bits3 |= ((bits >> s) & 1) << corner
        connect3 = 0
        for f4, f3 in f43.items():
            if result.decisions.get(f4):
                connect3 |= 1 << f3
        oracle = o3.extract_cube(bits3, connect3)
        confined = [tuple(e43[e] for e in cyc) for cyc in result.cycles
                    if all(e in e43 for e in cyc)]
        mine = sorted(_canon(c) for c in confined)
        reverse = (side == 1 and LEAD_SIGN[axis] == 1) or \
                  (side == 0 and LEAD_SIGN[axis] == -1)
        if reverse:
            expect = sorted(_canon(tuple(reversed(c))) for c in oracle)
        else:
            expect = sorted(_canon(c) for c in oracle)
        assert mine == expect, (bits, mode, axis, side)


def test_canonical_patterns_match_oracle(geom, cube_maps):
    for bits in (bits_of(7), 0x00FF, 0xFF00, bits_of(7, 15), bits_of(4, 15),
                 bits_of(7, 13), bits_of(7, 9), bits_of(4, 5, 6, 7, 12, 14)):
        for mode in (Mode.CONNECT, Mode.DISCONNECT):
            _check_pattern(geom, cube_maps, bits, mode, np.zeros(16))


def test_random_patterns_match_oracle(geom, cube_maps):
    rng = np.random.default_rng(20260809)
    for trial in range(150):
        bits = int(rng.integers(1, 0xFFFF))
        mode = (Mode.CONNECT, Mode.DISCONNECT, Mode.MIXED)[trial % 3]
        _check_pattern(geom, cube_maps, bits, mode, rng.random(16))


def test_oracle_single_voxel_is_a_triangle():
    for corner in range(8):
        cycles = o3.extract_cube(1 << corner)
        assert len(cycles) == 1
        assert len(cycles[0]) == 3


def test_oracle_all_cube_patterns_stitch():
    lengths = set()
    for bits in range(1, 255):
        for connect in (0, 0x3F):
            for cyc in o3.extract_cube(bits, connect):
                lengths.add(len(cyc))
    assert lengths <= {3, 4, 5, 6, 7, 8, 9, 12}

"""Independent 3D surface-cycle oracle for validation.

Runs the one-dimension-down analogue of the cell pipeline on a 2x2x2 block
of voxels: each active->inactive transition contributes a directed path
through the separating face's center (here: the midpoint of a cube edge),
paths are paired at the cube's face centers, and the stitched cycles are the
closed surface polygons of that block.  Polygons wind so their normals point
to the exterior of the enclosed voxels.

Every cycle a 4-cell produces is confined to one of its eight bounding
cubes and must match what this oracle yields for that cube's eight voxels
under the same activity and the same ambiguity decisions.  The module is
deliberately written from scratch (own corner numbering, own table
generation) so the comparison is a genuine dual route, and it is not part of
the public surface.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import GeometryError

# Corners of the 2x2x2 block in binary order: id = x + 2y + 4z.
CORNER_POS = np.array(
    [(i & 1, (i >> 1) & 1, (i >> 2) & 1) for i in range(8)], dtype=np.int64
)

# Edges (support points of the oracle's cycles) and faces (its connectivity
# points), indexed by construction order below.
_EDGES: list[tuple[int, int]] = []       # (lo, hi) corner ids
_EDGE_AXIS: list[int] = []
for _a, _b in itertools.combinations(range(8), 2):
    _d = CORNER_POS[_b] - CORNER_POS[_a]
    if np.abs(_d).sum() == 1:
        _EDGES.append((_a, _b) if _d.sum() > 0 else (_b, _a))
        _EDGE_AXIS.append(int(np.nonzero(_d)[0][0]))
EDGES = np.array(_EDGES, dtype=np.int64)
EDGE_AXIS = np.array(_EDGE_AXIS, dtype=np.int64)
assert len(EDGES) == 12

_FACES: list[tuple[int, int, int, int]] = []
for _axes in itertools.combinations(range(3), 2):
    _rest = next(c for c in range(3) if c not in _axes)
    for _fixed in (0, 1):
        corners = []
        for _da, _db in ((0, 0), (1, 0), (1, 1), (0, 1)):
            p = [0, 0, 0]
            p[_axes[0]], p[_axes[1]] = _da, _db
            p[_rest] = _fixed
            corners.append(p[0] + 2 * p[1] + 4 * p[2])
        _FACES.append(tuple(corners))
FACES = np.array(_FACES, dtype=np.int64)  # (6, 4) cyclic corner ids
assert len(FACES) == 6

_edge_of_pair = {frozenset(map(int, e)): i for i, e in enumerate(EDGES)}
FACE_EDGES = np.array(
    [[_edge_of_pair[frozenset((int(f[k]), int(f[(k + 1) % 4])))]
      for k in range(4)] for f in FACES],
    dtype=np.int64,
)

CORNER_EDGE = np.full((8, 3), -1, dtype=np.int64)
for _e, (_lo, _hi) in enumerate(EDGES):
    CORNER_EDGE[_lo, EDGE_AXIS[_e]] = _e
    CORNER_EDGE[_hi, EDGE_AXIS[_e]] = _e

_face_by_corners = {frozenset(map(int, f)): i for i, f in enumerate(FACES)}


def _face_at(corner: int, axis_a: int, axis_b: int) -> int:
    base = CORNER_POS[corner]
    quad = set()
    for da, db in itertools.product((0, 1), repeat=2):
        p = base.copy()
        p[axis_a] ^= da
        p[axis_b] ^= db
        quad.add(int(p[0] + 2 * p[1] + 4 * p[2]))
    return _face_by_corners[frozenset(quad)]


def _build_paths():
    """Successor map (edge, orient, face_in) -> face_out.

    Derived from the exterior-normal convention: each voxel's local triangle
    over its three adjacent edge midpoints winds so that its normal points
    away from the voxel, and the per-transition paths read off that winding.
    """
    succ = np.full((12, 2, 6), -1, dtype=np.int64)
    mid = 0.5 * (CORNER_POS[EDGES[:, 0]] + CORNER_POS[EDGES[:, 1]])
    for corner in range(8):
        supports = [mid[CORNER_EDGE[corner, a]] for a in range(3)]
        tri = np.array(supports)
        normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        outward = tri.mean(axis=0) - CORNER_POS[corner]
        order = (0, 1, 2) if np.dot(normal, outward) > 0 else (0, 2, 1)
        for i in range(3):
            axis = order[i]
            prev_axis = order[i - 1]
            next_axis = order[(i + 1) % 3]
            edge = CORNER_EDGE[corner, axis]
            orient = 1 if EDGES[edge, 0] == corner else 0
            f_in = _face_at(corner, prev_axis, axis)
            f_out = _face_at(corner, axis, next_axis)
            succ[edge, orient, f_in] = f_out
    return succ


PATH_SUCC = _build_paths()


def extract_cube(bits: int, connect_faces: int = 0) -> list[tuple[int, ...]]:
    """Surface cycles of one 2x2x2 voxel block.

    ``bits`` holds the activity of the 8 corners (bit i = corner i);
    ``connect_faces`` selects, per face index, the connect resolution at
    ambiguous faces (diagonally active corners).  Returns directed cycles of
    edge indices.
    """
    octants = {}
    for e in range(12):
        lo, hi = int(EDGES[e, 0]), int(EDGES[e, 1])
        a, b = (bits >> lo) & 1, (bits >> hi) & 1
        if a != b:
            octants[e] = 1 if a else 0

    def pair(face: int, e_in: int) -> int:
        edges = FACE_EDGES[face]
        corners = FACES[face]
        act = [(bits >> int(c)) & 1 for c in corners]
        trans = [k for k in range(4) if act[k] != act[(k + 1) % 4]]
        if len(trans) == 2:
            others = [int(edges[k]) for k in trans if int(edges[k]) != e_in]
            return others[0]
        if len(trans) == 4:
            connect = (connect_faces >> face) & 1
            k = [i for i in range(4) if int(edges[i]) == e_in][0]
            pivot_at_k = act[k] == (0 if connect else 1)
            return int(edges[(k - 1) % 4] if pivot_at_k else edges[(k + 1) % 4])
        raise GeometryError(f"cube face {face} has odd transition parity")

    cycles = []
    seen = set()
    for e0 in sorted(octants):
        for f0 in range(6):
            if PATH_SUCC[e0, octants[e0], f0] < 0 or (e0, f0) in seen:
                continue
            cyc = []
            e, f_in = e0, f0
            while True:
                seen.add((e, f_in))
                cyc.append(e)
                f_out = int(PATH_SUCC[e, octants[e], f_in])
                if f_out < 0:
                    raise GeometryError("walk entered an edge against its path")
                e = pair(f_out, e)
                f_in = f_out
                if (e, f_in) == (e0, f0):
                    break
            cycles.append(tuple(cyc))
    return cycles

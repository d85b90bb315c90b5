"""Combinatorics of the 2x2x2x2 cell and its directed vector-path table.

A 4-cell is the tesseract spanned by a 2x2x2x2 block of toxels (time-varying
voxels).  Its 56 indexed points are

* 16 *sites* (ids 0..15): the toxel centers at the tesseract corners.  Ids
  0..7 lie at t=0, ids 8..15 at t=1.
* 32 *edge centers* (ids 0..31): midpoints of tesseract edges.  Each is the
  center of the 3D boundary cube separating two adjacent toxels and is a
  potential support point of the extracted hypersurface.
* 24 *face centers* (ids 32..55): centers of the square faces.  These are the
  connectivity points where boundary-cube octants link up; they are removed
  from the final geometry.

Every active->inactive transition along an axis contributes one boundary-cube
octant, encoded as a triplet of directed paths (face -> edge -> face) cycling
through the three faces incident to the edge.  The full table has
32 edges x 2 orientations x 3 paths = 192 directed paths.  It is shipped as a
transcribed data file (``data/tableI.txt``) and independently regenerated from
the orientation convention by :func:`generate_table`; the two must agree
exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import AmbiguousLabelingError, FormatError, GeometryError

X, Y, Z, T = 0, 1, 2, 3
AXES = (X, Y, Z, T)
AXIS_NAMES = "xyzt"

N_SITES = 16
N_EDGES = 32
N_FACES = 24
FACE_BASE = 32  # face ids run 32..55

PLUS = 1
MINUS = 0

# Spatial corner ids walk a ring on each z-level: 0..3 at z=0, 4..7 at z=1.
_SPATIAL_RING = (
    (0, 0, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (1, 1, 1),
    (0, 1, 1),
)

# Edge ids of the four boundary-cube centers incident to site 7, one per
# axis.  These four assignments pin the whole labeling (see
# reconstruct_geometry); everything else is forced by table incidence.
SITE7_AXIS_EDGES = {X: 11, Y: 9, Z: 6, T: 18}


def site_coords(site: int) -> tuple[int, int, int, int]:
    """Lattice corner (x, y, z, t) of a site id."""
    if not 0 <= site < N_SITES:
        raise GeometryError(f"site id out of range: {site}")
    x, y, z = _SPATIAL_RING[site % 8]
    return (x, y, z, site // 8)


def site_from_coords(pos) -> int:
    x, y, z, t = (int(c) for c in pos)
    return _SPATIAL_RING.index((x, y, z)) + 8 * t


def orientation_symbol(orient: int) -> str:
    return "+" if orient == PLUS else "-"


@dataclass(frozen=True)
class PathTriplet:
    """The three directed face->edge->face paths of one boundary octant."""

    center: int
    orientation: int
    paths: tuple[tuple[int, int], ...]  # ((from, to), ...) through `center`

    def faces(self) -> frozenset[int]:
        return frozenset(f for f, _ in self.paths)

    def successor(self, face_in: int) -> int:
        """Outgoing face for a path entering the center from ``face_in``."""
        for f, t in self.paths:
            if f == face_in:
                return t
        raise GeometryError(
            f"face {face_in} is not incident to edge {self.center}"
        )

    def reversed(self) -> "PathTriplet":
        rev = tuple((t, f) for f, t in self.paths)
        flipped = MINUS if self.orientation == PLUS else PLUS
        return PathTriplet(self.center, flipped, rev)

    def same_cycle(self, other: "PathTriplet") -> bool:
        """Rotation-invariant equality of the directed path sets."""
        return self.center == other.center and set(self.paths) == set(other.paths)


class PathTable:
    """All 192 directed paths, indexed by (edge center, orientation)."""

    def __init__(self, triplets):
        self._by_key = {}
        for trip in triplets:
            key = (trip.center, trip.orientation)
            if key in self._by_key:
                raise FormatError(f"duplicate triplet for {key}")
            self._by_key[key] = trip
        if len(self._by_key) != 2 * N_EDGES:
            raise FormatError(
                f"expected {2 * N_EDGES} triplets, got {len(self._by_key)}"
            )
        for edge in range(N_EDGES):
            plus = self._by_key[(edge, PLUS)]
            minus = self._by_key[(edge, MINUS)]
            if len(plus.faces()) != 3 or plus.faces() != minus.faces():
                raise FormatError(f"inconsistent face set at edge {edge}")
            for trip in (plus, minus):
                if {f for f, _ in trip.paths} != {t for _, t in trip.paths}:
                    raise FormatError(f"paths at edge {edge} do not close a cycle")

    def octant_paths(self, center: int, orientation: int) -> PathTriplet:
        return self._by_key[(center, orientation)]

    def incident_faces(self, edge: int) -> frozenset[int]:
        return self._by_key[(edge, PLUS)].faces()

    def __iter__(self):
        return iter(self._by_key.values())

    def __len__(self):
        return sum(len(t.paths) for t in self._by_key.values())

    def __eq__(self, other):
        if not isinstance(other, PathTable):
            return NotImplemented
        return self._by_key == other._by_key

    def lines(self):
        """All paths as (center, orient, from, to), in table order."""
        for edge in range(N_EDGES):
            for orient in (PLUS, MINUS):
                trip = self._by_key[(edge, orient)]
                for f, t in trip.paths:
                    yield (edge, orient, f, t)


def parse_table(text: str) -> PathTable:
    """Parse the transcription format: one ``center orient from to`` per line."""
    grouped: dict[tuple[int, int], list[tuple[int, int]]] = {}
    count = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4 or fields[1] not in "+-":
            raise FormatError(f"bad table line {lineno}: {raw!r}")
        center, frm, to = int(fields[0]), int(fields[2]), int(fields[3])
        if not (0 <= center < N_EDGES and FACE_BASE <= frm < 56 and FACE_BASE <= to < 56):
            raise FormatError(f"id out of range on table line {lineno}: {raw!r}")
        orient = PLUS if fields[1] == "+" else MINUS
        grouped.setdefault((center, orient), []).append((frm, to))
        count += 1
    if count != 192:
        raise FormatError(f"expected 192 paths, got {count}")
    triplets = [
        PathTriplet(center, orient, tuple(paths))
        for (center, orient), paths in grouped.items()
    ]
    return PathTable(triplets)


def load_table() -> PathTable:
    text = resources.files("iso4d.data").joinpath("tableI.txt").read_text()
    return parse_table(text)


class CellGeometry:
    """Canonical coordinates and incidence for the 56 points of a 4-cell.

    All arrays are fixed at construction; instances are immutable in practice
    and safe to share across workers.

    Attributes
    ----------
    site_pos : (16, 4) int array, corners in {0,1}^4
    edge_sites : (32, 2) int array, (lo, hi) with hi = lo + unit(edge_axis)
    edge_axis : (32,) int array
    edge_pos : (32, 4) float array, edge midpoints
    edge_faces : (32, 3) int array, incident face ids (ascending)
    face_sites : (24, 4) int array, corner sites in cyclic order
    face_edges : (24, 4) int array, edge i joins corners i and i+1
    face_pos : (24, 4) float array, face centers
    site_edge : (16, 4) int array, edge along each axis at each site
    """

    def __init__(self, edge_to_sites: dict[int, frozenset[int]],
                 face_to_sites: dict[int, frozenset[int]]):
        self.site_pos = np.array([site_coords(s) for s in range(N_SITES)], dtype=np.int64)

        self.edge_sites = np.zeros((N_EDGES, 2), dtype=np.int64)
        self.edge_axis = np.zeros(N_EDGES, dtype=np.int64)
        for e, pair in edge_to_sites.items():
            a, b = sorted(pair)
            pa, pb = self.site_pos[a], self.site_pos[b]
            diff = pb - pa
            axes = np.nonzero(diff)[0]
            if len(axes) != 1 or abs(diff[axes[0]]) != 1:
                raise GeometryError(f"edge {e} does not join adjacent sites")
            axis = int(axes[0])
            lo, hi = (a, b) if diff[axis] > 0 else (b, a)
            self.edge_sites[e] = (lo, hi)
            self.edge_axis[e] = axis
        self.edge_pos = 0.5 * (
            self.site_pos[self.edge_sites[:, 0]] + self.site_pos[self.edge_sites[:, 1]]
        )

        self.face_sites = np.zeros((N_FACES, 4), dtype=np.int64)
        self.face_pos = np.zeros((N_FACES, 4))
        for f, sites in face_to_sites.items():
            self.face_sites[f - FACE_BASE] = _cyclic_corners(sites, self.site_pos)
            self.face_pos[f - FACE_BASE] = self.site_pos[list(sites)].mean(axis=0)

        # site -> per-axis edge, and edge <-> face incidence
        self.site_edge = np.full((N_SITES, 4), -1, dtype=np.int64)
        for e in range(N_EDGES):
            lo, hi = self.edge_sites[e]
            axis = self.edge_axis[e]
            self.site_edge[lo, axis] = e
            self.site_edge[hi, axis] = e
        if (self.site_edge < 0).any():
            raise GeometryError("some site/axis pair has no edge")

        edge_of_pair = {
            frozenset(self.edge_sites[e]): e for e in range(N_EDGES)
        }
        self.face_edges = np.zeros((N_FACES, 4), dtype=np.int64)
        edge_faces: dict[int, list[int]] = {e: [] for e in range(N_EDGES)}
        for fi in range(N_FACES):
            corners = self.face_sites[fi]
            for k in range(4):
                pair = frozenset((int(corners[k]), int(corners[(k + 1) % 4])))
                e = edge_of_pair[pair]
                self.face_edges[fi, k] = e
                edge_faces[e].append(fi + FACE_BASE)
        self.edge_faces = np.array(
            [sorted(edge_faces[e]) for e in range(N_EDGES)], dtype=np.int64
        )
        if self.edge_faces.shape != (N_EDGES, 3):
            raise GeometryError("every edge must lie in exactly 3 faces")

        self._face_by_sites = {
            frozenset(int(s) for s in self.face_sites[fi]): fi + FACE_BASE
            for fi in range(N_FACES)
        }

    def face_at(self, site: int, axis_a: int, axis_b: int) -> int:
        """Face spanned by two axes at a site's corner."""
        base = self.site_pos[site]
        corners = set()
        for da, db in itertools.product((0, 1), repeat=2):
            p = base.copy()
            p[axis_a] = base[axis_a] ^ da
            p[axis_b] = base[axis_b] ^ db
            corners.add(site_from_coords(p))
        return self._face_by_sites[frozenset(corners)]

    def face_corners(self, face: int) -> tuple[int, int, int, int]:
        """The four corner sites of a face, in cyclic order."""
        if not FACE_BASE <= face < FACE_BASE + N_FACES:
            raise GeometryError(f"face id out of range: {face}")
        return tuple(int(s) for s in self.face_sites[face - FACE_BASE])

    def site_boundary(self, site: int, axis: int) -> tuple[int, int]:
        """Boundary-cube center between a site and its in-cell axis neighbor.

        Returns (edge id, orientation); PLUS when the neighbor sits in the
        positive axis direction.
        """
        edge = int(self.site_edge[site, axis])
        orient = PLUS if self.edge_sites[edge, 0] == site else MINUS
        return edge, orient


def _cyclic_corners(sites, site_pos) -> list[int]:
    """Order a face's 4 corner sites cyclically, starting deterministically."""
    sites = sorted(sites)
    start = sites[0]
    adjacent = [
        s for s in sites[1:]
        if int(np.sum(np.abs(site_pos[s] - site_pos[start]))) == 1
    ]
    if len(adjacent) != 2:
        raise GeometryError("face corners do not form a square")
    second = min(adjacent)
    fourth = max(adjacent)
    third = next(s for s in sites if s not in (start, second, fourth))
    return [start, second, third, fourth]


def reconstruct_geometry(table: PathTable,
                         anchors: dict[int, int] | None = None) -> CellGeometry:
    """Recover the unique point labeling implied by the table's incidence.

    The table fixes, for every edge id, the set of three face ids its paths
    run through.  Matching that incidence structure against the tesseract's
    edge/face lattice, anchored on the four known edge ids at site 7, admits
    exactly one labeling; anything else means the transcription is corrupt
    (no solution) or under-constrained (several solutions -- reported, never
    guessed).
    """
    if anchors is None:
        anchors = SITE7_AXIS_EDGES

    site_pos = {s: np.array(site_coords(s)) for s in range(N_SITES)}

    # Geometric edges / faces as frozensets of corner sites.
    geo_edges = []
    for a, b in itertools.combinations(range(N_SITES), 2):
        if np.sum(np.abs(site_pos[a] - site_pos[b])) == 1:
            geo_edges.append(frozenset((a, b)))
    geo_faces = []
    for axes in itertools.combinations(AXES, 2):
        rest = [c for c in AXES if c not in axes]
        for fixed in itertools.product((0, 1), repeat=2):
            corners = set()
            for var in itertools.product((0, 1), repeat=2):
                p = np.zeros(4, dtype=int)
                p[list(axes)] = var
                p[rest] = fixed
                corners.add(site_from_coords(p))
            geo_faces.append(frozenset(corners))
    if len(geo_edges) != N_EDGES or len(geo_faces) != N_FACES:
        raise GeometryError("tesseract enumeration failed")

    faces_of_geo_edge = {
        ge: frozenset(gf for gf in geo_faces if ge <= gf) for ge in geo_edges
    }
    table_faces = {e: table.incident_faces(e) for e in range(N_EDGES)}

    # Seed the search with the anchored edges at site 7.
    seed = {}
    pos7 = site_pos[7]
    for axis, edge_id in anchors.items():
        neighbor_pos = pos7.copy()
        neighbor_pos[axis] ^= 1
        seed[edge_id] = frozenset((7, site_from_coords(neighbor_pos)))

    solutions = []
    _search(dict(seed), {}, table_faces, faces_of_geo_edge, geo_edges, solutions)
    if not solutions:
        raise GeometryError("no labeling is consistent with the table")
    if len(solutions) > 1:
        raise AmbiguousLabelingError(
            f"{len(solutions)} labelings are consistent with the table and anchors"
        )
    edge_map, face_map = solutions[0]
    return CellGeometry(edge_map, {f: gf for f, gf in face_map.items()})


def _search(edge_map, face_map, table_faces, faces_of_geo_edge, geo_edges, out):
    """Backtracking assignment of edge/face ids to geometric edges/faces.

    Collects every complete consistent labeling so uniqueness can be asserted
    by the caller.
    """
    edge_map, face_map = dict(edge_map), dict(face_map)
    if not _propagate(edge_map, face_map, table_faces, faces_of_geo_edge):
        return
    if len(edge_map) == N_EDGES:
        out.append((edge_map, face_map))
        return
    # Branch on the unassigned edge with the fewest geometric candidates.
    used = set(edge_map.values())
    best_e, best_cands = None, None
    for e in range(N_EDGES):
        if e in edge_map:
            continue
        cands = [ge for ge in geo_edges if ge not in used
                 and _edge_consistent(e, ge, face_map, table_faces, faces_of_geo_edge)]
        if best_cands is None or len(cands) < len(best_cands):
            best_e, best_cands = e, cands
        if len(cands) <= 1:
            break
    for ge in best_cands or ():
        trial = dict(edge_map)
        trial[best_e] = ge
        _search(trial, face_map, table_faces, faces_of_geo_edge, geo_edges, out)


def _edge_consistent(e, ge, face_map, table_faces, faces_of_geo_edge):
    for f in table_faces[e]:
        if f in face_map and face_map[f] not in faces_of_geo_edge[ge]:
            return False
    assigned = {f: gf for f, gf in face_map.items() if f in table_faces[e]}
    return len(set(assigned.values())) == len(assigned)


def _propagate(edge_map, face_map, table_faces, faces_of_geo_edge):
    """Close edge/face assignments under incidence; False on contradiction."""
    changed = True
    while changed:
        changed = False
        # Two assigned edges sharing a table face pin that face to the unique
        # geometric face their geometric edges share.
        by_face: dict[int, list] = {}
        for e, ge in edge_map.items():
            for f in table_faces[e]:
                by_face.setdefault(f, []).append(ge)
        for f, ges in by_face.items():
            shared = None
            for ge in ges:
                fs = faces_of_geo_edge[ge]
                shared = fs if shared is None else shared & fs
            if f in face_map:
                if face_map[f] not in shared:
                    return False
            elif len(ges) >= 2:
                if len(shared) == 0:
                    return False
                if len(shared) == 1:
                    face_map[f] = next(iter(shared))
                    changed = True
        # An edge with two assigned faces is pinned to their shared edge.
        used_geo = set(edge_map.values())
        for e in range(N_EDGES):
            if e in edge_map:
                continue
            pinned = [face_map[f] for f in table_faces[e] if f in face_map]
            if len(pinned) < 2:
                continue
            cands = [
                ge for ge, fs in faces_of_geo_edge.items()
                if ge not in used_geo and all(gf in fs for gf in pinned)
            ]
            if not cands:
                return False
            if len(cands) == 1:
                edge_map[e] = cands[0]
                used_geo.add(cands[0])
                changed = True
    # Face ids must stay injective.
    return len(set(face_map.values())) == len(face_map)


# Parity sign of listing `first` ahead of the remaining axes in ascending
# order, as a permutation of (x, y, z, t).
_LEAD_SIGN = {X: 1, Y: -1, Z: 1, T: -1}


def generate_table(geom: CellGeometry) -> PathTable:
    """Rebuild all 192 paths from the orientation convention alone.

    For every site and every axis, the boundary octant's three paths are read
    off the directed facet triangles of the site's local tetrahedron (the one
    spanned by its four adjacent edge midpoints).  Each facet lies in one of
    the cell's bounding cubes; its winding is chosen so that, measured in the
    orientation that cube inherits from the cell's outward side, the facet
    normal points toward the site it encloses.  Octants on the low side of an
    axis wind one way, octants on the high side the other, which is exactly
    the +/- column structure of the table.
    """
    triplets = []
    for site in range(N_SITES):
        pos = geom.site_pos[site]
        supports = {axis: geom.edge_pos[geom.site_edge[site, axis]] for axis in AXES}
        directed = {}
        for omit in AXES:
            tri_axes = [a for a in AXES if a != omit]
            directed[omit] = _directed_facet(tri_axes, omit, pos, supports)
        for axis in AXES:
            edge, orient = geom.site_boundary(site, axis)
            paths = _chain_paths(geom, site, axis, directed)
            triplets.append(PathTriplet(edge, orient, paths))
    return PathTable(triplets)


def _directed_facet(tri_axes, omit, site_pos, supports):
    """Orient one facet triangle of a site's local tetrahedron.

    Returns the three axes in winding order.  The triangle lives in the
    bounding cube {omit = site coordinate}; the winding is fixed by requiring
    its normal, taken in that cube's induced orientation, to point at the
    enclosed site.
    """
    keep = [a for a in AXES if a != omit]
    tri = np.array([[supports[a][k] for k in keep] for a in tri_axes])
    center = np.array([site_pos[k] for k in keep], dtype=float)
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    inward = center - tri.mean(axis=0)
    side = 1.0 if site_pos[omit] == 1 else -1.0
    if side * _LEAD_SIGN[omit] * float(np.dot(normal, inward)) >= 0:
        return tuple(tri_axes)
    return (tri_axes[0], tri_axes[2], tri_axes[1])


def _chain_paths(geom, site, axis, directed):
    """Emit the three paths through one support, chained in table order.

    The chain starts with the path lying in the facet that omits the highest
    axis other than the edge's own.
    """
    start_omit = max(a for a in AXES if a != axis)
    first = _facet_path(geom, site, axis, directed[start_omit])
    trip = {first[0]: first}
    cursor = first[1]
    for omit in AXES:
        if omit == axis or omit == start_omit:
            continue
        frm, to = _facet_path(geom, site, axis, directed[omit])
        trip[frm] = (frm, to)
    ordered = [first]
    for _ in range(2):
        nxt = trip[cursor]
        ordered.append(nxt)
        cursor = nxt[1]
    if cursor != first[0]:
        raise GeometryError("octant paths do not chain into a 3-cycle")
    return tuple(ordered)


def _facet_path(geom, site, axis, winding):
    """The (from, to) faces of the path this facet contributes at `axis`."""
    i = winding.index(axis)
    prev_axis = winding[i - 1]
    next_axis = winding[(i + 1) % 3]
    return (
        geom.face_at(site, prev_axis, axis),
        geom.face_at(site, axis, next_axis),
    )


def verify_table(generated: PathTable, reference: PathTable):
    """Compare two tables path by path; returns a list of mismatch strings."""
    mismatches = []
    ref = {(c, o, f, t) for (c, o, f, t) in reference.lines()}
    gen = {(c, o, f, t) for (c, o, f, t) in generated.lines()}
    for line in sorted(ref - gen):
        mismatches.append(f"missing path {line}")
    for line in sorted(gen - ref):
        mismatches.append(f"spurious path {line}")
    return mismatches


_GEOMETRY = None
_TABLE = None


def standard_table() -> PathTable:
    """The transcribed table (cached)."""
    global _TABLE
    if _TABLE is None:
        _TABLE = load_table()
    return _TABLE


def standard_geometry() -> CellGeometry:
    """The unique labeling reconstructed from the transcribed table (cached)."""
    global _GEOMETRY
    if _GEOMETRY is None:
        _GEOMETRY = reconstruct_geometry(standard_table())
    return _GEOMETRY

"""Constant-time hyperplane slicing of 4D tet meshes into triangle meshes.

The slice plane t = tau is perturbed symbolically: vertices with t <= tau
count as below the plane (the limit of t = tau + delta as delta -> 0+), so
point, edge, and whole-volume contacts never need case handling, while
crossing positions are still interpolated at tau exactly.  Tets that are
flat in time are skipped entirely; every other tet contributes a triangle
(3-1 split) or a cyclically ordered quadrilateral (2-2 split).

Slice vertices are welded by (tet edge, tau): the two tets sharing a facet
interpolate the same global vertex pair, so adjacent polygons share vertices
exactly and slices of a closed mesh are closed.  Triangles wind so their 3D
normal aligns with the spatial part of the parent tet's outward 4-normal.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import FormatError, IOFailure, ValidationFailure
from .tessellation import TetMesh4


@dataclass(frozen=True)
class SlicePlane:
    """Constant-time plane t = tau, shifted by an infinitesimal delta.

    ``delta`` is symbolic: it only breaks ties in the vertex classification
    and never enters the interpolation arithmetic.
    """

    tau: float


@dataclass
class TriMesh3:
    """Oriented triangle mesh with optional per-vertex attributes."""

    vertices: np.ndarray                     # (N, 3) float64
    triangles: np.ndarray                    # (M, 3) int64
    attrs: dict[str, np.ndarray] = dc_field(default_factory=dict)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def is_closed(self) -> bool:
        """Every undirected edge in exactly 2 triangles, traversed oppositely."""
        if self.n_triangles == 0:
            return True
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        lo = e.min(axis=1).astype(np.int64)
        hi = e.max(axis=1).astype(np.int64)
        forward = e[:, 0] == lo
        key = lo * self.n_vertices + hi
        order = np.argsort(key, kind="stable")
        key = key[order]
        fwd = forward[order]
        new = np.ones(len(key), dtype=bool)
        new[1:] = key[1:] != key[:-1]
        starts = np.flatnonzero(new)
        sizes = np.diff(np.append(starts, len(key)))
        if (sizes != 2).any():
            return False
        return bool((fwd[starts] != fwd[starts + 1]).all())


def _snap_tol(tau: float) -> float:
    """Vertices this close to the plane count as lying on it.

    A few ulps of slack keeps vertex times that differ from tau only by
    accumulated rounding (e.g. centroids of values symmetric about tau) on
    the symbolic-perturbation side instead of producing ill-conditioned
    slivers.
    """
    return 8.0 * np.finfo(np.float64).eps * max(1.0, abs(tau))


def slice_tet(points, plane) -> np.ndarray:
    """Cross-section polygon of one tet: 0, 3, or 4 vertices, cyclic order.

    ``points`` is a (4, 4) array of tet vertex positions; the last
    coordinate is time.  Vertices at the plane time count as below it.
    """
    tau = plane.tau if isinstance(plane, SlicePlane) else float(plane)
    points = np.asarray(points, dtype=np.float64)
    below = points[:, 3] <= tau + _snap_tol(tau)
    nb = int(below.sum())
    if nb in (0, 4):
        return np.zeros((0, 3))
    b_idx = np.flatnonzero(below)
    a_idx = np.flatnonzero(~below)

    def cross(bi, ai):
        pb, pa = points[bi], points[ai]
        s = min(max((tau - pb[3]) / (pa[3] - pb[3]), 0.0), 1.0)
        return (pb + s * (pa - pb))[:3]

    if nb == 1:
        return np.array([cross(b_idx[0], a) for a in a_idx])
    if nb == 3:
        return np.array([cross(b, a_idx[0]) for b in b_idx])
    b0, b1 = b_idx
    a0, a1 = a_idx
    return np.array([cross(b0, a0), cross(b0, a1), cross(b1, a1), cross(b1, a0)])


def slice_mesh(mesh: TetMesh4, tau: float,
               require_closed: bool = False) -> TriMesh3:
    """Slice a tet mesh at constant time and weld the result."""
    if mesh.n_tets == 0:
        return TriMesh3(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                        {name: np.zeros(0) for name in mesh.attrs})
    times = mesh.vertices[:, 3]
    below = times <= tau + _snap_tol(tau)
    tet_below = below[mesh.tets]
    nb = tet_below.sum(axis=1)
    active = (nb > 0) & (nb < 4)
    tets = mesh.tets[active]
    tb = tet_below[active]
    normals = mesh.normals[active]

    # crossing edges per sliced tet, ordered (below, above)
    edges = []       # rows of (vid_below, vid_above)
    polys = []       # per tet: list of row indices into edges, cyclic
    for row in range(len(tets)):
        b = [int(v) for v, isb in zip(tets[row], tb[row]) if isb]
        a = [int(v) for v, isb in zip(tets[row], tb[row]) if not isb]
        base = len(edges)
        if len(b) == 1:
            edges += [(b[0], a[0]), (b[0], a[1]), (b[0], a[2])]
        elif len(b) == 3:
            edges += [(b[0], a[0]), (b[1], a[0]), (b[2], a[0])]
        else:
            edges += [(b[0], a[0]), (b[0], a[1]), (b[1], a[1]), (b[1], a[0])]
        polys.append(list(range(base, len(edges))))

    if not edges:
        return TriMesh3(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                        {name: np.zeros(0) for name in mesh.attrs})
    edges = np.array(edges, dtype=np.int64)
    ekey = edges.min(axis=1) * mesh.n_vertices + edges.max(axis=1)
    keys, edge_vid = np.unique(ekey, return_inverse=True)

    kb = keys // mesh.n_vertices
    ka = keys % mesh.n_vertices
    # orient each welded pair (below, above) from the vertex classification
    swap = ~below[kb]
    vb = np.where(swap, ka, kb)
    va = np.where(swap, kb, ka)
    pb, pa = mesh.vertices[vb], mesh.vertices[va]
    s = np.clip((tau - pb[:, 3]) / (pa[:, 3] - pb[:, 3]), 0.0, 1.0)
    pos4 = pb + s[:, None] * (pa - pb)
    verts = pos4[:, :3]
    attrs = {
        name: vals[vb] + s * (vals[va] - vals[vb])
        for name, vals in mesh.attrs.items()
    }

    # Windings are judged at the midpoint of each tet's own slicing interval
    # (max below-time, min above-time).  The section keeps one combinatorial
    # type there, its plane normal stays parallel to the parent's spatial
    # normal, and the winding sign is constant over the whole interval, so
    # this equals the symbolically perturbed winding even when the plane
    # passes through vertices.
    times_tet = times[tets]
    lo_t = np.where(tb, times_tet, -np.inf).max(axis=1)
    hi_t = np.where(tb, np.inf, times_tet).min(axis=1)
    tau_eval_tet = 0.5 * (lo_t + hi_t)
    occ_tet = np.repeat(np.arange(len(polys)),
                        [len(p) for p in polys])
    pbo = mesh.vertices[edges[:, 0]]
    pao = mesh.vertices[edges[:, 1]]
    s_eval = ((tau_eval_tet[occ_tet] - pbo[:, 3])
              / (pao[:, 3] - pbo[:, 3]))
    eval_pos = (pbo + s_eval[:, None] * (pao - pbo))[:, :3]

    tris = []
    for row, poly in enumerate(polys):
        n_spatial = normals[row, :3]
        if len(poly) == 3:
            candidates = [poly]
        else:
            m = min(range(4), key=lambda i: keys[edge_vid[poly[i]]])
            ordered = poly[m:] + poly[:m]
            candidates = [[ordered[0], ordered[1], ordered[2]],
                          [ordered[0], ordered[2], ordered[3]]]
        for occ in candidates:
            p0, p1, p2 = eval_pos[occ[0]], eval_pos[occ[1]], eval_pos[occ[2]]
            n3 = np.cross(p1 - p0, p2 - p0)
            tri = [int(edge_vid[i]) for i in occ]
            if float(np.dot(n3, n_spatial)) < 0.0:
                tri = [tri[0], tri[2], tri[1]]
            tris.append(tri)

    out = TriMesh3(verts, np.array(tris, dtype=np.int64), attrs)
    if require_closed and not out.is_closed():
        raise ValidationFailure(f"slice at t={tau} is not closed")
    return out


def slice_series(mesh: TetMesh4, taus, require_closed: bool = False):
    """Independent slices for a sorted list of times."""
    taus = list(taus)
    if any(b < a for a, b in zip(taus, taus[1:])):
        raise FormatError("slice times must be sorted")
    return [slice_mesh(mesh, tau, require_closed) for tau in taus]


def component_count(tri: TriMesh3) -> int:
    """Connected components over shared vertices."""
    if tri.n_triangles == 0:
        return 0
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    n = tri.n_vertices
    a = np.concatenate([tri.triangles[:, 0], tri.triangles[:, 1]])
    b = np.concatenate([tri.triangles[:, 1], tri.triangles[:, 2]])
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(n, n))
    ncomp, labels = connected_components(graph, directed=False)
    used = np.unique(tri.triangles)
    return len(np.unique(labels[used]))


# ---------------------------------------------------------------------------
# exports

def _fmt(x: float) -> str:
    return "%.17g" % x


def vertex_normals(tri: TriMesh3) -> np.ndarray:
    """Area-weighted per-vertex normals (unit where defined)."""
    normals = np.zeros((tri.n_vertices, 3))
    p = tri.vertices[tri.triangles]
    face_n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    for k in range(3):
        np.add.at(normals, tri.triangles[:, k], face_n)
    norm_len = np.linalg.norm(normals, axis=1)
    ok = norm_len > 0
    normals[ok] /= norm_len[ok, None]
    return normals


def write_obj(tri: TriMesh3, path) -> None:
    """Wavefront OBJ with per-vertex normals (v/vn/f records)."""
    buf = io.StringIO()
    vn = vertex_normals(tri)
    for p in tri.vertices:
        buf.write(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
    for n in vn:
        buf.write(f"vn {_fmt(n[0])} {_fmt(n[1])} {_fmt(n[2])}\n")
    for t in tri.triangles:
        buf.write(f"f {t[0]+1}//{t[0]+1} {t[1]+1}//{t[1]+1} {t[2]+1}//{t[2]+1}\n")
    try:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write mesh: {exc}") from None


def write_ply(tri: TriMesh3, path) -> None:
    """ASCII PLY; auxiliary channels become extra vertex properties."""
    names = sorted(tri.attrs)
    buf = io.StringIO()
    buf.write("ply\nformat ascii 1.0\n")
    buf.write(f"element vertex {tri.n_vertices}\n")
    for axis in "xyz":
        buf.write(f"property double {axis}\n")
    for name in names:
        buf.write(f"property double {name}\n")
    buf.write(f"element face {tri.n_triangles}\n")
    buf.write("property list uchar int vertex_indices\n")
    buf.write("end_header\n")
    for i, p in enumerate(tri.vertices):
        row = [_fmt(p[0]), _fmt(p[1]), _fmt(p[2])]
        row += [_fmt(tri.attrs[name][i]) for name in names]
        buf.write(" ".join(row) + "\n")
    for t in tri.triangles:
        buf.write(f"3 {t[0]} {t[1]} {t[2]}\n")
    try:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write mesh: {exc}") from None

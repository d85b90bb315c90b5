"""Support-point placement, tetrahedral decomposition, and mesh validation.

Sections arrive as directed support-point cycles.  Decomposition keeps
triangles whole, fans longer cycles around their face centers, and apexes
everything at the section's volume center; a section that is already a
tetrahedron (four 3-cycles) stays a single tetrahedron.  Tetrahedra are
ordered so their boundary reproduces the stored cycle directions, which
makes the outward 4-normal the positively-oriented generalized cross
product of the edge vectors.

Vertices are shared across cells through canonical keys:

* ``("e", ix, iy, iz, it, axis)`` -- support on the grid edge leaving toxel
  (ix, iy, iz, it) in +axis; identical from every cell touching the edge.
* ``("f", key1, key2, ...)`` -- cycle centroid, keyed by its sorted support
  keys; identical when an adjacent cell produces the same cycle.
* ``("v", cell, ordinal)`` -- volume center, unique per section.

Centroid positions and attributes are always accumulated in sorted-key
order, so every producer computes bit-identical floats.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import FormatError, GeometryError, IOFailure
from .field import Placement

# Facet f of tet (v0, v1, v2, v3), directed as induced by the tet orientation.
TET_FACETS = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


def support_lambda(f_active: float, f_inactive: float, isovalue: float,
                   placement: Placement, clamp: float,
                   ghost: bool = False) -> float:
    """Fractional position of a support point along its range vector.

    0 sits on the active toxel center, 1 on the inactive one.  Interpolation
    solves the linear crossing and clamps to [clamp, 1-clamp]; ghost edges
    and degenerate value pairs fall back to the midpoint.
    """
    if placement is Placement.MIDPOINT or ghost:
        return 0.5
    denom = f_inactive - f_active
    if denom == 0.0:
        return 0.5
    lam = (isovalue - f_active) / denom
    return min(max(lam, clamp), 1.0 - clamp)


def support_position(c_active, c_inactive, lam: float):
    """World position at fraction ``lam`` between two toxel centers.

    The midpoint is computed symmetrically so both orientations of the same
    edge produce identical bytes.
    """
    c_active = np.asarray(c_active, dtype=np.float64)
    c_inactive = np.asarray(c_inactive, dtype=np.float64)
    if lam == 0.5:
        return 0.5 * (c_active + c_inactive)
    return c_active * (1.0 - lam) + c_inactive * lam


def keyed_mean(items):
    """Mean of (key, vector) pairs in sorted-key order, as a strict left fold.

    Every producer of the same key set computes bit-identical bytes; numpy
    reductions are avoided because their summation order varies with the
    code path.
    """
    items = sorted(items, key=lambda kv: kv[0])
    acc = np.asarray(items[0][1], dtype=np.float64)
    for _, v in items[1:]:
        acc = acc + v
    return acc / len(items)


def four_normal(p0, p1, p2, p3, normalize: bool = True):
    """Unit 4-vector orthogonal to the three edge vectors from ``p0``.

    Components are the signed 3x3 minors of the edge matrix; the sign makes
    the normal the outward one for positively-oriented tetrahedra.
    """
    u = np.array([np.subtract(p1, p0), np.subtract(p2, p0),
                  np.subtract(p3, p0)], dtype=np.float64)
    n = _cross4(u[None, :, :])[0]
    if not normalize:
        return n
    norm = float(np.linalg.norm(n))
    if norm == 0.0:
        raise GeometryError("degenerate tetrahedron has no normal")
    return n / norm


def _cross4(u):
    """Generalized cross product for a batch of (3, 4) edge matrices."""
    n = np.empty((u.shape[0], 4))
    sign = 1.0
    for mu in range(4):
        cols = [c for c in range(4) if c != mu]
        m = u[:, :, cols]
        det3 = (
            m[:, 0, 0] * (m[:, 1, 1] * m[:, 2, 2] - m[:, 1, 2] * m[:, 2, 1])
            - m[:, 0, 1] * (m[:, 1, 0] * m[:, 2, 2] - m[:, 1, 2] * m[:, 2, 0])
            + m[:, 0, 2] * (m[:, 1, 0] * m[:, 2, 1] - m[:, 1, 1] * m[:, 2, 0])
        )
        n[:, mu] = sign * det3
        sign = -sign
    return n


def tet_normals(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Unit outward normals for every tet; zero rows mark degenerates."""
    p = vertices[tets]
    u = p[:, 1:, :] - p[:, :1, :]
    n = _cross4(u)
    norms = np.linalg.norm(n, axis=1)
    safe = norms > 0
    n[safe] /= norms[safe, None]
    n[~safe] = 0.0
    return n


def tet_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Unsigned 3-volume of each (3D-flat) tet embedded in 4D."""
    p = vertices[tets]
    u = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.norm(_cross4(u), axis=1) / 6.0


def decompose(cycles, resolve, volume_key):
    """Split one section into oriented tetrahedra.

    ``cycles`` are directed support cycles over local edge ids; ``resolve``
    maps a local edge id to a (key, position) pair.  Returns (tets,
    vertices) where tets are 4-tuples of keys and vertices maps every key
    used (supports plus new centroids / volume center) to its position.

    A section bounded by four triangles is one tetrahedron already and is
    emitted without any new vertices; its base triangle is the
    rotation-minimal cycle so every producer orders it identically.
    """
    vertices = {}
    if len(cycles) == 4 and all(len(c) == 3 for c in cycles):
        first = min(_rot_min(tuple(c)) for c in cycles)
        for cyc in cycles:
            for e in cyc:
                k, p = resolve(e)
                vertices[k] = p
        ka, kb, kc = (resolve(e)[0] for e in first)
        rest = set(vertices) - {ka, kb, kc}
        if len(vertices) != 4 or len(rest) != 1:
            raise GeometryError("tetrahedral section without 4 distinct supports")
        return [(ka, kc, kb, rest.pop())], vertices

    tets = []
    centroids = {}
    for cyc in cycles:
        supports = [resolve(e) for e in cyc]
        for k, p in supports:
            vertices[k] = p
        ckey = ("f",) + tuple(sorted(k for k, _ in supports))
        centroids[ckey] = keyed_mean(supports)
    vertices[volume_key] = keyed_mean(list(centroids.items()))
    for cyc in cycles:
        supports = [resolve(e) for e in cyc]
        ckey = ("f",) + tuple(sorted(k for k, _ in supports))
        if len(cyc) == 3:
            (a, _), (b, _), (c, _) = supports
            tets.append((a, c, b, volume_key))
        else:
            vertices[ckey] = centroids[ckey]
            n = len(supports)
            for i in range(n):
                a = supports[i][0]
                b = supports[(i + 1) % n][0]
                tets.append((a, ckey, b, volume_key))
    return tets, vertices


def _rot_min(cycle):
    n = len(cycle)
    best = min(range(n), key=lambda i: cycle[i:] + cycle[:i])
    return tuple(cycle[best:] + cycle[:best])


@dataclass
class TetMesh4:
    """Deduplicated 4D vertices plus oriented tetrahedra."""

    vertices: np.ndarray                      # (N, 4) float64
    tets: np.ndarray                          # (M, 4) int64
    normals: np.ndarray | None = None         # (M, 4) float64, unit
    attrs: dict[str, np.ndarray] = dc_field(default_factory=dict)
    provenance: np.ndarray | None = None      # (M, 2) int64: cell, section
    vertex_keys: list | None = None           # canonical keys, in-memory only

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 4)
        self.tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)
        if self.normals is None and len(self.tets):
            self.normals = tet_normals(self.vertices, self.tets)
        elif self.normals is None:
            self.normals = np.zeros((0, 4))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    def triangles(self):
        """All directed boundary triangles, 4 per tet, shape (4M, 3)."""
        if not len(self.tets):
            return np.zeros((0, 3), dtype=np.int64)
        return self.tets[:, TET_FACETS].reshape(-1, 3)

    def bounding_box(self):
        if not len(self.vertices):
            return np.zeros(4), np.zeros(4)
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _directed_canonical(tris: np.ndarray):
    """Rotate smallest vertex first; returns (sorted triple, parity bit)."""
    n = len(tris)
    argmin = np.argmin(tris, axis=1)
    rolled = np.empty_like(tris)
    for r in range(3):
        rows = argmin == r
        rolled[rows] = np.roll(tris[rows], -r, axis=1)
    parity = (rolled[:, 1] > rolled[:, 2]).astype(np.int8)
    und = rolled.copy()
    swap = parity == 1
    und[swap, 1], und[swap, 2] = rolled[swap, 2], rolled[swap, 1]
    return und, parity


@dataclass
class ValidationReport:
    """Outcome of the mesh checks.

    ``ok`` is the rift-freedom contract: every triangle shared by exactly two
    tets, traversed oppositely.  Degenerate tets and nonzero per-component
    Euler characteristics are reported as diagnostics; the latter occur
    legitimately when a section is not ball-shaped (its volume center then
    cones a higher-genus boundary), so they do not fail the contract.
    """

    closed: bool
    oriented: bool
    n_components: int
    n_degenerate: int
    euler: list[int]
    failures: list[str]
    notes: list[str]
    boundary_triangles: np.ndarray  # (k, 3) triangles not shared by 2 tets

    @property
    def ok(self) -> bool:
        return self.closed and self.oriented

    def __str__(self):
        status = "PASS" if self.ok else "FAIL"
        lines = [f"{status}: {self.n_components} component(s)"]
        lines += [f"  {f}" for f in self.failures]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def validate(mesh: TetMesh4, volume_tol: float | None = None,
             check_euler: bool = True) -> ValidationReport:
    """Closedness and orientation checks; reports rather than raises.

    Verifies every triangle is shared by exactly two tets with opposite
    traversal, flags near-zero-volume tets (tolerance defaults to
    1e-10 x (median edge length)^4), and computes the Euler characteristic
    of every triangle-connected component.
    """
    failures = []
    notes = []
    if mesh.n_tets == 0:
        return ValidationReport(True, True, 0, 0, [], [], [],
                                np.zeros((0, 3), dtype=np.int64))

    tris = mesh.triangles()
    und, parity = _directed_canonical(tris)
    nv = mesh.n_vertices
    tri_key = (und[:, 0] * nv + und[:, 1]) * nv + und[:, 2]
    order = np.argsort(tri_key, kind="stable")
    und_sorted = und[order]
    key_sorted = tri_key[order]
    parity_sorted = parity[order]
    boundary = []
    new_group = np.ones(len(und_sorted), dtype=bool)
    new_group[1:] = key_sorted[1:] != key_sorted[:-1]
    starts = np.flatnonzero(new_group)
    ends = np.append(starts[1:], len(und_sorted))
    group_sizes = ends - starts
    bad_count = group_sizes != 2
    closed = not bad_count.any()
    if not closed:
        for s in starts[bad_count][:16]:
            boundary.append(und_sorted[s])
        failures.append(
            f"{int(bad_count.sum())} triangle(s) not shared by exactly 2 tets"
        )
    pair_rows = starts[group_sizes == 2]
    mism = parity_sorted[pair_rows] == parity_sorted[pair_rows + 1]
    oriented = not mism.any()
    if not oriented:
        failures.append(
            f"{int(mism.sum())} shared triangle(s) traversed in the same direction"
        )

    if volume_tol is None:
        edges = mesh.vertices[mesh.tets[:, 1]] - mesh.vertices[mesh.tets[:, 0]]
        scale = float(np.median(np.linalg.norm(edges, axis=1))) or 1.0
        volume_tol = 1e-10 * scale ** 4
    vols = tet_volumes(mesh.vertices, mesh.tets)
    degenerate = vols <= volume_tol
    n_degenerate = int(degenerate.sum())
    if n_degenerate:
        where = np.flatnonzero(degenerate)[:8]
        prov = ""
        if mesh.provenance is not None:
            prov = "; provenance " + ", ".join(
                str(tuple(int(x) for x in mesh.provenance[i])) for i in where
            )
        notes.append(f"{n_degenerate} degenerate tet(s){prov}")

    euler: list[int] = []
    n_components = 1
    if check_euler:
        n_components, euler = _components_euler(mesh, und, order, starts,
                                                group_sizes)
        nonzero = [(ci, chi) for ci, chi in enumerate(euler) if chi != 0]
        if nonzero:
            notes.append(
                "nonzero Euler characteristic (non-ball sections): "
                + ", ".join(f"component {ci}: {chi}" for ci, chi in nonzero[:8])
            )

    boundary_arr = (np.array(boundary, dtype=np.int64).reshape(-1, 3)
                    if boundary else np.zeros((0, 3), dtype=np.int64))
    return ValidationReport(closed, oriented, n_components, n_degenerate,
                            euler, failures, notes, boundary_arr)


def _components_euler(mesh, und, order, starts, group_sizes):
    """Euler characteristic per triangle-connected component (vectorized)."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    m = mesh.n_tets
    tet_of_row = order // 4
    pair_rows = starts[group_sizes == 2]
    a = tet_of_row[pair_rows]
    b = tet_of_row[pair_rows + 1]
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(m, m))
    n_comp, comp_of_tet = connected_components(graph, directed=False)

    nvert = mesh.n_vertices

    def count_unique_per_comp(comp_ids, keys):
        # (component, key) pairs packed into one int64 each
        span = int(keys.max()) + 1 if len(keys) else 1
        if n_comp * span < (1 << 62):
            combo = np.unique(comp_ids.astype(np.int64) * span + keys)
            return np.bincount(combo // span, minlength=n_comp)
        uniq = np.unique(np.stack([comp_ids, keys], axis=1), axis=0)
        return np.bincount(uniq[:, 0], minlength=n_comp)

    tet_comp = comp_of_tet
    nv = count_unique_per_comp(np.repeat(tet_comp, 4), mesh.tets.ravel())
    pairs = np.concatenate(
        [mesh.tets[:, [i, j]] for i in range(4) for j in range(i + 1, 4)]
    )
    pairs.sort(axis=1)
    ne = count_unique_per_comp(np.tile(tet_comp, 6),
                               pairs[:, 0] * nvert + pairs[:, 1])
    nf = count_unique_per_comp(
        np.repeat(tet_comp, 4),
        (und[:, 0] * nvert + und[:, 1]) * nvert + und[:, 2])
    nt = np.bincount(tet_comp, minlength=n_comp)
    chi = nv - ne + nf - nt
    return n_comp, [int(c) for c in chi]


# ---------------------------------------------------------------------------
# .st4 text format

def _fmt(x: float) -> str:
    return "%.17g" % x


def write_st4(mesh: TetMesh4, path) -> None:
    """Write the text mesh format (round-trip exact at 17 significant digits)."""
    buf = io.StringIO()
    buf.write("st4 1\n")
    buf.write(f"points {mesh.n_vertices}\n")
    for p in mesh.vertices:
        buf.write(" ".join(_fmt(c) for c in p) + "\n")
    buf.write(f"tets {mesh.n_tets}\n")
    for t in mesh.tets:
        buf.write(f"{t[0]} {t[1]} {t[2]} {t[3]}\n")
    buf.write(f"normals {mesh.n_tets}\n")
    for n in mesh.normals:
        buf.write(" ".join(_fmt(c) for c in n) + "\n")
    for name in sorted(mesh.attrs):
        buf.write(f"attr {name} {mesh.n_vertices}\n")
        for v in mesh.attrs[name]:
            buf.write(_fmt(v) + "\n")
    try:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write mesh: {exc}") from None


def read_st4(path) -> TetMesh4:
    try:
        with open(path) as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise IOFailure(f"cannot read mesh: {exc}") from None
    pos = 0

    def take(n=1):
        nonlocal pos
        if pos + n > len(tokens):
            raise FormatError("truncated st4 file")
        out = tokens[pos:pos + n]
        pos += n
        return out

    magic, version = take(2)
    if magic != "st4" or version != "1":
        raise FormatError(f"not an st4 v1 file: {magic} {version}")
    key, n = take(2)
    if key != "points":
        raise FormatError("expected points block")
    nv = int(n)
    vertices = np.array(take(4 * nv), dtype=np.float64).reshape(nv, 4)
    key, n = take(2)
    if key != "tets":
        raise FormatError("expected tets block")
    nt = int(n)
    tets = np.array(take(4 * nt), dtype=np.int64).reshape(nt, 4)
    if len(tets) and (tets.min() < 0 or tets.max() >= nv):
        raise FormatError("tet index out of range")
    key, n = take(2)
    if key != "normals":
        raise FormatError("expected normals block")
    if int(n) != nt:
        raise FormatError("normal count does not match tet count")
    normals = np.array(take(4 * nt), dtype=np.float64).reshape(nt, 4)
    attrs = {}
    while pos < len(tokens):
        key, name, n = take(3)
        if key != "attr" or int(n) != nv:
            raise FormatError(f"bad attr block {key} {name} {n}")
        attrs[name] = np.array(take(nv), dtype=np.float64)
    return TetMesh4(vertices, tets, normals, attrs)

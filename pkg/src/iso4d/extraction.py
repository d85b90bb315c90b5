"""Per-cell protomesh extraction.

For one 2x2x2x2 cell this module turns the activity pattern into closed
polyhedral *sections*:

1. every active->inactive transition emits the boundary-volume octant of the
   table (:func:`emit_octants`),
2. segments are paired at each face center (:func:`resolve_face`), resolving
   points of ambiguity by connectivity mode,
3. the paired segments are walked into initial cyclic paths
   (:func:`stitch`), face centers are dropped (:func:`reduce_cycle`),
4. cycles sharing a support-point pair are grouped into sections
   (:func:`group_sections`), each a closed oriented polyhedron.

Everything here is a pure function of (pattern, values, config); cells can be
processed in any order or in parallel.  This is the readable reference path;
grid sweeps use the compiled kernels in ``_kernels``, which are checked
against this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import topology
from .errors import GeometryError
from .field import CellPattern, ExtractionConfig, Mode
from .topology import FACE_BASE, MINUS, N_EDGES, N_FACES, PLUS


@dataclass(frozen=True)
class Segment:
    """One directed vector of an octant path; joins a face and an edge center."""

    frm: int
    to: int
    octant: tuple[int, int]  # (edge center, orientation)


def octant_set(bits: int) -> dict[int, int]:
    """Edge center -> orientation for every active->inactive transition."""
    geom = topology.standard_geometry()
    octants = {}
    for edge in range(N_EDGES):
        lo, hi = geom.edge_sites[edge]
        lo_active = (bits >> int(lo)) & 1
        hi_active = (bits >> int(hi)) & 1
        if lo_active != hi_active:
            octants[edge] = PLUS if lo_active else MINUS
    return octants


def emit_octants(pattern: CellPattern) -> list[Segment]:
    """All directed segments contributed by a cell's transitions."""
    table = topology.standard_table()
    segments = []
    for edge, orient in sorted(octant_set(pattern.bits).items()):
        trip = table.octant_paths(edge, orient)
        for frm, to in trip.paths:
            segments.append(Segment(frm, edge, (edge, orient)))
            segments.append(Segment(edge, to, (edge, orient)))
    return segments


def poa_faces(bits: int) -> list[int]:
    """Faces whose four corners alternate active/inactive (diagonal contact)."""
    geom = topology.standard_geometry()
    out = []
    for face in range(FACE_BASE, FACE_BASE + N_FACES):
        c0, c1, c2, c3 = geom.face_corners(face)
        a = [(bits >> c) & 1 for c in (c0, c1, c2, c3)]
        if a[0] == a[2] and a[1] == a[3] and a[0] != a[1]:
            out.append(face)
    return out


def connect_decision(face: int, pattern: CellPattern, isovalue: float,
                     mode: Mode) -> bool:
    """True when the point of ambiguity at ``face`` should connect.

    MIXED mode averages the four corner samples; an average meeting the
    isovalue connects (the tie resolves like the active predicate, toward
    the enclosed side).  Faces touching a pad sentinel never connect.
    """
    if mode is Mode.CONNECT:
        return True
    if mode is Mode.DISCONNECT:
        return False
    geom = topology.standard_geometry()
    corners = geom.face_corners(face)
    if any((pattern.ghost_bits >> c) & 1 for c in corners):
        return False
    return float(np.mean([pattern.values[c] for c in corners])) >= isovalue


def resolve_face(face: int, pattern: CellPattern, isovalue: float,
                 mode: Mode) -> dict[int, int]:
    """Pair incoming to outgoing segments at one connectivity point.

    Returns the involution in-edge -> out-edge over the face's transition
    edges.  Two transitions pair uniquely (anti-parallel continuations are
    forbidden); four transitions form a point of ambiguity, paired around the
    shared active toxel (disconnect) or the shared inactive toxel (connect).
    """
    geom = topology.standard_geometry()
    corners = geom.face_corners(face)
    edges = geom.face_edges[face - FACE_BASE]
    act = [(pattern.bits >> c) & 1 for c in corners]
    trans = [k for k in range(4) if act[k] != act[(k + 1) % 4]]
    if len(trans) == 0:
        return {}
    if len(trans) == 2:
        e1, e2 = int(edges[trans[0]]), int(edges[trans[1]])
        return {e1: e2, e2: e1}
    if len(trans) == 4:
        connect = connect_decision(face, pattern, isovalue, mode)
        pairing = {}
        for k in range(4):
            # Edge k joins corners k and k+1; it bends around the corner it
            # shares with its pair: the active one to disconnect, the
            # inactive one to connect.
            pivot_at_k = act[k] == (0 if connect else 1)
            out = edges[(k - 1) % 4] if pivot_at_k else edges[(k + 1) % 4]
            pairing[int(edges[k])] = int(out)
        return pairing
    raise GeometryError(
        f"face {face} has {len(trans)} transition edges; parity is broken"
    )


def stitch(octants: dict[int, int],
           pairings: dict[int, dict[int, int]]) -> list[list[int]]:
    """Combine octant paths into initial cyclic vector paths.

    Each cycle alternates face and edge ids, ``[f0, e0, f1, e1, ...]``,
    reading f0 -> e0 -> f1 -> ..., closing back to f0.  Every directed
    segment is covered exactly once.
    """
    table = topology.standard_table()
    cycles = []
    seen = set()
    for edge0 in sorted(octants):
        for face0 in sorted(table.incident_faces(edge0)):
            if (edge0, face0) in seen:
                continue
            cycle = []
            edge, face_in = edge0, face0
            while True:
                if (edge, face_in) in seen:
                    raise GeometryError("stitching revisited a segment")
                seen.add((edge, face_in))
                cycle.extend((face_in, edge))
                face_out = table.octant_paths(edge, octants[edge]).successor(face_in)
                try:
                    edge = pairings[face_out][edge]
                except KeyError:
                    raise GeometryError(
                        f"unclosed chain at face {face_out}"
                    ) from None
                face_in = face_out
                if (edge, face_in) == (edge0, face0):
                    break
            cycles.append(cycle)
    return cycles


def reduce_cycle(cycle: list[int]) -> tuple[int, ...]:
    """Drop the connectivity points, keeping support-point order."""
    return tuple(cycle[1::2])


@dataclass(frozen=True)
class Section:
    """One closed polyhedron: reduced cycles that bound a single 4D region."""

    cycles: tuple[tuple[int, ...], ...]

    def support_points(self) -> tuple[int, ...]:
        return tuple(sorted({e for cyc in self.cycles for e in cyc}))


def _canonical(cycle: tuple[int, ...]) -> tuple[int, ...]:
    """Rotation-minimal form (direction preserved)."""
    n = len(cycle)
    best = min(range(n), key=lambda i: cycle[i:] + cycle[:i])
    return cycle[best:] + cycle[:best]


def group_sections(reduced: list[tuple[int, ...]]) -> list[Section]:
    """Union cycles sharing an undirected support pair; check closure.

    Within a section every directed support pair must occur exactly once,
    with its reverse in the same section -- each polyhedron edge is a pair of
    anti-parallel vectors.
    """
    parent = list(range(len(reduced)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    directed: dict[tuple[int, int], int] = {}
    first_of_pair: dict[frozenset, int] = {}
    for ci, cyc in enumerate(reduced):
        for k in range(len(cyc)):
            a, b = cyc[k], cyc[(k + 1) % len(cyc)]
            if (a, b) in directed:
                raise GeometryError(f"directed support pair {(a, b)} repeated")
            directed[(a, b)] = ci
            key = frozenset((a, b))
            if key in first_of_pair:
                ra, rb = find(first_of_pair[key]), find(ci)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            else:
                first_of_pair[key] = ci
    for (a, b), ci in directed.items():
        cj = directed.get((b, a))
        if cj is None or find(ci) != find(cj):
            raise GeometryError(
                f"support pair {(a, b)} lacks an anti-parallel partner"
            )
    groups: dict[int, list[tuple[int, ...]]] = {}
    for ci, cyc in enumerate(reduced):
        groups.setdefault(find(ci), []).append(_canonical(cyc))
    sections = [Section(tuple(sorted(cycs))) for cycs in groups.values()]
    sections.sort(key=lambda s: s.cycles[0])
    return sections


@dataclass(frozen=True)
class CellExtraction:
    """Everything the tessellator needs from one cell."""

    octants: dict[int, int]
    initial_cycles: tuple[tuple[int, ...], ...]
    cycles: tuple[tuple[int, ...], ...]
    sections: tuple[Section, ...]
    decisions: dict[int, bool]  # POA face -> connected?

    # N-cycle lengths the taxonomy of 3D bounding shapes allows.
    VALID_LENGTHS = frozenset((3, 4, 5, 6, 7, 8, 9, 12))


def extract_cell(pattern: CellPattern, config: ExtractionConfig) -> CellExtraction:
    """Run the full per-cell pipeline on one activity pattern."""
    octants = octant_set(pattern.bits)
    pairings = {}
    decisions = {}
    for face in range(FACE_BASE, FACE_BASE + N_FACES):
        pairing = resolve_face(face, pattern, config.isovalue, config.mode)
        if pairing:
            pairings[face] = pairing
            if len(pairing) == 4:
                decisions[face] = connect_decision(
                    face, pattern, config.isovalue, config.mode
                )
    initial = stitch(octants, pairings)
    reduced = [reduce_cycle(c) for c in initial]
    for cyc in reduced:
        if len(cyc) not in CellExtraction.VALID_LENGTHS:
            raise GeometryError(f"reduced cycle of invalid length {len(cyc)}")
    sections = group_sections(reduced)
    return CellExtraction(
        octants=octants,
        initial_cycles=tuple(tuple(c) for c in initial),
        cycles=tuple(reduced),
        sections=tuple(sections),
        decisions=decisions,
    )

"""Compiled hot paths for whole-grid sweeps.

The reference per-cell pipeline lives in :mod:`iso4d.extraction`; these
kernels re-express its walk over flat integer tables so that exhaustive
pattern sweeps and large-grid extractions run at native speed.  Tests assert
the two paths agree cycle for cycle.

Status codes returned per cell: 0 ok, 1 odd face parity, 2 walk revisited a
segment, 3 repeated directed support pair, 4 missing anti-parallel partner,
5 invalid cycle length, 6 cycle not confined to a bounding cube.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import topology

# ---------------------------------------------------------------------------
# Static tables (int64 throughout; they are tiny)

_geom = topology.standard_geometry()
_table = topology.standard_table()

EDGE_LO = _geom.edge_sites[:, 0].copy()
EDGE_HI = _geom.edge_sites[:, 1].copy()
EDGE_AXIS = _geom.edge_axis.copy()
EDGE_FACES = _geom.edge_faces - topology.FACE_BASE          # (32, 3) ascending
FACE_CORNERS = _geom.face_sites.copy()                      # (24, 4) cyclic
FACE_EDGES = _geom.face_edges.copy()                        # (24, 4) cyclic

# TRIP_NEXT[e, orient, f_in] = f_out (face indices 0..23), -1 when absent.
TRIP_NEXT = np.full((32, 2, 24), -1, dtype=np.int64)
for _e in range(32):
    for _o in (topology.PLUS, topology.MINUS):
        for _f, _t in _table.octant_paths(_e, _o).paths:
            TRIP_NEXT[_e, _o, _f - topology.FACE_BASE] = _t - topology.FACE_BASE

# Bit (2*axis + side) set when the edge lies in bounding cube {axis == side}.
EDGE_CUBE_MASK = np.zeros(32, dtype=np.int64)
for _e in range(32):
    lo_pos = _geom.site_pos[EDGE_LO[_e]]
    for _axis in range(4):
        if _axis == EDGE_AXIS[_e]:
            continue
        EDGE_CUBE_MASK[_e] |= 1 << (2 * _axis + int(lo_pos[_axis]))

VALID_LEN_MASK = 0
for _n in (3, 4, 5, 6, 7, 8, 9, 12):
    VALID_LEN_MASK |= 1 << _n

MAX_OCC = 96   # 32 octants x 3 path slots
MAX_CYC = 32


@njit(cache=True, inline="always")
def _pair_at_face(face, e_in, bits, conn_mask, face_k,
                  face_corners, face_edges):
    """Outgoing edge for a segment entering ``face`` from ``e_in``."""
    k = -1
    for i in range(4):
        if face_edges[face, i] == e_in:
            k = i
            break
    if face_k[face] == 2:
        for i in range(4):
            e = face_edges[face, i]
            if e != e_in:
                c0 = (bits >> face_corners[face, i]) & 1
                c1 = (bits >> face_corners[face, (i + 1) % 4]) & 1
                if c0 != c1:
                    return e
        return -1
    # point of ambiguity: bend around the shared active (disconnect) or
    # shared inactive (connect) corner
    connect = (conn_mask >> face) & 1
    act_k = (bits >> face_corners[face, k]) & 1
    pivot_at_k = act_k == (0 if connect else 1)
    if pivot_at_k:
        return face_edges[face, (k - 1) % 4]
    return face_edges[face, (k + 1) % 4]


@njit(cache=True)
def _walk_cell(bits, conn_mask,
               edge_lo, edge_hi, edge_faces, trip_next,
               face_corners, face_edges,
               oct_orient, face_k, visited,
               cyc_edges, cyc_len, cyc_sec, uf_parent,
               dir_stamp, dir_cyc, pair_stamp, pair_cyc, stamp):
    """Stitch one cell; returns (n_cycles, n_occ, status).

    Scratch arrays are caller-provided and reused across cells; ``stamp``
    keys the per-cell epoch in the directed/undirected pair tables.
    """
    # octants
    for e in range(32):
        a = (bits >> edge_lo[e]) & 1
        b = (bits >> edge_hi[e]) & 1
        if a == b:
            oct_orient[e] = -1
        else:
            oct_orient[e] = 1 if a == 1 else 0

    # transition count per face
    for f in range(24):
        k = 0
        for i in range(4):
            c0 = (bits >> face_corners[f, i]) & 1
            c1 = (bits >> face_corners[f, (i + 1) % 4]) & 1
            if c0 != c1:
                k += 1
        face_k[f] = k
        if k == 1 or k == 3:
            return 0, 0, 1

    for i in range(MAX_OCC):
        visited[i] = False

    n_cyc = 0
    n_occ = 0
    for e0 in range(32):
        if oct_orient[e0] < 0:
            continue
        for slot0 in range(3):
            if visited[e0 * 3 + slot0]:
                continue
            start = n_occ
            e = e0
            slot = slot0
            while True:
                if visited[e * 3 + slot]:
                    return 0, 0, 2
                visited[e * 3 + slot] = True
                cyc_edges[n_occ] = e
                n_occ += 1
                f_in = edge_faces[e, slot]
                f_out = trip_next[e, oct_orient[e], f_in]
                e_next = _pair_at_face(f_out, e, bits, conn_mask, face_k,
                                       face_corners, face_edges)
                if e_next < 0:
                    return 0, 0, 1
                slot = -1
                for i in range(3):
                    if edge_faces[e_next, i] == f_out:
                        slot = i
                        break
                e = e_next
                if e == e0 and slot == slot0:
                    break
            cyc_len[n_cyc] = n_occ - start
            n_cyc += 1

    # closure bookkeeping and section grouping (union-find over cycles)
    parent = uf_parent
    for c in range(n_cyc):
        parent[c] = c
    off = 0
    for c in range(n_cyc):
        n = cyc_len[c]
        # valid taxonomy length
        if n > 12 or ((VALID_LEN_MASK >> n) & 1) == 0:
            return n_cyc, n_occ, 5
        # confined to at least one bounding cube
        cube = -1
        for i in range(n):
            m = EDGE_CUBE_MASK[cyc_edges[off + i]]
            cube = m if cube == -1 else (cube & m)
        if cube == 0:
            return n_cyc, n_occ, 6
        for i in range(n):
            a = cyc_edges[off + i]
            b = cyc_edges[off + (i + 1) % n]
            dkey = a * 32 + b
            if dir_stamp[dkey] == stamp:
                return n_cyc, n_occ, 3
            dir_stamp[dkey] = stamp
            dir_cyc[dkey] = c
            ukey = a * 32 + b if a < b else b * 32 + a
            if pair_stamp[ukey] == stamp:
                # union with the cycle that first used this support pair
                ra = pair_cyc[ukey]
                while parent[ra] != ra:
                    ra = parent[ra]
                rb = c
                while parent[rb] != rb:
                    rb = parent[rb]
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
            else:
                pair_stamp[ukey] = stamp
                pair_cyc[ukey] = c
        off += n

    # every directed pair needs its reverse in the same section
    off = 0
    for c in range(n_cyc):
        n = cyc_len[c]
        for i in range(n):
            a = cyc_edges[off + i]
            b = cyc_edges[off + (i + 1) % n]
            if dir_stamp[b * 32 + a] != stamp:
                return n_cyc, n_occ, 4
            ra = c
            while parent[ra] != ra:
                ra = parent[ra]
            rb = dir_cyc[b * 32 + a]
            while parent[rb] != rb:
                rb = parent[rb]
            if ra != rb:
                return n_cyc, n_occ, 4
        off += n

    # relabel roots as dense section ordinals in first-occurrence order
    n_sec = 0
    for c in range(n_cyc):
        r = c
        while parent[r] != r:
            r = parent[r]
        if r == c:
            cyc_sec[c] = n_sec
            n_sec += 1
        else:
            cyc_sec[c] = cyc_sec[r]
    return n_cyc, n_occ, 0


@njit(cache=True)
def extract_stream(bitses, conn_masks,
                   edge_lo, edge_hi, edge_faces, trip_next,
                   face_corners, face_edges):
    """Walk a batch of cells, emitting flat cycle streams.

    Returns (cell-of-cycle, section-of-cycle, length-of-cycle, edge stream,
    n_cycles, n_occurrences, status array).
    """
    n = len(bitses)
    out_cell = np.empty(n * MAX_CYC, dtype=np.int64)
    out_sec = np.empty(n * MAX_CYC, dtype=np.int64)
    out_len = np.empty(n * MAX_CYC, dtype=np.int64)
    out_edges = np.empty(n * MAX_OCC, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)

    oct_orient = np.empty(32, dtype=np.int64)
    face_k = np.empty(24, dtype=np.int64)
    visited = np.zeros(MAX_OCC, dtype=np.bool_)
    cyc_edges = np.empty(MAX_OCC, dtype=np.int64)
    cyc_len = np.empty(MAX_CYC, dtype=np.int64)
    cyc_sec = np.empty(MAX_CYC, dtype=np.int64)
    uf_parent = np.empty(MAX_CYC, dtype=np.int64)
    dir_stamp = np.full(1024, -1, dtype=np.int64)
    dir_cyc = np.empty(1024, dtype=np.int64)
    pair_stamp = np.full(1024, -1, dtype=np.int64)
    pair_cyc = np.empty(1024, dtype=np.int64)

    total_cyc = 0
    total_occ = 0
    for ci in range(n):
        n_cyc, n_occ, st = _walk_cell(
            np.int64(bitses[ci]), np.int64(conn_masks[ci]),
            edge_lo, edge_hi, edge_faces, trip_next,
            face_corners, face_edges,
            oct_orient, face_k, visited,
            cyc_edges, cyc_len, cyc_sec, uf_parent,
            dir_stamp, dir_cyc, pair_stamp, pair_cyc, np.int64(ci))
        status[ci] = st
        if st != 0:
            continue
        off = 0
        for c in range(n_cyc):
            out_cell[total_cyc] = ci
            out_sec[total_cyc] = cyc_sec[c]
            out_len[total_cyc] = cyc_len[c]
            total_cyc += 1
            for i in range(cyc_len[c]):
                out_edges[total_occ] = cyc_edges[off + i]
                total_occ += 1
            off += cyc_len[c]
    return (out_cell[:total_cyc], out_sec[:total_cyc], out_len[:total_cyc],
            out_edges[:total_occ], total_cyc, total_occ, status)


@njit(cache=True)
def sweep_global(lo_bits, hi_bits, conn,
                 edge_lo, edge_hi, edge_faces, trip_next,
                 face_corners, face_edges):
    """Sweep a range of patterns under one global connectivity mode.

    Returns (length histogram, per-cell section-count histogram, worst
    status, pattern of the worst status).
    """
    len_hist = np.zeros(16, dtype=np.int64)
    sec_hist = np.zeros(MAX_CYC + 1, dtype=np.int64)
    conn_mask = np.int64(0xFFFFFF if conn else 0)

    oct_orient = np.empty(32, dtype=np.int64)
    face_k = np.empty(24, dtype=np.int64)
    visited = np.zeros(MAX_OCC, dtype=np.bool_)
    cyc_edges = np.empty(MAX_OCC, dtype=np.int64)
    cyc_len = np.empty(MAX_CYC, dtype=np.int64)
    cyc_sec = np.empty(MAX_CYC, dtype=np.int64)
    uf_parent = np.empty(MAX_CYC, dtype=np.int64)
    dir_stamp = np.full(1024, -1, dtype=np.int64)
    dir_cyc = np.empty(1024, dtype=np.int64)
    pair_stamp = np.full(1024, -1, dtype=np.int64)
    pair_cyc = np.empty(1024, dtype=np.int64)

    bad_status = 0
    bad_bits = -1
    for bits in range(lo_bits, hi_bits):
        if bits == 0 or bits == 0xFFFF:
            continue
        n_cyc, n_occ, st = _walk_cell(
            np.int64(bits), conn_mask,
            edge_lo, edge_hi, edge_faces, trip_next,
            face_corners, face_edges,
            oct_orient, face_k, visited,
            cyc_edges, cyc_len, cyc_sec, uf_parent,
            dir_stamp, dir_cyc, pair_stamp, pair_cyc, np.int64(bits))
        if st != 0:
            if bad_status == 0:
                bad_status = st
                bad_bits = bits
            continue
        n_sec = 0
        for c in range(n_cyc):
            ln = cyc_len[c]
            if ln < 16:
                len_hist[ln] += 1
            if cyc_sec[c] + 1 > n_sec:
                n_sec = cyc_sec[c] + 1
        sec_hist[n_sec] += 1
    return len_hist, sec_hist, bad_status, bad_bits


@njit(cache=True)
def sweep_mixed(lo_bits, hi_bits, conn_samples,
                edge_lo, edge_hi, edge_faces, trip_next,
                face_corners, face_edges):
    """Sweep ambiguous patterns under sampled mixed-mode decisions.

    ``conn_samples`` holds one 24-bit connect mask per random value
    assignment.  Per pattern, only the masks restricted to its ambiguous
    faces matter, so duplicates are collapsed before walking.

    Returns (length histogram, tested-decision count, worst status, pattern).
    """
    len_hist = np.zeros(16, dtype=np.int64)

    oct_orient = np.empty(32, dtype=np.int64)
    face_k = np.empty(24, dtype=np.int64)
    visited = np.zeros(MAX_OCC, dtype=np.bool_)
    cyc_edges = np.empty(MAX_OCC, dtype=np.int64)
    cyc_len = np.empty(MAX_CYC, dtype=np.int64)
    cyc_sec = np.empty(MAX_CYC, dtype=np.int64)
    uf_parent = np.empty(MAX_CYC, dtype=np.int64)
    dir_stamp = np.full(1024, -1, dtype=np.int64)
    dir_cyc = np.empty(1024, dtype=np.int64)
    pair_stamp = np.full(1024, -1, dtype=np.int64)
    pair_cyc = np.empty(1024, dtype=np.int64)

    nsamp = len(conn_samples)
    seen = np.empty(nsamp, dtype=np.int64)
    bad_status = 0
    bad_bits = -1
    tested = 0
    stamp = 1 << 40  # epochs disjoint from sweep_global's
    for bits in range(lo_bits, hi_bits):
        if bits == 0 or bits == 0xFFFF:
            continue
        poa_mask = np.int64(0)
        for f in range(24):
            a0 = (bits >> face_corners[f, 0]) & 1
            a1 = (bits >> face_corners[f, 1]) & 1
            a2 = (bits >> face_corners[f, 2]) & 1
            a3 = (bits >> face_corners[f, 3]) & 1
            if a0 == a2 and a1 == a3 and a0 != a1:
                poa_mask |= np.int64(1) << f
        if poa_mask == 0:
            continue
        for s in range(nsamp):
            seen[s] = conn_samples[s] & poa_mask
        dvecs = np.sort(seen[:nsamp])
        prev = np.int64(-1)
        for s in range(nsamp):
            dvec = dvecs[s]
            if dvec == prev:
                continue
            prev = dvec
            stamp += 1
            n_cyc, n_occ, st = _walk_cell(
                np.int64(bits), dvec,
                edge_lo, edge_hi, edge_faces, trip_next,
                face_corners, face_edges,
                oct_orient, face_k, visited,
                cyc_edges, cyc_len, cyc_sec, uf_parent,
                dir_stamp, dir_cyc, pair_stamp, pair_cyc, stamp)
            tested += 1
            if st != 0:
                if bad_status == 0:
                    bad_status = st
                    bad_bits = bits
                continue
            for c in range(n_cyc):
                ln = cyc_len[c]
                if ln < 16:
                    len_hist[ln] += 1
    return len_hist, tested, bad_status, bad_bits


def statics() -> tuple:
    """The positional static-table arguments shared by all kernels."""
    return (EDGE_LO, EDGE_HI, EDGE_FACES, TRIP_NEXT, FACE_CORNERS, FACE_EDGES)

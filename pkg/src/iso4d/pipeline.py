"""Field-level extraction: pattern scan, cell kernels, mesh assembly.

The pipeline is a map-reduce over non-trivial cells:

1. a vectorized scan classifies every cell's 16-bit activity pattern and
   (for mixed mode) the per-face connectivity decisions,
2. the compiled walker emits each cell's support cycles and sections,
3. assembly places support points, builds centroids and volume centers in
   canonical key order, and emits oriented tetrahedra.

Workers only partition step 2; results are concatenated in cell order, so
output bytes are identical for any worker count.  The pure-Python route
(:func:`cell_mesh`, :func:`extract_reference`) mirrors the same conventions
and is used to cross-check the vectorized path.
"""

from __future__ import annotations

import multiprocessing
import os

import numpy as np

from . import _kernels, extraction, tessellation, topology
from .errors import GeometryError
from .field import (CellPattern, ExtractionConfig, Mode, Placement,
                    ToxelField, cells, ghost_bits, pad_ghost, pattern_bits)
from .tessellation import TetMesh4, keyed_mean, support_lambda, support_position

_KERNEL_STATUS = {
    1: "odd face parity",
    2: "walk revisited a segment",
    3: "repeated directed support pair",
    4: "missing anti-parallel partner",
    5: "invalid cycle length",
    6: "cycle not confined to a bounding cube",
}

SITE_OFFS = np.array([topology.site_coords(s) for s in range(16)], dtype=np.int64)
EDGE_LO_OFF = SITE_OFFS[_kernels.EDGE_LO]
EDGE_AXIS = _kernels.EDGE_AXIS
AXIS_UNIT = np.eye(4, dtype=np.int64)


def default_workers() -> int:
    env = os.environ.get("STEVE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def connect_masks(field: ToxelField, isovalue: float) -> np.ndarray:
    """Mixed-mode connect decision bits for every cell (24-bit masks).

    Bit f is set when the face's four corner samples average at or above the
    isovalue; faces touching a pad sentinel never connect.
    """
    nx, ny, nz, nt = field.dims
    shape = (nx - 1, ny - 1, nz - 1, nt - 1)
    masks = np.zeros(shape, dtype=np.int64)
    geom = topology.standard_geometry()
    for f in range(topology.N_FACES):
        total = np.zeros(shape)
        ghosted = np.zeros(shape, dtype=bool)
        for corner in geom.face_sites[f]:
            dx, dy, dz, dt = SITE_OFFS[corner]
            window = (slice(dx, dx + shape[0]), slice(dy, dy + shape[1]),
                      slice(dz, dz + shape[2]), slice(dt, dt + shape[3]))
            total += field.scalar[window]
            if field.ghost is not None:
                ghosted |= field.ghost[window]
        connect = (total >= 4.0 * isovalue) & ~ghosted
        masks |= connect.astype(np.int64) << f
    return masks


def _kernel_chunk(args):
    bitses, conns = args
    return _kernels.extract_stream(bitses, conns, *_kernels.statics())


def _run_walker(bitses, conns, workers):
    if workers <= 1 or len(bitses) < 2 * workers:
        chunks = [(bitses, conns)]
        results = [_kernel_chunk(chunks[0])]
    else:
        bounds = np.linspace(0, len(bitses), workers * 4 + 1).astype(int)
        chunks = [(bitses[a:b], conns[a:b])
                  for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_kernel_chunk, chunks)
    cyc_cell, cyc_sec, cyc_len, cyc_edges, statuses = [], [], [], [], []
    offset = 0
    for (chunk, _), res in zip(chunks, results):
        cell, sec, ln, edges, ncyc, nocc, status = res
        cyc_cell.append(cell + offset)
        cyc_sec.append(sec)
        cyc_len.append(ln)
        cyc_edges.append(edges)
        statuses.append(status)
        offset += len(chunk)
    status = np.concatenate(statuses) if statuses else np.zeros(0, np.int64)
    bad = np.flatnonzero(status)
    if len(bad):
        code = int(status[bad[0]])
        raise GeometryError(
            f"cell walk failed ({_KERNEL_STATUS.get(code, code)}) "
            f"in {len(bad)} cell(s)"
        )
    return (np.concatenate(cyc_cell), np.concatenate(cyc_sec),
            np.concatenate(cyc_len), np.concatenate(cyc_edges))


def extract_hypersurface(field: ToxelField, config: ExtractionConfig,
                         workers: int | None = None, pad: bool = True,
                         with_keys: bool = False) -> TetMesh4:
    """Extract the iso-hypersurface of a field as a deduplicated tet mesh."""
    if workers is None:
        workers = default_workers()
    if pad:
        field = pad_ghost(field)

    bits = pattern_bits(field, config.isovalue, config.strict_activity)
    flat_bits = bits.ravel(order="F").astype(np.int64)
    nontrivial = (flat_bits != 0) & (flat_bits != 0xFFFF)
    nz = np.flatnonzero(nontrivial)
    if len(nz) == 0:
        return TetMesh4(np.zeros((0, 4)), np.zeros((0, 4), dtype=np.int64),
                        attrs={name: np.zeros(0) for name in field.aux})

    if config.mode is Mode.CONNECT:
        conns = np.full(len(nz), 0xFFFFFF, dtype=np.int64)
    elif config.mode is Mode.DISCONNECT:
        conns = np.zeros(len(nz), dtype=np.int64)
    else:
        conns = connect_masks(field, config.isovalue).ravel(order="F")[nz]

    cshape = bits.shape
    bases = np.stack(np.unravel_index(nz, cshape, order="F"), axis=1)
    streams = _run_walker(flat_bits[nz], conns, workers)
    return _assemble(field, config, nz, bases, streams, with_keys)


def _segment_mean(values, cum, lens):
    """Per-segment mean as a strict left-to-right fold.

    Matches :func:`iso4d.tessellation.keyed_mean` bit for bit when the
    segment entries are pre-sorted the same way.
    """
    starts = cum[:-1]
    acc = values[starts].astype(np.float64, copy=True)
    maxlen = int(lens.max()) if len(lens) else 0
    for j in range(1, maxlen):
        mask = lens > j
        acc[mask] += values[starts[mask] + j]
    if values.ndim > 1:
        return acc / lens[:, None]
    return acc / lens


def _assemble(field, config, nz, bases, streams, with_keys):
    """Vectorized placement, dedup, and tet emission for one walked field."""
    cyc_cell, cyc_sec, cyc_len, occ_edge = streams
    ncyc = len(cyc_len)
    nx, ny, nzdim, nt = field.dims
    act = field.activity(config.isovalue, config.strict_activity)
    ghost = field.ghost if field.ghost is not None else np.zeros(field.dims, bool)

    cum = np.zeros(ncyc + 1, dtype=np.int64)
    np.cumsum(cyc_len, out=cum[1:])
    occ_cycle = np.repeat(np.arange(ncyc), cyc_len)
    occ_cell = cyc_cell[occ_cycle]

    # --- global support ids: (lower toxel linear index) * 4 + axis
    lo_idx = bases[occ_cell] + EDGE_LO_OFF[occ_edge]
    axis = EDGE_AXIS[occ_edge]
    lo_lin = (lo_idx[:, 0]
              + nx * (lo_idx[:, 1] + ny * (lo_idx[:, 2] + nzdim * lo_idx[:, 3])))
    occ_gid = lo_lin * 4 + axis

    sup_gid, occ_sidx = np.unique(occ_gid, return_inverse=True)
    s_axis = sup_gid % 4
    s_lin = sup_gid // 4
    s_lo = np.empty((len(sup_gid), 4), dtype=np.int64)
    s_lo[:, 0] = s_lin % nx
    rest = s_lin // nx
    s_lo[:, 1] = rest % ny
    rest //= ny
    s_lo[:, 2] = rest % nzdim
    s_lo[:, 3] = rest // nzdim
    s_hi = s_lo + AXIS_UNIT[s_axis]

    def sample(arr, idx):
        return arr[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]]

    f_lo, f_hi = sample(field.scalar, s_lo), sample(field.scalar, s_hi)
    a_lo = sample(act, s_lo)
    a_hi = sample(act, s_hi)
    if not (a_lo ^ a_hi).all():
        raise GeometryError("support edge without an activity transition")
    ghosted = sample(ghost, s_lo) | sample(ghost, s_hi)

    f_act = np.where(a_lo, f_lo, f_hi)
    f_inact = np.where(a_lo, f_hi, f_lo)
    if config.placement is Placement.INTERPOLATE:
        denom = f_inact - f_act
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (config.isovalue - f_act) / denom
        lam = np.clip(lam, config.clamp, 1.0 - config.clamp)
        lam[ghosted | (denom == 0.0)] = 0.5
    else:
        lam = np.full(len(sup_gid), 0.5)

    c_lo = field.toxel_center(s_lo)
    c_hi = field.toxel_center(s_hi)
    c_act = np.where(a_lo[:, None], c_lo, c_hi)
    c_inact = np.where(a_lo[:, None], c_hi, c_lo)
    mid = lam == 0.5
    sup_pos = np.where(mid[:, None], 0.5 * (c_lo + c_hi),
                       c_act * (1.0 - lam[:, None]) + c_inact * lam[:, None])

    sup_attrs = {}
    for name, arr in field.aux.items():
        v_lo, v_hi = sample(arr, s_lo), sample(arr, s_hi)
        v_act = np.where(a_lo, v_lo, v_hi)
        v_inact = np.where(a_lo, v_hi, v_lo)
        sup_attrs[name] = np.where(mid, 0.5 * (v_lo + v_hi),
                                   v_act * (1.0 - lam) + v_inact * lam)

    # --- centroids per cycle, accumulated in sorted-support order
    order = np.lexsort((occ_gid, occ_cycle))
    sorted_pos = sup_pos[occ_sidx[order]]
    cen_pos = _segment_mean(sorted_pos, cum, cyc_len)
    cen_attrs = {
        name: _segment_mean(vals[occ_sidx[order]], cum, cyc_len)
        for name, vals in sup_attrs.items()
    }
    sorted_gid = occ_gid[order]
    cyc_key = [tuple(sorted_gid[cum[c]:cum[c + 1]]) for c in range(ncyc)]

    # --- sections
    sec_key = cyc_cell * 64 + cyc_sec
    sec_ids, cyc_secidx = np.unique(sec_key, return_inverse=True)
    nsec = len(sec_ids)
    sec_cycles: list[list[int]] = [[] for _ in range(nsec)]
    for c in range(ncyc):
        sec_cycles[cyc_secidx[c]].append(c)

    single_tet = np.zeros(nsec, dtype=bool)
    for s, cycs in enumerate(sec_cycles):
        if len(cycs) == 4 and all(cyc_len[c] == 3 for c in cycs):
            single_tet[s] = True

    # volume centers: keyed mean over the section's cycle centroids
    vol_pos = np.zeros((nsec, 4))
    vol_attrs = {name: np.zeros(nsec) for name in sup_attrs}
    for s, cycs in enumerate(sec_cycles):
        if single_tet[s]:
            continue
        items = sorted(cycs, key=lambda c: cyc_key[c])
        vol_pos[s] = keyed_mean([(cyc_key[c], cen_pos[c]) for c in items])
        for name in vol_attrs:
            vol_attrs[name][s] = keyed_mean(
                [(cyc_key[c], cen_attrs[name][c]) for c in items]
            )

    # --- vertex table: supports, then fan centroids (key order), then volumes
    n_sup = len(sup_gid)
    fan_cycle = np.zeros(ncyc, dtype=bool)
    for c in range(ncyc):
        if cyc_len[c] >= 4 and not single_tet[cyc_secidx[c]]:
            fan_cycle[c] = True
    fan_keys = sorted({cyc_key[c] for c in np.flatnonzero(fan_cycle)})
    cen_vid = {key: n_sup + i for i, key in enumerate(fan_keys)}
    n_cen = len(fan_keys)
    vol_vid = np.full(nsec, -1, dtype=np.int64)
    nv = n_sup + n_cen
    for s in range(nsec):
        if not single_tet[s]:
            vol_vid[s] = nv
            nv += 1

    vertices = np.zeros((nv, 4))
    vertices[:n_sup] = sup_pos
    attrs = {name: np.zeros(nv) for name in sup_attrs}
    for name in attrs:
        attrs[name][:n_sup] = sup_attrs[name]
    cen_first = {}
    for c in range(ncyc):
        key = cyc_key[c]
        if fan_cycle[c] and key not in cen_first:
            cen_first[key] = c
    for key, vid in cen_vid.items():
        c = cen_first[key]
        vertices[vid] = cen_pos[c]
        for name in attrs:
            attrs[name][vid] = cen_attrs[name][c]
    for s in range(nsec):
        if vol_vid[s] >= 0:
            vertices[vol_vid[s]] = vol_pos[s]
            for name in attrs:
                attrs[name][vol_vid[s]] = vol_attrs[name][s]

    # --- tets
    occ_vid = occ_sidx  # support vertex id per occurrence
    tet_rows = []
    tet_order = []
    tet_prov = []

    fan_occ = np.flatnonzero(fan_cycle[occ_cycle])
    if len(fan_occ):
        c_of = occ_cycle[fan_occ]
        nxt = fan_occ + 1
        last = nxt == cum[c_of + 1]
        nxt[last] = cum[c_of[last]]
        cen_ids = np.array([cen_vid[cyc_key[c]] for c in c_of], dtype=np.int64)
        rows = np.stack([occ_vid[fan_occ], cen_ids, occ_vid[nxt],
                         vol_vid[cyc_secidx[c_of]]], axis=1)
        tet_rows.append(rows)
        tet_order.append(c_of * 16 + (fan_occ - cum[c_of]))
        tet_prov.append(np.stack([nz[cyc_cell[c_of]], cyc_sec[c_of]], axis=1))

    tri3 = np.flatnonzero((cyc_len == 3) & ~single_tet[cyc_secidx])
    if len(tri3):
        o0 = cum[tri3]
        rows = np.stack([occ_vid[o0], occ_vid[o0 + 2], occ_vid[o0 + 1],
                         vol_vid[cyc_secidx[tri3]]], axis=1)
        tet_rows.append(rows)
        tet_order.append(tri3 * 16)
        tet_prov.append(np.stack([nz[cyc_cell[tri3]], cyc_sec[tri3]], axis=1))

    for s in np.flatnonzero(single_tet):
        cycs = sec_cycles[s]
        local = []
        for c in cycs:
            seq = tuple(occ_edge[cum[c]:cum[c + 1]])
            rot = min(range(3), key=lambda i: seq[i:] + seq[:i])
            local.append((seq[rot:] + seq[:rot], c, rot))
        local.sort()
        seq, c, rot = local[0]
        occ = [cum[c] + (rot + i) % 3 for i in range(3)]
        ids = {int(occ_vid[o]) for cc in cycs for o in range(cum[cc], cum[cc + 1])}
        a, b, cc3 = (int(occ_vid[o]) for o in occ)
        rest = ids - {a, b, cc3}
        if len(ids) != 4 or len(rest) != 1:
            raise GeometryError("tetrahedral section without 4 distinct supports")
        rows = np.array([[a, cc3, b, rest.pop()]], dtype=np.int64)
        tet_rows.append(rows)
        tet_order.append(np.array([cycs[0] * 16]))
        tet_prov.append(np.array([[nz[cyc_cell[cycs[0]]], cyc_sec[cycs[0]]]]))

    if tet_rows:
        tets = np.concatenate(tet_rows)
        order_key = np.concatenate(tet_order)
        prov = np.concatenate(tet_prov)
        perm = np.argsort(order_key, kind="stable")
        tets = tets[perm]
        prov = prov[perm]
    else:
        tets = np.zeros((0, 4), dtype=np.int64)
        prov = np.zeros((0, 2), dtype=np.int64)

    keys = None
    if with_keys:
        keys = [("e", int(g) // 4, int(g) % 4) for g in sup_gid]
        keys += [("f",) + tuple(("e", int(g) // 4, int(g) % 4) for g in key)
                 for key in fan_keys]
        for s in range(nsec):
            if vol_vid[s] >= 0:
                keys.append(("v", int(nz[sec_ids[s] // 64]), int(sec_ids[s] % 64)))

    mesh = TetMesh4(vertices, tets, None, attrs, prov, keys)
    return mesh


# ---------------------------------------------------------------------------
# Reference route (pure Python); used by tests and single-cell studies.


def _edge_key(lin: int, axis: int) -> tuple:
    """Canonical support key; sorts exactly like the assembler's integer ids."""
    return ("e", lin, axis)


def cell_mesh(pattern: CellPattern, config: ExtractionConfig) -> TetMesh4:
    """Tessellate one cell in isolation (neighborhood coordinates).

    Support points are placed from the pattern's samples; the result is the
    cell's protomesh contribution and is generally open at the cell boundary.
    """
    result = extraction.extract_cell(pattern, config)
    geom = topology.standard_geometry()

    def resolver(edge):
        lo, hi = (int(v) for v in geom.edge_sites[edge])
        lo_ghost = bool((pattern.ghost_bits >> lo) & 1)
        hi_ghost = bool((pattern.ghost_bits >> hi) & 1)
        lo_active = bool((pattern.bits >> lo) & 1)
        f_lo, f_hi = float(pattern.values[lo]), float(pattern.values[hi])
        f_act, f_inact = (f_lo, f_hi) if lo_active else (f_hi, f_lo)
        lam = support_lambda(f_act, f_inact, config.isovalue, config.placement,
                             config.clamp, lo_ghost or hi_ghost)
        c_lo = geom.site_pos[lo].astype(np.float64)
        c_hi = geom.site_pos[hi].astype(np.float64)
        c_act, c_inact = (c_lo, c_hi) if lo_active else (c_hi, c_lo)
        i, j, k, l = (int(x) for x in geom.site_pos[lo])
        lin = i + 2 * (j + 2 * (k + 2 * l))
        return _edge_key(lin, int(geom.edge_axis[edge])), \
            support_position(c_act, c_inact, lam)

    vid: dict = {}
    positions: list = []
    all_tets = []
    prov = []
    for ordinal, section in enumerate(result.sections):
        tets, verts = tessellation.decompose(
            [list(c) for c in section.cycles], resolver, ("v", 0, ordinal))
        for key in sorted(verts):
            if key not in vid:
                vid[key] = len(positions)
                positions.append(np.asarray(verts[key], dtype=np.float64))
        for t in tets:
            all_tets.append([vid[k] for k in t])
            prov.append((0, ordinal))
    if not positions:
        return TetMesh4(np.zeros((0, 4)), np.zeros((0, 4), dtype=np.int64))
    return TetMesh4(np.array(positions), np.array(all_tets, dtype=np.int64),
                    provenance=np.array(prov, dtype=np.int64),
                    vertex_keys=sorted(vid, key=vid.get))


def extract_reference(field: ToxelField, config: ExtractionConfig,
                      pad: bool = True) -> TetMesh4:
    """Dictionary-based slow pipeline over :func:`iso4d.extraction.extract_cell`.

    Key conventions and accumulation orders match the vectorized assembler;
    tests compare the two on small fields.
    """
    if pad:
        field = pad_ghost(field)
    act = field.activity(config.isovalue, config.strict_activity)
    ghost = field.ghost if field.ghost is not None else np.zeros(field.dims, bool)
    geom = topology.standard_geometry()
    nx, ny, nz, nt = field.dims

    vid: dict = {}
    positions: list = []
    attr_vals: dict[str, list] = {name: [] for name in field.aux}
    all_tets = []
    prov = []

    for base, pattern in cells(field, config.isovalue, config.strict_activity):
        result = extraction.extract_cell(pattern, config)
        cell_lin = (base[0] + (nx - 1)
                    * (base[1] + (ny - 1) * (base[2] + (nz - 1) * base[3])))
        support_attr: dict = {}

        def resolver(edge, base=base, support_attr=support_attr):
            lo, hi = (int(v) for v in geom.edge_sites[edge])
            lo_idx = tuple(int(b + o) for b, o in zip(base, topology.site_coords(lo)))
            hi_idx = tuple(int(b + o) for b, o in zip(base, topology.site_coords(hi)))
            lo_active = bool(act[lo_idx])
            ghosted = bool(ghost[lo_idx] or ghost[hi_idx])
            f_lo, f_hi = float(field.scalar[lo_idx]), float(field.scalar[hi_idx])
            f_act, f_inact = (f_lo, f_hi) if lo_active else (f_hi, f_lo)
            lam = support_lambda(f_act, f_inact, config.isovalue,
                                 config.placement, config.clamp, ghosted)
            c_lo, c_hi = field.toxel_center(lo_idx), field.toxel_center(hi_idx)
            c_act, c_inact = (c_lo, c_hi) if lo_active else (c_hi, c_lo)
            lin = (lo_idx[0]
                   + nx * (lo_idx[1] + ny * (lo_idx[2] + nz * lo_idx[3])))
            key = _edge_key(lin, int(geom.edge_axis[edge]))
            attrs = {}
            for name, arr in field.aux.items():
                v_lo, v_hi = float(arr[lo_idx]), float(arr[hi_idx])
                if lam == 0.5:
                    attrs[name] = 0.5 * (v_lo + v_hi)
                else:
                    v_act, v_inact = (v_lo, v_hi) if lo_active else (v_hi, v_lo)
                    attrs[name] = v_act * (1.0 - lam) + v_inact * lam
            support_attr[key] = attrs
            return key, support_position(c_act, c_inact, lam)

        def attrs_of(key, section):
            if key[0] == "e":
                return support_attr[key]
            if key[0] == "f":
                return {
                    name: float(keyed_mean(
                        [(k, support_attr[k][name]) for k in key[1:]]))
                    for name in attr_vals
                }
            ckeys = sorted(
                ("f",) + tuple(sorted(resolver(e)[0] for e in cyc))
                for cyc in section.cycles
            )
            return {
                name: float(keyed_mean(
                    [(ck, attrs_of(ck, section)[name]) for ck in ckeys]))
                for name in attr_vals
            }

        for ordinal, section in enumerate(result.sections):
            tets, verts = tessellation.decompose(
                [list(c) for c in section.cycles], resolver,
                ("v", cell_lin, ordinal))
            for t in tets:
                ids = []
                for key in t:
                    if key not in vid:
                        vid[key] = len(positions)
                        positions.append(np.asarray(verts[key], dtype=np.float64))
                        for name, attr in attrs_of(key, section).items():
                            attr_vals[name].append(attr)
                    ids.append(vid[key])
                all_tets.append(ids)
                prov.append((cell_lin, ordinal))

    if not positions:
        return TetMesh4(np.zeros((0, 4)), np.zeros((0, 4), dtype=np.int64),
                        attrs={name: np.zeros(0) for name in field.aux})
    return TetMesh4(
        np.array(positions), np.array(all_tets, dtype=np.int64),
        attrs={name: np.array(vals) for name, vals in attr_vals.items()},
        provenance=np.array(prov, dtype=np.int64),
        vertex_keys=sorted(vid, key=vid.get),
    )

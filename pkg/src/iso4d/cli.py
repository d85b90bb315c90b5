"""Command-line pipeline: synth / extract / slice / validate / info.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 format, 5 validation failure.  Any
failure prints one machine-readable line to stderr:
``error: code=<N> kind=<Class> msg=<text>``.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import _kernels, slicing, tessellation, toolkit, topology
from .errors import Iso4dError, UsageError, ValidationFailure
from .field import ExtractionConfig, Mode, Placement
from .pipeline import default_workers, extract_hypersurface


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="iso4d",
        description="Extract iso-valued hypersurfaces from 4D volumes and "
                    "slice them into time series of triangle meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract a tet mesh from a volume")
    p.add_argument("--input", required=True, help="volume header file")
    p.add_argument("--isovalue", type=float, required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="mixed")
    p.add_argument("--placement", choices=[p.value for p in Placement],
                   default="interpolate")
    p.add_argument("--clamp", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", required=True, help=".st4 mesh path")

    p = sub.add_parser("slice", help="slice a tet mesh at fixed times")
    p.add_argument("--mesh", required=True)
    p.add_argument("--t", required=True,
                   help="comma-separated, ascending slice times")
    p.add_argument("--format", choices=["obj", "ply"], default="obj")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("validate", help="check a mesh is closed and oriented")
    p.add_argument("--mesh", required=True)

    p = sub.add_parser("gen-table", help="regenerate the 192-path table")
    p.add_argument("--verify", action="store_true",
                   help="compare against the shipped transcription")

    p = sub.add_parser("enumerate-cell",
                       help="sweep all cell patterns and print statistics")
    p.add_argument("--mixed-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20260809)

    p = sub.add_parser("synth", help="write a synthetic volume")
    p.add_argument("shape",
                   choices=["single-toxel", "hypersphere", "dumbbell", "slab"])
    p.add_argument("--dims", nargs=4, type=int, required=True)
    p.add_argument("--center", nargs="+", type=float, default=None)
    p.add_argument("--radius", type=float, default=0.0)
    p.add_argument("--separation", type=float, default=0.0)
    p.add_argument("--neck-base", type=float, default=0.0)
    p.add_argument("--neck-rate", type=float, default=0.0)
    p.add_argument("--neck-width", type=float, default=3.0)
    p.add_argument("--t-split", type=int, default=0)
    p.add_argument("--out", required=True, help="header file to write")

    p = sub.add_parser("info", help="summarize a mesh or volume")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--mesh")
    group.add_argument("--input")
    p.add_argument("--isovalue", type=float, default=0.0,
                   help="isovalue used for the active-count summary")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _dispatch(args)
    except Iso4dError as exc:
        print(f"error: code={exc.exit_code} kind={type(exc).__name__} "
              f"msg={exc}", file=sys.stderr)
        return exc.exit_code


def _dispatch(args) -> int:
    if args.command == "extract":
        field = toolkit.load_volume(args.input)
        config = ExtractionConfig(args.isovalue, Mode(args.mode),
                                  Placement(args.placement), args.clamp)
        workers = args.workers if args.workers else default_workers()
        mesh = extract_hypersurface(field, config, workers=workers)
        tessellation.write_st4(mesh, args.output)
        print(f"extracted {mesh.n_tets} tets on {mesh.n_vertices} vertices "
              f"-> {args.output}")
        return 0

    if args.command == "slice":
        mesh = tessellation.read_st4(args.mesh)
        try:
            taus = [float(v) for v in args.t.split(",") if v]
        except ValueError:
            raise UsageError(f"bad slice times {args.t!r}") from None
        if not taus:
            raise UsageError("no slice times given")
        writer = slicing.write_obj if args.format == "obj" else slicing.write_ply
        for i, tri in enumerate(slicing.slice_series(mesh, taus)):
            path = f"{args.out_prefix}{i:04d}.{args.format}"
            writer(tri, path)
            print(f"t={taus[i]:g}: {tri.n_triangles} triangles -> {path}")
        return 0

    if args.command == "validate":
        mesh = tessellation.read_st4(args.mesh)
        report = tessellation.validate(mesh)
        print(report)
        if not report.ok:
            raise ValidationFailure("mesh is not a closed oriented hypersurface")
        return 0

    if args.command == "gen-table":
        return _gen_table(args)

    if args.command == "enumerate-cell":
        return _enumerate_cell(args)

    if args.command == "synth":
        spec = toolkit.SynthSpec(
            shape=args.shape,
            dims=tuple(args.dims),
            center=tuple(args.center) if args.center else None,
            radius=args.radius,
            separation=args.separation,
            neck_base=args.neck_base,
            neck_rate=args.neck_rate,
            neck_width=args.neck_width,
            t_split=args.t_split,
        )
        field = toolkit.synth(spec)
        toolkit.write_volume(field, args.out)
        print(f"wrote {args.shape} volume {field.dims} -> {args.out}")
        return 0

    if args.command == "info":
        return _info(args)

    raise UsageError(f"unknown command {args.command!r}")


def _gen_table(args) -> int:
    t0 = time.time()
    reference = topology.standard_table()
    geometry = topology.reconstruct_geometry(reference)
    generated = topology.generate_table(geometry)
    mismatches = topology.verify_table(generated, reference)
    elapsed = time.time() - t0
    if args.verify:
        n_ok = 192 - len(mismatches)
        print(f"{n_ok}/192 paths match ({elapsed:.3f}s)")
        for line in mismatches[:20]:
            print(f"  {line}")
        if mismatches:
            raise ValidationFailure(f"{len(mismatches)} path(s) differ")
        return 0
    for center, orient, frm, to in generated.lines():
        print(f"{center} {topology.orientation_symbol(orient)} {frm} {to}")
    return 0


def _enumerate_cell(args) -> int:
    statics = _kernels.statics()
    len_hist = np.zeros(16, dtype=np.int64)
    sec_hist = None
    for conn in (0, 1):
        lh, sh, status, bits = _kernels.sweep_global(0, 65536, conn, *statics)
        if status:
            raise ValidationFailure(
                f"invariant violation (status {status}) at pattern {bits:#06x}"
            )
        len_hist += lh
        sec_hist = sh if sec_hist is None else sec_hist + sh
    rng = np.random.default_rng(args.seed)
    values = rng.random((args.mixed_samples, 16))
    geom = topology.standard_geometry()
    conn_samples = np.zeros(args.mixed_samples, dtype=np.int64)
    for f in range(topology.N_FACES):
        avg = values[:, geom.face_sites[f]].mean(axis=1)
        conn_samples |= (avg >= 0.5).astype(np.int64) << f
    lh, tested, status, bits = _kernels.sweep_mixed(0, 65536, conn_samples,
                                                    *statics)
    if status:
        raise ValidationFailure(
            f"invariant violation (status {status}) at pattern {bits:#06x}"
        )
    len_hist += lh
    print("cycle length histogram (connect + disconnect + mixed):")
    for n in range(16):
        if len_hist[n]:
            print(f"  {n:2d}: {int(len_hist[n])}")
    print("sections per cell (global modes):")
    for n, count in enumerate(sec_hist):
        if count:
            print(f"  {n:2d}: {int(count)}")
    print(f"mixed decision vectors walked: {int(tested)}")
    return 0


def _info(args) -> int:
    if args.mesh:
        mesh = tessellation.read_st4(args.mesh)
        report = tessellation.validate(mesh)
        lo, hi = mesh.bounding_box()
        print(f"vertices: {mesh.n_vertices}")
        print(f"tets: {mesh.n_tets}")
        print(f"components: {report.n_components}")
        print(f"closed: {report.closed}  oriented: {report.oriented}")
        print("bbox min: " + " ".join("%.17g" % v for v in lo))
        print("bbox max: " + " ".join("%.17g" % v for v in hi))
        for name in sorted(mesh.attrs):
            print(f"attr: {name}")
        return 0
    field = toolkit.load_volume(args.input)
    active = int((field.scalar >= args.isovalue).sum())
    print(f"dims: {field.dims[0]} {field.dims[1]} {field.dims[2]} {field.dims[3]}")
    print(f"spacing: " + " ".join("%.17g" % s for s in field.spacing))
    print(f"origin: " + " ".join("%.17g" % o for o in field.origin))
    print(f"value range: {field.scalar.min():.17g} .. {field.scalar.max():.17g}")
    print(f"active toxels at isovalue {args.isovalue:g}: {active}")
    for name in sorted(field.aux):
        print(f"aux: {name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

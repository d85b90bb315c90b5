"""Volume file format and synthetic test volumes.

A volume on disk is a small text header plus one raw little-endian float32
blob per channel, x-fastest.  Header grammar (one ``key = value`` per line,
``#`` comments):

    dims    = nx ny nz nt
    spacing = sx sy sz st
    origin  = ox oy oz ot
    dtype   = f32le
    order   = x-fastest
    data    = <path>
    aux     = <name> <path>      # repeatable

Paths are relative to the header file.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import FormatError, IOFailure
from .field import ToxelField


def load_volume(header_path) -> ToxelField:
    """Read a header + blob volume into memory."""
    try:
        with open(header_path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read header: {exc}") from None

    dims = spacing = origin = None
    dtype = order = None
    data_path = None
    aux_paths = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"header line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        fields = value.split()
        if key == "dims":
            dims = tuple(int(v) for v in fields)
        elif key == "spacing":
            spacing = tuple(float(v) for v in fields)
        elif key == "origin":
            origin = tuple(float(v) for v in fields)
        elif key == "dtype":
            dtype = value
        elif key == "order":
            order = value
        elif key == "data":
            data_path = value
        elif key == "aux":
            if len(fields) != 2:
                raise FormatError(f"header line {lineno}: aux wants name path")
            aux_paths.append((fields[0], fields[1]))
        else:
            raise FormatError(f"header line {lineno}: unknown key {key!r}")

    if dims is None or len(dims) != 4 or any(d <= 0 for d in dims):
        raise FormatError("header missing valid dims")
    if data_path is None:
        raise FormatError("header missing data path")
    if dtype != "f32le":
        raise FormatError(f"unknown dtype {dtype!r} (only f32le is supported)")
    if order != "x-fastest":
        raise FormatError(f"unknown order {order!r} (only x-fastest is supported)")
    spacing = spacing or (1.0, 1.0, 1.0, 1.0)
    origin = origin or (0.0, 0.0, 0.0, 0.0)

    base = os.path.dirname(os.path.abspath(header_path))

    def read_blob(rel):
        path = os.path.join(base, rel)
        try:
            blob = np.fromfile(path, dtype="<f4")
        except OSError as exc:
            raise IOFailure(f"cannot read blob {rel!r}: {exc}") from None
        expected = dims[0] * dims[1] * dims[2] * dims[3]
        if blob.size != expected:
            raise FormatError(
                f"blob {rel!r} holds {blob.size} samples, expected {expected}"
            )
        arr = blob.astype(np.float64).reshape(dims, order="F")
        if not np.isfinite(arr).all():
            raise FormatError(f"blob {rel!r} contains non-finite values")
        return arr

    scalar = read_blob(data_path)
    aux = {name: read_blob(rel) for name, rel in aux_paths}
    return ToxelField(scalar, spacing, origin, aux)


def write_volume(field: ToxelField, header_path) -> None:
    """Write a field as header + raw blobs next to the header file."""
    base, name = os.path.split(os.path.abspath(header_path))
    stem = os.path.splitext(name)[0]
    os.makedirs(base, exist_ok=True)

    def write_blob(rel, arr):
        arr.astype("<f4").ravel(order="F").tofile(os.path.join(base, rel))

    data_rel = stem + ".raw"
    write_blob(data_rel, field.scalar)
    lines = [
        "dims = %d %d %d %d" % field.dims,
        "spacing = %.17g %.17g %.17g %.17g" % field.spacing,
        "origin = %.17g %.17g %.17g %.17g" % field.origin,
        "dtype = f32le",
        "order = x-fastest",
        f"data = {data_rel}",
    ]
    for aux_name in sorted(field.aux):
        rel = f"{stem}.{aux_name}.raw"
        write_blob(rel, field.aux[aux_name])
        lines.append(f"aux = {aux_name} {rel}")
    with open(header_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# synthetic volumes

@dataclass(frozen=True)
class SynthSpec:
    """Parameters for one synthetic volume.

    ``shape`` is one of "single-toxel", "hypersphere", "dumbbell", "slab".
    Coordinates are in grid units (spacing 1, origin 0).
    """

    shape: str
    dims: tuple[int, int, int, int]
    center: tuple[float, ...] | None = None      # hypersphere / single-toxel
    radius: float = 0.0                          # hypersphere / dumbbell
    separation: float = 0.0                      # dumbbell center distance
    neck_base: float = 0.0                       # dumbbell neck at t=0
    neck_rate: float = 0.0                       # neck growth per unit time
    neck_width: float = 3.0
    t_split: int = 0                             # slab


def _grid(dims):
    axes = [np.arange(n, dtype=np.float64) for n in dims]
    return np.meshgrid(*axes, indexing="ij")


def synth(spec: SynthSpec) -> ToxelField:
    """Generate a synthetic field; active regions stay inside the grid."""
    dims = tuple(int(d) for d in spec.dims)
    if any(d <= 0 for d in dims):
        raise FormatError(f"bad dims {dims}")

    if spec.shape == "single-toxel":
        center = spec.center or tuple((d - 1) // 2 for d in dims)
        idx = tuple(int(c) for c in center)
        if any(not 0 <= c < d for c, d in zip(idx, dims)):
            raise FormatError(f"toxel index {idx} outside grid {dims}")
        scalar = np.zeros(dims)
        scalar[idx] = 1.0
        return ToxelField(scalar)

    if spec.shape == "hypersphere":
        center = spec.center or tuple((d - 1) / 2.0 for d in dims)
        if spec.radius <= 0:
            raise FormatError("hypersphere needs a positive radius")
        if any(c - spec.radius < 0 or c + spec.radius > d - 1
               for c, d in zip(center, dims)):
            raise FormatError("hypersphere pokes out of the grid")
        x, y, z, t = _grid(dims)
        dist = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2
                       + (z - center[2]) ** 2 + (t - center[3]) ** 2)
        return ToxelField(spec.radius - dist)

    if spec.shape == "dumbbell":
        return _dumbbell(spec)

    if spec.shape == "slab":
        if not 0 < spec.t_split < dims[3]:
            raise FormatError(f"slab split {spec.t_split} outside grid")
        x, y, z, t = _grid(dims)
        return ToxelField(np.where(t < spec.t_split, 1.0, 0.0))

    raise FormatError(f"unknown synthetic shape {spec.shape!r}")


def _dumbbell(spec: SynthSpec) -> ToxelField:
    """Two fixed balls joined by a neck that thins over time.

    The field is max(ball1, ball2) minus a Gaussian neck penalty centered
    between the balls whose amplitude grows linearly in time, so the level
    set pinches from one component into two at an analytically known time
    (:func:`dumbbell_pinch_time`).
    """
    dims = spec.dims
    if spec.radius <= 0 or spec.separation <= 0 or spec.neck_rate <= 0:
        raise FormatError("dumbbell needs positive radius, separation, neck_rate")
    cx, cy = (dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0
    cz = (dims[2] - 1) / 2.0
    half = spec.separation / 2.0
    c1 = np.array([cx, cy, cz - half])
    c2 = np.array([cx, cy, cz + half])
    if cz - half - spec.radius < 0 or cz + half + spec.radius > dims[2] - 1:
        raise FormatError("dumbbell pokes out of the grid")
    x, y, z, t = _grid(dims)
    d1 = np.sqrt((x - c1[0]) ** 2 + (y - c1[1]) ** 2 + (z - c1[2]) ** 2)
    d2 = np.sqrt((x - c2[0]) ** 2 + (y - c2[1]) ** 2 + (z - c2[2]) ** 2)
    balls = spec.radius - np.minimum(d1, d2)
    mid_dist2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
    amplitude = spec.neck_base + spec.neck_rate * t
    neck = amplitude * np.exp(-mid_dist2 / spec.neck_width ** 2)
    return ToxelField(balls - neck)


def dumbbell_pinch_time(spec: SynthSpec, isovalue: float) -> float:
    """Time where the dumbbell's waist value crosses the isovalue."""
    waist = spec.radius - spec.separation / 2.0
    return (waist - isovalue - spec.neck_base) / spec.neck_rate


def random_field(dims, seed: int, smooth: bool = False) -> ToxelField:
    """Reproducible random test volume (iid uniform, optionally smoothed)."""
    rng = np.random.default_rng(seed)
    scalar = rng.random(dims)
    if smooth:
        for axis in range(4):
            scalar = (scalar + np.roll(scalar, 1, axis) + np.roll(scalar, -1, axis)) / 3.0
    return ToxelField(scalar)

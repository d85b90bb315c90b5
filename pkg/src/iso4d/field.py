"""4D scalar fields, activity classification, and cell iteration.

A :class:`ToxelField` holds one scalar channel plus optional auxiliary
channels on a homogeneous (nx, ny, nz, nt) grid.  Arrays are indexed
``[ix, iy, iz, it]`` and laid out x-fastest to match the raw input format.

Toxels are *active* when their scalar value reaches the isovalue.  Ghost
toxels added by :func:`pad_ghost` are forced inactive regardless of value,
which guarantees every extracted hypersurface closes at the data boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import FormatError
from . import topology


class Mode(enum.Enum):
    """Resolution policy for points of ambiguity."""

    CONNECT = "connect"
    DISCONNECT = "disconnect"
    MIXED = "mixed"


class Placement(enum.Enum):
    MIDPOINT = "midpoint"
    INTERPOLATE = "interpolate"


@dataclass(frozen=True)
class ExtractionConfig:
    """Isovalue and policy knobs for one extraction run.

    ``clamp`` keeps interpolated support points strictly inside their range
    vectors.  ``strict_activity`` switches the active predicate from >= to >.
    """

    isovalue: float = 0.0
    mode: Mode = Mode.MIXED
    placement: Placement = Placement.MIDPOINT
    clamp: float = 1e-3
    strict_activity: bool = False

    def __post_init__(self):
        if not 0.0 < self.clamp < 0.5:
            raise FormatError(f"clamp must lie in (0, 0.5), got {self.clamp}")
        if not math.isfinite(self.isovalue):
            raise FormatError("isovalue must be finite")


def is_active(value: float, isovalue: float, strict: bool = False) -> bool:
    """Active predicate for a single sample.  Ties count as active."""
    if not math.isfinite(value):
        raise FormatError(f"non-finite sample value: {value}")
    return value > isovalue if strict else value >= isovalue


@dataclass
class ToxelField:
    """Scalar samples plus named auxiliary channels on a 4D grid."""

    scalar: np.ndarray
    spacing: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    origin: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    aux: dict[str, np.ndarray] = dc_field(default_factory=dict)
    ghost: np.ndarray | None = None  # True where the sample is a pad sentinel

    def __post_init__(self):
        self.scalar = np.asarray(self.scalar, dtype=np.float64)
        if self.scalar.ndim != 4:
            raise FormatError(f"scalar must be 4D, got shape {self.scalar.shape}")
        if not np.isfinite(self.scalar).all():
            raise FormatError("scalar field contains non-finite values")
        if any(s <= 0 for s in self.spacing):
            raise FormatError(f"spacing must be positive, got {self.spacing}")
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        for name, arr in self.aux.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != self.scalar.shape:
                raise FormatError(
                    f"aux channel {name!r} has shape {arr.shape}, "
                    f"expected {self.scalar.shape}"
                )
            if not np.isfinite(arr).all():
                raise FormatError(f"aux channel {name!r} contains non-finite values")
            self.aux[name] = arr
        if self.ghost is not None and self.ghost.shape != self.scalar.shape:
            raise FormatError("ghost mask shape mismatch")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.scalar.shape

    def activity(self, isovalue: float, strict: bool = False) -> np.ndarray:
        """Boolean activity mask; ghost toxels are always inactive."""
        act = self.scalar > isovalue if strict else self.scalar >= isovalue
        if self.ghost is not None:
            act &= ~self.ghost
        return act

    def toxel_center(self, index) -> np.ndarray:
        """World coordinates of a toxel center (index may be a (n,4) array)."""
        idx = np.asarray(index, dtype=np.float64)
        return np.asarray(self.origin) + idx * np.asarray(self.spacing)


def pad_ghost(field: ToxelField) -> ToxelField:
    """Surround the grid with a one-toxel layer of forced-inactive samples.

    The pad acts as a minus-infinity sentinel for activity, but the stored
    values (and aux channels) are edge-replicated so that no non-finite
    arithmetic ever happens; interpolation against a ghost falls back to
    midpoint placement instead.
    """
    scalar = np.pad(field.scalar, 1, mode="edge")
    aux = {name: np.pad(arr, 1, mode="edge") for name, arr in field.aux.items()}
    ghost = np.ones(scalar.shape, dtype=bool)
    inner = tuple(slice(1, -1) for _ in range(4))
    if field.ghost is not None:
        ghost[inner] = field.ghost
    else:
        ghost[inner] = False
    origin = tuple(o - s for o, s in zip(field.origin, field.spacing))
    return ToxelField(scalar, field.spacing, origin, aux, ghost)


# Per-site index offsets within a cell, in site-id order.
SITE_OFFSETS = np.array(
    [topology.site_coords(s) for s in range(topology.N_SITES)], dtype=np.int64
)


@dataclass(frozen=True)
class CellPattern:
    """Activity bits and raw samples of one 2x2x2x2 cell."""

    bits: int
    values: np.ndarray  # (16,) scalar samples in site-id order
    ghost_bits: int = 0  # bit i set when site i is a pad sentinel

    def is_trivial(self) -> bool:
        return self.bits in (0, 0xFFFF)


def pattern_bits(field: ToxelField, isovalue: float,
                 strict: bool = False) -> np.ndarray:
    """Activity bit pattern of every cell, shape (nx-1, ny-1, nz-1, nt-1)."""
    act = field.activity(isovalue, strict)
    nx, ny, nz, nt = field.dims
    shape = (nx - 1, ny - 1, nz - 1, nt - 1)
    bits = np.zeros(shape, dtype=np.uint16)
    for site in range(topology.N_SITES):
        dx, dy, dz, dt = SITE_OFFSETS[site]
        window = act[dx:dx + shape[0], dy:dy + shape[1],
                     dz:dz + shape[2], dt:dt + shape[3]]
        bits |= window.astype(np.uint16) << np.uint16(site)
    return bits


def ghost_bits(field: ToxelField) -> np.ndarray | None:
    """Pad-sentinel bit pattern per cell, or None for unpadded fields."""
    if field.ghost is None:
        return None
    nx, ny, nz, nt = field.dims
    shape = (nx - 1, ny - 1, nz - 1, nt - 1)
    bits = np.zeros(shape, dtype=np.uint16)
    for site in range(topology.N_SITES):
        dx, dy, dz, dt = SITE_OFFSETS[site]
        window = field.ghost[dx:dx + shape[0], dy:dy + shape[1],
                             dz:dz + shape[2], dt:dt + shape[3]]
        bits |= window.astype(np.uint16) << np.uint16(site)
    return bits


def cell_values(field: ToxelField, base) -> np.ndarray:
    """The 16 scalar samples of the cell anchored at ``base``, site order."""
    i, j, k, l = base
    block = field.scalar[i:i + 2, j:j + 2, k:k + 2, l:l + 2]
    return block[tuple(SITE_OFFSETS.T)]


def cells(field: ToxelField, isovalue: float, strict: bool = False):
    """Iterate non-trivial cells as (base index, CellPattern).

    Cells are visited in linear order with x fastest, matching the memory
    layout; all-active and all-inactive cells are skipped.
    """
    bits = pattern_bits(field, isovalue, strict)
    gbits = ghost_bits(field)
    nxc, nyc, nzc, ntc = bits.shape
    nontrivial = (bits != 0) & (bits != 0xFFFF)
    order = np.argwhere(nontrivial.transpose(3, 2, 1, 0))
    for l, k, j, i in order:
        base = (int(i), int(j), int(k), int(l))
        gb = int(gbits[base]) if gbits is not None else 0
        yield base, CellPattern(int(bits[base]), cell_values(field, base), gb)

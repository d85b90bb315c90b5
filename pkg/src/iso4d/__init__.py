"""Iso-valued hypersurface extraction from 4D voxel grids.

Extracts closed, oriented tetrahedral hypersurfaces (embedded in 4D) from
scalar fields on homogeneous 4D grids and slices them into chronologically
evolving 3D triangle meshes.
"""

from .field import ExtractionConfig, Mode, Placement, ToxelField, pad_ghost
from .pipeline import extract_hypersurface
from .tessellation import TetMesh4, read_st4, validate, write_st4
from .slicing import slice_mesh, slice_series

__all__ = [
    "ExtractionConfig",
    "Mode",
    "Placement",
    "ToxelField",
    "TetMesh4",
    "extract_hypersurface",
    "pad_ghost",
    "read_st4",
    "slice_mesh",
    "slice_series",
    "validate",
    "write_st4",
]

__version__ = "0.1.0"

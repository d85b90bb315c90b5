"""Field container, activity predicate, ghost padding, cell iteration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iso4d import field as F
from iso4d.errors import FormatError
from iso4d.field import ExtractionConfig, Mode, Placement, ToxelField

from conftest import bits_of


def test_is_active_boundary_convention():
    assert F.is_active(1.0, 0.5)
    assert F.is_active(0.5, 0.5)       # ties are active
    assert not F.is_active(0.499, 0.5)
    assert not F.is_active(0.5, 0.5, strict=True)


def test_is_active_rejects_non_finite():
    with pytest.raises(FormatError):
        F.is_active(float("nan"), 0.0)


def test_config_validation():
    with pytest.raises(FormatError):
        ExtractionConfig(0.0, clamp=0.0)
    with pytest.raises(FormatError):
        ExtractionConfig(0.0, clamp=0.5)
    with pytest.raises(FormatError):
        ExtractionConfig(float("inf"))
    cfg = ExtractionConfig(0.5)
    assert cfg.mode is Mode.MIXED
    assert cfg.clamp == 1e-3


def test_field_validation():
    with pytest.raises(FormatError):
        ToxelField(np.zeros((2, 2, 2)))
    with pytest.raises(FormatError):
        ToxelField(np.full((2, 2, 2, 2), np.nan))
    with pytest.raises(FormatError):
        ToxelField(np.zeros((2, 2, 2, 2)), spacing=(1, 1, 0, 1))
    with pytest.raises(FormatError):
        ToxelField(np.zeros((2, 2, 2, 2)), aux={"a": np.zeros((2, 2, 2, 3))})


def test_pad_ghost_dims_and_values():
    fld = ToxelField(np.ones((2, 2, 2, 2)), aux={"q": np.full((2, 2, 2, 2), 3.0)})
    padded = F.pad_ghost(fld)
    assert padded.dims == (4, 4, 4, 4)
    assert padded.ghost.sum() == 4 ** 4 - 2 ** 4
    assert not padded.ghost[1:-1, 1:-1, 1:-1, 1:-1].any()
    # aux padded by edge replication
    assert (padded.aux["q"] == 3.0).all()
    # origin shifts by one spacing so toxel coordinates are preserved
    assert padded.origin == (-1.0, -1.0, -1.0, -1.0)
    assert np.array_equal(padded.toxel_center((1, 1, 1, 1)), np.zeros(4))


def test_pad_ghost_single_toxel_interior():
    fld = ToxelField(np.ones((1, 1, 1, 1)))
    padded = F.pad_ghost(fld)
    act = padded.activity(0.5)
    assert act.sum() == 1
    assert act[1, 1, 1, 1]


def test_ghost_padding_preserves_activity():
    rng = np.random.default_rng(3)
    fld = ToxelField(rng.random((3, 4, 2, 3)))
    padded = F.pad_ghost(fld)
    inner = tuple(slice(1, -1) for _ in range(4))
    assert np.array_equal(padded.activity(0.5)[inner], fld.activity(0.5))


def test_all_active_field_extracts_closed_mesh():
    from iso4d import tessellation
    from iso4d.pipeline import extract_hypersurface
    fld = ToxelField(np.ones((2, 2, 2, 2)))
    mesh = extract_hypersurface(fld, ExtractionConfig(0.5))
    assert mesh.n_tets > 0
    assert tessellation.validate(mesh).ok


def test_cells_single_active_toxel_in_padded_grid():
    scalar = np.zeros((2, 2, 2, 2))
    scalar[0, 0, 0, 0] = 1.0
    padded = F.pad_ghost(ToxelField(scalar))
    assert padded.dims == (4, 4, 4, 4)
    found = list(F.cells(padded, 0.5))
    assert len(found) == 16
    for _, pattern in found:
        assert bin(pattern.bits).count("1") == 1


def test_cells_skips_trivial():
    fld = ToxelField(np.zeros((3, 3, 3, 3)))
    assert list(F.cells(fld, 0.5)) == []
    fld = ToxelField(np.ones((3, 3, 3, 3)))
    assert list(F.cells(fld, 0.5)) == []


def test_pattern_bits_example():
    # a cell whose active sites are 4 and 15 has bits 0x8010
    scalar = np.zeros((2, 2, 2, 2))
    from iso4d import topology
    for s in (4, 15):
        x, y, z, t = topology.site_coords(s)
        scalar[x, y, z, t] = 1.0
    fld = ToxelField(scalar)
    bits = F.pattern_bits(fld, 0.5)
    assert bits.shape == (1, 1, 1, 1)
    assert int(bits[0, 0, 0, 0]) == 0x8010


def test_cells_order_is_deterministic():
    rng = np.random.default_rng(8)
    fld = ToxelField(rng.random((4, 4, 4, 4)))
    a = [(base, p.bits) for base, p in F.cells(fld, 0.5)]
    b = [(base, p.bits) for base, p in F.cells(fld, 0.5)]
    assert a == b
    # linear, x fastest
    keys = [i + 3 * (j + 3 * (k + 3 * l)) for (i, j, k, l), _ in a]
    assert keys == sorted(keys)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_cells_patterns_match_raw_values(seed):
    rng = np.random.default_rng(seed)
    fld = ToxelField(rng.random((3, 3, 2, 3)))
    act = fld.activity(0.5)
    for base, pattern in F.cells(fld, 0.5):
        from iso4d import topology
        recomputed = 0
        for s in range(16):
            off = topology.site_coords(s)
            idx = tuple(b + o for b, o in zip(base, off))
            if act[idx]:
                recomputed |= 1 << s
        assert recomputed == pattern.bits
        assert np.array_equal(pattern.values, F.cell_values(fld, base))

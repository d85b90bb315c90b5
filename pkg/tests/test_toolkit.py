"""Volume format, synthetic volumes, and their analytic properties."""

import numpy as np
import pytest

from iso4d import toolkit as K
from iso4d.errors import FormatError, IOFailure
from iso4d.field import ToxelField


def test_volume_roundtrip_with_aux(tmp_path):
    rng = np.random.default_rng(1)
    fld = ToxelField(rng.random((3, 4, 2, 5)).astype("<f4").astype(float),
                     spacing=(1.0, 2.0, 1.0, 0.5), origin=(0, 0, -1, 3),
                     aux={"temperature": rng.random((3, 4, 2, 5)).astype("<f4").astype(float)})
    header = tmp_path / "vol.t4v"
    K.write_volume(fld, header)
    back = K.load_volume(header)
    assert back.dims == (3, 4, 2, 5)
    assert back.spacing == (1.0, 2.0, 1.0, 0.5)
    assert back.origin == (0.0, 0.0, -1.0, 3.0)
    assert np.array_equal(back.scalar, fld.scalar)
    assert set(back.aux) == {"temperature"}
    assert np.array_equal(back.aux["temperature"], fld.aux["temperature"])


def test_tiny_volume_loads(tmp_path):
    fld = ToxelField(np.arange(16, dtype=float).reshape(2, 2, 2, 2))
    header = tmp_path / "v.t4v"
    K.write_volume(fld, header)
    assert (tmp_path / "v.raw").stat().st_size == 64
    back = K.load_volume(header)
    assert back.scalar.size == 16
    # x-fastest on disk
    blob = np.fromfile(tmp_path / "v.raw", dtype="<f4")
    assert blob[0] == fld.scalar[0, 0, 0, 0]
    assert blob[1] == fld.scalar[1, 0, 0, 0]


def test_short_blob_is_a_format_error(tmp_path):
    fld = ToxelField(np.zeros((2, 2, 2, 2)))
    header = tmp_path / "v.t4v"
    K.write_volume(fld, header)
    raw = tmp_path / "v.raw"
    raw.write_bytes(raw.read_bytes()[:-4])
    with pytest.raises(FormatError, match="60 samples"):
        K.load_volume(header)


def test_header_errors(tmp_path):
    header = tmp_path / "v.t4v"
    header.write_text("dims = 2 2 2 2\ndtype = f64le\norder = x-fastest\ndata = x.raw\n")
    with pytest.raises(FormatError, match="dtype"):
        K.load_volume(header)
    header.write_text("dims = 2 2 2 2\ndtype = f32le\norder = x-fastest\n")
    with pytest.raises(FormatError, match="data"):
        K.load_volume(header)
    with pytest.raises(IOFailure):
        K.load_volume(tmp_path / "missing.t4v")
    header.write_text("dims = 2 2 2 2\ndtype = f32le\norder = x-fastest\ndata = no.raw\n")
    with pytest.raises(IOFailure):
        K.load_volume(header)


def test_non_finite_blob_rejected(tmp_path):
    header = tmp_path / "v.t4v"
    fld = ToxelField(np.zeros((2, 2, 2, 2)))
    K.write_volume(fld, header)
    np.full(16, np.nan, dtype="<f4").tofile(tmp_path / "v.raw")
    with pytest.raises(FormatError, match="non-finite"):
        K.load_volume(header)


def test_single_toxel_synth():
    fld = K.synth(K.SynthSpec("single-toxel", (3, 3, 3, 3)))
    assert (fld.scalar >= 0.5).sum() == 1
    assert fld.scalar[1, 1, 1, 1] == 1.0
    with pytest.raises(FormatError):
        K.synth(K.SynthSpec("single-toxel", (3, 3, 3, 3), center=(5, 0, 0, 0)))


def test_hypersphere_volume_within_two_percent():
    fld = K.synth(K.SynthSpec("hypersphere", (24, 24, 24, 24), radius=8.0))
    active = int((fld.scalar >= 0.0).sum())
    continuum = np.pi ** 2 * 8.0 ** 4 / 2.0
    assert abs(active - continuum) / continuum < 0.02


def test_hypersphere_bounds_check():
    with pytest.raises(FormatError, match="pokes"):
        K.synth(K.SynthSpec("hypersphere", (10, 10, 10, 10), radius=8.0))


def test_slab_is_a_time_indicator():
    fld = K.synth(K.SynthSpec("slab", (3, 3, 3, 6), t_split=2))
    assert (fld.scalar[:, :, :, :2] == 1.0).all()
    assert (fld.scalar[:, :, :, 2:] == 0.0).all()


def test_dumbbell_waist_crosses_isovalue_at_pinch_time():
    spec = K.SynthSpec("dumbbell", (21, 21, 31, 16), radius=8.0,
                       separation=10.0, neck_rate=0.32, neck_width=7.0)
    fld = K.synth(spec)
    tstar = K.dumbbell_pinch_time(spec, 0.0)
    assert tstar == pytest.approx(9.375)
    waist = fld.scalar[10, 10, 15, :]
    assert waist[int(np.floor(tstar))] > 0 > waist[int(np.ceil(tstar))]


def test_random_field_is_reproducible():
    a = K.random_field((4, 4, 4, 4), seed=5)
    b = K.random_field((4, 4, 4, 4), seed=5)
    assert np.array_equal(a.scalar, b.scalar)
    assert not np.array_equal(a.scalar, K.random_field((4, 4, 4, 4), seed=6).scalar)

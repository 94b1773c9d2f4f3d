import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from depthground import DepthMap
from depthground.errors import FormatError, InputMissingError
from depthground.io import (
    dataset_frames,
    depth_to_mm,
    load_depth,
    load_depth_png16,
    load_mask,
    load_raw_f32,
    save_depth,
    save_depth_png16,
    save_mask,
    save_raw_f32,
    write_frame,
)


def write_u16(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint16)).save(path)


def test_png16_unit_and_sentinel(tmp_path):
    write_u16(tmp_path / "d.png", [[1234, 0], [1, 65535]])
    d = load_depth_png16(tmp_path / "d.png")
    assert d.values[0, 0] == pytest.approx(1.234, abs=1e-12) and d.valid[0, 0]
    assert not d.valid[0, 1]
    assert d.values[1, 1] == pytest.approx(65.535, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), hi=st.sampled_from([2.0, 65.535]))
def test_png16_round_trip(tmp_path_factory, seed, hi):
    r = np.random.default_rng(seed)
    vals = r.uniform(0.001, hi, (7, 9))
    valid = r.random((7, 9)) < 0.8
    d = DepthMap(vals, valid)
    path = tmp_path_factory.mktemp("rt") / "d.png"
    save_depth_png16(d, path)
    back = load_depth_png16(path)
    assert np.array_equal(back.valid, valid)
    assert np.abs(back.values - d.values).max() <= 0.0005 + 1e-12


def test_png16_constant_and_invalid_encodings(tmp_path):
    assert np.all(depth_to_mm(DepthMap.dense(np.ones((3, 3)))) == 1000)
    assert np.all(depth_to_mm(DepthMap(np.zeros((2, 2)))) == 0)
    save_depth_png16(DepthMap.dense(np.ones((3, 3))), tmp_path / "a.png")
    save_depth_png16(DepthMap.dense(np.ones((3, 3))), tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_png16_out_of_range(tmp_path):
    with pytest.raises(FormatError, match="65.5"):
        save_depth_png16(DepthMap.dense([[70.0]]), tmp_path / "x.png")


def test_png16_rejects_8bit_and_rgb(tmp_path):
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "g.png")
    with pytest.raises(FormatError, match="'L'"):
        load_depth_png16(tmp_path / "g.png")
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(tmp_path / "c.png")
    with pytest.raises(FormatError, match="3 channel"):
        load_depth_png16(tmp_path / "c.png")


def test_png_garbage_and_missing(tmp_path):
    (tmp_path / "bad.png").write_bytes(b"not an image")
    with pytest.raises(FormatError):
        load_depth_png16(tmp_path / "bad.png")
    with pytest.raises(InputMissingError):
        load_depth_png16(tmp_path / "missing.png")


def test_f32_header_layout(tmp_path):
    d = DepthMap.dense(np.arange(1.0, 7.0).reshape(2, 3))
    save_raw_f32(d, tmp_path / "d.f32")
    data = (tmp_path / "d.f32").read_bytes()
    assert len(data) == 16 + 24
    assert struct.unpack("<4sIII", data[:16]) == (b"ADPF", 1, 2, 3)
    assert np.frombuffer(data[16:], "<f4").tolist() == [1, 2, 3, 4, 5, 6]


def test_f32_nan_is_invalid(tmp_path):
    d = DepthMap([[1.0, 2.0]], [[True, False]])
    save_raw_f32(d, tmp_path / "d.f32")
    payload = np.frombuffer((tmp_path / "d.f32").read_bytes()[16:], "<f4")
    assert payload[0] == 1.0 and np.isnan(payload[1])
    assert load_raw_f32(tmp_path / "d.f32") == d


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_f32_bit_exact_round_trip(tmp_path_factory, seed):
    r = np.random.default_rng(seed)
    vals = r.uniform(1e-3, 1e3, (5, 4)).astype(np.float32).astype(np.float64)
    valid = r.random((5, 4)) < 0.7
    d = DepthMap(vals, valid)
    path = tmp_path_factory.mktemp("f") / "d.f32"
    save_raw_f32(d, path)
    back = load_raw_f32(path)
    assert back.values.tobytes() == d.values.tobytes()
    assert np.array_equal(back.valid, d.valid)


@pytest.mark.parametrize(
    "blob,match",
    [
        (b"ADP", "truncated"),
        (struct.pack("<4sIII", b"XXXX", 1, 1, 1) + b"\0" * 4, "magic"),
        (struct.pack("<4sIII", b"ADPF", 2, 1, 1) + b"\0" * 4, "version"),
        (struct.pack("<4sIII", b"ADPF", 1, 2, 2) + b"\0" * 4, "size mismatch"),
    ],
)
def test_f32_malformed(tmp_path, blob, match):
    (tmp_path / "bad.f32").write_bytes(blob)
    with pytest.raises(FormatError, match=match):
        load_raw_f32(tmp_path / "bad.f32")


def test_extension_dispatch(tmp_path):
    d = DepthMap([[1.25, 0.5]], [[True, True]])
    save_depth(d, tmp_path / "a.f32")
    save_depth(d, tmp_path / "a.png")
    assert load_depth(tmp_path / "a.f32") == d
    assert np.allclose(load_depth(tmp_path / "a.png").values, d.values, atol=5e-4)


def test_mask_round_trip(tmp_path):
    m = np.random.default_rng(0).random((5, 6)) < 0.5
    save_mask(m, tmp_path / "m.png")
    assert np.array_equal(load_mask(tmp_path / "m.png"), m)


def test_dataset_layout(tmp_path):
    d = DepthMap.dense(np.full((4, 4), 1.5))
    write_frame(tmp_path, "b", d, d, d, np.eye(4, dtype=bool))
    write_frame(tmp_path, "a", d, d, d)
    frames = dataset_frames(tmp_path)
    assert [f.stem for f in frames] == ["a", "b"]
    assert frames[0].mask is None and frames[1].mask.sum() == 4
    with pytest.raises(InputMissingError):
        dataset_frames(tmp_path / "empty_does_not_exist")
    (tmp_path / "empty").mkdir()
    with pytest.raises(InputMissingError, match="no"):
        dataset_frames(tmp_path / "empty")

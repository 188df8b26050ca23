"""Checkpoint container: byte stability, exact round trips, validation."""

import json

import numpy as np
import pytest

from strfnet.checkpoint import (
    MAGIC,
    load_checkpoint,
    pack_state,
    save_checkpoint,
    unpack_state,
)


def sample_arrays(seed=0):
    rng = np.random.default_rng(seed)
    return {
        "param/w": rng.normal(size=(3, 4)),
        "param/scalars": rng.uniform(size=(5, 4)),
        "buffer/mean": rng.normal(size=7).astype(np.float32),
        "adam_m/w": rng.normal(size=(3, 4)),
        "count": np.array(17, dtype=np.int64),
        "flags": np.array([1, 0, 1], dtype=np.int8),
    }


def test_round_trip_is_exact(tmp_path):
    path = tmp_path / "state.ckpt"
    arrays = sample_arrays()
    config = {"first_layer": "strf", "n_strf_kernels": 60}
    extra = {"seed": 3, "dev_threshold": 0.4375}
    save_checkpoint(path, config, arrays, extra)
    config2, arrays2, extra2 = load_checkpoint(path)
    assert config2 == config
    assert extra2 == extra
    assert set(arrays2) == set(arrays)
    for k, v in arrays.items():
        assert arrays2[k].dtype == v.dtype, k
        assert arrays2[k].shape == v.shape, k
        assert np.array_equal(arrays2[k], v), k


def test_same_state_saves_identical_bytes(tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    arrays = sample_arrays()
    save_checkpoint(a, {"x": 1}, arrays, {"note": "same"})
    save_checkpoint(b, {"x": 1}, {k: v.copy() for k, v in arrays.items()},
                    {"note": "same"})
    assert a.read_bytes() == b.read_bytes()


def test_load_save_load_is_stable(tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, {"x": 1}, sample_arrays(), None)
    config, arrays, extra = load_checkpoint(a)
    save_checkpoint(b, config, arrays, extra)
    assert a.read_bytes() == b.read_bytes()


def test_file_layout_magic_header_then_blobs(tmp_path):
    path = tmp_path / "layout.ckpt"
    arrays = {"b": np.arange(3, dtype=np.float64), "a": np.arange(2, dtype=np.float64)}
    save_checkpoint(path, {"c": 2}, arrays, {"e": True})
    raw = path.read_bytes()
    assert raw[:8] == MAGIC == b"STRFNET1"
    hlen = int(np.frombuffer(raw[8:16], dtype="<u8")[0])
    header = json.loads(raw[16 : 16 + hlen].decode())
    assert sorted(header) == ["arrays", "config", "extra"]
    assert [e["key"] for e in header["arrays"]] == ["a", "b"]  # sorted order
    body = raw[16 + hlen :]
    assert body == arrays["a"].tobytes() + arrays["b"].tobytes()


def test_zero_dim_and_empty_arrays_round_trip(tmp_path):
    path = tmp_path / "edge.ckpt"
    arrays = {"scalar": np.array(2.5), "empty": np.zeros((0, 3))}
    save_checkpoint(path, {}, arrays)
    _, out, _ = load_checkpoint(path)
    assert out["scalar"].shape == ()
    assert out["scalar"] == 2.5
    assert out["empty"].shape == (0, 3)


def test_big_endian_input_is_stored_little_endian(tmp_path):
    path = tmp_path / "endian.ckpt"
    be = np.arange(4, dtype=">f8")
    save_checkpoint(path, {}, {"w": be})
    _, out, _ = load_checkpoint(path)
    assert out["w"].dtype == np.dtype("<f8")
    assert np.array_equal(out["w"], np.arange(4.0))


def test_noncontiguous_arrays_are_written_correctly(tmp_path):
    path = tmp_path / "strided.ckpt"
    base = np.arange(24, dtype=np.float64).reshape(4, 6)
    view = base[:, ::2]  # non-contiguous
    save_checkpoint(path, {}, {"v": view})
    _, out, _ = load_checkpoint(path)
    assert np.array_equal(out["v"], view)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTSTRF0" + b"\x00" * 32)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "trail.ckpt"
    save_checkpoint(path, {}, {"w": np.zeros(2)})
    path.write_bytes(path.read_bytes() + b"junk")
    with pytest.raises(ValueError, match="trailing"):
        load_checkpoint(path)


def test_pack_unpack_state_inverse():
    params = {"fc.w": np.ones((2, 2)), "fc.b": np.zeros(2)}
    buffers = {"bn0.mean": np.zeros(3)}
    m = {"fc.w": np.full((2, 2), 0.1), "fc.b": np.zeros(2)}
    v = {"fc.w": np.full((2, 2), 0.2), "fc.b": np.zeros(2)}
    flat = pack_state(params, buffers, m, v)
    assert set(flat) == {"param/fc.w", "param/fc.b", "buffer/bn0.mean",
                         "adam_m/fc.w", "adam_m/fc.b", "adam_v/fc.w", "adam_v/fc.b"}
    p2, b2, m2, v2 = unpack_state(flat)
    for got, want in ((p2, params), (b2, buffers), (m2, m), (v2, v)):
        assert set(got) == set(want)
        for k in want:
            assert np.array_equal(got[k], want[k])


def test_pack_state_without_optimizer_state():
    flat = pack_state({"w": np.ones(1)}, {"m": np.zeros(1)})
    p, b, m, v = unpack_state(flat)
    assert set(p) == {"w"} and set(b) == {"m"}
    assert m == {} and v == {}


def test_unpack_state_rejects_unknown_prefix():
    with pytest.raises(ValueError):
        unpack_state({"grads/fc.w": np.zeros(1)})
    with pytest.raises(ValueError):
        unpack_state({"param": np.zeros(1)})  # no name after the slash

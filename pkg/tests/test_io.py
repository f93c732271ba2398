import json
import struct

import numpy as np
import pytest

from hybridseg.errors import ConfigError, ShapeError
from hybridseg.harness.bench import read_csv, write_csv
from hybridseg.model import SegmentationNet, preset
from hybridseg.tensorio import (
    decode_smt1,
    encode_smt1,
    heatmap_to_pgm,
    load_checkpoint,
    load_smt1,
    read_pgm,
    read_ppm,
    save_checkpoint,
    save_smt1,
    write_pgm,
    write_ppm,
)


def test_smt1_header_layout():
    buf = encode_smt1(np.arange(6, dtype=np.float32).reshape(2, 3))
    assert buf[:4] == b"SMT1"
    assert buf[4] == 0 and buf[5] == 2
    assert struct.unpack_from("<2I", buf, 6) == (2, 3)
    assert np.frombuffer(buf[14:], dtype="<f4").tolist() == [0, 1, 2, 3, 4, 5]
    assert encode_smt1(np.zeros(1))[4] == 1


@pytest.mark.parametrize("shape", [(), (1,), (4, 0), (2, 3, 4), (1, 1, 1, 1, 5)])
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_smt1_bitwise_roundtrip(tmp_path, shape, dtype):
    arr = np.random.default_rng(0).normal(size=shape).astype(dtype)
    save_smt1(tmp_path / "a.smt1", arr)
    back = load_smt1(tmp_path / "a.smt1")
    assert back.dtype == arr.dtype and back.shape == arr.shape and back.tobytes() == arr.tobytes()


def test_smt1_special_values_and_big_endian_input():
    arr = np.array([np.nan, -np.inf, -0.0, 1e-310])
    assert decode_smt1(encode_smt1(arr)).tobytes() == arr.tobytes()
    big = np.arange(3, dtype=">f8")
    assert decode_smt1(encode_smt1(big)).tolist() == [0.0, 1.0, 2.0]


def test_smt1_rejects_bad_input():
    with pytest.raises(ConfigError):
        encode_smt1(np.arange(3))
    with pytest.raises(ConfigError):
        decode_smt1(b"XXXX\x00\x00")
    with pytest.raises(ShapeError):
        decode_smt1(encode_smt1(np.zeros(3))[:-1])


def test_checkpoint_roundtrip(tmp_path):
    net = SegmentationNet(preset("micro"), seed=1)
    state = net.state_dict()
    save_checkpoint(tmp_path, state, {"config": net.cfg.to_dict()})
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["tensors"]) == set(state)
    back, meta = load_checkpoint(tmp_path)
    assert all(back[k].tobytes() == state[k].tobytes() and back[k].dtype == state[k].dtype for k in state)
    assert meta["config"]["name"] == "micro"


def test_load_state_dict_is_strict():
    net = SegmentationNet(preset("micro"))
    state = net.state_dict()
    state.pop(next(iter(state)))
    with pytest.raises(Exception):
        net.load_state_dict(state)


def test_netpbm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    g = rng.integers(0, 256, size=(5, 9), dtype=np.uint8)
    c = rng.integers(0, 256, size=(3, 4, 3), dtype=np.uint8)
    write_pgm(tmp_path / "g.pgm", g)
    write_ppm(tmp_path / "c.ppm", c)
    assert np.array_equal(read_pgm(tmp_path / "g.pgm"), g)
    assert np.array_equal(read_ppm(tmp_path / "c.ppm"), c)
    assert (tmp_path / "g.pgm").read_bytes().startswith(b"P5")


def test_heatmap_pgm(tmp_path):
    heat = np.array([[0.0, 0.5], [1.0, 0.25]])
    heatmap_to_pgm(tmp_path / "h.pgm", heat)
    assert read_pgm(tmp_path / "h.pgm").tolist() == [[0, 128], [255, 64]]


def test_csv_roundtrip_is_value_exact(tmp_path):
    rows = [(32, 1024, 0.1 + 0.2), (64, 4096, 1 / 3)]
    write_csv(tmp_path / "b.csv", rows)
    assert read_csv(tmp_path / "b.csv") == rows

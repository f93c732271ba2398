"""On-disk formats: SMT1 raw tensors, checkpoints, PGM/PPM images."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError

MAGIC = b"SMT1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def encode_smt1(arr) -> bytes:
    arr = np.asarray(arr)
    try:
        code = _CODES[arr.dtype.newbyteorder("=")]
    except KeyError:
        raise ConfigError(f"SMT1 stores float32/float64 only, got {arr.dtype}") from None
    if arr.ndim > 255:
        raise ShapeError("rank above 255")
    header = MAGIC + struct.pack("<BB", code, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()


def decode_smt1(buf: bytes) -> np.ndarray:
    if buf[:4] != MAGIC:
        raise ConfigError("not an SMT1 buffer (bad magic)")
    code, rank = struct.unpack_from("<BB", buf, 4)
    if code not in _DTYPES:
        raise ConfigError(f"unknown SMT1 dtype code {code}")
    dims = struct.unpack_from(f"<{rank}I", buf, 6)
    off = 6 + 4 * rank
    dt = _DTYPES[code]
    n = int(np.prod(dims, dtype=np.int64))
    if len(buf) - off != n * dt.itemsize:
        raise ShapeError(f"payload holds {len(buf) - off} bytes, expected {n * dt.itemsize}")
    return np.frombuffer(buf, dtype=dt, count=n, offset=off).reshape(dims).astype(dt.newbyteorder("="))


def save_smt1(path, arr) -> None:
    Path(path).write_bytes(encode_smt1(arr))


def load_smt1(path) -> np.ndarray:
    return decode_smt1(Path(path).read_bytes())


def save_checkpoint(directory, state: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write one SMT1 file per entry plus ``manifest.json`` mapping path -> file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for i, (name, arr) in enumerate(state.items()):
        fname = f"t{i:04d}.smt1"
        save_smt1(directory / fname, arr)
        files[name] = fname
    manifest = {"format": "SMT1-checkpoint", "tensors": files, "meta": meta or {}}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_checkpoint(directory) -> tuple[dict[str, np.ndarray], dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    state = {name: load_smt1(directory / fname) for name, fname in manifest["tensors"].items()}
    return state, manifest.get("meta", {})


# -- netpbm ----------------------------------------------------------------
def _write_pnm(path, magic: bytes, arr: np.ndarray) -> None:
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + f"\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def _read_pnm(path, magic: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != magic:
        raise ConfigError(f"expected {magic!r} file, got {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ConfigError("only 8-bit netpbm files are supported")
    ch = 3 if magic == b"P6" else 1
    arr = np.frombuffer(data, dtype=np.uint8, count=h * w * ch, offset=pos)
    return arr.reshape((h, w, 3) if ch == 3 else (h, w)).copy()


def write_pgm(path, arr) -> None:
    """Grayscale uint8 [H, W]."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ShapeError("PGM needs a 2-D array")
    _write_pnm(path, b"P5", arr)


def read_pgm(path) -> np.ndarray:
    return _read_pnm(path, b"P5")


def write_ppm(path, arr) -> None:
    """RGB uint8 [H, W, 3]."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError("PPM needs an [H, W, 3] array")
    _write_pnm(path, b"P6", arr)


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, b"P6")


def heatmap_to_pgm(path, heat) -> None:
    """Scale a [0, 1] map to 0..255 and write it as PGM."""
    heat = np.clip(np.asarray(heat, dtype=np.float64), 0.0, 1.0)
    write_pgm(path, np.rint(heat * 255).astype(np.uint8))

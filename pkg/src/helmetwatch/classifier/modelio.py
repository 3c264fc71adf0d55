"""Binary cascade model files.

Layout (all little-endian)::

    offset  size        field
    0       4           magic b"HWC1"
    4       4   u32     format version (1)
    8       20  5 x u32 window_h, window_w, grid_rows, grid_cols, dim
    28      8   f64     linear threshold (theta1)
    36      8   f64     linear bias
    44      8*dim f64   linear weights
    ...     8   f64     HIK threshold (theta2)
    ...     8   f64     HIK bias
    ...     4   u32     number of support vectors n
    ...     1   u8      support-vector dtype: 0 = int32, 1 = float64
    ...     3           zero padding
    ...     8*n f64     signed dual coefficients (alpha_i * y_i)
    ...     n*dim*{4|8} support vectors, row-major
    end-4   4   u32     CRC-32 of every preceding byte

The HIK lookup table is rebuilt on load; it is a deterministic function of
the support vectors and coefficients.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..centrist import BLOCK_COLS, BLOCK_ROWS, FEATURE_DIM, WINDOW_H, WINDOW_W
from .hik import hik_fast_table
from .models import CascadeModel, HikModel, LinearModel

MAGIC = b"HWC1"
VERSION = 1
_HEAD = struct.Struct("<4sI5I")
_F64x2 = struct.Struct("<dd")
_SV_HEAD = struct.Struct("<IB3x")


class FormatError(ValueError):
    """The file is not a readable model (magic, version, size or checksum)."""


class ModelValidationError(ValueError):
    """The file parsed but a field is out of range; ``field`` names it."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def dumps_model(model: CascadeModel) -> bytes:
    lin, hik = model.linear, model.hik
    dim = model.dim
    sv = np.asarray(hik.support_vectors)
    integral = np.issubdtype(sv.dtype, np.integer) and (sv.size == 0 or sv.max() < 2**31)
    parts = [
        _HEAD.pack(MAGIC, VERSION, int(model.window[0]), int(model.window[1]),
                   int(model.grid[0]), int(model.grid[1]), dim),
        _F64x2.pack(float(lin.threshold), float(lin.bias)),
        np.asarray(lin.weights, dtype="<f8").tobytes(),
        _F64x2.pack(float(hik.threshold), float(hik.bias)),
        _SV_HEAD.pack(len(hik.alphas), 0 if integral else 1),
        np.asarray(hik.alphas, dtype="<f8").tobytes(),
        np.ascontiguousarray(sv, dtype="<i4" if integral else "<f8").tobytes(),
    ]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_model(model: CascadeModel, path) -> None:
    Path(path).write_bytes(dumps_model(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated model file (need {self.pos + n} bytes, have {len(self.data)})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).astype(dt.newbyteorder("="))


def loads_model(data: bytes) -> CascadeModel:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a model file (bad magic)")
    if len(data) < _HEAD.size + 4:
        raise FormatError("truncated model file")
    body, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    r = _Reader(body)
    _, version, wh, ww, gr, gc, dim = r.unpack(_HEAD)
    if version != VERSION:
        raise FormatError(f"unsupported model version {version} (expected {VERSION})")
    if zlib.crc32(body) != crc:
        raise FormatError("checksum mismatch (truncated or corrupted model file)")
    if (wh, ww) != (WINDOW_H, WINDOW_W):
        raise ModelValidationError("window", f"{wh}x{ww} != {WINDOW_H}x{WINDOW_W}")
    if (gr, gc) != (BLOCK_ROWS, BLOCK_COLS):
        raise ModelValidationError("grid", f"{gr}x{gc} != {BLOCK_ROWS}x{BLOCK_COLS}")
    if dim != FEATURE_DIM:
        raise ModelValidationError("dim", f"{dim} != {FEATURE_DIM}")
    theta1, bias1 = r.unpack(_F64x2)
    weights = r.array("<f8", dim)
    theta2, bias2 = r.unpack(_F64x2)
    n_sv, sv_kind = r.unpack(_SV_HEAD)
    if sv_kind not in (0, 1):
        raise FormatError(f"unknown support-vector dtype code {sv_kind}")
    alphas = r.array("<f8", n_sv)
    sv = r.array("<i4" if sv_kind == 0 else "<f8", n_sv * dim).reshape(n_sv, dim)
    if r.pos != len(body):
        raise FormatError(f"{len(body) - r.pos} unexpected trailing bytes")
    for name, val in (("theta1", theta1), ("linear.bias", bias1), ("theta2", theta2), ("hik.bias", bias2)):
        if not np.isfinite(val):
            raise ModelValidationError(name, "not finite")
    if not np.all(np.isfinite(weights)):
        raise ModelValidationError("linear.weights", "not finite")
    if not np.all(np.isfinite(alphas)):
        raise ModelValidationError("hik.alphas", "not finite")
    if sv.size and sv.min() < 0:
        raise ModelValidationError("hik.support_vectors", "negative entries")
    hik = HikModel(support_vectors=sv, alphas=alphas, bias=bias2, threshold=theta2)
    if sv_kind == 0:
        hik.table = hik_fast_table(hik)
    return CascadeModel(LinearModel(weights, bias1, theta1), hik, (wh, ww), (gr, gc))


def load_model(path) -> CascadeModel:
    return loads_model(Path(path).read_bytes())

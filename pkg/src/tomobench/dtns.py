"""Bit-exact on-disk tensor format (DTNS) and the run manifest.

Layout: magic "DTNS", version u16 LE, dtype code u8 (1 = float64 LE,
2 = uint32 LE), ndim u8, ndim x u64 LE dims, then the row-major payload.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DTNS"
VERSION = 1
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<u4")}
_CODES = {np.dtype("float64"): 1, np.dtype("uint32"): 2}


class DtnsError(ValueError):
    """Base class for DTNS format violations."""


class DtnsMagicError(DtnsError):
    pass


class DtnsVersionError(DtnsError):
    pass


class DtnsDtypeError(DtnsError):
    pass


class DtnsTruncationError(DtnsError):
    pass


def write_tensor(values: np.ndarray, path) -> None:
    """Write a float64 or uint32 tensor; row-major, little-endian."""
    arr = np.asarray(values)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    code = _CODES.get(arr.dtype)
    if code is None:
        raise DtnsDtypeError(
            f"dtype: unsupported array dtype {arr.dtype} "
            "(float64 and uint32 are supported)")
    header = struct.pack("<4sHBB", MAGIC, VERSION, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = arr.astype(_DTYPES[code], copy=False).tobytes()
    Path(path).write_bytes(header + dims + payload)


def read_tensor(path) -> np.ndarray:
    """Read a DTNS tensor, validating every header field."""
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise DtnsTruncationError(f"header: file {path} is shorter than the "
                                  "8-byte fixed header")
    magic, version, code, ndim = struct.unpack_from("<4sHBB", blob, 0)
    if magic != MAGIC:
        raise DtnsMagicError(f"magic: expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise DtnsVersionError(f"version: expected {VERSION}, got {version}")
    dtype = _DTYPES.get(code)
    if dtype is None:
        raise DtnsDtypeError(f"dtype: unsupported dtype code {code}")
    dims_end = 8 + 8 * ndim
    if len(blob) < dims_end:
        raise DtnsTruncationError(
            f"dims: file {path} truncated inside the dims block")
    dims = struct.unpack_from(f"<{ndim}Q", blob, 8)
    expected = int(np.prod(dims, dtype=np.uint64)) * dtype.itemsize
    if len(blob) - dims_end != expected:
        raise DtnsTruncationError(
            f"payload: expected {expected} bytes for dims {dims}, "
            f"got {len(blob) - dims_end}")
    return np.frombuffer(blob[dims_end:], dtype=dtype).reshape(dims).copy()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def verify_manifest(path) -> dict:
    """Load a manifest and check every referenced file's checksum.

    Raises DtnsError naming the first mismatching file.
    """
    path = Path(path)
    manifest = read_manifest(path)
    base = path.parent
    for entry in manifest.get("files", []):
        target = base / entry["path"]
        if not target.exists():
            raise DtnsError(f"manifest: missing file {entry['path']}")
        digest = file_sha256(target)
        if digest != entry["checksum"]:
            raise DtnsError(
                f"manifest: checksum mismatch for {entry['path']}: "
                f"expected {entry['checksum']}, got {digest}")
    return manifest

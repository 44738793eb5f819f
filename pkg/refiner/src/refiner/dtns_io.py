"""Reader/writer for the DTNS tensor format and the dataset manifest.

Implemented against the published byte layout (magic "DTNS", version u16
LE, dtype u8: 1 = float64 LE / 2 = uint32 LE, ndim u8, ndim x u64 LE dims,
row-major payload) so this package depends only on the on-disk contract.
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


class DtnsFormatError(ValueError):
    pass


def read_tensor(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise DtnsFormatError(f"{path}: header truncated")
    magic, version, code, ndim = struct.unpack_from("<4sHBB", blob, 0)
    if magic != MAGIC:
        raise DtnsFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DtnsFormatError(f"{path}: unsupported version {version}")
    dtype = _DTYPES.get(code)
    if dtype is None:
        raise DtnsFormatError(f"{path}: unsupported dtype code {code}")
    end = 8 + 8 * ndim
    if len(blob) < end:
        raise DtnsFormatError(f"{path}: dims truncated")
    dims = struct.unpack_from(f"<{ndim}Q", blob, 8)
    expected = int(np.prod(dims, dtype=np.uint64)) * dtype.itemsize
    if len(blob) - end != expected:
        raise DtnsFormatError(f"{path}: payload length {len(blob) - end} "
                              f"!= expected {expected}")
    return np.frombuffer(blob[end:], dtype=dtype).reshape(dims).copy()


def write_tensor(values: np.ndarray, path) -> None:
    arr = np.asarray(values)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    code = _CODES.get(arr.dtype)
    if code is None:
        raise DtnsFormatError(f"unsupported dtype {arr.dtype}")
    header = struct.pack("<4sHBB", MAGIC, VERSION, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    Path(path).write_bytes(header + dims + arr.tobytes())


def load_manifest(dataset_dir) -> dict:
    """Load manifest.json and verify every referenced file checksum."""
    dataset_dir = Path(dataset_dir)
    path = dataset_dir / "manifest.json"
    if not path.exists():
        raise DtnsFormatError(f"missing manifest {path}")
    manifest = json.loads(path.read_text())
    for entry in manifest.get("files", []):
        target = dataset_dir / entry["path"]
        if not target.exists():
            raise DtnsFormatError(f"manifest references missing file "
                                  f"{target}")
        digest = hashlib.sha256(target.read_bytes()).hexdigest()
        if digest != entry["checksum"]:
            raise DtnsFormatError(f"checksum mismatch for {target}")
    return manifest


def manifest_tensor(dataset_dir, manifest: dict, *, role: str,
                    algorithm: str | None = None,
                    n0: float | None = None) -> np.ndarray:
    """Look up and read the unique tensor matching (role, algorithm, n0)."""
    hits = [f for f in manifest["files"]
            if f["role"] == role
            and (algorithm is None or f["algorithm"] == algorithm)
            and (n0 is None or f["n0"] == n0)]
    if not hits:
        raise DtnsFormatError(
            f"no manifest entry with role={role} algorithm={algorithm} "
            f"n0={n0}")
    if len(hits) > 1:
        raise DtnsFormatError(
            f"ambiguous manifest lookup role={role} algorithm={algorithm} "
            f"n0={n0}: {[h['path'] for h in hits]}")
    return read_tensor(Path(dataset_dir) / hits[0]["path"])

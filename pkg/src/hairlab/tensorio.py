"""Binary tensor container used for every model checkpoint.

Layout: magic ``HLTC`` | format version u32 LE | manifest length u64 LE |
manifest JSON (utf-8) | payload. The manifest lists tensors in payload order
with name/shape/dtype plus a free-form ``meta`` dict; the payload is the
concatenation of the tensors as little-endian float32.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"HLTC"
FORMAT_VERSION = 1


def save_tensors(
    path: str | Path,
    tensors: dict[str, np.ndarray],
    meta: dict | None = None,
) -> None:
    entries = []
    blobs = []
    for name, arr in tensors.items():
        # asarray keeps 0-d rank (ascontiguousarray would promote to 1-d);
        # tobytes emits C order regardless of the input layout.
        arr = np.asarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "float32"})
        blobs.append(arr.tobytes())
    manifest = json.dumps(
        {"tensors": entries, "meta": meta or {}},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"not a tensor container: bad magic {raw[:4]!r}")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version}")
    (mlen,) = struct.unpack("<Q", raw[8:16])
    manifest = json.loads(raw[16 : 16 + mlen].decode("utf-8"))
    offset = 16 + mlen
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        if entry["dtype"] != "float32":
            raise ValueError(f"unsupported dtype {entry['dtype']}")
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise ValueError("payload truncated")
        arr = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float32)
        offset = end
    if offset != len(raw):
        raise ValueError("trailing bytes after payload")
    return tensors, manifest.get("meta", {})

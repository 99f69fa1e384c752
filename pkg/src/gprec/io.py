"""Named-array binary container used for checkpoints and persisted datasets.

Layout (all integers little-endian)::

    8 bytes   magic  b"GPRECNA1"
    8 bytes   header length H (uint64)
    H bytes   UTF-8 JSON header:
                {"manifest": {...},
                 "arrays": [{"name", "dtype", "shape", "offset", "nbytes"}, ...]}
    ...       raw array bytes, C order, little-endian; offsets are relative
              to the first byte after the header

The same inputs always produce the same bytes. Writes go to a temporary
file in the target directory that is then renamed over the destination.
"""
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"GPRECNA1"


def save_arrays(path, arrays, manifest=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        table.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                      "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"manifest": manifest or {}, "arrays": table},
                        sort_keys=True, separators=(",", ":")).encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            for raw in blobs:
                fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_arrays(path):
    """Return ``(arrays, manifest)`` from a container written by :func:`save_arrays`."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path} is not a named-array container")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen].decode())
    base = 16 + hlen
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        buf = data[start:start + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
    return arrays, header["manifest"]


def write_json_atomic(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path

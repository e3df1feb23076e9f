"""
Checkpoint container.

Layout (all integers little-endian)::

    b"EMOCKPT\\0"            8-byte magic
    uint32                   format version
    uint64                   header length in bytes
    header                   UTF-8 JSON: kind, config, tensor directory, payload size, sha256
    payload                  float32 little-endian blocks, row-major, in directory order

Each directory record is ``{"name", "shape", "offset"}`` with ``offset`` in
bytes from the start of the payload.
"""

import hashlib
import json
import struct

import numpy as np

from emostyle.errors import CorruptCheckpoint, VersionMismatch

MAGIC = b"EMOCKPT\0"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def save(path, kind, config, tensors):
    """Write ``tensors`` (name -> array) with a JSON-serialisable ``config`` snapshot."""
    directory, blocks, offset = [], [], 0
    for name in sorted(tensors):
        block = np.ascontiguousarray(tensors[name], dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(np.shape(tensors[name])), "offset": offset})
        blocks.append(block)
        offset += len(block)
    payload = b"".join(blocks)
    header = {
        "kind": kind,
        "config": config,
        "tensors": directory,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(head)))
        fh.write(head)
        fh.write(payload)


def load(path):
    """Return ``(kind, config, tensors)``; tensors are float32 arrays."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise CorruptCheckpoint(f"{path}: truncated ({len(raw)} bytes)")
    magic, version, head_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"{path}: checkpoint format version {version}, this build reads {VERSION}")
    start = _PREFIX.size + head_len
    if len(raw) < start:
        raise CorruptCheckpoint(f"{path}: truncated header")
    try:
        header = json.loads(raw[_PREFIX.size : start].decode("utf-8"))
        directory = header["tensors"]
        declared = int(header["payload_bytes"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header ({exc})") from None

    payload = raw[start:]
    expected = 4 * sum(int(np.prod(t["shape"], dtype=np.int64)) for t in directory)
    if expected != declared:
        raise CorruptCheckpoint(
            f"{path}: tensor shapes need {expected} payload bytes but header declares {declared}"
        )
    if len(payload) != declared:
        raise CorruptCheckpoint(f"{path}: payload has {len(payload)} bytes, header declares {declared}")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CorruptCheckpoint(f"{path}: payload digest mismatch")

    tensors = {}
    for t in directory:
        n = int(np.prod(t["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=t["offset"])
        tensors[t["name"]] = arr.reshape(t["shape"]).astype(np.float32)
    return header["kind"], header["config"], tensors

"""Binary checkpoint container ("TJF1").

Layout: magic ``TJF1``; u32 header length + UTF-8 ``key=value`` lines; then
one record per parameter until EOF: u32 name length, name bytes, u32 rank,
u32 per dimension, raw little-endian float32 values. All integers are
little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptCheckpoint
from .params import ParameterStore

MAGIC = b"TJF1"


def encode_header(header: dict[str, str]) -> bytes:
    lines = []
    for key, value in header.items():
        if "=" in key or "\n" in key or "\n" in str(value):
            raise ValueError(f"header entry {key!r} cannot be encoded")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode("utf-8")


def decode_header(raw: bytes) -> dict[str, str]:
    header = {}
    text = raw.decode("utf-8")
    for line in text.split("\n") if text else []:
        key, sep, value = line.partition("=")
        if not sep:
            raise CorruptCheckpoint(f"malformed header line {line!r}")
        header[key] = value
    return header


def dumps(store: ParameterStore, header: dict[str, str]) -> bytes:
    parts = [MAGIC]
    head = encode_header(header)
    parts.append(struct.pack("<I", len(head)))
    parts.append(head)
    for name, p in store.params.items():
        nb = name.encode("utf-8")
        arr = np.ascontiguousarray(p.value, dtype="<f4")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> tuple[ParameterStore, dict[str, str]]:
    if blob[:4] != MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    pos = 4

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise CorruptCheckpoint(f"truncated while reading {what}")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    (hlen,) = struct.unpack("<I", take(4, "header length"))
    try:
        header = decode_header(take(hlen, "header"))
    except UnicodeDecodeError as exc:
        raise CorruptCheckpoint(f"header is not UTF-8: {exc}") from None
    store = ParameterStore(dtype=np.float32)
    while pos < len(blob):
        (nlen,) = struct.unpack("<I", take(4, "name length"))
        try:
            name = take(nlen, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptCheckpoint("parameter name is not UTF-8") from None
        (rank,) = struct.unpack("<I", take(4, f"rank of {name}"))
        if rank > 8:
            raise CorruptCheckpoint(f"implausible rank {rank} for {name}")
        shape = struct.unpack(f"<{rank}I", take(4 * rank, f"shape of {name}"))
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(take(4 * count, f"values of {name}"), dtype="<f4")
        if name in store:
            raise CorruptCheckpoint(f"duplicate parameter {name!r}")
        store.add(name, data.reshape(shape).astype(np.float32))
    return store, header


def save(store: ParameterStore, header: dict[str, str], path) -> None:
    Path(path).write_bytes(dumps(store, header))


def load(path) -> tuple[ParameterStore, dict[str, str]]:
    return loads(Path(path).read_bytes())

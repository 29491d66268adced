"""Minimal LVWT writer (and a reader for self-tests).

Layout, everything little-endian:

    "LVWT" | u32 version = 1 | u64 entry count
    per entry: u32 name length | name (UTF-8) | u8 dtype (0 = f32)
               | u8 rank (1..4) | rank x u64 dims | u64 absolute offset
    zero padding to a 64-byte boundary (only when entries exist)
    tensor data, contiguous, in entry order

The writer is canonical (insertion order, contiguous offsets from the
aligned section start), which makes re-runs of the export scripts
byte-for-byte reproducible.
"""

import struct

import numpy as np

MAGIC = b"LVWT"
VERSION = 1
ALIGNMENT = 64


def write_lvwt(entries, path):
    """entries: sequence of (name, ndarray); arrays are stored as f32."""
    prepared = []
    seen = set()
    for name, array in entries:
        if name in seen:
            raise ValueError(f"duplicate tensor name {name!r}")
        seen.add(name)
        arr = np.ascontiguousarray(np.asarray(array, dtype=np.float32))
        if not 1 <= arr.ndim <= 4:
            raise ValueError(f"tensor {name!r} has unsupported rank {arr.ndim}")
        prepared.append((name.encode("utf-8"), arr))

    table = 16 + sum(4 + len(n) + 2 + 8 * a.ndim + 8 for n, a in prepared)
    start = -(-table // ALIGNMENT) * ALIGNMENT if prepared else table

    out = bytearray(MAGIC)
    out += struct.pack("<IQ", VERSION, len(prepared))
    offset = start
    for name, arr in prepared:
        out += struct.pack("<I", len(name)) + name
        out += struct.pack(f"<BB{arr.ndim}Q", 0, arr.ndim, *arr.shape)
        out += struct.pack("<Q", offset)
        offset += arr.nbytes
    out += bytes(start - table)
    for _, arr in prepared:
        out += arr.tobytes()
    with open(path, "wb") as f:
        f.write(out)


def read_lvwt(path):
    """Parse a container back into an ordered {name: ndarray} dict.

    This is test plumbing, not the validating reader the engine has; it
    assumes a well-formed file.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}")
    version, count = struct.unpack_from("<IQ", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    pos = 16
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        dtype, rank = struct.unpack_from("<BB", data, pos)
        pos += 2
        if dtype != 0:
            raise ValueError(f"unsupported dtype {dtype} for {name!r}")
        shape = struct.unpack_from(f"<{rank}Q", data, pos)
        pos += 8 * rank
        (offset,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        n = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
        tensors[name] = arr.reshape(shape).copy()
    return tensors

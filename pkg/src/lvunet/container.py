"""LVWT weight container: a flat binary table of named float32 tensors.

Layout (all integers little-endian):

    offset 0   magic "LVWT" (4 bytes)
    offset 4   u32 format version, currently 1
    offset 8   u64 entry count E
    then E entry records back to back:
        u32 name length, name bytes (UTF-8)
        u8 dtype code (0 = float32), u8 rank (1..4)
        rank x u64 dims
        u64 absolute byte offset of the tensor data
    zero padding up to the next 64-byte boundary (only when E > 0)
    tensor data back to back in entry order

The writer is canonical: entries keep insertion order, data offsets are
assigned contiguously from the aligned section start, so write(read(f))
reproduces f byte for byte. The reader validates magic, version, dtype,
rank, duplicate names, truncation, and overlapping data regions, and every
parse error reports the byte position it was detected at.
"""

import struct

import numpy as np

MAGIC = b"LVWT"
VERSION = 1
DTYPE_F32 = 0
ALIGNMENT = 64
_MAX_RANK = 4


class FormatError(ValueError):
    """Malformed container or image bytes; byte_position locates the fault."""

    def __init__(self, message: str, byte_position: int | None = None):
        if byte_position is not None:
            message = f"{message} (at byte {byte_position})"
        super().__init__(message)
        self.byte_position = byte_position


class WeightContainer:
    """Ordered name -> float32 ndarray mapping with container semantics."""

    def __init__(self):
        self._entries: dict[str, np.ndarray] = {}

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self._entries:
            raise FormatError(f"duplicate tensor name {name!r}")
        arr = np.ascontiguousarray(np.asarray(array, dtype=np.float32))
        if not 1 <= arr.ndim <= _MAX_RANK:
            raise ValueError(f"tensor {name!r} has rank {arr.ndim}, supported range is 1..{_MAX_RANK}")
        self._entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._entries[name]
        except KeyError:
            raise KeyError(f"container has no tensor named {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()


def _coerce_entries(entries) -> WeightContainer:
    if isinstance(entries, WeightContainer):
        return entries
    container = WeightContainer()
    for name, array in entries:
        container.add(name, array)
    return container


def write_container(entries, path) -> None:
    """Serialize entries (WeightContainer or iterable of (name, array))."""
    container = _coerce_entries(entries)
    records = []
    table_size = 16
    for name, arr in container.items():
        encoded = name.encode("utf-8")
        records.append((encoded, arr))
        table_size += 4 + len(encoded) + 1 + 1 + 8 * arr.ndim + 8
    if records:
        data_start = (table_size + ALIGNMENT - 1) // ALIGNMENT * ALIGNMENT
    else:
        data_start = table_size

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IQ", VERSION, len(records))
    offset = data_start
    for encoded, arr in records:
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<BB", DTYPE_F32, arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        blob += struct.pack("<Q", offset)
        offset += arr.nbytes
    blob += b"\x00" * (data_start - table_size)
    for _, arr in records:
        blob += arr.tobytes()
    with open(path, "wb") as f:
        f.write(blob)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise FormatError(f"truncated container: needed {count} bytes for {what}", self.pos)
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]


def read_container(path) -> WeightContainer:
    with open(path, "rb") as f:
        data = f.read()
    cur = _Cursor(data)
    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    version = cur.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}", 4)
    count = cur.u64("entry count")

    entries = []
    for _ in range(count):
        name_pos = cur.pos
        name_len = cur.u32("name length")
        name = cur.take(name_len, "name").decode("utf-8")
        dtype = cur.u8("dtype")
        if dtype != DTYPE_F32:
            raise FormatError(f"unsupported dtype code {dtype} for {name!r}", cur.pos - 1)
        rank = cur.u8("rank")
        if not 1 <= rank <= _MAX_RANK:
            raise FormatError(f"rank {rank} out of range 1..{_MAX_RANK} for {name!r}", cur.pos - 1)
        shape = tuple(cur.u64("dim") for _ in range(rank))
        offset = cur.u64("data offset")
        entries.append((name, shape, offset, name_pos))

    container = WeightContainer()
    regions = []
    for name, shape, offset, name_pos in entries:
        if name in container:
            raise FormatError(f"duplicate tensor name {name!r}", name_pos)
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset + nbytes > len(data):
            raise FormatError(
                f"tensor {name!r} data [{offset}, {offset + nbytes}) runs past "
                f"end of file ({len(data)} bytes)", offset)
        regions.append((offset, offset + nbytes, name))
        arr = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset)
        container.add(name, arr.reshape(shape).copy())
    regions.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(regions, regions[1:]):
        if s1 < e0 and e1 > s1:  # zero-length regions never overlap
            raise FormatError(f"tensors {n0!r} and {n1!r} have overlapping data", s1)
    return container

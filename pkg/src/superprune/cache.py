"""Append-only on-disk store of oracle verdicts.

Each record is::

    u32 length | key (8 bytes) | tag (1 byte) | counterexample JSON | u32 crc32

where ``length`` covers key, tag and counterexample, and the CRC is taken
over the same bytes. The whole file is read into memory on open; a bad
checksum or a truncated record raises :class:`CacheCorruptError`.
"""

from __future__ import annotations

import hashlib
import struct
import threading
import zlib
from pathlib import Path

from .ir import Block, print_block
from .semantics import InputAssignment, OracleConfig, Status, Verdict

_TAGS = {
    (Status.EQUIVALENT, False): 0,
    (Status.EQUIVALENT, True): 1,
    (Status.NOT_EQUIVALENT, False): 2,
    (Status.NOT_EQUIVALENT, True): 3,
    (Status.UNKNOWN, False): 4,
    (Status.UNKNOWN, True): 5,
}
_FROM_TAG = {v: k for k, v in _TAGS.items()}


class CacheCorruptError(IOError):
    pass


def cache_key(lhs: Block, rhs: Block, cfg: OracleConfig) -> bytes:
    h = hashlib.blake2b(digest_size=8)
    h.update(print_block(lhs).encode())
    h.update(b"\0")
    h.update(print_block(rhs).encode())
    h.update(b"\0")
    h.update(cfg.digest())
    return h.digest()


def _encode(key: bytes, v: Verdict) -> bytes:
    body = key + bytes([_TAGS[v.status, v.sampled]])
    if v.counterexample is not None:
        body += v.counterexample.to_json().encode()
    return struct.pack("<I", len(body)) + body + struct.pack("<I", zlib.crc32(body))


class CacheStore:
    """Verdict cache backed by one file; safe for concurrent readers and writers in a process."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._data: dict[bytes, Verdict] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        raw = self.path.read_bytes()
        pos = 0
        while pos < len(raw):
            if pos + 4 > len(raw):
                raise CacheCorruptError(f"{self.path}: truncated record header at byte {pos}")
            (n,) = struct.unpack_from("<I", raw, pos)
            end = pos + 4 + n + 4
            if n < 9 or end > len(raw):
                raise CacheCorruptError(f"{self.path}: truncated record at byte {pos}")
            body = raw[pos + 4:pos + 4 + n]
            (crc,) = struct.unpack_from("<I", raw, pos + 4 + n)
            if zlib.crc32(body) != crc:
                raise CacheCorruptError(f"{self.path}: checksum mismatch at byte {pos}")
            tag = body[8]
            if tag not in _FROM_TAG:
                raise CacheCorruptError(f"{self.path}: unknown verdict tag {tag} at byte {pos}")
            status, sampled = _FROM_TAG[tag]
            cex = InputAssignment.from_json(body[9:].decode()) if n > 9 else None
            self._data[body[:8]] = Verdict(status, cex, sampled)
            pos = end

    def get(self, key: bytes) -> Verdict | None:
        return self._data.get(key)

    def put(self, key: bytes, verdict: Verdict) -> None:
        if len(key) != 8:
            raise ValueError("cache keys are 8 bytes")
        record = _encode(key, verdict)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "ab") as fh:
                fh.write(record)
            self._data[key] = verdict

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key: bytes) -> bool:
        return key in self._data

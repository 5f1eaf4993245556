"""On-disk cache of matrices over F_ell.

One file per (N, ell, operator).  Layout, all integers little-endian:

    b"EISK1"                      magic
    u64 ell, u64 N
    u16 length + utf-8 bytes      operator id
    u64 rows, u64 cols
    u8 width                      bytes per entry: 1, 2, 4 or 8
    rows * cols entries           row-major, unsigned
    32 bytes                      SHA-256 of everything above

The width is the smallest that holds ell - 1.  Writes go to a temporary
file in the same directory followed by ``os.replace``, so readers never
see a partial file and concurrent writers of one key leave identical bytes.
"""

from __future__ import annotations

import hashlib
import os
import re
import shutil
import struct
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

MAGIC = b"EISK1"
_DTYPES = {1: "<u1", 2: "<u2", 4: "<u4", 8: "<u8"}
_OP_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")


class CacheFormatError(ValueError):
    pass


def default_cache_dir() -> Path:
    env = os.environ.get("EISK_CACHE_DIR")
    return Path(env) if env else Path.home() / ".eiskernel"


def entry_width(ell: int) -> int:
    for w in (1, 2, 4, 8):
        if ell - 1 < 1 << (8 * w):
            return w
    raise OverflowError("modulus too large")


def encode(ell: int, N: int, op: str, entries: np.ndarray) -> bytes:
    entries = np.asarray(entries)
    if entries.ndim != 2:
        raise ValueError("need a 2-d array")
    if entries.size and (entries.min() < 0 or entries.max() >= ell):
        raise ValueError("entries must be reduced mod ell")
    name = op.encode("utf-8")
    w = entry_width(ell)
    rows, cols = entries.shape
    body = b"".join(
        [
            MAGIC,
            struct.pack("<QQ", ell, N),
            struct.pack("<H", len(name)),
            name,
            struct.pack("<QQ", rows, cols),
            struct.pack("<B", w),
            np.ascontiguousarray(entries, dtype=_DTYPES[w]).tobytes(),
        ]
    )
    return body + hashlib.sha256(body).digest()


def decode(data: bytes) -> Tuple[int, int, str, np.ndarray]:
    if len(data) < len(MAGIC) + 32 or not data.startswith(MAGIC):
        raise CacheFormatError("bad magic")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CacheFormatError("checksum mismatch")
    pos = len(MAGIC)
    try:
        ell, N = struct.unpack_from("<QQ", body, pos)
        pos += 16
        (n,) = struct.unpack_from("<H", body, pos)
        pos += 2
        op = body[pos : pos + n].decode("utf-8")
        pos += n
        rows, cols = struct.unpack_from("<QQ", body, pos)
        pos += 16
        (w,) = struct.unpack_from("<B", body, pos)
        pos += 1
    except (struct.error, UnicodeDecodeError) as exc:
        raise CacheFormatError(f"truncated header: {exc}") from exc
    if w not in _DTYPES or len(body) - pos != rows * cols * w:
        raise CacheFormatError("payload size does not match header")
    arr = np.frombuffer(body, dtype=_DTYPES[w], offset=pos).reshape(rows, cols).astype(np.int64)
    return ell, N, op, arr


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class MatrixCache:
    """Matrices keyed by (N, ell, operator id) under ``root/matrices``."""

    def __init__(self, root: Optional[os.PathLike] = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    @property
    def matrix_dir(self) -> Path:
        return self.root / "matrices"

    def path(self, N: int, ell: int, op: str) -> Path:
        if not _OP_RE.match(op):
            raise ValueError(f"bad operator id {op!r}")
        return self.matrix_dir / f"{N}_{ell}_{op}.eisk"

    def get(self, N: int, ell: int, op: str) -> Optional[np.ndarray]:
        path = self.path(N, ell, op)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            return None
        try:
            ell2, N2, op2, arr = decode(data)
        except CacheFormatError:
            return None  # a damaged entry is just a miss; the next put overwrites it
        if (ell2, N2, op2) != (ell, N, op):
            return None
        return arr

    def put(self, N: int, ell: int, op: str, entries: np.ndarray) -> Path:
        path = self.path(N, ell, op)
        atomic_write(path, encode(ell, N, op, entries))
        return path

    def entries(self) -> List[Path]:
        if not self.matrix_dir.is_dir():
            return []
        return sorted(self.matrix_dir.glob("*.eisk"))

    def stats(self) -> Dict[str, int]:
        files = self.entries()
        return {"entries": len(files), "bytes": sum(f.stat().st_size for f in files)}

    def clear(self) -> int:
        n = len(self.entries())
        if self.root.is_dir():
            for sub in ("matrices", "curves"):
                shutil.rmtree(self.root / sub, ignore_errors=True)
        return n

    def verify(self) -> Tuple[int, List[Tuple[str, str]]]:
        """Re-hash every entry; returns (entry count, [(file name, problem)])."""
        bad = []
        files = self.entries()
        for f in files:
            try:
                ell, N, op, _ = decode(f.read_bytes())
            except CacheFormatError as exc:
                bad.append((f.name, str(exc)))
                continue
            if f.name != f"{N}_{ell}_{op}.eisk":
                bad.append((f.name, "header does not match file name"))
        return len(files), bad

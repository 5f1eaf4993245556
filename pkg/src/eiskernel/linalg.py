"""Dense exact linear algebra over a prime field F_p.

Elimination always takes the first nonzero entry in column order as the
pivot, so echelon forms and kernel bases are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numba
import numpy as np


@numba.njit(cache=True)
def _inv_mod(x, p):
    r = 1
    e = p - 2
    b = x % p
    while e:
        if e & 1:
            r = r * b % p
        b = b * b % p
        e >>= 1
    return r


@numba.njit(cache=True)
def _echelon(a, p):
    """Forward elimination in place; returns pivot columns.  Pivots become 1."""
    rows, cols = a.shape
    piv = np.empty(min(rows, cols), np.int64)
    r = 0
    for c in range(cols):
        if r == rows:
            break
        k = -1
        for i in range(r, rows):
            if a[i, c] != 0:
                k = i
                break
        if k < 0:
            continue
        if k != r:
            for j in range(c, cols):
                t = a[r, j]
                a[r, j] = a[k, j]
                a[k, j] = t
        inv = _inv_mod(a[r, c], p)
        for j in range(c, cols):
            a[r, j] = a[r, j] * inv % p
        for i in range(r + 1, rows):
            f = a[i, c]
            if f != 0:
                f = p - f
                for j in range(c, cols):
                    a[i, j] = (a[i, j] + f * a[r, j]) % p
        piv[r] = c
        r += 1
    return piv[:r]


@numba.njit(cache=True)
def _back_solve(u, piv, free, p):
    """Kernel vectors of an echelon matrix ``u``: one per free column."""
    r = piv.shape[0]
    cols = u.shape[1]
    nf = free.shape[0]
    out = np.zeros((nf, cols), np.int64)
    for k in range(nf):
        out[k, free[k]] = 1
    for i in range(r - 1, -1, -1):
        c = piv[i]
        for k in range(nf):
            s = 0
            for j in range(c + 1, cols):
                x = u[i, j]
                if x != 0:
                    s = (s + x * out[k, j]) % p
            out[k, c] = (p - s) % p
    return out


@numba.njit(cache=True)
def _panel(a, r0, c0, c1, p, lbuf):
    """Eliminate rows r0.. of the float matrix ``a`` inside columns [c0, c1) only.

    Entries may arrive unreduced (exact integers in float64); rows are only
    reduced mod p when they become pivots, and the panel is reduced at the end.
    Row swaps touch whole rows (and ``lbuf``).  Returns the pivot columns;
    ``lbuf[i - r0, t]`` holds the multiple of pivot row t removed from row i,
    and ``lbuf[t, t]`` the pivot before it was scaled to 1.
    """
    rows, cols = a.shape
    piv = np.empty(c1 - c0, np.int64)
    k = 0
    for c in range(c0, c1):
        r = r0 + k
        if r == rows:
            break
        h = -1
        for i in range(r, rows):
            v = a[i, c] % p
            a[i, c] = v
            if v != 0:
                h = i
                break
        if h < 0:
            continue
        if h != r:
            for j in range(cols):
                t = a[r, j]
                a[r, j] = a[h, j]
                a[h, j] = t
            for j in range(k):
                t = lbuf[r - r0, j]
                lbuf[r - r0, j] = lbuf[h - r0, j]
                lbuf[h - r0, j] = t
        lbuf[r - r0, k] = a[r, c]
        inv = float(_inv_mod(np.int64(a[r, c]), p))
        for j in range(c0, c):
            a[r, j] = a[r, j] % p
        for j in range(c, c1):
            a[r, j] = ((a[r, j] % p) * inv) % p
        for i in range(r + 1, rows):
            f = a[i, c] % p
            lbuf[i - r0, k] = f
            if f != 0:
                g = p - f
                # no reduction here: entries grow by < p^2 per pivot
                for j in range(c, c1):
                    a[i, j] += g * a[r, j]
        piv[k] = c
        k += 1
    for i in range(r0 + k, rows):
        for j in range(c0, c1):
            a[i, j] = a[i, j] % p
    return piv[:k]


@numba.njit(cache=True)
def _lower_inverse(m, p):
    """Inverse of a lower triangular matrix with nonzero diagonal."""
    k = m.shape[0]
    out = np.zeros((k, k), np.int64)
    for i in range(k):
        inv = _inv_mod(m[i, i], p)
        out[i, i] = inv
        for j in range(i):
            s = 0
            for t in range(j, i):
                s = (s + m[i, t] * out[t, j]) % p
            out[i, j] = (p - s) * inv % p
    return out


@numba.njit(cache=True)
def _upper_unit_inverse(m, p):
    k = m.shape[0]
    out = np.zeros((k, k), np.int64)
    for i in range(k - 1, -1, -1):
        out[i, i] = 1
        for j in range(i + 1, k):
            s = 0
            for t in range(i + 1, j + 1):
                s = (s + m[i, t] * out[t, j]) % p
            out[i, j] = (p - s) % p
    return out


BLOCK = 96
_BLOCKED_MIN = 192
_CHUNK = 1024  # rows per trailing update, bounds the temporary


def _blocked_ok(shape, p: int) -> bool:
    # float64 products of a panel stay exact
    return min(shape) >= _BLOCKED_MIN and (BLOCK + 1) * (p - 1) ** 2 < 2**52


def _sub_product(dst: np.ndarray, left: np.ndarray, right: np.ndarray, p: int, reduce: bool = True) -> None:
    """dst <- dst - left @ right (mod p) for float arrays of nonnegative integers."""
    # adding (p - left) @ right keeps everything nonnegative, so fmod suffices
    neg = np.fmod(p - left, p)
    for i in range(0, dst.shape[0], _CHUNK):
        d = dst[i : i + _CHUNK]
        d += neg[i : i + _CHUNK] @ right
        if reduce:
            np.fmod(d, p, out=d)


def _echelon_blocked(a: np.ndarray, p: int) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """Same result as ``_echelon`` on a float64 matrix of residues, in place.

    The trailing updates run as float64 matrix products and are reduced mod p
    only when the entry bound ``big`` says exactness is at risk.  Returns the
    pivot columns and the row range of each panel's pivots.
    """
    rows, cols = a.shape
    lbuf = np.zeros((rows, BLOCK), np.float64)
    pivs: List[np.ndarray] = []
    panels: List[Tuple[int, int]] = []
    step = BLOCK * (p - 1) ** 2
    big = p - 1
    r0 = 0
    for c0 in range(0, cols, BLOCK):
        if r0 == rows:
            break
        c1 = min(c0 + BLOCK, cols)
        lb = lbuf[: rows - r0]
        lb[:] = 0
        piv = _panel(a, r0, c0, c1, p, lb)
        k = len(piv)
        if k == 0:
            continue
        if c1 < cols:
            m11 = np.tril(lb[:k, :k]).astype(np.int64)
            u12 = _lower_inverse(m11, p).astype(np.float64) @ a[r0 : r0 + k, c1:]
            np.fmod(u12, p, out=u12)
            a[r0 : r0 + k, c1:] = u12
            if r0 + k < rows:
                # the next panel adds up to ``step`` and products multiply by BLOCK * p
                grow = (big + 2 * step) * (BLOCK + 1) * p < 2**52
                _sub_product(a[r0 + k :, c1:], lb[k:, :k], u12, p, reduce=not grow)
                big = big + step if grow else p - 1
        pivs.append(piv)
        panels.append((r0, r0 + k))
        r0 += k
    piv_all = np.concatenate(pivs) if pivs else np.zeros(0, np.int64)
    return piv_all, panels


def _reduce_blocked(u: np.ndarray, piv: np.ndarray, panels: List[Tuple[int, int]], p: int) -> None:
    """Clear the entries above the pivots of a float echelon matrix, in place."""
    for rs, re in reversed(panels):
        pc = piv[rs:re]
        blk = u[rs:re]
        tinv = _upper_unit_inverse(blk[:, pc].astype(np.int64), p).astype(np.float64)
        blk[:] = np.fmod(tinv @ blk, p)
        if rs:
            _sub_product(u[:rs], u[:rs, pc], blk, p)


def _as_residues(a, p: int) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.int64) % p)


def echelon(a: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row echelon form (unit pivots, not reduced above) and pivot columns."""
    u = _as_residues(a, p)
    if _blocked_ok(u.shape, p):
        f = u.astype(np.float64)
        piv, _ = _echelon_blocked(f, p)
        return f[: len(piv)].astype(np.int64), piv
    u = u.copy()
    piv = _echelon(u, p)
    return u[: len(piv)], piv


def rref(a: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Reduced row echelon form (nonzero rows only) and pivot columns."""
    u = _as_residues(a, p)
    if not _blocked_ok(u.shape, p):
        u = u.copy()
        piv = _echelon(u, p)
        u = u[: len(piv)]
        kern = _back_solve(np.ascontiguousarray(u), piv, np.setdiff1d(np.arange(u.shape[1]), piv), p)
        # rows of the reduced form follow from the kernel: R[:, f] = -kern[f-row, piv]
        r = np.zeros_like(u)
        r[np.arange(len(piv)), piv] = 1
        free = np.setdiff1d(np.arange(u.shape[1]), piv)
        if free.size:
            r[:, free] = (-kern[:, piv].T) % p
        return r, piv
    f = u.astype(np.float64)
    piv, panels = _echelon_blocked(f, p)
    f = f[: len(piv)]
    _reduce_blocked(f, piv, panels, p)
    return f.astype(np.int64), piv


def rank_of(a: np.ndarray, p: int) -> int:
    if a.size == 0:
        return 0
    return len(echelon(a, p)[1])


def kernel_rows(a: np.ndarray, p: int) -> np.ndarray:
    """Basis of the right kernel of ``a`` as the rows of a (k, cols) array."""
    a = np.asarray(a)
    cols = a.shape[1]
    if a.shape[0] == 0 or cols == 0:
        return np.eye(cols, dtype=np.int64)
    if not _blocked_ok(a.shape, p):
        u, piv = echelon(a, p)
        free = np.setdiff1d(np.arange(cols, dtype=np.int64), piv)
        if free.size == 0:
            return np.zeros((0, cols), dtype=np.int64)
        return _back_solve(np.ascontiguousarray(u), piv, free, p)
    # x_free = e_f forces x_piv = -R[:, f]
    r, piv = rref(a, p)
    free = np.setdiff1d(np.arange(cols, dtype=np.int64), piv)
    out = np.zeros((free.size, cols), dtype=np.int64)
    out[np.arange(free.size), free] = 1
    out[:, piv] = (-r[:, free].T) % p
    return out


def left_kernel_rows(a: np.ndarray, p: int) -> np.ndarray:
    """Rows ``c`` with ``c @ a == 0``."""
    return kernel_rows(np.asarray(a).T, p)


def matmul_mod(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """Exact product mod p, through float64 BLAS when the sums stay below 2^53."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    inner = a.shape[1] if a.ndim == 2 else a.shape[0]
    if inner * (p - 1) ** 2 < 2**52:
        out = np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64)
        return np.mod(np.rint(out), p).astype(np.int64)
    # chunk the inner dimension so int64 accumulation cannot overflow
    step = max(1, (2**62) // ((p - 1) ** 2 + 1))
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for k in range(0, inner, step):
        out = (out + a[:, k : k + step] @ b[k : k + step]) % p
    return out


@dataclass
class FpMatrix:
    """Matrix over F_p; entries kept reduced to [0, p)."""

    p: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries = _as_residues(self.entries, self.p)
        if self.entries.ndim != 2:
            raise ValueError("FpMatrix needs a 2-d array")

    @classmethod
    def identity(cls, n: int, p: int) -> "FpMatrix":
        return cls(p, np.eye(n, dtype=np.int64))

    @classmethod
    def zero(cls, rows: int, cols: int, p: int) -> "FpMatrix":
        return cls(p, np.zeros((rows, cols), dtype=np.int64))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def __matmul__(self, other: "FpMatrix") -> "FpMatrix":
        self._check_same_field(other)
        return FpMatrix(self.p, matmul_mod(self.entries, other.entries, self.p))

    def __add__(self, other: "FpMatrix") -> "FpMatrix":
        self._check_same_field(other)
        return FpMatrix(self.p, self.entries + other.entries)

    def __sub__(self, other: "FpMatrix") -> "FpMatrix":
        self._check_same_field(other)
        return FpMatrix(self.p, self.entries - other.entries)

    def scale(self, c: int) -> "FpMatrix":
        return FpMatrix(self.p, self.entries * (c % self.p))

    def minus_scalar(self, c: int) -> "FpMatrix":
        """``self - c * I`` for a square matrix."""
        if self.rows != self.cols:
            raise ValueError("matrix is not square")
        out = self.entries.copy()
        np.fill_diagonal(out, out.diagonal() - c)
        return FpMatrix(self.p, out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FpMatrix):
            return NotImplemented
        return self.p == other.p and self.shape == other.shape and np.array_equal(self.entries, other.entries)

    def transpose(self) -> "FpMatrix":
        return FpMatrix(self.p, self.entries.T.copy())

    def trace(self) -> int:
        return int(np.trace(self.entries) % self.p)

    def is_scalar(self, c: int) -> bool:
        return self == FpMatrix.identity(self.rows, self.p).scale(c)

    def _check_same_field(self, other: "FpMatrix") -> None:
        if self.p != other.p:
            raise ValueError("mixed moduli")


def rank(m: FpMatrix) -> int:
    return rank_of(m.entries, m.p)


def kernel_basis(m: FpMatrix) -> FpMatrix:
    """Matrix whose columns form a basis of the right kernel of ``m``."""
    return FpMatrix(m.p, kernel_rows(m.entries, m.p).T.copy())


def kernel_dim(m: FpMatrix) -> int:
    return m.cols - rank(m)


def stacked_kernel(mats: Sequence[FpMatrix]) -> Tuple[int, FpMatrix]:
    """Common kernel of ``mats``, refined one matrix at a time."""
    if not mats:
        raise ValueError("need at least one matrix")
    p, cols = mats[0].p, mats[0].cols
    for m in mats:
        if m.p != p:
            raise ValueError("mixed moduli")
        if m.cols != cols:
            raise ValueError("mixed column counts")
    basis = np.eye(cols, dtype=np.int64)  # rows span the running kernel
    for m in mats:
        if basis.shape[0] == 0:
            break
        image = matmul_mod(m.entries, basis.T, p)  # columns = images of basis rows
        coeffs = kernel_rows(image, p)
        basis = matmul_mod(coeffs, basis, p)
    return basis.shape[0], FpMatrix(p, basis.T.copy())


def span_equal(a: np.ndarray, b: np.ndarray, p: int) -> bool:
    """True when the row spaces of ``a`` and ``b`` coincide."""
    ra, rb = rank_of(a, p), rank_of(b, p)
    if ra != rb:
        return False
    if a.shape[0] == 0:
        return True
    return rank_of(np.vstack([a, b]), p) == ra


__all__: List[str] = [
    "FpMatrix",
    "rank",
    "kernel_basis",
    "kernel_dim",
    "stacked_kernel",
    "echelon",
    "rank_of",
    "kernel_rows",
    "left_kernel_rows",
    "matmul_mod",
    "span_equal",
]

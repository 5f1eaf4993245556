"""Hecke operators on modular symbols over F_ell.

Operators act on row vectors: row ``j`` of a Hecke matrix is the image of
free generator ``j``.  ``T_p`` for p prime to N uses Cremona's Heilbronn
matrices acting on Manin symbols (Merel's set is kept as an independent
check).  ``U_p`` for p | N sends each generator to its path, applies
[[1, j], [0, p]] and converts back with continued fractions.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np
import scipy.sparse as sp

from .arith import factor, is_prime
from .linalg import FpMatrix, matmul_mod
from .modsym import ModSymSpace, lift_to_sl2


@lru_cache(maxsize=64)
def merel_set(n: int) -> np.ndarray:
    """Integer matrices [[a, b], [c, d]] with ad - bc = n, a > b >= 0, d > c >= 0.

    Returned as an (k, 4) array of rows (a, b, c, d).
    """
    out = []
    for a in range(1, n + 1):
        q, r = divmod(n, a)
        if r == 0:
            d = q
            out.extend((a, b, 0, d) for b in range(a))
            out.extend((a, 0, c, d) for c in range(1, d))
        for d in range(q + 1, n + 1):
            bc = a * d - n
            for c in range(bc // a + 1, d):
                if bc % c == 0:
                    out.append((a, bc // c, c, d))
    arr = np.array(out, dtype=np.int64).reshape(-1, 4)
    arr.setflags(write=False)
    return arr


@numba.njit(cache=True)
def _nearest(a, b):
    # nearest integer to a / b, halves rounded away from zero
    t = a / b
    q = int(np.floor(abs(t) + 0.5))
    return -q if t < 0 else q


@numba.njit(cache=True)
def _cremona_chains(p):
    """Quotients of the nearest-integer expansions of r/p, |r| <= p/2.

    Returns (rs, offsets, qs): the quotients for rs[i] are
    qs[offsets[i]:offsets[i + 1]].
    """
    half = p // 2
    bits = 1
    while (1 << bits) < p:
        bits += 1
    rs = np.arange(-half, half + 1).astype(np.int64)
    offs = np.empty(rs.shape[0] + 1, np.int64)
    qs = np.empty(p * (2 * bits + 3), np.int64)
    m = 0
    for i in range(rs.shape[0]):
        offs[i] = m
        a, b = -p, rs[i]
        while b != 0:
            q = _nearest(a, b)
            a, b = -b, a - b * q
            qs[m] = q
            m += 1
    offs[rs.shape[0]] = m
    return rs, offs, qs[:m].copy()


@numba.njit(cache=True)
def _chains_to_matrices(p, rs, offs, qs):
    out = np.empty((1 + rs.shape[0] + qs.shape[0], 4), np.int64)
    out[0, 0], out[0, 1], out[0, 2], out[0, 3] = 1, 0, 0, p
    m = 1
    for i in range(rs.shape[0]):
        x1, x2, y1, y2 = p, -rs[i], 0, 1
        out[m, 0], out[m, 1], out[m, 2], out[m, 3] = x1, x2, y1, y2
        m += 1
        for k in range(offs[i], offs[i + 1]):
            q = qs[k]
            x1, x2 = x2, q * x2 - x1
            y1, y2 = y2, q * y2 - y1
            out[m, 0], out[m, 1], out[m, 2], out[m, 3] = x1, x2, y1, y2
            m += 1
    return out


@lru_cache(maxsize=1024)
def cremona_chains(p: int):
    if not is_prime(p) or p == 2:
        raise ValueError("chains are defined for odd primes")
    out = _cremona_chains(p)
    for a in out:
        a.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def heilbronn_cremona(p: int) -> np.ndarray:
    """Cremona's Heilbronn matrices for a prime p, from continued fractions of r/p.

    Rows (a, b, c, d).  Roughly 0.84 p log p of them; they give T_p on
    Manin symbols for p prime to the level, as ``merel_set(p)`` does.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        arr = np.array([[1, 0, 0, 2], [2, 0, 0, 1], [2, 1, 0, 1], [1, 0, 1, 2]], dtype=np.int64)
    else:
        arr = _chains_to_matrices(p, *cremona_chains(p))
    arr.setflags(write=False)
    return arr


# --- symbol lookup kernels ---------------------------------------------------
#
# A Manin symbol (u : v) with 0 <= u, v < N sits at P1 slot
# base[v] + (u * unit[v] mod N); cls_t / sgn_t give its relation class and
# sign, with class ``nclasses`` standing for symbols that vanish.


@numba.njit(cache=True, inline="always")
def _mod(x, n, inv):
    # x mod n through a float reciprocal; |x| stays far below 2^52
    r = x - np.int64(x * inv) * n
    while r < 0:
        r += n
    while r >= n:
        r -= n
    return r


@numba.njit(cache=True)
def _apply_mats(rep_c, rep_d, mats, N, unit, base, cls_t, sgn_t, vecs, nclasses):
    """acc[k, t] = sum_j vecs[t, j] * sum_h sign * [class k of (c_j : d_j) h]."""
    inv = 1.0 / N
    ng = rep_c.shape[0]
    nv = vecs.shape[0]
    vt = vecs.T.copy()
    acc = np.zeros((nclasses + 1, nv), np.int64)
    for h in range(mats.shape[0]):
        a, b, c, d = mats[h, 0], mats[h, 1], mats[h, 2], mats[h, 3]
        for j in range(ng):
            u = _mod(rep_c[j] * a + rep_d[j] * c, N, inv)
            v = _mod(rep_c[j] * b + rep_d[j] * d, N, inv)
            i = base[v] + _mod(u * unit[v], N, inv)
            k = cls_t[i]
            s = sgn_t[i]
            for t in range(nv):
                acc[k, t] += s * vt[j, t]
    return acc[:nclasses]


@numba.njit(cache=True)
def _apply_chains(rep_c, rep_d, p, rs, offs, qs, N, unit, base, cls_t, sgn_t, vecs, nclasses):
    """Same as ``_apply_mats`` for Cremona's matrices, walking each chain.

    Along a chain the image (u : v) of one matrix becomes (v : q v - u)
    for the next, so each image costs one multiplication.  The loop over
    generators is innermost, which keeps many independent chains in flight.
    """
    inv = 1.0 / N
    ng = rep_c.shape[0]
    nv = vecs.shape[0]
    vt = vecs.T.copy()
    acc = np.zeros((nclasses + 1, nv), np.int64)
    u0 = np.empty(ng, np.int64)
    U = np.empty(ng, np.int64)
    V = np.empty(ng, np.int64)
    for j in range(ng):
        u0[j] = _mod(rep_c[j] * p, N, inv)
        # the matrix [[1, 0], [0, p]]
        v = _mod(rep_d[j] * p, N, inv)
        i = base[v] + _mod(rep_c[j] * unit[v], N, inv)
        k = cls_t[i]
        s = sgn_t[i]
        for t in range(nv):
            acc[k, t] += s * vt[j, t]
    for ri in range(rs.shape[0]):
        r = rs[ri]
        for j in range(ng):
            U[j] = u0[j]
            V[j] = _mod(rep_d[j] - rep_c[j] * r, N, inv)
        step = offs[ri]
        while True:
            for j in range(ng):
                v = V[j]
                i = base[v] + _mod(U[j] * unit[v], N, inv)
                k = cls_t[i]
                s = sgn_t[i]
                for t in range(nv):
                    acc[k, t] += s * vt[j, t]
            if step == offs[ri + 1]:
                break
            q = qs[step]
            for j in range(ng):
                w = _mod(q * V[j] - U[j], N, inv)
                U[j] = V[j]
                V[j] = w
            step += 1
    return acc[:nclasses]


@numba.njit(cache=True)
def _heilbronn_coo(rep_c, rep_d, mats, N, unit, base, cls_t, sgn_t, nclasses):
    """(generator, class, sign) triples of every nonvanishing Heilbronn image."""
    total = rep_c.shape[0] * mats.shape[0]
    rows = np.empty(total, np.int64)
    cols = np.empty(total, np.int64)
    vals = np.empty(total, np.int64)
    inv = 1.0 / N
    m = 0
    for j in range(rep_c.shape[0]):
        c0 = rep_c[j]
        d0 = rep_d[j]
        for h in range(mats.shape[0]):
            u = _mod(c0 * mats[h, 0] + d0 * mats[h, 2], N, inv)
            v = _mod(c0 * mats[h, 1] + d0 * mats[h, 3], N, inv)
            i = base[v] + _mod(u * unit[v], N, inv)
            k = cls_t[i]
            if k == nclasses:
                continue
            rows[m] = j
            cols[m] = k
            vals[m] = sgn_t[i]
            m += 1
    return rows[:m], cols[:m], vals[:m]


def _space_arrays(space: ModSymSpace):
    """Generator coordinates and the flat symbol lookup tables."""
    cached = getattr(space, "_lookup", None)
    if cached is not None:
        return cached
    p1 = space.p1
    N = p1.N
    nclasses = space.proj.shape[0]
    reps = p1.reps[space.gen_reps]
    idx = p1.table.ravel()
    ok = idx >= 0
    cls_t = np.full(idx.shape[0], nclasses, dtype=np.int32)
    sgn_t = np.zeros(idx.shape[0], dtype=np.int32)
    k = space.cls[idx[ok]]
    live = k >= 0
    slots = np.nonzero(ok)[0][live]
    cls_t[slots] = k[live]
    sgn_t[slots] = np.where(space.sgn[idx[ok]][live] == 1, 1, -1)
    out = (
        np.ascontiguousarray(reps[:, 0]),
        np.ascontiguousarray(reps[:, 1]),
        N,
        np.ascontiguousarray(p1.unit),
        np.ascontiguousarray(p1.gslot * N),
        cls_t,
        sgn_t,
    )
    space._lookup = out
    return out


def _classes_to_generators(space: ModSymSpace, acc) -> np.ndarray:
    """Rows over symbol classes -> rows over free generators (mod ell)."""
    ell = space.ell
    if sp.issparse(acc):
        out = (acc @ space.proj).toarray()
    else:
        acc = np.asarray(acc, dtype=np.int64) % ell
        out = (space.proj.T @ acc.T).T
    return np.asarray(out, dtype=np.int64) % ell


def _as_vecs(space: ModSymSpace, vecs) -> np.ndarray:
    vecs = np.asarray(vecs, dtype=np.int64)
    if vecs.ndim != 2 or vecs.shape[1] != space.gen_count:
        raise ValueError("vectors must be rows over the free generators")
    return np.ascontiguousarray(vecs % space.ell)


def heilbronn_images(space: ModSymSpace, mats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Images of the row vectors ``vecs`` under the sum over ``mats`` of the right action."""
    vecs = _as_vecs(space, vecs)
    if vecs.shape[0] * 4 >= space.gen_count:
        return matmul_mod(vecs, heilbronn_matrix(space, mats), space.ell)
    rep_c, rep_d, N, unit, base, cls_t, sgn_t = _space_arrays(space)
    mats = np.ascontiguousarray(mats, dtype=np.int64)
    acc = _apply_mats(rep_c, rep_d, mats, N, unit, base, cls_t, sgn_t, vecs, space.proj.shape[0])
    return _classes_to_generators(space, acc.T)


def heilbronn_sparse(space: ModSymSpace, mats: np.ndarray) -> sp.csr_matrix:
    """Sum over ``mats`` of the right action, as a sparse (gen x gen) matrix mod ell."""
    rep_c, rep_d, *lookup = _space_arrays(space)
    nclasses = space.proj.shape[0]
    mats = np.ascontiguousarray(mats, dtype=np.int64)
    rows, cols, vals = _heilbronn_coo(rep_c, rep_d, mats, *lookup, nclasses)
    acc = sp.csr_matrix((vals, (rows, cols)), shape=(space.gen_count, nclasses))
    out = (acc @ space.proj).tocsr()
    out.data %= space.ell
    out.eliminate_zeros()
    return out


def heilbronn_matrix(space: ModSymSpace, mats: np.ndarray) -> np.ndarray:
    return heilbronn_sparse(space, mats).toarray().astype(np.int64)


def tp_images(space: ModSymSpace, p: int, vecs: np.ndarray) -> np.ndarray:
    """Images of rows ``vecs`` under T_p for an odd prime p prime to N (chain walk)."""
    if space.N % p == 0:
        raise ValueError(f"{p} divides the level")
    vecs = _as_vecs(space, vecs)
    rep_c, rep_d, N, unit, base, cls_t, sgn_t = _space_arrays(space)
    rs, offs, qs = cremona_chains(p)
    acc = _apply_chains(rep_c, rep_d, p, rs, offs, qs, N, unit, base, cls_t, sgn_t, vecs, space.proj.shape[0])
    return _classes_to_generators(space, acc.T)


@numba.njit(cache=True)
def _chain_columns(rep_c, rep_d, p, rs, offs, qs, N, unit, base, cls_t, sgn_t, nclasses):
    """acc[k, j] = signed count of class k in T_p of the j-th given symbol."""
    inv = 1.0 / N
    ng = rep_c.shape[0]
    acc = np.zeros((nclasses + 1, ng), np.int64)
    for j in range(ng):
        c0 = rep_c[j]
        d0 = rep_d[j]
        v = _mod(d0 * p, N, inv)
        i = base[v] + _mod(c0 * unit[v], N, inv)
        acc[cls_t[i], j] += sgn_t[i]
        u0 = _mod(c0 * p, N, inv)
        for ri in range(rs.shape[0]):
            U = u0
            V = _mod(d0 - c0 * rs[ri], N, inv)
            step = offs[ri]
            while True:
                i = base[V] + _mod(U * unit[V], N, inv)
                acc[cls_t[i], j] += sgn_t[i]
                if step == offs[ri + 1]:
                    break
                W = _mod(qs[step] * V - U, N, inv)
                U = V
                V = W
                step += 1
    return acc[:nclasses]


def generator_images(space: ModSymSpace, p: int, idx) -> np.ndarray:
    """Rows T_p(g_i) over the free generators for the generators ``idx`` (U_p if p | N)."""
    idx = np.asarray(idx, dtype=np.int64)
    if space.N % p == 0:
        return np.asarray(up_sparse(space, p)[idx].toarray(), dtype=np.int64)
    rep_c, rep_d, N, unit, base, cls_t, sgn_t = _space_arrays(space)
    nclasses = space.proj.shape[0]
    if p == 2:
        vecs = np.zeros((len(idx), space.gen_count), np.int64)
        vecs[np.arange(len(idx)), idx] = 1
        return heilbronn_images(space, heilbronn_cremona(2), vecs)
    rs, offs, qs = cremona_chains(p)
    acc = _chain_columns(
        np.ascontiguousarray(rep_c[idx]), np.ascontiguousarray(rep_d[idx]), p, rs, offs, qs, N, unit, base, cls_t, sgn_t, nclasses
    )
    return _classes_to_generators(space, acc.T)


# --- U_p by continued fractions ----------------------------------------------


@numba.njit(cache=True)
def _cf_push(num, den, sign, N, inv, unit, base, cls_t, sgn_t, nclasses, scratch, mark, row, touched, nt):
    """Add sign * {0, num/den} to ``scratch`` (indexed by class); returns the new touched count."""
    if den < 0:
        num = -num
        den = -den
    # {0, oo} = (0 : 1), then one symbol ((-1)^(k-1) q_k : q_(k-1)) per convergent
    c, d = 0, 1
    p2, q2, p1, q1 = 0, 1, 1, 0
    a, b = num, den
    k = 0
    while True:
        dd = _mod(d, N, inv)
        i = base[dd] + _mod(_mod(c, N, inv) * unit[dd], N, inv)
        cl = cls_t[i]
        if cl != nclasses:
            if mark[cl] != row:
                mark[cl] = row
                touched[nt] = cl
                nt += 1
            scratch[cl] += sign * sgn_t[i]
        if b == 0:
            break
        quo = a // b
        pk = quo * p1 + p2
        qk = quo * q1 + q2
        c = qk if k % 2 == 1 else -qk
        d = q1
        a, b = b, a - quo * b
        p2, q2, p1, q1 = p1, q1, pk, qk
        k += 1
    return nt


@numba.njit(cache=True)
def _up_coo(lifts, p, N, unit, base, cls_t, sgn_t, nclasses, ell):
    inv = 1.0 / N
    scratch = np.zeros(nclasses, np.int64)
    mark = np.full(nclasses, -1, np.int64)
    touched = np.empty(nclasses, np.int64)
    cap = max(16, lifts.shape[0] * 8)
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    vals = np.empty(cap, np.int64)
    m = 0
    for j in range(lifts.shape[0]):
        a, b, c, d = lifts[j, 0], lifts[j, 1], lifts[j, 2], lifts[j, 3]
        nt = 0
        for s in range(p):
            # [[1, s], [0, p]] sends {b/d, a/c} to {(b + s d)/(p d), (a + s c)/(p c)}
            nt = _cf_push(a + s * c, p * c, 1, N, inv, unit, base, cls_t, sgn_t, nclasses, scratch, mark, j, touched, nt)
            nt = _cf_push(b + s * d, p * d, -1, N, inv, unit, base, cls_t, sgn_t, nclasses, scratch, mark, j, touched, nt)
        for i in range(nt):
            cl = touched[i]
            v = scratch[cl] % ell
            scratch[cl] = 0
            if v == 0:
                continue
            if m == cap:
                cap *= 2
                rows2 = np.empty(cap, np.int64)
                cols2 = np.empty(cap, np.int64)
                vals2 = np.empty(cap, np.int64)
                rows2[:m] = rows[:m]
                cols2[:m] = cols[:m]
                vals2[:m] = vals[:m]
                rows, cols, vals = rows2, cols2, vals2
            rows[m] = j
            cols[m] = cl
            vals[m] = v
            m += 1
    return rows[:m], cols[:m], vals[:m]


def up_sparse(space: ModSymSpace, p: int) -> sp.csr_matrix:
    """U_p for a prime p | N as a sparse (gen x gen) matrix, by continued fractions."""
    N = space.N
    if N % p:
        raise ValueError(f"{p} does not divide the level")
    reps = space.p1.reps[space.gen_reps]
    lifts = np.array([lift_to_sl2(int(c), int(d), N) for c, d in reps], dtype=np.int64).reshape(-1, 4)
    _, _, _, unit, base, cls_t, sgn_t = _space_arrays(space)
    nclasses = space.proj.shape[0]
    rows, cols, vals = _up_coo(lifts, p, N, unit, base, cls_t, sgn_t, nclasses, space.ell)
    acc = sp.csr_matrix((vals, (rows, cols)), shape=(space.gen_count, nclasses))
    out = (acc @ space.proj).tocsr()
    out.data %= space.ell
    out.eliminate_zeros()
    return out


def up_matrix(space: ModSymSpace, p: int) -> np.ndarray:
    """U_p for a prime p | N, dense."""
    return up_sparse(space, p).toarray().astype(np.int64)


# --- public operators --------------------------------------------------------


def _prime_matrix(space: ModSymSpace, p: int) -> np.ndarray:
    if space.N % p == 0:
        return up_matrix(space, p)
    return heilbronn_matrix(space, heilbronn_cremona(p))


def hecke_matrix(space: ModSymSpace, n: int) -> FpMatrix:
    """Matrix of T_n on the full space (row convention).

    T_mn = T_m T_n for coprime m, n; T_{p^k} = T_p T_{p^(k-1)} - p T_{p^(k-2)}
    for p prime to N and U_p^k for p | N.
    """
    if n < 1:
        raise ValueError("n must be positive")
    ell = space.ell
    result = np.eye(space.gen_count, dtype=np.int64)
    for p, e in factor(n):
        tp = _prime_matrix(space, p)
        if space.N % p == 0:
            power = np.eye(space.gen_count, dtype=np.int64)
            for _ in range(e):
                power = matmul_mod(power, tp, ell)
        else:
            prev, power = np.eye(space.gen_count, dtype=np.int64), tp
            for _ in range(e - 1):
                prev, power = power, (matmul_mod(power, tp, ell) - p * prev) % ell
        result = matmul_mod(result, power, ell)
    return FpMatrix(ell, result)


def apply_prime(space: ModSymSpace, p: int, vecs: np.ndarray) -> np.ndarray:
    """Rows ``vecs`` mapped by T_p (U_p if p | N)."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    vecs = _as_vecs(space, vecs)
    if space.N % p == 0:
        return np.asarray((up_sparse(space, p).T @ vecs.T).T % space.ell, dtype=np.int64)
    if p == 2 or vecs.shape[0] * 4 >= space.gen_count:
        return heilbronn_images(space, heilbronn_cremona(p), vecs)
    return tp_images(space, p, vecs)


def restrict_to_cuspidal(space: ModSymSpace, m: FpMatrix) -> FpMatrix:
    """Matrix of ``m`` on the cuspidal subspace, in the basis ``space.cuspidal_rows``."""
    ell = space.ell
    if m.shape != (space.gen_count, space.gen_count):
        raise ValueError("operator must act on the full space")
    basis = space.cuspidal_rows
    image = matmul_mod(basis, m.entries, ell)
    coords = image[:, space.cuspidal_pivots]
    if not np.array_equal(matmul_mod(coords, basis, ell), image):
        raise ValueError("operator does not preserve cuspidal subspace")
    return FpMatrix(ell, coords)

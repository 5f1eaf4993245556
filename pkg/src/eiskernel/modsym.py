"""Weight-2 modular symbols for Gamma_0(N) with coefficients in F_ell.

The space is the free F_ell-module on P^1(Z/N) modulo the Manin relations
``x + x sigma = 0`` and ``x + x tau + x tau^2 = 0``.  For ell >= 5 prime to
N it is H_1(X_0(N), cusps; F_ell), and the kernel of the boundary map is
H_1(X_0(N); F_ell) = J_0(N)[ell] as a Hecke module, which is where every
kernel computation in this package takes place.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

from .arith import divisors, euler_phi, factor, is_prime
from .linalg import FpMatrix, kernel_rows


@dataclass(frozen=True)
class P1Point:
    c: int
    d: int


class P1List:
    """The points of P^1(Z/N), indexed, with vectorized lookup.

    A pair (c, d) is first scaled by a unit so that d becomes g = gcd(d, N);
    the remaining freedom is multiplication by units = 1 mod N/g, and the
    smallest c in that orbit is the canonical representative (c : g).
    """

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("level must be positive")
        self.N = N
        divs = divisors(N)
        self.divisors = divs
        div_pos = {g: i for i, g in enumerate(divs)}
        # scaling unit and divisor slot for every second coordinate d
        self.unit = np.empty(N, dtype=np.int64)
        self.gslot = np.empty(N, dtype=np.int64)
        for d in range(N):
            g = math.gcd(d, N)
            M = N // g
            u = pow(d // g, -1, M) if M > 1 else 0
            while math.gcd(u, N) != 1:
                u += M
            self.unit[d] = u % N if N > 1 else 0
            self.gslot[d] = div_pos[g]
        self.table = np.full((len(divs), N), -1, dtype=np.int64)
        reps: List[Tuple[int, int]] = []
        for slot, g in enumerate(divs):
            M = N // g
            units = np.array(
                [lam for lam in range(1, N + 1, M) if math.gcd(lam, N) == 1] if N > 1 else [0],
                dtype=np.int64,
            )
            row = self.table[slot]
            for c in range(N):
                if row[c] != -1 or math.gcd(c, g) != 1:
                    continue
                row[(c * units) % N] = len(reps)
                reps.append((c, g % N))
        self.reps = np.array(reps, dtype=np.int64).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.reps)

    def __getitem__(self, i: int) -> P1Point:
        c, d = self.reps[i]
        return P1Point(int(c), int(d))

    def index(self, c, d):
        """Index of (c : d); -1 where gcd(c, d, N) > 1.  Accepts arrays."""
        N = self.N
        c = np.asarray(c, dtype=np.int64) % N
        d = np.asarray(d, dtype=np.int64) % N
        return self.table[self.gslot[d], (c * self.unit[d]) % N]

    def index1(self, c: int, d: int) -> int:
        N = self.N
        c %= N
        d %= N
        return int(self.table[self.gslot[d], (c * int(self.unit[d])) % N])

    def normalize(self, c: int, d: int) -> P1Point:
        i = self.index1(c, d)
        if i < 0:
            raise ValueError(f"({c}:{d}) is not a point of P^1(Z/{self.N})")
        return self[i]


def build_p1(N: int) -> P1List:
    return P1List(N)


def index_mu(N: int) -> int:
    """Index of Gamma_0(N) in SL_2(Z): N prod_{p|N} (1 + 1/p)."""
    mu = N
    for p, _ in factor(N):
        mu = mu // p * (p + 1)
    return mu


def cusp_count(N: int) -> int:
    return sum(euler_phi(math.gcd(d, N // d)) for d in divisors(N))


def _elliptic_counts(N: int) -> Tuple[int, int]:
    fac = factor(N)
    if N % 4 == 0:
        nu2 = 0
    else:
        nu2 = 1
        for p, _ in fac:
            nu2 *= 1 if p == 2 else (2 if p % 4 == 1 else 0)
    if N % 9 == 0:
        nu3 = 0
    else:
        nu3 = 1
        for p, _ in fac:
            nu3 *= 1 if p == 3 else (2 if p % 3 == 1 else 0)
    return nu2, nu3


def genus(N: int) -> int:
    mu = index_mu(N)
    nu2, nu3 = _elliptic_counts(N)
    g12 = 12 + mu - 3 * nu2 - 4 * nu3 - 6 * cusp_count(N)
    assert g12 % 12 == 0
    return g12 // 12


# --- cusps -------------------------------------------------------------------


@dataclass(frozen=True)
class Cusp:
    """The cusp a/b in lowest terms; infinity is 1/0."""

    a: int
    b: int

    def __post_init__(self):
        a, b = self.a, self.b
        g = math.gcd(a, b)
        if g == 0:
            raise ValueError("0/0 is not a cusp")
        a, b = a // g, b // g
        if b < 0 or (b == 0 and a < 0):
            a, b = -a, -b
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def cusp_key(x: Cusp, N: int) -> Tuple[int, int]:
    """Complete Gamma_0(N)-invariant of a cusp: (level d, unit mod gcd(d, N/d))."""
    a, c = x.a, x.b
    d = math.gcd(c, N)
    t = math.gcd(d, N // d)
    if t == 1:
        return (d, 0)
    s = pow(a, -1, c)
    return (d, s * pow(c // d, -1, t) % t)


def cusp_equivalent(x: Cusp, y: Cusp, N: int) -> bool:
    """Cremona's test: s1 c2 = s2 c1 mod gcd(c1 c2, N), with a_i s_i = 1 mod c_i."""
    a1, c1 = x.a, x.b
    a2, c2 = y.a, y.b
    s1 = pow(a1, -1, c1) if c1 > 1 else (1 if c1 == 0 else 0)
    s2 = pow(a2, -1, c2) if c2 > 1 else (1 if c2 == 0 else 0)
    m = math.gcd(c1 * c2, N)
    return (s1 * c2 - s2 * c1) % m == 0


def lift_to_sl2(c: int, d: int, N: int) -> Tuple[int, int, int, int]:
    """A matrix [[a, b], [c', d']] in SL_2(Z) with (c', d') = (c, d) mod N."""
    c %= N
    d %= N
    if N == 1:
        return (1, 0, 0, 1)
    if c == 0:
        c = N
    while math.gcd(c, d) != 1:
        d += N
    g, x, y = _ext_gcd(d, c)
    # x d + y c = 1, so a = x, b = -y gives a d - b c = 1
    return (x, -y, c, d)


def _ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def zero_to_cusp_symbols(num: int, den: int) -> List[Tuple[int, int]]:
    """Manin symbols (c, d) summing to the path {0, num/den}, by continued fractions.

    With convergents p_k/q_k the path splits into {p_{k-1}/q_{k-1}, p_k/q_k},
    which is g{0, oo} for g with bottom row ((-1)^(k-1) q_k, q_{k-1}).
    """
    if den < 0:
        num, den = -num, -den
    out = [(0, 1)]
    if den == 0:
        return out
    p2, q2, p1, q1 = 0, 1, 1, 0
    a, b = num, den
    k = 0
    while b:
        quo = a // b
        pk, qk = quo * p1 + p2, quo * q1 + q2
        out.append((qk if k % 2 == 1 else -qk, q1))
        a, b = b, a - quo * b
        p2, q2, p1, q1 = p1, q1, pk, qk
        k += 1
    return out


# --- the space ---------------------------------------------------------------


def _structured_elimination(relations: List[Dict[int, int]], nclasses: int, ell: int):
    """Eliminate variables from sparse relations, fewest-occurrence pivots first.

    Returns (free classes in increasing order, list of (pivot, expression)) in
    elimination order; each expression only involves free classes or pivots
    eliminated later.
    """
    col_rows: List[set] = [set() for _ in range(nclasses)]
    for i, row in enumerate(relations):
        for c in row:
            col_rows[c].add(i)
    heap = [(len(row), i) for i, row in enumerate(relations)]
    heapq.heapify(heap)
    done = [False] * len(relations)
    eliminated: List[Tuple[int, Dict[int, int]]] = []
    pivoted = [False] * nclasses
    while heap:
        length, i = heapq.heappop(heap)
        row = relations[i]
        if done[i] or length != len(row):
            continue
        done[i] = True
        if not row:
            continue
        piv = min(row, key=lambda c: (len(col_rows[c]), c))
        inv = pow(row[piv], -1, ell)
        expr = {c: (-v * inv) % ell for c, v in row.items() if c != piv}
        for c in row:
            col_rows[c].discard(i)
        for j in sorted(col_rows[piv]):
            rj = relations[j]
            f = rj.pop(piv)
            for c, v in expr.items():
                nv = (rj.get(c, 0) + f * v) % ell
                if nv:
                    if c not in rj:
                        col_rows[c].add(j)
                    rj[c] = nv
                elif c in rj:
                    del rj[c]
                    col_rows[c].discard(j)
            heapq.heappush(heap, (len(rj), j))
        col_rows[piv].clear()
        pivoted[piv] = True
        eliminated.append((piv, expr))
    free = [c for c in range(nclasses) if not pivoted[c]]
    return free, eliminated


@dataclass
class ModSymSpace:
    N: int
    ell: int
    p1: P1List
    cls: np.ndarray  # class of each P1 point, -1 when the symbol is 0
    sgn: np.ndarray  # +1 / -1 sign of each P1 point relative to its class
    gen_reps: np.ndarray  # P1 index representing each free generator
    proj: sp.csr_matrix  # classes x gen_count, entries in [0, ell)
    boundary: FpMatrix  # gen_count x cusp classes
    cuspidal_rows: np.ndarray  # (2g, gen_count), rows span the cuspidal subspace (RREF)
    cuspidal_pivots: np.ndarray
    cusp_keys: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def gen_count(self) -> int:
        return len(self.gen_reps)

    @property
    def cuspidal_dim(self) -> int:
        return self.cuspidal_rows.shape[0]

    @property
    def cuspidal_basis(self) -> FpMatrix:
        """Columns span ker(boundary)."""
        return FpMatrix(self.ell, self.cuspidal_rows.T.copy())

    def project(self, idx) -> np.ndarray:
        """Coordinates (rows) of the Manin symbols with the given P1 indices."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        out = np.zeros((len(idx), self.gen_count), dtype=np.int64)
        ok = idx >= 0
        k = self.cls[idx[ok]]
        live = k >= 0
        rows = np.nonzero(ok)[0][live]
        dense = self.proj[k[live]].toarray()
        out[rows] = dense * self.sgn[idx[ok]][live][:, None]
        return out % self.ell

    def symbol_vector(self, c: int, d: int) -> np.ndarray:
        return self.project([self.p1.index1(c, d)])[0]


def _validate(N: int, ell: int) -> None:
    if not is_prime(ell) or ell < 5:
        raise ValueError("residue characteristic must be a prime >= 5")
    if N < 1:
        raise ValueError("level must be positive")
    if N % ell == 0:
        raise ValueError("level divisible by ell")


def build_space(N: int, ell: int) -> ModSymSpace:
    _validate(N, ell)
    return _build_space(N, ell)


@lru_cache(maxsize=8)
def _build_space(N: int, ell: int) -> ModSymSpace:
    p1 = P1List(N)
    n = len(p1)
    c, d = p1.reps[:, 0], p1.reps[:, 1]
    sigma = p1.index(d, -c)
    tau = p1.index(d, -c - d)

    # two-term relations: x = -x sigma, and 2x = 0 kills fixed points
    cls = np.full(n, -2, dtype=np.int64)
    sgn = np.ones(n, dtype=np.int64)
    nclasses = 0
    class_rep: List[int] = []
    for i in range(n):
        if cls[i] != -2:
            continue
        j = int(sigma[i])
        if j == i:
            cls[i] = -1
            continue
        cls[i] = cls[j] = nclasses
        sgn[j] = -1
        class_rep.append(i)
        nclasses += 1

    # three-term relations, one per tau-orbit
    relations: List[Dict[int, int]] = []
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        orbit = [i, int(tau[i]), int(tau[tau[i]])]
        seen[orbit] = True
        row: Dict[int, int] = {}
        for x in orbit if orbit[1] != i else [i]:
            k = int(cls[x])
            if k >= 0:
                row[k] = (row.get(k, 0) + int(sgn[x])) % ell
        row = {k: v for k, v in row.items() if v}
        if row:
            relations.append(row)

    free, eliminated = _structured_elimination(relations, nclasses, ell)
    gen_of = {k: j for j, k in enumerate(free)}
    resolved: Dict[int, Dict[int, int]] = {k: {j: 1} for k, j in gen_of.items()}
    for piv, expr in reversed(eliminated):
        acc: Dict[int, int] = {}
        for k, coef in expr.items():
            for j, v in resolved[k].items():
                acc[j] = (acc.get(j, 0) + coef * v) % ell
        resolved[piv] = {j: v for j, v in acc.items() if v}
    indptr = [0]
    indices: List[int] = []
    data: List[int] = []
    for k in range(nclasses):
        vec = resolved[k]
        for j in sorted(vec):
            indices.append(j)
            data.append(vec[j])
        indptr.append(len(indices))
    gen_count = len(free)
    proj = sp.csr_matrix(
        (np.array(data, dtype=np.int64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(nclasses, gen_count),
    )
    sgn = sgn % ell
    gen_reps = np.array([class_rep[k] for k in free], dtype=np.int64)

    # boundary: g{0, oo} = {b/d, a/c}  |->  [a/c] - [b/d]
    keys: Dict[Tuple[int, int], int] = {}
    bnd_entries: List[Tuple[int, int, int]] = []
    for j, i in enumerate(gen_reps):
        a, b, cc, dd = lift_to_sl2(int(p1.reps[i, 0]), int(p1.reps[i, 1]), N)
        for cusp, sign in ((Cusp(a, cc), 1), (Cusp(b, dd), -1)):
            key = cusp_key(cusp, N)
            col = keys.setdefault(key, len(keys))
            bnd_entries.append((j, col, sign))
    bmat = np.zeros((gen_count, max(len(keys), 1)), dtype=np.int64)
    for j, col, sign in bnd_entries:
        bmat[j, col] += sign
    boundary = FpMatrix(ell, bmat)
    cusp_rows = kernel_rows(boundary.entries.T, ell)
    # RREF rows make restriction to the subspace a column selection
    cusp_rows, cusp_piv = _rref_rows(cusp_rows, ell)
    return ModSymSpace(
        N=N,
        ell=ell,
        p1=p1,
        cls=np.where(cls >= 0, cls, -1),
        sgn=sgn,
        gen_reps=gen_reps,
        proj=proj,
        boundary=boundary,
        cuspidal_rows=cusp_rows,
        cuspidal_pivots=cusp_piv,
        cusp_keys=sorted(keys, key=keys.get),
    )


def _rref_rows(rows: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Reduced row echelon form of a full-row-rank array."""
    from .linalg import echelon

    if rows.shape[0] == 0:
        return rows.astype(np.int64), np.zeros(0, dtype=np.int64)
    u, piv = echelon(rows, p)
    u = u.copy()
    for i in range(len(piv) - 1, -1, -1):
        col = u[:i, piv[i]].copy()
        nz = np.nonzero(col)[0]
        if nz.size:
            u[nz] = (u[nz] - np.outer(col[nz], u[i])) % p
    return u, np.asarray(piv, dtype=np.int64)


def boundary_map(space: ModSymSpace) -> FpMatrix:
    return space.boundary

"""Cut the symbol space down to a small Hecke-stable piece around an Eisenstein ideal.

For an operator A in the Hecke algebra, the full space splits as
ker A^k (+) im A^k once the ranks of the powers stop dropping, and both
pieces are Hecke-stable.  Taking A in the ideal, the first piece contains
everything the ideal kills.  The projection onto it commutes with every
Hecke operator, so T_p on the small piece is known from the images of a
handful of single generators: T_p(pi(x)) = pi(T_p(x)).  That replaces
(#generators) Heilbronn sweeps per prime by (dim of the piece) sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .hecke import generator_images, heilbronn_cremona, heilbronn_sparse, up_sparse
from .linalg import kernel_rows, matmul_mod, rank_of, rref
from .modsym import ModSymSpace


def solve_right(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """X with a @ X = b for an invertible square ``a``."""
    n = a.shape[0]
    r, piv = rref(np.hstack([a % p, b % p]), p)
    if len(piv) < n or piv[n - 1] != n - 1:
        raise ValueError("matrix is singular")
    return r[:, n:]


def fitting(a: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rows spanning ker A^k and im A^k (row vectors, v -> v A) for stable k."""
    power = np.asarray(a, dtype=np.int64) % p
    rk = rank_of(power, p)
    while rk:
        square = matmul_mod(power, power, p)
        rk2 = rank_of(square, p)
        if rk2 == rk:
            break
        power, rk = square, rk2
    kern = kernel_rows(power.T, p)
    image = rref(power, p)[0] if rk else np.zeros((0, a.shape[0]), np.int64)
    return kern, image


@dataclass
class LocalPiece:
    """A Hecke-stable summand V with its equivariant projection.

    ``basis`` (d x gen) spans V; ``proj`` (gen x d) sends a generator row to
    the coordinates of its projection; ``sel`` are generators whose
    projections form a basis of V, with ``qinv`` the inverse of proj[sel].
    """

    space: ModSymSpace
    basis: np.ndarray
    proj: np.ndarray
    sel: np.ndarray
    qinv: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def operator(self, p: int) -> np.ndarray:
        """T_p (U_p for p | N) on V in the coordinates of ``basis``."""
        ell = self.space.ell
        if self.dim == 0:
            return np.zeros((0, 0), np.int64)
        images = generator_images(self.space, p, self.sel)
        return matmul_mod(self.qinv, matmul_mod(images, self.proj, ell), ell)

    def cuspidal_rows(self) -> np.ndarray:
        """Coordinate rows spanning V intersected with the cuspidal subspace."""
        ell = self.space.ell
        bnd = matmul_mod(self.basis, self.space.boundary.entries, ell)
        return kernel_rows(bnd.T, ell)


def _operator_matrix(space: ModSymSpace, p: int) -> sp.csr_matrix:
    if space.N % p == 0:
        return up_sparse(space, p)
    return heilbronn_sparse(space, heilbronn_cremona(p))


def _restrict(basis: np.ndarray, proj: np.ndarray, op: sp.csr_matrix, a: int, ell: int) -> np.ndarray:
    """(op - a) on span(basis) in basis coordinates."""
    moved = np.asarray((op.T @ basis.T).T, dtype=np.int64) % ell
    out = matmul_mod(moved, proj, ell)
    out[np.diag_indices_from(out)] -= a
    return out % ell


def _split(basis, proj, mat, ell):
    """Pass to the generalized kernel of ``mat`` inside span(basis)."""
    kern, image = fitting(mat, ell)
    d, k = mat.shape[0], kern.shape[0]
    if k == d:
        return basis, proj
    if k == 0:
        return basis[:0], proj[:, :0]
    change = np.vstack([kern, image])
    # coordinates (alpha, beta) of y = alpha kern + beta image are y change^-1; keep alpha
    target = np.zeros((d, k), np.int64)
    target[:k, :k] = np.eye(k, dtype=np.int64)
    left = solve_right(change, target, ell)
    return matmul_mod(kern, basis, ell), matmul_mod(proj, left, ell)


def localize(space: ModSymSpace, ops: Sequence[Tuple[int, int]], *, seed: int = 0) -> LocalPiece:
    """Hecke-stable piece containing everything killed by T_p - a for (p, a) in ``ops``.

    ``ops`` should be cheap operators: primes dividing N and small primes.
    """
    ell = space.ell
    gen = space.gen_count
    mats = [(_operator_matrix(space, p), a % ell) for p, a in ops]
    # one random combination first, so the dense work on the full space happens once
    rng = np.random.default_rng(seed)
    comb = sp.csr_matrix((gen, gen), dtype=np.int64)
    shift = 0
    for m, a in mats:
        c = int(rng.integers(1, ell))
        comb = comb + c * m.astype(np.int64)
        shift += c * a
    dense = comb.toarray() % ell
    dense[np.diag_indices_from(dense)] -= shift
    basis = np.eye(gen, dtype=np.int64)
    proj = np.eye(gen, dtype=np.int64)
    basis, proj = _split(basis, proj, dense % ell, ell)
    del dense
    # then each operator on its own, which drops pieces the combination hit by accident
    changed = True
    while changed and basis.shape[0]:
        changed = False
        for m, a in mats:
            d = basis.shape[0]
            basis, proj = _split(basis, proj, _restrict(basis, proj, m, a, ell), ell)
            changed |= basis.shape[0] < d
            if basis.shape[0] == 0:
                break
    if basis.shape[0] == 0:
        return LocalPiece(space, basis, proj, np.zeros(0, np.int64), np.zeros((0, 0), np.int64))
    sel = rref(proj.T, ell)[1]
    if len(sel) != basis.shape[0]:
        raise ArithmeticError("projection is not onto the local piece")
    qinv = solve_right(proj[sel], np.eye(len(sel), dtype=np.int64), ell)
    return LocalPiece(space, basis, proj, np.asarray(sel, dtype=np.int64), qinv)

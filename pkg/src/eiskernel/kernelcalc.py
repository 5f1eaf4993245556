"""dim J_0(N)[m] as a common kernel of Hecke operators on cuspidal homology mod ell.

The kernel is refined one generator of m at a time: ``T_p - eps(p)`` for
the primes dividing N, then ``T_p - p - 1`` for every other prime up to
the Sturm bound (ell included).  Each step only needs the images of the
current kernel rows, so large Hecke matrices are never formed for p prime
to N.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .arith import is_prime, primes_up_to
from .cache import MatrixCache
from .eislocus import (
    EisensteinLocus,
    Prediction,
    enumerate_loci,
    is_maximal,
    predicted_dimension,
    upper_bound,
)
from .hecke import apply_prime, up_sparse
from .linalg import kernel_rows, matmul_mod
from .localize import localize
from .modsym import ModSymSpace, build_space, index_mu

SCHEMA = 1
LOCAL_MIN_GEN = 2000
LOCAL_CHEAP = 4  # small good primes used to carve out the local piece


def sturm_bound(N: int) -> int:
    if N < 1:
        raise ValueError("level must be positive")
    return -(-index_mu(N) // 6)


@dataclass
class KernelReport:
    N: int
    ell: int
    locus: List[List[int]]  # [[p, eps(p)], ...] in increasing p
    computed_dim: int
    predicted: Prediction
    upper_bound: int
    maximal_by_formula: bool
    maximal_by_computation: bool
    sturm_bound: int
    generators_used: List[str] = field(default_factory=list)
    elapsed_ms: int = 0

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "N": self.N,
            "ell": self.ell,
            "locus": [list(x) for x in self.locus],
            "computed_dim": self.computed_dim,
            "predicted": self.predicted.to_json(),
            "upper_bound": self.upper_bound,
            "maximal_by_formula": self.maximal_by_formula,
            "maximal_by_computation": self.maximal_by_computation,
            "sturm_bound": self.sturm_bound,
            "generators_used": list(self.generators_used),
            "elapsed_ms": self.elapsed_ms,
        }

    @classmethod
    def from_json(cls, d: dict) -> "KernelReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            N=d["N"],
            ell=d["ell"],
            locus=[list(x) for x in d["locus"]],
            computed_dim=d["computed_dim"],
            predicted=Prediction.from_json(d["predicted"]),
            upper_bound=d["upper_bound"],
            maximal_by_formula=d["maximal_by_formula"],
            maximal_by_computation=d["maximal_by_computation"],
            sturm_bound=d["sturm_bound"],
            generators_used=list(d["generators_used"]),
            elapsed_ms=d["elapsed_ms"],
        )

    @property
    def locus_text(self) -> str:
        return ",".join(f"{p}:{e:+d}" if e else f"{p}:0" for p, e in self.locus)

    def coherent(self) -> bool:
        """Maximality flags agree and the bound holds."""
        if self.maximal_by_formula != self.maximal_by_computation:
            return False
        return not self.maximal_by_formula or self.computed_dim <= self.upper_bound

    def status(self) -> str:
        """One of match, theorem_mismatch, conjecture_mismatch, incoherent, not_covered."""
        if not self.coherent():
            return "incoherent"
        kind = self.predicted.kind
        if kind == "not_covered":
            return "not_covered"
        if self.computed_dim == self.predicted.value:
            return "match"
        return "theorem_mismatch" if kind == "known" else "conjecture_mismatch"


def _prediction(locus: EisensteinLocus) -> Tuple[Prediction, int, bool]:
    if is_maximal(locus):
        return predicted_dimension(locus), upper_bound(locus), True
    # the ideal is all of T, so J[m] = 0
    return Prediction("known", 0), 0, False


def _generators(space: ModSymSpace, locus: EisensteinLocus, prime_bound: int) -> List[Tuple[int, int]]:
    ops = [(p, locus.eigenvalue(p)) for p, _ in locus.eps]
    ops += [(p, locus.eigenvalue(p)) for p in primes_up_to(prime_bound) if space.N % p]
    return ops


def _bad_prime_operator(space: ModSymSpace, p: int, cache: Optional[MatrixCache]) -> sp.csr_matrix:
    op = f"U{p}"
    if cache is not None:
        hit = cache.get(space.N, space.ell, op)
        if hit is not None and hit.shape == (space.gen_count, space.gen_count):
            return sp.csr_matrix(hit)
    mat = up_sparse(space, p)
    if cache is not None:
        cache.put(space.N, space.ell, op, mat.toarray())
    return mat


def _cuspidal_rows(space: ModSymSpace, cache: Optional[MatrixCache]) -> np.ndarray:
    rows = space.cuspidal_rows
    if cache is not None and cache.get(space.N, space.ell, "cuspidal") is None:
        cache.put(space.N, space.ell, "cuspidal", rows)
    return rows


def _direct(space, gens, cache) -> Tuple[int, List[str]]:
    ell = space.ell
    rows = _cuspidal_rows(space, cache)
    piv = space.cuspidal_pivots
    used: List[str] = []
    for p, a in gens:
        if rows.shape[0] == 0:
            break
        if space.N % p == 0:
            image = np.asarray((_bad_prime_operator(space, p, cache).T @ rows.T).T, dtype=np.int64)
        else:
            image = apply_prime(space, p, rows)
        image = (image - a * rows) % ell
        # the image is cuspidal, so its pivot coordinates determine it
        coeffs = kernel_rows(np.ascontiguousarray(image[:, piv].T), ell)
        rows = matmul_mod(coeffs, rows, ell)
        used.append(f"T{p}-{a}")
    return int(rows.shape[0]), used


def _local(space, gens) -> Tuple[int, List[str]]:
    ell = space.ell
    bad = [g for g in gens if space.N % g[0] == 0]
    good = [g for g in gens if space.N % g[0]][:LOCAL_CHEAP]
    piece = localize(space, bad + good, seed=space.N)
    rows = piece.cuspidal_rows()
    used: List[str] = []
    for p, a in gens:
        if rows.shape[0] == 0:
            break
        image = (matmul_mod(rows, piece.operator(p), ell) - a * rows) % ell
        rows = matmul_mod(kernel_rows(image.T, ell), rows, ell)
        used.append(f"T{p}-{a}")
    return int(rows.shape[0]), used


def kernel_dimension(
    N: int,
    ell: int,
    locus: EisensteinLocus,
    *,
    prime_bound: Optional[int] = None,
    cache: Optional[MatrixCache] = None,
    method: str = "auto",
) -> KernelReport:
    """Compute dim J_0(N)[m] for the ideal attached to ``locus``.

    ``prime_bound`` overrides the Sturm bound as the cutoff for the
    primes p prime to N (useful for stability checks).  ``method`` is
    "direct" (cuspidal rows refined by each generator), "local" (work
    inside a small Hecke-stable piece, see ``localize``) or "auto", which
    goes local once the symbol space has more than LOCAL_MIN_GEN generators.
    """
    if locus.N != N or locus.ell != ell:
        raise ValueError("locus does not belong to this level and prime")
    if method not in ("auto", "direct", "local"):
        raise ValueError(f"unknown method {method!r}")
    start = time.perf_counter()
    space = build_space(N, ell)
    bound = sturm_bound(N)
    cutoff = bound if prime_bound is None else prime_bound
    gens = _generators(space, locus, cutoff)
    if method == "auto":
        method = "local" if space.gen_count > LOCAL_MIN_GEN else "direct"
    if method == "local":
        dim, used = _local(space, gens)
    else:
        dim, used = _direct(space, gens, cache)
    pred, ub, maximal = _prediction(locus)
    return KernelReport(
        N=N,
        ell=ell,
        locus=[[p, e] for p, e in locus.eps],
        computed_dim=dim,
        predicted=pred,
        upper_bound=ub,
        maximal_by_formula=maximal,
        maximal_by_computation=dim > 0,
        sturm_bound=bound,
        generators_used=used,
        elapsed_ms=int(round(1000 * (time.perf_counter() - start))),
    )


def verify_level(N: int, ell: int, *, cache: Optional[MatrixCache] = None) -> List[KernelReport]:
    return [kernel_dimension(N, ell, locus, cache=cache) for locus in enumerate_loci(N, ell)]


def default_jobs() -> int:
    return os.cpu_count() or 1


def _map(fn, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def qr_locus(q: int, r: int, ell: int) -> EisensteinLocus:
    """The ideal n = (ell, T_q + 1, T_r - 1, I_0(qr))."""
    return EisensteinLocus.from_map(q * r, ell, {q: -1, r: 1})


def qr2_locus(q: int, r: int, ell: int) -> EisensteinLocus:
    """The ideal m = (ell, T_q + 1, T_r, I_0(qr^2))."""
    return EisensteinLocus.from_map(q * r * r, ell, {q: -1, r: 0})


def _check_q(q: int, ell: int) -> None:
    if not is_prime(q) or q % ell != ell - 1:
        raise ValueError("hypothesis violated: q must be a prime = -1 mod ell")


def _qr_task(args) -> Tuple[int, KernelReport]:
    q, r, ell, cache_root = args
    cache = MatrixCache(cache_root) if cache_root is not None else None
    return r, kernel_dimension(q * r, ell, qr_locus(q, r, ell), cache=cache)


def _qr2_task(args) -> Tuple[int, KernelReport]:
    q, r, ell, cache_root = args
    cache = MatrixCache(cache_root) if cache_root is not None else None
    return r, kernel_dimension(q * r * r, ell, qr2_locus(q, r, ell), cache=cache)


def scan_qr_reports(
    q: int, ell: int, r_max: int, *, jobs: int = 1, cache: Optional[MatrixCache] = None
) -> List[Tuple[int, KernelReport]]:
    _check_q(q, ell)
    rs = [r for r in primes_up_to(r_max) if r % ell == 1 and r != q]
    root = str(cache.root) if cache is not None else None
    return _map(_qr_task, [(q, r, ell, root) for r in rs], jobs)


def scan_qr_conjecture(
    q: int, ell: int, r_max: int, *, jobs: int = 1, cache: Optional[MatrixCache] = None
) -> List[Tuple[int, int]]:
    """dim J_0(qr)[n] for every prime r <= r_max with r = 1 mod ell."""
    return [(r, rep.computed_dim) for r, rep in scan_qr_reports(q, ell, r_max, jobs=jobs, cache=cache)]


def scan_qr2_reports(
    q: int, ell: int, r_list: Iterable[int], *, jobs: int = 1, cache: Optional[MatrixCache] = None
) -> List[Tuple[int, KernelReport]]:
    _check_q(q, ell)
    rs = list(r_list)
    for r in rs:
        if not is_prime(r) or r % ell != 1:
            raise ValueError(f"hypothesis violated: r = {r} must be a prime = 1 mod ell")
    root = str(cache.root) if cache is not None else None
    return _map(_qr2_task, [(q, r, ell, root) for r in rs], jobs)


def scan_qr2(
    q: int, ell: int, r_list: Iterable[int], *, jobs: int = 1, cache: Optional[MatrixCache] = None
) -> List[Tuple[int, int]]:
    """dim J_0(qr^2)[m] for each r; the expected value is always 3."""
    return [(r, rep.computed_dim) for r, rep in scan_qr2_reports(q, ell, r_list, jobs=jobs, cache=cache)]


def qr2_expectation(q: int, r: int, ell: int, *, cache: Optional[MatrixCache] = None) -> Prediction:
    """Value expected for dim J_0(qr^2)[m].

    It is proved (Known) when dim J_0(qr)[n] = 3, and only conjectural
    otherwise.  The level-qr kernel is computed here to decide which.
    """
    rep = kernel_dimension(q * r, ell, qr_locus(q, r, ell), cache=cache)
    return Prediction("known" if rep.computed_dim == 3 else "conjectural", 3)


# --- serialization -----------------------------------------------------------

CSV_FIELDS = ["N", "ell", "locus", "computed", "predicted", "bound"]


def reports_to_json(reports: Sequence[KernelReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=False)


def reports_from_json(text: str) -> List[KernelReport]:
    return [KernelReport.from_json(d) for d in json.loads(text)]


def reports_to_csv(reports: Sequence[KernelReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow([r.N, r.ell, r.locus_text, r.computed_dim, str(r.predicted), r.upper_bound])
    return buf.getvalue()


def memory_capped_jobs(levels: Sequence[int], jobs: int) -> int:
    """Cap the worker count so the dense matrices of concurrent levels fit in RAM."""
    avail = _available_memory()
    if avail is None or not levels:
        return max(1, jobs)
    from .modsym import genus

    per_level = max(8 * (2 * genus(N)) ** 2 * 4 for N in levels)
    return max(1, min(jobs, int(avail // max(per_level, 1))))


def _available_memory() -> Optional[int]:
    try:
        pages = os.sysconf("SC_AVPHYS_PAGES")
        size = os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return None
    return pages * size if pages > 0 and size > 0 else None


__all__ = [
    "KernelReport",
    "sturm_bound",
    "kernel_dimension",
    "verify_level",
    "scan_qr_conjecture",
    "scan_qr2",
    "qr2_expectation",
    "reports_to_json",
    "reports_from_json",
    "reports_to_csv",
]

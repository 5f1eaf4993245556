"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Runtime limits are part of each criterion.  The N = 31939 probe runs only
with ``pytest --slow``.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from eiskernel import cli
from eiskernel.ecsplit import count_points, EllipticCurve, splitting_primes
from eiskernel.eislocus import (
    EisensteinLocus,
    index_numerator_valuation,
    s_m_set,
    shimura_kernel_dim,
)
from eiskernel.hecke import heilbronn_matrix, hecke_matrix, merel_set, restrict_to_cuspidal
from eiskernel.kernelcalc import default_jobs, kernel_dimension, scan_qr_reports, verify_level
from eiskernel.linalg import FpMatrix
from eiskernel.modsym import build_space, genus
from oracles import count_points_legendre, eta_product_coefficients

L = EisensteinLocus.from_map


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


@lru_cache(maxsize=None)
def qr_scan(q):
    pairs, secs = timed(scan_qr_reports, q, 5, 260, jobs=default_jobs())
    return {r: rep.computed_dim for r, rep in pairs}, secs


@lru_cache(maxsize=None)
def split_lists():
    out, secs = timed(
        lambda: (splitting_primes("38b1", 5, 1000, offline=True), splitting_primes("58b1", 5, 1000, offline=True))
    )
    return out, secs


def test_criterion_1_question_44(criterion):
    rep, secs = timed(kernel_dimension, 44, 5, L(44, 5, {2: 0, 11: 1}))
    ok = criterion(1, rep.computed_dim == 2 and secs < 1, f"N=44 ell=5 dim {rep.computed_dim} (want 2)", secs, 1)
    assert ok


def test_criterion_2_q19_table(criterion):
    dims, secs = qr_scan(19)
    expected = {r: (3 if r in (41, 101, 251) else 2) for r in (11, 31, 41, 61, 71, 101, 131, 151, 181, 191, 211, 241, 251)}
    hits = sorted(r for r, d in dims.items() if d == 3)
    ok = criterion(2, dims == expected and secs < 300, f"q=19 dim 3 at r = {hits} (want [41, 101, 251], others 2)", secs, 300)
    assert ok, dims


def test_criterion_3_q29_table(criterion):
    dims, secs = qr_scan(29)
    hits = sorted(r for r, d in dims.items() if d == 3)
    ok = criterion(3, hits == [181, 191, 251] and secs < 300, f"q=29 dim 3 at r = {hits} (want [181, 191, 251])", secs, 300)
    assert ok, dims


def test_criterion_4_splitting_primes(criterion):
    (l38, l58), secs = split_lists()
    ok = (
        l38 == [41, 101, 251, 521, 631, 691, 881, 991]
        and l58 == [181, 191, 251, 401, 491, 541, 601, 701, 911, 971]
        and secs < 30
    )
    criterion(4, ok, f"38b1 -> {l38}; 58b1 -> {l58}", secs, 30)
    assert ok


def test_criterion_5_equivalence(criterion):
    (l38, l58), _ = split_lists()
    q19 = sorted(r for r, d in qr_scan(19)[0].items() if d == 3)
    q29 = sorted(r for r, d in qr_scan(29)[0].items() if d == 3)
    a = [r for r in l38 if r <= 260]
    b = [r for r in l58 if r <= 260]
    ok = q19 == a and q29 == b
    criterion(5, ok, f"q=19 {q19} vs 38b1 {a}; q=29 {q29} vs 58b1 {b}")
    assert ok


def test_criterion_6_conjecture_probe(criterion, capsys, tmp_path):
    start = time.perf_counter()
    code = cli.main(["scan-qr2", "19", "5", "11", "--format", "json", "--cache-dir", str(tmp_path)])
    out = capsys.readouterr().out
    secs = time.perf_counter() - start
    import json

    [rep] = json.loads(out)["reports"]
    ok = rep["N"] == 2299 and rep["computed_dim"] == 3 and code == 0 and secs < 120
    criterion(6, ok, f"(19, 11) N=2299 dim {rep['computed_dim']} exit {code} (want 3, exit 0)", secs, 120)
    assert ok


@pytest.mark.slow
def test_criterion_6_slow_31939(criterion, capsys, tmp_path):
    start = time.perf_counter()
    code = cli.main(["scan-qr2", "19", "5", "41", "--slow", "--format", "json", "--cache-dir", str(tmp_path)])
    out = capsys.readouterr().out
    secs = time.perf_counter() - start
    import json

    [rep] = json.loads(out)["reports"]
    ok = rep["N"] == 31939 and rep["computed_dim"] == 3 and rep["predicted"]["kind"] == "known" and code == 0 and secs < 900
    criterion("6/slow", ok, f"(19, 41) N=31939 dim {rep['computed_dim']} exit {code} (want 3, exit 0)", secs, 900)
    assert ok


def test_criterion_7_theorem_836(criterion):
    loc = L(836, 5, {2: 0, 11: 1, 19: -1})
    lc = loc.level_class
    rep, secs = timed(kernel_dimension, 836, 5, loc)
    want = 1 + lc.s0 + lc.t + lc.u1
    ok = (lc.s0, lc.t, lc.u1) == (1, 1, 0) and want == 3 and rep.computed_dim == 3 and secs < 60
    criterion(7, ok, f"N=836 dim {rep.computed_dim} = 1+s0+t+u1 = {want}", secs, 60)
    assert ok


def test_criterion_8_maximality_sweep(criterion):
    start = time.perf_counter()
    violations, total = [], 0
    for ell in (5, 7):
        for N in range(2, 401):
            if N % ell == 0:
                continue
            for rep in verify_level(N, ell):
                total += 1
                loc = L(N, ell, dict(rep.locus))
                lc = loc.level_class
                if rep.maximal_by_formula != (rep.computed_dim > 0):
                    violations.append((N, ell, rep.locus, "computation"))
                if lc.s + lc.u >= 1 and (index_numerator_valuation(loc) >= 1) != rep.maximal_by_formula:
                    violations.append((N, ell, rep.locus, "index"))
    secs = time.perf_counter() - start
    ok = not violations and secs < 600
    criterion(8, ok, f"{total} loci, {len(violations)} violations", secs, 600)
    assert ok, violations[:10]


def test_criterion_9_structure(criterion):
    start = time.perf_counter()
    violations = []
    ell = 5
    for N in range(1, 301):
        if N % ell == 0:
            continue
        space = build_space(N, ell)
        if space.cuspidal_dim != 2 * genus(N):
            violations.append((N, "cuspidal dim"))
        t2, t3 = hecke_matrix(space, 2), hecke_matrix(space, 3)
        if t2 @ t3 != t3 @ t2:
            violations.append((N, "commutativity"))
        for p, tp in ((2, t2), (3, t3)):
            sq = FpMatrix(ell, heilbronn_matrix(space, merel_set(p * p)))
            rec = tp @ tp if N % p == 0 else (tp @ tp).minus_scalar(p)
            if sq != rec or hecke_matrix(space, p * p) != rec:
                violations.append((N, f"T_{p * p}"))
        if N == 1:
            continue
        for rep in verify_level(N, ell):
            if not rep.maximal_by_formula:
                continue
            loc = L(N, ell, dict(rep.locus))
            bound = 1 + len(s_m_set(loc)) + shimura_kernel_dim(loc)
            if not 2 <= rep.computed_dim <= bound:
                violations.append((N, rep.locus, rep.computed_dim, bound))
    secs = time.perf_counter() - start
    ok = not violations
    criterion(9, ok, f"N <= 300, {len(violations)} violations", secs)
    assert ok, violations[:10]


def test_criterion_10_oracles(criterion):
    start = time.perf_counter()
    a = eta_product_coefficients(4)
    space = build_space(11, 5)
    t2 = restrict_to_cuspidal(space, hecke_matrix(space, 2))
    t3 = restrict_to_cuspidal(space, hecke_matrix(space, 3))
    hecke_ok = t2.is_scalar(a[1] % 5) and t3.is_scalar(a[2] % 5) and (a[1], a[2]) == (-2, -1)
    rng = np.random.default_rng(10)
    from eiskernel.arith import primes_up_to

    primes = [p for p in primes_up_to(3000) if p > 3]
    mismatches = 0
    pairs = 0
    while pairs < 100:
        r = int(rng.choice(primes))
        try:
            E = EllipticCurve.from_ainvs(rng.integers(-50, 50, 5).tolist())
        except ValueError:
            continue
        if E.discriminant % r == 0:
            continue
        pairs += 1
        mismatches += count_points(E, r) != count_points_legendre(E.ainvs, r)
    secs = time.perf_counter() - start
    ok = hecke_ok and mismatches == 0
    criterion(10, ok, f"level-11 T2/T3 vs eta product {'ok' if hecke_ok else 'wrong'}; point counts {pairs - mismatches}/{pairs} agree", secs)
    assert ok

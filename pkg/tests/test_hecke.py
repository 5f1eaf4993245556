import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eiskernel.ecsplit import count_points, fetch_curve
from eiskernel.hecke import (
    apply_prime,
    generator_images,
    heilbronn_cremona,
    heilbronn_images,
    heilbronn_matrix,
    hecke_matrix,
    merel_set,
    restrict_to_cuspidal,
    tp_images,
    up_matrix,
)
from eiskernel.linalg import FpMatrix, matmul_mod
from eiskernel.modsym import build_space
from oracles import eta_product_coefficients

A11 = eta_product_coefficients(20)


def _ell_for(n):
    return next(ell for ell in (5, 7, 11, 13, 17, 19, 23) if n % ell)


def _cusp(space, n):
    return restrict_to_cuspidal(space, hecke_matrix(space, n))


@pytest.mark.parametrize("n", [2, 3, 5, 7, 4, 6, 9, 10])
def test_level11_against_eta_product(n):
    space = build_space(11, 5)
    assert _cusp(space, n).is_scalar(A11[n - 1] % 5)


def test_level11_small_examples():
    space = build_space(11, 5)
    assert _cusp(space, 2) == FpMatrix(5, 3 * np.eye(2, dtype=np.int64))
    assert _cusp(space, 3).is_scalar(4)
    assert hecke_matrix(space, 1) == FpMatrix.identity(space.gen_count, 5)
    assert restrict_to_cuspidal(space, FpMatrix.identity(space.gen_count, 5)) == FpMatrix.identity(2, 5)


@pytest.mark.parametrize("ell", [7, 13])
def test_level11_other_primes(ell):
    space = build_space(11, ell)
    for p in (2, 3, 5, 7, 13):
        if p != 11:
            assert _cusp(space, p).is_scalar(A11[p - 1] % ell)


def test_level44_trace():
    # S_2(44) = 3 copies of the level-11 form (divisors 1, 2, 4 of 44/11) plus the level-44 newform,
    # each contributing twice to homology
    a3_11 = A11[2]
    a3_44 = 3 + 1 - count_points(fetch_curve("44a1", offline=True).curve, 3)
    space = build_space(44, 5)
    assert _cusp(space, 3).trace() == (2 * (3 * a3_11 + a3_44)) % 5


def test_restrict_rejects_non_hecke():
    space = build_space(11, 5)
    m = np.zeros((3, 3), dtype=np.int64)
    m[space.cuspidal_pivots[0], :] = 1
    with pytest.raises(ValueError, match="does not preserve cuspidal subspace"):
        restrict_to_cuspidal(space, FpMatrix(5, m))


@pytest.mark.parametrize("N", [11, 23, 37, 44, 63, 91, 143])
@pytest.mark.parametrize("p", [2, 3, 5, 7, 13])
def test_cremona_equals_merel(N, p):
    if N % p == 0:
        return
    space = build_space(N, _ell_for(N * p))
    assert np.array_equal(heilbronn_matrix(space, heilbronn_cremona(p)), heilbronn_matrix(space, merel_set(p)))


@pytest.mark.parametrize("N", [11, 77, 143, 221])
def test_images_agree_with_matrix(N):
    ell = _ell_for(N)
    space = build_space(N, ell)
    rng = np.random.default_rng(N)
    vecs = rng.integers(0, ell, (3, space.gen_count))
    idx = np.array([0, space.gen_count // 2, space.gen_count - 1])
    for p in (2, 3, 7, 13, 29):
        if N % p == 0:
            full = up_matrix(space, p) % ell
        else:
            full = heilbronn_matrix(space, heilbronn_cremona(p)) % ell
            if p != 2:
                assert np.array_equal(tp_images(space, p, vecs), matmul_mod(vecs, full, ell))
            assert np.array_equal(heilbronn_images(space, heilbronn_cremona(p), vecs), matmul_mod(vecs, full, ell))
        assert np.array_equal(apply_prime(space, p, vecs), matmul_mod(vecs, full, ell))
        assert np.array_equal(generator_images(space, p, idx), full[idx])


def test_prime_power_recursion_and_commutativity_sweep():
    # T_{p^2} built from Merel's set for n = p^2 is an independent check of the recursion
    for N in range(1, 301):
        if N % 5 == 0:
            continue
        space = build_space(N, 5)
        t2, t3 = hecke_matrix(space, 2), hecke_matrix(space, 3)
        assert t2 @ t3 == t3 @ t2, N
        assert hecke_matrix(space, 6) == t2 @ t3, N
        for p, tp in ((2, t2), (3, t3)):
            sq = FpMatrix(5, heilbronn_matrix(space, merel_set(p * p)))
            expected = tp @ tp if N % p == 0 else (tp @ tp).minus_scalar(p)
            assert sq == expected, (N, p)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=2, max_value=250), st.sampled_from([(2, 5), (3, 7), (2, 11), (5, 7)]))
def test_hecke_preserves_cuspidal(N, pq):
    ell = 13
    if N % ell == 0:
        return
    space = build_space(N, ell)
    p, q = pq
    tp, tq = _cusp(space, p), _cusp(space, q)
    assert tp @ tq == tq @ tp


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=2, max_value=200), st.sampled_from([2, 3, 5, 7, 11, 13]))
def test_eisenstein_quotient_eigenvalue(N, p):
    # on the boundary (Eisenstein part) of a prime level T_p acts as p + 1
    from eiskernel.arith import is_prime

    ell = 17
    if not is_prime(N) or N % p == 0 or N == ell:
        return
    space = build_space(N, ell)
    t = hecke_matrix(space, p).entries
    b = space.boundary.entries
    assert np.array_equal(matmul_mod(t, b, ell), (p + 1) * b % ell)

import pytest
from hypothesis import given, settings, strategies as st

from eiskernel.eislocus import (
    EisensteinLocus,
    Prediction,
    cuspidal_divisor_order_valuation,
    cuspidal_hecke_eigenvalue,
    enumerate_loci,
    index_numerator_valuation,
    is_maximal,
    predicted_dimension,
    s_m_set,
    shimura_kernel_dim,
    upper_bound,
    varpi,
)

L = EisensteinLocus.from_map


def test_enumerate_examples():
    assert [loc.eps for loc in enumerate_loci(44, 5)] == [((2, 0), (11, 1))]
    assert {loc.eps for loc in enumerate_loci(209, 5)} == {((11, 1), (19, 1)), ((11, 1), (19, -1))}
    assert [loc.eps for loc in enumerate_loci(4, 5)] == [((2, 0),)]


@pytest.mark.parametrize("N, ell, msg", [(25, 5, "level divisible"), (44, 3, "too small")])
def test_enumerate_errors(N, ell, msg):
    with pytest.raises(ValueError, match=msg):
        enumerate_loci(N, ell)


def test_invalid_signs():
    with pytest.raises(ValueError):
        L(44, 5, {2: 1, 11: 1})  # 2^2 | 44 forces 0
    with pytest.raises(ValueError):
        L(33, 5, {3: -1, 11: 1})  # 3 is not -1 mod 5
    with pytest.raises(ValueError):
        L(33, 5, {11: 1})


def test_level_class_counts():
    lc = L(836, 5, {2: 0, 11: 1, 19: -1}).level_class
    assert lc.counts() == {"s": 1, "s0": 1, "t": 1, "u": 1, "u0": 0, "u1": 0}
    lc = L(2299, 5, {11: 0, 19: -1}).level_class
    assert (lc.u0, lc.u1, lc.t) == (1, 1, 1)


@pytest.mark.parametrize(
    "locus, expected",
    [
        (L(33, 5, {3: 1, 11: 1}), True),
        (L(44, 5, {2: 0, 11: 1}), True),
        (L(4, 5, {2: 0}), False),
    ],
)
def test_is_maximal(locus, expected):
    assert is_maximal(locus) is expected


@pytest.mark.parametrize(
    "locus, expected",
    [(L(11, 5, {11: 1}), 1), (L(44, 5, {2: 0, 11: 1}), 1), (L(7, 5, {7: 1}), 0)],
)
def test_index_numerator_valuation(locus, expected):
    assert index_numerator_valuation(locus) == expected


@pytest.mark.parametrize(
    "locus, expected",
    [
        (L(44, 5, {2: 0, 11: 1}), [11]),
        (L(2299, 5, {11: 0, 19: -1}), [11, 19]),
        (L(76, 5, {2: 0, 19: -1}), [19]),
    ],
)
def test_s_m_set(locus, expected):
    assert sorted(s_m_set(locus)) == expected


@pytest.mark.parametrize("N, expected", [(44, 1), (2299, 2), (7, 0)])
def test_varpi(N, expected):
    assert varpi(N, 5) == expected


@pytest.mark.parametrize(
    "locus, expected",
    [(L(209, 5, {11: 1, 19: -1}), 1), (L(44, 5, {2: 0, 11: 1}), 0), (L(11, 5, {11: 1}), 1)],
)
def test_shimura_kernel_dim(locus, expected):
    assert shimura_kernel_dim(locus) == expected


def test_predicted_dimension_examples():
    assert predicted_dimension(L(44, 5, {2: 0, 11: 1})) == Prediction("known", 2)
    assert predicted_dimension(L(2299, 5, {11: 0, 19: -1})) == Prediction("conjectural", 3)
    assert predicted_dimension(L(836, 5, {2: 0, 11: 1, 19: -1})) == Prediction("known", 3)
    assert predicted_dimension(L(209, 5, {11: 1, 19: -1})) == Prediction("not_covered")
    with pytest.raises(ValueError, match="unit ideal"):
        predicted_dimension(L(4, 5, {2: 0}))


@pytest.mark.parametrize(
    "locus, expected",
    [(L(44, 5, {2: 0, 11: 1}), 2), (L(2299, 5, {11: 0, 19: -1}), 3), (L(209, 5, {11: 1, 19: -1}), 4)],
)
def test_upper_bound(locus, expected):
    assert upper_bound(locus) == expected


@pytest.mark.parametrize("M, N, expected", [(11, 11, 1), (11, 44, 1), (1, 4, 0)])
def test_cuspidal_divisor_order(M, N, expected):
    assert cuspidal_divisor_order_valuation(M, N, 5) == expected


def test_cuspidal_divisor_order_invalid():
    with pytest.raises(ValueError, match="invalid divisor"):
        cuspidal_divisor_order_valuation(3, 44, 5)
    with pytest.raises(ValueError, match="invalid divisor"):
        cuspidal_divisor_order_valuation(1, 11, 5)


@pytest.mark.parametrize("q, expected", [(11, 1), (2, 0), (3, 4)])
def test_cuspidal_hecke_eigenvalue(q, expected):
    assert cuspidal_hecke_eigenvalue(q, 11, 44) == expected


def _all_loci(max_n=400, ells=(5, 7, 11)):
    for ell in ells:
        for N in range(2, max_n + 1):
            if N % ell:
                yield from enumerate_loci(N, ell)


def test_maximality_equivalence_sweep():
    for loc in _all_loci():
        lc = loc.level_class
        assert is_maximal(loc) == (lc.s + lc.u >= 1 and index_numerator_valuation(loc) >= 1), loc


def test_formula_invariants_sweep():
    for loc in _all_loci():
        lc = loc.level_class
        assert len(s_m_set(loc)) == lc.s0 + lc.t + lc.u1
        if not is_maximal(loc):
            continue
        assert upper_bound(loc) >= 2
        pred = predicted_dimension(loc)
        if pred.kind == "known":
            assert pred.value <= upper_bound(loc)


def test_cuspidal_order_matches_maximality():
    for loc in _all_loci(300, (5, 7)):
        sq = 1
        M = 1
        for p, e in loc.eps:
            if e == 0:
                sq *= p
            elif e == 1:
                M *= p
        if M * sq == 1:
            continue
        assert (cuspidal_divisor_order_valuation(M, loc.N, loc.ell) >= 1) == is_maximal(loc), loc


@settings(max_examples=60)
@given(st.integers(min_value=2, max_value=5000), st.sampled_from([5, 7, 11, 13]))
def test_loci_are_well_formed(N, ell):
    if N % ell == 0:
        return
    loci = enumerate_loci(N, ell)
    assert len(set(loci)) == len(loci)
    for loc in loci:
        lc = loc.level_class
        assert lc.s0 <= lc.s and lc.u0 <= lc.u1 <= lc.u
        assert all(q % ell == ell - 1 for q in lc.Q)

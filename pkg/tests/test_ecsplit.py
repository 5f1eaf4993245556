import random

import pytest
from hypothesis import given, settings, strategies as st

from eiskernel.arith import is_prime, primes_up_to
from eiskernel.ecsplit import (
    CurveDataUnavailable,
    EllipticCurve,
    MalformedCurveData,
    add,
    count_points,
    fetch_curve,
    full_torsion_rational,
    multiply,
    negate,
    points,
    splitting_primes,
)
from curve_server import curve_server
from oracles import count_points_legendre

SMALL_PRIMES = [p for p in primes_up_to(100) if p > 3]


def test_count_examples():
    assert count_points(EllipticCurve(0, 0, 0, 1, 0), 5) == 4
    assert count_points(EllipticCurve(0, 0, 0, 0, 1), 5) == 6


def test_singular_and_bad_reduction():
    with pytest.raises(ValueError):
        EllipticCurve(0, 0, 0, 0, 0)
    E = EllipticCurve(0, 0, 0, 1, 0)
    with pytest.raises(ValueError, match="odd prime"):
        count_points(E, 2)
    with pytest.raises(ValueError, match="bad reduction"):
        count_points(fetch_curve("11a1", offline=True).curve, 11)
    with pytest.raises(ValueError):
        count_points(E, 9)


@pytest.mark.parametrize("label", ["38b1", "58b1", "11a1", "44a1"])
def test_fixtures(label):
    rec = fetch_curve(label, offline=True)
    assert len(rec.ainvs) == 5 and all(isinstance(a, int) for a in rec.ainvs)
    assert rec.curve.discriminant != 0
    assert rec.source == "fixture"
    assert rec.origin and rec.fetched_at


def test_fixture_conductor_primes():
    # bad reduction exactly at the primes of the conductor (these models are minimal)
    for label, bad in (("38b1", {2, 19}), ("58b1", {2, 29}), ("11a1", {11}), ("44a1", {2, 11})):
        disc = fetch_curve(label, offline=True).curve.discriminant
        assert {p for p in primes_up_to(100) if disc % p == 0} == bad


def test_invalid_label():
    with pytest.raises(ValueError):
        fetch_curve("not-a-label")


def test_offline_without_fixture(tmp_path):
    with pytest.raises(CurveDataUnavailable):
        fetch_curve("37a1", cache_dir=tmp_path, offline=True)


def test_remote_fetch_and_cache(tmp_path):
    with curve_server() as (url, server):
        rec = fetch_curve("37a1", cache_dir=tmp_path, base_url=url)
        assert rec.ainvs == (0, 0, 1, -1, 0)
        assert rec.source == "remote"
        assert (tmp_path / "curves" / "37a1.json").is_file()
        again = fetch_curve("37a1", cache_dir=tmp_path, base_url=url, offline=True)
        assert again.ainvs == rec.ainvs
        assert server.hits == ["37a1"]
        assert fetch_curve("389a1", cache_dir=tmp_path, base_url=url).ainvs == (0, 1, 1, -2, 0)


@pytest.mark.parametrize("label", ["15a1", "14a1"])
def test_malformed_payload(tmp_path, label):
    with curve_server() as (url, _):
        with pytest.raises(MalformedCurveData, match="malformed"):
            fetch_curve(label, cache_dir=tmp_path, base_url=url)
    assert not (tmp_path / "curves" / f"{label}.json").exists()


def test_not_found_and_unreachable(tmp_path):
    with curve_server() as (url, _):
        with pytest.raises(CurveDataUnavailable):
            fetch_curve("99a1", cache_dir=tmp_path, base_url=url)
    with pytest.raises(CurveDataUnavailable):
        fetch_curve("99a1", cache_dir=tmp_path, base_url="http://127.0.0.1:9/", timeout=2)


def test_env_endpoint(tmp_path, monkeypatch):
    with curve_server() as (url, server):
        monkeypatch.setenv("EISK_CURVE_DB_URL", url)
        assert fetch_curve("37a1", cache_dir=tmp_path).ainvs == (0, 0, 1, -1, 0)
        assert server.hits == ["37a1"]


def _random_curve(rng, r):
    while True:
        a = [rng.randrange(r) for _ in range(5)]
        try:
            E = EllipticCurve.from_ainvs(a)
        except ValueError:
            continue
        if E.discriminant % r:
            return E


def test_count_against_legendre_oracle():
    rng = random.Random(2024)
    primes = [p for p in primes_up_to(2000) if p > 3]
    for _ in range(100):
        r = rng.choice(primes)
        E = _random_curve(rng, r)
        n = count_points(E, r)
        assert n == count_points_legendre(E.ainvs, r)
        assert abs(n - r - 1) <= 2 * r**0.5


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SMALL_PRIMES), st.integers(0, 2**32))
def test_group_law(r, seed):
    rng = random.Random(seed)
    E = _random_curve(rng, r)
    pts = list(points(E, r))
    assert len(pts) + 1 == count_points(E, r)
    P, Q, R = (rng.choice(pts) for _ in range(3))
    assert add(E, add(E, P, Q, r), R, r) == add(E, P, add(E, Q, R, r), r)
    assert add(E, P, Q, r) == add(E, Q, P, r)
    assert add(E, P, negate(E, P, r), r) is None
    assert add(E, P, None, r) == P
    assert multiply(E, count_points(E, r), P, r) is None


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([p for p in primes_up_to(400) if p > 3]), st.sampled_from([3, 5, 7]), st.integers(0, 2**32))
def test_full_torsion_implies_divisibility(r, ell, seed):
    if r == ell:
        return
    E = _random_curve(random.Random(seed), r)
    if full_torsion_rational(E, ell, r):
        assert r % ell == 1
        assert count_points(E, r) % (ell * ell) == 0


def test_torsion_examples():
    E = fetch_curve("38b1", offline=True).curve
    assert full_torsion_rational(E, 5, 41)
    assert not full_torsion_rational(E, 5, 11)
    assert not full_torsion_rational(E, 5, 43)
    with pytest.raises(ValueError):
        full_torsion_rational(E, 5, 5)


def test_splitting_primes_examples():
    assert splitting_primes("38b1", 5, 1000, offline=True) == [41, 101, 251, 521, 631, 691, 881, 991]
    assert splitting_primes("58b1", 5, 1000, offline=True) == [181, 191, 251, 401, 491, 541, 601, 701, 911, 971]
    assert splitting_primes("38b1", 5, 40, offline=True) == []


def test_splitting_primes_congruence():
    for ell in (3, 5, 7):
        out = splitting_primes("11a1", ell, 1500, offline=True)
        assert all(is_prime(r) and r % ell == 1 for r in out)

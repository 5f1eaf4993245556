"""Elliptic curves over F_r: point counts and the full ell-torsion test.

A prime r of good reduction splits completely in Q(E[ell]) exactly when
Frobenius acts trivially on E[ell], i.e. when all ell^2 torsion points are
already defined over F_r.  That is decided here by listing E(F_r) and
multiplying every point by ell.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from .arith import is_prime, primes_up_to
from .cache import atomic_write, default_cache_dir

LABEL_RE = re.compile(r"^[1-9][0-9]*[a-z]+[1-9][0-9]*$")
DEFAULT_DB_URL = "https://www.lmfdb.org/api/ec_curvedata/"
MAX_FIELD = 10**6

Point = Optional[Tuple[int, int]]  # None is the point at infinity


class CurveDataUnavailable(RuntimeError):
    pass


class MalformedCurveData(ValueError):
    pass


@dataclass(frozen=True)
class EllipticCurve:
    """y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6."""

    a1: int
    a2: int
    a3: int
    a4: int
    a6: int
    label: str = ""

    def __post_init__(self):
        if self.discriminant == 0:
            raise ValueError("singular curve: discriminant is 0")

    @classmethod
    def from_ainvs(cls, ainvs, label: str = "") -> "EllipticCurve":
        a1, a2, a3, a4, a6 = (int(a) for a in ainvs)
        return cls(a1, a2, a3, a4, a6, label)

    @property
    def ainvs(self) -> Tuple[int, int, int, int, int]:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def b_invariants(self) -> Tuple[int, int, int, int]:
        a1, a2, a3, a4, a6 = self.ainvs
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
        return b2, b4, b6, b8

    @property
    def discriminant(self) -> int:
        b2, b4, b6, b8 = self.b_invariants
        return -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


@dataclass(frozen=True)
class CurveRecord:
    label: str
    ainvs: Tuple[int, int, int, int, int]
    source: str  # "fixture" or "remote"
    fetched_at: str
    origin: str = ""

    @property
    def curve(self) -> EllipticCurve:
        return EllipticCurve.from_ainvs(self.ainvs, self.label)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "ainvs": list(self.ainvs),
            "source": self.origin,
            "retrieved": self.fetched_at,
        }


# --- curve data --------------------------------------------------------------


def _parse_ainvs(payload, raw: str) -> Tuple[int, int, int, int, int]:
    """Find a list of 5 integer a-invariants in a JSON payload."""
    cand = None
    if isinstance(payload, dict):
        if "ainvs" in payload:
            cand = payload["ainvs"]
        elif isinstance(payload.get("data"), list) and payload["data"]:
            first = payload["data"][0]
            if isinstance(first, dict):
                cand = first.get("ainvs")
    if isinstance(cand, str):
        # some endpoints serialize the list as text, e.g. "[1,1,1,0,1]"
        try:
            cand = json.loads(cand)
        except ValueError:
            cand = None
    if not (isinstance(cand, list) and len(cand) == 5 and all(isinstance(a, int) and not isinstance(a, bool) for a in cand)):
        raise MalformedCurveData(f"malformed curve data: {raw[:200]!r}")
    return tuple(cand)  # type: ignore[return-value]


def _record_from_file(path: Path, source: str) -> CurveRecord:
    raw = path.read_text()
    try:
        data = json.loads(raw)
    except ValueError as exc:
        raise MalformedCurveData(f"malformed curve data: {raw[:200]!r}") from exc
    ainvs = _parse_ainvs(data, raw)
    rec = CurveRecord(data.get("label", path.stem), ainvs, source, str(data.get("retrieved", "")), str(data.get("source", "")))
    rec.curve  # validates the discriminant
    return rec


def _fixture_path(label: str) -> Optional[Path]:
    path = resources.files("eiskernel").joinpath("fixtures", "curves", f"{label}.json")
    return Path(str(path)) if path.is_file() else None


def fetch_curve(
    label: str,
    *,
    cache_dir: Optional[os.PathLike] = None,
    offline: bool = False,
    base_url: Optional[str] = None,
    timeout: float = 15.0,
) -> CurveRecord:
    """Curve data by Cremona label: packaged fixture, then local cache, then the database."""
    if not LABEL_RE.match(label):
        raise ValueError(f"invalid curve label {label!r}")
    fixture = _fixture_path(label)
    if fixture is not None:
        return _record_from_file(fixture, "fixture")
    cache_root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cached = cache_root / "curves" / f"{label}.json"
    if cached.is_file():
        return _record_from_file(cached, "remote")
    if offline:
        raise CurveDataUnavailable(f"curve data unavailable: {label} (offline, no fixture)")
    base = base_url or os.environ.get("EISK_CURVE_DB_URL") or DEFAULT_DB_URL
    url = base + ("&" if "?" in base else "?") + urllib.parse.urlencode({"Clabel": label, "_format": "json"})
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            raw = resp.read().decode("utf-8", errors="replace")
    except (urllib.error.URLError, OSError) as exc:
        raise CurveDataUnavailable(f"curve data unavailable: {label} ({exc})") from exc
    try:
        payload = json.loads(raw)
    except ValueError as exc:
        raise MalformedCurveData(f"malformed curve data: {raw[:200]!r}") from exc
    ainvs = _parse_ainvs(payload, raw)
    EllipticCurve.from_ainvs(ainvs, label)
    now = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    rec = CurveRecord(label, ainvs, "remote", now, url)
    atomic_write(cached, (json.dumps(rec.to_json(), indent=2) + "\n").encode())
    return rec


# --- arithmetic over F_r -----------------------------------------------------


def _check_prime_field(E: EllipticCurve, r: int) -> None:
    if not is_prime(r) or r == 2:
        raise ValueError("r must be an odd prime")
    if r > MAX_FIELD:
        raise ValueError("r exceeds the enumeration budget of 10^6")
    if E.discriminant % r == 0:
        raise ValueError("bad reduction")


def _rhs_values(E: EllipticCurve, r: int) -> np.ndarray:
    """f(x) = 4x^3 + b2 x^2 + 2 b4 x + b6 mod r for all x; (2y + a1 x + a3)^2 = f(x)."""
    b2, b4, b6, _ = E.b_invariants
    x = np.arange(r, dtype=np.int64)
    f = (4 * x) % r
    f = (f + b2) % r * x % r
    f = (f + 2 * b4) % r * x % r
    return (f + b6) % r


def _square_roots(r: int) -> np.ndarray:
    """root[a] = some y with y^2 = a mod r, or -1."""
    root = np.full(r, -1, dtype=np.int64)
    y = np.arange((r + 1) // 2, dtype=np.int64)
    root[(y * y) % r] = y
    return root


def count_points(E: EllipticCurve, r: int) -> int:
    """#E(F_r), point at infinity included."""
    _check_prime_field(E, r)
    f = _rhs_values(E, r)
    root = _square_roots(r)
    sols = np.where(f == 0, 1, np.where(root[f] >= 0, 2, 0))
    return int(sols.sum()) + 1


def points(E: EllipticCurve, r: int) -> Iterator[Tuple[int, int]]:
    """Affine points of E(F_r)."""
    _check_prime_field(E, r)
    f = _rhs_values(E, r)
    root = _square_roots(r)
    half = pow(2, -1, r)
    for x in range(r):
        s = int(root[f[x]])
        if s < 0:
            continue
        shift = E.a1 * x + E.a3
        for t in {s, (-s) % r}:
            yield x, (t - shift) * half % r


def negate(E: EllipticCurve, P: Point, r: int) -> Point:
    if P is None:
        return None
    x, y = P
    return x, (-y - E.a1 * x - E.a3) % r


def add(E: EllipticCurve, P: Point, Q: Point, r: int) -> Point:
    if P is None:
        return Q
    if Q is None:
        return P
    a1, a2, a3, a4, a6 = E.ainvs
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2 + a1 * x2 + a3) % r == 0:
            return None
        den = pow((2 * y1 + a1 * x1 + a3) % r, -1, r)
        lam = (3 * x1 * x1 + 2 * a2 * x1 + a4 - a1 * y1) * den % r
        nu = (-x1 * x1 * x1 + a4 * x1 + 2 * a6 - a3 * y1) * den % r
    else:
        den = pow((x2 - x1) % r, -1, r)
        lam = (y2 - y1) * den % r
        nu = (y1 * x2 - y2 * x1) * den % r
    x3 = (lam * lam + a1 * lam - a2 - x1 - x2) % r
    y3 = (-(lam + a1) * x3 - nu - a3) % r
    return x3, y3


def multiply(E: EllipticCurve, n: int, P: Point, r: int) -> Point:
    if n < 0:
        return multiply(E, -n, negate(E, P, r), r)
    result: Point = None
    while n:
        if n & 1:
            result = add(E, result, P, r)
        P = add(E, P, P, r)
        n >>= 1
    return result


def full_torsion_rational(E: EllipticCurve, ell: int, r: int) -> bool:
    """True iff E[ell] is contained in E(F_r)."""
    if not is_prime(ell):
        raise ValueError(f"{ell} is not prime")
    if r == ell:
        raise ValueError("r must differ from ell")
    _check_prime_field(E, r)
    # the Weil pairing puts mu_ell inside F_r
    if r % ell != 1:
        return False
    if count_points(E, r) % (ell * ell):
        return False
    killed = 1  # the point at infinity
    for P in points(E, r):
        if multiply(E, ell, P, r) is None:
            killed += 1
    return killed == ell * ell


def splitting_primes(label: str, ell: int, r_max: int, **fetch_kwargs) -> List[int]:
    """Good primes r <= r_max, r != ell, that split completely in Q(E[ell])."""
    if not is_prime(ell) or ell < 3:
        raise ValueError("ell must be a prime >= 3")
    E = fetch_curve(label, **fetch_kwargs).curve
    disc = E.discriminant
    return [
        r
        for r in primes_up_to(r_max)
        if r != 2 and r != ell and disc % r and full_torsion_rational(E, ell, r)
    ]

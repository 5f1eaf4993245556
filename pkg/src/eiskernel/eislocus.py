"""Rational Eisenstein primes m_ell(s, t, u) and the closed formulas about them.

A locus fixes a level ``N``, a prime ``ell >= 5`` prime to ``N`` and a sign
``eps(p)`` for every prime ``p | N``: ``0`` at primes whose square divides
``N``, ``+1`` or ``-1`` at exactly dividing primes.  The associated ideal is
generated by ``ell``, ``T_p - eps(p)`` for ``p | N`` and ``T_p - p - 1`` for
``p`` prime to ``N``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .arith import factor, is_prime, numerator_valuation


@dataclass(frozen=True)
class LevelClass:
    """The level split into the p_i / q_j / r_k families of a locus."""

    ell: int
    N: int
    P: Tuple[Tuple[int, int], ...]  # (p_i, p_i mod ell), eps = +1
    Q: Tuple[int, ...]  # eps = -1, all = -1 mod ell
    R: Tuple[Tuple[int, int], ...]  # (r_k, e(k)), e(k) >= 2, eps = 0

    @property
    def s(self) -> int:
        return len(self.P)

    @property
    def s0(self) -> int:
        return sum(1 for _, res in self.P if res == 1)

    @property
    def t(self) -> int:
        return len(self.Q)

    @property
    def u(self) -> int:
        return len(self.R)

    @property
    def u0(self) -> int:
        return sum(1 for r, _ in self.R if r % self.ell == 1)

    @property
    def u1(self) -> int:
        return sum(1 for r, _ in self.R if r % self.ell in (1, self.ell - 1))

    def counts(self) -> Dict[str, int]:
        return {"s": self.s, "s0": self.s0, "t": self.t, "u": self.u, "u0": self.u0, "u1": self.u1}


@dataclass(frozen=True)
class EisensteinLocus:
    N: int
    ell: int
    eps: Tuple[Tuple[int, int], ...]  # sorted (p, eps(p)) over primes p | N
    level_class: LevelClass = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        _validate_level(self.N, self.ell)
        fac = factor(self.N)
        if [p for p, _ in fac] != [p for p, _ in self.eps]:
            raise ValueError("eps must be given at exactly the primes dividing N")
        P, Q, R = [], [], []
        for (p, e), (_, sign) in zip(fac, self.eps):
            if e >= 2:
                if sign != 0:
                    raise ValueError(f"eps({p}) must be 0 since {p}^2 | N")
                R.append((p, e))
            elif sign == 1:
                P.append((p, p % self.ell))
            elif sign == -1:
                if p % self.ell != self.ell - 1:
                    raise ValueError(f"eps({p}) = -1 needs {p} = -1 mod {self.ell}")
                Q.append(p)
            else:
                raise ValueError(f"eps({p}) must be +1 or -1 since {p} exactly divides N")
        object.__setattr__(self, "level_class", LevelClass(self.ell, self.N, tuple(P), tuple(Q), tuple(R)))

    @classmethod
    def from_map(cls, N: int, ell: int, eps: Dict[int, int]) -> "EisensteinLocus":
        return cls(N, ell, tuple(sorted((int(p), int(e)) for p, e in eps.items())))

    @property
    def eps_map(self) -> Dict[int, int]:
        return dict(self.eps)

    def eigenvalue(self, p: int) -> int:
        """Residue mod ell that ``T_p`` takes modulo the ideal."""
        if self.N % p == 0:
            return self.eps_map[p] % self.ell
        return (p + 1) % self.ell

    def describe(self) -> str:
        return "{" + ", ".join(f"{p}:{e:+d}" if e else f"{p}:0" for p, e in self.eps) + "}"


def _validate_level(N: int, ell: int) -> None:
    if not is_prime(ell):
        raise ValueError(f"{ell} is not prime")
    if ell < 5:
        raise ValueError("residue characteristic too small")
    if N < 1:
        raise ValueError("level must be positive")
    if N % ell == 0:
        raise ValueError("level divisible by ell")


def enumerate_loci(N: int, ell: int) -> List[EisensteinLocus]:
    """All sign assignments allowed at level ``N``, in a fixed order.

    Squarefull primes get 0, exactly dividing primes get +1, and primes
    ``= -1 mod ell`` additionally get -1.
    """
    _validate_level(N, ell)
    if N == 1:
        raise ValueError("level must exceed 1")
    choices = []
    for p, e in factor(N):
        if e >= 2:
            choices.append([(p, 0)])
        elif p % ell == ell - 1:
            choices.append([(p, 1), (p, -1)])
        else:
            choices.append([(p, 1)])
    return [EisensteinLocus(N, ell, tuple(combo)) for combo in itertools.product(*choices)]


def is_maximal(locus: EisensteinLocus) -> bool:
    lc = locus.level_class
    return lc.s + lc.u >= 1 and lc.s0 + lc.t + lc.u1 >= 1


def index_numerator_valuation(locus: EisensteinLocus) -> int:
    """ell-valuation of the numerator of prod(p_i-1) prod(q_j^2-1) prod r^(e-2)(r^2-1) / 24."""
    lc = locus.level_class
    if lc.s + lc.u == 0:
        raise ValueError("needs s + u >= 1")
    num = 1
    for p, _ in lc.P:
        num *= p - 1
    for q in lc.Q:
        num *= q * q - 1
    for r, e in lc.R:
        num *= r ** (e - 2) * (r * r - 1)
    return numerator_valuation(num, 24, lc.ell)


def s_m_set(locus: EisensteinLocus) -> List[int]:
    lc = locus.level_class
    ell = lc.ell
    out = [p for p, res in lc.P if res == 1]
    out += list(lc.Q)
    out += [r for r, _ in lc.R if r % ell in (1, ell - 1)]
    return sorted(out)


def varpi(N: int, ell: int) -> int:
    """Number of primes p | N with p = +-1 mod ell."""
    if N % ell == 0:
        raise ValueError("level divisible by ell")
    return sum(1 for p, _ in factor(N) if p % ell in (1, ell - 1))


def shimura_kernel_dim(locus: EisensteinLocus) -> int:
    """Dimension of the m-torsion of the Shimura subgroup (ell >= 5 case)."""
    ell = locus.ell
    for p, e in locus.eps:
        if (e - p) % ell:
            return 0
    return sum(1 for p, _ in locus.eps if p % ell == 1)


@dataclass(frozen=True)
class Prediction:
    kind: str  # "known", "conjectural" or "not_covered"
    value: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "not_covered":
            return "NotCovered"
        return f"{self.kind.capitalize()}({self.value})"

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_json(cls, d: dict) -> "Prediction":
        return cls(d["kind"], d["value"])


def predicted_dimension(locus: EisensteinLocus) -> Prediction:
    if not is_maximal(locus):
        raise ValueError("ideal is the unit ideal")
    lc = locus.level_class
    if lc.u == 0:
        return Prediction("not_covered")
    if lc.s0 != lc.s or lc.u0 != lc.u or lc.t == 0:
        return Prediction("known", 1 + lc.s0 + lc.t + lc.u1)
    return Prediction("conjectural", 1 + lc.s + lc.t + lc.u)


def upper_bound(locus: EisensteinLocus) -> int:
    return 1 + len(s_m_set(locus)) + shimura_kernel_dim(locus)


def _sqf_and_square_parts(N: int) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
    fac = factor(N)
    return [pe for pe in fac if pe[1] == 1], [pe for pe in fac if pe[1] >= 2]


def cuspidal_divisor_order_valuation(M: int, N: int, ell: int) -> int:
    """ell-part of the order of the cuspidal divisor C_{M,N}, as an exponent.

    The order is the numerator of h prod_{p|M}(p-1) prod_{p|N, p∤M}(p^2-1)
    prod_{p|N^sq} p^(e-2) / 24 with h in {1, 2}; for ell >= 5 the factor h
    never changes the valuation, so it is left out.
    """
    _validate_level(N, ell)
    sqf, sq = _sqf_and_square_parts(N)
    sqf_part = 1
    for p, _ in sqf:
        sqf_part *= p
    sq_radical = 1
    for p, _ in sq:
        sq_radical *= p
    if M < 1 or sqf_part % M or M * sq_radical == 1:
        raise ValueError("invalid divisor")
    num = 1
    for p, e in factor(N):
        num *= (p - 1) if M % p == 0 else (p * p - 1)
        if e >= 2:
            num *= p ** (e - 2)
    return numerator_valuation(num, 24, ell)


def cuspidal_hecke_eigenvalue(q: int, M: int, N: int) -> int:
    """Eigenvalue of T_q on C_{M,N}."""
    sqf, _ = _sqf_and_square_parts(N)
    sqf_part = 1
    for p, _ in sqf:
        sqf_part *= p
    if M < 1 or sqf_part % M:
        raise ValueError("invalid divisor")
    if M % q == 0:
        return 1
    if sqf_part % q == 0:
        return q
    if N % (q * q) == 0:
        return 0
    return q + 1

"""Integer arithmetic shared by the rest of the package."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import List, Tuple

Factorization = List[Tuple[int, int]]

INT_LIMIT = 1 << 63
_TRIAL_LIMIT = 10**6
# Deterministic for every n < 3.3e24, which covers the signed 64-bit range.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def _check_range(n: int) -> None:
    if n >= INT_LIMIT or n <= -INT_LIMIT:
        raise OverflowError(f"{n} exceeds the signed 64-bit range")


def is_prime(n: int) -> bool:
    _check_range(n)
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    """Return a nontrivial factor of the odd composite ``n`` (Brent's variant)."""
    for c in range(1, n):
        y, r, q, g = 2, 1, 1, 1
        m = 128
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g
    raise ArithmeticError(f"pollard rho failed on {n}")


def factor(n: int) -> Factorization:
    """Factor ``n`` into a list of ``(prime, exponent)`` pairs, primes increasing.

    >>> factor(2299)
    [(11, 2), (19, 1)]
    """
    if n < 1:
        raise ValueError("factor() needs a positive integer")
    _check_range(n)
    out: dict[int, int] = {}
    for p in (2, 3):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    p = 5
    while p <= _TRIAL_LIMIT and p * p <= n:
        for q in (p, p + 2):
            while n % q == 0:
                out[q] = out.get(q, 0) + 1
                n //= q
        p += 6
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if is_prime(m):
            out[m] = out.get(m, 0) + 1
        else:
            d = _pollard_rho(m)
            stack.extend((d, m // d))
    return sorted(out.items())


def prime_divisors(n: int) -> List[int]:
    return [p for p, _ in factor(n)]


def divisors(n: int) -> List[int]:
    divs = [1]
    for p, e in factor(n):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def euler_phi(n: int) -> int:
    result = n
    for p, _ in factor(n):
        result = result // p * (p - 1)
    return result


def primes_up_to(n: int) -> List[int]:
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(range(p * p, n + 1, p)))
    return [i for i, flag in enumerate(sieve) if flag]


def valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


def numerator_valuation(num: int, den: int, ell: int) -> int:
    """``ell``-adic valuation of the numerator of ``num/den`` in lowest terms."""
    if num == 0:
        raise ValueError("zero fraction")
    if num < 0 or den < 1:
        raise ValueError("need num > 0 and den >= 1")
    return valuation(Fraction(num, den).numerator, ell)

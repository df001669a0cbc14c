"""Exact integer helpers: floors involving square roots and continued fractions."""
import logging
import math
from fractions import Fraction
from typing import Iterator, List, Optional, Tuple

from config import settings

logger = logging.getLogger(__name__)


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def compare_with_sqrt(c: Fraction, b: Fraction, s: Fraction) -> int:
    """Sign of c - b*sqrt(s), decided exactly (s >= 0)."""
    if s < 0:
        raise ValueError("negative radicand")
    rhs_sign = _sign(b) if s != 0 else 0
    if _sign(c) != rhs_sign:
        return _sign(_sign(c) - rhs_sign)
    if rhs_sign == 0:
        return 0
    diff = c * c - b * b * s
    # both sides share a sign; squaring flips the order when negative
    return _sign(diff) if rhs_sign > 0 else -_sign(diff)


def sqrt_floor(s: Fraction) -> int:
    """floor(sqrt(s)) for rational s >= 0."""
    if s < 0:
        raise ValueError("negative radicand")
    return math.isqrt(math.floor(s))


def floor_linear_sqrt(a: Fraction, b: Fraction, s: Fraction) -> int:
    """floor(a + b*sqrt(s)) computed exactly."""
    a = Fraction(a)
    b = Fraction(b)
    s = Fraction(s)
    # float-free estimate from integer square roots, then exact correction
    scale = 1 << 64
    root_est = Fraction(math.isqrt((s.numerator * scale * scale) // s.denominator), scale)
    n = math.floor(a + b * root_est)
    # n <= a + b sqrt(s)  <=>  n - a <= b sqrt(s)
    while compare_with_sqrt(Fraction(n) - a, b, s) > 0:
        n -= 1
    while compare_with_sqrt(Fraction(n + 1) - a, b, s) <= 0:
        n += 1
    return n


def continued_fraction(q: Fraction) -> List[int]:
    """Partial quotients of a rational (floor convention, finite)."""
    q = Fraction(q)
    terms: List[int] = []
    while True:
        a = math.floor(q)
        terms.append(a)
        frac = q - a
        if frac == 0:
            return terms
        q = 1 / frac


def convergents_from_terms(terms: List[int]) -> Iterator[Tuple[int, int]]:
    """Yields convergents (p_k, q_k) with q_k > 0."""
    p_prev, p = 1, terms[0]
    q_prev, q = 0, 1
    yield p, q
    for a in terms[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        yield p, q


def rational_convergents(x: Fraction) -> Iterator[Tuple[int, int]]:
    yield from convergents_from_terms(continued_fraction(x))


def float_convergents(x: float, max_terms: Optional[int] = None, tol: float = 1e-12) -> Iterator[Tuple[int, int, bool]]:
    """
    Convergents of a real given as a float. The flag is True when the
    expansion terminated (the convergent equals x to within tol).
    """
    limit = settings.CONTINUED_FRACTION_MAX_TERMS if max_terms is None else max_terms
    terms: List[int] = []
    rem = float(x)
    for _ in range(limit):
        a = math.floor(rem)
        terms.append(a)
        frac = rem - a
        p, q = list(convergents_from_terms(terms))[-1]
        exact = abs(p - q * x) <= tol * max(1.0, abs(q))
        yield p, q, exact
        if exact or frac < tol:
            return
        rem = 1.0 / frac
        if q > 10 ** 12:
            return


def primitive_integer_direction(num: Fraction, den: Fraction) -> Tuple[int, int]:
    """Primitive integer (n, m) with n * den + m * num == 0, not both zero."""
    num = Fraction(num)
    den = Fraction(den)
    if den == 0 and num == 0:
        raise ValueError("degenerate linear form")
    # n * den = -m * num  ->  (n, m) proportional to (num, -den)
    common = num.denominator * den.denominator
    n = int(num * common)
    m = int(-den * common)
    g = math.gcd(n, m)
    return n // g, m // g

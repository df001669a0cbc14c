import logging
import math
from fractions import Fraction
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

RationalLike = Union[int, str, Fraction]

SUPPORTED_DIMS = (2, 3, 4)


class RationalMatrixError(Exception):
    """Custom exception for exact matrix errors."""
    pass


def parse_rational(value: RationalLike) -> Fraction:
    """
    Parses an exact rational from "p/q", an integer string, an int or a Fraction.

    Floats are refused: every entry of a group element must be exact.
    """
    if isinstance(value, bool):
        raise RationalMatrixError(f"Boolean is not a rational entry: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise RationalMatrixError("Empty string is not a rational entry.")
        try:
            if "/" in text:
                num, den = text.split("/", 1)
                return Fraction(int(num.strip()), int(den.strip()))
            return Fraction(int(text))
        except (ValueError, ZeroDivisionError) as e:
            raise RationalMatrixError(f"Cannot parse rational entry '{value}'") from e
    raise RationalMatrixError(f"Unsupported entry type {type(value).__name__}: {value!r} (use 'p/q' strings)")


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class RationalMatrix:
    """
    Immutable d x d matrix over Q (d in {2, 3, 4}).

    Entries are `fractions.Fraction`, so products of long words never lose
    precision. Instances hash and compare by exact value.
    """
    __slots__ = ("_rows", "_hash")

    def __init__(self, rows: Iterable[Iterable[RationalLike]]):
        parsed = tuple(tuple(parse_rational(x) for x in row) for row in rows)
        dim = len(parsed)
        if dim not in SUPPORTED_DIMS:
            raise RationalMatrixError(f"Unsupported dimension {dim}; expected one of {SUPPORTED_DIMS}")
        if any(len(row) != dim for row in parsed):
            raise RationalMatrixError(f"Matrix must be square {dim}x{dim}")
        self._rows: Tuple[Tuple[Fraction, ...], ...] = parsed
        self._hash = hash(parsed)

    # --- construction helpers ---

    @classmethod
    def identity(cls, dim: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(dim)] for i in range(dim)])

    @classmethod
    def diag(cls, *entries: RationalLike) -> "RationalMatrix":
        dim = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(dim)] for i in range(dim)])

    @classmethod
    def unitriangular(cls, x: RationalLike, y: RationalLike, z: RationalLike) -> "RationalMatrix":
        """3x3 upper unitriangular matrix with (1,2) = x, (1,3) = y, (2,3) = z."""
        return cls([[1, x, y], [0, 1, z], [0, 0, 1]])

    @classmethod
    def elementary(cls, dim: int, i: int, j: int, t: RationalLike = 1) -> "RationalMatrix":
        """I + t * E_ij with 0-based (i, j), i != j."""
        if i == j:
            raise RationalMatrixError("Elementary matrix needs i != j")
        rows = [[Fraction(1) if a == b else Fraction(0) for b in range(dim)] for a in range(dim)]
        rows[i][j] = parse_rational(t)
        return cls(rows)

    # --- accessors ---

    @property
    def dim(self) -> int:
        return len(self._rows)

    @property
    def rows(self) -> Tuple[Tuple[Fraction, ...], ...]:
        return self._rows

    def __getitem__(self, index: Tuple[int, int]) -> Fraction:
        i, j = index
        return self._rows[i][j]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self._rows == other._rows

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = "; ".join(" ".join(format_rational(x) for x in row) for row in self._rows)
        return f"RationalMatrix([{body}])"

    def to_strings(self) -> List[List[str]]:
        return [[format_rational(x) for x in row] for row in self._rows]

    # --- arithmetic ---

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise RationalMatrixError(f"Dimension mismatch: {self.dim} vs {other.dim}")
        cols = list(zip(*other._rows))
        return RationalMatrix([[sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in cols] for row in self._rows])

    __mul__ = __matmul__

    def apply(self, vector: Sequence[RationalLike]) -> List[Fraction]:
        vec = [parse_rational(v) for v in vector]
        if len(vec) != self.dim:
            raise RationalMatrixError(f"Vector length {len(vec)} does not match dimension {self.dim}")
        return [sum((a * b for a, b in zip(row, vec)), Fraction(0)) for row in self._rows]

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(zip(*self._rows))

    def is_identity(self) -> bool:
        return all(x == (1 if i == j else 0) for i, row in enumerate(self._rows) for j, x in enumerate(row))

    def det(self) -> Fraction:
        """Exact determinant by fraction-valued Gaussian elimination."""
        a = [list(row) for row in self._rows]
        n = self.dim
        sign = 1
        result = Fraction(1)
        for col in range(n):
            pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
            if pivot is None:
                return Fraction(0)
            if pivot != col:
                a[col], a[pivot] = a[pivot], a[col]
                sign = -sign
            result *= a[col][col]
            for r in range(col + 1, n):
                factor = a[r][col] / a[col][col]
                if factor:
                    for c in range(col, n):
                        a[r][c] -= factor * a[col][c]
        return result * sign

    def inverse(self) -> "RationalMatrix":
        """Exact inverse by Gauss-Jordan elimination on [g | I]."""
        n = self.dim
        a = [list(row) + [Fraction(1) if i == j else Fraction(0) for j in range(n)] for i, row in enumerate(self._rows)]
        for col in range(n):
            pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
            if pivot is None:
                raise RationalMatrixError("Matrix is singular and has no inverse.")
            a[col], a[pivot] = a[pivot], a[col]
            inv_p = 1 / a[col][col]
            a[col] = [x * inv_p for x in a[col]]
            for r in range(n):
                if r != col and a[r][col] != 0:
                    factor = a[r][col]
                    a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
        return RationalMatrix([row[n:] for row in a])

    def power(self, k: int) -> "RationalMatrix":
        """g^k by repeated squaring; negative k uses the exact inverse."""
        base = self if k >= 0 else self.inverse()
        k = abs(k)
        result = RationalMatrix.identity(self.dim)
        while k:
            if k & 1:
                result = result @ base
            base = base @ base
            k >>= 1
        return result

    def inverse_transpose(self) -> "RationalMatrix":
        return self.inverse().transpose()

    def frobenius_norm_sq(self) -> Fraction:
        return sum((x * x for row in self._rows for x in row), Fraction(0))

    def is_exactly_float(self) -> bool:
        """True iff every entry survives float conversion unchanged."""
        for row in self._rows:
            for x in row:
                try:
                    if Fraction(float(x)) != x:
                        return False
                except OverflowError:
                    return False
        return True

    def scaled_float_array(self) -> Tuple[np.ndarray, int]:
        """
        Returns (A, e) with self == A * 2**e up to float rounding and max |A_ij| in [0.5, 1).

        The power-of-two scaling keeps huge word products inside float range.
        """
        largest = max(abs(x) for row in self._rows for x in row)
        if largest == 0:
            return np.zeros((self.dim, self.dim)), 0
        # bit-length estimate of |largest|, exact to within one
        e = largest.numerator.bit_length() - largest.denominator.bit_length()
        scale = Fraction(2) ** (-e)
        arr = np.array([[float(x * scale) for x in row] for row in self._rows], dtype=float)
        return arr, e

    def to_float_array(self) -> np.ndarray:
        arr, e = self.scaled_float_array()
        return np.ldexp(arr, e)


def frobenius_norm_sq(g: RationalMatrix) -> Fraction:
    """Exact sum of squared entries (the squared l2 matrix norm)."""
    return g.frobenius_norm_sq()


def inverse(g: RationalMatrix) -> RationalMatrix:
    return g.inverse()


def require_special_linear(g: RationalMatrix, name: str = "generator") -> RationalMatrix:
    """Raises unless det(g) == 1 exactly."""
    d = g.det()
    if d != 1:
        raise RationalMatrixError(f"{name} has determinant {format_rational(d)}, expected 1")
    return g


def rescale_to_unit_determinant(g: RationalMatrix) -> RationalMatrix:
    """Divides the first row by det(g), giving an exact det-1 matrix."""
    d = g.det()
    if d == 0:
        raise RationalMatrixError("Cannot rescale a singular matrix.")
    rows = [list(r) for r in g.rows]
    rows[0] = [x / d for x in rows[0]]
    return RationalMatrix(rows)


def log_abs(q: Fraction) -> float:
    """Natural log of |q| without overflowing on huge numerators or denominators."""
    if q == 0:
        raise RationalMatrixError("log of zero")
    q = abs(q)
    return math.log(q.numerator) - math.log(q.denominator)

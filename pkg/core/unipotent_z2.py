import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from config import settings
from core.diophantine import (compare_with_sqrt, float_convergents, floor_linear_sqrt, primitive_integer_direction,
                              rational_convergents)
from core.group_word import GroupWord, word_eval
from core.rational_matrix import RationalMatrix, RationalMatrixError, format_rational, parse_rational

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]


class Z2RepError(Exception):
    """Custom exception for unipotent Z^2 representation errors."""
    pass


class WitnessKind(str, Enum):
    CLAIM2 = "CLAIM2"
    DIAGONAL = "DIAGONAL"
    JORDAN = "JORDAN"
    MIXED_REDUCED = "MIXED_REDUCED"
    Z_ZERO_DISCRETENESS = "Z_ZERO_DISCRETENESS"


@dataclass(frozen=True)
class UnipotentTriple:
    """Entries (1,2), (1,3), (2,3) of a 3x3 upper unitriangular matrix."""
    x: Fraction
    y: Fraction
    z: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", Fraction(self.x))
        object.__setattr__(self, "y", Fraction(self.y))
        object.__setattr__(self, "z", Fraction(self.z))

    @classmethod
    def from_matrix(cls, g: RationalMatrix) -> "UnipotentTriple":
        if g.dim != 3 or any(g[i, i] != 1 for i in range(3)) or any(g[i, j] != 0 for i in range(3) for j in range(i)):
            raise Z2RepError(f"Not an upper unitriangular 3x3 matrix: {g!r}")
        return cls(g[0, 1], g[0, 2], g[1, 2])

    def to_matrix(self) -> RationalMatrix:
        return RationalMatrix.unitriangular(self.x, self.y, self.z)

    def inverse(self) -> "UnipotentTriple":
        return UnipotentTriple(-self.x, self.x * self.z - self.y, -self.z)


def lemma1div_ratio(t: UnipotentTriple) -> Fraction:
    """
    Exact (x^2 + y^2 + z^2) / (|x| + |z| + |xz - y|).

    Along a sequence of unipotent triples this ratio diverges exactly when
    sigma1/sigma2 does.
    """
    denominator = abs(t.x) + abs(t.z) + abs(t.x * t.z - t.y)
    if denominator == 0:
        raise Z2RepError("ratio undefined at identity")
    return (t.x * t.x + t.y * t.y + t.z * t.z) / denominator


@dataclass(frozen=True)
class Z2UnipotentRep:
    """
    rho(x) = [[1, a_x, b_x], [0, 1, c_x], [0, 0, 1]], rho(y) likewise.

    The two matrices commute iff a_x c_y = a_y c_x; construction fails otherwise.
    """
    a_x: Fraction
    b_x: Fraction
    c_x: Fraction
    a_y: Fraction
    b_y: Fraction
    c_y: Fraction

    def __post_init__(self):
        for name in ("a_x", "b_x", "c_x", "a_y", "b_y", "c_y"):
            try:
                object.__setattr__(self, name, parse_rational(getattr(self, name)))
            except RationalMatrixError as e:
                raise Z2RepError(f"Field {name}: {e}") from e
        if self.a_x * self.c_y != self.a_y * self.c_x:
            raise Z2RepError("not a Z^2 representation: a_x*c_y != a_y*c_x (generators do not commute)")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Z2UnipotentRep":
        return cls(**{k: data[k] for k in ("a_x", "b_x", "c_x", "a_y", "b_y", "c_y")})

    @classmethod
    def from_values(cls, values: Sequence[Any]) -> "Z2UnipotentRep":
        if len(values) != 6:
            raise Z2RepError(f"Expected six parameters, got {len(values)}")
        return cls(*values)

    def to_dict(self) -> Dict[str, str]:
        return {k: format_rational(getattr(self, k)) for k in ("a_x", "b_x", "c_x", "a_y", "b_y", "c_y")}

    # --- derived constants ---

    @property
    def lam(self) -> Optional[Fraction]:
        """c_x / a_x, or c_y / a_y when a_x = 0; None when both a vanish."""
        if self.a_x != 0:
            return self.c_x / self.a_x
        if self.a_y != 0:
            return self.c_y / self.a_y
        return None

    @property
    def B_x(self) -> Fraction:
        return self.b_x - self.a_x * self.a_x / 2

    @property
    def B_y(self) -> Fraction:
        return self.b_y - self.a_y * self.a_y / 2

    @property
    def Z_xy(self) -> Optional[Fraction]:
        if self.a_x == 0:
            return None
        return 2 * (self.B_y - (self.a_y / self.a_x) * self.B_x)

    def constants(self) -> Dict[str, Optional[str]]:
        def fmt(q):
            return None if q is None else format_rational(q)
        return {"lambda": fmt(self.lam), "B_x": fmt(self.B_x), "B_y": fmt(self.B_y), "Z_xy": fmt(self.Z_xy)}

    # --- matrices ---

    def x_triple(self) -> UnipotentTriple:
        return UnipotentTriple(self.a_x, self.b_x, self.c_x)

    def y_triple(self) -> UnipotentTriple:
        return UnipotentTriple(self.a_y, self.b_y, self.c_y)

    def generators(self) -> Dict[str, RationalMatrix]:
        return {"x": self.x_triple().to_matrix(), "y": self.y_triple().to_matrix()}

    def is_normalized(self) -> bool:
        return self.a_x == self.c_x and self.a_y == self.c_y

    def x_is_zero_type(self) -> bool:
        return self.a_x == 0 and self.c_x == 0

    def y_is_zero_type(self) -> bool:
        return self.a_y == 0 and self.c_y == 0


def z2_element(rep: Z2UnipotentRep, n: int, m: int) -> UnipotentTriple:
    """Closed form of rho(x^n y^m)."""
    a = n * rep.a_x + m * rep.a_y
    c = n * rep.c_x + m * rep.c_y
    b = (n * rep.b_x + m * rep.b_y
         + Fraction(n * (n - 1), 2) * rep.a_x * rep.c_x
         + Fraction(m * (m - 1), 2) * rep.a_y * rep.c_y
         + n * m * rep.a_x * rep.c_y)
    return UnipotentTriple(a, b, c)


def claim2_a(rep: Z2UnipotentRep, m: int, n: int) -> Fraction:
    """a(m, n) = n a_x + m a_y."""
    return n * rep.a_x + m * rep.a_y


def claim2_b(rep: Z2UnipotentRep, m: int, n: int) -> Fraction:
    """b(m, n) = a^2/2 + n B_x + m B_y, valid for normalized reps (a = c)."""
    a = claim2_a(rep, m, n)
    return a * a / 2 + n * rep.B_x + m * rep.B_y


def lambda_normalize(rep: Z2UnipotentRep) -> Tuple[Z2UnipotentRep, Dict[str, str]]:
    """
    Conjugates by diag(1, 1, lambda) so that c equals a on both generators.

    Needs some generator with a*c != 0. The singular value ratios change by a
    bounded factor only, so regularity is unaffected.
    """
    lam = None
    if rep.a_x * rep.c_x != 0:
        lam = rep.c_x / rep.a_x
    elif rep.a_y * rep.c_y != 0:
        lam = rep.c_y / rep.a_y
    if lam is None:
        raise Z2RepError("lambda normalization needs a generator with a*c != 0")
    normalized = Z2UnipotentRep(rep.a_x, rep.b_x / lam, rep.c_x / lam, rep.a_y, rep.b_y / lam, rep.c_y / lam)
    record = {"step": "lambda_conjugation", "conjugator": f"diag(1, 1, {format_rational(lam)})",
              "lambda": format_rational(lam)}
    return normalized, record


def claim2_bracket_holds(rep: Z2UnipotentRep, m: int, n: int) -> bool:
    """Exact check of |a(m, n) - sqrt|m Z_xy|| <= |a_x|."""
    z = rep.Z_xy
    if z is None:
        raise Z2RepError("Z_xy undefined (a_x = 0)")
    a = claim2_a(rep, m, n)
    radicand = abs(m * z)
    lower_ok = compare_with_sqrt(a - abs(rep.a_x), Fraction(1), radicand) <= 0
    upper_ok = compare_with_sqrt(a + abs(rep.a_x), Fraction(1), radicand) >= 0
    return lower_ok and upper_ok


def claim2_exponent(rep: Z2UnipotentRep, m: int) -> int:
    """n_m = floor(-m a_y / a_x + sqrt|m Z_xy| / a_x), exact."""
    if rep.a_x == 0:
        raise Z2RepError("witness_claim2 needs a_x != 0")
    z = rep.Z_xy
    if z == 0:
        raise Z2RepError("witness_claim2 needs Z_xy != 0")
    if m * z >= 0:
        raise Z2RepError(f"witness_claim2 needs m*Z_xy < 0 (m = {m}, Z_xy = {format_rational(z)})")
    return floor_linear_sqrt(-m * rep.a_y / rep.a_x, 1 / rep.a_x, abs(m * z))


def witness_claim2(rep: Z2UnipotentRep, m: int) -> Tuple[int, UnipotentTriple]:
    """
    Non-regularity witness rho(x^{n_m} y^m) for a normalized rep with Z_xy != 0.

    The triple is computed by exact word evaluation.
    """
    if not rep.is_normalized():
        raise Z2RepError("witness_claim2 needs a normalized rep (a_x = c_x, a_y = c_y); apply lambda_normalize first")
    n = claim2_exponent(rep, m)
    matrix = word_eval(rep.generators(), GroupWord([("x", n), ("y", m)]))
    return n, UnipotentTriple.from_matrix(matrix)


def _sign_normalized(k: int, r: int) -> Tuple[int, int]:
    if k < 0 or (k == 0 and r < 0):
        return -k, -r
    return k, r


def witness_z_zero(rep: Z2UnipotentRep) -> Iterator[Tuple[int, int]]:
    """
    Lazily yields integer pairs (k, r) with |k a_x + r a_y| <= 1.

    With Z_xy = 0 the elements rho(x^k y^r) stay bounded, which contradicts
    discreteness (or faithfulness, when the linear form vanishes).
    """
    if rep.a_x == 0:
        raise Z2RepError("witness_z_zero needs a_x != 0")
    if rep.Z_xy != 0:
        raise Z2RepError("witness_z_zero needs Z_xy = 0")
    alpha = -rep.a_y / rep.a_x
    seen = set()
    last = None
    for p, q in rational_convergents(alpha):
        last = (p, q)
        pair = _sign_normalized(p, q)
        if pair in seen or pair == (0, 0):
            continue
        if abs(pair[0] * rep.a_x + pair[1] * rep.a_y) <= 1:
            seen.add(pair)
            yield pair
    base = _sign_normalized(*last)
    t = 2
    while True:
        yield base[0] * t, base[1] * t
        t += 1


def _log_abs(v: Number) -> float:
    if isinstance(v, Fraction):
        if v == 0:
            raise Z2RepError("zero eigenvalue")
        return math.log(abs(v.numerator)) - math.log(v.denominator)
    if v == 0:
        raise Z2RepError("zero eigenvalue")
    return math.log(abs(float(v)))


def witness_diagonal(lx: Sequence[Number], ly: Sequence[Number]) -> Iterator[Tuple[int, int]]:
    """
    Pairs (n, m) keeping rho(x^n y^m) near the wall between the first two
    eigen-directions while its norm grows.

    |n log|lx0/lx1| + m log|ly0/ly1|| <= 1 along the family, so sigma1/sigma2
    stays bounded by e when those two moduli dominate.
    """
    if len(lx) != 3 or len(ly) != 3:
        raise Z2RepError("witness_diagonal expects eigenvalue triples")
    rx = _log_abs(lx[0]) - _log_abs(lx[1])
    ry = _log_abs(ly[0]) - _log_abs(ly[1])
    grow_x = _log_abs(lx[0])
    grow_y = _log_abs(ly[0])
    bound = settings.DIAGONAL_LINEAR_FORM_BOUND

    def oriented(n: int, m: int) -> Tuple[int, int]:
        growth = n * grow_x + m * grow_y
        if abs(growth) < 1e-12:
            raise Z2RepError("degenerate input: the bounded-gap direction does not escape to infinity")
        return (n, m) if growth > 0 else (-n, -m)

    if rx == 0 and ry == 0:
        raise Z2RepError("degenerate input: both log-ratios vanish")
    if rx == 0 or ry == 0:
        base = oriented(1, 0) if rx == 0 else oriented(0, 1)
        t = 1
        while True:
            yield base[0] * t, base[1] * t
            t += 1

    beta = -ry / rx
    seen = set()
    for p, q, exact in float_convergents(beta):
        if q == 0:
            continue
        if abs(p * rx + q * ry) > bound:
            continue
        pair = oriented(p, q)
        if pair in seen:
            continue
        seen.add(pair)
        if exact:
            t = 1
            while True:
                yield pair[0] * t, pair[1] * t
                t += 1
        yield pair


def diagonal_element(lx: Sequence[Fraction], ly: Sequence[Fraction], n: int, m: int) -> RationalMatrix:
    return RationalMatrix.diag(*[Fraction(a) ** n * Fraction(b) ** m for a, b in zip(lx, ly)])


def witness_jordan(lx: Fraction, ly: Fraction, alpha_y: Fraction) -> Iterator[Tuple[int, int]]:
    """
    Pairs (n, m) with n/lx + alpha_y m/ly = 0 and |lx^n ly^m| growing.

    The rational inputs make the linear form vanish exactly on a line, so the
    family is the positive multiples of its primitive direction.
    """
    lx = parse_rational(lx)
    ly = parse_rational(ly)
    alpha_y = parse_rational(alpha_y)
    if lx == 0 or ly == 0:
        raise Z2RepError("eigenvalues must be nonzero")
    if abs(lx) == 1 and abs(ly) == 1:
        raise Z2RepError("impossible divergence: |lambda_x| = |lambda_y| = 1")
    n0, m0 = primitive_integer_direction(alpha_y / ly, 1 / lx)
    growth = n0 * _log_abs(lx) + m0 * _log_abs(ly)
    if abs(growth) < 1e-12:
        raise Z2RepError("impossible divergence: the vanishing direction keeps |lambda_x^n lambda_y^m| = 1")
    if growth < 0:
        n0, m0 = -n0, -m0
    t = 1
    while True:
        yield n0 * t, m0 * t
        t += 1


def jordan_element(lx: Fraction, ly: Fraction, alpha_y: Fraction, n: int, m: int) -> RationalMatrix:
    """lx^n ly^m [[1, n/lx + alpha_y m/ly, 0], [0, 1, 0], [0, 0, (lx^n ly^m)^-3]]."""
    lx = parse_rational(lx)
    ly = parse_rational(ly)
    alpha_y = parse_rational(alpha_y)
    s = lx ** n * ly ** m
    shear = n / lx + alpha_y * m / ly
    return RationalMatrix([[s, s * shear, 0], [0, s, 0], [0, 0, s ** -2]])


def mixed_basis(rep: Z2UnipotentRep) -> Dict[str, str]:
    """
    Basis used by reduce_mixed: the generator with a = c = 0 is replaced by
    the product xy, the other is kept.
    """
    x_full = rep.a_x * rep.c_x != 0
    y_full = rep.a_y * rep.c_y != 0
    if rep.x_is_zero_type() and y_full:
        return {"step": "mixed_reduction", "x'": "x y", "y'": "y"}
    if rep.y_is_zero_type() and x_full:
        return {"step": "mixed_reduction", "x'": "x", "y'": "x y"}
    raise Z2RepError("reduce_mixed needs one generator with a = c = 0 and the other with a*c != 0")


def reduce_mixed(rep: Z2UnipotentRep) -> Z2UnipotentRep:
    """The rep on the mixed_basis; both new generators have a*c != 0."""
    basis = mixed_basis(rep)
    prod = z2_element(rep, 1, 1)
    if basis["x'"] == "x y":
        return Z2UnipotentRep(prod.x, prod.y, prod.z, rep.a_y, rep.b_y, rep.c_y)
    return Z2UnipotentRep(rep.a_x, rep.b_x, rep.c_x, prod.x, prod.y, prod.z)


def dual_rep(generators: Mapping[str, RationalMatrix]) -> Dict[str, RationalMatrix]:
    """Inverse transpose of each generator (d = 3)."""
    out: Dict[str, RationalMatrix] = {}
    for name, g in generators.items():
        if g.dim != 3:
            raise Z2RepError("dual_rep is defined for d = 3")
        try:
            out[name] = g.inverse_transpose()
        except RationalMatrixError as e:
            raise Z2RepError(f"Generator '{name}' is not invertible") from e
    return out


def dual_z2_rep(rep: Z2UnipotentRep) -> Z2UnipotentRep:
    """
    The dual rep brought back to upper unitriangular form by the antidiagonal
    permutation (an isometry, so singular values are untouched):
    (a, b, c) -> (-c, ac - b, -a).
    """
    return Z2UnipotentRep(-rep.c_x, rep.a_x * rep.c_x - rep.b_x, -rep.a_x,
                          -rep.c_y, rep.a_y * rep.c_y - rep.b_y, -rep.a_y)


def abelian_sphere(r: int) -> List[Tuple[int, int]]:
    """Pairs (n, m) with |n| + |m| = r, in a fixed order."""
    if r == 0:
        return [(0, 0)]
    out = []
    for n in range(-r, r + 1):
        rest = r - abs(n)
        out.append((n, rest))
        if rest:
            out.append((n, -rest))
    return out


def is_lattice_horospherical(generators: Mapping[str, RationalMatrix]) -> Optional[str]:
    """
    "LINE" or "PLANE" when both unipotent generators lie in one minimal
    horospherical subgroup of SL_3 (zero (2,3) resp. zero (1,2) entries), else None.
    """
    try:
        triples = [UnipotentTriple.from_matrix(g) for g in generators.values()]
    except Z2RepError:
        return None
    if all(t.z == 0 for t in triples):
        return "LINE"
    if all(t.x == 0 for t in triples):
        return "PLANE"
    return None


class VerdictKind(str, Enum):
    REGULAR_LATTICE_LINE_TYPE = "REGULAR_LATTICE_LINE_TYPE"
    REGULAR_LATTICE_PLANE_TYPE = "REGULAR_LATTICE_PLANE_TYPE"
    NOT_REGULAR = "NOT_REGULAR"
    NOT_FAITHFUL_OR_NOT_DISCRETE = "NOT_FAITHFUL_OR_NOT_DISCRETE"


@dataclass
class WitnessSequence:
    """
    Closed-form family index -> (p, q), the exponents of x^p y^q in the
    ORIGINAL generators, plus the bound its sigma ratio obeys.
    """
    kind: WitnessKind
    description: str
    bound: float
    exponent_fn: Callable[[int], Tuple[int, int]] = field(repr=False, compare=False)
    indices: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    def exponents(self, index: int) -> Tuple[int, int]:
        return self.exponent_fn(index)

    def word(self, index: int) -> GroupWord:
        p, q = self.exponents(index)
        return GroupWord([("x", p), ("y", q)])

    def to_dict(self, sample: int = 5) -> Dict[str, Any]:
        out = {"kind": self.kind.value, "description": self.description, "bound": self.bound,
               "indices": self.indices, "details": dict(self.details)}
        first = self.details.get("first_index", 1)
        step = self.details.get("index_step", 1)
        out["sample_words"] = [str(self.word(first + step * i)) for i in range(sample)]
        return out

@dataclass
class Verdict:
    kind: VerdictKind
    witness: Optional[WitnessSequence] = None
    normalization: List[Dict[str, str]] = field(default_factory=list)
    constants: Dict[str, Optional[str]] = field(default_factory=dict)
    reason: str = ""

    def __post_init__(self):
        if self.kind == VerdictKind.NOT_REGULAR and self.witness is None:
            raise Z2RepError("NOT_REGULAR verdicts carry a witness")
        if self.kind in (VerdictKind.REGULAR_LATTICE_LINE_TYPE, VerdictKind.REGULAR_LATTICE_PLANE_TYPE) \
                and self.witness is not None:
            raise Z2RepError("REGULAR verdicts carry no witness")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.kind.value,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "normalization": list(self.normalization),
            "constants": dict(self.constants),
            "reason": self.reason,
        }

import logging
import re
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from core.rational_matrix import RationalMatrix, RationalMatrixError

logger = logging.getLogger(__name__)

Letter = Tuple[str, int]

_TOKEN_RE = re.compile(r"\S+")
_LETTER_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\^([+-]?\d+))?$")
IDENTITY_TOKEN = "1"


class GroupWordError(Exception):
    """Custom exception for word construction and evaluation errors."""
    pass


class WordParseError(GroupWordError):
    """Raised for malformed word text; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


def _reduce(letters: Iterable[Letter]) -> Tuple[Letter, ...]:
    stack: List[Letter] = []
    for name, exp in letters:
        if exp == 0:
            continue
        if stack and stack[-1][0] == name:
            merged = stack[-1][1] + exp
            stack.pop()
            if merged != 0:
                stack.append((name, merged))
        else:
            stack.append((name, exp))
    return tuple(stack)


class GroupWord:
    """
    Freely reduced word in named generators, stored as (name, exponent) letters.

    The constructor canonicalizes: adjacent letters with the same name merge and
    zero exponents vanish, so equal free-group elements have equal letters.
    """
    __slots__ = ("letters",)

    def __init__(self, letters: Iterable[Letter] = ()):
        clean = []
        for name, exp in letters:
            if not isinstance(exp, int) or isinstance(exp, bool):
                raise GroupWordError(f"Exponent for '{name}' must be an integer, got {exp!r}")
            clean.append((str(name), exp))
        self.letters: Tuple[Letter, ...] = _reduce(clean)

    @classmethod
    def identity(cls) -> "GroupWord":
        return cls(())

    @classmethod
    def from_steps(cls, steps: Iterable[Letter]) -> "GroupWord":
        return cls(steps)

    def steps(self) -> List[Letter]:
        """Expansion into unit letters (name, +1 / -1)."""
        out: List[Letter] = []
        for name, exp in self.letters:
            unit = 1 if exp > 0 else -1
            out.extend([(name, unit)] * abs(exp))
        return out

    def __len__(self) -> int:
        return sum(abs(exp) for _, exp in self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.letters + other.letters)

    def __pow__(self, k: int) -> "GroupWord":
        if k >= 0:
            return GroupWord(self.letters * k)
        return GroupWord(self.inverse().letters * (-k))

    def inverse(self) -> "GroupWord":
        return GroupWord((name, -exp) for name, exp in reversed(self.letters))

    def is_identity(self) -> bool:
        return not self.letters

    def generator_names(self) -> List[str]:
        return sorted({name for name, _ in self.letters})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GroupWord) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return IDENTITY_TOKEN
        return " ".join(name if exp == 1 else f"{name}^{exp}" for name, exp in self.letters)

    def __repr__(self) -> str:
        return f"GroupWord('{self}')"


def parse_word(text: str) -> GroupWord:
    """
    Parses whitespace-separated tokens `name` or `name^k` (k a nonzero integer).

    The empty string and the token "1" denote the identity.
    """
    letters: List[Letter] = []
    for line_no, line in enumerate(text.splitlines() or [""], start=1):
        for match in _TOKEN_RE.finditer(line):
            token = match.group(0)
            column = match.start() + 1
            if token == IDENTITY_TOKEN:
                continue
            parsed = _LETTER_RE.match(token)
            if not parsed:
                raise WordParseError(f"Malformed token '{token}'", line_no, column)
            name, exp_text = parsed.group(1), parsed.group(2)
            exp = int(exp_text) if exp_text is not None else 1
            if exp == 0:
                raise WordParseError(f"Zero exponent in token '{token}'", line_no, column)
            letters.append((name, exp))
    return GroupWord(letters)


def word_eval(generators: Mapping[str, RationalMatrix], w: GroupWord,
              inverse_cache: Optional[Dict[str, RationalMatrix]] = None) -> RationalMatrix:
    """
    Exact product of generator powers in word order.

    Raises GroupWordError for unbound names or non-invertible generators.
    """
    if not generators:
        raise GroupWordError("Cannot evaluate a word without generators.")
    dim = next(iter(generators.values())).dim
    result = RationalMatrix.identity(dim)
    cache = inverse_cache if inverse_cache is not None else {}
    for name, exp in w.letters:
        if name not in generators:
            raise GroupWordError(f"Unbound generator name '{name}' in word '{w}'")
        g = generators[name]
        if exp < 0:
            if name not in cache:
                try:
                    cache[name] = g.inverse()
                except RationalMatrixError as e:
                    raise GroupWordError(f"Generator '{name}' is not invertible") from e
            g = cache[name]
        result = result @ g.power(abs(exp))
    return result


def check_generators(generators: Mapping[str, RationalMatrix]) -> None:
    """Validates a generator map: nonempty, common dimension, invertible."""
    if not generators:
        raise GroupWordError("Empty generator set.")
    dims = {g.dim for g in generators.values()}
    if len(dims) != 1:
        raise GroupWordError(f"Generators have mixed dimensions {sorted(dims)}")
    for name, g in generators.items():
        if not _LETTER_RE.match(name) or "^" in name:
            raise GroupWordError(f"Invalid generator name '{name}'")
        if g.det() == 0:
            raise GroupWordError(f"Generator '{name}' is not invertible")


def step_order(names: Sequence[str]) -> List[Letter]:
    """Deterministic step alphabet: each generator then its inverse, in the given order."""
    out: List[Letter] = []
    for name in names:
        out.append((name, 1))
        out.append((name, -1))
    return out

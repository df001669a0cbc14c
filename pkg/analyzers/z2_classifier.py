import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Tuple

from analyzers.base_analyzer import BaseAnalyzer
from core.json_utils import format_float
from core.rational_matrix import format_rational
from core.singular_values import sigma_gap, sigma_gap_bounds
from core.unipotent_z2 import (UnipotentTriple, Verdict, VerdictKind, WitnessKind, WitnessSequence, Z2RepError,
                               Z2UnipotentRep, abelian_sphere, claim2_exponent, lambda_normalize, lemma1div_ratio,
                               mixed_basis, reduce_mixed, witness_z_zero, z2_element)

logger = logging.getLogger(__name__)

ExponentFn = Callable[[int], Tuple[int, int]]


@dataclass
class WitnessPoint:
    """One evaluated member of a witness family."""
    index: int
    exponents: Tuple[int, int]
    triple: UnipotentTriple
    ratio: Optional[Fraction]
    gap: float
    gap_bracket: Tuple[float, float]
    frobenius_sq: Fraction

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "word": f"x^{self.exponents[0]} y^{self.exponents[1]}",
            "triple": [format_rational(v) for v in (self.triple.x, self.triple.y, self.triple.z)],
            "lemma_ratio": None if self.ratio is None else format_rational(self.ratio),
            "gap": format_float(self.gap),
            "gap_bracket": [format_float(b) for b in self.gap_bracket],
            "frobenius_sq": format_rational(self.frobenius_sq),
        }


class _LazyFamily:
    """Random access into a lazily generated family, 1-based."""

    def __init__(self, source: Iterator[Tuple[int, int]], transform: Callable[[int, int], Tuple[int, int]]):
        self._source = source
        self._transform = transform
        self._items: List[Tuple[int, int]] = []

    def __call__(self, index: int) -> Tuple[int, int]:
        if index < 1:
            raise Z2RepError(f"Family index must be >= 1, got {index}")
        while len(self._items) < index:
            self._items.append(self._transform(*next(self._source)))
        return self._items[index - 1]


def _to_original(basis: Optional[Dict[str, str]]) -> Callable[[int, int], Tuple[int, int]]:
    """Exponents on the reduced basis -> exponents of x^p y^q in the original generators."""
    if basis is None:
        return lambda n, m: (n, m)
    if basis["x'"] == "x y":
        # (xy)^n y^m = x^n y^(n+m)
        return lambda n, m: (n, n + m)
    # x^n (xy)^m = x^(n+m) y^m
    return lambda n, m: (n + m, m)


class Z2Classifier(BaseAnalyzer):
    """Decides regularity of a unipotent Z^2 representation in normal form and attaches witnesses."""

    def __init__(self, config: Optional[dict] = None):
        super().__init__(analyzer_name="Z2Classifier", config=config, jobs=1)

    def classify(self, rep: Z2UnipotentRep) -> Verdict:
        self._log_input(rep=rep.to_dict())
        constants = rep.constants()

        if rep.x_is_zero_type() and rep.y_is_zero_type():
            verdict = Verdict(VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE, constants=constants,
                              reason="image rank < 2: both generators lie in the center")
        elif rep.a_x == 0 and rep.a_y == 0:
            det = rep.b_x * rep.c_y - rep.c_x * rep.b_y
            verdict = (Verdict(VerdictKind.REGULAR_LATTICE_PLANE_TYPE, constants=constants,
                               reason="lattice in the minimal horospherical subgroup fixing a plane")
                       if det != 0 else
                       Verdict(VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE, constants=constants,
                               reason="image rank < 2: det[[b_x, c_x], [b_y, c_y]] = 0"))
        elif rep.c_x == 0 and rep.c_y == 0:
            det = rep.a_x * rep.b_y - rep.b_x * rep.a_y
            verdict = (Verdict(VerdictKind.REGULAR_LATTICE_LINE_TYPE, constants=constants,
                               reason="lattice in the minimal horospherical subgroup fixing a line")
                       if det != 0 else
                       Verdict(VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE, constants=constants,
                               reason="image rank < 2: det[[a_x, b_x], [a_y, b_y]] = 0"))
        else:
            x_full = rep.a_x * rep.c_x != 0
            y_full = rep.a_y * rep.c_y != 0
            if x_full and y_full:
                verdict = self._claim2(rep, basis=None)
            elif (x_full and rep.y_is_zero_type()) or (y_full and rep.x_is_zero_type()):
                verdict = self._claim2(rep, basis=mixed_basis(rep))
            else:
                verdict = Verdict(VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE, constants=constants,
                                  reason="no normal form applies")
        logger.info(f"[{self.analyzer_name}] Verdict {verdict.kind.value}: {verdict.reason}")
        self._log_output(verdict.to_dict())
        return verdict

    def _claim2(self, rep: Z2UnipotentRep, basis: Optional[Dict[str, str]]) -> Verdict:
        normalization: List[Dict[str, str]] = []
        work = rep
        if basis is not None:
            work = reduce_mixed(rep)
            normalization.append(basis)
        work, record = lambda_normalize(work)
        normalization.append(record)
        constants = work.constants()
        to_original = _to_original(basis)
        z = work.Z_xy

        if z == 0:
            family = _LazyFamily(witness_z_zero(work), to_original)
            witness = WitnessSequence(
                kind=WitnessKind.Z_ZERO_DISCRETENESS,
                description="k-th pair (k_m, r_m) with |k_m a_x + r_m a_y| <= 1; rho(x^k_m y^r_m) stays bounded",
                bound=self._norm_bound(rep, family),
                exponent_fn=family,
                indices="k >= 1",
                details={"first_index": 1, "index_step": 1},
            )
            return Verdict(VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE, witness=witness, normalization=normalization,
                           constants=constants, reason="Z_xy = 0: a bounded family of distinct words")

        sign = -1 if z > 0 else 1

        def exponents(m: int) -> Tuple[int, int]:
            return to_original(claim2_exponent(work, m), m)

        kind = WitnessKind.CLAIM2 if basis is None else WitnessKind.MIXED_REDUCED
        bound = self._gap_bound(rep, exponents, sign)
        witness = WitnessSequence(
            kind=kind,
            description=("m -> x'^n_m y'^m with n_m = floor(-m a_y/a_x + sqrt|m Z_xy|/a_x) "
                         "on the normalized basis, m*Z_xy < 0"),
            bound=bound,
            exponent_fn=exponents,
            indices="m < 0" if sign < 0 else "m > 0",
            details={"first_index": sign, "index_step": sign, "Z_xy": format_rational(z)},
        )
        return Verdict(VerdictKind.NOT_REGULAR, witness=witness, normalization=normalization, constants=constants,
                       reason="sigma1/sigma2 stays bounded along the witness family")

    def _gap_bound(self, rep: Z2UnipotentRep, exponents: ExponentFn, sign: int) -> float:
        """factor * max gap over the second half of the scan range, floored."""
        scan = self._get_config_value("WITNESS_SCAN_RANGE")
        gaps = [sigma_gap(z2_element(rep, *exponents(sign * k)).to_matrix()) for k in range(1, scan + 1)]
        estimate = max(gaps[len(gaps) // 2:])
        bound = max(self._get_config_value("WITNESS_BOUND_FLOOR"), self._get_config_value("WITNESS_BOUND_FACTOR") * estimate)
        logger.debug(f"[{self.analyzer_name}] witness gap estimate {estimate:.6g}, bound {bound:.6g}")
        return bound

    def _norm_bound(self, rep: Z2UnipotentRep, family: ExponentFn) -> float:
        scan = self._get_config_value("WITNESS_SCAN_RANGE")
        norms = [float(z2_element(rep, *family(k)).to_matrix().frobenius_norm_sq()) ** 0.5
                 for k in range(1, scan + 1)]
        return max(norms)

    def witness_family(self, rep: Z2UnipotentRep, indices: Iterable[int],
                       witness: Optional[WitnessSequence] = None) -> List[WitnessPoint]:
        """Evaluates the witness of rep (classified on demand) at the given indices."""
        if witness is None:
            witness = self.classify(rep).witness
        if witness is None:
            raise Z2RepError("rep has no witness family (it is regular or has rank-deficient image)")
        points = []
        for index in indices:
            p, q = witness.exponents(index)
            triple = z2_element(rep, p, q)
            g = triple.to_matrix()
            try:
                ratio = lemma1div_ratio(triple)
            except Z2RepError:
                ratio = None
            points.append(WitnessPoint(index, (p, q), triple, ratio, sigma_gap(g), sigma_gap_bounds(g),
                                       g.frobenius_norm_sq()))
        return points

    def ratio_profile(self, rep: Z2UnipotentRep, radius: int) -> List[Optional[Fraction]]:
        """Minimum exact lemma ratio over each abelian sphere 1..radius (None if the sphere meets the kernel)."""
        profile: List[Optional[Fraction]] = []
        for r in range(1, radius + 1):
            try:
                profile.append(min(lemma1div_ratio(z2_element(rep, n, m)) for n, m in abelian_sphere(r)))
            except Z2RepError:
                profile.append(None)
        return profile


def classify_z2(rep: Z2UnipotentRep, config: Optional[dict] = None) -> Verdict:
    return Z2Classifier(config=config).classify(rep)


def witness_family(rep: Z2UnipotentRep, indices: Iterable[int],
                   witness: Optional[WitnessSequence] = None) -> List[WitnessPoint]:
    return Z2Classifier().witness_family(rep, indices, witness)


def dual_verdict_kind(kind: VerdictKind) -> VerdictKind:
    """Verdict kind expected for the dual representation."""
    swap = {VerdictKind.REGULAR_LATTICE_LINE_TYPE: VerdictKind.REGULAR_LATTICE_PLANE_TYPE,
            VerdictKind.REGULAR_LATTICE_PLANE_TYPE: VerdictKind.REGULAR_LATTICE_LINE_TYPE}
    return swap.get(kind, kind)


def first_indices(witness: WitnessSequence, count: int) -> List[int]:
    first = witness.details.get("first_index", 1)
    step = witness.details.get("index_step", 1)
    return [first + step * i for i in range(count)]

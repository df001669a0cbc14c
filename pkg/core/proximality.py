import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import sympy as sp

from config import settings
from core.flag_geometry import FlagGeometryError, ProjFlag, ProjHyperplane, ProjPoint, _flag_from_vectors
from core.rational_matrix import RationalMatrix

logger = logging.getLogger(__name__)

_ROOT_DIGITS = 30


class ProximalityError(Exception):
    """Custom exception for eigenvalue and proximality computations."""
    pass


@dataclass
class ProximalityReport:
    """
    Eigenvalue data of g. The attracting point and repelling hyperplane exist
    when g is proximal; the attracting flag (point, kernel of the bottom left
    eigenvector) only when g^-1 is proximal as well.
    """
    is_proximal: bool
    top_eigenvalue_modulus: float
    second_modulus: float
    moduli: List[float] = field(default_factory=list)
    top_eigenvalue: Optional[float] = None
    attracting_point: Optional[ProjPoint] = None
    repelling_hyperplane: Optional[ProjHyperplane] = None
    attracting: Optional[ProjFlag] = None

    def to_dict(self):
        return {
            "is_proximal": self.is_proximal,
            "top_eigenvalue_modulus": self.top_eigenvalue_modulus,
            "second_modulus": self.second_modulus,
            "moduli": list(self.moduli),
            "attracting_point": None if self.attracting_point is None else list(self.attracting_point.direction),
            "repelling_conormal": (None if self.repelling_hyperplane is None
                                   else list(self.repelling_hyperplane.conormal)),
        }


def _sympy_matrix(g: RationalMatrix) -> sp.Matrix:
    return sp.Matrix([[sp.Rational(q.numerator, q.denominator) for q in row] for row in g.rows])


def eigenvalue_roots(g: RationalMatrix) -> List[complex]:
    """
    Roots of the exact characteristic polynomial, with multiplicity.

    Square-free factors are root-found separately so repeated eigenvalues
    come back as exact repeats.
    """
    lam = sp.Symbol("lam")
    poly = _sympy_matrix(g).charpoly(lam)
    _, factors = sp.sqf_list(poly.as_expr(), lam)
    roots: List[complex] = []
    for factor, multiplicity in factors:
        factor_poly = sp.Poly(factor, lam)
        if factor_poly.degree() == 0:
            continue
        for r in factor_poly.nroots(n=_ROOT_DIGITS, maxsteps=200):
            roots.extend([complex(r)] * multiplicity)
    return roots


def _null_vector(a: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(a)
    return vh[-1]


def _eigenvectors(g: RationalMatrix, value: float) -> Tuple[np.ndarray, np.ndarray]:
    """Right and left eigenvectors for a simple real eigenvalue, on the scaled float matrix."""
    a, e = g.scaled_float_array()
    shifted = a - np.ldexp(value, -e) * np.eye(g.dim)
    return _null_vector(shifted), _null_vector(shifted.T)


def is_proximal(g: RationalMatrix) -> ProximalityReport:
    """Proximal iff the top eigenvalue modulus exceeds the second by the factor 1 + PROXIMAL_GAP."""
    if g.det() == 0:
        raise ProximalityError("is_proximal needs an invertible matrix")
    roots = sorted(eigenvalue_roots(g), key=abs, reverse=True)
    moduli = [abs(r) for r in roots]
    top, second = moduli[0], moduli[1]
    proximal = top > second * (1 + settings.PROXIMAL_GAP)
    report = ProximalityReport(proximal, top, second, moduli)
    if not proximal:
        return report

    lead = roots[0]
    if abs(lead.imag) > 1e-12 * max(1.0, abs(lead)):
        raise ProximalityError(f"Dominant eigenvalue {lead} is not real")
    report.top_eigenvalue = lead.real
    try:
        right, left = _eigenvectors(g, lead.real)
        report.attracting_point = ProjPoint.from_vector(right)
        report.repelling_hyperplane = ProjHyperplane.from_covector(left)
    except FlagGeometryError as e:
        raise ProximalityError(f"Eigenvector computation failed: {e}") from e

    bottom = roots[-1]
    if moduli[-1] * (1 + settings.PROXIMAL_GAP) < moduli[-2] and abs(bottom.imag) <= 1e-12 * max(1.0, abs(bottom)):
        # left eigenvector of the bottom eigenvalue annihilates the top right eigenvector;
        # read it off g^-1 where that eigenvalue is dominant
        _, bottom_left = _eigenvectors(g.inverse(), 1.0 / bottom.real)
        try:
            report.attracting = _flag_from_vectors(right, bottom_left)
        except FlagGeometryError as e:
            logger.debug(f"Attracting flag not formed: {e}")
    return report


def is_biproximal(g: RationalMatrix) -> Tuple[ProximalityReport, ProximalityReport]:
    """Reports for g and g^-1."""
    return is_proximal(g), is_proximal(g.inverse())

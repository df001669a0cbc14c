import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from config import settings
from core.rational_matrix import RationalMatrix
from core.singular_values import SingularValueError, svd_frames

logger = logging.getLogger(__name__)

_SIGN_EPS = 1e-12


class FlagGeometryError(Exception):
    """Custom exception for projective and flag geometry errors."""
    pass


class NoContractionAxisError(FlagGeometryError):
    """Raised by attracting_flag when sigma1 and sigma2 are not separated."""
    pass


def _canonical_unit(vector: Sequence[float]) -> Tuple[float, ...]:
    arr = np.asarray(vector, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise FlagGeometryError(f"Expected a vector of length >= 2, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if not np.isfinite(norm) or norm == 0.0:
        raise FlagGeometryError("Zero or non-finite vector does not define a projective point.")
    arr = arr / norm
    for x in arr:
        if abs(x) > _SIGN_EPS:
            if x < 0:
                arr = -arr
            break
    return tuple(float(x) for x in arr)


def _check_unit(vector: Tuple[float, ...], kind: str):
    norm = math.sqrt(sum(x * x for x in vector))
    if abs(norm - 1.0) > settings.UNIT_NORM_TOLERANCE:
        raise FlagGeometryError(f"{kind} must be stored as a unit vector, got norm {norm!r}")


@dataclass(frozen=True)
class ProjPoint:
    """Point of P(R^d): unit direction, sign fixed by the first nonzero coordinate."""
    direction: Tuple[float, ...]

    def __post_init__(self):
        _check_unit(self.direction, "ProjPoint")

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "ProjPoint":
        return cls(_canonical_unit(vector))

    @classmethod
    def basis(cls, dim: int, index: int) -> "ProjPoint":
        vec = [0.0] * dim
        vec[index] = 1.0
        return cls(tuple(vec))

    @property
    def dim(self) -> int:
        return len(self.direction)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)


@dataclass(frozen=True)
class ProjHyperplane:
    """Hyperplane ker(phi) of P(R^d) stored by its unit conormal phi."""
    conormal: Tuple[float, ...]

    def __post_init__(self):
        _check_unit(self.conormal, "ProjHyperplane")

    @classmethod
    def from_covector(cls, covector: Sequence[float]) -> "ProjHyperplane":
        return cls(_canonical_unit(covector))

    @classmethod
    def kernel_of_basis(cls, dim: int, index: int) -> "ProjHyperplane":
        vec = [0.0] * dim
        vec[index] = 1.0
        return cls(tuple(vec))

    @property
    def dim(self) -> int:
        return len(self.conormal)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.conormal, dtype=float)

    def evaluate(self, p: ProjPoint) -> float:
        _check_dims(self.dim, p.dim)
        return float(self.as_array() @ p.as_array())


@dataclass(frozen=True)
class ProjFlag:
    """Incident (point, hyperplane) pair."""
    point: ProjPoint
    hyperplane: ProjHyperplane

    def __post_init__(self):
        _check_dims(self.point.dim, self.hyperplane.dim)
        pairing = abs(self.hyperplane.evaluate(self.point))
        if pairing > settings.INCIDENCE_TOLERANCE:
            raise FlagGeometryError(f"Point does not lie on hyperplane (|phi(p)| = {pairing:.3e})")

    @property
    def dim(self) -> int:
        return self.point.dim


@dataclass(frozen=True)
class ContractionLimit:
    """Attracting flag of g and the repelling flag (the attracting flag of g^-1)."""
    attracting: ProjFlag
    repelling: ProjFlag
    log_gap: float


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise FlagGeometryError(f"Dimension mismatch: {a} vs {b}")


def fs_distance(p: ProjPoint, q: ProjPoint) -> float:
    """Fubini-Study distance arccos|<p, q>| in [0, pi/2]."""
    _check_dims(p.dim, q.dim)
    c = abs(float(p.as_array() @ q.as_array()))
    return math.acos(min(1.0, c))


def opposition_margin(f: ProjFlag, f_other: ProjFlag) -> float:
    """min(|phi'(p)|, |phi(p')|); positive iff the flags are opposite."""
    _check_dims(f.dim, f_other.dim)
    return min(abs(f_other.hyperplane.evaluate(f.point)), abs(f.hyperplane.evaluate(f_other.point)))


def flag_opposite(f: ProjFlag, f_other: ProjFlag, eps: Optional[float] = None) -> bool:
    threshold = settings.OPPOSITION_EPS if eps is None else eps
    _check_dims(f.dim, f_other.dim)
    return (abs(f_other.hyperplane.evaluate(f.point)) > threshold
            and abs(f.hyperplane.evaluate(f_other.point)) > threshold)


def antipodal_sets(a: Sequence[ProjFlag], b: Sequence[ProjFlag], eps: Optional[float] = None) -> Tuple[bool, float]:
    """All-pairs opposition check; returns (all opposite, minimum margin)."""
    if not a or not b:
        raise FlagGeometryError("antipodal_sets needs two nonempty flag lists")
    dims = {f.dim for f in a} | {f.dim for f in b}
    if len(dims) != 1:
        raise FlagGeometryError(f"Dimension mismatch among flags: {sorted(dims)}")
    threshold = settings.OPPOSITION_EPS if eps is None else eps
    pa = np.array([f.point.direction for f in a])
    ha = np.array([f.hyperplane.conormal for f in a])
    pb = np.array([f.point.direction for f in b])
    hb = np.array([f.hyperplane.conormal for f in b])
    # margins[i, j] = min(|phi_b_j(p_a_i)|, |phi_a_i(p_b_j)|)
    m1 = np.abs(pa @ hb.T)
    m2 = np.abs(ha @ pb.T)
    margins = np.minimum(m1, m2)
    min_margin = float(margins.min())
    return min_margin > threshold, min_margin


def attracting_flag(g: RationalMatrix) -> ContractionLimit:
    """
    Attracting and repelling flags read off the singular value decomposition.

    attracting = (u_1, ker u_d^T), repelling = (v_d, ker v_1^T), so the
    repelling flag of g is the attracting flag of g^-1.
    """
    try:
        frames = svd_frames(g)
    except SingularValueError as e:
        raise FlagGeometryError(f"Cannot compute singular frames: {e}") from e
    log_sigma = frames.log_sigma
    log_gap = log_sigma[0] - log_sigma[1]
    if log_gap <= math.log1p(settings.GAP_EPS):
        raise NoContractionAxisError(
            f"No contraction axis: sigma1/sigma2 = {math.exp(log_gap):.12g} is not > 1 + {settings.GAP_EPS}")
    attracting = _flag_from_vectors(frames.left[0], frames.left[-1])
    repelling = _flag_from_vectors(frames.right[-1], frames.right[0])
    return ContractionLimit(attracting=attracting, repelling=repelling, log_gap=log_gap)


def _flag_from_vectors(point: np.ndarray, conormal: np.ndarray) -> ProjFlag:
    p = np.asarray(point, dtype=float)
    phi = np.asarray(conormal, dtype=float)
    phi = phi / np.linalg.norm(phi)
    p = p / np.linalg.norm(p)
    # singular frames are orthonormal up to rounding; remove the residual pairing
    p = p - (p @ phi) * phi
    return ProjFlag(ProjPoint.from_vector(p), ProjHyperplane.from_covector(phi))


def _chart_index(conormal: np.ndarray) -> int:
    return int(np.argmax(np.abs(conormal)))


def affine_chart(excluded: ProjHyperplane, p: ProjPoint, margin: Optional[float] = None) -> Tuple[float, ...]:
    """
    Affine coordinates of p in the chart P(R^d) minus P(ker phi).

    The point is scaled to phi(p) = 1 and the coordinate where |phi| is
    largest is dropped.
    """
    _check_dims(excluded.dim, p.dim)
    limit = settings.CHART_MARGIN if margin is None else margin
    phi = excluded.as_array()
    vec = p.as_array()
    pairing = float(phi @ vec)
    if abs(pairing) <= limit:
        raise FlagGeometryError("Point lies at infinity for this affine chart.")
    scaled = vec / pairing
    drop = _chart_index(phi)
    return tuple(float(x) for k, x in enumerate(scaled) if k != drop)


def chart_translation(u: RationalMatrix, conormal: Sequence[Fraction]) -> Optional[Tuple[Fraction, ...]]:
    """
    Exact translation vector of u in the chart excluding ker(phi), or None.

    u acts on the chart as a translation iff phi u = phi and u - I = t phi
    for a vector t; the chart translation is t without the dropped coordinate.
    """
    phi = [Fraction(x) for x in conormal]
    if len(phi) != u.dim:
        raise FlagGeometryError(f"Dimension mismatch: {len(phi)} vs {u.dim}")
    if all(x == 0 for x in phi):
        raise FlagGeometryError("Zero conormal does not define a hyperplane.")
    n = u.dim
    phi_u = [sum((phi[i] * u[i, j] for i in range(n)), Fraction(0)) for j in range(n)]
    if phi_u != phi:
        return None
    drop = max(range(n), key=lambda k: abs(phi[k]))
    t = [(u[i, drop] - (1 if i == drop else 0)) / phi[drop] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if u[i, j] - (1 if i == j else 0) != t[i] * phi[j]:
                return None
    return tuple(x for k, x in enumerate(t) if k != drop)


def act(g: RationalMatrix, p: ProjPoint) -> ProjPoint:
    """Projective action of g on a point."""
    _check_dims(g.dim, p.dim)
    a, _ = g.scaled_float_array()
    return ProjPoint.from_vector(a @ p.as_array())



import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from config import settings
from core.rational_matrix import RationalMatrix, RationalMatrixError, log_abs

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)


class SingularValueError(Exception):
    """Custom exception for singular value computations."""
    pass


@dataclass(frozen=True)
class SingularTriple:
    """Descending singular values with an absolute per-entry error bound."""
    sigma: Tuple[float, ...]
    certified_error: float

    @property
    def gap(self) -> float:
        """sigma1 / sigma2."""
        return self.sigma[0] / self.sigma[1]


@dataclass(frozen=True)
class CartanVector:
    """Log-singular values, descending, summing to log|det| (0 for SL_d)."""
    mu: Tuple[float, ...]

    def reversed_negated(self) -> "CartanVector":
        return CartanVector(tuple(-x for x in reversed(self.mu)))

    @property
    def log_gap(self) -> float:
        return self.mu[0] - self.mu[1]


@dataclass(frozen=True)
class SingularFrames:
    """
    Singular data with frames: g = sum sigma_i u_i v_i^T.

    `left` and `right` hold u_i and v_i as rows, in the order of `log_sigma`.
    The top and bottom vectors come from separate Jacobi runs on g and g^-1
    so both ends keep full relative accuracy.
    """
    log_sigma: Tuple[float, ...]
    left: np.ndarray
    right: np.ndarray
    certified_error: float


def _one_sided_jacobi(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float, int]:
    """
    Cyclic Jacobi on a^T a, applied implicitly as column rotations of a.

    Returns (sigma, left, right, off, rotations) with sigma descending, left
    and right vectors as rows, `off` the residual off-diagonal Frobenius mass
    of the implicit a^T a after the last sweep.
    """
    n = a.shape[1]
    u = a.astype(float).copy()
    v = np.eye(n)
    tol = settings.JACOBI_TOLERANCE
    rotations = 0
    for sweep in range(settings.JACOBI_MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = float(u[:, i] @ u[:, i])
                beta = float(u[:, j] @ u[:, j])
                gamma = float(u[:, i] @ u[:, j])
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                ui = u[:, i].copy()
                u[:, i] = c * ui - s * u[:, j]
                u[:, j] = s * ui + c * u[:, j]
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * v[:, j]
                v[:, j] = s * vi + c * v[:, j]
                rotated = True
                rotations += 1
        if not rotated:
            break
    else:
        logger.warning(f"Jacobi did not converge in {settings.JACOBI_MAX_SWEEPS} sweeps")

    gram = u.T @ u
    off = float(math.sqrt(max(0.0, float(np.sum(gram * gram)) - float(np.sum(np.diag(gram) ** 2)))))
    sigma = np.sqrt(np.diag(gram))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    left = np.zeros((n, n))
    for k, idx in enumerate(order):
        left[k] = u[:, idx] / sigma[k] if sigma[k] > 0 else 0.0
    right = v[:, order].T.copy()
    return sigma, left, right, off, rotations


def _jacobi_error(sigma: np.ndarray, off: float, rotations: int, exact_input: bool) -> float:
    """A-posteriori absolute error bound in the units of `sigma`."""
    if off == 0.0 and rotations == 0 and exact_input:
        return 0.0
    smallest = float(sigma[-1]) if sigma[-1] > 0 else float("inf")
    residual = min(math.sqrt(off), off / smallest) if smallest > 0 else math.sqrt(off)
    return residual + 4 * len(sigma) * _EPS * float(sigma[0])


def svd_frames(g: RationalMatrix) -> SingularFrames:
    """
    Log-singular values and singular frames of an invertible rational matrix.

    sigma_d and its vectors are read from g^-1 (sigma_d(g) = 1/sigma_1(g^-1));
    for d >= 3 the value sigma_{d-1} is fixed by |det g| = prod sigma_i.
    """
    if g.dim > settings.SVD_MAX_DIM:
        raise SingularValueError(f"SVD only supported for d <= {settings.SVD_MAX_DIM}")
    det = g.det()
    if det == 0:
        raise SingularValueError("Singular values requested for a non-invertible matrix.")
    try:
        g_inv = g.inverse()
    except RationalMatrixError as e:
        raise SingularValueError("Matrix is not invertible") from e

    a, e = g.scaled_float_array()
    b, e_inv = g_inv.scaled_float_array()
    sig, left, right, off, rot = _one_sided_jacobi(a)
    sig_inv, left_inv, right_inv, off_inv, rot_inv = _one_sided_jacobi(b)
    n = g.dim
    ln2 = math.log(2.0)

    log_sigma = [math.log(s) + e * ln2 if s > 0 else float("-inf") for s in sig]
    log_sigma[-1] = -(math.log(sig_inv[0]) + e_inv * ln2)
    if n >= 3:
        log_det = log_abs(det)
        log_sigma[-2] = log_det - (sum(log_sigma[:-2]) + log_sigma[-1])
    elif n == 2:
        log_sigma[0] = log_abs(det) - log_sigma[-1]

    left = left.copy()
    right = right.copy()
    # g^-1 = V Sigma^-1 U^T: its top left vector is v_d, its top right vector is u_d
    left[-1] = right_inv[0]
    right[-1] = left_inv[0]
    if n >= 3:
        left[-2] = _complete_orthonormal(left, n - 2)
        right[-2] = _complete_orthonormal(right, n - 2)

    exact = g.is_exactly_float() and g_inv.is_exactly_float()
    err_g = _safe_ldexp(_jacobi_error(sig, off, rot, exact), e)
    err_inv = _jacobi_error(sig_inv, off_inv, rot_inv, exact)
    # bottom value error from the inverse: |d(1/x)| = dx / x^2
    err_bottom = _safe_ldexp(err_inv / (sig_inv[0] ** 2), -e_inv) if sig_inv[0] > 0 else 0.0
    certified = max(err_g, err_bottom)
    if certified > 0 and n >= 3:
        certified *= n
    return SingularFrames(tuple(log_sigma), left, right, float(certified))


def _complete_orthonormal(rows: np.ndarray, index: int) -> np.ndarray:
    """Replaces row `index` by the unit vector orthogonal to all other rows (for d = 3); re-orthonormalizes otherwise."""
    n = rows.shape[0]
    others = [rows[k] for k in range(n) if k != index]
    if n == 3:
        vec = np.cross(others[0], others[1])
    else:
        vec = rows[index].copy()
        for o in others:
            vec = vec - (vec @ o) * o
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return rows[index]
    vec = vec / norm
    if vec @ rows[index] < 0:
        vec = -vec
    return vec


def _safe_ldexp(x: float, e: int) -> float:
    try:
        return math.ldexp(x, e)
    except OverflowError:
        return float("inf")


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return float("inf")


def singular_values(g: RationalMatrix) -> SingularTriple:
    """Descending singular values of g with a certified absolute error."""
    frames = svd_frames(g)
    sigma = sorted((_safe_exp(x) for x in frames.log_sigma), reverse=True)
    return SingularTriple(tuple(sigma), frames.certified_error)


def cartan_projection(g: RationalMatrix) -> CartanVector:
    """mu(g) = (log sigma_1, ..., log sigma_d), computed in log space."""
    frames = svd_frames(g)
    return CartanVector(tuple(sorted(frames.log_sigma, reverse=True)))


def log_gap(g: RationalMatrix) -> float:
    """log(sigma1/sigma2); finite even when the singular values overflow floats."""
    mu = cartan_projection(g).mu
    return mu[0] - mu[1]


def sigma_gap(g: RationalMatrix) -> float:
    return _safe_exp(log_gap(g))


def sigma_gap_bounds(g: RationalMatrix) -> Tuple[float, float]:
    """
    Rational-norm bracket for sigma1/sigma2 of a 3x3 matrix.

    With Q = ||g||_2^2 and Q' = ||g^-1||_2^2 (Frobenius), returns
    (Q / (3 sqrt Q'), sqrt 3 Q / sqrt Q') divided by |det g|.
    """
    if g.dim != 3:
        raise SingularValueError("sigma_gap_bounds is only defined for d = 3")
    det = g.det()
    if det == 0:
        raise SingularValueError("sigma_gap_bounds needs an invertible matrix")
    q = g.frobenius_norm_sq()
    q_inv = g.inverse().frobenius_norm_sq()
    log_q = log_abs(q)
    log_q_inv = log_abs(q_inv)
    log_det = log_abs(det)
    log_lower = log_q - math.log(3.0) - 0.5 * log_q_inv - log_det
    log_upper = 0.5 * math.log(3.0) + log_q - 0.5 * log_q_inv - log_det
    return _safe_exp(log_lower), _safe_exp(log_upper)


def norm_bounds_sigma1(g: RationalMatrix) -> Tuple[float, float]:
    """(1/sqrt d) ||g||_2 <= sigma1 <= ||g||_2 with the Frobenius norm."""
    log_q = log_abs(g.frobenius_norm_sq())
    return _safe_exp(0.5 * log_q - 0.5 * math.log(g.dim)), _safe_exp(0.5 * log_q)


def lipschitz_bound(g: RationalMatrix) -> float:
    """Global Lipschitz constant 2 sigma1/sigma_d of the projective action in the Fubini-Study metric."""
    mu = cartan_projection(g).mu
    return 2.0 * _safe_exp(mu[0] - mu[-1])


def batch_log_gaps(matrices: List[RationalMatrix]) -> List[float]:
    return [log_gap(m) for m in matrices]

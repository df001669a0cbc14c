import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import settings
from core.flag_geometry import FlagGeometryError, ProjHyperplane, ProjPoint
from core.json_utils import FileFormatError, format_float
from core.parallel import chunked, ordered_map
from core.rational_matrix import RationalMatrix
from core.singular_values import cartan_projection

logger = logging.getLogger(__name__)

_SAFETY = 1e-12


def fs_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise Fubini-Study distances of unit rows, via chords so small angles keep full precision."""
    signs = np.where(points @ centers.T < 0, -1.0, 1.0)
    chords = np.linalg.norm(points[:, None, :] - signs[:, :, None] * centers[None, :, :], axis=2)
    return 2.0 * np.arcsin(np.clip(chords / 2.0, 0.0, 1.0))


class BallSetError(Exception):
    """Custom exception for Fubini-Study ball unions and grid checks."""
    pass


class ResolutionError(BallSetError):
    """Raised when the sampling grid is too coarse to certify anything for the map."""
    pass


@dataclass(frozen=True)
class BallUnionSet:
    """Finite union of closed Fubini-Study balls in P(R^d)."""
    centers: Tuple[ProjPoint, ...]
    radii: Tuple[float, ...]

    def __post_init__(self):
        if not self.centers:
            raise BallSetError("A ball union needs at least one ball")
        if len(self.centers) != len(self.radii):
            raise BallSetError(f"{len(self.centers)} centers but {len(self.radii)} radii")
        dims = {c.dim for c in self.centers}
        if len(dims) != 1:
            raise BallSetError(f"Ball centers of mixed dimensions {sorted(dims)}")
        for r in self.radii:
            if not (0.0 < r <= math.pi / 2):
                raise BallSetError(f"Ball radius {r} outside (0, pi/2]")

    @classmethod
    def from_balls(cls, balls: Sequence[Tuple[ProjPoint, float]]) -> "BallUnionSet":
        return cls(tuple(c for c, _ in balls), tuple(float(r) for _, r in balls))

    @classmethod
    def single(cls, center: ProjPoint, radius: float) -> "BallUnionSet":
        return cls((center,), (float(radius),))

    @classmethod
    def from_json(cls, data: Sequence[Mapping[str, Any]]) -> "BallUnionSet":
        try:
            balls = [(ProjPoint.from_vector([float(x) for x in item["center"]]), float(item["radius"]))
                     for item in data]
        except (KeyError, TypeError, ValueError, FlagGeometryError) as e:
            raise FileFormatError(f"Malformed ball list: {e}") from e
        return cls.from_balls(balls)

    def to_json(self) -> List[Dict[str, Any]]:
        return [{"center": [format_float(x) for x in c.direction], "radius": format_float(r)}
                for c, r in zip(self.centers, self.radii)]

    @property
    def dim(self) -> int:
        return self.centers[0].dim

    @property
    def max_radius(self) -> float:
        return max(self.radii)

    def __len__(self) -> int:
        return len(self.centers)

    def union(self, other: "BallUnionSet") -> "BallUnionSet":
        if other.dim != self.dim:
            raise BallSetError(f"Dimension mismatch: {self.dim} vs {other.dim}")
        return BallUnionSet(self.centers + other.centers, self.radii + other.radii)

    def center_array(self) -> np.ndarray:
        return np.array([c.direction for c in self.centers], dtype=float)

    def slack(self, points: np.ndarray) -> np.ndarray:
        """max_i (r_i - fs(p, c_i)) for each row p of a unit-vector array; positive inside."""
        return (np.asarray(self.radii)[None, :] - fs_distances(points, self.center_array())).max(axis=1)

    def contains(self, p: ProjPoint, erosion: float = 0.0) -> bool:
        return bool(self.slack(p.as_array()[None, :])[0] > erosion)

    def hyperplane_clearance(self, hyperplane: ProjHyperplane) -> float:
        """min_i (fs distance from c_i to the hyperplane - r_i); positive iff no ball meets it."""
        sines = np.clip(np.abs(self.center_array() @ hyperplane.as_array()), 0.0, 1.0)
        return float((np.arcsin(sines) - np.asarray(self.radii)).min())

    def clear_of(self, hyperplanes: Sequence[ProjHyperplane], gap: float) -> Optional["BallUnionSet"]:
        """Shrinks each ball to stay gap away from every hyperplane; drops balls left no wider than gap."""
        centers = self.center_array()
        distance = np.full(len(self), np.pi / 2)
        for hyperplane in hyperplanes:
            sines = np.clip(np.abs(centers @ hyperplane.as_array()), 0.0, 1.0)
            distance = np.minimum(distance, np.arcsin(sines))
        fitted = np.minimum(np.asarray(self.radii), distance - gap)
        balls = [(c, float(r)) for c, r in zip(self.centers, fitted) if r > gap]
        return BallUnionSet.from_balls(balls) if balls else None


def separation(a: BallUnionSet, b: BallUnionSet) -> float:
    """min over ball pairs of fs(c_i, c'_j) - r_i - r'_j; positive iff the unions are disjoint."""
    if a.dim != b.dim:
        raise BallSetError(f"Dimension mismatch: {a.dim} vs {b.dim}")
    gaps = (fs_distances(a.center_array(), b.center_array())
            - np.asarray(a.radii)[:, None] - np.asarray(b.radii)[None, :])
    return float(gaps.min())


def sets_disjoint(a: BallUnionSet, b: BallUnionSet) -> bool:
    return separation(a, b) > 0.0


def tangent_basis(center: np.ndarray) -> np.ndarray:
    """Orthonormal basis of center^perp (rows), from a Householder reflection."""
    d = center.size
    k = int(np.argmax(np.abs(center)))
    e = np.zeros(d)
    e[k] = 1.0
    u = center - np.sign(center[k]) * e
    if np.linalg.norm(u) < 1e-15:
        h = np.eye(d)
    else:
        h = np.eye(d) - 2.0 * np.outer(u, u) / (u @ u)
    return np.delete(h, k, axis=0)


@lru_cache(maxsize=64)
def _grid_cached(center: Tuple[float, ...], radius: float, h: float) -> np.ndarray:
    c = np.asarray(center, dtype=float)
    d = c.size
    spacing = 2.0 * h / math.sqrt(d - 1)
    k = int(math.ceil((radius + h) / spacing))
    steps = np.arange(-k, k + 1, dtype=float) * spacing
    mesh = np.stack(np.meshgrid(*([steps] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    lengths = np.linalg.norm(mesh, axis=1)
    keep = lengths <= radius + h
    mesh, lengths = mesh[keep], lengths[keep]
    tangent = mesh @ tangent_basis(c)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(lengths[:, None] > 0, tangent / lengths[:, None], 0.0)
    points = np.cos(lengths)[:, None] * c[None, :] + np.sin(lengths)[:, None] * direction
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def ball_resolution(radius: float, h: float) -> float:
    """Grid step used on one ball: h, refined to GRID_RADIUS_FRACTION * radius on small balls."""
    return min(h, settings.GRID_RADIUS_FRACTION * radius)


def grid_samples(ball_set: BallUnionSet, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit vectors whose balls cover the union, with the covering radius of each.

    Each ball is sampled on a cubic grid of spacing 2s/sqrt(d-1) in its
    tangent space, pushed to P(R^d) by the exponential map, where s is
    ball_resolution(radius, h). Every covering radius is at most h.
    """
    if not (0.0 < h < 1.0):
        raise BallSetError(f"Grid resolution must lie in (0, 1), got {h}")
    points, steps = [], []
    for c, r in zip(ball_set.centers, ball_set.radii):
        s = ball_resolution(r, h)
        grid = _grid_cached(c.direction, r, s)
        points.append(grid)
        steps.append(np.full(len(grid), s))
    return np.vstack(points), np.concatenate(steps)


def grid_points(ball_set: BallUnionSet, h: float) -> np.ndarray:
    """Unit vectors whose h-balls cover the union."""
    return grid_samples(ball_set, h)[0]


@dataclass
class InclusionCheck:
    """Outcome of a grid-certified check g(A) subset of B."""
    holds: bool
    margin: float
    samples: int
    worst_point: Tuple[float, ...]

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> Dict[str, Any]:
        return {"holds": self.holds, "margin": format_float(self.margin), "samples": self.samples}


def _scaled_singular(g: RationalMatrix, e: int) -> Tuple[float, float, float]:
    """sigma1, sigma1*sigma2 and sigma_d of g * 2**-e from the certified log-space values."""
    mu = cartan_projection(g).mu
    shift = e * math.log(2.0)
    sigma1 = math.exp(mu[0] - shift)
    sigma12 = math.exp(mu[0] + mu[1] - 2.0 * shift)
    sigma_d = math.exp(max(mu[-1] - shift, -700.0))
    return sigma1, sigma12, sigma_d


def _chunk_terms(chunk: np.ndarray, steps: np.ndarray, a: np.ndarray, target: BallUnionSet,
                 sigma1: float, sigma12: float, global_lip: float) -> np.ndarray:
    """Rows (slack of g q in target, grid erosion L_q s_q) for each sample q with covering radius s_q."""
    images = chunk @ a.T
    norms = np.linalg.norm(images, axis=1)
    unit = images / norms[:, None]
    # on the s-ball around each sample |g p| >= |g q| - sigma1 s; the derivative is <= sigma1 sigma2 / |g p|^2
    floor = norms - sigma1 * steps
    with np.errstate(divide="ignore"):
        local = np.where(floor > 0, (sigma12 + _SAFETY * sigma1 * sigma1) / np.square(floor), np.inf)
    lip = np.minimum(local, global_lip)
    return np.stack([target.slack(unit), lip * steps + _SAFETY])


def _inclusion_terms(g: RationalMatrix, source: BallUnionSet, target: BallUnionSet, h: float,
                     jobs: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    points, steps = grid_samples(source, h)
    a, e = g.scaled_float_array()
    sigma1, sigma12, sigma_d = _scaled_singular(g, e)
    global_lip = 2.0 * sigma1 / sigma_d
    workers = settings.DEFAULT_JOBS if jobs is None else jobs
    index = np.arange(len(points))
    parts = chunked(index, workers) if len(points) >= settings.PARALLEL_MIN_BATCH else [index]
    terms = np.concatenate(ordered_map(
        lambda idx: _chunk_terms(points[idx], steps[idx], a, target, sigma1, sigma12, global_lip),
        parts, workers, min_batch=2), axis=1)
    return points, terms


def check_map_inclusion(g: RationalMatrix, source: BallUnionSet, target: BallUnionSet,
                        h: Optional[float] = None, jobs: Optional[int] = None) -> InclusionCheck:
    """
    Certifies g(source) subset of target on a covering grid of source.

    margin = min over samples q of (max_i (r_i - fs(g q, c_i)) - L_q s_q),
    with s_q <= h the covering radius at q and L_q a Lipschitz bound of the
    projective action on the s_q-ball around q. Raises ResolutionError when
    even the best sample loses every target radius to the grid error.
    """
    resolution = settings.GRID_RESOLUTION if h is None else h
    if g.dim != source.dim or g.dim != target.dim:
        raise BallSetError(f"Dimension mismatch: g is {g.dim}, sets are {source.dim} and {target.dim}")
    points, terms = _inclusion_terms(g, source, target, resolution, jobs)
    margins = terms[0] - terms[1]

    erosion_floor = float(terms[1].min())
    if erosion_floor >= target.max_radius:
        raise ResolutionError(
            f"resolution insufficient: grid error {erosion_floor:.3e} >= largest target radius {target.max_radius:.3e}")

    worst = int(np.argmin(margins))
    margin = float(margins[worst])
    logger.debug(f"map_set_inclusion: {len(points)} samples, margin {margin:.6g}")
    return InclusionCheck(margin > 0.0, margin, len(points), tuple(float(x) for x in points[worst]))


def map_set_inclusion(g: RationalMatrix, source: BallUnionSet, target: BallUnionSet,
                      h: Optional[float] = None, jobs: Optional[int] = None) -> bool:
    """True only if g(source) subset of target holds with positive grid margin."""
    return check_map_inclusion(g, source, target, h, jobs).holds


def image_ball(g: RationalMatrix, ball: BallUnionSet, h: Optional[float] = None,
               padding: Optional[float] = None, jobs: Optional[int] = None) -> BallUnionSet:
    """
    One ball per source ball, centered at the image of its center, whose
    radius is the certified reach of the image plus `padding`.

    check_map_inclusion(g, ball, image_ball(g, ball, h), h) then holds with
    margin `padding` on the same grid.
    """
    resolution = settings.GRID_RESOLUTION if h is None else h
    pad = settings.IMAGE_BALL_PADDING if padding is None else padding
    a, _ = g.scaled_float_array()
    balls = []
    for c, r in zip(ball.centers, ball.radii):
        center = ProjPoint.from_vector(a @ c.as_array())
        hemisphere = BallUnionSet.single(center, math.pi / 2)
        _, (slack, erosion) = _inclusion_terms(g, BallUnionSet.single(c, r), hemisphere, resolution, jobs)
        # pi/2 - slack is fs(g q, g c); the erosion covers points between samples
        reach = float(np.max(math.pi / 2 - slack + erosion))
        balls.append((center, min(math.pi / 2, reach + pad)))
    return BallUnionSet.from_balls(balls)

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from config import settings
from core.group_word import GroupWord, GroupWordError, Letter, check_generators, step_order
from core.parallel import ordered_map
from core.rational_matrix import RationalMatrix

logger = logging.getLogger(__name__)

BallElement = Tuple[GroupWord, RationalMatrix]


class BallSpecError(Exception):
    """Custom exception for invalid word-ball parameters."""
    pass


@dataclass
class BallSpec:
    """
    Finite approximation of a finitely generated group: generators and a radius.

    With dedupe on, spheres are spheres of the group in the word metric (one
    representative per matrix, matrices of shorter words excluded). With dedupe
    off they are spheres of the free group on the generators.
    """
    generators: Dict[str, RationalMatrix]
    radius: int
    dedupe: bool = True
    radius_cap: int = field(default_factory=lambda: settings.RADIUS_CAP)

    def __post_init__(self):
        if self.radius < 1:
            raise BallSpecError(f"Radius must be a positive integer, got {self.radius}")
        if self.radius > self.radius_cap:
            raise BallSpecError(f"Radius {self.radius} exceeds the cap {self.radius_cap}")
        try:
            check_generators(self.generators)
        except GroupWordError as e:
            raise BallSpecError(str(e)) from e

    @property
    def dim(self) -> int:
        return next(iter(self.generators.values())).dim

    @property
    def names(self) -> List[str]:
        return list(self.generators.keys())


class WordBall:
    """Incremental sphere builder; spheres are cached so sphere(r) costs one step after sphere(r - 1)."""

    def __init__(self, spec: BallSpec, jobs: Optional[int] = None):
        self.spec = spec
        self.jobs = settings.DEFAULT_JOBS if jobs is None else jobs
        self.alphabet: List[Letter] = step_order(spec.names)
        self.step_matrices: Dict[Letter, RationalMatrix] = {}
        for name, g in spec.generators.items():
            self.step_matrices[(name, 1)] = g
            self.step_matrices[(name, -1)] = g.inverse()
        identity = RationalMatrix.identity(spec.dim)
        self._spheres: List[List[Tuple[Tuple[Letter, ...], RationalMatrix]]] = [[((), identity)]]
        self._seen = {identity}

    def _check_radius(self, r: int) -> None:
        if r < 0:
            raise BallSpecError(f"Negative radius {r}")
        if r > self.spec.radius_cap:
            raise BallSpecError(f"Radius {r} exceeds the cap {self.spec.radius_cap}")
        if r > self.spec.radius:
            raise BallSpecError(f"Radius {r} exceeds the ball radius {self.spec.radius}")

    def _extend(self, entries, allow_seen: bool):
        out = []
        for steps, matrix in entries:
            last = steps[-1] if steps else None
            for step in self.alphabet:
                if last is not None and step[0] == last[0] and step[1] == -last[1]:
                    continue
                new_matrix = matrix @ self.step_matrices[step]
                if not allow_seen:
                    if new_matrix in self._seen:
                        continue
                    self._seen.add(new_matrix)
                out.append((steps + (step,), new_matrix))
        return out

    def _grow(self) -> None:
        frontier = self._spheres[-1]
        if self.spec.dedupe:
            nxt = self._extend(frontier, allow_seen=False)
        else:
            # free-group tree: subtrees are independent, split the frontier by first letter
            groups: Dict[Letter, list] = {}
            for entry in frontier:
                key = entry[0][0] if entry[0] else None
                groups.setdefault(key, []).append(entry)
            ordered = list(groups.values())
            min_batch = 1 if len(frontier) >= settings.PARALLEL_MIN_BATCH else len(ordered) + 1
            parts = ordered_map(lambda chunk: self._extend(chunk, allow_seen=True), ordered, self.jobs,
                                min_batch=min_batch)
            nxt = [item for part in parts for item in part]
        if len(nxt) > settings.MAX_SPHERE_ELEMENTS:
            raise BallSpecError(
                f"Sphere {len(self._spheres)} has {len(nxt)} elements, above MAX_SPHERE_ELEMENTS={settings.MAX_SPHERE_ELEMENTS}")
        self._spheres.append(nxt)
        logger.debug(f"[WordBall] sphere {len(self._spheres) - 1}: {len(nxt)} elements")

    def sphere(self, r: int) -> List[BallElement]:
        self._check_radius(r)
        while len(self._spheres) <= r:
            self._grow()
        return [(GroupWord.from_steps(steps), m) for steps, m in self._spheres[r]]

    def ball(self, include_identity: bool = False) -> List[BallElement]:
        """All elements up to the ball radius in length-lex order."""
        start = 0 if include_identity else 1
        out: List[BallElement] = []
        for r in range(start, self.spec.radius + 1):
            out.extend(self.sphere(r))
        return out


def enumerate_sphere(spec: BallSpec, r: int, jobs: Optional[int] = None) -> List[BallElement]:
    """
    All reduced words of length exactly r.

    With spec.dedupe the sphere is taken in the group: one word per matrix
    value, and a matrix already reached at a smaller radius is not repeated.
    """
    return WordBall(spec, jobs=jobs).sphere(r)


def enumerate_ball(spec: BallSpec, include_identity: bool = False, jobs: Optional[int] = None) -> List[BallElement]:
    return WordBall(spec, jobs=jobs).ball(include_identity=include_identity)


def free_sphere_size(k: int, r: int) -> int:
    """Number of reduced words of length r in the free group of rank k."""
    if r == 0:
        return 1
    return 2 * k * (2 * k - 1) ** (r - 1)


def ball_from_generators(generators: Mapping[str, RationalMatrix], radius: int, dedupe: bool = True,
                         radius_cap: Optional[int] = None) -> BallSpec:
    cap = settings.RADIUS_CAP if radius_cap is None else radius_cap
    return BallSpec(dict(generators), radius, dedupe=dedupe, radius_cap=cap)

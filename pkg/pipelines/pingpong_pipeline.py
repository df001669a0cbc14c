import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from analyzers.regularity_scanner import LimitSetSample, RegularityScanner
from config import settings
from core.ball_sets import (BallSetError, BallUnionSet, ResolutionError, check_map_inclusion, fs_distances,
                            image_ball, separation, tangent_basis)
from core.flag_geometry import ProjFlag, ProjPoint, _flag_from_vectors
from core.group_word import GroupWord, GroupWordError, WordParseError, parse_word, word_eval
from core.json_utils import FileFormatError, format_float, group_to_json, parse_group
from core.parallel import ordered_map
from core.proximality import ProximalityError, ProximalityReport, is_proximal
from core.rational_matrix import RationalMatrix
from core.run_state import STATUS_FAILED, RunState
from core.word_ball import BallElement, BallSpec, BallSpecError, WordBall

logger = logging.getLogger(__name__)

CERTIFICATE_FORMAT = "regulus-pingpong-certificate"
CERTIFICATE_VERSION = 1
MARGIN_REPRODUCTION_TOLERANCE = 1e-12

# Search failure reasons
FAILURE_NO_OPPOSITE_POINT = "no-opposite-point"
FAILURE_NO_PROXIMAL = "no-proximal"
FAILURE_NO_POWER = "no-power"
FAILURE_MARGIN_TOO_SMALL = "margin-too-small"


class PingPongError(Exception):
    """Custom exception for ping-pong certification errors."""
    pass


@dataclass
class PingPongCertificate:
    """
    Claim that Delta and <gamma^N> play ping-pong on C1, C2, so the group
    they generate is Delta * <gamma^N>. The claim is checked for the Delta
    ball of radius delta_radius.
    """
    generators: Dict[str, RationalMatrix]
    delta_generators: List[GroupWord]
    gamma: GroupWord
    power: int
    c1: BallUnionSet
    c2: BallUnionSet
    grid_resolution: float
    margin: Optional[float] = None
    exceptional: List[GroupWord] = field(default_factory=list)
    delta_radius: int = field(default_factory=lambda: settings.DELTA_BALL_RADIUS)
    word_check_length: int = field(default_factory=lambda: settings.WORD_CHECK_DEFAULT_SYLLABLES)
    group_file: Optional[str] = None

    def __post_init__(self):
        if self.power < 1:
            raise PingPongError(f"Power N must be positive, got {self.power}")
        if not self.delta_generators:
            raise PingPongError("Certificate needs at least one Delta generator")
        if not self.grid_resolution > 0:
            raise PingPongError(f"Grid resolution must be positive, got {self.grid_resolution}")
        if self.delta_radius < 1:
            raise PingPongError(f"Delta radius must be positive, got {self.delta_radius}")
        dim = next(iter(self.generators.values())).dim
        if self.c1.dim != dim or self.c2.dim != dim:
            raise PingPongError(f"Sets live in dimension {self.c1.dim}/{self.c2.dim}, group in {dim}")
        for w in list(self.delta_generators) + [self.gamma]:
            unknown = [n for n in w.generator_names() if n not in self.generators]
            if unknown:
                raise PingPongError(f"Word '{w}' uses unknown generators {unknown}")

    @property
    def dim(self) -> int:
        return self.c1.dim

    @property
    def gamma_power(self) -> GroupWord:
        return self.gamma ** self.power

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": CERTIFICATE_FORMAT,
            "version": CERTIFICATE_VERSION,
            "group_file": self.group_file,
            "group": group_to_json(self.generators),
            "delta_generators": [str(w) for w in self.delta_generators],
            "gamma": str(self.gamma),
            "power": self.power,
            "C1": self.c1.to_json(),
            "C2": self.c2.to_json(),
            "margin": None if self.margin is None else format_float(self.margin),
            "exceptional": [str(w) for w in self.exceptional],
            "grid_resolution": format_float(self.grid_resolution),
            "delta_radius": self.delta_radius,
            "word_check_length": self.word_check_length,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PingPongCertificate":
        if not isinstance(data, Mapping):
            raise FileFormatError("Certificate must be a JSON object")
        missing = [k for k in ("group", "delta_generators", "gamma", "power", "C1", "C2", "grid_resolution")
                   if k not in data]
        if missing:
            raise FileFormatError(f"Certificate is missing keys {missing}")
        _, generators = parse_group(data["group"])
        try:
            delta = [parse_word(str(w)) for w in data["delta_generators"]]
            gamma = parse_word(str(data["gamma"]))
            exceptional = [parse_word(str(w)) for w in data.get("exceptional", [])]
        except WordParseError as e:
            raise FileFormatError(f"Certificate word: {e}") from e
        margin = data.get("margin")
        try:
            return cls(
                generators=generators,
                delta_generators=delta,
                gamma=gamma,
                power=int(data["power"]),
                c1=BallUnionSet.from_json(data["C1"]),
                c2=BallUnionSet.from_json(data["C2"]),
                grid_resolution=float(data["grid_resolution"]),
                margin=None if margin is None else float(margin),
                exceptional=exceptional,
                delta_radius=int(data.get("delta_radius", settings.DELTA_BALL_RADIUS)),
                word_check_length=int(data.get("word_check_length", settings.WORD_CHECK_DEFAULT_SYLLABLES)),
                group_file=data.get("group_file"),
            )
        except (PingPongError, BallSetError, TypeError, ValueError) as e:
            raise FileFormatError(f"Invalid certificate: {e}") from e


@dataclass
class WordCheckReport:
    passed: bool
    words_checked: int
    max_syllables: int
    relation: Optional[List[str]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "words_checked": self.words_checked, "max_syllables": self.max_syllables,
                "relation": self.relation}


@dataclass
class VerificationReport:
    passed: bool
    margin: float
    separation: float
    checks: List[Dict[str, Any]] = field(default_factory=list)
    word_check: Optional[WordCheckReport] = None
    margin_reproduced: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "margin": format_float(self.margin),
            "separation": format_float(self.separation),
            "margin_reproduced": self.margin_reproduced,
            "failed_checks": [c for c in self.checks if not c["holds"]],
            "checks_run": len(self.checks),
            "word_check": None if self.word_check is None else self.word_check.to_dict(),
        }


@dataclass
class OppositePoint:
    flag: ProjFlag
    margin: float


@dataclass
class SearchResult:
    """Outcome of a search: a verified certificate, or a failure reason (never both)."""
    certificate: Optional[PingPongCertificate]
    failure_reason: Optional[str]
    details: Dict[str, Any] = field(default_factory=dict)
    run: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if (self.certificate is None) == (self.failure_reason is None):
            raise PingPongError("A search result carries exactly one of certificate and failure reason")

    @property
    def succeeded(self) -> bool:
        return self.certificate is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": "certified" if self.succeeded else "failed",
            "failure_reason": self.failure_reason,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "details": self.details,
            "run": self.run,
        }


# --- opposite points ---

def _quasi_directions(count: int, dim: int) -> np.ndarray:
    """Deterministic low-discrepancy unit vectors (additive recurrence on the generalized golden ratio)."""
    phi = 2.0
    for _ in range(60):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = np.array([phi ** -(k + 1) for k in range(dim)])
    n = np.arange(1, count + 1)[:, None]
    cube = 2.0 * np.mod(0.5 + n * alpha[None, :], 1.0) - 1.0
    return cube / np.linalg.norm(cube, axis=1, keepdims=True)


def _refine(x: np.ndarray, score, steps: int) -> Tuple[np.ndarray, float]:
    """Pattern search on the unit sphere: try x +- step * t along a tangent basis, halving the step on failure."""
    best = float(score(x[None, :])[0])
    step = 0.1
    for _ in range(steps):
        basis = tangent_basis(x)
        trial = np.vstack([x + step * basis, x - step * basis])
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        scores = score(trial)
        k = int(np.argmax(scores))
        if scores[k] > best:
            x, best = trial[k], float(scores[k])
        else:
            step /= 2.0
    return x, best


def opposite_point_search(flags: Sequence[ProjFlag], refine_steps: Optional[int] = None) -> OppositePoint:
    """
    Flag (p, ker phi) maximizing min_i min(|phi_i(p)|, |phi(p_i)|) over the given flags.

    phi is chosen first against the points, then p inside ker phi against
    the conormals; a few of the best phi are carried through both stages.
    """
    if not flags:
        raise PingPongError("opposite_point_search needs a nonempty flag list")
    steps = settings.OPPOSITE_POINT_REFINE_STEPS if refine_steps is None else refine_steps
    points = np.array([f.point.direction for f in flags])
    conormals = np.array([f.hyperplane.conormal for f in flags])
    dim = points.shape[1]

    def hyper_score(candidates: np.ndarray) -> np.ndarray:
        return np.abs(candidates @ points.T).min(axis=1)

    seeds = np.vstack([np.eye(dim), points, _quasi_directions(settings.OPPOSITE_POINT_GRID, dim)])
    order = np.argsort(-hyper_score(seeds), kind="stable")[:3]

    best: Optional[OppositePoint] = None
    for index in order:
        phi, phi_score = _refine(seeds[index], hyper_score, steps)
        basis = tangent_basis(phi)

        def point_score(coords: np.ndarray) -> np.ndarray:
            return np.abs((coords @ basis) @ conormals.T).min(axis=1)

        local = np.vstack([conormals @ basis.T, basis.T, _quasi_directions(settings.OPPOSITE_POINT_GRID, dim - 1)])
        norms = np.linalg.norm(local, axis=1)
        local = local[norms > 1e-9] / norms[norms > 1e-9][:, None]
        start = local[int(np.argmax(point_score(local)))]
        coords, p_score = _refine(start, point_score, steps)
        margin = min(phi_score, p_score)
        if best is None or margin > best.margin:
            best = OppositePoint(_flag_from_vectors(coords @ basis, phi), margin)
    logger.debug(f"Opposite-point search: best margin {best.margin:.6g} against {len(flags)} flags")
    return best


def find_opposite_point(sample: LimitSetSample, min_margin: Optional[float] = None) -> Optional[ProjFlag]:
    """
    A flag opposite to every sampled flag, or None when the best margin does
    not exceed max(min_margin, sample uncertainty).
    """
    if not sample.flags:
        raise PingPongError("find_opposite_point needs a nonempty limit-set sample")
    threshold = max(settings.OPPOSITE_POINT_MIN_MARGIN if min_margin is None else min_margin, sample.uncertainty)
    found = opposite_point_search(sample.flags)
    return found.flag if found.margin > threshold else None


# --- proximal elements and powers ---

def find_proximal(spec: BallSpec, jobs: Optional[int] = None,
                  biproximal: bool = False) -> Optional[Tuple[GroupWord, ProximalityReport]]:
    """First word of the ball in length-lex order whose matrix is proximal (and, optionally, whose inverse is)."""
    for word, matrix in WordBall(spec, jobs=jobs).ball():
        try:
            report = is_proximal(matrix)
            if report.is_proximal and (not biproximal or is_proximal(matrix.inverse()).is_proximal):
                logger.info(f"Proximal element found: {word} (top modulus {report.top_eigenvalue_modulus:.6g})")
                return word, report
        except ProximalityError as e:
            logger.debug(f"Skipping {word}: {e}")
    return None


def _certified(g: RationalMatrix, source: BallUnionSet, target: BallUnionSet, h: float, min_margin: float,
               jobs: Optional[int]) -> Tuple[bool, float]:
    try:
        check = check_map_inclusion(g, source, target, h, jobs)
    except ResolutionError as e:
        logger.debug(f"Inclusion not certified: {e}")
        return False, -math.inf
    return check.holds and check.margin >= min_margin, check.margin


def exceptional_elements(delta_ball: Sequence[BallElement], u: BallUnionSet, w0: BallUnionSet,
                         h: Optional[float] = None, min_margin: float = 0.0,
                         jobs: Optional[int] = None) -> List[GroupWord]:
    """Nontrivial ball elements delta for which delta(U) subset W0 is not certified."""
    resolution = settings.GRID_RESOLUTION if h is None else h
    out = []
    for word, matrix in delta_ball:
        if matrix.is_identity():
            continue
        ok, _ = _certified(matrix, u, w0, resolution, min_margin, jobs)
        if not ok:
            out.append(word)
    logger.debug(f"{len(out)} exceptional elements out of {len(delta_ball)}")
    return out


def choose_power(g: RationalMatrix, w: BallUnionSet, v: BallUnionSet, max_n: int, h: Optional[float] = None,
                 min_margin: float = 0.0, jobs: Optional[int] = None) -> Optional[int]:
    """Least N <= max_n with g^n(W) and g^-n(W) certified inside V for every n in [N, N + POWER_WINDOW]."""
    forward = is_proximal(g)
    backward = is_proximal(g.inverse())
    if not (forward.is_proximal and backward.is_proximal):
        raise PingPongError("choose_power needs g and g^-1 proximal")
    for report, label in ((forward, "g"), (backward, "g^-1")):
        if not v.contains(report.attracting_point):
            raise PingPongError(f"V does not contain the attracting point of {label}")
    if max_n < 1:
        return None

    resolution = settings.GRID_RESOLUTION if h is None else h
    window = settings.POWER_WINDOW
    g_inv = g.inverse()
    powers: Dict[int, Tuple[RationalMatrix, RationalMatrix]] = {}
    verdicts: Dict[int, bool] = {}

    def ok(n: int) -> bool:
        if n not in verdicts:
            if n not in powers:
                prev = powers.get(n - 1)
                powers[n] = (prev[0] @ g, prev[1] @ g_inv) if prev else (g.power(n), g_inv.power(n))
            plus, minus = powers[n]
            verdicts[n] = (_certified(plus, w, v, resolution, min_margin, jobs)[0]
                           and _certified(minus, w, v, resolution, min_margin, jobs)[0])
        return verdicts[n]

    for n_start in range(1, max_n + 1):
        if all(ok(n) for n in range(n_start, n_start + window + 1)):
            logger.info(f"choose_power: N = {n_start}")
            return n_start
    return None


# --- exact word check ---

def _delta_map(generators: Mapping[str, RationalMatrix],
               delta_generators: Sequence[GroupWord]) -> Tuple[Dict[str, RationalMatrix], Dict[str, GroupWord]]:
    """Names delta1, delta2, ... for the Delta generators, with their matrices and original words."""
    matrices, words = {}, {}
    for i, w in enumerate(delta_generators, start=1):
        name = f"delta{i}"
        matrices[name] = word_eval(generators, w)
        words[name] = w
    return matrices, words


def _expand(word: GroupWord, words: Mapping[str, GroupWord]) -> GroupWord:
    out = GroupWord.identity()
    for name, exp in word.letters:
        out = out * (words[name] ** exp)
    return out


def _delta_ball(generators: Mapping[str, RationalMatrix], delta_generators: Sequence[GroupWord], radius: int,
                jobs: Optional[int] = None) -> List[BallElement]:
    """Nontrivial elements of the Delta ball, labelled by words in the ambient generators."""
    matrices, words = _delta_map(generators, delta_generators)
    spec = BallSpec(matrices, radius, dedupe=True, radius_cap=max(settings.RADIUS_CAP, radius))
    return [(_expand(w, words), m) for w, m in WordBall(spec, jobs=jobs).ball()]


def _alternating_count(a: int, b: int, max_len: int) -> int:
    total = 0
    for length in range(1, max_len + 1):
        hi, lo = (length + 1) // 2, length // 2
        total += a ** hi * b ** lo + b ** hi * a ** lo
    return total


def word_check_report(generators: Mapping[str, RationalMatrix], delta_generators: Sequence[GroupWord],
                      gamma_n: GroupWord, max_len: int, delta_radius: Optional[int] = None,
                      gamma_powers: Optional[int] = None, budget: Optional[int] = None,
                      jobs: Optional[int] = None) -> WordCheckReport:
    """
    Exact search for an alternating word (Delta syllable, gamma^N power, ...)
    of at most max_len syllables that evaluates to the identity.
    """
    if not 1 <= max_len <= settings.WORD_CHECK_MAX_SYLLABLES:
        raise PingPongError(f"max_len must lie in [1, {settings.WORD_CHECK_MAX_SYLLABLES}], got {max_len}")
    radius = settings.WORD_CHECK_DELTA_RADIUS if delta_radius is None else delta_radius
    k_max = settings.WORD_CHECK_GAMMA_POWERS if gamma_powers is None else gamma_powers
    limit = settings.WORD_CHECK_BUDGET if budget is None else budget

    delta_syllables = [(str(w), m) for w, m in _delta_ball(generators, delta_generators, radius, jobs)]
    gamma_matrix = word_eval(generators, gamma_n)
    gamma_syllables = [(str(gamma_n ** k), gamma_matrix.power(k))
                       for k in [s * j for j in range(1, k_max + 1) for s in (1, -1)]]

    for label, m in delta_syllables + gamma_syllables:
        if m.is_identity():
            logger.info(f"Word check: syllable '{label}' is the identity")
            return WordCheckReport(False, 0, max_len, [label])

    total = _alternating_count(len(delta_syllables), len(gamma_syllables), max_len)
    if total > limit:
        raise PingPongError(f"Word check needs {total} alternating words, above the budget of {limit}")

    kinds = (delta_syllables, gamma_syllables)

    def explore(root: Tuple[int, Tuple[str, RationalMatrix]]) -> Tuple[int, Optional[List[str]]]:
        kind, (label, matrix) = root
        count = 0
        stack = [(matrix, 1 - kind, [label])]
        while stack:
            m, next_kind, labels = stack.pop()
            count += 1
            if m.is_identity():
                return count, labels
            if len(labels) < max_len:
                for lbl, s in reversed(kinds[next_kind]):
                    stack.append((m @ s, 1 - next_kind, labels + [lbl]))
        return count, None

    roots = [(0, s) for s in delta_syllables] + [(1, s) for s in gamma_syllables]
    results = ordered_map(explore, roots, jobs, min_batch=2)
    checked = sum(c for c, _ in results)
    relation = next((r for _, r in results if r is not None), None)
    if relation is not None:
        logger.info(f"Word check: relation {' | '.join(relation)}")
    return WordCheckReport(relation is None, checked, max_len, relation)


def freeproduct_word_check(generators: Mapping[str, RationalMatrix], delta_generators: Sequence[GroupWord],
                           gamma_n: GroupWord, max_len: int, **kwargs) -> bool:
    return word_check_report(generators, delta_generators, gamma_n, max_len, **kwargs).passed


# --- verification ---

def _gamma_exponents(power: int) -> List[int]:
    window = range(power, power + settings.POWER_WINDOW + 1)
    multiples = [k * power for k in range(1, settings.WORD_CHECK_GAMMA_POWERS + 1)]
    return sorted(set(window) | set(multiples))


def certificate_report(cert: PingPongCertificate, check_words: bool = True,
                       jobs: Optional[int] = None) -> VerificationReport:
    """
    Re-runs every check of a certificate: delta(C2) in C1 for the nontrivial
    Delta ball, gamma^n(C1) in C2 for the checked powers, then the exact
    word check. The margin is the smallest slack over all of them.
    """
    gap = separation(cert.c1, cert.c2)
    if gap <= 0:
        raise PingPongError(f"C1 and C2 are not certified disjoint (separation {gap:.3e})")
    h = cert.grid_resolution
    checks: List[Dict[str, Any]] = []

    def run(label: str, word: GroupWord, g: RationalMatrix, source: BallUnionSet, target: BallUnionSet):
        try:
            result = check_map_inclusion(g, source, target, h, jobs)
            checks.append({"check": label, "word": str(word), "holds": result.holds, "margin": result.margin})
        except ResolutionError as e:
            checks.append({"check": label, "word": str(word), "holds": False, "margin": -math.inf,
                           "error": str(e)})

    for word, matrix in _delta_ball(cert.generators, cert.delta_generators, cert.delta_radius, jobs):
        run("delta(C2) in C1", word, matrix, cert.c2, cert.c1)
    gamma = word_eval(cert.generators, cert.gamma)
    for n in _gamma_exponents(cert.power):
        for sign in (1, -1):
            run("gamma^n(C1) in C2", cert.gamma ** (sign * n), gamma.power(sign * n), cert.c1, cert.c2)

    margin = min([gap] + [c["margin"] for c in checks])
    passed = all(c["holds"] for c in checks)
    report = VerificationReport(passed, margin, gap, checks)
    if cert.margin is not None:
        report.margin_reproduced = abs(margin - cert.margin) <= MARGIN_REPRODUCTION_TOLERANCE
        if not report.margin_reproduced:
            logger.warning(f"Recomputed margin {margin!r} differs from the stored {cert.margin!r}")
            report.passed = False
    if report.passed and check_words:
        report.word_check = word_check_report(cert.generators, cert.delta_generators, cert.gamma_power,
                                              cert.word_check_length, jobs=jobs)
        report.passed = report.word_check.passed
    logger.info(f"Certificate verification {'passed' if report.passed else 'failed'} (margin {margin:.6g})")
    return report


def verify_certificate(cert: PingPongCertificate, jobs: Optional[int] = None) -> bool:
    return certificate_report(cert, jobs=jobs).passed


# --- search ---

class PingPongPipeline:
    """
    Searches for a free-product certificate Delta * <gamma^N> inside a group:
    sample the limit set of Delta, check it has an opposite flag, surround it
    by W0, pick a biproximal gamma, put V around its fixed points, fold the
    exceptional Delta elements into C1 and choose N.
    """

    def __init__(self, generators: Mapping[str, RationalMatrix], jobs: Optional[int] = None,
                 grid_resolution: Optional[float] = None, group_file: Optional[str] = None):
        self.generators = dict(generators)
        self.dim = next(iter(self.generators.values())).dim
        self.jobs = settings.DEFAULT_JOBS if jobs is None else jobs
        default_h = settings.GRID_RESOLUTION if self.dim == 3 else settings.GRID_RESOLUTION_D4
        self.grid_resolution = default_h if grid_resolution is None else grid_resolution
        self.group_file = group_file
        self.scanner = RegularityScanner(jobs=self.jobs)
        self.run_state: Optional[RunState] = None
        logger.info(f"PingPongPipeline initialized (d = {self.dim}, h = {self.grid_resolution}).")

    def _w0(self, sample: LimitSetSample) -> BallUnionSet:
        """One ball per cluster of sampled points, centered at the sign-aligned mean."""
        balls = []
        for cluster in self.scanner.point_clusters(sample, resolution=settings.W0_CLUSTER_RADIUS):
            pts = np.array([sample.flags[i].point.direction for i in cluster])
            pts *= np.where(pts @ pts[0] < 0, -1.0, 1.0)[:, None]
            center = pts.mean(axis=0)
            center /= np.linalg.norm(center)
            spread = float(fs_distances(pts, center[None, :]).max())
            balls.append((center, min(spread + settings.LIMIT_SET_PADDING, settings.W0_MAX_RADIUS)))
        return BallUnionSet.from_balls([(ProjPoint.from_vector(c), r) for c, r in balls])

    def _candidates(self, radius: int):
        spec = BallSpec(self.generators, radius, dedupe=True, radius_cap=max(settings.RADIUS_CAP, radius))
        for word, matrix in WordBall(spec, jobs=self.jobs).ball():
            try:
                forward = is_proximal(matrix)
                if not forward.is_proximal:
                    continue
                backward = is_proximal(matrix.inverse())
            except ProximalityError as e:
                logger.debug(f"Skipping {word}: {e}")
                continue
            if backward.is_proximal:
                yield word, matrix, forward, backward

    def _try_gamma(self, word: GroupWord, gamma: RationalMatrix, forward: ProximalityReport,
                   backward: ProximalityReport, delta_generators: List[GroupWord], delta_ball: List[BallElement],
                   w0: BallUnionSet, delta_radius: int, max_power: int) -> Tuple[str, Any]:
        """Returns ("certificate", cert) or (failure reason, detail)."""
        h = self.grid_resolution
        min_margin = settings.CERTIFICATE_MIN_MARGIN
        by_word = dict(delta_ball)
        w0 = w0.clear_of([forward.repelling_hyperplane, backward.repelling_hyperplane],
                         settings.W0_HYPERPLANE_STEPS * h)
        if w0 is None:
            return FAILURE_NO_POWER, "W0 meets a repelling hyperplane"
        stage: Tuple[str, Any] = (FAILURE_NO_POWER, "no radius in the ladder placed V")
        for radius in settings.SET_RADIUS_LADDER:
            v = BallUnionSet.from_balls([(forward.attracting_point, radius), (backward.attracting_point, radius)])
            if separation(v, w0) <= 0:
                continue
            exceptional = exceptional_elements(delta_ball, v, w0, h, min_margin, self.jobs)
            c1 = w0
            for delta_word in exceptional:
                c1 = c1.union(image_ball(by_word[delta_word], v, h, jobs=self.jobs))
            if separation(c1, v) <= 0:
                stage = (FAILURE_NO_POWER, f"C1 meets V at radius {radius}")
                continue
            clearance = min(c1.hyperplane_clearance(forward.repelling_hyperplane),
                            c1.hyperplane_clearance(backward.repelling_hyperplane))
            if clearance <= 0:
                stage = (FAILURE_NO_POWER, f"C1 meets a repelling hyperplane at radius {radius}")
                continue
            power = choose_power(gamma, c1, v, max_power, h, min_margin, self.jobs)
            if power is None:
                stage = (FAILURE_NO_POWER, f"no N <= {max_power} at radius {radius}")
                continue
            cert = PingPongCertificate(self.generators, list(delta_generators), word, power, c1, v, h,
                                       exceptional=exceptional, delta_radius=delta_radius,
                                       group_file=self.group_file)
            # round-trip first so the stored margin is what a reader recomputes
            cert = PingPongCertificate.from_dict(cert.to_dict())
            report = certificate_report(cert, check_words=False, jobs=self.jobs)
            if not report.passed or report.margin < min_margin:
                stage = (FAILURE_MARGIN_TOO_SMALL, f"margin {report.margin:.3e} at radius {radius}, N = {power}")
                continue
            cert.margin = report.margin
            return "certificate", cert
        return stage

    def search(self, delta_generators: Sequence[GroupWord], gamma_radius: Optional[int] = None,
               delta_radius: Optional[int] = None, sample_radius: Optional[int] = None,
               gap_threshold: Optional[float] = None, max_power: Optional[int] = None) -> SearchResult:
        gamma_radius = settings.GAMMA_SEARCH_RADIUS if gamma_radius is None else gamma_radius
        delta_radius = settings.DELTA_BALL_RADIUS if delta_radius is None else delta_radius
        sample_radius = settings.PINGPONG_SAMPLE_RADIUS if sample_radius is None else sample_radius
        max_power = settings.MAX_POWER if max_power is None else max_power
        delta_generators = list(delta_generators)
        state = RunState("pingpong search", {
            "delta_generators": [str(w) for w in delta_generators], "gamma_radius": gamma_radius,
            "delta_radius": delta_radius, "sample_radius": sample_radius, "grid_resolution": self.grid_resolution})
        self.run_state = state

        def fail(reason: str, details: Dict[str, Any]) -> SearchResult:
            state.fail(reason, details)
            return SearchResult(None, reason, details, state.summary())

        try:
            delta_matrices, _ = _delta_map(self.generators, delta_generators)
        except GroupWordError as e:
            raise PingPongError(f"Delta generators: {e}") from e

        step = state.start_step("delta_limit_sample", {"radius": sample_radius})
        try:
            spec = BallSpec(delta_matrices, sample_radius, dedupe=True,
                            radius_cap=max(settings.RADIUS_CAP, sample_radius))
        except BallSpecError as e:
            raise PingPongError(f"Delta ball: {e}") from e
        sample = self.scanner.limit_set_sample(spec, gap_threshold)
        if not sample.flags:
            state.complete_step(step, "empty sample", STATUS_FAILED)
            return fail(FAILURE_NO_OPPOSITE_POINT, {"reason": "empty limit-set sample"})
        state.complete_step(step, f"{len(sample.flags)} flags, uncertainty {sample.uncertainty:.3g}")

        step = state.start_step("opposite_point")
        found = opposite_point_search(sample.flags)
        threshold = max(settings.OPPOSITE_POINT_MIN_MARGIN, sample.uncertainty)
        if found.margin <= threshold:
            state.complete_step(step, f"margin {found.margin:.3e} <= {threshold:.3e}", STATUS_FAILED)
            return fail(FAILURE_NO_OPPOSITE_POINT, {"optimizer_margin": format_float(found.margin),
                                                    "required": format_float(threshold)})
        state.complete_step(step, f"margin {found.margin:.3e}")

        w0 = self._w0(sample)
        state.log_event("W0 built", {"balls": len(w0), "radii": [format_float(r) for r in w0.radii]})
        delta_ball = _delta_ball(self.generators, delta_generators, delta_radius, self.jobs)

        step = state.start_step("gamma_search", {"radius": gamma_radius})
        attempts: List[Dict[str, Any]] = []
        for word, gamma, forward, backward in self._candidates(gamma_radius):
            if len(attempts) >= settings.GAMMA_CANDIDATES_MAX:
                break
            outcome, payload = self._try_gamma(word, gamma, forward, backward, delta_generators, delta_ball,
                                               w0, delta_radius, max_power)
            if outcome == "certificate":
                state.complete_step(step, f"gamma = {word}, N = {payload.power}")
                step = state.start_step("word_check")
                words = word_check_report(self.generators, delta_generators, payload.gamma_power,
                                          payload.word_check_length, jobs=self.jobs)
                if not words.passed:
                    state.complete_step(step, f"relation {words.relation}", STATUS_FAILED)
                    raise PingPongError(f"Geometric checks passed but word check found {words.relation}")
                state.complete_step(step, f"{words.words_checked} words, no relation")
                return SearchResult(payload, None, {"opposite_margin": format_float(found.margin),
                                                    "attempts": attempts,
                                                    "words_checked": words.words_checked}, state.summary())
            attempts.append({"gamma": str(word), "reason": outcome, "detail": payload})
            state.log_event(f"gamma = {word} rejected: {outcome}", {"detail": payload}, level="DEBUG")

        if not attempts:
            state.complete_step(step, "no biproximal element", STATUS_FAILED)
            return fail(FAILURE_NO_PROXIMAL, {"gamma_radius": gamma_radius})
        state.complete_step(step, f"{len(attempts)} candidates rejected", STATUS_FAILED)
        reason = (FAILURE_MARGIN_TOO_SMALL if any(a["reason"] == FAILURE_MARGIN_TOO_SMALL for a in attempts)
                  else FAILURE_NO_POWER)
        return fail(reason, {"attempts": attempts})


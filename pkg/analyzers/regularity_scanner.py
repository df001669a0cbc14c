import bisect
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from analyzers.base_analyzer import BaseAnalyzer
from core.flag_geometry import (ContractionLimit, FlagGeometryError, NoContractionAxisError, ProjFlag, attracting_flag,
                                chart_translation, fs_distance)
from core.group_word import GroupWord
from core.json_utils import format_float
from core.parallel import chunked, ordered_map
from core.rational_matrix import RationalMatrix, format_rational
from core.singular_values import batch_log_gaps
from core.word_ball import BallSpec, WordBall

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["radius", "sphere_size", "min_gap", "median_gap", "argmin_word"]
FLAG_CSV_COLUMNS_PREFIX = ["word", "gap"]


class RegularityScanError(Exception):
    """Custom exception for regularity scan errors."""
    pass


class ScanVerdict(str, Enum):
    DIVERGENT_TREND = "DIVERGENT-TREND"
    BOUNDED_WITNESS = "BOUNDED-WITNESS"
    INCONCLUSIVE = "INCONCLUSIVE"


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else float("inf")


@dataclass
class RadiusRecord:
    radius: int
    sphere_size: int
    min_gap: Optional[float]
    median_gap: Optional[float]
    argmin_word: Optional[GroupWord]
    min_log_gap: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "sphere_size": self.sphere_size,
            "min_gap": None if self.min_gap is None else format_float(self.min_gap),
            "median_gap": None if self.median_gap is None else format_float(self.median_gap),
            "argmin_word": None if self.argmin_word is None else str(self.argmin_word),
        }


@dataclass
class BallScanReport:
    records: List[RadiusRecord]
    verdict: ScanVerdict
    witness: Optional[List[GroupWord]] = None
    trend_start: int = 1
    threshold: float = 10.0

    def __post_init__(self):
        if (self.verdict == ScanVerdict.BOUNDED_WITNESS) != (self.witness is not None):
            raise RegularityScanError("A witness is attached exactly when the verdict is BOUNDED-WITNESS")

    @property
    def radius(self) -> int:
        return self.records[-1].radius if self.records else 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "radius": self.radius,
            "trend_start": self.trend_start,
            "threshold": self.threshold,
            "records": [r.to_dict() for r in self.records],
            "witness": None if self.witness is None else [str(w) for w in self.witness],
        }

    def csv_rows(self) -> List[List[str]]:
        rows = []
        for r in self.records:
            d = r.to_dict()
            rows.append(["" if d[c] is None else str(d[c]) for c in CSV_COLUMNS])
        return rows


@dataclass
class LimitSetSample:
    """Attracting flags of the ball elements whose gap passed the threshold."""
    flags: List[ProjFlag]
    words: List[GroupWord]
    radius: int
    gap_threshold: float
    gaps: List[float] = field(default_factory=list)
    empty_warning: bool = False

    @property
    def uncertainty(self) -> float:
        """Largest 1/gap among the sampled words; roughly how far a sampled flag may sit from the limit set."""
        return max((1.0 / g for g in self.gaps), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "gap_threshold": self.gap_threshold,
            "empty_warning": self.empty_warning,
            "uncertainty": format_float(self.uncertainty),
            "flags": [
                {"word": str(w), "gap": format_float(g),
                 "point": [format_float(x) for x in f.point.direction],
                 "conormal": [format_float(x) for x in f.hyperplane.conormal]}
                for f, w, g in zip(self.flags, self.words, self.gaps)
            ],
        }

    def csv_header(self) -> List[str]:
        dim = self.flags[0].dim if self.flags else 0
        return FLAG_CSV_COLUMNS_PREFIX + [f"p{i}" for i in range(dim)] + [f"h{i}" for i in range(dim)]

    def csv_rows(self) -> List[List[str]]:
        return [[str(w), format_float(g)] + [format_float(x) for x in f.point.direction]
                + [format_float(x) for x in f.hyperplane.conormal]
                for f, w, g in zip(self.flags, self.words, self.gaps)]


@dataclass
class HorosphericalCheck:
    conormal: Tuple[Fraction, ...]
    translations: bool
    translation_rank: int
    min_gaps: List[float]
    nondecreasing: bool
    dual: bool = False

    @property
    def regular(self) -> bool:
        return self.translations and self.nondecreasing

    def to_dict(self) -> Dict[str, Any]:
        return {"conormal": [format_rational(q) for q in self.conormal], "translations": self.translations,
                "translation_rank": self.translation_rank, "min_gaps": [format_float(g) for g in self.min_gaps],
                "nondecreasing": self.nondecreasing, "dual": self.dual, "regular": self.regular}


def _point_rejection(points: np.ndarray, p: np.ndarray) -> np.ndarray:
    """sin of the Fubini-Study distance from p to each row of points."""
    dots = points @ p
    residual = p[None, :] - dots[:, None] * points
    return np.linalg.norm(residual, axis=1)


def longest_increasing_run(values: Sequence[float], indices: Sequence[int]) -> List[int]:
    """Longest subsequence of `indices` with strictly increasing `values[i]` (patience sorting)."""
    tails: List[float] = []
    tail_index: List[int] = []
    parent: Dict[int, Optional[int]] = {}
    for i in indices:
        k = bisect.bisect_left(tails, values[i])
        parent[i] = tail_index[k - 1] if k else None
        if k == len(tails):
            tails.append(values[i])
            tail_index.append(i)
        else:
            tails[k] = values[i]
            tail_index[k] = i
    run: List[int] = []
    node = tail_index[-1] if tail_index else None
    while node is not None:
        run.append(node)
        node = parent[node]
    return run[::-1]


class RegularityScanner(BaseAnalyzer):
    """Word-ball diagnostics: sigma1/sigma2 statistics, contracting subsequences and limit-set samples."""

    def __init__(self, config: Optional[dict] = None, jobs: Optional[int] = None):
        super().__init__(analyzer_name="RegularityScanner", config=config, jobs=jobs)

    def _log_gaps(self, matrices: Sequence[RationalMatrix]) -> List[float]:
        parts = chunked(list(matrices), max(1, self.jobs * 4))
        results = ordered_map(batch_log_gaps, parts, self.jobs,
                              min_batch=1 if len(matrices) >= self._get_config_value("PARALLEL_MIN_BATCH") else None)
        return [x for part in results for x in part]

    # --- sphere statistics ---

    def sphere_stats(self, spec: BallSpec) -> BallScanReport:
        if not spec.generators:
            raise RegularityScanError("empty generator set")
        self._log_input(radius=spec.radius, generators=spec.names, dedupe=spec.dedupe)
        ball = WordBall(spec, jobs=self.jobs)
        records: List[RadiusRecord] = []
        for r in range(1, spec.radius + 1):
            sphere = ball.sphere(r)
            if not sphere:
                records.append(RadiusRecord(r, 0, None, None, None))
                continue
            logs = self._log_gaps([m for _, m in sphere])
            idx = int(np.argmin(logs))
            gaps = [_exp(x) for x in logs]
            records.append(RadiusRecord(r, len(sphere), gaps[idx], float(np.median(gaps)), sphere[idx][0], logs[idx]))
            logger.info(f"[{self.analyzer_name}] r={r}: {len(sphere)} elements, min gap {gaps[idx]:.6g}, "
                        f"argmin {sphere[idx][0]}")
        report = self.decide_verdict(records)
        self._log_output(report.verdict)
        return report

    def decide_verdict(self, records: List[RadiusRecord]) -> BallScanReport:
        """
        DIVERGENT-TREND: tail minima nondecreasing and the last one above the divergence threshold.
        BOUNDED-WITNESS: every tail minimum below the bounded threshold and the last one not a new high.
        """
        threshold = self._get_config_value("DIVERGENCE_THRESHOLD")
        bounded = self._get_config_value("BOUNDED_GAP_THRESHOLD")
        slack = self._get_config_value("TREND_RELATIVE_SLACK")
        radius = records[-1].radius if records else 0
        r0 = max(1, int(radius * self._get_config_value("TREND_START_FRACTION")))
        tail = [rec for rec in records if rec.radius >= r0]
        if not tail or any(rec.min_gap is None for rec in tail):
            logger.warning(f"[{self.analyzer_name}] Empty spheres in the tail (finite group?); verdict INCONCLUSIVE.")
            return BallScanReport(records, ScanVerdict.INCONCLUSIVE, trend_start=r0, threshold=threshold)
        mins = [rec.min_gap for rec in tail]
        nondecreasing = all(b >= a * (1 - slack) for a, b in zip(mins, mins[1:]))
        if nondecreasing and mins[-1] > threshold:
            return BallScanReport(records, ScanVerdict.DIVERGENT_TREND, trend_start=r0, threshold=threshold)
        earlier = mins[:-1]
        if all(g < bounded for g in mins) and (not earlier or mins[-1] <= max(earlier)):
            witness = [rec.argmin_word for rec in tail]
            return BallScanReport(records, ScanVerdict.BOUNDED_WITNESS, witness=witness, trend_start=r0,
                                  threshold=threshold)
        return BallScanReport(records, ScanVerdict.INCONCLUSIVE, trend_start=r0, threshold=threshold)

    # --- contracting subsequences ---

    def contracting_subsequence(self, ms: Sequence[RationalMatrix]) -> Optional[Tuple[List[int], ContractionLimit]]:
        """
        Longest subsequence with strictly increasing sigma1/sigma2 whose attracting
        points settle; None when the whole list has bounded gap.
        """
        if len(ms) < 3:
            logger.warning(f"[{self.analyzer_name}] contracting_subsequence needs at least 3 matrices, got {len(ms)}")
            return None
        logs = self._log_gaps(ms)
        if max(logs) < math.log(self._get_config_value("BOUNDED_GAP_THRESHOLD")):
            return None
        floor = math.log1p(self._get_config_value("GAP_EPS"))
        chosen = longest_increasing_run(logs, [i for i, lg in enumerate(logs) if lg > floor])
        if len(chosen) < 3:
            return None
        limits = {i: attracting_flag(ms[i]) for i in chosen}
        if not self._settles(chosen, limits):
            # keep the cluster around the last attracting point
            anchor = limits[chosen[-1]].attracting.point
            radius = self._get_config_value("CLUSTER_RESOLUTION")
            chosen = [i for i in chosen if fs_distance(limits[i].attracting.point, anchor) < radius]
            if len(chosen) < 3 or not self._settles(chosen, limits):
                logger.info(f"[{self.analyzer_name}] Attracting points do not settle; no contracting subsequence.")
                return None
        return chosen, limits[chosen[-1]]

    def _settles(self, chosen: List[int], limits: Mapping[int, ContractionLimit]) -> bool:
        tol = self._get_config_value("CONTRACTION_TAIL_TOLERANCE")
        length = self._get_config_value("CONTRACTION_TAIL_LENGTH")
        tail = chosen[-(length + 1):]
        return all(fs_distance(limits[a].attracting.point, limits[b].attracting.point) < tol
                   for a, b in zip(tail, tail[1:]))

    # --- limit sets ---

    def limit_set_sample(self, spec: BallSpec, gap_threshold: Optional[float] = None) -> LimitSetSample:
        threshold = self._get_config_value("LIMIT_SET_GAP_THRESHOLD") if gap_threshold is None else gap_threshold
        if not threshold > 1:
            raise RegularityScanError(f"gap_threshold must exceed 1, got {threshold}")
        resolution = self._get_config_value("LIMIT_SET_RESOLUTION")
        elements = WordBall(spec, jobs=self.jobs).ball()
        logs = self._log_gaps([m for _, m in elements])
        log_threshold = math.log(threshold)

        flags: List[ProjFlag] = []
        words: List[GroupWord] = []
        gaps: List[float] = []
        points = np.zeros((0, spec.dim))
        conormals = np.zeros((0, spec.dim))
        for (word, matrix), lg in zip(elements, logs):
            if lg < log_threshold:
                continue
            try:
                flag = attracting_flag(matrix).attracting
            except (NoContractionAxisError, FlagGeometryError) as e:
                logger.debug(f"[{self.analyzer_name}] Skipping {word}: {e}")
                continue
            p = flag.point.as_array()
            h = flag.hyperplane.as_array()
            if len(flags):
                close = (_point_rejection(points, p) < resolution) & (_point_rejection(conormals, h) < resolution)
                if close.any():
                    continue
            flags.append(flag)
            words.append(word)
            gaps.append(_exp(lg))
            points = np.vstack([points, p])
            conormals = np.vstack([conormals, h])

        sample = LimitSetSample(flags, words, spec.radius, threshold, gaps, empty_warning=not flags)
        if sample.empty_warning:
            logger.warning(f"[{self.analyzer_name}] No element of the radius-{spec.radius} ball has "
                           f"sigma1/sigma2 >= {threshold}; limit-set sample is empty.")
        else:
            logger.info(f"[{self.analyzer_name}] Sampled {len(flags)} flags (uncertainty {sample.uncertainty:.3g}).")
        return sample

    def point_clusters(self, sample: LimitSetSample, resolution: Optional[float] = None) -> List[List[int]]:
        """Greedy single-link clusters of the sampled points at the given fs resolution."""
        radius = self._get_config_value("CLUSTER_RESOLUTION") if resolution is None else resolution
        clusters: List[List[int]] = []
        for i, flag in enumerate(sample.flags):
            for cluster in clusters:
                if any(fs_distance(flag.point, sample.flags[j].point) < radius for j in cluster):
                    cluster.append(i)
                    break
            else:
                clusters.append([i])
        return clusters

    def three_point_check(self, sample: LimitSetSample) -> bool:
        """True iff the sampled points form at most three clusters."""
        clusters = self.point_clusters(sample)
        logger.debug(f"[{self.analyzer_name}] {len(clusters)} point clusters")
        return len(clusters) <= 3

    # --- horospherical lattices ---

    @staticmethod
    def _common_conormal(matrices: Sequence[RationalMatrix]) -> Optional[Tuple[Fraction, ...]]:
        for g in matrices:
            for i in range(g.dim):
                row = [g[i, j] - (1 if i == j else 0) for j in range(g.dim)]
                if any(row):
                    return tuple(row)
        return None

    def _translation_vectors(self, matrices: Sequence[Tuple[GroupWord, RationalMatrix]],
                             conormal: Sequence[Fraction]) -> Optional[List[List[float]]]:
        vectors: List[List[float]] = []
        for word, m in matrices:
            t = chart_translation(m, conormal)
            if t is None:
                logger.info(f"[{self.analyzer_name}] {word} is not a chart translation.")
                return None
            vectors.append([float(x) for x in t])
        return vectors

    def horospherical_lattice_regular_check(self, generators: Mapping[str, RationalMatrix],
                                            radius: int) -> HorosphericalCheck:
        """
        Checks that every ball element acts on one affine chart as a translation
        and that the sphere minima of sigma1/sigma2 grow.

        Plane-type lattices translate a chart of P(R^d) directly. Line-type
        lattices translate a chart of the dual projective space, so the dual
        action g -> g^-T is tried when the direct one fails.
        """
        spec = BallSpec(dict(generators), radius)
        if spec.dim not in (3, 4):
            raise RegularityScanError(f"horospherical check supports d = 3 or 4, got {spec.dim}")
        conormal = self._common_conormal(list(generators.values()))
        if conormal is None:
            raise RegularityScanError("All generators are the identity")

        ball = WordBall(spec, jobs=self.jobs)
        elements: List[Tuple[GroupWord, RationalMatrix]] = []
        min_gaps: List[float] = []
        for r in range(1, radius + 1):
            sphere = ball.sphere(r)
            elements.extend(sphere)
            if sphere:
                min_gaps.append(_exp(min(self._log_gaps([m for _, m in sphere]))))

        dual = False
        vectors = self._translation_vectors(elements, conormal)
        if vectors is None:
            dual_conormal = self._common_conormal([g.inverse_transpose() for g in generators.values()])
            dual_vectors = self._translation_vectors([(w, m.inverse_transpose()) for w, m in elements],
                                                     dual_conormal)
            if dual_vectors is not None:
                logger.info(f"[{self.analyzer_name}] Dual action is a chart translation group.")
                conormal, vectors, dual = dual_conormal, dual_vectors, True
        translations_ok = vectors is not None
        rank = int(np.linalg.matrix_rank(np.array(vectors))) if vectors else 0
        nondecreasing = all(b >= a for a, b in zip(min_gaps, min_gaps[1:]))
        return HorosphericalCheck(conormal, translations_ok, rank, min_gaps, nondecreasing, dual=dual)


_default_scanner: Optional[RegularityScanner] = None


def _scanner(jobs: Optional[int] = None) -> RegularityScanner:
    global _default_scanner
    if jobs is not None:
        return RegularityScanner(jobs=jobs)
    if _default_scanner is None:
        _default_scanner = RegularityScanner()
    return _default_scanner


def sphere_stats(spec: BallSpec, jobs: Optional[int] = None) -> BallScanReport:
    return _scanner(jobs).sphere_stats(spec)


def contracting_subsequence(ms: Sequence[RationalMatrix]) -> Optional[Tuple[List[int], ContractionLimit]]:
    return _scanner().contracting_subsequence(ms)


def limit_set_sample(spec: BallSpec, gap_threshold: Optional[float] = None,
                     jobs: Optional[int] = None) -> LimitSetSample:
    return _scanner(jobs).limit_set_sample(spec, gap_threshold)


def three_point_check(sample: LimitSetSample) -> bool:
    return _scanner().three_point_check(sample)


def horospherical_lattice_regular_check(generators: Mapping[str, RationalMatrix], radius: int) -> HorosphericalCheck:
    return _scanner().horospherical_lattice_regular_check(generators, radius)

import math
import unittest
from fractions import Fraction

from analyzers.regularity_scanner import (CSV_COLUMNS, RadiusRecord, RegularityScanError, RegularityScanner,
                                          ScanVerdict, longest_increasing_run)
from core.flag_geometry import ProjPoint, fs_distance
from core.json_utils import load_group_file
from core.rational_matrix import RationalMatrix
from core.word_ball import BallSpec
from tests.conftest import fixture_path

E1 = ProjPoint.from_vector((1, 0, 0))
E3 = ProjPoint.from_vector((0, 0, 1))


def _diag_power(n: int) -> RationalMatrix:
    return RationalMatrix.diag(2 ** n, 1, Fraction(1, 2 ** n))


class ScannerTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        _, cls.plane_generators = load_group_file(fixture_path("horospherical_plane.json"))
        _, cls.line_generators = load_group_file(fixture_path("horospherical_line.json"))
        _, cls.diagonal_generators = load_group_file(fixture_path("diagonal_group.json"))

    def setUp(self):
        self.scanner = RegularityScanner(jobs=1)


class TestSphereStats(ScannerTestCase):
    def test_plane_lattice_diverges(self):
        report = self.scanner.sphere_stats(BallSpec(self.plane_generators, 20))
        self.assertEqual(report.verdict, ScanVerdict.DIVERGENT_TREND)
        self.assertIsNone(report.witness)
        self.assertEqual([rec.sphere_size for rec in report.records[:3]], [4, 8, 12])
        mins = [rec.min_gap for rec in report.records]
        self.assertEqual(mins, sorted(mins))
        self.assertGreater(mins[-1], 10)

    def test_diagonal_group_has_bounded_witness(self):
        report = self.scanner.sphere_stats(BallSpec(self.diagonal_generators, 10))
        self.assertEqual(report.verdict, ScanVerdict.BOUNDED_WITNESS)
        self.assertEqual(len(report.witness), len(report.records) - report.trend_start + 1)
        self.assertAlmostEqual(report.records[-1].min_gap, 1.0, delta=1e-9)

    def test_single_proximal_generator_diverges(self):
        spec = BallSpec({"x": RationalMatrix.diag(4, 1, Fraction(1, 4))}, 10)
        report = self.scanner.sphere_stats(spec)
        self.assertEqual(report.verdict, ScanVerdict.DIVERGENT_TREND)
        self.assertAlmostEqual(report.records[-1].min_gap / 4.0 ** 10, 1.0, delta=1e-9)
        self.assertIn(str(report.records[0].argmin_word), ("x", "x^-1"))

    def test_finite_group_is_inconclusive(self):
        spec = BallSpec({"x": RationalMatrix.diag(-1, -1, 1)}, 4)
        report = self.scanner.sphere_stats(spec)
        self.assertEqual(report.verdict, ScanVerdict.INCONCLUSIVE)
        self.assertEqual(report.records[-1].sphere_size, 0)

    def test_threshold_override_changes_verdict(self):
        strict = RegularityScanner(config={"DIVERGENCE_THRESHOLD": 1000.0}, jobs=1)
        report = strict.sphere_stats(BallSpec(self.plane_generators, 8))
        self.assertEqual(report.verdict, ScanVerdict.INCONCLUSIVE)

    def test_decide_verdict_on_handmade_records(self):
        records = [RadiusRecord(r, 4, g, g, None) for r, g in enumerate([2.0, 3.0, 2.5, 3.0], start=1)]
        self.assertEqual(self.scanner.decide_verdict(records).verdict, ScanVerdict.BOUNDED_WITNESS)
        records = [RadiusRecord(r, 4, g, g, None) for r, g in enumerate([2.0, 3.0, 8.0, 12.0], start=1)]
        self.assertEqual(self.scanner.decide_verdict(records).verdict, ScanVerdict.DIVERGENT_TREND)

    def test_report_serializes(self):
        report = self.scanner.sphere_stats(BallSpec(self.diagonal_generators, 4))
        out = report.to_dict()
        self.assertEqual(out["verdict"], "BOUNDED-WITNESS")
        self.assertEqual(out["radius"], 4)
        rows = report.csv_rows()
        self.assertEqual(len(rows), 4)
        self.assertTrue(all(len(row) == len(CSV_COLUMNS) for row in rows))


class TestContractingSubsequence(ScannerTestCase):
    def test_diagonal_powers(self):
        ms = [_diag_power(n) for n in range(1, 11)]
        indices, limit = self.scanner.contracting_subsequence(ms)
        self.assertEqual(indices, list(range(10)))
        self.assertLess(fs_distance(limit.attracting.point, E1), 1e-12)

    def test_bounded_gap_gives_none(self):
        ms = [RationalMatrix.diag(2 ** n, 2 ** n, Fraction(1, 4 ** n)) for n in range(1, 11)]
        self.assertIsNone(self.scanner.contracting_subsequence(ms))

    def test_short_sequence_gives_none(self):
        self.assertIsNone(self.scanner.contracting_subsequence([RationalMatrix.diag(4, 1, Fraction(1, 4))]))

    def test_interleaved_families_keep_the_contracting_one(self):
        ms = []
        for n in range(1, 11):
            ms.append(_diag_power(n))
            ms.append(RationalMatrix.diag(2 ** n, 2 ** n, Fraction(1, 4 ** n)))
        indices, limit = self.scanner.contracting_subsequence(ms)
        self.assertEqual(indices, list(range(0, 20, 2)))
        self.assertLess(fs_distance(limit.attracting.point, E1), 1e-12)

    def test_large_first_element_does_not_hide_the_tail(self):
        ms = [_diag_power(30)] + [_diag_power(n) for n in range(1, 21)]
        result = self.scanner.contracting_subsequence(ms)
        self.assertIsNotNone(result)
        indices, limit = result
        self.assertEqual(indices, list(range(1, 21)))
        self.assertLess(fs_distance(limit.attracting.point, E1), 1e-12)

    def test_longest_increasing_run(self):
        values = [5.0, 1.0, 2.0, 2.0, 3.0, 0.5, 4.0]
        self.assertEqual(longest_increasing_run(values, range(len(values))), [1, 3, 4, 6])
        self.assertEqual(longest_increasing_run(values, [0, 5]), [5])
        self.assertEqual(longest_increasing_run(values, []), [])


class TestLimitSetSample(ScannerTestCase):
    def test_cyclic_sample(self):
        spec = BallSpec({"x": RationalMatrix.diag(4, 1, Fraction(1, 4))}, 5)
        sample = self.scanner.limit_set_sample(spec, gap_threshold=10)
        self.assertEqual([str(w) for w in sample.words], ["x^2", "x^-2"])
        for gap in sample.gaps:
            self.assertAlmostEqual(gap, 16.0, places=9)
        self.assertAlmostEqual(sample.uncertainty, 1 / 16, places=12)
        self.assertLess(fs_distance(sample.flags[0].point, E1), 1e-12)
        self.assertLess(fs_distance(sample.flags[1].point, E3), 1e-12)
        self.assertEqual(len(sample.csv_rows()), 2)
        self.assertEqual(sample.csv_header(), ["word", "gap", "p0", "p1", "p2", "h0", "h1", "h2"])

    def test_empty_sample_warns(self):
        spec = BallSpec({"x": RationalMatrix.diag(2, 1, Fraction(1, 2))}, 2)
        sample = self.scanner.limit_set_sample(spec, gap_threshold=100)
        self.assertTrue(sample.empty_warning)
        self.assertEqual(sample.flags, [])
        self.assertEqual(sample.to_dict()["flags"], [])

    def test_threshold_must_exceed_one(self):
        spec = BallSpec({"x": RationalMatrix.diag(2, 1, Fraction(1, 2))}, 2)
        with self.assertRaises(RegularityScanError):
            self.scanner.limit_set_sample(spec, gap_threshold=1.0)

    def test_plane_lattice_limit_set_structure(self):
        sample = self.scanner.limit_set_sample(BallSpec(self.plane_generators, 20), gap_threshold=10)
        self.assertGreater(len(sample.flags), 50)
        angles = []
        for flag, gap in zip(sample.flags, sample.gaps):
            # sampled flags approach (z, ker e3^T) at rate 1/gap
            conormal = ProjPoint.from_vector(flag.hyperplane.conormal)
            self.assertLessEqual(fs_distance(conormal, E3), 2 / gap)
            p = flag.point.direction
            self.assertLessEqual(abs(p[2]), 2 / gap)
            angles.append(math.atan2(p[1], p[0]) % math.pi)
        angles.sort()
        steps = [b - a for a, b in zip(angles, angles[1:])] + [angles[0] + math.pi - angles[-1]]
        self.assertLess(max(steps), 0.2)

    def test_three_point_check(self):
        diagonal = self.scanner.limit_set_sample(BallSpec(self.diagonal_generators, 6), gap_threshold=10)
        self.assertFalse(diagonal.empty_warning)
        self.assertEqual(len(self.scanner.point_clusters(diagonal)), 3)
        self.assertTrue(self.scanner.three_point_check(diagonal))
        plane = self.scanner.limit_set_sample(BallSpec(self.plane_generators, 12), gap_threshold=10)
        self.assertFalse(self.scanner.three_point_check(plane))


class TestHorosphericalCheck(ScannerTestCase):
    def test_plane_lattice_acts_by_translations(self):
        check = self.scanner.horospherical_lattice_regular_check(self.plane_generators, 6)
        self.assertEqual(check.conormal, (0, 0, 1))
        self.assertTrue(check.translations)
        self.assertFalse(check.dual)
        self.assertEqual(check.translation_rank, 2)
        self.assertTrue(check.regular)
        self.assertIs(check.to_dict()["regular"], True)

    def test_line_lattice_translates_the_dual_chart(self):
        check = self.scanner.horospherical_lattice_regular_check(self.line_generators, 6)
        self.assertTrue(check.translations)
        self.assertTrue(check.dual)
        self.assertEqual(check.conormal, (-1, 0, 0))
        self.assertEqual(check.translation_rank, 2)
        self.assertTrue(check.nondecreasing)
        self.assertTrue(check.regular)
        self.assertIs(check.to_dict()["dual"], True)

    def test_diagonal_group_is_not_a_translation_group(self):
        check = self.scanner.horospherical_lattice_regular_check(self.diagonal_generators, 2)
        self.assertFalse(check.translations)
        self.assertFalse(check.regular)

    def test_identity_generators_rejected(self):
        with self.assertRaises(RegularityScanError):
            self.scanner.horospherical_lattice_regular_check({"x": RationalMatrix.identity(3)}, 2)


if __name__ == '__main__':
    unittest.main()

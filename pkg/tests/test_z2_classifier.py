import random
import unittest
from fractions import Fraction

from analyzers.z2_classifier import Z2Classifier, classify_z2, dual_verdict_kind, first_indices, witness_family
from core.singular_values import cartan_projection, sigma_gap
from core.unipotent_z2 import (VerdictKind, WitnessKind, Z2UnipotentRep, abelian_sphere, claim2_exponent, dual_z2_rep,
                               z2_element)


def _random_rep(rng: random.Random) -> Z2UnipotentRep:
    """Random commuting pair covering every normal form, degenerate ones included."""
    def r():
        return rng.randint(-4, 4)
    kind = rng.choice(["plane", "line", "full", "mixed", "center"])
    if kind == "plane":
        return Z2UnipotentRep(0, r(), r(), 0, r(), r())
    if kind == "line":
        return Z2UnipotentRep(r(), r(), 0, r(), r(), 0)
    if kind == "center":
        return Z2UnipotentRep(0, r(), 0, 0, r(), 0)
    lam = Fraction(rng.choice([1, 2, 3, -1]), rng.choice([1, 2]))
    a_x = rng.choice([1, 2, -1, 3])
    if kind == "mixed":
        return Z2UnipotentRep(0, r(), 0, a_x, r(), lam * a_x)
    a_y = r()
    return Z2UnipotentRep(a_x, r(), lam * a_x, a_y, r(), lam * a_y)


class TestClassifyZ2(unittest.TestCase):
    def setUp(self):
        self.classifier = Z2Classifier()

    def test_plane_type_lattice(self):
        verdict = self.classifier.classify(Z2UnipotentRep.from_values([0, 1, 0, 0, 0, 1]))
        self.assertEqual(verdict.kind, VerdictKind.REGULAR_LATTICE_PLANE_TYPE)
        self.assertIsNone(verdict.witness)

    def test_line_type_lattice(self):
        verdict = self.classifier.classify(Z2UnipotentRep.from_values([1, 0, 0, 0, 1, 0]))
        self.assertEqual(verdict.kind, VerdictKind.REGULAR_LATTICE_LINE_TYPE)

    def test_claim2_rep_is_not_regular(self):
        verdict = self.classifier.classify(Z2UnipotentRep.from_values([1, 0, 1, 1, 1, 1]))
        self.assertEqual(verdict.kind, VerdictKind.NOT_REGULAR)
        self.assertEqual(verdict.witness.kind, WitnessKind.CLAIM2)
        self.assertEqual(verdict.constants["Z_xy"], "2")
        self.assertEqual(verdict.witness.exponents(-8), (12, -8))
        self.assertEqual(str(verdict.witness.word(-8)), "x^12 y^-8")

    def test_rank_one_image(self):
        verdict = self.classifier.classify(Z2UnipotentRep.from_values([0, 1, 0, 0, 2, 0]))
        self.assertEqual(verdict.kind, VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE)
        verdict = self.classifier.classify(Z2UnipotentRep.from_values([0, 1, 2, 0, 2, 4]))
        self.assertEqual(verdict.kind, VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE)

    def test_z_zero_rep(self):
        verdict = self.classifier.classify(Z2UnipotentRep.from_values([1, 0, 1, -1, 1, -1]))
        self.assertEqual(verdict.kind, VerdictKind.NOT_FAITHFUL_OR_NOT_DISCRETE)
        self.assertEqual(verdict.witness.kind, WitnessKind.Z_ZERO_DISCRETENESS)

    def test_mixed_rep_reports_original_exponents(self):
        rep = Z2UnipotentRep.from_values([0, 1, 0, 1, 1, 1])
        verdict = self.classifier.classify(rep)
        self.assertEqual(verdict.kind, VerdictKind.NOT_REGULAR)
        self.assertEqual(verdict.witness.kind, WitnessKind.MIXED_REDUCED)
        self.assertEqual(verdict.normalization[0]["x'"], "x y")
        for point in self.classifier.witness_family(rep, first_indices(verdict.witness, 30)):
            self.assertLessEqual(point.gap, verdict.witness.bound)

    def test_verdict_serializes(self):
        out = classify_z2(Z2UnipotentRep.from_values([1, 0, 1, 1, 1, 1])).to_dict()
        self.assertEqual(out["verdict"], "NOT_REGULAR")
        self.assertEqual(len(out["witness"]["sample_words"]), 5)


class TestWitnessFamily(unittest.TestCase):
    def test_claim2_family_bounded_gap_and_growing_norm(self):
        rep = Z2UnipotentRep.from_values([1, 0, 1, 1, 1, 1])
        for m in range(-1, -10001, -1):
            n = claim2_exponent(rep, m)
            g = z2_element(rep, n, m).to_matrix()
            self.assertLessEqual(sigma_gap(g), 50)
            if m <= -16:
                self.assertGreaterEqual(g.frobenius_norm_sq(), -m)

    def test_spot_value(self):
        rep = Z2UnipotentRep.from_values([1, 0, 1, 1, 1, 1])
        (point,) = witness_family(rep, [-8])
        self.assertEqual(point.exponents, (12, -8))
        self.assertEqual(point.ratio, Fraction(18, 13))
        lower, upper = point.gap_bracket
        self.assertLessEqual(lower, point.gap)
        self.assertLessEqual(point.gap, upper)


class TestRegularLattices(unittest.TestCase):
    def test_plane_lattice_ratio_grows_linearly(self):
        rep = Z2UnipotentRep.from_values([0, 1, 0, 0, 0, 1])
        profile = Z2Classifier().ratio_profile(rep, 200)
        for r in range(4, 201):
            self.assertGreaterEqual(profile[r - 1], Fraction(r, 4))
        self.assertEqual(profile, sorted(profile))

    def test_numeric_gap_tracks_ratio(self):
        rep = Z2UnipotentRep.from_values([0, 1, 0, 0, 0, 1])
        for r in (10, 50, 200):
            worst = min(sigma_gap(z2_element(rep, n, m).to_matrix()) for n, m in abelian_sphere(r))
            self.assertGreaterEqual(worst, r / 4 / 27)


class TestDuality(unittest.TestCase):
    def test_verdicts_invariant_under_duality(self):
        rng = random.Random(11)
        for _ in range(100):
            rep = _random_rep(rng)
            kind = classify_z2(rep).kind
            dual_kind = classify_z2(dual_z2_rep(rep)).kind
            self.assertEqual(dual_verdict_kind(kind), dual_kind, msg=f"rep {rep.to_dict()}")

    def test_dual_gap_is_lower_gap_of_original(self):
        rep = Z2UnipotentRep.from_values([1, 0, 1, 1, 1, 1])
        dual = dual_z2_rep(rep)
        for n, m in abelian_sphere(5):
            mu = cartan_projection(z2_element(rep, n, m).to_matrix()).mu
            mu_dual = cartan_projection(z2_element(dual, n, m).to_matrix()).mu
            self.assertAlmostEqual(mu_dual[0] - mu_dual[1], mu[1] - mu[2], places=9)

if __name__ == '__main__':
    unittest.main()

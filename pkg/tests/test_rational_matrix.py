import unittest
from fractions import Fraction

from core.rational_matrix import (RationalMatrix, RationalMatrixError, frobenius_norm_sq, parse_rational,
                                  require_special_linear, rescale_to_unit_determinant)


class TestParseRational(unittest.TestCase):
    def test_accepts_exact_forms(self):
        self.assertEqual(parse_rational("3/4"), Fraction(3, 4))
        self.assertEqual(parse_rational(" -2 "), Fraction(-2))
        self.assertEqual(parse_rational(5), Fraction(5))

    def test_refuses_floats_and_garbage(self):
        for bad in (0.5, "1/0", "abc", "", True):
            with self.assertRaises(RationalMatrixError):
                parse_rational(bad)


class TestRationalMatrix(unittest.TestCase):
    def setUp(self):
        self.u = RationalMatrix.unitriangular(4, -2, 4)

    def test_unitriangular_inverse_formula(self):
        # inverse of (x, y, z) is (-x, xz - y, -z)
        self.assertEqual(RationalMatrix.unitriangular(1, 1, 1).inverse(), RationalMatrix.unitriangular(-1, 0, -1))
        self.assertEqual(self.u.inverse(), RationalMatrix.unitriangular(-4, 18, -4))

    def test_inverse_round_trip(self):
        g = RationalMatrix([["2", "1", "0"], ["1", "1", "0"], ["0", "3", "1"]])
        self.assertTrue((g @ g.inverse()).is_identity())
        self.assertTrue((g.inverse() @ g).is_identity())

    def test_singular_inverse_raises(self):
        with self.assertRaises(RationalMatrixError):
            RationalMatrix([[1, 2, 3], [2, 4, 6], [0, 0, 1]]).inverse()

    def test_frobenius_examples(self):
        self.assertEqual(frobenius_norm_sq(RationalMatrix.identity(3)), 3)
        self.assertEqual(frobenius_norm_sq(RationalMatrix.unitriangular(1, 1, 1)), 6)
        self.assertEqual(frobenius_norm_sq(self.u), 39)

    def test_power_and_negative_power(self):
        g = RationalMatrix.diag(4, 1, Fraction(1, 4))
        self.assertEqual(g.power(3), RationalMatrix.diag(64, 1, Fraction(1, 64)))
        self.assertEqual(g.power(-2), RationalMatrix.diag(Fraction(1, 16), 1, 16))
        self.assertTrue(g.power(0).is_identity())

    def test_determinant_and_special_linear(self):
        g = RationalMatrix.diag(2, 3, 1)
        self.assertEqual(g.det(), 6)
        with self.assertRaises(RationalMatrixError):
            require_special_linear(g)
        self.assertEqual(rescale_to_unit_determinant(g).det(), 1)

    def test_rejects_bad_shapes(self):
        with self.assertRaises(RationalMatrixError):
            RationalMatrix([[1, 0], [0]])
        with self.assertRaises(RationalMatrixError):
            RationalMatrix([[1] * 5 for _ in range(5)])

    def test_hash_and_equality_are_exact(self):
        a = RationalMatrix([["1/2", "0"], ["0", "2"]])
        b = RationalMatrix([[Fraction(2, 4), 0], [0, 2]])
        self.assertEqual(a, b)
        self.assertEqual(len({a, b}), 1)

    def test_scaled_float_array_reconstructs(self):
        g = RationalMatrix.unitriangular(0, 10 ** 40, 0)
        arr, e = g.scaled_float_array()
        self.assertLess(abs(arr).max(), 2.0)
        self.assertAlmostEqual(arr[0, 2] * 2.0 ** e / 1e40, 1.0, places=12)


if __name__ == '__main__':
    unittest.main()

import unittest
from fractions import Fraction

import numpy as np

from core.flag_geometry import ProjPoint, fs_distance
from core.json_utils import load_group_file
from core.proximality import ProximalityError, eigenvalue_roots, is_biproximal, is_proximal
from core.rational_matrix import RationalMatrix
from tests.conftest import fixture_path


class TestIsProximal(unittest.TestCase):
    def test_diagonal_is_proximal(self):
        report = is_proximal(RationalMatrix.diag(4, 1, Fraction(1, 4)))
        self.assertTrue(report.is_proximal)
        self.assertAlmostEqual(report.top_eigenvalue, 4.0)
        self.assertAlmostEqual(report.second_modulus, 1.0)
        self.assertLess(fs_distance(report.attracting_point, ProjPoint.from_vector((1, 0, 0))), 1e-12)
        np.testing.assert_allclose(report.repelling_hyperplane.conormal, (1.0, 0.0, 0.0), atol=1e-12)
        np.testing.assert_allclose(report.attracting.hyperplane.conormal, (0.0, 0.0, 1.0), atol=1e-12)

    def test_negative_top_eigenvalue(self):
        report = is_proximal(RationalMatrix.diag(-4, -1, Fraction(1, 4)))
        self.assertTrue(report.is_proximal)
        self.assertAlmostEqual(report.top_eigenvalue, -4.0)

    def test_repeated_eigenvalues_are_exact(self):
        self.assertEqual(eigenvalue_roots(RationalMatrix.unitriangular(1, 1, 1)), [1, 1, 1])
        report = is_proximal(RationalMatrix.unitriangular(1, 1, 1))
        self.assertFalse(report.is_proximal)
        self.assertIsNone(report.attracting_point)

    def test_rotation_block_is_not_proximal(self):
        g = RationalMatrix([[0, -2, 0], [2, 0, 0], [0, 0, Fraction(1, 4)]])
        report = is_proximal(g)
        self.assertFalse(report.is_proximal)
        self.assertAlmostEqual(report.moduli[0], report.moduli[1])

    def test_singular_matrix_raises(self):
        with self.assertRaises(ProximalityError):
            is_proximal(RationalMatrix([[1, 2, 3], [2, 4, 6], [0, 0, 1]]))


class TestBiproximal(unittest.TestCase):
    def test_conjugated_diagonal_fixed_points(self):
        _, gens = load_group_file(fixture_path("sanov_group.json"))
        forward, backward = is_biproximal(gens["y"])
        self.assertTrue(forward.is_proximal and backward.is_proximal)
        self.assertLess(fs_distance(forward.attracting_point, ProjPoint.from_vector((1, 1, 1))), 1e-9)
        self.assertLess(fs_distance(backward.attracting_point, ProjPoint.from_vector((1, -1, 2))), 1e-9)
        # the attracting hyperplane contains the attracting point
        p = forward.attracting.point.direction
        phi = forward.attracting.hyperplane.conormal
        self.assertLess(abs(sum(a * b for a, b in zip(p, phi))), 1e-9)


if __name__ == '__main__':
    unittest.main()

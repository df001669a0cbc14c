import math
import unittest
from fractions import Fraction

import numpy as np

from config import settings
from core.ball_sets import (BallSetError, BallUnionSet, ResolutionError, ball_resolution, check_map_inclusion,
                            fs_distances, grid_points, grid_samples, image_ball, map_set_inclusion, separation,
                            sets_disjoint)
from core.flag_geometry import ProjHyperplane, ProjPoint
from core.json_utils import FileFormatError
from core.rational_matrix import RationalMatrix

E1 = ProjPoint.from_vector((1, 0, 0))
E2 = ProjPoint.from_vector((0, 1, 0))
DIAG = RationalMatrix.diag(4, 1, Fraction(1, 4))


def ball(center, radius):
    return BallUnionSet.single(ProjPoint.from_vector(center), radius)


def uniform_in_ball(rng: np.random.Generator, center: np.ndarray, radius: float, count: int) -> np.ndarray:
    basis = np.linalg.svd(center[None, :])[2][1:]
    out = []
    for _ in range(count):
        v = rng.uniform(-1, 1, len(center) - 1)
        v *= rng.uniform(0, radius) / np.linalg.norm(v)
        length = np.linalg.norm(v)
        out.append(math.cos(length) * center + math.sin(length) * (v @ basis) / length)
    return np.array(out)


class TestBallUnionSet(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(BallSetError):
            BallUnionSet((), ())
        with self.assertRaises(BallSetError):
            BallUnionSet.single(E1, 2.0)
        with self.assertRaises(BallSetError):
            BallUnionSet((E1, E2), (0.1,))
        with self.assertRaises(BallSetError):
            BallUnionSet((E1, ProjPoint.from_vector((1, 0, 0, 0))), (0.1, 0.1))

    def test_fs_distances_use_projective_sign(self):
        points = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        centers = np.array([[-1.0, 0.0, 0.0]])
        np.testing.assert_allclose(fs_distances(points, centers)[:, 0], [0.0, math.pi / 2], atol=1e-12)

    def test_containment_and_clearance(self):
        b = BallUnionSet.single(E1, 0.1)
        self.assertTrue(b.contains(ProjPoint.from_vector((1, 0.05, 0))))
        self.assertFalse(b.contains(ProjPoint.from_vector((1, 0.2, 0))))
        self.assertAlmostEqual(b.hyperplane_clearance(ProjHyperplane.from_covector((0, 1, 0))), -0.1, places=12)
        self.assertAlmostEqual(b.hyperplane_clearance(ProjHyperplane.from_covector((1, 0, 0))),
                               math.pi / 2 - 0.1, places=12)
        self.assertAlmostEqual(b.max_radius, 0.1)

    def test_clear_of_shrinks_and_drops(self):
        near = ProjPoint.from_vector((math.cos(0.3), math.sin(0.3), 0))
        balls = BallUnionSet.from_balls([(E1, 0.2), (near, 0.28), (E2, 0.05)])
        # hyperplane y = 0 contains e1 and passes 0.3 from `near`
        fitted = balls.clear_of([ProjHyperplane.from_covector((0, 1, 0))], gap=0.04)
        self.assertEqual(len(fitted), 2)
        self.assertAlmostEqual(fitted.radii[0], 0.26, places=12)
        self.assertAlmostEqual(fitted.radii[1], 0.05, places=12)
        self.assertGreater(fitted.hyperplane_clearance(ProjHyperplane.from_covector((0, 1, 0))), 0.039)
        self.assertIsNone(BallUnionSet.single(E1, 0.1).clear_of([ProjHyperplane.from_covector((0, 1, 0))], 0.01))

    def test_separation(self):
        a = BallUnionSet.single(E1, 0.1)
        b = BallUnionSet.single(E2, 0.1)
        self.assertAlmostEqual(separation(a, b), math.pi / 2 - 0.2, places=12)
        self.assertTrue(sets_disjoint(a, b))
        self.assertFalse(sets_disjoint(a, ball((1, 0.1, 0), 0.5)))
        self.assertFalse(sets_disjoint(a, a.union(b)))

    def test_json_form(self):
        b = BallUnionSet.from_balls([(E1, 0.1), (ProjPoint.from_vector((1, 1, 1)), 0.05)])
        back = BallUnionSet.from_json(b.to_json())
        self.assertEqual(back.radii, b.radii)
        np.testing.assert_allclose(back.centers[1].direction, b.centers[1].direction)
        with self.assertRaises(FileFormatError):
            BallUnionSet.from_json([{"center": [1, 0, 0]}])


class TestGrid(unittest.TestCase):
    def test_grid_covers_ball(self):
        b = ball((1, 2, 2), 0.1)
        h = 0.01
        grid = grid_points(b, h)
        samples = uniform_in_ball(np.random.default_rng(0), np.array(b.centers[0].direction), 0.1, 200)
        self.assertLessEqual(fs_distances(samples, grid).min(axis=1).max(), h + 1e-12)

    def test_small_balls_get_a_finer_step(self):
        b = BallUnionSet.from_balls([(E1, 0.1), (E2, 0.002)])
        points, steps = grid_samples(b, 0.01)
        self.assertEqual(len(points), len(steps))
        self.assertEqual(set(steps.tolist()), {0.01, settings.GRID_RADIUS_FRACTION * 0.002})
        self.assertEqual(ball_resolution(0.002, 0.01), settings.GRID_RADIUS_FRACTION * 0.002)
        small = points[steps < 0.01]
        samples = uniform_in_ball(np.random.default_rng(1), np.array(E2.direction), 0.002, 200)
        self.assertLessEqual(fs_distances(samples, small).min(axis=1).max(), ball_resolution(0.002, 0.01) + 1e-12)

    def test_resolution_range(self):
        b = BallUnionSet.single(E1, 0.1)
        for h in (0.0, 1.0, 1.5):
            with self.assertRaises(BallSetError):
                grid_points(b, h)


class TestMapInclusion(unittest.TestCase):
    def test_identity_inclusion_margin(self):
        check = check_map_inclusion(RationalMatrix.identity(3), BallUnionSet.single(E1, 0.1),
                                    BallUnionSet.single(E1, 0.2), h=0.01, jobs=1)
        self.assertTrue(check.holds)
        self.assertTrue(0.07 < check.margin < 0.1)
        self.assertIs(check.to_dict()["holds"], True)

    def test_identity_does_not_shrink(self):
        self.assertFalse(map_set_inclusion(RationalMatrix.identity(3), BallUnionSet.single(E1, 0.1),
                                           BallUnionSet.single(E1, 0.05), h=0.01, jobs=1))

    def test_coarse_grid_raises(self):
        # the step on the source is 0.0125, larger than every target radius
        with self.assertRaises(ResolutionError):
            check_map_inclusion(RationalMatrix.identity(3), BallUnionSet.single(E1, 0.1),
                                BallUnionSet.single(E1, 0.01), h=0.5, jobs=1)

    def test_contraction_toward_attracting_point(self):
        g = DIAG.power(5)
        source = ball((1, 1, 1), 0.1)
        big = check_map_inclusion(g, source, BallUnionSet.single(E1, 0.1), jobs=1)
        small = check_map_inclusion(g, source, BallUnionSet.single(E1, 0.05), jobs=1)
        self.assertTrue(big.holds and small.holds)
        self.assertGreater(big.margin, 0.09)
        self.assertGreaterEqual(big.margin, small.margin)
        # the source is pushed away from e2
        self.assertFalse(map_set_inclusion(g, source, BallUnionSet.single(E2, 0.5), jobs=1))

    def test_monotone_in_source_and_target(self):
        source_radii = [0.1, 0.05, 0.02]
        target_radii = [0.02, 0.05, 0.1, 0.4]
        for k in range(1, 6):
            g = DIAG.power(k)
            table = [[map_set_inclusion(g, ball((1, 1, 1), rs), BallUnionSet.single(E1, rt), h=0.01, jobs=1)
                      for rt in target_radii] for rs in source_radii]
            for i, j in np.ndindex(len(source_radii), len(target_radii)):
                if table[i][j]:
                    # smaller sources are later rows, larger targets later columns
                    self.assertTrue(all(table[a][b] for a in range(i, len(source_radii))
                                        for b in range(j, len(target_radii))), msg=f"k = {k}, table {table}")
            self.assertTrue(table[-1][-1])


class TestImageBall(unittest.TestCase):
    def test_contains_images(self):
        source = ball((1, 1, 1), 0.1)
        image = image_ball(DIAG, source, h=0.01)
        a = DIAG.to_float_array()
        for q in grid_points(source, 0.01):
            self.assertTrue(image.contains(ProjPoint.from_vector(a @ q)))

    def test_margin_is_the_padding(self):
        source = BallUnionSet.from_balls([(ProjPoint.from_vector((1, 1, 1)), 0.01),
                                          (ProjPoint.from_vector((1, -1, 2)), 0.002)])
        for g in (DIAG, DIAG.inverse(), RationalMatrix.unitriangular(1, 2, 3)):
            image = image_ball(g, source, h=0.01, jobs=1)
            self.assertEqual(len(image), 2)
            for center, radius, target, reach in zip(source.centers, source.radii, image.centers, image.radii):
                check = check_map_inclusion(g, BallUnionSet.single(center, radius),
                                            BallUnionSet.single(target, reach), h=0.01, jobs=1)
                self.assertTrue(check.holds)
                self.assertAlmostEqual(check.margin, settings.IMAGE_BALL_PADDING, delta=1e-9)
            self.assertGreaterEqual(check_map_inclusion(g, source, image, h=0.01, jobs=1).margin,
                                    settings.CERTIFICATE_MIN_MARGIN)

    def test_image_of_a_contracted_ball_stays_small(self):
        source = ball((1, 1, 1), 0.002)
        image = image_ball(DIAG.power(3), source, h=0.01, jobs=1)
        self.assertLess(image.radii[0], 0.002)


if __name__ == '__main__':
    unittest.main()

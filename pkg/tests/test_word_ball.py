import unittest
from fractions import Fraction

from core.rational_matrix import RationalMatrix
from core.word_ball import (BallSpec, BallSpecError, WordBall, ball_from_generators, enumerate_ball,
                            enumerate_sphere, free_sphere_size)


class TestBallSpec(unittest.TestCase):
    def test_radius_cap(self):
        with self.assertRaises(BallSpecError):
            BallSpec({"x": RationalMatrix.identity(3)}, 1000)
        spec = BallSpec({"x": RationalMatrix.identity(3)}, 40, radius_cap=50)
        self.assertEqual(spec.radius, 40)

    def test_rejects_bad_generators(self):
        with self.assertRaises(BallSpecError):
            BallSpec({}, 2)
        with self.assertRaises(BallSpecError):
            BallSpec({"x": RationalMatrix([[1, 2, 3], [2, 4, 6], [0, 0, 1]])}, 2)
        with self.assertRaises(BallSpecError):
            BallSpec({"x": RationalMatrix.identity(3), "y": RationalMatrix.identity(4)}, 2)


class TestWordBall(unittest.TestCase):
    def setUp(self):
        self.horo = {"x": RationalMatrix.elementary(3, 0, 2), "y": RationalMatrix.elementary(3, 1, 2)}

    def test_single_generator_sphere(self):
        spec = BallSpec({"x": RationalMatrix.diag(4, 1, Fraction(1, 4))}, 2)
        self.assertEqual([str(w) for w, _ in enumerate_sphere(spec, 2)], ["x^2", "x^-2"])

    def test_first_sphere_in_alphabet_order(self):
        spec = BallSpec(self.horo, 1)
        self.assertEqual([str(w) for w, _ in enumerate_sphere(spec, 1)], ["x", "x^-1", "y", "y^-1"])

    def test_commuting_pair_dedupes(self):
        spec = BallSpec(self.horo, 2)
        sphere = enumerate_sphere(spec, 2)
        self.assertEqual(len(sphere), 8)
        self.assertEqual(len({m for _, m in sphere}), 8)

    def test_free_sphere_counts(self):
        spec = BallSpec(self.horo, 3, dedupe=False)
        ball = WordBall(spec, jobs=1)
        for r in range(1, 4):
            self.assertEqual(len(ball.sphere(r)), free_sphere_size(2, r))

    def test_ball_is_length_lex_and_matches_words(self):
        spec = ball_from_generators(self.horo, 3)
        elements = enumerate_ball(spec, jobs=1)
        lengths = [len(w) for w, _ in elements]
        self.assertEqual(lengths, sorted(lengths))
        self.assertTrue(all(not w.is_identity() for w, _ in elements))
        # Z^2 ball of radius 3 without the origin
        self.assertEqual(len(elements), 2 * 3 * 4)

    def test_dedupe_is_global_across_spheres(self):
        # x y x^-1 is a reduced word of length 3 equal to y, so it never reappears
        ball = WordBall(BallSpec(self.horo, 3), jobs=1)
        sphere = ball.sphere(3)
        self.assertEqual(len(sphere), 12)
        shorter = {m for r in (1, 2) for _, m in ball.sphere(r)}
        self.assertTrue(all(m not in shorter for _, m in sphere))
        self.assertNotIn("x y x^-1", [str(w) for w, _ in sphere])

    def test_finite_group_never_yields_identity(self):
        flip = RationalMatrix.diag(-1, -1, 1)
        spec = BallSpec({"x": flip}, 3)
        ball = WordBall(spec, jobs=1)
        self.assertEqual([str(w) for w, _ in ball.sphere(1)], ["x"])
        self.assertEqual(ball.sphere(2), [])
        self.assertEqual(ball.sphere(3), [])
        self.assertEqual(len(ball.ball(include_identity=True)), 2)

    def test_sphere_beyond_radius_raises(self):
        ball = WordBall(BallSpec(self.horo, 2), jobs=1)
        with self.assertRaises(BallSpecError):
            ball.sphere(3)


if __name__ == '__main__':
    unittest.main()

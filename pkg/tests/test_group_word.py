import random
import unittest
from fractions import Fraction

from core.group_word import GroupWord, GroupWordError, WordParseError, parse_word, word_eval
from core.rational_matrix import RationalMatrix


class TestParseWord(unittest.TestCase):
    def test_round_trip_text(self):
        self.assertEqual(str(parse_word("x^3 y^-2")), "x^3 y^-2")
        self.assertEqual(str(parse_word("x x y^-1 y")), "x^2")

    def test_identity_forms(self):
        self.assertTrue(parse_word("").is_identity())
        self.assertTrue(parse_word("1").is_identity())
        self.assertEqual(str(GroupWord.identity()), "1")

    def test_malformed_reports_position(self):
        with self.assertRaises(WordParseError) as ctx:
            parse_word("x y^")
        self.assertEqual(ctx.exception.line, 1)
        self.assertEqual(ctx.exception.column, 3)

    def test_zero_exponent_rejected(self):
        with self.assertRaises(WordParseError):
            parse_word("x^0")

    def test_second_line_column(self):
        with self.assertRaises(WordParseError) as ctx:
            parse_word("x\n  y^a")
        self.assertEqual((ctx.exception.line, ctx.exception.column), (2, 3))


class TestGroupWordAlgebra(unittest.TestCase):
    def test_inverse_and_power(self):
        w = parse_word("x^2 y^-1")
        self.assertEqual(str(w.inverse()), "y x^-2")
        self.assertTrue((w * w.inverse()).is_identity())
        self.assertEqual(str(w ** -1), str(w.inverse()))
        self.assertEqual(len(w ** 3), 9)

    def test_steps_expand_unit_letters(self):
        self.assertEqual(parse_word("x^2 y^-1").steps(), [("x", 1), ("x", 1), ("y", -1)])


class TestWordEval(unittest.TestCase):
    def setUp(self):
        self.horo = {"x": RationalMatrix.elementary(3, 0, 2), "y": RationalMatrix.elementary(3, 1, 2)}

    def test_identity_generator(self):
        self.assertTrue(word_eval({"x": RationalMatrix.identity(3)}, parse_word("x^5")).is_identity())

    def test_commuting_elementary_matrices_add(self):
        g = word_eval(self.horo, parse_word("x^3 y^-2"))
        expected = RationalMatrix([[1, 0, 3], [0, 1, -2], [0, 0, 1]])
        self.assertEqual(g, expected)

    def test_claim2_rep_word(self):
        # rep (1,0,1; 1,1,1): x = (1,0,1), y = (1,1,1)
        gens = {"x": RationalMatrix.unitriangular(1, 0, 1), "y": RationalMatrix.unitriangular(1, 1, 1)}
        g = word_eval(gens, parse_word("x^12 y^-8"))
        self.assertEqual(g, RationalMatrix.unitriangular(4, -2, 4))

    def test_unbound_name(self):
        with self.assertRaises(GroupWordError):
            word_eval(self.horo, parse_word("z"))

    def test_inverse_word_evaluates_to_inverse(self):
        gens = {"x": RationalMatrix.diag(4, 1, Fraction(1, 4)), "y": RationalMatrix.unitriangular(1, 2, 3)}
        w = parse_word("x y^2 x^-1")
        self.assertEqual(word_eval(gens, w.inverse()), word_eval(gens, w).inverse())

    def test_product_of_words_evaluates_to_product(self):
        gens = {"x": RationalMatrix.diag(4, 1, Fraction(1, 4)), "y": RationalMatrix.unitriangular(1, 2, 3),
                "z": RationalMatrix.elementary(3, 2, 0, Fraction(-1, 2))}
        rng = random.Random(5)

        def random_word():
            return GroupWord((rng.choice("xyz"), rng.choice((-1, 1))) for _ in range(rng.randint(0, 20)))

        for _ in range(200):
            w1, w2 = random_word(), random_word()
            self.assertEqual(word_eval(gens, w1 * w2), word_eval(gens, w1) @ word_eval(gens, w2))


if __name__ == '__main__':
    unittest.main()

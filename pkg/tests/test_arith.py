"""Test module for the :mod:`frictionloop.arith` module."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import itertools
import random
import unittest

import _base_testing as bt

import frictionloop.arith as arith
from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import PreconditionError, ValidationError


def _hex(n):
    return format(n, "X")


class OracleTest(unittest.TestCase):
    """Test the products and the number conversion"""

    def test_decimal(self):
        self.assertEqual(
            arith.oracle_product(78934, 62851), str(78934 * 62851)
        )
        self.assertEqual(arith.oracle_product("78934", "62851"), "4961080834")

    def test_hex(self):
        self.assertEqual(
            arith.oracle_product("69837", "17635", 16),
            _hex(int("69837", 16) * int("17635", 16)),
        )
        self.assertEqual(arith.oracle_product("ff", "FF", 16), "FE01")

    def test_negative(self):
        with self.assertRaises(PreconditionError):
            arith.oracle_product(-1, 5)

    def test_base_conversion(self):
        self.assertEqual(arith.to_base(255, 16), "FF")
        self.assertEqual(arith.to_base(255, 10), "255")
        self.assertEqual(arith.from_base("fe01", 16), 65025)


class GeneratorTest(unittest.TestCase):
    """Test the generation of multiplication problems"""

    def test_decimal_dataset(self):
        problems = arith.gen_mult_dataset(450, 5)
        self.assertEqual(len(problems), 450)
        self.assertEqual(len({p.id for p in problems}), 450)
        self.assertEqual(
            len({(p.metadata["a"], p.metadata["b"]) for p in problems}), 450
        )
        for p in problems:
            a, b = p.metadata["a"], p.metadata["b"]
            self.assertEqual(len(str(a)), 5)
            self.assertEqual(len(str(b)), 5)
            self.assertEqual(p.answer, str(a * b))
            self.assertEqual(
                p.question,
                "Calculate the following question: %i × %i." % (a, b),
            )
            self.assertEqual(p.task, "mult5")
            self.assertEqual(p.metadata["digits"], 5)

    def test_hex_dataset(self):
        problems = arith.gen_mult_dataset(450, 5, base=16)
        self.assertEqual(len(problems), 450)
        for p in problems:
            a, b = p.metadata["a"], p.metadata["b"]
            self.assertEqual(p.answer, _hex(a * b))
            self.assertIn(
                "represented in base 16: %s × %s." % (_hex(a), _hex(b)),
                p.question,
            )
            self.assertEqual(p.task, "hexmult5")

    def test_decimal_operands(self):
        problems = arith.gen_mult_dataset(
            50, 5, base=16, decimal_operands=True
        )
        for p in problems:
            for x in (p.metadata["a"], p.metadata["b"]):
                self.assertRegex(_hex(x), r"^[1-9][0-9]{4}$")

    def test_deterministic(self):
        first = arith.gen_mult_dataset(20, 3, seed=1)
        self.assertEqual(first, arith.gen_mult_dataset(20, 3, seed=1))
        self.assertNotEqual(first, arith.gen_mult_dataset(20, 3, seed=2))

    def test_too_many(self):
        self.assertEqual(len(arith.gen_mult_dataset(81, 1)), 81)
        with self.assertRaises(PreconditionError):
            arith.gen_mult_dataset(82, 1)
        with self.assertRaises(PreconditionError):
            arith.gen_mult_dataset(5, 2, base=8)

    def test_instance_from_problem(self):
        p = arith.gen_mult_dataset(1, 4)[0]
        inst = arith.instance_from_problem(p)
        self.assertEqual(inst.product, p.answer)
        self.assertIsNone(arith.instance_from_problem(bt.make_problem("p1")))


class TemplateTest(unittest.TestCase):
    """Test the rendered long multiplication steps"""

    def _check(self, a, b, base):
        inst = arith.make_instance(a, b, base)
        text = arith.render_template(inst)
        partials, summands, total, final = arith.parse_template(text, base)
        self.assertEqual(partials, summands)
        self.assertEqual(sum(partials), a * b)
        self.assertEqual(total, a * b)
        self.assertEqual(final, a * b)
        self.assertEqual(
            arith.to_base(total, base), arith.oracle_product(a, b, base)
        )

    def test_example(self):
        inst = arith.make_instance(19365, 12534)
        text = arith.render_template(inst)
        lines = text.splitlines()
        self.assertEqual(len(lines), 7)
        self.assertEqual(
            lines[0], "Digit 1 (4): 19365 × 4, shifted 0 place(s) = 77460"
        )
        self.assertEqual(
            lines[1], "Digit 2 (3): 19365 × 3, shifted 1 place(s) = 580950"
        )
        self.assertEqual(lines[-1], "The final answer is 242720910.")

    def test_exhaustive_two_digits(self):
        for a, b in itertools.product(range(10, 100), repeat=2):
            self._check(a, b, 10)

    def test_random_instances(self):
        rng = random.Random(0)
        for i in range(2000):
            base = rng.choice([10, 16])
            digits = rng.randint(1, 8)
            lo, hi = base ** (digits - 1), base**digits - 1
            self._check(rng.randint(lo, hi), rng.randint(lo, hi), base)

    def test_hex_uppercase(self):
        inst = arith.make_instance("abcde", "FEDCB", 16)
        text = arith.render_template(inst)
        self.assertIn("ABCDE × B", text)
        for line in text.splitlines():
            value = line.rsplit(" ", 1)[-1].rstrip(".")
            self.assertEqual(value, value.upper())

    def test_invalid_instance(self):
        with self.assertRaises(ValidationError):
            arith.MultInstance(12, 34, 10, 2, ((4, 48), (3, 360)), "409")
        with self.assertRaises(ValidationError):
            arith.MultInstance(12, 345, 10, 2, ((5, 60),), "60")


class MaskSolutionTest(unittest.TestCase):
    """Test the masking of template solutions"""

    def test_decimal(self):
        inst = arith.make_instance(19365, 12534)
        text = arith.render_template(inst)
        masked = arith.mask_solution("mult5", text, inst)
        self.assertNotIn("242720910", masked)
        self.assertNotIn("77460", masked)
        self.assertNotIn("580950", masked)
        self.assertIn("19365 × 4", masked)
        self.assertTrue(
            masked.endswith("The final answer is [masked]."), msg=masked
        )
        self.assertEqual(arith.mask_solution("mult5", masked, inst), masked)

    def test_hex(self):
        inst = arith.make_instance("69837", "17635", 16)
        text = arith.render_template(inst)
        masked = arith.mask_solution("hexmult5", text, inst)
        for digit, shifted in inst.partial_products:
            self.assertIn(arith.to_base(shifted, 16), masked)
        self.assertNotIn(inst.product, masked)
        self.assertIn("= [masked]", masked)
        self.assertEqual(arith.mask_solution("hexmult5", masked, inst), masked)

    def test_policy(self):
        inst = arith.make_instance(19365, 12534)
        text = arith.render_template(inst)
        with rcParams.catch():
            rcParams["arith.mask_policies"] = {"mult5": "final_only"}
            masked = arith.mask_solution("mult5", text, inst)
            self.assertIn("77460", masked)
            self.assertNotIn("242720910", masked)
            rcParams["arith.mask_policies"] = {"mult5": "nothing"}
            with self.assertRaises(ValidationError):
                arith.mask_solution("mult5", text, inst)


if __name__ == "__main__":
    unittest.main()

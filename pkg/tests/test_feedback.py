"""Test module for the :mod:`frictionloop.feedback` module."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import unittest
from unittest import mock

import _base_testing as bt
import numpy as np

import frictionloop.feedback as fb
from frictionloop import gateway
from frictionloop.arith import gen_mult_dataset, instance_from_problem
from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import LeakDetected, PreconditionError
from frictionloop.model import FeedbackMechanism, IterationRecord
from frictionloop.tasks import alias_match

F1 = FeedbackMechanism.F1
F2 = FeedbackMechanism.F2
F3 = FeedbackMechanism.F3


def _wrong(k=0, answer="17", feedback=None):
    return IterationRecord(
        k, "I think it is %s" % answer, answer, False, feedback
    )


class MaskingTest(unittest.TestCase):
    """Test the masking of answers in feedback"""

    def assertMasked(self, text, p, expected):
        masked = fb.mask_feedback(text, p)
        self.assertEqual(masked, expected)
        self.assertEqual(fb.mask_feedback(masked, p), masked)
        self.assertEqual(fb.find_leaks(masked, p), [])

    def test_final_answer(self):
        p = bt.make_problem("p1", "42")
        self.assertMasked(
            "The final answer is 42",
            p,
            "The final answer is [masked]",
        )

    def test_multiple_choice_variants(self):
        p = bt.make_problem("p1", "A", choices=(("A", "yes"), ("B", "no")))
        self.assertMasked(
            "(A) is correct, so \\boxed{A}. Assume **A** and not (B)",
            p,
            "[masked] is correct, so [masked]. Assume [masked] and not (B)",
        )
        self.assertMasked(
            "\\boxed{\\text{A}} vs. a", p, "[masked] vs. a"
        )

    def test_numeric_values(self):
        p = bt.make_problem("p1", "42")
        self.assertMasked(
            "Maybe 042 or 42.0, not 421 or 1042; see \\boxed{17}",
            p,
            "Maybe [masked] or [masked], not 421 or 1042; see [masked]",
        )

    def test_aliases(self):
        p = bt.make_problem("p1", "Paris", aliases=("City of Light",))
        self.assertMasked(
            "Parisian food in PARIS, the city  of light.",
            p,
            "Parisian food in [masked], the [masked].",
        )

    def test_aliases_like_scoring(self):
        p = bt.make_problem("p1", "U.S.")
        text = "Think of the U.S again."
        self.assertTrue(alias_match("U.S", p))
        self.assertEqual(fb.find_leaks(text, p), ["U.S"])
        self.assertMasked(text, p, "Think of the [masked] again.")
        self.assertMasked(
            "It is the U.S. for sure", p, "It is the [masked]. for sure"
        )

    def test_partial_products(self):
        p = gen_mult_dataset(1, 5, seed=3)[0]
        inst = instance_from_problem(p)
        digit, shifted = next(
            (d, s) for d, s in inst.partial_products if d > 1
        )
        text = "Check %i and %i, the result is %s." % (
            inst.a * digit,
            shifted,
            p.answer,
        )
        masked = fb.mask_feedback(text, p)
        self.assertNotIn(str(shifted), masked)
        self.assertNotIn(p.answer, masked)
        self.assertEqual(fb.mask_feedback(masked, p), masked)

    def test_locality(self):
        p = bt.make_problem("p1", "42")
        text = "Step 3: 6 x 7 = 42. Hence 42 (forty-two)."
        masked = fb.mask_feedback(text, p)
        self.assertEqual(
            masked, "Step 3: 6 x 7 = [masked]. Hence [masked] (forty-two)."
        )
        token = rcParams["masking.token"]
        self.assertLessEqual(len(masked) - len(text), 2 * len(token))

    def test_token(self):
        p = bt.make_problem("p1", "42")
        with rcParams.catch():
            rcParams["masking.token"] = "<hidden>"
            self.assertEqual(fb.mask_feedback("is 42", p), "is <hidden>")

    def test_find_leaks(self):
        p = bt.make_problem("p1", "Paris")
        self.assertEqual(fb.find_leaks("It is paris.", p), ["paris"])
        self.assertEqual(fb.find_leaks("It is [masked].", p), [])

    def test_fuzz(self):
        """Masking leaves no alias behind in generated texts"""
        rng = np.random.default_rng(0)
        p = bt.make_problem(
            "p1", "C", choices=(("A", "1"), ("B", "2"), ("C", "3"))
        )
        q = bt.make_problem("p2", "1234", aliases=("1,234",))
        pieces = [
            "C", "(C)", "\\boxed{C}", "**C**", "( C )", "Cat", "ABC",
            "1234", "01234", "1,234", "1234.0", "\\boxed{1234}", "12345",
            "the", "answer", "is", ",", ".", "(", ")", "\n",
        ]  # fmt: skip
        for i in range(2000):
            words = rng.choice(pieces, size=int(rng.integers(1, 12)))
            text = " ".join(words)
            for problem in (p, q):
                masked = fb.mask_feedback(text, problem)
                self.assertEqual(fb.find_leaks(masked, problem), [], text)
                self.assertEqual(fb.mask_feedback(masked, problem), masked)


class FeedbackTest(unittest.TestCase):
    """Test the feedback mechanisms"""

    def test_f1(self):
        p = bt.make_problem("p1", "42")
        req = fb.FeedbackRequest(p, [_wrong()], F1)
        self.assertEqual(fb.feedback_f1(req), rcParams["prompts.f1"])
        with self.assertRaises(PreconditionError):
            fb.feedback_f1(fb.FeedbackRequest(p, [_wrong()], F2))
        correct = IterationRecord(0, "42", "42", True)
        with self.assertRaises(PreconditionError):
            fb.feedback_f1(fb.FeedbackRequest(p, [correct], F1))
        with self.assertRaises(PreconditionError):
            fb.feedback_f1(fb.FeedbackRequest(p, [], F1))

    def test_f3(self):
        p = bt.make_problem("p1", "42")
        strong = bt.scripted(
            "strong", answers_by_iteration=("The final answer is 42",)
        )
        req = fb.FeedbackRequest(p, [_wrong()], F3, strong, bt.scripted())
        self.assertEqual(
            fb.feedback_f2_f3(req), "The final answer is [masked]"
        )

    def test_f3_min_temperature(self):
        p = bt.make_problem("p1", "42")
        gen = bt.scripted(
            "strong", answers_by_iteration=("Recheck it",), min_temperature=1.0
        )
        req = fb.FeedbackRequest(p, [_wrong()], F3, gen, bt.scripted())
        sent = []

        def complete(h, request, **kwargs):
            sent.append(request.temperature)
            return gateway.complete(h, request, **kwargs)

        with rcParams.catch(), mock.patch.object(fb, "complete", complete):
            rcParams["feedback.temperature"] = 0.0
            self.assertEqual(fb.feedback_f2_f3(req), "Recheck it")
        self.assertEqual(sent, [1.0])

    def test_f3_needs_other_model(self):
        p = bt.make_problem("p1", "42")
        solver = bt.scripted()
        req = fb.FeedbackRequest(p, [_wrong()], F3, solver, solver)
        with self.assertRaises(PreconditionError):
            fb.feedback_f2_f3(req)
        with self.assertRaises(PreconditionError):
            fb.feedback_f2_f3(fb.FeedbackRequest(p, [_wrong()], F2))

    def test_empty_feedback(self):
        p = bt.make_problem("p1", "42")
        gen = bt.scripted("strong", answers_by_iteration=("\\boxed{42}.",))
        req = fb.FeedbackRequest(p, [_wrong()], F3, gen, bt.scripted())
        self.assertEqual(fb.feedback_f2_f3(req), rcParams["prompts.f1"])

    def test_leak_detected(self):
        p = bt.make_problem("p1", "42")
        gen = bt.scripted("strong", answers_by_iteration=("It is 42",))
        req = fb.FeedbackRequest(p, [_wrong()], F3, gen, bt.scripted())
        with mock.patch.object(fb, "mask_feedback", lambda text, p: text):
            with self.assertRaises(LeakDetected):
                fb.feedback_f2_f3(req)
            with rcParams.catch():
                rcParams["masking.leak_check"] = False
                self.assertEqual(fb.feedback_f2_f3(req), "It is 42")

    def test_masked_solution(self):
        p = gen_mult_dataset(1, 5, seed=1)[0]
        gen = bt.scripted("strong", answers_by_iteration=("Recheck digit 2",))
        req = fb.FeedbackRequest(
            p, [_wrong(answer="1")], F3, gen, bt.scripted()
        )
        text = fb.feedback_f2_f3(req)
        self.assertTrue(text.startswith("Recheck digit 2\n\n"), msg=text)
        self.assertIn("Solution with masked results:", text)
        self.assertIn("The final answer is [masked].", text)
        self.assertNotIn(p.answer, text)
        with rcParams.catch():
            rcParams["feedback.append_masked_solution"] = False
            self.assertEqual(fb.feedback_f2_f3(req), "Recheck digit 2")

    def test_prompt(self):
        p = bt.make_problem("p1", "42", solution_steps="6 * 7 = 42")
        req = fb.FeedbackRequest(
            p, [_wrong(0, "17", "wrong"), _wrong(1, "18")], F2, bt.scripted()
        )
        ((role, prompt),) = fb.build_feedback_prompt(req)
        self.assertEqual(role, "user")
        self.assertIn("Question: What is the answer to p1?", prompt)
        self.assertIn("Iteration 0: I think it is 17\nFeedback: wrong", prompt)
        self.assertIn("Iteration 1: I think it is 18", prompt)
        self.assertIn("Correct answer: 42", prompt)
        self.assertIn("Solution steps:\n6 * 7 = 42", prompt)
        self.assertTrue(
            prompt.endswith(rcParams["prompts.feedback_instruction"])
        )

    def test_generator(self):
        p = bt.make_problem("p1", "42")
        solver = bt.scripted(answers_by_iteration=("Try 6 * 7",))
        gen = fb.FeedbackGenerator("F1", solver)
        self.assertEqual(gen(p, [_wrong()]), rcParams["prompts.f1"])
        gen = fb.FeedbackGenerator("F2", solver)
        self.assertIs(gen.generator, solver)
        self.assertEqual(gen(p, [_wrong()]), "Try 6 * 7")
        with self.assertRaises(PreconditionError):
            fb.FeedbackGenerator("F3", solver)


if __name__ == "__main__":
    unittest.main()

"""Feedback generation and answer masking

Three feedback mechanisms are available for incorrect attempts:

F1
    A constant text that only says that the answer was wrong
F2
    The solver analyses its own attempts, knowing the correct answer
F3
    A stronger model analyses the attempts, knowing the correct answer

Generated feedback must not reveal the answer. :func:`mask_feedback`
replaces every standalone occurrence of the answer (and of its aliases and
decorated variants) with the ``masking.token`` and :func:`find_leaks` checks
the result before the feedback is handed to the solver."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import logging
import re
from typing import Optional, Tuple

from frictionloop.arith import instance_from_problem, mask_solution
from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import LeakDetected, PreconditionError
from frictionloop.gateway import (
    ModelHandle,
    complete,
    default_temperature,
    with_retry,
)
from frictionloop.model import (
    ChatExchange,
    FeedbackMechanism,
    IterationRecord,
    Problem,
    normalize_answer,
    strip_answer,
)
from frictionloop.tasks import (
    NUMBER_PATTERN,
    answer_base,
    iter_boxed,
    render_question,
    to_number,
)

logger = logging.getLogger(__name__)

#: Hexadecimal numerals, also without decimal digits
HEX_WORD_PATTERN = re.compile(r"(?<![\w.])(?:0[xX])?[0-9A-Fa-f]+(?!\w)")


@dataclasses.dataclass(frozen=True)
class FeedbackRequest:
    """A request for feedback on the last attempt at a problem

    Parameters
    ----------
    problem: Problem
        The problem
    trajectory_prefix: tuple of IterationRecord
        All attempts so far. The last one is incorrect
    mechanism: FeedbackMechanism
        The feedback mechanism
    generator: ModelHandle
        The model that generates the feedback (F2 and F3)
    solver: ModelHandle
        The solver model. For F3, the generator must be a different model"""

    problem: Problem
    trajectory_prefix: Tuple[IterationRecord, ...]
    mechanism: FeedbackMechanism
    generator: Optional[ModelHandle] = None
    solver: Optional[ModelHandle] = None

    def __post_init__(self):
        object.__setattr__(
            self, "mechanism", FeedbackMechanism(self.mechanism)
        )
        object.__setattr__(
            self, "trajectory_prefix", tuple(self.trajectory_prefix)
        )


def _check_request(req, *mechanisms):
    if req.mechanism not in mechanisms:
        raise PreconditionError(
            "Feedback mechanism %s cannot be generated here"
            % req.mechanism.value
        )
    if not req.trajectory_prefix or req.trajectory_prefix[-1].correct:
        raise PreconditionError(
            "Feedback is only generated for incorrect attempts"
        )


def feedback_f1(req):
    """The constant feedback of the F1 mechanism"""
    _check_request(req, FeedbackMechanism.F1)
    return rcParams["prompts.f1"]


def build_feedback_prompt(req):
    """Build the messages for an F2 or F3 feedback generator

    The prompt contains the question, all attempts with their feedback, the
    correct answer, the reference solution (if available) and the feedback
    instruction."""
    p = req.problem
    parts = ["Question: " + render_question(p), ""]
    for r in req.trajectory_prefix:
        parts.append("Iteration %i: %s" % (r.iteration, r.raw_output))
        if r.feedback is not None:
            parts.append("Feedback: " + r.feedback)
        parts.append("")
    parts.append("Correct answer: " + p.answer)
    if p.solution_steps:
        parts.extend(["", "Solution steps:", p.solution_steps])
    parts.extend(["", rcParams["prompts.feedback_instruction"]])
    return (("user", "\n".join(parts)),)


def feedback_f2_f3(req, rng=None):
    """Generate masked feedback with a model

    Parameters
    ----------
    req: FeedbackRequest
        The request with mechanism F2 or F3
    rng: numpy.random.Generator
        The random stream of the problem (for scripted generators)

    Returns
    -------
    str
        The masked feedback. If nothing but masked tokens remain, the F1
        text is returned

    Raises
    ------
    frictionloop.errors.ModelUnavailable
        If the generator fails repeatedly
    frictionloop.errors.LeakDetected
        If the masked feedback still contains the answer"""
    _check_request(req, FeedbackMechanism.F2, FeedbackMechanism.F3)
    if req.generator is None:
        raise PreconditionError("F2 and F3 feedback need a generator")
    if req.mechanism is FeedbackMechanism.F3 and req.generator == req.solver:
        raise PreconditionError(
            "F3 feedback needs a model other than the solver"
        )
    p = req.problem
    request = ChatExchange(
        build_feedback_prompt(req),
        temperature=default_temperature(
            req.generator, rcParams["feedback.temperature"]
        ),
    )
    text = with_retry(complete)(req.generator, request, rng=rng, problem=p)
    text = text.texts[0].strip()
    if rcParams["feedback.append_masked_solution"]:
        inst = instance_from_problem(p)
        if inst is not None:
            solution = mask_solution(p.task, p.solution_steps or "", inst)
            text = (text + "\n\n" if text else "") + (
                "Solution with masked results:\n" + solution
            )
    masked = mask_feedback(text, p)
    token = rcParams["masking.token"]
    if not masked.replace(token, "").strip(" \t\n.,;:!?"):
        logger.debug("Empty feedback for problem %s, using F1", p.id)
        return rcParams["prompts.f1"]
    if rcParams["masking.leak_check"]:
        leaks = find_leaks(masked, p)
        if leaks:
            raise LeakDetected(
                "Feedback for problem %s reveals the answer: %r"
                % (p.id, leaks)
            )
    return masked


class FeedbackGenerator(object):
    """Callable that generates the feedback of a run

    Parameters
    ----------
    mechanism: FeedbackMechanism
        The feedback mechanism
    solver: ModelHandle
        The solver model (the generator of F2 feedback)
    feedback_model: ModelHandle
        The generator of F3 feedback"""

    def __init__(self, mechanism, solver=None, feedback_model=None):
        self.mechanism = FeedbackMechanism(mechanism)
        self.solver = solver
        if self.mechanism is FeedbackMechanism.F2:
            self.generator = solver
        elif self.mechanism is FeedbackMechanism.F3:
            if feedback_model is None:
                raise PreconditionError("F3 feedback needs a feedback model")
            self.generator = feedback_model
        else:
            self.generator = None

    def __call__(self, problem, records, rng=None):
        req = FeedbackRequest(
            problem, records, self.mechanism, self.generator, self.solver
        )
        if self.mechanism is FeedbackMechanism.F1:
            return feedback_f1(req)
        return feedback_f2_f3(req, rng)


# -----------------------------------------------------------------------------
# masking
# -----------------------------------------------------------------------------


def _alias_pattern(alias, case_sensitive=False):
    # the stripped form is what scoring compares, so "U.S." also finds "U.S"
    body = r"\s+".join(map(re.escape, strip_answer(alias).split()))
    return re.compile(
        r"(?<!\w)" + body + r"(?!\w)", 0 if case_sensitive else re.IGNORECASE
    )


def _label_pattern(label):
    lbl = re.escape(label)
    return re.compile(
        r"\\boxed\s*\{\s*(?:\\text\{\s*%(l)s\s*\}|%(l)s)\s*\}"
        r"|\(\s*%(l)s\s*\)"
        r"|\*\*\s*%(l)s\s*\*\*"
        r"|(?<!\w)%(l)s(?!\w)" % {"l": lbl}
    )


def _numeric_spans(text, values, base):
    pattern = HEX_WORD_PATTERN if base == 16 else NUMBER_PATTERN
    for m in pattern.finditer(text):
        value = to_number(m.group(), base)
        if value is not None and value in values:
            yield m.start(), m.end()


def _answer_spans(text, p, partials=True):
    """Find the spans of `text` that reveal the answer of `p`"""
    spans = []
    labels = p.choice_labels
    base = answer_base(p)
    numbers = set()
    answer_value = to_number(p.answer, base)
    for alias in p.aliases:
        if not normalize_answer(alias):
            continue
        if alias in labels:
            pattern = _label_pattern(alias)
        else:
            value = to_number(alias, base)
            if value is not None and not labels:
                numbers.add(value)
                continue
            pattern = _alias_pattern(alias)
        spans.extend(m.span() for m in pattern.finditer(text))
    if answer_value is not None and not labels:
        numbers.add(answer_value)
        for start, end, cstart, cend in iter_boxed(text):
            if to_number(text[cstart:cend], base) is not None:
                spans.append((start, end))
    if partials:
        inst = instance_from_problem(p)
        if inst is not None and base == 10:
            numbers.update(inst.partial_values())
    if numbers:
        spans.extend(_numeric_spans(text, numbers, base))
    return spans


def _merge(spans):
    merged = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return merged


def mask_feedback(text, p):
    """Mask every occurrence of the answer in a feedback text

    The following occurrences are replaced by the ``masking.token``:

    - standalone occurrences of any alias (case insensitive, never inside a
      longer word)
    - for multiple choice problems, the correct label and its decorated
      variants ``(A)``, ``\\boxed{A}`` and ``**A**`` (case sensitive)
    - for numeric answers, every number with the same value as the answer
      (``042`` for ``42``) and every boxed number
    - for synthetic base 10 multiplications, the values of the partial
      products

    Existing mask tokens are left untouched, so masking is idempotent.

    Parameters
    ----------
    text: str
        The feedback
    p: Problem
        The problem

    Returns
    -------
    str
        The masked text"""
    token = rcParams["masking.token"]
    segments = text.split(token)
    out = []
    for segment in segments:
        spans = _merge(_answer_spans(segment, p))
        pieces = []
        pos = 0
        for start, end in spans:
            pieces.append(segment[pos:start])
            pieces.append(token)
            pos = end
        pieces.append(segment[pos:])
        out.append("".join(pieces))
    return token.join(out)


def find_leaks(text, p):
    """Find the occurrences of the answer in a (masked) feedback

    Returns
    -------
    list of str
        The leaked substrings. Partial products are not considered"""
    token = rcParams["masking.token"]
    return [
        segment[start:end]
        for segment in text.split(token)
        for start, end in _answer_spans(segment, p, partials=False)
    ]

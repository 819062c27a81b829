"""Domain model of the frictionloop package

This module defines the value objects that are shared by all other modules:
problems, the records of an iterative solving attempt, whole trajectories,
error categories, single model calls and the configuration of a run. All
objects are immutable and can be encoded into canonical JSON via their
``to_dict`` method and decoded via their ``from_dict`` classmethod.

Iterations are counted from 0. The first attempt at a problem is iteration 0
and a run with ``max_iterations=10`` ends with iteration 9 at the latest.
"""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import logging
import numbers
import os.path as osp
import re
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional, Tuple

import yaml

from frictionloop.errors import ConfigError, ValidationError
from frictionloop.utils import canonical_json, isstring, unique_everseen

logger = logging.getLogger(__name__)


class FeedbackMechanism(str, Enum):
    """The feedback that a solver receives after an incorrect attempt"""

    #: constant binary feedback
    F1 = "F1"
    #: feedback generated by the solver itself
    F2 = "F2"
    #: feedback generated by a stronger model
    F3 = "F3"


class SamplingStrategy(str, Enum):
    greedy = "greedy"
    temp_schedule = "temp_schedule"
    temp_schedule_plus_rejection = "temp_schedule_plus_rejection"


class Status(str, Enum):
    solved = "solved"
    exhausted = "exhausted"
    aborted = "aborted"


class ErrorLabel(str, Enum):
    """Failure categories of unsolved trajectories"""

    #: feedback resistance
    FR = "FR"
    #: feedback quality
    FQ = "FQ"
    #: other reasons, e.g. ambiguous problems or format failures
    OTH = "OTH"


class TaskFormat(str, Enum):
    multiple_choice = "multiple_choice"
    open_ended = "open_ended"
    numeric_boxed = "numeric_boxed"


# -----------------------------------------------------------------------------
# answer normalization
# -----------------------------------------------------------------------------

_ws_pattern = re.compile(r"\s+")

_surrounding_punct = " \t\n.,;:!?\"'`()[]{}*"


def canonical_answer(s):
    """Trim `s` and collapse internal whitespace

    This is the form in which answers are stored."""
    return _ws_pattern.sub(" ", str(s)).strip()


def strip_answer(s):
    """The :func:`canonical_answer` of `s` without surrounding punctuation"""
    return canonical_answer(s).strip(_surrounding_punct)


def normalize_answer(s):
    """Normalize an answer for alias matching

    The answer is trimmed, internal whitespace is collapsed, surrounding
    punctuation is stripped and the result is casefolded. Scoring and leak
    masking both use this function so that they agree on what counts as the
    correct answer."""
    return strip_answer(s).casefold()


# -----------------------------------------------------------------------------
# problems
# -----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Problem:
    """One task instance

    Parameters
    ----------
    id: str
        Key of the problem that is unique within a dataset
    task: str
        Identifier of the task, e.g. ``'mmlu'`` or ``'mult5'``
    question: str
        The question text
    answer: str
        The canonical ground truth. For multiple choice problems, this is one
        of the choice labels
    choices: tuple of (label, text) pairs or None
        The ordered answer options of multiple choice problems
    aliases: tuple of str
        Accepted answer strings, always including `answer`
    solution_steps: str or None
        A reference solution
    metadata: dict
        Mapping from str to numbers, e.g. the popularity of a question or the
        operands of a synthetic multiplication
    category: str or None
        The subject of the question, e.g. ``'physics'``. Few-shot exemplars
        are drawn from the same category"""

    id: str
    task: str
    question: str
    answer: str
    choices: Optional[Tuple[Tuple[str, str], ...]] = None
    aliases: Tuple[str, ...] = ()
    solution_steps: Optional[str] = None
    metadata: Dict[str, numbers.Number] = dataclasses.field(
        default_factory=dict
    )
    category: Optional[str] = None

    @property
    def choice_labels(self):
        """The labels of the :attr:`choices` (or an empty tuple)"""
        return tuple(label for label, text in self.choices or ())

    def to_dict(self):
        return {
            "id": self.id,
            "task": self.task,
            "question": self.question,
            "choices": (
                None
                if self.choices is None
                else [[label, text] for label, text in self.choices]
            ),
            "answer": self.answer,
            "aliases": list(self.aliases),
            "solution_steps": self.solution_steps,
            "metadata": dict(self.metadata),
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, d):
        """Create a problem from its JSON encoding

        The ``task`` key may be missing if a default task is given later via
        :func:`dataclasses.replace`."""
        choices = d.get("choices")
        if choices is not None:
            if isinstance(choices, dict):
                choices = list(choices.items())
            choices = tuple((str(lbl), str(txt)) for lbl, txt in choices)
        aliases = d.get("aliases") or ()
        if isstring(aliases):
            aliases = (aliases,)
        return cls(
            id=str(d["id"]),
            task=str(d.get("task") or ""),
            question=d["question"],
            answer=canonical_answer(d["answer"]),
            choices=choices,
            aliases=tuple(map(canonical_answer, aliases)),
            solution_steps=d.get("solution_steps"),
            metadata=dict(d.get("metadata") or {}),
            category=d.get("category"),
        )

    def to_json(self):
        return canonical_json(self.to_dict())


def validate_problem(p):
    """Validate a problem

    Parameters
    ----------
    p: Problem
        The problem to check

    Returns
    -------
    Problem
        `p` itself, or a copy whose :attr:`~Problem.aliases` have been
        completed by the answer

    Raises
    ------
    ValidationError
        If any of the invariants of a :class:`Problem` is violated"""
    if not p.id:
        raise ValidationError("Problem id must not be empty")
    if not p.answer:
        raise ValidationError("Problem %s: answer must not be empty" % p.id)
    if not isstring(p.question) or not p.question.strip():
        raise ValidationError("Problem %s: question must not be empty" % p.id)
    if p.choices is not None:
        labels = p.choice_labels
        if len(set(labels)) != len(labels):
            raise ValidationError(
                "Problem %s: choice labels are not unique" % p.id
            )
        if p.answer not in labels:
            raise ValidationError(
                "Problem %s: answer %r must be a choice label (%s)"
                % (p.id, p.answer, ", ".join(labels))
            )
    for key, val in p.metadata.items():
        if not isstring(key) or isinstance(val, bool):
            raise ValidationError(
                "Problem %s: metadata must map strings to numbers" % p.id
            )
        if not isinstance(val, numbers.Number):
            raise ValidationError(
                "Problem %s: metadata %r is not a number" % (p.id, key)
            )
    if p.answer not in p.aliases:
        p = dataclasses.replace(
            p, aliases=tuple(unique_everseen((p.answer,) + p.aliases))
        )
    return p


# -----------------------------------------------------------------------------
# trajectories
# -----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    """One attempt of the solver at a problem

    Parameters
    ----------
    iteration: int
        The 0-based iteration
    raw_output: str
        The full text of the model
    parsed_answer: str
        The answer extracted from `raw_output` (empty if parsing failed)
    correct: bool
        Whether `parsed_answer` is correct
    feedback: str or None
        The masked feedback. Only present if the attempt was incorrect and
        another iteration follows
    temperature: float
        The decoding temperature
    token_logprobs: tuple of (str, float) or None
        The log-probabilities of the tokens of `raw_output`
    logprobs_missing: bool
        True if log-probabilities have been requested but the backend did not
        provide them"""

    iteration: int
    raw_output: str
    parsed_answer: str
    correct: bool
    feedback: Optional[str] = None
    temperature: float = 0.0
    token_logprobs: Optional[Tuple[Tuple[str, float], ...]] = None
    logprobs_missing: bool = False

    def __post_init__(self):
        if self.iteration < 0:
            raise ValidationError("Iterations start at 0")
        if self.temperature < 0:
            raise ValidationError("Temperature must not be negative")
        if self.correct and self.feedback is not None:
            raise ValidationError(
                "Correct attempts do not receive feedback (iteration %i)"
                % self.iteration
            )

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "raw_output": self.raw_output,
            "parsed_answer": self.parsed_answer,
            "correct": self.correct,
            "feedback": self.feedback,
            "temperature": self.temperature,
            "token_logprobs": (
                None
                if self.token_logprobs is None
                else [[tok, lp] for tok, lp in self.token_logprobs]
            ),
            "logprobs_missing": self.logprobs_missing,
        }

    @classmethod
    def from_dict(cls, d):
        lps = d.get("token_logprobs")
        return cls(
            iteration=int(d["iteration"]),
            raw_output=d["raw_output"],
            parsed_answer=d["parsed_answer"],
            correct=bool(d["correct"]),
            feedback=d.get("feedback"),
            temperature=d.get("temperature", 0.0),
            token_logprobs=(
                None if lps is None else tuple((t, lp) for t, lp in lps)
            ),
            logprobs_missing=bool(d.get("logprobs_missing", False)),
        )


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """The complete history of a problem

    Parameters
    ----------
    problem_id: str
        The :attr:`Problem.id`
    records: tuple of IterationRecord
        The attempts in the order of their iterations
    solved_at: int or None
        The iteration of the correct attempt
    status: Status
        Whether the problem has been solved, the iteration budget has been
        exhausted or the problem has been aborted
    abort_reason: str or None
        Why an aborted trajectory ended, e.g. ``'context_overflow'``,
        ``'model_unavailable'`` or ``'leak_detected'``

    Notes
    -----
    Only the last record of an aborted trajectory may carry feedback without
    a following attempt, because the problem is aborted while the next
    attempt is prepared."""

    problem_id: str
    records: Tuple[IterationRecord, ...]
    solved_at: Optional[int]
    status: Status
    abort_reason: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "records", tuple(self.records))
        check_trajectory(self)

    @property
    def solved(self):
        return self.status is Status.solved

    @property
    def answers(self):
        """The parsed answers of all attempts"""
        return [r.parsed_answer for r in self.records]

    def to_dict(self):
        return {
            "problem_id": self.problem_id,
            "records": [r.to_dict() for r in self.records],
            "solved_at": self.solved_at,
            "status": self.status.value,
            "abort_reason": self.abort_reason,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            problem_id=d["problem_id"],
            records=tuple(map(IterationRecord.from_dict, d["records"])),
            solved_at=d.get("solved_at"),
            status=d["status"],
            abort_reason=d.get("abort_reason"),
        )

    def to_json(self):
        return canonical_json(self.to_dict())


def check_trajectory(t):
    """Check the invariants of a :class:`Trajectory`

    Raises
    ------
    ValidationError
        If any invariant is violated"""
    records = t.records
    pid = t.problem_id
    if not records:
        raise ValidationError("Trajectory %s has no records" % pid)
    for i, r in enumerate(records):
        if r.iteration != i:
            raise ValidationError(
                "Trajectory %s: expected iteration %i, found %i"
                % (pid, i, r.iteration)
            )
    for r in records[:-1]:
        if r.correct:
            raise ValidationError(
                "Trajectory %s continues after a correct answer at %i"
                % (pid, r.iteration)
            )
        if r.feedback is None:
            raise ValidationError(
                "Trajectory %s: iteration %i has no feedback"
                % (pid, r.iteration)
            )
    last = records[-1]
    if last.feedback is not None and t.status is not Status.aborted:
        raise ValidationError(
            "Trajectory %s: the final attempt must not have feedback" % pid
        )
    if (t.status is Status.solved) != last.correct:
        raise ValidationError(
            "Trajectory %s: status %s does not match the final attempt"
            % (pid, t.status.value)
        )
    if (t.solved_at is not None) != (t.status is Status.solved):
        raise ValidationError(
            "Trajectory %s: solved_at must be set iff the status is solved"
            % pid
        )
    if t.solved_at is not None and t.solved_at != last.iteration:
        raise ValidationError(
            "Trajectory %s: solved_at %i is not the last iteration"
            % (pid, t.solved_at)
        )
    if (t.abort_reason is not None) != (t.status is Status.aborted):
        raise ValidationError(
            "Trajectory %s: abort_reason must be set iff the status is "
            "aborted" % pid
        )
    return t


@dataclasses.dataclass(frozen=True)
class ErrorCategory:
    """The failure category of an unsolved trajectory"""

    problem_id: str
    label: ErrorLabel
    annotator: str
    rationale: str = ""

    def __post_init__(self):
        try:
            object.__setattr__(self, "label", ErrorLabel(self.label))
        except ValueError:
            raise ValidationError(
                "Invalid error category %r for problem %s"
                % (self.label, self.problem_id)
            )

    def to_dict(self):
        return {
            "problem_id": self.problem_id,
            "label": self.label.value,
            "annotator": self.annotator,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["problem_id"], d["label"], d["annotator"], d.get("rationale", "")
        )

    def to_json(self):
        return canonical_json(self.to_dict())


# -----------------------------------------------------------------------------
# model calls
# -----------------------------------------------------------------------------

_roles = ("system", "user", "assistant")


@dataclasses.dataclass(frozen=True)
class Completion:
    """One completion of a chat request"""

    text: str
    token_logprobs: Optional[Tuple[Tuple[str, float], ...]] = None
    logprobs_missing: bool = False

    def to_dict(self):
        return {
            "text": self.text,
            "token_logprobs": (
                None
                if self.token_logprobs is None
                else [[t, lp] for t, lp in self.token_logprobs]
            ),
            "logprobs_missing": self.logprobs_missing,
        }

    @classmethod
    def from_dict(cls, d):
        lps = d.get("token_logprobs")
        return cls(
            d["text"],
            None if lps is None else tuple((t, lp) for t, lp in lps),
            bool(d.get("logprobs_missing", False)),
        )


@dataclasses.dataclass(frozen=True)
class ChatExchange:
    """A single chat-completions call

    Without :attr:`completions`, the object describes the request. The
    gateway returns a copy with the completions filled in.

    Parameters
    ----------
    messages: tuple of (role, content) pairs
        The chat messages. Only the first one may be a system message
    temperature: float
        The decoding temperature
    n: int
        The number of completions
    want_logprobs: bool
        Whether token log-probabilities are requested
    completions: tuple of Completion
        The returned completions"""

    messages: Tuple[Tuple[str, str], ...]
    temperature: float = 0.0
    n: int = 1
    want_logprobs: bool = False
    completions: Tuple[Completion, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "messages", tuple((r, c) for r, c in self.messages)
        )
        object.__setattr__(self, "completions", tuple(self.completions))
        if not self.messages:
            raise ValidationError("A chat request needs messages")
        if self.n < 1:
            raise ValidationError("At least one completion is required")
        if self.temperature < 0:
            raise ValidationError("Temperature must not be negative")
        for i, (role, content) in enumerate(self.messages):
            if role not in _roles:
                raise ValidationError("Invalid role %r" % (role,))
            if role == "system" and i > 0:
                raise ValidationError(
                    "System messages are only allowed at the beginning"
                )
        if self.completions and len(self.completions) != self.n:
            raise ValidationError(
                "Expected %i completions, got %i"
                % (self.n, len(self.completions))
            )

    @property
    def last_user_message(self):
        """The content of the last user message (or an empty string)"""
        for role, content in reversed(self.messages):
            if role == "user":
                return content
        return ""

    @property
    def prompt_size(self):
        """Number of characters of all messages"""
        return sum(len(content) for role, content in self.messages)

    @property
    def texts(self):
        return [c.text for c in self.completions]

    def with_completions(self, completions):
        return dataclasses.replace(self, completions=tuple(completions))

    def to_dict(self):
        return {
            "messages": [
                {"role": r, "content": c} for r, c in self.messages
            ],
            "temperature": self.temperature,
            "n": self.n,
            "want_logprobs": self.want_logprobs,
            "completions": [c.to_dict() for c in self.completions],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            messages=tuple((m["role"], m["content"]) for m in d["messages"]),
            temperature=d.get("temperature", 0.0),
            n=d.get("n", 1),
            want_logprobs=d.get("want_logprobs", False),
            completions=tuple(
                map(Completion.from_dict, d.get("completions") or ())
            ),
        )


# -----------------------------------------------------------------------------
# configuration
# -----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class TaskSpec:
    """The task of a run and how answers are evaluated

    Parameters
    ----------
    name: str
        The task identifier
    format: TaskFormat
        The answer format
    fewshot_k: int
        The number of few-shot exemplars
    parser: str
        The answer parser (``'choice'``, ``'boxed_number'``, ``'boxed_hex'``
        or ``'answer_line'``)
    judge: gateway.ModelHandle or None
        A judge model for open-ended tasks
    dataset: str or None
        The JSONL file with the problems
    generator: dict or None
        The settings of :func:`frictionloop.arith.gen_mult_dataset`"""

    name: str
    format: TaskFormat = TaskFormat.open_ended
    fewshot_k: int = 5
    parser: Optional[str] = None
    judge: Optional[object] = None
    dataset: Optional[str] = None
    generator: Optional[Dict[str, object]] = None

    def __post_init__(self):
        object.__setattr__(self, "format", TaskFormat(self.format))
        if self.parser is None:
            object.__setattr__(self, "parser", self._default_parser())
        if self.judge is not None and self.format != TaskFormat.open_ended:
            raise ValidationError(
                "A judge is only supported for open_ended tasks"
            )

    def _default_parser(self):
        if self.generator is not None and self.generator.get("base") == 16:
            return "boxed_hex"
        return {
            TaskFormat.multiple_choice: "choice",
            TaskFormat.numeric_boxed: "boxed_number",
            TaskFormat.open_ended: "answer_line",
        }[self.format]

    def to_dict(self):
        return {
            "name": self.name,
            "format": self.format.value,
            "fewshot_k": self.fewshot_k,
            "parser": self.parser,
            "judge": None if self.judge is None else self.judge.to_dict(),
            "dataset": self.dataset,
            "generator": self.generator,
        }

    @classmethod
    def from_dict(cls, d):
        from frictionloop.gateway import ModelHandle

        judge = d.get("judge")
        return cls(
            name=d["name"],
            format=d.get("format", TaskFormat.open_ended),
            fewshot_k=d.get("fewshot_k", 5),
            parser=d.get("parser"),
            judge=None if judge is None else ModelHandle.from_dict(judge),
            dataset=d.get("dataset"),
            generator=d.get("generator"),
        )


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """The parameters of an experiment

    Create it from a configuration file with :meth:`from_file` or from a
    mapping with :meth:`from_dict`. Both validate the input through
    :func:`frictionloop.config.rcsetup.validate_run_config`."""

    solver_model: object
    task: TaskSpec
    feedback_model: Optional[object] = None
    feedback_mechanism: FeedbackMechanism = FeedbackMechanism.F1
    max_iterations: int = 10
    sampling_strategy: SamplingStrategy = SamplingStrategy.greedy
    rejection_candidates: int = 25
    seed: int = 0
    subsample_fraction: Fraction = Fraction(1)
    concurrency_limit: int = 4
    collect_logprobs: bool = False
    output_dir: str = "runs"

    def __post_init__(self):
        object.__setattr__(
            self,
            "feedback_mechanism",
            FeedbackMechanism(self.feedback_mechanism),
        )
        object.__setattr__(
            self, "sampling_strategy", SamplingStrategy(self.sampling_strategy)
        )
        object.__setattr__(
            self, "subsample_fraction", Fraction(self.subsample_fraction)
        )
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be at least 1")
        if self.rejection_candidates < 1:
            raise ValidationError("rejection_candidates must be at least 1")
        if not 0 < self.subsample_fraction <= 1:
            raise ValidationError("subsample_fraction must be in (0, 1]")
        if self.concurrency_limit < 1:
            raise ValidationError("concurrency_limit must be at least 1")
        if (
            self.feedback_mechanism is FeedbackMechanism.F3
            and self.feedback_model is None
        ):
            raise ValidationError("F3 feedback requires a feedback_model")

    def to_dict(self):
        return {
            "solver_model": self.solver_model.to_dict(),
            "feedback_model": (
                None
                if self.feedback_model is None
                else self.feedback_model.to_dict()
            ),
            "feedback_mechanism": self.feedback_mechanism.value,
            "max_iterations": self.max_iterations,
            "sampling_strategy": self.sampling_strategy.value,
            "rejection_candidates": self.rejection_candidates,
            "seed": self.seed,
            "subsample_fraction": str(self.subsample_fraction),
            "concurrency_limit": self.concurrency_limit,
            "collect_logprobs": self.collect_logprobs,
            "output_dir": self.output_dir,
            "task": self.task.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        """Validate a configuration mapping and create the run config

        Raises
        ------
        ConfigError
            If the mapping is not a valid run configuration"""
        from frictionloop.config.rcsetup import validate_run_config
        from frictionloop.gateway import ModelHandle

        d = validate_run_config(d)
        try:
            return cls(
                solver_model=ModelHandle.from_dict(d["solver_model"]),
                feedback_model=(
                    None
                    if d["feedback_model"] is None
                    else ModelHandle.from_dict(d["feedback_model"])
                ),
                feedback_mechanism=d["feedback_mechanism"],
                max_iterations=d["max_iterations"],
                sampling_strategy=d["sampling_strategy"],
                rejection_candidates=d["rejection_candidates"],
                seed=d["seed"],
                subsample_fraction=d["subsample_fraction"],
                concurrency_limit=d["concurrency_limit"],
                collect_logprobs=d["collect_logprobs"],
                output_dir=d["output_dir"],
                task=TaskSpec.from_dict(d["task"]),
            )
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_file(cls, fname):
        """Load the run configuration from a yaml file

        Relative ``dataset`` and ``output_dir`` paths are interpreted
        relative to the directory of `fname`.

        Returns
        -------
        RunConfig
            The configuration
        bytes
            The raw content of the file"""
        try:
            with open(fname, "rb") as f:
                content = f.read()
        except OSError as e:
            raise ConfigError("Could not read %s: %s" % (fname, e)) from e
        try:
            d = yaml.load(content, Loader=yaml.SafeLoader)
        except yaml.YAMLError as e:
            raise ConfigError("Invalid yaml in %s: %s" % (fname, e)) from e
        cfg = cls.from_dict(d)
        base = osp.dirname(osp.abspath(fname))
        task = cfg.task
        if task.dataset is not None:
            task = dataclasses.replace(
                task, dataset=osp.join(base, task.dataset)
            )
        return (
            dataclasses.replace(
                cfg, task=task, output_dir=osp.join(base, cfg.output_dir)
            ),
            content,
        )

"""Datasets, answer parsing and scoring

This module loads problems from JSONL files, draws subsamples and few-shot
exemplars and implements the correctness metric: answers are extracted from
the raw model output by a parser and compared to the ground truth by exact
label match (multiple choice), value equality (numeric answers), alias
membership (open-ended answers) or by a judge model."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import json
import logging
import math
import re
from decimal import Decimal, InvalidOperation
from fractions import Fraction

from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import (
    DatasetEmpty,
    InsufficientExemplars,
    ParseError,
    PreconditionError,
    ValidationError,
)
from frictionloop.model import (
    ChatExchange,
    Problem,
    TaskFormat,
    canonical_answer,
    normalize_answer,
    validate_problem,
)
from frictionloop.utils import derive_rng
from frictionloop.warning import warn

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# datasets
# -----------------------------------------------------------------------------


def load_dataset(path, task=None):
    """Load problems from a JSONL file

    Parameters
    ----------
    path: str
        The file with one JSON encoded :class:`~frictionloop.model.Problem`
        per line. Empty lines are ignored
    task: str
        The task identifier for problems without a ``task`` key

    Returns
    -------
    list of Problem
        The validated problems in file order

    Raises
    ------
    ParseError
        If a line cannot be decoded, is not a valid problem or repeats the id
        of a previous problem
    DatasetEmpty
        If the file does not contain any problem"""
    problems = []
    ids = set()
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if not isinstance(d, dict):
                    raise ValueError("Expected a JSON object")
                p = Problem.from_dict(d)
                if not p.task and task:
                    p = dataclasses.replace(p, task=task)
                p = validate_problem(p)
            except (ValueError, KeyError, TypeError) as e:
                raise ParseError(i, str(e)) from e
            if p.id in ids:
                raise ParseError(i, "Duplicated problem id %s" % p.id)
            ids.add(p.id)
            problems.append(p)
    if not problems:
        raise DatasetEmpty("No problems found in %s" % path)
    logger.debug("Loaded %i problems from %s", len(problems), path)
    return problems


def subsample(dataset, fraction, seed):
    """Draw a subsample of the dataset

    Parameters
    ----------
    dataset: list of Problem
        The full dataset with ``m`` problems
    fraction: fractions.Fraction or float
        The fraction in ``(0, 1]``
    seed: int
        The random seed

    Returns
    -------
    list of Problem
        ``ceil(fraction * m)`` problems drawn without replacement, in their
        original order"""
    fraction = Fraction(
        fraction if isinstance(fraction, (int, Fraction, str)) else
        str(fraction)
    )
    if not 0 < fraction <= 1:
        raise PreconditionError("fraction must be in (0, 1]")
    m = len(dataset)
    if fraction == 1:
        return list(dataset)
    n = math.ceil(fraction * m)
    rng = derive_rng(seed, "subsample")
    idx = sorted(rng.choice(m, size=n, replace=False).tolist())
    return [dataset[i] for i in idx]


def assemble_fewshot(dataset, p, k, seed):
    """Draw few-shot exemplars for a problem

    Parameters
    ----------
    dataset: list of Problem
        The pool of problems
    p: Problem
        The problem that is excluded from its own exemplars
    k: int
        The number of exemplars
    seed: int
        The random seed

    Returns
    -------
    list of Problem
        `k` exemplars drawn without replacement. If `p` has a category, all
        exemplars come from that category

    Raises
    ------
    InsufficientExemplars
        If the pool contains less than `k` candidates"""
    if k == 0:
        return []
    pool = [
        q
        for q in dataset
        if q.id != p.id and (p.category is None or q.category == p.category)
    ]
    if len(pool) < k:
        raise InsufficientExemplars(
            "Only %i exemplars available for problem %s (category %s), "
            "%i required" % (len(pool), p.id, p.category, k)
        )
    rng = derive_rng(seed, "fewshot:" + p.id)
    return [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]


def render_question(p):
    """Render the question and, for multiple choice, the options"""
    if not p.choices:
        return p.question
    return "\n".join(
        [p.question]
        + ["%s. %s" % (label, text) for label, text in p.choices]
    )


def render_exemplar(p, task_format):
    """Render a solved exemplar for few-shot prompts"""
    task_format = TaskFormat(task_format)
    if task_format == TaskFormat.multiple_choice:
        answer = "The answer is (%s)." % p.answer
    elif task_format == TaskFormat.numeric_boxed:
        answer = "The final answer is \\boxed{%s}." % p.answer
    else:
        answer = "Answer: %s" % p.answer
    if p.solution_steps:
        answer = p.solution_steps + "\n" + answer
    return "Question: %s\nAnswer: %s" % (render_question(p), answer)


# -----------------------------------------------------------------------------
# parsing
# -----------------------------------------------------------------------------

#: A number with an optional sign, thousands separators and decimals
NUMBER_PATTERN = re.compile(
    r"(?<![\w.])(?:-(?=\d))?\d+(?:,\d{3})*(?:\.\d+)?(?!\w)"
)

#: A hexadecimal numeral with at least one decimal digit
HEX_PATTERN = re.compile(
    r"(?<![\w.])(?:0[xX])?[0-9A-Fa-f]*[0-9][0-9A-Fa-f]*(?!\w)"
)

_answer_line_pattern = re.compile(r"answer\s*:", re.IGNORECASE)

_choice_answer_pattern = r"answer(?:\s+is)?\s*:?\s*\(?\s*({labels})\s*\)?"


def iter_boxed(text):
    """Iterate over the ``\\boxed{...}`` expressions in `text`

    Nested braces inside the box are supported.

    Yields
    ------
    int
        The start of the expression
    int
        The end of the expression
    int
        The start of the content
    int
        The end of the content"""
    for m in re.finditer(r"\\boxed\s*\{", text):
        depth = 1
        i = m.end()
        while i < len(text) and depth:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            yield m.start(), i, m.end(), i - 1


def _last_boxed(text):
    content = None
    for start, end, cstart, cend in iter_boxed(text):
        content = text[cstart:cend]
    return content


def _strip_text_macro(s):
    m = re.fullmatch(r"\s*\\text\{\s*(.*?)\s*\}\s*", s)
    return m.group(1) if m else s.strip()


def parse_choice(raw_output, labels=None):
    """Extract a choice label

    The label inside the last boxed expression wins, then the last
    ``answer is (X)`` phrase, then the last parenthesized label and finally
    the last standalone label. Only `labels` (by default the
    ``tasks.choice_labels`` rc parameter) are accepted."""
    labels = tuple(labels or rcParams["tasks.choice_labels"])
    label_re = "|".join(map(re.escape, labels))
    boxed = _last_boxed(raw_output)
    if boxed is not None:
        content = _strip_text_macro(boxed).strip("() ")
        if content in labels:
            return content
    patterns = [
        re.compile(
            _choice_answer_pattern.format(labels=label_re) + r"(?!\w)",
            re.IGNORECASE,
        ),
        re.compile(r"\(\s*(%s)\s*\)" % label_re),
        re.compile(r"(?<![\w\\])(%s)(?!\w)" % label_re),
    ]
    for pattern in patterns:
        found = [m.group(1) for m in pattern.finditer(raw_output)]
        found = [s for s in found if s in labels]
        if found:
            return found[-1]
    return ""


def parse_boxed_number(raw_output):
    """Extract the content of the last boxed expression or the last number"""
    boxed = _last_boxed(raw_output)
    if boxed is not None and boxed.strip():
        return _strip_text_macro(boxed)
    found = NUMBER_PATTERN.findall(raw_output)
    return found[-1] if found else ""


def parse_boxed_hex(raw_output):
    """Extract the content of the last boxed expression or the last hex
    numeral"""
    boxed = _last_boxed(raw_output)
    if boxed is not None and boxed.strip():
        return _strip_text_macro(boxed)
    found = HEX_PATTERN.findall(raw_output)
    return found[-1] if found else ""


def parse_answer_line(raw_output):
    """Extract the text after the final ``Answer:`` marker or the last line"""
    found = list(_answer_line_pattern.finditer(raw_output))
    if found:
        rest = raw_output[found[-1].end():]
        line = rest.strip().splitlines()
        if line and line[0].strip():
            return line[0].strip()
    lines = [line.strip() for line in raw_output.splitlines()]
    lines = [line for line in lines if line]
    return lines[-1] if lines else ""


parsers = {
    "choice": parse_choice,
    "boxed_number": parse_boxed_number,
    "boxed_hex": parse_boxed_hex,
    "answer_line": parse_answer_line,
}


def parse_answer(raw_output, spec, labels=None):
    """Extract the answer from a model output

    Parameters
    ----------
    raw_output: str
        The full text of the model
    spec: frictionloop.model.TaskSpec
        The task. Its :attr:`~frictionloop.model.TaskSpec.parser` selects
        the parser
    labels: list of str
        The choice labels of the problem. The choice parser ignores all
        other letters

    Returns
    -------
    str
        A substring of `raw_output` or an empty string if nothing has been
        found"""
    if not raw_output:
        return ""
    try:
        parser = parsers[spec.parser]
    except KeyError:
        raise ValidationError("Unknown answer parser %r" % spec.parser)
    if parser is parse_choice:
        return parser(raw_output, labels)
    return parser(raw_output)


# -----------------------------------------------------------------------------
# scoring
# -----------------------------------------------------------------------------


def to_number(s, base=10):
    """Convert an answer to a number or return None

    Base 10 answers may contain a sign, thousands separators, decimals and a
    leading ``$``. Base 16 answers may have a ``0x`` prefix and are case
    insensitive."""
    s = canonical_answer(s).strip(" .")
    if base == 16:
        s = s.upper()
        if s.startswith("0X"):
            s = s[2:]
        if not re.fullmatch(r"[0-9A-F]+", s):
            return None
        return int(s, 16)
    s = s.lstrip("$").replace(",", "")
    if not re.fullmatch(r"-?\d+(?:\.\d+)?", s):
        return None
    try:
        return Decimal(s)
    except InvalidOperation:
        return None


def answer_base(p, spec=None):
    """The base in which the answer of `p` is written"""
    if spec is not None and spec.parser == "boxed_hex":
        return 16
    return int(p.metadata.get("base", 10))


def alias_match(parsed, p):
    """Test whether `parsed` equals one of the aliases after normalization"""
    norm = normalize_answer(parsed)
    return bool(norm) and norm in {normalize_answer(a) for a in p.aliases}


def score(parsed, p, spec, rng=None):
    """Decide whether a parsed answer is correct

    Parameters
    ----------
    parsed: str
        The answer as returned by :func:`parse_answer`
    p: Problem
        The problem
    spec: frictionloop.model.TaskSpec
        The task. Tasks with a judge are scored by :func:`judge_score`
    rng: numpy.random.Generator
        The random stream for scripted judges

    Returns
    -------
    bool
        True if the answer is correct"""
    if spec.judge is not None:
        return judge_score(parsed, p, spec.judge, rng=rng)
    fmt = spec.format
    if fmt == TaskFormat.multiple_choice:
        return parsed.strip() == p.answer
    if fmt == TaskFormat.numeric_boxed:
        base = answer_base(p, spec)
        value = to_number(parsed, base)
        expected = to_number(p.answer, base)
        if value is not None and expected is not None:
            return value == expected
    return alias_match(parsed, p)


_verdict_pattern = re.compile(r"^\W*(YES|NO)\b", re.IGNORECASE)


def judge_score(parsed, p, judge, rng=None):
    """Ask a judge model whether `parsed` matches the ground truth

    Answers that match an alias are accepted without a judge call. Replies
    that do not start with YES or NO fall back to the alias match.

    Parameters
    ----------
    parsed: str
        The parsed answer
    p: Problem
        The problem
    judge: frictionloop.gateway.ModelHandle
        The judge model
    rng: numpy.random.Generator
        The random stream for scripted judges

    Returns
    -------
    bool
        The verdict"""
    from frictionloop.gateway import complete, default_temperature, with_retry

    if alias_match(parsed, p):
        return True
    if not parsed.strip():
        return False
    prompt = rcParams["prompts.judge"].format(
        question=render_question(p), gold=p.answer, candidate=parsed
    )
    req = ChatExchange(
        (("user", prompt),), temperature=default_temperature(judge)
    )
    reply = with_retry(complete)(judge, req, rng=rng, problem=p).texts[0]
    m = _verdict_pattern.match(reply)
    if m is None:
        warn(
            "Unparseable judge verdict for problem %s: %r" % (p.id, reply),
            logger=logger,
        )
        return alias_match(parsed, p)
    return m.group(1).upper() == "YES"

"""Synthetic multiplication tasks

This module generates multiplication problems in base 10 and in base 16,
renders deterministic step-by-step solutions for them and masks these
solutions before they are shown to a solver as part of its feedback.

A solution consists of one line per digit of the second operand (least
significant digit first) with the partial product shifted to its position,
one line with the sum of all partial products and the final line::

    Digit 1 (4): 19365 × 4, shifted 0 place(s) = 77460
    Digit 2 (3): 19365 × 3, shifted 1 place(s) = 580950
    ...
    Sum of partial products: 77460 + 580950 + ... = 242720910
    The final answer is 242720910.
"""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import logging
import re
from typing import Tuple

import numpy as np

from frictionloop.config.rcsetup import rcParams
from frictionloop.docstring import docstrings
from frictionloop.errors import PreconditionError, ValidationError
from frictionloop.model import Problem, validate_problem
from frictionloop.utils import derive_rng

logger = logging.getLogger(__name__)

#: masking policy that hides partial products, their sum and the result
PARTIAL_AND_FINAL = "partial_and_final"

#: masking policy that only hides the result of the summation
FINAL_ONLY = "final_only"

_policies = (PARTIAL_AND_FINAL, FINAL_ONLY)


def to_base(n, base):
    """Render the non-negative integer `n` in `base` (uppercase digits)"""
    if base == 10:
        return str(n)
    return np.base_repr(n, base)


def from_base(s, base):
    """Parse the numeral `s` in `base`"""
    return int(s, base)


@dataclasses.dataclass(frozen=True)
class MultInstance:
    """A multiplication problem together with its long multiplication steps

    Create instances with :func:`make_instance`.

    Parameters
    ----------
    a: int
        The first operand
    b: int
        The second operand
    base: int
        10 or 16
    digits: int
        The number of digits of each operand in `base`
    partial_products: tuple of (int, int)
        The digits of `b` (least significant first) and the corresponding
        partial product ``a * digit * base**position``
    product: str
        ``a * b`` rendered in `base`"""

    a: int
    b: int
    base: int
    digits: int
    partial_products: Tuple[Tuple[int, int], ...]
    product: str

    def __post_init__(self):
        if self.base not in (10, 16):
            raise ValidationError("Base must be 10 or 16")
        for x in (self.a, self.b):
            if x < 1 or len(to_base(x, self.base)) != self.digits:
                raise ValidationError(
                    "%s does not have %i digits in base %i"
                    % (to_base(x, self.base), self.digits, self.base)
                )
        total = sum(p for d, p in self.partial_products)
        if total != self.a * self.b:
            raise ValidationError("Partial products do not sum to a * b")
        if self.product != to_base(self.a * self.b, self.base):
            raise ValidationError("Wrong product %s" % self.product)

    @property
    def operands(self):
        """The operands rendered in :attr:`base`"""
        return to_base(self.a, self.base), to_base(self.b, self.base)

    def partial_values(self):
        """All values that appear as partial results of the template

        These are the partial products with and without their positional
        shift and the final product. Single digits and the operands themselves
        are not included."""
        ret = set()
        for j, (digit, shifted) in enumerate(self.partial_products):
            for value in (shifted, self.a * digit):
                if value >= self.base and value not in (self.a, self.b):
                    ret.add(value)
        ret.add(self.a * self.b)
        return ret


def make_instance(a, b, base=10):
    """Create a :class:`MultInstance`

    Parameters
    ----------
    a, b: int or str
        The operands. Strings are interpreted in `base`. Both operands need
        the same number of digits
    base: int
        10 or 16"""
    if isinstance(a, str):
        a = from_base(a, base)
    if isinstance(b, str):
        b = from_base(b, base)
    digits = len(to_base(a, base))
    partials = []
    rest = b
    shift = 0
    while True:
        rest, digit = divmod(rest, base)
        partials.append((digit, a * digit * base**shift))
        shift += 1
        if not rest:
            break
    return MultInstance(
        a, b, base, digits, tuple(partials), oracle_product(a, b, base)
    )


def instance_from_problem(p):
    """Recreate the :class:`MultInstance` of a generated problem

    Returns None if `p` has not been created by :func:`gen_mult_dataset`."""
    meta = p.metadata
    if not all(key in meta for key in ("a", "b", "base")):
        return None
    return make_instance(int(meta["a"]), int(meta["b"]), int(meta["base"]))


def oracle_product(a, b, base=10):
    """Compute the exact product of `a` and `b`

    Parameters
    ----------
    a, b: int or str
        Non-negative operands. Strings are interpreted in `base`
    base: int
        The base of the strings and of the result

    Returns
    -------
    str
        ``a * b`` rendered in `base`"""
    if isinstance(a, str):
        a = from_base(a, base)
    if isinstance(b, str):
        b = from_base(b, base)
    if a < 0 or b < 0:
        raise PreconditionError("Operands must not be negative")
    return to_base(a * b, base)


_question_templates = {
    10: "Calculate the following question: {a} × {b}.",
    16: (
        "Calculate the following question, where each number is represented "
        "in base 16: {a} × {b}."
    ),
}


def _draw_operand(rng, digits, base, decimal_operands):
    alphabet = 10 if decimal_operands else base
    lead = int(rng.integers(1, alphabet))
    rest = rng.integers(0, alphabet, size=digits - 1)
    value = lead
    for d in rest:
        value = value * base + int(d)
    return value


@docstrings.get_sections(base="gen_mult_dataset")
def gen_mult_dataset(
    n, digits, base=10, seed=0, decimal_operands=False, task=None
):
    """Generate multiplication problems

    Parameters
    ----------
    n: int
        The number of distinct problems
    digits: int
        The number of digits of both operands
    base: int
        10 or 16
    seed: int
        The random seed
    decimal_operands: bool
        For base 16, draw the operand digits from 0-9 only
    task: str
        The task identifier. Defaults to ``'mult<digits>'`` for base 10 and
        ``'hexmult<digits>'`` for base 16

    Returns
    -------
    list of Problem
        The problems with the oracle product as answer and the rendered
        template as solution steps"""
    if n < 1 or digits < 1:
        raise PreconditionError("n and digits must be positive")
    if base not in (10, 16):
        raise PreconditionError("Base must be 10 or 16, not %s" % base)
    alphabet = 10 if decimal_operands else base
    possible = ((alphabet - 1) * alphabet ** (digits - 1)) ** 2
    if n > possible:
        raise PreconditionError(
            "Only %i distinct problems with %i digits exist"
            % (possible, digits)
        )
    if task is None:
        task = ("mult%i" if base == 10 else "hexmult%i") % digits
    rng = derive_rng(seed, "arith:%i:%i:%s" % (digits, base, task))
    seen = set()
    ret = []
    while len(ret) < n:
        a = _draw_operand(rng, digits, base, decimal_operands)
        b = _draw_operand(rng, digits, base, decimal_operands)
        if (a, b) in seen:
            continue
        seen.add((a, b))
        inst = make_instance(a, b, base)
        sa, sb = inst.operands
        ret.append(
            validate_problem(
                Problem(
                    id="%s-%05i" % (task, len(ret)),
                    task=task,
                    question=_question_templates[base].format(a=sa, b=sb),
                    answer=inst.product,
                    solution_steps=render_template(inst),
                    metadata={
                        "a": a,
                        "b": b,
                        "base": base,
                        "digits": digits,
                    },
                )
            )
        )
    logger.debug("Generated %i problems for %s", n, task)
    return ret


def render_template(inst):
    """Render the long multiplication steps of `inst`"""
    sa = to_base(inst.a, inst.base)
    lines = []
    for j, (digit, shifted) in enumerate(inst.partial_products):
        lines.append(
            "Digit {} ({}): {} × {}, shifted {} place(s) = {}".format(
                j + 1,
                to_base(digit, inst.base),
                sa,
                to_base(digit, inst.base),
                j,
                to_base(shifted, inst.base),
            )
        )
    lines.append(
        "Sum of partial products: {} = {}".format(
            " + ".join(
                to_base(shifted, inst.base)
                for digit, shifted in inst.partial_products
            ),
            inst.product,
        )
    )
    lines.append("The final answer is {}.".format(inst.product))
    return "\n".join(lines)


_step_pattern = re.compile(
    r"^(Digit \d+ \(\w+\): \w+ × \w+, shifted \d+ place\(s\) = )(\S+)$"
)
_sum_pattern = re.compile(r"^(Sum of partial products: )(.+)( = )(\S+)$")
_final_pattern = re.compile(r"^(The final answer is )(\S+?)(\.)$")


def parse_template(text, base=10):
    """Read the partial products and the result from a rendered template

    Returns
    -------
    list of int
        The shifted partial products of the digit lines
    list of int
        The summands of the summation line
    int
        The result of the summation line
    int
        The value of the final line"""
    partials, summands, total, final = [], [], None, None
    for line in text.splitlines():
        m = _step_pattern.match(line)
        if m:
            partials.append(from_base(m.group(2), base))
            continue
        m = _sum_pattern.match(line)
        if m:
            summands = [
                from_base(s.strip(), base) for s in m.group(2).split("+")
            ]
            total = from_base(m.group(4), base)
            continue
        m = _final_pattern.match(line)
        if m:
            final = from_base(m.group(2), base)
    return partials, summands, total, final


def mask_policy(task, base):
    """Get the masking policy of the template solutions of `task`

    The policy is looked up in the ``arith.mask_policies`` rc parameter and
    defaults to :data:`PARTIAL_AND_FINAL` for base 10 and to
    :data:`FINAL_ONLY` for base 16."""
    policy = rcParams["arith.mask_policies"].get(task)
    if policy is None:
        return PARTIAL_AND_FINAL if base == 10 else FINAL_ONLY
    if policy not in _policies:
        raise ValidationError(
            "Unknown masking policy %r for task %s" % (policy, task)
        )
    return policy


def mask_solution(task, text, inst):
    """Mask the results in a template solution

    Parameters
    ----------
    task: str
        The task identifier (see :func:`mask_policy`)
    text: str
        The output of :func:`render_template`
    inst: MultInstance
        The rendered instance

    Returns
    -------
    str
        The text where the masked values are replaced by the
        ``masking.token``"""
    token = rcParams["masking.token"]
    partial = mask_policy(task, inst.base) == PARTIAL_AND_FINAL
    lines = []
    for line in text.splitlines():
        m = _step_pattern.match(line)
        if m and partial:
            line = m.group(1) + token
        m = _sum_pattern.match(line)
        if m:
            summands = m.group(2)
            if partial:
                summands = " + ".join(
                    [token] * len(summands.split(" + "))
                )
            line = m.group(1) + summands + m.group(3) + token
        m = _final_pattern.match(line)
        if m:
            line = m.group(1) + token + m.group(3)
        lines.append(line)
    return "\n".join(lines)

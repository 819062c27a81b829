"""Sampling strategies against repeated answers

Solvers tend to repeat their previous (incorrect) answers even when the
feedback tells them that the answer is wrong. Two mitigations are
implemented here:

``temp_schedule``
    The decoding temperature grows linearly with the iteration
    (``sampling.temperature_step`` per iteration)
``temp_schedule_plus_rejection``
    Additionally, several candidates are drawn per iteration and candidates
    whose answer has already been given are discarded"""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import logging
from typing import FrozenSet

from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import PreconditionError
from frictionloop.model import SamplingStrategy, normalize_answer

logger = logging.getLogger(__name__)


def temperature_for(k, strategy=SamplingStrategy.temp_schedule, model=None):
    """The decoding temperature of iteration `k`

    Parameters
    ----------
    k: int
        The 0-based iteration
    strategy: SamplingStrategy
        The strategy. ``greedy`` always decodes with temperature 0
    model: frictionloop.gateway.ModelHandle
        If given, its ``min_temperature`` is applied as a lower bound

    Returns
    -------
    float
        ``sampling.temperature_step * k`` for the schedule strategies"""
    if k < 0:
        raise PreconditionError("Iterations start at 0")
    strategy = SamplingStrategy(strategy)
    if strategy is SamplingStrategy.greedy:
        temperature = 0.0
    else:
        # rounded to avoid values like 0.44999999999999996
        temperature = round(rcParams["sampling.temperature_step"] * k, 10)
    if model is not None:
        temperature = max(temperature, model.min_temperature)
    return temperature


@dataclasses.dataclass(frozen=True)
class StrategyState:
    """The sampling state of one problem

    Parameters
    ----------
    strategy: SamplingStrategy
        The strategy of the run
    forbidden: frozenset of str
        The normalized parsed answers of all previous attempts
    candidates_n: int
        The number of candidates per iteration under rejection sampling"""

    strategy: SamplingStrategy
    forbidden: FrozenSet[str] = frozenset()
    candidates_n: int = 25

    def __post_init__(self):
        object.__setattr__(self, "strategy", SamplingStrategy(self.strategy))
        object.__setattr__(self, "forbidden", frozenset(self.forbidden))

    @classmethod
    def from_records(cls, strategy, records, candidates_n=25):
        return cls(
            strategy,
            frozenset(normalize_answer(r.parsed_answer) for r in records),
            candidates_n,
        )

    @property
    def rejects(self):
        return self.strategy is SamplingStrategy.temp_schedule_plus_rejection

    def advance(self, parsed_answer):
        """The state after an attempt with `parsed_answer`"""
        return dataclasses.replace(
            self,
            forbidden=self.forbidden | {normalize_answer(parsed_answer)},
        )

    def n_for(self, k):
        """The number of completions to request in iteration `k`

        Rejection sampling starts with the second attempt, because no answer
        is forbidden in iteration 0"""
        return self.candidates_n if self.rejects and k > 0 else 1


def rejection_index(completions, forbidden, parser, rng):
    """Choose one completion that repeats no forbidden answer

    Parameters
    ----------
    completions: list of str
        The candidate outputs
    forbidden: set of str
        Normalized answers of previous attempts
    parser: callable
        Function that extracts the answer from an output
    rng: numpy.random.Generator
        The random stream of the problem

    Returns
    -------
    int
        The index of a uniformly chosen completion whose answer is not
        forbidden. If all answers are forbidden, the index is drawn uniformly
        from all completions"""
    if not completions:
        raise PreconditionError("No completions to choose from")
    survivors = [
        i
        for i, text in enumerate(completions)
        if normalize_answer(parser(text)) not in forbidden
    ]
    if not survivors:
        logger.debug(
            "All %i candidates repeat a previous answer", len(completions)
        )
        return int(rng.integers(len(completions)))
    return survivors[int(rng.integers(len(survivors)))]


def rejection_select(completions, forbidden, parser, rng):
    """Choose the raw output of one completion

    See :func:`rejection_index` for the parameters"""
    return completions[rejection_index(completions, forbidden, parser, rng)]

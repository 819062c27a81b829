"""The iterative improvement loop

Every problem is attempted up to ``max_iterations`` times. After each
incorrect attempt, feedback is generated and the next prompt contains all
previous answers together with their feedback. The loop of a problem stops
with the first correct answer, so a solved problem is never attempted again.

:func:`run_dataset` runs the loop for all problems of a dataset in a thread
pool and commits the trajectories to a store in the order of the dataset."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Set

import numpy as np

from frictionloop.config.rcsetup import rcParams
from frictionloop.docstring import docstrings
from frictionloop.errors import (
    ContextOverflow,
    DatasetEmpty,
    LeakDetected,
    ModelUnavailable,
    PreconditionError,
    StoreError,
)
from frictionloop.feedback import FeedbackGenerator
from frictionloop.gateway import complete, with_retry
from frictionloop.model import (
    ChatExchange,
    IterationRecord,
    RunConfig,
    Status,
    TaskFormat,
    Trajectory,
)
from frictionloop.sampling import (
    StrategyState,
    rejection_index,
    temperature_for,
)
from frictionloop.tasks import (
    assemble_fewshot,
    parse_answer,
    render_exemplar,
    render_question,
    score,
)
from frictionloop.utils import derive_rng

logger = logging.getLogger(__name__)

#: abort reasons of trajectories
CONTEXT_OVERFLOW = "context_overflow"
MODEL_UNAVAILABLE = "model_unavailable"
LEAK_DETECTED = "leak_detected"


def build_prompt(p, history=(), fewshot=(), task_format=TaskFormat.open_ended):
    """Build the solver messages for the next attempt at a problem

    Parameters
    ----------
    p: frictionloop.model.Problem
        The problem
    history: list of frictionloop.model.IterationRecord
        The previous attempts. Each of them must carry its feedback
    fewshot: list of frictionloop.model.Problem
        The few-shot exemplars
    task_format: frictionloop.model.TaskFormat
        The answer format that selects the system prompt

    Returns
    -------
    tuple of (str, str)
        The system and the user message"""
    task_format = TaskFormat(task_format)
    history = tuple(history)
    if history and not rcParams["loop.fewshot_every_iteration"]:
        fewshot = ()
    parts = [render_exemplar(q, task_format) for q in fewshot]
    parts.append("Question: " + render_question(p))
    for r in history:
        if r.feedback is None:
            raise PreconditionError(
                "Attempt %i of problem %s has no feedback"
                % (r.iteration, p.id)
            )
        parts.append(
            "Iteration %i: %s\nFeedback: %s"
            % (r.iteration, r.parsed_answer, r.feedback)
        )
    if history:
        parts.append(rcParams["prompts.retry"])
    system = rcParams["prompts.system"].get(task_format.value, "")
    return (("system", system), ("user", "\n\n".join(parts)))


def _abort(p, records, reason, exc, temperature=0.0):
    logger.warning(
        "Aborting problem %s after %i attempt(s): %s",
        p.id,
        len(records),
        exc,
    )
    if not records:
        # a failed first attempt is kept as an empty answer
        records = [IterationRecord(0, "", "", False, temperature=temperature)]
    return Trajectory(p.id, records, None, Status.aborted, reason)


docstrings.get_sections(
    docstrings.dedent(
        """
    Parameters
    ----------
    cfg: frictionloop.model.RunConfig
        The run configuration
    solver: frictionloop.gateway.ModelHandle
        The solver model. Defaults to the ``solver_model`` of `cfg`
    feedback_gen: callable
        Called as ``feedback_gen(problem, records, rng)`` after every
        incorrect attempt that is followed by another one. Defaults to a
        :class:`~frictionloop.feedback.FeedbackGenerator` for the feedback
        mechanism of `cfg`
    """
    ),
    "run_problem",
)


@docstrings.dedent
def run_problem(p, cfg, solver=None, feedback_gen=None, fewshot=(), rng=None):
    """
    Attempt a problem until it is solved or the budget is exhausted

    Parameters
    ----------
    p: frictionloop.model.Problem
        The validated problem
    %(run_problem.parameters)s
    fewshot: list of frictionloop.model.Problem
        The few-shot exemplars of `p`
    rng: numpy.random.Generator
        The random stream of the problem. Defaults to the stream that is
        derived from the seed of `cfg` and the problem id

    Returns
    -------
    frictionloop.model.Trajectory
        The trajectory. Problems whose model calls fail repeatedly, whose
        feedback reveals the answer or whose prompt exceeds the context
        budget of the solver are aborted. If this happens before the first
        answer, the trajectory holds one empty and incorrect attempt"""
    solver = solver or cfg.solver_model
    if feedback_gen is None:
        feedback_gen = FeedbackGenerator(
            cfg.feedback_mechanism, solver, cfg.feedback_model
        )
    if rng is None:
        rng = derive_rng(cfg.seed, "problem:" + p.id)
    spec = cfg.task
    state = StrategyState(
        cfg.sampling_strategy, candidates_n=cfg.rejection_candidates
    )

    def parser(text):
        return parse_answer(text, spec, p.choice_labels)

    records = []
    for k in range(cfg.max_iterations):
        messages = build_prompt(p, records, fewshot, spec.format)
        size = sum(len(content) for role, content in messages)
        temperature = temperature_for(k, cfg.sampling_strategy, solver)
        if solver.context_budget is not None and size > solver.context_budget:
            return _abort(
                p,
                records,
                CONTEXT_OVERFLOW,
                ContextOverflow(
                    "Prompt of problem %s has %i characters (budget %i)"
                    % (p.id, size, solver.context_budget)
                ),
                temperature,
            )
        n = state.n_for(k)
        req = ChatExchange(
            messages,
            temperature=temperature,
            n=n,
            want_logprobs=cfg.collect_logprobs and k == 0,
        )
        try:
            resp = with_retry(complete)(solver, req, rng=rng, problem=p)
            idx = 0
            if n > 1:
                idx = rejection_index(resp.texts, state.forbidden, parser, rng)
            completion = resp.completions[idx]
            parsed = parser(completion.text)
            correct = score(parsed, p, spec, rng=rng)
        except ModelUnavailable as e:
            return _abort(p, records, MODEL_UNAVAILABLE, e, temperature)
        record = IterationRecord(
            iteration=k,
            raw_output=completion.text,
            parsed_answer=parsed,
            correct=correct,
            temperature=temperature,
            token_logprobs=completion.token_logprobs,
            logprobs_missing=completion.logprobs_missing,
        )
        logger.debug(
            "Problem %s, iteration %i: %r (%s)",
            p.id,
            k,
            parsed,
            "correct" if correct else "incorrect",
        )
        if correct:
            records.append(record)
            return Trajectory(p.id, records, k, Status.solved)
        if k == cfg.max_iterations - 1:
            records.append(record)
            break
        state = state.advance(parsed)
        try:
            fb = feedback_gen(p, tuple(records) + (record,), rng)
        except ModelUnavailable as e:
            records.append(record)
            return _abort(p, records, MODEL_UNAVAILABLE, e)
        except LeakDetected as e:
            records.append(record)
            return _abort(p, records, LEAK_DETECTED, e)
        records.append(dataclasses.replace(record, feedback=fb))
    return Trajectory(p.id, records, None, Status.exhausted)


@dataclasses.dataclass
class RunState:
    """The progress of a run

    Parameters
    ----------
    config: RunConfig
        The run configuration
    trajectories: dict
        Mapping from problem id to the committed trajectory
    completed: set of str
        The ids of all problems whose trajectory has been committed
    rng_root: numpy.random.Generator
        The root stream of the run"""

    config: RunConfig
    trajectories: Dict[str, Trajectory] = dataclasses.field(
        default_factory=dict
    )
    completed: Set[str] = dataclasses.field(default_factory=set)
    rng_root: Optional[np.random.Generator] = None

    def __post_init__(self):
        if self.rng_root is None:
            self.rng_root = derive_rng(self.config.seed, "run")

    def commit(self, trajectory):
        self.trajectories[trajectory.problem_id] = trajectory
        self.completed.add(trajectory.problem_id)

    def count(self, status):
        status = Status(status)
        return sum(t.status is status for t in self.trajectories.values())


@docstrings.dedent
def run_dataset(
    dataset, cfg, store, solver=None, feedback_gen=None, fewshot_pool=None
):
    """
    Run the loop for every problem of a dataset

    Problems are processed concurrently by ``cfg.concurrency_limit`` workers.
    Finished trajectories are committed to `store` in the order of
    `dataset`. Problems whose trajectory is already in the store are not
    attempted again.

    Parameters
    ----------
    dataset: list of frictionloop.model.Problem
        The (subsampled) problems
    %(run_problem.parameters)s
    store: frictionloop.store.TrajectoryStore
        The sink for trajectories. It needs a ``load`` and an ``append``
        method
    fewshot_pool: list of frictionloop.model.Problem
        The pool for few-shot exemplars. Defaults to `dataset`

    Returns
    -------
    RunState
        The trajectories of all problems, including those of previous runs

    Raises
    ------
    StoreError
        If a trajectory cannot be written. All trajectories before it have
        been committed"""
    if not dataset:
        raise DatasetEmpty("Cannot run an empty dataset")
    solver = solver or cfg.solver_model
    if feedback_gen is None:
        feedback_gen = FeedbackGenerator(
            cfg.feedback_mechanism, solver, cfg.feedback_model
        )
    if fewshot_pool is None:
        fewshot_pool = dataset
    ids = {p.id for p in dataset}
    stored = store.load()
    unknown = sorted(set(stored) - ids)
    if unknown:
        raise StoreError(
            "The store contains trajectories of unknown problems: %s"
            % ", ".join(unknown[:5])
        )
    state = RunState(cfg)
    for p in dataset:
        if p.id in stored:
            state.commit(stored[p.id])
    todo = [p for p in dataset if p.id not in stored]
    logger.info(
        "Running %i problem(s), %i already stored",
        len(todo),
        len(dataset) - len(todo),
    )
    k = cfg.task.fewshot_k

    def work(p):
        fewshot = assemble_fewshot(fewshot_pool, p, k, cfg.seed)
        return run_problem(p, cfg, solver, feedback_gen, fewshot)

    with ThreadPoolExecutor(max_workers=cfg.concurrency_limit) as executor:
        futures = [executor.submit(work, p) for p in todo]
        try:
            for future in futures:
                trajectory = future.result()
                store.append(trajectory)
                state.commit(trajectory)
        except BaseException:
            for future in futures:
                future.cancel()
            raise
    logger.info(
        "Run finished: %i solved, %i exhausted, %i aborted",
        state.count(Status.solved),
        state.count(Status.exhausted),
        state.count(Status.aborted),
    )
    return state

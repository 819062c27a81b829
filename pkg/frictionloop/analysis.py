"""Analysis of stored trajectories

The accuracy after iteration ``k`` is the fraction of all problems that have
been solved in one of the iterations ``0, ..., k``. Accuracy curves are
returned as :class:`AccuracyCurve` objects that convert to
:class:`xarray.Dataset` and :class:`pandas.DataFrame`. The remaining
functions compute the failure categories of unsolved problems, the
agreement of two annotators, answer confidences, binned accuracies, the
overlap of the failures of several runs, the target accuracy and the
familiarity of a solver with a problem."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import itertools
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Tuple

import numpy as np
import pandas as pd
import xarray as xr

from frictionloop.config.rcsetup import rcParams
from frictionloop.docstring import docstrings
from frictionloop.errors import (
    AllSetsEmpty,
    EmptyRun,
    EmptyTokenList,
    IdMismatch,
    MissingMetric,
    PreconditionError,
    Unsupported,
)
from frictionloop.gateway import (
    complete,
    default_temperature,
    probe_logprobs,
    with_retry,
)
from frictionloop.model import (
    ChatExchange,
    ErrorCategory,
    ErrorLabel,
    Status,
    TaskFormat,
)
from frictionloop.tasks import parse_answer, render_question, score
from frictionloop.utils import derive_rng

logger = logging.getLogger(__name__)


def binomial_stderr(acc, m):
    """The standard error of a binomial proportion"""
    if m <= 0:
        return float("nan")
    return math.sqrt(acc * (1 - acc) / m)


# -----------------------------------------------------------------------------
# accuracy curves
# -----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class AccuracyCurve:
    """The accuracy of a run after every iteration

    Parameters
    ----------
    accuracies: tuple of float
        The accuracy after iteration ``0, ..., K - 1``
    m: int
        The number of problems"""

    accuracies: Tuple[float, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "accuracies", tuple(self.accuracies))

    @property
    def stderr(self):
        return tuple(binomial_stderr(acc, self.m) for acc in self.accuracies)

    @property
    def initial(self):
        return self.accuracies[0]

    @property
    def final(self):
        return self.accuracies[-1]

    def __len__(self):
        return len(self.accuracies)

    def to_dataset(self):
        """Convert the curve into a dataset with an ``iteration`` dimension"""
        iterations = np.arange(len(self.accuracies))
        return xr.Dataset(
            {
                "accuracy": ("iteration", np.asarray(self.accuracies)),
                "stderr": ("iteration", np.asarray(self.stderr)),
            },
            coords={"iteration": iterations},
            attrs={"m": self.m},
        )

    def to_frame(self):
        """Convert the curve into a table with one row per iteration"""
        df = self.to_dataset().to_dataframe().reset_index()
        df["solved"] = np.rint(df["accuracy"] * self.m).astype(int)
        return df[["iteration", "accuracy", "stderr", "solved"]]

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def _solved_at(trajectories):
    return np.array(
        [
            t.solved_at if t.solved_at is not None else np.inf
            for t in trajectories
        ],
        dtype=float,
    )


def accuracy_curve(trajectories, K, m=None):
    """Compute the accuracy after each iteration

    Parameters
    ----------
    trajectories: list of frictionloop.model.Trajectory
        The trajectories of one run
    K: int
        The maximum number of iterations of the run
    m: int
        The number of problems. Defaults to the number of trajectories.
        Problems without a trajectory count as unsolved

    Returns
    -------
    AccuracyCurve
        The curve. A problem counts as correct at iteration ``k`` iff it has
        been solved at an iteration ``<= k``

    Raises
    ------
    EmptyRun
        If there are no trajectories"""
    trajectories = list(trajectories)
    if not trajectories:
        raise EmptyRun("No trajectories to compute the accuracy from")
    if m is None:
        m = len(trajectories)
    elif m < len(trajectories):
        raise PreconditionError(
            "%i trajectories but only %i problems" % (len(trajectories), m)
        )
    solved_at = _solved_at(trajectories)
    counts = (solved_at[np.newaxis] <= np.arange(K)[:, np.newaxis]).sum(
        axis=1
    )
    return AccuracyCurve(tuple(int(c) / m for c in counts), m)


def category_accuracy(trajectories, problems):
    """The initial and final accuracy per problem category

    Parameters
    ----------
    trajectories: dict
        Mapping from problem id to trajectory
    problems: list of frictionloop.model.Problem
        The problems of the run. Problems without a category are grouped
        into an empty category

    Returns
    -------
    pandas.DataFrame
        One row per category with the columns ``category``, ``m``,
        ``initial_accuracy`` and ``final_accuracy``"""
    rows = []
    for p in problems:
        t = trajectories.get(p.id)
        rows.append(
            {
                "category": p.category or "",
                "initial": t is not None and t.solved_at == 0,
                "final": t is not None and t.solved,
            }
        )
    if not rows:
        raise EmptyRun("No problems")
    df = pd.DataFrame(rows)
    ret = df.groupby("category", sort=True).agg(
        m=("initial", "size"),
        initial_accuracy=("initial", "mean"),
        final_accuracy=("final", "mean"),
    )
    return ret.reset_index()


def compare_curves(curves):
    """Align the accuracy curves of several runs on the iteration axis

    Parameters
    ----------
    curves: dict
        Mapping from a run name to its :class:`AccuracyCurve`

    Returns
    -------
    xarray.Dataset
        The ``accuracy`` and ``stderr`` variables with dimensions ``run`` and
        ``iteration``. Iterations beyond the budget of a run are NaN"""
    if not curves:
        raise EmptyRun("No curves to compare")
    names = list(curves)
    ds = xr.concat(
        [curves[name].to_dataset() for name in names],
        dim=pd.Index(names, name="run"),
        join="outer",
        combine_attrs="drop",
    )
    ds["m"] = ("run", [curves[name].m for name in names])
    return ds


# -----------------------------------------------------------------------------
# error categories
# -----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CategoryDistribution:
    """The failure categories of the unsolved problems of a run

    Parameters
    ----------
    counts: dict
        The number of problems per :class:`~frictionloop.model.ErrorLabel`
    total: int
        The number of categorized problems
    fractions: dict
        The fraction of `total` per label"""

    counts: Dict[ErrorLabel, int]
    total: int
    fractions: Dict[ErrorLabel, float]

    @classmethod
    def from_categories(cls, categories):
        """Count the labels of a list of
        :class:`~frictionloop.model.ErrorCategory`"""
        counts = {label: 0 for label in ErrorLabel}
        for cat in categories:
            counts[ErrorLabel(cat.label)] += 1
        total = sum(counts.values())
        fractions = {
            label: (n / total if total else 0.0)
            for label, n in counts.items()
        }
        return cls(counts, total, fractions)

    @classmethod
    def from_fractions(cls, fractions, total):
        """Create the distribution from fractions of `total` problems"""
        fractions = {
            label: float(fractions.get(label, fractions.get(label.value, 0)))
            for label in ErrorLabel
        }
        if total and abs(sum(fractions.values()) - 1) > 1e-9:
            raise PreconditionError("The fractions do not sum up to 1")
        counts = {
            label: int(round(frac * total))
            for label, frac in fractions.items()
        }
        return cls(counts, total, fractions)

    def to_dict(self):
        return {
            "total": self.total,
            "counts": {label.value: n for label, n in self.counts.items()},
            "fractions": {
                label.value: frac for label, frac in self.fractions.items()
            },
        }


_category_pattern = re.compile(
    r"^\W*(?:category\s*:\s*)?\W*(FR|FQ|OTH)\b", re.IGNORECASE
)

#: rationale of categories whose annotator reply could not be read
UNPARSEABLE = "annotator_unparseable"


def render_trajectory(t):
    """Render all attempts of a trajectory with their feedback"""
    lines = []
    for r in t.records:
        lines.append("Iteration %i: %s" % (r.iteration, r.raw_output))
        if r.feedback is not None:
            lines.append("Feedback: %s" % r.feedback)
    return "\n".join(lines)


def parse_category(reply):
    """Read the error label and the rationale from an annotator reply

    Returns
    -------
    frictionloop.model.ErrorLabel or None
        The label or None if the reply does not start with a category
    str
        The remaining lines of the reply"""
    lines = reply.strip().splitlines()
    if not lines:
        return None, ""
    m = _category_pattern.match(lines[0])
    if m is None:
        return None, ""
    return ErrorLabel(m.group(1).upper()), "\n".join(lines[1:]).strip()


def _categorize_one(t, p, annotator, seed):
    prompt = rcParams["prompts.annotator"].format(
        question=render_question(p),
        answer=p.answer,
        trajectory=render_trajectory(t),
    )
    rng = derive_rng(seed, "annotate:" + t.problem_id)
    req = ChatExchange(
        (("user", prompt),), temperature=default_temperature(annotator)
    )
    for attempt in range(2):
        reply = with_retry(complete)(annotator, req, rng=rng, problem=p)
        label, rationale = parse_category(reply.texts[0])
        if label is not None:
            return ErrorCategory(
                t.problem_id, label, annotator.name, rationale
            )
        logger.debug(
            "Unparseable annotator reply for %s: %r",
            t.problem_id,
            reply.texts[0],
        )
    return ErrorCategory(
        t.problem_id, ErrorLabel.OTH, annotator.name, UNPARSEABLE
    )


def categorize_errors(trajectories, problems, annotator, seed=0, workers=1):
    """Classify the failures of unsolved trajectories

    Parameters
    ----------
    trajectories: list of frictionloop.model.Trajectory
        The exhausted trajectories
    problems: dict
        Mapping from problem id to :class:`~frictionloop.model.Problem`
    annotator: frictionloop.gateway.ModelHandle
        The annotator model
    seed: int
        The seed of the random streams of scripted annotators
    workers: int
        The number of concurrent annotator calls

    Returns
    -------
    list of frictionloop.model.ErrorCategory
        One category per trajectory, in the order of `trajectories`. Replies
        that cannot be read twice are labeled ``OTH``"""
    trajectories = list(trajectories)
    for t in trajectories:
        if t.status is not Status.exhausted:
            raise PreconditionError(
                "Only exhausted trajectories are categorized, not %s (%s)"
                % (t.problem_id, t.status.value)
            )
        if t.problem_id not in problems:
            raise IdMismatch("Unknown problem %s" % t.problem_id)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(
            executor.map(
                lambda t: _categorize_one(
                    t, problems[t.problem_id], annotator, seed
                ),
                trajectories,
            )
        )


def _label_map(labels):
    if isinstance(labels, dict):
        return {key: ErrorLabel(val) for key, val in labels.items()}
    return {cat.problem_id: ErrorLabel(cat.label) for cat in labels}


def agreement(labels_a, labels_b):
    """The fraction of problems that two annotators labeled identically

    Parameters
    ----------
    labels_a, labels_b: dict or list of ErrorCategory
        The labels of the two annotators as mapping from problem id to label
        or as list of categories

    Returns
    -------
    float
        The fraction of equal labels

    Raises
    ------
    IdMismatch
        If the two annotators labeled different problems"""
    a = _label_map(labels_a)
    b = _label_map(labels_b)
    if set(a) != set(b):
        raise IdMismatch(
            "The annotators labeled different problems: %s"
            % ", ".join(sorted(set(a) ^ set(b))[:5])
        )
    if not a:
        raise EmptyRun("No labels to compare")
    return sum(a[key] is b[key] for key in a) / len(a)


@docstrings.get_sections(base="target_accuracy")
def target_accuracy(curve, dist, m=None):
    """The accuracy if all feedback was incorporated

    Unsolved problems whose failure has been categorized as feedback
    resistance are counted as solved.

    Parameters
    ----------
    curve: AccuracyCurve
        The accuracy curve of the run
    dist: CategoryDistribution
        The categories of the unsolved problems of the final iteration
    m: int
        The number of problems. Defaults to ``curve.m``

    Returns
    -------
    float
        ``final accuracy + u * FR fraction / m`` with ``u`` unsolved
        problems"""
    if m is None:
        m = curve.m
    if not dist.total:
        return curve.final
    target = curve.final + dist.total * dist.fractions[ErrorLabel.FR] / m
    return min(target, 1.0)


# -----------------------------------------------------------------------------
# confidence and binning
# -----------------------------------------------------------------------------


def confidence(token_logprobs):
    """The geometric mean of the token probabilities

    Parameters
    ----------
    token_logprobs: list of float or list of (str, float)
        The natural log-probabilities of the answer tokens without the
        end-of-sequence token

    Returns
    -------
    float
        ``exp(mean(token_logprobs))``"""
    values = [
        lp[1] if isinstance(lp, (tuple, list)) else lp for lp in token_logprobs
    ]
    if not values:
        raise EmptyTokenList("Cannot compute the confidence of no tokens")
    return math.exp(math.fsum(values) / len(values))


def trajectory_confidence(t, problem=None, solver=None, task_format=None):
    """The confidence of the first answer of a trajectory

    The log-probabilities stored with the first attempt are used. If they
    are missing and a `solver` is given, they are computed with
    :func:`frictionloop.gateway.probe_logprobs`.

    Raises
    ------
    MissingMetric
        If no log-probabilities are available"""
    record = t.records[0]
    lps = record.token_logprobs
    if not lps and solver is not None and problem is not None:
        from frictionloop.engine import build_prompt

        messages = build_prompt(
            problem, task_format=task_format or TaskFormat.open_ended
        )
        prompt = "\n\n".join(content for role, content in messages)
        try:
            lps = with_retry(probe_logprobs)(
                solver, prompt, record.raw_output
            )
        except Unsupported:
            lps = None
    if not lps:
        raise MissingMetric(t.problem_id, "confidence")
    return confidence(lps)


def metric_values(
    trajectories, problems, metric, familiarity=None, solver=None, task=None
):
    """Collect the values of a binning metric

    Parameters
    ----------
    trajectories: dict
        Mapping from problem id to trajectory
    problems: list of frictionloop.model.Problem
        The problems to bin
    metric: str
        ``'confidence'`` (stored log-probabilities of the first attempt),
        ``'familiarity'`` (values of `familiarity`) or a key of the problem
        metadata, e.g. ``'s_pop'``
    familiarity: dict
        Mapping from problem id to the familiarity of the solver
    solver: frictionloop.gateway.ModelHandle
        The solver of the run. Its log-probabilities are requested for
        first attempts that were stored without them
    task: frictionloop.model.TaskSpec
        The task of the run, for the prompt of these requests

    Returns
    -------
    dict
        Mapping from problem id to the metric value

    Raises
    ------
    MissingMetric
        If a problem has no value"""
    ret = {}
    for p in problems:
        if metric == "confidence":
            if p.id not in trajectories:
                raise MissingMetric(p.id, metric)
            ret[p.id] = trajectory_confidence(
                trajectories[p.id],
                p,
                solver,
                task.format if task is not None else None,
            )
        elif metric == "familiarity":
            if not familiarity or p.id not in familiarity:
                raise MissingMetric(p.id, metric)
            ret[p.id] = float(familiarity[p.id])
        else:
            try:
                ret[p.id] = float(p.metadata[metric])
            except (KeyError, TypeError, ValueError):
                raise MissingMetric(p.id, metric)
    return ret


def bin_by_metric(trajectories, metrics, bins=None, binning=None):
    """Compare initial and final accuracy across bins of a metric

    Parameters
    ----------
    trajectories: dict
        Mapping from problem id to trajectory
    metrics: dict
        Mapping from problem id to the metric value (see
        :func:`metric_values`)
    bins: int
        The number of bins. Defaults to the ``analysis.bins`` rc parameter
    binning: str
        ``'equal_width'`` or ``'quantile'``. Defaults to the
        ``analysis.binning`` rc parameter

    Returns
    -------
    pandas.DataFrame
        One row per occupied bin with the columns ``bin``, ``left``,
        ``right``, ``n``, ``initial_accuracy``, ``final_accuracy``,
        ``delta``, ``initial_stderr`` and ``final_stderr``"""
    bins = bins or rcParams["analysis.bins"]
    binning = binning or rcParams["analysis.binning"]
    missing = [pid for pid in trajectories if pid not in metrics]
    if missing:
        raise MissingMetric(missing[0], "binning metric")
    if not trajectories:
        raise EmptyRun("No trajectories to bin")
    df = pd.DataFrame(
        [
            {
                "problem_id": pid,
                "value": float(metrics[pid]),
                "initial": t.solved_at == 0,
                "final": t.solved,
            }
            for pid, t in trajectories.items()
        ]
    )
    if df["value"].nunique() == 1 or bins == 1:
        lo, hi = df["value"].min(), df["value"].max()
        df["bin"] = pd.Interval(lo, hi, closed="both")
    elif binning == "quantile":
        df["bin"] = pd.qcut(df["value"], bins, duplicates="drop")
    else:
        df["bin"] = pd.cut(df["value"], bins, include_lowest=True)
    grouped = df.groupby("bin", observed=True, sort=True)
    ret = grouped.agg(
        n=("value", "size"),
        initial_accuracy=("initial", "mean"),
        final_accuracy=("final", "mean"),
    ).reset_index()
    ret["left"] = [interval.left for interval in ret["bin"]]
    ret["right"] = [interval.right for interval in ret["bin"]]
    ret["bin"] = ret["bin"].astype(str)
    ret["delta"] = ret["final_accuracy"] - ret["initial_accuracy"]
    ret["initial_stderr"] = [
        binomial_stderr(acc, n)
        for acc, n in zip(ret["initial_accuracy"], ret["n"])
    ]
    ret["final_stderr"] = [
        binomial_stderr(acc, n)
        for acc, n in zip(ret["final_accuracy"], ret["n"])
    ]
    return ret[
        [
            "bin",
            "left",
            "right",
            "n",
            "initial_accuracy",
            "final_accuracy",
            "delta",
            "initial_stderr",
            "final_stderr",
        ]
    ]


# -----------------------------------------------------------------------------
# overlap of failures
# -----------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Overlap:
    """The common failures of several runs

    Parameters
    ----------
    names: tuple of str
        The names of the runs
    sizes: tuple of int
        The number of failures per run
    pairwise: dict
        Mapping from a pair of names to the size of their intersection
    intersection: int
        The number of problems that all runs failed
    union: int
        The number of problems that any run failed"""

    names: Tuple[str, ...]
    sizes: Tuple[int, ...]
    pairwise: Dict[Tuple[str, str], int]
    intersection: int
    union: int

    @property
    def ratio(self):
        """``intersection / union``"""
        return self.intersection / self.union

    def to_dict(self):
        return {
            "runs": list(self.names),
            "failures": dict(zip(self.names, self.sizes)),
            "pairwise": [
                {"runs": list(pair), "common": n}
                for pair, n in self.pairwise.items()
            ],
            "intersection": self.intersection,
            "union": self.union,
            "ratio": round(self.ratio, 3),
            "ratio_exact": self.ratio,
        }


def overlap_ratio(failure_sets, names=None):
    """Compare the failed problems of several runs

    Parameters
    ----------
    failure_sets: list of set
        The ids of the unsolved problems of each run
    names: list of str
        The names of the runs. Defaults to ``'run0'``, ``'run1'``, ...

    Returns
    -------
    Overlap
        The pairwise and the common failures. Its :attr:`~Overlap.ratio` is
        the number of common failures divided by all distinct failures

    Raises
    ------
    AllSetsEmpty
        If no run has a failure"""
    failure_sets = [set(s) for s in failure_sets]
    if len(failure_sets) < 2:
        raise PreconditionError("At least two failure sets are required")
    if names is None:
        names = ["run%i" % i for i in range(len(failure_sets))]
    names = tuple(names)
    if len(names) != len(failure_sets):
        raise PreconditionError("One name per failure set is required")
    union = set.union(*failure_sets)
    if not union:
        raise AllSetsEmpty("None of the runs has a failure")
    pairwise = {
        (names[i], names[j]): len(failure_sets[i] & failure_sets[j])
        for i, j in itertools.combinations(range(len(names)), 2)
    }
    return Overlap(
        names,
        tuple(map(len, failure_sets)),
        pairwise,
        len(set.intersection(*failure_sets)),
        len(union),
    )


# -----------------------------------------------------------------------------
# familiarity
# -----------------------------------------------------------------------------


def familiarity_probe(p, solver, n=None, spec=None, seed=0, batch_size=None):
    """Estimate how familiar a solver is with a problem

    The solver answers the question `n` times at temperature 1 without
    feedback.

    Parameters
    ----------
    p: frictionloop.model.Problem
        The problem
    solver: frictionloop.gateway.ModelHandle
        The solver model
    n: int
        The number of samples. Defaults to ``familiarity.samples``
    spec: frictionloop.model.TaskSpec
        The task that defines parsing and scoring
    seed: int
        The seed of the random stream of scripted solvers
    batch_size: int
        The number of completions per request. Defaults to
        ``familiarity.batch_size``

    Returns
    -------
    float
        The fraction of correct samples"""
    from frictionloop.engine import build_prompt
    from frictionloop.model import TaskSpec

    n = n or rcParams["familiarity.samples"]
    batch_size = batch_size or rcParams["familiarity.batch_size"]
    if n < 1:
        raise PreconditionError("At least one sample is required")
    if spec is None:
        spec = TaskSpec(p.task)
    rng = derive_rng(seed, "familiarity:" + p.id)
    messages = build_prompt(p, task_format=spec.format)
    temperature = default_temperature(solver, 1.0)
    correct = 0
    done = 0
    while done < n:
        size = min(batch_size, n - done)
        req = ChatExchange(messages, temperature=temperature, n=size)
        resp = with_retry(complete)(solver, req, rng=rng, problem=p)
        correct += sum(
            score(parse_answer(text, spec, p.choice_labels), p, spec, rng=rng)
            for text in resp.texts
        )
        done += size
    logger.debug(
        "Familiarity of %s with %s: %i/%i", solver.name, p.id, correct, n
    )
    return correct / n


# -----------------------------------------------------------------------------
# summary
# -----------------------------------------------------------------------------


def summarize(
    trajectories,
    m,
    K,
    run_id,
    config_hash,
    mechanism=None,
    strategy=None,
    dist=None,
):
    """Create the content of ``summary.json``

    Parameters
    ----------
    trajectories: dict
        Mapping from problem id to trajectory
    m: int
        The number of problems of the run
    K: int
        The maximum number of iterations
    run_id: str
        The id of the run
    config_hash: str
        The hash of the configuration file
    mechanism: frictionloop.model.FeedbackMechanism
        The feedback mechanism
    strategy: frictionloop.model.SamplingStrategy
        The sampling strategy
    dist: CategoryDistribution
        The failure categories. Without them, the ``target_accuracy`` key is
        omitted

    Returns
    -------
    dict
        The summary"""
    curve = accuracy_curve(trajectories.values(), K, m)
    statuses = [t.status for t in trajectories.values()]
    ret = {
        "run_id": run_id,
        "config_hash": config_hash,
        "m": m,
        "K": K,
        "acc_0": curve.initial,
        "acc_final": curve.final,
        "accuracy": {
            "acc_%i" % k: {"value": acc, "stderr": err}
            for k, (acc, err) in enumerate(
                zip(curve.accuracies, curve.stderr)
            )
        },
        "solved": statuses.count(Status.solved),
        "exhausted": statuses.count(Status.exhausted),
        "aborted": statuses.count(Status.aborted),
        "missing": m - len(statuses),
        "feedback_mechanism": getattr(mechanism, "value", mechanism),
        "sampling_strategy": getattr(strategy, "value", strategy),
        "leak_check_violations": sum(
            t.abort_reason == "leak_detected" for t in trajectories.values()
        ),
    }
    if dist is None:
        ret["target_accuracy_note"] = (
            "No error categories available. Run the categorize command "
            "first"
        )
    else:
        ret["categories"] = dist.to_dict()
        ret["target_accuracy"] = target_accuracy(curve, dist, m)
        ret["target_accuracy_note"] = (
            "estimated target: unsolved problems with feedback resistance "
            "counted as solved"
        )
    return ret

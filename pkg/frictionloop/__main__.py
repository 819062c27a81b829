"""Main commandline entrypoint for frictionloop.

The ``frictionloop`` command has the sub-commands

``run``
    Run an experiment that is defined by a configuration file
``report``
    Write the accuracy curve and the summary of a run (and, optionally,
    binned accuracies, comparisons and failure overlaps)
``categorize``
    Classify the failures of the unsolved problems of a run
``gen-arith``
    Generate a dataset of multiplication problems
``probe``
    Measure the familiarity of the solver with the problems of a run

Exit codes are 0 on success, 1 for invalid configurations and input files
and 2 if a run finished with aborted problems."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import argparse
import dataclasses
import json
import logging
import os
import os.path as osp
import sys

import yaml
from funcargparse import FuncArgParser

import frictionloop
from frictionloop import analysis
from frictionloop.arith import gen_mult_dataset
from frictionloop.config.logsetup import run_logging
from frictionloop.docstring import docstrings
from frictionloop.engine import run_dataset
from frictionloop.errors import ConfigError, FrictionError, ValidationError
from frictionloop.gateway import ModelHandle
from frictionloop.model import ErrorCategory, Problem, RunConfig, Status
from frictionloop.store import (
    CATEGORIES,
    CONFIG,
    FAMILIARITY,
    PROBLEMS,
    SUMMARY,
    TrajectoryStore,
    read_json,
    read_jsonl,
    write_json,
    write_jsonl,
)
from frictionloop.tasks import load_dataset, subsample
from frictionloop.utils import stable_hash
from frictionloop.warning import critical, warn

rcParams = frictionloop.rcParams


logger = logging.getLogger(__name__)

#: exit codes of the command line
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ABORTED = 2


def main(args=None):
    """Main function for usage of frictionloop from the command line

    Parameters
    ----------
    args: list of str
        The command line arguments. Defaults to :data:`sys.argv`

    Returns
    -------
    int
        The exit code"""
    parser = get_parser()
    ns = parser.parse_args(args)
    kws = vars(ns)
    kws.pop("command", None)
    func = kws.pop("command_func", None)
    if func is None:
        parser.print_help()
        return EXIT_ERROR
    try:
        ret = func(**kws)
    except FrictionError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    return EXIT_OK if ret is None else ret


# -----------------------------------------------------------------------------
# commands
# -----------------------------------------------------------------------------


docstrings.get_sections(
    docstrings.dedent(
        """
    Parameters
    ----------
    run_dir: str
        The directory of the run
    rc_file: str
        The path to a yaml configuration file that can be used to update the
        :attr:`~frictionloop.config.rcsetup.rcParams`
    """
    ),
    "command",
)
docstrings.keep_params("command.parameters", "run_dir")
docstrings.keep_params("command.parameters", "rc_file")


def _load_rc(rc_file):
    if rc_file is not None:
        if not osp.exists(rc_file):
            raise ConfigError("rc file %s does not exist" % rc_file)
        rcParams.load_from_file(rc_file)


def _dataset_bytes(dataset):
    return "".join(p.to_json() + "\n" for p in dataset).encode("utf-8")


def load_problems(cfg):
    """Load or generate the full dataset of a run configuration

    Raises
    ------
    ConfigError
        If the dataset file does not exist or cannot be read"""
    task = cfg.task
    if task.generator is not None:
        return gen_mult_dataset(task=task.name, **task.generator)
    if not osp.exists(task.dataset):
        raise ConfigError("Dataset %s does not exist" % task.dataset)
    try:
        return load_dataset(task.dataset, task.name)
    except FrictionError as e:
        raise ConfigError("Invalid dataset %s: %s" % (task.dataset, e)) from e


@docstrings.dedent
def run(config, resume=False, output_dir=None, rc_file=None):
    """
    Run an experiment

    The results are written to ``<output_dir>/<run_id>`` where the run id is
    derived from the configuration file and the dataset. An existing run
    with the same id is resumed.

    Parameters
    ----------
    config: str
        The yaml file with the run configuration
    resume: bool
        Expect an existing run and continue it silently
    output_dir: str
        Overwrite the ``output_dir`` of the configuration
    %(command.parameters.rc_file)s

    Returns
    -------
    int
        0 if all problems finished, 2 if problems have been aborted"""
    _load_rc(rc_file)
    cfg, raw = RunConfig.from_file(config)
    if output_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=output_dir)
    dataset = load_problems(cfg)
    run_id = stable_hash(raw, _dataset_bytes(dataset))
    run_dir = osp.join(cfg.output_dir, run_id)
    problems = subsample(dataset, cfg.subsample_fraction, cfg.seed)
    existing = osp.exists(osp.join(run_dir, PROBLEMS))
    if existing and not resume:
        warn("Resuming existing run %s" % run_dir, logger=logger)
    elif resume and not existing:
        warn("No run to resume in %s, starting a new one" % run_dir)
    os.makedirs(run_dir, exist_ok=True)
    logger.info(
        "Run %s: %i of %i problems of task %s",
        run_id,
        len(problems),
        len(dataset),
        cfg.task.name,
    )
    with TrajectoryStore(run_dir, run_id) as store, run_logging(run_dir):
        with open(osp.join(run_dir, CONFIG), "wb") as f:
            f.write(raw)
        write_jsonl(osp.join(run_dir, PROBLEMS), problems)
        state = run_dataset(problems, cfg, store, fewshot_pool=dataset)
        report(run_dir)
        aborted = state.count(Status.aborted)
        if aborted:
            critical(
                "%i problem(s) of run %s have been aborted"
                % (aborted, run_id),
                logger=logger,
            )
    return EXIT_ABORTED if aborted else EXIT_OK


class RunData(object):
    """The content of a run directory"""

    def __init__(self, run_dir):
        if not osp.isdir(run_dir):
            raise ConfigError("%s is not a run directory" % run_dir)
        self.run_dir = run_dir
        self.run_id = osp.basename(osp.normpath(run_dir))
        for fname in (CONFIG, PROBLEMS):
            if not osp.exists(osp.join(run_dir, fname)):
                raise ConfigError("%s has no %s" % (run_dir, fname))
        config_file = osp.join(run_dir, CONFIG)
        self.config, self.raw_config = RunConfig.from_file(config_file)
        self.config_hash = stable_hash(self.raw_config)
        self.problems = read_jsonl(osp.join(run_dir, PROBLEMS), Problem)
        self.trajectories = TrajectoryStore(run_dir, self.run_id).load(
            truncate=False
        )

    @property
    def problem_map(self):
        return {p.id: p for p in self.problems}

    @property
    def curve(self):
        return analysis.accuracy_curve(
            self.trajectories.values(),
            self.config.max_iterations,
            len(self.problems),
        )

    @property
    def failures(self):
        """The ids of all problems that have not been solved"""
        return {
            p.id
            for p in self.problems
            if p.id not in self.trajectories
            or not self.trajectories[p.id].solved
        }

    def read(self, fname, cls=None):
        path = osp.join(self.run_dir, fname)
        if not osp.exists(path):
            return None
        if cls is None:
            return read_json(path)
        return read_jsonl(path, cls)

    def familiarity(self):
        path = osp.join(self.run_dir, FAMILIARITY)
        if not osp.exists(path):
            return None
        ret = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    d = json.loads(line)
                    ret[d["problem_id"]] = d["familiarity"]
        return ret


@docstrings.dedent
def report(
    run_dir,
    bin_by=None,
    bins=None,
    binning=None,
    compare=[],
    overlap=[],
    rc_file=None,
):
    """
    Write the reports of a run

    ``accuracy_curve.csv`` and ``summary.json`` are always written.
    ``category_accuracy.csv`` is written for problems with categories.

    Parameters
    ----------
    %(command.parameters.run_dir)s
    bin_by: str
        Write ``bins.csv`` with the initial and final accuracy per bin of
        this metric. Either ``'confidence'``, ``'familiarity'`` or a metadata
        key of the problems such as ``'s_pop'``
    bins: int
        The number of bins (see the ``analysis.bins`` rc parameter)
    binning: str
        ``'equal_width'`` or ``'quantile'`` binning
    compare: list of str
        Other run directories whose accuracy curves are written together with
        the curve of this run into ``comparison.csv``
    overlap: list of str
        Other run directories whose failures are compared with the failures
        of this run in ``overlap.json``
    %(command.parameters.rc_file)s"""
    _load_rc(rc_file)
    data = RunData(run_dir)
    curve = data.curve
    curve.to_csv(osp.join(run_dir, "accuracy_curve.csv"))
    categories = data.read(CATEGORIES, ErrorCategory)
    dist = None
    if categories is not None:
        dist = analysis.CategoryDistribution.from_categories(categories)
    cfg = data.config
    summary = analysis.summarize(
        data.trajectories,
        len(data.problems),
        cfg.max_iterations,
        data.run_id,
        data.config_hash,
        cfg.feedback_mechanism,
        cfg.sampling_strategy,
        dist,
    )
    write_json(osp.join(run_dir, SUMMARY), summary)
    if any(p.category for p in data.problems):
        analysis.category_accuracy(data.trajectories, data.problems).to_csv(
            osp.join(run_dir, "category_accuracy.csv"), index=False
        )
    if bin_by:
        metrics = analysis.metric_values(
            data.trajectories,
            data.problems,
            bin_by,
            data.familiarity(),
            solver=cfg.solver_model,
            task=cfg.task,
        )
        analysis.bin_by_metric(
            data.trajectories, metrics, bins, binning
        ).to_csv(osp.join(run_dir, "bins.csv"), index=False)
    if compare:
        others = [RunData(d) for d in compare]
        curves = {data.run_id: curve}
        curves.update((other.run_id, other.curve) for other in others)
        ds = analysis.compare_curves(curves)
        ds.to_dataframe().reset_index().to_csv(
            osp.join(run_dir, "comparison.csv"), index=False
        )
    if overlap:
        others = [RunData(d) for d in overlap]
        result = analysis.overlap_ratio(
            [data.failures] + [other.failures for other in others],
            [data.run_id] + [other.run_id for other in others],
        )
        write_json(osp.join(run_dir, "overlap.json"), result.to_dict())
    logger.info(
        "Run %s: initial accuracy %.3f, final accuracy %.3f",
        data.run_id,
        curve.initial,
        curve.final,
    )


def _load_model(fname):
    try:
        with open(fname) as f:
            d = yaml.load(f, Loader=yaml.SafeLoader)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError("Could not read model %s: %s" % (fname, e)) from e
    try:
        return ModelHandle.from_dict(d)
    except ValidationError as e:
        raise ConfigError("Invalid model in %s: %s" % (fname, e)) from e


@docstrings.dedent
def categorize(run_dir, annotator, workers=1, rc_file=None):
    """
    Classify the failures of a run

    Parameters
    ----------
    %(command.parameters.run_dir)s
    annotator: str
        A yaml file with the model of the annotator
    workers: int
        The number of concurrent annotator calls
    %(command.parameters.rc_file)s"""
    _load_rc(rc_file)
    model = _load_model(annotator)
    data = RunData(run_dir)
    unsolved = [
        t
        for t in data.trajectories.values()
        if t.status is Status.exhausted
    ]
    if not unsolved:
        warn("Run %s has no unsolved problems" % data.run_id, logger=logger)
    categories = analysis.categorize_errors(
        unsolved, data.problem_map, model, data.config.seed, workers
    )
    write_jsonl(osp.join(run_dir, CATEGORIES), categories)
    dist = analysis.CategoryDistribution.from_categories(categories)
    logger.info(
        "Categorized %i problem(s): %s",
        dist.total,
        ", ".join(
            "%s=%i" % (label.value, n) for label, n in dist.counts.items()
        ),
    )


def gen_arith(
    out, n=450, digits=5, base=10, seed=0, decimal_operands=False, task=None
):
    """
    Generate multiplication problems

    Parameters
    ----------
    out: str
        The JSONL file to write
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
        The task identifier"""
    problems = gen_mult_dataset(
        n, digits, base, seed, decimal_operands, task=task
    )
    dirname = osp.dirname(out)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    write_jsonl(out, problems)
    logger.info("Wrote %i problems to %s", len(problems), out)


@docstrings.dedent
def probe(run_dir, samples=None, solver=None, rc_file=None):
    """
    Measure how familiar the solver is with the problems of a run

    Every problem is answered ``samples`` times at temperature 1. The
    fraction of correct answers is written to ``familiarity.jsonl``.

    Parameters
    ----------
    %(command.parameters.run_dir)s
    samples: int
        The number of samples per problem (see the ``familiarity.samples``
        rc parameter)
    solver: str
        A yaml file with a model that is probed instead of the solver of the
        run
    %(command.parameters.rc_file)s"""
    _load_rc(rc_file)
    data = RunData(run_dir)
    model = (
        data.config.solver_model if solver is None else _load_model(solver)
    )
    rows = [
        {
            "problem_id": p.id,
            "familiarity": analysis.familiarity_probe(
                p, model, samples, data.config.task, data.config.seed
            ),
            "samples": samples or rcParams["familiarity.samples"],
        }
        for p in data.problems
    ]
    write_jsonl(osp.join(run_dir, FAMILIARITY), rows)
    logger.info("Probed %i problem(s) of run %s", len(rows), data.run_id)


# -----------------------------------------------------------------------------
# parser
# -----------------------------------------------------------------------------


def get_parser():
    """Return the parser of the ``frictionloop`` command

    Returns
    -------
    funcargparse.FuncArgParser
        The :class:`argparse.ArgumentParser` instance"""
    epilog = docstrings.dedent(
        """
        Examples
        --------

        Generate 450 five-digit multiplication problems::

            $ frictionloop gen-arith -o mult5.jsonl -n 450 -d 5

        Run an experiment and write the reports::

            $ frictionloop run -c experiment.yml

        Classify the failures and update the reports::

            $ frictionloop categorize runs/0123abcd -a annotator.yml
            $ frictionloop report runs/0123abcd --bin-by confidence
        """
    )

    parser = FuncArgParser(
        prog="frictionloop",
        description="""
        Run iterative solver-feedback-retry experiments and analyse them""",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    info_grp = parser.add_argument_group(
        "Info options", "Options that print informations and quit afterwards"
    )

    parser.update_arg(
        "version",
        short="V",
        long="version",
        action="version",
        version=frictionloop.__version__,
        if_existent=False,
        group=info_grp,
    )

    parser.update_arg(
        "all_versions",
        short="aV",
        long="all-versions",
        action=AllVersionsAction,
        if_existent=False,
        group=info_grp,
    )

    parser.update_arg(
        "dump_rc",
        long="dump-rc",
        action=DumpRcAction,
        if_existent=False,
        group=info_grp,
    )

    parser.create_arguments()

    parser.add_subparsers(title="Commands", dest="command")

    sp = parser.setup_subparser(run, return_parser=True)
    sp.update_arg("config", short="c", positional=False, required=True)
    sp.update_arg("resume", short="r")
    sp.update_arg("output_dir", short="o")
    sp.update_arg("rc_file", short="rc")
    sp.create_arguments()
    sp.set_defaults(command_func=run)

    sp = parser.setup_subparser(report, return_parser=True)
    sp.update_arg("run_dir", positional=True)
    sp.update_arg("bin_by", short="b")
    sp.update_arg("bins", short="nb", type=int)
    sp.update_arg(
        "binning", short="bm", choices=["equal_width", "quantile"]
    )
    sp.update_arg("compare", short="c", nargs="+", metavar="RUN_DIR")
    sp.update_arg("overlap", short="ov", nargs="+", metavar="RUN_DIR")
    sp.update_arg("rc_file", short="rc")
    sp.create_arguments()
    sp.set_defaults(command_func=report)

    sp = parser.setup_subparser(categorize, return_parser=True)
    sp.update_arg("run_dir", positional=True)
    sp.update_arg("annotator", short="a", positional=False, required=True)
    sp.update_arg("workers", short="w", type=int)
    sp.update_arg("rc_file", short="rc")
    sp.create_arguments()
    sp.set_defaults(command_func=categorize)

    sp = parser.setup_subparser(gen_arith, return_parser=True)
    sp.update_arg("out", short="o", positional=False, required=True)
    sp.update_arg("n", short="n", type=int)
    sp.update_arg("digits", short="d", type=int)
    sp.update_arg("base", short="b", type=int, choices=[10, 16])
    sp.update_arg("seed", short="s", type=int)
    sp.update_arg("decimal_operands", short="do")
    sp.update_arg("task", short="t")
    sp.create_arguments()
    sp.set_defaults(command_func=gen_arith)

    sp = parser.setup_subparser(probe, return_parser=True)
    sp.update_arg("run_dir", positional=True)
    sp.update_arg("samples", short="n", type=int)
    sp.update_arg("solver", short="s")
    sp.update_arg("rc_file", short="rc")
    sp.create_arguments()
    sp.set_defaults(command_func=probe)

    return parser


class InfoAction(argparse.Action):
    """Print the result of :meth:`info` and exit"""

    help = None

    def __init__(self, option_strings, dest=argparse.SUPPRESS, **kwargs):
        if kwargs.pop("nargs", None) is not None:
            raise ValueError("nargs not allowed")
        kwargs["help"] = self.help
        kwargs["default"] = argparse.SUPPRESS
        super().__init__(option_strings, nargs=0, dest=dest, **kwargs)

    def info(self):
        raise NotImplementedError

    def __call__(self, parser, namespace, values, option_string=None):
        print(self.info())
        sys.exit(0)


class AllVersionsAction(InfoAction):
    help = "Print the versions of all requirements and exit"

    def info(self):
        return yaml.dump(frictionloop.get_versions(), default_flow_style=False)


class DumpRcAction(InfoAction):
    help = "Print the rc parameters with descriptions and exit"

    def info(self):
        return rcParams.dump()


if __name__ == "__main__":
    sys.exit(main())

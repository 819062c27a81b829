"""Default management of the frictionloop package

Package defaults live in :data:`rcParams`, validated against the
:data:`defaultParams` table. Run configuration files are checked against the
:data:`runconfigParams` table by :func:`validate_run_config`. The design
follows the rcParams of matplotlib_.

.. _matplotlib: https://matplotlib.org/stable/users/explain/customizing.html"""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import contextlib
import inspect
import logging
import os
import sys
from fractions import Fraction

import yaml

from frictionloop.config.logsetup import _get_home
from frictionloop.docstring import dedent
from frictionloop.errors import ConfigError
from frictionloop.utils import check_key, is_remote_url, isstring
from frictionloop.warning import warn

logger = logging.getLogger(__name__)


class RcParams(dict):
    """Validated dictionary of the package defaults

    Every key needs an entry ``key: [default, validator, description]`` in
    :attr:`defaultParams`. Values are converted by the validator when they
    are set and unknown keys raise a :class:`KeyError` that names similar
    keys. The same class validates run configurations with
    :data:`runconfigParams`."""

    HEADER = """Configuration parameters of the frictionloop package

Save this file (or parts of it) as frictionrc.yml in the working directory,
or in the directory of the FRICTIONCONFIGDIR environment variable."""

    def __init__(self, *args, **kwargs):
        """
        Parameters
        ----------
        defaultParams: dict
            The table of defaults and validators. If not given, the
            :data:`frictionloop.config.rcsetup.defaultParams` are used

        Other Parameters
        ----------------
        *args, **kwargs
            Initial items, validated like in :meth:`update`"""
        defaultParams = kwargs.pop("defaultParams", None)
        if defaultParams is not None:
            self.defaultParams = defaultParams
        self._force_update(dict(*args, **kwargs), "__init__")

    @property
    def defaultParams(self):
        return getattr(self, "_defaultParams", defaultParams)

    @defaultParams.setter
    def defaultParams(self, value):
        self._defaultParams = value

    @defaultParams.deleter
    def defaultParams(self):
        del self._defaultParams

    @property
    def validate(self):
        """Mapping from key to validation function"""
        return {key: val[1] for key, val in self.defaultParams.items()}

    @property
    def descriptions(self):
        """Mapping from key to its documentation"""
        return {
            key: val[2]
            for key, val in self.defaultParams.items()
            if len(val) > 2
        }

    def _force_update(self, d, func):
        # invalid values are kept with a warning instead of failing the
        # whole update
        for key, val in d.items():
            try:
                self[key] = val
            except (ValueError, RuntimeError):
                warn(
                    _rcparam_warn_str.format(
                        key=repr(key), value=repr(val), func=func
                    )
                )
                dict.__setitem__(self, key, val)

    def _check_key(self, key):
        if key not in self.defaultParams:
            check_key(
                key,
                self.defaultParams,
                name="rc parameter",
                msg="See rcParams.keys() for a list of valid parameters.",
            )
        return key

    def __setitem__(self, key, val):
        validate = self.validate[self._check_key(key)]
        try:
            val = validate(val)
        except ValueError as e:
            raise ValueError("Key %s: %s" % (key, e))
        dict.__setitem__(self, key, val)

    def __getitem__(self, key):
        return dict.__getitem__(self, self._check_key(key))

    def update(self, *args, **kwargs):
        """Update the values through the validators

        :meth:`dict.update` would bypass :meth:`__setitem__`"""
        self._force_update(dict(*args, **kwargs), "update")

    def update_from_defaultParams(self, defaultParams=None):
        """Reset the values to the defaults

        Parameters
        ----------
        defaultParams: dict
            The table to take the defaults from. If None, the
            :attr:`defaultParams` attribute is used"""
        table = self.defaultParams if defaultParams is None else defaultParams
        self.update({key: val[0] for key, val in table.items()})

    def __str__(self):
        return "\n".join("%s: %s" % (key, self[key]) for key in self.keys())

    def keys(self):
        """The sorted list of keys"""
        return sorted(dict.keys(self))

    def values(self):
        """The values in the order of :meth:`keys`"""
        return [self[key] for key in self.keys()]

    def load_from_file(self, fname=None):
        """Update the values from a yaml file

        Parameters
        ----------
        fname: str
            The yaml file with a mapping of keys in :attr:`defaultParams`. If
            None, the file of :func:`friction_fname` is used (if any)

        See Also
        --------
        dump, friction_fname"""
        fname = fname or friction_fname()
        if not fname or not os.path.exists(fname):
            return
        logger.debug("Loading rc parameters from %s", fname)
        with open(fname) as f:
            self.update(yaml.safe_load(f) or {})

    def dump(
        self, fname=None, overwrite=True, include_descriptions=True, **kwargs
    ):
        """Write the values as yaml

        Parameters
        ----------
        fname: str or None
            The file to write. If None, the yaml string is returned
        overwrite: bool
            Whether an existing `fname` may be replaced
        include_descriptions: bool
            Precede the file with :attr:`HEADER` and every key with its
            description as yaml comments

        Other Parameters
        ----------------
        ``**kwargs``
            Any other parameter for :func:`yaml.dump`

        Returns
        -------
        str or None
            The yaml string if `fname` is None

        Raises
        ------
        IOError
            If `fname` exists and `overwrite` is False

        See Also
        --------
        load_from_file"""
        if fname is not None and not overwrite and os.path.exists(fname):
            raise IOError(
                "%s already exists! Set overwrite=True to overwrite it!"
                % fname
            )
        kwargs.setdefault("default_flow_style", False)
        descriptions = self.descriptions if include_descriptions else {}
        lines = []
        if include_descriptions:
            header = self.HEADER.splitlines() + ["", "Created with python"]
            header += sys.version.splitlines()
            lines = [("# " + line).rstrip() for line in header] + [""]
        for key in self.keys():
            desc = descriptions.get(key, "")
            lines.extend("# " + line for line in desc.splitlines())
            lines.extend(yaml.dump({key: self[key]}, **kwargs).splitlines())
        s = "\n".join(lines) + "\n"
        if fname is None:
            return s
        with open(fname, "w") as f:
            f.write(s)
        return None

    def copy(self):
        """Copy the values and keep the :attr:`defaultParams`"""
        ret = RcParams(defaultParams=self.defaultParams)
        dict.update(ret, self)
        return ret

    @contextlib.contextmanager
    def catch(self):
        """Restore the current values when the context exits

        Usage::

            with rcParams.catch():
                rcParams["gateway.max_attempts"] = 1
                ...
        """
        saved = dict(self)
        try:
            yield
        finally:
            dict.update(self, saved)


def _rc_candidates(env_key, fname):
    yield os.path.join(os.getcwd(), fname)
    path = os.environ.get(env_key)
    if path:
        yield os.path.join(path, fname) if os.path.isdir(path) else path
    configdir = get_configdir()
    if configdir is not None:
        yield os.path.join(configdir, fname)


def friction_fname(
    env_key="FRICTIONRC", fname="frictionrc.yml", if_exists=True
):
    """
    Get the location of the rc file

    The first existing file of

    1. ``$PWD/frictionrc.yml``
    2. the `env_key` environment variable (a file, or a directory with
       ``frictionrc.yml``)
    3. ``frictionrc.yml`` in :func:`get_configdir`

    is used.

    Parameters
    ----------
    env_key: str
        The environment variable with the path of the file
    fname: str
        The name of the rc file
    if_exists: bool
        If False and no file exists, the path in the configuration directory
        is returned anyway

    Returns
    -------
    str or None
        The path of the rc file"""
    for path in _rc_candidates(env_key, fname):
        if os.path.exists(path):
            return path
    configdir = get_configdir()
    if not if_exists and configdir is not None:
        return os.path.join(configdir, fname)
    return None


def get_configdir(name="frictionloop", env_key="FRICTIONCONFIGDIR"):
    """
    The directory for the configuration of the user

    This is the `env_key` environment variable if set. Otherwise
    ``~/.config/<name>`` on Linux and macOS and ``~/.<name>`` elsewhere. None
    is returned when no home directory exists."""
    if os.environ.get(env_key):
        return os.path.abspath(os.environ[env_key])
    home = _get_home()
    if home is None:
        return None
    if sys.platform.startswith("linux") or sys.platform == "darwin":
        return os.path.join(home, ".config", name)
    return os.path.join(home, "." + name)


# -----------------------------------------------------------------------------
# validators
# -----------------------------------------------------------------------------


def validate_bool(b):
    """Convert b to a boolean or raise"""
    if isinstance(b, str):
        b = b.lower()
    if b in ("t", "y", "yes", "on", "true", "1", 1, True):
        return True
    elif b in ("f", "n", "no", "off", "false", "0", 0, False):
        return False
    else:
        raise ValueError('Could not convert "%s" to boolean' % b)


def validate_str(s):
    """Validate a string

    Parameters
    ----------
    s: str

    Returns
    -------
    str

    Raises
    ------
    ValueError"""
    if not isstring(s):
        raise ValueError("Expected a string, not %r" % (s,))
    return str(s)


def validate_str_maybe_none(s):
    """Validate a string or None"""
    if s is None:
        return None
    return validate_str(s)


def validate_dict(d):
    """Validate a dictionary

    Parameters
    ----------
    d: dict

    Returns
    -------
    dict

    Raises
    ------
    ValueError"""
    try:
        return dict(d)
    except (TypeError, ValueError):
        raise ValueError("Could not convert {} to dictionary!".format(d))


def _number_validator(cast, name, minimum=None, strict=False, optional=False):
    def validate(val):
        if val is None and optional:
            return None
        if isinstance(val, bool):
            raise ValueError("Expected %s, not a boolean" % name)
        try:
            ret = cast(val)
        except (TypeError, ValueError):
            raise ValueError("Could not convert %r to %s" % (val, name))
        if cast is int and ret != float(val):
            raise ValueError("%r is not an integer" % (val,))
        if minimum is not None:
            if (strict and ret <= minimum) or ret < minimum:
                raise ValueError(
                    "%r must be %s %s"
                    % (val, ">" if strict else ">=", minimum)
                )
        return ret

    validate.__doc__ = "Convert the value to %s%s" % (
        name,
        ""
        if minimum is None
        else " (%s %s)" % (">" if strict else ">=", minimum),
    )
    return validate


validate_int = _number_validator(int, "an integer")
validate_positive_int = _number_validator(int, "an integer", minimum=1)
validate_nonneg_int = _number_validator(int, "an integer", minimum=0)
validate_nonneg_float = _number_validator(float, "a float", minimum=0)
validate_positive_float = _number_validator(
    float, "a float", minimum=0, strict=True
)
validate_positive_float_maybe_none = _number_validator(
    float, "a float", minimum=0, strict=True, optional=True
)
validate_positive_int_maybe_none = _number_validator(
    int, "an integer", minimum=1, optional=True
)


def validate_fraction(val):
    """Convert `val` into a :class:`fractions.Fraction` in ``(0, 1]``

    Strings such as ``'1/10'`` and decimal numbers such as ``0.1`` are
    accepted. Floats are converted through their shortest decimal
    representation, so ``0.1`` becomes exactly ``1/10``."""
    if isinstance(val, bool):
        raise ValueError("Expected a fraction, not a boolean")
    try:
        ret = Fraction(val if isinstance(val, (int, str)) else str(val))
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValueError("Could not convert %r to a fraction" % (val,))
    if not 0 < ret <= 1:
        raise ValueError("%r is not in (0, 1]" % (val,))
    return ret


class ValidateInStrings(object):
    """Validate that a string is one of the given options"""

    def __init__(self, key, valid, ignorecase=False):
        """
        Parameters
        ----------
        key: str
            The name of the parameter (for the error message)
        valid: list of str
            The valid options
        ignorecase: bool
            If True, the case of the string is ignored"""
        self.key = key
        self.ignorecase = ignorecase

        def func(s):
            return s.lower() if ignorecase else s

        self.valid = {func(k): k for k in valid}

    def __call__(self, s):
        if s is None:
            raise ValueError("%s must not be empty" % self.key)
        key = str(s).lower() if self.ignorecase else str(s)
        if key in self.valid:
            return self.valid[key]
        check_key(key, self.valid, name=self.key, exc=ValueError)


validate_feedback_mechanism = ValidateInStrings(
    "feedback_mechanism", ["F1", "F2", "F3"], ignorecase=True
)
validate_sampling_strategy = ValidateInStrings(
    "sampling_strategy",
    ["greedy", "temp_schedule", "temp_schedule_plus_rejection"],
)
validate_task_format = ValidateInStrings(
    "format", ["multiple_choice", "open_ended", "numeric_boxed"]
)
validate_binning = ValidateInStrings("binning", ["equal_width", "quantile"])


def validate_arith_base(val):
    """Validate the base of a synthetic multiplication task"""
    val = validate_int(val)
    if val not in (10, 16):
        raise ValueError("Base must be 10 or 16, not %s" % val)
    return val


@dedent
def validate_model_spec(d):
    """
    Validate the mapping that describes a model handle

    Parameters
    ----------
    d: dict or None
        A mapping with the keys ``name``, ``kind`` (``'remote'`` or
        ``'scripted'``), ``endpoint`` (remote only), ``script`` (scripted
        only) and optionally ``default_temperature``, ``min_temperature``,
        ``context_budget``, ``api_key_env`` and ``timeout``

    Returns
    -------
    dict or None
        The validated mapping

    Raises
    ------
    ValueError"""
    if d is None:
        return None
    d = validate_dict(d)
    unknown = set(d) - set(_model_spec_keys)
    if unknown:
        check_key(
            sorted(unknown)[0], _model_spec_keys, "model key", exc=ValueError
        )
    ret = {"name": validate_str(d.get("name", ""))}
    ret["kind"] = ValidateInStrings("kind", ["remote", "scripted"])(
        d.get("kind", "remote")
    )
    if ret["kind"] == "remote":
        if not is_remote_url(d.get("endpoint")):
            raise ValueError(
                "Remote model %s needs an http(s) endpoint" % ret["name"]
            )
        if d.get("script") is not None:
            raise ValueError("Remote model %s has a script" % ret["name"])
        ret["endpoint"] = d["endpoint"].rstrip("/")
    else:
        if d.get("endpoint") is not None:
            raise ValueError(
                "Scripted model %s must not have an endpoint" % ret["name"]
            )
        ret["script"] = validate_dict(d.get("script") or {})
    ret["default_temperature"] = validate_nonneg_float(
        d.get("default_temperature", 0.0)
    )
    ret["min_temperature"] = validate_nonneg_float(
        d.get("min_temperature", 0.0)
    )
    ret["context_budget"] = validate_positive_int_maybe_none(
        d.get("context_budget")
    )
    ret["api_key_env"] = validate_str_maybe_none(d.get("api_key_env"))
    ret["timeout"] = validate_positive_float_maybe_none(d.get("timeout"))
    return ret


_model_spec_keys = [
    "name",
    "kind",
    "endpoint",
    "script",
    "default_temperature",
    "min_temperature",
    "context_budget",
    "api_key_env",
    "timeout",
]


def validate_task_spec(d):
    """Validate the ``task`` section of a run configuration

    The section needs a ``name`` and either a ``dataset`` path or a
    ``generator`` mapping with the keys ``n``, ``digits``, ``base``, ``seed``
    and optionally ``decimal_operands``."""
    if d is None:
        return None
    d = validate_dict(d)
    for key in d:
        check_key(key, _task_keys, "task key", exc=ValueError)
    ret = {"name": validate_str(d.get("name", ""))}
    if not ret["name"]:
        raise ValueError("The task needs a name")
    ret["dataset"] = validate_str_maybe_none(d.get("dataset"))
    gen = d.get("generator")
    if (ret["dataset"] is None) == (gen is None):
        raise ValueError(
            "Exactly one of dataset and generator must be given for task %s"
            % ret["name"]
        )
    if gen is not None:
        gen = validate_dict(gen)
        ret["generator"] = {
            "n": validate_positive_int(gen.get("n", 450)),
            "digits": validate_positive_int(gen.get("digits", 5)),
            "base": validate_arith_base(gen.get("base", 10)),
            "seed": validate_int(gen.get("seed", 0)),
            "decimal_operands": validate_bool(
                gen.get("decimal_operands", False)
            ),
        }
    else:
        ret["generator"] = None
    default_format = "numeric_boxed" if gen is not None else "open_ended"
    ret["format"] = validate_task_format(d.get("format", default_format))
    ret["fewshot_k"] = validate_nonneg_int(
        d.get("fewshot_k", rcParams["tasks.fewshot_k"])
    )
    ret["parser"] = validate_str_maybe_none(d.get("parser"))
    ret["judge"] = validate_model_spec(d.get("judge"))
    if ret["judge"] is not None and ret["format"] != "open_ended":
        raise ValueError("A judge can only be used for open_ended tasks")
    return ret


_task_keys = [
    "name",
    "dataset",
    "generator",
    "format",
    "fewshot_k",
    "parser",
    "judge",
]


#: :class:`dict` with default values and validation functions of the keys in
#: a run configuration file. ``None`` defaults of ``solver_model`` and
#: ``task`` mark required keys
runconfigParams = {
    "solver_model": [
        None,
        validate_model_spec,
        "The model that solves the problems (see validate_model_spec)",
    ],
    "feedback_model": [
        None,
        validate_model_spec,
        "The model that generates F3 feedback. F2 uses the solver itself",
    ],
    "feedback_mechanism": [
        "F1",
        validate_feedback_mechanism,
        "F1 (binary), F2 (self-generated) or F3 (strong-model) feedback",
    ],
    "max_iterations": [
        10,
        validate_positive_int,
        "Maximum number of attempts K per problem",
    ],
    "sampling_strategy": [
        "greedy",
        validate_sampling_strategy,
        "greedy, temp_schedule or temp_schedule_plus_rejection",
    ],
    "rejection_candidates": [
        25,
        validate_positive_int,
        "Number of candidates drawn per iteration for rejection sampling",
    ],
    "seed": [0, validate_int, "64-bit seed of the run"],
    "subsample_fraction": [
        Fraction(1),
        validate_fraction,
        "Fraction of the dataset to run, e.g. 1/10",
    ],
    "concurrency_limit": [
        4,
        validate_positive_int,
        "Maximum number of problems (and thus model calls) in flight",
    ],
    "collect_logprobs": [
        False,
        validate_bool,
        "Request token log-probabilities for the first attempt",
    ],
    "output_dir": [
        "runs",
        validate_str,
        "Directory in which the run directory <run_id> is created",
    ],
    "task": [None, validate_task_spec, "The task section (see above)"],
}

_required_run_keys = ["solver_model", "task"]


def validate_run_config(d):
    """Validate the content of a run configuration file

    Parameters
    ----------
    d: dict
        The parsed yaml content

    Returns
    -------
    dict
        The validated configuration with defaults for missing keys

    Raises
    ------
    ConfigError
        If a key is unknown, a value does not validate or a required key is
        missing"""
    if not isinstance(d, dict):
        raise ConfigError("The run configuration must be a mapping")
    rc = RcParams(defaultParams=runconfigParams)
    for key, (default, validate, desc) in runconfigParams.items():
        if key not in _required_run_keys:
            dict.__setitem__(rc, key, validate(default))
    for key, val in d.items():
        try:
            rc[key] = val
        except (KeyError, ValueError) as e:
            raise ConfigError(str(e.args[0] if e.args else e)) from e
    missing = [key for key in _required_run_keys if rc.get(key) is None]
    if missing:
        raise ConfigError(
            "Missing required configuration keys: %s" % ", ".join(missing)
        )
    if rc["feedback_mechanism"] == "F3" and rc["feedback_model"] is None:
        raise ConfigError("F3 feedback requires a feedback_model")
    return dict(rc)


def _default_system_prompts():
    return {
        "multiple_choice": inspect.cleandoc(
            """
            The following is a multiple choice question. Think step by step
            and then finish your answer with "The answer is (X)" where X is
            the letter of the correct option."""
        ),
        "numeric_boxed": inspect.cleandoc(
            r"""
            Solve the following problem. Please reason step by step, and
            put your final answer within \boxed{}."""
        ),
        "open_ended": inspect.cleandoc(
            """
            Answer the following question. Think step by step and finish
            with a line of the form "Answer: <your answer>"."""
        ),
    }


#: :class:`dict` with default values and validation functions
defaultParams = {
    # gateway
    "gateway.timeout": [
        120.0,
        validate_positive_float,
        "Timeout in seconds of a single chat-completions request",
    ],
    "gateway.max_attempts": [
        5,
        validate_positive_int,
        "Number of attempts of a model call before a problem is aborted",
    ],
    "gateway.backoff_factor": [
        1.0,
        validate_nonneg_float,
        "Factor in seconds of the exponential backoff between attempts",
    ],
    "gateway.backoff_max": [
        60.0,
        validate_nonneg_float,
        "Maximum number of seconds to wait between two attempts",
    ],
    "gateway.max_tokens": [
        4096,
        validate_positive_int,
        "max_tokens of every chat-completions request",
    ],
    "gateway.api_key_env": [
        "FRICTION_API_KEY",
        validate_str,
        "Environment variable with the bearer token of remote endpoints",
    ],
    # loop
    "loop.fewshot_every_iteration": [
        True,
        validate_bool,
        "Repeat the few-shot exemplars in every iteration, not only the "
        "first one",
    ],
    # masking
    "masking.token": [
        "[masked]",
        validate_str,
        "Replacement for answer occurrences in feedback",
    ],
    "masking.leak_check": [
        True,
        validate_bool,
        "Check every feedback for remaining answer occurrences at runtime",
    ],
    # feedback
    "feedback.temperature": [
        0.0,
        validate_nonneg_float,
        "Decoding temperature of F2/F3 feedback generation",
    ],
    "feedback.append_masked_solution": [
        True,
        validate_bool,
        "Append the masked template solution to F2/F3 feedback of synthetic "
        "multiplication tasks",
    ],
    # sampling
    "sampling.temperature_step": [
        0.15,
        validate_nonneg_float,
        "Temperature increase per iteration of the temperature schedule",
    ],
    # tasks
    "tasks.fewshot_k": [
        5,
        validate_nonneg_int,
        "Default number of few-shot exemplars",
    ],
    "tasks.choice_labels": [
        "ABCDEFGHIJ",
        validate_str,
        "Labels that the multiple-choice parser accepts",
    ],
    # prompts
    "prompts.system": [
        _default_system_prompts(),
        validate_dict,
        "System prompt of the solver for each task format",
    ],
    "prompts.retry": [
        "Your previous attempts and the feedback on them are listed above. "
        "Please answer the question again.",
        validate_str,
        "Instruction that closes every prompt after the first iteration",
    ],
    "prompts.f1": [
        "Your answer was incorrect. Please answer the question again.",
        validate_str,
        "Constant binary feedback (F1)",
    ],
    "prompts.feedback_instruction": [
        "Please give me feedback on which solution step is wrong and how to "
        "get to the correct answer without revealing the answer.",
        validate_str,
        "Instruction of the F2/F3 feedback generator",
    ],
    "prompts.judge": [
        inspect.cleandoc(
            """
            You are grading the answer to a question against the gold answer.

            Question: {question}
            Gold answer: {gold}
            Candidate answer: {candidate}

            Does the candidate answer mean the same as the gold answer? Reply
            with exactly one word: YES or NO."""
        ),
        validate_str,
        "Prompt of the answer judge",
    ],
    "prompts.annotator": [
        inspect.cleandoc(
            """
            Below is the complete trajectory of a model that tried to solve a
            problem over several iterations. After every wrong attempt it
            received feedback that was generated with access to the correct
            answer. The problem is still unsolved.

            Classify the main reason of the failure into one category:
            FR (feedback resistance): the feedback is correct and relevant
            but the model does not incorporate it.
            FQ (feedback quality): the feedback is wrong, ambiguous or does
            not address the problematic step.
            OTH (other): e.g. the problem is ambiguous or the answer is
            correct but in the wrong format.

            Problem: {question}
            Correct answer: {answer}

            {trajectory}

            Reply with the category on the first line as "Category: FR",
            "Category: FQ" or "Category: OTH", followed by a short
            rationale."""
        ),
        validate_str,
        "Prompt of the error category annotator",
    ],
    # store
    "store.timestamps": [
        True,
        validate_bool,
        "Write wall-clock timestamps into trajectory logs. Disable for "
        "byte-reproducible stores",
    ],
    # analysis
    "analysis.bins": [
        5,
        validate_positive_int,
        "Number of bins for confidence and popularity analyses",
    ],
    "analysis.binning": [
        "equal_width",
        validate_binning,
        "Binning of the analysis: equal_width or quantile",
    ],
    "familiarity.samples": [
        100,
        validate_positive_int,
        "Samples per problem of the familiarity probe",
    ],
    "familiarity.batch_size": [
        25,
        validate_positive_int,
        "Completions requested per call of the familiarity probe",
    ],
    "arith.mask_policies": [
        {},
        validate_dict,
        "Mapping from task name to the masking policy of its template "
        "solutions (partial_and_final or final_only). Tasks not listed use "
        "partial_and_final for base 10 and final_only for base 16",
    ],
}


_rcparam_warn_str = (
    "Trying to set {key} to {value} via the {func} "
    "method of RcParams which does not validate cleanly. "
)

#: :class:`~frictionloop.config.rcsetup.RcParams` instance that stores
#: default configuration settings.
rcParams = RcParams()
rcParams.update_from_defaultParams()

"""Exceptions of the frictionloop package.

All errors derive from :class:`FrictionError`. Errors raised by model calls
derive from :class:`ModelError` and are retried by
:func:`frictionloop.gateway.with_retry` before they are turned into a
:class:`ModelUnavailable`."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only


class FrictionError(Exception):
    """Base class for all errors of the frictionloop package"""


class ValidationError(FrictionError, ValueError):
    """A domain object violates one of its invariants"""


class ConfigError(FrictionError):
    """The run configuration or a command line option is invalid"""


class PreconditionError(FrictionError):
    """An operation has been called outside of its contract"""


class DatasetError(FrictionError):
    """Base class for errors while reading a dataset"""


class DatasetEmpty(DatasetError):
    """The dataset file does not contain a single problem"""


class ParseError(DatasetError):
    """A line of a JSONL file could not be decoded

    Parameters
    ----------
    line: int
        The 1-based line number
    msg: str
        What went wrong"""

    def __init__(self, line, msg):
        self.line = line
        super().__init__("Line %i: %s" % (line, msg))


class InsufficientExemplars(FrictionError):
    """Not enough problems to draw the requested few-shot exemplars"""


class ModelError(FrictionError):
    """Base class for retryable errors of a model call"""


class Timeout(ModelError):
    """The model endpoint did not answer in time"""


class HttpStatus(ModelError):
    """The model endpoint answered with an HTTP error status"""

    def __init__(self, code, msg=""):
        self.code = code
        super().__init__("HTTP %i %s" % (code, msg))


class MalformedResponse(ModelError):
    """The response body does not follow the chat-completions schema"""


class Unsupported(FrictionError):
    """The backend does not support a requested feature

    Parameters
    ----------
    feature: str
        The name of the feature, e.g. ``'logprobs'``"""

    def __init__(self, feature, msg=""):
        self.feature = feature
        super().__init__(msg or "%s are not supported" % feature)


class ModelUnavailable(FrictionError):
    """A model call failed even after the retry budget has been used"""


class ContextOverflow(FrictionError):
    """The prompt is longer than the context budget of the model"""


class StoreError(FrictionError):
    """The trajectory store cannot be read or written"""


class LeakDetected(FrictionError):
    """Feedback still contains the gold answer after masking"""


class EmptyRun(FrictionError):
    """There are no trajectories to analyse"""


class EmptyTokenList(FrictionError):
    """A confidence has been requested for an empty token list"""


class MissingMetric(FrictionError):
    """A problem does not carry the metric used for binning"""

    def __init__(self, problem_id, metric):
        self.problem_id = problem_id
        super().__init__(
            "Problem %s has no value for %r" % (problem_id, metric)
        )


class IdMismatch(FrictionError):
    """Two label sets do not cover the same problems"""


class AllSetsEmpty(FrictionError):
    """All failure sets are empty, the overlap ratio is undefined"""

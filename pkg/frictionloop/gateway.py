"""Access to chat models

This module provides uniform access to two kinds of models:

remote
    Any server that speaks the OpenAI-compatible chat-completions protocol.
    Requests are sent with :mod:`httpx` through a shared connection pool
    (:data:`clients`)
scripted
    Deterministic models that follow a :class:`ScriptedBehavior`. They never
    touch the network and are used for offline experiments and tests

Model calls raise subclasses of :class:`~frictionloop.errors.ModelError` on
transient failures. :func:`with_retry` retries them with exponential backoff
and raises :class:`~frictionloop.errors.ModelUnavailable` afterwards."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import functools
import logging
import math
import os
import threading
from enum import Enum
from typing import Dict, Optional, Tuple

import backoff
import httpx
import numpy as np

from frictionloop.config.rcsetup import rcParams, validate_model_spec
from frictionloop.docstring import docstrings
from frictionloop.errors import (
    HttpStatus,
    MalformedResponse,
    ModelError,
    ModelUnavailable,
    PreconditionError,
    Timeout,
    Unsupported,
    ValidationError,
)
from frictionloop.model import Completion
from frictionloop.utils import derive_rng, stable_hash
from frictionloop.warning import warn_once

logger = logging.getLogger(__name__)


class ModelKind(str, Enum):
    remote = "remote"
    scripted = "scripted"


class ScriptMode(str, Enum):
    """The behaviours of scripted models"""

    #: reply with the answer of the current iteration
    fixed_script = "fixed_script"
    #: answer correctly with a fixed probability once feedback exists
    obey_with_probability = "obey_with_probability"
    #: repeat the first answer until the feedback contains a trigger
    echo_feedback_trigger = "echo_feedback_trigger"
    #: reply with the text whose key occurs in the prompt
    keyed_replies = "keyed_replies"


@dataclasses.dataclass(frozen=True)
class ScriptedBehavior:
    """The behaviour of a scripted model

    Parameters
    ----------
    mode: ScriptMode
        How the replies are generated
    answers_by_iteration: tuple of str
        The replies of ``fixed_script`` models by iteration. The last entry
        is repeated. For ``echo_feedback_trigger`` models, the first entry is
        the repeated answer
    obey_probability: float
        The probability to answer correctly after feedback
        (``obey_with_probability``)
    trigger_token: str
        The token that makes an ``echo_feedback_trigger`` model answer
        correctly
    initial_accuracy: float
        The probability that an ``obey_with_probability`` model answers
        correctly without feedback
    token_probabilities: tuple of float
        Per-character token probabilities. If empty, the model does not
        support log-probabilities
    replies: dict
        Mapping from keys to replies (``keyed_replies``)
    default_reply: str
        The reply of ``keyed_replies`` models if no key matches"""

    mode: ScriptMode
    answers_by_iteration: Tuple[str, ...] = ()
    obey_probability: Optional[float] = None
    trigger_token: Optional[str] = None
    initial_accuracy: float = 0.0
    token_probabilities: Tuple[float, ...] = ()
    replies: Dict[str, str] = dataclasses.field(default_factory=dict)
    default_reply: str = ""

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", ScriptMode(self.mode))
        except ValueError:
            raise ValidationError("Unknown script mode %r" % (self.mode,))
        object.__setattr__(
            self, "answers_by_iteration", tuple(self.answers_by_iteration)
        )
        object.__setattr__(
            self,
            "token_probabilities",
            tuple(map(float, self.token_probabilities)),
        )
        mode = self.mode
        if mode is ScriptMode.fixed_script and not self.answers_by_iteration:
            raise ValidationError("fixed_script needs answers_by_iteration")
        if mode is ScriptMode.obey_with_probability:
            q = self.obey_probability
            if q is None or not 0 <= q <= 1:
                raise ValidationError(
                    "obey_with_probability needs obey_probability in [0, 1]"
                )
        if mode is ScriptMode.echo_feedback_trigger and not self.trigger_token:
            raise ValidationError("echo_feedback_trigger needs trigger_token")
        if mode is ScriptMode.keyed_replies and not self.replies:
            raise ValidationError("keyed_replies needs replies")
        if not 0 <= self.initial_accuracy <= 1:
            raise ValidationError("initial_accuracy must be in [0, 1]")
        if any(not 0 < p <= 1 for p in self.token_probabilities):
            raise ValidationError("token_probabilities must be in (0, 1]")

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "answers_by_iteration": list(self.answers_by_iteration),
            "obey_probability": self.obey_probability,
            "trigger_token": self.trigger_token,
            "initial_accuracy": self.initial_accuracy,
            "token_probabilities": list(self.token_probabilities),
            "replies": dict(self.replies),
            "default_reply": self.default_reply,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            mode=d.get("mode"),
            answers_by_iteration=tuple(
                map(str, d.get("answers_by_iteration") or ())
            ),
            obey_probability=d.get("obey_probability"),
            trigger_token=d.get("trigger_token"),
            initial_accuracy=d.get("initial_accuracy", 0.0),
            token_probabilities=tuple(d.get("token_probabilities") or ()),
            replies=dict(d.get("replies") or {}),
            default_reply=d.get("default_reply", ""),
        )


@dataclasses.dataclass(frozen=True)
class ModelHandle:
    """A remote or a scripted model

    Parameters
    ----------
    kind: ModelKind
        ``'remote'`` or ``'scripted'``
    name: str
        The model name that is sent to the server
    endpoint: str
        The base URL of the server (remote models only)
    script: ScriptedBehavior
        The behaviour (scripted models only)
    default_temperature: float
        The temperature used when the caller does not choose one
    min_temperature: float
        The lower bound of the decoding temperature, e.g. 1.0 for models with
        extended thinking
    context_budget: int
        The maximum number of prompt characters. None means unlimited
    api_key_env: str
        The environment variable with the bearer token. Defaults to the
        ``gateway.api_key_env`` rc parameter
    timeout: float
        Request timeout in seconds. Defaults to ``gateway.timeout``"""

    kind: ModelKind
    name: str
    endpoint: Optional[str] = None
    script: Optional[ScriptedBehavior] = None
    default_temperature: float = 0.0
    min_temperature: float = 0.0
    context_budget: Optional[int] = None
    api_key_env: Optional[str] = None
    timeout: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kind is ModelKind.remote:
            if not self.endpoint or self.script is not None:
                raise ValidationError(
                    "Remote model %s needs an endpoint and no script"
                    % self.name
                )
        elif self.script is None or self.endpoint is not None:
            raise ValidationError(
                "Scripted model %s needs a script and no endpoint" % self.name
            )

    @classmethod
    def scripted(cls, name="scripted", **kwargs):
        """Shortcut to create a scripted model

        ``**kwargs`` are passed to :class:`ScriptedBehavior`, except for the
        keys of the handle itself"""
        own = {
            key: kwargs.pop(key)
            for key in (
                "default_temperature",
                "min_temperature",
                "context_budget",
            )
            if key in kwargs
        }
        return cls(
            ModelKind.scripted, name, script=ScriptedBehavior(**kwargs), **own
        )

    def to_dict(self):
        d = {
            "name": self.name,
            "kind": self.kind.value,
            "default_temperature": self.default_temperature,
            "min_temperature": self.min_temperature,
            "context_budget": self.context_budget,
            "api_key_env": self.api_key_env,
            "timeout": self.timeout,
        }
        if self.kind is ModelKind.remote:
            d["endpoint"] = self.endpoint
        else:
            d["script"] = self.script.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        """Create the handle from a (validated) model mapping"""
        try:
            d = validate_model_spec(d)
        except ValueError as e:
            raise ValidationError(str(e)) from e
        script = d.get("script")
        return cls(
            kind=d["kind"],
            name=d["name"],
            endpoint=d.get("endpoint"),
            script=None if script is None else ScriptedBehavior.from_dict(
                script
            ),
            default_temperature=d["default_temperature"],
            min_temperature=d["min_temperature"],
            context_budget=d["context_budget"],
            api_key_env=d["api_key_env"],
            timeout=d["timeout"],
        )


# -----------------------------------------------------------------------------
# connection pool
# -----------------------------------------------------------------------------


class ClientPool(object):
    """Thread-safe cache of :class:`httpx.Client` instances

    One client is kept per request timeout. All model handles share them, so
    the number of open connections is bounded by the number of concurrent
    calls of the engine."""

    def __init__(self, transport=None):
        self._clients = {}
        self._lock = threading.Lock()
        #: Optional :class:`httpx.BaseTransport` for all new clients, e.g. a
        #: :class:`httpx.MockTransport`
        self.transport = transport

    def get(self, timeout):
        with self._lock:
            client = self._clients.get(timeout)
            if client is None:
                client = self._clients[timeout] = httpx.Client(
                    timeout=timeout, transport=self.transport
                )
            return client

    def reset(self, transport=None):
        """Close all clients and use `transport` from now on"""
        self.close()
        self.transport = transport

    def close(self):
        with self._lock:
            for client in self._clients.values():
                client.close()
            self._clients.clear()


#: The :class:`ClientPool` used for all remote calls
clients = ClientPool()


def _headers(h):
    env = h.api_key_env or rcParams["gateway.api_key_env"]
    key = os.environ.get(env)
    headers = {"Content-Type": "application/json"}
    if key:
        headers["Authorization"] = "Bearer " + key
    return headers


def _post(h, path, body):
    timeout = h.timeout or rcParams["gateway.timeout"]
    url = h.endpoint + path
    logger.debug("POST %s (model %s, n=%s)", url, h.name, body.get("n"))
    try:
        resp = clients.get(timeout).post(url, json=body, headers=_headers(h))
    except httpx.TimeoutException as e:
        raise Timeout("%s did not answer within %s s" % (url, timeout)) from e
    except httpx.TransportError as e:
        raise ModelError("Request to %s failed: %s" % (url, e)) from e
    if resp.status_code >= 400:
        raise HttpStatus(resp.status_code, resp.text[:200])
    try:
        return resp.json()
    except ValueError as e:
        raise MalformedResponse("Response of %s is no JSON" % url) from e


def request_body(h, req):
    """The JSON body of a chat-completions request"""
    return {
        "model": h.name,
        "messages": [
            {"role": role, "content": content}
            for role, content in req.messages
        ],
        "temperature": req.temperature,
        "n": req.n,
        "max_tokens": rcParams["gateway.max_tokens"],
        "logprobs": req.want_logprobs,
    }


def _missing_logprobs(h):
    warn_once(
        ("logprobs", h.name),
        "Model %s does not provide log-probabilities" % h.name,
        logger=logger,
    )


def _complete_remote(h, req):
    data = _post(h, "/chat/completions", request_body(h, req))
    try:
        choices = data["choices"]
        if len(choices) != req.n:
            raise MalformedResponse(
                "Expected %i choices, got %i" % (req.n, len(choices))
            )
        completions = []
        for choice in choices:
            text = choice["message"]["content"] or ""
            if not isinstance(text, str):
                raise MalformedResponse("Message content is no string")
            lps = None
            missing = False
            if req.want_logprobs:
                content = (choice.get("logprobs") or {}).get("content")
                if content is None:
                    missing = True
                    _missing_logprobs(h)
                else:
                    lps = tuple(
                        (str(t["token"]), float(t["logprob"])) for t in content
                    )
            completions.append(Completion(text, lps, missing))
    except (KeyError, TypeError, IndexError, AttributeError) as e:
        raise MalformedResponse(
            "Unexpected response of %s: %s" % (h.endpoint, e)
        ) from e
    return req.with_completions(completions)


# -----------------------------------------------------------------------------
# scripted models
# -----------------------------------------------------------------------------


def count_feedback(prompt):
    """The number of feedback blocks in a prompt, i.e. the iteration"""
    return sum(
        1 for line in prompt.splitlines() if line.startswith("Feedback:")
    )


def _feedback_lines(prompt):
    return [
        line for line in prompt.splitlines() if line.startswith("Feedback:")
    ]


def _wrong_answer(problem, rng):
    from frictionloop.tasks import answer_base, to_number

    labels = problem.choice_labels
    if labels:
        others = [label for label in labels if label != problem.answer]
        return others[int(rng.integers(len(others)))] if others else ""
    base = answer_base(problem)
    value = to_number(problem.answer, base)
    offset = int(rng.integers(1, 1000))
    if value is None:
        return "not %s (%i)" % (problem.answer, offset)
    if base == 16:
        return np.base_repr(value + offset, 16)
    return str(value + offset)


def _require_problem(h, problem):
    if problem is None:
        raise PreconditionError(
            "Scripted model %s (%s) needs the problem"
            % (h.name, h.script.mode.value)
        )


def _scripted_text(h, prompt, rng, problem):
    script = h.script
    mode = script.mode
    k = count_feedback(prompt)
    if mode is ScriptMode.fixed_script:
        answers = script.answers_by_iteration
        return answers[min(k, len(answers) - 1)]
    if mode is ScriptMode.keyed_replies:
        for key, reply in script.replies.items():
            if key in prompt:
                return reply
        return script.default_reply
    _require_problem(h, problem)
    if mode is ScriptMode.echo_feedback_trigger:
        feedback = _feedback_lines(prompt)
        if any(script.trigger_token in line for line in feedback):
            return problem.answer
        if script.answers_by_iteration:
            return script.answers_by_iteration[0]
        return _wrong_answer(problem, derive_rng(0, "echo:" + problem.id))
    p_correct = script.initial_accuracy if k == 0 else script.obey_probability
    if rng.random() < p_correct:
        return problem.answer
    return _wrong_answer(problem, rng)


def _scripted_logprobs(h, text):
    probs = h.script.token_probabilities
    return tuple(
        (ch, math.log(probs[i % len(probs)])) for i, ch in enumerate(text)
    )


def _complete_scripted(h, req, rng, problem):
    prompt = req.last_user_message
    if rng is None:
        rng = derive_rng(0, stable_hash(prompt))
    completions = []
    for i in range(req.n):
        text = _scripted_text(h, prompt, rng, problem)
        lps = None
        missing = False
        if req.want_logprobs:
            if h.script.token_probabilities:
                lps = _scripted_logprobs(h, text)
            else:
                missing = True
                _missing_logprobs(h)
        completions.append(Completion(text, lps, missing))
    return req.with_completions(completions)


# -----------------------------------------------------------------------------
# public api
# -----------------------------------------------------------------------------


docstrings.get_sections(
    docstrings.dedent(
        """
    Parameters
    ----------
    h: ModelHandle
        The model
    rng: numpy.random.Generator
        The random stream of the problem. Only scripted models use it
    problem: frictionloop.model.Problem
        The problem that is solved. Scripted models use its answer as the
        ground truth
    """
    ),
    "model_call",
)
docstrings.keep_params("model_call.parameters", "h")
docstrings.keep_params("model_call.parameters", "rng", "problem")


@docstrings.dedent
def complete(h, req, rng=None, problem=None):
    """
    Run a chat request

    Parameters
    ----------
    %(model_call.parameters.h)s
    req: frictionloop.model.ChatExchange
        The request without completions
    %(model_call.parameters.rng|problem)s

    Returns
    -------
    frictionloop.model.ChatExchange
        `req` with ``req.n`` completions. Its temperature is raised to the
        ``min_temperature`` of `h`

    Raises
    ------
    frictionloop.errors.ModelError
        On timeouts, HTTP errors and malformed responses"""
    temperature = default_temperature(h, req.temperature)
    if temperature != req.temperature:
        req = dataclasses.replace(req, temperature=temperature)
    if h.kind is ModelKind.scripted:
        return _complete_scripted(h, req, rng, problem)
    return _complete_remote(h, req)


@docstrings.dedent
def probe_logprobs(h, prompt, answer):
    """
    Get the log-probabilities of the tokens of `answer` after `prompt`

    Remote models are probed through the ``/completions`` endpoint with
    ``echo=true`` and ``max_tokens=0``, so no token is generated and the
    end-of-sequence token is not part of the result.

    Parameters
    ----------
    %(model_call.parameters.h)s
    prompt: str
        The text before the answer
    answer: str
        The answer

    Returns
    -------
    list of (str, float)
        The tokens of `answer` and their natural log-probabilities

    Raises
    ------
    frictionloop.errors.Unsupported
        If the backend does not provide log-probabilities"""
    if not answer:
        return []
    if h.kind is ModelKind.scripted:
        if not h.script.token_probabilities:
            raise Unsupported("logprobs")
        return list(_scripted_logprobs(h, answer))
    body = {
        "model": h.name,
        "prompt": prompt + answer,
        "max_tokens": 0,
        "echo": True,
        "logprobs": 0,
        "temperature": default_temperature(h, 0.0),
    }
    try:
        data = _post(h, "/completions", body)
    except HttpStatus as e:
        if e.code in (400, 404, 422):
            raise Unsupported("logprobs", str(e)) from e
        raise
    try:
        lps = data["choices"][0].get("logprobs")
        if not lps or lps.get("token_logprobs") is None:
            raise Unsupported("logprobs")
        return [
            (str(tok), float(lp))
            for tok, lp, offset in zip(
                lps["tokens"], lps["token_logprobs"], lps["text_offset"]
            )
            if offset >= len(prompt) and lp is not None
        ]
    except (KeyError, TypeError, IndexError, AttributeError) as e:
        raise MalformedResponse(
            "Unexpected response of %s: %s" % (h.endpoint, e)
        ) from e


def _log_backoff(details):
    logger.warning(
        "Model call %s failed (attempt %i): %s. Retrying in %.1f s",
        getattr(details["target"], "__name__", details["target"]),
        details["tries"],
        details.get("exception"),
        details["wait"],
    )


def with_retry(func):
    """Decorate a model call with retries

    The call is repeated with exponential backoff on every
    :class:`~frictionloop.errors.ModelError`, at most ``gateway.max_attempts``
    times in total. Afterwards a :class:`~frictionloop.errors.ModelUnavailable`
    is raised from the last error.

    Examples
    --------
    .. code-block:: python

        response = with_retry(complete)(handle, request)"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        max_tries = rcParams["gateway.max_attempts"]
        call = backoff.on_exception(
            backoff.expo,
            ModelError,
            max_tries=max_tries,
            on_backoff=_log_backoff,
            logger=None,
            factor=rcParams["gateway.backoff_factor"],
            max_value=rcParams["gateway.backoff_max"],
        )(func)
        try:
            return call(*args, **kwargs)
        except ModelError as e:
            raise ModelUnavailable(
                "Model call failed after %i attempts: %s" % (max_tries, e)
            ) from e

    return wrapper


def default_temperature(h, temperature=None):
    """Apply the temperature floor of the model"""
    if temperature is None:
        temperature = h.default_temperature
    return max(float(temperature), h.min_temperature)

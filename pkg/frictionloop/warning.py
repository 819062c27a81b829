# coding: utf-8
"""Warning module of the frictionloop package.

Non-fatal conditions of an experiment (a backend without log-probabilities,
a categorization run without unsolved problems, aborted problems at the end
of a run) are reported through the python builtin warnings module with the
classes

.. autosummary::

    FrictionRuntimeWarning
    FrictionWarning
    FrictionCritical

and end up in the ``frictionloop.warning`` logger (see
:mod:`frictionloop.config.logsetup`)."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import logging
import threading
import warnings

logger = logging.getLogger(__name__)


class FrictionRuntimeWarning(RuntimeWarning):
    """Runtime warning that is emitted only once per key, see
    :func:`warn_once`"""

    pass


class FrictionWarning(UserWarning):
    """Normal UserWarning of the frictionloop package"""

    pass


class FrictionCritical(UserWarning):
    """Critical UserWarning, e.g. for runs that ended with aborted problems"""

    pass


warnings.simplefilter("always", FrictionWarning, append=True)
warnings.simplefilter("always", FrictionCritical, append=True)

_seen_keys = set()
_seen_lock = threading.Lock()


def disable_warnings(critical=False):
    """Silence the :class:`FrictionWarning` (and with `critical` the
    :class:`FrictionCritical`) warnings of the package"""
    categories = [FrictionWarning] + ([FrictionCritical] if critical else [])
    for category in categories:
        warnings.filterwarnings("ignore", r"\w", category, "frictionloop", 0)


def _prefixed(message, prefix, logger):
    if logger is None:
        return message
    return "[%s by %s]\n%s" % (prefix, logger.name, message)


def warn(message, category=FrictionWarning, logger=None):
    """Emit a non-critical warning

    `logger` is an optional :class:`logging.Logger` whose name is put in
    front of the message"""
    warnings.warn(_prefixed(message, "Warning", logger), category, 3)


def warn_once(key, message, logger=None):
    """Emit a :class:`FrictionRuntimeWarning` only for the first call with
    the given `key`

    Worker threads of a run call this concurrently, e.g. once per model that
    does not provide log-probabilities.

    Returns
    -------
    bool
        True if the warning has been emitted"""
    with _seen_lock:
        if key in _seen_keys:
            return False
        _seen_keys.add(key)
    warn(message, FrictionRuntimeWarning, logger)
    return True


def critical(message, category=FrictionCritical, logger=None):
    """Emit a critical warning, see :func:`warn`"""
    warnings.warn(_prefixed(message, "Critical warning", logger), category, 2)


#: logging levels of the warning classes of the package
_levels = {
    FrictionWarning: logging.WARNING,
    FrictionRuntimeWarning: logging.WARNING,
    FrictionCritical: logging.CRITICAL,
}

old_showwarning = warnings.showwarning


def customwarn(message, category, filename, lineno, *args, **kwargs):
    """Send the warnings of the package to the ``frictionloop.warning``
    logger and all others to the previous :func:`warnings.showwarning`"""
    level = _levels.get(category)
    if level is None:
        old_showwarning(message, category, filename, lineno, *args, **kwargs)
        return
    text = warnings.formatwarning("\n%s" % message, category, filename, lineno)
    logger.log(level, text)


warnings.showwarning = customwarn

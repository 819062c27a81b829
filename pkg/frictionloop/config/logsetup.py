"""Logging setup of the frictionloop package

The package wide configuration comes from a yaml file in the format of
:func:`logging.config.dictConfig`. While an experiment runs, its log messages
are additionally written to the ``run.log`` file of the run directory (see
:func:`run_logging`)."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import contextlib
import logging
import logging.config
import os
import os.path as osp

import yaml

from frictionloop.docstring import dedent

#: Format of the records in ``run.log``
RUN_LOG_FORMAT = (
    "%(asctime)s - [%(name)s] - %(threadName)s - %(levelname)s - %(message)s"
)


def _get_home():
    """The home directory of the user or None if it cannot be determined"""
    candidates = [osp.expanduser("~")] + [
        os.environ.get(var) for var in ("HOME", "USERPROFILE", "TMP")
    ]
    return next((d for d in candidates if d and osp.isdir(d)), None)


def _expand_filenames(config, home):
    for handler in config.get("handlers", {}).values():
        fname = handler.get("filename")
        if fname and fname.startswith("~"):
            handler["filename"] = home + fname[1:]
    return config


@dedent
def setup_logging(
    default_path=None, default_level=logging.INFO, env_key="LOG_FRICTION"
):
    """
    Configure the loggers of the package

    Parameters
    ----------
    default_path: str
        The yaml logging configuration. If None, the ``logging.yml`` file of
        this directory is used
    default_level: int
        The level for :func:`logging.basicConfig` if no configuration file
        exists
    env_key: str
        Environment variable that points to a configuration file to use
        instead of `default_path`

    Returns
    -------
    str or None
        The configuration file that has been used"""
    path = os.getenv(env_key) or default_path
    if not path:
        path = osp.join(osp.dirname(__file__), "logging.yml")
    if not osp.exists(path):
        logging.basicConfig(level=default_level)
        return None
    with open(path) as f:
        config = yaml.safe_load(f)
    logging.config.dictConfig(_expand_filenames(config, _get_home() or ""))
    return path


@contextlib.contextmanager
def run_logging(run_dir, level=logging.DEBUG, fname="run.log"):
    """Copy the log messages of the package into a run directory

    Parameters
    ----------
    run_dir: str
        The directory of the run
    level: int
        The minimal level of the messages in the file
    fname: str
        The name of the log file in `run_dir`. Messages are appended, so a
        resumed run continues the file

    Yields
    ------
    logging.FileHandler
        The handler that writes the file"""
    logger = logging.getLogger("frictionloop")
    # warnings do not propagate to the package logger
    loggers = [logger, logging.getLogger("frictionloop.warning")]
    handler = logging.FileHandler(
        osp.join(run_dir, fname), mode="a", encoding="utf-8"
    )
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(RUN_LOG_FORMAT))
    for lg in loggers:
        lg.addHandler(handler)
    # the file gets debug messages even if the console shows less
    old_level = logger.level
    if logger.getEffectiveLevel() > level:
        logger.setLevel(level)
    try:
        yield handler
    finally:
        for lg in loggers:
            lg.removeHandler(handler)
        logger.setLevel(old_level)
        handler.close()

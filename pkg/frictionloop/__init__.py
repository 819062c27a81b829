"""frictionloop: iterative solver-feedback-retry experiments with language
models."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import datetime as dt
import logging as _logging
import sys
from importlib.metadata import PackageNotFoundError, version

import frictionloop.config as config
from frictionloop.config.rcsetup import rcParams
from frictionloop.warning import critical, disable_warnings, warn  # noqa: F401

try:
    __version__ = version("frictionloop")
except PackageNotFoundError:  # not installed
    __version__ = "0+unknown"


__license__ = "LGPL-3.0-only"

__status__ = "Development"


logger = _logging.getLogger(__name__)
logger.debug(
    "%s: Initializing frictionloop, version %s",
    dt.datetime.now().isoformat(),
    __version__,
)
logger.debug("Logging configuration file: %s", config.logcfg_path)
logger.debug("Configuration file: %s", config.config_path)


rcParams.HEADER += "\n\nfrictionloop version: " + __version__
rcParams.load_from_file()


def get_versions(requirements=True):
    """
    Get the version information for frictionloop and its requirements

    Parameters
    ----------
    requirements: bool
        If True, the versions of the requirements are included

    Returns
    -------
    dict
        A mapping from ``'frictionloop'`` to a dictionary with the
        ``'version'`` key and, if `requirements` is True, the
        ``'requirements'`` key with the versions of the requirements"""
    ret = {"version": __version__}
    if requirements:
        import backoff
        import httpx
        import numpy as np
        import pandas as pd
        import xarray as xr
        import yaml

        ret["requirements"] = {
            "backoff": getattr(backoff, "__version__", ""),
            "httpx": httpx.__version__,
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "pyyaml": yaml.__version__,
            "xarray": xr.__version__,
            "python": " ".join(sys.version.splitlines()),
        }
    return {"frictionloop": ret}

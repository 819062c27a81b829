"""Configuration module of the frictionloop package

This module contains the module for managing rc parameters and the logging.
Default parameters are defined in the :data:`rcsetup.defaultParams`
dictionary, however you can set up your own configuration in a yaml file (see
:func:`frictionloop.config.rcsetup.friction_fname`). The parameters of a
single experiment are validated through :data:`rcsetup.runconfigParams`."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

from .logsetup import setup_logging
from .rcsetup import friction_fname

#: :class:`str`. Path to the yaml logging configuration file
logcfg_path = setup_logging()


#: class:`str` or ``None``. Path to the yaml configuration file (if found).
#: See :func:`~frictionloop.config.rcsetup.friction_fname` for further
#: information
config_path = friction_fname()

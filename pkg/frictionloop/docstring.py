"""Docstring module of the frictionloop package

We use the docrep_ package for managing our docstrings. Operations that share
parameters (the model handle, the run configuration, the problem) document
them once and reuse the section through :data:`docstrings`.

.. _docrep: http://docrep.readthedocs.io/en/latest/
"""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import inspect

from docrep import DocstringProcessor


def dedent(func):
    """
    Dedent the docstring of a function

    Parameters
    ----------
    func: function
        function with the documentation to dedent"""
    func.__doc__ = func.__doc__ and inspect.cleandoc(func.__doc__)
    return func


def indent(text, num=4):
    """Indent the given string"""
    str_indent = " " * num
    return str_indent + ("\n" + str_indent).join(text.splitlines())


#: :class:`docrep.DocstringProcessor` instance that simplifies the reuse
#: of docstrings from between different python objects.
docstrings = DocstringProcessor()

"""Miscellaneous utility functions for the frictionloop package."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import hashlib
import json
import re
from difflib import get_close_matches

import numpy as np

from frictionloop.docstring import dedent


def isstring(s):
    return isinstance(s, str)


def unique_everseen(iterable, key=None):
    """Yield the elements of `iterable` that have not been seen before

    Elements are compared by ``key(element)`` if `key` is given"""
    seen = set()
    for element in iterable:
        k = element if key is None else key(element)
        if k not in seen:
            seen.add(k)
            yield element


def is_remote_url(path):
    """Test whether `path` is an http(s) URL"""
    return isstring(path) and bool(re.search(r"^https?\://", path))


@dedent
def check_key(key, possible_keys, name="key", msg="", exc=KeyError):
    """
    Make sure that `key` is one of `possible_keys`

    Parameters
    ----------
    key: str
        Key to check
    possible_keys: list of str
        The valid keys
    name: str
        What the key is called in the error message
    msg: str
        Hint for the error message if no similar key exists. Defaults to the
        list of `possible_keys`
    exc: type
        The exception class to raise

    Returns
    -------
    str
        The `key` if it is valid

    Raises
    ------
    KeyError
        If the key is not valid (or `exc`)"""
    possible_keys = list(possible_keys)
    if key in possible_keys:
        return key
    similar = get_close_matches(str(key), [str(k) for k in possible_keys])
    if similar:
        hint = "Did you mean %s?" % " or ".join(similar)
    else:
        hint = msg or "Possible values are %s" % ", ".join(
            map(str, possible_keys)
        )
    raise exc("Unknown %s %s! %s" % (name, key, hint))


def canonical_json(obj):
    """Encode `obj` as compact JSON

    The encoding is deterministic for a given object: keys keep their
    insertion order, non-ASCII characters are written verbatim and floats use
    the shortest round-tripping representation."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def stable_hash(*parts, length=16):
    """Hex digest of the sha256 hash over the given byte or str parts"""
    h = hashlib.sha256()
    for part in parts:
        if isstring(part):
            part = part.encode("utf-8")
        h.update(len(part).to_bytes(8, "big"))
        h.update(part)
    return h.hexdigest()[:length]


def derive_rng(seed, key):
    """Create an independent random generator for `key`

    The stream depends only on the run `seed` and the string `key` (usually a
    problem id), so results do not depend on the order in which problems are
    processed.

    Parameters
    ----------
    seed: int
        The 64-bit run seed
    key: str
        The key of the stream

    Returns
    -------
    numpy.random.Generator"""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & (2**64 - 1)] + words)
    )

"""Persistence of runs

A run directory contains

``config.yml``
    A copy of the run configuration
``problems.jsonl``
    The (subsampled) problems of the run
``trajectories.jsonl``
    The append-only trajectory log with one line per model attempt
``run.lock``
    The lock file of the process that writes to the directory
``run.log``
    The log messages of all sessions of the run

and the reports that are created by the command line interface. The file
schemas are documented in the run-book of the documentation.
"""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import dataclasses
import datetime as dt
import json
import logging
import os
import os.path as osp
import threading
from typing import Optional

from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import StoreError, ValidationError
from frictionloop.model import IterationRecord, Status, Trajectory
from frictionloop.utils import canonical_json
from frictionloop.warning import warn

logger = logging.getLogger(__name__)

TRAJECTORIES = "trajectories.jsonl"
PROBLEMS = "problems.jsonl"
CONFIG = "config.yml"
SUMMARY = "summary.json"
CATEGORIES = "categories.jsonl"
FAMILIARITY = "familiarity.jsonl"
LOCK = "run.lock"


@dataclasses.dataclass(frozen=True)
class TrajectoryLogLine:
    """One line of the trajectory log

    Parameters
    ----------
    run_id: str
        The id of the run
    seq: int
        The sequence number, starting at 0 and dense within a run
    problem_id: str
        The problem
    record: IterationRecord
        The attempt
    timestamp: str or None
        ISO 8601 wall-clock time (None if ``store.timestamps`` is disabled)
    status: str or None
        The status of the trajectory. Only set on its last line
    abort_reason: str or None
        The abort reason of an aborted trajectory (last line only)"""

    run_id: str
    seq: int
    problem_id: str
    record: IterationRecord
    timestamp: Optional[str] = None
    status: Optional[str] = None
    abort_reason: Optional[str] = None

    @property
    def final(self):
        return self.status is not None

    def to_dict(self):
        return {
            "run_id": self.run_id,
            "seq": self.seq,
            "problem_id": self.problem_id,
            "record": self.record.to_dict(),
            "timestamp": self.timestamp,
            "status": self.status,
            "abort_reason": self.abort_reason,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            run_id=d["run_id"],
            seq=int(d["seq"]),
            problem_id=d["problem_id"],
            record=IterationRecord.from_dict(d["record"]),
            timestamp=d.get("timestamp"),
            status=d.get("status"),
            abort_reason=d.get("abort_reason"),
        )


def trajectory_lines(run_id, trajectory, start_seq, timestamp=None):
    """Encode a trajectory into log lines"""
    n = len(trajectory.records)
    return [
        TrajectoryLogLine(
            run_id,
            start_seq + i,
            trajectory.problem_id,
            record,
            timestamp,
            trajectory.status.value if i == n - 1 else None,
            trajectory.abort_reason if i == n - 1 else None,
        )
        for i, record in enumerate(trajectory.records)
    ]


class TrajectoryStore(object):
    """The trajectory log of a run directory

    :meth:`load` reads the complete trajectories of the log and cuts off an
    incomplete tail (left behind by a killed process).
    :meth:`append` writes one trajectory at a time and is safe to call from
    multiple threads.

    Parameters
    ----------
    run_dir: str
        The run directory
    run_id: str
        The id of the run

    Examples
    --------
    .. code-block:: python

        with TrajectoryStore("runs/0123abcd", "0123abcd") as store:
            done = store.load()
            store.append(trajectory)"""

    def __init__(self, run_dir, run_id):
        self.run_dir = run_dir
        self.run_id = run_id
        self.path = osp.join(run_dir, TRAJECTORIES)
        self.lock_path = osp.join(run_dir, LOCK)
        self._lock = threading.Lock()
        self._seq = 0
        self._locked = False
        self._trajectories = None

    # -------------------------------------------------------------------------
    # locking

    def acquire(self):
        """Create the lock file of the run directory

        Raises
        ------
        StoreError
            If another living process holds the lock"""
        os.makedirs(self.run_dir, exist_ok=True)
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid = _read_pid(self.lock_path)
            if pid is not None and pid != os.getpid() and _pid_alive(pid):
                raise StoreError(
                    "%s is locked by process %i" % (self.run_dir, pid)
                )
            warn(
                "Removing stale lock file %s" % self.lock_path, logger=logger
            )
            os.remove(self.lock_path)
            return self.acquire()
        except OSError as e:
            raise StoreError("Cannot lock %s: %s" % (self.run_dir, e)) from e
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._locked = True

    def release(self):
        if self._locked:
            try:
                os.remove(self.lock_path)
            except FileNotFoundError:
                pass
            self._locked = False

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *args):
        self.release()

    # -------------------------------------------------------------------------
    # reading and writing

    def load(self, truncate=True):
        """Read all complete trajectories of the log

        Parameters
        ----------
        truncate: bool
            If True, lines after the last complete trajectory are removed
            from the file

        Returns
        -------
        dict
            Mapping from problem id to :class:`~frictionloop.model.Trajectory`
            in the order of the log

        Raises
        ------
        StoreError
            If a complete line cannot be decoded or a trajectory violates its
            invariants"""
        trajectories = {}
        pending = []
        valid_end = 0
        seq = 0
        if osp.exists(self.path):
            with open(self.path, "rb") as f:
                content = f.read()
            pos = 0
            while pos < len(content):
                end = content.find(b"\n", pos)
                if end < 0:
                    logger.warning(
                        "Ignoring incomplete last line of %s", self.path
                    )
                    break
                raw = content[pos:end]
                pos = end + 1
                try:
                    line = TrajectoryLogLine.from_dict(json.loads(raw))
                except (ValueError, KeyError, TypeError) as e:
                    raise StoreError(
                        "Corrupt line %i in %s: %s" % (seq + 1, self.path, e)
                    ) from e
                if line.seq != seq or line.run_id != self.run_id:
                    raise StoreError(
                        "Unexpected line %i in %s (seq %i, run %s)"
                        % (seq + 1, self.path, line.seq, line.run_id)
                    )
                if pending and pending[0].problem_id != line.problem_id:
                    raise StoreError(
                        "Interleaved trajectories in %s at line %i"
                        % (self.path, seq + 1)
                    )
                seq += 1
                pending.append(line)
                if line.final:
                    trajectories[line.problem_id] = _build(pending)
                    pending = []
                    valid_end = pos
            if pending:
                logger.warning(
                    "Dropping incomplete trajectory of %s in %s",
                    pending[0].problem_id,
                    self.path,
                )
            if truncate and valid_end < len(content):
                with open(self.path, "r+b") as f:
                    f.truncate(valid_end)
        self._seq = sum(len(t.records) for t in trajectories.values())
        self._trajectories = trajectories
        return dict(trajectories)

    def append(self, trajectory):
        """Append a trajectory to the log

        Raises
        ------
        StoreError
            If the trajectory is already stored or cannot be written"""
        if self._trajectories is None:
            self.load()
        timestamp = None
        if rcParams["store.timestamps"]:
            timestamp = dt.datetime.now(dt.timezone.utc).isoformat()
        with self._lock:
            if trajectory.problem_id in self._trajectories:
                raise StoreError(
                    "Trajectory of %s is already stored"
                    % trajectory.problem_id
                )
            lines = trajectory_lines(
                self.run_id, trajectory, self._seq, timestamp
            )
            data = "".join(
                canonical_json(line.to_dict()) + "\n" for line in lines
            )
            try:
                os.makedirs(self.run_dir, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(data)
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as e:
                raise StoreError(
                    "Cannot write to %s: %s" % (self.path, e)
                ) from e
            self._seq += len(lines)
            self._trajectories[trajectory.problem_id] = trajectory
        logger.debug(
            "Stored trajectory of %s (%s)",
            trajectory.problem_id,
            trajectory.status.value,
        )

    def __contains__(self, problem_id):
        if self._trajectories is None:
            self.load()
        return problem_id in self._trajectories


def _build(lines):
    last = lines[-1]
    records = tuple(line.record for line in lines)
    status = Status(last.status)
    try:
        return Trajectory(
            problem_id=last.problem_id,
            records=records,
            solved_at=(
                records[-1].iteration if status is Status.solved else None
            ),
            status=status,
            abort_reason=last.abort_reason,
        )
    except ValidationError as e:
        raise StoreError("Invalid trajectory in the log: %s" % e) from e


def _read_pid(path):
    try:
        with open(path) as f:
            return int(f.read().strip())
    except (OSError, ValueError):
        return None


def _pid_alive(pid):
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


# -----------------------------------------------------------------------------
# other files of a run directory


def write_jsonl(path, objects):
    """Write dictionaries or objects with a ``to_dict`` method to a JSONL
    file"""
    with open(path, "w", encoding="utf-8") as f:
        for obj in objects:
            if hasattr(obj, "to_dict"):
                obj = obj.to_dict()
            f.write(canonical_json(obj) + "\n")


def read_jsonl(path, cls):
    """Read a JSONL file with objects of `cls`"""
    ret = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            if line.strip():
                try:
                    ret.append(cls.from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as e:
                    raise StoreError(
                        "Corrupt line %i in %s: %s" % (i, path, e)
                    ) from e
    return ret


def write_json(path, d):
    """Write a JSON document with sorted keys"""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(d, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)

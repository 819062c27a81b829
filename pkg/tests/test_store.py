"""Test module for the :mod:`frictionloop.store` module."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import json
import os
import os.path as osp
import shutil
import tempfile
import unittest
from unittest import mock

import frictionloop.store as store
from frictionloop.config.rcsetup import rcParams
from frictionloop.errors import StoreError
from frictionloop.model import IterationRecord, Status, Trajectory
from frictionloop.warning import FrictionWarning

remove_temp_files = True


def solved_trajectory(pid, k=1):
    records = [
        IterationRecord(i, "try %i" % i, str(i), False, "wrong")
        for i in range(k)
    ]
    records.append(IterationRecord(k, "it is 42", "42", True))
    return Trajectory(pid, records, k, Status.solved)


def exhausted_trajectory(pid, K=3):
    records = [
        IterationRecord(i, "try %i" % i, str(i), False, "wrong")
        for i in range(K - 1)
    ]
    records.append(IterationRecord(K - 1, "try", "0", False))
    return Trajectory(pid, records, None, Status.exhausted)


def aborted_trajectory(pid):
    return Trajectory(
        pid,
        [IterationRecord(0, "try", "0", False, "wrong")],
        None,
        Status.aborted,
        "leak_detected",
    )


class TrajectoryStoreTest(unittest.TestCase):
    """Test the trajectory log"""

    def setUp(self):
        self.run_dir = tempfile.mkdtemp(prefix="frictionloop_")
        self._rc = rcParams.catch()
        self._rc.__enter__()
        rcParams["store.timestamps"] = False

    def tearDown(self):
        self._rc.__exit__(None, None, None)
        if remove_temp_files:
            shutil.rmtree(self.run_dir, ignore_errors=True)

    def _lines(self):
        with open(osp.join(self.run_dir, store.TRAJECTORIES)) as f:
            return f.read().splitlines()

    def test_roundtrip(self):
        """Test appending and loading trajectories"""
        trajectories = [
            solved_trajectory("p1", 2),
            exhausted_trajectory("p2"),
            aborted_trajectory("p3"),
        ]
        with store.TrajectoryStore(self.run_dir, "run1") as s:
            self.assertEqual(s.load(), {})
            for t in trajectories:
                s.append(t)
            self.assertIn("p2", s)
        lines = [json.loads(line) for line in self._lines()]
        self.assertEqual([d["seq"] for d in lines], list(range(7)))
        self.assertEqual(
            [d["status"] for d in lines],
            [None, None, "solved", None, None, "exhausted", "aborted"],
        )
        self.assertEqual(lines[-1]["abort_reason"], "leak_detected")
        self.assertTrue(all(d["timestamp"] is None for d in lines))
        loaded = store.TrajectoryStore(self.run_dir, "run1").load()
        self.assertEqual(list(loaded), ["p1", "p2", "p3"])
        self.assertEqual(list(loaded.values()), trajectories)
        self.assertEqual(loaded["p1"].solved_at, 2)

    def test_continue_sequence(self):
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1"))
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.load()
        s.append(solved_trajectory("p2", 0))
        seqs = [json.loads(line)["seq"] for line in self._lines()]
        self.assertEqual(seqs, [0, 1, 2])

    def test_timestamps(self):
        rcParams["store.timestamps"] = True
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1", 0))
        (line,) = self._lines()
        self.assertIsNotNone(json.loads(line)["timestamp"])

    def test_deterministic_bytes(self):
        """Test that two logs without timestamps are byte-identical"""
        contents = []
        for name in ["a", "b"]:
            run_dir = osp.join(self.run_dir, name)
            s = store.TrajectoryStore(run_dir, "run1")
            s.append(solved_trajectory("p1"))
            s.append(exhausted_trajectory("p2"))
            with open(osp.join(run_dir, store.TRAJECTORIES), "rb") as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_duplicate(self):
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1"))
        with self.assertRaises(StoreError):
            s.append(exhausted_trajectory("p1"))
        self.assertEqual(len(self._lines()), 2)

    def test_truncate_incomplete_tail(self):
        """Test the recovery after a killed process"""
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1"))
        s.append(exhausted_trajectory("p2"))
        lines = self._lines()
        # keep the first two lines of p2 and half of the third one
        with open(osp.join(self.run_dir, store.TRAJECTORIES), "w") as f:
            f.write("\n".join(lines[:4]) + "\n" + lines[4][:10])
        s = store.TrajectoryStore(self.run_dir, "run1")
        self.assertEqual(list(s.load()), ["p1"])
        self.assertEqual(self._lines(), lines[:2])
        s.append(exhausted_trajectory("p2"))
        self.assertEqual(self._lines(), lines)

    def test_no_truncate(self):
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1"))
        with open(osp.join(self.run_dir, store.TRAJECTORIES), "a") as f:
            f.write('{"run_id": "run1"')
        s = store.TrajectoryStore(self.run_dir, "run1")
        self.assertEqual(list(s.load(truncate=False)), ["p1"])
        self.assertEqual(len(self._lines()), 3)

    def test_corrupt_line(self):
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1"))
        lines = self._lines()
        lines[0] = "not json"
        with open(osp.join(self.run_dir, store.TRAJECTORIES), "w") as f:
            f.write("\n".join(lines) + "\n")
        with self.assertRaisesRegex(StoreError, "Corrupt line 1"):
            store.TrajectoryStore(self.run_dir, "run1").load()

    def test_wrong_run(self):
        store.TrajectoryStore(self.run_dir, "run1").append(
            solved_trajectory("p1")
        )
        with self.assertRaises(StoreError):
            store.TrajectoryStore(self.run_dir, "run2").load()

    def test_invalid_trajectory(self):
        s = store.TrajectoryStore(self.run_dir, "run1")
        s.append(solved_trajectory("p1"))
        lines = [json.loads(line) for line in self._lines()]
        lines[0]["record"]["feedback"] = None
        with open(osp.join(self.run_dir, store.TRAJECTORIES), "w") as f:
            f.write("".join(json.dumps(d) + "\n" for d in lines))
        with self.assertRaisesRegex(StoreError, "Invalid trajectory"):
            store.TrajectoryStore(self.run_dir, "run1").load()


class LockTest(unittest.TestCase):
    """Test the lock file of a run directory"""

    def setUp(self):
        self.run_dir = tempfile.mkdtemp(prefix="frictionloop_")
        self.lock_path = osp.join(self.run_dir, store.LOCK)

    def tearDown(self):
        if remove_temp_files:
            shutil.rmtree(self.run_dir, ignore_errors=True)

    def test_lock(self):
        s = store.TrajectoryStore(self.run_dir, "run1")
        with s:
            with open(self.lock_path) as f:
                self.assertEqual(f.read(), str(os.getpid()))
        self.assertFalse(osp.exists(self.lock_path))

    def test_locked_by_other(self):
        with open(self.lock_path, "w") as f:
            f.write(str(os.getppid()))
        with self.assertRaisesRegex(StoreError, "locked by process"):
            store.TrajectoryStore(self.run_dir, "run1").acquire()
        self.assertTrue(osp.exists(self.lock_path))

    def test_stale_lock(self):
        with open(self.lock_path, "w") as f:
            f.write("12345")
        s = store.TrajectoryStore(self.run_dir, "run1")
        with mock.patch.object(store, "_pid_alive", return_value=False):
            with self.assertWarnsRegex(FrictionWarning, "stale lock"):
                s.acquire()
        with open(self.lock_path) as f:
            self.assertEqual(f.read(), str(os.getpid()))
        s.release()


class JSONFilesTest(unittest.TestCase):
    """Test the reading and writing of the other files of a run"""

    def setUp(self):
        self.run_dir = tempfile.mkdtemp(prefix="frictionloop_")

    def tearDown(self):
        if remove_temp_files:
            shutil.rmtree(self.run_dir, ignore_errors=True)

    def test_jsonl(self):
        fname = osp.join(self.run_dir, "trajectories.jsonl")
        trajectories = [solved_trajectory("p1"), aborted_trajectory("p2")]
        store.write_jsonl(fname, trajectories)
        self.assertEqual(store.read_jsonl(fname, Trajectory), trajectories)
        with open(fname, "a") as f:
            f.write("{}\n")
        with self.assertRaisesRegex(StoreError, "Corrupt line 3"):
            store.read_jsonl(fname, Trajectory)

    def test_json(self):
        fname = osp.join(self.run_dir, "summary.json")
        store.write_json(fname, {"b": 1, "a": [0.5]})
        with open(fname) as f:
            self.assertTrue(f.read().startswith('{\n  "a"'))
        self.assertEqual(store.read_json(fname), {"a": [0.5], "b": 1})


if __name__ == "__main__":
    unittest.main()

"""Test the :mod:`frictionloop.__main__` module."""

# SPDX-FileCopyrightText: 2024-2026 frictionloop developers
#
# SPDX-License-Identifier: LGPL-3.0-only

import json
import os
import os.path as osp
import shutil
import tempfile
import unittest
import warnings

import pandas as pd
import yaml

import frictionloop
import frictionloop.__main__ as main
from frictionloop.model import ErrorCategory, Problem
from frictionloop.store import read_json, read_jsonl
from frictionloop.warning import FrictionCritical

remove_temp_files = True


def _solver(**kwargs):
    script = {
        "mode": "obey_with_probability",
        "initial_accuracy": 0.2,
        "obey_probability": 0.2,
    }
    return dict(name="solver", kind="scripted", script=script, **kwargs)


class TestCommandLine(unittest.TestCase):
    """Test the command line utility of frictionloop"""

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp(prefix="frictionloop_")
        self.dataset = osp.join(self.tmpdir, "mult2.jsonl")

    def tearDown(self):
        if remove_temp_files:
            shutil.rmtree(self.tmpdir, ignore_errors=True)

    def _write_config(self, fname="experiment.yml", **kwargs):
        d = {
            "solver_model": _solver(),
            "task": {
                "name": "mult2",
                "dataset": "mult2.jsonl",
                "format": "numeric_boxed",
                "fewshot_k": 2,
            },
            "max_iterations": 3,
            "seed": 1,
            "output_dir": "runs",
        }
        d.update(kwargs)
        path = osp.join(self.tmpdir, fname)
        with open(path, "w") as f:
            yaml.dump(d, f)
        return path

    def _gen_dataset(self):
        ret = main.main(
            ["gen-arith", "--out", self.dataset, "-n", "20", "-d", "2"]
        )
        self.assertEqual(ret, 0)

    def _run(self, fname="experiment.yml", *args, **kwargs):
        config = self._write_config(fname, **kwargs)
        with warnings.catch_warnings(record=True) as self.warned:
            warnings.simplefilter("always")
            ret = main.main(["run", "--config", config] + list(args))
        self.assertEqual(ret, 0)
        runs = sorted(os.listdir(osp.join(self.tmpdir, "runs")))
        return [osp.join(self.tmpdir, "runs", r) for r in runs]

    def test_get_parser(self):
        parser = main.get_parser()
        ns = parser.parse_args(
            ["gen-arith", "--out", "out.jsonl", "-n", "5", "--base", "16"]
        )
        self.assertIs(ns.command_func, main.gen_arith)
        self.assertEqual(ns.out, "out.jsonl")
        self.assertEqual(ns.n, 5)
        self.assertEqual(ns.base, 16)
        self.assertEqual(ns.digits, 5)
        self.assertFalse(ns.decimal_operands)
        with self.assertRaises(SystemExit):
            parser.parse_args(["gen-arith", "-n", "5"])
        ns = parser.parse_args(
            [
                "report",
                "runs/abc",
                "--bin-by",
                "confidence",
                "--bins",
                "3",
                "--binning",
                "quantile",
                "--compare",
                "runs/def",
                "runs/ghi",
                "--overlap",
                "runs/def",
            ]
        )
        self.assertIs(ns.command_func, main.report)
        self.assertEqual(ns.run_dir, "runs/abc")
        self.assertEqual(ns.bin_by, "confidence")
        self.assertEqual(ns.bins, 3)
        self.assertEqual(ns.binning, "quantile")
        self.assertEqual(ns.compare, ["runs/def", "runs/ghi"])
        self.assertEqual(ns.overlap, ["runs/def"])
        ns = parser.parse_args(["run", "--config", "cfg.yml", "--resume"])
        self.assertIs(ns.command_func, main.run)
        self.assertEqual(ns.config, "cfg.yml")
        self.assertTrue(ns.resume)
        ns = parser.parse_args(["run", "-c", "x.yml"])
        self.assertEqual(ns.config, "x.yml")
        self.assertFalse(ns.resume)
        ns = parser.parse_args(
            ["categorize", "runs/abc", "--annotator", "annotator.yml"]
        )
        self.assertEqual(ns.annotator, "annotator.yml")
        self.assertEqual(ns.workers, 1)
        ns = parser.parse_args(["probe", "runs/abc", "--samples", "4"])
        self.assertEqual(ns.samples, 4)

    def test_subcommand_help(self):
        """Test that the shared parameter docs end up in the help"""
        self.assertIn("The directory of the run", main.report.__doc__)
        self.assertIn("rcParams", main.probe.__doc__)
        self.assertNotIn("%(", main.categorize.__doc__)

    def test_all_versions(self):
        with self.assertRaises(SystemExit):
            main.main(["-aV"])
        d = frictionloop.get_versions()
        self.assertIn("httpx", d["frictionloop"]["requirements"])
        d = frictionloop.get_versions(False)
        self.assertNotIn("requirements", d["frictionloop"])

    def test_no_command(self):
        self.assertEqual(main.main([]), main.EXIT_ERROR)

    def test_gen_arith(self):
        self._gen_dataset()
        problems = read_jsonl(self.dataset, Problem)
        self.assertEqual(len(problems), 20)
        self.assertTrue(all(p.task == "mult2" for p in problems))
        out = osp.join(self.tmpdir, "sub", "hex.jsonl")
        args = ["gen-arith", "-o", out, "-n", "5", "-b", "16"]
        args.append("--decimal-operands")
        self.assertEqual(main.main(args), 0)
        problems = read_jsonl(out, Problem)
        self.assertEqual(len(problems), 5)
        for p in problems:
            self.assertEqual(p.metadata["base"], 16)
            self.assertRegex(format(p.metadata["a"], "X"), r"^[0-9]{5}$")

    def test_run(self):
        """Test running an experiment"""
        self._gen_dataset()
        (run_dir,) = self._run()
        for fname in [
            "config.yml",
            "problems.jsonl",
            "trajectories.jsonl",
            "accuracy_curve.csv",
            "summary.json",
            "run.log",
        ]:
            self.assertTrue(osp.exists(osp.join(run_dir, fname)), fname)
        self.assertFalse(osp.exists(osp.join(run_dir, "run.lock")))
        summary = read_json(osp.join(run_dir, "summary.json"))
        self.assertEqual(summary["m"], 20)
        self.assertEqual(summary["K"], 3)
        self.assertEqual(summary["run_id"], osp.basename(run_dir))
        self.assertEqual(summary["solved"] + summary["exhausted"], 20)
        self.assertEqual(summary["feedback_mechanism"], "F1")
        df = pd.read_csv(osp.join(run_dir, "accuracy_curve.csv"))
        self.assertEqual(list(df["iteration"]), [0, 1, 2])
        self.assertEqual(df["accuracy"].iloc[-1], summary["acc_final"])
        with open(osp.join(run_dir, "trajectories.jsonl")) as f:
            lines = [json.loads(line) for line in f]
        self.assertEqual([d["seq"] for d in lines], list(range(len(lines))))
        self.assertEqual(sum(d["status"] is not None for d in lines), 20)

    def test_resume(self):
        """Test that a second run does not add trajectories"""
        self._gen_dataset()
        (run_dir,) = self._run()
        fname = osp.join(run_dir, "trajectories.jsonl")
        with open(fname, "rb") as f:
            content = f.read()
        self.assertEqual(self._run("experiment.yml", "--resume"), [run_dir])
        with open(fname, "rb") as f:
            self.assertEqual(f.read(), content)
        # without --resume, the user is told that the run exists
        self._run()
        self.assertTrue(
            any("Resuming" in str(w.message) for w in self.warned)
        )
        with open(fname, "rb") as f:
            self.assertEqual(f.read(), content)

    def test_different_config(self):
        self._gen_dataset()
        self._run()
        run_dirs = self._run(seed=2)
        self.assertEqual(len(run_dirs), 2)

    def test_aborted(self):
        self._gen_dataset()
        config = self._write_config(solver_model=_solver(context_budget=10))
        with self.assertWarns(FrictionCritical):
            ret = main.main(["run", "-c", config])
        self.assertEqual(ret, main.EXIT_ABORTED)
        (run_id,) = os.listdir(osp.join(self.tmpdir, "runs"))
        run_dir = osp.join(self.tmpdir, "runs", run_id)
        summary = read_json(osp.join(run_dir, "summary.json"))
        self.assertEqual(summary["aborted"], 20)
        self.assertEqual(summary["missing"], 0)

    def test_missing_dataset(self):
        config = self._write_config()
        self.assertEqual(main.main(["run", "-c", config]), main.EXIT_ERROR)

    def test_invalid_config(self):
        self._gen_dataset()
        config = self._write_config(max_iterations=0)
        self.assertEqual(main.main(["run", "-c", config]), main.EXIT_ERROR)
        config = self._write_config(unknown_key=1)
        self.assertEqual(main.main(["run", "-c", config]), main.EXIT_ERROR)
        missing = osp.join(self.tmpdir, "missing.yml")
        self.assertEqual(main.main(["run", "-c", missing]), main.EXIT_ERROR)

    def test_report(self):
        """Test the optional reports"""
        self._gen_dataset()
        self._run()
        run_dir, other = self._run(seed=2)
        ret = main.main(
            [
                "report",
                run_dir,
                "--bin-by",
                "a",
                "--bins",
                "2",
                "--compare",
                other,
                "--overlap",
                other,
            ]
        )
        self.assertEqual(ret, 0)
        bins = pd.read_csv(osp.join(run_dir, "bins.csv"))
        self.assertEqual(bins["n"].sum(), 20)
        comparison = pd.read_csv(osp.join(run_dir, "comparison.csv"))
        self.assertEqual(len(comparison), 6)
        self.assertEqual(
            set(comparison["run"]),
            {osp.basename(run_dir), osp.basename(other)},
        )
        overlap = read_json(osp.join(run_dir, "overlap.json"))
        self.assertEqual(
            overlap["runs"], [osp.basename(run_dir), osp.basename(other)]
        )
        self.assertEqual(main.main(["report", self.tmpdir]), main.EXIT_ERROR)

    def test_report_confidence(self):
        """Test the binning by confidence of a run without logprobs"""
        self._gen_dataset()
        solver = _solver()
        solver["script"]["token_probabilities"] = [0.5]
        (run_dir,) = self._run(solver_model=solver)
        self.assertEqual(
            main.main(["report", run_dir, "--bin-by", "confidence"]), 0
        )
        bins = pd.read_csv(osp.join(run_dir, "bins.csv"))
        self.assertEqual(bins["n"].sum(), 20)
        self.assertAlmostEqual(bins["left"].min(), 0.5)
        self.assertAlmostEqual(bins["right"].max(), 0.5)

    def test_categorize(self):
        """Test the categorization and the target accuracy"""
        self._gen_dataset()
        (run_dir,) = self._run()
        annotator = osp.join(self.tmpdir, "annotator.yml")
        with open(annotator, "w") as f:
            yaml.dump(
                {
                    "name": "annotator",
                    "kind": "scripted",
                    "script": {
                        "mode": "fixed_script",
                        "answers_by_iteration": ["FR\nIgnores the feedback"],
                    },
                },
                f,
            )
        ret = main.main(["categorize", run_dir, "--annotator", annotator])
        self.assertEqual(ret, 0)
        summary = read_json(osp.join(run_dir, "summary.json"))
        categories = read_jsonl(
            osp.join(run_dir, "categories.jsonl"), ErrorCategory
        )
        self.assertEqual(len(categories), summary["exhausted"])
        self.assertTrue(all(c.label.value == "FR" for c in categories))
        self.assertNotIn("target_accuracy", summary)
        self.assertEqual(main.main(["report", run_dir]), 0)
        summary = read_json(osp.join(run_dir, "summary.json"))
        self.assertAlmostEqual(summary["target_accuracy"], 1.0)
        self.assertEqual(
            summary["categories"]["counts"]["FR"], summary["exhausted"]
        )

    def test_probe(self):
        self._gen_dataset()
        (run_dir,) = self._run()
        self.assertEqual(main.main(["probe", run_dir, "-n", "4"]), 0)
        with open(osp.join(run_dir, "familiarity.jsonl")) as f:
            rows = [json.loads(line) for line in f]
        self.assertEqual(len(rows), 20)
        for row in rows:
            self.assertEqual(row["samples"], 4)
            self.assertIn(row["familiarity"], [0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertEqual(
            main.main(["report", run_dir, "--bin-by", "familiarity"]), 0
        )
        self.assertTrue(osp.exists(osp.join(run_dir, "bins.csv")))


if __name__ == "__main__":
    unittest.main()

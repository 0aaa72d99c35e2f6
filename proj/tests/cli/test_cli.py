#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""End-to-end checks of the fpflow command-line tool.

Usage: test_cli.py <path to fpflow binary> <schemas dir>
"""
import csv
import json
import math
import os
import random
import shutil
import subprocess
import sys
import tempfile
import unittest

import jsonschema

FPFLOW = None
SCHEMAS = None


def run(*args, env=None, check=True):
    p = subprocess.run([FPFLOW, *map(str, args)], capture_output=True, text=True, env=env)
    if check and p.returncode != 0:
        raise AssertionError(f"fpflow {' '.join(map(str, args))} exited {p.returncode}:\n{p.stderr}")
    return p


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp(prefix="fpflow_cli_")
        run("synth", "--seed", 3, "--out", cls.path("data"), "-q")
        cls.manifest = cls.path("data", "dataset.json")

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    @classmethod
    def path(cls, *parts):
        return os.path.join(cls.tmp, *parts)

    def schema(self, name):
        with open(os.path.join(SCHEMAS, name)) as f:
            return json.load(f)

    def write_rows(self, name, rows, header):
        p = self.path(name)
        with open(p, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        return p

    # ---- synth -----------------------------------------------------------------

    def test_synth_writes_valid_manifest_and_run_record(self):
        with open(self.manifest) as f:
            m = json.load(f)
        jsonschema.validate(m, self.schema("dataset.schema.json"))
        self.assertEqual(m["n_samples"], 2900)
        for name in ("config.json", "inputs.json", "run.log", "dataset.csv"):
            self.assertTrue(os.path.exists(self.path("data", name)), name)

    def test_synth_same_seed_is_byte_identical(self):
        for fmt, ext in (("csv", "csv"), ("binary", "bin")):
            a = self.path(f"same_{fmt}_a")
            b = self.path(f"same_{fmt}_b")
            run("synth", "--seed", 7, "--format", fmt, "--out", a, "-q")
            run("synth", "--seed", 7, "--format", fmt, "--out", b, "-q")
            for name in (f"dataset.{ext}", "dataset.json"):
                with open(os.path.join(a, name), "rb") as fa, open(os.path.join(b, name), "rb") as fb:
                    self.assertEqual(fa.read(), fb.read(), name)

    def test_hardness_presets_span_difficulty(self):
        auc = {}
        for h in ("easy", "hard"):
            run("synth", "--hardness", h, "--seed", 1, "--out", self.path("h_" + h), "-q")
            run("eval", "--data", self.path("h_" + h, "dataset.json"), "--scorers", "gaussian",
                "--out", self.path("h_eval_" + h), "-q")
            auc[h] = float(read_csv(self.path("h_eval_" + h, "summary.csv"))[0]["auc_mean"])
        self.assertGreaterEqual(auc["easy"] - auc["hard"], 0.2, auc)

    def test_output_root_environment_variable(self):
        root = self.path("env_root")
        env = dict(os.environ, FPFLOW_OUTPUT_ROOT=root)
        run("synth", "--seed", 1, "-q", env=env)
        runs = os.listdir(root)
        self.assertEqual(len(runs), 1)
        self.assertTrue(runs[0].startswith("synth-"))

    # ---- train / score / inspect -------------------------------------------------

    def test_train_writes_loadable_model_and_full_trace(self):
        out = self.path("train_mle")
        run("train", "--data", self.manifest, "--variant", "mle", "--epochs", 4, "--out", out, "-q")
        self.assertEqual(len(read_csv(os.path.join(out, "trace.csv"))), 4)
        info = json.loads(run("inspect-model", os.path.join(out, "model.bin")).stdout)
        self.assertEqual(info["flow"]["dim"], 16)
        self.assertEqual(info["sidecar"]["training"]["variant"], "mle")
        with open(os.path.join(out, "inputs.json")) as f:
            inputs = json.load(f)
        self.assertIn("dataset", inputs)
        self.assertIn("dataset_payload", inputs)
        with open(os.path.join(out, "config.json")) as f:
            cfg = json.load(f)
        self.assertEqual(cfg["train"]["epochs"], 4)

    def test_flags_override_config_file(self):
        cfg = self.path("train_cfg.json")
        with open(cfg, "w") as f:
            json.dump({"variant": "frozen", "train": {"epochs": 3, "lr": 0.01}, "flow": {"layers": 2}}, f)
        out = self.path("train_cfg_run")
        run("train", "--data", self.manifest, "--config", cfg, "--epochs", 2, "--out", out, "-q")
        with open(os.path.join(out, "config.json")) as f:
            resolved = json.load(f)
        self.assertEqual(resolved["variant"], "frozen")
        self.assertEqual(resolved["train"]["epochs"], 2)
        self.assertEqual(resolved["train"]["lr"], 0.01)
        self.assertEqual(resolved["flow"]["layers"], 2)

    def test_backbone_hparams_preset(self):
        out = self.path("backbone")
        run("train", "--data", self.manifest, "--variant", "finetune", "--backbone-hparams", "--epochs", 1,
            "--hidden", 16, "--out", out, "-q")
        with open(os.path.join(out, "config.json")) as f:
            c = json.load(f)
        self.assertEqual(c["flow"]["layers"], 32)
        self.assertEqual(c["flow"]["hidden"], 16)
        self.assertEqual(c["train"]["lr"], 1e-5)
        self.assertEqual(c["train"]["weight_decay"], 0.1)
        self.assertEqual(c["train"]["batch_tp"], 32)
        self.assertEqual(c["train"]["epochs"], 1)

    def identity_model(self):
        out = self.path("identity")
        if not os.path.exists(os.path.join(out, "model.bin")):
            run("train", "--data", self.manifest, "--layers", 0, "--epochs", 1, "--out", out, "-q")
        return os.path.join(out, "model.bin")

    def test_identity_model_scores_are_gaussian_nll(self):
        out = self.path("score_identity")
        run("score", "--model", self.identity_model(), "--data", self.manifest, "--out", out, "-q")
        rows = {r["id"]: r for r in read_csv(os.path.join(out, "scores.csv"))}
        feats = {r["id"]: [float(r[f"f{j}"]) for j in range(16)] for r in read_csv(self.path("data", "dataset.csv"))}
        self.assertEqual(rows.keys(), feats.keys())
        for i, x in feats.items():
            nll = 8.0 * math.log(2.0 * math.pi) + 0.5 * sum(v * v for v in x)
            self.assertAlmostEqual(float(rows[i]["anomaly_score"]), nll, delta=1e-9 * max(1.0, nll))
            self.assertEqual(float(rows[i]["log_likelihood"]), -float(rows[i]["anomaly_score"]))

    def test_threshold_adds_reject_column(self):
        out = self.path("score_threshold")
        t = 30.0
        run("score", "--model", self.identity_model(), "--data", self.manifest, "--threshold", t, "--out", out, "-q")
        rows = read_csv(os.path.join(out, "scores.csv"))
        self.assertIn("decision", rows[0])
        for r in rows:
            self.assertEqual(r["decision"], "reject" if float(r["anomaly_score"]) > t else "accept")
        self.assertIn("accept", {r["decision"] for r in rows})
        self.assertIn("reject", {r["decision"] for r in rows})

    def test_scores_do_not_depend_on_row_order(self):
        model = self.path("train_perm")
        run("train", "--data", self.manifest, "--variant", "finetune", "--epochs", 2, "--out", model, "-q")
        with open(self.path("data", "dataset.csv")) as f:
            header, *lines = f.read().splitlines()
        random.Random(5).shuffle(lines)
        shuffled = self.path("shuffled.csv")
        with open(shuffled, "w") as f:
            f.write("\n".join([header, *lines]) + "\n")
        a, b = self.path("perm_a"), self.path("perm_b")
        run("score", "--model", os.path.join(model, "model.bin"), "--data", self.manifest, "--out", a, "-q")
        run("score", "--model", os.path.join(model, "model.bin"), "--data", shuffled, "--out", b, "-q")
        sa = {r["id"]: r["anomaly_score"] for r in read_csv(os.path.join(a, "scores.csv"))}
        sb = {r["id"]: r["anomaly_score"] for r in read_csv(os.path.join(b, "scores.csv"))}
        self.assertEqual(sa, sb)

    # ---- eval --------------------------------------------------------------------

    def test_eval_report_validates_and_rerun_is_identical(self):
        a, b = self.path("eval_a"), self.path("eval_b")
        run("eval", "--data", self.manifest, "--experiment", "data_efficiency", "--encoder", "linear",
            "--ratios", "0.05,1", "--epochs", 2, "--out", a, "-q")
        with open(os.path.join(a, "report.json")) as f:
            rep = json.load(f)
        jsonschema.validate(rep, self.schema("report.schema.json"))
        for r in rep["runs"]:
            self.assertTrue(os.path.exists(os.path.join(a, r["pr_curve_file"])))
        run("eval", "--config", os.path.join(a, "config.json"), "--jobs", 2, "--out", b, "-q")
        with open(os.path.join(a, "summary.csv"), "rb") as fa, open(os.path.join(b, "summary.csv"), "rb") as fb:
            self.assertEqual(fa.read(), fb.read())

    # ---- errors ------------------------------------------------------------------

    def tp_only_csv(self):
        rows = [r for r in read_csv(self.path("data", "dataset.csv")) if r["label"] == "TP"][:200]
        header = list(rows[0].keys())
        return self.write_rows("tp_only.csv", [[r[h] for h in header] for r in rows], header)

    def test_frozen_without_fps_is_a_config_error(self):
        p = run("train", "--data", self.tp_only_csv(), "--variant", "frozen", "--epochs", 1,
                "--out", self.path("no_fp"), "-q", check=False)
        self.assertEqual(p.returncode, 2, p.stderr)
        self.assertIn("requires FP samples", p.stderr)

    def test_exit_codes(self):
        p = run("train", "--data", self.path("missing.json"), "--out", self.path("e1"), "-q", check=False)
        self.assertEqual(p.returncode, 3, p.stderr)
        p = run("train", "--data", self.manifest, "--variant", "sideways", "--out", self.path("e2"), "-q", check=False)
        self.assertEqual(p.returncode, 2, p.stderr)
        p = run("eval", "--data", self.manifest, "--folds", 1, "--out", self.path("e3"), "-q", check=False)
        self.assertEqual(p.returncode, 2, p.stderr)
        p = run("train", "--no-such-flag", check=False)
        self.assertEqual(p.returncode, 2, p.stderr)

    def test_tampered_payload_is_a_data_error(self):
        d = self.path("tampered")
        run("synth", "--seed", 2, "--out", d, "-q")
        with open(os.path.join(d, "dataset.csv"), "a") as f:
            f.write("\n")
        p = run("train", "--data", os.path.join(d, "dataset.json"), "--epochs", 1, "--out", self.path("e4"), "-q",
                check=False)
        self.assertEqual(p.returncode, 3, p.stderr)
        self.assertIn("sha256", p.stderr)

    def test_dimension_mismatch_is_a_data_error(self):
        small = self.write_rows("small.csv", [[i, "TP", "", 0.1 * i, -0.2 * i] for i in range(10)],
                                ["id", "label", "fp_class", "f0", "f1"])
        p = run("score", "--model", self.identity_model(), "--data", small, "--out", self.path("e5"), "-q",
                check=False)
        self.assertEqual(p.returncode, 3, p.stderr)

    def test_divergent_training_is_a_numeric_error(self):
        huge = self.write_rows("huge.csv", [[i, "TP", "", 1e200 * (i + 1), -1e200] for i in range(20)],
                               ["id", "label", "fp_class", "f0", "f1"])
        p = run("train", "--data", huge, "--layers", 2, "--epochs", 2, "--out", self.path("e6"), "-q", check=False)
        self.assertEqual(p.returncode, 4, p.stderr)


if __name__ == "__main__":
    FPFLOW = os.path.abspath(sys.argv[1])
    SCHEMAS = os.path.abspath(sys.argv[2])
    unittest.main(argv=[sys.argv[0], "-v"])

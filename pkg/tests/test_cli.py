import unittest
import sys
import os
import io
import json
import logging
import shutil
import tempfile
from contextlib import redirect_stdout
from unittest import mock

import numpy as np
import pandas as pd

# Add parent directory to path to import modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli.io import OutputBundle, load_dataset
from cli.main import main, parse_coefficients, parse_loading
from infrastructure.errors import ConfigError, DataFormatError
from infrastructure.logging_setup import configure_logging, log_info
from rank_scores.sparsity import known_sparsity
from simulate.designs import gen_design, gen_response

FAST_MC = ["--n-paths", "2000", "--n-steps", "100"]


def write_dataset(path, n=60, p=8, seed=0):
    X = gen_design(n, p, "toeplitz", 0.1, seed=seed)
    beta = np.zeros(p + 1)
    beta[1:4] = [1.0, -0.5, 0.5]
    Y, _ = gen_response(X, beta, "normal", seed=seed + 1)
    frame = pd.DataFrame(X[:, 1:], columns=[f"x{j}" for j in range(1, p + 1)])
    frame.insert(0, "y", Y)
    frame.to_csv(path, index=False)


class CliCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.data = os.path.join(self.tmp, "d.csv")
        write_dataset(self.data)
        self.out = os.path.join(self.tmp, "out")

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def run_cli(self, *argv):
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            code = main(list(argv))
        return code, buffer.getvalue()

    def read_csv(self, name, out=None):
        return pd.read_csv(os.path.join(out or self.out, name))

    def read_json(self, name):
        with open(os.path.join(self.out, name)) as f:
            return json.load(f)

    def out_files(self, out=None):
        target = out or self.out
        return sorted(os.listdir(target)) if os.path.isdir(target) else []


class TestIO(CliCase):
    def test_load_dataset(self):
        data = load_dataset(self.data)
        self.assertEqual((data.n, data.p), (60, 8))
        np.testing.assert_array_equal(data.X[:, 0], np.ones(60))

    def test_ragged_row_names_line(self):
        path = os.path.join(self.tmp, "bad.csv")
        with open(path, "w") as f:
            f.write("y,x1\n1,2\n3,4\n5,6,7\n")
        with self.assertRaises(DataFormatError) as ctx:
            load_dataset(path)
        self.assertIn("line 4", str(ctx.exception))

    def test_non_numeric_names_line(self):
        path = os.path.join(self.tmp, "text.csv")
        with open(path, "w") as f:
            f.write("y,x1\n1,2\n3,abc\n")
        with self.assertRaises(DataFormatError) as ctx:
            load_dataset(path)
        self.assertIn("line 3", str(ctx.exception))

    def test_header_checked(self):
        path = os.path.join(self.tmp, "header.csv")
        with open(path, "w") as f:
            f.write("x1,y\n1,2\n3,4\n")
        with self.assertRaises(DataFormatError):
            load_dataset(path)

    def test_bundle_is_atomic(self):
        bundle = OutputBundle(self.out)
        bundle.add_frame("a.csv", pd.DataFrame({"v": [0.1]}))
        bundle.add_json("b.json", {"x": np.float64(1.5)})
        self.assertEqual(self.out_files(), [])
        bundle.commit()
        self.assertEqual(self.out_files(), ["a.csv", "b.json"])
        self.assertEqual(self.read_csv("a.csv")["v"][0], 0.1)
        self.assertEqual(self.read_json("b.json"), {"x": 1.5})

    def test_parsers(self):
        np.testing.assert_array_equal(parse_loading("e2", 4), [0, 0, 1, 0])
        np.testing.assert_array_equal(parse_loading("1,0,0.5,0", 4), [1, 0, 0.5, 0])
        with self.assertRaises(ConfigError):
            parse_loading("e9", 4)
        with self.assertRaises(ConfigError):
            parse_loading("1,2", 4)
        self.assertEqual(parse_coefficients(["20=0", "3=1.5"]), {20: 0.0, 3: 1.5})
        with self.assertRaises(ConfigError):
            parse_coefficients(["20"])


class TestLogging(unittest.TestCase):
    def tearDown(self):
        configure_logging()

    def test_json_records_carry_component(self):
        stream = io.StringIO()
        configure_logging(logging.INFO, json_format=True, stream=stream)
        log_info("setting tiny (coverage)", component="simulate", logger=logging.getLogger("hdqr.test"))
        record = json.loads(stream.getvalue().splitlines()[-1])
        self.assertEqual(record["component"], "simulate")
        self.assertEqual(record["level"], "INFO")
        self.assertEqual(record["message"], "setting tiny (coverage)")

    def test_reconfiguring_replaces_handler(self):
        configure_logging()
        configure_logging()
        ours = [h for h in logging.getLogger().handlers if getattr(h, "_hdqr_handler", False)]
        self.assertEqual(len(ours), 1)


class TestFitCommand(CliCase):
    def test_single_tau(self):
        code, _ = self.run_cli("fit", "--data", self.data, "--tau", "0.5", "--lambda0", "2.0", "--out", self.out)
        self.assertEqual(code, 0)
        frame = self.read_csv("beta_path.csv")
        self.assertEqual(len(frame), 1)
        self.assertEqual(list(frame.columns), ["tau"] + [f"beta_{j}" for j in range(9)])
        meta = self.read_json("fit_meta.json")
        self.assertEqual(meta["fits"][0]["lp_status"], "Optimal")

    def test_grid(self):
        code, _ = self.run_cli("fit", "--data", self.data, "--tau-grid", "0.1:0.9:0.02", "--out", self.out)
        self.assertEqual(code, 0)
        self.assertEqual(len(self.read_csv("beta_path.csv")), 41)

    def test_malformed_csv_exit_code(self):
        path = os.path.join(self.tmp, "bad.csv")
        with open(path, "w") as f:
            f.write("y,x1\n1,2\n3,4,5\n")
        with self.assertLogs("cli.main", level="ERROR") as logs:
            code, _ = self.run_cli("fit", "--data", path, "--tau", "0.5", "--out", self.out)
        self.assertEqual(code, 2)
        self.assertIn("line 3", "\n".join(logs.output))
        self.assertEqual(self.out_files(), [])

    def test_invalid_tau(self):
        code, _ = self.run_cli("fit", "--data", self.data, "--tau", "1.5", "--out", self.out)
        self.assertEqual(code, 2)
        code, _ = self.run_cli("fit", "--data", self.data, "--tau", "0.5", "--tau-grid", "0.1:0.9:0.1",
                               "--out", self.out)
        self.assertEqual(code, 2)

    def test_linear_algebra_failure_exit_code(self):
        with mock.patch("cli.main.fit_path", side_effect=np.linalg.LinAlgError("Singular matrix")):
            with self.assertLogs("cli.main", level="ERROR") as logs:
                code, _ = self.run_cli("fit", "--data", self.data, "--tau", "0.5", "--out", self.out)
        self.assertEqual(code, 3)
        self.assertIn("LinAlgError", "\n".join(logs.output))
        self.assertEqual(self.out_files(), [])


class TestInferCommand(CliCase):
    def test_single_interval(self):
        code, _ = self.run_cli("infer", "--data", self.data, "--x", "e3", "--tau", "0.5", "--alpha", "0.025",
                               "--out", self.out)
        self.assertEqual(code, 0)
        ci = self.read_csv("ci.csv")
        self.assertEqual(len(ci), 1)
        row = ci.iloc[0]
        self.assertLess(row["lower"], row["estimate"])
        self.assertGreater(row["upper"], row["estimate"])
        self.assertAlmostEqual(row["critical_value"], 1.959964, places=5)
        self.assertEqual(self.out_files(), ["ci.csv", "debiased_path.csv", "precision_meta.json",
                                            "sparsity_path.csv"])
        meta = self.read_json("precision_meta.json")
        self.assertGreater(meta["gamma_n"], 0)

    def test_known_sparsity_mode(self):
        code, _ = self.run_cli("infer", "--data", self.data, "--tau-grid", "0.4:0.6:0.1", "--known-sigma",
                               "normal", "--out", self.out)
        self.assertEqual(code, 0)
        frame = self.read_csv("sparsity_path.csv")
        for _, row in frame.iterrows():
            self.assertAlmostEqual(row["sparsity"], known_sparsity("normal")(row["tau"]), places=10)
        self.assertTrue((frame["mode"] == "known").all())
        self.assertEqual(len(self.read_csv("ci.csv")), 3 * 9)

    def test_band(self):
        code, _ = self.run_cli("infer", "--data", self.data, "--band", "--e", "e1", "--tau-grid", "0.2:0.8:0.02",
                               "--out", self.out, *FAST_MC)
        self.assertEqual(code, 0)
        band = self.read_csv("band.csv")
        self.assertEqual(len(band), 31)
        self.assertGreater(band["critical_value"].iloc[0], 1.96)

    def test_band_needs_loading(self):
        code, _ = self.run_cli("infer", "--data", self.data, "--band", "--tau-grid", "0.2:0.8:0.02",
                               "--out", self.out)
        self.assertEqual(code, 2)

    def test_unknown_law_writes_nothing(self):
        code, _ = self.run_cli("infer", "--data", self.data, "--tau", "0.5", "--known-sigma", "laplace",
                               "--out", self.out)
        self.assertEqual(code, 2)
        self.assertEqual(self.out_files(), [])

    def test_bandwidth_outside_grid(self):
        code, _ = self.run_cli("infer", "--data", self.data, "--tau", "0.5", "--h", "0.6", "--out", self.out)
        self.assertEqual(code, 4)
        self.assertEqual(self.out_files(), [])


class TestTestCommand(CliCase):
    def test_wald(self):
        code, stdout = self.run_cli("test", "--data", self.data, "--coef", "5=0", "--tau", "0.5",
                                    "--alpha", "0.05", "--out", self.out)
        self.assertEqual(code, 0)
        result = self.read_json("test.json")
        self.assertAlmostEqual(result["critical_value"]["value"], 3.8415, places=3)
        self.assertEqual(result["critical_value"]["kind"], "Chi2")
        self.assertGreaterEqual(result["statistic"], 0.0)
        self.assertIn("statistic=", stdout)

    def test_sup_wald(self):
        code, _ = self.run_cli("test", "--data", self.data, "--coef", "3=0", "--coef", "4=0", "--sup",
                               "--tau-grid", "0.2:0.8:0.05", "--out", self.out, *FAST_MC)
        self.assertEqual(code, 0)
        result = self.read_json("test.json")
        self.assertEqual(result["critical_value"]["metadata"]["d"], 2)
        self.assertEqual(result["critical_value"]["metadata"]["n_paths"], 2000)
        self.assertEqual(len(result["per_tau_statistic"]), 13)
        self.assertTrue(result["sup"])

    def test_structural(self):
        code, _ = self.run_cli("test", "--data", self.data, "--structural", "1,2", "--tau", "0.5",
                               "--out", self.out)
        self.assertEqual(code, 0)
        self.assertEqual(self.read_json("test.json")["M"][0][:3], [0.0, 1.0, -1.0])
        code, _ = self.run_cli("test", "--data", self.data, "--structural", "1,1", "--tau", "0.5",
                               "--out", self.out)
        self.assertEqual(code, 2)

    def test_singular_hypothesis(self):
        path = os.path.join(self.tmp, "h.csv")
        row = ",".join(["0", "1"] + ["0"] * 7)
        with open(path, "w") as f:
            f.write(",".join([f"m{j}" for j in range(9)] + ["r"]) + "\n")
            f.write(row + ",0\n" + row + ",0\n")
        code, _ = self.run_cli("test", "--data", self.data, "--hypothesis", path, "--tau", "0.5",
                               "--out", self.out)
        self.assertEqual(code, 5)
        self.assertEqual(self.out_files(), [])

    def test_pointwise_needs_single_tau(self):
        code, _ = self.run_cli("test", "--data", self.data, "--coef", "5=0", "--tau-grid", "0.3:0.7:0.1",
                               "--out", self.out)
        self.assertEqual(code, 2)

    def test_needs_one_hypothesis(self):
        code, _ = self.run_cli("test", "--data", self.data, "--tau", "0.5", "--out", self.out)
        self.assertEqual(code, 2)


class TestCritvalsCommand(CliCase):
    def test_kolmogorov(self):
        code, stdout = self.run_cli("critvals", "kolmogorov", "--alpha", "0.05")
        self.assertEqual(code, 0)
        self.assertAlmostEqual(float(stdout.splitlines()[0]), 1.3581, delta=1e-3)

    def test_chi2(self):
        code, stdout = self.run_cli("critvals", "chi2", "--d", "2", "--level", "0.95")
        self.assertEqual(code, 0)
        self.assertAlmostEqual(float(stdout.splitlines()[0]), 5.9915, delta=1e-3)

    def test_bessel_is_deterministic(self):
        argv = ["critvals", "bessel", "--d", "2", "--alpha", "0.05", "--trange", "0.2:0.8", "--seed", "1"] + FAST_MC
        first = self.run_cli(*argv)
        second = self.run_cli(*argv)
        self.assertEqual(first, second)
        meta = json.loads(first[1].splitlines()[1])
        self.assertEqual(meta["metadata"]["range"], [0.2, 0.8])

    def test_bad_alpha(self):
        code, _ = self.run_cli("critvals", "z", "--alpha", "1.5")
        self.assertEqual(code, 2)


class TestSimulateCommand(CliCase):
    def write_config(self, **changes):
        config = {"name": "tiny", "kind": "coverage", "n": 60, "p": 12, "s": 3, "taus": [0.5], "coords": [1, 5],
                  "test_coord": 5, "n_reps": 2, "oracle": False}
        config.update(changes)
        path = os.path.join(self.tmp, "sim.json")
        with open(path, "w") as f:
            json.dump(config, f)
        return path

    def test_byte_identical_reruns(self):
        path = self.write_config()
        outs = [os.path.join(self.tmp, "run1"), os.path.join(self.tmp, "run2")]
        for out in outs:
            code, stdout = self.run_cli("simulate", "--config", path, "--seed", "7", "--out", out)
            self.assertEqual(code, 0)
            self.assertIn("beta_1", stdout)
        self.assertEqual(self.out_files(outs[0]), ["coverage_report.csv", "summary.json"])
        for name in self.out_files(outs[0]):
            with open(os.path.join(outs[0], name), "rb") as a, open(os.path.join(outs[1], name), "rb") as b:
                self.assertEqual(a.read(), b.read(), name)

    def test_invalid_config(self):
        code, _ = self.run_cli("simulate", "--config", self.write_config(n=10), "--out", self.out)
        self.assertEqual(code, 2)
        self.assertEqual(self.out_files(), [])

    def test_needs_preset_or_config(self):
        code, _ = self.run_cli("simulate", "--out", self.out)
        self.assertEqual(code, 2)


if __name__ == '__main__':
    unittest.main()

#!/usr/bin/env python3
"""
End-to-end tests for app.py subcommands: outputs, exit codes and the ledger.
"""

import unittest
import os
import sys
import json
import tempfile
from unittest.mock import patch

import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import main
from repository.run_repository import RunRepository
from repository.sql_db import SqlDb
from repository.file_repository import read_csv, read_json
from services.config_service import load_and_validate_config
from services import run_service
from services.run_service import RunService
from utils.exception import EXIT_NUMERICAL, EXIT_OK, EXIT_UNEXPECTED, EXIT_VALIDATION

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


class TestCli(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, name):
        return os.path.join(CONFIGS, name)

    def test_compute_writes_outputs(self):
        print("\n🧪 Testing compute subcommand...")
        code = main(["compute", "--config", self._config("bloch_z_km.json"), "--out", self.out])
        self.assertEqual(code, EXIT_OK)
        document = read_json(os.path.join(self.out, "bloch_z_km_compute.json"))
        self.assertEqual(len(document["config_hash"]), 64)
        self.assertEqual([r["method"] for r in document["results"]], ["spectral", "hessian_fd"])
        self.assertAlmostEqual(document["results"][0]["values"][0][0], 1.0 / (1.0 - 0.09), places=12)
        self.assertLess(document["max_deviation"], 1e-3)
        print("✅ JSON carries results, deviation and config hash")

    def test_compute_csv_is_reproducible(self):
        csv_path = os.path.join(self.out, "time_evolved_petz_compute.csv")
        args = ["compute", "--config", self._config("time_evolved_petz.json"), "--out", self.out,
                "--method", "spectral"]
        self.assertEqual(main(args), EXIT_OK)
        with open(csv_path, "rb") as f:
            first = f.read()
        self.assertEqual(main(args), EXIT_OK)
        with open(csv_path, "rb") as f:
            self.assertEqual(f.read(), first)
        config_hash, header, rows = read_csv(csv_path)
        self.assertEqual(header, ["method", "i", "j", "value"])
        self.assertEqual(len(rows), 4)

    def test_compute_closed(self):
        code = main(["compute", "--config", self._config("thermal_alpha_z.json"), "--out", self.out])
        self.assertEqual(code, EXIT_OK)
        document = read_json(os.path.join(self.out, "thermal_alpha_z_compute.json"))
        self.assertEqual(document["results"][0]["method"], "closed_form_thermal")

    def test_verify_suite(self):
        print("\n🧪 Testing verify subcommand...")
        code = main(["verify", "--suite", "km_rld_ordering", "--seed", "3", "--out", self.out])
        self.assertEqual(code, EXIT_OK)
        document = read_json(os.path.join(self.out, "run_verify.json"))
        self.assertTrue(document["passed"])
        self.assertEqual(document["reports"][0]["name"], "km_rld_ordering")
        self.assertEqual(document["reports"][0]["seed"], 3)
        print("✅ Verify report written with exit code 0")

    def test_sweep(self):
        code = main(["sweep", "--config", self._config("bloch_z_km.json"), "--out", self.out])
        self.assertEqual(code, EXIT_OK)
        _, header, rows = read_csv(os.path.join(self.out, "bloch_z_km_sweep.csv"))
        self.assertEqual(header, ["alpha", "z", "i", "j", "value", "km_value", "method"])
        self.assertEqual(len(rows), 6 * 3)
        # commuting family: every kernel gives the classical Fisher information
        for row in rows:
            self.assertAlmostEqual(float(row[4]), float(row[5]), places=10)

    def test_ngd(self):
        code = main(["ngd", "--config", self._config("ngd_qbm.json"), "--out", self.out])
        self.assertEqual(code, EXIT_OK)
        _, header, rows = read_csv(os.path.join(self.out, "ngd_log.csv"))
        self.assertEqual(header[:4], ["iter", "loss", "grad_norm", "min_eig"])
        self.assertLess(float(rows[-1][1]), 1e-10)

    def test_densities(self):
        print("\n🧪 Testing densities subcommand...")
        path = os.path.join(self.out, "short.json")
        with open(path, "w") as f:
            json.dump({"name": "short", "densities": {"alpha": 0.5, "z": 0.5, "t_grid": [-1.0, 0.5, 1.0],
                                                      "omega_grid": [0.0, 2.0]}}, f)
        code = main(["densities", "--config", path, "--out", self.out])
        self.assertEqual(code, EXIT_OK)
        _, header, rows = read_csv(os.path.join(self.out, "short_densities.csv"))
        self.assertEqual(header, ["t", "p", "p_alpha_z", "q_alpha_z"])
        self.assertEqual(rows[0][1], rows[2][1])
        # p_{1/2,1/2} = p
        self.assertAlmostEqual(float(rows[1][1]), float(rows[1][2]), places=12)
        masses = read_json(os.path.join(self.out, "short_densities.json"))["mass"]
        for mass in masses.values():
            self.assertAlmostEqual(mass, 1.0, places=4)
        print("✅ Samples and masses written")

    def test_validation_exit_codes(self):
        print("\n🧪 Testing exit codes for bad input...")
        self.assertEqual(main(["compute", "--config", os.path.join(self.out, "missing.json")]), EXIT_VALIDATION)
        self.assertEqual(main(["runs"]), EXIT_VALIDATION)
        self.assertEqual(
            main(["compute", "--config", self._config("bloch_z_km.json"), "--method", "guess", "--out", self.out]),
            EXIT_VALIDATION,
        )
        self.assertEqual(main(["verify", "--suite", "guess", "--out", self.out]), EXIT_VALIDATION)
        self.assertEqual(main(["ngd"]), EXIT_VALIDATION)
        print("✅ Validation problems exit with code 2")

    def test_numerical_failure_exit_code(self):
        print("\n🧪 Testing exit code for a numerical failure...")
        args = ["compute", "--config", self._config("bloch_z_km.json"), "--out", self.out]
        with patch.object(RunService, "compute", side_effect=np.linalg.LinAlgError("Singular matrix")):
            self.assertEqual(main(args), EXIT_NUMERICAL)
        with patch.object(RunService, "compute", side_effect=FloatingPointError("overflow")):
            self.assertEqual(main(args), EXIT_NUMERICAL)
        print("✅ numpy linear algebra failures exit with code 3")

    def test_unexpected_failure_exit_code(self):
        args = ["compute", "--config", self._config("bloch_z_km.json"), "--out", self.out]
        with patch.object(RunService, "compute", side_effect=RuntimeError("boom")):
            self.assertEqual(main(args), EXIT_UNEXPECTED)
        self.assertNotIn(EXIT_UNEXPECTED, (EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL))

    def test_run_service_module_docstring(self):
        self.assertIsNotNone(run_service.__doc__)
        self.assertIn("ledger", run_service.__doc__)

    def test_ledger(self):
        print("\n🧪 Testing run ledger...")
        ledger = os.path.join(self.out, "runs.db")
        config_path = self._config("bloch_z_km.json")
        self.assertEqual(main(["compute", "--config", config_path, "--out", self.out, "--ledger", ledger]), EXIT_OK)
        self.assertEqual(main(["runs", "--ledger", ledger]), EXIT_OK)
        db = SqlDb(ledger)
        try:
            repo = RunRepository(db)
            runs = repo.get_all_runs()
            self.assertEqual(len(runs), 1)
            self.assertEqual(runs[0]["status"], "done")
            expected = load_and_validate_config(config_path)
            self.assertEqual(runs[0]["seed"], expected.seed)
            self.assertEqual(len(repo.get_info_matrices(runs[0]["id"])), 2)
        finally:
            db.close()
        print("✅ Run and matrices recorded")


if __name__ == "__main__":
    unittest.main()

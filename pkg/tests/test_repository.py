#!/usr/bin/env python3
"""
Run ledger and output file tests.
"""

import unittest
import os
import sys
import tempfile

import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from repository.file_repository import format_matrix, read_csv, read_json, write_csv, write_json
from repository.report_repository import ReportRepository
from repository.run_repository import RunRepository
from repository.sql_db import SqlDb
from services.infomat_service import InfoMatrix
from services.verify_service import PropertyReport
from utils.exception import CustomException


class TestSqlDb(unittest.TestCase):

    def setUp(self):
        self.db = SqlDb(":memory:")
        self.db.create_indexes()
        self.runs = RunRepository(self.db)
        self.reports = ReportRepository(self.db)

    def tearDown(self):
        self.db.close()

    def test_tables_created(self):
        print("\n🧪 Testing ledger schema...")
        names = set(self.db.db.table_names())
        self.assertTrue({"runs", "info_matrices", "property_reports"} <= names)
        columns = {c.name for c in self.db.db["runs"].columns}
        self.assertIn("config_hash", columns)
        print("✅ runs, info_matrices and property_reports exist")

    def test_run_round_trip(self):
        run_id = self.runs.insert_run("demo", "compute", "abc", 7, "out")
        self.runs.update_status(run_id, "completed")
        row = self.runs.get_run_by_id(run_id)
        self.assertEqual(row["status"], "completed")
        self.assertEqual(row["seed"], 7)
        self.assertIsNone(self.runs.get_run_by_id(run_id + 100))
        self.runs.insert_run("other", "verify", "def", 1, "out")
        self.assertEqual(len(self.runs.get_all_runs()), 2)
        self.assertEqual([r["name"] for r in self.runs.get_all_runs("verify")], ["other"])

    def test_info_matrix_round_trip(self):
        print("\n🧪 Testing information matrix storage...")
        run_id = self.runs.insert_run("demo", "compute", "abc", 7, "out")
        info = InfoMatrix(np.array([[1.5, 0.25], [0.25, 2.0]]), "kubo_mori", "bloch", [0.1, 0.2], "spectral")
        self.runs.insert_info_matrix(run_id, info, max_deviation=1e-9)
        rows = self.runs.get_info_matrices(run_id)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["matrix"], [[1.5, 0.25], [0.25, 2.0]])
        self.assertEqual(rows[0]["theta"], [0.1, 0.2])
        self.assertEqual(rows[0]["kernel"], "kubo_mori")
        print("✅ Matrix and theta stored as JSON text")

    def test_reports(self):
        run_id = self.runs.insert_run("check", "verify", "abc", 42, "out")
        reports = [
            PropertyReport("km_rld_ordering", 3, -0.1, 1e-9, True, 42),
            PropertyReport("oracle_equivalence", 3, 0.01, 1e-3, False, 42, [{"instance": 0}]),
        ]
        self.assertEqual(self.reports.batch_insert_reports(run_id, reports), 2)
        self.assertEqual(self.reports.batch_insert_reports(run_id, []), 0)
        rows = self.reports.get_reports(run_id)
        self.assertEqual([r["passed"] for r in rows], [True, False])
        self.assertEqual(rows[1]["details"], [{"instance": 0}])
        self.assertEqual(len(self.reports.get_failed_reports()), 1)


class TestFileRepository(unittest.TestCase):

    def test_json_round_trip(self):
        print("\n🧪 Testing JSON output...")
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "nested", "run.json")
            write_json(path, {"matrix": np.array([[1.0, 0.1], [0.1, 1.0 / 3.0]]), "name": "run"}, "h" * 64)
            document = read_json(path)
            self.assertEqual(document["config_hash"], "h" * 64)
            self.assertEqual(document["matrix"][1][1], 1.0 / 3.0)
        print("✅ 17 significant digits survive a read")

    def test_csv_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "rows.csv")
            write_csv(path, ["method", "value"], [["spectral", 0.1], ["hessian", np.float64(2.0)]], "abc")
            config_hash, header, rows = read_csv(path)
            self.assertEqual(config_hash, "abc")
            self.assertEqual(header, ["method", "value"])
            self.assertEqual(rows[0], ["spectral", "0.10000000000000001"])
            self.assertEqual(float(rows[1][1]), 2.0)

    def test_format_matrix(self):
        self.assertEqual(format_matrix([[1.0, 2.0]]), "[[1,2]]")
        self.assertEqual(format_matrix(0.5), "0.5")

    def test_missing_files(self):
        with self.assertRaises(CustomException):
            read_json("/nonexistent/file.json")
        with self.assertRaises(CustomException):
            read_csv("/nonexistent/file.csv")


if __name__ == "__main__":
    unittest.main()

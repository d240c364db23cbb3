"""
Report Repository - property reports produced by verify runs.
"""

import json
import sqlite3

from utils.exception import CustomException


class ReportRepository:
    """Repository for the property_reports table."""

    def __init__(self, db_connection):
        self.db = db_connection.db

    def batch_insert_reports(self, run_id, reports):
        """
        Insert PropertyReports for one run in a single transaction.

        Returns:
            int: number of rows inserted
        """
        if not reports:
            return 0
        try:
            rows = [
                {
                    "run_id": run_id,
                    "name": r.name,
                    "instances_run": r.instances_run,
                    "worst_violation": r.worst_violation,
                    "tolerance": r.tolerance,
                    "passed": int(r.passed),
                    "seed": r.seed,
                    "details": json.dumps(r.details),
                }
                for r in reports
            ]
            with self.db.conn:
                self.db["property_reports"].insert_all(rows)
            return len(rows)
        except sqlite3.Error as e:
            raise CustomException(f"Error inserting property reports: {e}")

    def get_reports(self, run_id):
        try:
            rows = list(self.db["property_reports"].rows_where("run_id = ?", [run_id], order_by="id"))
            for row in rows:
                row["passed"] = bool(row["passed"])
                row["details"] = json.loads(row["details"])
            return rows
        except sqlite3.Error as e:
            raise CustomException(f"Error fetching property reports: {e}")

    def get_failed_reports(self):
        try:
            return list(self.db["property_reports"].rows_where("passed = 0", order_by="id"))
        except sqlite3.Error as e:
            raise CustomException(f"Error fetching failed reports: {e}")

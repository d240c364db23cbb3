"""
Run Repository - ledger rows for CLI runs and the information matrices they produced.
"""

import json
import sqlite3
from datetime import datetime, timezone

from utils.exception import CustomException


class RunRepository:
    """Repository for the runs and info_matrices tables."""

    def __init__(self, db_connection):
        """
        Args:
            db_connection: SqlDb instance
        """
        self.db = db_connection.db

    def insert_run(self, name, command, config_hash, seed, output_dir, status="started"):
        """
        Record the start of a run.

        Returns:
            int: the new run id
        """
        try:
            record = {
                "name": name,
                "command": command,
                "config_hash": config_hash,
                "seed": seed,
                "status": status,
                "output_dir": output_dir,
                "created_at": datetime.now(timezone.utc).isoformat(),
            }
            return self.db["runs"].insert(record).last_pk
        except sqlite3.Error as e:
            raise CustomException(f"Error inserting run: {e}")

    def update_status(self, run_id, status):
        try:
            self.db["runs"].update(run_id, {"status": status})
        except sqlite3.Error as e:
            raise CustomException(f"Error updating run {run_id}: {e}")

    def insert_info_matrix(self, run_id, info, max_deviation=None):
        """Store an InfoMatrix with its values and theta as JSON text."""
        try:
            return self.db["info_matrices"].insert({
                "run_id": run_id,
                "kernel": info.kernel_label,
                "family": info.family_label,
                "method": info.method,
                "theta": json.dumps(info.theta.tolist()),
                "matrix": json.dumps(info.values.tolist()),
                "max_deviation": max_deviation,
            }).last_pk
        except sqlite3.Error as e:
            raise CustomException(f"Error inserting information matrix: {e}")

    def get_all_runs(self, command=None):
        """
        Returns:
            list: run dictionaries, oldest first
        """
        try:
            if command is None:
                return list(self.db["runs"].rows_where(order_by="id"))
            return list(self.db["runs"].rows_where("command = ?", [command], order_by="id"))
        except sqlite3.Error as e:
            raise CustomException(f"Error fetching runs: {e}")

    def get_run_by_id(self, run_id):
        try:
            rows = list(self.db["runs"].rows_where("id = ?", [run_id]))
            return rows[0] if rows else None
        except sqlite3.Error as e:
            raise CustomException(f"Error fetching run by ID: {e}")

    def get_info_matrices(self, run_id):
        try:
            rows = list(self.db["info_matrices"].rows_where("run_id = ?", [run_id], order_by="id"))
            for row in rows:
                row["theta"] = json.loads(row["theta"])
                row["matrix"] = json.loads(row["matrix"])
            return rows
        except sqlite3.Error as e:
            raise CustomException(f"Error fetching information matrices: {e}")

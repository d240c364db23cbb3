import logging
import sqlite3

import sqlite_utils

from utils.exception import CustomException

logger = logging.getLogger(__name__)


class SqlDb:
    """Run ledger: tables runs, info_matrices and property_reports."""

    def __init__(self, db_path):
        try:
            if db_path == ":memory:":
                self.db = sqlite_utils.Database(memory=True)
            else:
                self.db = sqlite_utils.Database(db_path)
            self.db["runs"].create(
                {
                    "id": int,
                    "name": str,
                    "command": str,
                    "config_hash": str,
                    "seed": int,
                    "status": str,
                    "output_dir": str,
                    "created_at": str,
                },
                pk="id",
                if_not_exists=True,
            )
            self.db["info_matrices"].create(
                {
                    "id": int,
                    "run_id": int,
                    "kernel": str,
                    "family": str,
                    "method": str,
                    "theta": str,
                    "matrix": str,
                    "max_deviation": float,
                },
                pk="id",
                foreign_keys=[("run_id", "runs", "id")],
                if_not_exists=True,
            )
            self.db["property_reports"].create(
                {
                    "id": int,
                    "run_id": int,
                    "name": str,
                    "instances_run": int,
                    "worst_violation": float,
                    "tolerance": float,
                    "passed": int,
                    "seed": int,
                    "details": str,
                },
                pk="id",
                foreign_keys=[("run_id", "runs", "id")],
                if_not_exists=True,
            )
        except sqlite3.Error as e:
            raise CustomException(f"Database initialization error: {e}")

    @property
    def conn(self):
        return self.db.conn

    def commit(self):
        """Commit database transactions."""
        if self.db is not None:
            self.db.conn.commit()

    def create_indexes(self):
        """Indexes on the columns the runs subcommand filters by."""
        try:
            self.db["runs"].create_index(["name"], if_not_exists=True)
            self.db["runs"].create_index(["config_hash"], if_not_exists=True)
            self.db["info_matrices"].create_index(["run_id"], if_not_exists=True)
            self.db["property_reports"].create_index(["run_id"], if_not_exists=True)
            self.commit()
            logger.debug("Ledger indexes created")
        except sqlite3.Error as e:
            raise CustomException(f"Error creating indexes: {e}")

    def close(self):
        if self.db is not None:
            self.db.conn.close()
            self.db = None

"""
Runs the CLI subcommands: builds families and kernels from a config, calls the compute
services, writes JSON/CSV outputs and records runs in the optional ledger.
"""

import logging
import os
import time

import numpy as np

from repository.file_repository import write_csv, write_json
from repository.report_repository import ReportRepository
from repository.run_repository import RunRepository
from services.config_service import build_family, build_kernel
from services.density_service import (
    alpha_z_tent,
    char_fn_alpha_z,
    convolve_densities,
    convolved_mass,
    density_mass,
    high_peak_tent,
    high_peak_tent_density,
    alpha_z_tent_density,
    thermal_weight,
)
from services.divergence_service import RenyiParams, hessian_target
from services.family_service import PureStateFamily, ThermalFamily, TimeEvolvedFamily
from services.infomat_service import info_hessian_oracle, info_pure_state, info_spectral
from services.kernel_service import alpha_z_kernel, kubo_mori_kernel
from services.ngd_service import LOG_COLUMNS, run_ngd
from services.structured_service import (
    thermal_info_closed,
    thermal_info_general_kernel,
    time_evolved_info_closed,
    time_evolved_info_general_kernel,
)
from services.verify_service import oracle_deviation, run_suites
from utils.exception import UnsupportedError

logger = logging.getLogger(__name__)

# Divergence whose Hessian matches each kernel
KERNEL_DIVERGENCES = {
    "kubo_mori": "umegaki",
    "rld": "belavkin_staszewski",
    "alpha_z": "alpha_z",
    "petz": "petz",
    "sandwiched": "sandwiched",
}

DEFAULT_T_GRID = ((np.arange(-40, 40) + 0.5) * 0.1).tolist()
DEFAULT_OMEGA_GRID = np.linspace(0.0, 8.0, 33).tolist()
PURE_LIFT_FLOOR = 1e-8


def _is_alpha_z(kernel):
    return kernel.name in ("alpha_z", "petz", "sandwiched") and kernel.metadata.get("limit") is None


def _params(kernel):
    return RenyiParams(kernel.alpha, kernel.z)


def hessian_target_for(kernel_spec, kernel):
    name = kernel_spec.get("divergence") or KERNEL_DIVERGENCES[kernel.name]
    if kernel.metadata.get("limit") == "kubo_mori" and name in ("alpha_z", "petz", "sandwiched"):
        name = "umegaki"
    return hessian_target(name, kernel.alpha, kernel.z)


class RunService:
    def __init__(self, db=None):
        self.db = db
        self.run_repo = RunRepository(db) if db is not None else None
        self.report_repo = ReportRepository(db) if db is not None else None

    def _start(self, config, command, config_hash):
        if self.run_repo is None:
            return None
        return self.run_repo.insert_run(config.name if hasattr(config, "name") else command, command,
                                        config_hash, config.seed, config.output["dir"])

    def _finish(self, run_id, status):
        if self.run_repo is not None and run_id is not None:
            self.run_repo.update_status(run_id, status)

    def _path(self, config, name, suffix):
        return os.path.join(config.output["dir"], f"{name}_{suffix}")

    def compute(self, config):
        """
        Information matrices for the configured family and kernel.

        method: spectral | hessian | both | closed. Writes {name}_compute.json and
        optionally {name}_compute.csv.
        """
        family, theta = build_family(config.family)
        kernel = build_kernel(config.kernel)
        run_id = self._start(config, "compute", config.hash)
        results, timings = [], {}

        def timed(label, fn):
            start = time.perf_counter()
            value = fn()
            timings[label] = time.perf_counter() - start
            results.append(value)
            return value

        method = config.method
        if method in ("spectral", "both"):
            timed("spectral", lambda: self._spectral(family, theta, kernel))
        if method in ("hessian", "both"):
            timed("hessian_fd", lambda: self._hessian(family, theta, config, kernel))
        if method == "closed":
            timed("closed", lambda: self._closed(family, theta, kernel))

        max_deviation = oracle_deviation(results[0], results[1]) if method == "both" else None
        document = {
            "name": config.name,
            "results": [{**r.to_dict(), "values": r.values} for r in results],
            "max_deviation": max_deviation,
            "timings": timings,
        }
        paths = [write_json(self._path(config, config.name, "compute.json"), document, config.hash)]
        if config.output.get("csv"):
            rows = [(r.method, i, j, float(r.values[i, j]))
                    for r in results for i in range(r.size) for j in range(r.size)]
            paths.append(write_csv(self._path(config, config.name, "compute.csv"),
                                   ["method", "i", "j", "value"], rows, config.hash))
        if run_id is not None:
            for r in results:
                self.run_repo.insert_info_matrix(run_id, r, max_deviation)
        self._finish(run_id, "done")
        return {"results": results, "max_deviation": max_deviation, "paths": paths}

    def _spectral(self, family, theta, kernel):
        if isinstance(family, PureStateFamily):
            if not _is_alpha_z(kernel):
                raise UnsupportedError(f"Pure families need an alpha-z type kernel, got '{kernel.label}'")
            return info_pure_state(family, theta, _params(kernel))
        return info_spectral(family, theta, kernel)

    def _hessian(self, family, theta, config, kernel):
        target = hessian_target_for(config.kernel, kernel)
        if isinstance(family, PureStateFamily):
            family = family.lifted(PURE_LIFT_FLOOR)
        return info_hessian_oracle(family, theta, target, config.tolerances.get("hessian_step"))

    def _closed(self, family, theta, kernel):
        """Closed thermal/time-evolved forms; alpha-z kernels with alpha < 1 use the f_{a,z} weights."""
        closed_alpha_z = _is_alpha_z(kernel) and kernel.alpha < 1
        if isinstance(family, ThermalFamily):
            if closed_alpha_z:
                return thermal_info_closed(family, theta, _params(kernel))
            return thermal_info_general_kernel(family, theta, kernel)
        if isinstance(family, TimeEvolvedFamily):
            if closed_alpha_z:
                return time_evolved_info_closed(family, theta, _params(kernel))
            return time_evolved_info_general_kernel(family, theta, kernel)
        raise UnsupportedError(f"Closed forms exist for thermal and time-evolved families, got '{family.kind}'")

    def verify(self, config):
        """
        Run the configured suites; writes {name}_verify.json.

        Returns:
            dict: reports, passed flag and output paths
        """
        settings = config.verify
        run_id = self._start(config, "verify", config.hash)
        reports = run_suites(
            settings.get("suites", []),
            seed=config.seed,
            instances=settings.get("instances", 10),
            max_workers=settings.get("max_workers", 4),
            kernel_perturbation=settings.get("kernel_perturbation"),
        )
        passed = all(r.passed for r in reports)
        document = {"name": config.name, "passed": passed, "reports": [r.to_dict() for r in reports]}
        path = write_json(self._path(config, config.name, "verify.json"), document, config.hash)
        if run_id is not None:
            self.report_repo.batch_insert_reports(run_id, reports)
        self._finish(run_id, "passed" if passed else "failed")
        return {"reports": reports, "passed": passed, "paths": [path]}

    def sweep(self, config):
        """
        Rows (alpha, z, i, j, value, km_value, method) over the alpha/z grid;
        km_value is the Kubo-Mori reference entry.
        """
        family, theta = build_family(config.family)
        run_id = self._start(config, "sweep", config.hash)
        reference = info_spectral(family, theta, kubo_mori_kernel()).values
        rows = []
        for alpha in config.sweep["alpha_grid"]:
            for z in config.sweep["z_grid"]:
                info = info_spectral(family, theta, alpha_z_kernel(alpha, z))
                for i in range(info.size):
                    for j in range(info.size):
                        rows.append((float(alpha), float(z), i, j, float(info.values[i, j]),
                                     float(reference[i, j]), info.method))
        columns = ["alpha", "z", "i", "j", "value", "km_value", "method"]
        path = write_csv(self._path(config, config.name, "sweep.csv"), columns, rows, config.hash)
        self._finish(run_id, "done")
        return {"rows": rows, "paths": [path]}

    def ngd(self, config):
        """Natural gradient descent; writes the iteration log ngd_log.csv."""
        run_id = self._start(config, "ngd", config.hash)
        result = run_ngd(config)
        columns = LOG_COLUMNS + [f"theta_{j}" for j in range(len(result.theta))]
        rows = [[row[c] for c in LOG_COLUMNS] + row["theta"] for row in result.rows]
        path = write_csv(self._path(config, "ngd", "log.csv"), columns, rows, config.hash)
        self._finish(run_id, "converged" if result.converged else "done")
        return {"result": result, "paths": [path]}

    def densities(self, config):
        """
        Samples (t, p, p_{a,z}, q_{a,z}) and (w, f_{a,z}, g_hat), plus the numeric masses.
        """
        settings = config.densities
        params = RenyiParams(settings["alpha"], settings["z"])
        t_grid = np.array(settings.get("t_grid") or DEFAULT_T_GRID, dtype=float)
        omega_grid = np.array(settings.get("omega_grid") or DEFAULT_OMEGA_GRID, dtype=float)
        run_id = self._start(config, "densities", config.hash)

        p = high_peak_tent(t_grid)
        p_az = alpha_z_tent(t_grid, params)
        q = convolve_densities(params.alpha, params.z, t_grid)
        time_rows = [(float(t), float(a), float(b), float(c)) for t, a, b, c in zip(t_grid, p, p_az, q)]

        f = char_fn_alpha_z(omega_grid, params)
        g_hat = thermal_weight(omega_grid, alpha_z_kernel(params.alpha, params.z))
        frequency_rows = [(float(w), float(a), float(b)) for w, a, b in zip(omega_grid, f, g_hat)]

        masses = {
            "p": density_mass(high_peak_tent_density()),
            "p_alpha_z": density_mass(alpha_z_tent_density(params)),
            "q_alpha_z": convolved_mass(params),
        }
        paths = [
            write_csv(self._path(config, config.name, "densities.csv"),
                      ["t", "p", "p_alpha_z", "q_alpha_z"], time_rows, config.hash),
            write_csv(self._path(config, config.name, "weights.csv"),
                      ["omega", "f_alpha_z", "g_hat"], frequency_rows, config.hash),
            write_json(self._path(config, config.name, "densities.json"),
                       {"name": config.name, "alpha": params.alpha, "z": params.z, "mass": masses}, config.hash),
        ]
        self._finish(run_id, "done")
        return {"time_rows": time_rows, "frequency_rows": frequency_rows, "mass": masses, "paths": paths}

    def list_runs(self, command=None):
        if self.run_repo is None:
            return []
        return self.run_repo.get_all_runs(command)

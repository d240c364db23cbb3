import argparse
import logging
import sys

import numpy as np

from repository.sql_db import SqlDb
from services.config_service import (
    RunConfig,
    load_and_validate_config,
    load_and_validate_ngd_config,
    with_overrides,
)
from services.run_service import RunService
from services.verify_service import DEFAULT_SUITE
from utils.exception import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PROPERTY_FAILURE,
    EXIT_UNEXPECTED,
    CustomException,
    exit_code_for,
)

COMMANDS = ["compute", "verify", "sweep", "ngd", "densities", "runs"]


def parse_arguments(argv=None):
    """
    Parse command line arguments.
    """
    parser = argparse.ArgumentParser(
        description="Quantum information matrices: compute, verify and sweep",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
        Examples:
        python3 app.py compute --config configs/bloch_z_km.json --method both
        python3 app.py verify --suite petz_ordering --suite z_ordering --seed 7
        python3 app.py sweep --config configs/thermal_alpha_z.json
        python3 app.py ngd --config configs/ngd_qbm.json
        python3 app.py densities --alpha 0.5 --z 0.25
        python3 app.py runs --ledger runs.db
        """
    )
    parser.add_argument("command", choices=COMMANDS, help="Subcommand to run")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="Override the configured seed")
    parser.add_argument("--out", help="Override the output directory")
    parser.add_argument("--method", help="spectral | hessian | both | closed")
    parser.add_argument("--alpha", type=float, help="Override the kernel / density alpha")
    parser.add_argument("--z", type=float, help="Override the kernel / density z")
    parser.add_argument("--suite", action="append", help="Verification suite (repeatable)")
    parser.add_argument("--ledger", help="SQLite ledger file recording runs")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser.parse_args(argv)


def _run_config(args):
    config = load_and_validate_config(args.config) if args.config else RunConfig()
    suites = args.suite
    if args.command == "verify" and suites is None and not config.verify.get("suites"):
        suites = DEFAULT_SUITE
    return with_overrides(config, seed=args.seed, out=args.out, method=args.method,
                          alpha=args.alpha, z=args.z, suites=suites)


def _print_paths(paths):
    for path in paths:
        print(f"   📄 {path}")


def run_command(args, service):
    """
    Dispatch one subcommand.

    Returns:
        int: process exit code
    """
    if args.command == "runs":
        runs = service.list_runs()
        print(f"📊 {len(runs)} recorded run(s)")
        for run in runs:
            print(f"   #{run['id']} {run['command']:<10} {run['name']:<24} {run['status']:<10} {run['config_hash'][:12]}")
        return EXIT_OK

    if args.command == "ngd":
        if not args.config:
            raise CustomException("ngd needs --config")
        config = load_and_validate_ngd_config(args.config)
        if args.seed is not None or args.out is not None:
            data = config.to_dict()
            if args.seed is not None:
                data["seed"] = args.seed
            if args.out is not None:
                data["output"] = {**data["output"], "dir": args.out}
            config = type(config).from_dict(data)
        print("🔧 Running natural gradient descent...")
        outcome = service.ngd(config)
        result = outcome["result"]
        status = "converged" if result.converged else "stopped"
        print(f"✅ NGD {status} after {len(result.rows) - 1} iteration(s), loss {result.final_loss:.6e}")
        _print_paths(outcome["paths"])
        return EXIT_OK

    config = _run_config(args)

    if args.command == "compute":
        print(f"🔧 Computing information matrix ({config.method})...")
        outcome = service.compute(config)
        for info in outcome["results"]:
            print(f"   {info.method}: {info.kernel_label} on {info.family_label}, min eigenvalue {info.min_eigenvalue:.3e}")
        if outcome["max_deviation"] is not None:
            print(f"📊 Spectral vs Hessian max relative deviation: {outcome['max_deviation']:.3e}")
        _print_paths(outcome["paths"])
        print("✅ Compute complete!")
        return EXIT_OK

    if args.command == "verify":
        suites = config.verify["suites"]
        print(f"🔍 Running {len(suites)} verification suite(s) with seed {config.seed}...")
        outcome = service.verify(config)
        for report in outcome["reports"]:
            mark = "✅" if report.passed else "❌"
            print(f"   {mark} {report.name:<26} worst {report.worst_violation:.3e} (tol {report.tolerance:.1e}, "
                  f"{report.instances_run} instances)")
        _print_paths(outcome["paths"])
        if not outcome["passed"]:
            print("❌ Property failures found")
            return EXIT_PROPERTY_FAILURE
        print("✅ All properties hold!")
        return EXIT_OK

    if args.command == "sweep":
        print("🔧 Sweeping alpha-z kernels...")
        outcome = service.sweep(config)
        print(f"📊 {len(outcome['rows'])} rows written")
        _print_paths(outcome["paths"])
        return EXIT_OK

    print(f"🔧 Sampling densities for alpha={config.densities['alpha']}, z={config.densities['z']}...")
    outcome = service.densities(config)
    for name, mass in outcome["mass"].items():
        print(f"   mass of {name}: {mass:.8f}")
    _print_paths(outcome["paths"])
    return EXIT_OK


def main(argv=None):
    args = parse_arguments(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(asctime)s %(name)s %(levelname)s %(message)s")

    db = None
    try:
        print(f"🚀 Starting {args.command}...")
        if args.command == "runs" and not args.ledger:
            raise CustomException("runs needs --ledger")
        if args.ledger:
            db = SqlDb(args.ledger)
            db.create_indexes()
        return run_command(args, RunService(db))
    except CustomException as e:
        print(f"❌ Error: {e.message}")
        return exit_code_for(e)
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"❌ Numerical error: {e}")
        return EXIT_NUMERICAL
    except Exception as e:
        print(f"❌ Unexpected error: {e}")
        return EXIT_UNEXPECTED
    finally:
        if db is not None:
            db.close()


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""
Property verification tests: Loewner checks, named suites, seeding and
perturbation detection.
"""

import unittest
import os
import sys

import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.family_service import random_density_matrix, random_thermal_family
from services.divergence_service import depolarizing_channel
from services.kernel_service import alpha_z_kernel, kubo_mori_kernel
from services.verify_service import (
    DEFAULT_SUITE,
    check_dp_info,
    check_loewner,
    check_renyi_value_orderings,
    run_suite,
    run_suites,
)
from utils.exception import UnsupportedError, ValidationError


class TestLoewner(unittest.TestCase):

    def test_ordered_pair_passes(self):
        print("\n🧪 Testing Loewner check...")
        report = check_loewner(np.eye(2), np.diag([2.0, 1.0]))
        self.assertTrue(report.passed)
        self.assertLessEqual(report.worst_violation, 0.0)
        print("✅ I <= diag(2, 1)")

    def test_reversed_pair_fails(self):
        report = check_loewner(np.diag([2.0, 1.0]), np.eye(2))
        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.worst_violation, 0.5, places=12)

    def test_shape_mismatch(self):
        with self.assertRaises(ValidationError):
            check_loewner(np.eye(2), np.eye(3))


class TestDirectChecks(unittest.TestCase):

    def test_renyi_value_orderings(self):
        rng = np.random.default_rng(101)
        rho, sigma = random_density_matrix(3, rng), random_density_matrix(3, rng)
        for alpha in (0.4, 2.0):
            self.assertTrue(check_renyi_value_orderings(rho, sigma, alpha).passed)

    def test_dp_outside_region_needs_exploratory(self):
        print("\n🧪 Testing data-processing region guard...")
        rng = np.random.default_rng(103)
        family = random_thermal_family(2, 1, rng)
        channel = depolarizing_channel(2, 0.3)
        kernel = alpha_z_kernel(0.3, 0.1)
        with self.assertRaises(UnsupportedError):
            check_dp_info(family, [0.2], channel, kernel)
        report = check_dp_info(family, [0.2], channel, kernel, exploratory=True)
        self.assertEqual(report.name, "dp_info_exploratory")
        self.assertTrue(check_dp_info(family, [0.2], channel, kubo_mori_kernel()).passed)
        print("✅ Exploratory scans are labelled and opt-in")


class TestSuites(unittest.TestCase):

    def test_suites_pass(self):
        print("\n🧪 Testing named suites on small instance counts...")
        names = ["km_rld_ordering", "petz_ordering", "renyi_value_orderings", "cq_decomposition",
                 "thermal_closed_form", "data_processing"]
        for report in run_suites(names, seed=5, instances=3):
            self.assertTrue(report.passed, f"{report.name}: {report.details}")
            self.assertEqual(report.instances_run, 3)
            self.assertEqual(report.seed, 5)
        print("✅ All suites pass")

    def test_oracle_suite_passes(self):
        report = run_suite("oracle_equivalence", seed=11, instances=2)
        self.assertTrue(report.passed, report.details)

    def test_same_seed_is_deterministic(self):
        first = run_suite("sandwiched_ordering", seed=17, instances=4, max_workers=1)
        second = run_suite("sandwiched_ordering", seed=17, instances=4, max_workers=4)
        self.assertEqual(first.to_dict(), second.to_dict())

    def test_perturbed_kernel_is_detected(self):
        print("\n🧪 Testing oracle suite against a perturbed kernel...")
        report = run_suite("oracle_equivalence", seed=42, instances=4, kernel_perturbation=1.01)
        self.assertFalse(report.passed)
        self.assertTrue(report.details)
        self.assertIn("instance", report.details[0])
        print("✅ A 1% kernel perturbation is reported as a failure")

    def test_unknown_and_empty(self):
        with self.assertRaises(ValidationError):
            run_suite("guess")
        with self.assertRaises(ValidationError):
            run_suites(["km_rld_ordering", "guess"])
        self.assertEqual(run_suites([]), [])
        self.assertIn("oracle_equivalence", DEFAULT_SUITE)


if __name__ == "__main__":
    unittest.main()

#!/usr/bin/env python3
"""
Natural gradient descent tests on small thermal families.
"""

import unittest
import os
import sys

import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.config_service import load_and_validate_ngd_config
from services.family_service import ThermalFamily, random_density_matrix, random_thermal_family
from services.kernel_service import kubo_mori_kernel, rld_kernel
from services.ngd_service import loss_gradient, natural_gradient_descent, ngd_loss, run_ngd
from utils.exception import NumericalError, ValidationError

X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class TestGradient(unittest.TestCase):

    def test_analytic_matches_fd(self):
        print("\n🧪 Testing loss gradient...")
        rng = np.random.default_rng(113)
        family = random_thermal_family(3, 2, rng)
        target = random_density_matrix(3, rng)
        theta = np.array([0.2, -0.6])
        analytic = loss_gradient(family, target, theta, mode="analytic")
        fd = loss_gradient(family, target, theta, mode="fd")
        np.testing.assert_allclose(analytic, fd, atol=1e-7)
        with self.assertRaises(ValidationError):
            loss_gradient(family, target, theta, mode="guess")
        print("✅ <H_i>_target - <H_i>_rho equals the finite difference")

    def test_loss_vanishes_at_target(self):
        family = ThermalFamily([X, Z])
        target = family.evaluate([0.3, 0.1])
        self.assertAlmostEqual(ngd_loss(family, target, [0.3, 0.1]), 0.0, places=12)


class TestDescent(unittest.TestCase):

    def test_zero_learning_rate_keeps_theta(self):
        family = ThermalFamily([X, Z])
        target = family.evaluate([0.8, -0.5])
        result = natural_gradient_descent(family, target, [0.1, 0.2], kubo_mori_kernel(), learning_rate=0.0,
                                          iterations=3)
        np.testing.assert_array_equal(result.theta, [0.1, 0.2])
        self.assertEqual(len(result.rows), 4)
        self.assertEqual(result.rows[0]["loss"], result.rows[-1]["loss"])

    def test_converges_on_qubit(self):
        print("\n🧪 Testing NGD convergence on a qubit Boltzmann machine...")
        family = ThermalFamily([X, Z])
        target = family.evaluate([0.8, -0.5])
        result = natural_gradient_descent(family, target, [0.0, 0.0], kubo_mori_kernel(), learning_rate=0.5,
                                          iterations=100)
        self.assertTrue(result.converged)
        self.assertLess(result.final_loss, 1e-10)
        np.testing.assert_allclose(result.theta, [0.8, -0.5], atol=1e-3)
        losses = [row["loss"] for row in result.rows]
        self.assertTrue(all(b <= a + 1e-15 for a, b in zip(losses, losses[1:])))
        print(f"✅ Converged in {len(result.rows) - 1} iterations")

    def test_other_metric_still_descends(self):
        family = ThermalFamily([X, Z])
        target = family.evaluate([0.4, 0.3])
        result = natural_gradient_descent(family, target, [0.0, 0.0], rld_kernel(), learning_rate=0.2,
                                          iterations=20, gradient="analytic")
        self.assertLess(result.rows[-1]["loss"], result.rows[0]["loss"])

    def test_singular_metric(self):
        print("\n🧪 Testing singular metric handling...")
        family = ThermalFamily([Z, Z])
        target = family.evaluate([0.5, 0.5])
        with self.assertRaises(NumericalError):
            natural_gradient_descent(family, target, [0.0, 0.0], kubo_mori_kernel(), iterations=5)
        damped = natural_gradient_descent(family, target, [0.0, 0.0], kubo_mori_kernel(), iterations=5,
                                          damping=0.1)
        self.assertLess(damped.rows[-1]["loss"], damped.rows[0]["loss"])
        print("✅ Singular metric raises unless damped")

    def test_rejects_non_thermal(self):
        from services.family_service import random_time_evolved_family
        family = random_time_evolved_family(2, 1, np.random.default_rng(5))
        with self.assertRaises(ValidationError):
            natural_gradient_descent(family, np.eye(2) / 2, [0.0], kubo_mori_kernel())

    def test_run_from_config(self):
        config = load_and_validate_ngd_config(os.path.join(ROOT, "configs", "ngd_qbm.json"))
        result = run_ngd(config)
        self.assertTrue(result.converged)
        np.testing.assert_allclose(result.theta, [0.8, -0.5], atol=1e-3)


if __name__ == "__main__":
    unittest.main()

#!/usr/bin/env python3
"""
Zeta kernel tests: closed forms, symmetries, limits and integral representations.
"""

import unittest
import os
import sys

import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.divergence_service import RenyiParams
from services.kernel_service import (
    alpha_z_kernel,
    custom_kernel,
    kernel_from_spec,
    kubo_mori_kernel,
    mc_function_petz,
    mc_function_sandwiched,
    operator_monotone_candidate,
    petz_kernel,
    rld_kernel,
    sandwiched_kernel,
    zeta_alpha_z,
    zeta_kubo_mori,
    zeta_petz,
    zeta_petz_integral,
    zeta_rld,
    zeta_sandwiched,
    zeta_sandwiched_integral,
)
from utils.exception import DomainError, ValidationError

PAIRS = [(2.0, 1.0), (0.75, 0.25), (1e-3, 0.9), (5.0, 4.999)]


class TestKernelValues(unittest.TestCase):

    def test_kubo_mori_and_rld(self):
        print("\n🧪 Testing Kubo-Mori and RLD kernels...")
        self.assertAlmostEqual(zeta_kubo_mori(2.0, 1.0), np.log(2.0), places=14)
        self.assertAlmostEqual(zeta_kubo_mori(0.5, 0.5), 2.0, places=14)
        self.assertAlmostEqual(zeta_rld(2.0, 1.0), 0.75, places=14)
        print("✅ Closed forms reproduced")

    def test_symmetry_and_homogeneity(self):
        print("\n🧪 Testing symmetry and scaling...")
        kernels = [kubo_mori_kernel(), rld_kernel(), alpha_z_kernel(0.3, 0.7), alpha_z_kernel(2.0, 1.5),
                   petz_kernel(0.25), sandwiched_kernel(3.0)]
        for kernel in kernels:
            for x, y in PAIRS:
                self.assertAlmostEqual(kernel(x, y), kernel(y, x), delta=1e-14 * kernel(x, y))
                scaled = kernel(7.0 * x, 7.0 * y)
                self.assertAlmostEqual(scaled * 7.0 / kernel(x, y), 1.0, places=10)
        print("✅ zeta(x, y) = zeta(y, x) and zeta(cx, cy) = zeta(x, y) / c")

    def test_diagonal_value(self):
        for kernel in (alpha_z_kernel(0.4, 2.0), petz_kernel(3.0), sandwiched_kernel(0.2)):
            self.assertAlmostEqual(kernel(0.3, 0.3), 1.0 / 0.3, places=12)

    def test_special_cases(self):
        print("\n🧪 Testing kernel coincidences...")
        for x, y in PAIRS:
            # Petz alpha = 2 is the RLD kernel
            self.assertAlmostEqual(zeta_petz(x, y, 2.0) / zeta_rld(x, y), 1.0, places=10)
            # sandwiched alpha = 1/2 is 2 / (x + y)
            self.assertAlmostEqual(zeta_sandwiched(x, y, 0.5) * (x + y) / 2.0, 1.0, places=10)
            # sandwiched alpha = 2 is 1 / sqrt(xy)
            self.assertAlmostEqual(zeta_sandwiched(x, y, 2.0) * np.sqrt(x * y), 1.0, places=10)
            # z = 1 is Petz, z = alpha is sandwiched
            self.assertAlmostEqual(zeta_alpha_z(x, y, RenyiParams(0.3, 1.0)) / zeta_petz(x, y, 0.3), 1.0, places=10)
            self.assertAlmostEqual(
                zeta_alpha_z(x, y, RenyiParams(1.7, 1.7)) / zeta_sandwiched(x, y, 1.7), 1.0, places=10
            )
        print("✅ Petz, sandwiched and RLD coincidences hold")

    def test_continuity_across_cluster_switch(self):
        kernel = alpha_z_kernel(0.6, 0.8)
        x = 1.3
        inside = kernel(x * (1 + 1e-9), x)
        outside = kernel(x * (1 + 1e-6), x)
        self.assertAlmostEqual(inside / outside, 1.0, places=5)

    def test_extreme_ratio_stays_finite(self):
        for kernel in (alpha_z_kernel(0.5, 0.1), petz_kernel(0.05), sandwiched_kernel(8.0)):
            value = kernel(1.0, 1e-14)
            self.assertTrue(np.isfinite(value))
            self.assertGreater(value, 0.0)


class TestKernelLimits(unittest.TestCase):

    def test_alpha_one_is_kubo_mori(self):
        print("\n🧪 Testing alpha -> 1 limit...")
        kernel = alpha_z_kernel(1.0, 0.5)
        self.assertEqual(kernel.metadata.get("limit"), "kubo_mori")
        self.assertAlmostEqual(kernel(2.0, 1.0), np.log(2.0), places=14)
        near = alpha_z_kernel(1.0 + 1e-4, 0.5)
        self.assertAlmostEqual(near(2.0, 1.0) / np.log(2.0), 1.0, places=3)
        print("✅ Kubo-Mori recovered at and near alpha = 1")

    def test_large_z_is_kubo_mori(self):
        kernel = alpha_z_kernel(0.4, 1e8)
        self.assertEqual(kernel.metadata.get("limit"), "kubo_mori")
        far = alpha_z_kernel(0.4, 1e4)
        self.assertAlmostEqual(far(3.0, 1.0) / zeta_kubo_mori(3.0, 1.0), 1.0, places=3)

    def test_domain_errors(self):
        with self.assertRaises(DomainError):
            kubo_mori_kernel()(0.0, 1.0)
        with self.assertRaises(DomainError):
            alpha_z_kernel(0.5, 0.5)(-1.0, 1.0)
        with self.assertRaises(ValidationError):
            alpha_z_kernel(-0.5, 1.0)


class TestKernelFactories(unittest.TestCase):

    def test_kernel_from_spec(self):
        print("\n🧪 Testing kernel construction from config...")
        self.assertEqual(kernel_from_spec({"label": "kubo_mori"}).name, "kubo_mori")
        self.assertEqual(kernel_from_spec({"label": "petz", "alpha": 0.5}).label, "petz(0.5)")
        self.assertEqual(kernel_from_spec({"label": "alpha_z", "alpha": 0.5, "z": 2}).z, 2.0)
        with self.assertRaises(ValidationError):
            kernel_from_spec({"label": "sld"})
        with self.assertRaises(ValidationError):
            kernel_from_spec({"label": "alpha_z", "alpha": 0.5})
        with self.assertRaises(ValidationError):
            kernel_from_spec({"label": "sandwiched"})
        print("✅ Labels and parameters validated")

    def test_scaled_and_perturbed(self):
        base = rld_kernel()
        scaled = base.scaled(2.0)
        self.assertEqual(scaled.kappa, 2.0)
        self.assertAlmostEqual(scaled(2.0, 1.0), 1.5, places=14)
        self.assertAlmostEqual(scaled(1.0, 1.0), 2.0, places=14)
        perturbed = base.perturbed(1.01)
        self.assertEqual(perturbed.kappa, 1.0)
        self.assertAlmostEqual(perturbed(2.0, 1.0), 0.75 * 1.01, places=14)
        self.assertAlmostEqual(perturbed(1.0, 1.0), 1.0, places=14)

    def test_custom_kernel(self):
        kernel = custom_kernel(lambda x, y: 2.0 / (x + y), label="sld")
        self.assertAlmostEqual(kernel(3.0, 1.0), 0.5, places=14)
        with self.assertRaises(ValidationError):
            custom_kernel(lambda x, y: x, kappa=0.0)

    def test_monotone_functions(self):
        params = RenyiParams(0.3, 0.6)
        self.assertAlmostEqual(operator_monotone_candidate(1.0, params), 1.0, places=12)
        self.assertAlmostEqual(mc_function_petz(1.0, 0.5), 1.0, places=12)
        # sandwiched alpha = 1/2: 1 / zeta(x, 1) = (x + 1) / 2
        self.assertAlmostEqual(mc_function_sandwiched(3.0, 0.5), 2.0, places=10)
        # alpha = 1/4, x = 2: (3/4)(2^4 - 1) / (2^3 - 1)
        self.assertAlmostEqual(mc_function_sandwiched(2.0, 0.25), 0.75 * 15.0 / 7.0, places=10)
        # f(t) = t f(1/t) for symmetric monotone metrics
        for t in (0.2, 3.0):
            self.assertAlmostEqual(operator_monotone_candidate(t, params),
                                   t * operator_monotone_candidate(1.0 / t, params), places=10)


class TestIntegralRepresentations(unittest.TestCase):

    def test_petz_integral(self):
        print("\n🧪 Testing integral representations...")
        for alpha in (0.2, 0.5, 0.8):
            for x, y in [(2.0, 1.0), (0.75, 0.25), (0.4, 0.4)]:
                self.assertAlmostEqual(zeta_petz_integral(x, y, alpha) / zeta_petz(x, y, alpha), 1.0, places=7)
        print("✅ Petz kernel from two power integrals")

    def test_sandwiched_integral(self):
        for alpha in (0.3, 0.6):
            for x, y in [(2.0, 1.0), (0.75, 0.25)]:
                self.assertAlmostEqual(
                    zeta_sandwiched_integral(x, y, alpha) / zeta_sandwiched(x, y, alpha), 1.0, places=7
                )

    def test_integral_requires_unit_interval(self):
        with self.assertRaises(ValidationError):
            zeta_petz_integral(2.0, 1.0, 1.5)
        with self.assertRaises(ValidationError):
            zeta_sandwiched_integral(2.0, 1.0, 0.0)


if __name__ == "__main__":
    unittest.main()

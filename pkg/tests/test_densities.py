#!/usr/bin/env python3
"""
Density tests: tent densities, their characteristic functions, spectral
weights and the numeric Fourier transform.
"""

import unittest
import os
import sys

import numpy as np

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.divergence_service import RenyiParams
from services.density_service import (
    alpha_z_tent,
    alpha_z_tent_coth_form,
    alpha_z_tent_density,
    char_fn_alpha_z,
    convolve_densities,
    convolved_density,
    convolved_mass,
    default_window,
    density_mass,
    high_peak_tent,
    high_peak_tent_density,
    numeric_fourier,
    tanhc,
    thermal_weight,
    time_evolved_weight,
)
from services.kernel_service import alpha_z_kernel, kubo_mori_kernel, rld_kernel
from utils.exception import DomainError, UnsupportedError


class TestDensityValues(unittest.TestCase):

    def test_high_peak_tent_value(self):
        print("\n🧪 Testing high-peak tent values...")
        t = 1.0
        expected = 2.0 / np.pi * np.log(1.0 / np.tanh(np.pi / 2.0))
        self.assertAlmostEqual(high_peak_tent(t), expected, places=14)
        self.assertAlmostEqual(high_peak_tent(-t), expected, places=14)
        self.assertTrue(np.isfinite(high_peak_tent(40.0)))
        print("✅ p(t) matches (2/pi) ln coth(pi|t|/2)")

    def test_alpha_z_forms_agree(self):
        params = RenyiParams(0.3, 0.7)
        for t in (0.05, 0.5, 2.0, -1.3):
            self.assertAlmostEqual(alpha_z_tent(t, params) / alpha_z_tent_coth_form(t, params), 1.0, places=10)

    def test_half_half_tent_is_high_peak_tent(self):
        # p_{1/2, 1/2}(t) = (2/pi) ln coth(pi|t|/2)
        params = RenyiParams(0.5, 0.5)
        grid = np.array([0.1, 0.8, 3.0])
        np.testing.assert_allclose(alpha_z_tent(grid, params), high_peak_tent(grid), rtol=1e-12)

    def test_singularity_and_parameter_errors(self):
        print("\n🧪 Testing density domain errors...")
        with self.assertRaises(DomainError):
            high_peak_tent(0.0)
        with self.assertRaises(DomainError):
            alpha_z_tent(np.array([0.5, 0.0]), RenyiParams(0.5, 1.0))
        with self.assertRaises(UnsupportedError):
            alpha_z_tent(0.5, RenyiParams(1.5, 1.0))
        with self.assertRaises(UnsupportedError):
            alpha_z_tent_density(RenyiParams(2.0, 2.0))
        print("✅ t = 0 and alpha outside (0, 1) rejected")

    def test_default_window(self):
        self.assertEqual(default_window(2.0), 10.0)
        self.assertEqual(default_window(0.25), 40.0)


class TestCharacteristicFunctions(unittest.TestCase):

    def test_series_branches_are_continuous(self):
        params = RenyiParams(0.3, 0.6)
        self.assertAlmostEqual(tanhc(0.0), 1.0, places=15)
        self.assertAlmostEqual(tanhc(9.9e-7), tanhc(1.01e-6), places=11)
        self.assertAlmostEqual(char_fn_alpha_z(0.0, params), 1.0, places=15)
        self.assertAlmostEqual(char_fn_alpha_z(9.9e-7, params), char_fn_alpha_z(1.01e-6, params), places=11)
        self.assertAlmostEqual(char_fn_alpha_z(-2.0, params), char_fn_alpha_z(2.0, params), places=15)

    def test_thermal_weight_factorizes(self):
        print("\n🧪 Testing thermal weight factorization...")
        params = RenyiParams(0.4, 1.3)
        kernel = alpha_z_kernel(params.alpha, params.z)
        omega = np.array([0.3, 1.0, 4.0, 25.0])
        np.testing.assert_allclose(
            thermal_weight(omega, kernel), char_fn_alpha_z(omega, params) * tanhc(omega), rtol=1e-10
        )
        self.assertEqual(thermal_weight(0.0, kernel), 1.0)
        print("✅ thermal weight = f_{a,z}(w) tanh(w/2)/(w/2)")

    def test_time_evolved_weight_is_char_fn(self):
        params = RenyiParams(0.7, 0.5)
        omega = np.array([0.2, 2.0, 9.0])
        np.testing.assert_allclose(
            time_evolved_weight(omega, alpha_z_kernel(params.alpha, params.z)), char_fn_alpha_z(omega, params),
            rtol=1e-10,
        )

    def test_named_kernel_weights(self):
        # Kubo-Mori: w = 1 in time; RLD: cosh-type growth
        omega = 1.5
        self.assertAlmostEqual(time_evolved_weight(omega, kubo_mori_kernel()), 1.0, places=12)
        expected = 0.5 * (np.exp(omega) + 1.0) * (1.0 - np.exp(-omega)) / omega
        self.assertAlmostEqual(time_evolved_weight(omega, rld_kernel()), expected, places=12)


class TestNumericFourier(unittest.TestCase):

    def test_high_peak_tent_transform(self):
        print("\n🧪 Testing numeric Fourier transform of p...")
        density = high_peak_tent_density()
        self.assertAlmostEqual(density_mass(density), 1.0, places=6)
        for omega in (0.5, 2.0, 6.0):
            value = numeric_fourier(density, omega)
            self.assertAlmostEqual(value.real, tanhc(omega), places=6)
            self.assertAlmostEqual(value.imag, 0.0, places=9)
        print("✅ Quadrature reproduces tanh(w/2)/(w/2)")

    def test_alpha_z_tent_transform(self):
        print("\n🧪 Testing numeric Fourier transform of p_{a,z}...")
        for params in (RenyiParams(0.5, 0.25), RenyiParams(0.2, 1.5)):
            density = alpha_z_tent_density(params)
            self.assertAlmostEqual(density_mass(density), 1.0, places=6)
            for omega in (1.0, 3.0):
                self.assertAlmostEqual(numeric_fourier(density, omega).real, char_fn_alpha_z(omega, params), places=6)
        print("✅ Quadrature reproduces f_{a,z}")

    def test_convolution_is_even_and_positive(self):
        values = convolve_densities(0.5, 1.0, np.array([-0.7, 0.7, 2.0]))
        self.assertAlmostEqual(values[0], values[1], places=8)
        self.assertTrue(np.all(values > 0))
        self.assertGreater(values[1], values[2])


class TestNormalization(unittest.TestCase):

    SETTINGS = ((0.25, 0.5), (0.5, 0.5), (0.5, 1.0), (0.75, 3.0))

    def test_alpha_z_tent_has_unit_mass(self):
        print("\n🧪 Testing p_{a,z} normalization...")
        for alpha, z in self.SETTINGS:
            params = RenyiParams(alpha, z)
            self.assertAlmostEqual(density_mass(alpha_z_tent_density(params)), 1.0, places=6, msg=(alpha, z))
        print("✅ Every p_{a,z} integrates to one")

    def test_convolution_has_unit_mass(self):
        print("\n🧪 Testing q_{a,z} normalization...")
        for alpha, z in self.SETTINGS:
            params = RenyiParams(alpha, z)
            self.assertAlmostEqual(convolved_mass(params), 1.0, places=5, msg=(alpha, z))
            self.assertAlmostEqual(convolved_density(params).char_fn(0.0), 1.0, places=12)
        print("✅ Every q_{a,z} integrates to one")

    def test_convolution_mass_matches_direct_quadrature(self):
        params = RenyiParams(0.5, 0.5)
        self.assertAlmostEqual(density_mass(convolved_density(params)), convolved_mass(params), places=4)


if __name__ == "__main__":
    unittest.main()

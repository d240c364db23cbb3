#!/usr/bin/env python3
"""
Matrix core tests: Hermitian validation, clustered eigendecomposition,
divided differences and matrix-function derivatives.
"""

import unittest
import os
import sys

import numpy as np
from scipy import linalg

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.matcore_service import (
    EXP,
    LOG,
    SQRT,
    ScalarFunction,
    apply_function,
    divided_difference,
    divided_difference_matrix,
    duhamel_exp_derivative,
    eig_hermitian,
    hermitian,
    log_derivative_integral,
    matrix_derivative,
    power_derivative,
    power_integral,
    trace_function_derivative,
)
from utils.exception import DomainError, ValidationError


def _random_hermitian(rng, dim):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (x + x.conj().T)


def _random_positive(rng, dim):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return x @ x.conj().T + 0.5 * np.eye(dim)


class TestHermitian(unittest.TestCase):
    """Hermitian validation and eigendecomposition."""

    def test_rejects_non_hermitian(self):
        print("\n🧪 Testing non-Hermitian rejection...")
        with self.assertRaises(ValidationError):
            hermitian([[1.0, 2.0], [0.0, 1.0]])
        with self.assertRaises(ValidationError):
            hermitian([[1.0, 2.0, 3.0]])
        sym = hermitian([[1.0, 2.0], [0.0, 1.0]], symmetrize=True)
        np.testing.assert_allclose(sym, [[1.0, 1.0], [1.0, 1.0]])
        print("✅ Non-Hermitian input rejected")

    def test_reconstruction(self):
        print("\n🧪 Testing spectral reconstruction...")
        rng = np.random.default_rng(3)
        a = _random_hermitian(rng, 4)
        spectrum = eig_hermitian(a)
        np.testing.assert_allclose(spectrum.reconstruct(), a, atol=1e-12)
        np.testing.assert_allclose(spectrum.projectors.sum(axis=0), np.eye(4), atol=1e-12)
        print("✅ Projectors sum to identity and reconstruct A")

    def test_degenerate_cluster(self):
        print("\n🧪 Testing eigenvalue clustering...")
        a = np.diag([1.0, 1.0 + 1e-12, 2.0])
        spectrum = eig_hermitian(a)
        self.assertEqual(len(spectrum.eigenvalues), 2)
        np.testing.assert_allclose(spectrum.projectors[0], np.diag([1.0, 1.0, 0.0]), atol=1e-12)
        self.assertEqual(spectrum.cluster_values.shape, (3,))
        print("✅ Near-degenerate eigenvalues merged into one projector")

    def test_negative_cluster_tolerance(self):
        with self.assertRaises(ValidationError):
            eig_hermitian(np.eye(2), cluster_tol=-1.0)


class TestDividedDifferences(unittest.TestCase):
    """Divided differences and derivative formulas."""

    def test_log_divided_difference(self):
        print("\n🧪 Testing log divided differences...")
        self.assertAlmostEqual(divided_difference(LOG, 2.0, 1.0), np.log(2.0), places=14)
        self.assertAlmostEqual(divided_difference(LOG, 1.0, 2.0), np.log(2.0), places=14)
        self.assertAlmostEqual(divided_difference(LOG, 3.0, 3.0), 1.0 / 3.0, places=14)
        print("✅ f^[1] is symmetric with the derivative on the diagonal")

    def test_close_points_continuous(self):
        x = 1.7
        near = divided_difference(EXP, x, x + 1e-10)
        self.assertAlmostEqual(near, np.exp(x), places=8)

    def test_matrix_matches_scalar(self):
        points = np.array([0.2, 0.7, 0.7 + 1e-13, 3.0])
        matrix = divided_difference_matrix(LOG, points)
        for k in range(4):
            for l in range(4):
                self.assertAlmostEqual(matrix[k, l], divided_difference(LOG, points[k], points[l]), places=12)

    def test_domain_error(self):
        with self.assertRaises(DomainError):
            divided_difference(LOG, -1.0, 2.0)
        with self.assertRaises(DomainError):
            LOG([0.0, 1.0])

    def test_apply_function(self):
        rng = np.random.default_rng(5)
        a = _random_positive(rng, 3)
        np.testing.assert_allclose(apply_function(eig_hermitian(a), SQRT), linalg.sqrtm(a), atol=1e-10)

    def test_exp_derivative_matches_finite_difference(self):
        print("\n🧪 Testing Duhamel derivative of exp...")
        rng = np.random.default_rng(11)
        a, d = _random_hermitian(rng, 3), _random_hermitian(rng, 3)
        h = 1e-6
        fd = (linalg.expm(a + h * d) - linalg.expm(a - h * d)) / (2 * h)
        spectral = duhamel_exp_derivative(eig_hermitian(a), d)
        quadrature = duhamel_exp_derivative(eig_hermitian(a), d, method="quadrature")
        np.testing.assert_allclose(spectral, fd, atol=1e-7)
        np.testing.assert_allclose(quadrature, spectral, atol=1e-9)
        print("✅ Spectral and quadrature paths agree with finite differences")

    def test_log_derivative_paths_agree(self):
        rng = np.random.default_rng(13)
        a, d = _random_positive(rng, 3), _random_hermitian(rng, 3)
        spectrum = eig_hermitian(a)
        spectral = log_derivative_integral(spectrum, d)
        quadrature = log_derivative_integral(spectrum, d, method="quadrature")
        np.testing.assert_allclose(quadrature, spectral, atol=1e-8)
        np.testing.assert_allclose(matrix_derivative(spectrum, d, LOG), spectral, atol=1e-14)

    def test_power_derivative_paths_agree(self):
        print("\n🧪 Testing fractional power derivatives...")
        rng = np.random.default_rng(17)
        a, d = _random_positive(rng, 3), _random_hermitian(rng, 3)
        spectrum = eig_hermitian(a)
        for r in (0.3, -0.4):
            spectral = power_derivative(spectrum, d, r)
            quadrature = power_derivative(spectrum, d, r, method="quadrature")
            np.testing.assert_allclose(quadrature, spectral, atol=1e-8)
        print("✅ Integral representation matches the spectral path")

    def test_power_integral_closed_form(self):
        # J(r; x, x) = pi r x^{r-1} / sin(pi r)
        r, x = 0.4, 2.0
        expected = np.pi * r * x ** (r - 1.0) / np.sin(np.pi * r)
        self.assertAlmostEqual(power_integral(r, x, x), expected, places=8)
        with self.assertRaises(ValidationError):
            power_integral(1.0, 1.0, 2.0)

    def test_invalid_method(self):
        with self.assertRaises(ValidationError):
            duhamel_exp_derivative(eig_hermitian(np.eye(2)), np.eye(2), method="simpson")

    def test_trace_function_derivative(self):
        rng = np.random.default_rng(19)
        a, d = _random_positive(rng, 3), _random_hermitian(rng, 3)
        square = ScalarFunction.power(2)
        expected = 2.0 * float(np.real(np.trace(a @ d)))
        self.assertAlmostEqual(trace_function_derivative(eig_hermitian(a), d, square), expected, places=10)


if __name__ == "__main__":
    unittest.main()

"""
Matrix core - Hermitian linear algebra and the divided-difference calculus.

Every spectral formula in the package goes through this module: eigendecomposition
with eigenvalue clustering, functions of Hermitian operators, and derivatives of
matrix functions along a Hermitian direction.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, linalg

from utils.exception import DomainError, NumericalError, ValidationError

logger = logging.getLogger(__name__)

HERMITIAN_ATOL = 1e-12
DEFAULT_CLUSTER_TOL = 1e-8
QUADRATURE_EPSABS = 1e-12
QUADRATURE_EPSREL = 1e-11
QUADRATURE_ACCEPT = 1e-8

# Valid scalar-function domains
VALID_DOMAINS = ["real", "positive", "nonnegative"]

# Valid evaluation paths for the integral-representation derivatives
VALID_DERIVATIVE_METHODS = ["spectral", "quadrature"]

HermitianOperator = np.ndarray


def hermitian(matrix, symmetrize=False, atol=HERMITIAN_ATOL):
    """
    Validate a square complex matrix as a Hermitian operator.

    Args:
        matrix: array-like d x d
        symmetrize (bool): project onto the Hermitian part instead of rejecting
        atol (float): absolute asymmetry tolerance

    Returns:
        np.ndarray: complex Hermitian matrix

    Raises:
        ValidationError: wrong shape, non-finite entries, or asymmetry above atol
    """
    try:
        a = np.array(matrix, dtype=complex)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"Matrix is not numeric: {e}")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValidationError(f"Matrix must be square and non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("Matrix has non-finite entries")
    asymmetry = float(np.max(np.abs(a - a.conj().T)))
    if asymmetry > atol and not symmetrize:
        raise ValidationError(f"Matrix is not Hermitian (max |A - A^H| = {asymmetry:.3e})")
    return symmetrized(a)


def symmetrized(a):
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """
    A = sum_k eigenvalues[k] * projectors[k], clusters merged.

    `values`/`vectors` keep the raw per-eigenvector data from the solver and
    `labels[a]` is the cluster of eigenvector a.
    """
    eigenvalues: np.ndarray
    projectors: np.ndarray
    values: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray
    cluster_tolerance: float

    @property
    def dim(self):
        return self.vectors.shape[0]

    @property
    def cluster_values(self):
        """Cluster eigenvalue attached to every eigenvector."""
        return self.eigenvalues[self.labels]

    def reconstruct(self):
        return np.einsum("k,kij->ij", self.eigenvalues, self.projectors)

    def to_eigenbasis(self, x):
        return self.vectors.conj().T @ x @ self.vectors

    def from_eigenbasis(self, x):
        return self.vectors @ x @ self.vectors.conj().T

    def expand(self, cluster_matrix):
        """Lift a (clusters x clusters) coefficient matrix to eigenvector indices."""
        return cluster_matrix[np.ix_(self.labels, self.labels)]


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    label: str
    value: Callable
    derivative: Callable
    domain: str = "real"
    # stable (f(x) - f(y)) / (x - y) for arrays with x > y
    divided: Optional[Callable] = None

    def check_domain(self, points):
        points = np.asarray(points, dtype=float)
        if points.size == 0:
            return
        if self.domain == "positive" and np.any(points <= 0):
            raise DomainError(f"{self.label} requires positive arguments, got {points.min():.3e}")
        if self.domain == "nonnegative" and np.any(points < 0):
            raise DomainError(f"{self.label} requires nonnegative arguments, got {points.min():.3e}")

    def __call__(self, points):
        self.check_domain(points)
        return self.value(np.asarray(points, dtype=float))

    @classmethod
    def power(cls, r):
        """x^r; non-integer or negative exponents live on (0, inf)."""
        r = float(r)
        if r.is_integer() and r >= 0:
            return cls(
                label=f"x^{r:g}",
                value=lambda x: np.power(x, r),
                derivative=lambda x: r * np.power(x, r - 1) if r != 0 else np.zeros_like(x),
            )
        return cls(
            label=f"x^{r:g}",
            value=lambda x: np.power(x, r),
            derivative=lambda x: r * np.power(x, r - 1),
            domain="positive",
            divided=lambda x, y: np.power(y, r) * np.expm1(r * np.log1p((x - y) / y)) / (x - y),
        )


EXP = ScalarFunction(
    label="exp",
    value=np.exp,
    derivative=np.exp,
    divided=lambda x, y: np.exp(y) * np.expm1(x - y) / (x - y),
)

LOG = ScalarFunction(
    label="ln",
    value=np.log,
    derivative=lambda x: 1.0 / x,
    domain="positive",
    divided=lambda x, y: np.log1p((x - y) / y) / (x - y),
)

IDENTITY = ScalarFunction.power(1)
SQUARE = ScalarFunction.power(2)
SQRT = ScalarFunction.power(0.5)


def eig_hermitian(a, cluster_tol=DEFAULT_CLUSTER_TOL, symmetrize=False):
    """
    Eigendecomposition with clustering of (near-)degenerate eigenvalues.

    Neighbouring eigenvalues closer than cluster_tol * max(1, |lambda|) share one
    cluster whose value is their mean and whose projector is the summed projector.

    Raises:
        ValidationError: non-Hermitian input or negative tolerance
        NumericalError: the LAPACK solver failed
    """
    if cluster_tol < 0:
        raise ValidationError(f"cluster_tol must be nonnegative, got {cluster_tol}")
    a = hermitian(a, symmetrize=symmetrize)
    try:
        values, vectors = linalg.eigh(a)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Hermitian eigensolver failed: {e}")

    labels = np.zeros(len(values), dtype=int)
    for k in range(1, len(values)):
        same = values[k] - values[k - 1] <= cluster_tol * max(1.0, abs(values[k]))
        labels[k] = labels[k - 1] if same else labels[k - 1] + 1
    n_clusters = int(labels[-1]) + 1
    if n_clusters < len(values):
        logger.debug("Merged %d eigenvalues into %d clusters", len(values), n_clusters)

    eigenvalues = np.array([values[labels == c].mean() for c in range(n_clusters)])
    projectors = np.array([
        vectors[:, labels == c] @ vectors[:, labels == c].conj().T for c in range(n_clusters)
    ])
    return SpectralDecomposition(
        eigenvalues=eigenvalues,
        projectors=projectors,
        values=values,
        vectors=vectors,
        labels=labels,
        cluster_tolerance=float(cluster_tol),
    )


def apply_function(spectrum, f):
    """f(A) = sum_k f(lambda_k) Pi_k."""
    f.check_domain(spectrum.values)
    weights = f.value(spectrum.values)
    return symmetrized((spectrum.vectors * weights) @ spectrum.vectors.conj().T)


def divided_difference(f, x, y, tol=DEFAULT_CLUSTER_TOL):
    """
    First divided difference f^[1](x, y).

    Uses f'((x + y) / 2) when |x - y| <= tol * max(1, |x|, |y|). The value does not
    depend on the argument order.
    """
    f.check_domain([x, y])
    if abs(x - y) <= tol * max(1.0, abs(x), abs(y)):
        return float(f.derivative(np.float64(0.5 * (x + y))))
    hi, lo = np.float64(max(x, y)), np.float64(min(x, y))
    if f.divided is not None:
        return float(f.divided(hi, lo))
    return float((f.value(hi) - f.value(lo)) / (hi - lo))


def divided_difference_matrix(f, points, tol=DEFAULT_CLUSTER_TOL):
    """Matrix C[k, l] = f^[1](points[k], points[l]), same branches as divided_difference."""
    v = np.asarray(points, dtype=float)
    f.check_domain(v)
    x, y = v[:, None], v[None, :]
    hi = np.broadcast_to(np.maximum(x, y), (len(v), len(v)))
    lo = np.broadcast_to(np.minimum(x, y), (len(v), len(v)))
    close = np.abs(x - y) <= tol * np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))

    out = np.empty((len(v), len(v)))
    out[close] = f.derivative(0.5 * (x + y)[close])
    far = ~close
    if np.any(far):
        if f.divided is not None:
            out[far] = f.divided(hi[far], lo[far])
        else:
            out[far] = (f.value(hi[far]) - f.value(lo[far])) / (hi[far] - lo[far])
    return out


def _direction(spectrum, d_a):
    d_a = hermitian(d_a, symmetrize=True)
    if d_a.shape[0] != spectrum.dim:
        raise ValidationError(f"Direction has dimension {d_a.shape[0]}, operator has {spectrum.dim}")
    return d_a


def spectral_sandwich(spectrum, d_a, cluster_coefficients):
    """sum_{k,l} c[k, l] Pi_k dA Pi_l for a cluster coefficient matrix c."""
    full = spectrum.expand(cluster_coefficients)
    return spectrum.from_eigenbasis(full * spectrum.to_eigenbasis(d_a))


def matrix_derivative(spectrum, d_a, f):
    """
    Derivative of f(A(x)) along dA = dA/dx:
    sum_{k,l} f^[1](lambda_k, lambda_l) Pi_k dA Pi_l.
    """
    d_a = _direction(spectrum, d_a)
    coefficients = divided_difference_matrix(f, spectrum.eigenvalues, spectrum.cluster_tolerance)
    return symmetrized(spectral_sandwich(spectrum, d_a, coefficients))


def _quad_vec(integrand, what):
    result, error = integrate.quad_vec(
        integrand, 0.0, 1.0, epsabs=QUADRATURE_EPSABS, epsrel=QUADRATURE_EPSREL, limit=500
    )
    scale = max(1.0, float(np.max(np.abs(result))))
    if error > QUADRATURE_ACCEPT * scale:
        raise NumericalError(f"{what}: quadrature did not converge (estimated error {error:.3e})")
    logger.debug("%s: quadrature error estimate %.3e", what, error)
    return result


def _check_method(method):
    if method not in VALID_DERIVATIVE_METHODS:
        raise ValidationError(f"Invalid method '{method}'. Must be one of {VALID_DERIVATIVE_METHODS}")


def duhamel_exp_derivative(spectrum, d_a, method="spectral"):
    """
    d e^A = int_0^1 e^{tA} dA e^{(1-t)A} dt.

    The spectral path uses the exp divided differences; the quadrature path
    integrates e^{t lambda_k + (1-t) lambda_l} over t.
    """
    _check_method(method)
    if method == "spectral":
        return matrix_derivative(spectrum, d_a, EXP)
    d_a = _direction(spectrum, d_a)
    lam = spectrum.eigenvalues
    x, y = lam[:, None], lam[None, :]
    coefficients = _quad_vec(lambda t: np.exp(t * x + (1.0 - t) * y), "Duhamel integral")
    return symmetrized(spectral_sandwich(spectrum, d_a, coefficients))


def log_derivative_integral(spectrum, d_a, method="spectral"):
    """
    d ln A = int_0^inf (A + s)^{-1} dA (A + s)^{-1} ds for positive definite A.

    The quadrature path maps s = t / (1 - t) onto [0, 1).
    """
    _check_method(method)
    LOG.check_domain(spectrum.values)
    if method == "spectral":
        return matrix_derivative(spectrum, d_a, LOG)
    d_a = _direction(spectrum, d_a)
    lam = spectrum.eigenvalues
    x, y = lam[:, None], lam[None, :]
    coefficients = _quad_vec(
        lambda t: 1.0 / ((x * (1.0 - t) + t) * (y * (1.0 - t) + t)), "Resolvent integral"
    )
    return symmetrized(spectral_sandwich(spectrum, d_a, coefficients))


def power_integral(r, x, y):
    """
    J(r; x, y) = int_0^inf s^r / ((x + s)(y + s)) ds for r in (-1, 1), x, y > 0.

    [0, 1] is integrated with weight s^r, [1, inf) after s = 1/u with weight u^{-r}.
    """
    if not -1.0 < r < 1.0:
        raise ValidationError(f"power_integral needs r in (-1, 1), got {r}")
    if x <= 0 or y <= 0:
        raise DomainError(f"power_integral needs positive arguments, got ({x}, {y})")
    options = dict(epsabs=QUADRATURE_EPSABS, epsrel=QUADRATURE_EPSREL, limit=200)
    head, head_err = integrate.quad(
        lambda s: 1.0 / ((x + s) * (y + s)), 0.0, 1.0, weight="alg", wvar=(r, 0.0), **options
    )
    tail, tail_err = integrate.quad(
        lambda u: 1.0 / ((x * u + 1.0) * (y * u + 1.0)), 0.0, 1.0, weight="alg", wvar=(-r, 0.0), **options
    )
    total = head + tail
    error = head_err + tail_err
    if error > QUADRATURE_ACCEPT * max(1.0, abs(total)):
        raise NumericalError(
            f"Power integral J({r:g}; {x:.3e}, {y:.3e}) did not converge (estimated error {error:.3e})"
        )
    return total


def power_derivative(spectrum, d_a, r, method="spectral"):
    """
    Derivative of A^r along dA for positive definite A.

    For r in (-1, 0) or (0, 1) the quadrature path evaluates
    (sin(r pi) / pi) int_0^inf s^r (A + s)^{-1} dA (A + s)^{-1} ds.
    """
    _check_method(method)
    f = ScalarFunction.power(r)
    if np.any(spectrum.values <= 0):
        raise DomainError(f"power_derivative needs a positive definite operator, got {spectrum.values.min():.3e}")
    if method == "spectral":
        return matrix_derivative(spectrum, d_a, f)
    if not (-1.0 < r < 1.0) or r == 0:
        raise ValidationError(f"Quadrature path needs r in (-1, 0) or (0, 1), got {r}")
    d_a = _direction(spectrum, d_a)
    lam = spectrum.eigenvalues
    prefactor = np.sin(r * np.pi) / np.pi
    coefficients = np.empty((len(lam), len(lam)))
    for k in range(len(lam)):
        for l in range(k, len(lam)):
            coefficients[k, l] = coefficients[l, k] = prefactor * power_integral(r, lam[k], lam[l])
    return symmetrized(spectral_sandwich(spectrum, d_a, coefficients))


def trace_function_derivative(spectrum, d_a, f):
    """d/dx Tr f(A(x)) = Tr[f'(A) dA]."""
    d_a = _direction(spectrum, d_a)
    f.check_domain(spectrum.values)
    diagonal = np.real(np.diag(spectrum.to_eigenbasis(d_a)))
    return float(np.sum(f.derivative(spectrum.cluster_values) * diagonal))

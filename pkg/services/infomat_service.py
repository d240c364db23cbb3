"""
Information matrices - the generic spectral zeta engine and the paths it is
checked against: Hessians of divergences, Kubo-Mori/RLD alternative forms,
integral representations, pure states, classical Fisher and the
classical-quantum decomposition.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from services.family_service import (
    ClassicalQuantumFamily,
    ProbabilityFamily,
    PureStateFamily,
)
from services.kernel_service import (
    kubo_mori_kernel,
    rld_kernel,
    zeta_petz_integral,
    zeta_sandwiched_integral,
)
from services.matcore_service import (
    eig_hermitian,
    log_derivative_integral,
    symmetrized,
)
from utils.exception import UnsupportedError, ValidationError

logger = logging.getLogger(__name__)

SYMMETRY_ATOL = 1e-8
PSD_RTOL = 1e-8
HESSIAN_STEP = 3e-4
GRADIENT_STEP = 1e-4

# Valid information-matrix methods
VALID_METHODS = [
    "spectral",
    "hessian_fd",
    "integral_rep",
    "closed_form_thermal",
    "closed_form_time_evolved",
    "pure_state",
    "classical",
    "cq_decomposed",
]

# Valid Kubo-Mori evaluation paths
VALID_KM_PATHS = ["divided_difference", "log_derivative", "resolvent"]

# Kernels for which the classical-quantum decomposition is implemented
CQ_KERNELS = ["kubo_mori", "rld", "alpha_z", "petz", "sandwiched"]


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    """L x L real information matrix, symmetrized on construction."""
    values: np.ndarray
    kernel_label: str
    family_label: str
    theta: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.real_if_close(np.asarray(self.values), tol=1e6)
        if np.iscomplexobj(values):
            raise ValidationError(f"Information matrix has a complex part of size {np.max(np.abs(values.imag)):.3e}")
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != values.shape[1]:
            raise ValidationError(f"Information matrix must be square, got shape {values.shape}")
        if self.method not in VALID_METHODS:
            raise ValidationError(f"Invalid method '{self.method}'. Must be one of {VALID_METHODS}")
        asymmetry = float(np.max(np.abs(values - values.T))) if values.size else 0.0
        if asymmetry > SYMMETRY_ATOL * max(1.0, float(np.max(np.abs(values)))):
            logger.debug("%s/%s: symmetrizing an asymmetry of %.3e", self.kernel_label, self.method, asymmetry)
        object.__setattr__(self, "values", 0.5 * (values + values.T))
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))

    @property
    def size(self):
        return self.values.shape[0]

    @property
    def min_eigenvalue(self):
        return float(linalg.eigvalsh(self.values)[0])

    def is_psd(self, tol=PSD_RTOL):
        """min eigenvalue >= -tol * max(1, trace)."""
        return self.min_eigenvalue >= -tol * max(1.0, float(np.trace(self.values)))

    def relative_deviation(self, other):
        """max |A - B| / max(max|B|, 1e-300)."""
        other_values = other.values if isinstance(other, InfoMatrix) else np.asarray(other, dtype=float)
        if other_values.shape != self.values.shape:
            raise ValidationError(f"Shapes differ: {self.values.shape} and {other_values.shape}")
        scale = max(float(np.max(np.abs(other_values))), 1e-300)
        return float(np.max(np.abs(self.values - other_values))) / scale

    def to_dict(self):
        return {
            "values": self.values.tolist(),
            "kernel": self.kernel_label,
            "family": self.family_label,
            "theta": self.theta.tolist(),
            "method": self.method,
        }


def _kernel_matrix(spectrum, kernel):
    """zeta(lambda_a, lambda_b) for eigenvector indices, from the cluster values."""
    lam = spectrum.eigenvalues
    return spectrum.expand(kernel.evaluate(lam[:, None], lam[None, :]))


def _spectral_sum(spectrum, coefficients, derivatives):
    """Re sum_ab Z[a, b] D_i[a, b] D_j[b, a] over the eigenbasis."""
    rotated = np.array([spectrum.to_eigenbasis(d) for d in derivatives])
    return np.real(np.einsum("ab,iab,jba->ij", coefficients, rotated, rotated))


def info_spectral(family, theta, kernel):
    """
    [I]_ij = sum_{k,l} zeta(lambda_k, lambda_l) Tr[Pi_k d_i rho Pi_l d_j rho].

    Args:
        family: StateFamily valid (positive definite) at theta
        theta: parameter vector
        kernel: ZetaKernel

    Returns:
        InfoMatrix: method "spectral"
    """
    theta = family.parameters(theta)
    rho = family.evaluate(theta)
    spectrum = eig_hermitian(rho)
    values = _spectral_sum(spectrum, _kernel_matrix(spectrum, kernel), family.derivatives(theta))
    return InfoMatrix(values, kernel.label, family.label, theta, "spectral")


def info_hessian_oracle(family, theta, target, h=None):
    """
    Finite-difference Hessian of eps -> prefactor * D(rho(theta) || rho(theta + eps)) at eps = 0.

    Diagonal entries use (f(+h) + f(-h) - 2 f(0)) / h^2, mixed entries the 4-point
    stencil on (+-h e_i +- h e_j). Works for probability families with a classical target.
    """
    theta = family.parameters(theta)
    h = HESSIAN_STEP * max(1.0, float(np.max(np.abs(theta)))) if h is None else float(h)
    base = family.evaluate(theta)
    n = family.param_dim

    def f(step):
        return target(base, family.evaluate(theta + step))

    f0 = f(np.zeros(n))
    values = np.zeros((n, n))
    unit = np.eye(n) * h
    for i in range(n):
        values[i, i] = (f(unit[i]) + f(-unit[i]) - 2.0 * f0) / h ** 2
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = (
                f(unit[i] + unit[j]) - f(unit[i] - unit[j]) - f(-unit[i] + unit[j]) + f(-unit[i] - unit[j])
            ) / (4.0 * h ** 2)
    return InfoMatrix(values, target.label, family.label, theta, "hessian_fd", {"step": h})


def divergence_gradient_fd(family, theta, target, h=GRADIENT_STEP):
    """Centered-difference gradient of eps -> D(rho(theta) || rho(theta + eps)) at eps = 0."""
    theta = family.parameters(theta)
    base = family.evaluate(theta)
    unit = np.eye(family.param_dim) * h
    return np.array([
        (target.fn(base, family.evaluate(theta + unit[i])) - target.fn(base, family.evaluate(theta - unit[i])))
        / (2.0 * h)
        for i in range(family.param_dim)
    ])


def info_kubo_mori(family, theta, method="divided_difference"):
    """
    Kubo-Mori information matrix along one of three equal paths:

    - divided_difference: the spectral sum with (ln x - ln y)/(x - y)
    - log_derivative: Tr[d_i rho  d_j ln rho] with the spectral derivative of ln
    - resolvent: the same trace with d ln rho from the resolvent integral
    """
    if method not in VALID_KM_PATHS:
        raise ValidationError(f"Invalid Kubo-Mori path '{method}'. Must be one of {VALID_KM_PATHS}")
    if method == "divided_difference":
        return info_spectral(family, theta, kubo_mori_kernel())
    theta = family.parameters(theta)
    spectrum = eig_hermitian(family.evaluate(theta))
    derivatives = family.derivatives(theta)
    quadrature = "spectral" if method == "log_derivative" else "quadrature"
    log_derivatives = [log_derivative_integral(spectrum, d, method=quadrature) for d in derivatives]
    values = np.real(np.einsum("iab,jba->ij", np.array(derivatives), np.array(log_derivatives)))
    return InfoMatrix(values, "kubo_mori", family.label, theta, "spectral", {"path": method})


def info_rld(family, theta):
    """1/2 Tr[{d_i rho, d_j rho} rho^{-1}], evaluated with the RLD kernel."""
    return info_spectral(family, theta, rld_kernel())


def info_rld_direct(family, theta):
    """The anticommutator trace itself, with an explicit inverse."""
    theta = family.parameters(theta)
    inverse = linalg.inv(family.evaluate(theta))
    derivatives = family.derivatives(theta)
    n = family.param_dim
    values = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            anti = derivatives[i] @ derivatives[j] + derivatives[j] @ derivatives[i]
            values[i, j] = 0.5 * float(np.real(np.trace(anti @ inverse)))
    return InfoMatrix(values, "rld", family.label, theta, "spectral", {"path": "inverse"})


def info_sandwiched_alpha_two(family, theta):
    """Tr[rho^{-1/2} d_i rho rho^{-1/2} d_j rho], the sandwiched alpha = 2 matrix."""
    theta = family.parameters(theta)
    spectrum = eig_hermitian(family.evaluate(theta))
    inv_sqrt = (spectrum.vectors * spectrum.values ** -0.5) @ spectrum.vectors.conj().T
    sandwiched = np.array([symmetrized(inv_sqrt @ d @ inv_sqrt) for d in family.derivatives(theta)])
    derivatives = np.array(family.derivatives(theta))
    values = np.real(np.einsum("iab,jba->ij", sandwiched, derivatives))
    return InfoMatrix(values, "sandwiched(2)", family.label, theta, "spectral", {"path": "alpha_two"})


def _integral_info(family, theta, pair_kernel, label):
    theta = family.parameters(theta)
    spectrum = eig_hermitian(family.evaluate(theta))
    lam = spectrum.eigenvalues
    clusters = np.empty((len(lam), len(lam)))
    for k in range(len(lam)):
        for l in range(k, len(lam)):
            clusters[k, l] = clusters[l, k] = pair_kernel(lam[k], lam[l])
    values = _spectral_sum(spectrum, spectrum.expand(clusters), family.derivatives(theta))
    return InfoMatrix(values, label, family.label, theta, "integral_rep")


def info_petz_integral(family, theta, alpha):
    """Petz matrix with each kernel entry from the product of two power integrals."""
    return _integral_info(family, theta, lambda x, y: zeta_petz_integral(x, y, alpha), f"petz({alpha:g})")


def info_sandwiched_integral(family, theta, alpha):
    """Sandwiched matrix with each kernel entry from one power integral at x^{1/alpha}, y^{1/alpha}."""
    return _integral_info(
        family, theta, lambda x, y: zeta_sandwiched_integral(x, y, alpha), f"sandwiched({alpha:g})"
    )


def info_pure_state(family, theta, params):
    """
    (2z / (alpha(1-alpha))) Re <d_i psi| (I - |psi><psi|) |d_j psi> for alpha in (0, 1).

    Raises:
        UnsupportedError: alpha >= 1, where rank-deficient states have infinite divergence
    """
    if not isinstance(family, PureStateFamily):
        raise ValidationError(f"info_pure_state needs a PureStateFamily, got {type(family).__name__}")
    if params.alpha >= 1:
        raise UnsupportedError(f"Pure-state formula needs alpha in (0, 1), got {params.alpha}")
    theta = family.parameters(theta)
    psi = family.amplitude(theta)
    tangents = np.array([family.tangent(theta, i) for i in range(family.param_dim)])
    projected = tangents - np.outer(tangents @ psi.conj(), psi)
    metric = np.real(projected.conj() @ projected.T)
    prefactor = 2.0 * params.z / (params.alpha * (1.0 - params.alpha))
    label = f"alpha_z({params.alpha:g},{params.z:g})"
    return InfoMatrix(prefactor * metric, label, family.label, theta, "pure_state")


def info_classical(family, theta):
    """sum_x d_i p(x) d_j p(x) / p(x)."""
    if not isinstance(family, ProbabilityFamily):
        raise ValidationError(f"info_classical needs a ProbabilityFamily, got {type(family).__name__}")
    theta = family.parameters(theta)
    p = family.evaluate(theta)
    dp = np.array(family.derivatives(theta))
    values = (dp / p) @ dp.T
    return InfoMatrix(values, "fisher", family.label, theta, "classical")


def info_cq_decomposed(family, theta, kernel):
    """
    I_F(p_theta) + sum_x p_theta(x) I(rho_x(theta)) for a classical-quantum family.

    Raises:
        UnsupportedError: the kernel is not one of the built-in kappa = 1 kernels
    """
    if not isinstance(family, ClassicalQuantumFamily):
        raise ValidationError(f"info_cq_decomposed needs a ClassicalQuantumFamily, got {type(family).__name__}")
    if kernel.name not in CQ_KERNELS or kernel.kappa != 1.0:
        raise UnsupportedError(f"cq decomposition is implemented for {CQ_KERNELS}, got '{kernel.label}'")
    theta = family.parameters(theta)
    p = family.weights.evaluate(theta)
    values = info_classical(family.weights, theta).values.copy()
    for x, branch in enumerate(family.branches):
        values += p[x] * info_spectral(branch, theta, kernel).values
    return InfoMatrix(values, kernel.label, family.label, theta, "cq_decomposed")


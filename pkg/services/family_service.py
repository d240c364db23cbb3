"""
Parameterized state families theta -> rho(theta) and their parameter derivatives.

Families are immutable after construction. Evaluation validates the state
(Hermitian, unit trace, minimum eigenvalue above the family floor) and never
regularizes a state that falls below the floor.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from services.matcore_service import (
    EXP,
    divided_difference_matrix,
    eig_hermitian,
    hermitian,
    symmetrized,
)
from utils.exception import StateValidationError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MIN_EIG_FLOOR = 1e-10
TRACE_ATOL = 1e-10
SIMPLEX_ATOL = 1e-12
FD_STEP = 1e-5

# Valid family kinds
VALID_KINDS = ["explicit", "thermal", "time_evolved", "pure", "classical_quantum", "product"]


def fd_step(theta, base=FD_STEP):
    return base * max(1.0, float(np.max(np.abs(theta)))) if len(theta) else base


def validate_state(rho, min_eig_floor=DEFAULT_MIN_EIG_FLOOR, label="state"):
    """
    Check that rho is a density matrix with minimum eigenvalue >= min_eig_floor.

    Raises:
        StateValidationError: with the offending trace or eigenvalue
    """
    try:
        rho = hermitian(rho)
    except ValidationError as e:
        raise StateValidationError(f"{label}: {e.message}")
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1.0) > TRACE_ATOL:
        raise StateValidationError(f"{label}: trace is {trace:.12f}, expected 1")
    smallest = float(linalg.eigvalsh(rho)[0])
    if smallest < min_eig_floor:
        raise StateValidationError(
            f"{label}: minimum eigenvalue {smallest:.3e} is below the floor {min_eig_floor:.1e}"
        )
    return rho


class StateFamily(ABC):
    """theta -> rho(theta) with first parameter derivatives."""

    kind = "explicit"

    def __init__(self, param_dim, dim, label="family", min_eig_floor=DEFAULT_MIN_EIG_FLOOR):
        if param_dim < 1:
            raise ValidationError(f"param_dim must be positive, got {param_dim}")
        if dim < 1:
            raise ValidationError(f"dim must be positive, got {dim}")
        self.param_dim = int(param_dim)
        self.dim = int(dim)
        self.label = label
        self.min_eig_floor = float(min_eig_floor)

    def parameters(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.param_dim,):
            raise ValidationError(f"{self.label}: expected {self.param_dim} parameters, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValidationError(f"{self.label}: parameters must be finite")
        return theta

    @abstractmethod
    def _state(self, theta):
        ...

    def evaluate(self, theta):
        theta = self.parameters(theta)
        return validate_state(self._state(theta), self.min_eig_floor, f"{self.label} at theta={theta.tolist()}")

    def derivative(self, theta, i):
        return family_derivative_fd(self, theta, i)

    def derivatives(self, theta):
        return [self.derivative(theta, i) for i in range(self.param_dim)]


def family_derivative_fd(family, theta, i, h=None):
    """
    Centered difference (rho(theta + h e_i) - rho(theta - h e_i)) / 2h, made Hermitian.

    Raises:
        StateValidationError: a finite-difference sample point is not an admissible state
    """
    theta = family.parameters(theta)
    if not 0 <= i < family.param_dim:
        raise ValidationError(f"Parameter index {i} out of range for {family.param_dim} parameters")
    h = fd_step(theta) if h is None else float(h)
    step = np.zeros_like(theta)
    step[i] = h
    try:
        forward = family.evaluate(theta + step)
        backward = family.evaluate(theta - step)
    except StateValidationError as e:
        raise StateValidationError(f"Finite-difference step failed (h={h:.1e}): {e.message}")
    return symmetrized((forward - backward) / (2.0 * h))


class ExplicitFamily(StateFamily):
    """A family given by a state function and optionally its analytic derivative."""

    kind = "explicit"

    def __init__(self, state_fn, param_dim, dim, derivative_fn=None, label="explicit",
                 min_eig_floor=DEFAULT_MIN_EIG_FLOOR):
        super().__init__(param_dim, dim, label, min_eig_floor)
        self.state_fn = state_fn
        self.derivative_fn = derivative_fn

    @classmethod
    def affine(cls, base, directions, label="affine", min_eig_floor=DEFAULT_MIN_EIG_FLOOR):
        """rho(theta) = base + sum_j theta_j directions[j]; directions must be traceless."""
        base = hermitian(base)
        directions = [hermitian(d) for d in directions]
        for j, d in enumerate(directions):
            if d.shape != base.shape:
                raise ValidationError(f"Direction {j} has shape {d.shape}, base has {base.shape}")
            if abs(np.trace(d)) > TRACE_ATOL:
                raise ValidationError(f"Direction {j} is not traceless")
        stack = np.array(directions)
        return cls(
            state_fn=lambda theta: base + np.tensordot(theta, stack, axes=1),
            param_dim=len(directions),
            dim=base.shape[0],
            derivative_fn=lambda theta, i: stack[i].copy(),
            label=label,
            min_eig_floor=min_eig_floor,
        )

    def _state(self, theta):
        return hermitian(self.state_fn(theta), symmetrize=True)

    def derivative(self, theta, i):
        if self.derivative_fn is None:
            return family_derivative_fd(self, theta, i)
        theta = self.parameters(theta)
        return hermitian(self.derivative_fn(theta, i), symmetrize=True)


def gibbs_spectrum(hamiltonian):
    """Spectrum of H and e^{-H}/Z computed after shifting by the smallest eigenvalue."""
    spectrum = eig_hermitian(hamiltonian, symmetrize=True)
    weights = np.exp(-(spectrum.values - spectrum.values[0]))
    weights /= weights.sum()
    rho = symmetrized((spectrum.vectors * weights) @ spectrum.vectors.conj().T)
    return spectrum, weights, rho


class ThermalFamily(StateFamily):
    """rho(theta) = e^{-H(theta)} / Z(theta), H(theta) = offset + sum_j theta_j H_j."""

    kind = "thermal"

    def __init__(self, generators, offset=None, label="thermal", min_eig_floor=DEFAULT_MIN_EIG_FLOOR):
        generators = [hermitian(g) for g in generators]
        if not generators:
            raise ValidationError("Thermal family needs at least one generator")
        dim = generators[0].shape[0]
        for j, g in enumerate(generators):
            if g.shape != (dim, dim):
                raise ValidationError(f"Generator {j} has shape {g.shape}, expected {(dim, dim)}")
        super().__init__(len(generators), dim, label, min_eig_floor)
        self.generators = np.array(generators)
        self.offset = np.zeros((dim, dim), dtype=complex) if offset is None else hermitian(offset)
        if self.offset.shape != (dim, dim):
            raise ValidationError(f"Offset has shape {self.offset.shape}, expected {(dim, dim)}")

    def hamiltonian(self, theta):
        theta = self.parameters(theta)
        return self.offset + np.tensordot(theta, self.generators, axes=1)

    def _state(self, theta):
        return thermal_state(self, theta, validate=False)

    def derivative(self, theta, i):
        return thermal_state_derivative(self, theta, i)


def thermal_state(family, theta, validate=True):
    """e^{-H(theta)} / Z(theta), exponentiated after shifting H by its minimum eigenvalue."""
    _, _, rho = gibbs_spectrum(family.hamiltonian(theta))
    if validate:
        return validate_state(rho, family.min_eig_floor, family.label)
    return rho


def thermal_state_derivative(family, theta, i):
    """
    d rho / d theta_i = -int_0^1 rho^t H_i rho^{1-t} dt + rho <H_i>.

    In the eigenbasis of H(theta) the integral has coefficients given by the exp
    divided differences of -mu, divided by Z.
    """
    theta = family.parameters(theta)
    if not 0 <= i < family.param_dim:
        raise ValidationError(f"Parameter index {i} out of range for {family.param_dim} parameters")
    spectrum, weights, rho = gibbs_spectrum(family.hamiltonian(theta))
    shifted = -(spectrum.eigenvalues - spectrum.values[0])
    partition = np.sum(np.exp(-(spectrum.values - spectrum.values[0])))
    coefficients = spectrum.expand(divided_difference_matrix(EXP, shifted, spectrum.cluster_tolerance))
    h_i = spectrum.to_eigenbasis(family.generators[i])
    mean = float(np.real(np.sum(weights * np.diag(h_i))))
    term = spectrum.from_eigenbasis(coefficients * h_i) / partition
    return symmetrized(-term + rho * mean)


class TimeEvolvedFamily(StateFamily):
    """sigma(phi) = e^{-i H(phi)} rho e^{i H(phi)} with rho = e^{-G} / Tr e^{-G}."""

    kind = "time_evolved"

    def __init__(self, base_generator, generators, label="time_evolved", min_eig_floor=DEFAULT_MIN_EIG_FLOOR):
        generators = [hermitian(g) for g in generators]
        if not generators:
            raise ValidationError("Time-evolved family needs at least one generator")
        base_generator = hermitian(base_generator)
        dim = base_generator.shape[0]
        for j, g in enumerate(generators):
            if g.shape != (dim, dim):
                raise ValidationError(f"Generator {j} has shape {g.shape}, expected {(dim, dim)}")
        super().__init__(len(generators), dim, label, min_eig_floor)
        self.base_generator = base_generator
        self.generators = np.array(generators)
        self.base_spectrum, self.base_weights, self.base_state = gibbs_spectrum(base_generator)

    def hamiltonian(self, phi):
        phi = self.parameters(phi)
        return np.tensordot(phi, self.generators, axes=1)

    def unitary(self, phi):
        spectrum = eig_hermitian(self.hamiltonian(phi), symmetrize=True)
        return (spectrum.vectors * np.exp(-1j * spectrum.values)) @ spectrum.vectors.conj().T

    def _state(self, phi):
        u = self.unitary(phi)
        return symmetrized(u @ self.base_state @ u.conj().T)

    def derivative(self, phi, i):
        return time_evolved_state_derivative(self, phi, i)


def evolution_average(spectrum, x, adjoint=False):
    """
    Psi(X) = int_0^1 e^{iHt} X e^{-iHt} dt in the eigenbasis of H (adjoint: e^{-iHt} X e^{iHt}).

    The coefficient for the gap nu = mu_k - mu_l is e^{i nu / 2} sinc(nu / 2).
    """
    nu = spectrum.cluster_values[:, None] - spectrum.cluster_values[None, :]
    coefficients = np.exp(0.5j * nu) * np.sinc(nu / (2.0 * np.pi))
    if adjoint:
        coefficients = coefficients.conj()
    return spectrum.from_eigenbasis(coefficients * spectrum.to_eigenbasis(x))


def time_evolved_state_derivative(family, phi, i):
    """d sigma / d phi_i = i [sigma(phi), Psi_phi^dagger(H_i)]."""
    phi = family.parameters(phi)
    if not 0 <= i < family.param_dim:
        raise ValidationError(f"Parameter index {i} out of range for {family.param_dim} parameters")
    spectrum = eig_hermitian(family.hamiltonian(phi), symmetrize=True)
    sigma = family._state(phi)
    averaged = symmetrized(evolution_average(spectrum, family.generators[i], adjoint=True))
    return symmetrized(1j * (sigma @ averaged - averaged @ sigma))


class PureStateFamily(StateFamily):
    """
    theta -> |psi(theta)><psi(theta)| for a unit vector amplitude.

    The tangent |d_i psi> is analytic when supplied, else a centered difference of the
    amplitude (which must then be a smooth function of theta).
    """

    kind = "pure"

    def __init__(self, amplitude_fn, param_dim, dim, tangent_fn=None, label="pure"):
        super().__init__(param_dim, dim, label, min_eig_floor=-1e-12)
        self.amplitude_fn = amplitude_fn
        self.tangent_fn = tangent_fn

    def amplitude(self, theta):
        theta = self.parameters(theta)
        psi = np.asarray(self.amplitude_fn(theta), dtype=complex).reshape(-1)
        if psi.shape != (self.dim,):
            raise ValidationError(f"{self.label}: amplitude has shape {psi.shape}, expected ({self.dim},)")
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-10:
            raise StateValidationError(f"{self.label}: amplitude norm is {norm:.12f}, expected 1")
        return psi

    def tangent(self, theta, i):
        theta = self.parameters(theta)
        if self.tangent_fn is not None:
            return np.asarray(self.tangent_fn(theta, i), dtype=complex).reshape(-1)
        h = fd_step(theta)
        step = np.zeros_like(theta)
        step[i] = h
        return (self.amplitude(theta + step) - self.amplitude(theta - step)) / (2.0 * h)

    def _state(self, theta):
        psi = self.amplitude(theta)
        return np.outer(psi, psi.conj())

    def derivative(self, theta, i):
        psi = self.amplitude(theta)
        d_psi = self.tangent(theta, i)
        return symmetrized(np.outer(d_psi, psi.conj()) + np.outer(psi, d_psi.conj()))

    def lifted(self, floor=1e-8):
        """
        Full-rank family (1 - eps) |psi><psi| + eps I / d with eps = 2 d floor,
        so the smallest eigenvalue sits at twice the floor.
        """
        eps = 2.0 * self.dim * floor
        identity = np.eye(self.dim, dtype=complex) / self.dim
        return ExplicitFamily(
            state_fn=lambda theta: (1.0 - eps) * self._state(theta) + eps * identity,
            param_dim=self.param_dim,
            dim=self.dim,
            derivative_fn=lambda theta, i: (1.0 - eps) * self.derivative(theta, i),
            label=f"lifted({self.label})",
            min_eig_floor=floor,
        )


class ProbabilityFamily:
    """theta -> p_theta on a finite alphabet, interior of the simplex."""

    def __init__(self, prob_fn, param_dim, size, derivative_fn=None, label="probability"):
        if param_dim < 1 or size < 2:
            raise ValidationError(f"Need param_dim >= 1 and alphabet size >= 2, got {param_dim}, {size}")
        self.prob_fn = prob_fn
        self.derivative_fn = derivative_fn
        self.param_dim = int(param_dim)
        self.size = int(size)
        self.label = label

    parameters = StateFamily.parameters

    def evaluate(self, theta):
        theta = self.parameters(theta)
        return validate_probability(self.prob_fn(theta), f"{self.label} at theta={theta.tolist()}")

    def derivative(self, theta, i):
        theta = self.parameters(theta)
        if self.derivative_fn is not None:
            return np.asarray(self.derivative_fn(theta, i), dtype=float)
        h = fd_step(theta)
        step = np.zeros_like(theta)
        step[i] = h
        return (self.evaluate(theta + step) - self.evaluate(theta - step)) / (2.0 * h)

    def derivatives(self, theta):
        return [self.derivative(theta, i) for i in range(self.param_dim)]

    @classmethod
    def bernoulli(cls):
        return cls(
            prob_fn=lambda theta: np.array([theta[0], 1.0 - theta[0]]),
            param_dim=1,
            size=2,
            derivative_fn=lambda theta, i: np.array([1.0, -1.0]),
            label="bernoulli",
        )

    @classmethod
    def softmax(cls, logit_matrix, label="softmax"):
        """p_theta(x) proportional to exp(sum_j theta_j W[x, j])."""
        w = np.asarray(logit_matrix, dtype=float)
        if w.ndim != 2:
            raise ValidationError(f"Logit matrix must be 2-D, got shape {w.shape}")

        def probabilities(theta):
            logits = w @ theta
            e = np.exp(logits - logits.max())
            return e / e.sum()

        def derivative(theta, i):
            p = probabilities(theta)
            return p * (w[:, i] - p @ w[:, i])

        return cls(probabilities, w.shape[1], w.shape[0], derivative, label)

    def as_state_family(self):
        """Diagonal (commuting) quantum family diag(p_theta)."""
        return ExplicitFamily(
            state_fn=lambda theta: np.diag(self.evaluate(theta)).astype(complex),
            param_dim=self.param_dim,
            dim=self.size,
            derivative_fn=lambda theta, i: np.diag(self.derivative(theta, i)).astype(complex),
            label=f"diag({self.label})",
        )


def validate_probability(p, label="distribution"):
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size < 1 or not np.all(np.isfinite(p)):
        raise ValidationError(f"{label}: probability vector must be finite and non-empty")
    if np.any(p <= 0):
        raise ValidationError(f"{label}: entries must be strictly positive, got min {p.min():.3e}")
    if abs(p.sum() - 1.0) > SIMPLEX_ATOL:
        raise ValidationError(f"{label}: entries sum to {p.sum():.15f}, expected 1")
    return p


def block_diagonal(blocks):
    return linalg.block_diag(*blocks).astype(complex)


class ClassicalQuantumFamily(StateFamily):
    """rho_XA(theta) = sum_x p_theta(x) |x><x| (x) rho_x(theta), stored block-diagonally."""

    kind = "classical_quantum"

    def __init__(self, weights, branches, label="classical_quantum"):
        if len(branches) != weights.size:
            raise ValidationError(f"Need {weights.size} branches, got {len(branches)}")
        for x, branch in enumerate(branches):
            if branch.param_dim != weights.param_dim:
                raise ValidationError(
                    f"Branch {x} has {branch.param_dim} parameters, weights have {weights.param_dim}"
                )
        dims = {branch.dim for branch in branches}
        if len(dims) != 1:
            raise ValidationError(f"All branches must share one dimension, got {sorted(dims)}")
        floor = min(branch.min_eig_floor for branch in branches)
        super().__init__(weights.param_dim, weights.size * branches[0].dim, label, floor)
        self.weights = weights
        self.branches = list(branches)
        self.branch_dim = branches[0].dim

    def _state(self, theta):
        p = self.weights.evaluate(theta)
        return block_diagonal([p[x] * branch.evaluate(theta) for x, branch in enumerate(self.branches)])

    def derivative(self, theta, i):
        p = self.weights.evaluate(theta)
        dp = self.weights.derivative(theta, i)
        return block_diagonal([
            dp[x] * branch.evaluate(theta) + p[x] * branch.derivative(theta, i)
            for x, branch in enumerate(self.branches)
        ])

    def mixture(self):
        """The family Tr_X rho_XA(theta) = sum_x p_theta(x) rho_x(theta)."""

        def state(theta):
            p = self.weights.evaluate(theta)
            return sum(p[x] * branch.evaluate(theta) for x, branch in enumerate(self.branches))

        def derivative(theta, i):
            p = self.weights.evaluate(theta)
            dp = self.weights.derivative(theta, i)
            return sum(
                dp[x] * branch.evaluate(theta) + p[x] * branch.derivative(theta, i)
                for x, branch in enumerate(self.branches)
            )

        return ExplicitFamily(state, self.param_dim, self.branch_dim, derivative, f"mixture({self.label})")


class ProductFamily(StateFamily):
    """rho(theta) (x) sigma(theta); with shared=False the parameter vectors are concatenated."""

    kind = "product"

    def __init__(self, first, second, shared=True, label=None):
        if shared and first.param_dim != second.param_dim:
            raise ValidationError(
                f"Shared parameters need equal param_dim, got {first.param_dim} and {second.param_dim}"
            )
        param_dim = first.param_dim if shared else first.param_dim + second.param_dim
        floor = max(first.min_eig_floor, 0.0) * max(second.min_eig_floor, 0.0)
        super().__init__(param_dim, first.dim * second.dim, label or f"{first.label}x{second.label}", floor)
        self.first = first
        self.second = second
        self.shared = shared

    def _split(self, theta):
        if self.shared:
            return theta, theta
        return theta[:self.first.param_dim], theta[self.first.param_dim:]

    def _state(self, theta):
        a, b = self._split(theta)
        return np.kron(self.first.evaluate(a), self.second.evaluate(b))

    def derivative(self, theta, i):
        theta = self.parameters(theta)
        a, b = self._split(theta)
        rho, sigma = self.first.evaluate(a), self.second.evaluate(b)
        if self.shared:
            return np.kron(self.first.derivative(a, i), sigma) + np.kron(rho, self.second.derivative(b, i))
        if i < self.first.param_dim:
            return np.kron(self.first.derivative(a, i), sigma)
        return np.kron(rho, self.second.derivative(b, i - self.first.param_dim))


def random_hermitian(dim, rng, scale=1.0):
    """GUE sample rescaled to spectral norm `scale`."""
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = symmetrized(x)
    norm = np.max(np.abs(linalg.eigvalsh(h)))
    return h * (scale / norm) if norm > 0 else h


def random_density_matrix(dim, rng, spread=2.0):
    """Positive definite e^{-H}/Z with ||H|| = spread."""
    _, _, rho = gibbs_spectrum(random_hermitian(dim, rng, spread))
    return rho


def random_thermal_family(dim, param_dim, rng, label="random_thermal"):
    """e^{-(A_0 + sum_j theta_j A_j)}/Z with GUE A_j of spectral norm <= 1."""
    offset = random_hermitian(dim, rng)
    generators = [random_hermitian(dim, rng) for _ in range(param_dim)]
    return ThermalFamily(generators, offset=offset, label=label)


def random_time_evolved_family(dim, param_dim, rng, label="random_time_evolved"):
    base = random_hermitian(dim, rng)
    generators = [random_hermitian(dim, rng) for _ in range(param_dim)]
    return TimeEvolvedFamily(base, generators, label=label)


def random_probability_family(size, param_dim, rng, label="random_softmax"):
    return ProbabilityFamily.softmax(rng.normal(size=(size, param_dim)), label=label)


def random_cq_family(alphabet, dim, param_dim, rng, label="random_cq"):
    weights = random_probability_family(alphabet, param_dim, rng)
    branches = [random_thermal_family(dim, param_dim, rng, label=f"branch{x}") for x in range(alphabet)]
    return ClassicalQuantumFamily(weights, branches, label=label)

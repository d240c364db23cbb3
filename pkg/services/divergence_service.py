"""
Divergences - quantum and classical relative entropies evaluated spectrally,
plus quantum channels used for data-processing checks.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from services.family_service import (
    ExplicitFamily,
    random_density_matrix,
    validate_probability,
    validate_state,
)
from services.matcore_service import eig_hermitian, hermitian, symmetrized
from utils.exception import DomainError, ValidationError

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-14
KRAUS_ATOL = 1e-10

# Divergences with a known information-matrix Hessian, and their prefactors
VALID_HESSIAN_TARGETS = [
    "umegaki",
    "alpha_z",
    "petz",
    "sandwiched",
    "log_euclidean",
    "geometric",
    "belavkin_staszewski",
    "classical_kl",
    "classical_renyi",
]

VALID_ORDERINGS = ["sigma_outside", "rho_outside"]
VALID_ANCHORS = ["sigma", "rho"]


@dataclass(frozen=True)
class RenyiParams:
    alpha: float
    z: float = 1.0

    def __post_init__(self):
        errors = []
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            errors.append(f"alpha must be finite and positive, got {self.alpha}")
        elif self.alpha == 1:
            errors.append("alpha = 1 is the Umegaki limit, not a Renyi parameter")
        if not np.isfinite(self.z) or self.z <= 0:
            errors.append(f"z must be finite and positive, got {self.z}")
        if errors:
            raise ValidationError(f"Invalid Renyi parameters: {'; '.join(errors)}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "z", float(self.z))


def in_dp_region(params):
    """
    Sufficient region for data processing of D_{alpha,z}:
    0 < alpha < 1 with z >= max(alpha, 1 - alpha), or alpha > 1 with alpha - 1 <= z <= alpha <= 2z.
    """
    a, z = params.alpha, params.z
    if a < 1:
        return z >= max(a, 1 - a)
    return a - 1 <= z <= a <= 2 * z


def _spectrum(state, label, allow_psd=False):
    floor = -1e-12 if allow_psd else np.finfo(float).tiny
    rho = validate_state(state, min_eig_floor=floor, label=label)
    return rho, eig_hermitian(rho)


def _power(spectrum, r):
    powered = np.zeros_like(spectrum.values)
    support = spectrum.values > SUPPORT_TOL
    powered[support] = spectrum.values[support] ** r
    return symmetrized((spectrum.vectors * powered) @ spectrum.vectors.conj().T)


def _log(spectrum):
    return symmetrized((spectrum.vectors * np.log(spectrum.values)) @ spectrum.vectors.conj().T)


def _trace_power(matrix, z):
    values = np.clip(linalg.eigvalsh(symmetrized(matrix)), 0.0, None)
    return float(np.sum(values ** z))


def _renyi_value(quantity, alpha, name):
    if quantity <= 0:
        raise DomainError(f"{name}: trace functional is {quantity:.3e}; supports are orthogonal")
    return float(np.log(quantity) / (alpha - 1.0))


def umegaki(rho, sigma):
    """D(rho||sigma) = Tr[rho (ln rho - ln sigma)]."""
    rho, s_rho = _spectrum(rho, "rho")
    _, s_sigma = _spectrum(sigma, "sigma")
    entropy_term = float(np.sum(s_rho.values * np.log(s_rho.values)))
    cross_term = float(np.real(np.trace(rho @ _log(s_sigma))))
    return entropy_term - cross_term


def alpha_z_renyi(rho, sigma, params, ordering="sigma_outside", allow_pure=False):
    """
    D_{alpha,z}(rho||sigma) = ln Tr[(sigma^{(1-a)/2z} rho^{a/z} sigma^{(1-a)/2z})^z] / (a - 1).

    `rho_outside` evaluates the equivalent (rho^{a/2z} sigma^{(1-a)/z} rho^{a/2z})^z form.
    `allow_pure` accepts rank-deficient states, for alpha < 1 only.
    """
    if ordering not in VALID_ORDERINGS:
        raise ValidationError(f"Invalid ordering '{ordering}'. Must be one of {VALID_ORDERINGS}")
    if allow_pure and params.alpha >= 1:
        raise ValidationError("Rank-deficient states are only admissible for alpha < 1")
    _, s_rho = _spectrum(rho, "rho", allow_psd=allow_pure)
    _, s_sigma = _spectrum(sigma, "sigma", allow_psd=allow_pure)
    a, z = params.alpha, params.z
    if ordering == "sigma_outside":
        outer, inner = _power(s_sigma, (1.0 - a) / (2.0 * z)), _power(s_rho, a / z)
    else:
        outer, inner = _power(s_rho, a / (2.0 * z)), _power(s_sigma, (1.0 - a) / z)
    return _renyi_value(_trace_power(outer @ inner @ outer, z), a, "alpha-z Renyi")


def petz_renyi(rho, sigma, alpha):
    """(1/(a-1)) ln Tr[rho^a sigma^{1-a}]."""
    params = RenyiParams(alpha, 1.0)
    rho, s_rho = _spectrum(rho, "rho")
    _, s_sigma = _spectrum(sigma, "sigma")
    quantity = float(np.real(np.trace(_power(s_rho, params.alpha) @ _power(s_sigma, 1.0 - params.alpha))))
    return _renyi_value(quantity, params.alpha, "Petz Renyi")


def sandwiched_renyi(rho, sigma, alpha):
    """(1/(a-1)) ln Tr[(sigma^{(1-a)/2a} rho sigma^{(1-a)/2a})^a]."""
    params = RenyiParams(alpha, alpha)
    rho, _ = _spectrum(rho, "rho")
    _, s_sigma = _spectrum(sigma, "sigma")
    outer = _power(s_sigma, (1.0 - params.alpha) / (2.0 * params.alpha))
    return _renyi_value(_trace_power(outer @ rho @ outer, params.alpha), params.alpha, "sandwiched Renyi")


def log_euclidean_renyi(rho, sigma, alpha):
    """(1/(a-1)) ln Tr exp(a ln rho + (1-a) ln sigma)."""
    params = RenyiParams(alpha, 1.0)
    _, s_rho = _spectrum(rho, "rho")
    _, s_sigma = _spectrum(sigma, "sigma")
    exponent = params.alpha * _log(s_rho) + (1.0 - params.alpha) * _log(s_sigma)
    quantity = float(np.sum(np.exp(linalg.eigvalsh(symmetrized(exponent)))))
    return _renyi_value(quantity, params.alpha, "log-Euclidean Renyi")


def geometric_renyi(rho, sigma, alpha, anchor="sigma"):
    """
    (1/(a-1)) ln Tr[sigma (sigma^{-1/2} rho sigma^{-1/2})^a]; anchor="rho" uses the
    equivalent Tr[rho (rho^{-1/2} sigma rho^{-1/2})^{1-a}].
    """
    if anchor not in VALID_ANCHORS:
        raise ValidationError(f"Invalid anchor '{anchor}'. Must be one of {VALID_ANCHORS}")
    params = RenyiParams(alpha, 1.0)
    rho, s_rho = _spectrum(rho, "rho")
    sigma, s_sigma = _spectrum(sigma, "sigma")
    if anchor == "sigma":
        base, other, s_base, exponent = sigma, rho, s_sigma, params.alpha
    else:
        base, other, s_base, exponent = rho, sigma, s_rho, 1.0 - params.alpha
    inv_sqrt = _power(s_base, -0.5)
    middle = eig_hermitian(inv_sqrt @ other @ inv_sqrt, symmetrize=True)
    quantity = float(np.real(np.trace(base @ _power(middle, exponent))))
    return _renyi_value(quantity, params.alpha, "geometric Renyi")


def belavkin_staszewski(rho, sigma):
    """Tr[rho ln(rho^{1/2} sigma^{-1} rho^{1/2})]."""
    rho, s_rho = _spectrum(rho, "rho")
    _, s_sigma = _spectrum(sigma, "sigma")
    sqrt_rho = _power(s_rho, 0.5)
    middle = eig_hermitian(sqrt_rho @ _power(s_sigma, -1.0) @ sqrt_rho, symmetrize=True)
    return float(np.real(np.trace(rho @ _log(middle))))


def classical_renyi(p, q, alpha):
    """(1/(a-1)) ln sum_x p(x)^a q(x)^{1-a}."""
    params = RenyiParams(alpha, 1.0)
    p, q = _pair(p, q)
    quantity = float(np.sum(p ** params.alpha * q ** (1.0 - params.alpha)))
    return _renyi_value(quantity, params.alpha, "classical Renyi")


def classical_kl(p, q):
    p, q = _pair(p, q)
    return float(np.sum(p * (np.log(p) - np.log(q))))


def _pair(p, q):
    p = validate_probability(p, "p")
    q = validate_probability(q, "q")
    if p.shape != q.shape:
        raise ValidationError(f"Distributions have different sizes: {p.size} and {q.size}")
    return p, q


@dataclass(frozen=True)
class DivergenceTarget:
    """A divergence together with the prefactor that turns its Hessian into an information matrix."""
    name: str
    label: str
    fn: Callable
    prefactor: float

    def __call__(self, first, second):
        return self.prefactor * self.fn(first, second)


def hessian_target(name, alpha=None, z=None):
    """
    Build the scaled divergence whose Hessian is the matching information matrix.

    Prefactor 1/alpha for alpha_z, petz, sandwiched, log_euclidean, geometric and
    classical_renyi; 1 for umegaki, belavkin_staszewski and classical_kl.
    """
    if name not in VALID_HESSIAN_TARGETS:
        raise ValidationError(f"Invalid divergence '{name}'. Must be one of {VALID_HESSIAN_TARGETS}")
    if name == "umegaki":
        return DivergenceTarget(name, "umegaki", umegaki, 1.0)
    if name == "belavkin_staszewski":
        return DivergenceTarget(name, "belavkin_staszewski", belavkin_staszewski, 1.0)
    if name == "classical_kl":
        return DivergenceTarget(name, "classical_kl", classical_kl, 1.0)
    if alpha is None:
        raise ValidationError(f"Divergence '{name}' needs alpha")
    if name == "alpha_z":
        params = RenyiParams(alpha, 1.0 if z is None else z)
        return DivergenceTarget(
            name, f"alpha_z({params.alpha:g},{params.z:g})",
            lambda r, s: alpha_z_renyi(r, s, params), 1.0 / params.alpha,
        )
    params = RenyiParams(alpha, 1.0)
    functions = {
        "petz": petz_renyi,
        "sandwiched": sandwiched_renyi,
        "log_euclidean": log_euclidean_renyi,
        "geometric": geometric_renyi,
        "classical_renyi": classical_renyi,
    }
    fn = functions[name]
    return DivergenceTarget(name, f"{name}({params.alpha:g})", lambda r, s: fn(r, s, params.alpha), 1.0 / params.alpha)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map rho -> sum_m K_m rho K_m^dagger."""
    kraus_ops: tuple
    label: str = "channel"

    def __post_init__(self):
        ops = [np.array(k, dtype=complex) for k in self.kraus_ops]
        if not ops:
            raise ValidationError("A channel needs at least one Kraus operator")
        shape = ops[0].shape
        errors = [f"Kraus operator {m} has shape {k.shape}, expected {shape}" for m, k in enumerate(ops)
                  if k.ndim != 2 or k.shape != shape]
        if errors:
            raise ValidationError(f"Invalid channel: {'; '.join(errors)}")
        completeness = sum(k.conj().T @ k for k in ops)
        deviation = float(np.max(np.abs(completeness - np.eye(shape[1]))))
        if deviation > KRAUS_ATOL:
            raise ValidationError(f"Kraus operators are not trace preserving (deviation {deviation:.3e})")
        object.__setattr__(self, "kraus_ops", tuple(ops))

    @property
    def d_in(self):
        return self.kraus_ops[0].shape[1]

    @property
    def d_out(self):
        return self.kraus_ops[0].shape[0]


def apply_channel(channel, operator):
    """sum_m K_m X K_m^dagger for a Hermitian X (state or derivative)."""
    x = hermitian(operator, symmetrize=True)
    if x.shape[0] != channel.d_in:
        raise ValidationError(f"Channel input dimension is {channel.d_in}, operator has {x.shape[0]}")
    return symmetrized(sum(k @ x @ k.conj().T for k in channel.kraus_ops))


def identity_channel(dim):
    return QuantumChannel((np.eye(dim),), label="identity")


def depolarizing_channel(dim, p):
    """rho -> (1 - p) rho + p Tr[rho] I / d, Kraus operators from the Weyl basis."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"Depolarizing probability must lie in [0, 1], got {p}")
    shift = np.roll(np.eye(dim), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    ops = [np.sqrt(1.0 - p) * np.eye(dim)]
    for a in range(dim):
        for b in range(dim):
            ops.append(np.sqrt(p) / dim * np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    return QuantumChannel(tuple(ops), label=f"depolarizing({p:g})")


def partial_trace_channel(d_keep, d_drop):
    """Tr_B on A (x) B with A of dimension d_keep kept."""
    ops = []
    for m in range(d_drop):
        bra = np.zeros((1, d_drop))
        bra[0, m] = 1.0
        ops.append(np.kron(np.eye(d_keep), bra))
    return QuantumChannel(tuple(ops), label=f"partial_trace({d_keep},{d_drop})")


def amplitude_damping_channel(gamma):
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"Damping rate must lie in [0, 1], got {gamma}")
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]])
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
    return QuantumChannel((k0, k1), label=f"amplitude_damping({gamma:g})")


def random_channel(d_in, d_out, n_kraus, rng):
    """Kraus blocks of a random isometry C^{d_in} -> C^{n_kraus d_out} (QR of a complex Gaussian)."""
    if n_kraus * d_out < d_in:
        raise ValidationError(f"{n_kraus} Kraus operators of size {d_out}x{d_in} cannot be trace preserving")
    gaussian = rng.normal(size=(n_kraus * d_out, d_in)) + 1j * rng.normal(size=(n_kraus * d_out, d_in))
    isometry, _ = np.linalg.qr(gaussian)
    ops = tuple(isometry[m * d_out:(m + 1) * d_out, :] for m in range(n_kraus))
    return QuantumChannel(ops, label=f"random({n_kraus})")


def pushforward(family, channel):
    """theta -> N(rho(theta)); derivatives are N applied to the base derivatives."""
    if family.dim != channel.d_in:
        raise ValidationError(f"Channel input dimension is {channel.d_in}, family has {family.dim}")
    return ExplicitFamily(
        state_fn=lambda theta: apply_channel(channel, family.evaluate(theta)),
        param_dim=family.param_dim,
        dim=channel.d_out,
        derivative_fn=lambda theta, i: apply_channel(channel, family.derivative(theta, i)),
        label=f"{channel.label}[{family.label}]",
        min_eig_floor=family.min_eig_floor,
    )


def scan_dp_violations(target, dim, trials, rng, n_kraus=2):
    """
    Random search for D(N(rho)||N(sigma)) > D(rho||sigma). Exploratory only: finding
    nothing says nothing about the parameter region.
    """
    worst_gap = -np.inf
    violations = 0
    for _ in range(trials):
        rho, sigma = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
        channel = random_channel(dim, dim, n_kraus, rng)
        gap = target.fn(apply_channel(channel, rho), apply_channel(channel, sigma)) - target.fn(rho, sigma)
        worst_gap = max(worst_gap, gap)
        violations += int(gap > 1e-9)
    logger.debug("DP scan for %s: %d/%d violations", target.label, violations, trials)
    return {"target": target.label, "trials": trials, "violations": violations, "worst_gap": float(worst_gap)}

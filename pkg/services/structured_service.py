"""
Closed-form information matrices for thermal (Gibbs) families and time-evolved
families, written as spectral channels acting on the generators.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from services.density_service import (
    char_fn_alpha_z,
    numeric_fourier,
    tanhc,
    thermal_weight,
    time_evolved_weight,
)
from services.family_service import ThermalFamily, TimeEvolvedFamily, gibbs_spectrum
from services.infomat_service import InfoMatrix
from services.matcore_service import eig_hermitian, hermitian, symmetrized
from utils.exception import NumericalError, UnsupportedError, ValidationError

logger = logging.getLogger(__name__)

IMAGINARY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralChannel:
    """
    X -> sum_{k,l} weight(mu_k - mu_l) Pi_k X Pi_l over the eigenbasis of a
    conditioning Hamiltonian. The weight may be complex as long as
    weight(-nu) = conj(weight(nu)), which keeps outputs Hermitian.
    """
    basis: object
    weight: Callable
    kappa: float = 1.0
    label: str = "channel"

    def gaps(self):
        mu = self.basis.cluster_values
        return mu[:, None] - mu[None, :]

    def coefficients(self):
        return np.asarray(self.weight(self.gaps()))


def apply_spectral_channel(channel, x):
    """
    Raises:
        ValidationError: X is not Hermitian or has the wrong dimension
    """
    x = hermitian(x)
    if x.shape[0] != channel.basis.dim:
        raise ValidationError(f"Operator has dimension {x.shape[0]}, channel basis has {channel.basis.dim}")
    rotated = channel.basis.to_eigenbasis(x)
    return symmetrized(channel.basis.from_eigenbasis(channel.coefficients() * rotated))


def _evolution_weight(adjoint):
    sign = -1.0 if adjoint else 1.0

    def weight(nu):
        return np.exp(0.5j * sign * nu) * np.sinc(nu / (2.0 * np.pi))

    return weight


def psi_phi_channel(family, phi, adjoint=False):
    """
    Psi_phi(X) = int_0^1 e^{i H(phi) t} X e^{-i H(phi) t} dt, with gap coefficient
    (e^{i nu} - 1) / (i nu); adjoint=True gives Psi_phi^dagger.
    """
    if not isinstance(family, TimeEvolvedFamily):
        raise ValidationError(f"psi_phi_channel needs a TimeEvolvedFamily, got {type(family).__name__}")
    basis = eig_hermitian(family.hamiltonian(phi), symmetrize=True)
    label = "psi_dagger" if adjoint else "psi"
    return SpectralChannel(basis, _evolution_weight(adjoint), 1.0, label)


def apply_time_domain_channel(basis, x, density):
    """
    int density(t) e^{-iHt} X e^{iHt} dt with each gap coefficient from numeric_fourier.

    Quadrature cross-check for apply_spectral_channel; one transform per distinct gap.
    """
    x = hermitian(x)
    gaps = basis.cluster_values[:, None] - basis.cluster_values[None, :]
    cache = {}
    coefficients = np.empty(gaps.shape, dtype=complex)
    for index, nu in np.ndenumerate(gaps):
        key = round(float(nu), 12)
        if key not in cache:
            cache[key] = numeric_fourier(density, -key)
        coefficients[index] = cache[key]
    logger.debug("Time-domain channel: %d Fourier transforms", len(cache))
    return symmetrized(basis.from_eigenbasis(coefficients * basis.to_eigenbasis(x)))


def _reject_alpha_above_one(params):
    if params.alpha >= 1:
        raise UnsupportedError(
            f"Closed forms are available for alpha in (0, 1) only, got {params.alpha}; use info_spectral"
        )


def _thermal_info(family, theta, weight, kappa, label):
    if not isinstance(family, ThermalFamily):
        raise ValidationError(f"Thermal closed form needs a ThermalFamily, got {type(family).__name__}")
    theta = family.parameters(theta)
    spectrum, weights, _ = gibbs_spectrum(family.hamiltonian(theta))
    channel = SpectralChannel(spectrum, weight, kappa, label)
    coefficients = channel.coefficients()
    rotated = np.array([spectrum.to_eigenbasis(g) for g in family.generators])
    means = np.real(np.einsum("a,iaa->i", weights, rotated))
    pair_weights = 0.5 * (weights[:, None] + weights[None, :]) * coefficients
    values = np.real(np.einsum("ab,iab,jba->ij", pair_weights, rotated, rotated)) - kappa * np.outer(means, means)
    return InfoMatrix(values, label, family.label, theta, "closed_form_thermal")


def thermal_info_general_kernel(family, theta, kernel):
    """
    [I]_ij = 1/2 <{Phi(H_i), H_j}>_rho - kappa <H_i>_rho <H_j>_rho with Phi weighted by
    thermal_weight(., kernel).
    """
    return _thermal_info(family, theta, lambda nu: thermal_weight(nu, kernel), kernel.kappa, kernel.label)


def thermal_info_closed(family, theta, params):
    """Thermal alpha-z matrix with weight f_{a,z}(w) tanh(w/2)/(w/2), for alpha in (0, 1)."""
    _reject_alpha_above_one(params)
    return _thermal_info(
        family, theta,
        lambda nu: char_fn_alpha_z(nu, params) * tanhc(nu),
        1.0,
        f"alpha_z({params.alpha:g},{params.z:g})",
    )


def _time_evolved_info(family, phi, weight, label):
    if not isinstance(family, TimeEvolvedFamily):
        raise ValidationError(f"Time-evolved closed form needs a TimeEvolvedFamily, got {type(family).__name__}")
    phi = family.parameters(phi)
    psi = psi_phi_channel(family, phi)
    base = family.base_spectrum
    averaged = np.array([base.to_eigenbasis(apply_spectral_channel(psi, g)) for g in family.generators])
    lam, mu = family.base_weights, base.values
    gaps = mu[:, None] - mu[None, :]
    coefficients = (lam[:, None] - lam[None, :]) * -gaps * np.asarray(weight(gaps))
    total = np.einsum("ab,iab,jba->ij", coefficients, averaged, averaged)
    scale = max(1.0, float(np.max(np.abs(total.real))))
    residue = float(np.max(np.abs(total.imag)))
    if residue > IMAGINARY_RTOL * scale:
        raise NumericalError(f"Time-evolved information matrix has an imaginary residue {residue:.3e}")
    return InfoMatrix(total.real, label, family.label, phi, "closed_form_time_evolved")


def time_evolved_info_general_kernel(family, phi, kernel):
    """
    [I]_ij = <[Phi_g(Psi(H_i)), [G, Psi(H_j)]]>_rho with g = time_evolved_weight(., kernel),
    evaluated in the eigenbasis of G.
    """
    return _time_evolved_info(family, phi, lambda nu: time_evolved_weight(nu, kernel), kernel.label)


def time_evolved_info_closed(family, phi, params):
    """Time-evolved alpha-z matrix with weight f_{a,z}, for alpha in (0, 1)."""
    _reject_alpha_above_one(params)
    return _time_evolved_info(
        family, phi, lambda nu: char_fn_alpha_z(nu, params), f"alpha_z({params.alpha:g},{params.z:g})"
    )

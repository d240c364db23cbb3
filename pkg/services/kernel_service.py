"""
Zeta kernels - the two-argument functions zeta(x, y) behind every spectral
information-matrix formula

    I_ij = sum_{k,l} zeta(lambda_k, lambda_l) Tr[Pi_k d_i rho Pi_l d_j rho].

All built-in kernels are symmetric, satisfy zeta(sx, sy) = zeta(x, y) / s and
zeta(x, x) = kappa / x with kappa = 1.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from services.divergence_service import RenyiParams
from services.matcore_service import DEFAULT_CLUSTER_TOL, power_integral
from utils.exception import DomainError, ValidationError

logger = logging.getLogger(__name__)

ALPHA_ONE_SWITCH = 1e-7
Z_INFINITY_SWITCH = 1e7

# Valid kernel labels
VALID_KERNELS = ["kubo_mori", "rld", "alpha_z", "petz", "sandwiched", "custom"]


def _log_abs_expm1(v):
    """log|e^v - 1| for v != 0, without overflow for large |v|."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    positive = v > 0
    out[positive] = v[positive] + np.log(-np.expm1(-v[positive]))
    out[~positive] = np.log(-np.expm1(v[~positive]))
    return out


def _offdiag_kubo_mori(x, y):
    return np.log1p((x - y) / y) / (x - y)


def _offdiag_rld(x, y):
    return 0.5 * (1.0 / x + 1.0 / y)


def _offdiag_alpha_z(alpha, z):
    """
    zeta_{alpha,z}(x, y) for x > y. With u = ln(x/y), a = (1-alpha)/z, b = alpha/z, c = 1/z:
    (1/y) z/(alpha(1-alpha)) expm1(au) expm1(bu) / (expm1(u) expm1(cu)).
    """
    a, b, c = (1.0 - alpha) / z, alpha / z, 1.0 / z
    prefactor = abs(z / (alpha * (1.0 - alpha)))

    def zeta(x, y):
        u = np.log1p((x - y) / y)
        log_ratio = _log_abs_expm1(a * u) + _log_abs_expm1(b * u) - _log_abs_expm1(u) - _log_abs_expm1(c * u)
        return prefactor * np.exp(log_ratio) / y

    return zeta


def _offdiag_petz(alpha):
    prefactor = 1.0 / abs(alpha * (1.0 - alpha))

    def zeta(x, y):
        u = np.log1p((x - y) / y)
        log_ratio = _log_abs_expm1(alpha * u) + _log_abs_expm1((1.0 - alpha) * u) - 2.0 * _log_abs_expm1(u)
        return prefactor * np.exp(log_ratio) / y

    return zeta


def _offdiag_sandwiched(alpha):
    prefactor = 1.0 / abs(1.0 - alpha)

    def zeta(x, y):
        u = np.log1p((x - y) / y)
        log_ratio = _log_abs_expm1((1.0 - alpha) / alpha * u) - _log_abs_expm1(u / alpha)
        return prefactor * np.exp(log_ratio) / y

    return zeta


@dataclass(frozen=True, eq=False)
class ZetaKernel:
    """
    zeta(x, y) = kappa * 2 / (x + y) on the near-diagonal |x - y| <= tol * max(x, y),
    and offdiag(max(x, y), min(x, y)) elsewhere.
    """
    name: str
    label: str
    offdiag: Callable
    kappa: float = 1.0
    alpha: Optional[float] = None
    z: Optional[float] = None
    tol: float = DEFAULT_CLUSTER_TOL
    metadata: dict = field(default_factory=dict)

    def evaluate(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if np.any(x <= 0) or np.any(y <= 0):
            raise DomainError(f"{self.label} kernel needs positive arguments, got min {min(x.min(), y.min()):.3e}")
        hi, lo = np.maximum(x, y), np.minimum(x, y)
        near = hi - lo <= self.tol * hi
        out = np.empty(hi.shape)
        out[near] = 2.0 * self.kappa / (hi[near] + lo[near])
        far = ~near
        if np.any(far):
            out[far] = self.offdiag(hi[far], lo[far])
        return out if out.ndim else float(out)

    def __call__(self, x, y):
        return self.evaluate(x, y)

    def f_of_t(self, t):
        """f(t) = 1 / zeta(t, 1)."""
        return 1.0 / self.evaluate(t, 1.0)

    def scaled(self, factor):
        """factor * zeta, including the diagonal constant."""
        base = self.offdiag
        return ZetaKernel(
            name="custom",
            label=f"{factor:g}*{self.label}",
            offdiag=lambda x, y: factor * base(x, y),
            kappa=factor * self.kappa,
            tol=self.tol,
        )

    def perturbed(self, factor):
        """factor * zeta off the diagonal only; kappa is unchanged."""
        base = self.offdiag
        return ZetaKernel(
            name="custom",
            label=f"perturbed({self.label},{factor:g})",
            offdiag=lambda x, y: factor * base(x, y),
            kappa=self.kappa,
            alpha=self.alpha,
            z=self.z,
            tol=self.tol,
        )


def kubo_mori_kernel():
    return ZetaKernel("kubo_mori", "kubo_mori", _offdiag_kubo_mori)


def rld_kernel():
    return ZetaKernel("rld", "rld", _offdiag_rld)


def _kubo_mori_limit(name, label, alpha, z):
    logger.debug("%s: using the Kubo-Mori limit kernel", label)
    return ZetaKernel(name, label, _offdiag_kubo_mori, alpha=alpha, z=z, metadata={"limit": "kubo_mori"})


def _near_one(alpha):
    return abs(alpha - 1.0) < ALPHA_ONE_SWITCH


def alpha_z_kernel(alpha, z):
    """
    zeta_{alpha,z}. Switches to the Kubo-Mori kernel when |alpha - 1| < 1e-7 or z > 1e7.
    """
    if _near_one(alpha) and np.isfinite(z) and z > 0:
        return _kubo_mori_limit("alpha_z", f"alpha_z({alpha:g},{z:g})", alpha, z)
    if np.isinf(z) or (np.isfinite(z) and z > Z_INFINITY_SWITCH):
        if not np.isfinite(alpha) or alpha <= 0:
            raise ValidationError(f"alpha must be finite and positive, got {alpha}")
        return _kubo_mori_limit("alpha_z", f"alpha_z({alpha:g},{z:g})", alpha, z)
    params = RenyiParams(alpha, z)
    return ZetaKernel(
        "alpha_z", f"alpha_z({params.alpha:g},{params.z:g})",
        _offdiag_alpha_z(params.alpha, params.z), alpha=params.alpha, z=params.z,
    )


def petz_kernel(alpha):
    """zeta_{alpha,1}; alpha = 2 coincides with the RLD kernel."""
    if _near_one(alpha):
        return _kubo_mori_limit("petz", f"petz({alpha:g})", alpha, 1.0)
    params = RenyiParams(alpha, 1.0)
    return ZetaKernel("petz", f"petz({params.alpha:g})", _offdiag_petz(params.alpha), alpha=params.alpha, z=1.0)


def sandwiched_kernel(alpha):
    """zeta_{alpha,alpha}."""
    if _near_one(alpha):
        return _kubo_mori_limit("sandwiched", f"sandwiched({alpha:g})", alpha, alpha)
    params = RenyiParams(alpha, alpha)
    return ZetaKernel(
        "sandwiched", f"sandwiched({params.alpha:g})", _offdiag_sandwiched(params.alpha),
        alpha=params.alpha, z=params.alpha,
    )


def custom_kernel(offdiag, kappa=1.0, label="custom"):
    """User kernel; offdiag(x, y) is called with arrays x > y > 0."""
    if not kappa > 0:
        raise ValidationError(f"kappa must be positive, got {kappa}")
    return ZetaKernel("custom", label, offdiag, kappa=float(kappa))


def kernel_from_spec(spec):
    """
    Build a kernel from {"label": ..., "alpha": ..., "z": ...}.

    Raises:
        ValidationError: unknown label or missing parameters
    """
    label = spec.get("label")
    if label not in VALID_KERNELS or label == "custom":
        raise ValidationError(f"Invalid kernel '{label}'. Must be one of {VALID_KERNELS[:-1]}")
    if label == "kubo_mori":
        return kubo_mori_kernel()
    if label == "rld":
        return rld_kernel()
    if spec.get("alpha") is None:
        raise ValidationError(f"Kernel '{label}' needs alpha")
    alpha = float(spec["alpha"])
    if label == "petz":
        return petz_kernel(alpha)
    if label == "sandwiched":
        return sandwiched_kernel(alpha)
    if spec.get("z") is None:
        raise ValidationError("Kernel 'alpha_z' needs z")
    return alpha_z_kernel(alpha, float(spec["z"]))


def zeta_alpha_z(x, y, params):
    return alpha_z_kernel(params.alpha, params.z)(x, y)


def zeta_kubo_mori(x, y):
    """(ln x - ln y) / (x - y), 1/x on the diagonal."""
    return kubo_mori_kernel()(x, y)


def zeta_rld(x, y):
    """(1/x + 1/y) / 2."""
    return rld_kernel()(x, y)


def zeta_petz(x, y, alpha):
    return petz_kernel(alpha)(x, y)


def zeta_sandwiched(x, y, alpha):
    return sandwiched_kernel(alpha)(x, y)


def mc_function_petz(x, alpha):
    """alpha(1-alpha)(x-1)^2 / ((x^alpha - 1)(x^{1-alpha} - 1)), value 1 at x = 1."""
    return petz_kernel(alpha).f_of_t(x)


def mc_function_sandwiched(x, alpha):
    """(1-alpha)(x^{1/alpha} - 1) / (x^{(1-alpha)/alpha} - 1) = 1/zeta(x, 1)."""
    return sandwiched_kernel(alpha).f_of_t(x)


def operator_monotone_candidate(x, params):
    """
    (alpha(1-alpha)/z) (x-1)(x^{1/z}-1) / ((x^{(1-alpha)/z}-1)(x^{alpha/z}-1)) = 1/zeta_{alpha,z}(x, 1),
    with the removable value 1 at x = 1.
    """
    return alpha_z_kernel(params.alpha, params.z).f_of_t(x)


def _check_unit_interval(alpha, name):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"{name} integral representation needs alpha in (0, 1), got {alpha}")


def zeta_petz_integral(x, y, alpha):
    """sin^2(alpha pi) / (alpha(1-alpha) pi^2) J(alpha; x, y) J(1-alpha; x, y)."""
    _check_unit_interval(alpha, "Petz")
    prefactor = np.sin(alpha * np.pi) ** 2 / (alpha * (1.0 - alpha) * np.pi ** 2)
    return prefactor * power_integral(alpha, x, y) * power_integral(1.0 - alpha, x, y)


def zeta_sandwiched_integral(x, y, alpha):
    """sin((1-alpha) pi) / ((1-alpha) pi) J(1-alpha; x^{1/alpha}, y^{1/alpha})."""
    _check_unit_interval(alpha, "sandwiched")
    beta = 1.0 - alpha
    prefactor = np.sin(beta * np.pi) / (beta * np.pi)
    return prefactor * power_integral(beta, x ** (1.0 / alpha), y ** (1.0 / alpha))

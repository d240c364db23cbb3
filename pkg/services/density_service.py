"""
Probability densities on the real line whose Fourier transforms are the
spectral weights of the thermal and time-evolved information matrices.

    p(t)         = (2/pi) ln coth(pi|t|/2)                       <-> tanh(w/2)/(w/2)
    p_{a,z}(t)   = z/(2 pi a(1-a)) ln(1 + (sin(pi a)/sinh(pi z t))^2)  <-> f_{a,z}(w)
    q_{a,z}      = p * p_{a,z}                                    <-> f_{a,z}(w) tanh(w/2)/(w/2)
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from services.divergence_service import RenyiParams
from utils.exception import DomainError, NumericalError, UnsupportedError

logger = logging.getLogger(__name__)

SINGULARITY_SPLIT = 1e-2
SERIES_CUTOFF = 1e-6
ZERO_FREQUENCY = 1e-12
FOURIER_ACCEPT = 1e-6
QUAD_OPTIONS = dict(epsabs=1e-12, epsrel=1e-10, limit=400)


def default_window(z=1.0):
    """Half-width max(10, 10/z); the tails beyond it are below 1e-8."""
    return max(10.0, 10.0 / z)


def _nonzero(t):
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise DomainError("Density has an integrable log singularity at t = 0 and is not evaluated there")
    return t


def _check_unit_interval(params):
    if not 0.0 < params.alpha < 1.0:
        raise UnsupportedError(f"p_(alpha,z) is a probability density only for alpha in (0, 1), got {params.alpha}")


def _scalar(values):
    return float(values) if np.ndim(values) == 0 else values


def high_peak_tent(t):
    """(2/pi) ln coth(pi|t|/2) = (2/pi) [log1p(e^{-pi|t|}) - log1p(-e^{-pi|t|})]."""
    decay = np.exp(-np.pi * np.abs(_nonzero(t)))
    return _scalar(2.0 / np.pi * (np.log1p(decay) - np.log1p(-decay)))


def alpha_z_tent(t, params):
    """z / (2 pi alpha (1 - alpha)) ln(1 + (sin(pi alpha) / sinh(pi z t))^2) for alpha in (0, 1)."""
    _check_unit_interval(params)
    t = np.abs(_nonzero(t))
    a, z = params.alpha, params.z
    with np.errstate(over="ignore"):
        ratio = np.sin(np.pi * a) / np.sinh(np.pi * z * t)
    return _scalar(z / (2.0 * np.pi * a * (1.0 - a)) * np.log1p(ratio ** 2))


def alpha_z_tent_coth_form(t, params):
    """Same density written as ln(coth^2(pi z t) - (cos(pi alpha) / sinh(pi z t))^2)."""
    _check_unit_interval(params)
    t = np.abs(_nonzero(t))
    a, z = params.alpha, params.z
    x = np.pi * z * t
    inner = 1.0 / np.tanh(x) ** 2 - (np.cos(np.pi * a) / np.sinh(x)) ** 2
    return _scalar(z / (2.0 * np.pi * a * (1.0 - a)) * np.log(inner))


def tanhc(omega):
    """tanh(w/2) / (w/2), 1 at w = 0."""
    w = np.abs(np.asarray(omega, dtype=float))
    out = np.ones_like(w)
    small = w < SERIES_CUTOFF
    out[small] = 1.0 - w[small] ** 2 / 12.0
    big = ~small
    out[big] = np.tanh(0.5 * w[big]) / (0.5 * w[big])
    return _scalar(out)


def char_fn_alpha_z(omega, params):
    """
    f_{a,z}(w) = z / (a(1-a) w) (1 - e^{-(1-a)w/z})(1 - e^{-aw/z}) / (1 - e^{-w/z}),
    even in w, with the series 1 - a' b' w^2 / 12 (a' = (1-a)/z, b' = a/z) near 0.
    """
    w = np.abs(np.asarray(omega, dtype=float))
    a, b, c = (1.0 - params.alpha) / params.z, params.alpha / params.z, 1.0 / params.z
    prefactor = params.z / (params.alpha * (1.0 - params.alpha))
    out = np.empty_like(w)
    small = w < SERIES_CUTOFF
    out[small] = 1.0 - a * b * w[small] ** 2 / 12.0
    big = ~small
    wb = w[big]
    out[big] = prefactor / wb * np.expm1(-a * wb) * np.expm1(-b * wb) / -np.expm1(-c * wb)
    return _scalar(out)


def thermal_weight(omega, kernel):
    """
    2 zeta(e^{-|w|}, 1) (e^{-|w|} - 1)^2 / (w^2 (e^{-|w|} + 1)), with the value kappa at w = 0.
    """
    w = np.abs(np.asarray(omega, dtype=float))
    out = np.full(w.shape, float(kernel.kappa))
    far = w >= ZERO_FREQUENCY
    if np.any(far):
        wf = w[far]
        x = np.exp(-wf)
        out[far] = 2.0 * kernel.evaluate(x, np.ones_like(x)) * np.expm1(-wf) ** 2 / (wf ** 2 * (x + 1.0))
    return _scalar(out)


def time_evolved_weight(omega, kernel):
    """zeta(e^{-|w|}, 1) (1 - e^{-|w|}) / |w|, with the value kappa at w = 0."""
    w = np.abs(np.asarray(omega, dtype=float))
    out = np.full(w.shape, float(kernel.kappa))
    far = w >= ZERO_FREQUENCY
    if np.any(far):
        wf = w[far]
        x = np.exp(-wf)
        out[far] = kernel.evaluate(x, np.ones_like(x)) * -np.expm1(-wf) / wf
    return _scalar(out)


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """A density on the real line with its closed-form characteristic function."""
    label: str
    evaluate: Callable
    char_fn: Callable
    window: float

    def __call__(self, t):
        return self.evaluate(t)


def high_peak_tent_density():
    return DensitySpec("high_peak_tent", high_peak_tent, tanhc, default_window())


def alpha_z_tent_density(params):
    _check_unit_interval(params)
    return DensitySpec(
        f"alpha_z_tent({params.alpha:g},{params.z:g})",
        lambda t: alpha_z_tent(t, params),
        lambda w: char_fn_alpha_z(w, params),
        default_window(params.z),
    )


def convolved_density(params):
    """q_{a,z} = p * p_{a,z}, evaluated pointwise by quadrature."""
    _check_unit_interval(params)
    return DensitySpec(
        f"convolved({params.alpha:g},{params.z:g})",
        lambda t: convolve_densities(params.alpha, params.z, t),
        lambda w: char_fn_alpha_z(w, params) * tanhc(w),
        default_window(params.z),
    )


def _quad(fn, lo, hi, **kwargs):
    return integrate.quad(fn, lo, hi, **QUAD_OPTIONS, **kwargs)


def _half_line(g, omega, window, weight):
    """
    int_0^W g(t) trig(w t) dt: [0, delta] after t = e^{-u}, [delta, W] with the
    trigonometric quadrature weight.
    """
    if omega == 0.0 and weight == "sin":
        return 0.0, 0.0
    trig = np.cos if weight == "cos" else np.sin

    def head_integrand(u):
        t = np.exp(-u)
        # underflow: the integrand decays like u e^{-u}
        if t == 0.0:
            return 0.0
        return g(t) * trig(omega * t) * t

    head, head_err = _quad(head_integrand, -np.log(SINGULARITY_SPLIT), np.inf)
    if omega == 0.0:
        body, body_err = _quad(g, SINGULARITY_SPLIT, window)
    else:
        body, body_err = _quad(g, SINGULARITY_SPLIT, window, weight=weight, wvar=omega)
    return head + body, head_err + body_err


def numeric_fourier(density, omega, window=None):
    """
    int density(t) e^{i w t} dt over [-window, window] by quadrature.

    Returns:
        complex: the imaginary part vanishes (to quadrature accuracy) for even densities

    Raises:
        NumericalError: estimated quadrature error above 1e-6
    """
    evaluate = density.evaluate if isinstance(density, DensitySpec) else density
    if window is None:
        window = density.window if isinstance(density, DensitySpec) else default_window()
    omega = float(omega)

    def even(t):
        return float(evaluate(t)) + float(evaluate(-t))

    def odd(t):
        return float(evaluate(t)) - float(evaluate(-t))

    real, real_err = _half_line(even, omega, window, "cos")
    imag, imag_err = _half_line(odd, omega, window, "sin")
    error = real_err + imag_err
    if error > FOURIER_ACCEPT:
        raise NumericalError(f"Fourier transform at w={omega:g} did not converge (estimated error {error:.3e})")
    logger.debug("Fourier transform at w=%g: error estimate %.3e", omega, error)
    return complex(real, imag)


def density_mass(density, window=None):
    """Total mass int density(t) dt."""
    return numeric_fourier(density, 0.0, window).real


def convolved_mass(params):
    """int q_{a,z} = (int p)(int p_{a,z}); the mass of a convolution factorizes."""
    return density_mass(high_peak_tent_density()) * density_mass(alpha_z_tent_density(params))


def _convolve_point(t, params, window):
    t = float(t)
    points = sorted({min(0.0, t), max(0.0, t)})
    reach = window + abs(t)

    def integrand(s):
        if s == 0.0 or s == t:
            return 0.0
        return high_peak_tent(s) * alpha_z_tent(t - s, params)

    value, error = _quad(integrand, -reach, reach, points=points)
    if error > FOURIER_ACCEPT:
        raise NumericalError(f"Convolution at t={t:g} did not converge (estimated error {error:.3e})")
    return value


def convolve_densities(alpha, z, t_grid):
    """
    q_{a,z}(t) = int p(s) p_{a,z}(t - s) ds sampled on t_grid, split at the log
    singularities s = 0 and s = t.
    """
    params = RenyiParams(alpha, z)
    _check_unit_interval(params)
    window = default_window(z)
    grid = np.asarray(t_grid, dtype=float)
    values = np.array([_convolve_point(t, params, window) for t in grid.reshape(-1)])
    return _scalar(values.reshape(grid.shape))

"""
Natural gradient descent for thermal families (quantum Boltzmann machines):

    theta <- theta - eta (I_K(theta) + lambda Id)^{-1} grad L(theta),
    L(theta) = D(target || rho(theta)).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from services.config_service import build_family, build_kernel, parse_matrix
from services.divergence_service import umegaki
from services.family_service import ThermalFamily, fd_step, validate_state
from services.infomat_service import info_spectral
from utils.exception import NumericalError, ValidationError

logger = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-12
GRADIENT_STEP = 1e-5

LOG_COLUMNS = ["iter", "loss", "grad_norm", "min_eig"]


@dataclass
class NgdResult:
    theta: np.ndarray
    rows: list = field(default_factory=list)
    converged: bool = False

    @property
    def final_loss(self):
        return self.rows[-1]["loss"] if self.rows else None


def ngd_loss(family, target, theta):
    return umegaki(target, family.evaluate(theta))


def loss_gradient(family, target, theta, mode="fd", h=GRADIENT_STEP):
    """
    Gradient of D(target || rho(theta)); mode "analytic" uses <H_i>_target - <H_i>_rho.
    """
    if mode == "analytic":
        rho = family.evaluate(theta)
        return np.array([
            float(np.real(np.trace(target @ g)) - np.real(np.trace(rho @ g))) for g in family.generators
        ])
    if mode != "fd":
        raise ValidationError(f"Invalid gradient mode '{mode}'. Must be one of ['fd', 'analytic']")
    h = fd_step(theta, h)
    unit = np.eye(len(theta)) * h
    return np.array([
        (ngd_loss(family, target, theta + unit[i]) - ngd_loss(family, target, theta - unit[i])) / (2.0 * h)
        for i in range(len(theta))
    ])


def natural_gradient_step(metric, gradient, learning_rate, damping):
    """
    Raises:
        NumericalError: the metric is singular and no damping was given
    """
    values = metric.values
    min_eig = metric.min_eigenvalue
    scale = max(1.0, float(np.max(np.abs(values))))
    if damping == 0 and min_eig <= SINGULAR_RTOL * scale:
        raise NumericalError(
            f"Metric is singular (min eigenvalue {min_eig:.3e}); set a positive damping lambda_reg"
        )
    try:
        direction = linalg.solve(values + damping * np.eye(len(values)), gradient, assume_a="sym")
    except linalg.LinAlgError as e:
        raise NumericalError(f"Metric solve failed: {e}; set a positive damping lambda_reg")
    return learning_rate * direction, min_eig


def natural_gradient_descent(family, target, theta0, kernel, learning_rate=0.5, iterations=200,
                             damping=0.0, gradient="fd", loss_tol=1e-10):
    """
    Run NGD from theta0, logging (iter, loss, grad_norm, min_eig) per iteration.

    Stops after `iterations` updates or once the loss is below loss_tol.
    """
    if not isinstance(family, ThermalFamily):
        raise ValidationError(f"NGD needs a ThermalFamily, got {type(family).__name__}")
    if learning_rate < 0 or damping < 0:
        raise ValidationError("learning_rate and damping must be nonnegative")
    target = validate_state(target, label="target")
    theta = family.parameters(theta0).copy()
    result = NgdResult(theta=theta)

    for iteration in range(iterations + 1):
        loss = ngd_loss(family, target, theta)
        grad = loss_gradient(family, target, theta, gradient)
        metric = info_spectral(family, theta, kernel)
        row = {
            "iter": iteration,
            "loss": loss,
            "grad_norm": float(np.linalg.norm(grad)),
            "min_eig": metric.min_eigenvalue,
            "theta": theta.tolist(),
        }
        result.rows.append(row)
        logger.debug("NGD iter %d: loss %.3e, |grad| %.3e", iteration, loss, row["grad_norm"])
        if loss < loss_tol:
            result.converged = True
            break
        if iteration == iterations:
            break
        step, _ = natural_gradient_step(metric, grad, learning_rate, damping)
        theta = theta - step

    result.theta = theta
    return result


def run_ngd(config):
    """NGD from an NgdConfig: family, realizable or explicit target, metric kernel."""
    family, theta0 = build_family(config.family)
    if config.target is not None:
        target = parse_matrix(config.target, "target")
    else:
        target = family.evaluate(np.array(config.target_theta, dtype=float))
    return natural_gradient_descent(
        family,
        target,
        theta0,
        build_kernel(config.metric),
        learning_rate=config.learning_rate,
        iterations=config.iterations,
        damping=config.damping,
        gradient=config.gradient,
        loss_tol=config.loss_tol,
    )

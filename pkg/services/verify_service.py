"""
Property suites: orderings, data processing, convexity, additivity and the
oracle equivalences, run on seeded random instances.

Every check returns a PropertyReport whose worst_violation is normalized so that
passed <=> worst_violation <= tolerance.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from services.divergence_service import (
    RenyiParams,
    depolarizing_channel,
    hessian_target,
    in_dp_region,
    petz_renyi,
    pushforward,
    random_channel,
    sandwiched_renyi,
)
from services.family_service import (
    ExplicitFamily,
    ProductFamily,
    random_cq_family,
    random_density_matrix,
    random_thermal_family,
    random_time_evolved_family,
)
from services.infomat_service import (
    InfoMatrix,
    divergence_gradient_fd,
    info_cq_decomposed,
    info_hessian_oracle,
    info_spectral,
)
from services.kernel_service import (
    alpha_z_kernel,
    kubo_mori_kernel,
    petz_kernel,
    rld_kernel,
    sandwiched_kernel,
)
from services.structured_service import thermal_info_closed, time_evolved_info_closed
from utils.exception import CustomException, UnsupportedError, ValidationError

logger = logging.getLogger(__name__)

LOEWNER_TOL = 1e-9
DP_TOL = 1e-8
EXACT_TOL = 1e-8
ORACLE_RTOL = 1e-3
ORACLE_ATOL = 1e-6
GRADIENT_TOL = 1e-6
VALUE_SLACK = 1e-12

ORACLE_PAIRS = [(0.3, 0.6), (0.5, 0.5), (0.5, 1.0), (0.9, 2.0), (2.0, 1.0), (2.0, 2.0), (3.0, 2.5)]
PETZ_GRID = [0.1, 0.25, 0.5, 1.5, 3.0]
SANDWICHED_GRID = [0.2, 0.5, 1.5, 3.0]
Z_GRID = [0.25, 0.5, 1.0, 2.0, 4.0]
CLOSED_FORM_ALPHAS = [0.25, 0.5, 0.75]
CLOSED_FORM_ZS = [0.5, 1.0, 2.0]

# Built-in kernels that satisfy data processing for every family
DP_KERNEL_NAMES = ["kubo_mori", "rld"]


@dataclass
class PropertyReport:
    name: str
    instances_run: int
    worst_violation: float
    tolerance: float
    passed: bool
    seed: Optional[int] = None
    details: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "instances_run": self.instances_run,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "seed": self.seed,
            "details": self.details,
        }


def _report(name, violations, tolerance, seed=None, details=None):
    worst = float(max(violations)) if violations else 0.0
    return PropertyReport(name, len(violations), worst, tolerance, worst <= tolerance, seed, details or [])


def _values(matrix):
    return matrix.values if isinstance(matrix, InfoMatrix) else np.asarray(matrix, dtype=float)


def loewner_violation(lower, upper):
    """-min eig(upper - lower) / max(1, Tr upper); nonpositive when lower <= upper."""
    a, b = _values(lower), _values(upper)
    if a.shape != b.shape:
        raise ValidationError(f"Shapes differ: {a.shape} and {b.shape}")
    gap = float(linalg.eigvalsh(0.5 * ((b - a) + (b - a).T))[0])
    return -gap / max(1.0, float(np.trace(b)))


def relative_gap(a, b, floor=1e-12):
    a, b = _values(a), _values(b)
    return float(np.max(np.abs(a - b))) / max(float(np.max(np.abs(b))), floor)


def check_loewner(lower, upper, tol=LOEWNER_TOL, name="loewner"):
    """Pass iff lower <= upper in Loewner order, up to tol * max(1, Tr upper)."""
    return _report(name, [loewner_violation(lower, upper)], tol)


def _chain(matrices, increasing):
    """Worst Loewner violation over all ordered pairs of a monotone sequence."""
    violations = []
    for m in range(len(matrices)):
        for n in range(m + 1, len(matrices)):
            lower, upper = (matrices[m], matrices[n]) if increasing else (matrices[n], matrices[m])
            violations.append(loewner_violation(lower, upper))
    return violations


def check_petz_ordering(family, theta, alpha_grid, tol=LOEWNER_TOL):
    """Petz matrices decrease on (0, 1/2] and increase on [1/2, inf) in alpha."""
    grid = sorted(alpha_grid)
    low = [a for a in grid if a <= 0.5]
    high = [a for a in grid if a >= 0.5]
    violations = []
    for side, increasing in ((low, False), (high, True)):
        matrices = [info_spectral(family, theta, petz_kernel(a)) for a in side]
        violations.extend(_chain(matrices, increasing))
    return _report("petz_ordering", violations, tol)


def check_sandwiched_ordering(family, theta, alpha_grid, tol=LOEWNER_TOL):
    """Sandwiched matrices increase in alpha on (0, inf)."""
    matrices = [info_spectral(family, theta, sandwiched_kernel(a)) for a in sorted(alpha_grid)]
    return _report("sandwiched_ordering", _chain(matrices, True), tol)


def check_z_ordering(family, theta, alpha, z_grid, tol=LOEWNER_TOL):
    """alpha-z matrices increase in z for alpha in (0, 1) and decrease for alpha > 1."""
    matrices = [info_spectral(family, theta, alpha_z_kernel(alpha, z)) for z in sorted(z_grid)]
    return _report("z_ordering", _chain(matrices, alpha < 1), tol)


def dp_valid(kernel):
    """KM, RLD, or an alpha-z kernel inside the sufficient data-processing region."""
    if kernel.name in DP_KERNEL_NAMES or kernel.metadata.get("limit") == "kubo_mori":
        return True
    if kernel.name in ("alpha_z", "petz", "sandwiched") and kernel.kappa == 1.0:
        return in_dp_region(RenyiParams(kernel.alpha, kernel.z))
    return False


def _require_dp(kernel, exploratory):
    if not dp_valid(kernel) and not exploratory:
        raise UnsupportedError(
            f"Kernel '{kernel.label}' is outside the data-processing region; pass exploratory=True to scan anyway"
        )


def check_dp_info(family, theta, channel, kernel, tol=DP_TOL, exploratory=False):
    """I(theta) - I_{N o F}(theta) is PSD."""
    _require_dp(kernel, exploratory)
    before = info_spectral(family, theta, kernel)
    after = info_spectral(pushforward(family, channel), theta, kernel)
    name = "dp_info_exploratory" if exploratory and not dp_valid(kernel) else "dp_info"
    return _report(name, [loewner_violation(after, before)], tol)


def mixture_family(branches, weights):
    """theta -> sum_x p(x) rho_x(theta) for fixed weights p."""
    weights = np.asarray(weights, dtype=float)
    if len(branches) != weights.size:
        raise ValidationError(f"Need {weights.size} branches, got {len(branches)}")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValidationError("Mixture weights must be a probability vector")
    first = branches[0]
    return ExplicitFamily(
        state_fn=lambda theta: sum(p * b.evaluate(theta) for p, b in zip(weights, branches)),
        param_dim=first.param_dim,
        dim=first.dim,
        derivative_fn=lambda theta, i: sum(p * b.derivative(theta, i) for p, b in zip(weights, branches)),
        label="mixture",
        min_eig_floor=min(b.min_eig_floor for b in branches),
    )


def check_convexity(branches, weights, theta, kernel, tol=DP_TOL, exploratory=False):
    """sum_x p(x) I(rho_x) - I(sum_x p(x) rho_x) is PSD."""
    _require_dp(kernel, exploratory)
    averaged = sum(p * info_spectral(b, theta, kernel).values for p, b in zip(weights, branches))
    mixed = info_spectral(mixture_family(branches, weights), theta, kernel)
    return _report("convexity", [loewner_violation(mixed, averaged)], tol)


def check_renyi_value_orderings(rho, sigma, alpha, slack=VALUE_SLACK):
    """D~_a <= D-_a, and a D-_a <= D~_a for alpha in (0, 1)."""
    petz = petz_renyi(rho, sigma, alpha)
    sandwiched = sandwiched_renyi(rho, sigma, alpha)
    violations = [sandwiched - petz]
    if alpha < 1:
        violations.append(alpha * petz - sandwiched)
    return _report("renyi_value_orderings", violations, slack)


def oracle_deviation(spectral, hessian, rtol=ORACLE_RTOL, atol=ORACLE_ATOL):
    """max |S - H| / max(max |H|, atol / rtol); compared against rtol."""
    s, h = _values(spectral), _values(hessian)
    return float(np.max(np.abs(s - h))) / max(float(np.max(np.abs(h))), atol / rtol)


def check_oracle_equivalence(family, theta, params, kernel=None, rtol=ORACLE_RTOL, atol=ORACLE_ATOL):
    """Spectral alpha-z matrix against the Hessian of D_{a,z}/alpha."""
    kernel = kernel or alpha_z_kernel(params.alpha, params.z)
    spectral = info_spectral(family, theta, kernel)
    hessian = info_hessian_oracle(family, theta, hessian_target("alpha_z", params.alpha, params.z))
    return _report("oracle_equivalence", [oracle_deviation(spectral, hessian, rtol, atol)], rtol)


def check_first_derivative_zero(family, theta, target, tol=GRADIENT_TOL):
    gradient = divergence_gradient_fd(family, theta, target)
    return _report("first_derivative_zero", [float(np.linalg.norm(gradient))], tol)


def check_additivity(first, second, theta, kernel, tol=EXACT_TOL):
    """I(rho (x) sigma) = I(rho) + I(sigma) for families sharing theta."""
    product = info_spectral(ProductFamily(first, second, shared=True), theta, kernel)
    total = info_spectral(first, theta, kernel).values + info_spectral(second, theta, kernel).values
    return _report("additivity", [relative_gap(product, total)], tol)


def _random_shape(rng, dims=(2, 3, 4), params=(1, 2, 3)):
    return int(rng.choice(dims)), int(rng.choice(params))


def _theta(rng, param_dim):
    return rng.normal(scale=0.5, size=param_dim)


def _suite_oracle(rng, index, perturbation):
    alpha, z = ORACLE_PAIRS[index % len(ORACLE_PAIRS)]
    dim, param_dim = _random_shape(rng)
    make = random_thermal_family if index % 2 == 0 else random_time_evolved_family
    family = make(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    kernel = alpha_z_kernel(alpha, z)
    if perturbation is not None:
        kernel = kernel.perturbed(perturbation)
    report = check_oracle_equivalence(family, theta, RenyiParams(alpha, z), kernel)
    return report, {"kind": family.kind, "dim": dim, "param_dim": param_dim, "alpha": alpha, "z": z,
                    "theta": theta.tolist()}


def _suite_first_derivative(rng, index, perturbation):
    alpha, z = ORACLE_PAIRS[index % len(ORACLE_PAIRS)]
    dim, param_dim = _random_shape(rng)
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    report = check_first_derivative_zero(family, theta, hessian_target("alpha_z", alpha, z))
    return report, {"dim": dim, "param_dim": param_dim, "alpha": alpha, "z": z, "theta": theta.tolist()}


def _suite_km_rld(rng, index, perturbation):
    dim, param_dim = _random_shape(rng)
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    report = check_loewner(info_spectral(family, theta, kubo_mori_kernel()), info_spectral(family, theta, rld_kernel()))
    return report, {"dim": dim, "param_dim": param_dim, "theta": theta.tolist()}


def _suite_petz(rng, index, perturbation):
    dim, param_dim = _random_shape(rng)
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    return check_petz_ordering(family, theta, PETZ_GRID), {"dim": dim, "param_dim": param_dim,
                                                           "grid": PETZ_GRID, "theta": theta.tolist()}


def _suite_sandwiched(rng, index, perturbation):
    dim, param_dim = _random_shape(rng)
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    return check_sandwiched_ordering(family, theta, SANDWICHED_GRID), {"dim": dim, "param_dim": param_dim,
                                                                       "grid": SANDWICHED_GRID,
                                                                       "theta": theta.tolist()}


def _suite_z(rng, index, perturbation):
    dim, param_dim = _random_shape(rng)
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    alpha = 0.3 if index % 2 == 0 else 2.0
    return check_z_ordering(family, theta, alpha, Z_GRID), {"dim": dim, "param_dim": param_dim, "alpha": alpha,
                                                            "grid": Z_GRID, "theta": theta.tolist()}


def _dp_kernels():
    return [kubo_mori_kernel(), rld_kernel(), alpha_z_kernel(0.3, 0.7), alpha_z_kernel(0.5, 1.0),
            petz_kernel(1.5), sandwiched_kernel(2.0)]


def _suite_dp(rng, index, perturbation):
    dim, param_dim = _random_shape(rng, dims=(2, 3))
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    kernels = _dp_kernels()
    kernel = kernels[index % len(kernels)]
    if index % 3 == 2:
        channel = depolarizing_channel(dim, float(rng.uniform(0.1, 0.9)))
    else:
        channel = random_channel(dim, dim, int(rng.integers(2, 5)), rng)
    report = check_dp_info(family, theta, channel, kernel)
    return report, {"dim": dim, "param_dim": param_dim, "kernel": kernel.label, "channel": channel.label,
                    "theta": theta.tolist()}


def _suite_convexity(rng, index, perturbation):
    dim, param_dim = _random_shape(rng, dims=(2, 3))
    count = int(rng.integers(2, 4))
    branches = [random_thermal_family(dim, param_dim, rng, label=f"branch{x}") for x in range(count)]
    weights = rng.dirichlet(np.ones(count))
    theta = _theta(rng, param_dim)
    kernels = _dp_kernels()
    kernel = kernels[index % len(kernels)]
    report = check_convexity(branches, weights, theta, kernel)
    return report, {"dim": dim, "param_dim": param_dim, "branches": count, "kernel": kernel.label,
                    "weights": weights.tolist(), "theta": theta.tolist()}


def _suite_values(rng, index, perturbation):
    dim = int(rng.choice([2, 3, 4]))
    alpha = [0.3, 0.7, 1.5, 2.5][index % 4]
    rho, sigma = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
    return check_renyi_value_orderings(rho, sigma, alpha), {"dim": dim, "alpha": alpha}


def _suite_additivity(rng, index, perturbation):
    dim, param_dim = _random_shape(rng, dims=(2, 3))
    first = random_thermal_family(dim, param_dim, rng, label="first")
    second = random_thermal_family(2, param_dim, rng, label="second")
    theta = _theta(rng, param_dim)
    kernels = [kubo_mori_kernel(), rld_kernel(), alpha_z_kernel(0.5, 0.5), alpha_z_kernel(3.0, 2.5)]
    kernel = kernels[index % len(kernels)]
    return check_additivity(first, second, theta, kernel), {"dim": dim, "param_dim": param_dim,
                                                            "kernel": kernel.label, "theta": theta.tolist()}


def _suite_cq(rng, index, perturbation):
    alphabet, dim, param_dim = int(rng.integers(2, 4)), int(rng.choice([2, 3])), int(rng.choice([1, 2, 3]))
    family = random_cq_family(alphabet, dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    kernels = [kubo_mori_kernel(), rld_kernel(), alpha_z_kernel(0.5, 1.0), alpha_z_kernel(2.0, 2.0)]
    kernel = kernels[index % len(kernels)]
    gap = relative_gap(info_cq_decomposed(family, theta, kernel), info_spectral(family, theta, kernel))
    return _report("cq_decomposition", [gap], EXACT_TOL), {"alphabet": alphabet, "dim": dim,
                                                           "param_dim": param_dim, "kernel": kernel.label,
                                                           "theta": theta.tolist()}


def _closed_form_params(index):
    alpha = CLOSED_FORM_ALPHAS[index % len(CLOSED_FORM_ALPHAS)]
    z = CLOSED_FORM_ZS[(index // len(CLOSED_FORM_ALPHAS)) % len(CLOSED_FORM_ZS)]
    return RenyiParams(alpha, z)


def _suite_thermal(rng, index, perturbation):
    params = _closed_form_params(index)
    dim, param_dim = _random_shape(rng)
    family = random_thermal_family(dim, param_dim, rng)
    theta = _theta(rng, param_dim)
    gap = relative_gap(thermal_info_closed(family, theta, params),
                       info_spectral(family, theta, alpha_z_kernel(params.alpha, params.z)))
    return _report("thermal_closed_form", [gap], EXACT_TOL), {"dim": dim, "param_dim": param_dim,
                                                              "alpha": params.alpha, "z": params.z,
                                                              "theta": theta.tolist()}


def _suite_time_evolved(rng, index, perturbation):
    params = _closed_form_params(index)
    dim, param_dim = _random_shape(rng)
    family = random_time_evolved_family(dim, param_dim, rng)
    phi = _theta(rng, param_dim)
    gap = relative_gap(time_evolved_info_closed(family, phi, params),
                       info_spectral(family, phi, alpha_z_kernel(params.alpha, params.z)))
    return _report("time_evolved_closed_form", [gap], EXACT_TOL), {"dim": dim, "param_dim": param_dim,
                                                                   "alpha": params.alpha, "z": params.z,
                                                                   "theta": phi.tolist()}


# Named suites: (instance function, tolerance)
SUITES = {
    "oracle_equivalence": (_suite_oracle, ORACLE_RTOL),
    "first_derivative_zero": (_suite_first_derivative, GRADIENT_TOL),
    "km_rld_ordering": (_suite_km_rld, LOEWNER_TOL),
    "petz_ordering": (_suite_petz, LOEWNER_TOL),
    "sandwiched_ordering": (_suite_sandwiched, LOEWNER_TOL),
    "z_ordering": (_suite_z, LOEWNER_TOL),
    "data_processing": (_suite_dp, DP_TOL),
    "convexity": (_suite_convexity, DP_TOL),
    "renyi_value_orderings": (_suite_values, VALUE_SLACK),
    "additivity": (_suite_additivity, EXACT_TOL),
    "cq_decomposition": (_suite_cq, EXACT_TOL),
    "thermal_closed_form": (_suite_thermal, EXACT_TOL),
    "time_evolved_closed_form": (_suite_time_evolved, EXACT_TOL),
}

DEFAULT_SUITE = list(SUITES)


def _run_instance(name, index, seed_sequence, perturbation):
    rng = np.random.default_rng(seed_sequence)
    instance_fn, _ = SUITES[name]
    try:
        report, detail = instance_fn(rng, index, perturbation)
        return report.worst_violation, report.tolerance, detail
    except CustomException as e:
        logger.warning("Suite %s instance %d raised: %s", name, index, e.message)
        return float("inf"), None, {"error": e.message}


def run_suite(name, seed=42, instances=10, max_workers=4, kernel_perturbation=None):
    """
    Run one named suite on `instances` seeded random instances.

    Instance rngs come from SeedSequence(seed).spawn(instances); the worst violation
    is a max, so the report does not depend on completion order.
    """
    if name not in SUITES:
        raise ValidationError(f"Unknown suite '{name}'. Must be one of {list(SUITES)}")
    _, tolerance = SUITES[name]
    children = np.random.SeedSequence(seed).spawn(instances)
    outcomes = {}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_index = {
            executor.submit(_run_instance, name, index, child, kernel_perturbation): index
            for index, child in enumerate(children)
        }
        for future in as_completed(future_to_index):
            outcomes[future_to_index[future]] = future.result()

    violations, details = [], []
    for index in sorted(outcomes):
        violation, instance_tolerance, detail = outcomes[index]
        violations.append(violation)
        if not violation <= (instance_tolerance or tolerance):
            details.append({"instance": index, "seed": seed, "violation": violation, **detail})
    logger.debug("Suite %s: %d instances, %d failing", name, len(violations), len(details))
    return _report(name, violations, tolerance, seed, details)


def run_suites(names, seed=42, instances=10, max_workers=4, kernel_perturbation=None):
    """Run each named suite; an empty list runs nothing."""
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValidationError(f"Unknown suites {unknown}. Must be among {list(SUITES)}")
    return [run_suite(n, seed, instances, max_workers, kernel_perturbation) for n in names]

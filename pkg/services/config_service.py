"""
Run configuration: JSON loading, validation and the builders that turn a
validated configuration into families and kernels.

Complex matrices are written {"re": [[...]], "im": [[...]]} row-major; "im" may
be omitted for real matrices.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from services.family_service import (
    ExplicitFamily,
    PureStateFamily,
    ThermalFamily,
    TimeEvolvedFamily,
)
from services.kernel_service import VALID_KERNELS, kernel_from_spec
from services.matcore_service import HERMITIAN_ATOL, eig_hermitian
from utils.exception import ConfigValidationError, CustomException

logger = logging.getLogger(__name__)

# Valid family kinds in configuration files
VALID_FAMILY_KINDS = ["affine", "thermal", "time_evolved", "pure"]

# Valid compute methods
VALID_METHODS = ["spectral", "hessian", "both", "closed"]

# Valid Hessian divergences (override of the kernel's default divergence)
VALID_DIVERGENCES = ["umegaki", "alpha_z", "petz", "sandwiched", "log_euclidean", "geometric", "belavkin_staszewski"]

# Valid NGD gradient modes
VALID_GRADIENTS = ["fd", "analytic"]

# Required matrix keys per family kind
FAMILY_MATRIX_FIELDS = {
    "affine": ["base", "directions"],
    "thermal": ["generators"],
    "time_evolved": ["base_generator", "generators"],
    "pure": ["psi0", "generators"],
}

DEFAULT_TOLERANCES = {"hessian_step": None}
DEFAULT_SWEEP = {"alpha_grid": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0], "z_grid": [0.5, 1.0, 2.0]}
DEFAULT_VERIFY = {"suites": [], "instances": 10, "max_workers": 4, "kernel_perturbation": None}
DEFAULT_DENSITIES = {"alpha": 0.5, "z": 0.5, "t_grid": None, "omega_grid": None}


def config_hash(data):
    """SHA-256 of the canonical JSON (sorted keys, no whitespace)."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def serialize_matrix(matrix):
    a = np.asarray(matrix, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def parse_matrix(data, context="matrix"):
    """
    Raises:
        ConfigValidationError: missing parts, ragged rows or mismatched shapes
    """
    errors = validate_matrix(data, context, hermitian=False)
    if errors:
        raise ConfigValidationError(f"Validation failed: {'; '.join(errors)}")
    re = np.array(data["re"], dtype=float)
    im = np.array(data["im"], dtype=float) if "im" in data else np.zeros_like(re)
    return re + 1j * im


def parse_vector(data, context="vector"):
    if not isinstance(data, dict) or "re" not in data:
        raise ConfigValidationError(f"Validation failed: {context}: expected {{'re': [...], 'im': [...]}}")
    re = np.array(data["re"], dtype=float)
    im = np.array(data.get("im", np.zeros_like(re)), dtype=float)
    if re.ndim != 1 or re.shape != im.shape:
        raise ConfigValidationError(f"Validation failed: {context}: real and imaginary parts must be equal 1-D lists")
    return re + 1j * im


def validate_matrix(data, context, hermitian=True):
    """
    Validate one {"re", "im"} matrix.

    Returns:
        list: validation errors
    """
    if not isinstance(data, dict) or "re" not in data:
        return [f"{context}: expected an object with 're' (and optionally 'im')"]
    errors = []
    try:
        re = np.array(data["re"], dtype=float)
        im = np.array(data["im"], dtype=float) if "im" in data else np.zeros_like(re)
    except (TypeError, ValueError):
        return [f"{context}: entries must be numbers in rectangular rows"]
    if re.ndim != 2 or re.shape[0] != re.shape[1] or re.shape[0] == 0:
        errors.append(f"{context}: must be a non-empty square matrix, got shape {re.shape}")
    elif re.shape != im.shape:
        errors.append(f"{context}: 'im' has shape {im.shape}, 're' has {re.shape}")
    elif not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        errors.append(f"{context}: entries must be finite")
    elif hermitian:
        a = re + 1j * im
        asymmetry = float(np.max(np.abs(a - a.conj().T)))
        if asymmetry > HERMITIAN_ATOL:
            errors.append(f"{context}: matrix is not Hermitian (max |A - A^H| = {asymmetry:.3e})")
    return errors


def validate_family_spec(spec):
    """
    Validate the "family" section.

    Returns:
        list: validation errors
    """
    if not isinstance(spec, dict):
        return ["family: must be an object"]
    kind = spec.get("kind")
    if kind not in VALID_FAMILY_KINDS:
        return [f"family: Invalid kind '{kind}'. Must be one of {VALID_FAMILY_KINDS}"]

    errors = []
    for name in FAMILY_MATRIX_FIELDS[kind]:
        if name not in spec:
            errors.append(f"family: Missing required field '{name}'")
    if errors:
        return errors

    dims = set()
    single = [name for name in ("base", "base_generator", "offset") if name in spec]
    for name in single:
        errors.extend(validate_matrix(spec[name], f"family.{name}"))
        if not errors:
            dims.add(len(spec[name]["re"]))
    for name in ("directions", "generators"):
        if name not in spec:
            continue
        if not isinstance(spec[name], list) or not spec[name]:
            errors.append(f"family.{name}: must be a non-empty list of matrices")
            continue
        for j, matrix in enumerate(spec[name]):
            matrix_errors = validate_matrix(matrix, f"family.{name}[{j}]")
            errors.extend(matrix_errors)
            if not matrix_errors:
                dims.add(len(matrix["re"]))
    if kind == "pure":
        psi = spec["psi0"]
        if not isinstance(psi, dict) or "re" not in psi:
            errors.append("family.psi0: expected an object with 're' (and optionally 'im')")
        else:
            dims.add(len(psi["re"]))
    if len(dims) > 1:
        errors.append(f"family: matrices have inconsistent dimensions {sorted(dims)}")

    theta = spec.get("theta")
    if not isinstance(theta, list) or not all(isinstance(t, (int, float)) for t in theta):
        errors.append("family.theta: must be a list of numbers")
    else:
        count = len(spec.get("directions") or spec.get("generators") or [])
        if count and len(theta) != count:
            errors.append(f"family.theta: has {len(theta)} entries, family has {count} parameters")
    return errors


def validate_kernel_spec(spec, context="kernel"):
    if not isinstance(spec, dict):
        return [f"{context}: must be an object"]
    errors = []
    label = spec.get("label")
    if label not in VALID_KERNELS or label == "custom":
        return [f"{context}: Invalid label '{label}'. Must be one of {VALID_KERNELS[:-1]}"]
    if label in ("alpha_z", "petz", "sandwiched"):
        alpha = spec.get("alpha")
        if not isinstance(alpha, (int, float)) or alpha <= 0:
            errors.append(f"{context}: '{label}' needs a positive alpha")
    if label == "alpha_z":
        z = spec.get("z")
        if not isinstance(z, (int, float)) or z <= 0:
            errors.append(f"{context}: 'alpha_z' needs a positive z")
    divergence = spec.get("divergence")
    if divergence is not None and divergence not in VALID_DIVERGENCES:
        errors.append(f"{context}: Invalid divergence '{divergence}'. Must be one of {VALID_DIVERGENCES}")
    return errors


def _validate_grid(values, context, positive=False):
    if values is None:
        return []
    if not isinstance(values, list) or not values or not all(isinstance(v, (int, float)) for v in values):
        return [f"{context}: must be a non-empty list of numbers"]
    if positive and any(v <= 0 for v in values):
        return [f"{context}: entries must be positive"]
    return []


def validate_run_config(data):
    """
    Validate a run configuration.

    Raises:
        ConfigValidationError: with every problem found, joined by '; '
    """
    if not isinstance(data, dict):
        raise ConfigValidationError("Configuration must be a JSON object")
    errors = []
    if "family" in data:
        errors.extend(validate_family_spec(data["family"]))
    if "kernel" in data:
        errors.extend(validate_kernel_spec(data["kernel"]))
    method = data.get("method", "spectral")
    if method not in VALID_METHODS:
        errors.append(f"method: Invalid method '{method}'. Must be one of {VALID_METHODS}")
    seed = data.get("seed", 42)
    if not isinstance(seed, int) or seed < 0:
        errors.append(f"seed: must be a nonnegative integer, got {seed!r}")
    sweep = data.get("sweep") or {}
    errors.extend(_validate_grid(sweep.get("alpha_grid"), "sweep.alpha_grid", positive=True))
    errors.extend(_validate_grid(sweep.get("z_grid"), "sweep.z_grid", positive=True))
    densities = data.get("densities") or {}
    errors.extend(_validate_grid(densities.get("t_grid"), "densities.t_grid"))
    errors.extend(_validate_grid(densities.get("omega_grid"), "densities.omega_grid"))
    if densities.get("t_grid") and 0 in densities["t_grid"]:
        errors.append("densities.t_grid: t = 0 is a log singularity of the densities")
    verify = data.get("verify") or {}
    suites = verify.get("suites", [])
    if not isinstance(suites, list):
        errors.append("verify.suites: must be a list of suite names")
    if errors:
        raise ConfigValidationError(f"Validation failed: {'; '.join(errors)}")
    return {"success": True, "errors": []}


def _merged(defaults, values):
    out = dict(defaults)
    out.update(values or {})
    return out


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    family: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=lambda: {"label": "kubo_mori"})
    method: str = "spectral"
    output: dict = field(default_factory=lambda: {"dir": "out", "csv": True})
    seed: int = 42
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    verify: dict = field(default_factory=lambda: dict(DEFAULT_VERIFY))
    sweep: dict = field(default_factory=lambda: dict(DEFAULT_SWEEP))
    densities: dict = field(default_factory=lambda: dict(DEFAULT_DENSITIES))

    @classmethod
    def from_dict(cls, data):
        validate_run_config(data)
        data = copy.deepcopy(data)
        return cls(
            name=data.get("name", "run"),
            family=data.get("family", {}),
            kernel=data.get("kernel", {"label": "kubo_mori"}),
            method=data.get("method", "spectral"),
            output=_merged({"dir": "out", "csv": True}, data.get("output")),
            seed=data.get("seed", 42),
            tolerances=_merged(DEFAULT_TOLERANCES, data.get("tolerances")),
            verify=_merged(DEFAULT_VERIFY, data.get("verify")),
            sweep=_merged(DEFAULT_SWEEP, data.get("sweep")),
            densities=_merged(DEFAULT_DENSITIES, data.get("densities")),
        )

    def to_dict(self):
        return copy.deepcopy({
            "name": self.name,
            "family": self.family,
            "kernel": self.kernel,
            "method": self.method,
            "output": self.output,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "verify": self.verify,
            "sweep": self.sweep,
            "densities": self.densities,
        })

    @property
    def hash(self):
        return config_hash(self.to_dict())


def validate_ngd_config(data):
    if not isinstance(data, dict):
        raise ConfigValidationError("NGD configuration must be a JSON object")
    errors = []
    family = data.get("family")
    if not isinstance(family, dict) or family.get("kind") != "thermal":
        errors.append("family: NGD needs a family of kind 'thermal'")
    else:
        errors.extend(validate_family_spec(family))
    if "target" in data:
        errors.extend(validate_matrix(data["target"], "target"))
    elif not isinstance(data.get("target_theta"), list):
        errors.append("target: give either 'target' (a density matrix) or 'target_theta'")
    errors.extend(validate_kernel_spec(data.get("metric", {"label": "kubo_mori"}), "metric"))
    rate = data.get("learning_rate", 0.5)
    if not isinstance(rate, (int, float)) or rate < 0:
        errors.append(f"learning_rate: must be nonnegative, got {rate!r}")
    damping = data.get("damping", 0.0)
    if not isinstance(damping, (int, float)) or damping < 0:
        errors.append(f"damping: must be nonnegative, got {damping!r}")
    iterations = data.get("iterations", 200)
    if not isinstance(iterations, int) or iterations < 0:
        errors.append(f"iterations: must be a nonnegative integer, got {iterations!r}")
    gradient = data.get("gradient", "fd")
    if gradient not in VALID_GRADIENTS:
        errors.append(f"gradient: Invalid gradient '{gradient}'. Must be one of {VALID_GRADIENTS}")
    if errors:
        raise ConfigValidationError(f"Validation failed: {'; '.join(errors)}")
    return {"success": True, "errors": []}


@dataclass(frozen=True)
class NgdConfig:
    """Natural-gradient run on a thermal family; learning_rate 0 leaves theta unchanged."""
    family: dict
    target: dict = None
    target_theta: list = None
    metric: dict = field(default_factory=lambda: {"label": "kubo_mori"})
    learning_rate: float = 0.5
    iterations: int = 200
    damping: float = 0.0
    gradient: str = "fd"
    loss_tol: float = 1e-10
    output: dict = field(default_factory=lambda: {"dir": "out"})
    seed: int = 42

    @classmethod
    def from_dict(cls, data):
        validate_ngd_config(data)
        data = copy.deepcopy(data)
        return cls(
            family=data["family"],
            target=data.get("target"),
            target_theta=data.get("target_theta"),
            metric=data.get("metric", {"label": "kubo_mori"}),
            learning_rate=float(data.get("learning_rate", 0.5)),
            iterations=int(data.get("iterations", 200)),
            damping=float(data.get("damping", 0.0)),
            gradient=data.get("gradient", "fd"),
            loss_tol=float(data.get("loss_tol", 1e-10)),
            output=_merged({"dir": "out"}, data.get("output")),
            seed=data.get("seed", 42),
        )

    def to_dict(self):
        data = {
            "family": self.family,
            "metric": self.metric,
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "damping": self.damping,
            "gradient": self.gradient,
            "loss_tol": self.loss_tol,
            "output": self.output,
            "seed": self.seed,
        }
        if self.target is not None:
            data["target"] = self.target
        if self.target_theta is not None:
            data["target_theta"] = self.target_theta
        return copy.deepcopy(data)

    @property
    def hash(self):
        return config_hash(self.to_dict())


def _load_json(file_path):
    try:
        with open(file_path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigValidationError(f"Config file not found: {file_path}")
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"Invalid JSON in config file: {e}")


def load_and_validate_config(file_path):
    """
    Load and validate a run configuration from a JSON file.

    Returns:
        RunConfig

    Raises:
        ConfigValidationError: missing file, bad JSON or failed validation
    """
    data = _load_json(file_path)
    logger.debug("Validating run config %s", file_path)
    return RunConfig.from_dict(data)


def load_and_validate_ngd_config(file_path):
    data = _load_json(file_path)
    logger.debug("Validating NGD config %s", file_path)
    return NgdConfig.from_dict(data)


def with_overrides(config, seed=None, out=None, method=None, alpha=None, z=None, suites=None):
    """Apply CLI flag values on top of a RunConfig; None leaves a value unchanged."""
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if out is not None:
        changes["output"] = {**config.output, "dir": out}
    if method is not None:
        if method not in VALID_METHODS:
            raise ConfigValidationError(f"Invalid method '{method}'. Must be one of {VALID_METHODS}")
        changes["method"] = method
    if alpha is not None or z is not None:
        kernel = dict(config.kernel)
        densities = dict(config.densities)
        if alpha is not None:
            kernel["alpha"] = alpha
            densities["alpha"] = alpha
        if z is not None:
            kernel["z"] = z
            densities["z"] = z
        errors = validate_kernel_spec(kernel)
        if errors:
            raise ConfigValidationError(f"Validation failed: {'; '.join(errors)}")
        changes["kernel"] = kernel
        changes["densities"] = densities
    if suites is not None:
        changes["verify"] = {**config.verify, "suites": list(suites)}
    return replace(config, **changes)


def build_kernel(spec):
    return kernel_from_spec(spec)


def build_family(spec):
    """
    Build a StateFamily from a validated "family" section.

    Returns:
        tuple: (family, theta)
    """
    errors = validate_family_spec(spec)
    if errors:
        raise ConfigValidationError(f"Validation failed: {'; '.join(errors)}")
    kind = spec["kind"]
    label = spec.get("label", kind)
    theta = np.array(spec["theta"], dtype=float)
    try:
        if kind == "affine":
            directions = [parse_matrix(d) for d in spec["directions"]]
            family = ExplicitFamily.affine(parse_matrix(spec["base"]), directions, label=label)
        elif kind == "thermal":
            offset = parse_matrix(spec["offset"]) if "offset" in spec else None
            family = ThermalFamily([parse_matrix(g) for g in spec["generators"]], offset=offset, label=label)
        elif kind == "time_evolved":
            family = TimeEvolvedFamily(
                parse_matrix(spec["base_generator"]), [parse_matrix(g) for g in spec["generators"]], label=label
            )
        else:
            family = _unitary_orbit(parse_vector(spec["psi0"], "family.psi0"),
                                    [parse_matrix(g) for g in spec["generators"]], label)
    except ConfigValidationError:
        raise
    except CustomException as e:
        raise ConfigValidationError(f"Invalid family: {e.message}")
    return family, theta


def _unitary_orbit(psi0, generators, label):
    """psi(theta) = e^{-i sum_j theta_j H_j} psi0 with finite-difference tangents."""
    stack = np.array(generators)
    psi0 = psi0 / np.linalg.norm(psi0)

    def amplitude(theta):
        spectrum = eig_hermitian(np.tensordot(theta, stack, axes=1))
        unitary = (spectrum.vectors * np.exp(-1j * spectrum.values)) @ spectrum.vectors.conj().T
        return unitary @ psi0

    return PureStateFamily(amplitude, len(generators), len(psi0), label=label)

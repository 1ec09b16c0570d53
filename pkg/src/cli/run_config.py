"""
Run configuration for the command-line entry points.

A RunConfig is resolved from, in order of precedence, the command-line
flags, an optional JSON run-config file (--config) and the INI settings of
ConfigManager. Unknown run-config keys are rejected.
"""

import json
import re
from dataclasses import dataclass, field
from typing import List, Optional

from ..core.config_manager import ConfigManager
from ..core.errors import ConfigError, ObservableError
from ..core.optimizer import OptimizerConfig
from ..core.observable import PauliObservable
from ..core.sampler import StateVector, TfimParams, prepare_zero_state, trotter_evolve

STATE_KINDS = ("zero", "tfim")

RUN_CONFIG_KEYS = frozenset(
    {
        "qubits",
        "state",
        "J",
        "h",
        "dt",
        "steps",
        "shots",
        "seed",
        "sweeps",
        "optimize",
        "obs",
        "truth",
        "output",
        "workers",
        "duals",
        "duals_dir",
        "repetitions",
        "max_steps",
        "inner_solver",
        "max_inner_iters",
        "grad_tol",
        "overfit_patience",
        "overfit_ratio",
        "split_seed",
    }
)

_TFIM_PROVENANCE = re.compile(
    r"^tfim:J=(?P<J>[^,]+),h=(?P<h>[^,]+),dt=(?P<dt>[^,]+),steps=(?P<steps>\d+)$"
)


def load_run_config_file(path: str) -> dict:
    """
    Read a JSON run-config file.

    Raises:
        ConfigError: If the file is unreadable, not an object, or has unknown keys
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read run config {path}: {e}")
    if not isinstance(document, dict):
        raise ConfigError(f"run config {path} must be a JSON object")
    unknown = sorted(set(document) - RUN_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown run-config keys: {', '.join(unknown)}")
    return document


def _convert(key, value, kind):
    if value is None:
        return None
    try:
        if kind is bool:
            if isinstance(value, str):
                return value.strip().lower() in ("true", "1", "yes", "on")
            return bool(value)
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be of type {kind.__name__}, got {value!r}")


def _observable_from_entry(entry) -> PauliObservable:
    """'0.5*ZZ+XX' strings or [[coef, word], ...] term lists."""
    if isinstance(entry, str):
        return PauliObservable.parse(entry)
    if isinstance(entry, list):
        try:
            terms = [(float(coeff), str(word)) for coeff, word in entry]
        except (TypeError, ValueError):
            raise ObservableError(f"bad observable term list {entry!r}")
        return PauliObservable.from_terms(terms)
    raise ObservableError(f"bad observable {entry!r}")


@dataclass
class RunConfig:
    """
    Fully resolved parameters of one subcommand.

    Attributes:
        command (str): Subcommand name
        n_qubits (int | None): System size (taken from the shot file for estimate)
        state (str): 'zero' or 'tfim'
        optimize (bool): Whether estimate runs the split protocol
        optimizer (OptimizerConfig): Dual optimization settings
        obs_specs (list): Raw observable specs; empty means Z on every qubit
        truths (list | None): Supplied exact expectation values, one per observable
    """

    command: str
    n_qubits: Optional[int] = None
    state: str = "zero"
    J: float = 0.5236
    h: float = 1.0
    dt: float = 0.1
    steps: int = 0
    shots: int = 1000
    seed: int = 0
    optimize: bool = True
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    obs_specs: List = field(default_factory=list)
    truths: Optional[List[float]] = None
    output: Optional[str] = None
    n_workers: int = 1
    duals: Optional[str] = None
    duals_dir: Optional[str] = None
    repetitions: int = 1
    max_steps: int = 4
    state_cap: int = 14
    oracle_cap: int = 8
    show_progress: bool = False

    def __post_init__(self):
        if self.state not in STATE_KINDS:
            raise ConfigError(f"state must be one of {STATE_KINDS}, got '{self.state}'")
        if self.n_qubits is not None and self.n_qubits < 1:
            raise ConfigError(f"qubits must be >= 1, got {self.n_qubits}")
        if self.shots < 1:
            raise ConfigError(f"shots must be >= 1, got {self.shots}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.steps < 0 or self.max_steps < 0:
            raise ConfigError("Trotter step counts must be >= 0")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        # no observables means the single default Z string
        n_observables = len(self.obs_specs) or 1
        if self.truths is not None and len(self.truths) != n_observables:
            raise ConfigError("one truth value per observable is required")

    def require_qubits(self) -> int:
        if self.n_qubits is None:
            raise ConfigError(f"'{self.command}' needs --qubits")
        return self.n_qubits

    def observables(self, n_qubits: int) -> List[PauliObservable]:
        """Parsed observables, checked against the system size."""
        if not self.obs_specs:
            return [PauliObservable.z_string(n_qubits)]
        observables = [_observable_from_entry(entry) for entry in self.obs_specs]
        for obs in observables:
            if obs.n_qubits != n_qubits:
                raise ObservableError(
                    f"observable '{obs.label()}' acts on {obs.n_qubits} qubits, "
                    f"system has {n_qubits}"
                )
        return observables

    def tfim_params(self, steps: Optional[int] = None) -> TfimParams:
        return TfimParams(
            self.require_qubits(), self.J, self.h, self.dt, self.steps if steps is None else steps
        )

    def state_vector(self, steps: Optional[int] = None) -> StateVector:
        """The state described by the run: |0...0>, optionally Trotter-evolved."""
        initial = prepare_zero_state(self.require_qubits(), self.state_cap)
        if self.state == "zero":
            return initial
        return trotter_evolve(initial, self.tfim_params(steps))


def state_from_provenance(
    provenance: str, n_qubits: int, cap: int
) -> Optional[StateVector]:
    """
    Rebuild the sampled state from a shot-file provenance string.

    Returns None when the provenance is unknown or N exceeds the cap.
    """
    if n_qubits > cap:
        return None
    if provenance == "zero":
        return prepare_zero_state(n_qubits, cap)
    match = _TFIM_PROVENANCE.match(provenance)
    if not match:
        return None
    try:
        params = TfimParams(
            n_qubits,
            float(match["J"]),
            float(match["h"]),
            float(match["dt"]),
            int(match["steps"]),
        )
    except ValueError:
        return None
    return trotter_evolve(prepare_zero_state(n_qubits, cap), params)


def build_run_config(command: str, args, config_manager: ConfigManager) -> RunConfig:
    """
    Resolve a RunConfig from parsed arguments, the run-config file and the INI.

    Args:
        command (str): Subcommand name
        args: argparse namespace; flags left at None fall through
        config_manager (ConfigManager): INI settings

    Raises:
        ConfigError: On unknown keys or values of the wrong type
    """
    file_values = load_run_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(key, fallback, kind=None):
        value = getattr(args, key, None)
        if value is None:
            value = file_values.get(key)
        if value is None:
            value = fallback
        return _convert(key, value, kind) if kind is not None else value

    sampler = config_manager.get_sampler_settings()
    show_progress = config_manager.show_progress()

    optimize = pick("optimize", True, bool)
    optimizer = OptimizerConfig.from_config_manager(
        config_manager,
        n_sweeps=pick("sweeps", None, int),
        max_inner_iters=pick("max_inner_iters", None, int),
        grad_tol=pick("grad_tol", None, float),
        overfit_patience=pick("overfit_patience", None, int),
        overfit_ratio=pick("overfit_ratio", None, float),
        rng_seed=pick("split_seed", None, int),
        inner_solver=pick("inner_solver", None, str),
    )

    obs_specs = pick("obs", [])
    if isinstance(obs_specs, str):
        obs_specs = [obs_specs]
    truths = pick("truth", None)
    if truths is not None:
        if not isinstance(truths, list):
            truths = [truths]
        truths = [_convert("truth", t, float) for t in truths]

    return RunConfig(
        command=command,
        n_qubits=pick("qubits", None, int),
        state=pick("state", "zero", str),
        J=pick("J", sampler["J"], float),
        h=pick("h", sampler["h"], float),
        dt=pick("dt", sampler["dt"], float),
        steps=pick("steps", sampler["steps"], int),
        shots=pick("shots", 1000, int),
        seed=pick("seed", 0, int),
        optimize=optimize,
        optimizer=optimizer,
        obs_specs=list(obs_specs),
        truths=truths,
        output=pick("output", None, str),
        n_workers=pick("workers", config_manager.get_n_workers(), int),
        duals=pick("duals", None, str),
        duals_dir=pick("duals_dir", None, str),
        repetitions=pick("repetitions", 1, int),
        max_steps=pick("max_steps", 4, int),
        state_cap=config_manager.get_state_cap(),
        oracle_cap=config_manager.get_oracle_cap(),
        show_progress=show_progress,
    )

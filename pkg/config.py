"""
Configuration settings for DP minimax experiments

Experiment files are JSON objects merged over CONFIG. Unknown keys are
rejected and every violated constraint is reported as a ConfigError naming
the key.
"""

import copy
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

from errors import ConfigError

CONFIG = {
    # Problem instance; missing keys come from INSTANCE_DEFAULTS[kind]
    "instance": {"kind": "quadratic"},

    # Sweep
    "n": [1000],                # Training set sizes
    "T": "n^(2/3)",             # Iterations: positive integer or "n^(2/3)"
    "phi": 0.0,                 # Step-size shift, eta_t = 1/(rho (t + phi))

    # Privacy
    "private": True,            # False trains noiseless GDA
    "epsilon": 1.0,
    "delta": 1e-5,
    "c": None,                  # Calibration constant (None = searched default)

    # Risk estimation
    "replicates": 64,           # Independent training draws per n
    "n_eval": 100000,           # Eval-set size for population estimates
    "tol": 1e-8,                # Inner solver residual tolerance
    "max_iter": 1000000,        # Inner solver iteration cap

    # Stability
    "stability_indices": 10,
    "stability_replacements": 5,

    # Bounds
    "zeta": 0.1,
    "iota": 0.5,

    # noise-check subcommand
    "noise_check": {"sigma": 1.0, "p": 16, "zeta": 0.05, "draws": 100000},

    # bounds subcommand
    "bound": {"name": "theorem2_gamma", "inputs": {}},

    # Execution
    "seed": 0,
    "workers": None,            # None = DPMINIMAX_WORKERS or 1
    "retain_iterates": False,   # Write trajectory CSV in `run`
    "output_dir": "results",
}

INSTANCE_DEFAULTS = {
    "quadratic": {
        "dim_w": 8, "dim_v": 8, "dim_z": 8,
        "rho": 1.0,
        "coupling": 0.5,         # Spectral norm of the drawn coupling matrix
        "data_radius": 1.0,
        "radius_w": None,        # None = twice the saddle-norm bound
        "radius_v": None,
    },
    "auc": {
        "dim": 4,
        "prior": 0.5,            # P(y = +1)
        "rho": 1.0,
        "data_radius": 1.0,
        "radius_w": 1.0,
        "constant_samples": 1000000,
    },
}

T_RULE = "n^(2/3)"


@dataclass
class ExperimentConfig:
    instance: dict
    n: list
    T: Union[int, str]
    phi: float
    private: bool
    epsilon: float
    delta: float
    c: Optional[float]
    replicates: int
    n_eval: int
    tol: float
    max_iter: int
    stability_indices: int
    stability_replacements: int
    zeta: float
    iota: float
    noise_check: dict
    bound: dict
    seed: int
    workers: Optional[int]
    retain_iterates: bool
    output_dir: str

    def iterations(self, n: int) -> int:
        """T for training size n"""
        if self.T == T_RULE:
            # guard against n^(2/3) landing just below an integer
            return max(1, math.floor(n ** (2.0 / 3.0) + 1e-9))
        return self.T

    def as_dict(self) -> dict:
        return asdict(self)


def _require(ok: bool, key: str, constraint: str):
    if not ok:
        raise ConfigError(key, constraint)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value))


def _positive_int(section: dict, key: str, prefix: str = ""):
    _require(_is_int(section[key]) and section[key] >= 1, prefix + key, "must be a positive integer")


def _positive_real(section: dict, key: str, prefix: str = ""):
    _require(_is_real(section[key]) and section[key] > 0, prefix + key, "must be a positive number")


def _merge(defaults: dict, given: dict, prefix: str = "") -> dict:
    unknown = sorted(set(given) - set(defaults))
    _require(not unknown, prefix + (unknown[0] if unknown else ""), "unknown key")
    merged = copy.deepcopy(defaults)
    merged.update(given)
    return merged


def _instance_section(given) -> dict:
    _require(isinstance(given, dict), "instance", "must be an object")
    kind = given.get("kind", "quadratic")
    _require(kind in INSTANCE_DEFAULTS, "instance.kind", f"must be one of {sorted(INSTANCE_DEFAULTS)}")
    rest = {k: v for k, v in given.items() if k != "kind"}
    section = _merge(INSTANCE_DEFAULTS[kind], rest, "instance.")
    p = "instance."
    if kind == "quadratic":
        for key in ("dim_w", "dim_v", "dim_z"):
            _positive_int(section, key, p)
        for key in ("rho", "data_radius"):
            _positive_real(section, key, p)
        _require(_is_real(section["coupling"]) and section["coupling"] >= 0, p + "coupling", "must be >= 0")
        for key in ("radius_w", "radius_v"):
            if section[key] is not None:
                _positive_real(section, key, p)
    else:
        _positive_int(section, "dim", p)
        _positive_int(section, "constant_samples", p)
        for key in ("rho", "data_radius", "radius_w"):
            _positive_real(section, key, p)
        _require(_is_real(section["prior"]) and 0 < section["prior"] < 1, p + "prior", "must lie in (0,1)")
    section["kind"] = kind
    return section


def _validate(config: dict) -> ExperimentConfig:
    config["instance"] = _instance_section(config["instance"])

    n = config["n"]
    if _is_int(n):
        n = [n]
    _require(isinstance(n, list) and n and all(_is_int(v) and v >= 1 for v in n),
             "n", "must be a positive integer or a non-empty list of them")
    config["n"] = n

    T = config["T"]
    _require(T == T_RULE or (_is_int(T) and T >= 1), "T", f"must be a positive integer or \"{T_RULE}\"")

    _require(_is_real(config["phi"]) and config["phi"] >= 0, "phi", "must be >= 0")
    _require(isinstance(config["private"], bool), "private", "must be true or false")
    _positive_real(config, "epsilon")
    _require(_is_real(config["delta"]) and 0 < config["delta"] < 1, "delta", "must lie in (0,1)")
    if config["c"] is not None:
        _positive_real(config, "c")

    for key in ("replicates", "n_eval", "max_iter", "stability_indices", "stability_replacements"):
        _positive_int(config, key)
    _positive_real(config, "tol")
    _require(_is_real(config["zeta"]) and 0 < config["zeta"] < 1, "zeta", "must lie in (0,1)")
    _require(_is_real(config["iota"]) and 0 < config["iota"] < 1, "iota", "must lie in (0,1)")

    check = _merge(CONFIG["noise_check"], config["noise_check"], "noise_check.")
    _require(_is_real(check["sigma"]) and check["sigma"] >= 0, "noise_check.sigma", "must be >= 0")
    _positive_int(check, "p", "noise_check.")
    _positive_int(check, "draws", "noise_check.")
    _require(_is_real(check["zeta"]) and math.exp(-check["p"] / 8.0) < check["zeta"] < 1,
             "noise_check.zeta", "must lie in (exp(-p/8), 1)")
    config["noise_check"] = check

    bound = _merge(CONFIG["bound"], config["bound"], "bound.")
    _require(isinstance(bound["name"], str), "bound.name", "must be a string")
    _require(isinstance(bound["inputs"], dict), "bound.inputs", "must be an object")
    config["bound"] = bound

    _require(_is_int(config["seed"]) and 0 <= config["seed"] < 2 ** 64, "seed", "must be a 64-bit unsigned integer")
    if config["workers"] is not None:
        _positive_int(config, "workers")
    _require(isinstance(config["retain_iterates"], bool), "retain_iterates", "must be true or false")
    _require(isinstance(config["output_dir"], str) and config["output_dir"] != "", "output_dir",
             "must be a non-empty path")
    return ExperimentConfig(**config)


def parse_config(text: str) -> ExperimentConfig:
    """Validated config from a JSON document, defaults filled in"""
    try:
        given = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"malformed JSON ({e})")
    _require(isinstance(given, dict), "config", "must be a JSON object")
    return _validate(_merge(CONFIG, given))


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Load a config file, or the defaults when no path is given"""
    if path is None:
        return parse_config("{}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return parse_config(f.read())
    except IOError as e:
        raise ConfigError("config", f"cannot read {path} ({e})")

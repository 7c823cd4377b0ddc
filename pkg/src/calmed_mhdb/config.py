"""Run configuration: flat key-value files plus command-line overrides.

The format is one ``key = value`` pair per line, values written as JSON
(numbers bare, strings quoted, booleans lowercase).  ``#`` starts a
comment.  Example::

    grid_n = 64
    nu = 0.05
    mu = 0.05
    kappa = 0.05
    g = 1.0
    alpha = 1.0
    calming = "rational1"
    epsilon = 0.1
    dt = 0.001
    t_final = 0.25
    initial = "taylor-green+gaussian-theta"
    seed = 0

Optional keys: cfl_safety (default 0.5), record_every (default 1),
snapshot_every (default 0 = off), output_dir.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .calming import CalmingSpec
from .dynamics import PhysParams, StepperConfig

__all__ = ["RunConfig", "ConfigError", "parse_config_text", "load_config", "config_hash"]

REQUIRED_KEYS = (
    "grid_n",
    "nu",
    "mu",
    "kappa",
    "g",
    "alpha",
    "calming",
    "dt",
    "t_final",
    "initial",
    "seed",
)

OPTIONAL_DEFAULTS = {
    "epsilon": 0.0,
    "cfl_safety": 0.5,
    "record_every": 1,
    "snapshot_every": 0,
    "output_dir": "out",
}

KNOWN_KEYS = set(REQUIRED_KEYS) | set(OPTIONAL_DEFAULTS)


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Validated inputs of one simulation run."""

    grid_n: int
    params: PhysParams
    calming: CalmingSpec
    stepper: StepperConfig
    initial: str
    seed: int
    output_dir: str = "out"
    record_every: int = 1
    snapshot_every: int = 0

    def __post_init__(self):
        if self.grid_n < 8 or self.grid_n % 2:
            raise ConfigError(f"grid_n must be even and >= 8, got {self.grid_n}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    def flat_items(self):
        """The configuration as sorted (key, value) pairs."""
        return sorted(
            {
                "grid_n": self.grid_n,
                "nu": self.params.nu,
                "mu": self.params.mu,
                "kappa": self.params.kappa,
                "g": self.params.g,
                "alpha": self.params.alpha,
                "calming": self.calming.family,
                "epsilon": self.calming.epsilon,
                "dt": self.stepper.dt,
                "t_final": self.stepper.t_final,
                "cfl_safety": self.stepper.cfl_safety,
                "initial": self.initial,
                "seed": self.seed,
                "output_dir": self.output_dir,
                "record_every": self.record_every,
                "snapshot_every": self.snapshot_every,
            }.items()
        )

    def canonical_text(self) -> str:
        return "\n".join(f"{k} = {json.dumps(v)}" for k, v in self.flat_items()) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config.canonical_text().encode()).hexdigest()


def _parse_lines(text: str, known_keys) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key not in known_keys:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"line {lineno}: value for {key!r} is not valid JSON: {value!r} ({exc.msg})"
            ) from exc
    return values


def build_config(values: dict) -> RunConfig:
    """Assemble and validate a RunConfig from flat key-value data."""
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    merged = dict(OPTIONAL_DEFAULTS)
    merged.update(values)
    if merged["calming"] != "identity" and "epsilon" not in values:
        raise ConfigError("missing required field(s): epsilon (non-identity calming)")

    def expect(key, kinds, conv=None):
        v = merged[key]
        if isinstance(v, bool) or not isinstance(v, kinds):
            raise ConfigError(f"field {key!r} has wrong type: {v!r}")
        return conv(v) if conv else v

    try:
        params = PhysParams(
            nu=expect("nu", (int, float), float),
            mu=expect("mu", (int, float), float),
            kappa=expect("kappa", (int, float), float),
            g=expect("g", (int, float), float),
            alpha=expect("alpha", (int, float), float),
        )
        spec = CalmingSpec(expect("calming", str), expect("epsilon", (int, float), float))
        stepper = StepperConfig(
            dt=expect("dt", (int, float), float),
            t_final=expect("t_final", (int, float), float),
            cfl_safety=expect("cfl_safety", (int, float), float),
        )
        return RunConfig(
            grid_n=expect("grid_n", int),
            params=params,
            calming=spec,
            stepper=stepper,
            initial=expect("initial", str),
            seed=expect("seed", int),
            output_dir=expect("output_dir", str),
            record_every=expect("record_every", int),
            snapshot_every=expect("snapshot_every", int),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    values = _parse_lines(text, KNOWN_KEYS)
    if overrides:
        values.update(overrides)
    return build_config(values)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, overrides)


# ---------------------------------------------------------------------------
# sweep plans share the flat format with a ladder instead of one epsilon

SWEEP_REQUIRED_KEYS = (
    "grid_n",
    "nu",
    "mu",
    "kappa",
    "g",
    "alpha",
    "calming",
    "epsilon_ladder",
    "dt",
    "t_final",
    "initial",
    "seed",
)

SWEEP_OPTIONAL_DEFAULTS = {
    "record_every": 1,
    "cfl_safety": 0.9,
    "output_dir": "out",
}

SWEEP_KNOWN_KEYS = set(SWEEP_REQUIRED_KEYS) | set(SWEEP_OPTIONAL_DEFAULTS)


def parse_sweep_text(text: str, overrides: dict | None = None):
    """Parse an epsilon-sweep plan file into (SweepPlan, output_dir)."""
    from .experiments import SweepPlan  # local import to avoid a cycle

    values = _parse_lines(text, SWEEP_KNOWN_KEYS)
    if overrides:
        values.update(overrides)
    missing = [k for k in SWEEP_REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    merged = dict(SWEEP_OPTIONAL_DEFAULTS)
    merged.update(values)
    ladder = merged["epsilon_ladder"]
    if not isinstance(ladder, (list, tuple)) or not ladder:
        raise ConfigError("field 'epsilon_ladder' must be a nonempty JSON list")
    try:
        params = PhysParams(
            nu=float(merged["nu"]),
            mu=float(merged["mu"]),
            kappa=float(merged["kappa"]),
            g=float(merged["g"]),
            alpha=float(merged["alpha"]),
        )
        plan = SweepPlan(
            grid_n=int(merged["grid_n"]),
            params=params,
            family=str(merged["calming"]),
            epsilon_ladder=tuple(float(e) for e in ladder),
            dt=float(merged["dt"]),
            t_final=float(merged["t_final"]),
            initial=str(merged["initial"]),
            seed=int(merged["seed"]),
            record_every=int(merged["record_every"]),
            cfl_safety=float(merged["cfl_safety"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return plan, str(merged["output_dir"])


def load_sweep_plan(path, overrides: dict | None = None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_sweep_text(text, overrides)

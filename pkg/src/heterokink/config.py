"""Run configuration: documented defaults, key=value files, overrides.

Precedence, lowest to highest: built-in defaults, the file named by the
HETEROKINK_CONFIG environment variable, a --config file, --set key=value
flags.  Unknown keys are rejected everywhere so typos fail loudly.
All algorithms are deterministic; there is no seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .bvp import BvpConfig
from .errors import ConfigError
from .integrate import IntegratorConfig
from .shoot import ShootConfig

__all__ = ["DEFAULTS", "RunConfig", "load_config"]

# key -> default; the value's type is the key's type
DEFAULTS: dict[str, object] = {
    # integrator
    "rtol": 1e-10,
    "atol": 1e-12,
    "max_steps": 1_000_000,
    "divergence_bound": 1e6,
    # shooting
    "eps_offset": 1e-6,
    "threshold": 1.5,
    "a_min": 0.55,
    "a_max": 0.9999,
    "a_step": 1e-3,
    "bisect_tol": 1e-12,
    "x_max": 400.0,
    "refine_below": 0.05,
    "accept_distance": 1e-8,
    "workers": 1,
    "angle": 0.0,
    # collocation
    "update_tol": 1e-10,
    "residual_tol": 1e-9,
    "mesh_tol": 1e-9,
    "max_newton": 30,
    "max_nodes": 20_000,
    "max_mesh_cycles": 12,
    "n_init": 301,
}


def _coerce(key: str, raw: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean for {key}: {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value for {key}: {raw!r}") from exc
    return raw


@dataclass
class RunConfig:
    values: dict[str, object] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str):
        if key not in self.values:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = _coerce(key, raw)

    def apply_file(self, path) -> None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{ln}: unknown config key {key!r}")
            self.values[key] = _coerce(key, val.strip())

    def integrator_config(self) -> IntegratorConfig:
        return IntegratorConfig(
            rtol=self["rtol"],
            atol=self["atol"],
            max_steps=self["max_steps"],
            divergence_bound=self["divergence_bound"],
        )

    def shoot_config(self, **overrides) -> ShootConfig:
        kw = dict(
            eps_offset=self["eps_offset"],
            threshold=self["threshold"],
            A_grid=(self["a_min"], self["a_max"], self["a_step"]),
            bisect_tol=self["bisect_tol"],
            x_max=self["x_max"],
            refine_below=self["refine_below"],
            accept_distance=self["accept_distance"],
            workers=self["workers"],
            integrator=self.integrator_config(),
        )
        kw.update(overrides)
        return ShootConfig(**kw)

    def bvp_config(self, **overrides) -> BvpConfig:
        kw = dict(
            update_tol=self["update_tol"],
            residual_tol=self["residual_tol"],
            mesh_tol=self["mesh_tol"],
            max_newton=self["max_newton"],
            max_nodes=self["max_nodes"],
            max_mesh_cycles=self["max_mesh_cycles"],
        )
        kw.update(overrides)
        return BvpConfig(**kw)


def load_config(config_path=None, overrides=()) -> RunConfig:
    """Defaults, then HETEROKINK_CONFIG file, then config_path, then --set pairs."""
    rc = RunConfig()
    env_path = os.environ.get("HETEROKINK_CONFIG")
    if env_path:
        rc.apply_file(env_path)
    if config_path:
        rc.apply_file(config_path)
    for pair in overrides:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, val = pair.partition("=")
        rc.set(key.strip(), val.strip())
    return rc

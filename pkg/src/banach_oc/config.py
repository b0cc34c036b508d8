"""Flat ``key = value`` experiment configuration."""
import dataclasses
import math
from dataclasses import dataclass, fields

import numpy as np

from .dynamics import TimeGrid
from .monotone import MonotoneConfig
from .pmp import PmpConfig
from .spectral import CircleGrid
from .systems import AmariParams, AmariSystem, LqToyParams, LqToySystem


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    system: str = "amari"
    # neural field
    gamma: float = 1.0
    beta: float = 2.0
    vartheta: float = 0.5
    kappa: float = 4.0
    K: int = 3
    A_d: float = 0.8
    kappa_d: float = 6.0
    theta_star: float = math.pi / 3
    # shared by both systems
    alpha: float = 0.1
    R: float = 1000.0
    # linear-quadratic toy
    target: float = 1.0
    # discretization
    T: float = 3.0
    steps: int = 640
    n: int = 256
    initial: str = "zero"
    disable_drift: bool = False
    control_file: str = ""
    method: str = "both"
    # PMP descent
    pmp_max_iters: int = 40
    eta0: float = 0.5
    backtrack_factor: float = 0.5
    eta_min: float = 1e-6
    pmp_tol_rel: float = 1e-8
    # monotone descent
    N: int = 32
    epsilon: float = None
    monotone_max_iters: int = 1
    monotone_tol_rel: float = 1e-8
    smooth_output: bool = False
    smooth_window: int = 21
    probes_per_subinterval: int = 1
    out: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.system not in ("amari", "lq_toy"):
            raise ConfigError(f"system must be 'amari' or 'lq_toy', got {self.system!r}")
        if self.method not in ("pmp", "monotone", "both"):
            raise ConfigError(f"method must be 'pmp', 'monotone' or 'both', got {self.method!r}")
        if self.initial not in ("zero", "target"):
            raise ConfigError(f"initial must be 'zero' or 'target', got {self.initial!r}")

    def time_grid(self):
        return TimeGrid(self.T, self.steps)

    def build_system(self):
        if self.system == "lq_toy":
            sys_ = LqToySystem(LqToyParams(alpha=self.alpha, target=self.target, horizon=self.T, R=self.R))
            if self.initial == "target":
                sys_.x0 = np.array([self.target])
            return sys_
        params = AmariParams(
            gamma=self.gamma,
            beta=self.beta,
            vartheta=self.vartheta,
            kappa=self.kappa,
            K=self.K,
            A_d=self.A_d,
            kappa_d=self.kappa_d,
            theta_star=self.theta_star,
            alpha=self.alpha,
            R=self.R,
        )
        system = AmariSystem(params, CircleGrid(self.n), drift_enabled=not self.disable_drift)
        if self.initial == "target":
            system.x0 = system.target.copy()
        return system

    def pmp_config(self):
        return PmpConfig(
            max_iters=self.pmp_max_iters,
            eta0=self.eta0,
            backtrack_factor=self.backtrack_factor,
            eta_min=self.eta_min,
            tol_rel=self.pmp_tol_rel,
        )

    def monotone_config(self):
        return MonotoneConfig(
            N=self.N,
            epsilon=self.epsilon,
            max_iters=self.monotone_max_iters,
            tol_rel=self.monotone_tol_rel,
            smooth_output=self.smooth_output,
            smooth_window=self.smooth_window,
            probes_per_subinterval=self.probes_per_subinterval,
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_TYPES["epsilon"] = "optional_float"


def _parse_value(kind, text):
    if kind == "optional_float":
        return None if text.lower() in ("auto", "none", "") else float(text)
    if kind in (float, "float"):
        return float(text)
    if kind in (int, "int"):
        return int(text)
    if kind in (bool, "bool"):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return text


def parse_config(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(_TYPES[key], value)
        except ValueError as err:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {err}") from None
    try:
        return ExperimentConfig(**values)
    except ConfigError as err:
        raise ConfigError(f"{source}: {err}") from None


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text, str(path))


def dump_config(cfg):
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            text = "auto"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"

"""Flat ``key = value`` experiment configuration with a typed schema."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

COMMANDS = ("simulate", "regularity", "tails", "convergence", "stability", "verify-ops",
            "feasibility", "lfsm")

# Seed offsets per concern, added to seed_base.
SEED_OFFSETS = {"path": 0, "noise": 1000, "tail": 2000}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "simulate"
    # state grid and horizon
    grid_n: int = 128
    horizon_t: float = 0.25
    n_cells: int = 1024
    path_ratio: int = 4
    # value grid
    value_m: int = 512
    x_max: float = 2 * math.pi
    # noise
    alpha: float = 2.0
    hurst: float = 1.0 / 3.0
    tail_vmax: float = 0.0          # 0 means 50 * horizon_t
    omega_kind: str = "lfsm"        # lfsm | zero
    xi_kind: str = "smooth"         # smooth | white | one
    xi_modes: int = 3
    xi_scale: float = 1.0
    # nonlinearity
    g_kind: str = "sin"             # sin | weierstrass | step | zero | one
    g_scale: float = 40.0
    g_kappa: float = 0.5
    step_delta: float = 0.3
    drift_kind: str = "none"        # none | sin | cos
    drift_scale: float = 1.0
    psi_kind: str = "cos"
    # exponents
    beta: float = 0.5
    vartheta: float = 0.1
    gamma: float = 1.0
    sigma: float = 0.35
    kappa: float = 3.0
    nu: float = 0.5
    # weight on the value domain
    weight_kind: str = "polynomial"
    weight_lambda: float = 2.0
    # solver
    picard_tol: float = 1e-8
    k_max: int = 50
    safety: float = 0.5
    n_out: int = 64
    # ensembles and experiments
    seed_base: int = 0
    samples: int = 20
    n_t: int = 513
    block_j: int = 5
    tail_s: float = 0.5
    tail_t: float = 1.0
    tail_n_fine: int = 1024
    sewing_levels: int = 10
    widths: str = "8,4,2,1"
    kappa_in: float = 1.0

    def seeds(self) -> dict:
        return {k: self.seed_base + v for k, v in SEED_OFFSETS.items()}

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.grid_n < 8 or self.grid_n & (self.grid_n - 1):
            raise ConfigError(f"grid_n must be a power of 2 >= 8, got {self.grid_n}")
        if self.value_m < 64 or self.value_m & (self.value_m - 1):
            raise ConfigError(f"value_m must be a power of 2 >= 64, got {self.value_m}")
        if not 0 < self.alpha <= 2:
            raise ConfigError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (0 < self.hurst < 1 or abs(self.hurst * self.alpha - 1) < 1e-12):
            raise ConfigError(f"hurst must lie in (0, 1) or equal 1/alpha, got {self.hurst}")
        if self.horizon_t <= 0:
            raise ConfigError("horizon_t must be positive")
        if self.path_ratio < 4:
            raise ConfigError("path_ratio must be >= 4")
        if self.n_cells % self.n_out:
            raise ConfigError(f"n_cells={self.n_cells} must be a multiple of n_out={self.n_out}")
        if self.command in ("simulate", "stability"):
            rho = (self.beta + self.vartheta) / self.alpha
            if not 0 <= self.vartheta < self.beta < self.alpha - self.vartheta:
                raise ConfigError(f"need vartheta < beta < alpha - vartheta "
                                  f"(beta={self.beta}, vartheta={self.vartheta})")
            if not 1 - self.gamma < self.sigma < self.gamma - rho:
                raise ConfigError(f"sigma={self.sigma} must lie in (1 - gamma, gamma - rho) = "
                                  f"({1 - self.gamma:.4g}, {self.gamma - rho:.4g})")
        if not 0 <= self.nu <= 1:
            raise ConfigError("nu must lie in [0, 1]")
        return self

    def width_list(self):
        return [float(w) for w in self.widths.split(",") if w.strip()]

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)!r}\n" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(key, raw):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    typ = _FIELDS[key].type
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        text = text[1:-1]
    try:
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ}") from None
    return text


def parse_assignments(lines, base=None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {line!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        setattr(cfg, key, _coerce(key, val))
    return cfg


def load_config(path, base=None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    if p.suffix == ".json":
        data = json.loads(text).get("config", {})
        cfg = base or ExperimentConfig()
        for k, v in data.items():
            setattr(cfg, k, _coerce(k, str(v)))
        return cfg
    return parse_assignments(text.splitlines(), base)

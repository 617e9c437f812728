"""Flat ``key = value`` run configuration shared by every CLI subcommand."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .calibration import US_POPULATION_2020, default_params, params_to_text, params_from_text
from .errors import ConfigError
from .integrator import IntegrationConfig
from .model import ModelParams, format_beta, parse_beta
from .multirisk import DAILY_RATE, MRGroupParams, MRParams, baseline_groups

GROUP_KEYS = ("n", "w", "lbar", "ifr", "kappa", "delta")
MODEL_KEYS = tuple(f.name for f in fields(ModelParams))


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _default_groups() -> dict:
    out = {}
    for g in baseline_groups():
        for key in GROUP_KEYS:
            out[f"{key}_{g.name}"] = getattr(g, key)
    return out


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=default_params)
    # integration
    dt: float = 0.25
    horizon: float = 365.0
    clamp_negatives: bool = True
    e0: float = 1e-6
    # calibration
    deaths_csv: str = ""
    segment_breaks: tuple = ()
    population: float = US_POPULATION_2020
    # reproduction: optional "S,E,I,Q,H,R" state at which to evaluate R_C
    state: tuple = ()
    # multi-risk model
    mr_beta: tuple = ((0.0, 0.3),)
    groups: dict = field(default_factory=_default_groups)
    theta: float = 1.0
    r: float = DAILY_RATE
    chi: float = 20.0
    w_rep: float = 1.0
    uniform_lbar: float = 0.7
    normalize_shares: bool = False
    strict_discount: bool = False
    # policy grid
    level_step: float = 0.05
    interval_breaks: tuple = ()
    gdp_budget: float = 0.035
    chi_sweep: tuple = (1.0, 5.0, 10.0, 20.0, 50.0, 100.0)
    # run
    out_dir: str = "out"
    workers: int = 1
    seed: int = 0

    _SCALARS = {
        "dt": float, "horizon": float, "clamp_negatives": _bool, "e0": float,
        "deaths_csv": str, "segment_breaks": _floats, "population": float, "state": _floats,
        "mr_beta": parse_beta, "theta": float, "r": float, "chi": float, "w_rep": float,
        "uniform_lbar": float, "normalize_shares": _bool, "strict_discount": _bool,
        "level_step": float, "interval_breaks": _floats, "gdp_budget": float,
        "chi_sweep": _floats, "out_dir": str, "workers": int, "seed": int,
    }

    # ---------------------------------------------------------------- I/O

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls()
        model_lines = []
        groups = dict(cfg.groups)
        seen = set()
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{source}:{lineno}: expected key = value")
            key, value = (part.strip() for part in stripped.split("=", 1))
            if key in seen:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            seen.add(key)
            try:
                if key in MODEL_KEYS:
                    model_lines.append(f"{key} = {value}")
                elif key in groups:
                    groups[key] = float(value)
                elif key in cls._SCALARS:
                    setattr(cfg, key, cls._SCALARS[key](value))
                else:
                    raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            except (ValueError, ConfigError) as exc:
                if isinstance(exc, ConfigError) and str(exc).startswith(source):
                    raise
                raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
        if model_lines:
            cfg.params = params_from_text("\n".join(model_lines), cfg.params, source=source)
        cfg.groups = groups
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, source=str(path))

    def to_text(self) -> str:
        lines = ["# model"]
        lines += params_to_text(self.params).splitlines()
        lines.append("# run")
        for key, conv in self._SCALARS.items():
            value = getattr(self, key)
            if conv is _floats:
                text = ",".join(repr(v) for v in value)
            elif conv is parse_beta:
                text = format_beta(value)
            elif conv is _bool:
                text = str(value).lower()
            elif conv is float:
                text = repr(float(value))
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        lines.append("# groups")
        for key in sorted(self.groups):
            lines.append(f"{key} = {self.groups[key]!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    # ------------------------------------------------------------ views

    def validate(self) -> None:
        self.integration()
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.state and len(self.state) != 6:
            raise ConfigError("state must list six compartments S,E,I,Q,H,R")
        if not 0 <= self.e0 < 1:
            raise ConfigError("e0 must lie in [0, 1)")
        if self.level_step <= 0:
            raise ConfigError("level_step must be positive")
        self.multirisk()

    def integration(self) -> IntegrationConfig:
        return IntegrationConfig(dt=self.dt, horizon=self.horizon, clamp_negatives=self.clamp_negatives)

    def mr_groups(self) -> tuple:
        names = [g.name for g in baseline_groups()]
        return tuple(
            MRGroupParams(name, **{key: self.groups[f"{key}_{name}"] for key in GROUP_KEYS})
            for name in names)

    def multirisk(self, params: ModelParams | None = None) -> MRParams:
        base = (params or self.params).replace(beta=self.mr_beta)
        return MRParams(
            base=base, groups=self.mr_groups(), theta=self.theta, r=self.r, chi=self.chi,
            w_rep=self.w_rep, uniform_lbar=self.uniform_lbar, e0=self.e0, horizon=self.horizon,
            dt=self.dt, strict_discount=self.strict_discount,
            normalize_shares=self.normalize_shares)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

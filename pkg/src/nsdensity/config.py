"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    cutoff: int = 2
    nu: float = 1.0
    gamma: float = 1.0
    sigma0: float = 1.0
    nonlinear: bool = True
    F: tuple = (0, 1)
    # zero | mode:<index>:<amplitude> | random:<H-norm>
    x0: str = "random:1.0"
    T: float = 1.0
    dt: float = 1e-3
    ensemble_size: int = 100_000
    # time pairs (s, s + gap), gaps log-spaced in [gap_min, gap_max];
    # gap_min = 0 means 4 dt
    s: float = 0.5
    n_gaps: int = 12
    gap_min: float = 0.0
    gap_max: float = 0.5
    alpha: float = 0.2
    beta: float = 0.5
    n_diff: int = 1
    box_sd: float = 6.0
    # 0 picks the normal-reference rule for the ensemble size
    bins: int = 0
    mollify_cells: float = 2.0
    # extrapolate distances to remove histogram noise (full vs half ensemble)
    floor_correction: bool = True
    jackknife_groups: int = 10
    master_seed: int = 20_240_601
    worker_count: int = 0
    chunk_size: int = 256
    # "" disables the on-disk ensemble cache
    cache_dir: str = ""
    diag_paths: int = 2000
    diag_T: float = 0.2
    timedep_paths: int = 20_000
    timedep_times: int = 10
    timedep_t_min: float = 0.01
    timedep_alpha: float = 0.5
    timedep_fit_max: float = 0.1

    def __post_init__(self):
        self.F = tuple(int(i) for i in self.F)
        self.validate()

    @property
    def d(self) -> int:
        return len(self.F)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def on_grid(self, t: float) -> bool:
        k = t / self.dt
        return abs(k - round(k)) <= 1e-9 * max(1.0, k)

    def time_pairs(self) -> list[tuple[float, float]]:
        gmin = self.gap_min if self.gap_min > 0 else 4 * self.dt
        gaps = np.geomspace(gmin, self.gap_max, self.n_gaps)
        ks = sorted({max(1, int(round(g / self.dt))) for g in gaps})
        s_k = int(round(self.s / self.dt))
        return [(round(s_k * self.dt, 12), round((s_k + k) * self.dt, 12)) for k in ks]

    def validate(self) -> None:
        if self.cutoff < 1:
            raise ConfigError("cutoff must be >= 1")
        if self.nu < 0 or self.sigma0 <= 0 or self.gamma < 0:
            raise ConfigError("need nu >= 0, sigma0 > 0, gamma >= 0")
        if self.dt <= 0 or self.T <= 0 or not self.on_grid(self.T):
            raise ConfigError("dt must be positive and divide T")
        if not self.F or len(set(self.F)) != len(self.F) or min(self.F) < 0:
            raise ConfigError("F indices must be distinct and nonnegative")
        M = 4 * ((2 * self.cutoff + 1) ** 3 - 1) // 2
        if max(self.F) >= M:
            raise ConfigError(f"F index {max(self.F)} outside a basis of size {M}")
        if self.d not in (1, 2):
            raise ConfigError("densities are estimated for d = 1 or 2")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0, 1)")
        if self.n_diff <= self.alpha:
            raise ConfigError("difference order must exceed alpha")
        if self.ensemble_size < 1 or self.chunk_size < 1:
            raise ConfigError("ensemble and chunk sizes must be positive")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if not self.on_grid(self.s) or self.s <= 0:
            raise ConfigError("s must be a positive grid time")
        for s, t in self.time_pairs():
            if not 0 < s < t <= self.T + 1e-12:
                raise ConfigError(f"time pair ({s}, {t}) outside (0, T]")
        if self.jackknife_groups < 2:
            raise ConfigError("jackknife_groups must be >= 2")
        if not self.on_grid(self.diag_T) or not 0 < self.diag_T <= self.T + 1e-12:
            raise ConfigError("diag_T must be a grid time in (0, T]")
        if not 0 < self.timedep_t_min < self.timedep_fit_max <= self.T:
            raise ConfigError("need 0 < timedep_t_min < timedep_fit_max <= T")
        if not 0 < self.timedep_alpha < self.n_diff:
            raise ConfigError("timedep_alpha must lie in (0, n_diff)")
        self.x0_vector(M)

    def timedep_grid(self) -> np.ndarray:
        ks = np.round(np.geomspace(self.timedep_t_min, self.T, self.timedep_times) / self.dt)
        return np.round(np.unique(np.maximum(ks, 1).astype(int)) * self.dt, 12)

    def validate_besov(self) -> None:
        if self.alpha + self.beta >= 1:
            raise ConfigError(f"need alpha + beta < 1, got {self.alpha} + {self.beta}")

    def x0_vector(self, M: int) -> np.ndarray:
        spec = self.x0.strip().lower()
        x = np.zeros(M)
        if spec == "zero":
            return x
        kind, _, rest = spec.partition(":")
        try:
            if kind == "mode":
                idx, amp = rest.split(":")
                x[int(idx)] = float(amp)
                return x
            if kind == "random":
                norm = float(rest)
                rng = np.random.default_rng([self.master_seed, 0x5EED])
                v = rng.standard_normal(M)
                return norm * v / np.linalg.norm(v)
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"bad x0 spec {self.x0!r}") from exc
        raise ConfigError(f"bad x0 spec {self.x0!r}")

    # -- serialization ----------------------------------------------------

    def set(self, key: str, value: str) -> "ExperimentConfig":
        """Copy with one key overridden from its string form."""
        return self.update({key: value})

    def update(self, items: dict) -> "ExperimentConfig":
        """Copy with several keys overridden at once, validated together."""
        names = {f.name for f in fields(self)}
        changes = {}
        for key, value in items.items():
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _coerce(value, getattr(self, key))
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(i) for i in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(text: str, current):
    text = text.strip()
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if isinstance(current, int):
        return int(float(text)) if "e" in text.lower() else int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
    return text


def _parse_lines(text: str) -> dict:
    items = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        items[key] = value
    return items


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return (base or ExperimentConfig()).update(_parse_lines(text))


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Defaults, then the file, then ``key=value`` overrides; validated once."""
    items = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            items.update(_parse_lines(fh.read()))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        items[k.strip()] = v
    return ExperimentConfig().update(items)

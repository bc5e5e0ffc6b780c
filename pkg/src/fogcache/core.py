"""Shared domain types for the 2-EN fog-RAN caching model.

Node subsets (ENs, users) are integer bitmasks: node ``i`` (0-based) is bit
``i``. Labels printed for humans are 1-based, e.g. EN set ``0b11`` -> ``12``.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

STAGES = ("1", "2", "3", "4", "5a", "5b")
SCHEME_A_STAGES = ("1", "2", "3", "4", "5a")
SCHEME_B_STAGES = ("1", "2", "3", "4", "5b")


class ConfigError(ValueError):
    """A SystemConfig field is out of range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(message)
        self.field = field_name


class UnsupportedTopologyError(ConfigError):
    """The delivery scheme only exists for two ENs and at least two users."""


@dataclass(frozen=True)
class SystemConfig:
    kt: int = 2
    kr: int = 2
    n_files: int | None = None
    mu_t: float = 0.0
    mu_r: float = 0.0
    r: float = 1.0
    file_bits: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n_files is None:
            object.__setattr__(self, "n_files", self.kr)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def validate_config(cfg: SystemConfig, delivery: bool = False) -> SystemConfig:
    """Return ``cfg`` unchanged if every field is in range, else raise.

    With ``delivery=True`` the two-EN topology required by the coded
    delivery scheme is enforced as well (``kt == 2`` and ``kr >= 2``; with a
    single user the ZF and X-channel DoF values of the scheme do not apply).
    """
    for name in ("kt", "kr", "n_files", "file_bits"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigError(name, f"{name} must be an integer >= 1")
    for name in ("mu_t", "mu_r"):
        value = getattr(cfg, name)
        if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
            raise ConfigError(name, f"{name} out of [0,1]")
    if not (isinstance(cfg.r, (int, float)) and cfg.r > 0 and math.isfinite(cfg.r)):
        raise ConfigError("r", "r must be > 0")
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed", "seed must be an integer")
    if delivery:
        if cfg.kt != 2:
            raise UnsupportedTopologyError("kt", f"delivery scheme requires kt=2, got kt={cfg.kt}")
        if cfg.kr < 2:
            raise UnsupportedTopologyError("kr", f"delivery scheme requires kr>=2, got kr={cfg.kr}")
    return cfg


def mask_members(mask: int) -> tuple[int, ...]:
    """0-based node indices set in ``mask``."""
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def mask_label(mask: int) -> str:
    return "".join(str(i + 1) for i in mask_members(mask)) or "0"


def subsets_of_size(n: int, size: int) -> Iterator[int]:
    """Bitmasks over ``n`` nodes with exactly ``size`` members, ascending."""
    for combo in itertools.combinations(range(n), size):
        yield sum(1 << i for i in combo)


@dataclass(frozen=True, order=True)
class FragmentKey:
    """Index ``(St, Sr)`` of the fragment cached exactly at ENs St and users Sr."""

    en_set: int
    user_set: int

    def label(self) -> str:
        return f"{mask_label(self.en_set)},{mask_label(self.user_set)}"

    def __str__(self):
        return self.label()


def enumerate_fragment_keys(kt: int, kr: int) -> list[FragmentKey]:
    """All ``2**(kt+kr)`` keys ordered by ``(en_set, user_set)`` as integers."""
    if kt < 1 or kr < 1:
        raise ValueError("kt and kr must be >= 1")
    return [FragmentKey(st, sr) for st in range(1 << kt) for sr in range(1 << kr)]


@dataclass(frozen=True)
class DemandVector:
    """File requested by each user, 0-based file indices."""

    demands: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(int(d) for d in self.demands))

    def validate(self, cfg: SystemConfig) -> "DemandVector":
        if len(self.demands) != cfg.kr:
            raise ConfigError("demands", f"expected {cfg.kr} demands, got {len(self.demands)}")
        for d in self.demands:
            if not 0 <= d < cfg.n_files:
                raise ConfigError("demands", f"file index {d} outside [0, {cfg.n_files})")
        return self

    @property
    def distinct(self) -> bool:
        return len(set(self.demands)) == len(self.demands)

    def __len__(self):
        return len(self.demands)

    def __getitem__(self, k):
        return self.demands[k]


def worst_case_demands(cfg: SystemConfig) -> DemandVector:
    """Distinct demands ``d_k = k``; needs ``n_files >= kr``."""
    if cfg.n_files < cfg.kr:
        raise ConfigError("n_files", "worst-case demands need n_files >= kr")
    return DemandVector(tuple(range(cfg.kr)))


@dataclass(frozen=True)
class StageNdt:
    stage: str
    fronthaul: float
    edge: float


@dataclass(frozen=True)
class NdtBreakdown:
    per_stage: tuple[StageNdt, ...]
    scheme_a: tuple[float, float]
    scheme_b: tuple[float, float]
    serial: float
    pipelined: float

    @classmethod
    def from_stages(cls, stages: Sequence[StageNdt]) -> "NdtBreakdown":
        by_id = {s.stage: s for s in stages}
        missing = set(STAGES) - set(by_id)
        if missing:
            raise ValueError(f"missing stages {sorted(missing)}")

        def total(ids):
            return (
                math.fsum(by_id[i].fronthaul for i in ids),
                math.fsum(by_id[i].edge for i in ids),
            )

        a = total(SCHEME_A_STAGES)
        b = total(SCHEME_B_STAGES)
        return cls(
            per_stage=tuple(by_id[i] for i in STAGES),
            scheme_a=a,
            scheme_b=b,
            serial=min(a[0] + a[1], b[0] + b[1]),
            pipelined=min(max(a), max(b)),
        )

    def stage(self, stage_id: str) -> StageNdt:
        for s in self.per_stage:
            if s.stage == stage_id:
                return s
        raise KeyError(stage_id)

    def to_dict(self) -> dict:
        return {
            "stages": [dataclasses.asdict(s) for s in self.per_stage],
            "scheme_a": {"fronthaul": self.scheme_a[0], "edge": self.scheme_a[1]},
            "scheme_b": {"fronthaul": self.scheme_b[0], "edge": self.scheme_b[1]},
            "serial": self.serial,
            "pipelined": self.pipelined,
        }


@dataclass(frozen=True)
class LowerBoundResult:
    delta_f: float
    delta_e: float
    delta_lb: float
    active_constraints: frozenset[int] = field(default_factory=frozenset)
    edge_floor_active: bool = False

    def to_dict(self) -> dict:
        return {
            "delta_f": self.delta_f,
            "delta_e": self.delta_e,
            "delta_lb": self.delta_lb,
            "active_constraints": sorted(self.active_constraints),
            "edge_floor_active": self.edge_floor_active,
        }

"""Closed-form NDTs of the decentralized placement + five-stage delivery scheme.

Stage values are evaluated through the binomial sums, which are polynomial
in ``mu_r`` and need no special case at ``mu_r = 0``. The ``closed_form_*``
helpers carry the ``1/mu_r`` expressions and exist only for cross-checking;
they use plain arithmetic so they can be evaluated on ``Fraction`` inputs.
"""

from __future__ import annotations

import math

from .core import STAGES, NdtBreakdown, StageNdt, SystemConfig, validate_config

# Edge DoF per stage: ZF broadcast with two antennas, single-stream multicast,
# and the 2 x Kr X-channel with interference alignment for stage 5a.
EDGE_DOF = {"1": 2.0, "2": 1.0, "3": 1.0, "4": 2.0, "5b": 2.0}
# Fronthaul "DoF" = number of links carrying distinct payload in parallel.
FRONTHAUL_DOF = {"1": 2.0, "2": 1.0, "5b": 2.0}


def x_channel_dof(kr: int) -> float:
    return 2.0 * kr / (kr + 1)


def edge_dof(stage: str, kr: int) -> float:
    return x_channel_dof(kr) if stage == "5a" else EDGE_DOF[stage]


def expected_fragment_fraction(cfg: SystemConfig, st_size: int, sr_size: int) -> float:
    if not 0 <= st_size <= cfg.kt:
        raise ValueError(f"st_size {st_size} outside [0, {cfg.kt}]")
    if not 0 <= sr_size <= cfg.kr:
        raise ValueError(f"sr_size {sr_size} outside [0, {cfg.kr}]")
    mt, mr = cfg.mu_t, cfg.mu_r
    return (
        mt**st_size * (1 - mt) ** (cfg.kt - st_size)
        * mr**sr_size * (1 - mr) ** (cfg.kr - sr_size)
    )


def _multicast_sum(kr: int, mu_r: float) -> float:
    """sum_{i=2}^{kr} C(kr,i) mu_r^(i-1) (1-mu_r)^(kr-i+1)."""
    total = 0.0
    coeff = float(kr)  # C(kr, 1)
    for i in range(2, kr + 1):
        coeff = coeff * (kr - i + 1) / i
        total += coeff * mu_r ** (i - 1) * (1 - mu_r) ** (kr - i + 1)
    return total


def multicast_rate_r2(cfg: SystemConfig) -> float:
    """Stage-2 multicast load over F (fragments cached at no EN)."""
    return (1 - cfg.mu_t) ** 2 * _multicast_sum(cfg.kr, cfg.mu_r)


def multicast_rate_r3(cfg: SystemConfig) -> float:
    """Stage-3 multicast load over F (fragments cached at one or both ENs)."""
    mt = cfg.mu_t
    en_weight = sum(math.comb(2, t) * mt**t * (1 - mt) ** (2 - t) for t in (1, 2))
    return en_weight * _multicast_sum(cfg.kr, cfg.mu_r)


def stage_ndt(cfg: SystemConfig, stage: str) -> StageNdt:
    validate_config(cfg, delivery=True)
    kr, mt, mr, r = cfg.kr, cfg.mu_t, cfg.mu_r, cfg.r
    uncached = (1 - mr) ** kr
    if stage == "1":
        edge = kr / 2 * (1 - mt) ** 2 * uncached
        return StageNdt(stage, edge / r, edge)
    if stage == "2":
        rate = multicast_rate_r2(cfg)
        return StageNdt(stage, rate / r, rate)
    if stage == "3":
        return StageNdt(stage, 0.0, multicast_rate_r3(cfg))
    if stage == "4":
        return StageNdt(stage, 0.0, kr / 2 * mt * mt * uncached)
    single = mt * (1 - mt) * uncached
    if stage == "5a":
        return StageNdt(stage, 0.0, (kr + 1) * single)
    if stage == "5b":
        return StageNdt(stage, kr / r * single, kr * single)
    raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")


def ndt_breakdown(cfg: SystemConfig) -> NdtBreakdown:
    return NdtBreakdown.from_stages([stage_ndt(cfg, s) for s in STAGES])


def scheme_ndt(cfg: SystemConfig, scheme: str) -> tuple[float, float]:
    """(fronthaul NDT, edge NDT) of scheme ``a`` or ``b``."""
    if scheme not in ("a", "b"):
        raise ValueError(f"scheme must be 'a' or 'b', got {scheme!r}")
    bd = ndt_breakdown(cfg)
    return bd.scheme_a if scheme == "a" else bd.scheme_b


def serial_ndt(cfg: SystemConfig) -> float:
    return ndt_breakdown(cfg).serial


def pipelined_ndt(cfg: SystemConfig) -> float:
    return ndt_breakdown(cfg).pipelined


def miso_special_ndt(cfg: SystemConfig) -> float:
    """NDT when every EN holds the whole library (two-antenna MISO broadcast)."""
    kr, mr = cfg.kr, cfg.mu_r
    if mr == 0:
        return kr / 2
    # 1 - (1-mr)^kr without cancellation for small mr
    not_cached = -math.expm1(kr * math.log1p(-mr)) if mr < 1 else 1.0
    return (1 - mr) / mr * (not_cached - kr / 2 * mr * (1 - mr) ** (kr - 1))


def baseline_single_antenna_ndt(cfg: SystemConfig) -> float:
    """Decentralized coded caching over a single-antenna broadcast channel."""
    kr, mr = cfg.kr, cfg.mu_r
    if mr == 0:
        return float(kr)
    not_cached = -math.expm1(kr * math.log1p(-mr)) if mr < 1 else 1.0
    return (1 - mr) / mr * not_cached


def en_only_thresholds(mu_t: float, kr: int) -> tuple[float, float]:
    """Breakpoints ``(r1, r2)`` of the EN-cache-only pipelined expression."""
    r1 = 1 - mu_t**2
    r2 = (1 - mu_t) ** 2 / (1 + 2 * mu_t * (1 - mu_t) / kr)
    return r1, r2


def en_only_ndt(cfg: SystemConfig, mode: str) -> float:
    """Piecewise NDT for caches at ENs only (``mu_r = 0``).

    The serial expression equals ``serial_ndt`` exactly. The three-branch
    pipelined expression uses scheme b for every ``r2 <= r < r1``; scheme a
    is edge-limited at ``kr/2 + mu_t(1-mu_t)`` there and is strictly better
    whenever ``r < (1-mu_t^2) / (1 + 2 mu_t(1-mu_t)/kr)``, so on that band
    this value is achievable but exceeds ``pipelined_ndt``.
    """
    validate_config(cfg, delivery=True)
    if cfg.mu_r != 0:
        raise ValueError("en_only_ndt requires mu_r = 0")
    kr, mt, r = cfg.kr, cfg.mu_t, cfg.r
    if mode == "serial":
        if r <= kr:
            return kr / 2 * ((1 - mt) ** 2 / r + 1) + mt * (1 - mt)
        return kr / 2 * ((1 - mt**2) / r + 1)
    if mode == "pipelined":
        r1, r2 = en_only_thresholds(mt, kr)
        if r >= r1:
            return kr / 2
        if r >= r2:
            return kr / (2 * r) * (1 - mt**2)
        return kr / (2 * r) * (1 - mt) ** 2
    raise ValueError(f"mode must be 'serial' or 'pipelined', got {mode!r}")


# -- cross-check closed forms (valid for mu_r > 0) ---------------------------


def _bracket(kr, mr, tail_weight):
    return 1 - (1 - mr) ** kr - tail_weight * mr * (1 - mr) ** (kr - 1)


def closed_form_r2(kr, mu_t, mu_r):
    return (1 - mu_t) ** 2 * (1 - mu_r) / mu_r * _bracket(kr, mu_r, kr)


def closed_form_r3(kr, mu_t, mu_r):
    return (1 - (1 - mu_t) ** 2) * (1 - mu_r) / mu_r * _bracket(kr, mu_r, kr)


def closed_form_scheme(kr, mu_t, mu_r, r):
    """``((dF_a, dE_a), (dF_b, dE_b))`` from the aggregated expressions.

    The scheme-b fronthaul factor ``(1-mu_t)^2 (1-3mu_t)/(1-mu_t)`` is kept
    in its cancelled form ``(1-mu_t)(1-3mu_t)`` so ``mu_t = 1`` is defined.
    """
    mt, mr = mu_t, mu_r
    half = kr * mr * (1 - mr) ** (kr - 1) / 2
    lead = 1 - (1 - mr) ** kr
    scale = (1 - mr) / mr
    df_a = (1 - mt) ** 2 * scale / r * (lead - half)
    df_b = scale / r * ((1 - mt) ** 2 * lead - (1 - mt) * (1 - 3 * mt) * half)
    de_a = scale * (lead - (kr - 2 * mt * (1 - mt)) * mr * (1 - mr) ** (kr - 1) / 2)
    de_b = scale * (lead - half)
    return (df_a, de_a), (df_b, de_b)

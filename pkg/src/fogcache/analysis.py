"""Parameter sweeps: achievability-vs-converse gaps, the single-antenna
baseline comparison, and the optimality regions for EN-only caching."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import pipelined_lower_bound, serial_lower_bound
from .core import SystemConfig
from .formulas import baseline_single_antenna_ndt, miso_special_ndt, ndt_breakdown

ZERO = 1e-12
GAP_TOL = 1e-9
SWEEP_FIELDS = (
    "mu_t", "mu_r", "r", "delta_s_dec", "delta_p_dec", "delta_s_lb", "delta_p_lb",
    "gap_s", "gap_p", "ratio_s", "ratio_p",
)


def safe_ratio(num: float, den: float) -> float:
    """``num/den`` with 0/0 defined as 1."""
    if abs(den) < ZERO:
        return 1.0 if abs(num) < ZERO else math.inf
    return num / den


@dataclass(frozen=True)
class SweepRow:
    mu_t: float
    mu_r: float
    r: float
    delta_s_dec: float
    delta_p_dec: float
    delta_s_lb: float
    delta_p_lb: float
    gap_s: float
    gap_p: float
    ratio_s: float
    ratio_p: float


def evaluate_point(cfg: SystemConfig) -> SweepRow:
    bd = ndt_breakdown(cfg)
    s_lb = serial_lower_bound(cfg).delta_lb
    p_lb = pipelined_lower_bound(cfg)
    return SweepRow(
        mu_t=cfg.mu_t, mu_r=cfg.mu_r, r=cfg.r,
        delta_s_dec=bd.serial, delta_p_dec=bd.pipelined,
        delta_s_lb=s_lb, delta_p_lb=p_lb,
        gap_s=bd.serial - s_lb, gap_p=bd.pipelined - p_lb,
        ratio_s=safe_ratio(bd.serial, s_lb), ratio_p=safe_ratio(bd.pipelined, p_lb),
    )


def unit_grid(step: float) -> np.ndarray:
    n = round(1 / step)
    if n < 1 or not math.isclose(n * step, 1.0, rel_tol=1e-9):
        raise ValueError(f"grid step {step} must divide 1")
    return np.linspace(0.0, 1.0, n + 1)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("FRAN_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    max_gap_s: float
    argmax_s: tuple[float, float]
    max_gap_p: float
    argmax_p: tuple[float, float]


def _sweep_slice(args):
    kr, r, mu_t, mu_rs = args
    return [evaluate_point(SystemConfig(kt=2, kr=kr, mu_t=mu_t, mu_r=mu_r, r=r)) for mu_r in mu_rs]


def gap_sweep(kr: int, r: float, grid_step: float = 0.01, workers: int | None = None) -> SweepResult:
    """Rows ordered mu_t-major, mu_r-minor, independent of ``workers``."""
    grid = [float(x) for x in unit_grid(grid_step)]
    tasks = [(kr, r, mt, grid) for mt in grid]
    workers = default_workers() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(_sweep_slice, tasks))
    else:
        slices = [_sweep_slice(t) for t in tasks]
    rows = [row for sl in slices for row in sl]
    best_s = max(rows, key=lambda w: w.gap_s)
    best_p = max(rows, key=lambda w: w.gap_p)
    return SweepResult(
        rows, best_s.gap_s, (best_s.mu_t, best_s.mu_r), best_p.gap_p, (best_p.mu_t, best_p.mu_r)
    )


@dataclass(frozen=True)
class BaselineRow:
    mu_r: float
    two_antenna: float
    single_antenna: float
    difference: float


def compare_baseline(kr: int, grid_step: float = 0.01) -> list[BaselineRow]:
    """EN caches hold everything: two-antenna ZF vs single-antenna broadcast."""
    rows = []
    for mu_r in unit_grid(grid_step):
        cfg = SystemConfig(kt=2, kr=kr, mu_t=1.0, mu_r=float(mu_r))
        two = miso_special_ndt(cfg)
        one = baseline_single_antenna_ndt(cfg)
        rows.append(BaselineRow(float(mu_r), two, one, one - two))
    return rows


# -- optimality regions (caches at ENs only) ---------------------------------

SQRT2_M1 = math.sqrt(2) - 1


@dataclass
class RegionCheck:
    name: str
    transmission: str  # "pipelined" or "serial"
    limit: float  # ratio must be <= limit (pipelined: equality to 1)
    points: int = 0
    max_ratio: float = 1.0
    violations: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass
class OptimalityReport:
    kr: int
    regions: list[RegionCheck]
    unverified_points: int

    @property
    def p1_passed(self) -> bool:
        return all(c.passed for c in self.regions if c.transmission == "pipelined")

    @property
    def p2_passed(self) -> bool:
        return all(c.passed for c in self.regions if c.transmission == "serial")

    def summary(self) -> str:
        lines = [f"P1 {'pass' if self.p1_passed else 'FAIL'}, P2 {'pass' if self.p2_passed else 'FAIL'}"]
        for c in self.regions:
            status = "pass" if c.passed else f"FAIL ({len(c.violations)} violations)"
            lines.append(
                f"  {c.name}: {c.points} points, max ratio {c.max_ratio:.12g}, {status}")
            for mt, r, ratio in c.violations[:3]:
                lines.append(f"    e.g. mu_t={mt:.12g} r={r:.12g} ratio={ratio:.12g}")
        lines.append(f"  unverified region: {self.unverified_points} points")
        return "\n".join(lines)


def optimality_regions(mu_t: float, r: float) -> list[str]:
    """Names of the claimed optimality regions containing ``(mu_t, r)``."""
    names = []
    if r >= 1 - mu_t**2:
        names.append("P1: r >= 1-mu_t^2")
    elif mu_t < 0.5:
        names.append("P1: mu_t < 1/2, r < 1-mu_t^2")
    if r >= 1:
        names.append("P2: r >= 1")
    elif mu_t <= SQRT2_M1:
        names.append("P2: mu_t <= sqrt2-1, r < 1")
    return names


def optimality_check(
    kr: int,
    mu_t_points: int = 101,
    r_points: int = 50,
    r_range: tuple[float, float] = (1e-2, 1e2),
) -> OptimalityReport:
    """Check the ratio claims over a (mu_t, log r) grid with ``mu_r = 0``.

    Pipelined regions require ratio 1 within ``GAP_TOL``; serial regions
    require ratio at most 3. The ratio divides by the cut-set bound, which is
    below the true optimum, so each serial check is at least as strict as the
    original claim.
    """
    regions = {
        "P1: r >= 1-mu_t^2": RegionCheck("P1: r >= 1-mu_t^2", "pipelined", 1.0),
        "P1: mu_t < 1/2, r < 1-mu_t^2": RegionCheck("P1: mu_t < 1/2, r < 1-mu_t^2", "pipelined", 1.0),
        "P2: r >= 1": RegionCheck("P2: r >= 1", "serial", 3.0),
        "P2: mu_t <= sqrt2-1, r < 1": RegionCheck("P2: mu_t <= sqrt2-1, r < 1", "serial", 3.0),
    }
    unverified = 0
    for mt in np.linspace(0.0, 1.0, mu_t_points):
        for r in np.geomspace(*r_range, r_points):
            mt_f, r_f = float(mt), float(r)
            names = optimality_regions(mt_f, r_f)
            if not names:
                unverified += 1
                continue
            row = evaluate_point(SystemConfig(kt=2, kr=kr, mu_t=mt_f, mu_r=0.0, r=r_f))
            for name in names:
                check = regions[name]
                ratio = row.ratio_p if check.transmission == "pipelined" else row.ratio_s
                check.points += 1
                check.max_ratio = max(check.max_ratio, ratio)
                bad = abs(ratio - 1) > GAP_TOL if check.transmission == "pipelined" else ratio > check.limit
                if bad:
                    check.violations.append((mt_f, r_f, ratio))
    return OptimalityReport(kr, list(regions.values()), unverified)


# -- tabular output ----------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _row_dicts(rows):
    return [dataclasses.asdict(r) if dataclasses.is_dataclass(r) else dict(r) for r in rows]


def render_table(rows, fmt: str) -> str:
    dicts = _row_dicts(rows)
    if not dicts:
        raise ValueError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(dicts[0]))
        for d in dicts:
            w.writerow([_fmt(v) for v in d.values()])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(dicts, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_table(rows, fmt: str, destination) -> None:
    """Write rows as CSV or JSON to a path (``"-"`` means stdout)."""
    text = render_table(rows, fmt)
    if destination is None or str(destination) == "":
        raise ValueError("empty destination path")
    if str(destination) == "-":
        sys.stdout.write(text)
        return
    path = Path(destination)
    try:
        path.write_text(text, newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc

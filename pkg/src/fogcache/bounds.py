"""Cut-set lower bounds on the NDT for any number of ENs and users.

Serial transmission gives a two-variable LP in ``(delta_F, delta_E)``; it is
solved exactly by enumerating the vertices of the feasible region.
Pipelined transmission collapses to a maximum over the same constraint
family evaluated at ``delta_F = delta_E``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .core import LowerBoundResult, SystemConfig, validate_config

ACTIVE_TOL = 1e-9


class LpInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class CutsetConstraint:
    """``s * delta_E + (kt - s) * r * delta_F >= f(s)``."""

    s: int
    edge_coeff: float
    fronthaul_coeff: float
    rhs: float


@dataclass(frozen=True)
class LpSolution:
    x: float
    y: float
    value: float
    active: frozenset[int]


def cutset_f(cfg: SystemConfig, s: int) -> float:
    kt, kr, mt, mr = cfg.kt, cfg.kr, cfg.mu_t, cfg.mu_r
    if not 0 <= s <= min(kt, kr):
        raise ValueError(f"s={s} outside [0, {min(kt, kr)}]")
    return kr * (1 - s * mr) - (kr - s) * ((kr - s) * mr + (kt - s) * mt)


def cutset_constraints(cfg: SystemConfig) -> list[CutsetConstraint]:
    validate_config(cfg)
    return [
        CutsetConstraint(s, float(s), (cfg.kt - s) * cfg.r, cutset_f(cfg, s))
        for s in range(min(cfg.kt, cfg.kr) + 1)
    ]


def _slack(con, x, y):
    a, b, c = con
    return a * x + b * y - c


def _tol(c):
    return ACTIVE_TOL * max(1.0, abs(c))


def solve_lp_2d(constraints) -> LpSolution:
    """Minimize ``x + y`` subject to ``a*x + b*y >= c`` and ``x, y >= 0``.

    ``constraints`` is a sequence of ``(a, b, c)`` with ``a, b >= 0`` and not
    both zero. The optimum is found by intersecting every pair of boundary
    lines (axes included) and keeping the best feasible vertex; ties on a
    degenerate optimal face go to the smallest ``x`` then smallest ``y``.
    ``active`` holds indices into ``constraints`` that are tight at the
    returned point.
    """
    cons = [tuple(float(v) for v in con) for con in constraints]
    for a, b, _ in cons:
        if a < 0 or b < 0 or (a == 0 and b == 0):
            raise ValueError(f"constraint coefficients must be >= 0 and not both zero: {(a, b)}")
    lines = cons + [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]

    vertices = []
    for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(lines, 2):
        det = a1 * b2 - a2 * b1
        if det == 0:
            continue
        x = (c1 * b2 - c2 * b1) / det
        y = (a1 * c2 - a2 * c1) / det
        if all(_slack(con, x, y) >= -_tol(con[2]) for con in lines):
            vertices.append((x, y))
    if not vertices:
        raise LpInfeasibleError("no feasible vertex")

    best = min(v[0] + v[1] for v in vertices)
    scale = max(1.0, abs(best))
    x, y = min(v for v in vertices if v[0] + v[1] <= best + 1e-12 * scale)
    # snap tiny negatives produced by round-off onto the axes
    x, y = max(x, 0.0), max(y, 0.0)
    active = frozenset(
        i for i, con in enumerate(cons) if abs(_slack(con, x, y)) <= _tol(con[2])
    )
    return LpSolution(x, y, x + y, active)


def serial_lower_bound(cfg: SystemConfig) -> LowerBoundResult:
    family = cutset_constraints(cfg)
    floor = 1 - cfg.mu_r
    # x = delta_F, y = delta_E
    rows = [(c.fronthaul_coeff, c.edge_coeff, c.rhs) for c in family]
    rows.append((0.0, 1.0, floor))
    sol = solve_lp_2d(rows)
    n = len(family)
    return LowerBoundResult(
        delta_f=sol.x,
        delta_e=sol.y,
        delta_lb=sol.value,
        active_constraints=frozenset(family[i].s for i in sol.active if i < n),
        edge_floor_active=n in sol.active,
    )


def pipelined_bound_terms(cfg: SystemConfig) -> dict[int | None, float]:
    """Candidate bounds keyed by ``s``; key ``None`` is the ``1 - mu_r`` floor."""
    terms: dict[int | None, float] = {}
    for c in cutset_constraints(cfg):
        denom = c.edge_coeff + c.fronthaul_coeff
        if denom > 0:
            terms[c.s] = c.rhs / denom
    terms[None] = 1 - cfg.mu_r
    return terms


def pipelined_lower_bound(cfg: SystemConfig) -> float:
    return max(pipelined_bound_terms(cfg).values())


def pipelined_bound_argmax(cfg: SystemConfig) -> int | None:
    terms = pipelined_bound_terms(cfg)
    best = max(terms.values())
    # prefer a cut-set term over the floor on ties
    for key, value in terms.items():
        if value == best:
            return key
    return None

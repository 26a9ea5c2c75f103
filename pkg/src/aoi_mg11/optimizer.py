"""Rate allocation across streams at a fixed total update rate.

Both the total average age and the total average peak age factor through
sum(1/p_i), a symmetric convex function minimized by the uniform split, so
the fair allocation p_i = 1/M is optimal for both. Optimality is certified
numerically by sampling the simplex rather than running an optimizer, since
the optimum is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import SystemConfig, avg_age, peak_age
from .distributions import ServiceDistribution
from .errors import InvariantViolationError, ParameterDomainError

__all__ = ["AllocationResult", "total_age", "optimal_allocation", "priority_frontier"]


@dataclass(frozen=True)
class AllocationResult:
    p_star: tuple[float, ...]
    delta_tot_star: float
    delta_peak_tot_star: float
    n_random_points: int
    max_violation: float


def total_age(cfg: SystemConfig) -> tuple[float, float]:
    """(total average age, total average peak age).

    Computed both as the per-stream sum and via the factored
    (1/(lam P)) * sum(1/p_i) form; the two must agree to 1e-12 relative.
    """
    m = cfg.num_streams
    p = cfg.service_beats_arrival()
    lam = cfg.total_rate
    summed = math.fsum(avg_age(cfg, i) for i in range(1, m + 1))
    summed_peak = math.fsum(peak_age(cfg, i) for i in range(1, m + 1))
    inv_p_sum = math.fsum(1.0 / q for q in cfg.stream_probs)
    factored = inv_p_sum / (lam * p)
    factored_peak = factored + m * cfg.service.exp_weighted_mean(lam) / p
    for label, x, y in (("total age", summed, factored), ("total peak age", summed_peak, factored_peak)):
        if abs(x - y) > 1e-12 * max(abs(x), 1.0):
            raise InvariantViolationError(f"{label}: summed {x!r} vs factored {y!r}")
    return summed, summed_peak


def _uniform_simplex(rng: np.random.Generator, m: int) -> np.ndarray:
    e = rng.exponential(1.0, m)
    return e / e.sum()


def optimal_allocation(
    lam: float,
    m: int,
    dist: ServiceDistribution,
    n_random_points: int = 1000,
    rng: np.random.Generator | None = None,
) -> AllocationResult:
    """The fair allocation and its total ages, with a sampled optimality check.

    max_violation records by how much any sampled allocation beat the fair
    optimum (0 when optimality holds on the sample, as it must).
    """
    if m < 1:
        raise ParameterDomainError(f"need at least one stream, got {m}")
    if not lam > 0:
        raise ParameterDomainError(f"total rate must be > 0, got {lam}")
    if rng is None:
        rng = np.random.default_rng(0)
    p_lam = dist.laplace(lam)
    delta_tot_star = m * m / (lam * p_lam)
    delta_peak_tot_star = delta_tot_star + m * dist.exp_weighted_mean(lam) / p_lam

    max_violation = 0.0
    if m > 1:
        for _ in range(n_random_points):
            p = _uniform_simplex(rng, m)
            cfg = SystemConfig(lam, tuple(p), dist)
            tot, _ = total_age(cfg)
            max_violation = max(max_violation, delta_tot_star - tot)
        max_violation = max(0.0, max_violation)
    return AllocationResult(
        p_star=tuple([1.0 / m] * m),
        delta_tot_star=delta_tot_star,
        delta_peak_tot_star=delta_peak_tot_star,
        n_random_points=n_random_points if m > 1 else 0,
        max_violation=max_violation,
    )


def priority_frontier(
    lam: float,
    m: int,
    dist: ServiceDistribution,
    i: int,
    grid: tuple[float, ...],
    residual_split: tuple[float, ...] | None = None,
) -> list[tuple[float, float, float]]:
    """Trade-off table (p_i, age of stream i, total age) along a p_i grid.

    The residual mass 1 - p_i is split equally among the other streams unless
    an explicit residual_split (fractions summing to 1 over the other M-1
    streams) is given. The returned table is checked to satisfy the known
    monotonicity facts: the tagged stream's age strictly decreases in p_i and
    the total is minimized at p_i = 1/M.
    """
    if m < 2:
        raise ParameterDomainError("priority frontier needs at least two streams")
    if not 1 <= i <= m:
        raise IndexError(f"stream index {i} out of range 1..{m}")
    if len(grid) == 0:
        raise ParameterDomainError("grid must be non-empty")
    if any(not 0.0 < g < 1.0 for g in grid):
        raise ParameterDomainError(f"grid values must lie in (0, 1), got {grid}")
    if residual_split is None:
        residual_split = tuple([1.0 / (m - 1)] * (m - 1))
    if len(residual_split) != m - 1 or abs(math.fsum(residual_split) - 1.0) > 1e-12:
        raise ParameterDomainError("residual_split must be m-1 fractions summing to 1")

    rows = []
    for g in grid:
        probs = []
        k = 0
        for j in range(1, m + 1):
            if j == i:
                probs.append(g)
            else:
                probs.append((1.0 - g) * residual_split[k])
                k += 1
        cfg = SystemConfig(lam, tuple(probs), dist)
        tot, _ = total_age(cfg)
        rows.append((g, avg_age(cfg, i), tot))

    ordered = sorted(rows)
    for (g0, d0, t0), (g1, d1, t1) in zip(ordered, ordered[1:]):
        if g1 > g0 and not d1 < d0:
            raise InvariantViolationError(
                f"stream age not strictly decreasing: {d0!r} at p={g0} vs {d1!r} at p={g1}"
            )
        # total age is convex in p_i with its minimum at 1/m
        if g1 <= 1.0 / m and g1 > g0 and not t1 <= t0:
            raise InvariantViolationError("total age not decreasing below the fair point")
        if g0 >= 1.0 / m and g1 > g0 and not t1 >= t0:
            raise InvariantViolationError("total age not increasing above the fair point")
    return rows

"""Semi-Markov chain of the interdeparture time and its detour flow graph.

The chain tracks whether the server is idle or busy and whether the packet in
service belongs to the tagged stream. Each transition carries a branch
probability (a, b, u, v, z) and, in the flow graph, an MGF edge weight
(D1..D5). The source-to-sink transfer function of the weighted graph equals
the interdeparture-time MGF; this module computes it three independent ways:

  * the closed-form rational expression,
  * direct elimination on the flow-graph linear system,
  * a truncated sum over source-to-sink paths with a verified tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .analytic import SystemConfig, clock_mgf_A, clock_mgf_B, system_time_mgf
from .errors import (
    DivergenceError,
    ParameterDomainError,
    PoleError,
    SingularSystemError,
)

__all__ = [
    "ClockProbabilities",
    "EdgeWeights",
    "FlowGraph",
    "clock_probs",
    "edge_weights",
    "build_graph",
    "transfer_function",
    "solve_transfer_by_elimination",
    "enumerate_paths",
    "path_enumeration_oracle",
]

# node names: idle / busy-with-tagged-stream / busy-with-other-stream /
# idle-after-foreign-delivery / absorbing sink (tagged delivery)
Q0, Q1, Q1P, Q0P, QBAR = "q0", "q1", "q1'", "q0'", "qbar"
_TRANSIENT = (Q0, Q1, Q1P, Q0P)


@dataclass(frozen=True)
class ClockProbabilities:
    """Branch probabilities out of the chain's states."""

    a: float
    b: float
    u: float
    v: float
    z: float

    def __post_init__(self):
        vals = (self.a, self.b, self.u, self.v, self.z)
        if any(not (0.0 <= x <= 1.0) for x in vals):
            raise ParameterDomainError(f"branch probabilities must lie in [0,1], got {vals}")
        if abs(self.a + self.z - 1.0) > 1e-12:
            raise ParameterDomainError(f"a + z must equal 1, got {self.a + self.z!r}")
        if abs(self.b + self.u + self.v - 1.0) > 1e-12:
            raise ParameterDomainError(f"b + u + v must equal 1, got {self.b + self.u + self.v!r}")


@dataclass(frozen=True)
class EdgeWeights:
    """MGF values of the five clock variables at a fixed argument s."""

    d1: float
    d2: float
    d3: float
    d4: float
    d5: float

    def __post_init__(self):
        if any(not math.isfinite(x) for x in (self.d1, self.d2, self.d3, self.d4, self.d5)):
            raise ParameterDomainError("edge weights must be finite")


def clock_probs(cfg: SystemConfig, i: int) -> ClockProbabilities:
    """Branch probabilities when stream i is the tagged stream."""
    lam = cfg.total_rate
    li = cfg.stream_rate(i)
    p = cfg.service_beats_arrival()
    return ClockProbabilities(
        a=li / lam,
        b=(li / lam) * (1.0 - p),
        u=p,
        v=((lam - li) / lam) * (1.0 - p),
        z=(lam - li) / lam,
    )


def edge_weights(cfg: SystemConfig, s: float) -> EdgeWeights:
    """Clock MGFs at s: D1=E[e^{sA}], D2=E[e^{sB}], D3=E[e^{sU}], D4=E[e^{sV}], D5=E[e^{sZ}].

    A and Z share one law, as do B and V; U is distributed as the system time.
    If the service law puts all mass at 0 (P(lam) = 1, impossible for the
    supported variants but guarded anyway) the B/V clocks never fire and their
    weight is set to 1.
    """
    d1 = clock_mgf_A(cfg, s)
    d3 = system_time_mgf(cfg, s)
    p = cfg.service_beats_arrival()
    d2 = clock_mgf_B(cfg, s) if p < 1.0 else 1.0
    return EdgeWeights(d1=d1, d2=d2, d3=d3, d4=d2, d5=d1)


@dataclass(frozen=True)
class FlowGraph:
    """The ten fixed labeled edges of the detour flow graph."""

    edges: tuple[tuple[str, str, float], ...]

    def out_edges(self, node: str) -> tuple[tuple[str, str, float], ...]:
        return tuple(e for e in self.edges if e[0] == node)


def build_graph(pr: ClockProbabilities, w: EdgeWeights) -> FlowGraph:
    return FlowGraph(
        edges=(
            (Q0, Q1, pr.a * w.d1),
            (Q0, Q1P, pr.z * w.d5),
            (Q1, Q1, pr.b * w.d2),
            (Q1, QBAR, pr.u * w.d3),
            (Q1, Q1P, pr.v * w.d4),
            (Q1P, Q0P, pr.u * w.d3),
            (Q1P, Q1P, pr.v * w.d4),
            (Q1P, Q1, pr.b * w.d2),
            (Q0P, Q1P, pr.z * w.d5),
            (Q0P, Q1, pr.a * w.d1),
        )
    )


def transfer_function(w: EdgeWeights, pr: ClockProbabilities) -> float:
    """Closed-form source-to-sink transfer function of the detour flow graph."""
    a, b, u, v, z = pr.a, pr.b, pr.u, pr.v, pr.z
    d1, d2, d3, d4, d5 = w.d1, w.d2, w.d3, w.d4, w.d5
    num = u * d3 * (b * d2 * z * d5 + a * d1 - a * d1 * v * d4)
    den = (1.0 - b * d2) * (1.0 - u * d3 * z * d5) - v * d4 * (1.0 + u * d3 * a * d1)
    if abs(den) < 1e-12:
        raise PoleError(f"transfer function denominator {den!r} too close to 0")
    return num / den


def solve_transfer_by_elimination(g: FlowGraph) -> float:
    """Transfer to the sink by solving the flow-graph linear system directly.

    With H(source) = 1 and H(w) = sum over incoming edges of H(src) * label,
    the four non-source nodes give a 4x4 linear system.
    """
    unknowns = [Q1, Q1P, Q0P, QBAR]
    idx = {n: k for k, n in enumerate(unknowns)}
    mat = np.eye(4)
    rhs = np.zeros(4)
    for src, dst, label in g.edges:
        if dst == Q0:
            continue
        if src == Q0:
            rhs[idx[dst]] += label
        else:
            mat[idx[dst], idx[src]] -= label
    det = np.linalg.det(mat)
    if abs(det) < 1e-12:
        raise SingularSystemError(f"flow-graph system is singular (det={det!r})")
    sol = np.linalg.solve(mat, rhs)
    return float(sol[idx[QBAR]])


def enumerate_paths(
    g: FlowGraph, max_edges: int
) -> Iterator[tuple[tuple[str, str, float], ...]]:
    """Depth-first enumeration of all source-to-sink paths with <= max_edges edges.

    Intended for small depths; the number of paths grows exponentially.
    """
    stack: list[tuple[str, tuple]] = [(Q0, ())]
    while stack:
        node, path = stack.pop()
        if node == QBAR:
            yield path
            continue
        if len(path) >= max_edges:
            continue
        for e in g.out_edges(node):
            stack.append((e[1], path + (e,)))


def _transition_matrices(pr: ClockProbabilities, w: EdgeWeights):
    """Signed transient-to-transient matrix W and exit vector t (to the sink)."""
    g = build_graph(pr, w)
    idx = {n: k for k, n in enumerate(_TRANSIENT)}
    mat = np.zeros((4, 4))
    exit_vec = np.zeros(4)
    for src, dst, label in g.edges:
        if dst == QBAR:
            exit_vec[idx[src]] += label
        else:
            mat[idx[src], idx[dst]] += label
    return mat, exit_vec


def path_enumeration_oracle(
    pr: ClockProbabilities, w: EdgeWeights, max_edges: int
) -> tuple[float, float]:
    """Sum of edge-label products over all source-to-sink paths with <= max_edges edges.

    Paths are aggregated by length (a memoized depth-first sweep over the
    transient-node transition matrix), which equals the plain path sum but
    stays polynomial in max_edges. Returns (partial_sum, tail_bound) where
    tail_bound is the exact sum of |label products| over all discarded longer
    paths, computed from the geometric tail of the absolute-value matrix.
    """
    if max_edges < 2:
        raise ParameterDomainError(f"max_edges must be >= 2, got {max_edges}")
    mat, exit_vec = _transition_matrices(pr, w)
    mat_abs = np.abs(mat)
    rho = float(np.max(np.abs(np.linalg.eigvals(mat_abs))))
    if rho >= 1.0:
        raise DivergenceError(f"path sum tail does not converge (spectral radius {rho!r})")

    start = np.zeros(4)
    start[0] = 1.0  # source node
    total = 0.0
    v = start
    v_abs = start.copy()
    for _ in range(max_edges):
        total += float(v @ exit_vec)
        v = v @ mat
        v_abs = v_abs @ mat_abs
    # sum over paths with > max_edges edges, all labels in absolute value
    tail = float(v_abs @ np.linalg.solve(np.eye(4) - mat_abs, np.abs(exit_vec)))
    return total, tail

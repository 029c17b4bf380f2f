"""Separation oracle for the player-symmetric dual of the signaling LP.

For a symmetric dual point the exponentially many per-profile dual
constraints collapse, state by state, to an integer convex-cost flow
problem on edge congestions. The flow is solved exactly on a graph where
every edge is replaced by ``n`` unit-capacity copies whose per-unit costs
are the marginal increments of the convex edge term. Those increments are
nondecreasing in the copy index but can be negative: a negative edge dual
rewards congesting the edges that deviating players would use.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .errors import CapExceededError
from .game import GameInstance, Profile, congestion, enumerate_paths

log = logging.getLogger(__name__)

SIGN_TOL = 1e-9
FLOW_TOL = 1e-9
ENUMERATION_CAP = 50_000


@dataclass(frozen=True)
class SymmetricDualPoint:
    """Common per-player dual values: ``y_bar`` (persuasiveness rows),
    ``y_edge`` (shortest-path rows), ``y_sink`` (sink rows) and the
    per-state normalization duals ``y_state``."""

    y_bar: float
    y_edge: Mapping[str, float]
    y_sink: float
    y_state: Mapping[str, float]

    @classmethod
    def zeros(cls, game: GameInstance) -> SymmetricDualPoint:
        return cls(0.0, {e: 0.0 for e in game.graph.edge_ids}, 0.0, {th: 0.0 for th in game.states})

    def flow_residuals(self, game: GameInstance) -> dict[str, float]:
        """Residual of every node-balance equality of the symmetric dual."""
        g = game.graph
        out = {}
        for v in g.nodes:
            r = math.fsum(self.y_edge[e.id] for e in g.out_edges[v]) - math.fsum(self.y_edge[e.id] for e in g.in_edges[v])
            if v == game.source:
                r -= self.y_bar
            if v == game.sink:
                r += self.y_sink
            out[v] = r
        return out

    def check(self, game: GameInstance, tol: float = SIGN_TOL, flow: bool = True) -> None:
        if self.y_bar > tol:
            raise ValueError(f"y_bar must be <= 0, got {self.y_bar}")
        for e in game.graph.edge_ids:
            if e not in self.y_edge:
                raise ValueError(f"missing edge dual for {e!r}")
            if self.y_edge[e] > tol:
                raise ValueError(f"edge dual for {e!r} must be <= 0, got {self.y_edge[e]}")
        for th in game.states:
            if th not in self.y_state:
                raise ValueError(f"missing state dual for {th!r}")
        if flow:
            worst = max(self.flow_residuals(game).items(), key=lambda kv: abs(kv[1]))
            if abs(worst[1]) > tol:
                raise ValueError(f"node balance violated at {worst[0]!r} by {worst[1]}")


@dataclass(frozen=True)
class Arc:
    tail: str
    head: str
    edge: str
    copy: int
    cost: float


@dataclass(frozen=True)
class ExpandedGraph:
    nodes: tuple[str, ...]
    arcs: tuple[Arc, ...]
    source: str
    sink: str
    flow: int


@dataclass(frozen=True)
class Feasible:
    # sum over states of prior * chi: a valid lower bound on the LP optimum
    lower_bound: float = float("nan")


@dataclass(frozen=True)
class Violated:
    state: str
    profile: Profile
    violation: float
    chi: float
    lower_bound: float = float("nan")


SeparationResult = Feasible | Violated


def edge_term(game: GameInstance, state: str, edge: str, load: int, y: SymmetricDualPoint) -> float:
    """Contribution of one edge at congestion ``load`` to the per-state flow objective."""
    c = game.costs[(edge, state)]
    n = game.n
    return (1.0 - y.y_bar) * (c.alpha * load * load + c.beta * load) + y.y_edge[edge] * (
        n * c.alpha * load + (n - load) * c.alpha + n * c.beta
    )


def marginal_cost(game: GameInstance, state: str, edge: str, i: int, y: SymmetricDualPoint) -> float:
    """Per-unit cost of the ``i``-th copy of ``edge``: ``edge_term(i) - edge_term(i - 1)``."""
    if not 1 <= i <= game.n:
        raise ValueError(f"copy index {i} outside 1..{game.n}")
    c = game.costs[(edge, state)]
    return (1.0 - y.y_bar) * (c.alpha * (2 * i - 1) + c.beta) + y.y_edge[edge] * (game.n - 1) * c.alpha


def expand(game: GameInstance, state: str, y: SymmetricDualPoint) -> ExpandedGraph:
    arcs = []
    for e in sorted(game.graph.edges, key=lambda e: e.id):
        for i in range(1, game.n + 1):
            arcs.append(Arc(e.tail, e.head, e.id, i, marginal_cost(game, state, e.id, i, y)))
    return ExpandedGraph(game.graph.nodes, tuple(arcs), game.source, game.sink, game.n)


class NegativeCycleError(ValueError):
    """The expanded graph has a negative-cost cycle reachable from the source."""


def _initial_potentials(expanded: ExpandedGraph, index: Mapping[str, int]) -> list[float]:
    """Bellman-Ford distances from the source; unreachable nodes get 0."""
    dist = [math.inf] * len(index)
    dist[index[expanded.source]] = 0.0
    arcs = [(index[a.tail], index[a.head], a.cost) for a in expanded.arcs]
    for _ in range(len(index)):
        changed = False
        for u, v, c in arcs:
            if not math.isinf(dist[u]) and dist[u] + c < dist[v] - FLOW_TOL * (1.0 + abs(dist[u])):
                dist[v] = dist[u] + c
                changed = True
        if not changed:
            return [0.0 if math.isinf(d) else d for d in dist]
    raise NegativeCycleError("negative-cost cycle reachable from the source")


def min_cost_flow(expanded: ExpandedGraph) -> tuple[dict[str, int], float]:
    """Successive shortest paths with node potentials on unit-capacity arcs.

    Arc costs may be negative; initial potentials come from Bellman-Ford,
    which raises :class:`NegativeCycleError` when no finite optimum over
    path flows is guaranteed. Returns per-edge congestion (used copies)
    and the total arc cost.
    """
    arcs = expanded.arcs
    # residual arc r and its reverse r ^ 1 live in parallel lists
    index = {v: k for k, v in enumerate(expanded.nodes)}
    potential = _initial_potentials(expanded, index)
    adj: list[list[int]] = [[] for _ in expanded.nodes]
    res_head, res_cap, res_cost, res_arc = [], [], [], []
    for k, a in enumerate(arcs):
        u, v = index[a.tail], index[a.head]
        adj[u].append(len(res_head))
        res_head.append(v), res_cap.append(1), res_cost.append(a.cost), res_arc.append(k)
        adj[v].append(len(res_head))
        res_head.append(u), res_cap.append(0), res_cost.append(-a.cost), res_arc.append(k)
    s, t = index[expanded.source], index[expanded.sink]
    total = 0.0
    for _ in range(expanded.flow):
        dist = [math.inf] * len(potential)
        pred = [-1] * len(potential)
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for r in adj[u]:
                if res_cap[r] <= 0:
                    continue
                v = res_head[r]
                reduced = res_cost[r] + potential[u] - potential[v]
                if reduced < -FLOW_TOL * (1.0 + abs(res_cost[r]) + abs(potential[u]) + abs(potential[v])):
                    raise AssertionError(f"negative reduced cost {reduced}")
                nd = d + max(reduced, 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = r
                    heapq.heappush(heap, (nd, v))
        if math.isinf(dist[t]):
            raise ValueError(f"sink {expanded.sink!r} unreachable: cannot route {expanded.flow} units")
        for v in range(len(potential)):
            if not math.isinf(dist[v]):
                potential[v] += dist[v]
        v = t
        while v != s:
            r = pred[v]
            res_cap[r] -= 1
            res_cap[r ^ 1] += 1
            total += res_cost[r]
            v = res_head[r ^ 1]
    load: Counter[str] = Counter()
    for r in range(0, len(res_head), 2):
        if res_cap[r] == 0:
            load[arcs[res_arc[r]].edge] += 1
    return dict(load), total


def _chi_by_enumeration(game: GameInstance, state: str, y: SymmetricDualPoint, cap: int) -> tuple[float, dict[str, int]]:
    paths = enumerate_paths(game, 0, cap)
    if math.comb(len(paths) + game.n - 1, game.n) > cap:
        raise CapExceededError(f"more than {cap} path multisets to enumerate for state {state!r}")
    best = None
    for combo in itertools.combinations_with_replacement(paths, game.n):
        q = dict(congestion(combo))
        value = flow_objective(game, state, q, y)
        if best is None or value < best[0]:
            best = (value, q)
    return best


def chi(game: GameInstance, state: str, y: SymmetricDualPoint, cap: int = ENUMERATION_CAP) -> tuple[float, dict[str, int]]:
    """Optimal value and congestion of the per-state separation problem.

    Solved as a min-cost flow. If the marginal costs admit a negative
    cycle, a flow may circulate around it, which no profile of simple
    paths can do; the minimum is then taken over all path multisets
    instead (at most ``cap`` of them).
    """
    try:
        flow, cost = min_cost_flow(expand(game, state, y))
    except NegativeCycleError:
        log.debug("negative cycle in state %s; enumerating profiles", state)
        return _chi_by_enumeration(game, state, y, cap)
    offset = math.fsum(edge_term(game, state, e, 0, y) for e in game.graph.edge_ids)
    return cost + offset, flow


def flow_objective(game: GameInstance, state: str, load: Mapping[str, int], y: SymmetricDualPoint) -> float:
    return math.fsum(edge_term(game, state, e, load.get(e, 0), y) for e in game.graph.edge_ids)


def _find_cycle(game: GameInstance, q: Mapping[str, int]) -> list[str] | None:
    """A directed cycle (edge ids) inside the support of ``q``, or None."""
    out = game.graph.out_edges
    done: set[str] = set()
    for root in game.graph.nodes:
        if root in done:
            continue
        nodes, iters, via = [root], [iter(out[root])], []
        on_stack = {root}
        while iters:
            e = next((e for e in iters[-1] if q.get(e.id, 0) > 0), None)
            if e is None:
                v = nodes.pop()
                iters.pop()
                on_stack.discard(v)
                done.add(v)
                if via:
                    via.pop()
                continue
            if e.head in on_stack:
                return via[nodes.index(e.head):] + [e.id]
            if e.head not in done:
                nodes.append(e.head)
                iters.append(iter(out[e.head]))
                via.append(e.id)
                on_stack.add(e.head)
    return None


def _cancel_cycles(game: GameInstance, q: dict[str, int]) -> dict[str, int]:
    q = {e: f for e, f in q.items() if f > 0}
    while (cycle := _find_cycle(game, q)) is not None:
        amount = min(q[e] for e in cycle)
        for e in cycle:
            q[e] -= amount
    return q


def flow_decompose(game: GameInstance, q: Mapping[str, int]) -> Profile:
    """Split an integral source->sink flow of value ``n`` into ``n`` simple paths."""
    if not game.symmetric:
        raise ValueError("flow decomposition requires a symmetric game")
    g = game.graph
    for e, f in q.items():
        if e not in g.edge_map:
            raise ValueError(f"unknown edge {e!r}")
        if f < 0 or int(f) != f:
            raise ValueError(f"congestion on {e!r} must be a nonnegative integer, got {f}")
    for v in g.nodes:
        net = sum(q.get(e.id, 0) for e in g.out_edges[v]) - sum(q.get(e.id, 0) for e in g.in_edges[v])
        want = game.n if v == game.source else -game.n if v == game.sink else 0
        if net != want:
            raise ValueError(f"flow conservation violated at {v!r}: net outflow {net}, expected {want}")
    rest = _cancel_cycles(game, dict(q))
    paths = []
    for _ in range(game.n):
        v, path = game.source, []
        while v != game.sink:
            e = next(e for e in g.out_edges[v] if rest.get(e.id, 0) > 0)
            rest[e.id] -= 1
            path.append(e.id)
            v = e.head
        paths.append(tuple(path))
    return tuple(sorted(paths))


def dual_row_slack(game: GameInstance, state: str, profile: Profile, y: SymmetricDualPoint) -> float:
    """``rhs - lhs`` of the per-profile dual constraint at a symmetric point.

    Negative values mean the constraint is violated by that amount.
    Evaluated directly from the profile, without going through flows.
    """
    load = congestion(profile)
    social = 0.0
    for path in profile:
        social += sum(game.costs[(e, state)](load[e]) for e in path)
    deviation = 0.0
    for p, path in enumerate(profile):
        on = set(path)
        for e in game.graph.edge_ids:
            f = load.get(e, 0) + (0 if e in on else 1)
            deviation += game.costs[(e, state)](f) * y.y_edge[e]
    mu = game.prior[state]
    lhs = mu * (social * y.y_bar - deviation) + y.y_state[state]
    return mu * social - lhs


def separation_minimum(game: GameInstance, y: SymmetricDualPoint) -> tuple[float, str, dict[str, int], float]:
    """``min`` over states of ``prior * chi - y_state``.

    Returns the minimum, the first minimizing state, its congestion and
    ``sum(prior * chi)``, which bounds the LP optimum from below whenever
    ``y`` satisfies the sign and node-balance conditions.
    """
    best = None
    bound = []
    for th in game.states:
        value, q = chi(game, th, y)
        v = game.prior[th] * value - y.y_state[th]
        bound.append(game.prior[th] * value)
        if best is None or v < best[0]:
            best = (v, th, q)
    return best[0], best[1], best[2], math.fsum(bound)


def separate(game: GameInstance, y: SymmetricDualPoint, tol: float = 1e-9) -> SeparationResult:
    """Find the most violated per-profile dual constraint, if any exceeds ``tol``."""
    v, th, q, bound = separation_minimum(game, y)
    if v >= -tol:
        return Feasible(bound)
    profile = flow_decompose(game, q)
    value = flow_objective(game, th, congestion(profile), y)
    return Violated(th, profile, -(game.prior[th] * value - y.y_state[th]), value, bound)

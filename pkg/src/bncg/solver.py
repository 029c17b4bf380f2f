"""Optimal ex ante persuasive signaling schemes.

Two routes to the same optimum:

* :func:`brute_force_solve` writes the full signaling LP (one variable per
  state and action profile, shortest-path best-deviation potentials per
  player) and hands it to the simplex kernel. Works for asymmetric games
  as long as the profile set is small.
* :func:`cutting_plane_solve` works on the player-symmetric dual, adding
  violated per-profile constraints found by the min-cost-flow separation
  oracle, then re-solves the primal restricted to the generated columns.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import CapExceededError, ConvergenceError, UnsupportedGameError
from .game import (
    DEFAULT_PATH_CAP,
    GameInstance,
    Path,
    Profile,
    SignalingScheme,
    congestion,
    enumerate_paths,
    make_scheme,
    profile_cost,
)
from .lp import LinearProgram, LpStatus, solve_lp
from .separation import (
    Arc,
    ExpandedGraph,
    Feasible,
    SymmetricDualPoint,
    flow_decompose,
    min_cost_flow,
    separate,
)

log = logging.getLogger(__name__)

DEFAULT_COLUMN_CAP = 50_000
OPT_TOL = 1e-7


@dataclass
class SolveReport:
    value: float
    scheme: SignalingScheme
    iterations: int
    columns: list[tuple[str, Profile]]
    dual_point: SymmetricDualPoint | None
    gap: float
    lower_bound: float = float("nan")
    master_values: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class FullDualPoint:
    """Per-player dual values of the signaling LP."""

    y_player: tuple[float, ...]
    y_edge: tuple[Mapping[str, float], ...]
    y_sink: tuple[float, ...]
    y_state: Mapping[str, float]


@dataclass(frozen=True)
class BestResponseValues:
    """Cheapest expected cost of reaching the player's sink from every node."""

    player: int
    values: Mapping[str, float]
    weights: Mapping[str, float]
    successor: Mapping[str, str]
    next_node: Mapping[str, str]

    def path_from(self, node: str) -> Path:
        """Cheapest deviation path from ``node`` to the sink."""
        path = []
        while node in self.successor:
            path.append(self.successor[node])
            node = self.next_node[node]
        return tuple(path)


@dataclass(frozen=True)
class Persuasive:
    margins: tuple[float, ...]


@dataclass(frozen=True)
class NotPersuasive:
    player: int
    deviation: Path
    gain: float


# ---------------------------------------------------------------------------
# the signaling LP


@dataclass
class _PrimalLayout:
    columns: list[tuple[str, Profile]]
    edges: tuple[str, ...]
    nodes: tuple[str, ...]
    n: int
    states: tuple[str, ...]

    def row_persuasive(self, p: int) -> int:
        return p

    def row_edge(self, p: int, k: int) -> int:
        return self.n + p * len(self.edges) + k

    def row_sink(self, p: int) -> int:
        return self.n + self.n * len(self.edges) + p

    def row_state(self, j: int) -> int:
        return 2 * self.n + self.n * len(self.edges) + j

    def var_x(self, p: int, vi: int) -> int:
        return len(self.columns) + p * len(self.nodes) + vi


def build_signaling_lp(game: GameInstance, columns: Mapping[str, Sequence[Profile]]) -> tuple[LinearProgram, _PrimalLayout]:
    """The signaling LP with the scheme restricted to the given profiles per state."""
    edges = game.graph.edge_ids
    nodes = game.graph.nodes
    n = game.n
    cols = [(th, a) for th in game.states for a in columns[th]]
    layout = _PrimalLayout(cols, edges, nodes, n, game.states)
    nrows = 2 * n + n * len(edges) + len(game.states)
    nvars = len(cols) + n * len(nodes)
    A = np.zeros((nrows, nvars))
    c = np.zeros(nvars)
    rel = ["<="] * (n + n * len(edges)) + ["=="] * (n + len(game.states))
    b = np.zeros(nrows)
    node_index = {v: k for k, v in enumerate(nodes)}
    state_index = {th: j for j, th in enumerate(game.states)}

    for col, (th, a) in enumerate(cols):
        mu = game.prior[th]
        per_player, social = profile_cost(game, a, th)
        c[col] = mu * social
        load = congestion(a)
        for p, path in enumerate(a):
            A[layout.row_persuasive(p), col] = mu * per_player[p]
            on = set(path)
            for k, e in enumerate(edges):
                f = load.get(e, 0) + (0 if e in on else 1)
                A[layout.row_edge(p, k), col] = -mu * game.costs[(e, th)](f)
        A[layout.row_state(state_index[th]), col] = 1.0
    emap = game.graph.edge_map
    for p, (s, t) in enumerate(game.endpoints):
        A[layout.row_persuasive(p), layout.var_x(p, node_index[s])] = -1.0
        for k, e in enumerate(edges):
            tail, head = emap[e].tail, emap[e].head
            A[layout.row_edge(p, k), layout.var_x(p, node_index[tail])] += 1.0
            A[layout.row_edge(p, k), layout.var_x(p, node_index[head])] -= 1.0
        A[layout.row_sink(p), layout.var_x(p, node_index[t])] = 1.0
    for j in range(len(game.states)):
        b[layout.row_state(j)] = 1.0
    free = np.zeros(nvars, dtype=bool)
    free[len(cols):] = True
    return LinearProgram(c, A, tuple(rel), b, free), layout


def _scheme_from_solution(layout: _PrimalLayout, x: np.ndarray) -> SignalingScheme:
    weights: dict[str, list] = {th: [] for th in layout.states}
    for col, (th, a) in enumerate(layout.columns):
        if x[col] > 0:
            weights[th].append((float(x[col]), a))
    return make_scheme(weights)


def _full_duals(game: GameInstance, layout: _PrimalLayout, duals: np.ndarray) -> FullDualPoint:
    n = game.n
    return FullDualPoint(
        tuple(float(duals[layout.row_persuasive(p)]) for p in range(n)),
        tuple({e: float(duals[layout.row_edge(p, k)]) for k, e in enumerate(layout.edges)} for p in range(n)),
        tuple(float(duals[layout.row_sink(p)]) for p in range(n)),
        {th: float(duals[layout.row_state(j)]) for j, th in enumerate(game.states)},
    )


def all_profiles(game: GameInstance, path_cap: int = DEFAULT_PATH_CAP, column_cap: int = DEFAULT_COLUMN_CAP) -> list[Profile]:
    per_player = []
    cache: dict[tuple[str, str], list[Path]] = {}
    for p, pair in enumerate(game.endpoints):
        if pair not in cache:
            cache[pair] = enumerate_paths(game, p, path_cap)
        per_player.append(cache[pair])
    count = math.prod(len(ps) for ps in per_player)
    if count > column_cap:
        raise CapExceededError(f"{count} action profiles per state exceed the cap of {column_cap}")
    return [tuple(a) for a in itertools.product(*per_player)]


def brute_force_solve(
    game: GameInstance, path_cap: int = DEFAULT_PATH_CAP, column_cap: int = DEFAULT_COLUMN_CAP
) -> SolveReport:
    """Solve the signaling LP over every action profile."""
    profiles = all_profiles(game, path_cap, column_cap)
    lp, layout = build_signaling_lp(game, {th: profiles for th in game.states})
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"signaling LP reported {sol.status.value}; a valid game always admits a persuasive scheme")
    scheme = _scheme_from_solution(layout, sol.x)
    full = _full_duals(game, layout, sol.duals)
    dual_value = math.fsum(full.y_state.values())
    return SolveReport(
        value=sol.objective,
        scheme=scheme,
        iterations=1,
        columns=list(layout.columns),
        dual_point=symmetrize(game, full) if game.symmetric else None,
        gap=abs(sol.objective - dual_value),
        lower_bound=dual_value,
    )


def brute_force_duals(game: GameInstance, path_cap: int = DEFAULT_PATH_CAP, column_cap: int = DEFAULT_COLUMN_CAP) -> FullDualPoint:
    """Per-player optimal duals of the full signaling LP."""
    profiles = all_profiles(game, path_cap, column_cap)
    lp, layout = build_signaling_lp(game, {th: profiles for th in game.states})
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"signaling LP reported {sol.status.value}")
    return _full_duals(game, layout, sol.duals)


def full_dual_slack(game: GameInstance, y: FullDualPoint, state: str, profile: Profile) -> float:
    """``rhs - lhs`` of the per-profile dual constraint for per-player duals."""
    mu = game.prior[state]
    per_player, social = profile_cost(game, profile, state)
    load = congestion(profile)
    lhs = 0.0
    for p, path in enumerate(profile):
        lhs += per_player[p] * y.y_player[p]
        on = set(path)
        for e in game.graph.edge_ids:
            f = load.get(e, 0) + (0 if e in on else 1)
            lhs -= game.costs[(e, state)](f) * y.y_edge[p][e]
    return mu * social - (mu * lhs + y.y_state[state])


def symmetrize(game: GameInstance, y_full: FullDualPoint) -> SymmetricDualPoint:
    """Average the per-player duals; the state duals are kept as they are."""
    n = game.n
    return SymmetricDualPoint(
        y_bar=math.fsum(y_full.y_player) / n,
        y_edge={e: math.fsum(y_full.y_edge[p][e] for p in range(n)) / n for e in game.graph.edge_ids},
        y_sink=math.fsum(y_full.y_sink) / n,
        y_state=dict(y_full.y_state),
    )


# ---------------------------------------------------------------------------
# cutting plane on the symmetric dual


def _cyclic_shifts(profile: Profile) -> list[Profile]:
    n = len(profile)
    return sorted({tuple(profile[(p + i) % n] for p in range(n)) for i in range(n)})


def prior_equilibrium(game: GameInstance) -> Profile:
    """A pure Nash equilibrium of the game played on prior-expected costs.

    Minimizes the Rosenthal potential with a convex-cost flow, so the
    profile is persuasive when recommended regardless of the state.
    """
    arcs = []
    for e in sorted(game.graph.edges, key=lambda e: e.id):
        alpha = math.fsum(game.prior[th] * game.costs[(e.id, th)].alpha for th in game.states)
        beta = math.fsum(game.prior[th] * game.costs[(e.id, th)].beta for th in game.states)
        for i in range(1, game.n + 1):
            arcs.append(Arc(e.tail, e.head, e.id, i, alpha * i + beta))
    load, _ = min_cost_flow(ExpandedGraph(game.graph.nodes, tuple(arcs), game.source, game.sink, game.n))
    return flow_decompose(game, load)


def _master_lp(game: GameInstance, cuts: Mapping[str, Sequence[Profile]]) -> LinearProgram:
    # variables: z_bar = -y_bar >= 0, z_e = -y_e >= 0, y_sink free, y_state free
    edges = game.graph.edge_ids
    ne = len(edges)
    eidx = {e: k for k, e in enumerate(edges)}
    nvars = 1 + ne + 1 + len(game.states)
    sink_var = 1 + ne
    rows, rel, rhs = [], [], []
    g = game.graph
    for v in g.nodes:
        row = np.zeros(nvars)
        for e in g.out_edges[v]:
            row[1 + eidx[e.id]] -= 1.0
        for e in g.in_edges[v]:
            row[1 + eidx[e.id]] += 1.0
        if v == game.source:
            row[0] += 1.0
        if v == game.sink:
            row[sink_var] += 1.0
        rows.append(row), rel.append("=="), rhs.append(0.0)
    n = game.n
    for j, th in enumerate(game.states):
        mu = game.prior[th]
        for a in cuts[th]:
            _, social = profile_cost(game, a, th)
            load = congestion(a)
            row = np.zeros(nvars)
            row[0] = -mu * social
            for e in edges:
                cost = game.costs[(e, th)]
                f = load.get(e, 0)
                row[1 + eidx[e]] = mu * (n * cost.alpha * f + (n - f) * cost.alpha + n * cost.beta)
            row[sink_var + 1 + j] = 1.0
            rows.append(row), rel.append("<="), rhs.append(mu * social)
    c = np.zeros(nvars)
    c[sink_var + 1:] = 1.0
    free = np.zeros(nvars, dtype=bool)
    free[sink_var:] = True
    return LinearProgram(c, np.array(rows), tuple(rel), np.array(rhs), free, maximize=True)


def _master_point(game: GameInstance, x: np.ndarray) -> SymmetricDualPoint:
    edges = game.graph.edge_ids
    ne = len(edges)
    return SymmetricDualPoint(
        y_bar=-float(x[0]) + 0.0,
        y_edge={e: -float(x[1 + k]) + 0.0 for k, e in enumerate(edges)},
        y_sink=float(x[1 + ne]),
        y_state={th: float(x[2 + ne + j]) for j, th in enumerate(game.states)},
    )


def cutting_plane_solve(game: GameInstance, opt_tol: float = OPT_TOL, max_iters: int = 10_000) -> SolveReport:
    """Cutting planes on the symmetric dual, then the restricted primal."""
    if not game.symmetric:
        raise UnsupportedGameError(
            "cutting-plane solve needs symmetric players; the asymmetric problem is NP-hard, use brute force on small instances"
        )
    if not opt_tol > 0:
        raise ValueError("opt_tol must be positive")
    seed = prior_equilibrium(game)
    cuts: dict[str, list[Profile]] = {th: [seed] for th in game.states}
    generated: list[tuple[str, Profile]] = []
    master_values: list[float] = []
    best_lower = -math.inf
    y = None
    iterations = 0
    while True:
        if iterations >= max_iters:
            raise ConvergenceError("cutting-plane iteration limit reached", best_lower, master_values[-1], iterations)
        iterations += 1
        sol = solve_lp(_master_lp(game, cuts))
        if sol.status is LpStatus.UNBOUNDED:
            raise RuntimeError("restricted master unbounded: seed cuts do not bound the state duals")
        if sol.status is not LpStatus.OPTIMAL:
            raise RuntimeError(f"restricted master reported {sol.status.value}")
        y = _master_point(game, sol.x)
        master = sol.objective
        master_values.append(master)
        scale = max(1.0, abs(master))
        # per-state tolerance so the summed violations stay within opt_tol
        result = separate(game, y, tol=opt_tol * scale / len(game.states))
        best_lower = max(best_lower, result.lower_bound)
        log.debug("iteration %d: master %.12g, lower bound %.12g", iterations, master, result.lower_bound)
        if isinstance(result, Feasible):
            break
        if result.profile in cuts[result.state]:
            if master - best_lower <= 1e3 * opt_tol * scale:
                log.warning("separation repeated an existing cut; stopping at gap %.3g", master - best_lower)
                break
            raise ConvergenceError("separation repeated an existing cut", best_lower, master, iterations)
        cuts[result.state].append(result.profile)
        generated.append((result.state, result.profile))

    columns = {th: sorted({s for a in cuts[th] for s in _cyclic_shifts(a)}) for th in game.states}
    lp, layout = build_signaling_lp(game, columns)
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"restricted primal reported {sol.status.value}")
    scheme = _scheme_from_solution(layout, sol.x)
    log.info("cutting plane done: %d iterations, %d cuts, value %.12g", iterations, len(generated), sol.objective)
    return SolveReport(
        value=sol.objective,
        scheme=scheme,
        iterations=iterations,
        columns=generated,
        dual_point=y,
        gap=sol.objective - best_lower,
        lower_bound=best_lower,
        master_values=master_values,
    )


# ---------------------------------------------------------------------------
# persuasiveness


def deviation_weights(game: GameInstance, scheme: SignalingScheme, player: int) -> dict[str, float]:
    """Expected cost of each edge for ``player`` when deviating onto it alone."""
    w = {e: 0.0 for e in game.graph.edge_ids}
    for th, prob, a in scheme.entries():
        weight = game.prior[th] * prob
        load = congestion(a)
        on = set(a[player])
        for e in w:
            f = load.get(e, 0) + (0 if e in on else 1)
            w[e] += weight * game.costs[(e, th)](f)
    return w


def best_response_values(game: GameInstance, scheme: SignalingScheme, player: int) -> BestResponseValues:
    w = deviation_weights(game, scheme, player)
    sink = game.endpoints[player][1]
    g = game.graph
    dist = {v: math.inf for v in g.nodes}
    succ: dict[str, str] = {}
    nxt: dict[str, str] = {}
    dist[sink] = 0.0
    heap = [(0.0, sink)]
    done: set[str] = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for e in g.in_edges[v]:
            nd = d + w[e.id]
            u = e.tail
            if nd < dist[u] and u not in done:
                dist[u] = nd
                succ[u] = e.id
                nxt[u] = v
                heapq.heappush(heap, (nd, u))
    return BestResponseValues(player, dist, w, succ, nxt)


def expected_player_costs(game: GameInstance, scheme: SignalingScheme) -> list[float]:
    totals = [[] for _ in range(game.n)]
    for th, prob, a in scheme.entries():
        per_player, _ = profile_cost(game, a, th)
        for p, cost in enumerate(per_player):
            totals[p].append(game.prior[th] * prob * cost)
    return [math.fsum(t) for t in totals]


def verify_persuasive(game: GameInstance, scheme: SignalingScheme, eps: float = 1e-7) -> Persuasive | NotPersuasive:
    on_path = expected_player_costs(game, scheme)
    margins = []
    responses = []
    for p in range(game.n):
        br = best_response_values(game, scheme, p)
        responses.append(br)
        margins.append(br.values[game.endpoints[p][0]] - on_path[p])
    worst = min(range(game.n), key=lambda p: margins[p])
    if margins[worst] < -eps:
        source = game.endpoints[worst][0]
        return NotPersuasive(worst, responses[worst].path_from(source), -margins[worst])
    return Persuasive(tuple(margins))

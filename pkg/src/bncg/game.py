"""Bayesian network congestion games with affine edge costs.

A game is a directed multigraph, a finite set of states with a fully
supported prior, per-(edge, state) affine costs and one source/sink pair
per player. Paths are tuples of edge ids; an action profile is a tuple of
paths, one per player. A signaling scheme maps every state to a finite
distribution over action profiles.
"""

from __future__ import annotations

import json
import math
import sys
from collections import Counter, deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

from .errors import CapExceededError, GameFormatError

Path = tuple[str, ...]
Profile = tuple[Path, ...]

PRIOR_TOL = 1e-12
PROB_TOL = 1e-9
DROP_BELOW = 1e-12
DEFAULT_PATH_CAP = 10_000


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str


@dataclass(frozen=True)
class Graph:
    """Directed multigraph. Parallel edges are allowed, edge ids are unique."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != len(self.nodes):
            dup = sorted(k for k, c in Counter(self.nodes).items() if c > 1)
            raise GameFormatError(f"duplicate node ids {dup}", "nodes")
        known = set(self.nodes)
        seen: set[str] = set()
        for k, e in enumerate(self.edges):
            if e.id in seen:
                raise GameFormatError(f"duplicate edge id {e.id!r}", f"edges[{k}].id")
            seen.add(e.id)
            for end, name in ((e.tail, "from"), (e.head, "to")):
                if end not in known:
                    raise GameFormatError(f"unknown node {end!r}", f"edges[{k}].{name}")

    @cached_property
    def edge_map(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.edge_map))

    @cached_property
    def out_edges(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {v: [] for v in self.nodes}
        for e in self.edges:
            out[e.tail].append(e)
        return {v: tuple(sorted(es, key=lambda e: e.id)) for v, es in out.items()}

    @cached_property
    def in_edges(self) -> dict[str, tuple[Edge, ...]]:
        inc: dict[str, list[Edge]] = {v: [] for v in self.nodes}
        for e in self.edges:
            inc[e.head].append(e)
        return {v: tuple(sorted(es, key=lambda e: e.id)) for v, es in inc.items()}

    def reachable(self, source: str) -> set[str]:
        seen = {source}
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for e in self.out_edges[v]:
                if e.head not in seen:
                    seen.add(e.head)
                    queue.append(e.head)
        return seen


@dataclass(frozen=True)
class AffineCost:
    """Edge cost ``alpha * load + beta`` for load >= 1, and 0 on an empty edge."""

    alpha: float
    beta: float

    def __call__(self, load: int) -> float:
        if load == 0:
            return 0.0
        return self.alpha * load + self.beta


@dataclass(frozen=True, eq=True)
class GameInstance:
    graph: Graph
    n: int
    states: tuple[str, ...]
    prior: Mapping[str, float]
    costs: Mapping[tuple[str, str], AffineCost]
    endpoints: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise GameFormatError(f"player count must be a positive integer, got {self.n!r}", "n")
        if not self.states:
            raise GameFormatError("at least one state is required", "states")
        if len(set(self.states)) != len(self.states):
            raise GameFormatError("duplicate state ids", "states")
        for th in self.states:
            if th not in self.prior:
                raise GameFormatError("missing prior entry", f"prior.{th}")
        for th in self.prior:
            if th not in self.states:
                raise GameFormatError("prior entry for unknown state", f"prior.{th}")
        for th in self.states:
            if not self.prior[th] > 0:
                raise GameFormatError(f"prior must be strictly positive, got {self.prior[th]!r}", f"prior.{th}")
        total = math.fsum(self.prior.values())
        if abs(total - 1.0) > PRIOR_TOL:
            raise GameFormatError(f"prior sums to {total:.12g}", "prior")
        for e in self.graph.edge_ids:
            for th in self.states:
                c = self.costs.get((e, th))
                if c is None:
                    raise GameFormatError("missing cost entry", f"costs.{e}.{th}")
                for name in ("alpha", "beta"):
                    val = getattr(c, name)
                    if not math.isfinite(val) or val < 0:
                        raise GameFormatError(f"must be finite and nonnegative, got {val!r}", f"costs.{e}.{th}.{name}")
        if len(self.endpoints) != self.n:
            raise GameFormatError(f"expected {self.n} source/sink pairs, got {len(self.endpoints)}", "players")
        nodes = set(self.graph.nodes)
        for p, (s, t) in enumerate(self.endpoints):
            for v in (s, t):
                if v not in nodes:
                    raise GameFormatError(f"unknown node {v!r}", f"players[{p}]")
            if s == t:
                raise GameFormatError("source and sink coincide", f"players[{p}]")
            if t not in self.graph.reachable(s):
                raise GameFormatError(f"sink {t!r} unreachable from source {s!r}", f"players[{p}]")

    @property
    def symmetric(self) -> bool:
        return len(set(self.endpoints)) == 1

    @property
    def source(self) -> str:
        return self.endpoints[0][0]

    @property
    def sink(self) -> str:
        return self.endpoints[0][1]

    def cost(self, edge: str, state: str) -> AffineCost:
        return self.costs[(edge, state)]

    def check_state(self, state: str) -> None:
        if state not in self.prior:
            raise KeyError(f"unknown state {state!r}")


# ---------------------------------------------------------------------------
# game JSON


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GameFormatError(f"expected a number, got {value!r}", path)
    return float(value)


def _require(data: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(data, Mapping):
        raise GameFormatError("expected an object", path)
    if key not in data:
        raise GameFormatError("missing field", f"{path}.{key}" if path else key)
    return data[key]


def game_from_dict(data: Mapping[str, Any]) -> GameInstance:
    n = _require(data, "n", "")
    nodes = _require(data, "nodes", "")
    if not isinstance(nodes, list) or not all(isinstance(v, str) for v in nodes):
        raise GameFormatError("expected a list of strings", "nodes")
    raw_edges = _require(data, "edges", "")
    if not isinstance(raw_edges, list):
        raise GameFormatError("expected a list", "edges")
    edges = []
    for k, e in enumerate(raw_edges):
        fields = [_require(e, f, f"edges[{k}]") for f in ("id", "from", "to")]
        if not all(isinstance(x, str) for x in fields):
            raise GameFormatError("edge fields must be strings", f"edges[{k}]")
        edges.append(Edge(*fields))
    graph = Graph(tuple(nodes), tuple(edges))

    states = _require(data, "states", "")
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise GameFormatError("expected a list of strings", "states")
    raw_prior = _require(data, "prior", "")
    if not isinstance(raw_prior, Mapping):
        raise GameFormatError("expected an object", "prior")
    prior = {th: _number(p, f"prior.{th}") for th, p in raw_prior.items()}

    raw_costs = _require(data, "costs", "")
    if not isinstance(raw_costs, Mapping):
        raise GameFormatError("expected an object", "costs")
    costs = {}
    for e, per_state in raw_costs.items():
        if e not in graph.edge_map:
            raise GameFormatError("cost entry for unknown edge", f"costs.{e}")
        if not isinstance(per_state, Mapping):
            raise GameFormatError("expected an object", f"costs.{e}")
        for th, coef in per_state.items():
            if th not in states:
                raise GameFormatError("cost entry for unknown state", f"costs.{e}.{th}")
            path = f"costs.{e}.{th}"
            alpha = _number(_require(coef, "alpha", path), f"{path}.alpha")
            beta = _number(_require(coef, "beta", path), f"{path}.beta")
            costs[(e, th)] = AffineCost(alpha, beta)

    players = _require(data, "players", "")
    if not isinstance(players, Mapping) or len(players) != 1:
        raise GameFormatError("expected exactly one of 'symmetric' or 'list'", "players")
    if "symmetric" in players:
        sym = players["symmetric"]
        pair = (_require(sym, "source", "players.symmetric"), _require(sym, "sink", "players.symmetric"))
        endpoints = (pair,) * n if isinstance(n, int) and not isinstance(n, bool) and n > 0 else ()
    elif "list" in players:
        lst = players["list"]
        if not isinstance(lst, list):
            raise GameFormatError("expected a list", "players.list")
        endpoints = tuple(
            (_require(d, "source", f"players.list[{k}]"), _require(d, "sink", f"players.list[{k}]"))
            for k, d in enumerate(lst)
        )
    else:
        raise GameFormatError("expected 'symmetric' or 'list'", "players")
    return GameInstance(graph, n, tuple(states), prior, costs, endpoints)


def parse_game(text: str) -> GameInstance:
    """Parse and validate the game JSON format."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, Mapping):
        raise GameFormatError("top level must be an object")
    return game_from_dict(data)


def game_to_dict(game: GameInstance) -> dict[str, Any]:
    if game.symmetric:
        players: dict[str, Any] = {"symmetric": {"source": game.source, "sink": game.sink}}
    else:
        players = {"list": [{"source": s, "sink": t} for s, t in game.endpoints]}
    return {
        "n": game.n,
        "nodes": list(game.graph.nodes),
        "edges": [{"id": e.id, "from": e.tail, "to": e.head} for e in game.graph.edges],
        "states": list(game.states),
        "prior": {th: game.prior[th] for th in game.states},
        "costs": {
            e.id: {th: {"alpha": game.costs[(e.id, th)].alpha, "beta": game.costs[(e.id, th)].beta} for th in game.states}
            for e in game.graph.edges
        },
        "players": players,
    }


def serialize_game(game: GameInstance) -> str:
    return json.dumps(game_to_dict(game), indent=2)


# ---------------------------------------------------------------------------
# paths and profiles


def enumerate_paths(game: GameInstance, player: int = 0, cap: int = DEFAULT_PATH_CAP) -> list[Path]:
    """All simple source->sink paths of ``player``, lexicographic by edge-id sequence."""
    source, sink = game.endpoints[player]
    out = game.graph.out_edges
    paths: list[Path] = []
    on_path = {source}
    trail: list[str] = []
    # explicit stack of edge iterators keeps deep graphs off the recursion limit
    stack = [iter(out[source])]
    while stack:
        e = next(stack[-1], None)
        if e is None:
            stack.pop()
            if trail:
                last = trail.pop()
                on_path.discard(game.graph.edge_map[last].head)
            continue
        if e.head in on_path:
            continue
        if e.head == sink:
            paths.append((*trail, e.id))
            if len(paths) > cap:
                raise CapExceededError(f"player {player} has more than {cap} paths (path cap); instance too large for exact methods")
            continue
        trail.append(e.id)
        on_path.add(e.head)
        stack.append(iter(out[e.head]))
    paths.sort()
    return paths


def validate_path(game: GameInstance, path: Sequence[str], player: int) -> None:
    source, sink = game.endpoints[player]
    if not path:
        raise GameFormatError("empty path", f"player {player}")
    emap = game.graph.edge_map
    at = source
    seen = {source}
    for k, eid in enumerate(path):
        e = emap.get(eid)
        if e is None:
            raise GameFormatError(f"unknown edge {eid!r}", f"player {player}, step {k}")
        if e.tail != at:
            raise GameFormatError(f"edge {eid!r} does not leave {at!r}", f"player {player}, step {k}")
        if e.head in seen:
            raise GameFormatError(f"path revisits node {e.head!r}", f"player {player}, step {k}")
        seen.add(e.head)
        at = e.head
    if at != sink:
        raise GameFormatError(f"path ends at {at!r}, expected {sink!r}", f"player {player}")


def validate_profile(game: GameInstance, profile: Profile) -> None:
    if len(profile) != game.n:
        raise GameFormatError(f"profile has {len(profile)} paths, expected {game.n}")
    for p, path in enumerate(profile):
        validate_path(game, path, p)


def congestion(profile: Iterable[Path]) -> Counter[str]:
    """Per-edge load f_e of a profile (edges with zero load are absent)."""
    load: Counter[str] = Counter()
    for path in profile:
        load.update(path)
    return load


def profile_cost(game: GameInstance, profile: Profile, state: str) -> tuple[list[float], float]:
    """Per-player costs and social cost of ``profile`` in ``state``."""
    game.check_state(state)
    if len(profile) != game.n:
        raise ValueError(f"profile has {len(profile)} paths, expected {game.n}")
    load = congestion(profile)
    edge_cost = {e: game.costs[(e, state)](f) for e, f in load.items()}
    per_player = [math.fsum(edge_cost[e] for e in path) for path in profile]
    return per_player, math.fsum(per_player)


def social_cost(game: GameInstance, profile: Profile, state: str) -> float:
    return profile_cost(game, profile, state)[1]


# ---------------------------------------------------------------------------
# signaling schemes


@dataclass(frozen=True)
class SignalingScheme:
    """Per-state finite distributions over action profiles."""

    support: Mapping[str, tuple[tuple[float, Profile], ...]]

    def entries(self):
        for th, dist in self.support.items():
            for prob, profile in dist:
                yield th, prob, profile


def make_scheme(weights: Mapping[str, Iterable[tuple[float, Profile]]], drop_below: float = DROP_BELOW) -> SignalingScheme:
    """Build a scheme from raw weights: merge duplicate profiles, drop tiny masses, renormalize."""
    support = {}
    for th, items in weights.items():
        merged: dict[Profile, float] = {}
        for prob, profile in items:
            key = tuple(tuple(path) for path in profile)
            merged[key] = merged.get(key, 0.0) + prob
        kept = [(p, a) for a, p in merged.items() if p >= drop_below]
        total = math.fsum(p for p, _ in kept)
        if not kept or total <= 0:
            raise GameFormatError("empty support", f"states.{th}")
        if len(kept) < len(merged) or abs(total - 1.0) > 4 * sys.float_info.epsilon:
            kept = [(p / total, a) for p, a in kept]
        support[th] = tuple(sorted(kept, key=lambda pa: pa[1]))
    return SignalingScheme(support)


def validate_scheme(game: GameInstance, scheme: SignalingScheme, tol: float = PROB_TOL) -> None:
    for th in game.states:
        if th not in scheme.support:
            raise GameFormatError("no distribution for state", f"states.{th}")
    for th, dist in scheme.support.items():
        if th not in game.prior:
            raise GameFormatError("unknown state", f"states.{th}")
        if not dist:
            raise GameFormatError("empty support", f"states.{th}")
        for k, (prob, profile) in enumerate(dist):
            if not prob >= 0:
                raise GameFormatError(f"negative probability {prob!r}", f"states.{th}[{k}].prob")
            try:
                validate_profile(game, profile)
            except GameFormatError as exc:
                raise GameFormatError(str(exc), f"states.{th}[{k}].profile") from exc
        total = math.fsum(p for p, _ in dist)
        if abs(total - 1.0) > tol:
            raise GameFormatError(f"probabilities sum to {total:.12g}", f"states.{th}")


def expected_social_cost(game: GameInstance, scheme: SignalingScheme) -> float:
    return math.fsum(
        game.prior[th] * prob * social_cost(game, profile, th) for th, prob, profile in scheme.entries()
    )


def scheme_to_dict(scheme: SignalingScheme) -> dict[str, Any]:
    return {
        "states": {
            th: [{"prob": prob, "profile": [list(path) for path in profile]} for prob, profile in dist]
            for th, dist in scheme.support.items()
        }
    }


def serialize_scheme(scheme: SignalingScheme) -> str:
    return json.dumps(scheme_to_dict(scheme), indent=2)


def parse_scheme(text: str, game: GameInstance) -> SignalingScheme:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"malformed JSON: {exc}") from exc
    states = _require(data, "states", "")
    if not isinstance(states, Mapping):
        raise GameFormatError("expected an object", "states")
    weights = {}
    for th, dist in states.items():
        if th not in game.prior:
            raise GameFormatError("unknown state", f"states.{th}")
        if not isinstance(dist, list) or not dist:
            raise GameFormatError("empty support", f"states.{th}")
        items = []
        for k, entry in enumerate(dist):
            path = f"states.{th}[{k}]"
            prob = _number(_require(entry, "prob", path), f"{path}.prob")
            if prob < 0:
                raise GameFormatError(f"negative probability {prob!r}", f"{path}.prob")
            raw = _require(entry, "profile", path)
            if not isinstance(raw, list) or not all(isinstance(p, list) for p in raw):
                raise GameFormatError("expected a list of edge-id lists", f"{path}.profile")
            profile = tuple(tuple(p) for p in raw)
            try:
                validate_profile(game, profile)
            except GameFormatError as exc:
                raise GameFormatError(str(exc), f"{path}.profile") from exc
            items.append((prob, profile))
        total = math.fsum(p for p, _ in items)
        if abs(total - 1.0) > PROB_TOL:
            raise GameFormatError(f"probabilities sum to {total:.12g}", f"states.{th}")
        weights[th] = items
    scheme = make_scheme(weights)
    validate_scheme(game, scheme)
    return scheme

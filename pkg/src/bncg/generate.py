"""Seeded random symmetric test instances on layered DAGs."""

from __future__ import annotations

import random

from .game import AffineCost, Edge, GameInstance, Graph


def random_game(nodes: int = 4, extra_edges: int = 2, states: int = 2, players: int = 2, seed: int = 0) -> GameInstance:
    """Symmetric game on ``s = v0 -> v1 -> ... -> t``, plus random forward edges.

    The backbone chain guarantees an s-t path; extra edges always point
    forward in the node order (parallel edges allowed), so the graph stays
    acyclic. Cost coefficients are uniform on [0, 10] rounded to 2 decimals.
    """
    if nodes < 2:
        raise ValueError("need at least 2 nodes")
    if states < 1 or players < 1 or extra_edges < 0:
        raise ValueError("states and players must be positive, extra_edges nonnegative")
    rng = random.Random(seed)
    names = ["s", *(f"v{k}" for k in range(1, nodes - 1)), "t"]
    pairs = [(k, k + 1) for k in range(nodes - 1)]
    for _ in range(extra_edges):
        i = rng.randrange(nodes - 1)
        j = rng.randrange(i + 1, nodes)
        pairs.append((i, j))
    width = len(str(len(pairs) - 1))
    edges = tuple(Edge(f"e{k:0{width}d}", names[i], names[j]) for k, (i, j) in enumerate(pairs))
    state_ids = tuple(f"theta{k}" for k in range(states))
    weights = [rng.randint(1, 9) for _ in state_ids]
    prior = {th: w / sum(weights) for th, w in zip(state_ids, weights)}
    costs = {
        (e.id, th): AffineCost(round(rng.uniform(0, 10), 2), round(rng.uniform(0, 10), 2)) for e in edges for th in state_ids
    }
    return GameInstance(Graph(tuple(names), edges), players, state_ids, prior, costs, (("s", "t"),) * players)

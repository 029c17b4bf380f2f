"""3SAT-derived singleton congestion games and their network encoding.

A singleton congestion game (SCG) lets every player pick one resource out
of its own allowed set. :func:`build_scg` turns a 3-CNF formula into the
asymmetric SCG used to show that optimal coarse correlated equilibria are
hard to compute; :func:`scg_to_ncg` rewrites any SCG as a network game with
one source/sink pair per player and a single state.

Default parameters are astronomically large (``z = m**30``), so builds are
gated by a player cap. Scaled-down parameters reproduce the structure of
the construction but not its hardness guarantees.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .errors import CapExceededError, GameFormatError
from .game import AffineCost, Edge, GameInstance, Graph, Profile

Literal = tuple[int, bool]  # (1-based variable index, negated)

DEFAULT_MAX_PLAYERS = 10**6
STATE = "theta0"


@dataclass(frozen=True)
class CnfFormula:
    s: int
    clauses: tuple[tuple[Literal, ...], ...]

    def __post_init__(self) -> None:
        if self.s < 1:
            raise GameFormatError(f"need at least one variable, got {self.s}", "p")
        for k, clause in enumerate(self.clauses):
            if len(clause) != 3:
                raise GameFormatError(f"clause has {len(clause)} literals, expected 3", f"clause[{k}]")
            for var, _ in clause:
                if not 1 <= var <= self.s:
                    raise GameFormatError(f"variable {var} outside 1..{self.s}", f"clause[{k}]")
        if self.m < self.s:
            raise GameFormatError(f"{self.m} clauses but {self.s} variables; need m >= s (pad with duplicate clauses)", "p")

    @property
    def m(self) -> int:
        return len(self.clauses)

    def satisfied_by(self, assignment: Mapping[int, bool]) -> bool:
        return all(any(assignment[v] != neg for v, neg in clause) for clause in self.clauses)


def parse_dimacs(text: str, pad: bool = False) -> CnfFormula:
    """Parse DIMACS CNF restricted to 3-literal clauses.

    With ``pad`` set, formulas with fewer clauses than variables are padded
    by repeating the first clause, which leaves satisfiability unchanged.
    """
    header = None
    tokens: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):  # end marker used by some benchmark sets
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise GameFormatError(f"bad problem line {line!r}", f"line {lineno}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise GameFormatError(f"bad problem line {line!r}", f"line {lineno}") from None
            continue
        if header is None:
            raise GameFormatError("clause before the 'p cnf' line", f"line {lineno}")
        try:
            tokens.extend(int(tok) for tok in line.split())
        except ValueError:
            raise GameFormatError(f"non-integer literal in {line!r}", f"line {lineno}") from None
    if header is None:
        raise GameFormatError("missing 'p cnf' line")
    s, declared = header
    clauses, current = [], []
    for tok in tokens:
        if tok == 0:
            clauses.append(current)
            current = []
        else:
            current.append((abs(tok), tok < 0))
    if current:
        clauses.append(current)
    if len(clauses) != declared:
        raise GameFormatError(f"header declares {declared} clauses, found {len(clauses)}", "p")
    for k, clause in enumerate(clauses):
        if len(clause) != 3:
            raise GameFormatError(f"clause has {len(clause)} literals, expected 3", f"clause[{k}]")
    if pad and clauses and len(clauses) < s:
        clauses += [clauses[0]] * (s - len(clauses))
    return CnfFormula(s, tuple(tuple(c) for c in clauses))


def formula_to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.s} {formula.m}"]
    lines += [" ".join(str(-v if neg else v) for v, neg in clause) + " 0" for clause in formula.clauses]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GadgetParams:
    z: int
    u: int
    eps: float

    def __post_init__(self) -> None:
        for name in ("z", "u"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.u > self.z:
            raise ValueError(f"need u <= z, got u={self.u}, z={self.z}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @classmethod
    def default(cls, formula: CnfFormula) -> GadgetParams:
        m = formula.m
        return cls(m**30, m**12, 1.0 / m**4)


def gamma(formula: CnfFormula, params: GadgetParams) -> float:
    """Social-cost threshold separating satisfiable from unsatisfiable formulas."""
    m, s, z, u = formula.m, formula.s, params.z, params.u
    exact = z * z + (4 * u * s + s + 3 * m) * (z - u) + Fraction(3 * z, m**9)
    return float(exact)


def player_count(formula: CnfFormula, params: GadgetParams) -> int:
    return formula.s + 3 * formula.m + 4 * params.u * formula.s + params.z


@dataclass(frozen=True)
class ScgInstance:
    """Resources with affine costs and, per player, the resources it may pick."""

    resources: Mapping[str, AffineCost]
    players: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        ids = [p for p, _ in self.players]
        if len(set(ids)) != len(ids):
            raise GameFormatError("duplicate player ids", "players")
        for k, (p, actions) in enumerate(self.players):
            if not actions:
                raise GameFormatError(f"player {p!r} has no resources", f"players[{k}]")
            if len(set(actions)) != len(actions):
                raise GameFormatError(f"player {p!r} lists a resource twice", f"players[{k}]")
            for r in actions:
                if r not in self.resources:
                    raise GameFormatError(f"unknown resource {r!r}", f"players[{k}]")
        for r, c in self.resources.items():
            if not (c.alpha >= 0 and c.beta >= 0):
                raise GameFormatError("coefficients must be nonnegative", f"resources.{r}")

    @property
    def n(self) -> int:
        return len(self.players)

    def social_cost(self, choice: Sequence[str]) -> float:
        """Total cost when player ``k`` uses resource ``choice[k]``."""
        load: dict[str, int] = {}
        for r in choice:
            load[r] = load.get(r, 0) + 1
        return sum(f * self.resources[r](f) for r, f in load.items())

    def player_cost(self, choice: Sequence[str], k: int) -> float:
        r = choice[k]
        return self.resources[r](sum(1 for x in choice if x == r))

    def profiles(self):
        return itertools.product(*(actions for _, actions in self.players))


def _lit(v: int, neg: bool) -> str:
    return f"nx{v}" if neg else f"x{v}"


def build_scg(formula: CnfFormula, params: GadgetParams, max_players: int = DEFAULT_MAX_PLAYERS) -> ScgInstance:
    count = player_count(formula, params)
    if count > max_players:
        raise CapExceededError(f"gadget would have {count} players (cap {max_players}); pass smaller z and u")
    z, u, eps = params.z, params.u, params.eps
    resources: dict[str, AffineCost] = {"r_t": AffineCost(1.0, 0.0)}
    for v in range(1, formula.s + 1):
        for neg in (False, True):
            lit = _lit(v, neg)
            resources[f"r_{lit}"] = AffineCost(eps, z + 1 - eps)
            resources[f"r_{lit}_1"] = AffineCost(1.0, float(z + 1 - u))
            resources[f"r_{lit}_2"] = AffineCost(1.0, float(z + 1 - u))
    players: list[tuple[str, tuple[str, ...]]] = []
    for v in range(1, formula.s + 1):
        players.append((f"p_x{v}", (f"r_x{v}", f"r_nx{v}", "r_t")))
    for k, clause in enumerate(formula.clauses, 1):
        # a clause may repeat a literal; the player's resource set is the set of its literals
        actions = tuple(dict.fromkeys(f"r_{_lit(v, neg)}" for v, neg in clause))
        for q in range(1, 4):
            players.append((f"p_c{k}_q{q}", actions))
    for v in range(1, formula.s + 1):
        for neg in (False, True):
            lit = _lit(v, neg)
            for j in range(1, 2 * u + 1):
                players.append((f"p_{lit}_j{j}", (f"r_{lit}", f"r_{lit}_1", f"r_{lit}_2")))
    for i in range(1, z + 1):
        players.append((f"p_i{i}", ("r_t",)))
    return ScgInstance(resources, tuple(players))


def scg_to_ncg(scg: ScgInstance) -> GameInstance:
    """Encode ``scg`` as a single-state network game.

    Resource ``r`` becomes an edge ``v1[r] -> v2[r]`` carrying its cost;
    player ``p`` gets zero-cost edges ``s[p] -> v1[r]`` and ``v2[r] -> t[p]``
    for each allowed ``r``, so its paths are exactly its resources.
    """
    nodes = [x for r in scg.resources for x in (f"v1[{r}]", f"v2[{r}]")]
    nodes += [x for p, _ in scg.players for x in (f"s[{p}]", f"t[{p}]")]
    edges = [Edge(f"mid[{r}]", f"v1[{r}]", f"v2[{r}]") for r in scg.resources]
    costs = {(f"mid[{r}]", STATE): c for r, c in scg.resources.items()}
    zero = AffineCost(0.0, 0.0)
    for p, actions in scg.players:
        for r in actions:
            edges += [Edge(f"in[{p},{r}]", f"s[{p}]", f"v1[{r}]"), Edge(f"out[{p},{r}]", f"v2[{r}]", f"t[{p}]")]
            costs[(f"in[{p},{r}]", STATE)] = zero
            costs[(f"out[{p},{r}]", STATE)] = zero
    endpoints = tuple((f"s[{p}]", f"t[{p}]") for p, _ in scg.players)
    return GameInstance(Graph(tuple(nodes), tuple(edges)), scg.n, (STATE,), {STATE: 1.0}, costs, endpoints)


def ncg_profile(scg: ScgInstance, choice: Sequence[str]) -> Profile:
    """The network-game profile matching a resource choice per player."""
    return tuple((f"in[{p},{r}]", f"mid[{r}]", f"out[{p},{r}]") for (p, _), r in zip(scg.players, choice))


def scg_to_dict(scg: ScgInstance) -> dict[str, Any]:
    return {
        "resources": [{"id": r, "alpha": c.alpha, "beta": c.beta} for r, c in scg.resources.items()],
        "players": [{"id": p, "actions": list(actions)} for p, actions in scg.players],
    }


def scg_from_dict(data: Mapping[str, Any]) -> ScgInstance:
    if not isinstance(data, Mapping) or "resources" not in data or "players" not in data:
        raise GameFormatError("expected an object with 'resources' and 'players'")
    resources = {}
    for k, r in enumerate(data["resources"]):
        try:
            rid, alpha, beta = r["id"], r["alpha"], r["beta"]
        except (KeyError, TypeError):
            raise GameFormatError("resource needs id, alpha and beta", f"resources[{k}]") from None
        if not isinstance(rid, str) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in (alpha, beta)):
            raise GameFormatError("bad resource fields", f"resources[{k}]")
        if rid in resources:
            raise GameFormatError(f"duplicate resource {rid!r}", f"resources[{k}]")
        resources[rid] = AffineCost(float(alpha), float(beta))
    players = []
    for k, p in enumerate(data["players"]):
        try:
            pid, actions = p["id"], p["actions"]
        except (KeyError, TypeError):
            raise GameFormatError("player needs id and actions", f"players[{k}]") from None
        if not isinstance(pid, str) or not isinstance(actions, list) or not all(isinstance(a, str) for a in actions):
            raise GameFormatError("bad player fields", f"players[{k}]")
        players.append((pid, tuple(actions)))
    return ScgInstance(resources, tuple(players))


def serialize_scg(scg: ScgInstance) -> str:
    return json.dumps(scg_to_dict(scg), indent=2)


def parse_scg(text: str) -> ScgInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"malformed JSON: {exc}") from exc
    return scg_from_dict(data)


def gadget_metadata(formula: CnfFormula, params: GadgetParams, scg: ScgInstance) -> dict[str, Any]:
    return {
        "m": formula.m,
        "s": formula.s,
        "z": params.z,
        "u": params.u,
        "eps": params.eps,
        "gamma": gamma(formula, params),
        "players": scg.n,
        "resources": len(scg.resources),
    }

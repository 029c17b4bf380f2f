"""Dense two-phase tableau simplex returning primal and dual solutions.

Dual sign convention (the one callers rely on): ``duals[i]`` is the
derivative of the optimal objective with respect to ``rhs[i]``. For a
minimization this makes duals of ``>=`` rows nonnegative, of ``<=`` rows
nonpositive and of ``==`` rows free; for a maximization the signs of the
inequality rows flip. In both cases ``objective == rhs @ duals`` at an
optimum.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

RELATIONS = ("<=", "==", ">=")
DEFAULT_MAX_NONZEROS = 200_000
BLAND_AFTER = 1_000


class LpCyclingError(RuntimeError):
    """Pivot budget exhausted; the caller should perturb the problem."""


class LpSizeError(RuntimeError):
    pass


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``min`` (or ``max``) ``c @ x`` subject to ``A[i] @ x (rel_i) b[i]``.

    Variables have lower bound 0, or are free where ``free[j]`` is set.
    """

    c: np.ndarray
    A: np.ndarray
    relations: tuple[str, ...]
    b: np.ndarray
    free: np.ndarray
    maximize: bool = False

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.b, dtype=float)
        free = np.zeros(c.size, dtype=bool) if self.free is None else np.asarray(self.free, dtype=bool)
        if A.shape[0] != b.size or len(self.relations) != b.size:
            raise ValueError("constraint matrix, relations and rhs disagree on the row count")
        if free.size != c.size:
            raise ValueError("free-variable mask has the wrong length")
        if bad := [r for r in self.relations if r not in RELATIONS]:
            raise ValueError(f"unknown relations {bad}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(A)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "relations", tuple(self.relations))

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Constraint violation per row (0 when satisfied)."""
        ax = self.A @ x
        out = np.zeros(self.b.size)
        for i, rel in enumerate(self.relations):
            if rel == "<=":
                out[i] = max(0.0, ax[i] - self.b[i])
            elif rel == ">=":
                out[i] = max(0.0, self.b[i] - ax[i])
            else:
                out[i] = abs(ax[i] - self.b[i])
        return out


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    # unbounded: improving primal ray; infeasible: phase-one dual multipliers
    ray: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpBuilder:
    """Incremental sparse construction of a :class:`LinearProgram`."""

    def __init__(self, maximize: bool = False):
        self.maximize = maximize
        self._cost: list[float] = []
        self._free: list[bool] = []
        self._rows: list[dict[int, float]] = []
        self._rel: list[str] = []
        self._rhs: list[float] = []

    @property
    def num_vars(self) -> int:
        return len(self._cost)

    def add_var(self, cost: float = 0.0, free: bool = False) -> int:
        self._cost.append(float(cost))
        self._free.append(free)
        return len(self._cost) - 1

    def add_row(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]], relation: str, rhs: float) -> int:
        row: dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            row[j] = row.get(j, 0.0) + float(a)
        self._rows.append(row)
        self._rel.append(relation)
        self._rhs.append(float(rhs))
        return len(self._rows) - 1

    def build(self) -> LinearProgram:
        A = np.zeros((len(self._rows), len(self._cost)))
        for i, row in enumerate(self._rows):
            for j, a in row.items():
                A[i, j] = a
        return LinearProgram(np.array(self._cost), A, tuple(self._rel), np.array(self._rhs), np.array(self._free, dtype=bool), self.maximize)


@dataclass
class _Tableau:
    T: np.ndarray  # rows: constraints, last column: rhs
    basis: np.ndarray
    iterations: int = 0
    degenerate: int = 0
    bland: bool = False
    pivots: list = field(default_factory=list)


def _pivot(tab: _Tableau, row: int, col: int) -> None:
    T = tab.T
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
    tab.basis[row] = col


def _run(tab: _Tableau, cost: np.ndarray, allowed: np.ndarray, dtol: float, ptol: float, cap: int, bland_after: int):
    """Primal simplex on ``tab`` for ``min cost @ x``. Returns None or the unbounded column."""
    T = tab.T
    ncols = cost.size
    while True:
        d = cost - cost[tab.basis] @ T[:, :ncols]
        cand = np.flatnonzero(allowed & (d < -dtol))
        if cand.size == 0:
            return None
        if tab.iterations >= cap:
            raise LpCyclingError(f"numerical cycling: no optimum after {tab.iterations} pivots")
        j = cand[0] if tab.bland else cand[np.argmin(d[cand])]
        col = T[:, j]
        pos = np.flatnonzero(col > ptol)
        if pos.size == 0:
            return j
        rhs = np.maximum(T[pos, -1], 0.0)
        ratios = rhs / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + ptol]
        if tab.bland:
            i = ties[np.argmin(tab.basis[ties])]
        else:
            i = ties[np.argmax(col[ties])]
        if best <= ptol:
            tab.degenerate += 1
            if not tab.bland and tab.degenerate >= bland_after:
                log.debug("switching to Bland's rule after %d degenerate pivots", tab.degenerate)
                tab.bland = True
        _pivot(tab, i, j)
        tab.iterations += 1


def solve_lp(
    lp: LinearProgram,
    *,
    tol: float = 1e-9,
    max_nonzeros: int = DEFAULT_MAX_NONZEROS,
    max_iters: int | None = None,
    bland_after: int = BLAND_AFTER,
) -> LpSolution:
    m, nv = lp.shape
    nnz = int(np.count_nonzero(lp.A))
    if nnz > max_nonzeros:
        raise LpSizeError(f"LP has {nnz} nonzeros, cap is {max_nonzeros}")

    # standard form: x = x_pos - x_neg for free variables, minimize
    sign = -1.0 if lp.maximize else 1.0
    neg_of = np.flatnonzero(lp.free)
    A = np.hstack([lp.A, -lp.A[:, neg_of]])
    c = sign * np.concatenate([lp.c, -lp.c[neg_of]])
    b = lp.b.copy()
    rel = list(lp.relations)
    flip = np.where(b < 0, -1.0, 1.0)
    A = A * flip[:, None]
    b = b * flip
    rel = [{"<=": ">=", ">=": "<="}.get(r, r) if f < 0 else r for r, f in zip(rel, flip)]
    scale = np.abs(A).max(axis=1, initial=0.0)
    scale[scale == 0] = 1.0
    A = A / scale[:, None]
    b = b / scale

    nstruct = A.shape[1]
    slack_cols = []
    art_rows = []
    extra = []
    for i, r in enumerate(rel):
        if r != "==":
            col = np.zeros(m)
            col[i] = 1.0 if r == "<=" else -1.0
            extra.append(col)
            slack_cols.append(i)
        if r != "<=":
            art_rows.append(i)
    nslack = len(extra)
    art = np.zeros((m, len(art_rows)))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0
    full = np.hstack([A, np.array(extra).T if extra else np.zeros((m, 0)), art])
    ncols = full.shape[1]
    first_art = nstruct + nslack
    basis = np.empty(m, dtype=int)
    slack_of_row = {i: nstruct + k for k, i in enumerate(slack_cols)}
    for i in range(m):
        if rel[i] == "<=":
            basis[i] = slack_of_row[i]
    for k, i in enumerate(art_rows):
        basis[i] = first_art + k

    tab = _Tableau(np.hstack([full, b[:, None]]), basis)
    cost = np.concatenate([c, np.zeros(ncols - nstruct)])
    cap = max_iters if max_iters is not None else 10 * (m + ncols) ** 2
    cscale = max(1.0, float(np.abs(c).max(initial=0.0)))
    dtol = tol * cscale
    ptol = tol
    is_art = np.zeros(ncols, dtype=bool)
    is_art[first_art:] = True

    if art_rows:
        cost1 = is_art.astype(float)
        _run(tab, cost1, np.ones(ncols, dtype=bool), tol, ptol, cap, bland_after)
        infeas = float(cost1[tab.basis] @ tab.T[:, -1])
        if infeas > tol * max(1.0, float(np.abs(b).max(initial=0.0))) * 10:
            y1 = _basis_duals(full, tab.basis, cost1)
            return LpSolution(LpStatus.INFEASIBLE, ray=y1 * flip / scale, iterations=tab.iterations)
        for i in range(m):
            if is_art[tab.basis[i]]:
                row = np.abs(tab.T[i, :first_art])
                j = int(np.argmax(row)) if row.size else -1
                if j >= 0 and row[j] > ptol:
                    _pivot(tab, i, j)
                    tab.iterations += 1

    unbounded = _run(tab, cost, ~is_art, dtol, ptol, cap, bland_after)
    if unbounded is not None:
        d = np.zeros(ncols)
        d[unbounded] = 1.0
        d[tab.basis] -= tab.T[:, unbounded]
        ray = d[:nv].copy()
        ray[neg_of] -= d[nv:nstruct]
        return LpSolution(LpStatus.UNBOUNDED, ray=ray, iterations=tab.iterations)

    xs = _polished_primal(full, b, tab, ptol)
    y = _basis_duals(full, tab.basis, cost)
    x = xs[:nv].copy()
    x[neg_of] -= xs[nv:nstruct]
    duals = sign * y * flip / scale
    duals = duals + 0.0  # normalize -0.0
    objective = float(lp.c @ x)
    return LpSolution(LpStatus.OPTIMAL, x=x, duals=duals, objective=objective, iterations=tab.iterations)


def _basis_duals(full: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> np.ndarray:
    B = full[:, basis]
    try:
        return np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]


def _polished_primal(full: np.ndarray, b: np.ndarray, tab: _Tableau, ptol: float) -> np.ndarray:
    """Basic solution recomputed from the original data, falling back to tableau values."""
    xs = np.zeros(full.shape[1])
    tableau_values = np.maximum(tab.T[:, -1], 0.0)
    try:
        xb = np.linalg.solve(full[:, tab.basis], b)
    except np.linalg.LinAlgError:
        xb = tableau_values
    if np.any(xb < -1e3 * ptol) or not np.all(np.isfinite(xb)):
        xb = tableau_values
    xs[tab.basis] = np.maximum(xb, 0.0)
    return xs

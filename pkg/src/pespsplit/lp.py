"""Bounded-variable dual simplex for ``min c^T x  s.t.  l <= x <= u,  D x >= d``.

The LP relaxation of the cycle formulation is a box once the integer cycle
offsets are eliminated, so the all-slack basis with every structural column
at its cost-preferred bound is dual feasible from the start. Cut rows are
appended with their slacks basic, which keeps dual feasibility; a few dual
simplex pivots then restore primal feasibility.

The basis inverse is kept explicitly and updated by Gauss-Jordan pivots. With
``exact=True`` all arithmetic runs on :class:`fractions.Fraction` object
arrays, which is slow but exact and meant for small oracle instances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .inequalities import FlipCut
from .instance import PespError, PespInstance

log = logging.getLogger(__name__)

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50

AT_LOWER, BASIC, AT_UPPER = -1, 0, 1


class LpNumericalError(PespError):
    """Simplex breakdown that survived a refactorization; carries a plain-text model dump."""

    def __init__(self, msg: str, dump: str = ""):
        super().__init__(msg)
        self.dump = dump


@dataclass
class LpRow:
    coefficients: dict[int, Fraction]
    rhs: Fraction
    tag: object = None


@dataclass
class LpModel:
    """Box plus ``>=`` rows over the tension variables, indexed by arc id."""

    arc_ids: list[int]
    lower: list[Fraction]
    upper: list[Fraction]
    cost: list[Fraction]
    rows: list[LpRow] = field(default_factory=list)
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        self._pos = {a: i for i, a in enumerate(self.arc_ids)}
        for lo, up in zip(self.lower, self.upper):
            if lo > up:
                raise ValueError("variable with lower > upper")

    @property
    def n(self) -> int:
        return len(self.arc_ids)

    def position(self, arc_id: int) -> int:
        return self._pos[arc_id]

    def add_row(self, coefficients: dict[int, Fraction], rhs, tag=None) -> LpRow:
        for a in coefficients:
            if a not in self._pos:
                raise KeyError(f"row references unknown arc {a}")
        row = LpRow(dict(coefficients), Fraction(rhs), tag)
        self.rows.append(row)
        return row

    def add_cut(self, cut: FlipCut) -> LpRow:
        return self.add_row(cut.coefficients, cut.rhs, cut)

    def dense_row(self, row: LpRow, exact: bool) -> np.ndarray:
        out = np.zeros(self.n, dtype=object if exact else float)
        for a, c in row.coefficients.items():
            out[self._pos[a]] = c if exact else float(c)
        return out

    def dump(self) -> str:
        """Plain-text listing; rationals are written as exact fractions."""
        lines = [f"minimize offset {self.offset}"]
        lines += [f"  {c} x{a}" for a, c in zip(self.arc_ids, self.cost) if c]
        lines.append("bounds")
        lines += [f"  {lo} <= x{a} <= {up}" for a, lo, up in zip(self.arc_ids, self.lower, self.upper)]
        lines.append("rows")
        for k, r in enumerate(self.rows):
            terms = " ".join(f"{'+' if c >= 0 else '-'} {abs(c)} x{a}"
                             for a, c in sorted(r.coefficients.items()))
            lines.append(f"  r{k}: {terms} >= {r.rhs}")
        return "\n".join(lines)


def build_model(inst: PespInstance, cuts: Iterable[FlipCut] = ()) -> LpModel:
    """LP relaxation over x only; the offset carries the preprocessing constant."""
    model = LpModel(
        arc_ids=[a.id for a in inst.arcs],
        lower=[Fraction(a.lower) for a in inst.arcs],
        upper=[Fraction(a.upper) for a in inst.arcs],
        cost=[Fraction(a.weight) for a in inst.arcs],
        offset=Fraction(inst.objective_offset),
    )
    for c in cuts:
        model.add_cut(c)
    return model


@dataclass
class LpSolution:
    status: str                  # "optimal" or "infeasible"
    x: np.ndarray                # by model position
    objective: object            # c^T x + offset
    duals: np.ndarray            # one per row, >= 0 at optimality
    reduced_costs: np.ndarray    # structural columns
    var_status: np.ndarray       # AT_LOWER / BASIC / AT_UPPER per variable
    row_status: np.ndarray       # same for the row slacks
    iterations: int
    farkas: Optional[np.ndarray] = None   # row multipliers proving infeasibility
    state: Optional["DualSimplex"] = None

    def tension(self, model: LpModel) -> dict[int, object]:
        return {a: self.x[i] for i, a in enumerate(model.arc_ids)}


class DualSimplex:
    """Dense bounded dual simplex on ``[D, -I] (x, s) = 0`` with bounds on x and s."""

    def __init__(self, cost: Sequence, lower: Sequence, upper: Sequence, exact: bool = False):
        self.exact = exact
        self.dtype = object if exact else float
        conv = Fraction if exact else float
        self.n = len(cost)
        self.c = np.array([conv(v) for v in cost], dtype=self.dtype)
        self.xlo = np.array([conv(v) for v in lower], dtype=self.dtype)
        self.xup = np.array([conv(v) for v in upper], dtype=self.dtype)
        self.D = np.zeros((0, self.n), dtype=self.dtype)
        self.slo = np.zeros(0, dtype=self.dtype)
        self.sup = np.zeros(0, dtype=self.dtype)
        zero = Fraction(0) if exact else 0.0
        self._zero = zero
        self.status = np.where(self.c >= 0, AT_LOWER, AT_UPPER).astype(int)
        self.basis: list[int] = []
        self.binv = np.zeros((0, 0), dtype=self.dtype)
        self.pivots_since_refactor = 0
        self.total_iterations = 0

    @property
    def m(self) -> int:
        return self.D.shape[0]

    # --- column access ---------------------------------------------------
    def _lo(self, j: int):
        return self.xlo[j] if j < self.n else self.slo[j - self.n]

    def _up(self, j: int):
        return self.xup[j] if j < self.n else self.sup[j - self.n]

    def _cost(self, j: int):
        return self.c[j] if j < self.n else self._zero

    def _column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.D[:, j].copy()
        col = np.zeros(self.m, dtype=self.dtype)
        col[j - self.n] = -1
        return col

    def _nonbasic_value(self, j: int):
        if self.status[j] == AT_UPPER:
            return self._up(j)
        return self._lo(j)

    # --- rows ----------------------------------------------------------------
    def add_rows(self, rows: np.ndarray, lo: Sequence, up: Sequence) -> None:
        """Append rows ``lo <= r x <= up`` with their slacks basic (keeps dual feasibility)."""
        rows = np.asarray(rows, dtype=self.dtype).reshape(-1, self.n)
        k = rows.shape[0]
        if k == 0:
            return
        conv = Fraction if self.exact else float
        lo_arr = np.array([conv(v) if np.isfinite(float(v)) else float(v) for v in lo], dtype=self.dtype)
        up_arr = np.array([conv(v) if np.isfinite(float(v)) else float(v) for v in up], dtype=self.dtype)
        m = self.m
        # R_B: new-row coefficients on the current basic columns
        rb = np.zeros((k, m), dtype=self.dtype)
        for p, j in enumerate(self.basis):
            if j < self.n:
                rb[:, p] = rows[:, j]
        new_binv = np.zeros((m + k, m + k), dtype=self.dtype)
        new_binv[:m, :m] = self.binv
        if m:
            new_binv[m:, :m] = rb @ self.binv
        for i in range(k):
            new_binv[m + i, m + i] = -1
        self.binv = new_binv
        self.D = np.vstack([self.D, rows])
        self.slo = np.concatenate([self.slo, lo_arr])
        self.sup = np.concatenate([self.sup, up_arr])
        self.status = np.concatenate([self.status, np.full(k, BASIC, dtype=int)])
        self.basis.extend(self.n + m + i for i in range(k))

    def remove_rows(self, rows: Iterable[int]) -> list[int]:
        """Drop rows whose slack is basic; returns the rows actually removed.

        Rows with a nonbasic slack are kept since dropping them would leave the
        basis short of a column.
        """
        drop = sorted({i for i in rows if self.status[self.n + i] == BASIC}, reverse=True)
        for i in drop:
            p = self.basis.index(self.n + i)
            keep_pos = [q for q in range(self.m) if q != p]
            keep_row = [r for r in range(self.m) if r != i]
            self.binv = self.binv[np.ix_(keep_pos, keep_row)]
            del self.basis[p]
            self.basis = [j - 1 if j > self.n + i else j for j in self.basis]
            self.D = np.delete(self.D, i, axis=0)
            self.slo = np.delete(self.slo, i)
            self.sup = np.delete(self.sup, i)
            self.status = np.delete(self.status, self.n + i)
        return sorted(drop)

    # --- linear algebra ------------------------------------------------------
    def _basis_matrix(self) -> np.ndarray:
        B = np.zeros((self.m, self.m), dtype=self.dtype)
        for p, j in enumerate(self.basis):
            B[:, p] = self._column(j)
        return B

    def refactor(self) -> None:
        if self.m == 0:
            return
        B = self._basis_matrix()
        if self.exact:
            self.binv = _exact_inverse(B)
        else:
            try:
                self.binv = np.linalg.inv(B)
            except np.linalg.LinAlgError as exc:
                raise LpNumericalError(f"singular basis: {exc}") from exc
        self.pivots_since_refactor = 0

    def _primal(self) -> np.ndarray:
        xn = np.array([self._nonbasic_value(j) if self.status[j] != BASIC else self._zero
                       for j in range(self.n)], dtype=self.dtype)
        rhs = -(self.D @ xn) if self.m else np.zeros(0, dtype=self.dtype)
        for i in range(self.m):
            j = self.n + i
            if self.status[j] != BASIC:
                rhs[i] = rhs[i] + self._nonbasic_value(j)
        return self.binv @ rhs if self.m else rhs

    def _duals(self) -> np.ndarray:
        cb = np.array([self._cost(j) for j in self.basis], dtype=self.dtype)
        return cb @ self.binv if self.m else np.zeros(0, dtype=self.dtype)

    def _reduced_costs(self, y: np.ndarray) -> np.ndarray:
        dx = self.c - (y @ self.D if self.m else 0)
        return np.concatenate([np.asarray(dx, dtype=self.dtype).reshape(self.n), y])

    def _pivot(self, p: int, q: int) -> None:
        w = self.binv @ self._column(q)
        piv = w[p]
        if not self.exact and abs(piv) < 1e-12:
            raise LpNumericalError("pivot element too small")
        self.binv[p] = self.binv[p] / piv
        for i in range(self.m):
            if i != p and w[i] != 0:
                self.binv[i] = self.binv[i] - w[i] * self.binv[p]
        self.pivots_since_refactor += 1
        if not self.exact and self.pivots_since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def _restore_dual_feasibility(self, d: np.ndarray) -> bool:
        """Bound-flip boxed nonbasics with a wrong-signed reduced cost."""
        tol = 0 if self.exact else DUAL_TOL
        bad = False
        for j in range(self.n + self.m):
            st = self.status[j]
            if st == BASIC:
                continue
            if st == AT_LOWER and d[j] < -tol:
                if np.isfinite(float(self._up(j))):
                    self.status[j] = AT_UPPER
                else:
                    bad = True
            elif st == AT_UPPER and d[j] > tol:
                if np.isfinite(float(self._lo(j))):
                    self.status[j] = AT_LOWER
                else:
                    bad = True
        return not bad

    # --- main loop -----------------------------------------------------------
    def solve(self, max_iter: Optional[int] = None) -> tuple[str, int, Optional[np.ndarray]]:
        ptol = 0 if self.exact else PRIMAL_TOL
        atol = 0 if self.exact else PIVOT_TOL
        size = self.m + self.n
        bland_after = 10 * size
        max_iter = max_iter or 200 * size + 1000
        it = 0
        retried = False
        while True:
            y = self._duals()
            d = self._reduced_costs(y)
            if not self._restore_dual_feasibility(d):
                if retried:
                    raise LpNumericalError("dual infeasible nonbasic slack")
                retried = True
                self.refactor()
                continue
            xb = self._primal()
            bland = it >= bland_after
            # leaving row: largest infeasibility, or lowest column index under Bland
            p, best = -1, ptol
            for pos, j in enumerate(self.basis):
                inf = max(self._lo(j) - xb[pos], xb[pos] - self._up(j), 0)
                if inf <= ptol:
                    continue
                if bland:
                    if p < 0 or j < self.basis[p]:
                        p = pos
                elif inf > best:
                    p, best = pos, inf
            if p < 0:
                self.total_iterations += it
                return "optimal", it, None
            if it >= max_iter:
                raise LpNumericalError(f"no convergence after {it} iterations")
            jl = self.basis[p]
            below = xb[p] < self._lo(jl)
            row = self.binv[p]
            alpha_x = row @ self.D
            q, t_best, a_best = -1, None, None
            for j in range(self.n + self.m):
                st = self.status[j]
                if st == BASIC or self._lo(j) == self._up(j):
                    continue
                a = alpha_x[j] if j < self.n else -row[j - self.n]
                if abs(a) <= atol:
                    continue
                if below:
                    ok = (st == AT_LOWER and a < 0) or (st == AT_UPPER and a > 0)
                    t = -d[j] / a if ok else None
                else:
                    ok = (st == AT_LOWER and a > 0) or (st == AT_UPPER and a < 0)
                    t = d[j] / a if ok else None
                if t is None:
                    continue
                t = max(t, 0)
                if q < 0:
                    q, t_best, a_best = j, t, abs(a)
                    continue
                if bland:
                    if t < t_best - (0 if self.exact else 1e-12):
                        q, t_best, a_best = j, t, abs(a)
                elif t < t_best - (0 if self.exact else 1e-12) or (
                        abs(t - t_best) <= (0 if self.exact else 1e-12) and abs(a) > a_best):
                    q, t_best, a_best = j, t, abs(a)
            if q < 0:
                if not self.exact and not retried:
                    retried = True
                    self.refactor()
                    continue
                self.total_iterations += it
                # sign so that the multipliers of the >= rows are nonnegative
                y = np.array(-row if below else row, dtype=self.dtype)
                return "infeasible", it, y
            self._pivot(p, q)
            self.basis[p] = q
            self.status[q] = BASIC
            self.status[jl] = AT_LOWER if below else AT_UPPER
            it += 1
            retried = False

    def values(self) -> np.ndarray:
        """Current values of all columns (structural then slacks)."""
        v = np.array([self._nonbasic_value(j) if self.status[j] != BASIC else self._zero
                      for j in range(self.n + self.m)], dtype=self.dtype)
        xb = self._primal()
        for p, j in enumerate(self.basis):
            v[j] = xb[p]
        return v


def _exact_inverse(B: np.ndarray) -> np.ndarray:
    m = B.shape[0]
    aug = np.zeros((m, 2 * m), dtype=object)
    aug[:, :m] = B
    for i in range(m):
        aug[i, m + i] = Fraction(1)
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r, col] != 0), None)
        if piv is None:
            raise LpNumericalError("singular exact basis")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = aug[col] / aug[col, col]
        for r in range(m):
            if r != col and aug[r, col] != 0:
                aug[r] = aug[r] - aug[r, col] * aug[col]
    return aug[:, m:]


def _rows_arrays(model: LpModel, rows: Sequence[LpRow], exact: bool):
    dense = np.array([model.dense_row(r, exact) for r in rows], dtype=object if exact else float)
    dense = dense.reshape(len(rows), model.n)
    lo = [r.rhs for r in rows]
    up = [float("inf")] * len(rows)
    return dense, lo, up


def _package(model: LpModel, sim: DualSimplex, status: str, it: int, farkas) -> LpSolution:
    vals = sim.values()
    x = vals[: sim.n]
    y = sim._duals()
    d = sim._reduced_costs(y)
    obj = (sim.c @ x if sim.n else 0) + (model.offset if sim.exact else float(model.offset))
    return LpSolution(
        status=status,
        x=x,
        objective=obj,
        duals=y,
        reduced_costs=d[: sim.n],
        var_status=sim.status[: sim.n].copy(),
        row_status=sim.status[sim.n:].copy(),
        iterations=it,
        farkas=farkas,
        state=sim,
    )


def _run(model: LpModel, sim: DualSimplex) -> LpSolution:
    try:
        status, it, farkas = sim.solve()
    except LpNumericalError as exc:
        try:
            sim.refactor()
            status, it, farkas = sim.solve()
        except LpNumericalError:
            raise LpNumericalError(str(exc), model.dump()) from exc
    return _package(model, sim, status, it, farkas)


def solve(model: LpModel, warm: Optional[LpSolution] = None, exact: bool = False) -> LpSolution:
    """Solve the model, reusing ``warm``'s basis when its rows are a prefix of the model's."""
    if warm is not None and warm.state is not None and warm.state.exact == exact \
            and warm.state.m <= len(model.rows):
        sim = warm.state
        new = model.rows[sim.m:]
        if new:
            sim.add_rows(*_rows_arrays(model, new, exact))
        return _run(model, sim)
    sim = DualSimplex(model.cost, model.lower, model.upper, exact=exact)
    if model.rows:
        sim.add_rows(*_rows_arrays(model, model.rows, exact))
    return _run(model, sim)


def add_rows_and_resolve(model: LpModel, solution: LpSolution, new_cuts: Iterable[FlipCut]
                         ) -> LpSolution:
    """Append cuts to the model and re-optimize from the previous basis.

    The previous solution's simplex state is reused (and advanced), so the old
    solution object should not be re-solved afterwards.
    """
    for c in new_cuts:
        model.add_cut(c)
    return solve(model, warm=solution, exact=solution.state.exact if solution.state else False)


def remove_rows(model: LpModel, solution: LpSolution, rows: Iterable[int]) -> list[int]:
    """Remove rows from model and warm state; only rows with a basic slack are dropped."""
    if solution.state is None:
        drop = sorted(set(rows))
    else:
        drop = solution.state.remove_rows(rows)
    for i in sorted(drop, reverse=True):
        del model.rows[i]
    return drop


def duality_gap(model: LpModel, sol: LpSolution) -> float:
    """``|c^T x - (y^T d + sum_j r_j x_j)|`` relative to ``max(1, |c^T x|)``."""
    cx = float(sum(float(c) * float(v) for c, v in zip(model.cost, sol.x)))
    yd = float(sum(float(y) * float(r.rhs) for y, r in zip(sol.duals, model.rows)))
    rx = float(sum(float(r) * float(v) for r, v in zip(sol.reduced_costs, sol.x)))
    return abs(cx - yd - rx) / max(1.0, abs(cx))

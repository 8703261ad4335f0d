"""Bounded-variable revised simplex solver.

The workhorse under the second-stage solves and the branch-and-bound
relaxations. Implements primal and dual bounded-variable simplex with an
explicit dense basis inverse, product-form updates with periodic
refactorization, Dantzig pricing with a Bland anti-cycling fallback, and
bound flips for nonbasic variables.

Two features carry the performance of the stochastic decomposition on top
of this engine:

* Lazy rows: rows marked lazy start inactive and are activated only when
  the relaxed optimum violates them. Activation preserves dual feasibility
  (the new slack enters the basis), so re-optimization runs in the dual
  simplex and typically takes a handful of pivots.
* Warm starts: callers may keep the returned basis state and restart a
  modified problem (new bounds / right-hand sides, same columns) from it —
  again a dual-simplex repair instead of a cold two-phase solve. A crash
  basis can also be supplied for cold starts with a known feasible vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

INF = np.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL = "numerical_failure"


@dataclass(frozen=True)
class Tolerances:
    """Single source for all solver comparison tolerances."""

    feasibility: float = 1e-7
    optimality: float = 1e-7
    integrality: float = 1e-6


DEFAULT_TOLS = Tolerances()


class LinearProgram:
    """Sparse LP in row form with per-variable bounds.

    Senses are '<', '=', '>' per row. Rows added with ``lazy=True`` may be
    withheld from the working problem until violated.
    """

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.obj: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.var_names: list[str] = []
        self.row_coefs: list[dict[int, float]] = []
        self.row_sense: list[str] = []
        self.rhs: list[float] = []
        self.row_lazy: list[bool] = []
        self.row_names: list[str] = []
        self._compiled = None

    @property
    def n_vars(self) -> int:
        return len(self.obj)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def add_var(self, lb: float = 0.0, ub: float = INF, obj: float = 0.0,
                name: str = "") -> int:
        if lb > ub:
            raise ValueError(f"inconsistent bounds {lb} > {ub} for {name or 'var'}")
        self.obj.append(float(obj))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.var_names.append(name or f"x{len(self.obj) - 1}")
        self._compiled = None
        return len(self.obj) - 1

    def add_row(self, coefs: dict[int, float], sense: str, rhs: float,
                lazy: bool = False, name: str = "") -> int:
        if sense not in ("<", "=", ">"):
            raise ValueError(f"row sense must be '<', '=' or '>', got {sense!r}")
        if not all(np.isfinite(v) for v in coefs.values()):
            raise ValueError("row coefficients must be finite")
        self.row_coefs.append(dict(coefs))
        self.row_sense.append(sense)
        self.rhs.append(float(rhs))
        self.row_lazy.append(lazy)
        self.row_names.append(name or f"r{len(self.rhs) - 1}")
        self._compiled = None
        return len(self.rhs) - 1

    def compiled(self):
        """(A_csr, senses, rhs, lazy, c, lb, ub) with arrays frozen."""
        if self._compiled is None:
            m, n = self.n_rows, self.n_vars
            rows, cols, vals = [], [], []
            for r, coefs in enumerate(self.row_coefs):
                for j, v in coefs.items():
                    if v != 0.0:
                        rows.append(r)
                        cols.append(j)
                        vals.append(v)
            A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
            self._compiled = (A, np.array(self.row_sense), np.array(self.rhs),
                              np.array(self.row_lazy, dtype=bool),
                              np.array(self.obj), np.array(self.lb), np.array(self.ub))
        return self._compiled


@dataclass
class LpState:
    """Restartable basis snapshot.

    ``basis`` holds column ids in a row-independent encoding: j < n_vars is
    the structural column j, n_vars + r is the slack of original row r.
    ``at_upper`` records the bound side of every nonbasic column in the same
    encoding. Valid for restarts of the same LP (possibly with different
    bounds/rhs) as long as no columns were added or removed.
    """

    active: np.ndarray
    basis: np.ndarray
    at_upper: np.ndarray


@dataclass
class LpSolution:
    status: str
    objective: float = np.nan
    x: np.ndarray | None = None
    duals: np.ndarray | None = None          # per original row
    reduced_costs: np.ndarray | None = None  # per structural variable
    iterations: int = 0
    active_rows: np.ndarray | None = None    # rows participating at the end
    state: LpState | None = None


def solve_lp(lp: LinearProgram, *, lb=None, ub=None, rhs=None,
             tols: Tolerances = DEFAULT_TOLS, initial_active=None,
             start: LpState | None = None, crash=None,
             max_iter: int | None = None) -> LpSolution:
    """Solve an LP exactly, activating lazy rows on demand.

    ``lb``/``ub``/``rhs`` override the model data (used by branch-and-bound
    and by parametric re-solves). ``start`` warm-starts from a previous
    solution's ``state``; ``crash`` maps original rows to structural columns
    forming a known primal-feasible basis (-1 entries become artificials).
    ``initial_active`` pre-activates lazy rows.
    """
    A, senses, mrhs, lazy, c, mlb, mub = lp.compiled()
    rhs = mrhs if rhs is None else np.asarray(rhs, dtype=float)
    lb = mlb if lb is None else np.asarray(lb, dtype=float)
    ub = mub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        return LpSolution(INFEASIBLE)

    active = ~lazy
    if initial_active is not None:
        active = active | np.asarray(initial_active, dtype=bool)
    if start is not None:
        if len(start.active) != len(active):
            start = None  # rows were added since the state was taken
        else:
            active = active | start.active

    tried_all = not lazy.any()
    while True:
        sol = _simplex(A, senses, rhs, active, c, lb, ub, lp.sense, tols,
                       max_iter, start=start, crash=crash)
        crash = None
        if sol.status == UNBOUNDED and not tried_all:
            # The relaxation may be unbounded only because lazy rows are out.
            active = np.ones_like(active)
            tried_all = True
            start = None
            continue
        if sol.status != OPTIMAL:
            sol.active_rows = active
            return sol
        if tried_all or not (~active).any():
            break
        resid = A @ sol.x
        viol = np.zeros(len(rhs), dtype=bool)
        tol = tols.feasibility * (1.0 + np.abs(rhs))
        viol |= (senses == "<") & (resid > rhs + tol)
        viol |= (senses == ">") & (resid < rhs - tol)
        viol |= (senses == "=") & (np.abs(resid - rhs) > tol)
        viol &= ~active
        if not viol.any():
            break
        # Activate and restart: new slacks join the basis, so the previous
        # optimum stays dual feasible and the dual simplex finishes fast.
        new_rows = np.flatnonzero(viol)
        active = active | viol
        if sol.state is not None:
            start = LpState(active.copy(),
                            np.concatenate([sol.state.basis, lp.n_vars + new_rows]),
                            sol.state.at_upper)
        else:
            start = None
    sol.active_rows = active
    return sol


def _simplex(A, senses, rhs, active, c, lb, ub, sense, tols, max_iter,
             start=None, crash=None):
    """Simplex on the active row subset, warm- or cold-started."""
    act_idx = np.flatnonzero(active)
    m = len(act_idx)
    n = len(c)
    sgn = -1.0 if sense == "max" else 1.0

    if m == 0:
        return _solve_unconstrained(c, lb, ub, sgn, senses, rhs, tols)

    Aact = A[act_idx]
    b = rhs[act_idx].astype(float)
    sact = senses[act_idx]

    slack_lb = np.where(sact == "<", 0.0, -INF)
    slack_ub = np.where(sact == ">", 0.0, INF)
    eq = sact == "="
    slack_lb[eq] = 0.0
    slack_ub[eq] = 0.0

    Afull = sp.hstack([Aact.tocsc(), sp.eye(m, format="csc"),
                       sp.eye(m, format="csc")], format="csc")
    full_lb = np.concatenate([lb, slack_lb, np.zeros(m)])
    full_ub = np.concatenate([ub, slack_ub, np.full(m, INF)])

    st = _SimplexState(Afull, b, full_lb, full_ub, n, m, tols)
    st.max_iter = max_iter or (200 * (m + 1) + 20 * n + 10000)
    phase2_c = np.concatenate([sgn * c, np.zeros(2 * m)])

    # Local-column lookup for the row-independent encoding.
    act_pos = {int(r): p for p, r in enumerate(act_idx)}

    def to_local(sid):
        if sid < n:
            return int(sid)
        p = act_pos.get(int(sid) - n)
        return None if p is None else n + p

    # Artificials are a phase-1 device only; keep them pinned at zero for
    # warm and crash starts (_cold_start unpins them for its own phase 1).
    st.full_ub[n + m:] = 0.0

    status = None
    if start is not None and len(start.basis) == m:
        local = [to_local(sid) for sid in start.basis]
        if None not in local:
            at_upper = np.zeros(n + 2 * m, dtype=bool)
            for sid in np.flatnonzero(start.at_upper):
                lc = to_local(sid)
                if lc is not None:
                    at_upper[lc] = True
            if st.start_from_basis(np.array(local, dtype=np.int64), at_upper):
                status = st.reoptimize(phase2_c)
            if status in (ITERATION_LIMIT, NUMERICAL):
                status = None  # retry from scratch with a fresh budget

    if status is None and crash is not None:
        local_basis = np.full(m, -1, dtype=np.int64)
        for p, r in enumerate(act_idx):
            col = crash[r] if r < len(crash) else -1
            if col is not None and col >= 0:
                local_basis[p] = col
        for p in range(m):
            if local_basis[p] < 0:
                # Inequality rows can absorb residual into their own slack;
                # equality rows (slack fixed at zero) need an artificial.
                local_basis[p] = (n + p) if sact[p] != "=" else n + m + p
        if st.start_from_basis(local_basis, np.zeros(n + 2 * m, dtype=bool)):
            if st.primal_feasible():
                status = st.run(phase2_c)
            if status in (ITERATION_LIMIT, NUMERICAL):
                status = None

    if status is None:
        st.max_iter += st.iters  # warm attempts must not starve the restart
        status = _cold_start(st, phase2_c, n, m, b)

    if status != OPTIMAL:
        return LpSolution(status, iterations=st.iters)

    x = st.x[:n].copy()
    y_int = st.row_duals(phase2_c)
    d_int = phase2_c[:n] - (Aact.T @ y_int)
    duals = np.zeros(len(rhs))
    duals[act_idx] = sgn * y_int
    red = sgn * d_int
    obj = float(c @ x)
    state = _extract_state(st, active, act_idx, n, m, tols)
    return LpSolution(OPTIMAL, objective=obj, x=x, duals=duals, reduced_costs=red,
                      iterations=st.iters, state=state)


def _cold_start(st, phase2_c, n, m, b):
    """Two-phase start: artificial basis, minimize artificial flow, then
    pin the artificials and optimize the true objective."""
    phase1_c = np.zeros(n + 2 * m)
    phase1_c[n + m:] = 1.0
    st.full_ub[n + m:] = INF
    st.start_artificial_basis()
    status = st.run(phase1_c)
    if status != OPTIMAL:
        return status if status != UNBOUNDED else NUMERICAL
    if st.objective(phase1_c) > 1e-6 * (1.0 + np.abs(b).sum()):
        return INFEASIBLE
    st.full_ub[n + m:] = 0.0
    st.x[n + m:] = np.minimum(st.x[n + m:], 0.0)
    return st.run(phase2_c)


def _extract_state(st, active, act_idx, n, m, tols):
    sem_basis = np.empty(m, dtype=np.int64)
    for p, col in enumerate(st.basis):
        if col < n:
            sem_basis[p] = col
        elif col < n + m:
            sem_basis[p] = n + act_idx[col - n]
        else:
            # An artificial stuck (at zero) on a redundant row: remember it
            # as that row's slack; refactoring may reject it, which simply
            # falls back to a cold start.
            sem_basis[p] = n + act_idx[col - n - m]
    n_rows = len(active)
    at_upper = np.zeros(n + n_rows, dtype=bool)
    ub = st.full_ub
    x = st.x
    for col in range(n + m):
        if st.in_basis[col]:
            continue
        u = ub[col]
        if np.isfinite(u) and abs(x[col] - u) <= tols.feasibility * (1.0 + abs(u)):
            sid = col if col < n else n + act_idx[col - n]
            at_upper[sid] = True
    return LpState(active.copy(), sem_basis, at_upper)


def _solve_unconstrained(c, lb, ub, sgn, senses, rhs, tols):
    cint = sgn * c
    x = np.where(cint >= 0, lb, ub)
    zero = cint == 0
    x[zero] = np.where(np.isfinite(lb[zero]), lb[zero],
                       np.where(np.isfinite(ub[zero]), ub[zero], 0.0))
    if not np.all(np.isfinite(x[np.abs(cint) > tols.optimality])):
        return LpSolution(UNBOUNDED)
    x = np.where(np.isfinite(x), x, 0.0)
    return LpSolution(OPTIMAL, objective=float(c @ x), x=x, duals=np.zeros(len(rhs)),
                      reduced_costs=c.copy())


class _SimplexState:
    """Basis bookkeeping shared by the primal and dual iterations."""

    def __init__(self, A, b, full_lb, full_ub, n_struct, m, tols):
        self.A = A
        self.b = b
        self.full_lb = full_lb
        self.full_ub = full_ub
        self.n_struct = n_struct
        self.m = m
        self.tols = tols
        self.n_total = A.shape[1]
        self.iters = 0
        self.max_iter = 100000
        self.refactor_every = 120
        self.stall_threshold = 250
        self.basis = np.zeros(m, dtype=np.int64)
        self.in_basis = np.zeros(self.n_total, dtype=bool)
        self.Binv = np.zeros((m, m))
        self.x = np.zeros(self.n_total)
        self._art_sign = np.ones(m)
        self._AT = A.T.tocsr()

    # -- starts --------------------------------------------------------------

    def start_artificial_basis(self):
        lo, hi = self.full_lb, self.full_ub
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        x[self.n_struct + self.m:] = 0.0
        resid = self.b - self.A[:, :self.n_struct + self.m] @ x[:self.n_struct + self.m]
        art = np.arange(self.n_struct + self.m, self.n_total)
        self._art_sign = np.where(resid >= 0, 1.0, -1.0)
        x[art] = np.abs(resid)
        self.x = x
        self.basis = art.copy()
        self.in_basis[:] = False
        self.in_basis[art] = True
        self.Binv = np.diag(self._art_sign)

    def start_from_basis(self, basis, at_upper) -> bool:
        """Install an explicit basis; returns False if it is singular."""
        if len(set(basis.tolist())) != self.m:
            return False
        self.basis = basis.copy()
        self.in_basis[:] = False
        self.in_basis[basis] = True
        lo, hi = self.full_lb, self.full_ub
        x = np.where(at_upper & np.isfinite(hi), hi,
                     np.where(np.isfinite(lo), lo,
                              np.where(np.isfinite(hi), hi, 0.0)))
        x[self.basis] = 0.0
        self.x = x
        return self.refactor()

    # -- linear algebra -------------------------------------------------------

    def _column(self, j):
        A = self.A
        start, end = A.indptr[j], A.indptr[j + 1]
        idx, vals = A.indices[start:end], A.data[start:end]
        if j >= self.n_struct + self.m:  # artificial: signed unit column
            k = j - self.n_struct - self.m
            return np.array([k]), np.array([self._art_sign[k]])
        return idx, vals

    def _ftran(self, j):
        idx, vals = self._column(j)
        return self.Binv[:, idx] @ vals

    def refactor(self) -> bool:
        m = self.m
        B = np.zeros((m, m))
        for p, j in enumerate(self.basis):
            idx, vals = self._column(j)
            B[idx, p] = vals
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(Binv)):
            return False
        # Reject numerically near-singular bases.
        if np.abs(Binv).max() > 1e13:
            return False
        self.Binv = Binv
        xN = self.x.copy()
        xN[self.basis] = 0.0
        resid = self.b.copy()
        nz = np.flatnonzero(xN)
        for j in nz:
            idx, vals = self._column(j)
            resid[idx] -= vals * xN[j]
        self.x[self.basis] = self.Binv @ resid
        return True

    def objective(self, cvec):
        return float(cvec @ self.x)

    def row_duals(self, cvec):
        return cvec[self.basis] @ self.Binv

    def _reduced_costs(self, cvec):
        y = cvec[self.basis] @ self.Binv
        d = cvec - self._AT @ y
        art0 = self.n_struct + self.m
        if art0 < self.n_total:
            d[art0:] = cvec[art0:] - self._art_sign * y
        return d

    def primal_feasible(self) -> bool:
        xB = self.x[self.basis]
        lo = self.full_lb[self.basis]
        hi = self.full_ub[self.basis]
        ftol = self.tols.feasibility
        return bool(np.all(xB >= lo - ftol * (1.0 + np.abs(lo)))
                    and np.all(xB <= hi + ftol * (1.0 + np.abs(hi))))

    def dual_feasible(self, cvec) -> bool:
        d = self._reduced_costs(cvec)
        tol = 10.0 * self.tols.optimality * (1.0 + np.abs(cvec).max())
        x, lo, hi = self.x, self.full_lb, self.full_ub
        nb = ~self.in_basis
        fixed = lo == hi
        at_lo = nb & ~fixed & (np.abs(x - np.where(np.isfinite(lo), lo, np.nan)) <= 1e-9 * (1 + np.abs(x)))
        at_hi = nb & ~fixed & ~at_lo
        if np.any(at_lo & (d < -tol)):
            return False
        if np.any(at_hi & np.isfinite(hi) & (d > tol)):
            return False
        return True

    def reoptimize(self, cvec):
        """Warm-start re-optimization: dual repair if dual feasible, then a
        primal pass (which terminates immediately when already optimal).
        Returns None to signal the caller should fall back to a cold start."""
        if not self.primal_feasible():
            if not self.dual_feasible(cvec):
                return None
            status = self.run_dual(cvec)
            if status != OPTIMAL:
                return status  # None / INFEASIBLE / ITERATION_LIMIT
        return self.run(cvec)

    # -- primal iteration ------------------------------------------------------

    def run(self, cvec):
        tol = self.tols.optimality
        stall = 0
        since_refactor = 0
        fresh_inverse = False
        banned = np.zeros(len(self.x), dtype=bool)  # tiny-pivot columns
        AT = self._AT
        while True:
            if self.iters >= self.max_iter:
                return ITERATION_LIMIT
            self.iters += 1

            d = self._reduced_costs(cvec)
            lo, hi, x = self.full_lb, self.full_ub, self.x
            nb = ~self.in_basis
            can_in = nb & (hi - x > tol) & (d < -tol)
            can_de = nb & (x - lo > tol) & (d > tol)
            eligible = (can_in | can_de) & ~banned
            if not eligible.any():
                # Improving columns blocked only by tiny pivots: the basis
                # is effectively stuck, report it rather than claim optimal.
                return NUMERICAL if (can_in | can_de).any() else OPTIMAL

            bland = stall >= self.stall_threshold
            if bland:
                j = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), 0.0)
                j = int(np.argmax(score))
            direction = 1.0 if can_in[j] else -1.0

            w = self._ftran(j)
            t, leave_pos, leave_to_upper = self._ratio_test(j, direction, w, bland)
            if t is None:
                return UNBOUNDED
            if leave_pos is not None and abs(w[leave_pos]) < 1e-7:
                # A tiny pivot is either real (ban the column) or an artifact
                # of a drifted inverse (refactor reveals the true value).
                # Either way, never let it into the basis.
                if fresh_inverse:
                    banned[j] = True
                    continue
                if not self.refactor():
                    return NUMERICAL
                fresh_inverse = True
                since_refactor = 0
                continue
            fresh_inverse = False
            banned[:] = False

            if t > self.tols.feasibility:
                stall = 0
            else:
                stall += 1

            if leave_pos is None:
                # Bound flip: j travels its full span, basis unchanged.
                self.x[self.basis] -= t * direction * w
                self.x[j] += t * direction
            else:
                out = self.basis[leave_pos]
                self.x[self.basis] -= t * direction * w
                self.x[j] += t * direction
                self.x[out] = self.full_ub[out] if leave_to_upper else self.full_lb[out]
                self.basis[leave_pos] = j
                self.in_basis[out] = False
                self.in_basis[j] = True
                self._update_inverse(w, leave_pos)
                since_refactor += 1
                if since_refactor >= self.refactor_every:
                    if not self.refactor():
                        return NUMERICAL
                    since_refactor = 0

    def _ratio_test(self, j, direction, w, bland=False):
        """Largest step for entering variable j; returns (t, leaving, to_upper).

        With ``bland`` the leaving tie-break switches from largest pivot to
        lowest variable index, completing Bland's anti-cycling rule.
        """
        x, lo, hi = self.x, self.full_lb, self.full_ub
        eps = 1e-11
        xB = x[self.basis]
        loB = lo[self.basis]
        hiB = hi[self.basis]
        delta = direction * w  # basic values move by -t*delta

        best_t = hi[j] - x[j] if direction > 0 else x[j] - lo[j]
        leave_pos = None
        leave_upper = False

        dec = delta > eps   # basic decreases toward lower bound
        inc = delta < -eps  # basic increases toward upper bound
        with np.errstate(divide="ignore", invalid="ignore"):
            t_dec = np.where(dec, (xB - loB) / delta, INF)
            t_inc = np.where(inc, (hiB - xB) / (-delta), INF)
        t_dec[~np.isfinite(loB) & dec] = INF
        t_inc[~np.isfinite(hiB) & inc] = INF
        t_all = np.minimum(t_dec, t_inc)
        t_all = np.maximum(t_all, 0.0)

        pos = int(np.argmin(t_all)) if len(t_all) else -1
        if pos >= 0 and t_all[pos] < best_t - eps:
            t_min = t_all[pos]
            if bland:
                # Exact minimal step, lowest variable index: finite by
                # Bland's rule even under degeneracy.
                near = np.flatnonzero(t_all <= t_min + 1e-9)
                pick = near[int(np.argmin(self.basis[near]))]
            else:
                # Two-pass (Harris) test: let blocking rows overshoot their
                # bound by at most the feasibility tolerance, then pick the
                # largest pivot inside that window. Tiny pivots breed
                # near-singular bases; the tolerance-sized slack is the
                # price of avoiding them.
                ftol = self.tols.feasibility
                give_dec = ftol * (1.0 + np.abs(loB))
                give_inc = ftol * (1.0 + np.abs(hiB))
                with np.errstate(divide="ignore", invalid="ignore"):
                    r_dec = np.where(dec, (xB - loB + give_dec) / delta, INF)
                    r_inc = np.where(inc, (hiB - xB + give_inc) / (-delta), INF)
                r_dec[~np.isfinite(loB) & dec] = INF
                r_inc[~np.isfinite(hiB) & inc] = INF
                t_relax = max(np.minimum(r_dec, r_inc).min(), t_min)
                near = np.flatnonzero(t_all <= t_relax)
                pick = near[int(np.argmax(np.abs(delta[near])))]
            leave_pos = int(pick)
            leave_upper = t_inc[pick] <= t_dec[pick]
            best_t = max(t_all[pick], 0.0)
        if not np.isfinite(best_t):
            return None, None, False
        return best_t, leave_pos, leave_upper

    # -- dual iteration ---------------------------------------------------------

    def run_dual(self, cvec):
        """Dual simplex: restore primal feasibility from a dual-feasible
        basis. Returns a status, or None to signal a fallback (numerical
        trouble — caller should cold-start instead)."""
        ftol = self.tols.feasibility
        since_refactor = 0
        stall = 0
        # Dual repair is only worthwhile when it beats a cold start; heavily
        # degenerate crawls should hand over instead of grinding on.
        budget = self.iters + max(2000, 4 * self.m + 200)
        while True:
            if self.iters >= min(self.max_iter, budget):
                return ITERATION_LIMIT
            self.iters += 1

            xB = self.x[self.basis]
            loB = self.full_lb[self.basis]
            hiB = self.full_ub[self.basis]
            below = loB - xB
            above = xB - hiB
            below[~np.isfinite(loB)] = -INF
            above[~np.isfinite(hiB)] = -INF
            viol = np.maximum(below, above)
            scale = 1.0 + np.abs(xB)
            p = int(np.argmax(viol / scale))
            if viol[p] <= ftol * scale[p]:
                return OPTIMAL  # primal feasible again
            if stall >= self.stall_threshold:
                # Anti-cycling: leave by lowest variable index as well.
                bad = np.flatnonzero(viol > ftol * scale)
                p = int(bad[np.argmin(self.basis[bad])])
            leaving_low = below[p] >= above[p]

            rho = self.Binv[p, :]
            alpha_full = self._AT @ rho  # pivot row of Binv A, all columns
            art0 = self.n_struct + self.m
            alpha_full[art0:] = self._art_sign * rho  # signed artificials

            d = self._reduced_costs(cvec)
            x, lo, hi = self.x, self.full_lb, self.full_ub
            nb = ~self.in_basis & (lo != hi)
            at_hi = np.isfinite(hi) & (np.abs(x - hi) <= 1e-9 * (1.0 + np.abs(hi)))
            # Entering must push xB[p] toward its violated bound.
            if leaving_low:
                cand = nb & ((~at_hi & (alpha_full < -1e-9))
                             | (at_hi & (alpha_full > 1e-9)))
            else:
                cand = nb & ((~at_hi & (alpha_full > 1e-9))
                             | (at_hi & (alpha_full < -1e-9)))
            if not cand.any():
                return INFEASIBLE
            idx = np.flatnonzero(cand)
            ratios = np.abs(d[idx]) / np.abs(alpha_full[idx])
            degenerate = ratios.min() <= 1e-9
            if stall >= self.stall_threshold:
                q = int(idx[np.argmin(idx)])  # Bland-style fallback
            else:
                # Two-pass (Harris) dual ratio test: allow reduced costs to
                # go slightly infeasible in exchange for a larger pivot.
                dtol = self.tols.optimality
                relaxed = (np.abs(d[idx]) + dtol) / np.abs(alpha_full[idx])
                near = idx[ratios <= relaxed.min() + 1e-12]
                q = int(near[np.argmax(np.abs(alpha_full[near]))])

            aq = alpha_full[q]
            bound_p = loB[p] if leaving_low else hiB[p]
            dx_q = (xB[p] - bound_p) / aq
            span_q = hi[q] - lo[q]
            if np.isfinite(span_q) and abs(dx_q) > span_q + 1e-12:
                # Bound flip of the entering candidate; p stays violated.
                step = span_q if dx_q > 0 else -span_q
                w = self._ftran(q)
                self.x[self.basis] -= step * w
                self.x[q] += step
                stall += 1
                continue

            w = self._ftran(q)
            if abs(w[p] - aq) > 1e-6 * (1.0 + abs(aq)) or abs(aq) < 1e-10:
                if not self.refactor():
                    return None
                stall += 1
                continue
            self.x[self.basis] -= dx_q * w
            self.x[q] += dx_q
            out = self.basis[p]
            self.x[out] = bound_p
            self.basis[p] = q
            self.in_basis[out] = False
            self.in_basis[q] = True
            self._update_inverse(w, p)
            stall = stall + 1 if degenerate else 0
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                if not self.refactor():
                    return None
                since_refactor = 0

    def _update_inverse(self, w, r):
        piv = w[r]
        if abs(piv) < 1e-12:
            self.refactor()
            return
        Binv = self.Binv
        Binv[r, :] /= piv
        w2 = w.copy()
        w2[r] = 0.0
        Binv -= np.outer(w2, Binv[r, :])


# ---------------------------------------------------------------------------
# MPS export

def write_mps(lp: LinearProgram, name: str = "MODEL") -> str:
    """Fixed-format MPS text for cross-checking against external tools."""
    A, senses, rhs, _, c, lb, ub = lp.compiled()
    sense_tag = {"<": "L", "=": "E", ">": "G"}
    out = [f"NAME          {name}"]
    out.append("OBJSENSE")
    out.append(f"    {'MAX' if lp.sense == 'max' else 'MIN'}")
    out.append("ROWS")
    out.append(" N  COST")
    for r in range(lp.n_rows):
        out.append(f" {sense_tag[senses[r]]}  {lp.row_names[r]}")
    out.append("COLUMNS")
    Acsc = A.tocsc()
    for j in range(lp.n_vars):
        vn = lp.var_names[j]
        if c[j] != 0.0:
            out.append(f"    {vn:<10}{'COST':<10}{c[j]:.12g}")
        start, end = Acsc.indptr[j], Acsc.indptr[j + 1]
        for r, v in zip(Acsc.indices[start:end], Acsc.data[start:end]):
            out.append(f"    {vn:<10}{lp.row_names[r]:<10}{v:.12g}")
    out.append("RHS")
    for r in range(lp.n_rows):
        if rhs[r] != 0.0:
            out.append(f"    RHS       {lp.row_names[r]:<10}{rhs[r]:.12g}")
    out.append("BOUNDS")
    for j in range(lp.n_vars):
        vn = lp.var_names[j]
        if lb[j] == ub[j]:
            out.append(f" FX BND       {vn:<10}{lb[j]:.12g}")
            continue
        if lb[j] != 0.0:
            tag = "LO" if np.isfinite(lb[j]) else "MI"
            val = f"{lb[j]:.12g}" if np.isfinite(lb[j]) else ""
            out.append(f" {tag} BND       {vn:<10}{val}")
        if np.isfinite(ub[j]):
            out.append(f" UP BND       {vn:<10}{ub[j]:.12g}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"

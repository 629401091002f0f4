"""Linear programs: container, reference simplex, external adapter, MPS export.

The container keeps the constraint matrix as triplets so season-scale
problems stay sparse. Two interchangeable engines solve it:

* a self-contained bounded-variable revised simplex (dense basis inverse,
  Dantzig pricing with a Bland fallback after stalls, deterministic
  lowest-index tie-breaking) for desk-scale instances, and
* a scipy.optimize.linprog (HiGHS) adapter for large instances and for
  cross-checking the reference implementation.

Problems can also be exported in an MPS-style text layout (free format,
with an OBJSENSE MAX section) for external solvers; a minimal reader of
the same dialect supports round-trip tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, SolverError, UnboundedError

#: reference engine size guard (rows, columns)
SIMPLEX_MAX_ROWS = 4000
SIMPLEX_MAX_COLS = 8000

_FEAS_TOL = 1e-7
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9


@dataclass
class TripletRows:
    """Sparse rows in triplet form with right-hand sides and names."""

    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    vals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    names: list[str] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def dense(self, n_cols: int) -> np.ndarray:
        a = np.zeros((self.n_rows, n_cols))
        np.add.at(a, (self.rows, self.cols), self.vals)
        return a

    def csr(self, n_cols: int):
        from scipy.sparse import coo_matrix

        return coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n_rows, n_cols)
        ).tocsr()


@dataclass
class LinearProgram:
    """max objective . x  s.t.  eq rows hold, ub rows are <=, lower <= x <= upper."""

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq: TripletRows = field(default_factory=TripletRows)
    ub: TripletRows = field(default_factory=TripletRows)
    var_names: list[str] | None = None
    name: str = "lp"

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = len(self.objective)
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("objective and bounds must have equal length")
        if np.any(self.lower > self.upper + 1e-12):
            bad = int(np.argmax(self.lower - self.upper))
            raise ValueError(f"variable {self.describe_var(bad)} has lower > upper bound")

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    @property
    def n_rows(self) -> int:
        return self.eq.n_rows + self.ub.n_rows

    def describe_var(self, j: int) -> str:
        if self.var_names and j < len(self.var_names):
            return self.var_names[j]
        return f"x{j}"


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    engine: str
    iterations: int = 0


class LpBuilder:
    """Incremental construction helper for small, hand-written programs."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self._obj: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._names: list[str] = []
        self._eq = ([], [], [], [], [])
        self._ub = ([], [], [], [], [])

    def add_var(self, name: str, lo: float, hi: float, obj: float = 0.0) -> int:
        self._names.append(name)
        self._lo.append(lo)
        self._hi.append(hi)
        self._obj.append(obj)
        return len(self._names) - 1

    def _add_row(self, store, coeffs, rhs, name):
        rows, cols, vals, rhs_list, names = store
        r = len(rhs_list)
        for j, v in coeffs:
            rows.append(r)
            cols.append(j)
            vals.append(float(v))
        rhs_list.append(float(rhs))
        names.append(name)

    def add_eq(self, coeffs, rhs, name: str = ""):
        self._add_row(self._eq, coeffs, rhs, name or f"eq{len(self._eq[3])}")

    def add_ub(self, coeffs, rhs, name: str = ""):
        self._add_row(self._ub, coeffs, rhs, name or f"ub{len(self._ub[3])}")

    def build(self) -> LinearProgram:
        def pack(store):
            rows, cols, vals, rhs, names = store
            return TripletRows(
                rows=np.array(rows, dtype=np.int64),
                cols=np.array(cols, dtype=np.int64),
                vals=np.array(vals, dtype=float),
                rhs=np.array(rhs, dtype=float),
                names=list(names),
            )

        return LinearProgram(
            objective=np.array(self._obj),
            lower=np.array(self._lo),
            upper=np.array(self._hi),
            eq=pack(self._eq),
            ub=pack(self._ub),
            var_names=list(self._names),
            name=self.name,
        )


# ---------------------------------------------------------------------------
# reference engine: bounded-variable revised simplex


_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


class _SimplexTableau:
    def __init__(self, lp: LinearProgram):
        if lp.n_rows > SIMPLEX_MAX_ROWS or lp.n_vars > SIMPLEX_MAX_COLS:
            raise SolverError(
                f"reference simplex handles up to {SIMPLEX_MAX_ROWS} rows / "
                f"{SIMPLEX_MAX_COLS} columns; use engine='scipy' for "
                f"{lp.n_rows}x{lp.n_vars}"
            )
        if not (np.all(np.isfinite(lp.lower)) and np.all(np.isfinite(lp.upper))):
            raise SolverError("reference simplex requires finite variable boxes")

        n = lp.n_vars
        m_ub, m_eq = lp.ub.n_rows, lp.eq.n_rows
        m = m_ub + m_eq
        self.lp = lp
        self.m = m
        self.n_struct = n

        # column order: structural | slacks (one per ub row) | artificials
        a = np.zeros((m, n + m_ub))
        if m_ub:
            a[:m_ub, :n] = lp.ub.dense(n)
            a[np.arange(m_ub), n + np.arange(m_ub)] = 1.0
        if m_eq:
            a[m_ub:, :n] = lp.eq.dense(n)
        rhs = np.concatenate([lp.ub.rhs, lp.eq.rhs]) if m else np.zeros(0)

        lo = np.concatenate([lp.lower, np.zeros(m_ub)])
        hi = np.concatenate([lp.upper, np.full(m_ub, np.inf)])
        x = np.concatenate([lp.lower.copy(), np.zeros(m_ub)])  # nonbasic at lower
        resid = rhs - a[:, :n] @ x[:n]

        basis = np.empty(m, dtype=np.int64)
        art_rows: list[tuple[int, float, float]] = []  # (row, sign, start value)
        next_col = n + m_ub
        for i in range(m):
            if i < m_ub and resid[i] >= 0.0:
                basis[i] = n + i  # slack carries the row
                x[n + i] = resid[i]
            else:
                sign = 1.0 if resid[i] >= 0 else -1.0
                art_rows.append((i, sign, abs(resid[i])))
                basis[i] = next_col
                next_col += 1
        n_art = len(art_rows)
        if n_art:
            full = np.zeros((m, a.shape[1] + n_art))
            full[:, : a.shape[1]] = a
            for k, (i, sign, _val) in enumerate(art_rows):
                full[i, a.shape[1] + k] = sign
            a = full
            lo = np.concatenate([lo, np.zeros(n_art)])
            hi = np.concatenate([hi, np.array([v for (_, _, v) in art_rows])])
            x = np.concatenate([x, np.array([v for (_, _, v) in art_rows])])

        self.a = a
        self.rhs = rhs
        self.lo = lo
        self.hi = hi
        self.x = x
        self.basis = basis
        self.art_slice = slice(n + m_ub, n + m_ub + n_art)
        self.status = np.full(a.shape[1], _AT_LOWER, dtype=np.int8)
        self.status[basis] = _BASIC
        self.binv = None
        self.refactor()

    def refactor(self):
        try:
            self.binv = np.linalg.inv(self.a[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis during simplex solve") from exc

    def iterate(self, cost: np.ndarray, max_iter: int) -> int:
        """Run simplex (maximize cost.x) until optimal; returns iterations."""
        m = self.m
        stall_limit = 3 * max(m, 20) + 50
        best = -np.inf
        stall = 0
        use_bland = False
        since_refactor = 0
        tol = _COST_TOL * (1.0 + float(np.abs(cost).max(initial=0.0)))

        for it in range(max_iter):
            y = cost[self.basis] @ self.binv
            d = cost - y @ self.a

            movable = self.hi - self.lo > _PIVOT_TOL
            can_up = (self.status == _AT_LOWER) & movable & (d > tol)
            can_dn = (self.status == _AT_UPPER) & movable & (d < -tol)
            eligible = np.flatnonzero(can_up | can_dn)
            if eligible.size == 0:
                return it

            if use_bland:
                enter = int(eligible[0])
            else:
                enter = int(eligible[np.argmax(np.abs(d[eligible]))])
            sigma = 1.0 if can_up[enter] else -1.0

            w = self.binv @ self.a[:, enter]
            delta = -sigma * w  # basic change per unit of entering move

            flip_limit = self.hi[enter] - self.lo[enter]
            limit = flip_limit
            leave_pos = -1
            for i in range(m):
                di = delta[i]
                if di < -_PIVOT_TOL:
                    t_i = (self.x[self.basis[i]] - self.lo[self.basis[i]]) / (-di)
                elif di > _PIVOT_TOL:
                    hib = self.hi[self.basis[i]]
                    if not np.isfinite(hib):
                        continue
                    t_i = (hib - self.x[self.basis[i]]) / di
                else:
                    continue
                t_i = max(t_i, 0.0)
                if t_i < limit - 1e-12:
                    limit = t_i
                    leave_pos = i
                elif leave_pos >= 0 and t_i <= limit + 1e-12 \
                        and self.basis[i] < self.basis[leave_pos]:
                    leave_pos = i  # tie: smallest variable index leaves

            if not np.isfinite(limit):
                raise UnboundedError(
                    "unbounded direction through variable "
                    + (self.lp.describe_var(enter) if enter < self.n_struct else f"aux{enter}")
                )

            step = max(limit, 0.0)
            self.x[self.basis] += delta * step

            if leave_pos < 0:
                # entering variable flips to its other bound; basis unchanged
                self.x[enter] = self.hi[enter] if sigma > 0 else self.lo[enter]
                self.status[enter] = _AT_UPPER if sigma > 0 else _AT_LOWER
            else:
                self.x[enter] = (self.lo[enter] if sigma > 0 else self.hi[enter]) + sigma * step
                leaving = self.basis[leave_pos]
                if delta[leave_pos] < 0:
                    self.x[leaving] = self.lo[leaving]
                    self.status[leaving] = _AT_LOWER
                else:
                    self.x[leaving] = self.hi[leaving]
                    self.status[leaving] = _AT_UPPER
                self.basis[leave_pos] = enter
                self.status[enter] = _BASIC
                # rank-one basis inverse update
                wr = w[leave_pos]
                if abs(wr) < _PIVOT_TOL:
                    self.refactor()
                else:
                    row = self.binv[leave_pos, :] / wr
                    self.binv -= np.outer(w, row)
                    self.binv[leave_pos, :] = row
                since_refactor += 1
                if since_refactor >= 150:
                    self.refactor()
                    since_refactor = 0

            obj = float(cost @ self.x)
            if obj > best + 1e-10 * (1.0 + abs(best)):
                best = obj
                stall = 0
            else:
                stall += 1
                if stall > stall_limit:
                    use_bland = True
        raise SolverError(f"simplex iteration limit {max_iter} reached")


def solve_simplex(lp: LinearProgram, max_iter: int = 50000) -> LpResult:
    """Solve with the reference bounded-variable simplex."""
    tab = _SimplexTableau(lp)
    iters = 0

    n_art = tab.art_slice.stop - tab.art_slice.start
    if n_art:
        phase1 = np.zeros(tab.a.shape[1])
        phase1[tab.art_slice] = -1.0
        iters += tab.iterate(phase1, max_iter)
        infeas = float(tab.x[tab.art_slice].sum())
        if infeas > _FEAS_TOL * (1.0 + np.abs(tab.rhs).max(initial=0.0)):
            names = []
            art_cols = range(tab.art_slice.start, tab.art_slice.stop)
            all_names = list(lp.ub.names) + list(lp.eq.names)
            for pos, col in enumerate(art_cols):
                if tab.x[col] > _FEAS_TOL:
                    row_idx = int(np.flatnonzero(tab.a[:, col])[0])
                    names.append(all_names[row_idx] if row_idx < len(all_names) else f"row{row_idx}")
            raise InfeasibleError(
                f"no feasible point; residual infeasibility {infeas:.3e} in rows: "
                + ", ".join(names[:10]),
                violated_rows=names,
            )
        # pin artificials so phase 2 cannot reuse them
        tab.hi[tab.art_slice] = 0.0
        tab.x[tab.art_slice] = np.minimum(tab.x[tab.art_slice], 0.0)

    phase2 = np.zeros(tab.a.shape[1])
    phase2[: lp.n_vars] = lp.objective
    iters += tab.iterate(phase2, max_iter)

    x = tab.x[: lp.n_vars].copy()
    _check_feasible(lp, x)
    return LpResult(x=x, objective=float(lp.objective @ x), engine="simplex", iterations=iters)


def _check_feasible(lp: LinearProgram, x: np.ndarray, tol: float = 1e-6) -> None:
    scale = 1.0 + np.abs(x).max(initial=0.0)
    if np.any(x < lp.lower - tol * scale) or np.any(x > lp.upper + tol * scale):
        raise SolverError("solver returned a point outside the variable boxes")
    if lp.ub.n_rows:
        resid = lp.ub.csr(lp.n_vars) @ x - lp.ub.rhs
        if resid.max(initial=0.0) > tol * (1.0 + np.abs(lp.ub.rhs).max(initial=0.0)):
            raise SolverError("solver returned a point violating an inequality row")
    if lp.eq.n_rows:
        resid = np.abs(lp.eq.csr(lp.n_vars) @ x - lp.eq.rhs)
        if resid.max(initial=0.0) > tol * (1.0 + np.abs(lp.eq.rhs).max(initial=0.0)):
            raise SolverError("solver returned a point violating an equality row")


# ---------------------------------------------------------------------------
# external adapter


def solve_scipy(lp: LinearProgram) -> LpResult:
    """Solve through scipy.optimize.linprog (HiGHS)."""
    from scipy.optimize import linprog

    kwargs = {}
    if lp.ub.n_rows:
        kwargs["A_ub"] = lp.ub.csr(lp.n_vars)
        kwargs["b_ub"] = lp.ub.rhs
    if lp.eq.n_rows:
        kwargs["A_eq"] = lp.eq.csr(lp.n_vars)
        kwargs["b_eq"] = lp.eq.rhs
    res = linprog(
        c=-lp.objective,
        bounds=np.column_stack([lp.lower, lp.upper]),
        method="highs",
        **kwargs,
    )
    if res.status == 2:
        raise InfeasibleError(f"no feasible point (HiGHS): {res.message}")
    if res.status == 3:
        raise UnboundedError(f"problem unbounded (HiGHS): {res.message}")
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x)
    return LpResult(x=x, objective=float(lp.objective @ x), engine="scipy",
                    iterations=int(getattr(res, "nit", 0)))


def solve(lp: LinearProgram, engine: str = "auto") -> LpResult:
    """Solve a program with the requested engine ('simplex', 'scipy', 'auto')."""
    if engine == "auto":
        small = lp.n_rows <= 600 and lp.n_vars <= 600
        engine = "simplex" if small else "scipy"
    if engine == "simplex":
        return solve_simplex(lp)
    if engine == "scipy":
        return solve_scipy(lp)
    raise SolverError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# MPS-style interchange


def _mps_name(name: str, fallback: str) -> str:
    clean = "".join(ch if ch.isalnum() or ch in "_.[]" else "_" for ch in (name or fallback))
    return clean[:64] or fallback


def write_mps(lp: LinearProgram, path) -> None:
    """Write the program in free-format MPS with an OBJSENSE MAX section."""
    n = lp.n_vars
    col_names = [_mps_name(lp.describe_var(j), f"C{j}") for j in range(n)]
    ub_names = [_mps_name(nm, f"UB{i}") for i, nm in enumerate(lp.ub.names)] \
        if lp.ub.names else [f"UB{i}" for i in range(lp.ub.n_rows)]
    eq_names = [_mps_name(nm, f"EQ{i}") for i, nm in enumerate(lp.eq.names)] \
        if lp.eq.names else [f"EQ{i}" for i in range(lp.eq.n_rows)]

    by_col: dict[int, list[tuple[str, float]]] = {j: [] for j in range(n)}
    for r, c, v in zip(lp.ub.rows, lp.ub.cols, lp.ub.vals):
        by_col[int(c)].append((ub_names[int(r)], float(v)))
    for r, c, v in zip(lp.eq.rows, lp.eq.cols, lp.eq.vals):
        by_col[int(c)].append((eq_names[int(r)], float(v)))

    with open(path, "w") as fh:
        fh.write(f"NAME {_mps_name(lp.name, 'LP')}\n")
        fh.write("OBJSENSE\n    MAX\n")
        fh.write("ROWS\n N COST\n")
        for nm in ub_names:
            fh.write(f" L {nm}\n")
        for nm in eq_names:
            fh.write(f" E {nm}\n")
        fh.write("COLUMNS\n")
        for j in range(n):
            if lp.objective[j] != 0.0:
                fh.write(f"    {col_names[j]} COST {float(lp.objective[j])!r}\n")
            for row_name, v in by_col[j]:
                fh.write(f"    {col_names[j]} {row_name} {v!r}\n")
        fh.write("RHS\n")
        for nm, b in zip(ub_names, lp.ub.rhs):
            fh.write(f"    RHS {nm} {float(b)!r}\n")
        for nm, b in zip(eq_names, lp.eq.rhs):
            fh.write(f"    RHS {nm} {float(b)!r}\n")
        fh.write("BOUNDS\n")
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            if lo == hi:
                fh.write(f" FX BND {col_names[j]} {float(lo)!r}\n")
                continue
            if np.isfinite(lo):
                fh.write(f" LO BND {col_names[j]} {float(lo)!r}\n")
            else:
                fh.write(f" MI BND {col_names[j]}\n")
            if np.isfinite(hi):
                fh.write(f" UP BND {col_names[j]} {float(hi)!r}\n")
        fh.write("ENDATA\n")


def read_mps(path) -> LinearProgram:
    """Read the dialect produced by write_mps (round-trip support)."""
    section = None
    row_kind: dict[str, str] = {}
    row_order: dict[str, int] = {}
    cols: dict[str, int] = {}
    entries: list[tuple[str, str, float]] = []
    rhs: dict[str, float] = {}
    bounds: dict[str, list] = {}
    name = "lp"
    objsense_pending = False

    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                parts = line.split()
                section = parts[0]
                if section == "NAME" and len(parts) > 1:
                    name = parts[1]
                objsense_pending = section == "OBJSENSE"
                continue
            parts = line.split()
            if objsense_pending:
                if parts[0] not in ("MAX", "MAXIMIZE"):
                    raise ValueError("only OBJSENSE MAX files are supported")
                objsense_pending = False
                continue
            if section == "ROWS":
                kind, nm = parts
                if kind != "N":
                    row_kind[nm] = kind
                    row_order[nm] = len(row_order)
            elif section == "COLUMNS":
                col, row_name, val = parts
                if col not in cols:
                    cols[col] = len(cols)
                entries.append((col, row_name, float(val)))
            elif section == "RHS":
                _, row_name, val = parts
                rhs[row_name] = float(val)
            elif section == "BOUNDS":
                if parts[0] == "MI":
                    _, _, col = parts
                    bounds.setdefault(col, [None, None])[0] = -np.inf
                else:
                    kind, _, col, val = parts
                    slot = bounds.setdefault(col, [None, None])
                    if kind == "LO":
                        slot[0] = float(val)
                    elif kind == "UP":
                        slot[1] = float(val)
                    elif kind == "FX":
                        slot[0] = slot[1] = float(val)

    n = len(cols)
    obj = np.zeros(n)
    ub_rows = [nm for nm in row_order if row_kind[nm] == "L"]
    eq_rows = [nm for nm in row_order if row_kind[nm] == "E"]
    ub_idx = {nm: i for i, nm in enumerate(ub_rows)}
    eq_idx = {nm: i for i, nm in enumerate(eq_rows)}
    ub_t = ([], [], [])
    eq_t = ([], [], [])
    for col, row_name, val in entries:
        j = cols[col]
        if row_name == "COST":
            obj[j] += val
        elif row_name in ub_idx:
            ub_t[0].append(ub_idx[row_name]); ub_t[1].append(j); ub_t[2].append(val)
        elif row_name in eq_idx:
            eq_t[0].append(eq_idx[row_name]); eq_t[1].append(j); eq_t[2].append(val)
        else:
            raise ValueError(f"entry references unknown row {row_name!r}")

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for col, (l, u) in bounds.items():
        j = cols[col]
        if l is not None:
            lo[j] = l
        if u is not None:
            hi[j] = u

    return LinearProgram(
        objective=obj, lower=lo, upper=hi,
        eq=TripletRows(np.array(eq_t[0], dtype=np.int64), np.array(eq_t[1], dtype=np.int64),
                       np.array(eq_t[2]), np.array([rhs.get(nm, 0.0) for nm in eq_rows]),
                       list(eq_rows)),
        ub=TripletRows(np.array(ub_t[0], dtype=np.int64), np.array(ub_t[1], dtype=np.int64),
                       np.array(ub_t[2]), np.array([rhs.get(nm, 0.0) for nm in ub_rows]),
                       list(ub_rows)),
        var_names=list(cols),
        name=name,
    )

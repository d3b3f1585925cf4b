"""Engine-neutral interface to linear and mixed-integer linear optimization.

Everything else in the package builds a :class:`LinearModel` and calls
:func:`solve`; no other module names an engine. The single required backend
is HiGHS through scipy (``scipy.optimize.linprog`` for continuous models so
dual values are available, ``scipy.optimize.milp`` when any variable is
integral). Cuts are handled upstream by re-solving grown models, so the
interface deliberately has no callbacks or lazy-constraint hooks.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .errors import BackendError, InputError

INF = float("inf")

_SENSES = ("<=", "=", ">=")


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


@dataclass
class SolveParams:
    """Engine parameters. HiGHS via scipy is single-threaded; ``threads`` is
    accepted for interface stability and ignored beyond 1."""

    time_limit: float | None = None
    rel_gap: float = 1e-6
    threads: int = 1


@dataclass
class SolveResult:
    status: SolveStatus
    objective: float | None = None
    x: np.ndarray | None = None
    # duals[r] = d(objective)/d(rhs of row r), continuous models only
    duals: np.ndarray | None = None
    gap: float | None = None
    wall_time: float = 0.0
    message: str = ""


class LinearModel:
    """A sparse MILP/LP: bounded variables, linear rows, linear objective.

    Variables are referenced by the integer index returned from
    :meth:`add_variable`. Rows store (index, coefficient) pairs. Names must
    be unique; they only matter for debugging and the LP-format dump.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[bool] = []
        self.rows: list[list[tuple[int, float]]] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []
        self.obj: dict[int, float] = {}
        self.obj_constant: float = 0.0
        self.minimize: bool = True
        self._name_set: set[str] = set()

    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = INF,
                     integer: bool = False) -> int:
        if name in self._name_set:
            raise InputError(f"duplicate variable name {name!r}")
        if lb > ub:
            raise InputError(f"variable {name!r} has lb {lb} > ub {ub}")
        self._name_set.add(name)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        return len(self.lb) - 1

    def add_constraint(self, coeffs, sense: str, rhs: float,
                       name: str | None = None) -> int:
        if sense not in _SENSES:
            raise InputError(f"unknown sense {sense!r}")
        row = list(coeffs.items()) if isinstance(coeffs, dict) else list(coeffs)
        n = self.num_vars
        for idx, _ in row:
            if not 0 <= idx < n:
                raise InputError(f"constraint references unknown variable {idx}")
        self.rows.append(row)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"c{len(self.rows) - 1}")
        return len(self.rows) - 1

    def set_objective(self, coeffs, minimize: bool = True, constant: float = 0.0):
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        self.obj = {}
        for idx, c in items:
            if c:
                self.obj[idx] = self.obj.get(idx, 0.0) + float(c)
        self.minimize = minimize
        self.obj_constant = float(constant)

    def add_objective_term(self, idx: int, coef: float):
        if coef:
            self.obj[idx] = self.obj.get(idx, 0.0) + float(coef)

    def objective_value(self, x: np.ndarray) -> float:
        return sum(c * x[i] for i, c in self.obj.items()) + self.obj_constant

    # --- assembly ---------------------------------------------------------

    def _matrices(self):
        """Rows as one sparse matrix with per-row lower/upper activity
        bounds (lo == up encodes equality)."""
        n, m = self.num_vars, self.num_rows
        data, ri, ci = [], [], []
        for r, row in enumerate(self.rows):
            for idx, c in row:
                if c:
                    data.append(float(c))
                    ri.append(r)
                    ci.append(idx)
        a = sparse.csr_matrix((data, (ri, ci)), shape=(m, n))
        lo = np.empty(m)
        up = np.empty(m)
        for r, (s, b) in enumerate(zip(self.senses, self.rhs)):
            if s == "<=":
                lo[r], up[r] = -INF, b
            elif s == ">=":
                lo[r], up[r] = b, INF
            else:
                lo[r], up[r] = b, b
        return a, lo, up

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for i, v in self.obj.items():
            c[i] = v
        return c


def solve(model: LinearModel, params: SolveParams | None = None) -> SolveResult:
    """Solve the model, dispatching on integrality.

    Continuous models go through ``linprog`` so that row duals (sensitivity
    of the objective to each row's rhs) come back; integer models go through
    ``milp``. Maximization is handled by sign-flipping the objective.
    """
    params = params or SolveParams()
    t0 = time.perf_counter()
    if model.num_vars == 0:
        # degenerate but legal: feasible iff every row's constant side fits
        for s, b in zip(model.senses, model.rhs):
            ok = (s == "<=" and 0 <= b) or (s == ">=" and 0 >= b) or (s == "=" and b == 0)
            if not ok:
                return SolveResult(SolveStatus.INFEASIBLE, wall_time=_dt(t0))
        return SolveResult(SolveStatus.OPTIMAL, objective=model.obj_constant,
                           x=np.zeros(0), duals=np.zeros(model.num_rows),
                           wall_time=_dt(t0))
    if any(model.integer):
        return _solve_milp(model, params, t0)
    return _solve_lp(model, params, t0)


def _dt(t0):
    return time.perf_counter() - t0


def _signed_objective(model: LinearModel):
    c = model.objective_vector()
    return (c, 1.0) if model.minimize else (-c, -1.0)


def _solve_milp(model: LinearModel, params: SolveParams, t0) -> SolveResult:
    c, sign = _signed_objective(model)
    a, lo, up = model._matrices()
    options = {"mip_rel_gap": params.rel_gap, "disp": False}
    if params.time_limit is not None:
        options["time_limit"] = params.time_limit
    kwargs = {}
    if model.num_rows:
        kwargs["constraints"] = LinearConstraint(a, lo, up)
    res = milp(
        c,
        integrality=np.array(model.integer, dtype=int),
        bounds=Bounds(np.array(model.lb), np.array(model.ub)),
        options=options,
        **kwargs,
    )
    wall = _dt(t0)
    # scipy milp status: 0 optimal, 1 limit, 2 infeasible, 3 unbounded, 4 other
    if res.status == 0:
        return SolveResult(SolveStatus.OPTIMAL, sign * res.fun + model.obj_constant,
                           np.asarray(res.x), None, res.mip_gap, wall, res.message)
    if res.status == 1:
        obj = sign * res.fun + model.obj_constant if res.x is not None else None
        x = np.asarray(res.x) if res.x is not None else None
        return SolveResult(SolveStatus.LIMIT, obj, x, None,
                           getattr(res, "mip_gap", None), wall, res.message)
    if res.status == 2:
        return SolveResult(SolveStatus.INFEASIBLE, wall_time=wall, message=res.message)
    if res.status == 3:
        return SolveResult(SolveStatus.UNBOUNDED, wall_time=wall, message=res.message)
    raise BackendError(f"milp returned status {res.status}: {res.message}")


def _solve_lp(model: LinearModel, params: SolveParams, t0) -> SolveResult:
    c, sign = _signed_objective(model)
    # split rows into <= / = for linprog; remember the mapping to restore
    # duals in the original row order with d(obj)/d(rhs) semantics
    a_ub_rows, b_ub, ub_map = [], [], []   # (orig row, flip) flip=-1 for >=
    a_eq_rows, b_eq, eq_map = [], [], []
    for r, (row, s, b) in enumerate(zip(model.rows, model.senses, model.rhs)):
        if s == "=":
            a_eq_rows.append(row)
            b_eq.append(b)
            eq_map.append(r)
        elif s == "<=":
            a_ub_rows.append(row)
            b_ub.append(b)
            ub_map.append((r, 1.0))
        else:
            a_ub_rows.append([(i, -v) for i, v in row])
            b_ub.append(-b)
            ub_map.append((r, -1.0))

    def _csr(rows):
        data, ri, ci = [], [], []
        for r, row in enumerate(rows):
            for idx, v in row:
                if v:
                    data.append(float(v))
                    ri.append(r)
                    ci.append(idx)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), model.num_vars))

    options = {"presolve": True}
    if params.time_limit is not None:
        options["time_limit"] = params.time_limit
    res = linprog(
        c,
        A_ub=_csr(a_ub_rows) if a_ub_rows else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=_csr(a_eq_rows) if a_eq_rows else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(model.lb, model.ub)),
        method="highs",
        options=options,
    )
    wall = _dt(t0)
    if res.status == 0:
        duals = np.zeros(model.num_rows)
        if a_eq_rows:
            for pos, r in enumerate(eq_map):
                duals[r] = sign * res.eqlin.marginals[pos]
        if a_ub_rows:
            for pos, (r, flip) in enumerate(ub_map):
                duals[r] = sign * flip * res.ineqlin.marginals[pos]
        return SolveResult(SolveStatus.OPTIMAL, sign * res.fun + model.obj_constant,
                           np.asarray(res.x), duals, 0.0, wall, res.message)
    if res.status == 2:
        return SolveResult(SolveStatus.INFEASIBLE, wall_time=wall, message=res.message)
    if res.status == 3:
        return SolveResult(SolveStatus.UNBOUNDED, wall_time=wall, message=res.message)
    if res.status == 1:
        return SolveResult(SolveStatus.LIMIT, wall_time=wall, message=res.message)
    raise BackendError(f"linprog returned status {res.status}: {res.message}")


# --- LP text format ---------------------------------------------------------
#
# Writer/reader for the CPLEX LP text format, covering the subset the writer
# emits (linear objective with optional constant, <=/=/>= rows, bounds,
# general and binary sections). Variables are emitted as v<i> so arbitrary
# internal names never collide with format rules.


def write_lp(model: LinearModel) -> str:
    out = [f"\\ {model.name}"]
    out.append("Minimize" if model.minimize else "Maximize")
    terms = _expr({i: c for i, c in sorted(model.obj.items())})
    if model.obj_constant:
        terms += f" + {_num(model.obj_constant)}" if model.obj_constant > 0 \
            else f" - {_num(-model.obj_constant)}"
    if not terms:
        terms = "0 v0" if model.num_vars else "0"
    out.append(f" obj: {terms}")
    out.append("Subject To")
    for r, row in enumerate(model.rows):
        agg: dict[int, float] = {}
        for i, v in row:
            agg[i] = agg.get(i, 0.0) + v
        out.append(f" c{r}: {_expr(agg) or '0 v0'} {model.senses[r]} {_num(model.rhs[r])}")
    out.append("Bounds")
    for i in range(model.num_vars):
        lo = "-inf" if model.lb[i] == -INF else _num(model.lb[i])
        hi = "+inf" if model.ub[i] == INF else _num(model.ub[i])
        out.append(f" {lo} <= v{i} <= {hi}")
    generals = [i for i in range(model.num_vars) if model.integer[i]]
    if generals:
        out.append("General")
        out.append(" " + " ".join(f"v{i}" for i in generals))
    out.append("End")
    return "\n".join(out) + "\n"


def _num(x: float) -> str:
    # positional notation (never scientific) so sign-splitting tokenization
    # in the reader cannot cut an exponent in half
    return np.format_float_positional(float(x), trim="-")


def _expr(agg: dict[int, float]) -> str:
    parts = []
    for i, v in agg.items():
        if not v:
            continue
        s = "-" if v < 0 else "+"
        parts.append(f"{s} {_num(abs(v))} v{i}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def read_lp(text: str) -> LinearModel:
    """Parse LP text produced by :func:`write_lp` into an equivalent model."""
    model = LinearModel("read")
    lines = [ln for ln in (l.split("\\")[0].strip() for l in text.splitlines()) if ln]
    it = iter(lines)
    line = next(it)
    if line.lower() not in ("minimize", "maximize"):
        raise InputError(f"LP file must start with Minimize/Maximize, got {line!r}")
    minimize = line.lower() == "minimize"

    sections: dict[str, list[str]] = {"objective": [], "subject to": [],
                                      "bounds": [], "general": []}
    current = "objective"
    for line in it:
        low = line.lower()
        if low in ("subject to", "st", "s.t."):
            current = "subject to"
        elif low == "bounds":
            current = "bounds"
        elif low in ("general", "generals", "binary", "binaries"):
            current = "general"
        elif low == "end":
            break
        else:
            sections[current].append(line)

    var_ids: set[int] = set()
    for sec in ("objective", "subject to", "bounds", "general"):
        for line in sections[sec]:
            var_ids.update(int(tok[1:]) for tok in re.findall(r"\bv\d+\b", line))
    nv = max(var_ids) + 1 if var_ids else 0
    for i in range(nv):
        model.add_variable(f"v{i}", -INF, INF)

    def parse_terms(expr: str):
        coeffs: dict[int, float] = {}
        const = 0.0
        tokens = expr.replace("+", " + ").replace("-", " - ").split()
        sign, pending = 1.0, None
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if tok == "+":
                sign, pending = 1.0, None
            elif tok == "-":
                sign, pending = -1.0, None
            elif tok.startswith("v"):
                coef = sign * (pending if pending is not None else 1.0)
                idx = int(tok[1:])
                coeffs[idx] = coeffs.get(idx, 0.0) + coef
                pending = None
            else:
                if pending is not None:
                    const += sign * pending
                pending = float(tok)
            i += 1
        if pending is not None:
            const += sign * pending
        return coeffs, const

    obj_text = " ".join(sections["objective"])
    obj_text = obj_text.split(":", 1)[1] if ":" in obj_text else obj_text
    coeffs, const = parse_terms(obj_text)
    model.set_objective(coeffs, minimize=minimize, constant=const)

    for line in sections["subject to"]:
        body = line.split(":", 1)[1] if ":" in line else line
        m = re.search(r"(<=|>=|=)", body)
        if not m:
            raise InputError(f"constraint without sense: {line!r}")
        sense = m.group(1)
        lhs, rhs = body.split(sense, 1)
        lcoef, lconst = parse_terms(lhs)
        model.add_constraint(lcoef, sense, float(rhs) - lconst)

    for line in sections["bounds"]:
        m = re.match(r"(\S+)\s*<=\s*v(\d+)\s*<=\s*(\S+)", line)
        if not m:
            raise InputError(f"unsupported bound line: {line!r}")
        lo = -INF if m.group(1) in ("-inf", "-Inf") else float(m.group(1))
        hi = INF if m.group(3) in ("+inf", "inf", "Inf") else float(m.group(3))
        idx = int(m.group(2))
        model.lb[idx], model.ub[idx] = lo, hi

    for line in sections["general"]:
        for tok in line.split():
            model.integer[int(tok[1:])] = True
    return model

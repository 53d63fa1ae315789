"""Minimal conic-program representation backed by the Clarabel interior-point solver.

A :class:`ConicProgram` holds named variable blocks, a linear objective to
maximise and a list of cone memberships over affine expressions:

* ``eq``   ``e == 0``
* ``ge``   ``e >= 0``
* ``exp``  ``(x, y, z)`` with ``y * exp(x / y) <= z``
* ``soc``  ``(t, x_1, ..., x_m)`` with ``||x|| <= t``
* ``psd``  an ``n x n`` symmetric matrix of expressions that must be PSD

Programs can be dumped to a line-oriented text format and parsed back; the
round trip is exact because floats are written with ``repr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LN2 = math.log(2.0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"
NUMERICAL_ERROR = "numerical_error"


class Affine:
    """Sparse affine expression ``const + sum(coef[i] * x[i])``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def lift(value) -> "Affine":
        return value if isinstance(value, Affine) else Affine(const=value)

    def copy(self) -> "Affine":
        return Affine(self.terms, self.const)

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    __radd__ = __add__

    def __iadd__(self, other):
        if isinstance(other, Affine):
            terms = self.terms
            for i, c in other.terms.items():
                terms[i] = terms.get(i, 0.0) + c
            self.const += other.const
        else:
            self.const += float(other)
        return self

    def __neg__(self):
        return Affine({i: -c for i, c in self.terms.items()}, -self.const)

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) + (-self)

    def __mul__(self, scalar):
        s = float(scalar)
        return Affine({i: s * c for i, c in self.terms.items()}, s * self.const)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __eq__(self, other):
        return isinstance(other, Affine) and self.terms == other.terms and self.const == other.const

    def __repr__(self):
        return f"Affine({self.terms!r}, {self.const!r})"

    def value(self, x) -> float:
        return self.const + sum(c * x[i] for i, c in self.terms.items())


def linear_sum(coefs, exprs) -> Affine:
    """``sum(c * e)`` without building intermediate expressions."""
    out = Affine()
    for c, e in zip(coefs, exprs):
        c = float(c)
        if c == 0.0:
            continue
        if isinstance(e, Affine):
            for i, a in e.terms.items():
                out.terms[i] = out.terms.get(i, 0.0) + c * a
            out.const += c * e.const
        else:
            out.const += c * float(e)
    return out


@dataclass
class Variable:
    name: str
    kind: str  # scalar | vector | matrix | symmetric
    shape: tuple
    offset: int

    @property
    def size(self) -> int:
        if self.kind == "scalar":
            return 1
        if self.kind == "vector":
            return self.shape[0]
        if self.kind == "matrix":
            return self.shape[0] * self.shape[1]
        n = self.shape[0]
        return n * (n + 1) // 2

    def index(self, *idx) -> int:
        if self.kind == "scalar":
            return self.offset
        if self.kind == "vector":
            (i,) = idx
            if not 0 <= i < self.shape[0]:
                raise IndexError(f"{self.name}[{i}] out of range")
            return self.offset + i
        i, j = idx
        if self.kind == "matrix":
            m, n = self.shape
            if not (0 <= i < m and 0 <= j < n):
                raise IndexError(f"{self.name}[{i},{j}] out of range")
            return self.offset + i * n + j
        n = self.shape[0]
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"{self.name}[{i},{j}] out of range")
        if i > j:
            i, j = j, i
        return self.offset + j * (j + 1) // 2 + i

    def __getitem__(self, idx) -> Affine:
        idx = idx if isinstance(idx, tuple) else (idx,)
        return Affine({self.index(*idx): 1.0})

    @property
    def expr(self) -> Affine:
        if self.kind != "scalar":
            raise TypeError(f"{self.name} is not a scalar")
        return Affine({self.offset: 1.0})

    def element_names(self):
        if self.kind == "scalar":
            return [(self.name, self.offset)]
        if self.kind == "vector":
            return [(f"{self.name}[{i}]", self.offset + i) for i in range(self.shape[0])]
        if self.kind == "matrix":
            m, n = self.shape
            return [(f"{self.name}[{i},{j}]", self.index(i, j)) for i in range(m) for j in range(n)]
        n = self.shape[0]
        return [(f"{self.name}[{i},{j}]", self.index(i, j)) for j in range(n) for i in range(j + 1)]

    def unpack(self, x) -> np.ndarray | float:
        if self.kind == "scalar":
            return float(x[self.offset])
        block = np.asarray(x[self.offset:self.offset + self.size], dtype=float)
        if self.kind == "vector":
            return block.copy()
        if self.kind == "matrix":
            return block.reshape(self.shape).copy()
        n = self.shape[0]
        out = np.empty((n, n))
        for j in range(n):
            for i in range(j + 1):
                out[i, j] = out[j, i] = block[j * (j + 1) // 2 + i]
        return out


@dataclass
class Constraint:
    kind: str
    exprs: list
    dim: int = 0  # matrix order for psd constraints

    def __eq__(self, other):
        return (
            isinstance(other, Constraint)
            and self.kind == other.kind
            and self.dim == other.dim
            and len(self.exprs) == len(other.exprs)
            and all(a == b for a, b in zip(self.exprs, other.exprs))
        )


class ConicProgram:
    def __init__(self):
        self.variables: dict[str, Variable] = {}
        self.n_vars = 0
        self.objective = Affine()
        self.constraints: list[Constraint] = []

    # declarations
    def add_variable(self, name: str, kind: str = "scalar", shape=()) -> Variable:
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared")
        if kind not in ("scalar", "vector", "matrix", "symmetric"):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == "vector" and isinstance(shape, int):
            shape = (shape,)
        if kind == "symmetric" and isinstance(shape, int):
            shape = (shape, shape)
        var = Variable(name, kind, tuple(int(s) for s in shape), self.n_vars)
        self.variables[name] = var
        self.n_vars += var.size
        return var

    def scalar(self, name):
        return self.add_variable(name, "scalar")

    def vector(self, name, n):
        return self.add_variable(name, "vector", (n,))

    def matrix(self, name, m, n):
        return self.add_variable(name, "matrix", (m, n))

    def symmetric(self, name, n):
        return self.add_variable(name, "symmetric", (n, n))

    # objective and constraints
    def maximize(self, expr):
        self.objective = Affine.lift(expr).copy()

    def add_eq(self, lhs, rhs=0.0):
        self.constraints.append(Constraint("eq", [Affine.lift(lhs) - rhs]))

    def add_ge(self, lhs, rhs=0.0):
        self.constraints.append(Constraint("ge", [Affine.lift(lhs) - rhs]))

    def add_le(self, lhs, rhs=0.0):
        self.constraints.append(Constraint("ge", [Affine.lift(rhs) - lhs]))

    def add_exp(self, x, y, z):
        self.constraints.append(Constraint("exp", [Affine.lift(x), Affine.lift(y), Affine.lift(z)]))

    def add_soc(self, t, xs):
        self.constraints.append(Constraint("soc", [Affine.lift(t)] + [Affine.lift(x) for x in xs]))

    def add_psd(self, mat):
        n = len(mat)
        tri = [Affine.lift(mat[i][j]) for j in range(n) for i in range(j + 1)]
        self.constraints.append(Constraint("psd", tri, dim=n))

    def add_psd_variable(self, var: Variable):
        if var.kind != "symmetric":
            raise TypeError("PSD membership needs a symmetric variable")
        n = var.shape[0]
        self.add_psd([[var[i, j] for j in range(n)] for i in range(n)])

    def add_square_le(self, xs, t):
        """``sum(x_i^2) <= t`` as a rotated second-order cone."""
        t = Affine.lift(t)
        self.add_soc(t + 1.0, [2.0 * Affine.lift(x) for x in xs] + [t - 1.0])

    # evaluation
    def values(self, x) -> dict:
        return {name: var.unpack(x) for name, var in self.variables.items()}

    def objective_value(self, x) -> float:
        return self.objective.value(x)

    def __eq__(self, other):
        if not isinstance(other, ConicProgram):
            return NotImplemented
        return (
            self.variables == other.variables
            and self.objective == other.objective
            and self.constraints == other.constraints
        )

    # text format
    def dump(self) -> str:
        names = {}
        for var in self.variables.values():
            for label, idx in var.element_names():
                names[idx] = label
        lines = ["# conic program"]
        for var in self.variables.values():
            dims = " ".join(str(s) for s in var.shape)
            lines.append(f"var {var.name} {var.kind} {dims}".rstrip())
        lines.append("maximize " + _fmt_affine(self.objective, names))
        for con in self.constraints:
            head = f"psd {con.dim}" if con.kind == "psd" else con.kind
            lines.append(head + ": " + " | ".join(_fmt_affine(e, names) for e in con.exprs))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "ConicProgram":
        prog = cls()
        lookup = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("var "):
                parts = line.split()
                var = prog.add_variable(parts[1], parts[2], tuple(int(p) for p in parts[3:]))
                lookup.update(dict(var.element_names()))
            elif line.startswith("maximize "):
                prog.objective = _parse_affine(line[len("maximize "):], lookup)
            else:
                head, _, body = line.partition(": ")
                exprs = [_parse_affine(chunk, lookup) for chunk in body.split(" | ")]
                if head.startswith("psd"):
                    prog.constraints.append(Constraint("psd", exprs, dim=int(head.split()[1])))
                elif head in ("eq", "ge", "exp", "soc"):
                    prog.constraints.append(Constraint(head, exprs))
                else:
                    raise ValueError(f"cannot parse line: {raw!r}")
        return prog


def _fmt_affine(expr: Affine, names) -> str:
    parts = [repr(expr.const)]
    parts.extend(f"{c!r}*{names[i]}" for i, c in expr.terms.items())
    return " + ".join(parts)


def _parse_affine(text: str, lookup) -> Affine:
    chunks = text.split(" + ")
    out = Affine(const=float(chunks[0]))
    for chunk in chunks[1:]:
        coef, _, name = chunk.partition("*")
        out.terms[lookup[name]] = float(coef)
    return out


def add_log_epigraph(program: ConicProgram, r, p, coeff: float = 0.5):
    """Constrain ``r <= coeff * log2(1 + p)`` through one exponential cone."""
    program.add_exp(Affine.lift(r) * (LN2 / coeff), 1.0, Affine.lift(p) + 1.0)


@dataclass
class SolveResult:
    status: str
    values: dict | None = None
    objective: float | None = None
    iterations: int = 0
    x: np.ndarray | None = field(default=None, repr=False)
    residual: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _compile(program: ConicProgram):
    import clarabel

    groups = {"eq": [], "ge": [], "exp": [], "soc": [], "psd": []}
    for con in program.constraints:
        groups[con.kind].append(con)

    rows, cols, vals, rhs = [], [], [], []
    cones = []

    def emit(expr, scale=1.0):
        r = len(rhs)
        for i, c in expr.terms.items():
            rows.append(r)
            cols.append(i)
            vals.append(-scale * c)
        rhs.append(scale * expr.const)

    if groups["eq"]:
        for con in groups["eq"]:
            emit(con.exprs[0])
        cones.append(clarabel.ZeroConeT(len(groups["eq"])))
    if groups["ge"]:
        for con in groups["ge"]:
            emit(con.exprs[0])
        cones.append(clarabel.NonnegativeConeT(len(groups["ge"])))
    for con in groups["exp"]:
        for e in con.exprs:
            emit(e)
        cones.append(clarabel.ExponentialConeT())
    for con in groups["soc"]:
        for e in con.exprs:
            emit(e)
        cones.append(clarabel.SecondOrderConeT(len(con.exprs)))
    sqrt2 = math.sqrt(2.0)
    for con in groups["psd"]:
        k = 0
        for j in range(con.dim):
            for i in range(j + 1):
                emit(con.exprs[k], 1.0 if i == j else sqrt2)
                k += 1
        cones.append(clarabel.PSDTriangleConeT(con.dim))

    n = program.n_vars
    m = len(rhs)
    a = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))
    b = np.array(rhs, dtype=float)
    q = np.zeros(n)
    for i, c in program.objective.terms.items():
        q[i] -= c
    return a, b, q, cones


_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
    "MaxIterations": MAX_ITER,
}


# settings tried in order when the interior-point method stalls
_RETRY_SETTINGS = ({}, {"max_step_fraction": 0.9}, {"equilibrate_enable": False})


def _clarabel_solve(a, b, q, cones, n, tol, max_iter, extra):
    import clarabel

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = max(tol, 1e-8)
    settings.max_threads = 1
    for key, val in extra.items():
        setattr(settings, key, val)
    p = sp.csc_matrix((n, n))
    try:
        return clarabel.DefaultSolver(p, q, a, b, cones, settings).solve()
    except Exception:  # clarabel raises plain exceptions on factorisation failures
        return None


def solve(program: ConicProgram, tol: float = 1e-8, max_iter: int = 200) -> SolveResult:
    """Solve with Clarabel; optimal results are re-checked with :func:`max_residual`.

    Stalled solves are retried with a shorter step and then without equilibration.
    """
    a, b, q, cones = _compile(program)
    result = SolveResult(NUMERICAL_ERROR)
    for extra in _RETRY_SETTINGS:
        sol = _clarabel_solve(a, b, q, cones, program.n_vars, tol, max_iter, extra)
        if sol is None:
            continue
        status = _STATUS.get(str(sol.status), NUMERICAL_ERROR)
        if status in (INFEASIBLE, UNBOUNDED):
            return SolveResult(status, iterations=sol.iterations)
        if status != OPTIMAL:
            result = SolveResult(status, iterations=sol.iterations)
            continue
        x = np.asarray(sol.x, dtype=float)
        res = max_residual(program, x)
        if not np.isfinite(res) or res > 10 * tol:
            result = SolveResult(NUMERICAL_ERROR, iterations=sol.iterations, residual=res)
            continue
        return SolveResult(
            OPTIMAL,
            values=program.values(x),
            objective=program.objective_value(x),
            iterations=sol.iterations,
            x=x,
            residual=res,
        )
    return result


def constraint_residuals(program: ConicProgram, x) -> list[float]:
    """Scaled violation of every constraint at ``x``, computed without the solver.

    Each violation is divided by ``1 + magnitude`` of the quantities involved so
    that tolerances are meaningful for the wide dynamic range of the designs.
    """
    x = np.asarray(x, dtype=float)
    out = []
    for con in program.constraints:
        vals = [e.value(x) for e in con.exprs]
        if con.kind == "eq":
            v = vals[0]
            scale = 1.0 + _magnitude(con.exprs[0], x)
            out.append(abs(v) / scale)
        elif con.kind == "ge":
            scale = 1.0 + _magnitude(con.exprs[0], x)
            out.append(max(0.0, -vals[0]) / scale)
        elif con.kind == "exp":
            ex, ey, ez = vals
            if ey <= 0:
                # closure of the cone: y = 0 requires x <= 0 and z >= 0
                viol = max(-ey, 0.0) + (max(ex, 0.0) if ey <= 1e-300 else 0.0) + max(-ez, 0.0)
                out.append(viol / (1.0 + abs(ex) + abs(ez)))
            else:
                lhs = ey * math.exp(min(ex / ey, 700.0))
                out.append(max(0.0, lhs - ez) / (1.0 + abs(ez) + abs(lhs)))
        elif con.kind == "soc":
            t = vals[0]
            nrm = math.sqrt(sum(v * v for v in vals[1:]))
            out.append(max(0.0, nrm - t) / (1.0 + abs(t) + nrm))
        else:
            n = con.dim
            mat = np.empty((n, n))
            k = 0
            for j in range(n):
                for i in range(j + 1):
                    mat[i, j] = mat[j, i] = vals[k]
                    k += 1
            lam = np.linalg.eigvalsh(mat)
            out.append(max(0.0, -lam[0]) / (1.0 + np.abs(lam).max()))
    return out


def _magnitude(expr: Affine, x) -> float:
    return abs(expr.const) + sum(abs(c * x[i]) for i, c in expr.terms.items())


def max_residual(program: ConicProgram, x) -> float:
    res = constraint_residuals(program, x)
    return max(res) if res else 0.0

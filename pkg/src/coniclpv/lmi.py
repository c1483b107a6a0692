"""Symbolic block-LMI modeling on top of :mod:`coniclpv.sdp`.

Variables are matrices (symmetric or rectangular) or scalars. Expressions are
affine in the variables and support ``+``, ``-``, scalar ``*``, ``@`` with
constant matrices and ``.T``. Constraints are given as a lower-triangular grid
of blocks; the upper triangle is implied by symmetry.

>>> prog = LmiProgram()
>>> P = prog.symmetric(2)
>>> A = np.array([[0.0, 1.0], [-1.0, -1.0]])
>>> cid = prog.add_nsd([[P @ A + A.T @ P]], strict=True)
>>> cid2 = prog.add_psd([[P]], strict=True)
>>> prog.solve().ok
True
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import sdp
from .errors import DimensionMismatch, EmptyProgram, UnknownHandle

__all__ = ["Variable", "AffineExpr", "LmiProgram", "LmiSolution", "BackMap", "STRICT_MARGIN"]

STRICT_MARGIN = 1e-6

_ids = itertools.count()


def _basis(kind, shape):
    r, c = shape
    if kind == "symmetric":
        mats = []
        for i in range(r):
            for j in range(i, r):
                E = np.zeros(shape)
                E[i, j] = E[j, i] = 1.0
                mats.append(E)
        return np.array(mats)
    return np.eye(r * c).reshape(r * c, r, c)


class AffineExpr:
    """``const + sum_v sum_k x_{v,k} coef[v][k]`` with matrix-valued coefs."""

    __array_ufunc__ = None

    def __init__(self, const, coefs=None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.coefs = dict(coefs or {})

    @property
    def shape(self):
        return self.const.shape

    def variables(self):
        return [v for v in self.coefs]

    # arithmetic -------------------------------------------------------
    def _combine(self, other, sign):
        other = as_expr(other, self.shape)
        if other.shape != self.shape:
            raise DimensionMismatch(f"cannot add shapes {self.shape} and {other.shape}")
        coefs = dict(self.coefs)
        for v, C in other.coefs.items():
            coefs[v] = coefs[v] + sign * C if v in coefs else sign * C
        return AffineExpr(self.const + sign * other.const, coefs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __radd__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return AffineExpr(-self.const, {v: -C for v, C in self.coefs.items()})

    def __mul__(self, other):
        if isinstance(other, (AffineExpr, Variable)):
            other = as_expr(other)
            if other.coefs and self.coefs:
                raise TypeError("product of two variable expressions is not affine")
            if other.coefs:
                return other * self.const
            other = other.const
        M = np.asarray(other, dtype=float)
        if M.ndim == 0:
            return AffineExpr(self.const * M, {v: C * M for v, C in self.coefs.items()})
        if self.shape != (1, 1):
            raise TypeError("use @ for matrix products; * only scales")
        M = np.atleast_2d(M)
        return AffineExpr(self.const[0, 0] * M, {v: C[:, 0, 0][:, None, None] * M[None]
                                                for v, C in self.coefs.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __matmul__(self, other):
        if isinstance(other, (AffineExpr, Variable)):
            raise TypeError("product of two variable expressions is not affine")
        M = np.atleast_2d(np.asarray(other, dtype=float))
        if M.shape[0] != self.shape[1]:
            raise DimensionMismatch(f"{self.shape} @ {M.shape}")
        return AffineExpr(self.const @ M, {v: C @ M for v, C in self.coefs.items()})

    def __rmatmul__(self, other):
        M = np.atleast_2d(np.asarray(other, dtype=float))
        if M.shape[1] != self.shape[0]:
            raise DimensionMismatch(f"{M.shape} @ {self.shape}")
        return AffineExpr(M @ self.const, {v: M @ C for v, C in self.coefs.items()})

    @property
    def T(self):
        return AffineExpr(self.const.T, {v: C.transpose(0, 2, 1) for v, C in self.coefs.items()})

    def trace(self):
        if self.shape[0] != self.shape[1]:
            raise DimensionMismatch("trace of a non-square expression")
        return AffineExpr([[np.trace(self.const)]],
                          {v: np.trace(C, axis1=1, axis2=2)[:, None, None] for v, C in self.coefs.items()})

    def evaluate(self, values):
        """Numeric value given ``{Variable: ndarray}``."""
        out = self.const.copy()
        for v, C in self.coefs.items():
            if v not in values:
                raise UnknownHandle(f"no value for {v}")
            out += np.tensordot(v.pack(values[v]), C, axes=1)
        return out

    def __repr__(self):
        names = ", ".join(v.name for v in self.coefs)
        return f"AffineExpr(shape={self.shape}, vars=[{names}])"


class Variable:
    """Handle to a decision variable. Acts as an :class:`AffineExpr`."""

    __array_ufunc__ = None

    def __init__(self, kind, shape, name=None):
        if kind not in ("symmetric", "rectangular", "scalar"):
            raise ValueError(f"unknown variable kind {kind!r}")
        if min(shape) < 1:
            raise ValueError("variable dimensions must be >= 1")
        self.id = next(_ids)
        self.kind = kind
        self.shape = tuple(shape)
        self.name = name or f"{kind[:3]}{self.id}"
        self.basis = _basis(kind, self.shape)

    @property
    def size(self):
        return self.basis.shape[0]

    def pack(self, value):
        """Scalar unknowns for a numeric value of this variable."""
        V = np.atleast_2d(np.asarray(value, dtype=float))
        if V.shape != self.shape:
            raise DimensionMismatch(f"{self.name} expects shape {self.shape}, got {V.shape}")
        if self.kind == "symmetric":
            return V[np.triu_indices(self.shape[0])]
        return V.ravel()

    def unpack(self, x):
        return np.tensordot(np.asarray(x, dtype=float), self.basis, axes=1)

    def expr(self):
        return AffineExpr(np.zeros(self.shape), {self: self.basis})

    def __getattr__(self, item):
        if item in ("T", "trace", "evaluate", "const", "coefs", "variables"):
            return getattr(self.expr(), item)
        raise AttributeError(item)

    def __add__(self, o): return self.expr() + o
    def __radd__(self, o): return o + self.expr()
    def __sub__(self, o): return self.expr() - o
    def __rsub__(self, o): return o - self.expr()
    def __neg__(self): return -self.expr()
    def __mul__(self, o): return self.expr() * o
    def __rmul__(self, o): return self.expr() * o
    def __truediv__(self, o): return self.expr() / o
    def __matmul__(self, o): return self.expr() @ o
    def __rmatmul__(self, o): return o @ self.expr()

    def __hash__(self):
        return self.id

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return f"Variable({self.name}, {self.kind}, {self.shape})"


def as_expr(x, shape=None):
    if isinstance(x, AffineExpr):
        return x
    if isinstance(x, Variable):
        return x.expr()
    M = np.asarray(x, dtype=float)
    if M.ndim == 0 and shape is not None:
        if M == 0:
            return AffineExpr(np.zeros(shape))
        if shape[0] != shape[1]:
            raise DimensionMismatch("scalar only broadcasts to square blocks")
        return AffineExpr(M * np.eye(shape[0]))
    return AffineExpr(M)


@dataclass
class Constraint:
    grid: list
    sense: str  # "psd" or "nsd"
    strict: bool
    name: str
    sizes: tuple

    def block(self):
        """Full symmetric expression in the constraint's own orientation."""
        n = len(self.sizes)
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                e = self.grid[i][j] if j <= i else self.grid[j][i].T
                row.append(e)
            rows.append(row)
        return rows

    def evaluate(self, values):
        return np.block([[e.evaluate(values) for e in row] for row in self.block()])


def _normalize_grid(grid):
    n = len(grid)
    for i, row in enumerate(grid):
        if len(row) < i + 1:
            raise DimensionMismatch(f"grid row {i} needs at least {i + 1} entries")
    sizes = [None] * n
    for i in range(n):
        for j in range(i + 1):
            e = grid[i][j]
            if e is None or np.ndim(e) == 0 and not isinstance(e, (AffineExpr, Variable)):
                continue
            r, c = as_expr(e).shape
            for idx, dim in ((i, r), (j, c)):
                if sizes[idx] is None:
                    sizes[idx] = dim
                elif sizes[idx] != dim:
                    raise DimensionMismatch(f"block row/col {idx} has inconsistent size")
    # rows holding only plain numbers are scalar blocks
    sizes = [1 if s is None else s for s in sizes]
    out = []
    for i in range(n):
        row = []
        for j in range(i + 1):
            e = grid[i][j]
            shape = (sizes[i], sizes[j])
            if e is None:
                e = 0.0
            scalar = not isinstance(e, (AffineExpr, Variable)) and np.ndim(e) == 0
            if scalar and i != j and e != 0 and shape != (1, 1):
                raise DimensionMismatch("nonzero scalar off the diagonal of a matrix block")
            ex = as_expr(e, shape)
            if ex.shape != shape:
                raise DimensionMismatch(f"entry ({i},{j}) has shape {ex.shape}, expected {shape}")
            if i == j:
                asym = np.abs(ex.const - ex.const.T).max(initial=0.0)
                asym = max([asym] + [np.abs(C - C.transpose(0, 2, 1)).max(initial=0.0)
                                     for C in ex.coefs.values()])
                if asym > 1e-9 * max(1.0, np.abs(ex.const).max(initial=0.0)):
                    raise DimensionMismatch(f"diagonal entry ({i},{i}) is not symmetric")
            row.append(ex)
        out.append(row)
    return out, tuple(sizes)


@dataclass(frozen=True)
class BackMap:
    """Maps SDP unknowns back to named variables."""

    offsets: dict

    def extract(self, var, x):
        if var not in self.offsets:
            raise UnknownHandle(f"{var!r} is not part of this program")
        off = self.offsets[var]
        V = var.unpack(np.asarray(x)[off: off + var.size])
        if var.kind == "symmetric":
            V = 0.5 * (V + V.T)
        return V


@dataclass(frozen=True)
class LmiSolution:
    sdp: sdp.SdpSolution
    backmap: BackMap
    objective: float

    @property
    def status(self):
        return self.sdp.status

    @property
    def ok(self):
        return self.sdp.ok

    def value(self, var):
        return self.backmap.extract(var, self.sdp.x)

    def values(self):
        return {v: self.value(v) for v in self.backmap.offsets}


class LmiProgram:
    def __init__(self):
        self.variables = []
        self.constraints = []
        self.objective = None
        self.sign = 1.0

    # variables ---------------------------------------------------------
    def declare(self, kind, n=1, m=None, name=None):
        if kind == "scalar":
            shape = (1, 1)
        elif kind == "symmetric":
            shape = (n, n)
        else:
            shape = (n, m if m is not None else n)
        v = Variable(kind, shape, name)
        self.variables.append(v)
        return v

    def symmetric(self, n, name=None):
        return self.declare("symmetric", n, name=name)

    def rectangular(self, n, m, name=None):
        return self.declare("rectangular", n, m, name=name)

    def scalar(self, name=None):
        return self.declare("scalar", name=name)

    # constraints -------------------------------------------------------
    def _add(self, grid, sense, strict, name):
        norm, sizes = _normalize_grid(grid)
        known = set(self.variables)
        for row in norm:
            for e in row:
                for v in e.coefs:
                    if v not in known:
                        raise UnknownHandle(f"{v!r} was not declared in this program")
        cid = len(self.constraints)
        self.constraints.append(Constraint(norm, sense, strict, name or f"c{cid}", sizes))
        return cid

    def add_psd(self, grid, strict=False, name=None):
        return self._add(grid, "psd", strict, name)

    def add_nsd(self, grid, strict=False, name=None):
        return self._add(grid, "nsd", strict, name)

    def minimize(self, expr):
        self.objective = as_expr(expr)
        self.sign = 1.0

    def maximize(self, expr):
        self.objective = as_expr(expr)
        self.sign = -1.0

    # compilation -------------------------------------------------------
    def compile(self):
        if not self.constraints:
            raise EmptyProgram("program has no constraints")
        offsets = {}
        m = 0
        for v in self.variables:
            offsets[v] = m
            m += v.size
        blocks = []
        for con in self.constraints:
            d = sum(con.sizes)
            F = np.zeros((m + 1, d, d))
            starts = np.concatenate([[0], np.cumsum(con.sizes)])
            for i, row in enumerate(con.block()):
                for j, e in enumerate(row):
                    rs = slice(starts[i], starts[i + 1])
                    cs = slice(starts[j], starts[j + 1])
                    F[0, rs, cs] = e.const
                    for v, C in e.coefs.items():
                        F[1 + offsets[v]: 1 + offsets[v] + v.size, rs, cs] = C
            if con.sense == "nsd":
                F = -F
            F = 0.5 * (F + F.transpose(0, 2, 1))
            if con.strict:
                eps = STRICT_MARGIN * max(1.0, np.abs(F[0]).max(initial=0.0))
                F[0] -= eps * np.eye(d)
            blocks.append(F)
        c = np.zeros(m)
        if self.objective is not None:
            if self.objective.shape != (1, 1):
                raise DimensionMismatch("objective must be scalar")
            for v, C in self.objective.coefs.items():
                c[offsets[v]: offsets[v] + v.size] = self.sign * C[:, 0, 0]
        return sdp.SdpProblem(c, tuple(blocks)), BackMap(offsets)

    def solve(self, opts=None):
        problem, backmap = self.compile()
        res = sdp.solve(problem, opts)
        obj = np.nan
        if self.objective is not None:
            obj = float(self.objective.evaluate({v: backmap.extract(v, res.x) for v in self.objective.coefs})[0, 0])
        return LmiSolution(res, backmap, obj)

    def residuals(self, solution):
        """Extreme eigenvalue of each constraint block at the solution.

        Reported in the constraint's own orientation: the smallest
        eigenvalue for PSD blocks, the largest for NSD blocks.
        """
        vals = solution.values()
        out = {}
        for con in self.constraints:
            M = con.evaluate(vals)
            w = np.linalg.eigvalsh(0.5 * (M + M.T))
            out[con.name] = float(w[0] if con.sense == "psd" else w[-1])
        return out


def extract(var, solution):
    return solution.value(var)

"""Small dense SDP solver for problems in LMI standard form.

    minimize    c^T x
    subject to  F0_k + sum_i x_i Fi_k  >= 0   for every block k

A two-phase logarithmic-barrier method: phase 1 minimizes a common slack
``s`` with ``F_k(x) + s I >= 0`` to find a strictly feasible point, phase 2
follows the central path of the original problem. Every variable is kept in
a large box ``|x_i| <= variable_bound`` so both phases stay bounded.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch

CENTERING_BUDGET = 50
CENTERING_TOL = 1e-8

__all__ = ["Status", "SolverOptions", "SdpProblem", "SdpSolution", "solve", "check_feasible"]


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"

    @property
    def ok(self):
        return self in (Status.OPTIMAL, Status.FEASIBLE)


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-7
    gap_tol: float = 1e-7
    max_iterations: int = 200
    initial_slack: float = 1.0
    variable_bound: float = 1e8
    # barrier parameter growth per outer iteration
    mu: float = 10.0

    def __post_init__(self):
        for name in ("feas_tol", "gap_tol", "max_iterations", "initial_slack", "variable_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")


@dataclass(frozen=True)
class SdpProblem:
    """``c`` has length m; each block is an array of shape (m + 1, d, d)."""

    c: np.ndarray
    blocks: tuple

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        blocks = tuple(np.asarray(F, dtype=float) for F in self.blocks)
        m = c.size
        for k, F in enumerate(blocks):
            if F.ndim != 3 or F.shape[0] != m + 1 or F.shape[1] != F.shape[2]:
                raise DimensionMismatch(
                    f"block {k} has shape {F.shape}, expected ({m + 1}, d, d)")
            scale = max(1.0, np.abs(F).max(initial=0.0))
            if np.abs(F - F.transpose(0, 2, 1)).max(initial=0.0) > 1e-9 * scale:
                raise DimensionMismatch(f"block {k} is not symmetric")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "blocks", blocks)

    @property
    def num_vars(self):
        return self.c.size

    def evaluate(self, x):
        """Return the list of block matrices ``F0 + sum x_i Fi``."""
        x = np.asarray(x, dtype=float)
        return [F[0] + np.tensordot(x, F[1:], axes=1) for F in self.blocks]

    def min_eig(self, x):
        worst = np.inf
        for M in self.evaluate(x):
            if M.size:
                worst = min(worst, np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        return float(worst)


@dataclass(frozen=True)
class SdpSolution:
    status: Status
    x: np.ndarray
    objective: float
    min_eig: float
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status.ok


class _Barrier:
    """Central-path machinery for ``min t c^T y - sum log det F_k(y)``."""

    def __init__(self, c, blocks, bound, shift=0.0):
        self.c = c
        self.blocks = blocks
        self.bound = bound
        self.shift = shift
        self.dims = [F.shape[1] for F in blocks]
        self.theta = sum(self.dims) + 2 * c.size

    def mats(self, y):
        return [F[0] + np.tensordot(y, F[1:], axes=1) + self.shift * np.eye(F.shape[1])
                for F in self.blocks]

    def inside(self, y):
        if np.any(np.abs(y) >= self.bound):
            return None
        chols = []
        for M in self.mats(y):
            try:
                chols.append(np.linalg.cholesky(0.5 * (M + M.T)))
            except np.linalg.LinAlgError:
                return None
        return chols

    def value(self, t, y, chols):
        logdet = sum(2.0 * np.log(np.diag(L)).sum() for L in chols)
        box = np.log(self.bound - y).sum() + np.log(self.bound + y).sum()
        return t * self.c @ y - logdet - box

    def derivatives(self, t, y, chols):
        m = y.size
        g = t * self.c + 1.0 / (self.bound - y) - 1.0 / (self.bound + y)
        H = np.diag(1.0 / (self.bound - y) ** 2 + 1.0 / (self.bound + y) ** 2)
        for F, L in zip(self.blocks, chols):
            d = L.shape[0]
            Li = scipy.linalg.solve_triangular(L, np.eye(d), lower=True)
            G = np.einsum("ab,kbc,dc->kad", Li, F[1:], Li, optimize=True).reshape(m, d * d)
            g -= G[:, :: d + 1].sum(axis=1)
            H += G @ G.T
        return g, H


def _newton_direction(H, g):
    scale = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H * scale[:, None] * scale[None, :]
    try:
        cf = scipy.linalg.cho_factor(Hs, check_finite=False)
        dy = -scipy.linalg.cho_solve(cf, g * scale, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        dy = -np.linalg.lstsq(Hs, g * scale, rcond=1e-14)[0]
    return dy * scale


def _center(bar, t, y, chols, budget, stop=None):
    """Damped Newton centering. Returns (y, chols, steps, converged)."""
    steps = 0
    while steps < budget:
        g, H = bar.derivatives(t, y, chols)
        dy = _newton_direction(H, g)
        dec = -g @ dy
        if not np.isfinite(dec):
            return y, chols, steps, False
        if dec / 2.0 <= CENTERING_TOL:
            return y, chols, steps, True
        f0 = bar.value(t, y, chols)
        # allow for round-off in the barrier value near the boundary
        slack = 1e-13 * (1.0 + abs(f0))
        alpha = 1.0
        while True:
            y_new = y + alpha * dy
            c_new = bar.inside(y_new)
            if c_new is not None and bar.value(t, y_new, c_new) <= f0 - 0.25 * alpha * dec + slack:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                return y, chols, steps, dec / 2.0 <= 1e3 * CENTERING_TOL
        y, chols = y_new, c_new
        steps += 1
        if stop is not None and stop(y):
            return y, chols, steps, True
    return y, chols, steps, False


def _initial_t(bar, y, chols, gap_tol):
    g, H = bar.derivatives(0.0, y, chols)
    try:
        hc = np.linalg.solve(H, bar.c)
        denom = hc @ bar.c
        t = -(hc @ g) / denom if denom > 0 else 1.0
    except np.linalg.LinAlgError:
        t = 1.0
    if not np.isfinite(t) or t <= 0:
        t = 1.0
    return float(np.clip(t, 1e-6, 1e-3 * bar.theta / gap_tol))


def _phase1(problem, opts):
    """Minimize the slack s; stop as soon as s < 0."""
    m = problem.num_vars
    blocks = []
    for F in problem.blocks:
        d = F.shape[1]
        blocks.append(np.concatenate([F, np.eye(d)[None]], axis=0))
    c = np.zeros(m + 1)
    c[-1] = 1.0
    bar = _Barrier(c, blocks, opts.variable_bound)
    x0 = np.zeros(m)
    s0 = max(0.0, -problem.min_eig(x0)) + opts.initial_slack
    y = np.concatenate([x0, [s0]])
    chols = bar.inside(y)
    if chols is None:
        return None, np.inf, 0, Status.NUMERICAL_FAILURE
    t = _initial_t(bar, y, chols, opts.feas_tol)
    its = 0
    stop = lambda z: z[-1] < 0.0  # noqa: E731
    while True:
        budget = min(CENTERING_BUDGET, opts.max_iterations - its)
        y, chols, k, ok = _center(bar, t, y, chols, budget, stop)
        its += k
        s = y[-1]
        if s < 0.0:
            return y[:-1], s, its, Status.FEASIBLE
        gap = bar.theta / t
        if ok and s - gap > opts.feas_tol:
            return y[:-1], s, its, Status.INFEASIBLE
        if gap <= 0.5 * opts.feas_tol or not ok or its >= opts.max_iterations:
            # no strictly feasible point found; decide within tolerance
            if s <= opts.feas_tol:
                return y[:-1], s, its, Status.FEASIBLE
            if its >= opts.max_iterations:
                status = Status.MAX_ITERATIONS
            else:
                status = Status.INFEASIBLE if ok else Status.NUMERICAL_FAILURE
            return y[:-1], s, its, status
        t *= opts.mu


def _finish(problem, status, x, iterations, **info):
    x = np.asarray(x, dtype=float)
    return SdpSolution(status, x, float(problem.c @ x), problem.min_eig(x), iterations, info)


def check_feasible(problem, opts=None):
    """Phase 1 only: find a point with every block PSD (within feas_tol)."""
    opts = opts or SolverOptions()
    if problem.num_vars == 0:
        x = np.zeros(0)
        status = Status.FEASIBLE if problem.min_eig(x) >= -opts.feas_tol else Status.INFEASIBLE
        return _finish(problem, status, x, 0)
    x, s, its, status = _phase1(problem, opts)
    if x is None:
        return _finish(problem, Status.NUMERICAL_FAILURE, np.zeros(problem.num_vars), its)
    return _finish(problem, status, x, its, phase1_slack=float(s))


def solve(problem, opts=None):
    """Minimize ``c^T x`` over the LMI blocks."""
    opts = opts or SolverOptions()
    if not np.any(problem.c):
        return check_feasible(problem, opts)
    p1 = check_feasible(problem, opts)
    if p1.status is not Status.FEASIBLE:
        return p1
    s = p1.info.get("phase1_slack", -1.0)
    # thin feasible set: optimize over the feas_tol-relaxed blocks instead
    shift = 0.0 if s < 0.0 else s + 0.1 * (opts.feas_tol - s)
    bar = _Barrier(problem.c, problem.blocks, opts.variable_bound, shift)
    y = p1.x.copy()
    chols = bar.inside(y)
    if chols is None:
        return _finish(problem, Status.NUMERICAL_FAILURE, y, p1.iterations)
    t = _initial_t(bar, y, chols, opts.gap_tol)
    its = 0
    status = Status.MAX_ITERATIONS
    while its < opts.max_iterations:
        budget = min(CENTERING_BUDGET, opts.max_iterations - its)
        y, chols, k, ok = _center(bar, t, y, chols, budget)
        its += k
        gap = bar.theta / t
        if ok and gap <= opts.gap_tol * (1.0 + abs(problem.c @ y)):
            status = Status.OPTIMAL
            break
        if not ok:
            # centering stalled (round-off); accept a nearly converged path
            if gap <= 1e2 * opts.gap_tol * (1.0 + abs(problem.c @ y)):
                status = Status.OPTIMAL
            elif its < opts.max_iterations:
                status = Status.NUMERICAL_FAILURE
            break
        t *= opts.mu
    if np.any(np.abs(y) > 0.5 * opts.variable_bound):
        status = Status.NUMERICAL_FAILURE
    return _finish(problem, status, y, p1.iterations + its,
                   gap_bound=float(bar.theta / t), shift=float(shift))

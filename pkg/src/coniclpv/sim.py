"""Fixed-step closed-loop simulation of a polytopic plant and controller.

Loop wiring (negative feedback)::

    dx/dt  = A(s) x + B2(s) u + B1(s) w
    y      = C2(s) x
    dxc/dt = A_c(s) xc + B_c(s) (y - r)
    u      = -C_c(s) xc

``s(t)`` is shared by plant and controller and sampled at every Runge-Kutta
stage time. ``w`` is a known exogenous signal (a unit constant carries the
operating-point drift of the heat exchanger) and ``r`` the reference for
``y`` in shifted coordinates.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Divergence, EmptyTrace, Singular
from .lpvsys import ConstantVertex, sample_schedule
from .matcore import solve_linear
from .synthesis import PolytopicController

__all__ = [
    "LoopConfig",
    "SimulationTrace",
    "Metrics",
    "rk4",
    "simulate",
    "simulate_channel",
    "interpolate_hinf",
    "rms_error",
    "scenario_table",
    "write_trace_csv",
]

DIVERGENCE_LIMIT = 1e9


def _zero(t):
    return 0.0


@dataclass(frozen=True)
class LoopConfig:
    """Closed-loop experiment.

    ``initial`` is ``"equilibrium"`` (closed-loop steady state for the
    inputs frozen at t = 0), ``"zero"``, or a pair ``(x0, xc0)``.
    ``shift`` (optional) maps shifted states back to physical units and
    ``ref_offset`` converts ``r`` to the physical reference.
    """

    plant: object
    controller: PolytopicController
    schedule: object = None
    reference: object = _zero
    exogenous: object = None
    t_end: float = 60.0
    dt: float = 1e-3
    initial: object = "equilibrium"
    shift: object = None
    ref_offset: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        sched = self.schedule or self.plant.schedule or ConstantVertex(0, len(self.plant))
        object.__setattr__(self, "schedule", sched)
        if len(self.controller) != len(self.plant):
            raise DimensionMismatch("plant and controller need the same number of vertices")
        v, c = self.plant.vertices[0], self.controller.vertices[0]
        if c.n_in != v.p or c.n_out != v.m:
            raise DimensionMismatch(
                f"controller maps {c.n_in} -> {c.n_out}, plant needs {v.p} -> {v.m}")


@dataclass
class SimulationTrace:
    t: np.ndarray
    x: np.ndarray
    xc: np.ndarray
    u: np.ndarray
    y: np.ndarray
    r: np.ndarray
    physical: np.ndarray = None
    physical_ref: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def error(self):
        return self.y - self.r

    def __len__(self):
        return self.t.size


@dataclass
class Metrics:
    """RMS error per controller and scenario plus the spread across scenarios."""

    rms: dict
    std: dict
    scenarios: tuple

    def to_dict(self):
        return {
            "scenarios": list(self.scenarios),
            "rms": {k: [v[s] for s in self.scenarios] for k, v in self.rms.items()},
            "std_dev": dict(self.std),
        }

    def format(self, digits=3):
        names = list(self.rms)
        lines = ["scenario  " + "  ".join(f"{n:>14}" for n in names)]
        for s in self.scenarios:
            lines.append(f"{s!s:<9} " + "  ".join(
                f"{self.rms[n][s]:>14.{digits}f}" for n in names))
        lines.append("std. dev. " + "  ".join(f"{self.std[n]:>14.{digits}f}" for n in names))
        return "\n".join(lines)


def rk4(f, x0, t0, t_end, dt):
    """Classic fixed-step fourth-order Runge-Kutta; returns (t, X)."""
    steps = int(round((t_end - t0) / dt))
    x = np.asarray(x0, dtype=float).copy()
    ts = t0 + dt * np.arange(steps + 1)
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for k in range(steps):
        t = ts[k]
        k1 = f(t, x)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return ts, out


class _Loop:
    """Closed-loop matrices and forcing tabulated on a time grid."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.pv = [v.complete() for v in cfg.plant.vertices]
        self.cv = cfg.controller.vertices
        self.n = self.pv[0].n
        self.nc = self.cv[0].order
        nw = self.pv[0].n_w
        self.exo = cfg.exogenous or (lambda t: np.zeros(nw))

    def tabulate(self, times):
        """Return ``(Acl, f, C2, Cc)`` stacked along the first axis."""
        S = np.array([sample_schedule(self.cfg.schedule, max(t, 0.0)) for t in times])

        def blend(mats):
            return np.einsum("kn,nij->kij", S, np.array(mats))

        A = blend([v.A for v in self.pv])
        B2 = blend([v.B2 for v in self.pv])
        B1 = blend([v.B1 for v in self.pv])
        C2 = blend([v.C2 for v in self.pv])
        Ac = blend([c.A_c for c in self.cv])
        Bc = blend([c.B_c for c in self.cv])
        Cc = blend([c.C_c for c in self.cv])
        n = self.n
        Acl = np.empty((len(times), n + self.nc, n + self.nc))
        Acl[:, :n, :n] = A
        Acl[:, :n, n:] = -B2 @ Cc
        Acl[:, n:, :n] = Bc @ C2
        Acl[:, n:, n:] = Ac
        W = np.array([np.atleast_1d(np.asarray(self.exo(t), dtype=float)) for t in times])
        R = np.array([np.atleast_1d(np.asarray(self.cfg.reference(t), dtype=float))
                      for t in times])
        f = np.concatenate([np.einsum("kij,kj->ki", B1, W.reshape(len(times), -1)),
                            -np.einsum("kij,kj->ki", Bc, R.reshape(len(times), -1))], axis=1)
        return Acl, f, C2, Cc, R


def simulate(config):
    """Integrate the loop and return a :class:`SimulationTrace`.

    Raises :class:`Divergence` as soon as any state exceeds 1e9 in size.
    """
    loop = _Loop(config)
    n, nc = loop.n, loop.nc
    steps = int(round(config.t_end / config.dt))
    dt = config.dt
    # stage times t_k, t_k + dt/2 interleaved
    half = 0.5 * dt * np.arange(2 * steps + 1)
    Acl, f, C2, Cc, R = loop.tabulate(half)

    if isinstance(config.initial, str):
        if config.initial == "zero":
            z0 = np.zeros(n + nc)
        elif config.initial == "equilibrium":
            try:
                z0 = -solve_linear(Acl[0], f[0])
            except Singular:
                z0 = np.zeros(n + nc)
        else:
            raise ValueError(f"unknown initial condition {config.initial!r}")
    else:
        x0, xc0 = config.initial
        z0 = np.concatenate([np.ravel(x0), np.ravel(xc0)]).astype(float)
        if z0.size != n + nc:
            raise DimensionMismatch("initial state has the wrong size")

    ts = dt * np.arange(steps + 1)
    Z = np.empty((steps + 1, n + nc))
    Z[0] = z = z0
    for k in range(steps):
        i = 2 * k
        k1 = Acl[i] @ z + f[i]
        k2 = Acl[i + 1] @ (z + 0.5 * dt * k1) + f[i + 1]
        k3 = Acl[i + 1] @ (z + 0.5 * dt * k2) + f[i + 1]
        k4 = Acl[i + 2] @ (z + dt * k3) + f[i + 2]
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)) or np.abs(z).max() > DIVERGENCE_LIMIT:
            raise Divergence(f"state left the bound 1e9 at t = {ts[k + 1]:.3f} s")
        Z[k + 1] = z

    X, XC = Z[:, :n], Z[:, n:]
    U = -np.einsum("kij,kj->ki", Cc[::2], XC)
    Y = np.einsum("kij,kj->ki", C2[::2], X)
    trace = SimulationTrace(ts, X, XC, U, Y, R[::2].copy(), meta={
        "label": config.label,
        "dt": dt,
        "t_end": config.t_end,
        "integrator": "rk4",
        "feedback": "u = -C_c xc, controller input y - r",
    })
    if config.shift is not None:
        trace.physical = config.shift.to_physical(X)
        trace.physical_ref = trace.r[:, 0] + config.ref_offset
    return trace


def simulate_channel(view, u, t_end, dt, schedule=None, x0=None):
    """Open-loop response of the ``u -> y`` channel of a polytopic system.

    ``u`` is a callable of time. Returns ``(t, x, y, S, Y)`` where ``S`` holds
    the scheduling weights at the samples and ``Y[i]`` is ``C_i x``.
    """
    N = len(view)
    schedule = schedule or ConstantVertex(0, N)
    steps = int(round(t_end / dt))
    half = 0.5 * dt * np.arange(2 * steps + 1)
    S = np.array([sample_schedule(schedule, t) for t in half])
    A = np.einsum("kn,nij->kij", S, np.array(view.A))
    B = np.einsum("kn,nij->kij", S, np.array(view.B))
    U = np.array([np.atleast_1d(np.asarray(u(t), dtype=float)) for t in half])
    f = np.einsum("kij,kj->ki", B, U)
    x = np.zeros(view.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    X = np.empty((steps + 1, view.n))
    X[0] = x
    for k in range(steps):
        i = 2 * k
        k1 = A[i] @ x + f[i]
        k2 = A[i + 1] @ (x + 0.5 * dt * k1) + f[i + 1]
        k3 = A[i + 1] @ (x + 0.5 * dt * k2) + f[i + 1]
        k4 = A[i + 2] @ (x + dt * k3) + f[i + 2]
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[k + 1] = x
    Ss = S[::2]
    Y = np.einsum("nij,tj->nti", np.array(view.C), X)
    y = np.einsum("tn,nti->ti", Ss, Y)
    return dt * np.arange(steps + 1), X, y, Ss, Y, U[::2]


def interpolate_hinf(vertex_controllers, schedule=None):
    """Gain-scheduled controller blending the vertex designs with ``s(t)``.

    No stability or performance guarantee is implied.
    """
    return PolytopicController(tuple(vertex_controllers), None,
                               {"kind": "interpolated vertex H-infinity"})


def rms_error(trace):
    """Root-mean-square tracking error ``y - r`` over all samples."""
    if trace is None or len(trace) == 0:
        raise EmptyTrace("trace has no samples")
    e = trace.error
    return float(np.sqrt(np.mean(e ** 2)))


def scenario_table(results, scenarios=None):
    """Build :class:`Metrics` from ``{controller: {scenario: rms}}``.

    Every controller must have a value for every scenario. The spread is
    the sample standard deviation (``ddof=1``).
    """
    if not results:
        raise EmptyTrace("no results")
    if scenarios is None:
        scenarios = tuple(next(iter(results.values())).keys())
    rms, std = {}, {}
    for name, row in results.items():
        missing = [s for s in scenarios if s not in row]
        if missing:
            raise KeyError(f"controller {name!r} has no result for {missing}")
        vals = np.array([float(row[s]) for s in scenarios])
        rms[name] = {s: float(row[s]) for s in scenarios}
        std[name] = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return Metrics(rms, std, tuple(scenarios))


def write_trace_csv(trace, path):
    """Write ``trace`` to a path or open text file. One row per sample: time, states, controller states, u, y, r and,
    when available, physical temperatures."""
    n, nc = trace.x.shape[1], trace.xc.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"xc{i + 1}" for i in range(nc)]
              + [f"u{i + 1}" for i in range(trace.u.shape[1])]
              + [f"y{i + 1}" for i in range(trace.y.shape[1])]
              + [f"r{i + 1}" for i in range(trace.r.shape[1])])
    cols = [trace.t[:, None], trace.x, trace.xc, trace.u, trace.y, trace.r]
    if trace.physical is not None:
        header += ["T_c_out", "T_h_out", "T_c_ref"]
        cols += [trace.physical, trace.physical_ref[:, None]]
    data = np.hstack(cols)
    if hasattr(path, "write"):
        _csv_rows(path, header, data)
        return
    with open(path, "w", newline="") as fh:
        _csv_rows(fh, header, data)


def _csv_rows(fh, header, data):
    w = csv.writer(fh)
    w.writerow(header)
    for row in data:
        w.writerow([repr(float(v)) for v in row])


def write_metrics_json(metrics, path, extra=None):
    out = metrics.to_dict()
    if extra:
        out.update(extra)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")

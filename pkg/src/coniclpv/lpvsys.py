"""Polytopic state-space models and scheduling signals."""

import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import DimensionMismatch, NotOnSimplex

__all__ = [
    "GeneralizedVertex",
    "PolytopicModel",
    "ConicChannelView",
    "ConstantVertex",
    "SmoothStepPair",
    "PiecewiseLinearTable",
    "smooth_step",
    "validate",
    "evaluate",
    "sample_schedule",
    "check_simplex",
]

_CHANNELS = ("A", "B1", "B2", "B3", "C1", "C2", "C3",
             "D11", "D12", "D13", "D21", "D22", "D31", "D32", "D33")


def _opt(M):
    return None if M is None else np.atleast_2d(np.asarray(M, dtype=float))


@dataclass(frozen=True)
class GeneralizedVertex:
    """One vertex of the generalized plant.

    Only ``A``, ``B2`` and ``C2`` are required; any other channel left as
    ``None`` has zero width and is filled in by :meth:`complete`.
    """

    A: np.ndarray
    B2: np.ndarray
    C2: np.ndarray
    B1: np.ndarray = None
    B3: np.ndarray = None
    C1: np.ndarray = None
    C3: np.ndarray = None
    D11: np.ndarray = None
    D12: np.ndarray = None
    D13: np.ndarray = None
    D21: np.ndarray = None
    D22: np.ndarray = None
    D31: np.ndarray = None
    D32: np.ndarray = None
    D33: np.ndarray = None

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _opt(getattr(self, f.name)))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B2.shape[1]

    @property
    def p(self):
        return self.C2.shape[0]

    @property
    def n_w(self):
        for M, ax in ((self.B1, 1), (self.D11, 1), (self.D21, 1), (self.D31, 1)):
            if M is not None:
                return M.shape[ax]
        return 0

    @property
    def n_z(self):
        for M in (self.C1, self.D11, self.D12, self.D13):
            if M is not None:
                return M.shape[0]
        return 0

    @property
    def n_q(self):
        for M, ax in ((self.B3, 1), (self.D13, 1), (self.D33, 1)):
            if M is not None:
                return M.shape[ax]
        return 0

    @property
    def n_p(self):
        for M in (self.C3, self.D31, self.D32, self.D33):
            if M is not None:
                return M.shape[0]
        return 0

    def complete(self):
        """Copy with every missing channel replaced by a conformal zero."""
        n, m, p = self.n, self.m, self.p
        nw, nz, nq, np_ = self.n_w, self.n_z, self.n_q, self.n_p
        shapes = {
            "B1": (n, nw), "B3": (n, nq), "C1": (nz, n), "C3": (np_, n),
            "D11": (nz, nw), "D12": (nz, m), "D13": (nz, nq), "D21": (p, nw),
            "D22": (p, m), "D31": (np_, nw), "D32": (np_, m), "D33": (np_, nq),
        }
        kw = {k: np.zeros(s) for k, s in shapes.items() if getattr(self, k) is None}
        return replace(self, **kw)

    def shapes(self):
        full = self.complete()
        return {k: getattr(full, k).shape for k in _CHANNELS}

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in _CHANNELS if getattr(self, k) is not None}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(_CHANNELS)
        if unknown:
            raise DimensionMismatch(f"unknown channel(s) {sorted(unknown)}")
        return cls(**{k: np.asarray(v, dtype=float) for k, v in d.items()})


def check_simplex(s, tol=1e-9):
    s = np.asarray(s, dtype=float).ravel()
    if s.size == 0 or np.any(s < -tol) or np.any(s > 1 + tol) or abs(s.sum() - 1.0) > tol:
        raise NotOnSimplex(f"weights {s} are not on the simplex")
    return s


def smooth_step(t, x_i, x_f, t_f):
    """Cubic blend from ``x_i`` at t <= 0 to ``x_f`` at t >= t_f."""
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    tau = np.clip(np.asarray(t, dtype=float) / t_f, 0.0, 1.0)
    out = x_i + (x_f - x_i) * (3.0 * tau**2 - 2.0 * tau**3)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConstantVertex:
    index: int
    num_vertices: int

    def __call__(self, t):
        s = np.zeros(self.num_vertices)
        s[self.index] = 1.0
        return s

    def to_dict(self):
        return {"type": "constant", "vertex": self.index, "num_vertices": self.num_vertices}


@dataclass(frozen=True)
class SmoothStepPair:
    """Two-vertex schedule ``s1 = phi(t, 1, 0)``, ``s2 = 1 - s1``."""

    t_f: float

    def __call__(self, t):
        s1 = smooth_step(t, 1.0, 0.0, self.t_f)
        return np.array([s1, 1.0 - s1])

    def to_dict(self):
        return {"type": "smooth_step_pair", "t_f": self.t_f}


@dataclass(frozen=True)
class PiecewiseLinearTable:
    times: tuple
    points: tuple = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if times.ndim != 1 or pts.shape[0] != times.size or np.any(np.diff(times) <= 0):
            raise DimensionMismatch("table needs increasing times and one point per time")
        for row in pts:
            check_simplex(row)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", pts)

    def __call__(self, t):
        if t > self.times[-1] or t < self.times[0]:
            warnings.warn(f"t={t} outside the schedule table; clamping", RuntimeWarning)
        t = np.clip(t, self.times[0], self.times[-1])
        s = np.array([np.interp(t, self.times, col) for col in self.points.T])
        return s / s.sum()

    def to_dict(self):
        return {"type": "table", "times": self.times.tolist(), "weights": self.points.tolist()}


def schedule_from_dict(d, num_vertices):
    kind = d.get("type")
    if kind == "constant":
        return ConstantVertex(int(d["vertex"]), num_vertices)
    if kind == "smooth_step_pair":
        return SmoothStepPair(float(d["t_f"]))
    if kind == "table":
        return PiecewiseLinearTable(d["times"], d["weights"])
    raise ValueError(f"unknown schedule type {kind!r}")


def sample_schedule(signal, t):
    if t < 0:
        raise ValueError("schedules are defined for t >= 0")
    s = np.clip(signal(t), 0.0, 1.0)
    return s / s.sum()


@dataclass(frozen=True)
class ConicChannelView:
    """Per-vertex ``(A_i, B2_i, C2_i)`` of the ``u -> y`` channel."""

    A: tuple
    B: tuple
    C: tuple

    def __post_init__(self):
        A = tuple(np.atleast_2d(np.asarray(M, dtype=float)) for M in self.A)
        B = tuple(np.atleast_2d(np.asarray(M, dtype=float)) for M in self.B)
        C = tuple(np.atleast_2d(np.asarray(M, dtype=float)) for M in self.C)
        if not (len(A) == len(B) == len(C) >= 1):
            raise DimensionMismatch("need matching, non-empty vertex lists")
        n, m = B[0].shape
        for Ai, Bi, Ci in zip(A, B, C):
            if Ai.shape != (n, n) or Bi.shape != (n, m) or Ci.shape != (m, n):
                raise DimensionMismatch("channel must be square with shared dimensions")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def m(self):
        return self.B[0].shape[1]

    def __len__(self):
        return len(self.A)

    def vertices(self):
        return list(zip(self.A, self.B, self.C))

    @classmethod
    def lti(cls, A, B, C):
        return cls((A,), (B,), (C,))


@dataclass(frozen=True)
class PolytopicModel:
    vertices: tuple
    labels: tuple = None
    schedule: object = None

    def __post_init__(self):
        verts = tuple(v if isinstance(v, GeneralizedVertex) else GeneralizedVertex(**v)
                      for v in self.vertices)
        if not verts:
            raise DimensionMismatch("a polytopic model needs at least one vertex")
        object.__setattr__(self, "vertices", verts)
        labels = self.labels or tuple(f"vertex{i + 1}" for i in range(len(verts)))
        object.__setattr__(self, "labels", tuple(labels))

    def __len__(self):
        return len(self.vertices)

    @property
    def n(self):
        return self.vertices[0].n

    @property
    def m(self):
        return self.vertices[0].m

    def conic_view(self):
        bad = validate(self)
        if bad:
            raise DimensionMismatch("; ".join(bad))
        if self.vertices[0].p != self.m:
            raise DimensionMismatch("conic channel must be square (dim y == dim u)")
        return ConicChannelView(tuple(v.A for v in self.vertices),
                                tuple(v.B2 for v in self.vertices),
                                tuple(v.C2 for v in self.vertices))

    def to_dict(self):
        out = {"n": self.n, "m": self.m, "labels": list(self.labels),
               "vertices": [v.to_dict() for v in self.vertices]}
        if self.schedule is not None and hasattr(self.schedule, "to_dict"):
            out["schedule"] = self.schedule.to_dict()
        return out

    @classmethod
    def from_dict(cls, d):
        """Build from the JSON model layout; ``n`` and ``m`` are checked."""
        if not isinstance(d, dict) or not isinstance(d.get("vertices"), list):
            raise DimensionMismatch("model needs a 'vertices' list")
        verts = tuple(GeneralizedVertex.from_dict(v) for v in d["vertices"])
        sched = d.get("schedule")
        model = cls(verts, d.get("labels"),
                    schedule_from_dict(sched, len(verts)) if sched else None)
        bad = validate(model)
        if bad:
            raise DimensionMismatch("; ".join(bad))
        for key in ("n", "m"):
            if key in d and int(d[key]) != getattr(model, key):
                raise DimensionMismatch(f"declared {key}={d[key]} does not match the vertices")
        return model

    def perturbed(self, Delta):
        """Close the uncertainty channel ``q = Delta p`` into every vertex.

        Requires D33 = 0 (true for all models built here).
        """
        Delta = np.atleast_2d(np.asarray(Delta, dtype=float))
        out = []
        for v in self.vertices:
            f = v.complete()
            if np.any(f.D33):
                raise DimensionMismatch("perturbed() requires D33 == 0")
            out.append(replace(
                v,
                A=f.A + f.B3 @ Delta @ f.C3,
                B2=f.B2 + f.B3 @ Delta @ f.D32,
            ))
        return replace(self, vertices=tuple(out))


def validate(model):
    """List of human-readable problems; empty when the model is well formed."""
    issues = []
    ref = model.vertices[0].shapes()
    for i, v in enumerate(model.vertices):
        try:
            shp = v.shapes()
        except Exception as exc:  # malformed beyond shape inspection
            issues.append(f"vertex {i}: {exc}")
            continue
        n, m, p = v.n, v.m, v.p
        if v.A.shape != (n, n):
            issues.append(f"vertex {i}: A is not square")
        expected = {
            "B1": (n, None), "B2": (n, m), "B3": (n, None), "C1": (None, n),
            "C2": (p, n), "C3": (None, n),
        }
        for k, (r, c) in expected.items():
            R, C = shp[k]
            if (r is not None and R != r) or (c is not None and C != c):
                issues.append(f"vertex {i}: {k} has shape {(R, C)}")
        nz, nw, nq, np_ = shp["C1"][0], shp["B1"][1], shp["B3"][1], shp["C3"][0]
        for k, want in (("D11", (nz, nw)), ("D12", (nz, m)), ("D13", (nz, nq)),
                        ("D21", (p, nw)), ("D22", (p, m)), ("D31", (np_, nw)),
                        ("D32", (np_, m)), ("D33", (np_, nq))):
            if shp[k] != want:
                issues.append(f"vertex {i}: {k} has shape {shp[k]}, expected {want}")
        if v.D22 is not None and np.any(v.D22):
            issues.append(f"vertex {i}: D22 must be zero")
        if shp != ref:
            diff = sorted(k for k in shp if shp[k] != ref[k])
            issues.append(f"vertex {i}: dimensions differ from vertex 0 in {diff}")
    return issues


def evaluate(model, s):
    """Convex combination of the vertices with weights ``s``."""
    s = check_simplex(s)
    if s.size != len(model):
        raise NotOnSimplex(f"expected {len(model)} weights, got {s.size}")
    full = [v.complete() for v in model.vertices]
    kw = {k: sum(si * getattr(v, k) for si, v in zip(s, full)) for k in _CHANNELS}
    return GeneralizedVertex(**kw)

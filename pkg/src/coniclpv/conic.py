"""Interior-conic bounds of polytopic systems.

A square system G is in cone[a, b] when, for every input and horizon T,

    -||y||_T^2 + (a + b) <y, u>_T - a b ||u||_T^2 >= beta.

For the polytopic channel ``(A_i, B_i, C_i)`` this is certified by one
common ``P > 0`` making a 2x2 block LMI negative semidefinite at every
vertex. Two equivalent scalings are used: the direct form with ``P`` and the
form divided by ``b`` (variable ``Pt = P / b``) which stays well conditioned
for large or infinite ``b``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import lmi, matcore
from .errors import BadSector, LengthMismatch, NegativeGain, Uncertified
from .lpvsys import ConicChannelView
from .sdp import SolverOptions

__all__ = [
    "ConicSector",
    "ConeCertificate",
    "cone_blocks",
    "certify_cone",
    "recheck",
    "max_a_given_b",
    "min_b_given_a",
    "bounds_min_radius",
    "bounds_max_a",
    "bounds_min_b",
    "empirical_cone_check",
    "lemma1_check",
    "small_gain_check",
    "nyquist_in_sector",
]

AUTO_SWITCH_B = 1e3
A_MARGIN = 1e-6
B_REL_MARGIN = 1e-6
R_REL_MARGIN = 1e-6
# the first-stage optimum leaves the second stage with a flat feasible set;
# backing off by this relative amount keeps the second bound finite
STAGE_REL_MARGIN = 1e-3


@dataclass(frozen=True)
class ConicSector:
    a: float
    b: float = math.inf

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if math.isnan(a) or math.isnan(b) or not a < b:
            raise BadSector(f"need a < b, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_centre_radius(cls, c, r):
        return cls(c - r, c + r)

    @property
    def finite(self):
        return math.isfinite(self.a) and math.isfinite(self.b)

    @property
    def centre(self):
        return 0.5 * (self.a + self.b)

    @property
    def radius(self):
        return 0.5 * (self.b - self.a)

    @property
    def kappa(self):
        return -self.a * self.b

    def contains(self, other):
        """True if ``other`` is a subset of this sector."""
        return self.a <= other.a and other.b <= self.b

    def to_list(self):
        return [self.a, self.b if math.isfinite(self.b) else "inf"]


def _sector_from_json(val):
    a, b = val
    return ConicSector(float(a), float(b))


@dataclass(frozen=True)
class ConeCertificate:
    """``P`` is the unscaled storage matrix or ``Pt = P / b`` for the scaled form."""

    sector: ConicSector
    P: np.ndarray
    residuals: tuple
    method: str
    solver: dict = field(default_factory=dict)

    def theorem2_P(self):
        if self.method == "theorem2":
            return self.P
        return self.sector.b * self.P

    def functional_P(self):
        """Storage matrix matching :func:`empirical_cone_check` scaling."""
        return self.theorem2_P() if math.isfinite(self.sector.b) else self.P

    @property
    def worst_residual(self):
        return max(self.residuals)

    def to_dict(self):
        return {
            "sector": self.sector.to_list(),
            "method": self.method,
            "P": self.P.tolist(),
            "vertex_max_eigenvalues": list(self.residuals),
            "P_min_eigenvalue": float(np.linalg.eigvalsh(self.P)[0]),
            "solver": self.solver,
        }


def _form_for(a, b, form):
    if form == "auto":
        return "corollary2" if (not math.isfinite(b) or b > AUTO_SWITCH_B) else "theorem2"
    if form not in ("theorem2", "corollary2"):
        raise ValueError(f"unknown form {form!r}")
    if form == "theorem2" and not math.isfinite(b):
        raise BadSector("theorem2 needs a finite b; use corollary2")
    return form


def cone_blocks(view, sector, P, form):
    """Numeric vertex blocks (should be <= 0) for a given storage matrix."""
    a, b = sector.a, sector.b
    out = []
    for A, B, C in view.vertices():
        if form == "theorem2":
            M11 = P @ A + A.T @ P + C.T @ C
            M21 = B.T @ P - 0.5 * (a + b) * C
            M22 = a * b * np.eye(B.shape[1])
        else:
            beta = 0.0 if not math.isfinite(b) else 1.0 / b
            M11 = P @ A + A.T @ P + beta * C.T @ C
            M21 = B.T @ P - 0.5 * (a * beta + 1.0) * C
            M22 = a * np.eye(B.shape[1])
        out.append(np.block([[M11, M21.T], [M21, M22]]))
    return out


def recheck(view, cert):
    """Independent eigenvalue re-check of a certificate.

    Returns ``(min_eig(P), worst vertex value)`` where the vertex value is the
    smallest eigenvalue of the negated block (>= 0 for an exact certificate).
    """
    blocks = cone_blocks(view, cert.sector, cert.P, cert.method)
    worst = min(matcore.min_eig(-M) for M in blocks)
    return matcore.min_eig(cert.P), worst


def _cone_program(view, form, a=None, b=None, var_a=False, var_beta=False):
    prog = lmi.LmiProgram()
    n, m = view.n, view.m
    P = prog.symmetric(n, name="P")
    prog.add_psd([[P]], strict=True, name="P>0")
    a_var = prog.scalar("a") if var_a else None
    beta_var = prog.scalar("beta") if var_beta else None
    I = np.eye(m)
    for i, (A, B, C) in enumerate(view.vertices()):
        if form == "theorem2":
            M11 = P @ A + A.T @ P + C.T @ C
            M21 = B.T @ P - 0.5 * (a + b) * C
            M22 = a * b * I
        else:
            beta = beta_var if var_beta else (0.0 if not math.isfinite(b) else 1.0 / b)
            av = a_var if var_a else a
            if var_beta:
                M11 = P @ A + A.T @ P + beta_var * (C.T @ C)
                M21 = B.T @ P - 0.5 * C - (0.5 * av) * (beta_var * C)
            elif var_a:
                M11 = P @ A + A.T @ P + beta * (C.T @ C)
                M21 = B.T @ P - 0.5 * C - (0.5 * beta) * (a_var * C)
            else:
                M11 = P @ A + A.T @ P + beta * (C.T @ C)
                M21 = B.T @ P - 0.5 * (av * beta + 1.0) * C
            M22 = a_var * I if var_a else av * I
        prog.add_nsd([[M11], [M21, M22]], name=f"vertex{i + 1}")
    return prog, P, a_var, beta_var


def _stats(sol):
    return {
        "status": sol.status.value,
        "iterations": sol.sdp.iterations,
        "min_eig": sol.sdp.min_eig,
    }


def certify_cone(view, a, b=math.inf, form="auto", opts=None):
    """Certify ``G in cone[a, b]`` or raise :class:`Uncertified`."""
    opts = opts or SolverOptions()
    if not isinstance(view, ConicChannelView):
        view = view.conic_view()
    sector = ConicSector(a, b)
    if not sector.a < 0 < sector.b:
        raise BadSector(f"plant certification needs a < 0 < b, got [{a}, {b}]")
    form = _form_for(sector.a, sector.b, form)
    prog, P, _, _ = _cone_program(view, form, sector.a, sector.b)
    sol = prog.solve(opts)
    if sol.status.value == "NumericalFailure" and form == "theorem2":
        # same condition with P scaled by 1/b, usually better conditioned
        form = "corollary2"
        prog, P, _, _ = _cone_program(view, form, sector.a, sector.b)
        sol = prog.solve(opts)
    if not sol.ok:
        raise Uncertified(f"cone[{a}, {b}] not certified ({sol.status.value})")
    Pv = sol.value(P)
    blocks = cone_blocks(view, sector, Pv, form)
    residuals = tuple(float(np.linalg.eigvalsh(M)[-1]) for M in blocks)
    cert = ConeCertificate(sector, Pv, residuals, form, _stats(sol))
    pmin, worst = recheck(view, cert)
    if pmin <= 0 or worst < -10 * opts.feas_tol:
        raise Uncertified(f"certificate failed re-check (min P eig {pmin:.2e}, worst {worst:.2e})")
    return cert


def max_a_given_b(view, b=math.inf, opts=None):
    """Largest certifiable lower bound for a fixed upper bound ``b``."""
    opts = opts or SolverOptions()
    if not isinstance(view, ConicChannelView):
        view = view.conic_view()
    if not b > 0:
        raise BadSector("b must be positive")
    prog, P, a_var, _ = _cone_program(view, "corollary2", b=b, var_a=True)
    prog.maximize(a_var)
    sol = prog.solve(opts)
    if sol.status.value != "Optimal":
        raise Uncertified(f"max-a stage failed ({sol.status.value})")
    a_opt = float(sol.value(a_var)[0, 0])
    a_star = a_opt - A_MARGIN
    if not a_star < 0:
        raise Uncertified(f"optimal a = {a_opt} is not negative")
    return a_star, certify_cone(view, a_star, b, "corollary2", opts)


def min_b_given_a(view, a, opts=None):
    """Smallest certifiable upper bound for a fixed lower bound ``a``.

    ``a = -inf`` gives the one-sided bound (stage one of the min-b method).
    """
    opts = opts or SolverOptions()
    if not isinstance(view, ConicChannelView):
        view = view.conic_view()
    if math.isinf(a) and a < 0:
        # G in cone(-inf, b] <=> the mirrored system -G is in cone[-b, inf)
        mirrored = ConicChannelView(view.A, tuple(-B for B in view.B), view.C)
        prog, P, a_var, _ = _cone_program(mirrored, "corollary2", b=math.inf, var_a=True)
        prog.maximize(a_var)
        sol = prog.solve(opts)
        if sol.status.value != "Optimal":
            raise Uncertified(f"min-b stage failed ({sol.status.value})")
        b_opt = -float(sol.value(a_var)[0, 0])
        b_star = b_opt + A_MARGIN
        if not b_star > 0:
            raise Uncertified(f"optimal b = {b_opt} is not positive")
        # only the one-sided certificate exists; report it on the mirrored view
        cert = certify_cone(mirrored, -b_star, math.inf, "corollary2", opts)
        return b_star, cert
    if not a < 0:
        raise BadSector("a must be negative")
    prog, P, _, beta_var = _cone_program(view, "corollary2", a=a, var_beta=True)
    prog.maximize(beta_var)
    sol = prog.solve(opts)
    if sol.status.value != "Optimal":
        raise Uncertified(f"min-b stage failed ({sol.status.value})")
    beta = float(sol.value(beta_var)[0, 0])
    if not beta > 0:
        raise Uncertified(f"no finite b for a={a} (optimal 1/b = {beta})")
    b_star = (1.0 / beta) * (1.0 + B_REL_MARGIN)
    return b_star, certify_cone(view, a, b_star, "auto", opts)


def bounds_max_a(view, opts=None, stage_margin=STAGE_REL_MARGIN):
    """b = inf, maximize a; then fix a and minimize b."""
    a, _ = max_a_given_b(view, math.inf, opts)
    a *= 1.0 + stage_margin
    b, cert = min_b_given_a(view, a, opts)
    return cert.sector, cert


def bounds_min_b(view, opts=None, stage_margin=STAGE_REL_MARGIN):
    """a = -inf, minimize b; then fix b and maximize a."""
    b, _ = min_b_given_a(view, -math.inf, opts)
    b *= 1.0 + stage_margin
    a, cert = max_a_given_b(view, b, opts)
    return cert.sector, cert


def bounds_min_radius(view, opts=None):
    """Sector of minimum radius via the centre/kappa parameterization."""
    opts = opts or SolverOptions()
    if not isinstance(view, ConicChannelView):
        view = view.conic_view()
    prog = lmi.LmiProgram()
    n, m = view.n, view.m
    P = prog.symmetric(n, name="P")
    c = prog.scalar("c")
    kappa = prog.scalar("kappa")
    z = prog.scalar("z")
    prog.add_psd([[P]], strict=True, name="P>0")
    for i, (A, B, C) in enumerate(view.vertices()):
        M11 = P @ A + A.T @ P + C.T @ C
        M21 = B.T @ P - c * C
        prog.add_nsd([[M11], [M21, -kappa * np.eye(m)]], name=f"vertex{i + 1}")
    prog.add_psd([[z - kappa], [c, 1.0]], name="radius")
    prog.minimize(z)
    sol = prog.solve(opts)
    if sol.status.value != "Optimal":
        raise Uncertified(f"min-radius problem failed ({sol.status.value})")
    cv = float(sol.value(c)[0, 0])
    zv = float(sol.value(z)[0, 0])
    r = math.sqrt(max(zv, 0.0)) * (1.0 + R_REL_MARGIN)
    cert = certify_cone(view, cv - r, cv + r, "auto", opts)
    cert.solver.update({"c": cv, "kappa": float(sol.value(kappa)[0, 0]), "z": zv})
    return cert.sector, cert


def _cumtrapz(f, dt):
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1])) * dt
    return out


def _as_signal(x, name):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def empirical_cone_check(u, y, x0, P, sector, dt):
    """Worst value over sampled horizons of the cone functional minus beta.

    ``P`` is the unscaled storage matrix for finite ``b``; for ``b = inf`` the
    functional is divided by ``b`` and ``P`` is the scaled ``Pt``.
    Trapezoidal quadrature.
    """
    u = _as_signal(u, "u")
    y = _as_signal(y, "y")
    if u.shape != y.shape:
        raise LengthMismatch(f"u has shape {u.shape}, y has shape {y.shape}")
    x0 = np.asarray(x0, dtype=float).ravel()
    P = np.atleast_2d(P)
    if P.shape != (x0.size, x0.size):
        raise LengthMismatch("x0 does not match P")
    yy = _cumtrapz(np.einsum("ti,ti->t", y, y), dt)
    yu = _cumtrapz(np.einsum("ti,ti->t", y, u), dt)
    uu = _cumtrapz(np.einsum("ti,ti->t", u, u), dt)
    a, b = sector.a, sector.b
    if math.isfinite(b):
        F = -yy + (a + b) * yu - a * b * uu
    else:
        F = yu - a * uu
    beta = -float(x0 @ P @ x0)
    return float(np.min(F - beta))


def lemma1_check(s, ys, dt, tol=1e-12):
    """Check ``||sum s_i y_i||_T^2 <= sum ||sqrt(s_i) y_i||_T^2`` for every T.

    ``s`` has shape (T, N); ``ys`` has shape (N, T, m).
    """
    s = np.asarray(s, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 2:
        ys = ys[:, :, None]
    if s.ndim != 2 or ys.shape[:2] != (s.shape[1], s.shape[0]):
        raise LengthMismatch(f"s has shape {s.shape}, outputs have shape {ys.shape}")
    y = np.einsum("ti,itk->tk", s, ys)
    lhs = _cumtrapz(np.einsum("tk,tk->t", y, y), dt)
    rhs = _cumtrapz(np.einsum("ti,itk,itk->t", s, ys, ys), dt)
    scale = 1.0 + np.abs(rhs)
    return bool(np.all(-lhs >= -rhs - tol * scale))


def small_gain_check(gamma1, gamma2):
    if gamma1 < 0 or gamma2 < 0:
        raise NegativeGain("gains must be non-negative")
    return gamma1 * gamma2 < 1.0


def nyquist_in_sector(view, sector, omegas, tol=1e-6):
    """For SISO vertices: every frequency-response point lies in the disk
    (or half-plane when b is infinite) described by the sector."""
    for A, B, C in view.vertices():
        for w in omegas:
            g = matcore.frequency_response(A, B, C, w)[0, 0]
            if math.isfinite(sector.b):
                if abs(g - sector.centre) > sector.radius * (1 + tol) + tol:
                    return False
            elif g.real < sector.a - tol:
                return False
    return True

"""Polytopic conic controller synthesis.

Pipeline: an H-infinity output-feedback controller is designed at every
plant vertex; the controller's dynamics and output matrices are kept, and
the input matrices are re-optimized jointly (one common Lyapunov matrix) so
that the polytopic controller lies strictly inside the cone required by the
conic sector theorem. The re-optimization minimizes the Gramian-weighted
(H2) distance to the H-infinity input matrices.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import conic, lmi, matcore
from .conic import ConicSector
from .errors import (
    DegenerateSector,
    DimensionMismatch,
    GramianSingular,
    NotHurwitz,
    NotStabilizable,
    SynthesisInfeasible,
)
from .lpvsys import ConicChannelView, GeneralizedVertex, check_simplex
from .sdp import SolverOptions

__all__ = [
    "VertexController",
    "PolytopicController",
    "SynthesisResult",
    "controller_cone_from_plant",
    "design_sector",
    "robust_design_plant",
    "design_plant",
    "regularize",
    "hinf_vertex_synthesis",
    "closed_loop",
    "observability_gramian",
    "projection_cost",
    "conic_projection",
    "certify_controller",
]

GRAMIAN_INV_TOL = 1e-10
# keeps the bounded-real LMI compact when the optimal level is zero
LYAP_BOUND = 1e6


@dataclass(frozen=True)
class VertexController:
    """Strictly proper controller ``(A_c, B_c, C_c)``; ``D_c = 0``."""

    A_c: np.ndarray
    B_c: np.ndarray
    C_c: np.ndarray

    def __post_init__(self):
        A = matcore.as_matrix(self.A_c, "A_c")
        B = matcore.as_matrix(self.B_c, "B_c")
        C = matcore.as_matrix(self.C_c, "C_c")
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch(
                f"inconsistent controller shapes {A.shape}, {B.shape}, {C.shape}")
        object.__setattr__(self, "A_c", A)
        object.__setattr__(self, "B_c", B)
        object.__setattr__(self, "C_c", C)

    @property
    def order(self):
        return self.A_c.shape[0]

    @property
    def n_in(self):
        return self.B_c.shape[1]

    @property
    def n_out(self):
        return self.C_c.shape[0]

    def is_stable(self):
        return matcore.is_hurwitz(self.A_c)

    def to_dict(self):
        return {"A_c": self.A_c.tolist(), "B_c": self.B_c.tolist(), "C_c": self.C_c.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["A_c"], float), np.asarray(d["B_c"], float),
                   np.asarray(d["C_c"], float))


@dataclass(frozen=True)
class PolytopicController:
    vertices: tuple
    sector: ConicSector = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        verts = tuple(v if isinstance(v, VertexController) else VertexController.from_dict(v)
                      for v in self.vertices)
        if not verts:
            raise DimensionMismatch("controller needs at least one vertex")
        ref = (verts[0].A_c.shape, verts[0].B_c.shape, verts[0].C_c.shape)
        for v in verts[1:]:
            if (v.A_c.shape, v.B_c.shape, v.C_c.shape) != ref:
                raise DimensionMismatch("controller vertices must share dimensions")
        object.__setattr__(self, "vertices", verts)

    def __len__(self):
        return len(self.vertices)

    def at(self, s):
        """Controller matrices blended with scheduling weights ``s``."""
        s = check_simplex(s)
        if s.size != len(self):
            raise DimensionMismatch(f"expected {len(self)} weights, got {s.size}")
        return VertexController(
            sum(si * v.A_c for si, v in zip(s, self.vertices)),
            sum(si * v.B_c for si, v in zip(s, self.vertices)),
            sum(si * v.C_c for si, v in zip(s, self.vertices)),
        )

    def conic_view(self):
        return ConicChannelView(tuple(v.A_c for v in self.vertices),
                                tuple(v.B_c for v in self.vertices),
                                tuple(v.C_c for v in self.vertices))

    def scaled(self, k):
        """Same dynamics with the output gain multiplied by ``k``."""
        return PolytopicController(
            tuple(VertexController(v.A_c, v.B_c, k * v.C_c) for v in self.vertices),
            None, dict(self.provenance))

    def to_dict(self):
        return {
            "vertices": [v.to_dict() for v in self.vertices],
            "sector": None if self.sector is None else self.sector.to_list(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        sector = d.get("sector")
        if sector is not None:
            a, b = sector
            sector = ConicSector(float(a), float(b))
        return cls(tuple(VertexController.from_dict(v) for v in d["vertices"]),
                   sector, d.get("provenance", {}))


@dataclass(frozen=True)
class SynthesisResult:
    controller: PolytopicController
    Pi: np.ndarray
    nu: float
    Z: np.ndarray
    gramians: tuple
    sector: ConicSector
    cost: float
    hinf_controllers: tuple = ()
    info: dict = field(default_factory=dict)


def controller_cone_from_plant(plant_sector, margin=1e-3):
    """Controller sector strictly inside ``cone(-1/b, -1/a)``.

    Both ends are pulled towards zero by the relative ``margin``:
    ``a_c = -(1 - margin) / b`` and ``b_c = -(1 - margin) / a``.
    """
    a, b = plant_sector.a, plant_sector.b
    if not (a < 0 < b):
        raise DegenerateSector(f"plant sector needs a < 0 < b, got [{a}, {b}]")
    if not math.isfinite(a) or not math.isfinite(b):
        raise DegenerateSector("plant sector must be finite on both sides")
    if not 0 < margin < 1:
        raise ValueError("margin must lie in (0, 1)")
    return ConicSector(-(1.0 - margin) / b, -(1.0 - margin) / a)


def design_sector(sectors):
    """Smallest sector containing every sector in ``sectors``."""
    sectors = list(sectors)
    if not sectors:
        raise ValueError("need at least one sector")
    return ConicSector(min(s.a for s in sectors), max(s.b for s in sectors))


def robust_design_plant(vertex):
    """Generalized plant whose performance channel is the uncertainty loop.

    ``w = q`` enters through ``B3`` and ``z = p`` leaves through ``C3``.
    """
    f = vertex.complete()
    if f.n_q == 0 or f.n_p == 0:
        raise DimensionMismatch("vertex has no uncertainty channel")
    return GeneralizedVertex(A=f.A, B2=f.B2, C2=f.C2, B1=f.B3, C1=f.C3,
                             D11=f.D33, D12=f.D32, D21=np.zeros((f.p, f.n_q)))


def design_plant(vertex):
    """Performance channel used for vertex H-infinity synthesis.

    The uncertainty loop when the vertex has one, otherwise the declared
    ``w -> z`` channel, otherwise an input disturbance seen at the output
    (``B1 = B2``, ``C1 = C2``).
    """
    f = vertex.complete()
    if f.n_q and f.n_p:
        return robust_design_plant(f)
    if f.n_w and f.n_z:
        return f
    return GeneralizedVertex(A=f.A, B2=f.B2, C2=f.C2, B1=f.B2, C1=f.C2,
                             D11=np.zeros((f.p, f.m)), D12=np.zeros((f.p, f.m)),
                             D21=np.zeros((f.p, f.m)))


def regularize(vertex, eps_u=1e-2, eps_n=1e-2):
    """Append ``eps_u u`` to the performance output and a measurement-noise
    input weighted by ``eps_n`` (so D12 and D21 have full rank)."""
    f = vertex.complete()
    n, m, p, nw, nz = f.n, f.m, f.p, f.n_w, f.n_z
    return GeneralizedVertex(
        A=f.A, B2=f.B2, C2=f.C2,
        B1=np.hstack([f.B1, np.zeros((n, p))]),
        C1=np.vstack([f.C1, np.zeros((m, n))]),
        D11=np.block([[f.D11, np.zeros((nz, p))], [np.zeros((m, nw + p))]]),
        D12=np.vstack([f.D12, eps_u * np.eye(m)]),
        D21=np.hstack([f.D21, eps_n * np.eye(p)]),
    )


def closed_loop(plant, ctrl):
    """``w -> z`` closed loop of a plant with ``u = C_K x_K``,
    ``dx_K/dt = A_K x_K + B_K y`` (positive feedback)."""
    f = plant.complete()
    A_K, B_K, C_K = ctrl
    A = np.block([[f.A, f.B2 @ C_K], [B_K @ f.C2, A_K]])
    B = np.vstack([f.B1, B_K @ f.D21])
    C = np.hstack([f.C1, f.D12 @ C_K])
    return A, B, C, f.D11


def _hinf_lmi(f, gamma=None, bound=None):
    n, m, p, nw, nz = f.n, f.m, f.p, f.n_w, f.n_z
    prog = lmi.LmiProgram()
    X = prog.symmetric(n, "X")
    Y = prog.symmetric(n, "Y")
    Ah = prog.rectangular(n, n, "A_hat")
    Bh = prog.rectangular(n, p, "B_hat")
    Ch = prog.rectangular(m, n, "C_hat")
    g = prog.scalar("gamma") if gamma is None else gamma
    mu = prog.scalar("mu") if gamma is not None else 0.0
    I = np.eye(n)
    M11 = f.A @ X + X @ f.A.T + f.B2 @ Ch + (f.B2 @ Ch).T
    M21 = Ah + f.A.T
    M22 = f.A.T @ Y + Y @ f.A + Bh @ f.C2 + (Bh @ f.C2).T
    M31 = f.B1.T
    M32 = (Y @ f.B1 + Bh @ f.D21).T
    M41 = f.C1 @ X + f.D12 @ Ch
    grid = [
        [M11 + mu * I],
        [M21, M22 + mu * I],
        [M31, M32, -g * np.eye(nw) + mu * np.eye(nw)],
        [M41, f.C1, f.D11, -g * np.eye(nz) + mu * np.eye(nz)],
    ]
    prog.add_nsd(grid, strict=True, name="bounded-real")
    prog.add_psd([[X - mu * I], [np.eye(n), Y - mu * I]], strict=True, name="coupling")
    if bound is not None:
        prog.add_nsd([[X - bound * I]], name="X bound")
        prog.add_nsd([[Y - bound * I]], name="Y bound")
    return prog, (X, Y, Ah, Bh, Ch), g, mu


def _reconstruct(f, X, Y, Ah, Bh, Ch):
    N = np.eye(f.n) - Y @ X
    B_K = matcore.solve_linear(N, Bh)
    A_K = matcore.solve_linear(N, Ah - Bh @ f.C2 @ X - Y @ f.B2 @ Ch - Y @ f.A @ X)
    return A_K, B_K, Ch


def hinf_vertex_synthesis(vertex, eps_u=1e-2, eps_n=1e-2, gamma_tol=1e-2, opts=None):
    """Output-feedback H-infinity controller for one vertex.

    The optimal level ``gamma*`` of the bounded-real LMI (linearizing change
    of variables) is found first; the controller is then built at
    ``(1 + gamma_tol) gamma*`` from the most interior solution with bounded
    ``X`` and ``Y``, which keeps the reconstruction well conditioned.

    Returns ``(VertexController, gamma)`` with ``gamma`` the closed-loop
    H-infinity norm measured afterwards. In the returned controller
    ``u = -C_c x_c``, i.e. ``C_c`` is the negated design gain.
    """
    opts = opts or SolverOptions()
    f = regularize(vertex, eps_u, eps_n).complete() if (eps_u or eps_n) else vertex.complete()
    if np.any(f.D22):
        raise DimensionMismatch("D22 must be zero")
    prog, (X, Y, Ah, Bh, Ch), g, _ = _hinf_lmi(f, bound=LYAP_BOUND)
    prog.minimize(g)
    sol = prog.solve(opts)
    if not sol.ok:
        raise NotStabilizable(f"bounded-real LMI failed ({sol.status.value})")
    g_opt = float(sol.value(g)[0, 0])
    scale = max(np.abs(sol.value(X)).max(), np.abs(sol.value(Y)).max(), 1.0)
    g_rel = max(g_opt, 0.0) * (1.0 + gamma_tol) + 1e-6
    prog2, (X, Y, Ah, Bh, Ch), _, mu = _hinf_lmi(f, g_rel, bound=10.0 * scale)
    prog2.maximize(mu)
    sol2 = prog2.solve(opts)
    if not sol2.ok:
        raise SynthesisInfeasible(f"relaxed bounded-real LMI failed ({sol2.status.value})")
    A_K, B_K, C_K = _reconstruct(f, *(sol2.value(v) for v in (X, Y, Ah, Bh, Ch)))
    Acl, Bcl, Ccl, Dcl = closed_loop(f, (A_K, B_K, C_K))
    if not matcore.is_hurwitz(Acl):
        raise SynthesisInfeasible("reconstructed controller does not stabilize the vertex")
    gamma = matcore.hinf_norm(Acl, Bcl, Ccl, Dcl, tol=1e-7)
    return VertexController(A_K, B_K, -C_K), gamma


def observability_gramian(ctrl):
    """``W`` with ``A_c^T W + W A_c + C_c^T C_c = 0``; must be invertible."""
    if not matcore.is_hurwitz(ctrl.A_c):
        raise NotHurwitz("controller A_c must be Hurwitz")
    W = matcore.lyapunov_solve(ctrl.A_c, ctrl.C_c.T @ ctrl.C_c)
    w = np.linalg.eigvalsh(W)
    if w[0] <= GRAMIAN_INV_TOL * max(abs(w[-1]), np.finfo(float).tiny):
        raise GramianSingular(f"Gramian min eigenvalue {w[0]:.2e} (unobservable controller)")
    return W


def _inverse_spd(W):
    try:
        cf = scipy.linalg.cho_factor(W)
    except np.linalg.LinAlgError as exc:
        raise GramianSingular(str(exc)) from exc
    Wi = scipy.linalg.cho_solve(cf, np.eye(W.shape[0]))
    return 0.5 * (Wi + Wi.T)


def projection_cost(B_list, L_list, gramians):
    """``sum_i trace((B_i - L_i)^T W_i (B_i - L_i))``."""
    return float(sum(np.trace((B - L).T @ W @ (B - L))
                     for B, L, W in zip(B_list, L_list, gramians)))


def _design_blocks(A_c, B_c, C_c, Pi, sector):
    """Terms of the controller cone condition in the ``Pi = P^{-1}`` form."""
    a, b = sector.a, sector.b
    k = 0.5 * (a / b + 1.0)
    m_out, m_in = C_c.shape[0], B_c.shape[1]
    return [
        [A_c @ Pi + Pi @ A_c.T],
        [C_c @ Pi, -b * np.eye(m_out)],
        [(B_c - k * Pi @ C_c.T).T, np.zeros((m_in, m_out)), a * np.eye(m_in)],
    ]


def conic_projection(controllers, sector, opts=None):
    """Re-optimize the controller input matrices into ``sector``.

    ``controllers`` are the vertex H-infinity designs ``(A_c,i, L_i, K_i)``;
    the result keeps ``A_c,i`` and ``C_c,i = K_i`` and picks ``B_c,i`` with
    one common ``Pi > 0`` so the controller is strictly inside ``sector``,
    minimizing the Gramian-weighted distance to the ``L_i``.
    """
    opts = opts or SolverOptions()
    if not (sector.a < 0 < sector.b) or not math.isfinite(sector.b):
        raise DegenerateSector(f"controller sector needs a_c < 0 < b_c finite, got {sector}")
    ctrls = list(controllers)
    gramians = tuple(observability_gramian(c) for c in ctrls)
    # solve for nu / (cost of B_c = 0) so the objective stays O(1)
    scale = projection_cost([np.zeros_like(c.B_c) for c in ctrls],
                            [c.B_c for c in ctrls], gramians)
    scale = scale if scale > 0 else 1.0
    inv = [_inverse_spd(W / scale) for W in gramians]
    nc, m_in = ctrls[0].order, ctrls[0].n_in

    prog = lmi.LmiProgram()
    Pi = prog.symmetric(nc, "Pi")
    Z = prog.symmetric(m_in, "Z")
    nu = prog.scalar("nu")
    Bs = [prog.rectangular(nc, m_in, f"B_c{i + 1}") for i in range(len(ctrls))]
    prog.add_psd([[Pi]], strict=True, name="Pi>0")
    for i, (c, B) in enumerate(zip(ctrls, Bs)):
        prog.add_nsd(_design_blocks(c.A_c, B, c.C_c, Pi, sector), strict=True,
                     name=f"vertex{i + 1}")
    prog.add_psd([[nu - Z.trace()]], name="nu>=trace(Z)")
    grid = [[Z]]
    for i, (c, B) in enumerate(zip(ctrls, Bs)):
        row = [(B - c.B_c)] + [None] * i + [inv[i]]
        grid.append(row)
    prog.add_psd(grid, name="slack")
    prog.minimize(nu)
    sol = prog.solve(opts)
    if not sol.ok:
        raise SynthesisInfeasible(f"projection SDP failed ({sol.status.value})")
    B_vals = [sol.value(B) for B in Bs]
    verts = tuple(VertexController(c.A_c, B, c.C_c) for c, B in zip(ctrls, B_vals))
    cost = projection_cost(B_vals, [c.B_c for c in ctrls], gramians)
    nu_v = float(sol.value(nu)[0, 0]) * scale
    ctrl = PolytopicController(verts, sector, {"nu": nu_v, "projection_cost": cost})
    return SynthesisResult(
        controller=ctrl, Pi=sol.value(Pi), nu=nu_v, Z=sol.value(Z) * scale, gramians=gramians,
        sector=sector, cost=cost, hinf_controllers=tuple(ctrls),
        info={"status": sol.status.value, "iterations": sol.sdp.iterations,
              "residuals": prog.residuals(sol)},
    )


def certify_controller(controller, sector, opts=None):
    """Certify the polytopic controller is inside ``sector``."""
    return conic.certify_cone(controller.conic_view(), sector.a, sector.b, "auto", opts)

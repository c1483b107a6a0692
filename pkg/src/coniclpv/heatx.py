"""Two-tank heat-exchanger study: physical model, operating-point shift and
the two-vertex polytopic model used for analysis and synthesis.

States are the cold and hot outlet temperatures ``T = [T_c, T_h]``; the
control input is the hot inlet temperature and the cold inlet temperature
is a constant disturbance. Flow rates move between their initial and final
values with a cubic blend, which also schedules the two vertices.
"""

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import NonPositiveFlow, Singular, SingularShift
from .lpvsys import GeneralizedVertex, PolytopicModel, SmoothStepPair, smooth_step
from .matcore import solve_linear

__all__ = [
    "HeatExchangerParams",
    "OperatingShift",
    "DELTA_PRESETS",
    "build_plant_matrices",
    "change_of_variables",
    "uncertainty_matrix",
    "build_polytopic_model",
    "vertex_drift",
    "perturbed_model",
    "interpolation_gap",
    "smooth_step",
]

DELTA_PRESETS = (0.0, 0.5, -1.0)
SIGN_CONVENTIONS = ("printed", "physical")


@dataclass(frozen=True)
class HeatExchangerParams:
    """Physical constants (SI units, temperatures in degrees C).

    ``sign_convention`` selects the sign of the inlet-temperature columns:
    ``"printed"`` makes both inlets enter with a minus sign, ``"physical"``
    uses the mixing-tank signs ``+v/V`` under which inflow at a higher
    temperature warms the tank.
    """

    U: float = 2411.8
    area: float = 48.4
    v_c_i: float = 0.04
    v_c_f: float = 0.02
    v_h_i: float = 0.10
    v_h_f: float = 0.06
    rho_c: float = 3.50e3
    rho_h: float = 3.72e3
    cp_c: float = 481.8
    cp_h: float = 499.0
    V_c: float = 15.8e-2
    V_h: float = 57.8e-2
    T_c_out_i: float = 9.3
    T_c_out_f: float = 25.0
    # cold inlet temperature; chosen equal to the initial outlet set-point
    T_c_in: float = 9.3
    t_f: float = 20.0
    sign_convention: str = "printed"

    def __post_init__(self):
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise ValueError(f"sign_convention must be one of {SIGN_CONVENTIONS}")
        for name in ("U", "area", "rho_c", "rho_h", "cp_c", "cp_h", "V_c", "V_h", "t_f"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("v_c_i", "v_c_f", "v_h_i", "v_h_f"):
            if not getattr(self, name) > 0:
                raise NonPositiveFlow(f"{name} must be positive")

    @property
    def k_c(self):
        """Heat-transfer rate constant of the cold tank, 1/s."""
        return self.U * self.area / (self.cp_c * self.rho_c * self.V_c)

    @property
    def k_h(self):
        return self.U * self.area / (self.cp_h * self.rho_h * self.V_h)

    def flows(self, t):
        """Cold and hot flow rates at time ``t``."""
        return (smooth_step(t, self.v_c_i, self.v_c_f, self.t_f),
                smooth_step(t, self.v_h_i, self.v_h_f, self.t_f))

    def reference(self, t):
        """Desired cold outlet temperature."""
        return smooth_step(t, self.T_c_out_i, self.T_c_out_f, self.t_f)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def build_plant_matrices(params, v_c, v_h):
    """Return ``(A_p, B_p, dist_W)`` at the given flow rates.

    ``dT/dt = A_p T + B_p T_h_in + dist_W T_c_in``.
    """
    if not (v_c > 0 and v_h > 0):
        raise NonPositiveFlow(f"flows must be positive, got v_c={v_c}, v_h={v_h}")
    kc, kh = params.k_c, params.k_h
    A_p = np.array([
        [-v_c / params.V_c - kc, kc],
        [kh, -v_h / params.V_h - kh],
    ])
    sign = -1.0 if params.sign_convention == "printed" else 1.0
    B_p = np.array([[0.0], [sign * v_h / params.V_h]])
    dist_W = np.array([[sign * v_c / params.V_c], [0.0]])
    return A_p, B_p, dist_W


@dataclass(frozen=True)
class OperatingShift:
    """``x = T + eta + offset * [1, 1]``, ``u = T_h_in + offset``."""

    eta: np.ndarray
    offset: float

    def to_shifted(self, T, T_h_in=None):
        x = np.asarray(T, dtype=float) + self.eta + self.offset
        if T_h_in is None:
            return x
        return x, T_h_in + self.offset

    def to_physical(self, x, u=None):
        T = np.asarray(x, dtype=float) - self.eta - self.offset
        if u is None:
            return T
        return T, np.asarray(u, dtype=float) - self.offset


def change_of_variables(params, A_p, dist_W):
    """Shift that moves the set-point ``T_c = T_c_out_f`` to ``y = 0``.

    ``eta = (A_p + dist_W [1 0])^{-1} dist_W (T_c_in - T_c_out_f)`` and
    ``offset = -eta[0] - T_c_out_f``, so that ``y = x[0] = T_c - T_c_out_f``.
    """
    A_p = np.asarray(A_p, dtype=float)
    dist_W = np.asarray(dist_W, dtype=float).reshape(2, 1)
    M = A_p + dist_W @ np.array([[1.0, 0.0]])
    rhs = dist_W[:, 0] * (params.T_c_in - params.T_c_out_f)
    try:
        eta = solve_linear(M, rhs)
    except Singular as exc:
        raise SingularShift(str(exc)) from exc
    offset = -eta[0] - params.T_c_out_f
    return OperatingShift(eta, float(offset))


def uncertainty_matrix(params, delta):
    """``A_delta``: scales the heat-transfer terms by ``delta``; rank one."""
    kc, kh = params.k_c, params.k_h
    return float(delta) * np.array([[kc, -kc], [-kh, kh]])


def vertex_drift(params, shift, v_c, v_h, delta=0.0):
    """Constant forcing left in shifted coordinates at fixed flows.

    ``dx/dt = (A + A_delta) x + B u + d``; zero at the final flows when the
    physical sign convention is used and ``delta = 0``.
    """
    A_p, B_p, dist_W = build_plant_matrices(params, v_c, v_h)
    A_p = A_p + uncertainty_matrix(params, delta)
    ones = np.ones(2)
    return (dist_W[:, 0] * params.T_c_in - A_p @ (shift.eta + shift.offset * ones)
            - B_p[:, 0] * shift.offset)


def build_polytopic_model(params, delta=0.0):
    """Two-vertex model in shifted coordinates and the uncertainty ``Delta``.

    Vertex channels: ``B3 = C3 = I`` carry the uncertainty loop
    ``q = Delta p``; ``B1`` is the nominal drift column, driven by a unit
    constant exogenous input. The shift uses the final flows.
    """
    A_f, _, W_f = build_plant_matrices(params, params.v_c_f, params.v_h_f)
    shift = change_of_variables(params, A_f, W_f)
    C2 = np.array([[1.0, 0.0]])
    verts = []
    for v_c, v_h in ((params.v_c_i, params.v_h_i), (params.v_c_f, params.v_h_f)):
        A_p, B_p, _ = build_plant_matrices(params, v_c, v_h)
        d = vertex_drift(params, shift, v_c, v_h)
        verts.append(GeneralizedVertex(
            A=A_p, B2=B_p, C2=C2,
            B1=d.reshape(2, 1),
            B3=np.eye(2), C3=np.eye(2),
            D32=np.zeros((2, 1)), D33=np.zeros((2, 2)),
        ))
    model = PolytopicModel(tuple(verts), ("initial flows", "final flows"),
                           SmoothStepPair(params.t_f))
    return model, uncertainty_matrix(params, delta), shift


def perturbed_model(params, delta):
    """Model with ``A_delta`` closed into every vertex, for simulation.

    The drift column picks up ``-A_delta (eta + offset)`` because the
    operating-point shift was computed for the nominal plant.
    """
    model, Delta, shift = build_polytopic_model(params, delta)
    corr = -Delta @ (shift.eta + shift.offset * np.ones(2))
    pert = model.perturbed(Delta)
    verts = tuple(replace(v, B1=v.B1 + corr.reshape(2, 1)) for v in pert.vertices)
    return replace(pert, vertices=verts), shift


def interpolation_gap(params, num=401):
    """Largest entrywise gap between the vertex blend and the exact
    flow-dependent matrices over the transition window."""
    model, _, _ = build_polytopic_model(params)
    A1, A2 = model.vertices[0].A, model.vertices[1].A
    B1, B2 = model.vertices[0].B2, model.vertices[1].B2
    worst = 0.0
    for t in np.linspace(0.0, params.t_f, num):
        s1, s2 = model.schedule(t)
        A_t, B_t, _ = build_plant_matrices(params, *params.flows(t))
        worst = max(worst, np.abs(s1 * A1 + s2 * A2 - A_t).max(),
                    np.abs(s1 * B1 + s2 * B2 - B_t).max())
    return float(worst)


def physical(params):
    """Copy of ``params`` using the physical sign convention."""
    return replace(params, sign_convention="physical")

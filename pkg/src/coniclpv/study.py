"""End-to-end heat-exchanger study.

Plant sectors for every uncertainty preset, the covering design sectors,
vertex H-infinity controllers, conic projections for the max-a and min-r
design sectors, and the closed-loop RMS table.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import conic, heatx, sim, synthesis
from .sdp import SolverOptions

__all__ = ["StudyConfig", "StudyResult", "plant_sectors", "heatx_loop", "run_study"]

METHODS = {
    "max-a": conic.bounds_max_a,
    "min-r": conic.bounds_min_radius,
    "min-b": conic.bounds_min_b,
}


@dataclass(frozen=True)
class StudyConfig:
    params: heatx.HeatExchangerParams = field(
        default_factory=lambda: heatx.HeatExchangerParams(sign_convention="physical"))
    deltas: tuple = heatx.DELTA_PRESETS
    t_end: float = 60.0
    dt: float = 1e-3
    eps_u: float = 1e-2
    eps_n: float = 1e-2
    gamma_tol: float = 1e-2
    controller_margin: float = 1e-3
    methods: tuple = ("max-a", "min-r")


@dataclass
class StudyResult:
    config: StudyConfig
    sectors: dict
    design_sectors: dict
    hinf: tuple
    hinf_gammas: tuple
    synthesis: dict
    controllers: dict
    traces: dict
    metrics: sim.Metrics

    def summary(self):
        out = {
            "plant_sectors": {
                str(d): {m: s.to_list() for m, (s, _) in row.items()}
                for d, row in self.sectors.items()},
            "design_sectors": {m: s.to_list() for m, s in self.design_sectors.items()},
            "controller_sectors": {m: r.sector.to_list() for m, r in self.synthesis.items()},
            "hinf_gamma": list(self.hinf_gammas),
            "nu": {m: r.nu for m, r in self.synthesis.items()},
            "metrics": self.metrics.to_dict(),
        }
        return out


def plant_sectors(params, deltas, methods=("max-a", "min-r"), opts=None):
    """``{delta: {method: (sector, certificate)}}`` for the perturbed plants."""
    model, _, _ = heatx.build_polytopic_model(params)
    out = {}
    for d in deltas:
        Delta = heatx.uncertainty_matrix(params, d)
        view = model.perturbed(Delta).conic_view()
        out[d] = {m: METHODS[m](view, opts) for m in methods}
    return out


def heatx_loop(params, controller, delta, t_end=60.0, dt=1e-3, label=""):
    """Loop configuration for one controller and uncertainty preset."""
    plant, shift = heatx.perturbed_model(params, delta)
    T_f = params.T_c_out_f
    return sim.LoopConfig(
        plant=plant,
        controller=controller,
        reference=lambda t: params.reference(t) - T_f,
        exogenous=lambda t: np.ones(1),
        t_end=t_end,
        dt=dt,
        shift=shift,
        ref_offset=T_f,
        label=label,
    )


def run_study(cfg=None, opts=None, keep_traces=False):
    cfg = cfg or StudyConfig()
    opts = opts or SolverOptions()
    params = cfg.params
    sectors = plant_sectors(params, cfg.deltas, cfg.methods, opts)
    design = {m: synthesis.design_sector(row[m][0] for row in sectors.values())
              for m in cfg.methods}

    model, _, _ = heatx.build_polytopic_model(params)
    hinf, gammas = [], []
    for v in model.vertices:
        ctrl, g = synthesis.hinf_vertex_synthesis(
            synthesis.robust_design_plant(v), cfg.eps_u, cfg.eps_n, cfg.gamma_tol, opts)
        hinf.append(ctrl)
        gammas.append(g)

    results, controllers = {}, {"H-infinity": sim.interpolate_hinf(hinf)}
    for m in cfg.methods:
        csec = synthesis.controller_cone_from_plant(design[m], cfg.controller_margin)
        res = synthesis.conic_projection(hinf, csec, opts)
        cert = synthesis.certify_controller(res.controller, csec, opts)
        res.info["certificate"] = cert
        ctrl = replace(res.controller, provenance={
            **res.controller.provenance, "plant_sector": design[m].to_list(),
            "hinf_gamma": gammas})
        results[m] = res
        controllers[f"conic {m}"] = ctrl

    table, traces = {}, {}
    for name, ctrl in controllers.items():
        table[name] = {}
        for d in cfg.deltas:
            tr = sim.simulate(heatx_loop(params, ctrl, d, cfg.t_end, cfg.dt, f"{name} delta={d}"))
            table[name][d] = sim.rms_error(tr)
            if keep_traces:
                traces[(name, d)] = tr
    metrics = sim.scenario_table(table, tuple(cfg.deltas))
    return StudyResult(cfg, sectors, design, tuple(hinf), tuple(gammas), results,
                       controllers, traces, metrics)

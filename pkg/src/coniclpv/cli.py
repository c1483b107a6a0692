"""Command-line front end.

Subcommands ``analyze``, ``synth``, ``simulate``, ``freqresp`` and
``heatx-demo`` read and write JSON (structured data) and CSV (time and
frequency series). Every run also leaves a ``<output>.manifest.json``.

Exit codes: 0 success, 1 input or I/O error, 2 infeasible or uncertified,
3 numerical precondition (singular Gramian, non-Hurwitz matrix), 4 the
simulation diverged.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from . import __version__, conic, heatx, matcore, sim, synthesis
from .errors import (
    ConicLPVError,
    DegenerateSector,
    Divergence,
    GramianSingular,
    IllConditioned,
    NotHurwitz,
    NotSiso,
    NotStabilizable,
    Singular,
    SingularShift,
    SynthesisInfeasible,
    Uncertified,
)
from .lpvsys import ConicChannelView, PolytopicModel, smooth_step
from .sdp import SolverOptions

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_DIVERGENCE = 4

METHODS = {
    "max-a": conic.bounds_max_a,
    "min-b": conic.bounds_min_b,
    "min-r": conic.bounds_min_radius,
}


class InputError(ConicLPVError):
    """Bad command-line arguments or input files."""


def exit_code(exc):
    """Map an exception to the stable exit-code contract."""
    if isinstance(exc, Divergence):
        return EXIT_DIVERGENCE
    if isinstance(exc, (GramianSingular, NotHurwitz, Singular, SingularShift, IllConditioned)):
        return EXIT_NUMERICAL
    if isinstance(exc, (Uncertified, SynthesisInfeasible, NotStabilizable)):
        return EXIT_INFEASIBLE
    return EXIT_INPUT


# --- file helpers -----------------------------------------------------------

def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def load_model(path):
    doc = load_json(path)
    try:
        return PolytopicModel.from_dict(doc), doc
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: invalid model ({exc})") from exc


def load_controller(path):
    doc = load_json(path)
    try:
        return synthesis.PolytopicController.from_dict(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: invalid controller ({exc})") from exc


def parse_pair(text, name):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"{name} must look like 'a,b', got {text!r}") from exc
    return a, b


def write_manifest(out_path, command, inputs, options, outputs, started):
    manifest = {
        "command": command,
        "inputs": [os.path.abspath(p) for p in inputs],
        "options": options,
        "version": __version__,
        "wall_clock_s": round(time.time() - started, 3),
        "outputs": [os.path.abspath(p) for p in outputs],
    }
    atomic_write(out_path + ".manifest.json", dumps(manifest))


def solver_options(args):
    return SolverOptions(max_iterations=args.max_iterations)


# --- model extras -----------------------------------------------------------

def apply_delta(model, doc, delta):
    """Close ``q = delta * Delta p`` using the model's ``uncertainty`` entry.

    ``uncertainty.B1_per_delta`` (optional) is added to ``B1`` times
    ``delta``; it carries the forcing that a shifted operating point picks up.
    """
    if delta == 0:
        return model
    unc = doc.get("uncertainty")
    if not unc or "Delta" not in unc:
        raise InputError("--delta needs an 'uncertainty.Delta' entry in the model")
    pert = model.perturbed(delta * np.asarray(unc["Delta"], dtype=float))
    if "B1_per_delta" in unc:
        extra = delta * np.atleast_2d(np.asarray(unc["B1_per_delta"], dtype=float))
        verts = []
        for v in pert.vertices:
            f = v.complete()
            verts.append(replace(v, B1=f.B1 + extra))
        pert = PolytopicModel(tuple(verts), pert.labels, pert.schedule)
    return pert


def reference_from(spec):
    if spec is None:
        return lambda t: 0.0
    kind = spec.get("type")
    if kind == "constant":
        value = float(spec["value"])
        return lambda t: value
    if kind == "smooth_step":
        x_i, x_f, t_f = float(spec["x_i"]), float(spec["x_f"]), float(spec["t_f"])
        off = float(spec.get("offset", 0.0))
        return lambda t: smooth_step(t, x_i, x_f, t_f) + off
    raise InputError(f"unknown reference type {kind!r}")


def loop_from(model, doc, controller, t_end, dt, label=""):
    sig = doc.get("signals", {})
    exo = sig.get("exogenous")
    shift = None
    if "shift" in sig:
        shift = heatx.OperatingShift(np.asarray(sig["shift"]["eta"], dtype=float),
                                     float(sig["shift"]["offset"]))
    w = None if exo is None else np.asarray(exo, dtype=float)
    return sim.LoopConfig(
        plant=model,
        controller=controller,
        reference=reference_from(sig.get("reference")),
        exogenous=None if w is None else (lambda t: w),
        t_end=t_end,
        dt=dt,
        shift=shift,
        ref_offset=float(sig.get("output_offset", 0.0)),
        label=label,
    )


# --- commands ---------------------------------------------------------------

def analysis_report(model, method, a=None, b=None, opts=None):
    """Sector search on ``model`` returning ``(sector, report dict)``."""
    view = model.conic_view()
    sector = None
    if method == "max-a" and b is not None:
        _, cert = conic.max_a_given_b(view, b, opts)
    elif method == "min-b" and a is not None:
        b_star, cert = conic.min_b_given_a(view, a, opts)
        if math.isinf(a):
            # one-sided bound; the certificate belongs to the mirrored channel
            view = ConicChannelView(view.A, tuple(-B for B in view.B), view.C)
            sector = conic.ConicSector(-math.inf, b_star)
    else:
        _, cert = METHODS[method](view, opts)
    pmin, worst = conic.recheck(view, cert)
    sector = sector or cert.sector
    report = {
        "method": method,
        "sector": ["-inf" if math.isinf(sector.a) else sector.a,
                   "inf" if math.isinf(sector.b) else sector.b],
        "centre": sector.centre if sector.finite else None,
        "radius": sector.radius if sector.finite else None,
        "certificate": cert.to_dict(),
        "recheck": {"P_min_eigenvalue": pmin, "worst_vertex_value": worst},
    }
    return sector, report


def cmd_analyze(args):
    model, _ = load_model(args.model)
    if args.method not in METHODS:
        raise InputError(f"unknown method {args.method!r}")
    b = None if args.b is None else float(args.b)
    a = None if args.a is None else float(args.a)
    _, report = analysis_report(model, args.method, a, b, solver_options(args))
    report["model"] = os.path.abspath(args.model)
    atomic_write(args.out, dumps(report))
    return [args.model], [args.out], {"method": args.method, "a": args.a, "b": args.b}


def synthesize(model, plant_sector, eps_u=1e-2, eps_n=1e-2, margin=1e-3, opts=None,
               check_plant=True):
    """Vertex H-infinity designs projected into the controller cone.

    Returns ``(controller, document)``; the document is the controller JSON.
    """
    if check_plant:
        conic.certify_cone(model.conic_view(), plant_sector.a, plant_sector.b, "auto", opts)
    csec = synthesis.controller_cone_from_plant(plant_sector, margin)
    hinf, gammas = [], []
    for v in model.vertices:
        ctrl, g = synthesis.hinf_vertex_synthesis(synthesis.design_plant(v), eps_u, eps_n,
                                                  opts=opts)
        hinf.append(ctrl)
        gammas.append(float(g))
    res = synthesis.conic_projection(hinf, csec, opts)
    cert = synthesis.certify_controller(res.controller, csec, opts)
    controller = synthesis.PolytopicController(res.controller.vertices, csec, {
        "plant_sector": plant_sector.to_list(),
        "controller_sector": csec.to_list(),
        "nu": res.nu,
        "projection_cost": res.cost,
        "hinf_gamma": gammas,
    })
    doc = controller.to_dict()
    doc.update({
        "Pi": res.Pi.tolist(),
        "nu": res.nu,
        "hinf_gamma": gammas,
        "hinf_vertices": [c.to_dict() for c in hinf],
        "certificate": cert.to_dict(),
    })
    return controller, doc


def _sector_arg(args):
    if args.sector and args.from_analysis:
        raise InputError("give either --sector or --from-analysis")
    if args.sector:
        a, b = parse_pair(args.sector, "--sector")
        return conic.ConicSector(a, b), []
    if args.from_analysis:
        rep = load_json(args.from_analysis)
        try:
            a, b = rep["sector"]
            return conic.ConicSector(float(a), float(b)), [args.from_analysis]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.from_analysis}: no usable 'sector' entry") from exc
    raise InputError("need --sector or --from-analysis")


def cmd_synth(args):
    model, _ = load_model(args.model)
    sector, extra_in = _sector_arg(args)
    if not (sector.a < 0 < sector.b) or not sector.finite:
        raise DegenerateSector(f"plant sector must satisfy a < 0 < b < inf, got {sector}")
    _, doc = synthesize(model, sector, args.eps_u, args.eps_n, args.margin,
                        solver_options(args))
    atomic_write(args.out, dumps(doc))
    return [args.model] + extra_in, [args.out], {
        "sector": sector.to_list(), "eps_u": args.eps_u, "eps_n": args.eps_n,
        "margin": args.margin}


def trace_csv(trace, stride=1):
    """CSV text of a trace, keeping every ``stride``-th sample."""
    buf = io.StringIO()
    sim.write_trace_csv(_decimate(trace, stride), buf)
    return buf.getvalue()


def _decimate(trace, stride):
    if stride <= 1:
        return trace
    sl = slice(None, None, stride)
    return sim.SimulationTrace(
        trace.t[sl], trace.x[sl], trace.xc[sl], trace.u[sl], trace.y[sl], trace.r[sl],
        None if trace.physical is None else trace.physical[sl],
        None if trace.physical_ref is None else trace.physical_ref[sl], trace.meta)


def trace_metrics(trace):
    e = trace.error
    out = {
        "rms_error": sim.rms_error(trace),
        "max_abs_error": float(np.abs(e).max()),
        "final_error": e[-1].tolist(),
        "samples": len(trace),
        "dt": trace.meta.get("dt"),
        "t_end": trace.meta.get("t_end"),
    }
    if trace.physical is not None:
        out["final_physical"] = trace.physical[-1].tolist()
        out["final_physical_reference"] = float(trace.physical_ref[-1])
    return out


def cmd_simulate(args):
    model, doc = load_model(args.model)
    ctrl = load_controller(args.controller)
    if len(args.out) != 2:
        raise InputError("--out takes a trace CSV and a metrics JSON")
    plant = apply_delta(model, doc, args.delta)
    trace = sim.simulate(loop_from(plant, doc, ctrl, args.t_end, args.dt,
                                   f"delta={args.delta}"))
    metrics = trace_metrics(trace)
    metrics["delta"] = args.delta
    csv_path, json_path = args.out
    atomic_write(csv_path, trace_csv(trace, args.stride))
    atomic_write(json_path, dumps(metrics))
    return [args.model, args.controller], list(args.out), {
        "delta": args.delta, "t_end": args.t_end, "dt": args.dt, "stride": args.stride}


def parse_grid(text):
    try:
        lo, hi, num = text.split(",")
        lo, hi, num = float(lo), float(hi), int(num)
    except ValueError as exc:
        raise InputError(f"--grid must be 'log10_min,log10_max,points', got {text!r}") from exc
    if not (hi > lo and num >= 2):
        raise InputError("--grid needs max > min and at least 2 points")
    return np.logspace(lo, hi, num)


def nyquist_rows(model, indices, omegas):
    rows = []
    for i in indices:
        v = model.vertices[i]
        for w in omegas:
            g = matcore.frequency_response(v.A, v.B2, v.C2, w)[0, 0]
            rows.append((i + 1, w, g.real, g.imag))
    return rows


def cmd_freqresp(args):
    model, _ = load_model(args.model)
    if model.m != 1 or model.vertices[0].p != 1:
        raise NotSiso("frequency-response export needs a single-input single-output channel")
    if args.all == (args.vertex is not None):
        raise InputError("give exactly one of --vertex and --all")
    if args.all:
        idx = list(range(len(model)))
    else:
        if not 1 <= args.vertex <= len(model):
            raise InputError(f"--vertex {args.vertex} out of range 1..{len(model)}")
        idx = [args.vertex - 1]
    omegas = parse_grid(args.grid)
    rows = nyquist_rows(model, idx, omegas)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["vertex", "omega", "re", "im"])
    for r in rows:
        w.writerow([r[0]] + [repr(float(x)) for x in r[1:]])
    side = {"vertices": [i + 1 for i in idx], "points": len(rows)}
    if args.sector:
        a, b = parse_pair(args.sector, "--sector")
        sec = conic.ConicSector(a, b)
        side["sector"] = sec.to_list()
        if sec.finite:
            side["disk"] = {"centre": sec.centre, "radius": sec.radius}
            worst = max(abs(complex(r[2], r[3]) - sec.centre) - sec.radius for r in rows)
        else:
            side["half_plane"] = {"re_min": sec.a}
            worst = max(sec.a - r[2] for r in rows)
        side["max_excess"] = float(worst)
        side["inside"] = bool(worst <= 1e-6)
    csv_path = args.out
    side_path = os.path.splitext(csv_path)[0] + ".json"
    atomic_write(csv_path, buf.getvalue())
    atomic_write(side_path, dumps(side))
    return [args.model], [csv_path, side_path], {"vertex": args.vertex, "all": args.all,
                                                 "sector": args.sector, "grid": args.grid}


def heatx_documents(params, deltas=heatx.DELTA_PRESETS):
    """Nominal model JSON (with uncertainty and signals) and one closed-in
    model per uncertainty preset."""
    model, Delta1, shift = heatx.build_polytopic_model(params, 1.0)
    ones = np.ones(2)
    signals = {
        "exogenous": [1.0],
        "reference": {"type": "smooth_step", "x_i": params.T_c_out_i,
                      "x_f": params.T_c_out_f, "t_f": params.t_f,
                      "offset": -params.T_c_out_f},
        "output_offset": params.T_c_out_f,
        "shift": {"eta": shift.eta.tolist(), "offset": shift.offset},
    }
    nominal = model.to_dict()
    nominal["signals"] = signals
    nominal["uncertainty"] = {
        "Delta": Delta1.tolist(),
        "B1_per_delta": (-Delta1 @ (shift.eta + shift.offset * ones)).reshape(2, 1).tolist(),
    }
    nominal["parameters"] = params.to_dict()
    per_delta = {}
    for d in deltas:
        pm, _ = heatx.perturbed_model(params, d)
        doc = pm.to_dict()
        doc["signals"] = signals
        doc["parameters"] = params.to_dict()
        doc["delta"] = d
        per_delta[d] = doc
    return nominal, per_delta


def _tag(d):
    return f"{d:+.2f}".replace("+", "p").replace("-", "m").replace(".", "_")


def format_table(metrics):
    return metrics.format(3) + "\n"


def cmd_heatx_demo(args):
    out = args.out
    if os.path.exists(out) and not os.path.isdir(out):
        raise InputError(f"{out} exists and is not a directory")
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc.strerror or exc}") from exc
    if not os.access(out, os.W_OK):
        raise InputError(f"{out} is not writable")
    opts = solver_options(args)
    params = heatx.HeatExchangerParams(sign_convention=args.sign_convention)
    deltas = heatx.DELTA_PRESETS
    nominal, per_delta = heatx_documents(params, deltas)
    written = []

    def put(name, text):
        path = os.path.join(out, name)
        atomic_write(path, text)
        written.append(path)

    put("model_nominal.json", dumps(nominal))
    sectors = {m: [] for m in ("max-a", "min-r")}
    for d in deltas:
        put(f"model_delta_{_tag(d)}.json", dumps(per_delta[d]))
        model = PolytopicModel.from_dict(per_delta[d])
        for m in sectors:
            sec, rep = analysis_report(model, m, opts=opts)
            rep["delta"] = d
            sectors[m].append(sec)
            put(f"analysis_{m}_delta_{_tag(d)}.json", dumps(rep))

    nominal_model = PolytopicModel.from_dict(nominal)
    controllers, hinf_doc = {}, None
    for m, secs in sectors.items():
        design = synthesis.design_sector(secs)
        ctrl, doc = synthesize(nominal_model, design, args.eps_u, args.eps_n, args.margin,
                               opts)
        controllers[f"conic {m}"] = ctrl
        put(f"controller_{m}.json", dumps(doc))
        hinf_doc = doc["hinf_vertices"]
    baseline = sim.interpolate_hinf(
        [synthesis.VertexController.from_dict(v) for v in hinf_doc])
    controllers = {"H-infinity": baseline, **controllers}
    put("controller_hinf.json", dumps(baseline.to_dict()))

    table = {}
    for name, ctrl in controllers.items():
        table[name] = {}
        for d in deltas:
            plant = apply_delta(nominal_model, nominal, d)
            tr = sim.simulate(loop_from(plant, nominal, ctrl, args.t_end, args.dt,
                                        f"{name} delta={d}"))
            table[name][d] = sim.rms_error(tr)
            slug = name.replace(" ", "_").replace("-", "").lower()
            put(f"trace_{slug}_delta_{_tag(d)}.csv", trace_csv(tr, args.stride))
    metrics = sim.scenario_table(table, deltas)
    summary = metrics.to_dict()
    summary.update({
        "plant_sectors": {m: [s.to_list() for s in secs] for m, secs in sectors.items()},
        "design_sectors": {m: synthesis.design_sector(secs).to_list()
                           for m, secs in sectors.items()},
        "sign_convention": args.sign_convention,
        "t_end": args.t_end,
        "dt": args.dt,
    })
    put("summary.json", dumps(summary))
    put("summary.txt", format_table(metrics))
    return [], written, {"t_end": args.t_end, "dt": args.dt, "stride": args.stride,
                         "sign_convention": args.sign_convention}


# --- entry point ------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="coniclpv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--max-iterations", type=int, default=SolverOptions().max_iterations,
                   help="SDP iteration budget")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="certify a tight conic sector")
    a.add_argument("model")
    a.add_argument("--method", default="max-a", choices=sorted(METHODS))
    a.add_argument("--a", help="fixed lower bound (min-b)")
    a.add_argument("--b", help="fixed upper bound (max-a); 'inf' allowed")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="conic projection of vertex H-infinity controllers")
    s.add_argument("model")
    s.add_argument("--sector", help="plant sector 'a,b'")
    s.add_argument("--from-analysis", help="report written by 'analyze'")
    s.add_argument("--eps-u", type=float, default=1e-2)
    s.add_argument("--eps-n", type=float, default=1e-2)
    s.add_argument("--margin", type=float, default=1e-3,
                   help="relative back-off of the controller cone")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("simulate", help="closed-loop simulation")
    m.add_argument("model")
    m.add_argument("controller")
    m.add_argument("--delta", type=float, default=0.0)
    m.add_argument("--t-end", type=float, default=60.0)
    m.add_argument("--dt", type=float, default=1e-3)
    m.add_argument("--stride", type=int, default=1, help="keep every n-th sample in the CSV")
    m.add_argument("--out", nargs=2, required=True, metavar=("TRACE_CSV", "METRICS_JSON"))
    m.set_defaults(func=cmd_simulate)

    f = sub.add_parser("freqresp", help="Nyquist data of the u -> y channel")
    f.add_argument("model")
    f.add_argument("--vertex", type=int)
    f.add_argument("--all", action="store_true")
    f.add_argument("--sector")
    f.add_argument("--grid", default="-3,3,400", help="log10 min, log10 max, points")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_freqresp)

    h = sub.add_parser("heatx-demo", help="end-to-end heat-exchanger study")
    h.add_argument("--out", required=True)
    h.add_argument("--t-end", type=float, default=60.0)
    h.add_argument("--dt", type=float, default=1e-3)
    h.add_argument("--stride", type=int, default=100)
    h.add_argument("--eps-u", type=float, default=1e-2)
    h.add_argument("--eps-n", type=float, default=1e-2)
    h.add_argument("--margin", type=float, default=1e-3)
    h.add_argument("--sign-convention", default="physical", choices=heatx.SIGN_CONVENTIONS)
    h.set_defaults(func=cmd_heatx_demo)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        inputs, outputs, options = args.func(args)
        anchor = outputs[0] if args.command != "heatx-demo" else os.path.join(args.out, "run")
        write_manifest(anchor, args.command, inputs, options, outputs, started)
    except (ConicLPVError, ValueError, OSError) as exc:
        print(f"coniclpv {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

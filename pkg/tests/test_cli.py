import csv
import json
import os

import numpy as np
import pytest

from coniclpv import cli, heatx, synthesis
from coniclpv.errors import Divergence, GramianSingular, Uncertified


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


FIRST_ORDER = {"n": 1, "m": 1, "vertices": [{"A": [[-1.0]], "B2": [[1.0]], "C2": [[1.0]]}]}


@pytest.fixture(scope="module")
def heatx_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("hx")
    params = heatx.HeatExchangerParams(sign_convention="physical")
    nominal, per_delta = cli.heatx_documents(params)
    paths = {"nominal": d / "nominal.json", "delta0": d / "delta0.json"}
    paths["nominal"].write_text(cli.dumps(nominal))
    paths["delta0"].write_text(cli.dumps(per_delta[0.0]))
    return d, paths


def test_exit_code_mapping():
    assert cli.exit_code(Divergence()) == 4
    assert cli.exit_code(GramianSingular()) == 3
    assert cli.exit_code(Uncertified()) == 2
    assert cli.exit_code(ValueError()) == 1
    assert cli.exit_code(OSError()) == 1


def test_analyze_first_order_max_a(tmp_path):
    model = write(tmp_path / "m.json", FIRST_ORDER)
    out = tmp_path / "r.json"
    assert cli.main(["analyze", model, "--method", "max-a", "--b", "inf", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert -1e-3 <= rep["sector"][0] < 0
    assert rep["sector"][1] == "inf"
    assert rep["recheck"]["worst_vertex_value"] >= -1e-6
    assert (tmp_path / "r.json.manifest.json").exists()


def test_analyze_heatx_max_a(tmp_path, heatx_files):
    _, paths = heatx_files
    out = tmp_path / "r.json"
    assert cli.main(["analyze", str(paths["delta0"]), "--method", "max-a", "--out", str(out)]) == 0
    a, b = json.loads(out.read_text())["sector"]
    assert a < 0 < b


def test_analyze_min_b_one_sided(tmp_path):
    model = write(tmp_path / "m.json", FIRST_ORDER)
    out = tmp_path / "r.json"
    assert cli.main(["analyze", model, "--method", "min-b", "--a=-inf", "--out", str(out)]) == 0
    a, b = json.loads(out.read_text())["sector"]
    assert a == "-inf" and b == pytest.approx(1.0, abs=1e-3)


def test_malformed_json_writes_nothing(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1,')
    out = tmp_path / "r.json"
    assert cli.main(["analyze", str(bad), "--out", str(out)]) == 1
    assert not out.exists()


def test_invalid_model_is_input_error(tmp_path):
    model = write(tmp_path / "m.json", {"vertices": [{"A": [[-1.0]], "B2": [[1.0, 0.0]],
                                                      "C2": [[1.0]]}]})
    assert cli.main(["analyze", model, "--out", str(tmp_path / "r.json")]) == 1


def test_synth_heatx_and_recertify(tmp_path, heatx_files):
    _, paths = heatx_files
    rep = tmp_path / "r.json"
    assert cli.main(["analyze", str(paths["nominal"]), "--out", str(rep)]) == 0
    out = tmp_path / "c.json"
    assert cli.main(["synth", str(paths["nominal"]), "--from-analysis", str(rep),
                     "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    ctrl = synthesis.PolytopicController.from_dict(doc)
    synthesis.certify_controller(ctrl, ctrl.sector)
    assert doc["nu"] >= 0 and len(doc["hinf_gamma"]) == 2
    assert np.array(doc["Pi"]).shape == (2, 2)


def test_synth_tiny_sector_is_infeasible(tmp_path, heatx_files):
    _, paths = heatx_files
    out = tmp_path / "c.json"
    assert cli.main(["synth", str(paths["nominal"]), "--sector=-1e-6,1e-6",
                     "--out", str(out)]) == 2
    assert not out.exists()


def test_synth_missing_model(tmp_path):
    assert cli.main(["synth", str(tmp_path / "none.json"), "--sector=-1,1",
                     "--out", str(tmp_path / "c.json")]) == 1


def test_synth_gramian_failure_exit_code(tmp_path, monkeypatch, heatx_files):
    _, paths = heatx_files

    def boom(*args, **kwargs):
        raise GramianSingular("forced")

    monkeypatch.setattr(synthesis, "conic_projection", boom)
    assert cli.main(["synth", str(paths["nominal"]), "--sector=-0.1,300",
                     "--out", str(tmp_path / "c.json")]) == 3


def test_simulate_settles_near_target(tmp_path, heatx_files):
    _, paths = heatx_files
    ctrl = tmp_path / "c.json"
    assert cli.main(["synth", str(paths["nominal"]), "--sector=-0.0878,252.3",
                     "--out", str(ctrl)]) == 0
    trace, metrics = tmp_path / "t.csv", tmp_path / "m.json"
    assert cli.main(["simulate", str(paths["nominal"]), str(ctrl), "--delta", "0",
                     "--t-end", "60", "--stride", "1000",
                     "--out", str(trace), str(metrics)]) == 0
    m = json.loads(metrics.read_text())
    assert abs(m["final_physical"][0] - 25.0) < 1.0
    with open(trace) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][-3:] == ["T_c_out", "T_h_out", "T_c_ref"]


def test_simulate_unstable_controller_diverges(tmp_path):
    model = write(tmp_path / "m.json", {**FIRST_ORDER, "signals": {
        "reference": {"type": "smooth_step", "x_i": 0.0, "x_f": 1.0, "t_f": 1.0}}})
    ctrl = write(tmp_path / "c.json", {"vertices": [{"A_c": [[5.0]], "B_c": [[1.0]],
                                                      "C_c": [[1.0]]}]})
    code = cli.main(["simulate", model, ctrl, "--t-end", "20", "--dt", "0.01",
                     "--out", str(tmp_path / "t.csv"), str(tmp_path / "m.json.out")])
    assert code == 4


def test_simulate_delta_without_uncertainty(tmp_path):
    model = write(tmp_path / "m.json", FIRST_ORDER)
    ctrl = write(tmp_path / "c.json", {"vertices": [{"A_c": [[-1.0]], "B_c": [[1.0]],
                                                      "C_c": [[1.0]]}]})
    assert cli.main(["simulate", model, ctrl, "--delta", "0.5",
                     "--out", str(tmp_path / "t.csv"), str(tmp_path / "x.json")]) == 1


def test_apply_delta_matches_perturbed_model(heatx_files):
    params = heatx.HeatExchangerParams(sign_convention="physical")
    nominal, _ = cli.heatx_documents(params)
    from coniclpv.lpvsys import PolytopicModel
    closed = cli.apply_delta(PolytopicModel.from_dict(nominal), nominal, -1.0)
    ref, _ = heatx.perturbed_model(params, -1.0)
    for v, w in zip(closed.vertices, ref.vertices):
        np.testing.assert_allclose(v.A, w.A, atol=1e-14)
        np.testing.assert_allclose(v.B1, w.B1, atol=1e-12)


def test_freqresp_first_order(tmp_path):
    model = write(tmp_path / "m.json", FIRST_ORDER)
    out = tmp_path / "ny.csv"
    assert cli.main(["freqresp", model, "--vertex", "1", "--grid=-3,3,50",
                     "--sector=-1e-3,1.001", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    first, last = rows[0], rows[-1]
    assert float(first["re"]) == pytest.approx(1.0, abs=1e-5)
    assert abs(complex(float(last["re"]), float(last["im"]))) < 1e-2
    side = json.loads((tmp_path / "ny.json").read_text())
    assert side["inside"] and side["disk"]["radius"] == pytest.approx(0.501)


def test_freqresp_vertex_out_of_range(tmp_path, heatx_files):
    _, paths = heatx_files
    assert cli.main(["freqresp", str(paths["nominal"]), "--vertex", "3",
                     "--out", str(tmp_path / "ny.csv")]) == 1


def test_freqresp_needs_siso(tmp_path):
    mimo = {"vertices": [{"A": [[-1.0, 0.0], [0.0, -2.0]], "B2": np.eye(2).tolist(),
                          "C2": np.eye(2).tolist()}]}
    model = write(tmp_path / "m.json", mimo)
    assert cli.main(["freqresp", model, "--all", "--out", str(tmp_path / "ny.csv")]) == 1


def test_heatx_demo_bad_out(tmp_path):
    f = tmp_path / "file"
    f.write_text("")
    assert cli.main(["heatx-demo", "--out", str(f / "sub")]) == 1


def test_heatx_demo_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert cli.main(["heatx-demo", "--out", str(d), "--t-end", "2", "--stride", "50"]) == 0
        outs.append(d)
    files = sorted(f for f in os.listdir(outs[0]) if not f.endswith("manifest.json"))
    assert "summary.json" in files and len(files) > 10
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert set(summary["rms"]) == {"H-infinity", "conic max-a", "conic min-r"}
    assert all(len(v) == 3 for v in summary["rms"].values())
    assert "std. dev." in (outs[0] / "summary.txt").read_text()

"""Plant cones of the heat exchanger for the three uncertainty presets.

Prints the max-a and min-r sectors, the size of the uncertainty block and
how far the vertex blend is from the exact flow-dependent matrices.
"""

from coniclpv import heatx, matcore
from coniclpv.study import plant_sectors


def main():
    params = heatx.HeatExchangerParams(sign_convention="physical")
    print(f"k_c = {params.k_c:.6f} 1/s, k_h = {params.k_h:.6f} 1/s")
    model, _, shift = heatx.build_polytopic_model(params)
    print(f"operating shift eta = {shift.eta}, offset = {shift.offset:.6f}")
    print(f"vertex blend gap over the transition: {heatx.interpolation_gap(params):.1e}")

    table = plant_sectors(params, heatx.DELTA_PRESETS)
    print(f"{'delta':>6}  {'max-a':>22}  {'min-r':>22}  {'||A_delta||':>11}")
    for d, row in table.items():
        (sa, _), (sr, _) = row["max-a"], row["min-r"]
        norm = matcore.sigma_max(heatx.uncertainty_matrix(params, d))
        print(f"{d:>6}  [{sa.a:+9.4f}, {sa.b:9.3f}]  [{sr.a:+9.4f}, {sr.b:9.4f}]  {norm:11.4f}")


if __name__ == "__main__":
    main()

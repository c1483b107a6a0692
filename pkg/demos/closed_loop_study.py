"""Closed-loop RMS tracking error of the three controllers.

Runs the whole pipeline (plant sectors, vertex H-infinity designs, conic
projections, simulation) for every uncertainty preset. Pass ``printed`` as
the first argument to use the printed inlet signs instead of the physical
ones; a shorter horizon can be given as the second argument.
"""

import sys

from coniclpv import heatx
from coniclpv.study import StudyConfig, run_study


def main(argv):
    convention = argv[0] if argv else "physical"
    t_end = float(argv[1]) if len(argv) > 1 else 60.0
    params = heatx.HeatExchangerParams(sign_convention=convention)
    res = run_study(StudyConfig(params=params, t_end=t_end))
    print(f"sign convention: {convention}, horizon {t_end:g} s")
    for m, s in res.design_sectors.items():
        print(f"design sector ({m}): [{s.a:.4f}, {s.b:.4f}]")
    print(res.metrics.format())
    std = res.metrics.std
    print(f"std ratio H-infinity / conic max-a: {std['H-infinity'] / std['conic max-a']:.3f}")


if __name__ == "__main__":
    main(sys.argv[1:])

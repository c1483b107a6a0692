"""Cone bounds of the first-order lag 1/(s + 1).

The Nyquist curve of 1/(s + 1) is the circle with centre 1/2 and radius
1/2, so the smallest cone is [0, 1] and the max-a search with b = inf
should return a value just below zero.
"""

import math

import numpy as np

from coniclpv import conic
from coniclpv.lpvsys import ConicChannelView


def main():
    view = ConicChannelView.lti([[-1.0]], [[1.0]], [[1.0]])
    a_star, _ = conic.max_a_given_b(view, math.inf)
    print(f"max a with b = inf: {a_star:.3e}")

    for method in ("max-a", "min-b", "min-r"):
        sector, cert = {"max-a": conic.bounds_max_a, "min-b": conic.bounds_min_b,
                        "min-r": conic.bounds_min_radius}[method](view)
        pmin, worst = conic.recheck(view, cert)
        print(f"{method:6s} cone[{sector.a:+.4f}, {sector.b:.4f}]  centre {sector.centre:.4f}"
              f"  radius {sector.radius:.4f}  recheck {worst:.1e}")

    sector, _ = conic.bounds_min_radius(view)
    omegas = np.logspace(-3, 3, 400)
    print("Nyquist curve inside min-r disk:", conic.nyquist_in_sector(view, sector, omegas))


if __name__ == "__main__":
    main()

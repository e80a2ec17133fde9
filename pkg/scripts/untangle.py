"""Coarse NACA 0012 mesh with and without the log barrier.

The warped parametrization stretches the leading edge so a free Newton
step folds s there; the barrier catches it.
"""

import argparse

from hocurve import disparity as d
from hocurve import geometry as g
from hocurve import mesh as m
from hocurve import optimizer as o


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--curve", default="naca0012_warped")
    ap.add_argument("--R", type=int, default=4)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--q", type=int, default=3)
    ap.add_argument("--layout", default="constrained")
    args = ap.parse_args()

    c = g.builtin(args.curve)
    x, s = m.interpolate_meshes(c, args.R, args.p, args.q, m.uniform_partition(c, args.R))
    L = m.DofLayout(args.layout, args.R, args.p, args.q)
    for barrier in (True, False):
        _, so, rep = o.optimize(c, x, s, L, o.Config(barrier=barrier))
        print(
            f"barrier={barrier!s:<5} iterations={rep.iterations:3d} activations={rep.barrier_activations}"
            f" tangled_iterates={rep.invalid_iterates} final_valid={d.check_validity(so, 10 * args.q)}"
            f" E {rep.E_initial:.3e} -> {rep.E_final:.3e} {rep.failure}"
        )


if __name__ == "__main__":
    main()

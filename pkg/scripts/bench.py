"""Wall time and per-worker load for element- and curve-level parallelism."""

import argparse
import os

import numpy as np

from hocurve import analysis as an
from hocurve import geometry as g
from hocurve import mesh as m
from hocurve.parallel import MeshParams, run_by_curves, run_by_elements


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=int, default=64)
    ap.add_argument("--workers", nargs="+", type=int, default=[1, 2, 4])
    ap.add_argument("--suite", type=int, default=20)
    args = ap.parse_args()
    print(f"cores: {os.cpu_count()}")

    c = g.circle()
    x, s = m.interpolate_meshes(c, args.R, 2, 3, m.arclength_partition(c, args.R))
    ref = None
    for k in args.workers:
        rep = run_by_elements(c, x, s, workers=k)
        key = rep.x.nodes.tobytes() + rep.s.nodes.tobytes()
        ref = ref or key
        print(f"by_element workers={k}: {rep.wall_time:.3f}s load={rep.histogram} identical={key == ref}")

    curves = an.synthetic_suite(args.suite)
    for k in args.workers:
        rep = run_by_curves(curves, MeshParams(2, None, 12), workers=k)
        per = np.array(rep.task_seconds)
        print(f"by_curve  workers={k}: {rep.wall_time:.3f}s load={rep.histogram} slowest task {per.max():.3f}s")


if __name__ == "__main__":
    main()

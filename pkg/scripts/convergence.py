"""Convergence orders of the optimized disparity, circle (2D) and sphere arc (3D).

    python scripts/convergence.py --curve circle sphere_arc --p 2 3 4
"""

import argparse
import json

from hocurve import analysis as an
from hocurve import geometry as g


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--curve", nargs="+", default=["circle", "sphere_arc"])
    ap.add_argument("--p", nargs="+", type=int, default=[2, 3, 4])
    ap.add_argument("--R", nargs="+", type=int, default=[2, 4, 8, 16, 32])
    ap.add_argument("--layout", nargs="+", default=["constrained", "unconstrained"])
    ap.add_argument("--json", help="also dump the studies here")
    args = ap.parse_args()

    dump = []
    for name in args.curve:
        for layout in args.layout:
            st = an.run_study(g.builtin(name), args.p, args.R, layout)
            print(f"\n{name}  {layout}")
            print(f"{'p':>3} {'R':>4} {'initial':>12} {'optimized':>12}")
            for _, p, _, _, R, e0, e1 in st.rows():
                print(f"{p:3d} {R:4d} {e0:12.4e} {e1:12.4e}")
            for p, v in st.orders.items():
                print(f"  p={p}: initial order {v['initial']:.2f}, optimized order {v['optimized']:.2f}")
            dump.append(st.to_dict())
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(dump, fh, indent=2)


if __name__ == "__main__":
    main()

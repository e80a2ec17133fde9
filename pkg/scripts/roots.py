"""Zeros of the tangential, normal and binormal error on one element."""

import argparse

from hocurve import analysis as an
from hocurve import geometry as g

CASES = [("semicircle", 2, 3), ("semicircle", 3, 5), ("sphere_arc", 2, 3), ("sphere_arc", 3, 10)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=2000)
    args = ap.parse_args()
    print(f"{'curve':<12} {'p':>2} {'q':>3} {'|e| init':>9} {'e.t':>4} {'e.n':>4} {'e.b':>4}  E0 -> E")
    for name, p, q in CASES:
        r, _, _ = an.run_root_study(g.builtin(name), p, q, samples=args.samples)
        b = "-" if r.binormal is None else r.binormal
        print(f"{name:<12} {p:2d} {q:3d} {r.initial_abs:9d} {r.tangent:4d} {r.normal:4d} {b:>4}  {r.E_initial:.2e} -> {r.E_final:.2e}")


if __name__ == "__main__":
    main()

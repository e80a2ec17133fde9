"""Constrained vs unconstrained over the synthetic suite, plus error reduction."""

import argparse

from hocurve import analysis as an
from hocurve.optimizer import Config
from hocurve.parallel import MeshParams, run_by_curves


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--R", type=int, default=12)
    ap.add_argument("--R-reduction", type=int, default=48)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    curves = an.synthetic_suite(args.n, args.seed)
    out = an.suite_comparison(curves, 2, args.R, workers=args.workers)
    print(f"p=2 R={args.R}")
    print(f"{'curve':<14} {'con it':>7} {'unc it':>7} {'con E':>11} {'unc E':>11}")
    for a, b in zip(out["constrained"].results, out["unconstrained"].results):
        ra, rb = a.report, b.report
        print(f"{a.name:<14} {ra.iterations:7d} {rb.iterations:7d} {ra.E_final:11.3e} {rb.E_final:11.3e}")
    for k, rep in out.items():
        its = sum(r.report.iterations for r in rep.results if not r.error)
        conv = sum(bool(r.report and r.report.converged) for r in rep.results)
        print(f"{k:<14} total iterations {its}, converged {conv}/{len(rep.results)}")

    for p in (2, 3):
        rep = run_by_curves(curves, MeshParams(p, None, args.R_reduction, "constrained", "preoptimize"), Config(), args.workers)
        print(f"p={p} R={args.R_reduction}: mean reduction {100 * an.mean_reduction(rep):.1f}%")


if __name__ == "__main__":
    main()

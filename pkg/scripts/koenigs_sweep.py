#!/usr/bin/env python3
"""Sweep the scalar quadratic map phi(z) = lam z + c z^2 and compare the
computed intertwining map against the classical iteration limit
lam^{-n} phi^n, inside and outside the convergence ball."""

import argparse

import numpy as np

from loewner import DiscreteEvolutionFamily, PolyJet, build_normal_form, extend_intertwining
from loewner.sampling import complex_ball_points


def koenigs_limit(lam, c, points, iterations=400):
    z = np.array(points, dtype=complex)
    out = np.array(points, dtype=complex)
    for n in range(1, iterations + 1):
        z = lam * z + c * z * z
        out = z / lam ** n
    return out


def run(lams, cs, order, radius, count):
    print(f"{'lam':>5} {'c':>5} {'ell':>4} {'r':>6} {'s':>8} "
          f"{'jet gap':>10} {'ext gap':>10}")
    for lam in lams:
        for c in cs:
            step = PolyJet.from_terms(1, order, {(0, (1,)): lam, (0, (2,)): c})
            fam = DiscreteEvolutionFamily(np.array([[lam]], dtype=complex), (step,) * 2)
            res = build_normal_form(fam, extension=16)
            cs_ = res.constants

            pts = radius * complex_ball_points(1, 1.0, count)
            want = koenigs_limit(lam, c, pts[0])
            got = res.intertwining_jet(0).evaluate_many(pts)[0]
            jet_gap = float(np.max(np.abs(got - want)))

            # push one point from well outside the certified ball
            far = np.array([[0.9 + 0.0j]])
            ext = extend_intertwining(res, 0, far, radius=0.5 * cs_.r, tol=1e-7)
            ext_gap = float(abs(ext[0, 0] - koenigs_limit(lam, c, far[0])[0]))

            print(f"{lam:5.2f} {c:5.2f} {cs_.ell:4d} {cs_.r:6.3f} {cs_.s:8.5f} "
                  f"{jet_gap:10.2e} {ext_gap:10.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", type=int, default=8, help="jet truncation order")
    ap.add_argument("--radius", type=float, default=0.1,
                    help="sample radius for the jet comparison")
    ap.add_argument("--count", type=int, default=20, help="sample points")
    args = ap.parse_args()
    run(lams=(0.3, 0.5, 0.7), cs=(0.05, 0.1), order=args.order,
        radius=args.radius, count=args.count)

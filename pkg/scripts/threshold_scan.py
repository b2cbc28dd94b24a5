"""Observed critical trace exponent r* for a family of Matérn kernels on (0, 1).

For each smoothness nu the kernel is projected onto the Laplacian eigenbasis,
r* is located by bisection on the tail decay, and the result is printed next
to the largest exponent the regularity statements guarantee.

    python3 scripts/threshold_scan.py --bc dirichlet --nu 0.5 1.5 2.5
"""

import argparse
import math

from kernreg.analysis import critical_exponent, galerkin_project, predicted_thresholds
from kernreg.elliptic import BoundaryCondition, laplacian_basis
from kernreg.errors import BracketNotFoundError
from kernreg.geometry import Domain
from kernreg.kernels import builtin_kernel


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nu", type=float, nargs="+", default=[0.5, 1.5, 2.5, 4.5])
    p.add_argument("--length", type=float, default=0.3)
    p.add_argument("--bc", choices=["dirichlet", "neumann"], default="dirichlet")
    p.add_argument("--J", type=int, default=200, help="number of basis functions")
    return p.parse_args()


def main():
    args = parse_args()
    interval = Domain.interval(0.0, 1.0)
    bc = BoundaryCondition.dirichlet() if args.bc == "dirichlet" else BoundaryCondition.neumann(1.0)
    basis = laplacian_basis(interval, bc, args.J)
    grid = (0.0, 0.25, 0.75, 1.25, 1.75, 2.25, 2.75)
    print(f"{'nu':>6} {'r* observed':>18} {'guaranteed below':>17}")
    for nu in args.nu:
        kernel = builtin_kernel("matern", nu=nu, length=args.length)
        Q = galerkin_project(kernel, basis)
        guaranteed = predicted_thresholds(kernel, bc, 1).trace_bound()
        try:
            ce = critical_exponent(Q, basis, r_grid=grid)
            observed = f"{ce.rstar:.3f} +- {ce.uncertainty:.3f}"
        except BracketNotFoundError as exc:
            observed = f"{'>' if exc.side == 'above' else '<'} {exc.bound:g}"
        bound = "inf" if math.isinf(guaranteed) else f"{guaranteed:g}"
        print(f"{nu:6.2f} {observed:>18} {bound:>17}")


if __name__ == "__main__":
    main()

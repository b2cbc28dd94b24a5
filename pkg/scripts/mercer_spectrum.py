"""Nyström eigenvalues of a covariance kernel on (0, 1) and their decay rate.

Prints the leading eigenvalues, the fitted exponent p in mu_j ~ j^-p over the
resolved part of the spectrum and, for Matérn kernels, the asymptotic value
2 nu + 1 implied by the spectral density.

    python3 scripts/mercer_spectrum.py --kernel matern --nu 1.5 --length 0.2
"""

import argparse

import numpy as np

from kernreg.analysis import nystrom_mercer
from kernreg.geometry import Domain, gauss_legendre_panels
from kernreg.kernels import builtin_kernel


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--kernel", default="exponential", help="builtin kernel name")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--length", type=float, default=None)
    p.add_argument("--panels", type=int, default=60)
    p.add_argument("--order", type=int, default=10)
    p.add_argument("--show", type=int, default=10, help="eigenvalues to print")
    return p.parse_args()


def decay_exponent(mu, floor=1e-10):
    """Slope of log mu_j against log j, or nan when the spectrum drops below ``floor`` too early.

    Nyström eigenvalues of kernels with a kink on the diagonal are accurate
    up to about a fifth of the node count, so the fit stops there.
    """
    n = mu.size
    resolved = int(np.count_nonzero(mu > floor * mu[0]))
    j = np.arange(1, n + 1)
    sel = (j >= max(2, n // 20)) & (j <= min(n // 5, resolved // 2))
    if sel.sum() < 3:
        return float("nan")
    return -float(np.polyfit(np.log(j[sel]), np.log(mu[sel]), 1)[0])


def main():
    args = parse_args()
    params = {k: v for k, v in (("nu", args.nu), ("length", args.length)) if v is not None}
    kernel = builtin_kernel(args.kernel, **params)
    rule = gauss_legendre_panels(Domain.interval(0.0, 1.0), args.panels, args.order)
    spectrum = nystrom_mercer(kernel, rule)
    for j, mu in enumerate(spectrum.mu[: args.show], start=1):
        print(f"mu_{j:<3d} {mu:.10e}")
    print(f"sum of eigenvalues {spectrum.mu.sum():.10f}, clipped mass {spectrum.clipped_mass:.1e}")
    p = decay_exponent(spectrum.mu)
    if np.isnan(p):
        resolved = int(np.count_nonzero(spectrum.mu > 1e-10 * spectrum.mu[0]))
        print(f"faster than any power: only {resolved} eigenvalues above 1e-10 of the first")
    else:
        print(f"fitted decay exponent {p:.3f}")
    if args.kernel == "matern" and args.nu is not None:
        print(f"asymptotic exponent 2 nu + 1 = {2 * args.nu + 1:g}")


if __name__ == "__main__":
    main()

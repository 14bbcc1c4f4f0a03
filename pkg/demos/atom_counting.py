"""Counting atoms from steady-state noise.

Long after the coherent transient has decayed, the photocurrent fluctuations
carry the stationary spin variance qN/2 on top of the photon shot-noise
floor; inverting the variance estimator yields the atom number.  At the
reference parameters the shot noise dominates, so the relative error falls
slowly, roughly as 200/sqrt(k).  Run with

    python3 demos/atom_counting.py
"""

import math

import numpy as np

from spinfid import SpmParams, estimate_atom_number
from spinfid.atoms import sample_steady_state_outcomes


def main() -> None:
    p = SpmParams()
    shot = p.R / (p.g_D ** 2 * p.Delta)
    print(f"true atom number        : {p.N:.3e}")
    print(f"stationary spin variance: {0.5 * p.q * p.N:.3e}")
    print(f"shot-noise floor        : {shot:.3e}  "
          f"({shot / (0.5 * p.q * p.N):.0f}x larger)")
    print()
    print("        k        N_hat / N    reported sigma/N    ~200/sqrt(k)")
    for k in (10_000, 100_000, 1_000_000, 4_000_000):
        ests = []
        for seed in range(8):
            y = sample_steady_state_outcomes(p, p.omega_bar, k, seed=seed)
            ests.append(estimate_atom_number(y, p))
        ratio = np.mean([e.n_hat for e in ests]) / p.N
        sig = np.mean([e.sigma_n for e in ests]) / p.N
        print(f"{k:10d} {ratio:14.3f} {sig:18.3f} {200.0 / math.sqrt(k):15.3f}")
    print()
    print("averaged over 8 independent draws per row")


if __name__ == "__main__":
    main()

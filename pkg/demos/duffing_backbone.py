"""Backbone curve of an undamped Duffing oscillator.

A single mass between two walls with linear and cubic springs reduces
to x'' + 2 x + 0.6 x^3 = 0. The script computes the order-5 manifold of
the (only) mode pair, evaluates the amplitude-frequency relation, and
compares it against periodic orbit frequencies obtained by quadrature
of the exact energy integral.
"""

import numpy as np
from scipy.integrate import quad

from ssmkit import (backbone, compute_manifold, extract_polar_rom,
                    master_spectrum, oscillator_chain, write_backbone_csv)


def orbit_frequency(a, k2=2.0, beta=0.6):
    # quarter period of x'' + k2 x + beta x^3 = 0 starting at rest from x = a
    val, _ = quad(lambda phi: 1.0 / np.sqrt(
        k2 + beta * a * a * (1.0 + np.sin(phi) ** 2) / 2.0), 0.0, np.pi / 2)
    return 2.0 * np.pi / (4.0 * val)


def main():
    duff = oscillator_chain(1, m=1.0, k=1.0, c=0.0, kappa=0.3)
    ms = master_spectrum(duff, select={"mode": "pair", "pair": 1}, n_outer=0)
    man = compute_manifold(duff, ms, order=5)
    rom = extract_polar_rom(man)
    print(rom)
    print("largest |Re gamma|: %.2e (conservative system, so the radial"
          % np.abs(rom.gammas.real).max())
    print("equation is trivial and periodic orbits fill the manifold)")
    print()

    curve = backbone(man, rho_max=0.1, n=11, dof=0)
    print("%10s %12s %14s %14s %10s"
          % ("rho", "amplitude", "omega (model)", "omega (orbit)", "rel err"))
    for r, w, a in zip(curve.rho[1:], curve.omega[1:], curve.amp[1:]):
        w_ref = orbit_frequency(a)
        print("%10.4f %12.6f %14.8f %14.8f %10.2e"
              % (r, a, w, w_ref, abs(w - w_ref) / w_ref))

    write_backbone_csv(curve, "duffing_backbone.csv")
    print()
    print("curve written to duffing_backbone.csv")


if __name__ == "__main__":
    main()

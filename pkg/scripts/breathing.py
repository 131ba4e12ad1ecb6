"""Recovered fraction after a 60 -> 60/ratio Er lattice quench versus hold time.

Prints the shallow-lattice band weights, the damped-cosine summary of the
curve in 1D and 3D, the E2 - E0 beat period and the excited-band loss.

    python scripts/breathing.py [--ratio R]
"""
import argparse

import numpy as np

from rb2stirap import fitting, lattice as lt


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ratio", type=float, default=10.0)
    ap.add_argument("--deep", type=float, default=60.0)
    args = ap.parse_args()

    model = lt.QuenchModel(args.deep, args.ratio)
    dec = model.decomposition
    print("band weights:", np.array2string(dec.band_weights[:6], precision=4))
    j = int(np.argmin(np.abs(model.shallow.q)))
    hz = lt.recoil_energy(model.shallow.params).hertz
    beat = 1e6 / ((model.shallow.energies[2, j] - model.shallow.energies[0, j]) * hz)
    print(f"h/(E2-E0) at q=0: {beat:.1f} us; harmonic 2 pi/omega_t at s'={dec.depth:g}: "
          f"{2 * np.pi / lt.trap_frequency(model.shallow.params) * 1e6:.1f} us")

    tau = np.linspace(0.0, 400.0, 401)
    w = model.lowest_band_weight(tau)
    for dims in (1, 3):
        y = 0.75 * w**dims
        osc = fitting.analyze_oscillation(tau, y, 80.0)
        print(f"{dims}D: period {osc.period:.1f} us, damping {osc.damping_time:.1f} us, "
              f"plateau {osc.plateau:.3f}")

    kept, lost = lt.excited_band_loss(dec)
    recap = np.sum(np.abs(model.back) ** 2 * np.abs(kept.amplitudes) ** 2)
    print(f"unbound weight per axis {lost:.3f}; long-time 3D recovery after loss {0.75 * recap**3:.3f}")

    print(f"{'tau_us':>7} {'recovered_3D':>12}")
    for t, y in zip(tau[::20], 0.75 * w[::20] ** 3):
        print(f"{t:7.0f} {y:12.5f}")


if __name__ == "__main__":
    main()

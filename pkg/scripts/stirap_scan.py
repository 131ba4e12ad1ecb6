"""Round-trip STIRAP efficiency versus two-photon detuning, and the
single-pass efficiency, adiabaticity-only loss and FWHM at the defaults.

    python scripts/stirap_scan.py [--ramp US] [--points N]
"""
import argparse

import numpy as np

from rb2stirap import qdyn
from rb2stirap.qdyn import LambdaParams, mhz, to_mhz


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ramp", type=float, default=qdyn.DEFAULT_RAMP)
    ap.add_argument("--points", type=int, default=41)
    args = ap.parse_args()

    sched = qdyn.stirap_schedule(ramp=args.ramp)
    params = LambdaParams()
    grid = mhz(np.linspace(-2.0, 2.0, args.points))
    eff, mid = qdyn.stirap_round_trip(grid, sched, params)

    print(f"{'delta_MHz':>10} {'roundtrip':>10} {'mid_hold_f':>11}")
    for d, e, m in zip(to_mhz(grid), eff.ordinate, mid.ordinate):
        print(f"{d:10.3f} {e:10.5f} {m:11.2e}")

    ideal, _ = qdyn.stirap_round_trip([0.0], sched, params.replace(gamma_laser=0.0))
    print(f"single pass {qdyn.single_pass_efficiency(sched, params):.4f}; "
          f"round trip without phase noise {ideal.ordinate[0]:.4f}; "
          f"FWHM {qdyn.fwhm(to_mhz(grid), eff.ordinate):.3f} MHz")


if __name__ == "__main__":
    main()

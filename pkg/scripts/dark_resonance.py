"""Dark-resonance spectra for both scan setups, plus the Omega2 fit.

    python scripts/dark_resonance.py [--points N]
"""
import argparse

import numpy as np

from rb2stirap import fitting, qdyn
from rb2stirap.qdyn import LambdaParams, mhz, to_mhz


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=61)
    args = ap.parse_args()

    o1, o2 = mhz(0.7), mhz(10.0)
    params = LambdaParams()
    grid = mhz(np.linspace(-15.0, 15.0, args.points))
    scans = {lab: qdyn.square_pulse_scan(grid, 3.0, o1, o2, params, scanned_laser=lab) for lab in (2, 1)}

    print(f"{'delta_MHz':>10} {'laser2_scan':>12} {'laser1_scan':>12}")
    for i, d in enumerate(to_mhz(grid)):
        print(f"{d:10.3f} {scans[2].ordinate[i]:12.6f} {scans[1].ordinate[i]:12.6f}")

    for lab, scan in scans.items():
        rep = fitting.fit_autler_townes(scan, o1, params, scanned_laser=lab)
        print(f"laser {lab} scanned: fitted Omega2 = {to_mhz(rep['omega2']):.4f} "
              f"+- {to_mhz(rep.sigmas['omega2']):.4f} MHz, baseline {rep['baseline']:.2e}")


if __name__ == "__main__":
    main()

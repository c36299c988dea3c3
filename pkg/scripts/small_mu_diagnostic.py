"""Speed law, test-function energy and profile distance on a small-mu grid.

The acceptance grid (mu >= 0.01 at k0 = 1) has an envelope width 1/(b mu) below one
carrier wavelength; this run goes to mu = 0.002 where the envelope spans several
wavelengths.  Usage: python3 scripts/small_mu_diagnostic.py [out_dir]
"""

import sys
import time

from flexwave.experiments import (
    StudyConfig,
    study_profile_convergence,
    study_speed_law,
    study_test_function,
)

MU_GRID = (0.005, 0.004, 0.003, 0.0025, 0.002)


def main(out="out/small_mu"):
    cfg = StudyConfig(mu_grid=MU_GRID, c_ell=1.5)
    t0 = time.time()
    reports = [
        study_test_function(cfg),
        study_speed_law(cfg),
        study_profile_convergence(cfg),
    ]
    for rep in reports:
        rep.write(out)
        print(f"== {rep.name}: {'PASS' if rep.passed else 'FAIL'}")
        for row in rep.rows:
            print("   " + "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()
                                  if k in ("mu", "ratio", "nu_mu", "speed_shift_over_mu2",
                                           "energy_excess_over_mu3", "distance", "seed")))
        for c in rep.checks:
            print(f"   {'ok ' if c.passed else 'BAD'} {c.name}: {c.value:.6g} (target {c.target:.6g}, tol {c.tol:g})")
    print(f"elapsed {time.time() - t0:.1f} s")


if __name__ == "__main__":
    main(*sys.argv[1:])

"""Run every study on the default grid, write JSON reports and plot-ready CSV.

Usage: python3 scripts/run_acceptance_studies.py [out_dir] [--svg]
"""

import sys
import time

from flexwave.cli import emit_plot_data
from flexwave.experiments import StudyConfig, run_all


def main(argv):
    svg = "--svg" in argv
    args = [a for a in argv if a != "--svg"]
    out = args[0] if args else "out/acceptance"
    t0 = time.time()
    reports = run_all(StudyConfig())
    for rep in reports:
        rep.write(out)
        emit_plot_data(rep, out, svg=svg)
        print(f"{rep.name:24s} {'PASS' if rep.passed else 'FAIL'}")
        for c in rep.checks:
            if not c.passed:
                print(f"    {c.name}: {c.value:.6g} vs {c.target:.6g} (tol {c.tol:g}) {c.note}")
        for e in rep.excluded:
            print(f"    excluded mu={e['mu']}: {e['reason']}")
    print(f"elapsed {time.time() - t0:.1f} s")


if __name__ == "__main__":
    main(sys.argv[1:])

"""Crest-centred versus trough-centred minimisers on the default mu grid.

Both seeds converge to critical points; the table shows which one has the
lower J_mu (the one kept by the minimiser).  Usage: python3 scripts/branch_comparison.py
"""

import math

from flexwave.errors import FlexwaveError
from flexwave.experiments import ACCEPTANCE_MU_GRID, StudyConfig
from flexwave.minimizer import minimize


def main():
    cfg = StudyConfig()
    nu0 = cfg.context().nu0
    print(f"{'mu':>7} {'branch':>7} {'J_mu':>14} {'(nu-nu0)/mu^2':>14} {'conv':>5}")
    for mu in ACCEPTANCE_MU_GRID:
        for label, omega in (("crest", 0.0), ("trough", math.pi)):
            try:
                res = minimize(cfg.minimize_config(mu, phases=(omega,)))
            except FlexwaveError as exc:
                print(f"{mu:7.3f} {label:>7} failed: {exc}")
                continue
            print(f"{mu:7.3f} {label:>7} {res.report.j_mu:14.10f} "
                  f"{(res.nu_mu - nu0) / mu**2:14.3f} {str(res.converged):>5}")


if __name__ == "__main__":
    main()

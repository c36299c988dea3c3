"""Command-line front end: ``flexwave <command> [flags]``.

Exit codes: 0 success, 1 domain/config error (including bad flags), 2 solver
failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .dispersion import WaveContext, dispersion_table, eval_g
from .errors import ConfigError, DomainError, FlexwaveError, SolverError
from .experiments import StudyConfig, StudyReport, run_all
from .grid import write_profile_csv
from .minimizer import MinimizeConfig, MinimizeResult, continuation_sweep, minimize, normalize_translation
from .nls import focussing_threshold, nls_coefficients, soliton_samples, zeta_nls
from .outputs import config_hash, write_csv, write_json, write_svg

log = logging.getLogger("flexwave")

COMMANDS = ("dispersion", "coeffs", "threshold", "soliton", "minimize", "sweep", "validate")
EXIT_OK, EXIT_DOMAIN, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    k0: float | None = None
    gamma: float | None = None
    mu: float | None = None
    mu_grid: tuple = ()
    c_ell: float | None = None
    points_per_carrier: int | None = None
    expansion_order: int | None = None
    cg_tol: float | None = None
    grad_tol: float | None = None
    out: str = "out"
    seed: int = 1729
    formats: tuple = ("json", "csv")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.k0 is not None and self.gamma is not None:
            raise ConfigError("give at most one of --k0 and --gamma")
        if self.k0 is None and self.gamma is None:
            object.__setattr__(self, "k0", 1.0)
        if self.mu is not None and not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if any(not m > 0 for m in self.mu_grid):
            raise ConfigError("mu_grid values must be positive")
        bad = set(self.formats) - {"json", "csv", "svg"}
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")

    def context(self):
        return WaveContext.from_k0(self.k0) if self.k0 is not None else WaveContext.from_gamma(self.gamma)

    def overrides(self):
        keys = ("c_ell", "points_per_carrier", "grad_tol")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def dn_overrides(self):
        keys = ("expansion_order", "cg_tol")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def as_dict(self):
        return asdict(self)

    def record(self):
        """Config as embedded in outputs; the output directory is left out so content is location-free."""
        d = asdict(self)
        d.pop("out")
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    which = common.add_mutually_exclusive_group()
    which.add_argument("--k0", type=float, help="bifurcation wavenumber (default 1)")
    which.add_argument("--gamma", type=float, help="flexural rigidity")
    common.add_argument("--mu", type=float)
    common.add_argument("--mu-grid", type=float, nargs="+", dest="mu_grid")
    common.add_argument("--c-ell", type=float, dest="c_ell", help="domain half-length factor")
    common.add_argument("--points-per-carrier", type=int, dest="points_per_carrier")
    common.add_argument("--expansion-order", type=int, dest="expansion_order")
    common.add_argument("--cg-tol", type=float, dest="cg_tol")
    common.add_argument("--grad-tol", type=float, dest="grad_tol")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (FLEXWAVE_OUT overrides)")
    common.add_argument("--json", metavar="DIR", dest="json_dir", help="shorthand for --out DIR")
    common.add_argument("--svg", action="store_true", default=None, help="also render SVG plots")
    common.add_argument("--config", help="JSON file with any of the flags above; flags win")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="flexwave", description="Hydroelastic solitary waves as constrained minimisers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "dispersion": "phase-speed curve and k0 / nu0 table",
        "coeffs": "NLS coefficient dump",
        "threshold": "focussing threshold in k0 and gamma",
        "soliton": "zeta_NLS samples and ODE residual",
        "minimize": "minimise J_mu at one mu",
        "sweep": "continuation over a descending mu grid",
        "validate": "run every study and summarise pass/fail",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


_KEYS = ("k0", "gamma", "mu", "mu_grid", "c_ell", "points_per_carrier", "expansion_order", "cg_tol", "grad_tol",
         "seed", "out", "svg")


def run_config_from_args(ns, environ=None):
    """Merge the optional JSON config file under the flags, then apply ``FLEXWAVE_OUT``."""
    environ = os.environ if environ is None else environ
    merged = {}
    if ns.config:
        try:
            raw = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {ns.config}: {exc}") from exc
        unknown = set(raw) - set(_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        merged.update(raw)
    flags = {k: getattr(ns, k) for k in _KEYS if getattr(ns, k, None) is not None}
    if ns.json_dir is not None:
        flags.setdefault("out", ns.json_dir)
    if "k0" in flags or "gamma" in flags:
        merged.pop("k0", None)
        merged.pop("gamma", None)
    merged.update(flags)
    if environ.get("FLEXWAVE_OUT"):
        merged["out"] = environ["FLEXWAVE_OUT"]
    formats = ("json", "csv", "svg") if merged.pop("svg", False) else ("json", "csv")
    merged["mu_grid"] = tuple(float(m) for m in merged.get("mu_grid") or ())
    merged.setdefault("out", "out")
    merged.setdefault("seed", 1729)
    return RunConfig(command=ns.command, formats=formats, **merged)


# -- plot data --------------------------------------------------------------------------------


def emit_plot_data(report: StudyReport, out_dir, profile=None, svg=False):
    """Plot-ready CSV (and optionally SVG) for a study report.

    Writes the phase-speed curve, ``nu_mu`` against ``mu^2`` when the rows carry
    speeds, and a profile with the NLS envelope overlay when ``profile = (mu, eta)``
    is given.  An empty report writes nothing and returns ``[]``.
    """
    if not report.rows:
        return []
    out = Path(out_dir)
    cfg = report.config
    params = report.params
    ctx = WaveContext.from_k0(params["k0"])
    paths = []

    k, v = dispersion_table(ctx)
    paths.append(write_csv(out / f"{report.name}_dispersion.csv", ["k", "nu"], zip(k, v), cfg))
    if svg:
        paths.append(write_svg(out / f"{report.name}_dispersion.svg", [("nu(k)", k, v)], "phase speed", "k", "nu", cfg))

    speed_rows = [r for r in report.rows if r.get("nu_mu") is not None and r.get("converged", True)]
    if speed_rows:
        mu2 = [r["mu"] ** 2 for r in speed_rows]
        nus = [r["nu_mu"] for r in speed_rows]
        c = nls_coefficients(ctx)
        pred = [ctx.nu0 + c.speed_slope * m for m in mu2]
        paths.append(
            write_csv(out / f"{report.name}_speed.csv", ["mu_sq", "nu_mu", "nu_predicted"], zip(mu2, nus, pred), cfg)
        )
        if svg:
            paths.append(
                write_svg(
                    out / f"{report.name}_speed.svg",
                    [("computed", mu2, nus), ("nu0 + alpha_NLS nu_NLS mu^2", mu2, pred)],
                    "speed law",
                    "mu^2",
                    "nu_mu",
                    cfg,
                )
            )

    if profile is not None:
        mu, eta = profile
        x, vals, env = envelope_overlay(eta, mu, ctx)
        paths.append(
            write_csv(out / f"{report.name}_profile.csv", ["x", "eta", "envelope", "minus_envelope"],
                      zip(x, vals, env, -env), cfg, [f"mu={mu!r}"])
        )
        if svg:
            paths.append(
                write_svg(
                    out / f"{report.name}_profile.svg",
                    [("eta", x, vals), ("mu zeta_NLS(mu x)", x, env), ("", x, -env)],
                    f"minimiser at mu = {mu:g}",
                    "x",
                    "eta",
                    cfg,
                )
            )
    return paths


def envelope_overlay(eta, mu, ctx):
    """Centre ``eta`` and return ``(x, eta, mu zeta_NLS(mu x))``."""
    eta = normalize_translation(eta)
    c = nls_coefficients(ctx)
    x = eta.grid.x
    return x, eta.values, mu * zeta_nls(mu * x, c)


# -- commands ---------------------------------------------------------------------------------


def _study_config(rc: RunConfig):
    kw = {"k0": rc.k0, "gamma": rc.gamma, "seed": rc.seed, **rc.overrides(), **rc.dn_overrides()}
    if rc.mu_grid:
        kw["mu_grid"] = rc.mu_grid
    return StudyConfig(**kw)


def _minimize_config(rc: RunConfig, mu):
    sc = _study_config(rc)
    return replace(sc.minimize_config(mu), c_ell=rc.c_ell if rc.c_ell is not None else MinimizeConfig.c_ell)


def _params(ctx):
    return {"gamma": ctx.gamma, "k0": ctx.k0, "nu0": ctx.nu0}


def cmd_dispersion(rc: RunConfig):
    ctx = rc.context()
    k, v = dispersion_table(ctx)
    _, _, gpp = eval_g(ctx.k0, ctx)
    table = {**_params(ctx), "g_second_derivative_k0": gpp, "nu_min_sampled": float(v.min())}
    print(f"k0 = {ctx.k0:.10g}  gamma = {ctx.gamma:.10g}  nu0 = {ctx.nu0:.10g}  g''(k0) = {gpp:.6g}")
    out = Path(rc.out)
    write_json(out / "dispersion.json", {"config": rc.record(), "table": table})
    write_csv(out / "dispersion.csv", ["k", "nu"], zip(k, v), rc.record())
    if "svg" in rc.formats:
        write_svg(out / "dispersion.svg", [("nu(k)", k, v)], "phase speed", "k", "nu", rc.record())
    return EXIT_OK


def cmd_coeffs(rc: RunConfig):
    ctx = rc.context()
    c = nls_coefficients(ctx)
    d = c.as_dict()
    for name, val in d.items():
        print(f"{name:>8s} = {val: .10g}")
    print(f"{'cubic':>8s} = {c.cubic: .10g}  ({'focussing' if c.cubic < 0 else 'defocussing'})")
    write_json(Path(rc.out) / "coeffs.json", d)
    return EXIT_OK


def cmd_threshold(rc: RunConfig):
    k_star, g_star = focussing_threshold()
    print(f"k0* = {k_star:.4f}  gamma* = {g_star:.4e}")
    write_json(Path(rc.out) / "threshold.json", {"k0_star": k_star, "gamma_star": g_star})
    return EXIT_OK


def cmd_soliton(rc: RunConfig):
    c = nls_coefficients(rc.context())
    x, z, res = soliton_samples(c)
    rmax = float(np.max(np.abs(res)))
    print(f"zeta_NLS(0) = {z.max():.8g}  max |ODE residual| = {rmax:.3e}")
    out = Path(rc.out)
    write_csv(out / "soliton.csv", ["X", "zeta", "residual"], zip(x, z, res), rc.record())
    write_json(out / "soliton.json", {"config": rc.record(), "zeta_0": float(z.max()), "max_residual": rmax})
    return EXIT_OK


def _result_record(res: MinimizeResult, ctx):
    return {
        **res.summary(),
        "two_nu0_mu": 2.0 * ctx.nu0 * res.nu_mu * res.report.l_total,
        "below_linear_bound": res.report.j_mu < 2.0 * ctx.nu0 * res.nu_mu * res.report.l_total,
        "initial_alpha": res.initial_alpha,
        "report": res.report.as_dict(),
    }


def cmd_minimize(rc: RunConfig):
    if rc.mu is None:
        raise ConfigError("minimize needs --mu")
    mcfg = _minimize_config(rc, rc.mu)
    ctx = mcfg.context()
    res = minimize(mcfg)
    out = Path(rc.out)
    rec = {"config": rc.record(), "config_hash": config_hash(rc.record()), "result": _result_record(res, ctx)}
    write_json(out / "minimize.json", rec)
    write_profile_csv(res.eta, out / "profile.csv", [f"config_hash={config_hash(rc.record())}", f"mu={rc.mu!r}"])
    x, vals, env = envelope_overlay(res.eta, rc.mu, ctx)
    write_csv(out / "profile_overlay.csv", ["x", "eta", "envelope"], zip(x, vals, env), rc.record())
    if "svg" in rc.formats:
        write_svg(out / "profile_overlay.svg", [("eta", x, vals), ("mu zeta_NLS", x, env)],
                  f"minimiser at mu = {rc.mu:g}", "x", "eta", rc.record())
    s = rec["result"]
    print(f"mu = {rc.mu:g}  J = {s['j_mu']:.12g}  2 nu0 mu = {s['two_nu0_mu']:.12g}  nu_mu = {s['nu_mu']:.10g}  "
          f"converged = {s['converged']} ({s['stop_reason']}, {s['iterations']} it)")
    return EXIT_OK if res.converged else EXIT_SOLVER


def cmd_sweep(rc: RunConfig):
    mus = tuple(sorted(rc.mu_grid or ((rc.mu,) if rc.mu else StudyConfig().mu_grid), reverse=True))
    base = _minimize_config(rc, mus[0])
    ctx = base.context()
    results = continuation_sweep(mus, base)
    rows, last = [], None
    for mu, res in zip(mus, results):
        if isinstance(res, MinimizeResult):
            rows.append({"mu": mu, **res.summary(), "seed": res.seed})
            if res.converged:
                last = (mu, res.eta)
            print(f"mu = {mu:g}  J = {res.report.j_mu:.12g}  nu_mu = {res.nu_mu:.10g}  converged = {res.converged}")
        else:
            rows.append({"mu": mu, "error": str(res)})
            print(f"mu = {mu:g}  failed: {res}")
    rep = StudyReport("sweep", _params(ctx), rows=rows, config=rc.record())
    rep.write(rc.out)
    emit_plot_data(rep, rc.out, profile=last, svg="svg" in rc.formats)
    ok = all(isinstance(r, MinimizeResult) and r.converged for r in results)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_validate(rc: RunConfig):
    scfg = _study_config(rc)
    reports = run_all(scfg)
    out = Path(rc.out)
    summary = {}
    for rep in reports:
        rep.write(out)
        emit_plot_data(rep, out, svg="svg" in rc.formats)
        summary[rep.name] = rep.passed
        print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.name}")
        for c in rep.checks:
            if not c.passed:
                print(f"      {c.name}: {c.value:.6g} vs {c.target:.6g} (tol {c.tol:g}) {c.note}")
    write_json(out / "validate_summary.json", {"config": scfg.as_dict(), "passed": summary})
    return EXIT_OK if all(summary.values()) else EXIT_VALIDATION


HANDLERS = {
    "dispersion": cmd_dispersion,
    "coeffs": cmd_coeffs,
    "threshold": cmd_threshold,
    "soliton": cmd_soliton,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def parse_and_dispatch(argv=None, environ=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_DOMAIN
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rc = run_config_from_args(ns, environ)
        return HANDLERS[rc.command](rc)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except FlexwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main(argv=None):
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()

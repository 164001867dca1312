"""Command-line front end: ``bloch-instab SUBCOMMAND --config SCENARIO``.

Exit codes: 0 completed, 2 hypotheses unmet, 1 error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

import numpy as np

from . import config as cfgmod
from .errors import BlochInstabilityError, HypothesisError
from .evolution import linear_trajectory, nonlinear_evolve
from .growth import (damping_check, dissipative_bound, dissipative_coefficients,
                     fit_growth_sandwich, instability_experiment, rho_series,
                     dissipative_rates_ok)
from .projections import lambda_M
from .reporting import line_plot, write_csv, write_json
from .spectra import (XiGrid, bloch_spectrum, hypothesis_partition, lambda0, spectrum_rows,
                      unstable_set)

log = logging.getLogger("bloch_instability")

OK, ERROR, UNMET = 0, 1, 2


class Context:
    """Lazily built pieces of one scenario run."""

    def __init__(self, cfg, args):
        self.cfg, self.args = cfg, args
        self.op = cfg.build_operator()
        self.grid = cfg.spatial_grid()
        self.M = cfg.truncation
        self._box = None

    @property
    def box_sampling(self):
        if self._box is None:
            self._box = bloch_spectrum(self.op, XiGrid.for_grid(self.grid), self.M, self.args.jobs)
        return self._box

    def initial(self):
        if getattr(self.args, "u0", None):
            return cfgmod.read_samples(self.args.u0, self.grid, self.op.components)
        return cfgmod.load_initial_perturbation(self.cfg, self.grid, self.box_sampling, self.op,
                                                seed=self.args.seed)

    def report(self, u0):
        pr = self.cfg.projection
        return lambda_M(u0, self.box_sampling, pr.tau_act, self.cfg.p, pr.eps_gap)


def cmd_spectrum(ctx, out):
    s = bloch_spectrum(ctx.op, XiGrid.uniform(ctx.cfg.n_xi), ctx.M, ctx.args.jobs)
    top = lambda0(s)
    write_csv(out / "spectrum.csv", ["xi", "branch_id", "re_lambda", "im_lambda", "crossing_flag"],
              spectrum_rows(s))
    summary = {"lambda0": top.value, "lambda0_xi": top.xi, "lambda0_branch": top.branch_id}
    if s.xi_grid.count >= 16:
        us = unstable_set(s, ctx.cfg.p)
        summary["threshold"] = us.threshold
        summary["unstable_segments"] = [vars(m) for m in us.members]
        order = np.argsort([-b.values.real.max() for b in s.branches])[:6]
        line_plot(out / "spectrum.svg",
                  [(s.xi, s.branches[i].values.real, f"branch {i}") for i in order],
                  "xi", "Re lambda", f"{ctx.cfg.name}: top Bloch branches")
    write_csv(out / "summary.csv", ["key", "value"],
              [("lambda0", top.value), ("lambda0_xi", top.xi), ("lambda0_branch", top.branch_id),
               ("threshold", top.value / ctx.cfg.p)])
    return OK, summary


def cmd_lambdam(ctx, out):
    u0 = ctx.initial()
    rep = ctx.report(u0)
    write_csv(out / "masses.csv", ["xi", "branch_id", "re_lambda", "im_lambda", "mass"],
              rep.mass_rows())
    return (OK if rep.activated else UNMET), {"report": rep.to_dict(), "u0_l2": u0.l2}


def cmd_hypothesis(ctx, out):
    lam_m = ctx.cfg.experiment.lambda_m
    if lam_m is None:
        lam_m = ctx.report(ctx.initial()).lambda_m
    s = bloch_spectrum(ctx.op, XiGrid.uniform(ctx.cfg.n_xi), ctx.M, ctx.args.jobs)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            part = hypothesis_partition(s, lam_m, ctx.cfg.p, ctx.cfg.projection.eps_gap,
                                        ctx.cfg.projection.n_contour)
    except HypothesisError as exc:
        return UNMET, {"status": "hypotheses_unmet", "reason": str(exc), "lambda_m": lam_m}
    write_csv(out / "partition.csv", ["xi", "count"], zip(s.xi, part.counts))
    return OK, {
        "status": "completed", "lambda_m": lam_m, "threshold": part.threshold,
        "target": part.description,
        "intervals": [vars(i) for i in part.intervals],
        "contour": None if part.contour is None else part.contour.to_dict(),
        "warnings": list(part.warnings),
    }


def cmd_linear(ctx, out):
    u0 = ctx.initial()
    rep = ctx.report(u0)
    if not rep.activated:
        return UNMET, {"status": "hypotheses_unmet", "report": rep.to_dict()}
    ex = ctx.cfg.experiment
    diag = fit_growth_sandwich(ctx.op, u0, rep, rep.lambda_m - ex.omega_offset, ex.horizon,
                               ex.n_samples)
    write_csv(out / "growth.csv", ["t", "norm_full", "norm_projected"], diag.rows())
    t = diag.times
    line_plot(out / "growth.svg",
              [(t, diag.norm_full, "||e^{Lt}u0||"), (t, diag.norm_projected, "||P e^{Lt}u0||"),
               (t, diag.norm_full[0] * np.exp(rep.lambda_m * t), "lambda_M slope")],
              "t", "norm", f"{ctx.cfg.name}: linear growth", logy=True)
    return OK, {"status": "completed", "report": rep.to_dict(), "growth": diag.to_dict()}


def cmd_instability(ctx, out):
    u0 = ctx.initial()
    rep = ctx.report(u0)
    ex = ctx.cfg.experiment
    verdict = instability_experiment(ctx.op, ctx.cfg.build_nonlinearity(), u0, ex.eta, ex.deltas,
                                     rep, ex.dt, snapshot_stride=ex.snapshot_stride,
                                     refine=ex.refine)
    summary = {"report": rep.to_dict(), "verdict": verdict.to_dict()}
    if verdict.status != "completed":
        return UNMET, summary
    series = []
    for i, run in enumerate(verdict.runs):
        rho = rho_series(run.trajectory, verdict.lambda_m)
        write_csv(out / f"trajectory_{i}.csv", ["t", "l2", "h1", "h2", "rho"],
                  run.trajectory.rows(rho))
        series.append((run.trajectory.times, run.trajectory.l2, f"delta={run.delta:g}"))
    line_plot(out / "instability.svg", series, "t", "||u_delta||", f"{ctx.cfg.name}: runs to T",
              logy=True)
    summary["T_formula"] = "ln(2*eta/delta)/lambda_M"
    return OK, summary


def cmd_dissipative(ctx, out):
    cfg, ex = ctx.cfg, ctx.cfg.experiment
    u0 = ctx.initial()
    rep = ctx.report(u0)
    nonlin = cfg.build_nonlinearity()
    runs = {}
    for label, dt in (("dt", ex.dt), ("dt_half", ex.dt / 2)):
        traj = nonlinear_evolve(ctx.op, nonlin, u0, ex.damping_delta, ex.damping_horizon, dt,
                                snapshot_stride=ex.snapshot_stride, M=ctx.M)
        runs[label] = (traj, damping_check(traj, ex.theta, ex.damping_cap))
    traj, fit = runs["dt"]
    fit_half = runs["dt_half"][1]
    mean_drift = float(max(np.max(np.abs(s.mean() - traj.states[0].mean())) for s in traj.states))
    write_csv(out / "trajectory.csv", ["t", "l2", "h1", "h2", "rho"],
              traj.rows(rho_series(traj, rep.lambda_m, "H1") if rep.activated else None))
    summary = {
        "damping": fit.to_dict(), "damping_dt_half": fit_half.to_dict(),
        "C_relative_change": abs(fit.C - fit_half.C) / max(fit_half.C, 1e-300),
        "mean_drift": mean_drift, "report": rep.to_dict(),
    }
    p, lam0, lam_m = nonlin.p, rep.lambda0, rep.lambda_m
    if not (rep.activated and dissipative_rates_ok(p, lam0, lam_m, ex.theta)):
        summary["status"] = "hypotheses_unmet"
        summary["reason"] = (f"need (lambda0+theta)/(p-1) < lambda_M and lambda0/p < lambda_M; "
                             f"got lambda0={lam0:.6g}, theta={ex.theta:g}, lambda_M={lam_m:.6g}")
        return UNMET, summary
    times, states = linear_trajectory(ctx.op, u0, ex.horizon, ex.n_samples, M=ctx.M)
    h1 = np.array([np.sqrt(ctx.grid.length * np.sum((1 + ctx.grid.wavenumbers ** 2) * np.abs(F) ** 2))
                   for F in states])
    C = float(np.max(h1 * np.exp(-lam_m * times)))
    a_pm1, a_p = dissipative_coefficients(C, p, lam0, lam_m, ex.theta, ex.damping_delta * u0.h2)
    bound = dissipative_bound(p, ex.eta, ex.damping_delta, a_p, a_pm1, C)
    summary.update(status="completed", a_p=a_p, a_pm1=a_pm1, bound=bound.to_dict())
    return OK, summary


def cmd_selftest(ctx, out):
    from .selftest import run_all

    results = run_all()
    passed = all(r["passed"] for r in results)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['value']:.3g} (tol {r['tol']:g})")
    return (OK if passed else ERROR), {"checks": results, "passed": passed}


COMMANDS = {
    "spectrum": (cmd_spectrum, "Bloch spectrum CSV, lambda_0 and the strongly unstable set"),
    "lambdam": (cmd_lambdam, "activation report lambda_M(u0) for the initial perturbation"),
    "hypothesis": (cmd_hypothesis, "finite-partition check of the eigenvalue counts"),
    "linear": (cmd_linear, "linear growth sandwich diagnostics"),
    "instability": (cmd_instability, "nonlinear instability experiment up to T(delta)"),
    "dissipative": (cmd_dissipative, "damping estimate and the dissipative bound"),
    "selftest": (cmd_selftest, "run the built-in oracle checks"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="bloch-instab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name != "selftest",
                       help="scenario JSON path or bundled scenario name "
                            f"({', '.join(cfgmod.bundled_scenarios())})")
        p.add_argument("--out", help=f"output root (default: ${cfgmod.OUTPUT_ENV} or ./bloch_out)")
        p.add_argument("--seed", type=int, help="seed for random initial recipes")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for the xi sweep")
        p.add_argument("--dt", type=float, help="time step (overrides experiment.dt)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a dotted config key to a JSON value; repeatable")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "lambdam":
            p.add_argument("--u0", help="initial perturbation samples (.npy, .csv or text)")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        overrides = list(args.override)
        if args.dt is not None:
            overrides.append(f"experiment.dt={args.dt!r}")
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.command == "selftest" and args.config is None:
            cfg, ctx = None, None
            out = cfgmod.output_root(cfgmod.ScenarioConfig(name="selftest"), args.out) / "selftest"
        else:
            cfg = cfgmod.load_config(args.config, overrides)
            ctx = Context(cfg, args)
            out = cfgmod.output_root(cfg, args.out) / cfg.name / args.command
        out.mkdir(parents=True, exist_ok=True)
        code, summary = handler(ctx, out)
    except BlochInstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR
    summary["exit_code"] = code
    summary["command"] = args.command
    summary["config"] = None if cfg is None else cfg.to_dict()
    path = write_json(out / "summary.json", summary)
    print(f"{args.command}: exit {code}; summary at {path}")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

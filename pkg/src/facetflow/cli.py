"""Command-line front end: ``facetflow <mode> --config <path> [--out <dir>] [--seed <n>]``.

Exit codes: 0 converged, 2 non-convergence (partial outputs written),
3 configuration error, 4 I/O error. Every run, failed or not, leaves a
``summary.json`` in the output directory whenever that directory is writable.
"""

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import grid as gridmod
from .config import MODES, ConfigError, load_config
from .diagnostics import (DeGiorgiParams, apriori_report, degiorgi_iterate, energy_band,
                          gradient_bound_monitor, inequality_fuzz)
from .io import FieldFormatError, dump_field, write_summary
from .model import subgradient_select
from .scheme import continuation_solve, evolve, picard_step, solve_stationary

logger = logging.getLogger("facetflow")

EXIT_OK, EXIT_NONCONVERGED, EXIT_CONFIG, EXIT_IO = 0, 2, 3, 4
DEFAULT_OUT = "facetflow_out"


class _Run:
    """Mutable record of one run that always ends up as ``summary.json``."""

    def __init__(self, mode, out, seed, echo=None):
        self.out = Path(out)
        self.summary = {"version": __version__, "mode": mode, "seed": seed,
                        "config": echo or {}, "timings": {}, "files": []}
        self.status = {"exit_code": EXIT_OK, "converged": True, "failed_stage": None, "message": ""}

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.summary["timings"][name] = time.perf_counter() - start

    def fail(self, code, stage, message):
        self.status.update(exit_code=code, converged=False, failed_stage=stage, message=message)

    def field(self, name, values, grid):
        dump_field(values, self.out / name, grid)
        self.summary["files"].append(name)

    def fields(self, suffix, u, v, h, grid):
        self.field(f"u{suffix}.csv", u, grid)
        self.field(f"v{suffix}.csv", v, grid)
        self.field(f"h{suffix}_x.csv", h[..., 0], grid)
        self.field(f"h{suffix}_y.csv", h[..., 1], grid)

    def finish(self):
        self.summary["status"] = self.status
        try:
            self.out.mkdir(parents=True, exist_ok=True)
            write_summary(self.summary, self.out / "summary.json")
        except OSError as exc:
            logger.error("cannot write summary: %s", exc)
            return EXIT_IO
        return self.status["exit_code"]


def _fixed_point_check(f, u, v, params, grid, solver):
    """Relative change of v under one undamped Picard application."""
    undamped = replace(solver, picard=replace(solver.picard, damping=1.0))
    v_new, _, _ = picard_step(v, f, params, grid, undamped, u_guess=u)
    change = gridmod.norm_lp(v_new - v, 2, grid) / max(gridmod.norm_lp(v, 2, grid), 1.0)
    return {"change": change, "limit": 10 * solver.picard.tol_fp,
            "passed": bool(change <= 10 * solver.picard.tol_fp)}


def _run_stationary(cfg, run):
    grid, params = cfg.grid, cfg.params
    with run.stage("load"):
        f = cfg.f.materialize(grid)
    with run.stage("solve"):
        u, v, rep = solve_stationary(f, params, grid, cfg.solver)
    h = subgradient_select(gridmod.gradient(u, grid), params.tau)
    run.summary["picard"] = rep.summary()
    run.summary["sub_solves"] = [r.summary() for r in rep.sub_reports[-2:]]
    run.summary["estimates"] = apriori_report(u, v, h, f, params, grid).to_dict()
    if rep.converged:
        with run.stage("certify"):
            run.summary["fixed_point"] = _fixed_point_check(f, u, v, params, grid, cfg.solver)
    else:
        run.fail(EXIT_NONCONVERGED, "stationary", rep.message)
    with run.stage("write"):
        run.fields("", u, v, h, grid)


def _run_continuation(cfg, run):
    grid, params = cfg.grid, cfg.params
    with run.stage("load"):
        f = cfg.f.materialize(grid)
    with run.stage("solve"):
        sol = continuation_solve(f, params, grid, cfg.schedule, cfg.solver)
    final = params.with_tau(sol.tau_final)
    run.summary["levels"] = sol.levels
    run.summary["picard"] = [r.summary() for r in sol.reports]
    run.summary["estimates"] = apriori_report(sol.u, sol.v, sol.h, f, final, grid).to_dict()
    run.summary["membership_fraction"] = sol.membership_fraction(grid)
    if len(sol.levels) >= 3:
        verdict = gradient_bound_monitor([(L["tau"], L["grad_u_sup"]) for L in sol.levels], params.p)
        run.summary["gradient_monitor"] = verdict._asdict()
    run.summary["energy_band"] = energy_band([L["energy_psi"] for L in sol.levels])
    if sol.converged:
        with run.stage("certify"):
            run.summary["fixed_point"] = _fixed_point_check(f, sol.u, sol.v, final, grid, cfg.solver)
    else:
        run.fail(EXIT_NONCONVERGED, "continuation", sol.message)
    with run.stage("write"):
        run.fields("", sol.u, sol.v, sol.h, grid)


def _run_evolve(cfg, run):
    grid, params = cfg.grid, cfg.params
    with run.stage("load"):
        u0 = cfg.u0.materialize(grid)
        f_ext = cfg.f.materialize(grid) if cfg.f is not None else None
    with run.stage("solve"):
        traj = evolve(u0, params, grid, cfg.delta, cfg.nsteps, cfg.schedule, cfg.solver, f_ext=f_ext)
    run.summary["surface_energy"] = traj.surface_energy
    run.summary["steps"] = [
        {"step": k + 1, "converged": s.converged, "tau_final": s.tau_final,
         "picard_iterations": sum(r.iterations for r in s.reports),
         "membership_fraction": s.membership_fraction(grid),
         "grad_u_sup": s.levels[-1]["grad_u_sup"] if s.levels else None}
        for k, s in enumerate(traj.steps)
    ]
    if not traj.converged:
        run.fail(EXIT_NONCONVERGED, "evolve", traj.message)
    with run.stage("write"):
        run.field("u_step0.csv", u0, grid)
        for k, s in enumerate(traj.steps, start=1):
            run.fields(f"_step{k}", s.u, s.v, s.h, grid)


def _run_verify(cfg, run):
    vc = cfg.verify
    with run.stage("fuzz"):
        fuzz = inequality_fuzz(vc["samples"], seed=run.summary["seed"])
    with run.stage("degiorgi"):
        dg = degiorgi_iterate(DeGiorgiParams(vc["c"], vc["b"], vc["alpha"], vc["y0"]))
    run.summary["fuzz"] = fuzz.to_dict()
    consistent = dg.converged or not dg.threshold_pass
    run.summary["degiorgi"] = {"threshold_pass": dg.threshold_pass, "converged": dg.converged,
                               "diverged": dg.diverged, "length": len(dg.sequence),
                               "last": dg.sequence[-1], "consistent": consistent}
    if not fuzz.passed:
        bad = sorted(k for k, v in fuzz.max_violation.items() if v > fuzz.tolerance)
        run.fail(EXIT_NONCONVERGED, "verify", f"inequality violations: {', '.join(bad)}")
    elif not consistent:
        run.fail(EXIT_NONCONVERGED, "verify", "recursion below threshold did not converge")


_MODES = {"stationary": _run_stationary, "continuation": _run_continuation,
          "evolve": _run_evolve, "verify": _run_verify}


def run(cfg, out=None, seed=None):
    """Execute a parsed :class:`~facetflow.config.RunConfig` and return the exit code."""
    out = out or cfg.out or DEFAULT_OUT
    seed = cfg.seed if seed is None else seed
    record = _Run(cfg.mode, out, seed, cfg.echo)
    try:
        record.out.mkdir(parents=True, exist_ok=True)
        _MODES[cfg.mode](cfg, record)
    except (FieldFormatError, OSError) as exc:
        record.fail(EXIT_IO, "io", str(exc))
    return record.finish()


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="facetflow", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--out", help="output directory (overrides [run] out)")
    parser.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    parser.add_argument("--version", action="version", version=f"facetflow {__version__}")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, mode=args.mode)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        record = _Run(args.mode, args.out or DEFAULT_OUT, args.seed)
        record.fail(EXIT_CONFIG, "config", "; ".join(exc.errors))
        record.summary["config_errors"] = exc.errors
        return record.finish()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    code = run(cfg, out=args.out, seed=args.seed)
    if code != EXIT_OK:
        print(f"facetflow {args.mode}: exit {code}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

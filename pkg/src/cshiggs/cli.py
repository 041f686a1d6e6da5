"""Command line: ``cshiggs {solve,verify,sweep,fiber} --config FILE``.

Exit codes: 0 success, 1 usage or config error, 2 non-convergence,
3 verification failure.  CSV tables are header-first with fixed column
order; the effective configuration is appended as a final ``# config``
comment line, and written under the ``config`` key of every JSON file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import verify as _verify
from .config import ConfigError, RunConfig, load_config
from .core import h1_norm_sq
from .functional import CutoffSpec, fiber_map
from .mountainpass import (SolverError, SweepRow, auto_cutoff, find_endpoint,
                           find_negative_direction, solve, sweep_coupling)

__all__ = ["main", "cmd_solve", "cmd_verify", "cmd_sweep", "cmd_fiber",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_NOT_CONVERGED", "EXIT_CHECK_FAILED"]

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

log = logging.getLogger("cshiggs.cli")

PROFILE_COLUMNS = ("r", "u", "N", "h", "A0")
CHECK_COLUMNS = ("name", "trial", "passed", "measured", "bound_or_target", "tolerance",
                 "paper_anchor", "detail")
FIBER_COLUMNS = ("t", "J", "t2_term", "t4_term", "t6_term")


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    """Floats that JSON cannot hold (nan, inf) become null."""
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(float(x)) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _config_line(cfg: RunConfig) -> str:
    return "# config " + json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))


def write_csv(path, columns: Sequence[str], rows, cfg: RunConfig):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    buf.write(_config_line(cfg) + "\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_json(path, doc: dict, cfg: RunConfig):
    out = {"config": cfg.to_dict()}
    out.update(doc)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(out), fh, indent=1, sort_keys=False, allow_nan=False)
        fh.write("\n")


def _prepare(cfg: RunConfig) -> str:
    os.makedirs(cfg.directory, exist_ok=True)
    p = cfg.params
    if p.kappa * p.q < 0.5:
        log.warning("kappa*q = %.3g < 0.5: the neutral field decays slowly; "
                    "enlarge grid.R so that exp(-kappa q R) is negligible", p.kappa * p.q)
    return cfg.directory


def _say(msg: str, quiet: bool):
    if not quiet:
        print(msg)


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig, quiet: bool = False) -> int:
    out = _prepare(cfg)
    try:
        b, info = solve(cfg.params, cfg.grid, cfg.solver, cfg.T)
    except SolverError as exc:
        b = exc.bundle
        info = getattr(exc, "info", {})
        log.error("not converged: %s", exc)
        if b is None:
            if "json" in cfg.formats:
                write_json(os.path.join(out, "solution.json"),
                           {"converged": False, "message": str(exc), "search": info}, cfg)
            return EXIT_NOT_CONVERGED
    _write_solution(out, cfg, b, info)
    _say(f"{'converged' if b.converged else 'NOT converged'}: e={cfg.params.e:g} "
         f"J={b.energy.total:.12g} |u|_H1={b.h1_norm:.10g} T={b.T:.6g} K_T={b.k_t_at_solution:g} "
         f"res_u={b.residual_u:.3e} res_n={b.residual_n:.3e} "
         f"sweeps={b.path_sweeps} newton={b.newton_steps}", quiet)
    if not b.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _write_solution(out, cfg, b, info):
    r = b.u.grid.nodes
    if "json" in cfg.formats:
        diag = {k: v for k, v in b.diagnostics.items() if k != "newton_history"}
        doc = {
            "converged": b.converged,
            "message": b.message,
            "untruncated": b.untruncated,
            "energy": b.energy.as_dict(),
            "residual_u": b.residual_u,
            "residual_n": b.residual_n,
            "residual_u_untruncated": b.residual_u_untruncated,
            "mp_level_estimate": b.mp_level_estimate,
            "initial_path_max": b.initial_path_max,
            "k_t_at_solution": b.k_t_at_solution,
            "h1_norm": b.h1_norm,
            "T": b.T,
            "iterations": b.iterations,
            "path_sweeps": b.path_sweeps,
            "newton_steps": b.newton_steps,
            "search": info,
            "diagnostics": diag,
            "r": r,
            "u": b.u.values,
            "N": b.n_field.values,
            "h": b.h.values,
            "A0": b.a0.values,
        }
        write_json(os.path.join(out, "solution.json"), doc, cfg)
    if "csv" in cfg.formats:
        rows = zip(r, b.u.values, b.n_field.values, b.h.values, b.a0.values)
        write_csv(os.path.join(out, "profile.csv"), PROFILE_COLUMNS, rows, cfg)


def cmd_verify(cfg: RunConfig, trials: int, quiet: bool = False) -> int:
    if int(trials) < 1:
        raise ConfigError("trials must be >= 1")
    out = _prepare(cfg)
    results = _verify.run_lemma_suite(cfg.params, int(trials), seed=cfg.seed, grid=cfg.grid)
    if "csv" in cfg.formats:
        rows = ([getattr(r, c) for c in CHECK_COLUMNS] for r in results)
        write_csv(os.path.join(out, "checks.csv"), CHECK_COLUMNS, rows, cfg)
    if "json" in cfg.formats:
        write_json(os.path.join(out, "checks.json"),
                   {"trials": int(trials), "checks": [r.as_dict() for r in results]}, cfg)
    summary = [r for r in results if r.name.startswith("summary:") or r.trial == -1]
    for r in summary:
        _say(f"{'PASS' if r.passed else 'FAIL'}  {r.name:40s} {r.detail or _fmt(r.measured)}", quiet)
    failed = [r for r in results if not r.passed]
    for r in failed:
        if not r.name.startswith("summary:"):
            log.error("check %s failed at trial %d: measured %g (bound %g) %s",
                      r.name, r.trial, r.measured, r.bound_or_target, r.detail)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_sweep(cfg: RunConfig, param: str, a: float, b: float, steps: int,
              quiet: bool = False) -> int:
    if param != "e":
        raise ConfigError(f"only --param e is supported, got {param!r}")
    if not (0 < a < b) or not (math.isfinite(a) and math.isfinite(b)):
        raise ConfigError("sweep needs 0 < --from < --to")
    if int(steps) < 2:
        raise ConfigError("sweep needs --steps >= 2")
    out = _prepare(cfg)
    e_values = np.geomspace(a, b, int(steps))
    rows = sweep_coupling(cfg.params, e_values, cfg.grid, cfg.solver, cfg.T)
    if "csv" in cfg.formats:
        write_csv(os.path.join(out, "sweep.csv"), SweepRow.COLUMNS,
                  ([getattr(r, c) for c in SweepRow.COLUMNS] for r in rows), cfg)
    if "json" in cfg.formats:
        doc = {"param": param, "rows": [{c: getattr(r, c) for c in
                                          SweepRow.COLUMNS + ("cs_share", "message")}
                                         for r in rows]}
        write_json(os.path.join(out, "sweep.json"), doc, cfg)
    for r in rows:
        _say(f"e={r.e:.6g} {'ok ' if r.converged else 'n/c'} |u|={r.h1_norm:.6g} "
             f"J={r.energy:.10g} K_T={r.k_t:g} {r.message}", quiet)
    return EXIT_OK if any(r.converged for r in rows) else EXIT_NOT_CONVERGED


def cmd_fiber(cfg: RunConfig, tmax: Optional[float], samples: int, quiet: bool = False) -> int:
    if int(samples) < 8:
        raise ConfigError("fiber needs --samples >= 8")
    if tmax is not None and not (math.isfinite(tmax) and tmax > 0):
        raise ConfigError("fiber needs --tmax > 0")
    out = _prepare(cfg)
    p = cfg.params
    u_dir, lam, sigma, ratio = find_negative_direction(p, cfg.grid)
    c = auto_cutoff(u_dir, p) if cfg.T is None else CutoffSpec(cfg.T)
    if tmax is None:
        _, t_end = find_endpoint(u_dir, p, c)
        tmax = 2.0 * t_end
    ts = np.linspace(0.0, float(tmax), int(samples))
    fs = fiber_map(u_dir, p, c, ts)
    rows = [(s.t, s.value) + s.terms for s in fs]
    if "csv" in cfg.formats:
        write_csv(os.path.join(out, "fiber.csv"), FIBER_COLUMNS, rows, cfg)
    if "json" in cfg.formats:
        doc = {"direction": {"lambda": lam, "sigma": sigma, "ratio": ratio,
                             "h1_norm": math.sqrt(h1_norm_sq(u_dir))},
               "T": c.T, "a2": fs[0].a2, "a4": fs[0].a4,
               "columns": list(FIBER_COLUMNS), "rows": rows}
        write_json(os.path.join(out, "fiber.json"), doc, cfg)
    _say(f"fiber: lambda={lam:g} sigma={sigma:g} T={c.T:.6g} a2={fs[0].a2:.6g} "
         f"a4={fs[0].a4:.6g} J(tmax)={fs[-1].value:.6g}", quiet)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1, not argparse's 2 (reserved for non-convergence)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: config output.directory, else ./out)")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: config seed, else 42)")
    common.add_argument("--quiet", action="store_true", help="no summary on standard output")

    ap = _Parser(prog="cshiggs", description="Radial Chern-Simons-Higgs standing waves "
                 "by a mountain-pass solver.")
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="compute a mountain-pass solution")
    v = sub.add_parser("verify", parents=[common], help="run the randomized property suite")
    v.add_argument("--trials", type=int, default=100)
    s = sub.add_parser("sweep", parents=[common], help="solve over a geometric range of e")
    s.add_argument("--param", default="e", choices=["e"])
    s.add_argument("--from", dest="a", type=float, required=True)
    s.add_argument("--to", dest="b", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    f = sub.add_parser("fiber", parents=[common], help="tabulate the fibering map t -> J(t u)")
    f.add_argument("--tmax", type=float, default=None,
                   help="largest t (default: twice the endpoint scale)")
    f.add_argument("--samples", type=int, default=65)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    # diagnostics go to the current standard error, whatever the root logger does
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("cshiggs: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.WARNING)
    log.propagate = False
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = cfg.replace(directory=args.out)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg = cfg.replace(seed=args.seed)
        if args.verb == "solve":
            return cmd_solve(cfg, args.quiet)
        if args.verb == "verify":
            return cmd_verify(cfg, args.trials, args.quiet)
        if args.verb == "sweep":
            return cmd_sweep(cfg, args.param, args.a, args.b, args.steps, args.quiet)
        return cmd_fiber(cfg, args.tmax, args.samples, args.quiet)
    except ConfigError as exc:
        print(f"cshiggs: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"cshiggs: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())

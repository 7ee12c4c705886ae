"""Subcommand dispatch and CSV emission.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure,
3 property-suite failure. All floating-point output uses 17 significant
digits, and every run is deterministic given the configuration (fixed seeds,
fixed tie-breaking).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import action as actionmod
from . import aubry as aubrymod
from . import critical as criticalmod
from . import flow as flowmod
from . import weakkam
from .config import RunConfig, parse_config
from .errors import NumericalError, UsageError
from .grids import constant_field, write_field_csv
from .models import SampleSpec, audit_assumptions

SUBCOMMANDS = ("audit", "solve", "action", "aubry", "flow", "admissible", "verify")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _outdir(cfg: RunConfig, override):
    path = override or cfg["output.dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _solve_pair(cfg: RunConfig):
    model = cfg.model()
    grid = cfg.grid()
    kw = cfg.op_kwargs()
    um = weakkam.solve_backward(
        model,
        constant_field(grid, 0.0),
        cfg["time.dt"],
        tol_fix=cfg["tol.fix"],
        t_max=cfg["time.t_max"],
        blowup_guard=cfg["tol.blowup"],
        **kw,
    )
    up = weakkam.solve_forward(
        model,
        um.field,
        cfg["time.dt"],
        tol_fix=cfg["tol.fix"],
        t_max=cfg["time.t_max"],
        blowup_guard=cfg["tol.blowup"],
        **kw,
    )
    return model, grid, um, up


def _write_convergence(history, path):
    with open(path, "w") as fh:
        fh.write("step,t,sup_change\n")
        for step, t, ch in history:
            fh.write(f"{step},{_fmt(t)},{_fmt(ch)}\n")


def cmd_audit(cfg: RunConfig, out: str) -> int:
    model = cfg.model()
    report = audit_assumptions(model, SampleSpec())
    print(f"family {model.family}: H1 min eigenvalue {report.h1_min_eig:.6g} "
          f"({'pass' if report.h1_pass else 'FAIL'})")
    print(f"family {model.family}: dH/du in [{report.h3_min:.6g}, {report.h3_max:.6g}] "
          f"vs lambda = {model.lambda_bound:.6g} ({'pass' if report.h3_pass else 'FAIL'})")
    if not report.h1_pass:
        print(f"  worst H1 sample: x={report.worst_h1.x} u={report.worst_h1.u} p={report.worst_h1.p}")
    if not report.h3_pass:
        print(f"  worst H3 sample: x={report.worst_h3.x} u={report.worst_h3.u} p={report.worst_h3.p}")
    return 0 if report.passed else 3


def cmd_solve(cfg: RunConfig, out: str) -> int:
    model, grid, um, up = _solve_pair(cfg)
    write_field_csv(um.field, os.path.join(out, "u_minus.csv"))
    write_field_csv(up.field, os.path.join(out, "u_plus.csv"))
    write_field_csv(weakkam.hj_residual(model, um.field), os.path.join(out, "residual.csv"))
    _write_convergence(um.history, os.path.join(out, "convergence.csv"))
    print(f"u_minus converged at t = {um.t:.6g} (rate {um.rate:.3e}); "
          f"u_plus settled at t = {up.t:.6g}")
    print(f"wrote u_minus.csv, u_plus.csv, residual.csv, convergence.csv under {out}")
    return 0


def cmd_action(cfg: RunConfig, out: str) -> int:
    model = cfg.model()
    grid = cfg.grid()
    kw = cfg.op_kwargs()
    x0 = (cfg["action.x0"],) if grid.d == 1 else (cfg["action.x0"], cfg["action.y0"])
    u0 = cfg["action.u0"]
    delta = cfg["time.delta"]
    times = sorted(set(cfg["action.times"]))
    if not times or min(times) < delta:
        raise UsageError(f"action.times must all be >= time.delta = {delta}")
    slc = actionmod.init_action(model, grid, x0, u0, delta)
    t = delta
    path = os.path.join(out, "action.csv")
    nodes = grid.nodes()
    with open(path, "w") as fh:
        fh.write("t," + ",".join(f"x{i+1}" for i in range(grid.d)) + ",h\n")
        for target in times:
            slc = actionmod.propagate_action(model, slc, target - t, cfg["time.dt"], **kw)
            t = target
            for row, val in zip(nodes, slc.values.values.ravel()):
                fh.write(_fmt(t) + "," + ",".join(_fmt(c) for c in row) + f",{_fmt(val)}\n")
    print(f"wrote action slices at t = {times} to {path}")
    return 0


def cmd_aubry(cfg: RunConfig, out: str) -> int:
    model, grid, um, up = _solve_pair(cfg)
    dt = cfg["time.dt"]
    tol_set = cfg["tol.set"]
    if tol_set <= 0:
        tol_set = aubrymod.default_tol_set(model, um.field, dt, **cfg.op_kwargs())
    est = aubrymod.projected_aubry(model, um.field, up.field, tol_set, cfg["tol.clamp"])
    write_field_csv(est.barrier, os.path.join(out, "barrier.csv"))
    with open(os.path.join(out, "cells.csv"), "w") as fh:
        xs = ",".join(f"x{i+1}" for i in range(grid.d))
        ps = ",".join(f"p{i+1}" for i in range(grid.d))
        fh.write(f"{xs},u,{ps}\n")
        for row in est.lift:
            fh.write(",".join(_fmt(c) for c in row) + "\n")
    r_rec = cfg["recur.r"] if cfg["recur.r"] > 0 else None
    mat = aubrymod.mather_estimate(model, est, t_rec=cfg["recur.t"], dt_flow=cfg["flow.dt"], r_rec=r_rec)
    core = aubrymod.sigma_core_estimate(model, um.field, dt_flow=cfg["flow.dt"])
    hd = aubrymod.hausdorff_x(grid, est.cells, core)
    lip = aubrymod.graph_check(est) if est.cells.size >= 2 else float("nan")
    lines = [
        f"cells: {est.cells.size} of {grid.num_nodes} (tol_set = {tol_set:.6g})",
        f"max |Du+ - Du-| on cells: {est.grad_gap_max:.6g}",
        f"graph Lipschitz estimate: {lip:.6g}",
        f"mather classification: {mat.classification} ({len(mat.recurrent_idx)} recurrent points)",
        f"invariant-core estimate: {core.size} nodes; Hausdorff distance to cells: {hd:.6g}",
    ]
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    print(f"wrote barrier.csv, cells.csv, report.txt under {out}")
    return 0


def cmd_flow(cfg: RunConfig, out: str) -> int:
    model, grid, um, up = _solve_pair(cfg)
    x0 = (cfg["flow.x0"],) if grid.d == 1 else (cfg["flow.x0"], cfg["flow.y0"])
    grad_tol = cfg["tol.grad"] if cfg["tol.grad"] > 0 else None
    if cfg["flow.mode"] == "backward":
        traj = flowmod.calibrated_backward(
            model, um.field, x0, cfg["flow.t"], cfg["flow.dt"], grad_tol=grad_tol
        )
    elif cfg["flow.mode"] == "forward":
        traj = flowmod.calibrated_forward(
            model, up.field, x0, cfg["flow.t"], cfg["flow.dt"], grad_tol=grad_tol
        )
    else:
        raise UsageError(f"flow.mode must be backward or forward, got {cfg['flow.mode']!r}")
    path = os.path.join(out, "trajectory.csv")
    d = grid.d
    with open(path, "w") as fh:
        xs = ",".join(f"x{i+1}" for i in range(d))
        ps = ",".join(f"p{i+1}" for i in range(d))
        fh.write(f"t,{xs},u,{ps},H\n")
        hvals = model.H(traj.x(), traj.u(), traj.p())
        for t, s, h in zip(traj.times, traj.states, hvals):
            fh.write(_fmt(t) + "," + ",".join(_fmt(c) for c in s) + f",{_fmt(h)}\n")
    print(f"calibrated {cfg['flow.mode']} curve from x0 = {x0}: drift {traj.drift:.3e}")
    print(f"wrote {path}")
    return 0


def cmd_admissible(cfg: RunConfig, out: str) -> int:
    model = cfg.model()
    grid = cfg.grid()
    res = criticalmod.find_admissible_level(
        model,
        grid,
        a_lo=cfg["admissible.a_lo"],
        a_hi=cfg["admissible.a_hi"],
        tol_a=cfg["admissible.tol_a"],
        tol_c=cfg["admissible.tol_c"],
        dt=cfg["admissible.dt"],
        t_avg=cfg["admissible.t_avg"],
        **cfg.op_kwargs(),
    )
    path = os.path.join(out, "c_curve.csv")
    with open(path, "w") as fh:
        fh.write("a,c\n")
        for a, c in sorted(res.history):
            fh.write(f"{_fmt(a)},{_fmt(c)}\n")
    print(f"a* = {_fmt(res.a_star)} with c(H^a*) = {res.c_star:.6g} "
          f"after {res.iterations} bisection steps")
    print(f"wrote {path}")
    return 0


def cmd_verify(cfg: RunConfig, out: str) -> int:
    model = cfg.model()
    grid = cfg.grid()
    failures = 0
    report = audit_assumptions(model, SampleSpec())
    for name, ok in (("audit_H1", report.h1_pass), ("audit_H3", report.h3_pass)):
        print(f"{'pass' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    law = weakkam.law_report(
        model,
        grid,
        trials=cfg["verify.trials"],
        dt=min(cfg["time.dt"], cfg["time.dt_max"]),
        seed=cfg["verify.seed"],
        **cfg.op_kwargs(),
    )
    for line in law.lines():
        print(line)
    failures += sum(0 if c.passed else 1 for c in law.checks)
    print(f"verify: {failures} failure(s)")
    return 0 if failures == 0 else 3


_HANDLERS = {
    "audit": cmd_audit,
    "solve": cmd_solve,
    "action": cmd_action,
    "aubry": cmd_aubry,
    "flow": cmd_flow,
    "admissible": cmd_admissible,
    "verify": cmd_verify,
}


def run(subcommand: str, cfg: RunConfig, out_override=None) -> int:
    """Execute one subcommand against a parsed configuration."""
    if subcommand not in _HANDLERS:
        raise UsageError(f"unknown subcommand {subcommand!r}; choose from {SUBCOMMANDS}")
    out = _outdir(cfg, out_override)
    return _HANDLERS[subcommand](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="contactkam",
        description="Weak KAM / Aubry-Mather computations for contact Hamiltonian systems",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("config", help="path to a key = value configuration file")
    parser.add_argument("-o", "--out", default=None, help="output directory override")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        code = run(args.subcommand, cfg, args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())

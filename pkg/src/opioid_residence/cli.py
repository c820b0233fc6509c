"""Command-line entry point: ``opioid-residence <subcommand>``.

Every subcommand reads the optional ``--config`` file, writes CSV files
into ``--out`` (atomically) and echoes a short summary to stdout.
Exit codes: 0 success, 1 computational failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import io as _io
from .config import RunConfig, load_config, state_or_equilibrium
from .control import REPORTED_GAIN, linear_policy, solve_care
from .eigen import GridSpec, discretize_generator, principal_eigenvalue
from .exceptions import ComputationError, ValidationError
from .exitstats import estimate_exit_rate, mean_exit_time, run_ensemble, survival_curve
from .model import addiction_free_equilibrium, eigenvalues_3x3, linearize, reproduction_number
from .quasipotential import quasipotential
from .sde import LinearDynamics, ModelDynamics, simulate_path

__all__ = ["main", "build_parser"]


def _out(cfg: RunConfig, *parts):
    return os.path.join(cfg.out, *parts)


def _echo(text):
    sys.stdout.write(text)


def _matrix_rows(M):
    return [list(r) for r in np.atleast_2d(M)]


def _gain(cfg: RunConfig):
    """Gain matrix selected by ``[control] gain``."""
    c = cfg.control
    if c.gain == "solved":
        lm = linearize(cfg.params)
        return solve_care(lm.A, c.actuation, c.gamma_tilde).K
    if c.gain == "reported":
        return REPORTED_GAIN.copy()
    return _io.read_matrix(c.gain, (2, 3))


def _center(cfg: RunConfig):
    if cfg.control.center == "equilibrium":
        return addiction_free_equilibrium(cfg.params).as_array()
    return np.zeros(3)


def _dynamics(cfg: RunConfig, controlled=None):
    c = cfg.control
    on = c.policy == "linear" if controlled is None else controlled
    if not on:
        return ModelDynamics(cfg.params)
    umax = None if math.isinf(c.umax) else c.umax
    pol = linear_policy(_gain(cfg), center=_center(cfg), umax=umax)
    return ModelDynamics(cfg.params, pol, c.actuation)


def _x0(cfg: RunConfig):
    x0 = cfg.ensemble.x0
    eq = addiction_free_equilibrium(cfg.params).as_array() if isinstance(x0, str) else None
    return state_or_equilibrium(x0, eq)


# subcommands -------------------------------------------------------------


def cmd_equilibrium(cfg: RunConfig, args):
    eq = addiction_free_equilibrium(cfg.params)
    r0 = reproduction_number(cfg.params)
    header = ["x1", "x2", "x3", "z", "R0"]
    row = [eq.x1, eq.x2, eq.x3, eq.z, r0]
    _io.write_csv(_out(cfg, "equilibrium.csv"), header, [row])
    _echo(_io.csv_text(header, [row]))


def cmd_linearize(cfg: RunConfig, args):
    if args.identity:
        A = np.eye(3)
    elif args.matrix:
        A = _io.read_matrix(args.matrix, (3, 3))
    else:
        A = linearize(cfg.params).A
    ev = eigenvalues_3x3(A)
    _io.write_csv(_out(cfg, "jacobian.csv"), ["c1", "c2", "c3"], _matrix_rows(A))
    rows = [(v.real, v.imag) for v in ev]
    _io.write_csv(_out(cfg, "eigenvalues.csv"), ["re", "im"], rows)
    _echo("# A\n" + _io.csv_text(None, _matrix_rows(A)) + "# eigenvalues\n" + _io.csv_text(["re", "im"], rows))


def cmd_riccati(cfg: RunConfig, args):
    c = cfg.control
    lm = linearize(cfg.params)
    sol = solve_care(lm.A, c.actuation, c.gamma_tilde)
    ev = sol.closed_loop_eigenvalues()
    _io.write_csv(_out(cfg, "P.csv"), None, _matrix_rows(sol.P))
    # headerless 2x3 so that it can be fed back through [control] gain = <path>
    _io.write_csv(_out(cfg, "K.csv"), None, _matrix_rows(sol.K))
    summary = [(sol.gamma_tilde, sol.residual, sol.residual_scale(), sol.iterations)]
    _io.write_csv(_out(cfg, "riccati.csv"), ["gamma_tilde", "residual", "residual_scale", "iterations"], summary)
    _io.write_csv(_out(cfg, "closed_loop_eigenvalues.csv"), ["re", "im"], [(v.real, v.imag) for v in ev])
    _echo(
        "# P\n" + _io.csv_text(None, _matrix_rows(sol.P))
        + "# K\n" + _io.csv_text(None, _matrix_rows(sol.K))
        + "# residual\n" + _io.csv_text(["residual", "iterations"], [(sol.residual, sol.iterations)])
        + "# closed-loop eigenvalues\n" + _io.csv_text(["re", "im"], [(v.real, v.imag) for v in ev])
    )


def cmd_simulate(cfg: RunConfig, args):
    dyn = _dynamics(cfg)
    stop = cfg.domain.build() if args.stop else None
    traj, rec = simulate_path(_x0(cfg), dyn, cfg.sde, stop=stop, path_index=args.path)
    traj.to_csv(_out(cfg, "trajectory.csv"))
    if rec is None:
        row = [cfg.sde.t_max, 1, *traj.states[-1]]
    else:
        row = [rec.time, 0, *rec.state]
    _io.write_csv(_out(cfg, "exit.csv"), ["exit_time", "censored", "x1", "x2", "x3"], [row])
    _echo(f"samples: {len(traj.times)}\n" + _io.csv_text(["exit_time", "censored", "x1", "x2", "x3"], [row]))


def _ensemble_outputs(cfg, ens, prefix=""):
    curve = survival_curve(ens)
    ens.to_csv(_out(cfg, f"{prefix}exit_times.csv"))
    curve.to_csv(_out(cfg, f"{prefix}survival.csv"))
    m = mean_exit_time(ens)
    _io.write_csv(
        _out(cfg, f"{prefix}mean.csv"),
        ["mean", "stderr", "censored_fraction", "censoring_flag"],
        [(m.mean, m.stderr, m.censored_fraction, int(m.censoring_flag))],
    )
    try:
        rate = estimate_exit_rate(curve, cfg.ensemble.window)
    except ComputationError as exc:
        sys.stderr.write(f"warning: {exc}\n")
        rate = None
    if rate is not None:
        rate.to_csv(_out(cfg, f"{prefix}rate.csv"))
    return m, rate


def cmd_exitstats(cfg: RunConfig, args):
    d = cfg.domain.build()
    x0 = _x0(cfg)
    e = cfg.ensemble
    variants = [("", None)]
    if args.compare:
        variants = [("uncontrolled_", False), ("controlled_", True)]
    lines = []
    for prefix, controlled in variants:
        ens = run_ensemble(x0, _dynamics(cfg, controlled), cfg.sde, d, e.n_paths, n_workers=e.n_workers)
        m, rate = _ensemble_outputs(cfg, ens, prefix)
        lam = math.nan if rate is None else rate.lambda_hat
        se = math.nan if rate is None else rate.stderr
        lines.append((prefix.rstrip("_") or cfg.control.policy, m.mean, m.stderr, ens.n_censored, lam, se))
    header = ["variant", "mean_exit_time", "stderr", "n_censored", "lambda_hat", "lambda_stderr"]
    if args.compare:
        _io.write_csv(_out(cfg, "compare.csv"), header, lines)
    _echo(_io.csv_text(header, lines))


def _read_P(path):
    return _io.read_matrix(path, (3, 3))


def cmd_quasipotential(cfg: RunConfig, args):
    if args.P:
        P = _read_P(args.P)
    else:
        c = cfg.control
        P = solve_care(linearize(cfg.params).A, c.actuation, c.gamma_tilde).P
    d = cfg.domain.build()
    center = addiction_free_equilibrium(cfg.params).as_array() if args.center == "equilibrium" else None
    res = quasipotential(P, d, center=center, norm_kind=args.norm)
    res.to_csv(_out(cfg, "phi.csv"))
    _echo(
        _io.csv_text(
            ["phi", "min_x1", "min_x2", "min_x3", "facet", "norm_kind"],
            [(res.phi, *res.minimizer, res.facet, res.norm_kind)],
        )
    )


def cmd_eigenrate(cfg: RunConfig, args):
    gc = cfg.grid
    eps = cfg.sde.epsilon_noise if math.isnan(gc.epsilon_noise) else gc.epsilon_noise
    hw = gc.half_width * 3 if len(gc.half_width) == 1 else gc.half_width
    n = (gc.n1, gc.n2, gc.n3)
    if gc.dynamics == "linear":
        lm = linearize(cfg.params)
        M = lm.A + cfg.control.actuation.matrix @ _gain(cfg) if cfg.control.policy == "linear" else lm.A
        dyn = LinearDynamics(M)
        g = GridSpec.around(np.zeros(3), hw, n)
    else:
        dyn = _dynamics(cfg)
        g = GridSpec.around(addiction_free_equilibrium(cfg.params).as_array(), hw, n)
    sol = principal_eigenvalue(discretize_generator(dyn, eps, g))
    row = [(sol.lam, sol.residual, sol.iterations, float(sol.psi.min()))]
    _io.write_csv(_out(cfg, "lambda.csv"), ["lambda", "residual", "iterations", "psi_min"], row)
    if args.psi:
        sol.to_csv(_out(cfg, "psi.csv"), g)
    _echo(_io.csv_text(["lambda", "residual", "iterations", "psi_min"], row))


def cmd_plot(cfg: RunConfig, args):
    ys = [s.strip() for s in args.y.split(",") if s.strip()]
    if not ys:
        raise ValidationError("--y needs at least one column")
    if not os.path.isfile(args.csv):
        raise ValidationError(f"CSV file not found: {args.csv}")
    out = args.output or _out(cfg, os.path.splitext(os.path.basename(args.csv))[0] + ".svg")
    _io.emit_svg_lineplot(args.csv, args.x, ys, out, title=args.title)
    _echo(f"{out}\n")


# parser --------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style run configuration")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides [sde] seed)")

    ap = argparse.ArgumentParser(
        prog="opioid-residence",
        description="Stochastic opioid-epidemic model: equilibria, Riccati feedback, exit statistics.",
        parents=[common],
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.set_defaults(func=fn)
        return p

    add("equilibrium", cmd_equilibrium, "addiction-free equilibrium and R0")
    p = add("linearize", cmd_linearize, "Jacobian at the equilibrium and its eigenvalues")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--identity", action="store_true", help="use the 3x3 identity (solver check)")
    g.add_argument("--matrix", help="read a headerless 3x3 CSV instead")
    add("riccati", cmd_riccati, "solve the Riccati equation; write P, K, residual")
    p = add("simulate", cmd_simulate, "simulate one path; write trajectory.csv")
    p.add_argument("--path", type=int, default=0, help="path index of the noise stream")
    p.add_argument("--stop", action="store_true", help="stop at the first exit from the configured domain")
    p = add("exitstats", cmd_exitstats, "Monte Carlo exit ensemble, survival curve and exit rate")
    p.add_argument("--compare", action="store_true", help="run uncontrolled and controlled on the same seeds")
    p.add_argument("--paths", type=int, help="override [ensemble] n_paths")
    p.add_argument("--workers", type=int, help="override [ensemble] n_workers")
    p.add_argument("--fit-lo", type=float, help="start of the exit-rate fit window")
    p.add_argument("--fit-hi", type=float, help="end of the exit-rate fit window")
    p = add("quasipotential", cmd_quasipotential, "minimum of the quadratic form over the domain boundary")
    p.add_argument("--P", help="headerless 3x3 CSV (default: solve the Riccati equation)")
    p.add_argument("--center", choices=("origin", "equilibrium"), default="origin")
    p.add_argument("--norm", choices=("spectral", "frobenius"), default="spectral")
    p = add("eigenrate", cmd_eigenrate, "principal eigenvalue of the discretized generator")
    p.add_argument("--psi", action="store_true", help="also write psi.csv")
    p = add("plot", cmd_plot, "render CSV columns as an SVG line plot")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", default="t")
    p.add_argument("--y", default="x1,x2,x3,z", help="comma-separated y columns")
    p.add_argument("--output", help="SVG path (default: <out>/<csv name>.svg)")
    p.add_argument("--title")
    return ap


def _apply_overrides(cfg: RunConfig, args):
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError(f"--seed: must be an unsigned 64-bit integer, got {args.seed}")
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = replace(cfg, out=args.out)
    e = cfg.ensemble
    if getattr(args, "paths", None) is not None:
        e = replace(e, n_paths=args.paths)
    if getattr(args, "workers", None) is not None:
        e = replace(e, n_workers=args.workers)
    if getattr(args, "fit_lo", None) is not None:
        e = replace(e, fit_lo=args.fit_lo)
    if getattr(args, "fit_hi", None) is not None:
        e = replace(e, fit_hi=args.fit_hi)
    e.window
    return replace(cfg, ensemble=e)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        args.func(cfg, args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ComputationError as exc:
        sys.stderr.write(f"computation failed: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

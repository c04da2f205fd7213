"""Command-line entry point.

Exit codes: 0 ok, 1 bad configuration, 2 plant not stabilizable/detectable,
3 Riccati failure, 4 primal-dual matrix not Hurwitz, 5 numerical failure.
"""
import argparse
import hashlib
import os
import sys as _sys

import numpy as np

from . import linalg as la
from . import report
from .casestudy import DEFAULT_KS, default_gains, load_network, run_experiments, table1_network, to_lti
from .controllers import (
    Form,
    NearOptimalGains,
    build_closed_loop,
    build_S,
    mu_initial_from_lambda,
    synthesize_overtaking,
    _require_S_hurwitz,
)
from .errors import ConfigError, SteadyCtlError
from .perf import (
    gap_reports_csv,
    near_optimal_index,
    optimal_index,
    sweep_gap_reports,
    zero_gap_check,
)
from .plant import load_system, require_assumption_1, steady_state_solve
from .sim import SimConfig, simulate

fmt = report.fmt


def _vector(text, name):
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"--{name}: expected comma-separated numbers, got {text!r}") from exc


def _sized(vec, n, name):
    """Broadcast a single value to length ``n`` or require exactly ``n`` entries."""
    if vec is None:
        return None
    if not np.all(np.isfinite(vec)):
        raise ConfigError(f"--{name} has non-finite entries")
    if vec.size == 1:
        return np.full(n, vec[0])
    if vec.size != n:
        raise ConfigError(f"--{name} needs {n} entries, got {vec.size}")
    return vec


class Problem:
    """Plant, weights and default gains resolved from the command line."""

    def __init__(self, args, default_network=False):
        self.args = args
        self.network = None
        if args.network is not None:
            raw = _read_bytes(args.network)
            self.network = load_network(args.network)
        elif default_network:
            raw = b"built-in four-bus network"
            self.network = table1_network()
        elif args.system is not None:
            raw = _read_bytes(args.system)
        else:
            raise ConfigError("one of --system or --network is required")
        d = _vector(args.d, "d") if getattr(args, "d", None) else None
        if self.network is not None:
            self.sys, self.w = to_lti(self.network, _sized(d, self.network.size, "d"))
        else:
            self.sys, self.w = load_system(args.system)
            if d is not None:
                self.sys = self.sys.with_disturbance(_sized(d, self.sys.p, "d"))
        self.source_digest = hashlib.sha256(raw).hexdigest()

    @property
    def n(self):
        return self.sys.n

    def gains(self, K):
        ky = getattr(self.args, "ky", None)
        kl = getattr(self.args, "klambda", None)
        if self.network is not None:
            base = default_gains(self.network, K)
            K_y, K_l = base.K_y, base.K_lambda
        else:
            K_y, K_l = np.eye(self.n), np.eye(self.n)
        if ky:
            K_y = _sized(_vector(ky, "ky"), self.n, "ky")
        if kl:
            K_l = _sized(_vector(kl, "klambda"), self.n, "klambda")
        try:
            return NearOptimalGains(K, K_y, K_l)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def initial(self, name):
        raw = getattr(self.args, name, None)
        return np.zeros(self.n) if not raw else _sized(_vector(raw, name), self.n, name)

    def digest(self):
        """Hash of the input file and every option that shapes the output (not ``--out``)."""
        opts = {k: v for k, v in sorted(vars(self.args).items())
                if k not in ("out", "func", "no_figures", "workers")}
        return report.config_hash({"source": self.source_digest, "options": opts})

    def sim_config(self):
        a = self.args
        t_d = a.t_disturb if a.t_disturb is not None else (1.0 if self.network else 0.0)
        return SimConfig(a.t_end, a.dt, t_d, a.stride)


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def _out(args, name):
    return os.path.join(args.out, name)


def _print_vec(label, v):
    print(f"{label} = [{', '.join(fmt(x) for x in v)}]")


def cmd_steady(args):
    prob = Problem(args)
    require_assumption_1(prob.sys, prob.w)
    ss = steady_state_solve(prob.sys, prob.w)
    res = ss.kkt_residuals(prob.sys, prob.w)
    _print_vec("x_bar", ss.x_bar)
    _print_vec("u_bar", ss.u_bar)
    _print_vec("lambda_bar", ss.lambda_bar)
    print("kkt residuals: " + ", ".join(fmt(r) for r in res))
    report.write_text(_out(args, "steady_state.csv"), report.steady_state_csv(ss, res, prob.digest()))
    return 0


def cmd_synthesize(args):
    prob = Problem(args)
    sys, w = prob.sys, prob.w
    ctrl = synthesize_overtaking(sys, w)
    are = float(np.linalg.norm(la.riccati_residual(ctrl.P_star, sys.A, sys.B, w.Q, w.R)))
    a_cl = la.spectral_abscissa(sys.A - sys.B @ ctrl.K)
    gains = prob.gains(ctrl.K)
    a_S = la.spectral_abscissa(build_S(gains, sys, w))
    report.write_text(_out(args, "synthesis.csv"), report.synthesis_csv(
        ctrl.K, ctrl.P_star, are, a_cl, a_S, prob.digest()))
    print("K =")
    for row in ctrl.K:
        print("  " + "  ".join(fmt(v) for v in row))
    print(f"ARE residual = {fmt(are)}")
    print(f"spectral abscissa A-BK = {fmt(a_cl)}")
    print(f"spectral abscissa S = {fmt(a_S)}")
    _require_S_hurwitz(gains, sys, w)
    return 0


def cmd_simulate(args):
    prob = Problem(args)
    sys, w = prob.sys, prob.w
    cfg = prob.sim_config()
    ctrl = synthesize_overtaking(sys, w)
    x0 = prob.initial("x0")
    comment = report.hash_comment(prob.digest())
    if args.controller in ("optimal", "both"):
        traj = simulate(build_closed_loop(Form.OPTIMAL, sys, w, ctrl=ctrl), sys, w, x0, cfg)
        report.write_text(_out(args, "trajectory_optimal.csv"), traj.to_csv(comment))
        print(f"optimal: J_T = {fmt(traj.final_cost)}")
    if args.controller in ("near-optimal", "both"):
        gains = prob.gains(ctrl.K)
        rel = build_closed_loop(Form.MU, sys, w, gains=gains)
        z0 = np.concatenate(mu_initial_from_lambda(x0, prob.initial("y0"), prob.initial("lambda0"),
                                                   gains.K_lambda))
        traj = simulate(rel, sys, w, z0, cfg)
        report.write_text(_out(args, "trajectory_near_optimal.csv"), traj.to_csv(comment))
        print(f"near-optimal: J_T = {fmt(traj.final_cost)}")
    return 0


def cmd_perf(args):
    prob = Problem(args)
    sys, w = prob.sys, prob.w
    ctrl = synthesize_overtaking(sys, w)
    gains = prob.gains(ctrl.K)
    x0, y0, lam0 = prob.initial("x0"), prob.initial("y0"), prob.initial("lambda0")
    J_star = optimal_index(ctrl, sys, w, x0)
    J_p = near_optimal_index(gains, sys, w, x0, y0, lam0, ctrl=ctrl)
    print(f"J*  = {fmt(J_star.bounded)} + {fmt(J_star.theta_coeff)}*Theta")
    print(f"J^p = {fmt(J_p.bounded)} + {fmt(J_p.theta_coeff)}*Theta")
    zero = zero_gap_check(gains, sys, w, y0, lam0, ctrl.ss)
    print(f"zero gap: {'yes' if zero else 'no'}")
    ks = [float(k) for k in _vector(args.k, "k")] if args.k else [1.0]
    if any(k <= 0 for k in ks):
        raise ConfigError("--k values must be positive")
    reports = sweep_gap_reports(gains, ctrl, sys, w, x0, y0, lam0, prob.sim_config(), ks,
                                args.workers)
    for r in reports:
        print(f"k = {fmt(r.k)}: analytic_gap = {fmt(r.analytic_gap)}, "
              f"simulated_gap_T = {fmt(r.simulated_gap_at_T)}, "
              f"relative_error = {fmt(r.relative_error)}")
    report.write_text(_out(args, "gap_vs_k.csv"),
                      gap_reports_csv(reports, report.hash_comment(prob.digest())))
    return 0


def cmd_casestudy(args):
    if args.system is not None:
        raise ConfigError("casestudy takes a network file, not a system file")
    prob = Problem(args, default_network=True)
    ks = [float(k) for k in _vector(args.k, "k")] if args.k else list(DEFAULT_KS)
    if any(k <= 0 for k in ks):
        raise ConfigError("--k values must be positive")
    ctrl = synthesize_overtaking(prob.sys, prob.w)
    res = run_experiments(prob.network, prob.sys.d, prob.gains(ctrl.K), ks, prob.sim_config(),
                          args.out, prob.digest(), figures=not args.no_figures,
                          max_workers=args.workers)
    for r in res.gap_reports:
        print(f"k = {fmt(r.k)}: analytic_gap = {fmt(r.analytic_gap)}, "
              f"simulated_gap_T = {fmt(r.simulated_gap_at_T)}, k*gap = {fmt(r.k * r.analytic_gap)}, "
              f"relative_error = {fmt(r.relative_error)}")
    print(f"wrote {len(res.files)} files to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="steadyctl",
                                     description="Optimal steady-state control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim=False, gains=False, initial=False, stride=1):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--system", help="JSON system file (A, B, C, d, Q, R)")
        src.add_argument("--network", help="JSON power-network file")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--d", help="disturbance override, comma-separated")
        if gains:
            p.add_argument("--ky", help="diagonal of K^y (one value broadcasts)")
            p.add_argument("--klambda", help="diagonal of K^lambda (one value broadcasts)")
        if initial:
            p.add_argument("--x0", help="initial plant state")
            p.add_argument("--y0", help="initial primal controller state")
            p.add_argument("--lambda0", help="initial multiplier state")
        if sim:
            p.add_argument("--t-end", type=float, default=40.0)
            p.add_argument("--dt", type=float, default=1e-3)
            p.add_argument("--t-disturb", type=float, default=None,
                           help="disturbance onset (default 1 for networks, 0 otherwise)")
            p.add_argument("--stride", type=int, default=stride, help="record every n-th step")
            p.add_argument("--workers", type=int, default=None)
        return p

    common(sub.add_parser("steady", help="optimal steady state")).set_defaults(func=cmd_steady)
    common(sub.add_parser("synthesize", help="Riccati gain and primal-dual check"),
           gains=True).set_defaults(func=cmd_synthesize)
    p = common(sub.add_parser("simulate", help="closed-loop trajectories"),
               sim=True, gains=True, initial=True)
    p.add_argument("--controller", choices=("optimal", "near-optimal", "both"), default="both")
    p.set_defaults(func=cmd_simulate)
    p = common(sub.add_parser("perf", help="analytic and simulated performance"),
               sim=True, gains=True, initial=True)
    p.add_argument("--k", help="gain scales, comma-separated (default 1)")
    p.set_defaults(func=cmd_perf)
    p = common(sub.add_parser("casestudy", help="four-bus experiment bundle"),
               sim=True, gains=True, stride=10)
    p.add_argument("--k", help="gain scales (default 0.5,1,2,5,10,20)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_casestudy)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SteadyCtlError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    _sys.exit(main())

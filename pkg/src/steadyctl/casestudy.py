"""Four-bus frequency-control benchmark and its experiment bundle.

Bus ``i`` follows the linearized swing equation

    M_i w_i' = u_i - d_i - D_i w_i - sum_j B_ij (theta_i - theta_j)

Angles are measured against a reference bus, ``delta_i = theta_i - theta_ref``,
which removes the zero mode of the network Laplacian. The state is
``(delta for every non-reference bus, omega for every bus)``.
"""
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import linalg as la
from . import report
from .controllers import Form, NearOptimalGains, build_closed_loop, build_S, synthesize_overtaking
from .errors import ConfigError
from .perf import (gap_reports_csv, optimal_index, performance_gap, simulate_pair,
                   sweep_gap_reports)
from .plant import CostWeights, DisturbedLtiSystem, _numbers, _reject_constant
from .sim import SimConfig

DEFAULT_DISTURBANCE = (3.5, 0.0, 0.0, 4.5)
DEFAULT_KS = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


@dataclass(frozen=True)
class Bus:
    M: float
    D: float
    q: float
    r: float


@dataclass(frozen=True)
class Line:
    i: int
    j: int
    B: float


@dataclass(frozen=True)
class PowerNetwork:
    buses: tuple
    lines: tuple = ()
    reference: int = -1  # index of the reference bus; -1 means the last one
    d: tuple = None

    def __post_init__(self):
        buses = tuple(b if isinstance(b, Bus) else Bus(**b) for b in self.buses)
        lines = tuple(l if isinstance(l, Line) else Line(**l) for l in self.lines)
        N = len(buses)
        if N == 0:
            raise ConfigError("network needs at least one bus")
        for k, b in enumerate(buses):
            if not all(np.isfinite([b.M, b.D, b.q, b.r])):
                raise ConfigError(f"bus {k + 1} has non-finite parameters")
            if b.M <= 0 or b.D <= 0 or b.r <= 0 or b.q < 0:
                raise ConfigError(f"bus {k + 1}: need M, D, r > 0 and q >= 0")
        for l in lines:
            if not (0 <= l.i < N and 0 <= l.j < N) or l.i == l.j:
                raise ConfigError(f"line ({l.i + 1}, {l.j + 1}) has invalid endpoints")
            if not (np.isfinite(l.B) and l.B > 0):
                raise ConfigError(f"line ({l.i + 1}, {l.j + 1}) needs B > 0")
        ref = self.reference % N if -N <= self.reference < N else None
        if ref is None:
            raise ConfigError(f"reference bus {self.reference} out of range")
        if N > 1:
            adj = csr_matrix((np.ones(len(lines)), ([l.i for l in lines], [l.j for l in lines])),
                             shape=(N, N))
            if connected_components(adj, directed=False)[0] != 1:
                raise ConfigError("line graph is not connected")
        d = None if self.d is None else tuple(float(v) for v in self.d)
        if d is not None and len(d) != N:
            raise ConfigError(f"disturbance needs {N} entries, got {len(d)}")
        object.__setattr__(self, "buses", buses)
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "d", d)

    @property
    def size(self):
        return len(self.buses)

    def laplacian(self):
        L = np.zeros((self.size, self.size))
        for l in self.lines:
            L[l.i, l.i] += l.B
            L[l.j, l.j] += l.B
            L[l.i, l.j] -= l.B
            L[l.j, l.i] -= l.B
        return L

    def state_labels(self):
        others = [i for i in range(self.size) if i != self.reference]
        return ([f"delta_{i + 1}" for i in others]
                + [f"omega_{i + 1}" for i in range(self.size)])


def table1_network():
    """The four-bus benchmark with reference bus 4."""
    buses = [Bus(2.0, 2.0, 15.0, 1.0), Bus(1.5, 2.0, 10.0, 1.0),
             Bus(1.8, 3.0, 12.0, 2.0), Bus(3.0, 4.0, 18.0, 1.5)]
    lines = [Line(0, 1, 1.5), Line(1, 2, 1.0), Line(2, 3, 2.0), Line(3, 0, 1.8), Line(1, 3, 2.5)]
    return PowerNetwork(tuple(buses), tuple(lines), reference=3, d=DEFAULT_DISTURBANCE)


def to_lti(net, d=None):
    """Plant matrices and cost weights for ``net``; ``d`` defaults to the network's own."""
    N, ref = net.size, net.reference
    others = [i for i in range(N) if i != ref]
    nd = N - 1
    n = nd + N
    L = net.laplacian()
    A = np.zeros((n, n))
    B = np.zeros((n, N))
    for k, i in enumerate(others):
        A[k, nd + i] = 1.0
        A[k, nd + ref] -= 1.0
    for i, bus in enumerate(net.buses):
        row = nd + i
        A[row, nd + i] = -bus.D / bus.M
        # theta_ref drops out: Laplacian rows sum to zero
        for k, j in enumerate(others):
            A[row, k] = -L[i, j] / bus.M
        B[row, i] = 1.0 / bus.M
    if d is None:
        d = net.d if net.d is not None else np.zeros(N)
    sys = DisturbedLtiSystem(A, B, -B, np.asarray(d, dtype=float))
    Q = np.diag([0.0] * nd + [b.q for b in net.buses])
    R = np.diag([b.r for b in net.buses])
    return sys, CostWeights(Q, R)


def default_gains(net, K):
    """Step sizes 0.2 on angle states, 0.5 on frequency states, 10 for every multiplier."""
    nd, N = net.size - 1, net.size
    K_y = np.array([0.2] * nd + [0.5] * N)
    return NearOptimalGains(K, K_y, 10.0 * np.ones(nd + N))


# -- network files ----------------------------------------------------------

def parse_network(text):
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict) or "buses" not in data:
        raise ConfigError("network file must be an object with a 'buses' list")
    try:
        buses = [Bus(**{k: float(_numbers([b[k]], k)[0]) for k in ("M", "D", "q", "r")})
                 for b in data["buses"]]
        lines = [Line(int(l["i"]) - 1, int(l["j"]) - 1, float(_numbers([l["B"]], "B")[0]))
                 for l in data.get("lines", [])]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed bus or line entry: {exc}") from exc
    ref = int(data.get("reference", len(buses))) - 1
    d = data.get("d")
    if d is not None:
        d = _numbers(d, "d")
    return PowerNetwork(tuple(buses), tuple(lines), ref, None if d is None else tuple(d))


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def network_to_dict(net):
    """JSON form with 1-based bus indices."""
    out = {
        "buses": [asdict(b) for b in net.buses],
        "lines": [{"i": l.i + 1, "j": l.j + 1, "B": l.B} for l in net.lines],
        "reference": net.reference + 1,
    }
    if net.d is not None:
        out["d"] = list(net.d)
    return out


# -- experiment bundle ------------------------------------------------------

@dataclass
class ExperimentResult:
    out_dir: str
    files: list = field(default_factory=list)
    gap_reports: list = field(default_factory=list)
    analytic_gap: float = 0.0
    f_bar: float = 0.0
    optimal_bounded: float = 0.0


def _jt_rows(traj_opt, traj_near, f_bar, t0):
    shift = f_bar * np.clip(traj_opt.times - t0, 0.0, None)
    J_opt, J_near = traj_opt.running_cost, traj_near.running_cost
    return np.column_stack([traj_opt.times, J_opt, J_near, J_opt - shift, J_near - shift,
                            J_near - J_opt])


def run_experiments(net, d=None, gains=None, ks=DEFAULT_KS, cfg=None, out_dir=".",
                    digest=None, figures=True, max_workers=None):
    """Trajectories, J_T curves and the gap-vs-k table for ``net``.

    The plant rests at the origin until ``cfg.t_disturb``, when ``d`` steps on.
    Controller states start at their pre-disturbance values, so at onset
    ``y = 0`` and ``lambda = mu = 0``.
    """
    cfg = cfg or SimConfig(t_end=40.0, dt=1e-3, t_disturb=1.0, record_stride=10)
    sys, w = to_lti(net, d)
    ctrl = synthesize_overtaking(sys, w)
    gains = gains or default_gains(net, ctrl.K)
    n = sys.n
    x0 = y0 = lam0 = np.zeros(n)
    if digest is None:
        digest = report.config_hash({"network": network_to_dict(net), "d": sys.d,
                                     "K_y": gains.K_y, "K_lambda": gains.K_lambda,
                                     "ks": list(ks), "cfg": asdict(cfg)})
    os.makedirs(out_dir, exist_ok=True)
    res = ExperimentResult(out_dir)

    def emit(name, text):
        res.files.append(report.write_text(os.path.join(out_dir, name), text))

    ss = ctrl.ss
    emit("steady_state.csv", report.steady_state_csv(ss, ss.kkt_residuals(sys, w), digest))
    S = build_S(gains, sys, w)
    emit("synthesis.csv", report.synthesis_csv(
        ctrl.K, ctrl.P_star, np.linalg.norm(la.riccati_residual(ctrl.P_star, sys.A, sys.B, w.Q, w.R)),
        la.spectral_abscissa(sys.A - sys.B @ ctrl.K), la.spectral_abscissa(S), digest))

    traj_opt, traj_near = simulate_pair(gains, ctrl, sys, w, x0, y0, lam0, cfg)
    emit("trajectory_optimal.csv", traj_opt.to_csv(report.hash_comment(digest)))
    emit("trajectory_near_optimal.csv", traj_near.to_csv(report.hash_comment(digest)))

    res.f_bar = ss.cost(w)
    t0 = cfg.disturb_index * cfg.step
    jt = _jt_rows(traj_opt, traj_near, res.f_bar, t0)
    emit("jt_curves.csv", report.table_csv(
        ("t", "J_optimal", "J_near_optimal", "J_optimal_shifted", "J_near_optimal_shifted",
         "gap"), jt, digest))

    res.gap_reports = sweep_gap_reports(gains, ctrl, sys, w, x0, y0, lam0, cfg, list(ks),
                                        max_workers)
    emit("gap_vs_k.csv", gap_reports_csv(res.gap_reports, report.hash_comment(digest)))
    res.analytic_gap = performance_gap(gains, sys, w, y0, lam0, ss)
    res.optimal_bounded = optimal_index(ctrl, sys, w, x0).bounded

    meta = {
        "config_hash": digest,
        "disturbance": sys.d.tolist(),
        "t_disturb": t0,
        "t_end": cfg.t_end,
        "dt": cfg.step,
        "record_stride": cfg.record_stride,
        "initial_state": {"x": x0.tolist(), "y": y0.tolist(), "lambda": lam0.tolist(),
                          "mu": lam0.tolist()},
        "K_y": gains.K_y.tolist(),
        "K_lambda": gains.K_lambda.tolist(),
        "ks": list(ks),
        "f_bar": res.f_bar,
        "implementable_form": Form.MU.value,
        "near_optimal_realization_implementable":
            build_closed_loop(Form.MU, sys, w, gains=gains).implementable,
    }
    emit("run_metadata.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")

    if figures:
        from . import plotting
        res.files.extend(plotting.render_bundle(out_dir, traj_opt, traj_near, jt, res.gap_reports,
                                                net.state_labels()))
    return res

"""Closed-form transient performance of the two controllers.

Infinite-horizon costs that grow linearly are written as ``b + c * Theta``
where ``Theta`` stands for the divergent integral of 1 over [0, inf). An
:class:`ExtendedValue` keeps the pair ``(b, c)``; the growth rate dominates
comparisons, which is what overtaking optimality needs.
"""
import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .controllers import (
    Form,
    build_closed_loop,
    build_T,
    mu_initial_from_lambda,
    primal_dual_output,
    synthesize_overtaking,
    _require_S_hurwitz,
)
from .errors import NotHurwitz, ResidualTooLarge
from .plant import input_gram, steady_state_solve
from .sim import simulate

ZERO_GAP_TOL = 1e-8


@functools.total_ordering
@dataclass(frozen=True)
class ExtendedValue:
    bounded: float
    theta_coeff: float

    def __post_init__(self):
        if not (np.isfinite(self.bounded) and np.isfinite(self.theta_coeff)):
            raise ValueError("ExtendedValue parts must be finite")
        object.__setattr__(self, "bounded", float(self.bounded))
        object.__setattr__(self, "theta_coeff", float(self.theta_coeff))

    def _key(self):
        return (self.theta_coeff, self.bounded)

    def __lt__(self, other):
        return self._key() < other._key()

    def __add__(self, other):
        return ExtendedValue(self.bounded + other.bounded, self.theta_coeff + other.theta_coeff)

    def __sub__(self, other):
        return ExtendedValue(self.bounded - other.bounded, self.theta_coeff - other.theta_coeff)

    def __mul__(self, s):
        return ExtendedValue(s * self.bounded, s * self.theta_coeff)

    __rmul__ = __mul__

    def horizon_estimate(self, T):
        """Finite-horizon approximation ``b + c T`` once transients have died out."""
        return self.bounded + self.theta_coeff * T

    def __str__(self):
        return f"{self.bounded:.9g} + {self.theta_coeff:.9g}*Theta"


def _require_hurwitz(A):
    if not la.is_hurwitz(A):
        raise NotHurwitz(f"matrix is not Hurwitz (abscissa {la.spectral_abscissa(A):.3e})")


def quad_cost_index(Acal, Qcal, beta, psi0):
    """Integral of ``psi^T Qcal psi`` along ``psi' = Acal psi + beta``.

    With ``w = psi0 + Acal^-1 beta`` and ``P`` solving ``P Acal + Acal^T P + Qcal = 0``:
    bounded part ``w^T P w + 2 beta^T Acal^-T Qcal Acal^-1 w``, rate ``|Acal^-1 beta|^2_Qcal``.
    """
    Acal = np.asarray(Acal, dtype=float)
    Qcal = np.asarray(Qcal, dtype=float)
    beta = np.asarray(beta, dtype=float)
    psi0 = np.asarray(psi0, dtype=float)
    _require_hurwitz(Acal)
    P = la.lyapunov_solve(Acal, Qcal)
    a_inv_beta = la.solve_linear(Acal, beta)
    wv = psi0 + a_inv_beta
    bounded = wv @ P @ wv + 2 * a_inv_beta @ Qcal @ la.solve_linear(Acal, wv)
    return ExtendedValue(bounded, a_inv_beta @ Qcal @ a_inv_beta)


def lin_cost_index(Acal, alpha, beta, psi0):
    """Integral of ``alpha^T psi`` along ``psi' = Acal psi + beta``."""
    Acal = np.asarray(Acal, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    psi0 = np.asarray(psi0, dtype=float)
    _require_hurwitz(Acal)
    a_inv_beta = la.solve_linear(Acal, beta)
    bounded = -alpha @ la.solve_linear(Acal, psi0 + a_inv_beta)
    return ExtendedValue(bounded, -alpha @ a_inv_beta)


def optimal_index(ctrl, sys, w, x0):
    """J*_inf from ``x0`` under the overtaking-optimal controller."""
    ss = ctrl.ss
    e0 = np.asarray(x0, dtype=float) - ss.x_bar
    M = sys.A - sys.B @ ctrl.K
    row = -ss.x_bar @ w.Q + ss.u_bar @ w.R @ ctrl.K
    bounded = 0.5 * e0 @ ctrl.P_star @ e0 + row @ la.solve_linear(M, e0)
    return ExtendedValue(bounded, ss.cost(w))


def q_tilde_blocks(gains, sys, w):
    """(Q+K^T R K, Q~1, Q~2) blocks of the closed-loop cost matrix on (x, y, lambda)."""
    K = gains.K
    KRK = K.T @ w.R @ K
    KtBt = K.T @ sys.B.T
    Q1 = np.hstack([-KRK, KtBt])
    Q2 = np.block([[KRK, -KtBt], [-KtBt.T, input_gram(sys, w)]])
    return w.Q + KRK, Q1, la.symmetrize(Q2)


def q_tilde(gains, sys, w):
    Q0, Q1, Q2 = q_tilde_blocks(gains, sys, w)
    return la.symmetrize(np.block([[Q0, Q1], [Q1.T, Q2]]))


def gap_matrix(gains, sys, w):
    """P~^S* solving ``P S + S^T P + Q~2 = 0``."""
    S = _require_S_hurwitz(gains, sys, w)
    _, _, Q2 = q_tilde_blocks(gains, sys, w)
    return la.lyapunov_solve(S, Q2)


def offset(ss, y0, lambda0):
    return np.concatenate([np.asarray(y0, dtype=float) - ss.x_bar,
                           np.asarray(lambda0, dtype=float) - ss.lambda_bar])


def performance_gap(gains, sys, w, y0, lambda0, ss=None):
    """J^p_inf - J*_inf = 1/2 |(y0 - x_bar, lambda0 - lambda_bar)|^2 under P~^S*."""
    ss = steady_state_solve(sys, w) if ss is None else ss
    a = offset(ss, y0, lambda0)
    return 0.5 * float(a @ gap_matrix(gains, sys, w) @ a)


def near_optimal_index(gains, sys, w, x0, y0, lambda0, ctrl=None):
    """J^p_inf of the primal-dual controller started at (x0, y0, lambda0)."""
    ctrl = synthesize_overtaking(sys, w) if ctrl is None else ctrl
    gap = performance_gap(gains, sys, w, y0, lambda0, ctrl.ss)
    return optimal_index(ctrl, sys, w, x0) + ExtendedValue(gap, 0.0)


# -- structure of the 3n-dimensional closed loop ----------------------------

def t_inverse_blocks(sys, w):
    """T^-1 split into its four n x n blocks (T1, T2, T3, T4)."""
    T = build_T(sys, w)
    n = sys.n
    Tinv = la.solve_linear(T, np.eye(2 * n))
    return Tinv[:n, :n], Tinv[:n, n:], Tinv[n:, :n], Tinv[n:, n:]


def t_block_residuals(sys, w, blocks=None):
    """Residual norms of the four block identities that define T^-1."""
    T1, T2, T3, T4 = t_inverse_blocks(sys, w) if blocks is None else blocks
    A, Q, G = sys.A, w.Q, input_gram(sys, w)
    I = np.eye(sys.n)
    return (
        float(np.linalg.norm(-Q @ T1 - A.T @ T3 - I)),
        float(np.linalg.norm(-Q @ T2 - A.T @ T4)),
        float(np.linalg.norm(A @ T1 - G @ T3)),
        float(np.linalg.norm(A @ T2 - G @ T4 - I)),
    )


@dataclass(frozen=True)
class TildeAnalysis:
    Q_tilde: np.ndarray
    P_tilde_star: np.ndarray
    A_tilde_inv: np.ndarray
    P_direct: np.ndarray
    A_tilde: np.ndarray
    b_tilde: np.ndarray


def full_tilde_analysis(gains, sys, w, ctrl=None, tol=1e-8):
    """Q~, the block-diagonal P~* and the structured inverse of A~, cross-checked.

    ``P~* = blockdiag(P*, P~^S*)`` is compared with a direct Lyapunov solve on
    the full 3n system; the structured ``A~^-1`` with a direct inverse.
    """
    ctrl = synthesize_overtaking(sys, w) if ctrl is None else ctrl
    n = sys.n
    rel = build_closed_loop(Form.LAMBDA, sys, w, gains=gains)
    At, bt = rel.A_cl, rel.b_cl
    Qt = q_tilde(gains, sys, w)
    P_S = gap_matrix(gains, sys, w)
    P_block = np.block([[ctrl.P_star, np.zeros((n, 2 * n))], [np.zeros((2 * n, n)), P_S]])
    P_direct = la.lyapunov_solve(At, Qt)
    scale = max(1.0, np.linalg.norm(P_direct))
    if np.linalg.norm(P_direct - P_block) > tol * scale:
        raise ResidualTooLarge("block-diagonal P~* disagrees with the direct Lyapunov solution")

    M = sys.A - sys.B @ ctrl.K
    N = np.hstack([sys.B @ ctrl.K, -input_gram(sys, w)])
    T1, T2, T3, T4 = t_inverse_blocks(sys, w)
    KS_inv = np.block([[la.solve_linear(gains.K_y, np.eye(n)), np.zeros((n, n))],
                       [np.zeros((n, n)), la.solve_linear(gains.K_lambda, np.eye(n))]])
    S_inv = np.block([[T1, T2], [T3, T4]]) @ KS_inv
    M_inv = la.solve_linear(M, np.eye(n))
    A_inv = np.block([[M_inv, -M_inv @ N @ S_inv], [np.zeros((2 * n, n)), S_inv]])
    direct = la.solve_linear(At, np.eye(3 * n))
    if np.linalg.norm(A_inv - direct) > 1e-8 * max(1.0, np.linalg.norm(direct)):
        raise ResidualTooLarge("structured inverse of A~ disagrees with a direct solve")
    return TildeAnalysis(Qt, P_block, A_inv, P_direct, At, bt)


def zero_gap_check(gains, sys, w, y0, lambda0, ss=None, tol=ZERO_GAP_TOL):
    """True iff the controller offset lies in the unobservable subspace of (S, C~)."""
    ss = steady_state_solve(sys, w) if ss is None else ss
    S = _require_S_hurwitz(gains, sys, w)
    sub = la.unobservable_subspace(S, primal_dual_output(gains, sys, w))
    a = offset(ss, y0, lambda0)
    return sub.distance(a) <= tol * max(1.0, np.linalg.norm(a))


# -- gain scaling and simulation cross-checks -------------------------------

@dataclass(frozen=True)
class GapPoint:
    k: float
    gap: float

    @property
    def k_gap(self):
        return self.k * self.gap


def gap_scaling_sweep(base_gains, sys, w, y0, lambda0, ks, ss=None):
    """Analytic gap at gains ``k K^y, k K^lambda`` for each ``k``.

    The gap does not depend on the plant's initial state, so none is taken.
    """
    ss = steady_state_solve(sys, w) if ss is None else ss
    return [GapPoint(float(k), performance_gap(base_gains.scaled(k), sys, w, y0, lambda0, ss))
            for k in ks]


@dataclass(frozen=True)
class GapReport:
    k: float
    analytic_gap: float
    simulated_gap_at_T: float
    T: float

    @property
    def relative_error(self):
        """|sim - analytic| / |analytic|, or the absolute error for a zero gap."""
        diff = abs(self.simulated_gap_at_T - self.analytic_gap)
        return diff / abs(self.analytic_gap) if abs(self.analytic_gap) > 1e-12 else diff


def simulate_pair(gains, ctrl, sys, w, x0, y0, lambda0, cfg):
    """Trajectories of the optimal loop and the implementable (mu-form) loop."""
    rel_opt = build_closed_loop(Form.OPTIMAL, sys, w, ctrl=ctrl)
    rel_mu = build_closed_loop(Form.MU, sys, w, gains=gains)
    x0m, y0m, mu0 = mu_initial_from_lambda(x0, y0, lambda0, gains.K_lambda)
    traj_opt = simulate(rel_opt, sys, w, x0, cfg)
    traj_mu = simulate(rel_mu, sys, w, np.concatenate([x0m, y0m, mu0]), cfg)
    return traj_opt, traj_mu


def gap_report(gains, ctrl, sys, w, x0, y0, lambda0, cfg, k=1.0, traj_opt=None):
    """Analytic gap next to the simulated ``J^p_T - J*_T`` at ``T = cfg.t_end``.

    ``(x0, y0, lambda0)`` is the state at ``cfg.t_disturb``; before it the
    loops must sit at rest, as in the step-disturbance experiments.
    """
    analytic = performance_gap(gains, sys, w, y0, lambda0, ctrl.ss)
    rel_mu = build_closed_loop(Form.MU, sys, w, gains=gains)
    x0m, y0m, mu0 = mu_initial_from_lambda(x0, y0, lambda0, gains.K_lambda)
    traj_mu = simulate(rel_mu, sys, w, np.concatenate([x0m, y0m, mu0]), cfg)
    if traj_opt is None:
        traj_opt = simulate(build_closed_loop(Form.OPTIMAL, sys, w, ctrl=ctrl), sys, w, x0, cfg)
    sim_gap = traj_mu.final_cost - traj_opt.final_cost
    return GapReport(float(k), analytic, sim_gap, cfg.t_end)


def sweep_gap_reports(base_gains, ctrl, sys, w, x0, y0, lambda0, cfg, ks, max_workers=None):
    """Gap reports for each scale ``k``; points run concurrently, order follows ``ks``."""
    traj_opt = simulate(build_closed_loop(Form.OPTIMAL, sys, w, ctrl=ctrl), sys, w, x0, cfg)

    def one(k):
        return gap_report(base_gains.scaled(k), ctrl, sys, w, x0, y0, lambda0, cfg, k, traj_opt)

    workers = max_workers or min(4, max(1, len(ks)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, ks))


def gap_reports_csv(reports, header_comment=None):
    lines = [] if header_comment is None else [f"# {header_comment}"]
    lines.append("k,analytic_gap,simulated_gap_T,relative_error,k_times_analytic_gap,"
                 "k_times_simulated_gap")
    for r in reports:
        vals = (r.k, r.analytic_gap, r.simulated_gap_at_T, r.relative_error,
                r.k * r.analytic_gap, r.k * r.simulated_gap_at_T)
        lines.append(",".join(f"{v:.9g}" for v in vals))
    return "\n".join(lines) + "\n"

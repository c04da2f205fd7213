"""Controller synthesis and closed-loop realizations.

Two controllers are built here:

* the overtaking-optimal controller ``u = -K (x - x_bar) + u_bar`` with the
  Riccati gain ``K = R^-1 B^T P*``. It needs ``x_bar``/``u_bar`` and hence
  the disturbance;
* the near-optimal primal-dual controller

      y'   = -K^y (Q y + A^T lam)
      lam' =  K^lam (A y - B R^-1 B^T lam + C d)
      u    = -K (x - y) - R^-1 B^T lam

  and its implementable form in ``mu = lam - K^lam x``, which never touches
  ``d``:

      y'  = -K^y (Q y + A^T (mu + K^lam x))
      mu' =  K^lam (A - B K)(y - x)
      u   = -K (x - y) - R^-1 B^T (mu + K^lam x)

Every realization is affine in the current disturbance ``d(t)``::

    z' = A_cl z + E d(t),     u = F z + G d(t)

so a simulator can switch ``d`` on at any time.
"""
import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from . import linalg as la
from .errors import NotHurwitzS
from .plant import (
    input_gram,
    reduced_lagrangian,
    require_assumption_1,
    stage_cost,
    steady_state_sensitivity,
    steady_state_solve,
)


@dataclass(frozen=True)
class OvertakingController:
    K: np.ndarray
    P_star: np.ndarray
    ss: object  # SteadyStateSolution

    def control(self, x):
        return -self.K @ (np.asarray(x, dtype=float) - self.ss.x_bar) + self.ss.u_bar


def synthesize_overtaking(sys, w):
    """Riccati gain plus optimal steady state for a system meeting Assumption 1."""
    require_assumption_1(sys, w)
    P = la.care_solve(sys.A, sys.B, w.Q, w.R)
    K = la.solve_linear(w.R, sys.B.T @ P)
    ss = steady_state_solve(sys, w, check=False)
    return OvertakingController(K, P, ss)


@dataclass(frozen=True)
class NearOptimalGains:
    """Feedback ``K`` and the symmetric positive definite step sizes K^y, K^lambda."""

    K: np.ndarray
    K_y: np.ndarray
    K_lambda: np.ndarray

    def __post_init__(self):
        K = la.as_matrix(self.K, "K")
        n = K.shape[1]
        mats = {}
        for name in ("K_y", "K_lambda"):
            raw = np.asarray(getattr(self, name), dtype=float)
            M = np.diag(raw) if raw.ndim == 1 else la.as_matrix(raw, name)
            if M.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {M.shape}")
            if not la.is_symmetric(M) or np.linalg.eigvalsh(la.symmetrize(M)).min() <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")
            mats[name] = la.symmetrize(M)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "K_y", mats["K_y"])
        object.__setattr__(self, "K_lambda", mats["K_lambda"])

    @property
    def K_S(self):
        return block_diag(self.K_y, self.K_lambda)

    @property
    def K_mu(self):
        return self.K_lambda

    def scaled(self, k):
        if k <= 0:
            raise ValueError("gain scale must be positive")
        return NearOptimalGains(self.K, k * self.K_y, k * self.K_lambda)


def build_T(sys, w):
    """T = [[-Q, -A^T], [A, -B R^-1 B^T]]."""
    return np.block([[-w.Q, -sys.A.T], [sys.A, -input_gram(sys, w)]])


def build_S(gains, sys, w):
    """Primal-dual state matrix S = blockdiag(K^y, K^lambda) T."""
    return gains.K_S @ build_T(sys, w)


def primal_dual_output(gains, sys, w):
    """C~ = [R K, -B^T]; its unobservable subspace under S gives zero-gap offsets."""
    return np.hstack([w.R @ gains.K, -sys.B.T])


class Form(enum.Enum):
    OPTIMAL = "optimal"
    LAMBDA = "lambda"
    MU = "mu"
    PRIMAL_DUAL = "primal_dual"


@dataclass(frozen=True)
class ClosedLoopRealization:
    form: Form
    A_cl: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    d: np.ndarray
    labels: tuple
    plant_dim: int

    @property
    def state_dim(self):
        return self.A_cl.shape[0]

    @property
    def b_cl(self):
        return self.E @ self.d

    @property
    def implementable(self):
        """True when no controller state and no input depends on ``d``."""
        return bool(np.all(self.E[self.plant_dim:] == 0) and np.all(self.G == 0)) \
            and self.form is not Form.PRIMAL_DUAL

    def input(self, z, d=None):
        d = self.d if d is None else d
        return self.F @ z + self.G @ d

    def equilibrium(self):
        return la.solve_linear(self.A_cl, -self.b_cl)

    def to_json(self):
        """Serialize as a system file: ``A`` is A_cl, ``C`` is E, ``d`` the disturbance."""
        return json.dumps({
            "A": self.A_cl.tolist(),
            "B": np.zeros((self.state_dim, 1)).tolist(),
            "C": self.E.tolist(),
            "d": self.d.tolist(),
            "form": self.form.value,
            "labels": list(self.labels),
            "input_map": {"F": self.F.tolist(), "G": self.G.tolist()},
        }, indent=2)


def _require_S_hurwitz(gains, sys, w):
    S = build_S(gains, sys, w)
    if not la.is_hurwitz(S):
        raise NotHurwitzS(
            f"S = K^S T is not Hurwitz (spectral abscissa {la.spectral_abscissa(S):.6g})")
    return S


def build_closed_loop(form, sys, w, ctrl=None, gains=None):
    """Closed-loop realization of one controller on ``sys``.

    ``ctrl`` (an :class:`OvertakingController`) is needed for ``OPTIMAL``;
    ``gains`` for the primal-dual forms.
    """
    form = Form(form)
    n, p = sys.n, sys.p
    A, B, C = sys.A, sys.B, sys.C
    Z = np.zeros

    if form is Form.OPTIMAL:
        if ctrl is None:
            raise ValueError("OPTIMAL form needs an OvertakingController")
        K = ctrl.K
        # x_bar, u_bar are linear in d; the controller switches with d(t)
        X, U, _ = steady_state_sensitivity(sys, w)
        G = K @ X + U
        return ClosedLoopRealization(
            form, A - B @ K, B @ G + C, -K, G, sys.d.copy(), ("x",), n)

    if gains is None:
        raise ValueError(f"{form.name} form needs NearOptimalGains")
    S = _require_S_hurwitz(gains, sys, w)
    K, Ky, Kl = gains.K, gains.K_y, gains.K_lambda
    Rinv_Bt = la.solve_linear(w.R, B.T)
    Gr = input_gram(sys, w)
    M = A - B @ K

    if form is Form.PRIMAL_DUAL:
        E = np.vstack([Z((n, p)), Kl @ C])
        F = np.hstack([Z((sys.m, n)), -Rinv_Bt])
        return ClosedLoopRealization(form, S, E, F, Z((sys.m, p)), sys.d.copy(),
                                     ("y", "lambda"), 0)

    if form is Form.LAMBDA:
        A_cl = np.block([[M, B @ K, -Gr], [Z((2 * n, n)), S]])
        E = np.vstack([C, Z((n, p)), Kl @ C])
        F = np.hstack([-K, K, -Rinv_Bt])
        labels = ("x", "y", "lambda")
    else:
        A_cl = np.block([
            [A - B @ K - Gr @ Kl, B @ K, -Gr],
            [-Ky @ A.T @ Kl, -Ky @ w.Q, -Ky @ A.T],
            [-Kl @ M, Kl @ M, Z((n, n))],
        ])
        E = np.vstack([C, Z((2 * n, p))])
        F = np.hstack([-K - Rinv_Bt @ Kl, K, -Rinv_Bt])
        labels = ("x", "y", "mu")
    return ClosedLoopRealization(form, A_cl, E, F, Z((sys.m, p)), sys.d.copy(), labels, n)


def near_optimal_gains(ctrl, K_y, K_lambda):
    return NearOptimalGains(ctrl.K, K_y, K_lambda)


def mu_initial_from_lambda(x0, y0, lambda0, K_lambda):
    """Map a lambda-form initial state to the mu-form: mu0 = lambda0 - K^lambda x0."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    lambda0 = np.asarray(lambda0, dtype=float)
    return x0.copy(), y0.copy(), lambda0 - np.asarray(K_lambda, dtype=float) @ x0


# -- HJB check --------------------------------------------------------------

def value_function_terms(ctrl, sys, w, x):
    """(dV/dt, dV/dx) of V(x,t) = -L~(x_bar, lam_bar) t + 1/2|x - x_bar|^2_P* + lam_bar^T (x - x_bar)."""
    ss = ctrl.ss
    dV_dt = -reduced_lagrangian(sys, w, ss.x_bar, ss.lambda_bar)
    dV_dx = ctrl.P_star @ (np.asarray(x, dtype=float) - ss.x_bar) + ss.lambda_bar
    return dV_dt, dV_dx


def hjb_lagrangian(ctrl, sys, w, x, u, t=0.0):
    """f(x,u) + dV/dt + (dV/dx)^T (A x + B u + C d); independent of ``t``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    dV_dt, dV_dx = value_function_terms(ctrl, sys, w, x)
    return stage_cost(w, x, u) + dV_dt + dV_dx @ (sys.A @ x + sys.B @ u + sys.Cd)


def hjb_residual(ctrl, sys, w, x, t=0.0):
    """|HJB left-hand side| at the minimizing input h = -R^-1 B^T dV/dx."""
    _, dV_dx = value_function_terms(ctrl, sys, w, x)
    h = -la.solve_linear(w.R, sys.B.T @ dV_dx)
    return abs(hjb_lagrangian(ctrl, sys, w, x, h, t))

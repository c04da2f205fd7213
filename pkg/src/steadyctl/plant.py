"""Disturbed LTI plant, cost weights and the optimal steady state.

The plant is ``x' = A x + B u + C d`` with a constant disturbance ``d``.
The steady-state problem is

    min  f(y, u) = 1/2 (y^T Q y + u^T R u)   s.t.  A y + B u + C d = 0

and is solved through its KKT system.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import AssumptionViolation, ConfigError, SingularKkt, SingularMatrix

# Modes with Re(lambda) >= -HAUTUS_MARGIN must pass the Hautus rank test.
HAUTUS_MARGIN = 1e-9
KKT_TOL = 1e-8


@dataclass(frozen=True)
class DisturbedLtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    d: np.ndarray = None

    def __post_init__(self):
        A = la.as_matrix(self.A, "A")
        B = la.as_matrix(self.B, "B")
        C = la.as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n or C.shape[0] != n:
            raise ValueError(f"B {B.shape} and C {C.shape} need {n} rows")
        d = np.zeros(C.shape[1]) if self.d is None else la.as_vector(self.d, "d")
        if d.shape != (C.shape[1],):
            raise ValueError(f"d must have length {C.shape[1]}, got {d.shape}")
        for name, val in (("A", A), ("B", B), ("C", C), ("d", d)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[1]

    @property
    def Cd(self):
        return self.C @ self.d

    def with_disturbance(self, d):
        return DisturbedLtiSystem(self.A, self.B, self.C, d)


@dataclass(frozen=True)
class CostWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = la.as_matrix(self.Q, "Q")
        R = la.as_matrix(self.R, "R")
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise ValueError("Q and R must be square")
        if not la.is_symmetric(Q) or not la.is_symmetric(R):
            raise ValueError("Q and R must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-10 * max(1.0, np.linalg.norm(Q)):
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("R must be positive definite")
        Q, R = la.symmetrize(Q), la.symmetrize(R)
        Q.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    def check_dims(self, sys):
        if self.Q.shape != (sys.n, sys.n) or self.R.shape != (sys.m, sys.m):
            raise ValueError(
                f"weights Q{self.Q.shape}/R{self.R.shape} do not match "
                f"n={sys.n}, m={sys.m}")


def stage_cost(w, x, u):
    """f(x, u) = 1/2 (x^T Q x + u^T R u)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return 0.5 * (x @ w.Q @ x + u @ w.R @ u)


def input_gram(sys, w):
    """B R^-1 B^T."""
    return la.symmetrize(sys.B @ la.solve_linear(w.R, sys.B.T))


@dataclass(frozen=True)
class SteadyStateSolution:
    x_bar: np.ndarray
    u_bar: np.ndarray
    lambda_bar: np.ndarray

    def kkt_residuals(self, sys, w):
        """Residual norms of the three KKT blocks (stationarity x, u; feasibility)."""
        return (
            float(np.linalg.norm(w.Q @ self.x_bar + sys.A.T @ self.lambda_bar)),
            float(np.linalg.norm(w.R @ self.u_bar + sys.B.T @ self.lambda_bar)),
            float(np.linalg.norm(sys.A @ self.x_bar + sys.B @ self.u_bar + sys.Cd)),
        )

    def cost(self, w):
        return stage_cost(w, self.x_bar, self.u_bar)


# -- Assumption 1 -----------------------------------------------------------

def hautus_failures(A, B, margin=HAUTUS_MARGIN):
    """Eigenvalues of ``A`` with Re >= -margin that fail rank [A - lam I, B] = n."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    failing = []
    for lam in la.eigenvalues(A):
        if lam.real < -margin:
            continue
        pencil = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        s = np.linalg.svd(pencil, compute_uv=False)
        r = int(np.sum(s > la.RANK_RTOL * max(s[0], 1e-300))) if s.size else 0
        if r < n:
            failing.append(complex(lam))
    return failing


def check_stabilizable(A, B):
    return not hautus_failures(A, B)


def check_detectable(A, Q):
    return check_stabilizable(np.asarray(A, dtype=float).T, np.asarray(Q, dtype=float).T)


def _fmt_eig(lam):
    return f"{lam.real:.6g}{lam.imag:+.6g}j" if lam.imag else f"{lam.real:.6g}"


def require_assumption_1(sys, w):
    """Raise :class:`AssumptionViolation` naming the first failing eigenvalue."""
    w.check_dims(sys)
    bad = hautus_failures(sys.A, sys.B)
    if bad:
        raise AssumptionViolation(
            f"(A, B) not stabilizable: Hautus test fails at eigenvalue {_fmt_eig(bad[0])}",
            eigenvalue=bad[0])
    bad = hautus_failures(sys.A.T, w.Q.T)
    if bad:
        raise AssumptionViolation(
            f"(A, Q) not detectable: Hautus test fails at eigenvalue {_fmt_eig(bad[0])}",
            eigenvalue=bad[0])


# -- steady-state problem ---------------------------------------------------

def kkt_matrix(sys, w):
    n, m = sys.n, sys.m
    return np.block([
        [w.Q, np.zeros((n, m)), sys.A.T],
        [np.zeros((m, n)), w.R, sys.B.T],
        [sys.A, sys.B, np.zeros((n, n))],
    ])


def _solve_kkt(sys, w, rhs_tail):
    n, m = sys.n, sys.m
    K = kkt_matrix(sys, w)
    rhs = np.zeros((2 * n + m,) + rhs_tail.shape[1:])
    rhs[n + m:] = rhs_tail
    try:
        sol = la.solve_linear(K, rhs)
    except SingularMatrix as exc:
        raise SingularKkt(f"KKT matrix is singular: {exc}") from exc
    return sol[:n], sol[n:n + m], sol[n + m:]


def steady_state_solve(sys, w, check=True):
    """Unique optimal steady state ``(x_bar, u_bar, lambda_bar)``.

    Solves ``[[Q, 0, A^T], [0, R, B^T], [A, B, 0]] (x, u, lam) = (0, 0, -C d)``.
    With ``check`` the stabilizability/detectability tests run first so that a
    violation is reported with the offending eigenvalue.
    """
    if check:
        require_assumption_1(sys, w)
    else:
        w.check_dims(sys)
    x, u, lam = _solve_kkt(sys, w, -sys.Cd)
    ss = SteadyStateSolution(x, u, lam)
    sol_norm = np.linalg.norm(np.concatenate([x, u, lam]))
    scale = max(1.0, np.linalg.norm(kkt_matrix(sys, w)) * sol_norm, np.linalg.norm(sys.Cd))
    worst = max(ss.kkt_residuals(sys, w))
    if worst > KKT_TOL * scale:
        raise SingularKkt(f"KKT residual {worst:.3e} too large; assumption 1 likely violated")
    return ss


def steady_state_sensitivity(sys, w):
    """Linear maps ``d -> (x_bar, u_bar, lambda_bar)`` as (n x p, m x p, n x p)."""
    return _solve_kkt(sys, w, -sys.C)


def reduced_lagrangian(sys, w, y, lam):
    """L~(y, lam) = 1/2 (y^T Q y + lam^T G lam) + lam^T (A y - G lam + C d), G = B R^-1 B^T."""
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    G = input_gram(sys, w)
    return 0.5 * (y @ w.Q @ y + lam @ G @ lam) + lam @ (sys.A @ y - G @ lam + sys.Cd)


def feasible_points(sys, rng, count, spread=1.0):
    """Random ``(y, u)`` pairs with ``A y + B u + C d = 0``.

    A least-squares particular solution plus Gaussian combinations of an
    orthonormal basis of ker [A, B].
    """
    AB = np.hstack([sys.A, sys.B])
    particular, *_ = np.linalg.lstsq(AB, -sys.Cd, rcond=None)
    N = la.null_space(AB)
    coeffs = rng.standard_normal((count, N.shape[1])) * spread
    pts = particular + coeffs @ N.T
    return [(p[:sys.n], p[sys.n:]) for p in pts]


# -- JSON system files ------------------------------------------------------

def _reject_constant(token):
    raise ConfigError(f"non-finite number {token!r} in JSON input")


def _parse_matrix(obj, key):
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"'{key}' must be a non-empty list of rows")
    if not all(isinstance(row, list) for row in obj):
        raise ConfigError(f"'{key}' must be a list of rows (nested arrays)")
    width = len(obj[0])
    if any(len(row) != width for row in obj):
        raise ConfigError(f"'{key}' has ragged rows")
    return _numbers(obj, key)


def _parse_vector(obj, key):
    if not isinstance(obj, list):
        raise ConfigError(f"'{key}' must be an array")
    if obj and all(isinstance(v, list) for v in obj):
        if any(len(v) != 1 for v in obj):
            raise ConfigError(f"'{key}' must be a vector")
        obj = [v[0] for v in obj]
    return _numbers(obj, key)


def _numbers(obj, key):
    flat = obj if not obj or not isinstance(obj[0], list) else [v for row in obj for v in row]
    for v in flat:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"'{key}' contains a non-numeric or non-finite entry {v!r}")
    return np.array(obj, dtype=float)


def parse_system(text, require_weights=True):
    """Parse the JSON system format (keys ``A, B, C, d, Q, R``)."""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("system file must hold a JSON object")
    keys = ["A", "B", "C", "d"] + (["Q", "R"] if require_weights else [])
    missing = [k for k in keys if k not in data]
    if missing:
        raise ConfigError(f"system file is missing keys {missing}")
    try:
        sys = DisturbedLtiSystem(_parse_matrix(data["A"], "A"), _parse_matrix(data["B"], "B"),
                                 _parse_matrix(data["C"], "C"), _parse_vector(data["d"], "d"))
        weights = None
        if "Q" in data and "R" in data:
            weights = CostWeights(_parse_matrix(data["Q"], "Q"), _parse_matrix(data["R"], "R"))
            weights.check_dims(sys)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return sys, weights


def load_system(path, require_weights=True):
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read(), require_weights)


def system_to_dict(sys, w=None, **extra):
    out = {"A": sys.A.tolist(), "B": sys.B.tolist(), "C": sys.C.tolist(), "d": sys.d.tolist()}
    if w is not None:
        out["Q"] = w.Q.tolist()
        out["R"] = w.R.tolist()
    out.update(extra)
    return out


def dump_system(sys, w=None, **extra):
    return json.dumps(system_to_dict(sys, w, **extra), indent=2)

"""Dense real-matrix kernel.

Matrices are plain ``numpy`` float arrays. The functions here are pure; none
of them mutate their arguments.

The factorizations themselves (LU, SVD, Hessenberg-QR eigenvalues, ordered
real Schur, Pade scaling-and-squaring) come from LAPACK through numpy/scipy.
The Lyapunov and Riccati solvers are assembled here on top of them.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import (
    ConvergenceFailure,
    NoStabilizingSolution,
    NotHurwitz,
    ResidualTooLarge,
    SingularMatrix,
)

RANK_RTOL = 1e-10
SYMMETRY_RTOL = 1e-10


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float array (copy)."""
    m = np.array(a, dtype=float, copy=True)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_vector(v, name="vector"):
    out = np.array(v, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite entries")
    return out


def _require_square(a, name):
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got {a.shape}")


def is_symmetric(a, rtol=SYMMETRY_RTOL):
    a = np.asarray(a, dtype=float)
    return np.linalg.norm(a - a.T) <= rtol * max(1.0, np.linalg.norm(a))


def symmetrize(a):
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class Subspace:
    """Subspace of R^ambient_dim given by an orthonormal column basis."""

    ambient_dim: int
    basis: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[1]

    def project(self, v):
        v = np.asarray(v, dtype=float)
        return self.basis @ (self.basis.T @ v)

    def distance(self, v):
        """Norm of the component of ``v`` orthogonal to the subspace."""
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.project(v)))


def solve_linear(A, B):
    """Solve ``A X = B`` by partially pivoted LU.

    Raises
    ------
    SingularMatrix
        If some pivot has magnitude below ``1e-12 * ||A||_F``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _require_square(A, "A")
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"row mismatch: A is {A.shape}, B is {B.shape}")
    if A.shape[0] == 0:
        return np.zeros_like(B)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("solve_linear needs finite inputs")
    # raw LAPACK call: the pivot test below replaces scipy's singularity warning
    lu, piv, _ = lapack.dgetrf(A)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < 1e-12 * np.linalg.norm(A):
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below 1e-12*||A||_F "
            f"({np.linalg.norm(A):.3e})")
    return sla.lu_solve((lu, piv), B)


def eigenvalues(A):
    """Eigenvalues of a real square matrix, residual-checked.

    Each returned eigenpair is verified to satisfy
    ``||A v - lam v|| <= 1e-8 * max(1, ||A||)`` for unit ``v``.
    """
    A = np.asarray(A, dtype=float)
    _require_square(A, "A")
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"QR iteration did not converge: {exc}") from exc
    scale = max(1.0, np.linalg.norm(A, 2))
    resid = np.linalg.norm(A @ vecs - vecs * lam, axis=0)
    if not np.all(np.isfinite(lam)) or resid.max() > 1e-8 * scale:
        raise ConvergenceFailure(
            f"eigenpair residual {resid.max():.3e} exceeds 1e-8*{scale:.3e}")
    return lam


def spectral_abscissa(A):
    """Largest real part among the eigenvalues of ``A``."""
    lam = eigenvalues(A)
    return float(lam.real.max()) if lam.size else -np.inf


def is_hurwitz(A, margin=0.0):
    return spectral_abscissa(A) < -margin


def matrix_exponential(A, t=1.0):
    """``exp(A t)`` by scaling-and-squaring with a Pade approximant."""
    A = np.asarray(A, dtype=float)
    _require_square(A, "A")
    if not np.isfinite(t) or not np.all(np.isfinite(A)):
        raise ValueError("matrix_exponential needs finite inputs")
    return sla.expm(A * t)


def lyapunov_solve(A, Q):
    """Solve ``P A + A^T P + Q = 0`` for Hurwitz ``A``.

    Uses the Kronecker form ``(I kron A^T + A^T kron I) vec(P) = -vec(Q)``
    (column-major vec) and symmetrizes the result. Sizes here stay below a
    few hundred unknowns per side, so the dense solve is cheap.

    Raises
    ------
    NotHurwitz
        If ``A`` has an eigenvalue with non-negative real part.
    ResidualTooLarge
        If ``||P A + A^T P + Q||_F > 1e-9 * max(1, ||Q||_F)``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _require_square(A, "A")
    if Q.shape != A.shape:
        raise ValueError(f"Q shape {Q.shape} does not match A {A.shape}")
    if not is_symmetric(Q):
        raise ValueError("Q must be symmetric")
    if not is_hurwitz(A):
        raise NotHurwitz(f"spectral abscissa {spectral_abscissa(A):.3e} >= 0")
    n = A.shape[0]
    eye = np.eye(n)
    L = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = -Q.reshape(-1, order="F")
    vecP = solve_linear(L, rhs)
    P = symmetrize(vecP.reshape(n, n, order="F"))

    tol = 1e-9 * max(1.0, np.linalg.norm(Q))
    res = lyapunov_residual(P, A, Q)
    if res > tol:
        # one step of iterative refinement on the vectorized system
        P = symmetrize(P + solve_linear(L, -(P @ A + A.T @ P + Q).reshape(-1, order="F"))
                       .reshape(n, n, order="F"))
        res = lyapunov_residual(P, A, Q)
        if res > tol:
            raise ResidualTooLarge(f"Lyapunov residual {res:.3e} > {tol:.3e}")
    return P


def lyapunov_residual(P, A, Q):
    return float(np.linalg.norm(P @ A + A.T @ P + Q))


def riccati_residual(P, A, B, Q, R):
    """Frobenius norm of ``P A + A^T P - P B R^-1 B^T P + Q``."""
    G = B @ solve_linear(R, B.T)
    return float(np.linalg.norm(P @ A + A.T @ P - P @ G @ P + Q))


def care_solve(A, B, Q, R, newton_steps=1):
    """Stabilizing solution of the continuous algebraic Riccati equation.

    ``P A + A^T P - P B R^-1 B^T P + Q = 0``

    The stable invariant subspace of the Hamiltonian
    ``H = [[A, -B R^-1 B^T], [-Q, -A^T]]`` is extracted from an ordered real
    Schur form; with ``[X1; X2]`` its basis, ``P = X2 X1^-1``. A Newton-Kleinman
    step (one Lyapunov solve at the current gain) then polishes the residual.

    Raises
    ------
    NoStabilizingSolution
        If the Hamiltonian does not have exactly ``n`` stable eigenvalues, if
        ``X1`` is singular, or if the closed loop is not Hurwitz.
    ResidualTooLarge
        If the final residual exceeds ``1e-8 * max(1, ||Q||_F)``.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    n = A.shape[0]
    _require_square(A, "A")
    if B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1],) * 2:
        raise ValueError("inconsistent CARE dimensions")

    G = symmetrize(B @ solve_linear(R, B.T))
    H = np.block([[A, -G], [-Q, -A.T]])
    _, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NoStabilizingSolution(
            f"Hamiltonian has {sdim} stable eigenvalues, need {n}")
    X1, X2 = Z[:n, :n], Z[n:, :n]
    try:
        P = solve_linear(X1.T, X2.T).T
    except SingularMatrix as exc:
        raise NoStabilizingSolution("stable subspace basis X1 is singular") from exc
    P = symmetrize(P)

    for _ in range(newton_steps):
        K = solve_linear(R, B.T @ P)
        Acl = A - B @ K
        if not is_hurwitz(Acl):
            raise NoStabilizingSolution("Riccati closed loop is not Hurwitz")
        P = lyapunov_solve(Acl, symmetrize(Q + K.T @ R @ K))

    K = solve_linear(R, B.T @ P)
    if not is_hurwitz(A - B @ K):
        raise NoStabilizingSolution("Riccati closed loop is not Hurwitz")
    tol = 1e-8 * max(1.0, np.linalg.norm(Q))
    res = riccati_residual(P, A, B, Q, R)
    if res > tol:
        raise ResidualTooLarge(f"Riccati residual {res:.3e} > {tol:.3e}")
    return P


def rank_rtol(A, rtol=RANK_RTOL):
    """Number of singular values above ``rtol * sigma_max``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def controllability_matrix(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A, C):
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    return controllability_matrix(A.T, C.T).T


def null_space(A, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of ker(A), rank decided by ``rank_rtol``."""
    A = np.asarray(A, dtype=float)
    ncols = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(ncols)
    _, _, vt = np.linalg.svd(A)
    r = rank_rtol(A, rtol)
    return vt[r:].T.copy()


def _null_space_abs(M, tol):
    if M.shape[0] == 0 or M.shape[1] == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    r = int(np.sum(s > tol))
    return vt[r:].T


def unobservable_subspace(A, C, rtol=RANK_RTOL):
    """ker [C; CA; ...; CA^(n-1)] as an orthonormal basis.

    Computed as the largest A-invariant subspace inside ker C: starting from
    V = ker C, keep the part of V that A maps back into V until it stops
    shrinking. Unlike the stacked observability matrix this never forms high
    powers of A, so rank decisions stay meaningful for large-norm A.
    Singular values below ``rtol * max(||A||, ||C||)`` count as zero.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    _require_square(A, "A")
    n = A.shape[0]
    if C.shape[1] != n:
        raise ValueError(f"C must have {n} columns, got {C.shape}")
    tol = rtol * max(np.linalg.norm(A, 2) if n else 0.0,
                     np.linalg.norm(C, 2) if C.size else 0.0, 1e-300)
    V = _null_space_abs(C, tol)
    while V.shape[1] > 0:
        W = A @ V
        leak = W - V @ (V.T @ W)
        keep = _null_space_abs(leak, tol)
        if keep.shape[1] == V.shape[1]:
            break
        V, _ = np.linalg.qr(V @ keep)
    return Subspace(n, V)

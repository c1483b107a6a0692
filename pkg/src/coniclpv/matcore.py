"""Dense matrix kernels used throughout the package.

Everything here is a thin, validated wrapper around LAPACK (through numpy and
scipy) plus the Hamiltonian bisection for the H-infinity norm.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    IllConditioned,
    NonSquare,
    NonSymmetric,
    NoConvergence,
    NotHurwitz,
    Singular,
    SingularAtFrequency,
)

__all__ = [
    "SymmetricEigenDecomposition",
    "as_matrix",
    "sym_eig",
    "min_eig",
    "solve_linear",
    "is_hurwitz",
    "lyapunov_solve",
    "frequency_response",
    "hinf_norm",
    "sigma_max",
]

SYM_RTOL = 1e-9


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array (scalars become 1x1)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _check_square(M, name="matrix"):
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"{name} must be square, got shape {M.shape}")


def _check_symmetric(S, rtol=SYM_RTOL):
    scale = max(1.0, np.abs(S).max(initial=0.0))
    if np.abs(S - S.T).max(initial=0.0) > rtol * scale:
        raise NonSymmetric("matrix is not symmetric")


@dataclass(frozen=True)
class SymmetricEigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def sym_eig(S):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending."""
    S = as_matrix(S)
    _check_square(S)
    _check_symmetric(S)
    S = 0.5 * (S + S.T)
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return SymmetricEigenDecomposition(w, V)


def min_eig(S):
    S = as_matrix(S)
    _check_square(S)
    _check_symmetric(S)
    if S.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])


def solve_linear(A, B):
    """Solve ``A X = B``; raises :class:`Singular` for near-singular ``A``."""
    A = as_matrix(A, "A")
    B = np.asarray(B, dtype=float)
    vector = B.ndim == 1
    B = B.reshape(-1, 1) if vector else as_matrix(B, "B")
    _check_square(A, "A")
    if B.shape[0] != A.shape[0]:
        raise ValueError("row count of B must match A")
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        raise Singular("matrix is exactly singular")
    rcond = scipy.linalg.lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")[0]
    if rcond <= 1e-14:
        raise Singular(f"reciprocal condition number {rcond:.2e} too small")
    X = scipy.linalg.lu_solve((lu, piv), B, check_finite=False)
    return X.ravel() if vector else X


def is_hurwitz(A, margin=0.0):
    A = as_matrix(A)
    if A.size == 0:
        return True
    return bool(np.max(np.linalg.eigvals(A).real) < -margin)


def lyapunov_solve(A, Q):
    """Solve ``A^T W + W A + Q = 0`` for a Hurwitz ``A``.

    Bartels-Stewart via scipy. The returned matrix is exactly symmetric.
    """
    A = as_matrix(A, "A")
    Q = as_matrix(Q, "Q")
    _check_square(A, "A")
    _check_square(Q, "Q")
    _check_symmetric(Q)
    if not is_hurwitz(A):
        raise NotHurwitz("lyapunov_solve needs a Hurwitz A")
    W = scipy.linalg.solve_continuous_lyapunov(A.T, -Q)
    W = 0.5 * (W + W.T)
    resid = np.abs(A.T @ W + W @ A + Q).max(initial=0.0)
    scale = max(np.abs(Q).max(initial=0.0), np.abs(A).max() * np.abs(W).max(initial=0.0))
    if resid > 1e-9 * scale:
        raise IllConditioned(f"Lyapunov residual {resid:.2e} too large")
    return W


def frequency_response(A, B, C, omega, D=None):
    """Evaluate ``C (j omega I - A)^{-1} B + D`` at one frequency."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    n = A.shape[0]
    M = 1j * omega * np.eye(n) - A
    if n and np.linalg.cond(M) > 1e14:
        raise SingularAtFrequency(f"j*{omega} is (nearly) an eigenvalue of A")
    G = C @ np.linalg.solve(M, B.astype(complex)) if n else np.zeros((C.shape[0], B.shape[1]), complex)
    if D is not None:
        G = G + as_matrix(D, "D")
    return G


def _imag_axis_eigs(H):
    lam = np.linalg.eigvals(H)
    on_axis = np.abs(lam.real) <= 1e-8 * (1.0 + np.abs(lam))
    return lam[on_axis]


def _hamiltonian(A, B, C, D, gamma):
    p, m = D.shape
    R = D.T @ D - gamma**2 * np.eye(m)
    S = D @ D.T - gamma**2 * np.eye(p)
    Ri = np.linalg.inv(R)
    Si = np.linalg.inv(S)
    return np.block([
        [A - B @ Ri @ D.T @ C, -gamma * B @ Ri @ B.T],
        [gamma * C.T @ Si @ C, -A.T + C.T @ D @ Ri @ B.T],
    ])


def hinf_norm(A, B, C, D=None, tol=1e-9):
    """H-infinity norm of a stable continuous-time system.

    Bisection on the Hamiltonian test: ``gamma`` exceeds the norm iff the
    Hamiltonian built at ``gamma`` has no eigenvalue on the imaginary axis.
    The result is within ``tol`` (absolute, or relative once the norm
    exceeds one) of the true norm.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else as_matrix(D, "D")
    if not is_hurwitz(A):
        raise NotHurwitz("hinf_norm needs a Hurwitz A")

    def sv(M):
        return np.linalg.svd(M, compute_uv=False)[0] if M.size else 0.0

    lo = sv(D)
    n = A.shape[0]
    if n == 0 or not np.any(B) or not np.any(C):
        return float(lo)
    # lower bound from DC and the natural frequencies
    freqs = np.concatenate([[0.0], np.abs(np.linalg.eigvals(A))])
    for w in freqs:
        lo = max(lo, sv(frequency_response(A, B, C, w, D)))
    hi = 2.0 * lo if lo > 0.0 else 1.0
    while _imag_axis_eigs(_hamiltonian(A, B, C, D, hi)).size:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NoConvergence("no finite upper bound found")
    for _ in range(2000):
        if hi - lo <= 2.0 * tol * max(1.0, lo):
            break
        mid = 0.5 * (lo + hi)
        peaks = _imag_axis_eigs(_hamiltonian(A, B, C, D, mid))
        if peaks.size:
            # the crossings carry frequencies where the gain exceeds mid
            lo = max(mid, max(sv(frequency_response(A, B, C, abs(w.imag), D)) for w in peaks))
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def sigma_max(M):
    """Largest singular value, from the eigenvalues of ``M^T M``."""
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    lam = sym_eig(M.T @ M).eigenvalues[-1]
    return float(np.sqrt(max(lam, 0.0)))

"""Dense linear-algebra substrate: tolerance-aware rank/kernel/image
computation, eigenvalues, PBH tests and Riccati-based gain design.

All routines operate on plain ``numpy`` arrays.  Rank decisions use a
relative singular-value threshold (default ``1e-9``, overridable through
the ``DELAYSYNC_TOLERANCE`` environment variable), so they are robust to
uniform scaling of the input.
"""

import os

import numpy as np

from .errors import GainDesignError

__all__ = [
    "default_rank_tolerance",
    "as_matrix",
    "rank_of",
    "kernel_basis",
    "image_basis",
    "eigenvalues",
    "spectral_radius",
    "is_stabilizable",
    "is_detectable",
    "solve_dare",
    "design_stabilizing_gain",
    "design_observer_gain",
]

#: Default relative singular-value cutoff for rank decisions.
DEFAULT_RANK_RTOL = 1e-9

#: Convergence target for the Riccati residual, relative to solution scale.
DARE_RESIDUAL_TOL = 1e-10

#: Eigenvalues with modulus >= 1 - this margin count as "not asymptotically
#: stable" in the PBH tests.
PBH_EIG_MARGIN = 1e-9


def default_rank_tolerance():
    """Relative rank tolerance, honoring ``DELAYSYNC_TOLERANCE``.

    Raises ``ValueError`` if the override is not in (0, 1).
    """
    raw = os.environ.get("DELAYSYNC_TOLERANCE")
    if raw is None:
        return DEFAULT_RANK_RTOL
    eps = float(raw)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"DELAYSYNC_TOLERANCE must be in (0, 1), got {eps}")
    return eps


def as_matrix(obj, name="matrix", allow_complex=False):
    """Coerce to a 2-D float (or complex) array, rejecting NaN/Inf."""
    dtype = None if allow_complex else float
    M = np.asarray(obj, dtype=dtype)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _resolve_rtol(rtol):
    return default_rank_tolerance() if rtol is None else rtol


def rank_of(M, rtol=None):
    """Numerical rank: number of singular values above rtol * sigma_max."""
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    rtol = _resolve_rtol(rtol)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def kernel_basis(M, rtol=None):
    """Orthonormal basis of the null space of ``M``.

    Returns a ``cols x k`` array whose columns span the kernel, with
    ``k = cols - rank_of(M)``.  An empty second dimension means the
    kernel is trivial.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rtol = _resolve_rtol(rtol)
    if M.size == 0:
        return np.eye(M.shape[1])
    _, sv, Vt = np.linalg.svd(M, full_matrices=True)
    if sv.size == 0 or sv[0] == 0.0:
        r = 0
    else:
        r = int(np.sum(sv > rtol * sv[0]))
    return _canonical_columns(Vt[r:].T)


def image_basis(M, rtol=None):
    """Orthonormal basis of the column space of ``M`` (``rows x rank``)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rtol = _resolve_rtol(rtol)
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        r = 0
    else:
        r = int(np.sum(sv > rtol * sv[0]))
    return _canonical_columns(U[:, :r])


def _canonical_columns(B):
    # SVD bases carry an arbitrary sign; fix each column so the entry of
    # largest magnitude is positive, keeping outputs deterministic.
    B = np.array(B, copy=True)
    for j in range(B.shape[1]):
        col = B[:, j]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0:
            B[:, j] = -col
    return B


def eigenvalues(M):
    """Eigenvalues with multiplicity, as a complex array.

    Raises ``ValueError`` on non-square input.
    """
    M = np.atleast_2d(np.asarray(M))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"eigenvalues requires a square matrix, got {M.shape}")
    return np.linalg.eigvals(M)


def spectral_radius(M):
    """Largest eigenvalue modulus."""
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(eigenvalues(M))))


def is_stabilizable(A, B, rtol=None):
    """PBH test: rank [zI - A, B] = n at every eigenvalue z with |z| >= 1."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    if A.shape[1] != n or B.shape[0] != n:
        raise ValueError("inconsistent dimensions in stabilizability test")
    for z in eigenvalues(A):
        if abs(z) >= 1.0 - PBH_EIG_MARGIN:
            pencil = np.hstack([z * np.eye(n) - A, B])
            if rank_of(pencil, rtol) < n:
                return False
    return True


def is_detectable(A, C, rtol=None):
    """PBH test on the dual pair: rank [zI - A; C] = n for |z| >= 1."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return is_stabilizable(A.T, C.T, rtol)


def solve_dare(A, B, tol=DARE_RESIDUAL_TOL, max_doublings=120):
    """Stabilizing solution of the discrete Riccati equation with identity
    state and input weights:

        P = A'PA - A'PB (I + B'PB)^-1 B'PA + I

    Uses the structured doubling iteration, which squares the closed-loop
    contraction each pass and therefore converges in a handful of steps
    for any stabilizable pair.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    Ak = A.copy()
    Gk = B @ B.T
    Hk = np.eye(n)
    for _ in range(max_doublings):
        try:
            W = np.eye(n) + Gk @ Hk
            WA = np.linalg.solve(W, Ak)
            WG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError as exc:
            raise GainDesignError(f"Riccati doubling step became singular: {exc}")
        A_next = Ak @ WA
        G_next = Gk + Ak @ WG @ Ak.T
        H_next = Hk + WA.T @ Hk @ Ak
        if not np.all(np.isfinite(H_next)):
            raise GainDesignError("Riccati iteration diverged (non-finite iterate)")
        delta = np.max(np.abs(H_next - Hk))
        Ak, Gk, Hk = A_next, G_next, H_next
        if delta <= tol * max(1.0, np.max(np.abs(Hk))):
            break
    else:
        raise GainDesignError(
            f"Riccati iteration did not converge within {max_doublings} doublings"
        )
    P = 0.5 * (Hk + Hk.T)
    res = _dare_residual(A, B, P)
    if np.max(np.abs(res)) > tol * max(1.0, np.max(np.abs(P))):
        raise GainDesignError(
            f"Riccati residual {np.max(np.abs(res)):.3e} exceeds tolerance"
        )
    return P


def _dare_residual(A, B, P):
    m = B.shape[1]
    S = np.linalg.solve(np.eye(m) + B.T @ P @ B, B.T @ P @ A)
    return A.T @ P @ A - A.T @ P @ B @ S - P + np.eye(A.shape[0])


def design_stabilizing_gain(A, B, rtol=None):
    """Gain K with spectral_radius(A - B K) < 1.

    Solves the identity-weighted discrete Riccati equation and returns
    K = (I + B'PB)^-1 B'PA.  Raises ``GainDesignError`` if (A, B) fails
    the PBH stabilizability test or the iteration stalls.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if not is_stabilizable(A, B, rtol):
        raise GainDesignError("pair (A, B) is not stabilizable (PBH test failed)")
    P = solve_dare(A, B)
    m = B.shape[1]
    K = np.linalg.solve(np.eye(m) + B.T @ P @ B, B.T @ P @ A)
    rho = spectral_radius(A - B @ K)
    if rho >= 1.0:
        raise GainDesignError(f"designed gain is not stabilizing (rho = {rho})")
    return K


def design_observer_gain(A, C, rtol=None):
    """Gain F with spectral_radius(A - F C) < 1, via the dual problem."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return design_stabilizing_gain(A.T, C.T, rtol).T

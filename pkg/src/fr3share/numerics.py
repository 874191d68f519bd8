"""Small dense complex linear algebra: SVD and Hermitian eigendecomposition.

Matrices are plain complex numpy arrays. Two backends are provided for both
factorizations: ``"lapack"`` (numpy.linalg, the default used by the
simulator) and ``"jacobi"`` (cyclic two-sided Jacobi for Hermitian matrices,
one-sided Hestenes-Jacobi for the SVD), written here so the LAPACK results
can be checked against an independent route.

Every returned singular/eigen vector is phase-fixed: its largest-magnitude
entry is real and positive.
"""
import numpy as np

from .errors import InvalidDimension, NotHermitian

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
HERMITIAN_TOL = 1e-9
DEGENERACY_TOL = 1e-10


def as_matrix(a):
    """Return ``a`` as a 2-D complex array, checking shape and finiteness.

    1-D input is treated as a column vector.
    """
    m = np.asarray(a, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise InvalidDimension(f"expected a matrix, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidDimension(f"matrix has an empty dimension: {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidDimension("matrix has non-finite entries")
    return m


def fro_norm(a):
    return float(np.linalg.norm(a))


def fix_phase(U, V=None):
    """Rotate each column of U so its largest-magnitude entry is real positive.

    If V is given, its columns get the same rotation, which leaves every
    outer product u_k v_k^H unchanged. Works in place and returns (U, V).
    """
    for k in range(U.shape[1]):
        col = U[:, k]
        idx = int(np.argmax(np.abs(col)))
        mag = abs(col[idx])
        if mag == 0.0:
            continue
        rot = np.conj(col[idx]) / mag
        U[:, k] *= rot
        U[idx, k] = U[idx, k].real
        if V is not None:
            V[:, k] *= rot
    return U, V


def _jacobi_rotation(app, aqq, apq):
    """2x2 unitary G with G^H [[app, apq], [conj(apq), aqq]] G diagonal."""
    r = abs(apq)
    phase = apq / r
    theta = (aqq - app) / (2.0 * r)
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    e = np.conj(phase)
    return np.array([[c, s], [-s * e, c * e]], dtype=complex)


def jacobi_eigh(M, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigensolver for a Hermitian matrix (unsorted output)."""
    A = np.array(M, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = fro_norm(A)
    if scale == 0.0 or n == 1:
        return np.real(np.diag(A)).copy(), V
    for _ in range(max_sweeps):
        off = fro_norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                G = _jacobi_rotation(A[p, p].real, A[q, q].real, apq)
                idx = [p, q]
                A[:, idx] = A[:, idx] @ G
                A[idx, :] = G.conj().T @ A[idx, :]
                A[p, q] = A[q, p] = 0.0
                V[:, idx] = V[:, idx] @ G
    return np.real(np.diag(A)).copy(), V


def _complete_basis(U, rank):
    """Replace columns rank.. of U by an orthonormal completion."""
    m, k = U.shape
    basis = [U[:, j] for j in range(rank)]
    for i in range(m):
        if len(basis) == k:
            break
        v = np.zeros(m, dtype=complex)
        v[i] = 1.0
        for b in basis:
            v -= b * np.vdot(b, v)
        for b in basis:
            v -= b * np.vdot(b, v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
    U[:, rank:] = np.column_stack(basis[rank:])
    return U


def jacobi_svd(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """One-sided (Hestenes) Jacobi thin SVD. Returns U, S, V sorted descending."""
    A = np.asarray(A, dtype=complex)
    m, n = A.shape
    if m < n:
        U, S, V = jacobi_svd(A.conj().T, tol, max_sweeps)
        return V, S, U
    X = A.copy()
    V = np.eye(n, dtype=complex)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                xp, xq = X[:, p], X[:, q]
                alpha = np.vdot(xp, xp).real
                beta = np.vdot(xq, xq).real
                gamma = np.vdot(xp, xq)
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or abs(gamma) <= 1e-300:
                    continue
                G = _jacobi_rotation(alpha, beta, gamma)
                idx = [p, q]
                X[:, idx] = X[:, idx] @ G
                V[:, idx] = V[:, idx] @ G
                rotated = True
        if not rotated:
            break
    S = np.linalg.norm(X, axis=0)
    order = np.argsort(-S, kind="stable")
    S, X, V = S[order], X[:, order], V[:, order]
    smax = S[0] if S.size else 0.0
    rank = int(np.sum(S > max(smax, 1e-300) * 1e-14)) if smax > 0 else 0
    U = np.zeros((m, n), dtype=complex)
    U[:, :rank] = X[:, :rank] / S[:rank]
    S[rank:] = 0.0
    if rank < n:
        U = _complete_basis(U, rank)
    return U, S, V


def svd(A, method="lapack"):
    """Thin SVD ``A = U diag(S) V^H`` with S descending and phase-fixed vectors.

    U is m x k and V is n x k with k = min(m, n).
    """
    A = as_matrix(A)
    if method == "lapack":
        U, S, Vh = np.linalg.svd(A, full_matrices=False)
        V = Vh.conj().T
    elif method == "jacobi":
        U, S, V = jacobi_svd(A)
    else:
        raise ValueError(f"unknown svd method {method!r}")
    U, V = np.array(U), np.array(V)
    fix_phase(U, V)
    return U, np.asarray(S, dtype=float), V


def eig_hermitian(M, method="lapack"):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Small anti-Hermitian noise (up to 1e-9 relative) is removed by
    symmetrizing before the factorization.
    """
    M = as_matrix(M)
    n, n2 = M.shape
    if n != n2:
        raise InvalidDimension(f"eig_hermitian needs a square matrix, got {M.shape}")
    scale = fro_norm(M)
    if fro_norm(M - M.conj().T) > HERMITIAN_TOL * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    H = 0.5 * (M + M.conj().T)
    if method == "lapack":
        L, Q = np.linalg.eigh(H)
    elif method == "jacobi":
        L, Q = jacobi_eigh(H)
    else:
        raise ValueError(f"unknown eig method {method!r}")
    order = np.argsort(-L, kind="stable")
    L = np.asarray(L[order], dtype=float)
    Q = np.array(Q[:, order])
    fix_phase(Q)
    return Q, L


def is_degenerate(L, M):
    """True when the top two eigenvalues coincide (relative to ||M||_F)."""
    if len(L) < 2:
        return False
    return abs(L[0] - L[1]) < DEGENERACY_TOL * fro_norm(M)


def eig_hermitian_lowrank(B, d, method="lapack"):
    """Range-space eigenpairs of M = B diag(d) B^H (B is n x r, d real).

    Returns (Q, L): n x r orthonormal eigenvectors and their eigenvalues,
    descending. Every other eigenvalue of M is exactly zero. Costs O(n r^2)
    instead of O(n^3).
    """
    B = as_matrix(B)
    d = np.asarray(d, dtype=float).ravel()
    if d.size != B.shape[1]:
        raise InvalidDimension("need one weight per column of B")
    Qb, R = np.linalg.qr(B)
    small = (R * d) @ R.conj().T
    Y, L = eig_hermitian(small, method=method)
    Q = Qb @ Y
    fix_phase(Q)
    return Q, L

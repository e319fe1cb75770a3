"""Small dense linear algebra used by the targets and the bound calculators.

Matrices are plain 2-d numpy arrays. Lower-triangular matrices are stored
densely with an exactly-zero upper triangle; ``pack_lower``/``unpack_lower``
convert to and from the row-major packed layout.
"""

import numpy as np

SYM_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SINGULAR_PIVOT = 1e-300


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def _square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _check_symmetric(A):
    scale = max(1.0, np.max(np.abs(A)))
    asym = np.max(np.abs(A - A.T)) if A.size else 0.0
    if asym > SYM_TOL * scale:
        raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")


def pack_lower(A):
    """Row-major packed lower triangle (diagonal included)."""
    A = np.asarray(A, dtype=float)
    return A[np.tril_indices(A.shape[0])]


def unpack_lower(packed, d):
    packed = np.asarray(packed, dtype=float)
    if packed.size != d * (d + 1) // 2:
        raise ValueError(f"packed size {packed.size} does not match d={d}")
    out = np.zeros((d, d))
    out[np.tril_indices(d)] = packed
    return out


def frobenius_norm_sq(A):
    A = np.asarray(A, dtype=float)
    return float(np.sum(A * A))


def jacobi_eigvals(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted ascending."""
    A = _square(A)
    _check_symmetric(A)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    scale = max(np.sqrt(frobenius_norm_sq(A)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(max(frobenius_norm_sq(A) - np.sum(A.diagonal() ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) * 1e-150 > abs(apq):
                    # theta^2 would overflow; tan of the rotation angle tends to 1 / (2 theta)
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 if theta == 0.0 else (
                        np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
    return np.sort(A.diagonal())


def sym_eig_extremes(A):
    """(smallest, largest) eigenvalue of a symmetric matrix."""
    w = jacobi_eigvals(A)
    return float(w[0]), float(w[-1])


def cholesky_spd(A):
    """Lower-triangular L with L @ L.T == A."""
    A = _square(A)
    _check_symmetric(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - np.dot(L[j, :j], L[j, :j])
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (pivot {j} = {pivot:.3e})"
            )
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_lower(L, b):
    n = L.shape[0]
    x = np.zeros_like(b, dtype=float)
    for i in range(n):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def solve_upper(U, b):
    n = U.shape[0]
    x = np.zeros_like(b, dtype=float)
    for i in reversed(range(n)):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def solve_spd(A, b):
    L = cholesky_spd(A)
    b = np.asarray(b, dtype=float)
    return solve_upper(L.T, solve_lower(L, b))


def _is_triangular(A):
    return not np.any(np.triu(A, 1)) or not np.any(np.tril(A, -1))


def logabsdet(C):
    """log |det C|; triangular input uses the diagonal, general input LU with partial pivoting."""
    C = _square(C)
    if _is_triangular(C):
        pivots = np.abs(C.diagonal())
    else:
        U = C.copy()
        n = U.shape[0]
        for k in range(n):
            r = k + int(np.argmax(np.abs(U[k:, k])))
            if r != k:
                U[[k, r]] = U[[r, k]]
            if U[k, k] == 0.0:
                break
            U[k + 1:, k:] -= np.outer(U[k + 1:, k] / U[k, k], U[k, k:])
        pivots = np.abs(U.diagonal())
    if np.any(pivots < SINGULAR_PIVOT):
        raise SingularMatrixError("scale matrix is numerically singular")
    return float(np.sum(np.log(pivots)))

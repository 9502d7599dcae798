"""Small dense-matrix kernels.

Symmetric eigensolve (cyclic Jacobi), thin SVD through the Gram matrix,
and the two classical nonnegative-matrix reachability tests
(irreducibility and primitivity).  Everything targets small matrices
(k <= 64 on the short side); the Jacobi route is deliberate: the Gram
matrices we decompose are tiny, and a self-contained solver keeps the
numerical behaviour easy to reason about and to test.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConvergenceError,
    MultiplicityError,
    ShapeError,
    ZeroMatrixError,
)

MAX_SIZE = 64

# Relative gap under which singular values are considered tied when
# counting the multiplicity of the top one.
DEFAULT_REL_TOL = 1e-9

# Singular values at or below this fraction of sigma_1 are treated as
# exact zeros: their left vectors cannot be recovered from M @ v / sigma
# and are completed to an orthonormal basis instead.
_ZERO_SIGMA_FRAC = 1e-12

# The Gram route cannot distinguish singular values below roughly
# sqrt(machine eps) * sigma_1 from squaring noise: for a rank-deficient
# M the eigensolve reports lambda ~ eps * lambda_1, whose square root
# clears the zero threshold above even though M @ v is pure roundoff.
# Columns whose recovered norm falls at or below this floor are treated
# as zeros too.
_GRAM_NOISE_FRAC = 1e-8


def jacobi_eigh(S, max_sweeps=100):
    """Eigendecomposition of a small symmetric matrix.

    Runs cyclic Jacobi rotations until the off-diagonal mass is
    negligible.  Returns ``(eigvals, eigvecs)`` with eigenvalues sorted
    in descending order and eigenvectors in the matching columns.

    Raises ValueError if ``S`` is not square/symmetric, ShapeError if it
    is larger than MAX_SIZE, and ConvergenceError if ``max_sweeps``
    cyclic sweeps do not converge (does not happen for symmetric input).
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    k = S.shape[0]
    if k > MAX_SIZE:
        raise ShapeError(f"matrix side {k} exceeds the supported maximum {MAX_SIZE}")
    scale = max(1.0, float(np.max(np.abs(S))) if S.size else 0.0)
    if float(np.max(np.abs(S - S.T))) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")

    A = (S + S.T) / 2.0
    Q = np.eye(k)
    norm = float(np.linalg.norm(A))
    if norm == 0.0:
        return np.zeros(k), Q
    off_tol = 1e-13 * norm

    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= off_tol:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # Two-sided rotation in the (p, q) plane.
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                qp, qq = Q[:, p].copy(), Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
    else:
        raise ConvergenceError(f"Jacobi sweep budget ({max_sweeps}) exhausted")

    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], Q[:, order]


@dataclass
class SpectralDecomposition:
    """Thin SVD ``M = U @ diag(sigma) @ V.T`` of a tall d x k matrix.

    ``sigma`` is sorted descending and ``m`` counts how many leading
    singular values are within ``rel_tol * sigma[0]`` of the top one
    (the top multiplicity).
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    m: int
    rel_tol: float

    @property
    def top_pair(self):
        """Leading singular pair ``(u1, v1)``."""
        return self.U[:, 0], self.V[:, 0]


def thin_svd(M, rel_tol=DEFAULT_REL_TOL):
    """Thin SVD of a tall matrix via its k x k Gram matrix.

    Eigendecomposes ``M.T @ M`` with `jacobi_eigh`, takes square roots
    for the singular values, and recovers each left vector by
    normalizing ``M @ v``.  Left columns for (numerically) zero singular
    values, including those lost under the squaring noise floor, are
    completed to an orthonormal set from standard basis vectors, so U is
    always d x k with orthonormal columns.

    Raises ShapeError when d < k and ZeroMatrixError for an all-zero M.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {M.shape}")
    d, k = M.shape
    if d < k:
        raise ShapeError(f"matrix must be tall, got shape {M.shape}")
    if k == 0:
        raise ShapeError("matrix must have at least one column")
    if not np.any(M):
        raise ZeroMatrixError("cannot decompose an all-zero matrix")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")

    lam, V = jacobi_eigh(M.T @ M)
    sigma = np.sqrt(np.clip(lam, 0.0, None))
    top = sigma[0]

    U = np.zeros((d, k))
    missing = []
    for i in range(k):
        if sigma[i] <= _ZERO_SIGMA_FRAC * top:
            missing.append(i)
            continue
        cand = M @ V[:, i]
        nrm = float(np.linalg.norm(cand))
        if nrm <= _GRAM_NOISE_FRAC * top:
            sigma[i] = 0.0
            missing.append(i)
            continue
        U[:, i] = cand / nrm
    if missing:
        U = _complete_columns(U, missing)

    m = int(np.sum(top - sigma <= rel_tol * top))
    return SpectralDecomposition(U=U, sigma=sigma, V=V, m=m, rel_tol=float(rel_tol))


def _complete_columns(U, missing):
    """Fill the listed columns of U with vectors orthonormal to the rest."""
    d = U.shape[0]
    have = [j for j in range(U.shape[1]) if j not in set(missing)]
    basis = [U[:, j] for j in have]
    for j in missing:
        for cand in range(d):
            v = np.zeros(d)
            v[cand] = 1.0
            # Two Gram-Schmidt passes for a numerically clean residual.
            for _ in range(2):
                for b in basis:
                    v -= (b @ v) * b
            nrm = np.linalg.norm(v)
            if nrm > 0.5:
                v /= nrm
                U[:, j] = v
                basis.append(v)
                break
        else:  # pragma: no cover - d >= k guarantees a candidate exists
            raise ConvergenceError("failed to complete an orthonormal basis")
    return U


def fix_top_pair_sign(dec):
    """Resolve the joint sign of the leading singular pair.

    Both columns are flipped together so that ``sum(v1) >= 0``; an exact
    zero sum falls back to making the first nonzero entry of v1
    positive.  Only valid when the top singular value is simple
    (``dec.m == 1``); otherwise MultiplicityError is raised.  Returns a
    new decomposition, leaving the input untouched.
    """
    if dec.m != 1:
        raise MultiplicityError(
            f"top singular value has multiplicity {dec.m}; sign fixing "
            "is only defined for a simple top pair"
        )
    v = dec.V[:, 0]
    total = float(v.sum())
    flip = False
    if total < 0.0:
        flip = True
    elif total == 0.0:
        nz = v[v != 0.0]
        if nz.size and nz[0] < 0.0:
            flip = True
    U, V = dec.U.copy(), dec.V.copy()
    if flip:
        U[:, 0] = -U[:, 0]
        V[:, 0] = -V[:, 0]
    return SpectralDecomposition(U=U, sigma=dec.sigma.copy(), V=V, m=dec.m, rel_tol=dec.rel_tol)


def _check_square_nonneg(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_SIZE:
        raise ShapeError(f"matrix side {A.shape[0]} exceeds the supported maximum {MAX_SIZE}")
    if A.shape[0] == 0:
        raise ShapeError("matrix must be at least 1 x 1")
    if np.any(A < 0):
        raise ValueError("matrix must be entrywise nonnegative")
    return A


def is_primitive_bruteforce(A):
    """Whether a nonnegative square matrix is primitive.

    Checks by brute force whether some power ``A**t`` is entrywise
    positive, booleanizing between multiplications so only the zero
    pattern matters.  Powers up to the Wielandt bound (k-1)**2 + 1 are
    tried; if none is positive, no power ever is.
    """
    A = _check_square_nonneg(A)
    k = A.shape[0]
    B = (A > 0).astype(np.int64)
    P = B.copy()
    for _ in range((k - 1) ** 2 + 1):
        if P.all():
            return True
        P = ((P @ B) > 0).astype(np.int64)
    return False


def is_irreducible(A):
    """Whether a nonnegative square matrix is irreducible.

    For k >= 2 this is strong connectivity of the digraph with an edge
    (i, j) whenever ``A[i, j] > 0``.  A 1 x 1 matrix is irreducible iff
    its entry is positive (for every (i, j) some positive power must
    have a positive entry, which for a single node needs a self-loop).
    """
    A = _check_square_nonneg(A)
    if A.shape[0] == 1:
        return bool(A[0, 0] > 0)
    graph = csr_matrix(A > 0)
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    return bool(n_comp == 1)

"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Vectorization is column stacking throughout: ``vec(X) = X.reshape(-1, order="F")``,
so that ``vec(A X B) = (B.T kron A) vec(X)``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import DimensionError, EigenConvergenceError

__all__ = [
    "EigenCluster",
    "as_matrix",
    "check_density",
    "eig_general",
    "hs_orthonormal_basis",
    "is_hermitian",
    "kron",
    "null_space",
    "partial_trace",
    "psd_sqrt",
    "random_density",
    "random_unitary",
    "support_projector",
    "trace_norm",
    "unvec",
    "vec",
]

CLUSTER_TOL = 1e-8


def as_matrix(x, square=False, name="x"):
    """Coerce ``x`` to a 2-D complex array, rejecting non-finite entries."""
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def is_hermitian(x, tol=1e-10):
    x = np.asarray(x)
    return x.shape[0] == x.shape[1] and np.abs(x - x.conj().T).max(initial=0.0) <= tol


def check_density(rho, tol=1e-9, name="rho"):
    """Validate a density operator and return it as a Hermitian array."""
    rho = as_matrix(rho, square=True, name=name)
    if not is_hermitian(rho, tol):
        raise ValueError(f"{name} is not Hermitian")
    rho = (rho + rho.conj().T) / 2
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError(f"{name} is not positive semidefinite")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError(f"{name} does not have unit trace")
    return rho


def vec(x):
    return np.asarray(x).reshape(-1, order="F")


def unvec(v, rows, cols=None):
    cols = rows if cols is None else cols
    return np.asarray(v).reshape(rows, cols, order="F")


def kron(a, b):
    """Kronecker product with lexicographic index order (``a`` index slow)."""
    return np.kron(a, b)


def partial_trace(x, dims, keep):
    """Trace out every factor of ``x`` not listed in ``keep``.

    Parameters
    ----------
    x : (D, D) array
        Operator on the tensor product of spaces with dimensions ``dims``.
    dims : sequence of int
        Subsystem dimensions; their product must equal ``D``.
    keep : int or sequence of int
        Indices of the factors to keep, in any order. The result keeps the
        factors in ascending index order.

    Returns
    -------
    ndarray
        Reduced operator of size ``prod(dims[keep])``.
    """
    x = as_matrix(x, square=True)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != x.shape[0]:
        raise DimensionError(f"dims {dims} do not match operator of size {x.shape[0]}")
    keep = sorted({keep} if np.isscalar(keep) else set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep {keep} out of range for {len(dims)} factors")
    n = len(dims)
    t = x.reshape(dims + dims)
    # einsum labels: row indices 0..n-1, column indices n..2n-1; traced factors share a label
    row = list(range(n))
    col = [k + n if k in keep else k for k in range(n)]
    out = [k for k in keep] + [k + n for k in keep]
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.einsum(t, row + col, out).reshape(d_keep, d_keep)


def trace_norm(x):
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False).sum())


def psd_sqrt(x, tol=1e-9):
    """Principal square root of a Hermitian positive semidefinite matrix.

    Raises ``ValueError`` if an eigenvalue is below ``-tol``.
    """
    x = as_matrix(x, square=True)
    if not is_hermitian(x, max(tol, 1e-12) * max(1.0, np.abs(x).max())):
        raise ValueError("psd_sqrt expects a Hermitian matrix")
    w, v = np.linalg.eigh((x + x.conj().T) / 2)
    if w.min(initial=0.0) < -tol:
        raise ValueError(f"matrix has negative eigenvalue {w.min():.3e}")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def support_projector(x, tol=1e-10):
    """Orthonormal basis (columns) of the support of a Hermitian PSD matrix."""
    w, v = np.linalg.eigh((x + x.conj().T) / 2)
    return v[:, w > tol]


def null_space(a, tol):
    """Right null space of ``a`` at absolute singular-value threshold ``tol``.

    Returns the orthonormal basis and the singular values of ``a``.
    """
    u, s, vh = np.linalg.svd(a)
    s_full = np.zeros(a.shape[1])
    s_full[: len(s)] = s
    return vh.conj().T[:, s_full <= tol], s_full


def hs_orthonormal_basis(mats, tol=1e-8):
    """Hilbert-Schmidt orthonormal basis for the span of ``mats``.

    Returns ``(basis, singular_values)``; ``basis`` has shape ``(r, d, d)``.
    """
    mats = np.asarray(mats, dtype=complex)
    d = mats.shape[1]
    stacked = np.stack([vec(m) for m in mats], axis=1)
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    r = int(np.sum(s > tol))
    return np.stack([unvec(u[:, j], d) for j in range(r)]) if r else np.zeros((0, d, d), complex), s


@dataclass
class EigenCluster:
    """Eigenvalues of a matrix grouped at a clustering tolerance.

    ``right`` and ``left`` hold bases of the right and left eigenspaces
    (columns), normalized so that ``left.conj().T @ right`` is the identity.
    When the cluster is defective the two bases only span the geometric
    eigenspaces and may fail to be biorthogonalizable; ``biorthogonal`` is
    then False.
    """

    value: complex
    algebraic_mult: int
    geometric_mult: int
    members: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    condition: float = 1.0
    biorthogonal: bool = True

    @property
    def defective(self):
        return self.geometric_mult < self.algebraic_mult


def _cluster(values, tol):
    # single-linkage clustering on the complex plane
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(values.real)
    for a in range(n):
        i = order[a]
        for b in range(a + 1, n):
            j = order[b]
            if values[j].real - values[i].real > tol:
                break
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def eig_general(x, tol=CLUSTER_TOL):
    """Eigen-decomposition of a general square matrix with clustering.

    Eigenvalues closer than ``tol`` are merged into one cluster. For every
    cluster the right eigenspace is the numerical null space of
    ``x - value * I`` and the left eigenspace that of its adjoint, both at
    singular-value threshold ``tol * max(1, ||x||_2)``.

    Returns
    -------
    list of EigenCluster
        Sorted by decreasing modulus, then by argument.
    """
    x = as_matrix(x, square=True)
    n = x.shape[0]
    try:
        values = sla.eigvals(x)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenConvergenceError(f"eigenvalue iteration failed: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise EigenConvergenceError("eigenvalue iteration returned non-finite values")
    scale = max(1.0, float(np.linalg.norm(x, 2)))
    sv_tol = tol * scale
    clusters = []
    for members in _cluster(values, tol):
        members = np.array(sorted(members))
        lam = complex(values[members].mean())
        shifted = x - lam * np.eye(n)
        right, _ = null_space(shifted, sv_tol)
        left, _ = null_space(shifted.conj().T, sv_tol)
        geo = min(right.shape[1], left.shape[1], len(members))
        if right.shape[1] == 0 or left.shape[1] == 0:
            # eigenvector lost below threshold: fall back to the best direction
            _, _, vh = np.linalg.svd(shifted)
            right = vh.conj().T[:, -1:]
            _, _, vh = np.linalg.svd(shifted.conj().T)
            left = vh.conj().T[:, -1:]
            geo = 1
        right, left = right[:, :geo], left[:, :geo]
        m = left.conj().T @ right
        cond = float(np.linalg.cond(m)) if m.size else np.inf
        ok = np.isfinite(cond) and cond < 1 / np.finfo(float).eps
        if ok:
            left = left @ np.linalg.inv(m).conj().T
        clusters.append(
            EigenCluster(
                value=lam,
                algebraic_mult=len(members),
                geometric_mult=geo,
                members=members,
                right=right,
                left=left,
                condition=cond,
                biorthogonal=bool(ok) and geo == len(members),
            )
        )
    clusters.sort(key=lambda c: (-round(abs(c.value), 12), np.angle(c.value)))
    return clusters


def random_unitary(d, rng):
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d, rng, rank=None):
    """Random density matrix from the induced (Ginibre) measure."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real

"""Block structure of the peripheral space.

The image of the peripheral projector has the form
``0 (+) sum_k B(H_k1) kron delta_k`` on ``H = H_0 (+) sum_k H_k1 kron H_k2``
and the channel acts on it by ``x_k kron delta_k -> U_k^dag x_pi(k) U_k kron
delta_k``. This module extracts ``H_0``, the isometries ``W_k``, the states
``delta_k``, the permutation ``pi`` and the unitaries ``U_k``.
"""

from dataclasses import dataclass, field

import numpy as np

from .channels import from_superop
from .exceptions import StructureError
from .linalg import hs_orthonormal_basis, partial_trace, trace_norm, unvec, vec

__all__ = [
    "ActionResult",
    "PeripheralBlock",
    "PeripheralDecomposition",
    "Restriction",
    "block_decompose",
    "decompose",
    "peripheral_basis",
    "recover_action",
    "restrict_away_h0",
]

RANK_TOL = 1e-8
RECON_TOL = 1e-7
MAX_RETRIES = 3


@dataclass
class PeripheralBlock:
    """One summand ``W_k (B(C^d) kron delta) W_k^dag``.

    ``w`` has shape ``(dim, d*m)`` with column ``i*m + j`` the image of
    ``|i> kron |j>``; ``delta`` is diagonal with decreasing entries.
    ``u`` is filled in by :func:`recover_action`.
    """

    index: int
    d: int
    m: int
    w: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    u: np.ndarray = field(default=None, repr=False)

    @property
    def projector(self):
        return self.w @ self.w.conj().T

    def embed(self, x):
        """``W (x kron delta) W^dag`` for ``x`` on the first factor."""
        return self.w @ np.kron(x, self.delta) @ self.w.conj().T

    def extract(self, y):
        """``Tr_2(W^dag y W)``: the first-factor content of ``y``."""
        return partial_trace(self.w.conj().T @ y @ self.w, (self.d, self.m), 0)


@dataclass
class PeripheralDecomposition:
    dim: int
    dim_h0: int
    blocks: list
    sigma: np.ndarray = field(repr=False)
    pi: list = None
    residual: float = None
    non_unique: bool = False

    @property
    def ds(self):
        return [b.d for b in self.blocks]

    @property
    def ms(self):
        return [b.m for b in self.blocks]

    @property
    def cycle_type(self):
        if self.pi is None:
            return None
        seen, out = set(), []
        for s in range(len(self.pi)):
            n, j = 0, s
            while j not in seen:
                seen.add(j)
                j = self.pi[j]
                n += 1
            if n:
                out.append(n)
        return tuple(sorted(out, reverse=True))

    def embed(self, xs):
        """``sum_k W_k (x_k kron delta_k) W_k^dag``."""
        return sum(b.embed(x) for b, x in zip(self.blocks, xs))

    def operator_basis(self):
        """Operators ``W_k (|a><b| kron delta_k) W_k^dag`` spanning the peripheral space."""
        out = []
        for b in self.blocks:
            for i in range(b.d):
                for j in range(b.d):
                    e = np.zeros((b.d, b.d))
                    e[i, j] = 1
                    out.append(((b.index, i, j), b.embed(e)))
        return out

    def to_dict(self):
        def enc(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

        return {
            "dim": self.dim,
            "dim_h0": self.dim_h0,
            "blocks": [
                {
                    "d": b.d,
                    "m": b.m,
                    "delta": enc(b.delta),
                    "u": enc(b.u) if b.u is not None else None,
                }
                for b in self.blocks
            ],
            "pi": list(self.pi) if self.pi is not None else None,
            "non_unique": self.non_unique,
        }


def peripheral_basis(asym, tol=RANK_TOL):
    """Hilbert-Schmidt orthonormal basis of the image of the projector."""
    s = np.asarray(asym.proj_p.superop)
    d = asym.proj_p.dim_in
    u, sv, _ = np.linalg.svd(s)
    r = int(np.sum(sv > tol))
    if r == 0:
        raise StructureError("peripheral projector is zero")
    if r < len(sv) and sv[r] > 0 and sv[r - 1] / sv[r] < 10:
        raise StructureError(
            f"rank of the projector is unstable: singular values {sv[r - 1]:.2e} and {sv[r]:.2e}"
        )
    return [unvec(u[:, j], d) for j in range(r)]


def _union_find(n, edges):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges:
        parent[find(a)] = find(b)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=min)


def _eigenspaces(algebra, rng):
    """Eigenspaces of a random Hermitian element, retried on near-degeneracy."""
    r = algebra.shape[1]
    for _ in range(MAX_RETRIES):
        c = rng.standard_normal(len(algebra))
        a = np.einsum("k,kij->ij", c, algebra)
        a = (a + a.conj().T) / 2
        a /= max(np.abs(a).max(), 1e-300)
        w, v = np.linalg.eigh(a)
        spread = max(w[-1] - w[0], 1.0)
        groups, start = [], 0
        for i in range(1, r + 1):
            if i == r or w[i] - w[i - 1] > 1e-6 * spread:
                groups.append(list(range(start, i)))
                start = i
        gaps = [w[g[0]] - w[h[-1]] for h, g in zip(groups, groups[1:])]
        if not gaps or min(gaps) >= 1e-3 * spread:
            return [v[:, g] for g in groups]
    raise StructureError("random algebra element stayed degenerate after retries")


def _polar_unitary(m):
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _canonical_frames(w, d, m, sigma):
    """Fix the gauge of ``w``: diagonal decreasing ``delta`` and a frame of
    the first factor that diagonalizes the compressed position operator."""
    dim = w.shape[0]
    reduced = w.conj().T @ sigma @ w
    delta = partial_trace(reduced, (d, m), 1)
    delta = (delta + delta.conj().T) / 2
    delta /= np.trace(delta).real
    lam, r2 = np.linalg.eigh(delta)
    lam, r2 = lam[::-1], r2[:, ::-1]
    w = w @ np.kron(np.eye(d), r2)
    position = np.diag(np.arange(dim) / dim)
    c = partial_trace(w.conj().T @ position @ w, (d, m), 0)
    _, r1 = np.linalg.eigh((c + c.conj().T) / 2)
    w = w @ np.kron(r1, np.eye(m))
    # phases: largest entry of each |i> kron |0> column real positive
    phases = np.ones(d, complex)
    for i in range(d):
        col = w[:, i * m]
        j = np.argmax(np.abs(col))
        phases[i] = np.abs(col[j]) / col[j]
    w = w @ np.kron(np.diag(phases), np.eye(m))
    return w, np.diag(lam).astype(complex)


def block_decompose(asym, basis=None, seed=0):
    """Split the peripheral space into blocks ``(d_k, m_k, W_k, delta_k)``.

    Parameters
    ----------
    asym : AsymptoticPart
    basis : list of ndarray, optional
        Output of :func:`peripheral_basis`; computed when omitted.
    seed : int
        Seed for the random algebra elements.

    Returns
    -------
    PeripheralDecomposition
        Without ``pi``/``u``; see :func:`recover_action`.

    Raises
    ------
    StructureError
        If the reconstructed span misses the peripheral space by more than
        ``1e-7`` or a block fails to factor as a tensor product.
    """
    rng = np.random.default_rng(seed)
    proj = asym.proj_p
    d = proj.dim_in
    basis = peripheral_basis(asym) if basis is None else basis
    sigma = proj(np.eye(d) / d)
    sigma = (sigma + sigma.conj().T) / 2
    w_s, v_s = np.linalg.eigh(sigma)
    q0 = v_s[:, w_s > 1e-9 * w_s.max()]
    r = q0.shape[1]
    # fixed points of the adjoint projector, compressed to the support of sigma
    s_adj = np.asarray(proj.superop).conj().T
    u, sv, _ = np.linalg.svd(s_adj)
    fixed = [unvec(u[:, j], d) for j in range(int(np.sum(sv > RANK_TOL)))]
    algebra, _ = hs_orthonormal_basis([q0.conj().T @ y @ q0 for y in fixed], RANK_TOL)
    if len(algebra) != len(basis):
        raise StructureError(
            f"algebra dimension {len(algebra)} differs from peripheral dimension {len(basis)}"
        )
    spaces = _eigenspaces(algebra, rng)
    edges = []
    for a in range(len(spaces)):
        for b in range(a + 1, len(spaces)):
            coupling = max(np.linalg.norm(spaces[a].conj().T @ f @ spaces[b]) for f in algebra)
            if coupling > 1e-6:
                edges.append((a, b))
    blocks = []
    for group in _union_find(len(spaces), edges):
        es = [spaces[g] for g in group]
        m = es[0].shape[1]
        if any(e.shape[1] != m for e in es):
            raise StructureError("eigenspaces in one block have different dimensions")
        g = np.einsum("k,kij->ij", rng.standard_normal(len(algebra)) + 1j * rng.standard_normal(len(algebra)), algebra)
        cols = [es[0]] + [e @ _polar_unitary(e.conj().T @ g @ es[0]) for e in es[1:]]
        w = q0 @ np.hstack(cols)
        w, delta = _canonical_frames(w, len(es), m, sigma)
        if np.linalg.eigvalsh(delta).min() <= 1e-10:
            raise StructureError("block state is not positive definite")
        blocks.append(PeripheralBlock(0, len(es), m, w, delta))

    def order_key(b):
        support = np.flatnonzero(np.linalg.norm(b.w, axis=1) > 1e-8)
        return (-b.d, -b.m, int(support[0]) if len(support) else 0, tuple(-np.diag(b.delta).real))

    blocks.sort(key=order_key)
    for k, b in enumerate(blocks):
        b.index = k
    decomp = PeripheralDecomposition(dim=d, dim_h0=d - r, blocks=blocks, sigma=sigma)
    _check_reconstruction(decomp, basis, proj)
    return decomp


def _check_reconstruction(decomp, basis, proj):
    ops = [x for _, x in decomp.operator_basis()]
    if len(ops) != len(basis):
        raise StructureError(f"reconstructed {len(ops)} operators for a {len(basis)}-dim space")
    b = np.stack([vec(x) for x in basis], axis=1)
    worst = 0.0
    for x in ops:
        v = vec(x)
        worst = max(worst, np.linalg.norm(v - b @ (b.conj().T @ v)) / max(np.linalg.norm(v), 1e-300))
        worst = max(worst, trace_norm(proj(x) - x) / max(trace_norm(x), 1e-300))
    if worst > RECON_TOL:
        raise StructureError(f"block reconstruction residual {worst:.2e} exceeds {RECON_TOL:g}")
    decomp.residual = worst


@dataclass
class ActionResult:
    """``pi[k]`` is the block feeding output block ``k``; ``unitaries[k]`` is
    ``U_k`` with ``Phi(sum W_l (x_l kron delta_l) W_l^dag) =
    sum_k W_k (U_k^dag x_pi(k) U_k kron delta_k) W_k^dag``."""

    pi: list
    unitaries: list
    residual: float
    non_unique: bool


def recover_action(phi, decomp):
    """Recover ``pi`` and ``U_k`` and verify the block action on a full basis.

    Stores the result on ``decomp`` as well. ``U_k`` is fixed up to phase by
    making its largest-magnitude entry real positive.
    """
    blocks = decomp.blocks
    kk = len(blocks)
    projs = [b.projector for b in blocks]
    pi = [None] * kk
    for l, b in enumerate(blocks):
        y = phi(b.embed(np.eye(b.d) / b.d))
        weights = np.array([np.trace(p @ y).real for p in projs])
        k = int(np.argmax(weights))
        if abs(weights[k] - 1) > 1e-7 or pi[k] is not None or blocks[k].d != b.d:
            raise StructureError(f"block {l} is not mapped onto a single block: weights {weights}")
        pi[k] = l
    unitaries = []
    for k, bk in enumerate(blocks):
        src = blocks[pi[k]]
        d = bk.d

        def y(a, b_):
            e = np.zeros((d, d))
            e[a, b_] = 1
            return bk.extract(phi(src.embed(e)))

        w, v = np.linalg.eigh(y(0, 0))
        u0 = v[:, -1] * np.sqrt(max(w[-1], 0.0))
        u_dag = np.stack([u0] + [y(a, 0) @ u0 for a in range(1, d)], axis=1)
        u = u_dag.conj().T
        j = np.unravel_index(np.argmax(np.abs(u)), u.shape)
        u = u * (np.abs(u[j]) / u[j])
        if np.abs(u @ u.conj().T - np.eye(d)).max() > 1e-7:
            raise StructureError(f"fitted block unitary {k} is not unitary")
        unitaries.append(u)
        bk.u = u
    residual = 0.0
    for l, src in enumerate(blocks):
        k = pi.index(l)
        for a in range(src.d):
            for b_ in range(src.d):
                e = np.zeros((src.d, src.d))
                e[a, b_] = 1
                lhs = phi(src.embed(e))
                u = unitaries[k]
                rhs = blocks[k].embed(u.conj().T @ e @ u)
                residual = max(residual, trace_norm(lhs - rhs))
    if residual > RECON_TOL:
        raise StructureError(f"block action residual {residual:.2e} exceeds {RECON_TOL:g}")
    non_unique = any(
        blocks[a].d == blocks[b].d
        and blocks[a].m == blocks[b].m
        and np.abs(np.diag(blocks[a].delta) - np.diag(blocks[b].delta)).max() < 1e-8
        for a in range(kk)
        for b in range(a + 1, kk)
    )
    decomp.pi, decomp.non_unique = pi, non_unique
    return ActionResult(pi, unitaries, residual, non_unique)


@dataclass
class Restriction:
    """``channel`` acts on ``C^r`` with ``r = dim - dim_h0``; ``embedding``
    is the isometry ``V`` onto the orthogonal complement of ``H_0``."""

    channel: object
    embedding: np.ndarray = field(repr=False)
    noop: bool


def restrict_away_h0(asym, decomp, tol=1e-8):
    """Restrict the projector to the complement of ``H_0``.

    On that space it acts as ``X -> sum_k Tr_2(P_k X P_k) kron delta_k`` in
    the block frames. The result is checked against the compression
    ``V^dag P(V X V^dag) V``.
    """
    v = np.hstack([b.w for b in decomp.blocks])
    r = v.shape[1]
    local = []
    start = 0
    for b in decomp.blocks:
        wl = np.zeros((r, b.d * b.m), complex)
        wl[start : start + b.d * b.m] = np.eye(b.d * b.m)
        local.append(wl)
        start += b.d * b.m
    s = np.zeros((r * r, r * r), complex)
    s_check = np.zeros_like(s)
    for c in range(r * r):
        x = np.zeros(r * r, complex)
        x[c] = 1
        x = unvec(x, r)
        y = sum(
            wl @ np.kron(partial_trace(wl.conj().T @ x @ wl, (b.d, b.m), 0), b.delta) @ wl.conj().T
            for wl, b in zip(local, decomp.blocks)
        )
        s[:, c] = vec(y)
        s_check[:, c] = vec(v.conj().T @ asym.proj_p(v @ x @ v.conj().T) @ v)
    if np.abs(s - s_check).max() > tol:
        raise StructureError(
            f"restricted projector disagrees with the compression by {np.abs(s - s_check).max():.2e}"
        )
    return Restriction(from_superop(s, r, tol=tol), v, noop=decomp.dim_h0 == 0)


def decompose(phi, seed=0, asym=None):
    """Full pipeline: spectrum, projector, blocks and block action."""
    from .spectral import asymptotic_part

    asym = asymptotic_part(phi) if asym is None else asym
    decomp = block_decompose(asym, seed=seed)
    recover_action(phi, decomp)
    return decomp

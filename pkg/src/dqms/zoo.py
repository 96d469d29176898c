"""Named test channels, generated on demand.

Names understood by :func:`make`::

    identity-D             identity on C^D
    depolarizing-D         X -> Tr(X) I/D
    pinching[-a-b-...]     block pinching, default blocks {1,2},{3}
    shift-dephase-D        X -> S diag(X) S^dag with S the cyclic shift
    ad-G                   amplitude damping with decay probability G
    transient-qutrit       Kraus {|0><0| + |1><1|, |0><2|}
    unitary-phase-T        conjugation by diag(1, exp(iT))
    random-block-SEED      seeded channel with a known peripheral structure
    A*B                    tensor product
"""

from dataclasses import dataclass, field

import numpy as np

from .channels import from_kraus, from_superop, tensor, unitary_channel
from .exceptions import DimensionError
from .linalg import random_density, random_unitary

__all__ = [
    "BlockSpec",
    "RandomBlockChannel",
    "amplitude_damping",
    "depolarizing",
    "identity",
    "make",
    "pinching",
    "random_block",
    "random_channel",
    "shift_dephase",
    "transient_qutrit",
    "unitary_phase",
]


def identity(d):
    return from_kraus([np.eye(d)])


def depolarizing(d):
    """Completely depolarizing channel ``X -> Tr(X) I/d``."""
    kraus = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d))
            k[i, j] = 1 / np.sqrt(d)
            kraus.append(k)
    return from_kraus(kraus)


def pinching(block_sizes=(2, 1)):
    """Pinching onto consecutive diagonal blocks of the given sizes."""
    d = sum(block_sizes)
    kraus, start = [], 0
    for b in block_sizes:
        p = np.zeros((d, d))
        p[start : start + b, start : start + b] = np.eye(b)
        kraus.append(p)
        start += b
    return from_kraus(kraus)


def shift_dephase(d):
    kraus = []
    for i in range(d):
        k = np.zeros((d, d))
        k[(i + 1) % d, i] = 1
        kraus.append(k)
    return from_kraus(kraus)


def amplitude_damping(gamma):
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    return from_kraus(
        [
            np.array([[1, 0], [0, np.sqrt(1 - gamma)]]),
            np.array([[0, np.sqrt(gamma)], [0, 0]]),
        ]
    )


def transient_qutrit():
    k0 = np.diag([1.0, 1.0, 0.0])
    k1 = np.zeros((3, 3))
    k1[0, 2] = 1
    return from_kraus([k0, k1])


def unitary_phase(theta):
    return unitary_channel(np.diag([1, np.exp(1j * theta)]))


def random_channel(d, rng, n_kraus=2, dim_out=None):
    """Random channel from a Haar isometry split into ``n_kraus`` blocks."""
    dim_out = d if dim_out is None else dim_out
    if dim_out * n_kraus < d:
        raise DimensionError(f"{n_kraus} Kraus operators of size {dim_out}x{d} cannot form a channel")
    g = rng.standard_normal((dim_out * n_kraus, d)) + 1j * rng.standard_normal((dim_out * n_kraus, d))
    v, _ = np.linalg.qr(g)
    return from_kraus([v[i * dim_out : (i + 1) * dim_out] for i in range(n_kraus)])


@dataclass
class BlockSpec:
    d: int
    m: int
    delta: np.ndarray = field(repr=False)


@dataclass
class RandomBlockChannel:
    """A channel together with the peripheral structure it was built from.

    ``embeddings[k]`` is the isometry ``W_k`` (columns indexed ``i*m + j``)
    and ``sigma[k]`` the block that block ``k`` is sent to, so the
    permutation of the block action is ``pi = sigma^-1``.
    """

    channel: object
    dim_h0: int
    blocks: list
    embeddings: list = field(repr=False)
    sigma: list
    q: float
    projector: object = field(repr=False)

    @property
    def cycle_type(self):
        return _cycle_type(self.sigma)


def _cycle_type(perm):
    seen, out = set(), []
    for s in range(len(perm)):
        if s in seen:
            continue
        n, j = 0, s
        while j not in seen:
            seen.add(j)
            j = perm[j]
            n += 1
        out.append(n)
    return tuple(sorted(out, reverse=True))


def _embedding_superop(w):
    # superop of X -> w X w^dag
    return np.kron(w.conj(), w)


def random_block(seed, max_dim=5):
    """Seeded channel ``Ad(G) o Ad(V) o ((1-q) P + q id) o Ad(G^dag)``.

    ``P`` projects onto ``0 + sum_k B(C^d_k) kron delta_k`` (the H0 weight is
    re-prepared as a fixed state in the range), ``V`` permutes blocks of
    equal shape and equal ``delta`` and applies random unitaries on the
    first factors, and ``G`` is Haar random. The peripheral projector is
    ``Ad(G) P Ad(G^dag)`` and ``Delta_n = q^n ||id - P||_diamond``.
    """
    rng = np.random.default_rng(seed)
    while True:
        k = int(rng.integers(1, 4))
        shapes = [(int(rng.integers(1, 3)), int(rng.integers(1, 3)))]
        for _ in range(k - 1):
            # repeat shapes often so that nontrivial permutations occur
            if rng.random() < 0.5:
                shapes.append(shapes[-1])
            else:
                shapes.append((int(rng.integers(1, 3)), int(rng.integers(1, 3))))
        dim_h0 = int(rng.integers(0, 2))
        dim = dim_h0 + sum(a * b for a, b in shapes)
        if 2 <= dim <= max_dim:
            break
    # group blocks of equal shape into orbits; orbits share delta
    sigma = list(range(k))
    groups = {}
    for i, s in enumerate(shapes):
        groups.setdefault(s, []).append(i)
    deltas = [None] * k
    for s, idx in groups.items():
        if len(idx) > 1 and rng.random() < 0.7:
            perm = list(rng.permutation(idx))
            for a, b in zip(idx, perm):
                sigma[a] = int(b)
        orbit_of = {}
        for i in idx:
            root = min(_orbit(sigma, i))
            if root not in orbit_of:
                rho = random_density(s[1], rng)
                rho = 0.8 * rho + 0.2 * np.eye(s[1]) / s[1]
                orbit_of[root] = rho
            deltas[i] = orbit_of[root]
    blocks = [BlockSpec(a, b, deltas[i]) for i, (a, b) in enumerate(shapes)]
    # canonical embeddings: H0 first, then blocks
    embeddings, start = [], dim_h0
    for b in blocks:
        w = np.zeros((dim, b.d * b.m))
        w[start : start + b.d * b.m] = np.eye(b.d * b.m)
        embeddings.append(w)
        start += b.d * b.m
    # V-invariant state for the H0 weight: weights constant on orbits
    tau = sum(
        w @ np.kron(np.eye(b.d) / b.d, b.delta) @ w.T for w, b in zip(embeddings, blocks)
    ) / k
    proj = _block_projector(dim, dim_h0, blocks, embeddings, tau)
    v = np.zeros((dim, dim), complex)
    v[:dim_h0, :dim_h0] = np.eye(dim_h0)
    for i, b in enumerate(blocks):
        u = random_unitary(b.d, rng)
        v += embeddings[sigma[i]] @ np.kron(u, np.eye(b.m)) @ embeddings[i].T
    q = float(rng.uniform(0.2, 0.6))
    g = random_unitary(dim, rng)
    ad_g = _embedding_superop(g)
    t = (1 - q) * proj + q * np.eye(dim * dim)
    s = ad_g @ _embedding_superop(v) @ t @ ad_g.conj().T
    channel = from_superop(s, dim)
    proj_channel = from_superop(ad_g @ proj @ ad_g.conj().T, dim)
    return RandomBlockChannel(
        channel=channel,
        dim_h0=dim_h0,
        blocks=blocks,
        embeddings=[g @ w for w in embeddings],
        sigma=sigma,
        q=q,
        projector=proj_channel,
    )


def _orbit(perm, i):
    out, j = {i}, perm[i]
    while j != i:
        out.add(j)
        j = perm[j]
    return out


def _block_projector(dim, dim_h0, blocks, embeddings, tau):
    # superop of X -> sum_k W_k (Tr_2(W_k^dag X W_k) kron delta_k) W_k^dag + Tr(P0 X) tau
    s = np.zeros((dim * dim, dim * dim), complex)
    for c in range(dim * dim):
        x = np.zeros(dim * dim, complex)
        x[c] = 1
        x = x.reshape(dim, dim, order="F")
        y = np.trace(x[:dim_h0, :dim_h0]) * tau
        for w, b in zip(embeddings, blocks):
            xk = (w.T @ x @ w).reshape(b.d, b.m, b.d, b.m)
            red = np.einsum("ijkj->ik", xk)
            y = y + w @ np.kron(red, b.delta) @ w.T
        s[:, c] = y.reshape(-1, order="F")
    return s


def make(name, dim=None, gamma=None, seed=None):
    """Build a zoo channel from its name.

    ``dim`` and ``gamma`` fill in a missing numeric suffix (``identity`` with
    ``dim=3`` is ``identity-3``). Random block entries return the channel
    only; use :func:`random_block` for the ground truth.
    """
    name = name.strip()
    if "*" in name:
        parts = [make(p, dim, gamma, seed) for p in name.split("*")]
        out = parts[0]
        for p in parts[1:]:
            out = tensor(out, p)
        return out
    base, _, arg = _split(name)
    try:
        if base == "identity":
            return identity(int(arg or dim or 2))
        if base == "depolarizing":
            return depolarizing(int(arg or dim or 2))
        if base == "pinching":
            sizes = tuple(int(a) for a in arg.split("-")) if arg else (2, 1)
            return pinching(sizes)
        if base == "shift-dephase":
            return shift_dephase(int(arg or dim or 3))
        if base in ("ad", "amplitude-damping"):
            g = float(arg) if arg else gamma
            if g is None:
                raise DimensionError("amplitude damping needs a gamma")
            return amplitude_damping(g)
        if base == "transient-qutrit":
            return transient_qutrit()
        if base == "unitary-phase":
            return unitary_phase(float(arg) if arg else 0.7)
        if base == "random-block":
            s = int(arg) if arg else (0 if seed is None else seed)
            return random_block(s).channel
    except ValueError as exc:
        raise DimensionError(f"bad parameter in zoo name {name!r}: {exc}") from exc
    raise DimensionError(f"unknown zoo channel {name!r}")


_BASES = (
    "identity",
    "depolarizing",
    "pinching",
    "shift-dephase",
    "amplitude-damping",
    "ad",
    "transient-qutrit",
    "unitary-phase",
    "random-block",
)


def _split(name):
    for b in _BASES:
        if name == b:
            return b, "", ""
        if name.startswith(b + "-"):
            return b, "-", name[len(b) + 1 :]
    return name, "", ""

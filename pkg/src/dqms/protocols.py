"""Zero-error codes built from the peripheral block structure, and their
verification by exact simulation through ``Phi^n``.

* Quantum: encode into the largest block, decode by inverting ``Phi^n`` on
  the peripheral space.
* Classical: one codeword per block basis vector; decode with the support
  projectors of the evolved codewords.
* Entanglement assisted: superdense coding inside every block.
* Private: computational-basis messages through the quantum code.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    adjoint_map,
    complementary,
    compose,
    from_kraus,
    from_superop,
    power,
    superop_to_choi,
)
from .divergences import fidelity
from .exceptions import DimensionError, StructureError
from .linalg import partial_trace, support_projector, trace_norm, unvec, vec

__all__ = [
    "CERT_TOL",
    "ClassicalCode",
    "EACode",
    "PrivateCode",
    "ProtocolEvalReport",
    "QuantumCode",
    "build_classical_code",
    "build_ea_code",
    "build_quantum_code",
    "eval_classical_code",
    "eval_ea_code",
    "eval_quantum_code",
    "private_from_quantum",
    "protocol_bundle",
    "verify_all",
    "wrapped_rates",
]

CERT_TOL = 1e-9
COND_LIMIT = 1e12


@dataclass
class ProtocolEvalReport:
    """Outcome of simulating a code through ``Phi^n``.

    ``error`` is the worst case over messages (classical families) or the
    trace distance between normalized Choi states (quantum family), so it
    lies in ``[0, 1]``. ``env_fidelity`` is the smallest pairwise fidelity
    of environment states (private codes only).
    """

    family: str
    n: int
    rate: float
    error: float
    passed: bool
    env_fidelity: float = None
    detail: str = ""


def _superop_of(fn, d_in):
    s = None
    for c in range(d_in * d_in):
        e = np.zeros(d_in * d_in, complex)
        e[c] = 1
        y = vec(fn(unvec(e, d_in)))
        if s is None:
            s = np.zeros((len(y), d_in * d_in), complex)
        s[:, c] = y
    return s


def _phi_power(phi, n):
    return np.linalg.matrix_power(np.asarray(phi.superop), n)


def _chi_basis(asym):
    u, sv, _ = np.linalg.svd(np.asarray(asym.proj_p.superop))
    return u[:, : int(np.sum(sv > 1e-8))]


@dataclass
class QuantumCode:
    """Code into block ``k_star`` with ``rate = log2 d``.

    ``encoder`` maps ``C^d`` into the channel input; ``decoder(n)`` returns
    the recovery channel for ``Phi^n``.
    """

    k_star: int
    d: int
    encoder: object
    phi: object = field(repr=False)
    asym: object = field(repr=False)
    decomp: object = field(repr=False)
    sabotage: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def rate(self):
        return math.log2(self.d)

    def restriction_condition(self, n):
        b = _chi_basis(self.asym)
        return float(np.linalg.cond(b.conj().T @ _phi_power(self.phi, n) @ b))

    def decoder(self, n):
        if n not in self._cache:
            self._cache[n] = self._build_decoder(n)
        return self._cache[n]

    def _build_decoder(self, n):
        block = self.decomp.blocks[self.k_star]
        d = block.d
        s_p = np.asarray(self.asym.proj_p.superop)
        if self.sabotage:
            # negative control: no inversion of Phi^n
            recovery = s_p
        else:
            b = _chi_basis(self.asym)
            m = b.conj().T @ _phi_power(self.phi, n) @ b
            cond = np.linalg.cond(m)
            if cond > COND_LIMIT:
                raise StructureError(f"Phi^{n} restricted to the peripheral space has condition {cond:.2e}")
            recovery = b @ np.linalg.solve(m, b.conj().T @ s_p)
        p_out = np.eye(self.phi.dim_out) - block.projector

        def unembed(z):
            return block.extract(z) + np.trace(p_out @ z) * np.eye(d) / d

        t = _superop_of(unembed, self.phi.dim_out)
        if self.sabotage:
            shift = np.roll(np.eye(d), 1, axis=0)
            t = np.kron(shift.conj(), shift) @ t
        return from_superop(t @ recovery, self.phi.dim_out, d, tol=1e-8)


def _largest_block(decomp):
    ds = decomp.ds
    return int(np.argmax(ds))


def build_quantum_code(phi, decomp, asym, sabotage=False):
    """Quantum code into the largest block (lowest index on ties).

    The encoder is ``rho -> W (rho kron delta) W^dag``.
    """
    k = _largest_block(decomp)
    block = decomp.blocks[k]
    lam = np.diag(block.delta).real
    kraus = [np.sqrt(lam[j]) * block.w[:, j :: block.m] for j in range(block.m) if lam[j] > 0]
    encoder = from_kraus(kraus)
    return QuantumCode(k, block.d, encoder, phi, asym, decomp, sabotage)


def _through(phi, n, through):
    # superoperator actually traversed by the code: Phi^n unless overridden
    return _phi_power(phi, n) if through is None else np.asarray(through.superop)


def eval_quantum_code(code, n, tol=CERT_TOL, through=None):
    """Compare the Choi matrix of ``D o Phi^n o E`` with the identity's.

    ``through`` replaces ``Phi^n`` by another channel with the same input
    and output spaces while keeping the time-``n`` decoder.
    """
    d = code.d
    s = code.decoder(n).superop @ _through(code.phi, n, through) @ code.encoder.superop
    choi = superop_to_choi(s, d, d)
    ident = superop_to_choi(np.eye(d * d), d, d)
    err = 0.5 * trace_norm(choi - ident) / d
    return ProtocolEvalReport("quantum", n, code.rate, float(err), err <= tol)


@dataclass
class ClassicalCode:
    """Codewords ``states[m]`` and a POVM factory ``povm(n)``."""

    states: list = field(repr=False)
    labels: list
    phi: object = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_messages(self):
        return len(self.states)

    @property
    def rate(self):
        return math.log2(self.n_messages)

    def evolved(self, n, through=None):
        s = _through(self.phi, n, through)
        d = self.phi.dim_out
        return [unvec(s @ vec(r), d) for r in self.states]

    def povm(self, n):
        if n not in self._cache:
            self._cache[n] = _support_povm(self.evolved(n))
        return self._cache[n]


def _support_povm(outputs):
    """Support projectors of mutually orthogonal states, completed to the identity."""
    dim = outputs[0].shape[0]
    projs = []
    for y in outputs:
        v = support_projector(y, 1e-10 * max(np.abs(y).max(), 1e-300))
        projs.append(v @ v.conj().T)
    for a in range(len(projs)):
        for b in range(a + 1, len(projs)):
            overlap = np.linalg.norm(projs[a] @ projs[b])
            if overlap > CERT_TOL:
                raise StructureError(f"codeword outputs {a} and {b} overlap ({overlap:.2e})")
    projs[0] = projs[0] + (np.eye(dim) - sum(projs))
    return projs


def build_classical_code(phi, decomp):
    """``sum_k d_k`` codewords ``W_k(|i><i| kron delta_k)W_k^dag``."""
    states, labels = [], []
    for b in decomp.blocks:
        for i in range(b.d):
            e = np.zeros((b.d, b.d))
            e[i, i] = 1
            states.append(b.embed(e))
            labels.append((b.index, i))
    return ClassicalCode(states, labels, phi)


def _gram(outputs):
    g = np.array([[np.trace(a @ b).real for b in outputs] for a in outputs])
    norms = np.sqrt(np.diag(g))
    return g / np.outer(norms, norms)


def _eval_povm(family, rate, outputs, povm, n, tol):
    success = [np.trace(p @ y).real for p, y in zip(povm, outputs)]
    err = max(0.0, 1 - min(success))
    gram_err = float(np.abs(_gram(outputs) - np.eye(len(outputs))).max())
    passed = err <= tol and gram_err <= tol
    return ProtocolEvalReport(family, n, rate, float(err), passed, detail=f"gram deviation {gram_err:.1e}")


def eval_classical_code(code, n, tol=CERT_TOL, povm=None, through=None):
    """Worst-case decoding error at time ``n``; ``povm`` overrides the decoder."""
    povm = code.povm(n) if povm is None else povm
    return _eval_povm("classical", code.rate, code.evolved(n, through), povm, n, tol)


def _permute_factors(x, dims, perm):
    # reorder tensor factors of an operator: new factor i is old factor perm[i]
    k = len(dims)
    t = x.reshape(list(dims) * 2)
    t = t.transpose(list(perm) + [p + k for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def _weyl(d, a, b):
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)


def _max_entangled(d):
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return np.outer(v, v.conj())


@dataclass
class EACode:
    """Superdense coding in every block.

    The shared state is ``psi+_{d_1} kron ... kron psi+_{d_K}`` on pairs
    ``(B'_k, A'_k)``. Message ``(k, a, b)`` applies ``X^a Z^b`` to ``A'_k``,
    embeds ``A'_k`` into block ``k`` and discards the other ``A'_j``.
    Receiver systems are ordered ``B'_1 ... B'_K B``.
    """

    labels: list
    ds: list
    encoders: list = field(repr=False)
    phi: object = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_messages(self):
        return len(self.labels)

    @property
    def rate(self):
        return math.log2(self.n_messages)

    @property
    def shared_state(self):
        out = np.ones((1, 1))
        for d in self.ds:
            out = np.kron(out, _max_entangled(d))
        return out

    def evolved(self, n, through=None):
        s = _through(self.phi, n, through)
        d_out = self.phi.dim_out
        ds = self.ds
        dims = list(ds) + [d_out]
        outputs = []
        for k, a, b in self.labels:
            dk = ds[k]
            u = np.kron(np.eye(dk), _weyl(dk, a, b))
            pair = u @ _max_entangled(dk) @ u.conj().T
            # (id kron Phi^n E_k) on B'_k A'_k
            enc = self.encoders[k]
            joint = np.zeros((dk * d_out, dk * d_out), complex)
            for i in range(dk):
                for j in range(dk):
                    blk = pair.reshape(dk, dk, dk, dk)[i, :, j, :]
                    y = unvec(s @ vec(enc(blk)), d_out)
                    e = np.zeros((dk, dk))
                    e[i, j] = 1
                    joint += np.kron(e, y)
            rest = [np.eye(dj) / dj for j, dj in enumerate(ds) if j != k]
            full = joint
            for r in rest:
                full = np.kron(full, r)
            # current order: B'_k, B, others; target: B'_1..B'_K, B
            cur = [k, len(ds)] + [j for j in range(len(ds)) if j != k]
            cur_dims = [dims[c] for c in cur]
            perm = [cur.index(t) for t in range(len(dims))]
            outputs.append(_permute_factors(full, cur_dims, perm))
        return outputs

    def povm(self, n):
        if n not in self._cache:
            self._cache[n] = _support_povm(self.evolved(n))
        return self._cache[n]


def build_ea_code(phi, decomp):
    """``sum_k d_k^2`` messages via Heisenberg-Weyl encodings per block."""
    encoders, labels = [], []
    for b in decomp.blocks:
        lam = np.diag(b.delta).real
        encoders.append(from_kraus([np.sqrt(lam[j]) * b.w[:, j :: b.m] for j in range(b.m) if lam[j] > 0]))
        labels.extend((b.index, x, z) for x in range(b.d) for z in range(b.d))
    return EACode(labels, list(decomp.ds), encoders, phi)


def eval_ea_code(code, n, tol=CERT_TOL, through=None):
    return _eval_povm("entanglement-assisted", code.rate, code.evolved(n, through), code.povm(n), n, tol)


@dataclass
class PrivateCode:
    """Messages ``|m><m|`` through a quantum code, decoded by ``D^*(|m><m|)``."""

    states: list = field(repr=False)
    povm: list = field(repr=False)

    @property
    def rate(self):
        return math.log2(len(self.states))


def private_from_quantum(code, n, tol=CERT_TOL, through=None):
    """Private code from a zero-error quantum code at time ``n``.

    Certifies decoding success and that the environment of ``Phi^n`` (or of
    ``through``) receives the same state for every message.
    """
    d = code.d
    dec_adj = adjoint_map(code.decoder(n))
    states, povm = [], []
    for m in range(d):
        e = np.zeros((d, d))
        e[m, m] = 1
        states.append(code.encoder(e))
        p = dec_adj(e)
        povm.append((p + p.conj().T) / 2)
    phi_n = power(code.phi, n, tol=1e-8) if through is None else through
    outputs = [phi_n(r) for r in states]
    err = max(0.0, 1 - min(np.trace(p @ y).real for p, y in zip(povm, outputs)))
    env = complementary(phi_n)
    env_states = [env(r) for r in states]
    fid, worst_pair = 1.0, None
    for a in range(d):
        for b in range(a + 1, d):
            f = fidelity(env_states[a], env_states[b])
            if f < fid:
                fid, worst_pair = f, (a, b)
    passed = err <= tol and fid >= 1 - tol
    detail = "" if worst_pair is None or passed else f"worst environment pair {worst_pair}"
    rep = ProtocolEvalReport("private", n, math.log2(d), float(err), passed, float(fid), detail)
    return PrivateCode(states, povm), rep


def verify_all(phi, decomp, asym, ns=(1, 5, 25), sabotage=False, tol=CERT_TOL):
    """Build the four code families and evaluate each at every ``n``."""
    qc = build_quantum_code(phi, decomp, asym, sabotage=sabotage)
    cc = build_classical_code(phi, decomp)
    ea = build_ea_code(phi, decomp)
    honest = qc if not sabotage else build_quantum_code(phi, decomp, asym)
    reports = []
    for n in ns:
        reports.append(eval_quantum_code(qc, n, tol))
        reports.append(eval_classical_code(cc, n, tol))
        reports.append(eval_ea_code(ea, n, tol))
        reports.append(private_from_quantum(honest, n, tol)[1])
    return reports


def wrapped_rates(phi, decomp, asym, n, pre=None, post=None, tol=CERT_TOL):
    """Certified rates of the time-``n`` codes sent through ``post o Phi^n o pre``.

    Each family keeps its encoder and time-``n`` decoder. A family whose code
    still passes certifies its rate; otherwise only the one-message code
    (rate 0) is certified.

    Returns
    -------
    rates : dict
        Family name to certified rate.
    reports : list of ProtocolEvalReport
    """
    wrapped = power(phi, n, tol=1e-8)
    if pre is not None:
        wrapped = compose(wrapped, pre, tol=1e-8)
    if post is not None:
        wrapped = compose(post, wrapped, tol=1e-8)
    if (wrapped.dim_in, wrapped.dim_out) != (phi.dim_in, phi.dim_out):
        raise DimensionError("pre and post channels must preserve the channel's spaces")
    qc = build_quantum_code(phi, decomp, asym)
    reports = [
        eval_quantum_code(qc, n, tol, through=wrapped),
        eval_classical_code(build_classical_code(phi, decomp), n, tol, through=wrapped),
        eval_ea_code(build_ea_code(phi, decomp), n, tol, through=wrapped),
        private_from_quantum(qc, n, tol, through=wrapped)[1],
    ]
    rates = {r.family: (r.rate if r.passed else 0.0) for r in reports}
    return rates, reports


def _pairs(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def protocol_bundle(phi, decomp, asym, n):
    """JSON-ready description of all four codes at time ``n``.

    Matrices are nested ``[re, im]`` pairs; maps are given by Kraus operators
    (encoders) or unnormalized Choi matrices (decoders).
    """
    qc = build_quantum_code(phi, decomp, asym)
    cc = build_classical_code(phi, decomp)
    ea = build_ea_code(phi, decomp)
    pc, _ = private_from_quantum(qc, n)
    return {
        "schema": 1,
        "n": int(n),
        "quantum": {
            "block": qc.k_star,
            "rate": qc.rate,
            "encoder_kraus": [_pairs(k) for k in qc.encoder.kraus],
            "decoder_choi": _pairs(qc.decoder(n).choi),
        },
        "classical": {
            "rate": cc.rate,
            "labels": [list(lab) for lab in cc.labels],
            "states": [_pairs(r) for r in cc.states],
            "povm": [_pairs(p) for p in cc.povm(n)],
        },
        "entanglement_assisted": {
            "rate": ea.rate,
            "labels": [list(lab) for lab in ea.labels],
            "unitaries": [_pairs(_weyl(ea.ds[k], a, b)) for k, a, b in ea.labels],
            "encoder_kraus": [[_pairs(k) for k in e.kraus] for e in ea.encoders],
            "shared_state": _pairs(ea.shared_state),
            "povm": [_pairs(p) for p in ea.povm(n)],
        },
        "private": {
            "rate": pc.rate,
            "states": [_pairs(r) for r in pc.states],
            "povm": [_pairs(p) for p in pc.povm],
        },
    }

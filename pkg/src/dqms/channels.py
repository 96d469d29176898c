"""Quantum channel representations, conversions and calculus.

Conventions
-----------
* Superoperator: column stacking, ``vec(Phi(X)) = S @ vec(X)`` with
  ``vec(X) = X.reshape(-1, order="F")``.  For Kraus operators ``K_i``,
  ``S = sum_i conj(K_i) kron K_i``.
* Choi matrix: unnormalized, input factor first,
  ``J = sum_ij |i><j| kron Phi(|i><j|)``, so ``Tr J = dim_in`` for a channel.
"""

import json

import numpy as np

from .exceptions import ChannelValidationError, DimensionError
from .linalg import as_matrix, partial_trace, unvec, vec

__all__ = [
    "CPTP_TOL",
    "Channel",
    "LinearMap",
    "StinespringIsometry",
    "adjoint_map",
    "apply",
    "choi_to_kraus",
    "choi_to_superop",
    "complementary",
    "compose",
    "from_choi",
    "from_json",
    "from_kraus",
    "from_superop",
    "identity_channel",
    "kraus_to_choi",
    "kraus_to_superop",
    "power",
    "stinespring",
    "superop_to_choi",
    "tensor",
    "to_json",
    "unitary_channel",
]

CPTP_TOL = 1e-9


def kraus_to_superop(kraus):
    return sum(np.kron(k.conj(), k) for k in kraus)


def kraus_to_choi(kraus):
    vs = np.stack([k.T.reshape(-1) for k in kraus], axis=1)
    return vs @ vs.conj().T


def superop_to_choi(s, dim_in, dim_out):
    s4 = np.asarray(s).reshape(dim_out, dim_out, dim_in, dim_in)
    return s4.transpose(3, 1, 2, 0).reshape(dim_in * dim_out, dim_in * dim_out)


def choi_to_superop(choi, dim_in, dim_out):
    c4 = np.asarray(choi).reshape(dim_in, dim_out, dim_in, dim_out)
    return c4.transpose(3, 1, 2, 0).reshape(dim_out * dim_out, dim_in * dim_in)


def choi_to_kraus(choi, dim_in, dim_out, tol=1e-12):
    """Kraus operators from the Hermitian eigendecomposition of a Choi matrix.

    Eigenvalues below ``tol * max(1, largest)`` are dropped, so the number of
    Kraus operators equals the numerical Choi rank.
    """
    h = (choi + choi.conj().T) / 2
    w, v = np.linalg.eigh(h)
    cut = tol * max(1.0, w.max(initial=0.0))
    kraus = [
        np.sqrt(w[j]) * v[:, j].reshape(dim_in, dim_out).T
        for j in range(len(w) - 1, -1, -1)
        if w[j] > cut
    ]
    if not kraus:
        kraus = [np.zeros((dim_out, dim_in), complex)]
    return kraus


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


class LinearMap:
    """A linear map ``B(C^dim_in) -> B(C^dim_out)`` held as a superoperator.

    Supports ``+``, ``-``, scalar ``*`` and ``@`` (composition, right operand
    applied first), which is enough to form differences such as
    ``Phi^n - Phi_inf^n`` for the diamond norm.
    """

    def __init__(self, superop, dim_in, dim_out=None):
        dim_out = dim_in if dim_out is None else dim_out
        s = as_matrix(superop, name="superop")
        if s.shape != (dim_out**2, dim_in**2):
            raise DimensionError(
                f"superop shape {s.shape} does not match dims ({dim_in}, {dim_out})"
            )
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self._superop = _frozen(s)
        self._choi = None

    @property
    def superop(self):
        return self._superop

    @property
    def choi(self):
        if self._choi is None:
            self._choi = _frozen(superop_to_choi(self._superop, self.dim_in, self.dim_out))
        return self._choi

    def __call__(self, x):
        x = as_matrix(x, square=True)
        if x.shape[0] != self.dim_in:
            raise DimensionError(f"input of size {x.shape[0]}, map expects {self.dim_in}")
        return unvec(self._superop @ vec(x), self.dim_out)

    def _check_same(self, other):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionError("maps act between different spaces")

    def __add__(self, other):
        self._check_same(other)
        return LinearMap(self.superop + other.superop, self.dim_in, self.dim_out)

    def __sub__(self, other):
        self._check_same(other)
        return LinearMap(self.superop - other.superop, self.dim_in, self.dim_out)

    def __mul__(self, c):
        return LinearMap(c * self.superop, self.dim_in, self.dim_out)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if other.dim_out != self.dim_in:
            raise DimensionError("cannot compose: output and input dimensions differ")
        return LinearMap(self.superop @ other.superop, other.dim_in, self.dim_out)

    def __repr__(self):
        return f"{type(self).__name__}(dim_in={self.dim_in}, dim_out={self.dim_out})"


class Channel(LinearMap):
    """A validated CPTP map holding Kraus, Choi and superoperator forms.

    Use the module constructors (:func:`from_kraus`, :func:`from_choi`,
    :func:`from_superop`) rather than calling this directly.
    """

    def __init__(self, kraus, dim_in, dim_out, choi, superop):
        super().__init__(superop, dim_in, dim_out)
        self._choi = _frozen(choi)
        self.kraus = tuple(_frozen(k) for k in kraus)

    @property
    def n_kraus(self):
        return len(self.kraus)

    def cptp_defects(self):
        """Return ``(cp_defect, tp_defect)`` measured on the stored Choi matrix."""
        return _defects(self.choi, self.dim_in, self.dim_out)


def _defects(choi, dim_in, dim_out):
    h = (choi + choi.conj().T) / 2
    cp = max(0.0, -float(np.linalg.eigvalsh(h).min()))
    herm = float(np.abs(choi - choi.conj().T).max())
    tp = float(np.abs(partial_trace(choi, (dim_in, dim_out), 0) - np.eye(dim_in)).max())
    return max(cp, herm), tp


def _validate(choi, dim_in, dim_out, tol):
    cp, tp = _defects(choi, dim_in, dim_out)
    if cp > tol or tp > tol:
        raise ChannelValidationError(
            f"not CPTP within {tol:g}: CP defect {cp:.3e}, TP defect {tp:.3e}",
            cp_defect=cp,
            tp_defect=tp,
        )


def from_kraus(kraus, tol=CPTP_TOL):
    """Build a :class:`Channel` from a list of Kraus operators."""
    kraus = [as_matrix(k, name="Kraus operator") for k in kraus]
    if not kraus:
        raise DimensionError("empty Kraus list")
    dim_out, dim_in = kraus[0].shape
    if any(k.shape != (dim_out, dim_in) for k in kraus):
        raise DimensionError("Kraus operators have inconsistent shapes")
    choi = kraus_to_choi(kraus)
    _validate(choi, dim_in, dim_out, tol)
    return Channel(kraus, dim_in, dim_out, choi, kraus_to_superop(kraus))


def from_choi(choi, dim_in, dim_out=None, tol=CPTP_TOL):
    """Build a :class:`Channel` from an unnormalized Choi matrix."""
    dim_out = dim_in if dim_out is None else dim_out
    choi = as_matrix(choi, square=True, name="choi")
    if choi.shape[0] != dim_in * dim_out:
        raise DimensionError(f"Choi of size {choi.shape[0]} != {dim_in}*{dim_out}")
    _validate(choi, dim_in, dim_out, tol)
    choi = (choi + choi.conj().T) / 2
    kraus = choi_to_kraus(choi, dim_in, dim_out)
    return Channel(kraus, dim_in, dim_out, choi, choi_to_superop(choi, dim_in, dim_out))


def from_superop(superop, dim_in, dim_out=None, tol=CPTP_TOL):
    dim_out = dim_in if dim_out is None else dim_out
    superop = as_matrix(superop, name="superop")
    if superop.shape != (dim_out**2, dim_in**2):
        raise DimensionError(f"superop shape {superop.shape} does not match dims")
    return from_choi(superop_to_choi(superop, dim_in, dim_out), dim_in, dim_out, tol)


def identity_channel(d):
    return from_kraus([np.eye(d)])


def unitary_channel(u):
    return from_kraus([as_matrix(u, square=True, name="unitary")])


def apply(channel, x):
    return channel(x)


def compose(phi, psi, tol=CPTP_TOL):
    """Return the channel ``phi o psi`` (``psi`` acts first)."""
    if psi.dim_out != phi.dim_in:
        raise DimensionError("cannot compose: output and input dimensions differ")
    return from_superop(phi.superop @ psi.superop, psi.dim_in, phi.dim_out, tol)


def power(phi, n, tol=CPTP_TOL):
    """``n``-fold composition; repeated squaring on the superoperator."""
    if n < 0:
        raise ValueError("power requires n >= 0")
    if phi.dim_in != phi.dim_out:
        raise DimensionError("power of a non-square channel")
    if n == 0:
        return identity_channel(phi.dim_in)
    if n == 1:
        return phi
    return from_superop(np.linalg.matrix_power(phi.superop, n), phi.dim_in, tol=tol)


def tensor(phi, psi, tol=CPTP_TOL):
    """``phi kron psi`` with the index order of :func:`dqms.linalg.kron`."""
    return from_kraus([np.kron(a, b) for a in phi.kraus for b in psi.kraus], tol=tol)


def adjoint_map(phi):
    """Heisenberg-picture adjoint: ``Tr(Y phi(X)) = Tr(phi*(Y) X)``."""
    return LinearMap(phi.superop.conj().T, phi.dim_out, phi.dim_in)


class StinespringIsometry:
    """``V = sum_i K_i kron |i>_E`` mapping ``C^dim_in`` into ``B kron E``."""

    def __init__(self, v, dim_out, dim_env):
        self.v = _frozen(v)
        self.dim_out = dim_out
        self.dim_env = dim_env

    def apply(self, x):
        """Joint output ``V X V^dag`` on ``B kron E``."""
        return self.v @ x @ self.v.conj().T


def stinespring(phi):
    n = phi.n_kraus
    v = sum(np.kron(k, np.eye(n)[:, [i]]) for i, k in enumerate(phi.kraus))
    return StinespringIsometry(v, phi.dim_out, n)


def complementary(phi):
    """Complementary channel ``X -> Tr_B(V X V^dag)`` onto the environment."""
    kraus = [np.stack([k[b, :] for k in phi.kraus]) for b in range(phi.dim_out)]
    return from_kraus(kraus)


def _encode_matrix(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _decode_matrix(rows, shape=None, name="matrix"):
    try:
        a = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"{name}: entries must be [re, im] pairs") from exc
    if a.ndim != 2 or (shape is not None and a.shape != shape):
        raise DimensionError(f"{name}: expected shape {shape}, got {a.shape}")
    return a


def to_json(phi, representation="kraus"):
    """Serialize to the channel JSON document (complex entries as ``[re, im]``)."""
    doc = {"schema": 1, "dim_in": phi.dim_in, "dim_out": phi.dim_out}
    if representation == "kraus":
        doc["kraus"] = [_encode_matrix(k) for k in phi.kraus]
    elif representation == "choi":
        doc["choi"] = _encode_matrix(phi.choi)
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return json.dumps(doc)


def from_json(text, tol=CPTP_TOL):
    """Parse a channel JSON document with exact shape validation."""
    doc = json.loads(text) if isinstance(text, (str, bytes)) else text
    if not isinstance(doc, dict):
        raise DimensionError("channel document must be a JSON object")
    try:
        dim_in, dim_out = int(doc["dim_in"]), int(doc["dim_out"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionError("channel document needs integer dim_in and dim_out") from exc
    if dim_in < 1 or dim_out < 1:
        raise DimensionError("dimensions must be positive")
    if ("kraus" in doc) == ("choi" in doc):
        raise DimensionError("channel document needs exactly one of 'kraus' or 'choi'")
    if "kraus" in doc:
        kraus = [
            _decode_matrix(k, (dim_out, dim_in), f"kraus[{i}]") for i, k in enumerate(doc["kraus"])
        ]
        return from_kraus(kraus, tol=tol)
    choi = _decode_matrix(doc["choi"], (dim_in * dim_out,) * 2, "choi")
    return from_choi(choi, dim_in, dim_out, tol=tol)

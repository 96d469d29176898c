"""Closed-form divergences and distances, in bits."""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, psd_sqrt, trace_norm

__all__ = [
    "SUPPORT_TOL",
    "DivergenceValue",
    "dmax",
    "dmax_sep_pure",
    "fidelity",
    "trace_distance",
]

SUPPORT_TOL = 1e-10


@dataclass(frozen=True)
class DivergenceValue:
    """A divergence in bits.

    ``value`` is ``inf`` when the support condition fails; ``truncated`` then
    holds the finite value computed on the support of the second argument,
    so borderline cases can be inspected.
    """

    value: float
    finite: bool
    truncated: float

    def __float__(self):
        return float(self.value)


def _psd(x, name):
    x = as_matrix(x, square=True, name=name)
    x = (x + x.conj().T) / 2
    if np.linalg.eigvalsh(x).min() < -1e-9 * max(1.0, np.abs(x).max()):
        raise ValueError(f"{name} is not positive semidefinite")
    return x


def dmax(rho, sigma, tol=SUPPORT_TOL):
    """Max-relative entropy ``log2 ||sigma^-1/2 rho sigma^-1/2||_inf``.

    Eigenvalues of ``sigma`` at or below ``tol`` (relative to its largest)
    count as outside its support.
    """
    rho, sigma = _psd(rho, "rho"), _psd(sigma, "sigma")
    w, v = np.linalg.eigh(sigma)
    keep = w > tol * max(w.max(), 1e-300)
    vs, ws = v[:, keep], w[keep]
    inv_sqrt = (vs / np.sqrt(ws)) @ vs.conj().T
    lam = float(np.linalg.eigvalsh(inv_sqrt @ rho @ inv_sqrt).max())
    truncated = np.log2(lam) if lam > 0 else -np.inf
    outside = v[:, ~keep]
    leak = np.abs(outside.conj().T @ rho @ outside).max(initial=0.0)
    if leak > tol * max(1.0, np.trace(rho).real):
        return DivergenceValue(np.inf, False, truncated)
    return DivergenceValue(truncated, True, truncated)


def fidelity(rho, sigma):
    """``F = ||sqrt(rho) sqrt(sigma)||_1^2``, clipped to [0, 1] for states."""
    f = trace_norm(psd_sqrt(_psd(rho, "rho")) @ psd_sqrt(_psd(sigma, "sigma"))) ** 2
    return float(min(f, 1.0)) if f <= 1 + 1e-9 else float(f)


def trace_distance(rho, sigma):
    """``||rho - sigma||_1`` (no factor 1/2)."""
    return trace_norm(as_matrix(rho) - as_matrix(sigma))


def dmax_sep_pure(psi, dims, tol=1e-9):
    """``2 log2(sum_i s_i)`` over the Schmidt coefficients of a pure state.

    ``psi`` is a rank-one density operator on ``C^dA kron C^dB`` (a state
    vector is accepted too).
    """
    da, db = dims
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 1:
        vecpsi = psi / np.linalg.norm(psi)
    else:
        psi = as_matrix(psi, square=True, name="psi")
        w, v = np.linalg.eigh((psi + psi.conj().T) / 2)
        if abs(w[-1] - 1) > tol or np.abs(w[:-1]).max(initial=0.0) > tol:
            raise ValueError("input is not a pure state")
        vecpsi = v[:, -1]
    if vecpsi.size != da * db:
        raise ValueError(f"state of size {vecpsi.size} does not match dims {dims}")
    s = np.linalg.svd(vecpsi.reshape(da, db), compute_uv=False)
    return float(2 * np.log2(s.sum()))

"""Estimator-style front end: fit a channel, then query its asymptotics."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import capacities, protocols, spectral, structure
from .channels import Channel, from_json, from_kraus
from .exceptions import DimensionError

__all__ = ["PeripheralAnalyzer", "check_channel", "check_operator_batch"]


def check_channel(x):
    """Accept a :class:`Channel`, a Kraus list, or a channel JSON document."""
    if isinstance(x, Channel):
        return x
    if isinstance(x, (str, bytes, dict)):
        return from_json(x)
    if isinstance(x, (list, tuple)) or (isinstance(x, np.ndarray) and x.ndim == 3):
        return from_kraus(list(x))
    raise DimensionError(f"cannot interpret {type(x).__name__} as a channel")


def check_operator_batch(x, dim):
    """Return ``x`` as a complex array of shape ``(n, dim, dim)``."""
    a = np.asarray(x, dtype=complex)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[1:] != (dim, dim):
        raise DimensionError(f"expected operators of shape ({dim}, {dim}), got {np.shape(x)}")
    if not np.all(np.isfinite(a)):
        raise ValueError("operators have non-finite entries")
    return a


class PeripheralAnalyzer(BaseEstimator, TransformerMixin):
    """Peripheral analysis of a channel viewed as a discrete-time semigroup.

    Parameters
    ----------
    tol : float
        Peripheral threshold: eigenvalues with ``|lambda| >= 1 - tol``.
    seed : int
        Seed for the randomized block splitting.

    Attributes
    ----------
    channel_, spectrum_, asymptotic_, decomposition_, action_, mu_
    """

    def __init__(self, tol=1e-8, seed=0):
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        phi = check_channel(X)
        self.channel_ = phi
        self.spectrum_ = spectral.analyze_spectrum(phi, tol=self.tol)
        self.asymptotic_ = spectral.asymptotic_part(phi, self.spectrum_)
        self.decomposition_ = structure.block_decompose(self.asymptotic_, seed=self.seed)
        self.action_ = structure.recover_action(phi, self.decomposition_)
        self.mu_ = spectral.spectral_gap_mu(phi, self.asymptotic_)
        return self

    def transform(self, X):
        """Apply the peripheral projector to each operator in ``X``."""
        check_is_fitted(self, "asymptotic_")
        batch = check_operator_batch(X, self.channel_.dim_in)
        return np.stack([self.asymptotic_.proj_p(x) for x in batch])

    def lower_bounds(self):
        check_is_fitted(self, "decomposition_")
        return capacities.lower_bounds(self.decomposition_)

    def delta(self, n):
        check_is_fitted(self, "asymptotic_")
        return spectral.delta_n(self.channel_, self.asymptotic_, n)

    def bounds(self, epsilon, n, delta=None):
        """Converse bounds at ``(n, epsilon)``; ``delta`` defaults to the SDP value."""
        check_is_fitted(self, "decomposition_")
        source = "given"
        if delta is None:
            delta, source = self.delta(n), "sdp"
        return capacities.upper_bounds(self.decomposition_, epsilon, n, delta, source)

    def fit_kappa(self, n_range=range(1, 13)):
        check_is_fitted(self, "asymptotic_")
        self.kappa_ = spectral.fit_kappa(self.channel_, self.asymptotic_, n_range, mu=self.mu_)
        return self.kappa_

    def verify(self, ns=(1, 5, 25), sabotage=False):
        check_is_fitted(self, "decomposition_")
        return protocols.verify_all(
            self.channel_, self.decomposition_, self.asymptotic_, ns=ns, sabotage=sabotage
        )

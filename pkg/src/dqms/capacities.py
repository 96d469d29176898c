"""One-shot capacity bounds for iterated channels, in bits.

The achievable rates depend only on the block dimensions ``d_k`` of the
peripheral space; the converse bounds add ``log2 1/(1 - eps - delta)`` with
``delta`` either the exact distance ``||Phi^n - Phi_inf^n||_diamond`` or an
envelope ``kappa mu^n``.
"""

import math
from dataclasses import dataclass, field


__all__ = [
    "KINDS",
    "BoundEntry",
    "BoundsReport",
    "IIDReport",
    "bounds_table",
    "default_delta_source",
    "delta_function",
    "convergence_time",
    "convergence_time_estimate",
    "infinite_time",
    "iid_bounds",
    "lower_bounds",
    "upper_bounds",
]

KINDS = ("Q", "C", "Cp", "Cea")
SDP_MAX_N = 30


def _dims(decomp):
    ds = list(decomp.ds) if hasattr(decomp, "ds") else [int(d) for d in decomp]
    if not ds or min(ds) < 1:
        raise ValueError("need at least one block of positive dimension")
    return ds


def _integer_rates(ds, copies=1):
    # exact integers so that tensor powers give bit-identical logarithms
    return {
        "Q": max(ds) ** copies,
        "Cp": max(ds) ** copies,
        "C": sum(ds) ** copies,
        "Cea": sum(d * d for d in ds) ** copies,
    }


def lower_bounds(decomp):
    """Achievable rates: ``Q = Cp = log max d_k``, ``C = log sum d_k``,
    ``Cea = log sum d_k^2``. Accepts a decomposition or a list of ``d_k``."""
    return {k: math.log2(v) for k, v in _integer_rates(_dims(decomp)).items()}


@dataclass
class BoundEntry:
    lower: float
    upper: float
    valid: bool
    reason: str = ""


@dataclass
class BoundsReport:
    n: int
    epsilon: float
    delta_used: float
    delta_source: str
    entries: dict = field(default_factory=dict)

    def rows(self):
        """``(n, epsilon, kind, lower, upper, delta_used, delta_source)`` tuples."""
        return [
            (self.n, self.epsilon, k, e.lower, e.upper if e.valid else None, self.delta_used, self.delta_source)
            for k, e in self.entries.items()
        ]


def _penalty(epsilon, delta):
    slack = 1 - epsilon - delta
    return math.log2(1 / slack) if slack > 0 else None


def upper_bounds(decomp, epsilon, n, delta, source="given"):
    """Converse bounds ``lower + log2 1/(1 - eps - delta)``.

    When ``eps + delta >= 1`` each entry is marked invalid with a reason
    instead of raising.
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    low = lower_bounds(decomp)
    pen = _penalty(epsilon, delta)
    report = BoundsReport(int(n), float(epsilon), float(delta), source)
    for k in KINDS:
        if pen is None:
            report.entries[k] = BoundEntry(low[k], math.nan, False, "epsilon + delta >= 1")
        else:
            report.entries[k] = BoundEntry(low[k], low[k] + pen, True)
    return report


def infinite_time(decomp, epsilon):
    """Limit intervals ``[lower, lower + log2 1/(1 - eps)]`` per kind."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    low = lower_bounds(decomp)
    pen = math.log2(1 / (1 - epsilon))
    return {k: (low[k], low[k] + pen) for k in KINDS}


@dataclass
class IIDReport:
    """Bounds for ``m`` parallel copies; ``per_copy`` divides by ``m``."""

    m: int
    total: BoundsReport
    per_copy: dict


def iid_bounds(decomp, m, epsilon, n, kappa, mu):
    """Bounds for ``Psi^(kron m)`` at time ``n`` from a single-copy analysis.

    Block dimensions of the tensor power are products of single-copy ones,
    so the rates are logarithms of ``max d^m``, ``(sum d)^m`` and
    ``(sum d^2)^m``. The distance is bounded by ``m kappa mu^n``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    ds = _dims(decomp)
    delta = m * kappa * mu**n
    low = {k: math.log2(v) for k, v in _integer_rates(ds, m).items()}
    pen = _penalty(epsilon, delta)
    total = BoundsReport(int(n), float(epsilon), float(delta), "envelope")
    per_copy = {}
    for k in KINDS:
        if pen is None:
            total.entries[k] = BoundEntry(low[k], math.nan, False, "epsilon + m kappa mu^n >= 1")
            per_copy[k] = BoundEntry(low[k] / m, math.nan, False, total.entries[k].reason)
        else:
            total.entries[k] = BoundEntry(low[k], low[k] + pen, True)
            per_copy[k] = BoundEntry(low[k] / m, low[k] / m + pen / m, True)
    return IIDReport(m, total, per_copy)


def convergence_time(kappa, mu, delta):
    """Smallest ``n >= 1`` with ``kappa mu^n <= delta``."""
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    if kappa <= 0 or delta <= 0:
        raise ValueError("kappa and delta must be positive")
    if kappa * mu <= delta:
        return 1
    n = max(1, math.ceil(math.log(delta / kappa) / math.log(mu)))
    # guard the floating-point ceiling in both directions
    while kappa * mu**n > delta:
        n += 1
    while n > 1 and kappa * mu ** (n - 1) <= delta:
        n -= 1
    return n


def convergence_time_estimate(dim, mu, delta, c=1.0):
    """Generic time scale ``c (d^2 log d + log 1/delta) / log(1/mu)`` (natural logs)."""
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    return c * (dim**2 * math.log(dim) + math.log(1 / delta)) / math.log(1 / mu)


def bounds_table(decomp, ns, epsilons, delta_of_n, source_of_n=None):
    """Reports over an ``(n, eps)`` grid.

    ``delta_of_n(n)`` supplies the distance; ``source_of_n(n)`` tags it.
    Each ``n`` is evaluated once and reused for all ``eps``.
    """
    out = []
    for n in ns:
        delta = float(delta_of_n(n))
        src = source_of_n(n) if source_of_n else "given"
        for eps in epsilons:
            out.append(upper_bounds(decomp, eps, n, delta, src))
    return out


def default_delta_source(n):
    """``"sdp"`` up to ``n = 30``, ``"envelope"`` beyond."""
    return "sdp" if n <= SDP_MAX_N else "envelope"


def delta_function(phi, asym, kappa_fit=None, source=None):
    """Build ``(delta_of_n, source_of_n)`` for :func:`bounds_table`.

    ``source`` forces ``"sdp"`` or ``"envelope"``; by default small ``n`` use
    the SDP and large ``n`` the fitted envelope.
    """
    from .spectral import delta_n

    cache = {}

    def src(n):
        return source or default_delta_source(n)

    def delta(n):
        if n not in cache:
            if src(n) == "sdp":
                cache[n] = delta_n(phi, asym, n)
            else:
                if kappa_fit is None:
                    raise ValueError("envelope source needs a kappa fit")
                cache[n] = float(kappa_fit.kappa * kappa_fit.mu**n) if kappa_fit.mu > 0 else 0.0
        return cache[n]

    return delta, src

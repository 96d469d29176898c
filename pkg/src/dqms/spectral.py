"""Peripheral spectrum, asymptotic part and convergence rate of iterated channels."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .channels import LinearMap, from_superop
from .exceptions import ChannelValidationError, DimensionError, StructureError
from .linalg import CLUSTER_TOL, eig_general
from .sdp import diamond_norm_sdp

__all__ = [
    "AMBIGUOUS_TOL",
    "PERIPHERAL_TOL",
    "AsymptoticPart",
    "KappaFit",
    "SpectrumReport",
    "analyze_spectrum",
    "asymptotic_part",
    "cesaro_projector",
    "delta_n",
    "delta_n_sdp",
    "fit_kappa",
    "spectral_gap_mu",
]

PERIPHERAL_TOL = 1e-8
AMBIGUOUS_TOL = 1e-6
CONDITION_LIMIT = 1e8
ZERO_MU = 1e-10


@dataclass
class SpectrumReport:
    """Clustered superoperator spectrum of a channel.

    Attributes
    ----------
    clusters : list of EigenCluster
        All eigenvalue clusters, by decreasing modulus.
    peripheral : list of EigenCluster
        Clusters with ``|lambda| >= 1 - tol``.
    mu : float
        Largest modulus among the remaining clusters (0 if none, or if the
        remainder is nilpotent).
    ambiguous : list of complex
        Eigenvalues with ``1 - 1e-6 < |lambda| < 1 - tol``; classified as
        non-peripheral but reported.
    has_nilpotent_nonperipheral : bool
        True if some non-peripheral cluster is defective (nontrivial Jordan
        block).
    """

    clusters: list = field(repr=False)
    peripheral: list = field(repr=False)
    mu: float
    ambiguous: list
    has_nilpotent_nonperipheral: bool
    tol: float = PERIPHERAL_TOL

    @property
    def peripheral_values(self):
        return np.array([c.value for c in self.peripheral for _ in range(c.algebraic_mult)])

    @property
    def n_peripheral(self):
        return sum(c.algebraic_mult for c in self.peripheral)

    @property
    def values(self):
        return np.array([c.value for c in self.clusters for _ in range(c.algebraic_mult)])


def _is_nilpotent(m, tol=1e-10):
    p = np.linalg.matrix_power(m, m.shape[0])
    return np.abs(p).max(initial=0.0) <= tol * max(1.0, np.abs(m).max(initial=0.0))


def analyze_spectrum(phi, tol=PERIPHERAL_TOL, cluster_tol=CLUSTER_TOL):
    """Cluster the superoperator spectrum and split off the peripheral part."""
    if phi.dim_in != phi.dim_out:
        raise DimensionError("spectral analysis needs dim_in == dim_out")
    clusters = eig_general(phi.superop, cluster_tol)
    mods = np.array([abs(c.value) for c in clusters])
    if mods.max() > 1 + 1e-6:
        raise ChannelValidationError(f"spectral radius {mods.max():.3e} exceeds 1")
    peripheral = [c for c, m in zip(clusters, mods) if m >= 1 - tol]
    rest = [c for c, m in zip(clusters, mods) if m < 1 - tol]
    if not any(abs(c.value - 1) <= 1e-6 for c in peripheral):
        raise StructureError("eigenvalue 1 missing from the peripheral spectrum")
    ambiguous = [c.value for c in rest if abs(c.value) > 1 - AMBIGUOUS_TOL]
    mu = max((abs(c.value) for c in rest), default=0.0)
    if mu < ZERO_MU:
        mu = 0.0
    return SpectrumReport(
        clusters=clusters,
        peripheral=peripheral,
        mu=float(mu),
        ambiguous=ambiguous,
        has_nilpotent_nonperipheral=any(c.defective for c in rest),
        tol=tol,
    )


@dataclass
class AsymptoticPart:
    """Peripheral projector ``proj_p`` and asymptotic part ``phi_inf``.

    ``method`` records how the projector was assembled: ``"eigenvectors"``
    (biorthogonal eigenvector pairs) or ``"schur"`` (invariant-subspace
    projector from ordered Schur forms, used when eigenvectors are
    ill-conditioned).
    """

    phi_inf: object
    proj_p: object
    method: str
    report: SpectrumReport = field(repr=False)


def _projector_from_eigenvectors(report):
    n = report.clusters[0].right.shape[0]
    proj = np.zeros((n, n), complex)
    inf = np.zeros((n, n), complex)
    for c in report.peripheral:
        if not c.biorthogonal or c.condition > CONDITION_LIMIT:
            return None
        pr = c.right @ c.left.conj().T
        proj += pr
        inf += c.value / abs(c.value) * pr
    return proj, inf


def _projector_from_schur(s, tol):
    # spectral projector onto the invariant subspace of |lambda| >= 1 - tol
    # along the complementary invariant subspace
    def keep(z):
        return abs(z) >= 1 - tol

    _, q_right, k = sla.schur(s, output="complex", sort=keep)
    _, q_left, k2 = sla.schur(s.conj().T, output="complex", sort=keep)
    if k != k2:
        raise StructureError("left and right peripheral subspaces differ in dimension")
    r, l = q_right[:, :k], q_left[:, :k]
    proj = r @ np.linalg.solve(l.conj().T @ r, l.conj().T)
    return proj, s @ proj


def cesaro_projector(phi, phases, n_terms=20000):
    """Cesaro estimate ``sum_i (1/N) sum_m conj(l_i)^m S^m`` of the projector.

    ``phases`` holds one unimodular value per peripheral cluster. Converges
    like ``1/N``; kept as an independent diagnostic.
    """
    s = np.asarray(phi.superop)
    phases = np.asarray(phases, dtype=complex)
    acc = np.zeros_like(s)
    power = np.eye(s.shape[0], dtype=complex)
    weights = np.ones(len(phases), complex)
    for _ in range(n_terms):
        acc += weights.sum() * power
        power = power @ s
        weights = weights * phases.conj()
    return acc / n_terms


def asymptotic_part(phi, report=None, tol=1e-8):
    """Assemble ``P = sum_i P_i`` and ``phi_inf = sum_i lambda_i P_i``.

    Both are validated as channels at tolerance ``tol``. The eigenvector
    construction is used unless some peripheral cluster is ill-conditioned
    or the result fails validation; the Schur construction is the fallback.
    """
    report = analyze_spectrum(phi) if report is None else report
    s = np.asarray(phi.superop)
    d = phi.dim_in
    attempts = []
    built = _projector_from_eigenvectors(report)
    if built is not None:
        attempts.append(("eigenvectors", built))
    attempts.append(("schur", None))
    last_err = None
    for method, built in attempts:
        if built is None:
            built = _projector_from_schur(s, report.tol)
        proj, inf = built
        try:
            p_ch = from_superop(proj, d, tol=tol)
            inf_ch = from_superop(inf, d, tol=tol)
        except ChannelValidationError as exc:
            last_err = exc
            continue
        if np.linalg.norm(proj @ proj - proj) > tol:
            last_err = StructureError("assembled projector is not idempotent")
            continue
        return AsymptoticPart(phi_inf=inf_ch, proj_p=p_ch, method=method, report=report)
    raise StructureError(f"could not assemble the peripheral projector: {last_err}")


def spectral_gap_mu(phi, asym):
    """Spectral radius of ``Phi - Phi_inf``; 0 when the difference is nilpotent."""
    diff = np.asarray(phi.superop) - np.asarray(asym.phi_inf.superop)
    if np.abs(diff).max(initial=0.0) < 1e-13:
        return 0.0
    mu = float(np.abs(np.linalg.eigvals(diff)).max())
    # Jordan blocks at 0 show up as eigenvalues of order eps**(1/k)
    if mu < 1e-4 and _is_nilpotent(diff):
        return 0.0
    return 0.0 if mu < ZERO_MU else mu


def _difference_map(phi, asym, n):
    s = np.linalg.matrix_power(np.asarray(phi.superop), n)
    s_inf = np.linalg.matrix_power(np.asarray(asym.phi_inf.superop), n)
    return LinearMap(s - s_inf, phi.dim_in)


def delta_n_sdp(phi, asym, n, tol=1e-7):
    """Certified ``||Phi^n - Phi_inf^n||_diamond`` (a :class:`DiamondNormResult`)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return diamond_norm_sdp(_difference_map(phi, asym, n), tol=tol)


def delta_n(phi, asym, n, tol=1e-7):
    """``Delta_n = ||Phi^n - Phi_inf^n||_diamond``."""
    return delta_n_sdp(phi, asym, n, tol).value


@dataclass
class KappaFit:
    """Empirical envelope ``Delta_n <= kappa * mu**n`` over the tested ``ns``.

    ``slope`` is the least-squares slope of ``ln Delta_n`` over the tail half
    of the range; ``slope_ok`` compares it with ``ln mu`` at 2 % relative.
    ``exact`` is set when ``mu = 0`` (convergence in finitely many steps).
    """

    kappa: float
    mu: float
    ns: np.ndarray
    deltas: np.ndarray
    slope: float = np.nan
    slope_ok: bool = True
    exact: bool = False

    def envelope(self, n, copies=1):
        return copies * self.kappa * self.mu ** np.asarray(n, dtype=float)


def fit_kappa(phi, asym, n_range, deltas=None, mu=None, floor=1e-9):
    """Fit the smallest ``kappa`` with ``Delta_n <= kappa mu^n`` on ``n_range``.

    Parameters
    ----------
    n_range : iterable of int
    deltas : array, optional
        Precomputed ``Delta_n`` for ``n_range``; computed by SDP otherwise.
    mu : float, optional
        Defaults to :func:`spectral_gap_mu`.
    floor : float
        ``Delta_n`` below this are excluded from the slope fit (solver noise).
    """
    ns = np.array(sorted(int(n) for n in n_range))
    if len(ns) == 0 or ns[0] < 1:
        raise ValueError("n_range must be a nonempty set of positive integers")
    mu = spectral_gap_mu(phi, asym) if mu is None else mu
    if deltas is None:
        deltas = np.array([delta_n(phi, asym, int(n)) for n in ns])
    deltas = np.asarray(deltas, dtype=float)
    if mu == 0:
        return KappaFit(0.0, 0.0, ns, deltas, exact=True)
    kappa = float(np.max(deltas / mu**ns))
    tail = ns[len(ns) // 2 :]
    vals = deltas[len(ns) // 2 :]
    mask = vals > floor
    slope, ok = np.nan, False
    if mask.sum() >= 2:
        slope = float(np.polyfit(tail[mask], np.log(vals[mask]), 1)[0])
        ok = abs(slope - np.log(mu)) <= 0.02 * abs(np.log(mu))
    return KappaFit(kappa, float(mu), ns, deltas, slope, bool(ok))

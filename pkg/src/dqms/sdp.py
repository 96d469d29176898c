"""Dense semidefinite programs: a generic LMI front end plus the diamond norm
and the epsilon-hypothesis-testing relative entropy.

All builders are written with complex Hermitian data. :class:`SdpProblem`
stores linear matrix inequalities ``sum_i x_i F_i <= F_0`` over real scalar
variables ``x``; :func:`solve` embeds each complex block into the real
symmetric form ``[[Re, -Im], [Im, Re]]`` and hands the result to the
primal-dual path-following cone solver of cvxopt.

Every quantity returned by :func:`diamond_norm_sdp` and :func:`dh_epsilon_sdp`
is bracketed by a lower and an upper bound that are recomputed from repaired
solver iterates with plain linear algebra, so callers never rely on the
solver's own gap report.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers

from .exceptions import DimensionError, SolverError
from .linalg import as_matrix, check_density, partial_trace, support_projector, trace_norm

__all__ = [
    "DiamondNormResult",
    "HypothesisTestResult",
    "SdpProblem",
    "SdpSolution",
    "diamond_norm",
    "diamond_norm_sdp",
    "dh_epsilon",
    "dh_epsilon_sdp",
    "hermitian_basis",
    "solve",
]

# tolerance ladder tried in order when the cone solver stalls
RETRY_TOLERANCES = (1e-8, 1e-9, 1e-10)
# hypothesis-test programs are tiny, so they can afford tighter stopping
DH_RETRY_TOLERANCES = (1e-11, 1e-10, 1e-9)

SOLVER_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-9,
    "reltol": 1e-9,
    "feastol": 1e-9,
    "maxiters": 200,
}


def hermitian_basis(n):
    """Hilbert-Schmidt orthonormal basis of the ``n x n`` Hermitian matrices.

    Returns an array of shape ``(n*n, n, n)``: diagonal units first, then
    symmetric and antisymmetric off-diagonal pairs.
    """
    out = []
    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1
        out.append(e)
    r = 1 / np.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            s = np.zeros((n, n), complex)
            s[i, j] = s[j, i] = r
            a = np.zeros((n, n), complex)
            a[i, j], a[j, i] = -1j * r, 1j * r
            out.extend([s, a])
    return np.array(out)


def _coords(x, basis):
    # real coordinates of a Hermitian matrix in an orthonormal Hermitian basis
    return np.real(np.einsum("kij,ji->k", basis, x))


@dataclass
class SdpProblem:
    """``min c.x`` subject to ``sum_i x_i F_i <= F_0`` per block and ``A x = b``.

    Parameters
    ----------
    c : (nvar,) array
    blocks : list of (F0, F) pairs
        ``F0`` is ``(n, n)`` Hermitian, ``F`` is ``(nvar, n, n)`` Hermitian.
    a_eq, b_eq : arrays, optional
        Real equality constraints.
    """

    c: np.ndarray
    blocks: list
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        nvar = len(self.c)
        checked = []
        for f0, f in self.blocks:
            f0 = as_matrix(f0, square=True, name="F0")
            f = np.asarray(f, dtype=complex)
            if f.shape != (nvar,) + f0.shape:
                raise DimensionError(f"LMI coefficients of shape {f.shape} do not match")
            scale = max(1.0, np.abs(f).max(initial=0.0), np.abs(f0).max())
            if np.abs(f0 - f0.conj().T).max() > 1e-12 * scale or (
                f.size and np.abs(f - f.conj().transpose(0, 2, 1)).max() > 1e-12 * scale
            ):
                raise ValueError("LMI data must be Hermitian")
            checked.append((f0, f))
        self.blocks = checked
        if self.a_eq is not None:
            self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
            if self.a_eq.shape != (len(self.b_eq), nvar):
                raise DimensionError("equality constraint shapes do not match")

    @property
    def n_var(self):
        return len(self.c)


@dataclass
class SdpSolution:
    """Solver output in complex form.

    ``duals[k]`` is the Hermitian multiplier of block ``k`` normalized so that
    the Lagrangian term reads ``Tr(duals[k] (F_0 - sum_i x_i F_i))``.
    """

    primal: float
    dual: float
    x: np.ndarray
    duals: list
    y: np.ndarray
    status: str
    iterations: int
    gap: float = field(init=False)

    def __post_init__(self):
        self.gap = abs(self.primal - self.dual)


def _embed(m):
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def _unembed(z):
    n = z.shape[0] // 2
    a, b, c, d = z[:n, :n], z[:n, n:], z[n:, :n], z[n:, n:]
    return (a + d) + 1j * (c - b)


def solve(problem, tol=1e-7, options=None, kktsolver="chol"):
    """Solve an :class:`SdpProblem`.

    Raises
    ------
    SolverError
        If the solver reports infeasibility or stops without reaching ``tol``
        on the duality gap; the partial solution is attached.
    """
    opts = dict(SOLVER_OPTIONS)
    opts.update(options or {})
    nvar = problem.n_var
    gs, hs = [], []
    for f0, f in problem.blocks:
        n2 = 2 * f0.shape[0]
        cols = np.stack([_embed(fi).reshape(-1, order="F") for fi in f], axis=1) if nvar else np.zeros((n2 * n2, 0))
        gs.append(cvx_matrix(np.ascontiguousarray(cols, dtype=float)))
        hs.append(cvx_matrix(np.ascontiguousarray(_embed(f0), dtype=float)))
    kwargs = {"Gs": gs, "hs": hs, "options": opts, "kktsolver": kktsolver}
    if problem.a_eq is not None and len(problem.b_eq):
        kwargs["A"] = cvx_matrix(problem.a_eq)
        kwargs["b"] = cvx_matrix(problem.b_eq)
    try:
        res = solvers.sdp(cvx_matrix(problem.c), **kwargs)
    except (ValueError, ArithmeticError) as exc:
        raise SolverError(f"cone solver failed: {exc}") from exc
    status = res["status"]
    if res["x"] is None:
        raise SolverError(f"solver status {status!r}, no iterate available")
    sol = SdpSolution(
        primal=float(res["primal objective"]),
        dual=float(res["dual objective"]),
        x=np.array(res["x"]).ravel(),
        duals=[_unembed(np.array(z)) for z in res["zs"]],
        y=np.array(res["y"]).ravel() if res["y"] is not None else np.zeros(0),
        status="optimal" if status == "optimal" else ("infeasible" if "infeasible" in status else "max-iter"),
        iterations=int(res.get("iterations", 0)),
    )
    if sol.status == "infeasible":
        raise SolverError(f"problem reported {status}", solution=sol)
    if sol.status != "optimal" and sol.gap > tol * max(1.0, abs(sol.primal)):
        raise SolverError(f"solver stopped with status {status!r}, gap {sol.gap:.2e}", solution=sol)
    return sol


def _solve_or_partial(problem, tol, solver_tol):
    # a stalled solve still yields iterates the certificates can judge
    opts = {"abstol": solver_tol, "reltol": solver_tol, "feastol": solver_tol}
    try:
        return solve(problem, tol, options=opts)
    except SolverError as exc:
        return exc.solution


@dataclass
class DiamondNormResult:
    """Certified diamond norm: ``lower <= ||Delta||_diamond <= upper``.

    ``rho`` is the optimal input marginal found by the solver (lower bound
    witness) and ``z`` the repaired dual matrix (upper bound witness).
    """

    value: float
    lower: float
    upper: float
    rho: np.ndarray = field(repr=False, default=None)
    z: np.ndarray = field(repr=False, default=None)

    @property
    def gap(self):
        return self.upper - self.lower


def _choi_of(delta, dims):
    if hasattr(delta, "choi") and hasattr(delta, "dim_in"):
        return np.asarray(delta.choi), delta.dim_in, delta.dim_out
    from .channels import superop_to_choi

    if dims is None:
        raise DimensionError("dims=(dim_in, dim_out) required for a raw superoperator")
    dim_in, dim_out = dims
    return superop_to_choi(as_matrix(delta), dim_in, dim_out), dim_in, dim_out


def diamond_lower_bound(choi, dims, rho):
    """``||(sqrt(rho) kron 1) J (sqrt(rho) kron 1)||_1`` for a density ``rho``."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, 0, None)
    w = w / w.sum()
    r = np.kron((v * np.sqrt(w)) @ v.conj().T, np.eye(dims[1]))
    return trace_norm(r @ choi @ r)


def diamond_upper_bound(choi, dims, z):
    """Dual objective after shifting ``z`` until ``z >= J`` and ``z >= -J``."""
    z = (z + z.conj().T) / 2
    s = max(
        0.0,
        -np.linalg.eigvalsh(z - choi).min(),
        -np.linalg.eigvalsh(z + choi).min(),
    )
    z = z + s * np.eye(z.shape[0])
    return float(np.linalg.eigvalsh(partial_trace(z, dims, 0)).max()), z


def diamond_norm_sdp(delta, dims=None, tol=1e-7, zero_tol=1e-14):
    """Diamond norm of a Hermiticity-preserving map with certificates.

    Solves ``min ||Tr_out Z||_inf`` subject to ``Z >= J`` and ``Z >= -J`` where
    ``J`` is the Choi matrix of ``delta``; its Lagrange dual is
    ``max <J, W0 - W1>`` with ``W0 + W1 <= rho kron 1``.

    Parameters
    ----------
    delta : LinearMap or ndarray
        The map, or its superoperator together with ``dims``.
    dims : (int, int), optional
    tol : float
        Required gap between the certified bounds, relative to max(1, value).

    Returns
    -------
    DiamondNormResult
    """
    choi, dim_in, dim_out = _choi_of(delta, dims)
    if np.abs(choi - choi.conj().T).max() > 1e-9 * max(1.0, np.abs(choi).max()):
        raise ValueError("map is not Hermiticity preserving")
    choi = (choi + choi.conj().T) / 2
    scale = float(np.abs(choi).max())
    if scale <= zero_tol:
        return DiamondNormResult(0.0, 0.0, 0.0, np.eye(dim_in) / dim_in, np.zeros_like(choi))
    j = choi / scale
    n = dim_in * dim_out
    basis = hermitian_basis(n)
    nz = len(basis)
    tr_basis = np.array([partial_trace(b, (dim_in, dim_out), 0) for b in basis])
    # variables (z_1..z_nz, t); minimize t
    c = np.zeros(nz + 1)
    c[-1] = 1.0
    f_z = np.concatenate([-basis, np.zeros((1, n, n))])
    f_tr = np.concatenate([tr_basis, -np.eye(dim_in)[None]])
    blocks = [(-j, f_z), (j, f_z), (np.zeros((dim_in, dim_in)), f_tr)]
    problem = SdpProblem(c, blocks)
    best = None
    for t in RETRY_TOLERANCES:
        sol = _solve_or_partial(problem, tol, t)
        if sol is None:
            continue
        z = np.einsum("k,kij->ij", sol.x[:nz], basis)
        rho = sol.duals[2]
        lower = diamond_lower_bound(j, (dim_in, dim_out), rho)
        upper, z = diamond_upper_bound(j, (dim_in, dim_out), z)
        if best is None or upper - lower < best[1] - best[0]:
            best = (lower, upper, z, rho)
        if upper - lower <= tol * max(1.0, upper):
            break
    if best is None:
        raise SolverError("diamond norm SDP failed at every tolerance")
    lower, upper, z, rho = best
    if upper - lower > tol * max(1.0, upper):
        raise SolverError(f"diamond norm certificates disagree: [{lower:.10f}, {upper:.10f}]")
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    rho = (v * np.clip(w, 0, None)) @ v.conj().T
    rho /= np.trace(rho).real
    return DiamondNormResult(
        value=scale * (lower + upper) / 2,
        lower=scale * lower,
        upper=scale * upper,
        rho=rho,
        z=scale * z,
    )


def diamond_norm(delta, dims=None, tol=1e-7):
    """Diamond norm value; see :func:`diamond_norm_sdp` for certificates."""
    return diamond_norm_sdp(delta, dims, tol).value


@dataclass
class HypothesisTestResult:
    """``beta`` is the optimal type-II error, ``value = -log2(beta)`` in bits.

    ``beta_lower``/``beta_upper`` are certified from the dual and primal.
    """

    value: float
    beta: float
    beta_lower: float
    beta_upper: float
    test: np.ndarray = field(repr=False, default=None)


def _dh_certificates(sol, basis, rho, sigma, epsilon):
    d = rho.shape[0]
    lam = np.einsum("k,kij->ij", sol.x, basis)
    # primal repair: clip into [0, I], then mix with the support projector of
    # rho (always feasible) to restore the constraint
    w, v = np.linalg.eigh((lam + lam.conj().T) / 2)
    lam = (v * np.clip(w, 0, 1)) @ v.conj().T
    p = np.trace(lam @ rho).real
    if p < 1 - epsilon:
        supp = support_projector(rho, 1e-12)
        proj = supp @ supp.conj().T
        t = (1 - epsilon - p) / (np.trace(proj @ rho).real - p)
        lam = (1 - t) * lam + t * proj
    beta_up = float(np.trace(lam @ sigma).real)
    # dual repair: y >= 0 and mu * rho - y <= sigma
    y = sol.duals[1]
    mu = max(0.0, float(sol.duals[2].real.ravel()[0]))
    wy, vy = np.linalg.eigh((y + y.conj().T) / 2)
    y = (vy * np.clip(wy, 0, None)) @ vy.conj().T
    s = max(0.0, float(np.linalg.eigvalsh(mu * rho - y - sigma).max()))
    y = y + s * np.eye(d)
    beta_lo = float((1 - epsilon) * mu - np.trace(y).real)
    # polish: for fixed mu the best dual slack is (mu rho - sigma)_+, so the
    # dual value is a concave function of mu alone
    mu_best, lo_best = _dh_dual_line(rho, sigma, epsilon, mu)
    if lo_best > beta_lo:
        beta_lo = lo_best
    lam2 = _dh_greedy_test(rho, sigma, epsilon, mu_best)
    up2 = float(np.trace(lam2 @ sigma).real)
    if up2 < beta_up:
        beta_up, lam = up2, lam2
    beta_lo = min(max(beta_lo, 0.0), beta_up)
    return beta_lo, beta_up, lam


def _dh_dual_value(rho, sigma, epsilon, mu):
    w = np.linalg.eigvalsh(mu * rho - sigma)
    return (1 - epsilon) * mu - w[w > 0].sum()


def _dh_dual_line(rho, sigma, epsilon, mu0):
    hi = 2 * mu0 + 1
    res = minimize_scalar(
        lambda m: -_dh_dual_value(rho, sigma, epsilon, m),
        bounds=(0.0, hi),
        method="bounded",
        options={"xatol": 1e-13 * hi},
    )
    return float(res.x), float(-res.fun)


def _dh_greedy_test(rho, sigma, epsilon, mu):
    # eigenvectors of mu rho - sigma in decreasing order, the last one partially
    w, v = np.linalg.eigh(mu * rho - sigma)
    lam = np.zeros_like(rho)
    need = 1 - epsilon
    for j in np.argsort(-w):
        pj = np.outer(v[:, j], v[:, j].conj())
        r = np.trace(pj @ rho).real
        if need <= 0:
            break
        t = 1.0 if r <= need else need / r
        lam = lam + t * pj
        need -= t * r
    return lam


def dh_epsilon_sdp(rho, sigma, epsilon, tol=1e-9):
    """Hypothesis-testing relative entropy with primal and dual certificates.

    ``beta = min Tr(L sigma)`` over ``0 <= L <= I`` with ``Tr(L rho) >= 1 - eps``.
    """
    rho = check_density(rho)
    sigma = as_matrix(sigma, square=True, name="sigma")
    sigma = (sigma + sigma.conj().T) / 2
    if sigma.shape != rho.shape:
        raise DimensionError("rho and sigma differ in dimension")
    if np.linalg.eigvalsh(sigma).min() < -1e-9:
        raise ValueError("sigma is not positive semidefinite")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if epsilon == 0:
        # Tr(L rho) = 1 forces L = 1 on supp(rho); the optimum is that projector.
        # The conic program has no interior here and its dual is not attained.
        supp = support_projector(rho, 1e-12)
        proj = supp @ supp.conj().T
        beta = float(np.trace(proj @ sigma).real)
        value = np.inf if beta <= 1e-15 else -np.log2(beta)
        return HypothesisTestResult(value, beta, beta, beta, proj)
    d = rho.shape[0]
    basis = hermitian_basis(d)
    c = _coords(sigma, basis)
    one = np.ones((1, 1))
    blocks = [
        (np.zeros((d, d)), -basis),
        (np.eye(d), basis),
        (-(1 - epsilon) * one, -np.einsum("kij,ji->k", basis, rho).real[:, None, None] * one),
    ]
    problem = SdpProblem(c, blocks)
    best = None
    for t in DH_RETRY_TOLERANCES:
        sol = _solve_or_partial(problem, tol, t)
        if sol is None:
            continue
        beta_lo, beta_up, lam = _dh_certificates(sol, basis, rho, sigma, epsilon)
        if best is None or beta_up - beta_lo < best[1] - best[0]:
            best = (beta_lo, beta_up, lam)
        if beta_up - beta_lo <= tol:
            break
    if best is None:
        raise SolverError("hypothesis test SDP failed at every tolerance")
    beta_lo, beta_up, lam = best
    if beta_up - beta_lo > max(tol, 1e-7 * beta_up):
        raise SolverError(f"hypothesis test certificates disagree: [{beta_lo}, {beta_up}]")
    beta = beta_up
    value = np.inf if beta <= 1e-15 else -np.log2(beta)
    return HypothesisTestResult(value, beta, beta_lo, beta_up, lam)


def dh_epsilon(rho, sigma, epsilon):
    """``D_H^eps(rho || sigma)`` in bits."""
    return dh_epsilon_sdp(rho, sigma, epsilon).value

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqms import zoo
from dqms.divergences import dmax, dmax_sep_pure, fidelity, trace_distance
from dqms.linalg import random_density


def block_diag(*ms):
    n = sum(m.shape[0] for m in ms)
    out = np.zeros((n, n), complex)
    i = 0
    for m in ms:
        k = m.shape[0]
        out[i : i + k, i : i + k] = m
        i += k
    return out


def test_dmax_vectors():
    rng = np.random.default_rng(0)
    rho = random_density(3, rng)
    assert abs(dmax(rho, rho).value) < 1e-12
    p0, p1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert abs(dmax(p0, np.eye(2) / 2).value - 1) < 1e-12
    res = dmax(p0, p1)
    assert res.value == np.inf and not res.finite


def test_dmax_matches_generalized_eigenvalue():
    # oracle: log of the smallest lambda with rho <= lambda sigma, by bisection on PSD-ness
    rng = np.random.default_rng(1)
    for _ in range(20):
        rho, sigma = random_density(3, rng), random_density(3, rng)
        lo, hi = 0.0, 1e6
        for _ in range(200):
            mid = (lo + hi) / 2
            if np.linalg.eigvalsh(mid * sigma - rho).min() >= 0:
                hi = mid
            else:
                lo = mid
        assert abs(dmax(rho, sigma).value - np.log2(hi)) < 1e-9


def test_dmax_truncated_value_reported():
    rho = np.diag([0.5, 0.5 - 1e-6, 1e-6])
    sigma = np.diag([0.5, 0.5, 0.0])
    res = dmax(rho, sigma)
    assert not res.finite
    assert np.isfinite(res.truncated)
    assert abs(res.truncated) < 1e-5


def random_family(rng, d, k):
    p = rng.dirichlet(np.ones(k))
    q = rng.dirichlet(np.ones(k))
    rhos = [random_density(d, rng) for _ in range(k)]
    sigmas = [random_density(d, rng) for _ in range(k)]
    return p, q, rhos, sigmas


def test_quasi_convexity():
    rng = np.random.default_rng(2)
    for _ in range(200):
        d, k = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        p, _, rhos, sigmas = random_family(rng, d, k)
        mix_r = sum(pi * r for pi, r in zip(p, rhos))
        mix_s = sum(pi * s for pi, s in zip(p, sigmas))
        worst = max(dmax(r, s).value for r, s in zip(rhos, sigmas))
        assert dmax(mix_r, mix_s).value <= worst + 1e-9


def test_quasi_convexity_equality_orthogonal_supports():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d, k = 2, int(rng.integers(2, 4))
        p, _, rhos, sigmas = random_family(rng, d, k)
        zero = np.zeros((d, d))
        mix_r = sum(pi * block_diag(*[r if j == i else zero for j in range(k)]) for i, (pi, r) in enumerate(zip(p, rhos)))
        mix_s = sum(pi * block_diag(*[s if j == i else zero for j in range(k)]) for i, (pi, s) in enumerate(zip(p, sigmas)))
        worst = max(dmax(r, s).value for r, s in zip(rhos, sigmas))
        assert abs(dmax(mix_r, mix_s).value - worst) < 1e-9


def test_dmax_data_processing():
    rng = np.random.default_rng(4)
    for _ in range(50):
        rho, sigma = random_density(3, rng), random_density(3, rng)
        phi = zoo.random_channel(3, rng, n_kraus=int(rng.integers(2, 4)), dim_out=int(rng.integers(2, 4)))
        assert dmax(phi(rho), phi(sigma)).value <= dmax(rho, sigma).value + 1e-9


def test_fidelity_vectors():
    rng = np.random.default_rng(5)
    rho = random_density(2, rng)
    assert abs(fidelity(rho, rho) - 1) < 1e-9
    assert abs(fidelity(np.diag([1.0, 0]), np.eye(2) / 2) - 0.5) < 1e-12
    for _ in range(20):
        a, b = random_density(2, rng), random_density(2, rng)
        wa, va = np.linalg.eigh(a)
        wb, vb = np.linalg.eigh(b)
        sa = (va * np.sqrt(np.clip(wa, 0, None))) @ va.conj().T
        sb = (vb * np.sqrt(np.clip(wb, 0, None))) @ vb.conj().T
        oracle = np.linalg.svd(sa @ sb, compute_uv=False).sum() ** 2
        assert abs(fidelity(a, b) - oracle) < 1e-9


def test_trace_distance_unhalved():
    p0, p1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert abs(trace_distance(p0, p1) - 2) < 1e-15


def test_dmax_sep_pure_vectors():
    prod = np.kron([1, 0], [0, 1]).astype(complex)
    assert abs(dmax_sep_pure(prod, (2, 2))) < 1e-12
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert abs(dmax_sep_pure(bell, (2, 2)) - 1) < 1e-12
    assert abs(dmax_sep_pure(np.outer(bell, bell), (2, 2)) - 1) < 1e-9
    with pytest.raises(ValueError):
        dmax_sep_pure(np.eye(4) / 4, (2, 2))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_dmax_sep_pure_bounded(da, db, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=da * db) + 1j * rng.normal(size=da * db)
    psi /= np.linalg.norm(psi)
    val = dmax_sep_pure(psi, (da, db))
    s = np.linalg.svd(psi.reshape(da, db), compute_uv=False)
    assert abs(val - 2 * np.log2(s.sum())) < 1e-12
    assert -1e-12 <= val <= np.log2(min(da, db)) + 1e-12


def test_min_max_identity_on_tables():
    # min over independent choices x_k of max_k f_k(x_k) equals max_k min_x f_k(x)
    rng = np.random.default_rng(6)
    for _ in range(100):
        k, n = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        f = rng.integers(-5, 6, size=(k, n))
        lhs = min(max(f[i, x[i]] for i in range(k)) for x in itertools.product(range(n), repeat=k))
        assert lhs == f.min(axis=1).max()

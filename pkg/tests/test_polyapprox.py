import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, special, stats

from hazmix.polyapprox import (DegenerateMoments, IllConditionedBasis, WeightParams, build_basis,
                               check_moment_sequence, coefficients_from_moments, eval_fN, eval_piN_unnorm,
                               reconstruct)


def beta_moments(a, b, n):
    return [math.prod((a + j) / (a + b + j) for j in range(r)) for r in range(n + 1)]


def gauss_nodes(p, k=60):
    # Gauss-Jacobi on [0,1] for w(s) = s^(a-1) (1-s)^(b-1)
    x, w = special.roots_jacobi(k, p.b - 1, p.a - 1)
    return (x + 1) / 2, w / 2 ** (p.a + p.b - 1)


def test_uniform_order_zero_and_one():
    basis = build_basis(WeightParams(1, 1), 1)
    assert basis.coeffs[0, 0] == pytest.approx(1.0)
    assert basis.coeffs[1, :2] == pytest.approx([-math.sqrt(3), 2 * math.sqrt(3)], rel=1e-14)


@pytest.mark.parametrize("a,b", [(1, 1), (0.5, 0.7), (2, 5), (7.3, 1.4), (40, 3)])
def test_gram_matrix_is_identity(a, b):
    p = WeightParams(a, b)
    basis = build_basis(p, 10, max_coeff=np.inf)
    s, w = gauss_nodes(p)
    g = basis.evaluate(s)
    gram = (g * w) @ g.T
    assert np.max(np.abs(gram - np.eye(11))) < 1e-10
    # the monomial table agrees with the recurrence
    mono = basis.coeffs @ np.vander(s, 11, increasing=True).T
    assert np.max(np.abs(mono - g)) < 1e-6 * np.max(np.abs(g))


def test_exact_degree():
    basis = build_basis(WeightParams(2, 3), 6)
    assert all(basis.coeffs[i, i] != 0 for i in range(7))


def test_beta_target_has_only_constant_term():
    a, b = 3.5, 2.25
    with mp.workdps(50):
        mu = [mp.rf(a, r) / mp.rf(a + b, r) for r in range(9)]
    d = coefficients_from_moments(build_basis(WeightParams(a, b), 8), mu)
    assert np.max(np.abs(d.lam[1:])) < 1e-12
    s = np.linspace(0.01, 0.99, 50)
    assert eval_fN(d, s) == pytest.approx(stats.beta.pdf(s, a, b), rel=1e-10)


def test_point_mass_at_zero_gives_first_column():
    basis = build_basis(WeightParams(2, 2), 4)
    d = coefficients_from_moments(basis, [1, 0, 0, 0, 0])
    assert d.lam == pytest.approx(basis.coeffs[:, 0], rel=1e-14)


def test_beta23_under_uniform_weight_reproduces_moments():
    d = coefficients_from_moments(build_basis(WeightParams(1, 1), 2), beta_moments(2, 3, 2))
    for r, mu in enumerate([1.0, 0.4, 0.2]):
        val = integrate.quad(lambda s: s ** r * eval_fN(d, s), 0, 1)[0]
        assert val == pytest.approx(mu, abs=1e-12)


def test_coefficients_linear_in_moments(rng):
    basis = build_basis(WeightParams(2.5, 4), 5)
    m1, m2 = rng.random(6), rng.random(6)
    l1 = coefficients_from_moments(basis, m1).lam
    l2 = coefficients_from_moments(basis, m2).lam
    l12 = coefficients_from_moments(basis, 2 * m1 - 3 * m2).lam
    assert l12 == pytest.approx(2 * l1 - 3 * l2, rel=1e-12, abs=1e-9)


def test_positive_part_clips(rng):
    # a bimodal target under a unimodal weight goes negative somewhere
    mu = [0.5 * (x + y) for x, y in zip(beta_moments(2, 20, 6), beta_moments(20, 2, 6))]
    d = reconstruct(mu, 6, WeightParams(3, 3))
    s = np.linspace(0, 1, 401)
    f, pi = eval_fN(d, s), eval_piN_unnorm(d, s)
    assert np.any(f < 0)
    assert np.all(pi >= 0)
    assert np.array_equal(pi[f >= 0], f[f >= 0])


def test_beta_matched_weight():
    p = WeightParams.beta_matched(*beta_moments(2, 5, 2)[1:])
    assert (p.a, p.b) == pytest.approx((2, 5), rel=1e-12)
    with pytest.raises(DegenerateMoments):
        WeightParams.beta_matched(0.3, 0.09 + 1e-14)


def test_exact_recovery_with_two_moments():
    d = reconstruct(beta_moments(4, 9, 2), 2)
    s = np.linspace(0.001, 0.999, 200)
    assert np.max(np.abs(eval_fN(d, s) - stats.beta.pdf(s, 4, 9))) < 1e-8


def test_invalid_inputs():
    with pytest.raises(ValueError):
        WeightParams(0, 1)
    with pytest.raises(ValueError):
        build_basis(WeightParams(1, 1), -1)
    d = reconstruct(beta_moments(2, 2, 3), 3)
    with pytest.raises(ValueError):
        eval_fN(d, 1.5)
    with pytest.raises(ValueError):
        coefficients_from_moments(d.basis, [1, 0.5])
    with pytest.raises(ValueError):
        check_moment_sequence([1, 0.5, 0.6])


def test_guard_rejects_high_orders():
    with pytest.raises(IllConditionedBasis):
        build_basis(WeightParams(30, 3), 20)
    build_basis(WeightParams(30, 3), 20, max_coeff=1e40)


def test_moment_matching_against_gauss_quadrature(rng):
    a, b = 1.7, 3.2
    target = [0.3 * x + 0.7 * y for x, y in zip(beta_moments(1.2, 6, 10), beta_moments(5, 2, 10))]
    d = reconstruct(target, 10, WeightParams(a, b))
    s, w = gauss_nodes(d.params)
    poly = d.polynomial(s)
    got = [(w * poly * s ** r).sum() for r in range(11)]
    assert np.max(np.abs(np.array(got) - target)) < 1e-10

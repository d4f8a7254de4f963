import numpy as np
import pytest

from cashstock.demand import (
    DiscreteEmpirical,
    Uniform,
    ZeroInflatedPoisson,
)

U20 = Uniform(0, 20)
ZIP18 = ZeroInflatedPoisson(0.18, 10)

# P(D=0) = pi + (1-pi) e^{-lam} = 0.18 + 0.82 * exp(-10)
ZIP18_P0 = 0.18 + 0.82 * np.exp(-10.0)


def test_cdf_examples():
    assert U20.cdf(10.0) == pytest.approx(0.5, abs=1e-12)
    assert ZIP18.cdf(0.0) == pytest.approx(ZIP18_P0, abs=1e-12)
    assert Uniform(6, 14).cdf(6.0) == 0.0
    assert U20.cdf(-3.0) == 0.0


def test_quantile_examples():
    assert U20.quantile(0.607143) == pytest.approx(12.14286, abs=1e-5)
    assert U20.quantile(0.0) == 0.0
    # the atom at zero holds all mass up to P(D=0) > 0.18 > 0.1
    assert ZIP18.quantile(0.1) == 0.0
    with pytest.raises(ValueError):
        U20.quantile(1.5)
    with pytest.raises(ValueError):
        ZIP18.quantile(-0.01)


def test_quantile_cdf_generalized_inverse():
    rng = np.random.default_rng(0)
    for dem in (U20, ZIP18, DiscreteEmpirical((1.0, 3.0, 7.0), (0.2, 0.5, 0.3))):
        u = rng.random(200)
        q = dem.quantile(u)
        # smallest t with F(t) >= u: F(q) >= u, and any smaller atom/point fails
        assert np.all(dem.cdf(q) >= u - 1e-12)
        assert np.all(dem.cdf(q - 1e-9) <= dem.cdf(q) + 1e-12)
    # continuous strictly increasing region: exact round trip
    t = rng.uniform(0, 20, 100)
    assert np.allclose(U20.quantile(U20.cdf(t)), t, atol=1e-12)


def test_loss_examples():
    # uniform: T(x) = x^2/40 on [0, 20]
    assert U20.loss(10.0) == pytest.approx(2.5, abs=1e-12)
    for dem in (U20, ZIP18):
        assert dem.loss(0.0) == pytest.approx(0.0, abs=1e-12)
    # finite pmf sum: only the k=0 atom sits below 1
    assert ZIP18.loss(1.0) == pytest.approx(ZIP18_P0, abs=1e-12)


def test_loss_via_quadrature_matches_analytic():
    x = 10.0
    nodes, weights = U20.quadrature(kinks=[x])
    assert np.sum(np.maximum(x - nodes, 0.0) * weights) == pytest.approx(2.5, abs=1e-9)


def test_loss_lipschitz_and_convex():
    rng = np.random.default_rng(1)
    for dem in (U20, ZIP18, Uniform(6, 14)):
        xs = np.sort(rng.uniform(0, 30, 50))
        losses = dem.loss(xs)
        steps = np.diff(losses) / np.diff(xs)
        assert np.all(steps >= -1e-12)
        assert np.all(steps <= 1.0 + 1e-12)
        # convexity: slopes nondecreasing
        assert np.all(np.diff(steps) >= -1e-9)


def test_moments():
    m = ZIP18.moments()
    assert m.mean == pytest.approx(8.2, abs=1e-12)
    assert m.cv == pytest.approx(np.sqrt((1 + 10 * 0.18) / 8.2), abs=1e-12)
    assert round(float(m.cv), 2) == 0.58
    m = U20.moments()
    assert m.mean == pytest.approx(10.0)
    assert m.cv == pytest.approx(20 / np.sqrt(12) / 10, abs=1e-12)  # 0.577
    poisson = ZeroInflatedPoisson(0.0, 10).moments()
    assert poisson.cv == pytest.approx(np.sqrt(0.1), abs=1e-12)  # 0.316
    with pytest.raises(ValueError):
        DiscreteEmpirical((0.0,), (1.0,)).moments()


def test_quadrature_weights_are_probabilities():
    nodes, weights = U20.quadrature(kinks=[10.0])
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    atoms, probs = ZIP18.quadrature()
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert 1.0 - probs.sum() < 1e-12  # truncated tail mass
    assert np.all(atoms == np.arange(len(atoms)))


def test_expectation_nodes_per_element_kink():
    z = np.array([5.0, 10.0, 25.0])
    nodes, weights = U20.expectation_nodes(z)
    got = np.sum(np.maximum(z[:, None] - nodes, 0.0) * weights, axis=1)
    assert np.allclose(got, U20.loss(z), atol=1e-9)


def test_sampling_inverse_transform():
    rng = np.random.default_rng(42)
    assert U20.quantile(0.5) == 10.0
    draws = U20.sample(np.random.default_rng(3), 10)
    again = U20.sample(np.random.default_rng(3), 10)
    assert np.array_equal(draws, again)
    # almost-degenerate zero inflation
    dem = ZeroInflatedPoisson(1 - 1e-9, 5.0)
    assert np.all(dem.sample(rng, 1000) == 0.0)


def test_sampling_law_of_large_numbers():
    draws = ZIP18.sample(np.random.default_rng(7), 1_000_000)
    assert draws.mean() == pytest.approx(8.2, abs=0.02)


def test_discrete_empirical_validation():
    with pytest.raises(ValueError):
        DiscreteEmpirical((1.0, 2.0), (0.7, 0.2))  # sums to 0.9
    with pytest.raises(ValueError):
        DiscreteEmpirical((1.0, 2.0), (1.2, -0.2))
    merged = DiscreteEmpirical((2.0, 1.0, 2.0), (0.25, 0.5, 0.25))
    assert np.array_equal(merged.atoms, [1.0, 2.0])
    assert np.allclose(merged.probs, [0.5, 0.5])


def test_uniform_validation():
    with pytest.raises(ValueError):
        Uniform(5, 5)
    with pytest.raises(ValueError):
        Uniform(-1, 5)
    with pytest.raises(ValueError):
        ZeroInflatedPoisson(1.0, 5.0)

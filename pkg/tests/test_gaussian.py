import logging

import numpy as np
import pytest

from cvrlab import (
    CovarianceNotPSDError,
    bifractional,
    brownian,
    component_seed,
    covariance_matrix,
    fbm,
    make_grid,
    mixed,
    reference_qv,
    sample,
    scaled,
)
from cvrlab.gaussian import GaussianSpec, _cholesky_with_jitter


def test_spec_validation():
    with pytest.raises(ValueError):
        fbm(0.0)
    with pytest.raises(ValueError):
        fbm(1.0)
    with pytest.raises(ValueError):
        bifractional(0.25, 2.0)
    with pytest.raises(ValueError):
        bifractional(0.25, 0.0)
    with pytest.raises(ValueError):
        GaussianSpec("mixed")
    with pytest.raises(ValueError):
        GaussianSpec("weird")


def test_spec_dict_roundtrip():
    spec = mixed(brownian(), scaled(fbm(0.75), 2.0), bifractional(0.625, 0.8))
    assert GaussianSpec.from_dict(spec.to_dict()) == spec


# Oracle for the degenerate bifractional check: assemble both covariance
# matrices from their formulas and require entrywise equality before
# trusting any draw.
def test_bifractional_K1_covariance_equals_fbm():
    g = make_grid(1.0, 64)
    c_bifr = covariance_matrix(bifractional(0.25, 1.0), g)
    c_fbm = covariance_matrix(fbm(0.25), g)
    assert np.allclose(c_bifr, c_fbm, rtol=1e-12, atol=1e-14)


def test_bifractional_K1_draw_equals_fbm_same_seed():
    g = make_grid(1.0, 128)
    a = sample(bifractional(0.25, 1.0), g, 42)
    b = sample(fbm(0.25), g, 42)
    assert np.allclose(a.values, b.values, rtol=1e-9, atol=1e-12)


def test_fbm_half_matches_brownian_marginals():
    g = make_grid(1.0, 32)
    c = covariance_matrix(fbm(0.5), g)
    assert np.allclose(np.diag(c), g.times, rtol=1e-12)
    a = sample(fbm(0.5), g, 3)
    b = sample(brownian(), g, 3)
    assert np.allclose(a.values, b.values, rtol=1e-10, atol=1e-12)


def test_fbm_self_similarity_on_assembled_matrix():
    for H in (0.25, 0.6, 0.75):
        g = make_grid(2.0, 32)
        c = covariance_matrix(fbm(H), g)
        assert np.array_equal(np.diag(c), g.times ** (2 * H))


def test_brownian_sample_covariance_monte_carlo():
    g = make_grid(1.0, 8)
    n = 4000
    draws = np.stack([sample(brownian(), g, 10_000 + r).values for r in range(n)])
    emp = draws.T @ draws / n
    ref = covariance_matrix(brownian(), g)
    # entries have standard error ~ sqrt((R_ii R_jj + R_ij^2)/n) <= ~0.02
    assert np.max(np.abs(emp - ref)) < 0.07


def test_brownian_increments_uncorrelated():
    g = make_grid(1.0, 8)
    n = 10_000
    incr = np.stack([np.diff(sample(brownian(), g, 50_000 + r).values) for r in range(n)])
    corr = np.corrcoef(incr.T)
    off = corr[~np.eye(8, dtype=bool)]
    assert np.max(np.abs(off)) < 3.0 / np.sqrt(n) * 1.5


def test_reproducible_bit_for_bit():
    g = make_grid(1.0, 64)
    for spec in (brownian(), fbm(0.7), bifractional(0.625, 0.8),
                 mixed(brownian(), fbm(0.75)), scaled(brownian(), 3.0)):
        a = sample(spec, g, 11)
        b = sample(spec, g, 11)
        assert np.array_equal(a.values, b.values), spec.label


def test_all_samples_start_at_zero():
    g = make_grid(1.0, 16)
    for spec in (brownian(), fbm(0.3), bifractional(5 / 6, 3 / 5)):
        assert sample(spec, g, 0).values[0] == 0.0


def test_scaled_draw_is_scaled_base_draw():
    g = make_grid(1.0, 64)
    base = sample(brownian(), g, 5)
    sc = sample(scaled(brownian(), -2.5), g, 5)
    assert np.allclose(sc.values, -2.5 * base.values, rtol=1e-12, atol=0)
    c = covariance_matrix(scaled(brownian(), -2.5), g)
    assert np.allclose(c, 6.25 * covariance_matrix(brownian(), g), rtol=1e-12)


def test_mixed_covariance_is_sum_of_components():
    g = make_grid(1.0, 32)
    spec = mixed(brownian(), fbm(0.75))
    c = covariance_matrix(spec, g)
    parts = covariance_matrix(brownian(), g) + covariance_matrix(fbm(0.75), g)
    assert np.array_equal(c, parts)


def test_mixed_draw_is_sum_of_component_draws_with_derived_seeds():
    g = make_grid(1.0, 128)
    seed = 9
    spec = mixed(brownian(), fbm(0.75))
    total = sample(spec, g, seed)
    w = sample(brownian(), g, component_seed(seed, 0))
    b = sample(fbm(0.75), g, component_seed(seed, 1))
    assert np.allclose(total.values, w.values + b.values, rtol=0, atol=1e-12)


def test_cholesky_reports_offending_minor():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(CovarianceNotPSDError) as exc:
        _cholesky_with_jitter(bad, "test")
    assert exc.value.minor == 2


def test_cholesky_jitter_rescues_and_logs(caplog):
    v = np.array([1.0, 1.0])
    almost = np.outer(v, v) + np.diag([1e-13, -1e-13])  # tiny negative eigenvalue
    with caplog.at_level(logging.WARNING, logger="cvrlab.gaussian"):
        L = _cholesky_with_jitter(almost, "test")
    assert np.all(np.isfinite(L))
    assert any("jitter" in r.message for r in caplog.records)


def test_reference_qv_table():
    g = make_grid(1.0, 16)
    t = g.times
    assert np.allclose(reference_qv(brownian(), g).values, t)
    assert np.allclose(reference_qv(fbm(0.5), g).values, t)
    assert np.allclose(reference_qv(fbm(0.75), g).values, 0.0)
    assert reference_qv(fbm(0.3), g) is None
    assert np.allclose(reference_qv(bifractional(5 / 6, 3 / 5), g).values,
                       2.0 ** (1 - 3 / 5) * t)
    assert np.allclose(reference_qv(bifractional(0.75, 0.8), g).values, 0.0)  # HK > 1/2
    assert reference_qv(bifractional(0.5, 0.8), g) is None  # HK < 1/2
    assert np.allclose(reference_qv(scaled(brownian(), 2.0), g).values, 4.0 * t)
    assert np.allclose(reference_qv(mixed(brownian(), fbm(0.75)), g).values, t)
    assert reference_qv(mixed(brownian(), fbm(0.3)), g) is None

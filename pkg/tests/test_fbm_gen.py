import logging
from unittest.mock import patch

import numpy as np
import pytest
from scipy import stats

import fbm_gen
from errors import CirculantEmbeddingError, DomainError, NumericalInstabilityError
from fbm_gen import (
    HurstParameter,
    PathLabel,
    SamplePath,
    TimeGrid,
    empirical_covariance,
    estimate_holder_exponent,
    fbm_covariance,
    generate_batch,
    generate_cholesky,
    generate_circulant,
    generate_fbm,
    holder_norm,
    increment_covariance,
)


@pytest.fixture
def grid():
    return TimeGrid(1.0, 64)


def test_time_grid_validation():
    with pytest.raises(DomainError):
        TimeGrid(0.0, 10)
    with pytest.raises(DomainError):
        TimeGrid(1.0, 0)
    grid = TimeGrid(2.0, 4)
    assert grid.dt == 0.5
    assert list(grid.times) == [0.0, 0.5, 1.0, 1.5, 2.0]


def test_hurst_range():
    HurstParameter(0.5)
    HurstParameter(0.99)
    with pytest.raises(DomainError):
        HurstParameter(0.4)
    with pytest.raises(DomainError):
        HurstParameter(1.0)


def test_covariance_closed_form():
    assert fbm_covariance(0.5, 0.3, 0.7) == pytest.approx(0.3)
    assert fbm_covariance(0.75, 1.0, 1.0) == pytest.approx(1.0)
    assert fbm_covariance(0.75, 1.0, 2.0) == pytest.approx(np.sqrt(2.0))
    t = np.array([0.2, 0.5])
    cov = fbm_covariance(0.75, t[:, None], t[None, :])
    assert cov.shape == (2, 2)
    assert cov[0, 1] == pytest.approx(cov[1, 0])
    with pytest.raises(DomainError):
        fbm_covariance(0.75, -0.1, 0.5)


@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_generators_are_seeded_paths_from_zero(grid, method):
    first = generate_fbm(0.75, grid, 7, method)
    again = generate_fbm(0.75, grid, 7, method)
    other = generate_fbm(0.75, grid, 8, method)
    assert first.values[0] == 0.0
    assert first.label is PathLabel.FBM
    assert first.hurst == 0.75
    assert np.array_equal(first.values, again.values)
    assert not np.array_equal(first.values, other.values)


def test_batch_matches_single_calls(grid):
    seeds = [3, 11, 42]
    batch = generate_batch(0.8, grid, seeds)
    for seed, path in zip(seeds, batch):
        assert np.array_equal(path.values, generate_circulant(0.8, grid, seed).values)


def test_unknown_generator(grid):
    with pytest.raises(DomainError):
        generate_fbm(0.75, grid, 0, "hosking")


def test_cholesky_warns_above_reference_size(caplog):
    with caplog.at_level(logging.WARNING, logger="fbm_gen"):
        generate_cholesky(0.75, TimeGrid(1.0, fbm_gen.CHOLESKY_REFERENCE_MAX_STEPS + 1), 0)
    assert any("circulant" in record.message for record in caplog.records)


@patch("fbm_gen.lapack.dpotrf")
def test_cholesky_failure_reports_pivot(mock_dpotrf):
    mock_dpotrf.return_value = (np.zeros((4, 4)), 3)
    with pytest.raises(NumericalInstabilityError) as info:
        generate_cholesky(0.75, TimeGrid(1.0, 4), 0)
    assert info.value.pivot == 3
    assert "pivot 3" in str(info.value)


def test_circulant_rejects_negative_spectrum():
    def indefinite(H, dt, lags):
        gamma = np.zeros(len(lags))
        gamma[0], gamma[1] = 1.0, 2.0
        return gamma

    with patch("fbm_gen.fgn_autocovariance", side_effect=indefinite):
        with pytest.raises(CirculantEmbeddingError) as info:
            generate_circulant(0.75, TimeGrid(1.0, 16), 0)
    assert "generate_cholesky" in str(info.value)


def test_circulant_covariance_small_sample():
    grid = TimeGrid(1.0, 16)
    paths = generate_batch(0.75, grid, range(4000))
    for i, j in [(16, 16), (16, 8), (4, 12)]:
        mean, se = empirical_covariance(paths, i, j)
        assert abs(mean - fbm_covariance(0.75, grid.times[i], grid.times[j])) < 5 * se


def test_generators_agree_in_law():
    grid = TimeGrid(1.0, 32)
    circulant = [p.values[-1] for p in generate_batch(0.9, grid, range(3000), "circulant")]
    cholesky = [p.values[-1] for p in generate_batch(0.9, grid, range(3000, 6000), "cholesky")]
    assert stats.ks_2samp(circulant, cholesky).pvalue > 1e-3


def test_brownian_increments_uncorrelated():
    grid = TimeGrid(1.0, 8)
    paths = generate_batch(0.5, grid, range(4000))
    mean, se = increment_covariance(paths, 2, 5)
    assert abs(mean) < 5 * se
    mean, se = increment_covariance(paths, 3, 3)
    assert abs(mean - grid.dt) < 5 * se


def test_covariance_needs_two_paths(grid):
    with pytest.raises(DomainError):
        empirical_covariance([generate_fbm(0.75, grid, 0)], 1, 1)


def test_holder_norm_of_identity():
    path = SamplePath.from_function(TimeGrid(1.0, 100), lambda t: t)
    assert holder_norm(path, 0.5) == pytest.approx(2.0, abs=1e-12)


def test_holder_norm_constant_and_bounds():
    path = SamplePath.from_function(TimeGrid(1.0, 10), lambda t: np.full_like(t, -3.0))
    assert holder_norm(path, 0.6) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        holder_norm(path, 0.6, 5, 5)
    with pytest.raises(DomainError):
        holder_norm(path, 1.2)


def test_sample_path_validation(grid):
    with pytest.raises(DomainError):
        SamplePath(grid, np.zeros(grid.N))
    with pytest.raises(DomainError):
        SamplePath(grid, np.ones(grid.N + 1), PathLabel.FBM)
    path = SamplePath(grid, np.zeros(grid.N + 1))
    with pytest.raises(ValueError):
        path.values[0] = 1.0


def test_coarsen_keeps_nested_nodes():
    path = generate_fbm(0.75, TimeGrid(1.0, 8), 1)
    coarse = path.coarsen(2)
    assert coarse.grid == TimeGrid(1.0, 4)
    assert np.array_equal(coarse.values, path.values[::2])
    assert coarse.label is PathLabel.FBM
    with pytest.raises(DomainError):
        path.coarsen(3)


def test_write_csv_is_repeatable(tmp_path):
    path = generate_fbm(0.75, TimeGrid(1.0, 10), 5)
    target = tmp_path / "fbm.csv"
    path.write_csv(str(target))
    first = target.read_bytes()
    path.write_csv(str(target))
    assert target.read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 12


def test_holder_exponent_estimates():
    fbm = generate_fbm(0.75, TimeGrid(1.0, 4096), 2024)
    assert estimate_holder_exponent(fbm) == pytest.approx(0.75, abs=0.1)
    linear = SamplePath.from_function(TimeGrid(1.0, 256), lambda t: 3 * t)
    assert estimate_holder_exponent(linear) == pytest.approx(1.0, abs=1e-6)


def test_covariance_at_origin_vanishes(grid):
    paths = generate_batch(0.75, grid, range(5))
    assert empirical_covariance(paths, 0, 0) == (0.0, 0.0)


def test_holder_norm_grows_under_refinement():
    fine = generate_fbm(0.75, TimeGrid(1.0, 256), 9)
    assert holder_norm(fine.coarsen(2), 0.6) <= holder_norm(fine, 0.6)


def test_cholesky_brownian_variance_at_horizon():
    paths = generate_batch(0.5, TimeGrid(1.0, 128), range(4000), "cholesky")
    mean, se = empirical_covariance(paths, 128, 128)
    assert abs(mean - 1.0) < 4 * se


def test_cholesky_covariance_midpoint_and_horizon():
    grid = TimeGrid(1.0, 64)
    paths = generate_batch(0.75, grid, range(4000), "cholesky")
    mean, se = empirical_covariance(paths, 32, 64)
    assert fbm_covariance(0.75, 0.5, 1.0) == pytest.approx(0.5)
    assert abs(mean - 0.5) < 4 * se


@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_horizon_rescales_paths_by_c_to_the_h(method):
    H, c = 0.75, 4.0
    unit = generate_fbm(H, TimeGrid(1.0, 32), 5, method)
    stretched = generate_fbm(H, TimeGrid(c, 32), 5, method)
    assert np.allclose(stretched.values, c ** H * unit.values, rtol=1e-10, atol=1e-12)


def test_self_similar_variance():
    H, c, N = 0.75, 4.0, 16
    long_run = generate_batch(H, TimeGrid(c, N), range(4000))
    unit = generate_batch(H, TimeGrid(1.0, N), range(4000, 8000))
    for i in (N // 2, N):
        var_c, se_c = empirical_covariance(long_run, i, i)
        var_1, se_1 = empirical_covariance(unit, i, i)
        scale = c ** (2 * H)
        z = abs(var_c / scale - var_1) / np.hypot(se_c / scale, se_1)
        assert z < 4


def test_factor_caches_are_bounded():
    size = fbm_gen.FACTOR_CACHE_SIZE
    for N in range(4, 4 + size + 3):
        generate_circulant(0.75, TimeGrid(1.0, N), 0)
    info = fbm_gen._circulant_sqrt_spectrum.cache_info()
    assert info.maxsize == size
    assert info.currsize == size
    generate_circulant(0.75, TimeGrid(1.0, 4 + size + 2), 1)
    assert fbm_gen._circulant_sqrt_spectrum.cache_info().hits == info.hits + 1


def test_cached_factors_are_read_only():
    generate_cholesky(0.75, TimeGrid(1.0, 8), 0)
    factor = fbm_gen._cholesky_factor(0.75, 1.0, 8)
    with pytest.raises(ValueError):
        factor[0, 0] = 1.0

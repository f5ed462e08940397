import sys
import os

import numpy as np
import pytest

# 将项目根目录添加到 python 路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from choquet.exceptions import MeasureFormatError, ShapeError
from choquet.measures import (
    EmpiricalMeasure,
    Sampler,
    benchmark_staircase,
    discrete_measure,
    eight_gaussian_means,
    energy_distance,
    from_csv,
    mean_preserving_spread,
    moments,
    sample_batch,
)
from choquet.net import make_rng


def test_uniform_sampler_stays_in_box():
    samples = Sampler.uniform([0.0], [1.0], seed=3).draw(10_000)
    assert samples.shape == (10_000, 1)
    assert samples.min() >= 0.0 and samples.max() <= 1.0


def test_samplers_are_reproducible():
    for build in (
        lambda: Sampler.uniform([-1.0, -1.0], [1.0, 1.0], seed=5),
        lambda: Sampler.eight_gaussians(seed=5),
        lambda: Sampler.swiss_roll(seed=5),
        lambda: Sampler.gaussian(3, seed=5),
    ):
        assert np.array_equal(build().draw(64), build().draw(64))


def test_sampler_rejects_empty_draw():
    with pytest.raises(ValueError):
        Sampler.portfolio(0).draw(0)


def test_swiss_roll_fits_half_width():
    samples = Sampler.swiss_roll(seed=1, noise=0.0, half_width=2.0).draw(5_000)
    assert np.abs(samples).max() <= 2.0 + 1e-12
    radii = np.linalg.norm(samples, axis=1)
    assert radii.min() >= 2.0 * (1.5 / 4.5) - 1e-12


def test_eight_gaussians_cluster_on_circle():
    samples = Sampler.eight_gaussians(seed=2, radius=2.0, sigma=0.02).draw(4_000)
    means = eight_gaussian_means(2.0)
    nearest = np.min(np.linalg.norm(samples[:, None, :] - means[None, :, :], axis=2), axis=1)
    assert nearest.max() < 0.2
    assert np.allclose(np.linalg.norm(means, axis=1), 2.0)


def test_pushforward_sampler():
    base = Sampler.gaussian(2, seed=4)
    pushed = Sampler.pushforward(lambda z: 2.0 * z + 1.0, base)
    reference = 2.0 * Sampler.gaussian(2, seed=4).draw(16) + 1.0
    assert np.allclose(pushed.draw(16), reference)


def test_measure_validation():
    with pytest.raises(ShapeError):
        EmpiricalMeasure.from_points(np.zeros((0, 2)))
    with pytest.raises(MeasureFormatError):
        EmpiricalMeasure(np.zeros((2, 1)), np.array([0.5, 0.6]), np.zeros(1), np.zeros(1))
    with pytest.raises(MeasureFormatError):
        EmpiricalMeasure.from_points(np.array([[2.0]]), upper=[1.0])
    measure = EmpiricalMeasure.from_points([[0.0, 1.0], [2.0, 3.0]], weights=[1.0, 3.0])
    assert np.allclose(measure.weights, [0.25, 0.75])
    with pytest.raises(ValueError):
        measure.points[0, 0] = 5.0


def test_subsample_and_union_support():
    first = discrete_measure([0.0, 1.0, 2.0])
    second = discrete_measure([1.0, 3.0], [0.5, 0.5])
    atoms = first.union_support(second)
    assert np.array_equal(atoms, [0.0, 1.0, 2.0, 3.0])
    assert np.allclose(second.mass_at(atoms), [0.0, 0.5, 0.0, 0.5])

    sub = first.subsample(2, make_rng(0))
    assert sub.size == 2 and sub.dim == 1
    assert set(sub.points[:, 0]) <= {0.0, 1.0, 2.0}


def test_csv_with_three_rows(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text("0.0,1.0\n2.0,3.0\n-1.5,0.5\n", encoding="utf-8")
    measure = from_csv(str(path))
    assert measure.size == 3 and measure.dim == 2
    assert np.allclose(measure.weights, 1.0 / 3.0)


def test_csv_header_is_skipped(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text("x,y\n0.0,1.0\n2.0,3.0\n", encoding="utf-8")
    measure = from_csv(str(path))
    assert measure.size == 2
    assert np.allclose(measure.points[1], [2.0, 3.0])


def test_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(MeasureFormatError):
        from_csv(str(empty))

    letters = tmp_path / "letters.csv"
    letters.write_text("0.0,1.0\n2.0,3.0\n1.0,abc\n", encoding="utf-8")
    with pytest.raises(MeasureFormatError, match="line 3"):
        from_csv(str(letters))

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("0.0,1.0\n2.0\n", encoding="utf-8")
    with pytest.raises(MeasureFormatError, match="line 2"):
        from_csv(str(ragged))

    with pytest.raises(MeasureFormatError):
        from_csv(str(tmp_path / "missing.csv"))


def test_csv_written_by_measure_reads_back(tmp_path):
    measure = sample_batch(Sampler.gaussian(2, seed=9), 20)
    path = tmp_path / "samples.csv"
    measure.to_csv(str(path))
    assert np.allclose(from_csv(str(path)).points, measure.points, atol=1e-8)


def test_benchmark_staircase():
    assert benchmark_staircase(0.07) == pytest.approx(0.05)
    assert benchmark_staircase(0.0) == 0.0
    assert benchmark_staircase(1.0) == 1.0
    grid = (np.arange(20_000) + 0.5) / 20_000
    assert np.mean(benchmark_staircase(grid)) == pytest.approx(0.475, abs=1e-12)
    with pytest.raises(ValueError):
        benchmark_staircase(1.5)


def test_moments():
    mean, second = moments(discrete_measure([0.0]))
    assert np.allclose(mean, [0.0]) and second == 0.0

    mean, second = moments(discrete_measure([-1.0, 1.0]))
    assert np.allclose(mean, [0.0]) and second == pytest.approx(1.0)

    mean, second = moments(EmpiricalMeasure.from_points([[1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(mean, [0.5, 0.5]) and second == pytest.approx(1.0)


def test_energy_distance():
    a = sample_batch(Sampler.gaussian(2, seed=1), 200)
    b = sample_batch(Sampler.gaussian(2, mean=[1.0, 0.0], seed=2), 150)
    assert energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert energy_distance(discrete_measure([0.0]), discrete_measure([1.0])) == pytest.approx(2.0)
    assert energy_distance(a, b) == pytest.approx(energy_distance(b, a), abs=1e-12)
    assert energy_distance(a, b) > 0.0
    with pytest.raises(ShapeError):
        energy_distance(a, discrete_measure([0.0]))


def test_mean_preserving_spread():
    center = discrete_measure([0.0, 1.0], [0.25, 0.75])
    original, spread = mean_preserving_spread(center, 0.5)
    assert original is center
    assert np.allclose(moments(spread)[0], moments(center)[0])
    assert moments(spread)[1] == pytest.approx(moments(center)[1] + 0.25)

    cloud = sample_batch(Sampler.gaussian(3, seed=0), 10)
    _, spread = mean_preserving_spread(cloud, 0.2, make_rng(1))
    assert np.allclose(moments(spread)[0], moments(cloud)[0])
    assert moments(spread)[1] == pytest.approx(moments(cloud)[1] + 0.04)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

import sys
import os

import numpy as np
import pytest

# 将项目根目录添加到 python 路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from choquet.net import make_rng
from choquet.oracle import (
    BumpKernel,
    BumpMode,
    BumpSpec,
    analytic_same_mean,
    analytic_same_variance,
    bump_F_G,
    epanechnikov_cdf,
    sample_bump,
)

EPANECHNIKOV = BumpSpec(kernel=BumpKernel.EPANECHNIKOV)


@pytest.mark.parametrize("kernel", list(BumpKernel))
def test_density_normalization(kernel):
    spec = BumpSpec(kernel=kernel)
    assert spec.mass() == pytest.approx(1.0, abs=1e-12)
    assert spec.second_moment() == pytest.approx(spec.closed_form_variance(), abs=1e-8)
    assert spec.density(np.array([-1.5, 1.5])).tolist() == [0.0, 0.0]


def test_epanechnikov_cdf():
    np.testing.assert_allclose(epanechnikov_cdf([-2.0, -1.0, 0.0, 1.0, 2.0]), [0.0, 0.0, 0.5, 1.0, 1.0])


@pytest.mark.parametrize("kernel", list(BumpKernel))
def test_shift_mode_tail_integral(kernel):
    spec = BumpSpec(kernel=kernel)
    mode = BumpMode.shift(0.3)
    _, g_inf = bump_F_G(spec, mode, np.inf)
    assert g_inf == pytest.approx(0.3, abs=1e-4)
    for x in (-np.inf, np.inf):
        assert bump_F_G(spec, mode, x)[0] == pytest.approx(0.0, abs=1e-8)
    assert bump_F_G(spec, mode, 0.0)[1] == pytest.approx(0.0, abs=1e-12)


def test_scale_mode_tails():
    mode = BumpMode.scale(0.5)
    for x in (-np.inf, np.inf):
        assert bump_F_G(EPANECHNIKOV, mode, x)[0] == pytest.approx(0.0, abs=1e-8)
    assert bump_F_G(EPANECHNIKOV, mode, -np.inf)[1] == 0.0
    assert bump_F_G(EPANECHNIKOV, mode, 0.0)[1] == pytest.approx(3.0 / 32.0, abs=1e-8)


@pytest.mark.parametrize("kernel", list(BumpKernel))
@pytest.mark.parametrize("mode, base, nodes", [
    (BumpMode.shift(0.25), 80, (0.5, 1.0, np.inf)),
    (BumpMode.scale(0.5), 64, (0.0, 0.25, np.inf)),
])
def test_quadrature_converges_quadratically(kernel, mode, base, nodes):
    # 网格步长依次减半，所有不光滑点都落在网格上
    spec = BumpSpec(kernel=kernel)
    values = []
    for refine in (1, 2, 4):
        coarse = spec.model_copy(update={"points": base * refine + 1})
        values.append(np.array([bump_F_G(coarse, mode, x)[1] for x in nodes]))
    first_change = np.abs(values[1] - values[0])
    second_change = np.abs(values[2] - values[1])
    assert np.all(second_change <= first_change / 3.0 + 1e-12)


def test_same_variance_values():
    vdc, d_ct = analytic_same_variance(EPANECHNIKOV, 0.3, 1.0)
    assert vdc == pytest.approx(0.6, abs=1e-6)
    assert d_ct == pytest.approx(1.2, abs=1e-6)
    assert analytic_same_variance(EPANECHNIKOV, 0.0, 3.0) == (0.0, 0.0)
    doubled = analytic_same_variance(EPANECHNIKOV, 0.3, 2.0)
    assert doubled[0] == pytest.approx(2 * vdc) and doubled[1] == pytest.approx(2 * d_ct)
    with pytest.raises(ValueError):
        analytic_same_variance(EPANECHNIKOV, 0.3, 0.0)


def test_same_mean_contraction():
    result = analytic_same_mean(EPANECHNIKOV, 0.5, 1.0)
    assert result.vdc_pm == pytest.approx(0.1875, abs=1e-6)
    assert result.dct_pm == pytest.approx(0.1125, abs=1e-6)
    assert result.d_ct == pytest.approx(0.1875, abs=1e-6)
    assert not result.degenerate


def test_same_mean_expansion():
    result = analytic_same_mean(EPANECHNIKOV, 2.0, 1.0)
    assert result.vdc_pm == 0.0
    assert result.dct_pm == pytest.approx(0.3, abs=1e-6)
    # G(0) = 3(1-a)/16
    assert result.d_ct == pytest.approx(0.375, abs=1e-6)


def test_same_mean_identical_measures():
    result = analytic_same_mean(EPANECHNIKOV, 1.0, 1.0)
    assert result.degenerate
    assert (result.vdc_pm, result.dct_pm, result.d_ct) == (0.0, 0.0, 0.0)
    near = analytic_same_mean(EPANECHNIKOV, 0.999, 1.0)
    assert abs(near.vdc_pm) < 1e-3 and abs(near.dct_pm) < 1e-3


@pytest.mark.parametrize("kernel", list(BumpKernel))
def test_same_mean_matches_absolute_moment(kernel):
    # 2C·G(0) = C(1-a)·E|Y|
    spec = BumpSpec(kernel=kernel)
    result = analytic_same_mean(spec, 0.25, 2.0)
    assert result.vdc_pm == pytest.approx(2.0 * 0.75 * spec.closed_form_abs_mean(), abs=1e-6)


def test_sample_bump():
    rng = make_rng(0)
    plus, minus = sample_bump(EPANECHNIKOV, BumpMode.shift(0.3), 20_000, rng)
    assert plus.shape == (20_000, 1) and minus.shape == (20_000, 1)
    assert plus.mean() == pytest.approx(0.3, abs=0.02)
    assert minus.mean() == pytest.approx(-0.3, abs=0.02)
    assert plus.min() >= -0.7 and plus.max() <= 1.3

    plus, minus = sample_bump(EPANECHNIKOV, BumpMode.scale(0.5), 20_000, rng)
    assert np.abs(plus).max() <= 0.5
    assert np.var(plus) == pytest.approx(0.25 * 0.2, abs=0.005)
    assert np.var(minus) == pytest.approx(0.2, abs=0.01)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

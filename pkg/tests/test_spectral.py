import math

import numpy as np
import pytest

from bhchaos.spectral import (action_spectrum, counting_fluctuation,
                              fold_action, form_factor, mean_spacing_ratio,
                              rmt_form_factor, spacing_statistics, unfold)


def _goe_levels(rng, dim):
    A = rng.standard_normal((dim, dim))
    return np.linalg.eigvalsh((A + A.T) / 2)


def _poisson_spectra(rng, m, n):
    # unit-mean-spacing uncorrelated levels
    return [np.cumsum(rng.exponential(size=n)) for _ in range(m)]


def test_unfold_gives_unit_mean_spacing():
    rng = np.random.default_rng(0)
    spec = unfold(_goe_levels(rng, 600))
    assert abs(np.mean(spec.spacings) - 1.0) < 0.02
    assert len(spec.raw) == pytest.approx(0.7 * 600, abs=2)


def test_unfold_input_validation():
    with pytest.raises(ValueError):
        unfold(np.arange(10.0))
    with pytest.raises(ValueError):
        unfold(np.arange(100.0), poly_degree=1)


def test_smooth_count_tracks_staircase():
    rng = np.random.default_rng(1)
    levels = _goe_levels(rng, 500)
    spec = unfold(levels)
    mid = levels[250]
    assert abs(spec.smooth_count(mid) - 250) < 12
    fl = counting_fluctuation(spec, mid)
    assert abs(fl) < 12


def test_goe_spacing_ratio():
    rng = np.random.default_rng(2)
    levels = [_goe_levels(rng, 300) for _ in range(30)]
    r = mean_spacing_ratio(levels)
    assert abs(r - 0.5307) < 0.01


def test_poisson_spacing_ratio():
    rng = np.random.default_rng(3)
    r = mean_spacing_ratio(_poisson_spectra(rng, 40, 400))
    assert abs(r - (2 * math.log(2) - 1)) < 0.01


def test_spacing_statistics_histogram():
    rng = np.random.default_rng(4)
    spec = unfold(_goe_levels(rng, 600))
    out = spacing_statistics(spec)
    # level repulsion: vanishing weight at tiny spacing, unit normalization
    assert out["density"][0] < 0.3
    ds = np.diff(out["bin_edges"])
    assert abs(np.sum(out["density"] * ds) - 1.0) < 0.05


def test_rmt_form_factor_reference_values():
    # small-tau ramp: K/2tau -> 1
    tau = np.array([1e-3])
    assert abs(rmt_form_factor("GOE", tau)[0] / (2e-3) - 1.0) < 0.01
    # kink value at tau = 1 is 2 - ln 3, exactly
    assert abs(rmt_form_factor("GOE", np.array([1.0]))[0]
               - (2.0 - math.log(3.0))) < 1e-12
    # plateau
    assert abs(rmt_form_factor("GOE", np.array([1e4]))[0] - 1.0) < 1e-6
    assert rmt_form_factor("GUE", np.array([0.4]))[0] == pytest.approx(0.4)
    assert rmt_form_factor("GUE", np.array([3.0]))[0] == 1.0
    with pytest.raises(ValueError):
        rmt_form_factor("GSE", tau)
    with pytest.raises(ValueError):
        rmt_form_factor("GOE", np.array([-0.1]))


def test_form_factor_poisson_is_flat_unity():
    rng = np.random.default_rng(5)
    spectra = _poisson_spectra(rng, 300, 300)
    tau = np.linspace(0.3, 2.0, 12)
    ff = form_factor(spectra, tau)
    assert np.all(np.abs(ff.K - 1.0) < 4 * ff.K_err + 0.15)


def test_form_factor_goe_follows_ramp():
    rng = np.random.default_rng(6)
    spectra = [unfold(_goe_levels(rng, 300)) for _ in range(150)]
    tau = np.linspace(0.5, 2.0, 10)
    ff = form_factor(spectra, tau)
    ref = rmt_form_factor("GOE", tau)
    assert np.all(np.abs(ff.K - ref) < 3.5 * ff.K_err + 0.05)


def test_action_spectrum_recovers_synthetic_oscillation():
    n = np.arange(60, 261)
    S0 = 1.9
    y = 0.8 * np.cos(S0 * n + 0.3) + 0.002 * (n - 150.0) ** 2
    spec = action_spectrum(n, y)
    assert abs(spec.peaks[0] - S0) < 0.03


def test_action_spectrum_detrending_removes_background():
    n = np.arange(50, 171)
    y = 1e-3 * n ** 2 - 0.05 * n
    y2 = y + 0.5 * np.cos(2.4 * n)
    spec = action_spectrum(n, y2)
    assert abs(spec.peaks[0] - 2.4) < 0.05


def test_action_spectrum_grid_validation():
    with pytest.raises(ValueError):
        action_spectrum(np.array([1.0, 2.0, 4.0] * 10), np.zeros(30))
    with pytest.raises(ValueError):
        action_spectrum(np.arange(10.0), np.zeros(10))


def test_fold_action_aliasing():
    assert fold_action(1.0) == pytest.approx(1.0)
    assert fold_action(-1.0) == pytest.approx(1.0)
    assert fold_action(2 * math.pi - 0.7) == pytest.approx(0.7)
    assert fold_action(2 * math.pi + 0.3) == pytest.approx(0.3)
    assert fold_action(5.0) == pytest.approx(2 * math.pi - 5.0)

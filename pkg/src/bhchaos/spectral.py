"""Spectral post-processing: unfolding, spacing statistics, the spectral
form factor with analytic GOE/GUE references, and Fourier action
spectroscopy of density-of-states oscillations across particle number."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal


@dataclass
class UnfoldedSpectrum:
    raw: np.ndarray          # retained (central) raw levels
    unfolded: np.ndarray
    poly_degree: int
    poly_coeff: np.ndarray
    raw_full: np.ndarray     # all input levels, sorted
    fit_interval: tuple      # abscissa rescaling used by the fit

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.unfolded)

    def smooth_count(self, energy: float) -> float:
        lo, hi = self.fit_interval
        x = (2.0 * energy - (lo + hi)) / (hi - lo)
        return float(np.polynomial.polynomial.polyval(x, self.poly_coeff))


def unfold(levels, poly_degree: int = 9, keep_central: float = 0.7) -> UnfoldedSpectrum:
    """Map levels to unit mean spacing via a polynomial fit of the staircase.

    The fit uses the full spectrum; only the central fraction is returned,
    since edge states distort both the fit and universal statistics.
    """
    levels = np.sort(np.asarray(levels, dtype=float))
    n = len(levels)
    if n < 50:
        raise ValueError("need at least 50 levels to unfold")
    if not 3 <= poly_degree <= 15:
        raise ValueError("polynomial degree must lie in [3, 15]")
    counts = np.arange(n) + 0.5
    # rescale abscissa to [-1, 1] to keep the normal equations well conditioned
    lo, hi = levels[0], levels[-1]
    x = (2.0 * levels - (lo + hi)) / (hi - lo)
    coeff = np.polynomial.polynomial.polyfit(x, counts, poly_degree)
    smooth = np.polynomial.polynomial.polyval(x, coeff)
    if keep_central < 1.0:
        drop = int(round(0.5 * (1.0 - keep_central) * n))
        sl = slice(drop, n - drop if drop else n)
    else:
        sl = slice(None)
    # tolerate sub-spacing wiggles of the fit in the retained window;
    # reject genuine folds (edges are discarded anyway)
    if len(smooth[sl]) > 1 and np.min(np.diff(smooth[sl])) < -1.0:
        raise ValueError("unfolding fit is non-monotone; lower the degree")
    return UnfoldedSpectrum(raw=levels[sl], unfolded=smooth[sl],
                            poly_degree=poly_degree, poly_coeff=coeff,
                            raw_full=levels, fit_interval=(lo, hi))


def counting_fluctuation(spectrum: UnfoldedSpectrum, energy: float) -> float:
    """N(E) - N_smooth(E): the oscillatory part of the level staircase."""
    exact = float(np.searchsorted(spectrum.raw_full, energy))
    return exact - spectrum.smooth_count(energy)


@dataclass
class FormFactorEstimate:
    tau: np.ndarray
    K: np.ndarray
    K_err: np.ndarray
    ensemble_size: int


def _window_weights(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "gaussian":
        c = 0.5 * (x[0] + x[-1])
        s = 0.25 * (x[-1] - x[0])
        return np.exp(-0.5 * ((x - c) / s) ** 2)
    if kind == "flat":
        return np.ones_like(x)
    raise ValueError(f"unknown spectral window {kind!r}")


def form_factor(unfolded_spectra, tau_grid, window: str = "gaussian") -> FormFactorEstimate:
    """Windowed, connected form-factor estimate with jackknife error bars.

    K(tau) = < |sum_k w_k e^{2 pi i tau x_k}|^2 - |<...>|^2 > / <sum w^2>.
    Subtracting the ensemble-coherent part removes the residual mean-density
    peak so a Poisson ensemble averages to 1 at all tau of interest.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    spectra = list(unfolded_spectra)
    if len(spectra) == 0:
        raise ValueError("empty ensemble")
    z = np.empty((len(spectra), len(tau_grid)), dtype=complex)
    w2 = np.empty(len(spectra))
    for m, s in enumerate(spectra):
        x = s.unfolded if isinstance(s, UnfoldedSpectrum) else np.asarray(s, float)
        w = _window_weights(x, window)
        z[m] = (w[None, :] * np.exp(2j * np.pi * np.outer(tau_grid, x))).sum(axis=1)
        w2[m] = np.sum(w * w)
    M = len(spectra)
    zbar = z.mean(axis=0)
    K_full = (np.abs(z) ** 2 - np.abs(zbar[None, :]) ** 2) / w2.mean()
    K = K_full.mean(axis=0)
    if M > 1:
        # jackknife over ensemble members
        jack = np.empty((M, len(tau_grid)))
        for m in range(M):
            keep = np.arange(M) != m
            zb = z[keep].mean(axis=0)
            jack[m] = ((np.abs(z[keep]) ** 2 - np.abs(zb[None, :]) ** 2)
                       / w2[keep].mean()).mean(axis=0)
        K_err = np.sqrt((M - 1) * np.var(jack, axis=0))
    else:
        K_err = np.full_like(K, np.nan)
    return FormFactorEstimate(tau=tau_grid, K=K, K_err=K_err, ensemble_size=M)


def rmt_form_factor(symmetry: str, tau) -> np.ndarray:
    """Analytic RMT form factor references.

    GOE: 2 tau - tau ln(1 + 2 tau) below tau=1, then
         2 - tau ln((2 tau + 1)/(2 tau - 1)).
    GUE: ramp-plateau min(tau, 1).
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    if symmetry == "GUE":
        return np.minimum(tau, 1.0)
    if symmetry != "GOE":
        raise ValueError(f"unknown symmetry class {symmetry!r}")
    out = np.empty_like(tau)
    lo = tau <= 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[lo] = 2.0 * tau[lo] - tau[lo] * np.log1p(2.0 * tau[lo])
        t = tau[~lo]
        out[~lo] = 2.0 - t * np.log((2.0 * t + 1.0) / (2.0 * t - 1.0))
    return out if out.shape else float(out)


def spacing_statistics(spectrum_or_spacings, bins: int = 40, s_max: float = 4.0):
    """P(s) histogram plus the mean consecutive-spacing ratio r."""
    if isinstance(spectrum_or_spacings, UnfoldedSpectrum):
        s = spectrum_or_spacings.spacings
    else:
        s = np.asarray(spectrum_or_spacings, dtype=float)
    if len(s) < 199:
        raise ValueError("need at least 200 unfolded levels")
    hist, edges = np.histogram(s, bins=bins, range=(0.0, s_max), density=True)
    r = np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:])
    return {"bin_edges": edges, "density": hist, "mean_ratio": float(np.mean(r))}


def mean_spacing_ratio(levels_list) -> float:
    """Mean r over an ensemble of raw spectra (unfolding-free diagnostic)."""
    rs = []
    for levels in levels_list:
        s = np.diff(np.sort(np.asarray(levels, float)))
        s = s[s > 0]
        rs.append(np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:]))
    return float(np.mean(np.concatenate(rs)))


@dataclass
class ActionSpectrum:
    actions: np.ndarray  # conjugate variable of the particle-number scan
    amplitude: np.ndarray
    peaks: np.ndarray  # peak positions
    peak_heights: np.ndarray


def action_spectrum(n_values, fluctuation, window: str = "hann",
                    pad_factor: int = 8, detrend_degree: int = 3) -> ActionSpectrum:
    """Fourier transform of density-of-states fluctuations across N.

    Oscillations e^{i N S} show up as peaks at S in [0, pi] (N advances in
    integer steps, so larger actions alias).  A low-order polynomial trend is
    removed first; peak positions are therefore invariant under any smooth
    background.
    """
    n_values = np.asarray(n_values, dtype=float)
    y = np.asarray(fluctuation, dtype=float)
    if len(n_values) < 20:
        raise ValueError("need at least 20 particle-number samples")
    dn = np.diff(n_values)
    if not np.allclose(dn, dn[0]):
        raise ValueError("particle-number grid must be uniform")
    step = dn[0]
    coeff = np.polynomial.polynomial.polyfit(n_values, y, detrend_degree)
    y = y - np.polynomial.polynomial.polyval(n_values, coeff)
    if window == "hann":
        y = y * np.hanning(len(y))
    elif window != "flat":
        raise ValueError(f"unknown window {window!r}")
    n_fft = pad_factor * len(y)
    amp = np.abs(np.fft.rfft(y, n=n_fft))
    S = 2.0 * np.pi * np.fft.rfftfreq(n_fft, d=step)
    idx, props = scipy.signal.find_peaks(amp, height=0.2 * amp.max())
    order = np.argsort(props["peak_heights"])[::-1]
    return ActionSpectrum(actions=S, amplitude=amp,
                          peaks=S[idx][order], peak_heights=props["peak_heights"][order])


def fold_action(S: float) -> float:
    """Alias an action into the observable band [0, pi] of an integer-N scan."""
    s = abs(S) % (2.0 * np.pi)
    return min(s, 2.0 * np.pi - s)

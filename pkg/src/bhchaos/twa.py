"""Truncated Wigner approximation.

Coherent initial states are sampled from their (Gaussian, positive) Wigner
distribution in unscaled field variables, every sample is transported by the
mean-field flow, and observables are averaged as Weyl symbols.  Number
observables therefore carry the -1/2 ordering shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .hamiltonian import BoseHubbardParams, classical_gradient
from .meanfield import hopping_matrix


@dataclass(frozen=True)
class WignerEnsemble:
    samples: np.ndarray  # (count, L) complex, unscaled amplitudes
    center: np.ndarray
    seed: int

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]


def sample_wigner_coherent(psi0, count: int, seed: int) -> WignerEnsemble:
    """Wigner samples of the coherent state centered at the unscaled field psi0.

    Psi_i = psi0_i + (eta_i + i xi_i)/2 with standard normal eta, xi: variance
    1/4 per quadrature of Psi, i.e. the exact coherent-state Wigner spread.
    """
    if count < 1:
        raise ValueError("need at least one sample")
    psi0 = np.asarray(psi0, dtype=complex)
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal((count, psi0.size))
    xi = rng.standard_normal((count, psi0.size))
    return WignerEnsemble(samples=psi0[None, :] + 0.5 * (eta + 1j * xi),
                          center=psi0, seed=seed)


def occupation_symbol(fields: np.ndarray) -> np.ndarray:
    """Weyl symbol of the site occupations: |Psi|^2 - 1/2."""
    return np.abs(fields) ** 2 - 0.5


def _stacked_rhs(params: BoseHubbardParams):
    h = hopping_matrix(params)
    U = params.U
    L = params.L

    def f(t, y):
        psi = y.reshape(-1, L)
        g = psi @ h.T + U * np.abs(psi) ** 2 * psi
        return (-1j * g).ravel()

    return f


@dataclass
class TwaSeries:
    times: np.ndarray
    mean: np.ndarray    # (len(times), n_observables)
    stderr: np.ndarray
    sample_count: int
    dropped: int


def twa_expectation(params: BoseHubbardParams, ensemble: WignerEnsemble,
                    observable, t_grid, tol: float = 1e-9,
                    chunk: int = 256) -> TwaSeries:
    """Ensemble mean of a Weyl-symbol observable under mean-field transport.

    ``observable(fields)`` maps a (count, L) array of unscaled fields to a
    (count, k) array of symbol values.  Samples whose integration fails are
    dropped and counted; more than 1% drops aborts the run.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    samples = ensemble.samples
    count, L = samples.shape
    rhs = _stacked_rhs(params)

    test = np.atleast_2d(observable(samples[:1]))
    k = test.shape[1]
    acc = np.zeros((len(t_grid), k))
    acc2 = np.zeros((len(t_grid), k))
    dropped = 0
    kept = 0
    for lo in range(0, count, chunk):
        block = samples[lo: lo + chunk]
        y0 = block.ravel()
        sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), y0, t_eval=t_grid,
                        method="DOP853", rtol=tol, atol=tol)
        if not sol.success:
            # fall back to per-sample integration so one bad draw cannot
            # poison a whole chunk
            for s in block:
                ssol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), s,
                                 t_eval=t_grid, method="DOP853",
                                 rtol=tol, atol=tol)
                if not ssol.success:
                    dropped += 1
                    continue
                vals = np.array([np.atleast_2d(observable(f[None, :]))[0]
                                 for f in ssol.y.T])
                acc += vals
                acc2 += vals ** 2
                kept += 1
            continue
        fields = sol.y.T.reshape(len(t_grid), -1, L)
        for m in range(fields.shape[1]):
            vals = np.atleast_2d(observable(fields[:, m, :]))
            acc += vals
            acc2 += vals ** 2
        kept += fields.shape[1]
    if dropped > 0.01 * count:
        raise RuntimeError(f"{dropped}/{count} samples failed to integrate")
    mean = acc / kept
    var = np.maximum(acc2 / kept - mean ** 2, 0.0)
    stderr = np.sqrt(var / kept)
    return TwaSeries(times=t_grid, mean=mean, stderr=stderr,
                     sample_count=kept, dropped=dropped)


def twa_occupations(params: BoseHubbardParams, psi0, t_grid, sample_count: int,
                    seed: int, tol: float = 1e-9) -> TwaSeries:
    """Convenience wrapper: TWA site occupations from a coherent state."""
    ens = sample_wigner_coherent(psi0, sample_count, seed)
    return twa_expectation(params, ens, occupation_symbol, t_grid, tol=tol)

"""Exact quantum time evolution in a fixed-N sector.

The workhorse is an adaptive short-time Lanczos (Hermitian Krylov)
propagator; a dense eigendecomposition oracle is kept in-tree as ground
truth for small sectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .fock import FockBasis, StateVector, basis_state
from .hamiltonian import SparseHamiltonian

DENSE_CAP = 20_000


class PropagationError(RuntimeError):
    pass


@dataclass
class PropagationReport:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)
    krylov_dim_max: int
    n_steps: int
    error_estimate: float
    norm_drift: float
    energy_drift: float


def _lanczos_step(matvec, v, dt, m_max, tol):
    """One Krylov step: returns exp(-i H dt) v approx, error estimate, m used.

    The local error is estimated from the magnitude of the last Krylov
    component of the propagated small-matrix exponential.
    """
    dim = v.shape[0]
    m_max = min(m_max, dim)
    V = np.empty((m_max, dim), dtype=complex)
    alpha = np.empty(m_max)
    beta = np.empty(m_max)
    nrm = np.linalg.norm(v)
    V[0] = v / nrm
    w = matvec(V[0])
    alpha[0] = np.real(np.vdot(V[0], w))
    w = w - alpha[0] * V[0]
    m_used = m_max
    happy = False
    for j in range(1, m_max):
        beta[j - 1] = np.linalg.norm(w)
        if beta[j - 1] < 1e-14:
            m_used = j
            happy = True
            break
        V[j] = w / beta[j - 1]
        w = matvec(V[j])
        alpha[j] = np.real(np.vdot(V[j], w))
        w = w - alpha[j] * V[j] - beta[j - 1] * V[j - 1]
        # full reorthogonalization keeps long propagations at 1e-12 accuracy
        corr = V[: j + 1].conj() @ w
        w = w - corr @ V[: j + 1]

    m = m_used
    beta_next = 0.0 if happy else float(np.linalg.norm(w))
    T = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    evals, evecs = la.eigh(T)
    small = evecs @ (np.exp(-1j * dt * evals) * evecs[0])
    out = nrm * (small @ V[:m])
    # a-posteriori residual estimate (Saad): coupling out of the subspace
    # times the weight the propagated vector puts on the last Krylov vector
    err = nrm * beta_next * abs(small[-1]) * abs(dt)
    return out, err, m


def evolve(H: SparseHamiltonian, v0, t_grid, tol: float = 1e-10,
           m_max: int = 64) -> PropagationReport:
    """Propagate v0 through exp(-i H t) on all grid times (forward or backward).

    Grid times may start anywhere; propagation is incremental between
    consecutive grid points with adaptive sub-stepping so each local Krylov
    error estimate stays below tol.
    """
    if isinstance(v0, StateVector):
        v0 = v0.amp
    v0 = np.asarray(v0, dtype=complex)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if tol <= 0:
        raise ValueError("tol must be positive")

    matvec = H.matrix.__matmul__
    states = np.empty((len(t_grid), v0.shape[0]), dtype=complex)
    if np.linalg.norm(v0) == 0.0:
        states[:] = 0.0
        return PropagationReport(times=t_grid, states=states, krylov_dim_max=0,
                                 n_steps=0, error_estimate=0.0, norm_drift=0.0,
                                 energy_drift=0.0)
    v = v0.copy()
    t = 0.0
    # spectral scale (max row sum bounds ||H||) sets the initial step size
    scale = float(abs(H.matrix).sum(axis=1).max()) or 1.0
    dt_try = min(1.0, 2.0 * m_max / scale)

    total_span = abs(t_grid[0]) + float(np.abs(np.diff(t_grid)).sum()) or 1.0
    err_acc = 0.0
    n_steps = 0
    m_seen = 0
    E0 = H.expectation(v0) / max(np.vdot(v0, v0).real, 1e-300)
    for k, tk in enumerate(t_grid):
        span = tk - t
        direction = np.sign(span) if span != 0 else 1.0
        remaining = abs(span)
        while remaining > 1e-14:
            dt = min(dt_try, remaining)
            budget = tol * dt / total_span  # local budget -> ~tol accumulated
            for attempt in range(60):
                w, err, m = _lanczos_step(matvec, v, direction * dt, m_max, tol)
                if err <= budget or dt < 1e-12:
                    break
                dt *= 0.5
                budget = tol * dt / total_span
            else:
                raise PropagationError("Lanczos step failed to converge")
            v = w
            err_acc += err
            remaining -= dt
            n_steps += 1
            m_seen = max(m_seen, m)
            if err < 0.1 * budget:
                dt_try = min(dt * 1.5, 10.0)
            else:
                dt_try = dt
        t = tk
        states[k] = v

    nrm0 = np.linalg.norm(v0)
    norm_drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - nrm0)))
    Ef = H.expectation(states[-1]) / max(np.vdot(states[-1], states[-1]).real, 1e-300)
    energy_scale = max(abs(E0), abs(H.matrix).sum(axis=1).max())
    energy_drift = abs(Ef - E0) / energy_scale
    return PropagationReport(
        times=t_grid, states=states, krylov_dim_max=m_seen, n_steps=n_steps,
        error_estimate=err_acc, norm_drift=norm_drift, energy_drift=energy_drift,
    )


def dense_evolve(H: SparseHamiltonian, v0, t_grid) -> np.ndarray:
    """Eigendecomposition oracle, exact up to dense diagonalization error."""
    if H.dim > 500:
        raise ValueError("dense oracle restricted to dim <= 500")
    if isinstance(v0, StateVector):
        v0 = v0.amp
    evals, evecs = la.eigh(H.dense())
    c = evecs.conj().T @ v0
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    phases = np.exp(-1j * np.outer(t_grid, evals))
    return (phases * c) @ evecs.T


def full_diagonalize(H: SparseHamiltonian, dense_cap: int = DENSE_CAP):
    """Eigenvalues (ascending) and eigenvectors (columns) of the sector."""
    if H.dim > dense_cap:
        raise ValueError(f"sector dimension {H.dim} exceeds dense cap {dense_cap}")
    evals, evecs = la.eigh(H.dense())
    return evals, evecs


def transition_probability(H: SparseHamiltonian, n_i, t, tol: float = 1e-10) -> np.ndarray:
    """P(n_i -> n_f, t) for every final basis state n_f."""
    v0 = basis_state(H.basis, n_i)
    rep = evolve(H, v0, [float(t)], tol=tol)
    return np.abs(rep.states[-1]) ** 2

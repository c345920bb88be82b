import numpy as np
import pytest

from bhchaos.dynamics import (dense_evolve, evolve, full_diagonalize,
                              transition_probability)
from bhchaos.fock import FockBasis, basis_state, projected_coherent_state
from bhchaos.hamiltonian import BoseHubbardParams, build_bose_hubbard


def _small_system(L=3, N=5, U=0.8, phi=0.25):
    p = BoseHubbardParams(L=L, N=N, U=U, phi=phi, e=tuple(0.1 * np.arange(L)))
    basis = FockBasis(L, N)
    return build_bose_hubbard(p, basis), basis


def test_krylov_matches_dense_oracle():
    H, basis = _small_system()
    rng = np.random.default_rng(3)
    v0 = rng.normal(size=H.dim) + 1j * rng.normal(size=H.dim)
    v0 /= np.linalg.norm(v0)
    t_grid = np.linspace(0.5, 12.0, 7)
    rep = evolve(H, v0, t_grid, tol=1e-12)
    ref = dense_evolve(H, v0, t_grid)
    assert np.max(np.abs(rep.states - ref)) < 1e-10


def test_backward_propagation_reverses():
    H, basis = _small_system()
    v0 = projected_coherent_state(np.ones(3) / np.sqrt(3), basis).amp
    fwd = evolve(H, v0, [7.0], tol=1e-12).states[-1]
    back = evolve(H, fwd, [-7.0], tol=1e-12).states[-1]
    assert np.max(np.abs(back - v0)) < 1e-10


def test_drift_diagnostics_are_small():
    H, basis = _small_system()
    v0 = projected_coherent_state(np.array([0.8, 0.5, 0.2]) /
                                  np.linalg.norm([0.8, 0.5, 0.2]), basis).amp
    rep = evolve(H, v0, np.linspace(1.0, 40.0, 10), tol=1e-11)
    assert rep.norm_drift < 1e-9
    assert rep.energy_drift < 1e-9
    assert rep.n_steps > 0 and rep.krylov_dim_max > 1


def test_zero_state_shortcircuit():
    H, basis = _small_system()
    rep = evolve(H, np.zeros(H.dim, complex), [1.0, 2.0])
    assert np.all(rep.states == 0)


def test_invalid_tolerance_rejected():
    H, basis = _small_system()
    with pytest.raises(ValueError):
        evolve(H, np.ones(H.dim, complex), [1.0], tol=0.0)


def test_dense_oracle_dimension_guard():
    p = BoseHubbardParams(L=4, N=14, U=0.5)
    H = build_bose_hubbard(p, FockBasis(4, 14))
    assert H.dim > 500
    with pytest.raises(ValueError):
        dense_evolve(H, np.ones(H.dim, complex), [1.0])


def test_full_diagonalize_agrees_with_numpy():
    H, basis = _small_system()
    evals, evecs = full_diagonalize(H)
    ref = np.linalg.eigvalsh(H.dense())
    assert np.allclose(evals, ref, atol=1e-10)
    resid = H.dense() @ evecs - evecs * evals
    assert np.max(np.abs(resid)) < 1e-10


def test_transition_probability_is_normalized():
    H, basis = _small_system()
    P = transition_probability(H, [2, 2, 1], 3.0)
    assert P.shape == (H.dim,)
    assert abs(P.sum() - 1.0) < 1e-9
    assert np.all(P >= 0)

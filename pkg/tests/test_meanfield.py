import math

import numpy as np
import pytest
import scipy.linalg as la

from bhchaos.hamiltonian import (BoseHubbardParams, classical_gradient,
                                 classical_symbol)
from bhchaos.meanfield import (c2r, ehrenfest_time, find_fixed_points,
                               find_periodic_mode, gpe_flow, hopping_matrix,
                               lyapunov_max, monodromy_matrix, orbit_action,
                               r2c, reduce_monodromy, symplectic_form,
                               tangent_flow, weyl_density)

UT_HYPER = 2.0 / math.pi  # scaled interaction with an analytic hyperbolic point


def test_hopping_matrix_topology():
    h = hopping_matrix(BoseHubbardParams(L=4, N=1, J=1.0))
    assert h[0, 1] != 0 and h[0, 3] != 0 and h[0, 2] == 0
    assert np.allclose(h, h.conj().T)
    h2 = hopping_matrix(BoseHubbardParams(L=4, N=1, J=1.0, geometry="chain"))
    assert h2[0, 3] == 0


def test_free_flow_matches_matrix_exponential():
    p = BoseHubbardParams(L=4, N=1, J=1.0, U=0.0, phi=0.2)
    h = hopping_matrix(p)
    rng = np.random.default_rng(0)
    psi0 = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi0 /= np.linalg.norm(psi0)
    t = 7.3
    out = gpe_flow(p, psi0, [0.0, t])[-1]
    ref = la.expm(-1j * h * t) @ psi0
    assert np.max(np.abs(out - ref)) < 1e-10


def test_flow_conserves_norm_and_energy():
    p = BoseHubbardParams(L=3, N=1, J=1.0, U=2.5)
    psi0 = np.array([0.8, 0.4 + 0.3j, -0.2j])
    psi0 /= np.linalg.norm(psi0)
    tr = gpe_flow(p, psi0, np.linspace(0.0, 50.0, 11))
    norms = np.linalg.norm(tr, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9
    E = [classical_symbol(p, psi) for psi in tr]
    assert np.max(np.abs(np.array(E) - E[0])) < 1e-9


def test_flow_is_reversible():
    p = BoseHubbardParams(L=3, N=1, U=1.7)
    psi0 = np.array([0.6, 0.5, 0.3 + 0.4j], complex)
    psi0 /= np.linalg.norm(psi0)
    fwd = gpe_flow(p, psi0, [0.0, 12.0])[-1]
    back = gpe_flow(p, fwd, [0.0, -12.0])[-1]
    assert np.max(np.abs(back - psi0)) < 1e-9


def test_tangent_flow_matches_trajectory_difference():
    p = BoseHubbardParams(L=3, N=1, U=1.2)
    psi0 = np.array([0.7, 0.5, 0.4 - 0.3j], complex)
    psi0 /= np.linalg.norm(psi0)
    d0 = np.array([1e-7, -2e-7j, 1e-7 + 1e-7j])
    T = 4.0
    psiT, dl = tangent_flow(p, psi0, d0, (0.0, T))
    ref = (gpe_flow(p, psi0 + d0, [0.0, T])[-1] -
           gpe_flow(p, psi0, [0.0, T])[-1])
    assert np.max(np.abs(dl[0] - ref)) < 1e-9


def test_symplectic_form_and_coordinate_maps():
    J = symplectic_form(3)
    assert np.allclose(J @ J, -np.eye(6))
    v = np.array([1.0 + 2.0j, -0.5j, 0.25])
    assert np.allclose(r2c(c2r(v)), v)


def test_hyperbolic_point_and_exponent():
    # 4-site ring at scaled interaction 2/pi: the staggered field
    # (0, 1, 0, -1)/sqrt2 is a relative equilibrium with exponent
    # sqrt(2 J Ut - Ut^2/...) -- located numerically, checked analytically
    p = BoseHubbardParams(L=4, N=1, J=1.0, U=UT_HYPER)
    psi_star = np.array([0.0, 1.0, 0.0, -1.0], complex) / np.sqrt(2.0)
    fps = find_fixed_points(p, [psi_star])
    assert len(fps) == 1
    fp = fps[0]
    assert fp.residual < 1e-10
    assert abs(fp.mu - UT_HYPER / 2.0) < 1e-10
    assert fp.stability_exponent == pytest.approx(0.15718, abs=2e-4)
    # spectrum: +lam (x2), 0 (x4), -lam (x2)
    assert np.sum(np.abs(fp.exponents) < 1e-6) == 4


def test_fixed_point_rejects_off_shell_solutions():
    # uniform field is a relative equilibrium for any interaction
    p = BoseHubbardParams(L=3, N=1, J=1.0, U=1.0)
    fps = find_fixed_points(p, [np.ones(3, complex)])
    assert len(fps) == 1
    assert abs(np.linalg.norm(fps[0].psi) - 1.0) < 1e-9


def test_lyapunov_matches_linear_exponent():
    p = BoseHubbardParams(L=4, N=1, J=1.0, U=UT_HYPER)
    psi_star = np.array([0.0, 1.0, 0.0, -1.0], complex) / np.sqrt(2.0)
    est = lyapunov_max(p, psi_star, T_total=60.0, renorm_dt=1.0, seed=1)
    assert est.lam == pytest.approx(0.157, abs=0.01)


def test_lyapunov_vanishes_at_stable_uniform_state():
    p = BoseHubbardParams(L=3, N=1, J=1.0, U=0.5)
    psi = np.ones(3, complex) / np.sqrt(3.0)
    est = lyapunov_max(p, psi, T_total=40.0, renorm_dt=1.0, seed=2)
    assert abs(est.lam) < 0.02


def _dimer_mode(utilde=3.0, rho1=0.85):
    # self-trapped dimer orbit: initial imbalance above the separatrix
    p = BoseHubbardParams(L=2, N=1, J=1.0, U=utilde)
    psi0 = np.array([math.sqrt(rho1), math.sqrt(1 - rho1)], complex)
    t_scan = np.linspace(0.05, 20.0, 4000)
    tr = gpe_flow(p, psi0, np.concatenate([[0.0], t_scan]))
    ov = tr[1:] @ psi0.conj()
    # first recurrence = fundamental period (the global overlap maximum may
    # sit on a higher repetition)
    k = next(i for i in range(1, len(t_scan) - 1)
             if abs(ov[i]) > max(abs(ov[i - 1]), abs(ov[i + 1]), 0.999))
    T_g = t_scan[k]
    mu_g = -np.angle(ov[k]) / T_g
    return p, find_periodic_mode(p, psi0, T_guess=T_g, mu_guess=mu_g)


def test_periodic_mode_closure_and_invariants():
    p, pm = _dimer_mode()
    assert pm.residual < 1e-9
    # relative-periodic closure over three periods
    chi = pm.mu_rot * pm.period
    out = gpe_flow(p, pm.psi0, [0.0, 3 * pm.period])[-1]
    assert np.max(np.abs(out - np.exp(-3j * chi) * pm.psi0)) < 1e-8
    assert pm.symplectic_defect < 1e-8


def test_periodic_mode_action_against_quadrature_oracle():
    # independent check: S = integral of Re(psi* (grad - mu psi)) dt on a
    # fine trapezoid grid
    p, pm = _dimer_mode()
    t = np.linspace(0.0, pm.period, 20001)
    tr = gpe_flow(p, pm.psi0, t, mu=pm.mu_rot)
    integrand = np.array(
        [np.sum((x.conj() * (classical_gradient(p, x) - pm.mu_rot * x)).real)
         for x in tr])
    ref = np.trapezoid(integrand, t)
    assert abs(pm.action - ref) < 1e-6


def test_monodromy_trivial_directions():
    p, pm = _dimer_mode()
    M = pm.monodromy
    # flow direction and gauge direction are eigenvectors at eigenvalue 1
    from bhchaos.hamiltonian import classical_gradient as grad
    f = c2r(-1j * (grad(p, pm.psi0) - pm.mu_rot * pm.psi0))
    g = c2r(1j * pm.psi0)
    assert np.max(np.abs(M @ f - f)) < 1e-7 * max(1.0, np.linalg.norm(f))
    assert np.max(np.abs(M @ g - g)) < 1e-7


def test_reduced_monodromy_is_symplectic():
    p, pm = _dimer_mode()
    M_red, defect = reduce_monodromy(pm.monodromy, pm.psi0)
    assert M_red.shape == (2, 2)
    assert defect < 1e-8
    # integrable orbit: parabolic block, |trace| = 2 up to drift terms
    assert abs(abs(np.linalg.eigvals(M_red)).max() - 1.0) < 1e-4


def test_weyl_density_normalization():
    # integral of the smooth density over energy = leading-order phase-space
    # volume of the shell, N^(L-1)/(L-1)!  (the exact sector dimension picks
    # up subleading zero-point corrections)
    p = BoseHubbardParams(L=3, N=10, J=1.0, U=0.3)
    E = np.linspace(-25.0, 40.0, 400)
    rho, err = weyl_density(p, E, 40_000, seed=3)
    total = np.trapezoid(rho, E)
    ref = 10.0 ** 2 / 2.0
    assert abs(total - ref) / ref < 0.03


def test_ehrenfest_time_scaling():
    lam = 0.2
    assert ehrenfest_time(lam, 100) == pytest.approx(math.log(100) / lam)
    assert (ehrenfest_time(lam, 400) - ehrenfest_time(lam, 100)
            == pytest.approx(math.log(4) / lam))
    with pytest.raises(ValueError):
        ehrenfest_time(-0.1, 100)
    with pytest.raises(ValueError):
        ehrenfest_time(0.2, 0.5)

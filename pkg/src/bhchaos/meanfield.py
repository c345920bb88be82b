"""Classical-limit engine for the lattice mean-field dynamics.

All routines integrate i dpsi/dt = dH_cl/dpsi* (optionally in a frame
rotating at chemical potential mu, i.e. with H_cl - mu*N).  Pass unit-norm
fields together with ``scaled_params`` (U -> U*N) for the intensive
convention, or raw fields with bare parameters for the TWA convention; the
equations are the same.

Real phase-space coordinates are x = (Re psi, Im psi); with the standard
symplectic form this differs from the (q, p) quadratures only by a uniform
sqrt(2), which drops out of every symplectic statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp, simpson

from .hamiltonian import BoseHubbardParams, classical_gradient, classical_symbol


# ---------------------------------------------------------------------------
# basic flow


def hopping_matrix(params: BoseHubbardParams) -> np.ndarray:
    h = np.diag(params.onsite).astype(complex)
    for (i, j) in params.bonds():
        h[i, j] += -params.J * np.exp(1j * params.phi)
        h[j, i] += -params.J * np.exp(-1j * params.phi)
    return h


def _rhs(params, mu):
    def f(t, psi):
        return -1j * (classical_gradient(params, psi) - mu * psi)
    return f


def gpe_flow(params: BoseHubbardParams, psi0, t_grid, tol: float = 1e-12,
             mu: float = 0.0, dense: bool = False):
    """Integrate the lattice GPE on a time grid (DOP853, adaptive).

    Returns the (len(t_grid), L) array of fields, or the full solver object
    when ``dense`` is set.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    sol = solve_ivp(_rhs(params, mu), (t_grid[0], t_grid[-1]), psi0,
                    t_eval=t_grid, method="DOP853", rtol=tol, atol=tol,
                    dense_output=dense)
    if not sol.success:
        raise RuntimeError(f"GPE integration failed: {sol.message}")
    return sol if dense else sol.y.T.copy()


def _tangent_rhs(params, mu):
    h = hopping_matrix(params)
    U = params.U
    L = params.L

    def f(t, y):
        psi = y[:L]
        dl = y[L:].reshape(-1, L)
        g = h @ psi + U * np.abs(psi) ** 2 * psi - mu * psi
        a = dl @ h.T + (2.0 * U * np.abs(psi) ** 2 - mu) * dl
        b = U * psi ** 2 * dl.conj()
        return np.concatenate([-1j * g, (-1j * (a + b)).ravel()])

    return f


def tangent_flow(params, psi0, deltas0, t_span, mu: float = 0.0,
                 tol: float = 1e-11):
    """Evolve the field together with a stack of tangent vectors."""
    psi0 = np.asarray(psi0, dtype=complex)
    deltas0 = np.atleast_2d(np.asarray(deltas0, dtype=complex))
    y0 = np.concatenate([psi0, deltas0.ravel()])
    sol = solve_ivp(_tangent_rhs(params, mu), t_span, y0, method="DOP853",
                    rtol=tol, atol=tol)
    if not sol.success:
        raise RuntimeError(f"tangent integration failed: {sol.message}")
    L = params.L
    yf = sol.y[:, -1]
    return yf[:L], yf[L:].reshape(-1, L)


def c2r(v: np.ndarray) -> np.ndarray:
    """Complex field(s) -> real phase-space coordinates (Re, Im)."""
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag], axis=-1)


def r2c(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    L = x.shape[-1] // 2
    return x[..., :L] + 1j * x[..., L:]


def symplectic_form(L: int) -> np.ndarray:
    J = np.zeros((2 * L, 2 * L))
    J[:L, L:] = np.eye(L)
    J[L:, :L] = -np.eye(L)
    return J


# ---------------------------------------------------------------------------
# Lyapunov


@dataclass
class LyapunovEstimate:
    lam: float
    series: np.ndarray  # running estimate after each renormalization
    renorm_dt: float
    converged: bool


def _project_out_gauge(delta: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Remove tangent components along the norm and global-phase directions."""
    for d in (psi, 1j * psi):
        d = d / np.linalg.norm(d)
        delta = delta - np.real(np.vdot(d, delta)) * d
    return delta


def lyapunov_max(params: BoseHubbardParams, psi0, T_total: float,
                 renorm_dt: float = 0.5, seed: int = 0,
                 tol: float = 1e-11) -> LyapunovEstimate:
    """Largest Lyapunov exponent by tangent-vector renormalization.

    The gauge (global phase) and norm directions carry no stretching and are
    projected out after every renormalization so they cannot pollute the
    estimate in nearly linear regimes.
    """
    psi = np.asarray(psi0, dtype=complex)
    rng = np.random.default_rng(seed)
    delta = rng.normal(size=params.L) + 1j * rng.normal(size=params.L)
    delta = _project_out_gauge(delta, psi)
    delta /= np.linalg.norm(delta)

    n_seg = int(round(T_total / renorm_dt))
    logsum = 0.0
    series = np.empty(n_seg)
    for k in range(n_seg):
        psi, dl = tangent_flow(params, psi, delta, (0.0, renorm_dt), tol=tol)
        delta = _project_out_gauge(dl[0], psi)
        growth = np.linalg.norm(delta)
        logsum += math.log(max(growth, 1e-300))
        delta /= growth
        series[k] = logsum / ((k + 1) * renorm_dt)
    lam = series[-1]
    tail = series[n_seg // 2:]
    spread = np.max(tail) - np.min(tail)
    converged = bool(spread <= 0.1 * max(abs(lam), 1e-3))
    return LyapunovEstimate(lam=float(lam), series=series,
                            renorm_dt=renorm_dt, converged=converged)


# ---------------------------------------------------------------------------
# fixed points and periodic mean-field modes


@dataclass
class FixedPoint:
    psi: np.ndarray
    mu: float
    residual: float
    exponents: np.ndarray  # real parts of linearization eigenvalues, sorted desc

    @property
    def stability_exponent(self) -> float:
        return float(self.exponents[0])


def _stability_matrix(params, psi, mu) -> np.ndarray:
    """Real Jacobian of the rotating-frame flow at psi (2L x 2L)."""
    L = params.L
    h = hopping_matrix(params)
    A = h + np.diag(2.0 * params.U * np.abs(psi) ** 2 - mu)
    B = np.diag(params.U * psi ** 2)
    # d/dt (delta) = -i (A delta + B delta*)
    K = np.zeros((2 * L, 2 * L))
    for k in range(L):
        e = np.zeros(L, complex)
        e[k] = 1.0
        col_re = -1j * (A @ e + B @ e.conj())
        col_im = -1j * (A @ (1j * e) + B @ (1j * e).conj())
        K[:L, k], K[L:, k] = col_re.real, col_re.imag
        K[:L, L + k], K[L:, L + k] = col_im.real, col_im.imag
    return K


def find_fixed_points(params: BoseHubbardParams, guesses, tol: float = 1e-12,
                      max_iter: int = 200) -> list[FixedPoint]:
    """Relative equilibria dH_cl/dpsi* = mu psi on the unit-norm shell."""
    out = []
    for guess in guesses:
        psi = np.asarray(guess, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        mu = float(np.real(np.vdot(psi, classical_gradient(params, psi))))
        ok = False
        for _ in range(max_iter):
            g = classical_gradient(params, psi) - mu * psi
            res = np.linalg.norm(g) + abs(np.vdot(psi, psi).real - 1.0)
            if res < tol:
                ok = True
                break
            anchor = int(np.argmax(np.abs(psi)))
            L = params.L
            # rows: Re/Im of gradient equation, norm, phase gauge
            Jac = np.zeros((2 * L + 2, 2 * L + 1))
            F = np.zeros(2 * L + 2)
            K = _stability_matrix(params, psi, mu)  # = J * Hessian action
            # gradient equation derivative: d(g)/dx = i * K action in complex form;
            # build directly from complex linearization instead
            h = hopping_matrix(params)
            A = h + np.diag(2.0 * params.U * np.abs(psi) ** 2) - mu * np.eye(L)
            B = np.diag(params.U * psi ** 2)
            for k in range(L):
                e = np.zeros(L, complex)
                e[k] = 1.0
                for col, d in ((k, e), (L + k, 1j * e)):
                    dg = A @ d + B @ d.conj()
                    Jac[:L, col] = dg.real
                    Jac[L:2 * L, col] = dg.imag
            Jac[:L, 2 * L] = (-psi).real
            Jac[L:2 * L, 2 * L] = (-psi).imag
            Jac[2 * L, :L] = 2.0 * psi.real
            Jac[2 * L, L:2 * L] = 2.0 * psi.imag
            Jac[2 * L + 1, L + anchor] = 1.0
            F[:L] = g.real
            F[L:2 * L] = g.imag
            F[2 * L] = np.vdot(psi, psi).real - 1.0
            F[2 * L + 1] = psi[anchor].imag
            step, *_ = np.linalg.lstsq(Jac, -F, rcond=None)
            psi = psi + (step[:L] + 1j * step[L:2 * L])
            mu = mu + step[2 * L]
            if np.linalg.norm(step) > 1e3:
                break
        if not ok or abs(np.vdot(psi, psi).real - 1.0) > 1e-9:
            continue
        evals = np.linalg.eigvals(_stability_matrix(params, psi, mu))
        exps = np.sort(evals.real)[::-1]
        # deduplicate against already-found points (up to global phase)
        dup = any(abs(abs(np.vdot(fp.psi, psi)) - 1.0) < 1e-8 and
                  abs(fp.mu - mu) < 1e-8 for fp in out)
        if not dup:
            out.append(FixedPoint(psi=psi, mu=float(mu),
                                  residual=float(np.linalg.norm(
                                      classical_gradient(params, psi) - mu * psi)),
                                  exponents=exps))
    out.sort(key=lambda fp: -fp.stability_exponent)
    return out


@dataclass
class PeriodicMode:
    psi0: np.ndarray
    period: float
    mu_rot: float
    residual: float
    action: float
    monodromy: np.ndarray          # full 2L x 2L (rotating frame)
    monodromy_reduced: np.ndarray  # 2(L-1) x 2(L-1), canonical coordinates
    stability_exponents: np.ndarray
    symplectic_defect: float


def monodromy_matrix(params, psi0, T, mu, tol: float = 1e-11) -> np.ndarray:
    """Tangent map over one period in the frame rotating at mu."""
    L = params.L
    deltas = np.zeros((2 * L, L), dtype=complex)
    for k in range(L):
        deltas[k, k] = 1.0
        deltas[L + k, k] = 1j
    _, dl = tangent_flow(params, psi0, deltas, (0.0, T), mu=mu, tol=tol)
    M = np.zeros((2 * L, 2 * L))
    for col in range(2 * L):
        M[:L, col] = dl[col].real
        M[L:, col] = dl[col].imag
    return M


def _symplectic_gram_schmidt(basis: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Darboux basis of the span of ``basis`` columns (assumed symplectic)."""
    cols = [basis[:, k] for k in range(basis.shape[1])]
    pairs = []
    while cols:
        u = cols.pop(0)
        omg = np.array([float(u @ J @ v) for v in cols])
        j = int(np.argmax(np.abs(omg)))
        if abs(omg[j]) < 1e-12:
            raise np.linalg.LinAlgError("degenerate restriction of the symplectic form")
        v = cols.pop(j) / omg[j]
        cols = [w - float(w @ J @ v) * u + float(w @ J @ u) * v for w in cols]
        pairs.append((u, v))
    qs = [p[0] for p in pairs]
    ps = [p[1] for p in pairs]
    return np.column_stack(qs + ps)


def reduce_monodromy(M: np.ndarray, psi0: np.ndarray):
    """Project out the norm/gauge pair; return (M_red, symplectic defect).

    The reduced matrix is expressed in a canonical (Darboux) basis of the
    invariant complement, so M_red^T J M_red = J holds for an exact tangent
    map.
    """
    L = len(psi0)
    J = symplectic_form(L)
    x = c2r(psi0)
    g = J @ x  # global-phase direction
    Q = np.column_stack([x / np.linalg.norm(x), g / np.linalg.norm(g)])
    P = np.eye(2 * L) - Q @ Q.T
    # orthonormal basis of the complement
    u, s, _ = np.linalg.svd(P)
    E = u[:, : 2 * L - 2]
    D = _symplectic_gram_schmidt(E, J)
    k = D.shape[1] // 2
    Jk = symplectic_form(k)
    # symplectic inverse: coordinates c of y in basis D solve J_k c = D^T J y
    Dinv = -Jk @ D.T @ J
    M_red = Dinv @ M @ D
    defect = float(np.max(np.abs(M_red.T @ Jk @ M_red - Jk)))
    return M_red, defect


def orbit_action(params, psi0, T, mu, tol: float = 1e-12,
                 n_samples: int = 4001) -> float:
    """Reduced action S = closed-loop integral of sum_i p_i dq_i along the
    rotating-frame orbit, in scaled (unit-norm) variables.

    This is the dimensionless phase per particle: the semiclassical weight of
    the mode is e^{i N S}.
    """
    t = np.linspace(0.0, T, n_samples)
    psi_t = gpe_flow(params, psi0, t, tol=tol, mu=mu)
    g = np.empty_like(psi_t)
    for k in range(n_samples):
        g[k] = classical_gradient(params, psi_t[k]) - mu * psi_t[k]
    # p dq/dt = Re(psi* i dpsi/dt) = Re(psi* grad_rot) on the closed loop
    integrand = np.sum((psi_t.conj() * g).real, axis=1)
    return float(simpson(integrand, x=t))


def find_periodic_mode(params: BoseHubbardParams, psi_guess, T_guess: float,
                       mu_guess: float, tol: float = 1e-10,
                       max_iter: int = 60,
                       pin_energy: float | None = None) -> PeriodicMode:
    """Newton shooting for a relative-periodic mean-field mode.

    Closure is psi(T) = e^{-i chi} psi(0) with chi = mu_rot * T, solved in
    the rotating frame with phase and time-translation gauge conditions and a
    unit-norm constraint.  ``pin_energy`` adds an energy-shell constraint;
    without it the solver is free to drift along a one-parameter orbit
    family toward whichever member is nearest the guess.
    """
    L = params.L
    psi = np.asarray(psi_guess, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    T = float(T_guess)
    mu = float(mu_guess)

    def shoot(psi0, T, mu):
        deltas = np.zeros((2 * L, L), dtype=complex)
        for k in range(L):
            deltas[k, k] = 1.0
            deltas[L + k, k] = 1j
        pf, dl = tangent_flow(params, psi0, deltas, (0.0, T), mu=mu)
        M = np.zeros((2 * L, 2 * L))
        for col in range(2 * L):
            M[:L, col] = dl[col].real
            M[L:, col] = dl[col].imag
        return pf, M

    last_residual = np.inf
    for it in range(max_iter):
        pf, M = shoot(psi, T, mu)
        R = pf - psi
        last_residual = np.linalg.norm(R)
        if pin_energy is not None:
            last_residual = max(last_residual,
                                abs(classical_symbol(params, psi) - pin_energy))
        if last_residual < tol:
            break
        fT = -1j * (classical_gradient(params, pf) - mu * pf)   # dR/dT
        dmu = 1e-7
        pf2, _ = shoot(psi, T, mu + dmu)
        fmu = (pf2 - pf) / dmu                                   # dR/dmu
        f0 = -1j * (classical_gradient(params, psi) - mu * psi)  # flow at psi0
        anchor = int(np.argmax(np.abs(psi)))

        rows = 2 * L + 3 + (1 if pin_energy is not None else 0)
        Jac = np.zeros((rows, 2 * L + 2))
        F = np.zeros(rows)
        Jac[: 2 * L, : 2 * L] = M - np.eye(2 * L)
        Jac[:L, 2 * L] = fT.real
        Jac[L: 2 * L, 2 * L] = fT.imag
        Jac[:L, 2 * L + 1] = fmu.real
        Jac[L: 2 * L, 2 * L + 1] = fmu.imag
        F[:L] = R.real
        F[L: 2 * L] = R.imag
        # norm constraint
        Jac[2 * L, :L] = 2.0 * psi.real
        Jac[2 * L, L: 2 * L] = 2.0 * psi.imag
        F[2 * L] = np.vdot(psi, psi).real - 1.0
        # phase gauge: Im psi[anchor] stays zero
        Jac[2 * L + 1, L + anchor] = 1.0
        F[2 * L + 1] = psi[anchor].imag
        # time-translation gauge: step orthogonal to the flow direction
        Jac[2 * L + 2, :L] = f0.real
        Jac[2 * L + 2, L: 2 * L] = f0.imag
        if pin_energy is not None:
            g0 = classical_gradient(params, psi)
            Jac[2 * L + 3, :L] = 2.0 * g0.real
            Jac[2 * L + 3, L: 2 * L] = 2.0 * g0.imag
            F[2 * L + 3] = classical_symbol(params, psi) - pin_energy
        step, *_ = np.linalg.lstsq(Jac, -F, rcond=None)
        # damp: near-parabolic modes (integrable limits) make the shooting
        # system ill-conditioned and raw Newton steps can explode
        cap = max(np.abs(step[: 2 * L]).max(), abs(step[2 * L]) / (0.2 * T),
                  abs(step[2 * L + 1]) / 0.5)
        if cap > 0.5:
            step = step * (0.5 / cap)
        psi = psi + (step[:L] + 1j * step[L: 2 * L])
        T = T + step[2 * L]
        mu = mu + step[2 * L + 1]
        if T <= 0 or not np.isfinite(T):
            raise RuntimeError("Newton left the valid period range")
    else:
        raise RuntimeError(
            f"periodic-mode search did not converge (residual {last_residual:.2e})")

    pf, M = shoot(psi, T, mu)
    residual = float(np.linalg.norm(pf - psi))
    M_red, defect = reduce_monodromy(M, psi)
    mult = np.linalg.eigvals(M_red)
    exps = np.sort(np.log(np.abs(mult)) / T)[::-1]
    S = orbit_action(params, psi, T, mu)
    return PeriodicMode(psi0=psi, period=float(T), mu_rot=float(mu),
                        residual=residual, action=S, monodromy=M,
                        monodromy_reduced=M_red, stability_exponents=exps,
                        symplectic_defect=defect)


# ---------------------------------------------------------------------------
# Weyl density and time scales


def weyl_density(params: BoseHubbardParams, E_grid, sample_count: int,
                 seed: int = 0, bandwidth: float | None = None):
    """Monte Carlo smooth density of states of the (E, N) shell.

    Samples the fixed-norm sphere sum_i (q_i^2 + p_i^2)/2 = N uniformly and
    kernel-bins the classical energy.  Normalized so the integral over E
    recovers the sector dimension ~ N^(L-1)/(L-1)!.
    """
    if sample_count < 10_000:
        raise ValueError("need at least 1e4 samples")
    L, N = params.L, params.N
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(sample_count, 2 * L))
    x *= (np.sqrt(2.0 * N) / np.linalg.norm(x, axis=1))[:, None]
    psi = (x[:, :L] + 1j * x[:, L:]) / np.sqrt(2.0)
    energies = np.array([classical_symbol(params, p) for p in psi])

    r = math.sqrt(2.0 * N)
    area = 2.0 * math.pi ** L * r ** (2 * L - 1) / math.gamma(L)
    prefactor = (2.0 * math.pi) ** (-L) * area / r

    if bandwidth is None:
        bandwidth = 1.06 * np.std(energies) * sample_count ** (-1 / 5)
    E_grid = np.asarray(E_grid, dtype=float)
    rho = np.empty_like(E_grid)
    err = np.empty_like(E_grid)
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * bandwidth)
    for k, E in enumerate(E_grid):
        w = norm * np.exp(-0.5 * ((energies - E) / bandwidth) ** 2)
        rho[k] = prefactor * w.mean()
        err[k] = prefactor * w.std() / math.sqrt(sample_count)
    return rho, err


def ehrenfest_time(lam: float, N: float) -> float:
    """Scrambling time ln(N)/lambda."""
    if lam <= 0:
        raise ValueError("Ehrenfest time undefined for non-positive exponent")
    if N < 1:
        raise ValueError("particle number must be >= 1")
    return math.log(N) / lam

"""Out-of-time-order commutators C(t) = ||[W(t), V] psi||^2 for local
operators, with growth-rate / saturation extraction and the analytic
pre/post-scrambling envelope curves.

Number-operator pairs stay inside the particle-number sector.  Quadrature
pairs are evaluated by routing amplitudes through the adjacent sectors
(N +- 1, N +- 2) so the computation stays exact without ever forming dense
Heisenberg operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import FockBasis, StateVector, apply_ladder
from .hamiltonian import BoseHubbardParams, SparseHamiltonian, build_bose_hubbard
from .dynamics import evolve


@dataclass
class OtocSeries:
    times: np.ndarray
    C: np.ndarray
    pair: str                  # e.g. "n0,n1" or "p0,q1"
    state_label: str
    normalization: str
    slope: float | None = None
    slope_window: tuple | None = None
    slope_r2: float | None = None
    plateau: float | None = None
    t_sat: float | None = None


def _propagate_to(H, v, t_from, t_to, tol):
    """exp(-iH (t_to - t_from)) v."""
    if t_to == t_from:
        return v.copy()
    return evolve(H, v, [t_to - t_from], tol=tol).states[-1]


def otoc_number(H: SparseHamiltonian, site_v: int, site_w: int, psi0,
                t_grid, tol: float = 1e-8) -> OtocSeries:
    """C(t) = ||[n_w(t), n_v] psi0||^2 / N^2 (per-particle-squared units).

    Forward branches are propagated incrementally along the sorted grid; each
    time point costs two fresh backward propagations.
    """
    if isinstance(psi0, StateVector):
        psi0 = psi0.amp
    basis = H.basis
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(t_grid)
    nv = basis.states[:, site_v].astype(float)
    nw = basis.states[:, site_w].astype(float)

    x1 = nv * psi0          # V psi
    x2 = psi0.copy()
    t_cur = 0.0
    C = np.empty(len(t_grid))
    for idx in order:
        t = t_grid[idx]
        x1 = _propagate_to(H, x1, t_cur, t, tol)
        x2 = _propagate_to(H, x2, t_cur, t, tol)
        t_cur = t
        a = _propagate_to(H, nw * x1, t, 0.0, tol)          # W(t) V psi
        b = nv * _propagate_to(H, nw * x2, t, 0.0, tol)     # V W(t) psi
        C[idx] = float(np.sum(np.abs(a - b) ** 2)) / basis.N ** 2
    return OtocSeries(times=t_grid, C=C, pair=f"n{site_v},n{site_w}",
                      state_label="", normalization="C/N^2")


def _quadrature_step(v: StateVector, site: int, which: str,
                     up: FockBasis | None, down: FockBasis | None):
    """Apply q or p: returns (raised StateVector or None, lowered or None).

    q = (b + b†)/sqrt2,  p = (b - b†)/(i sqrt2).
    """
    s = 1.0 / math.sqrt(2.0)
    lowered = raised = None
    if v.basis.N > 0 and down is not None:
        lo = apply_ladder("annihilate", site, v, target=down)
        lowered = StateVector(down, (s if which == "q" else -1j * s) * lo.amp)
    if up is not None:
        hi = apply_ladder("create", site, v, target=up)
        raised = StateVector(up, (s if which == "q" else 1j * s) * hi.amp)
    return raised, lowered


def otoc_quadrature(params: BoseHubbardParams, site_p: int, site_q: int,
                    psi0: StateVector, t_grid, tol: float = 1e-8,
                    max_dim: int = 2_000_000) -> OtocSeries:
    """C(t) = ||[p_i, q_j(t)] psi0||^2 / N^2 for intensive quadratures.

    Heisenberg q_j(t) moves amplitude to the N+-1 sectors; the outer p_i then
    reaches N and N+-2.  All five sector Hamiltonians are built once and the
    commutator norm is summed over sector components.
    """
    N = params.N
    t_grid = np.asarray(t_grid, dtype=float)
    from dataclasses import replace
    bases = {}
    hams = {}
    for dn in (-2, -1, 0, 1, 2):
        if N + dn < 0:
            continue
        bases[dn] = FockBasis(params.L, N + dn, max_dim=max_dim)
        hams[dn] = build_bose_hubbard(replace(params, N=N + dn), bases[dn])

    order = np.argsort(t_grid)
    C = np.empty(len(t_grid))

    # branch b: q_j(t) p_i psi0 -- p_i psi0 lives in N+-1, propagated forward
    p_hi, p_lo = _quadrature_step(psi0, site_p, "p", bases.get(1), bases.get(-1))
    fwd = {0: psi0.amp.copy(),
           1: None if p_hi is None else p_hi.amp.copy(),
           -1: None if p_lo is None else p_lo.amp.copy()}
    t_cur = 0.0
    for idx in order:
        t = t_grid[idx]
        for dn in (0, 1, -1):
            if fwd[dn] is not None:
                fwd[dn] = _propagate_to(hams[dn], fwd[dn], t_cur, t, tol)
        t_cur = t

        # a = p_i q_j(t) psi0: apply q_j at time t to the N-sector branch,
        # pull each component back to time 0 in its own sector, then apply p_i
        a_parts = {dn: np.zeros(bases[dn].dim, complex)
                   for dn in bases if dn in (-2, 0, 2)}
        q_hi, q_lo = _quadrature_step(StateVector(bases[0], fwd[0]), site_q,
                                      "q", bases.get(1), bases.get(-1))
        for dn, comp in ((1, q_hi), (-1, q_lo)):
            if comp is None:
                continue
            back = _propagate_to(hams[dn], comp.amp, t, 0.0, tol)
            hi, lo = _quadrature_step(StateVector(bases[dn], back), site_p,
                                      "p", bases.get(dn + 1), bases.get(dn - 1))
            if hi is not None:
                a_parts[dn + 1] += hi.amp
            if lo is not None:
                a_parts[dn - 1] += lo.amp

        # b = q_j(t) p_i psi0: apply q_j to the forward-propagated N+-1
        # branches, collect per target sector, pull back to time 0
        b_stage = {dn: np.zeros(bases[dn].dim, complex)
                   for dn in bases if dn in (-2, 0, 2)}
        for dn in (1, -1):
            if fwd.get(dn) is None:
                continue
            hi, lo = _quadrature_step(StateVector(bases[dn], fwd[dn]), site_q,
                                      "q", bases.get(dn + 1), bases.get(dn - 1))
            if hi is not None:
                b_stage[dn + 1] += hi.amp
            if lo is not None:
                b_stage[dn - 1] += lo.amp
        total = 0.0
        for dn in b_stage:
            b_back = _propagate_to(hams[dn], b_stage[dn], t, 0.0, tol) \
                if np.any(b_stage[dn]) else b_stage[dn]
            total += float(np.sum(np.abs(a_parts[dn] - b_back) ** 2))
        C[idx] = total / N ** 2
    return OtocSeries(times=t_grid, C=C, pair=f"p{site_p},q{site_q}",
                      state_label="", normalization="C/N^2 (intensive quadratures)")


def otoc_exact(H: SparseHamiltonian, pair: tuple, psi0, t_grid,
               tol: float = 1e-8) -> OtocSeries:
    """Dispatch on the operator pair descriptor.

    pair = ("n", i, j) for number operators, ("pq", i, j) for the
    p_i / q_j(t) quadrature commutator.
    """
    kind = pair[0]
    if kind == "n":
        return otoc_number(H, pair[1], pair[2], psi0, t_grid, tol=tol)
    if kind == "pq":
        if not isinstance(psi0, StateVector):
            psi0 = StateVector(H.basis, np.asarray(psi0, complex))
        return otoc_quadrature(H.params, pair[1], pair[2], psi0, t_grid, tol=tol)
    raise ValueError(f"unknown operator pair kind {kind!r}")


def otoc_dense_oracle(H: SparseHamiltonian, site_v: int, site_w: int, psi0,
                      t_grid) -> np.ndarray:
    """Ground-truth number-pair OTOC via dense Heisenberg operators."""
    import scipy.linalg as la
    if H.dim > 500:
        raise ValueError("dense oracle restricted to dim <= 500")
    if isinstance(psi0, StateVector):
        psi0 = psi0.amp
    evals, evecs = la.eigh(H.dense())
    nv = np.diag(H.basis.states[:, site_v].astype(float))
    nw = np.diag(H.basis.states[:, site_w].astype(float))
    out = np.empty(len(t_grid))
    for k, t in enumerate(np.asarray(t_grid, float)):
        U = (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
        Wt = U.conj().T @ nw @ U
        comm = Wt @ nv - nv @ Wt
        out[k] = float(np.linalg.norm(comm @ psi0) ** 2) / H.basis.N ** 2
    return out


# ---------------------------------------------------------------------------
# extraction


def _log_slope(tt, y):
    A = np.vstack([tt, np.ones_like(tt)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    se = math.sqrt(float(resid @ resid) / max(len(tt) - 2, 1) /
                   float(np.sum((tt - tt.mean()) ** 2)))
    return float(coef[0]), se


def saturation_onset(series: OtocSeries, plateau_estimator=None,
                     trim: float = 0.1, min_tail: int = 4,
                     growth_fit: dict | None = None):
    """(t_sat, plateau level) from the flat tail of an OTOC series.

    The flat tail is the longest suffix whose fitted log-slope is consistent
    with zero at 2 sigma.  The plateau is a trimmed mean over it; t_sat is
    where the pre-saturation exponential fit first crosses half the plateau.

    ``plateau_estimator`` overrides the plateau: either a fixed level or a
    callable on the series (useful to share one plateau across system sizes).
    ``growth_fit`` supplies a precomputed {'slope', 'intercept'} fit, e.g.
    from ``windowed_growth_fit``, instead of the automatic window search.
    """
    t, C = series.times, series.C
    n = len(t)
    y = np.log(np.maximum(C, 1e-300))
    gslope = ginter = None
    if growth_fit is not None:
        gslope, ginter = growth_fit["slope"], growth_fit["intercept"]
    step = float(np.median(np.diff(t))) if n > 1 else 0.0
    start = None
    for i in range(n - min_tail + 1):
        slope, se = _log_slope(t[i:], y[i:])
        if abs(slope) > 2.0 * se + 1e-12:
            continue
        if gslope is not None and gslope > 0:
            # a plateau cannot begin before the growth branch reaches its
            # level: guards the suffix search against large oscillations
            # whose scatter makes any slope "consistent with zero"
            level = float(np.mean(np.sort(C[i:])[int((n - i) * trim):
                                                 (n - i) - int((n - i) * trim)
                                                 or None]))
            t_cross = (math.log(max(level, 1e-300)) - ginter) / gslope
            if t[i] < t_cross - step:
                continue
        start = i
        break
    if start is None or n - start < max(min_tail, int(0.15 * n)):
        raise ValueError("no statistically flat tail detected")
    if plateau_estimator is None:
        cc = np.sort(C[start:])
        k = int(len(cc) * trim)
        plateau = float(np.mean(cc[k: len(cc) - k or None]))
    elif callable(plateau_estimator):
        plateau = float(plateau_estimator(series))
    else:
        plateau = float(plateau_estimator)

    fit = growth_fit if growth_fit is not None else \
        fit_growth_rate(series, t_max=t[start])
    slope, intercept = fit["slope"], fit["intercept"]
    t_sat = (math.log(0.5 * plateau) - intercept) / slope
    return float(t_sat), plateau


def windowed_growth_fit(series: OtocSeries, t_lo: float, t_hi: float) -> dict:
    """Plain log-linear least squares on a declared time window.

    Robust companion to ``fit_growth_rate`` when the growth window is known
    a priori (for scrambling at a hyperbolic point: between the inverse
    stability exponent and the Ehrenfest time); a fixed window is immune to
    oscillation-chasing by the automatic window search.
    """
    t, C = series.times, series.C
    m = (t >= t_lo) & (t <= t_hi) & (C > 0)
    if m.sum() < 3:
        raise ValueError("fewer than 3 usable points in the fit window")
    tt, yy = t[m], np.log(C[m])
    slope, se = _log_slope(tt, yy)
    intercept = float(yy.mean() - slope * tt.mean())
    pred = slope * tt + intercept
    ss_tot = float(np.sum((yy - yy.mean()) ** 2))
    r2 = 1.0 - float(np.sum((yy - pred) ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return {"slope": slope, "intercept": intercept, "r2": r2,
            "window": (float(tt[0]), float(tt[-1])), "slope_err": se}


def fit_growth_rate(series: OtocSeries, r2_min: float = 0.98,
                    min_points: int = 5, floor_factor: float = 10.0,
                    t_max: float | None = None) -> dict:
    """Longest log-linear window with r^2 >= r2_min before saturation.

    Points below floor_factor x numerical floor are excluded.  Returns slope,
    intercept, r^2 and the (t_lo, t_hi) window.
    """
    t, C = series.times, series.C
    floor = max(np.min(C[C > 0], initial=1e-300), 1e-300)
    ok = C > floor_factor * floor
    if t_max is None:
        # exclude the saturated tail if one is present
        y = np.log(np.maximum(C, 1e-300))
        for i in range(len(t) - 4 + 1):
            slope, se = _log_slope(t[i:], y[i:])
            if abs(slope) <= 2.0 * se + 1e-12:
                if i > 0:
                    t_max = t[i]
                break
    if t_max is not None:
        ok &= t <= t_max
    tt, yy = t[ok], np.log(C[ok])
    best = None
    n = len(tt)
    if n < min_points:
        raise ValueError("not enough points above the numerical floor")
    for i in range(n - min_points + 1):
        for j in range(i + min_points, n + 1):
            x, y = tt[i:j], yy[i:j]
            A = np.vstack([x, np.ones_like(x)]).T
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
            pred = A @ coef
            ss_res = float(np.sum((y - pred) ** 2))
            ss_tot = float(np.sum((y - y.mean()) ** 2))
            r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
            if r2 >= r2_min and coef[0] > 0:
                span = x[-1] - x[0]
                if best is None or span > best["span"]:
                    best = {"slope": float(coef[0]), "intercept": float(coef[1]),
                            "r2": r2, "window": (float(x[0]), float(x[-1])),
                            "span": span}
    if best is None:
        raise ValueError("no log-linear window meets the fit criteria")
    best.pop("span")
    return best


# ---------------------------------------------------------------------------
# analytic envelope curves


def theory_curve_pre(t, lam: float, N: float) -> np.ndarray:
    """Semiclassical growth branch (1/N^2) e^{2 lam t}, gated at t_E."""
    if lam <= 0 or N < 1:
        raise ValueError("need lam > 0 and N >= 1")
    t = np.asarray(t, dtype=float)
    t_E = math.log(N) / lam
    return np.where(t <= t_E, np.exp(2.0 * lam * t) / N ** 2, 0.0)


def theory_curve_post(t, lam: float, N: float, L: int) -> np.ndarray:
    """Ergodic plateau 2/L^2 beyond the scrambling time."""
    if lam <= 0 or N < 1 or L < 1:
        raise ValueError("need lam > 0, N >= 1, L >= 1")
    t = np.asarray(t, dtype=float)
    t_E = math.log(N) / lam
    return np.where(t > t_E, 2.0 / L ** 2, 0.0)


def theory_curve_open(t, lam: float, N: float, t_D: float, L: int) -> np.ndarray:
    """Open-system envelope: rate 2 lam - 1/t_D before t_E, -2/t_D after.

    The post branch is anchored so the branch ratio at t_E equals the closed
    system's jump to 2/L^2; the t_D -> infinity limit then recovers the
    closed branches pointwise.
    """
    if t_D <= 0:
        raise ValueError("decay time must be positive")
    if lam <= 0 or N < 1 or L < 1:
        raise ValueError("need lam > 0, N >= 1, L >= 1")
    t = np.asarray(t, dtype=float)
    t_E = math.log(N) / lam
    pre = np.exp((2.0 * lam - 1.0 / t_D) * t) / N ** 2
    post = (2.0 / L ** 2) * np.exp(-t_E / t_D) * np.exp(-2.0 * (t - t_E) / t_D)
    return np.where(t <= t_E, pre, post)

"""Fock-space kinematics for fixed-number boson sectors.

Basis enumeration, matrix-free ladder-operator actions, number-projected
coherent states and the Hermite quadrature transform.  All objects are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_DIM = 2_000_000


class DimensionOverflowError(RuntimeError):
    """Sector dimension exceeds the configured cap."""


def sector_dimension(L: int, N: int) -> int:
    return math.comb(N + L - 1, L - 1)


def _binom_table(n_max: int, k_max: int) -> np.ndarray:
    """Pascal table C[n, k] as float (exact for the sizes used here as int64)."""
    tab = np.zeros((n_max + 1, k_max + 1), dtype=np.int64)
    tab[:, 0] = 1
    for n in range(1, n_max + 1):
        for k in range(1, min(n, k_max) + 1):
            tab[n, k] = tab[n - 1, k - 1] + tab[n - 1, k]
    return tab


class FockBasis:
    """Occupation-number basis of the (L, N) sector, lexicographically ordered.

    Index lookup uses a combinatorial ranking function, so indices are
    deterministic and reproducible across runs.
    """

    def __init__(self, L: int, N: int, max_dim: int = DEFAULT_MAX_DIM):
        if L < 1:
            raise ValueError("need at least one site")
        if N < 0:
            raise ValueError("particle number must be non-negative")
        dim = sector_dimension(L, N)
        if dim > max_dim:
            raise DimensionOverflowError(
                f"sector (L={L}, N={N}) has dimension {dim} > cap {max_dim}"
            )
        self.L = L
        self.N = N
        self.dim = dim
        self.states = self._enumerate(L, N, dim)
        self.states.setflags(write=False)
        # number of compositions of r into m parts: C(r+m-1, m-1)
        self._binom = _binom_table(N + L, L)

    @staticmethod
    def _enumerate(L: int, N: int, dim: int) -> np.ndarray:
        states = np.zeros((dim, L), dtype=np.int64)
        row = 0

        def rec(prefix, remaining, pos):
            nonlocal row
            if pos == L - 1:
                states[row, :pos] = prefix
                states[row, pos] = remaining
                row += 1
                return
            for v in range(remaining + 1):
                rec(prefix + [v], remaining - v, pos + 1)

        rec([], N, 0)
        assert row == dim
        return states

    def index(self, state) -> int:
        """Rank of one occupation vector in the lexicographic order."""
        return int(self.index_of(np.asarray(state, dtype=np.int64)[None, :])[0])

    def index_of(self, states: np.ndarray) -> np.ndarray:
        """Vectorized combinatorial ranking of occupation vectors (rows)."""
        states = np.asarray(states, dtype=np.int64)
        m, L = states.shape
        if L != self.L:
            raise ValueError("site count mismatch")
        rank = np.zeros(m, dtype=np.int64)
        remaining = np.full(m, self.N, dtype=np.int64)
        for i in range(L - 1):
            parts = L - i - 1
            ni = states[:, i]
            # vectors with smaller value v at position i: compositions of
            # remaining - v into `parts` parts, summed over v < n_i
            for_each = np.zeros(m, dtype=np.int64)
            vmax = int(ni.max()) if m else 0
            for v in range(vmax):
                active = ni > v
                r = remaining[active] - v
                for_each[active] += self._binom[r + parts - 1, parts - 1]
            rank += for_each
            remaining = remaining - ni
        return rank


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over a FockBasis."""

    basis: FockBasis
    amp: np.ndarray

    def __post_init__(self):
        if self.amp.shape != (self.basis.dim,):
            raise ValueError("amplitude length must equal basis dimension")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.amp / np.linalg.norm(self.amp))


def basis_state(basis: FockBasis, occupations) -> StateVector:
    amp = np.zeros(basis.dim, dtype=complex)
    amp[basis.index(occupations)] = 1.0
    return StateVector(basis, amp)


def enumerate_basis(L: int, N: int, max_dim: int = DEFAULT_MAX_DIM) -> FockBasis:
    return FockBasis(L, N, max_dim=max_dim)


def apply_ladder(op_kind: str, site: int, v: StateVector,
                 target: FockBasis | None = None) -> StateVector:
    """Matrix-free action of b_i, b†_i or n_i on a state vector.

    ``site`` is zero-based.  For 'annihilate'/'create' the result lives in the
    N∓1... sector: N-1 for annihilate, N+1 for create; a matching target basis
    is built on demand if not supplied.
    """
    basis = v.basis
    if not 0 <= site < basis.L:
        raise IndexError(f"site {site} out of range for L={basis.L}")
    n_site = basis.states[:, site]
    if op_kind == "number":
        return StateVector(basis, v.amp * n_site)
    if op_kind == "annihilate":
        if basis.N == 0:
            raise ValueError("cannot annihilate in the vacuum sector")
        tgt = target or FockBasis(basis.L, basis.N - 1)
        out = np.zeros(tgt.dim, dtype=complex)
        src = np.nonzero(n_site > 0)[0]
        moved = basis.states[src].copy()
        moved[:, site] -= 1
        out[tgt.index_of(moved)] = v.amp[src] * np.sqrt(n_site[src])
        return StateVector(tgt, out)
    if op_kind == "create":
        tgt = target or FockBasis(basis.L, basis.N + 1)
        out = np.zeros(tgt.dim, dtype=complex)
        moved = basis.states.copy()
        moved[:, site] += 1
        out[tgt.index_of(moved)] = v.amp * np.sqrt(n_site + 1)
        return StateVector(tgt, out)
    raise ValueError(f"unknown ladder kind {op_kind!r}")


def projected_coherent_state(psi0, basis: FockBasis) -> StateVector:
    """Coherent state |psi0> projected onto the fixed-N sector, normalized.

    Amplitudes are proportional to prod_i psi0_i^{n_i} / sqrt(n_i!); the
    overall phase is fixed so the largest-magnitude amplitude is real
    positive.  Computed in log space so large N poses no overflow issue.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (basis.L,):
        raise ValueError("field length must equal site count")
    if not np.any(np.abs(psi0) > 0):
        raise ValueError("all-zero coherent field")
    n = basis.states
    occupied_ok = np.all((np.abs(psi0)[None, :] > 0) | (n == 0), axis=1)
    logmag = np.full(basis.dim, -np.inf)
    phase = np.zeros(basis.dim)
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(psi0))
    safe_lm = np.where(np.isfinite(lm), lm, 0.0)
    lgamma = np.vectorize(math.lgamma)
    nn = n[occupied_ok]
    logmag[occupied_ok] = nn @ safe_lm - 0.5 * np.sum(lgamma(nn + 1.0), axis=1)
    phase[occupied_ok] = nn @ np.angle(psi0)
    logmag -= logmag.max()
    amp = np.exp(logmag) * np.exp(1j * phase)
    amp /= np.linalg.norm(amp)
    k = int(np.argmax(np.abs(amp)))
    amp *= np.exp(-1j * np.angle(amp[k]))
    return StateVector(basis, amp)


def mean_occupations(v: StateVector) -> np.ndarray:
    w = np.abs(v.amp) ** 2
    return w @ v.basis.states


def quadrature_overlap(q: float, n: int) -> float:
    """Oscillator eigenfunction <q|n> = e^{-q^2/2} H_n(q) / (pi^{1/4} sqrt(2^n n!)).

    Evaluated with the normalized three-term recurrence, which keeps every
    intermediate bounded (no 2^n n! overflow) up to n of several thousand.
    """
    if n < 0:
        raise ValueError("occupation must be non-negative")
    phi_prev = 0.0
    phi = math.pi ** (-0.25) * math.exp(-0.5 * q * q)
    for k in range(n):
        phi, phi_prev = (
            q * math.sqrt(2.0 / (k + 1)) * phi - math.sqrt(k / (k + 1.0)) * phi_prev,
            phi,
        )
    return phi


def psi_to_quadratures(psi) -> tuple[np.ndarray, np.ndarray]:
    """Split complex fields into (q, p) with psi = (q + i p)/sqrt(2)."""
    psi = np.asarray(psi, dtype=complex)
    return np.sqrt(2.0) * psi.real, np.sqrt(2.0) * psi.imag


def quadratures_to_psi(q, p) -> np.ndarray:
    return (np.asarray(q) + 1j * np.asarray(p)) / np.sqrt(2.0)

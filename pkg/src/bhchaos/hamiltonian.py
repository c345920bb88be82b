"""Sparse Bose-Hubbard Hamiltonians and their classical (mean-field) symbols.

Model: H = sum_i e_i n_i - J sum_bonds (e^{i phi} b†_i b_{i+1} + h.c.)
           + (U/2) sum_i n_i (n_i - 1)

on an open chain or a ring.  A uniform Peierls phase phi on every ring bond
(total flux L*phi) is the single knob that breaks time-reversal symmetry.
Units: hbar = 1, energies in units of J unless configured otherwise, times
in hbar/J.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .fock import FockBasis


@dataclass(frozen=True)
class BoseHubbardParams:
    L: int
    N: int
    J: float = 1.0
    U: float = 0.0
    geometry: str = "ring"  # 'ring' or 'chain'
    e: tuple = None  # on-site energies, length L
    phi: float = 0.0  # Peierls phase per bond

    def __post_init__(self):
        if self.geometry not in ("ring", "chain"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        e = self.e
        if e is None:
            e = (0.0,) * self.L
        e = tuple(float(x) for x in np.asarray(e).ravel())
        if len(e) != self.L:
            raise ValueError("on-site energy vector must have length L")
        object.__setattr__(self, "e", e)

    @property
    def onsite(self) -> np.ndarray:
        return np.asarray(self.e, dtype=float)

    def bonds(self):
        """(i, j) pairs carrying hopping -J e^{i phi} b†_i b_j + h.c."""
        out = [(i, i + 1) for i in range(self.L - 1)]
        if self.geometry == "ring" and self.L > 2:
            out.append((self.L - 1, 0))
        return out


@dataclass(frozen=True)
class SparseHamiltonian:
    basis: FockBasis
    matrix: sp.csr_matrix
    params: BoseHubbardParams

    @property
    def dim(self) -> int:
        return self.basis.dim

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def expectation(self, v: np.ndarray) -> float:
        return float(np.real(np.vdot(v, self.matrix @ v)))


def build_bose_hubbard(params: BoseHubbardParams, basis: FockBasis) -> SparseHamiltonian:
    """Assemble the sector Hamiltonian in CSR form (<= 2L+1 entries per row)."""
    if basis.L != params.L or basis.N != params.N:
        raise ValueError("basis sector does not match parameters")
    n = basis.states
    dim = basis.dim
    e = params.onsite

    diag = n @ e + 0.5 * params.U * np.sum(n * (n - 1.0), axis=1)

    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [diag.astype(complex)]

    hop = -params.J * np.exp(1j * params.phi)
    for (i, j) in params.bonds():
        # b†_i b_j : moves one particle j -> i
        src = np.nonzero(n[:, j] > 0)[0]
        if len(src) == 0:
            continue
        moved = n[src].copy()
        moved[:, j] -= 1
        moved[:, i] += 1
        tgt = basis.index_of(moved)
        amp = hop * np.sqrt(n[src, j] * (n[src, i] + 1.0))
        rows.append(tgt)
        cols.append(src)
        vals.append(amp)
        # hermitian conjugate
        rows.append(src)
        cols.append(tgt)
        vals.append(np.conj(amp))

    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    if params.phi == 0.0:
        m = m.real.astype(complex)
    return SparseHamiltonian(basis, m, params)


def classical_symbol(params: BoseHubbardParams, psi) -> float:
    """Normal-ordered classical energy H_cl(psi).

    With scaled unit-norm fields pass a params whose U is the fixed product
    U*N (see ``scaled_params``); then H_cl is the energy per particle.
    """
    psi = np.asarray(psi, dtype=complex)
    e = params.onsite
    val = float(e @ (np.abs(psi) ** 2))
    hop = 0.0 + 0.0j
    for (i, j) in params.bonds():
        hop += np.exp(1j * params.phi) * np.conj(psi[i]) * psi[j]
    val += float(-params.J * 2.0 * hop.real)
    val += float(0.5 * params.U * np.sum(np.abs(psi) ** 4))
    return val


def classical_gradient(params: BoseHubbardParams, psi) -> np.ndarray:
    """dH_cl/dpsi*_i, the right-hand side of i hbar dpsi/dt."""
    psi = np.asarray(psi, dtype=complex)
    g = params.onsite * psi + params.U * np.abs(psi) ** 2 * psi
    for (i, j) in params.bonds():
        g[i] += -params.J * np.exp(1j * params.phi) * psi[j]
        g[j] += -params.J * np.exp(-1j * params.phi) * psi[i]
    return g


def scaled_params(params: BoseHubbardParams) -> BoseHubbardParams:
    """Parameters for the unit-norm (intensive) mean-field convention.

    The quartic coupling becomes U_tilde = U*N, which is the combination held
    fixed in the large-N limit.
    """
    return replace(params, U=params.U * params.N)


def disorder_ensemble(params: BoseHubbardParams, W: float, count: int,
                      seed: int) -> list[BoseHubbardParams]:
    """i.i.d. uniform on-site disorder in [-W/2, W/2], one splittable stream
    per member so the ensemble is reproducible and extensible."""
    if count < 1:
        raise ValueError("count must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(count)
    out = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        e = np.asarray(params.e) + rng.uniform(-W / 2.0, W / 2.0, size=params.L)
        out.append(replace(params, e=tuple(e)))
    return out


def number_operator_diag(basis: FockBasis, site: int) -> np.ndarray:
    return basis.states[:, site].astype(float)

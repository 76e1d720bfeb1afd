"""
Brute-force many-body reference for small chains.

States live in the full 2^(N+2) space (2^(N+3) with the ancilla A'), built
directly from Pauli matrices with no fermionic algebra involved.  Site 0 is the
most significant tensor factor; the ancilla, when present, is the last factor.
Basis per site: index 0 = |up>, index 1 = |down>.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .model import ChainSpec

MAX_SITES = 14

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": SX, "y": SY, "z": SZ}

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)


class TooLarge(ValueError):
    pass


def _guard(n_sites):
    if n_sites > MAX_SITES:
        raise TooLarge(f"{n_sites} sites exceeds the dense limit of {MAX_SITES}")


def _embed(op, site, n_factors, width=1):
    """Sparse operator acting as ``op`` on ``width`` consecutive factors from ``site``."""
    left = sp.identity(2 ** site, format="csr")
    right = sp.identity(2 ** (n_factors - site - width), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def site_op(op, site, n_sites):
    return _embed(op, site, n_sites).toarray()


_XX = np.kron(SX, SX)
_YY = np.kron(SY, SY)


def _xy_hamiltonian(n_sites, bonds, fields) -> np.ndarray:
    """-sum J[(1+g) SxSx + (1-g) SySy] - sum h Sz, with S = sigma/2.

    ``bonds`` holds (i, J, g) for the pair (i, i+1), ``fields`` holds (i, h).
    """
    H = sp.csr_matrix((2 ** n_sites, 2 ** n_sites), dtype=complex)
    for i, J, g in bonds:
        H = H - 0.25 * J * _embed((1 + g) * _XX + (1 - g) * _YY, i, n_sites, 2)
    for i, h in fields:
        H = H - 0.5 * h * _embed(SZ, i, n_sites)
    return H.toarray()


def build_dense_hamiltonian(spec: ChainSpec) -> np.ndarray:
    L = spec.n_sites
    _guard(L)
    N = spec.N
    bonds = []
    for i in range(L - 1):
        boundary = i == 0 or i == N
        bonds.append((i, spec.j if boundary else 1.0, spec.gamma0 if boundary else spec.gamma))
    fields = [(i, spec.h) for i in range(1, N + 1)] + [(0, spec.h_q), (L - 1, spec.h_q)]
    return _xy_hamiltonian(L, bonds, fields)


@dataclass
class DenseEvolver:
    """Exact propagator from one full eigendecomposition of H."""

    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_spec(cls, spec: ChainSpec) -> "DenseEvolver":
        w, v = np.linalg.eigh(build_dense_hamiltonian(spec))
        return cls(w, v)

    def evolve(self, psi, t, ancilla=False):
        V = self.vectors
        if not ancilla:
            return V @ (np.exp(-1j * self.energies * t) * (V.conj().T @ psi))
        # identity on the trailing ancilla factor
        m = psi.reshape(-1, 2)
        m = V @ (np.exp(-1j * self.energies * t)[:, None] * (V.conj().T @ m))
        return m.reshape(-1)


def evolve_dense(psi, H, t):
    w, v = np.linalg.eigh(H)
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi))


def qubit_ket(bloch) -> np.ndarray:
    """Pure qubit ket with the given unit Bloch vector."""
    x, y, z = bloch
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def qubit_rho(bloch) -> np.ndarray:
    x, y, z = bloch
    return 0.5 * (I2 + x * SX + y * SY + z * SZ)


def wire_ground_vectors(spec: ChainSpec, tol=1e-9, policy: str = "average") -> np.ndarray:
    """Orthonormal columns spanning the wire ground state(s) kept by ``policy``.

    An exactly degenerate ground manifold is either kept whole (``"average"``)
    or reduced to its state of largest total S^z (``"field"``), the limit of an
    infinitesimal +z field.
    """
    if policy not in ("average", "field"):
        raise ValueError(f"unknown policy {policy!r}")
    _guard(spec.N)
    Hw = _xy_hamiltonian(spec.N, [(i, 1.0, spec.gamma) for i in range(spec.N - 1)],
                         [(i, spec.h) for i in range(spec.N)])
    w, v = np.linalg.eigh(Hw)
    g = v[:, w < w[0] + tol]
    if policy == "field" and g.shape[1] > 1:
        sz = sum(site_op(SZ, i, spec.N) for i in range(spec.N))
        _, u = np.linalg.eigh(g.conj().T @ sz @ g)
        g = g @ u[:, -1:]
    return g


def wire_ground_density(spec: ChainSpec, tol=1e-9, policy: str = "average") -> np.ndarray:
    """Wire ground-state density matrix, uniform over the kept ground states."""
    g = wire_ground_vectors(spec, tol, policy)
    return g @ g.conj().T / g.shape[1]


def initial_density(spec: ChainSpec, alpha, beta, policy: str = "average") -> np.ndarray:
    """rho_A (x) rho_wire_ground (x) rho_B as a dense matrix."""
    return reduce(np.kron, [qubit_rho(alpha), wire_ground_density(spec, policy=policy), qubit_rho(beta)])


def evolve_density(rho, evolver: DenseEvolver, t):
    V, w = evolver.vectors, evolver.energies
    U = (V * np.exp(-1j * w * t)) @ V.conj().T
    return U @ rho @ U.conj().T


def magnetization(rho_or_psi, n_sites) -> np.ndarray:
    """<S^z_i> for every site."""
    diag = _diag_probs(rho_or_psi)
    probs = diag.reshape([2] * n_sites)
    out = np.empty(n_sites)
    for i in range(n_sites):
        p = probs.sum(axis=tuple(k for k in range(n_sites) if k != i))
        out[i] = 0.5 * (p[0] - p[1])
    return out


def _diag_probs(x):
    if x.ndim == 1:
        return np.abs(x) ** 2
    return np.real(np.diag(x))


def reduced_density_matrix(state, kept, n_factors) -> np.ndarray:
    """Partial trace keeping the factors in ``kept`` (in the given order)."""
    kept = list(kept)
    if len(kept) > 2:
        raise ValueError("at most two kept sites")
    if state.ndim == 1:
        rho = np.outer(state, state.conj())
    else:
        rho = state
    t = rho.reshape([2] * (2 * n_factors))
    traced = [k for k in range(n_factors) if k not in kept]
    # move kept row axes then kept column axes to the front, trace the rest
    row = kept + traced
    col = [n_factors + k for k in kept] + [n_factors + k for k in traced]
    t = t.transpose(row + col)
    dk = 2 ** len(kept)
    dt = 2 ** len(traced)
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("iaja->ij", t)


def bell_plus() -> np.ndarray:
    return (np.kron(UP, UP) + np.kron(DOWN, DOWN)) / np.sqrt(2)


def channel_tomography(spec: ChainSpec, t, evolver: DenseEvolver | None = None, policy: str = "average"):
    """Bloch affine map (T, c) of the A -> B channel at time t, B starting in |up>."""
    ev = evolver or DenseEvolver.from_spec(spec)
    L = spec.n_sites
    rho_w = wire_ground_density(spec, policy=policy)
    out = {}
    for name, r in {"0": (0, 0, 0), "x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}.items():
        rho = reduce(np.kron, [qubit_rho(r), rho_w, qubit_rho((0, 0, 1))])
        rb = reduced_density_matrix(evolve_density(rho, ev, t), [L - 1], L)
        out[name] = np.real([np.trace(rb @ P) for P in (SX, SY, SZ)])
    c = out["0"]
    T = np.column_stack([out[k] - c for k in "xyz"])
    return T, c


def pauli_response(spec: ChainSpec, t, evolver: DenseEvolver | None = None, policy: str = "average") -> np.ndarray:
    """3x4 matrix e[alpha, mu] = Tr[(sigma_A^mu/2 (x) rho_wire (x) |up><up|) sigma_B^alpha(t)]."""
    T, c = channel_tomography(spec, t, evolver, policy)
    return np.column_stack([c, T])


def bell_output(spec: ChainSpec, t, evolver: DenseEvolver | None = None, policy: str = "average") -> np.ndarray:
    """rho_{B A'}(t) with (A, A') starting in Phi+ and B in |up>; ordering (B, A')."""
    ev = evolver or DenseEvolver.from_spec(spec)
    L = spec.n_sites
    g = wire_ground_vectors(spec, policy=policy)
    out = np.zeros((4, 4), dtype=complex)
    # factor order: A, wire..., B, A'
    for col in g.T:
        psi = sum(reduce(np.kron, [e, col, UP, e]) for e in (UP, DOWN)) / np.sqrt(2)
        out += reduced_density_matrix(ev.evolve(psi, t, ancilla=True), [L - 1, L], L + 1)
    return out / g.shape[1]

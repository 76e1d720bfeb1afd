"""
Spin-1/2 XY wire with two endpoint qubits, and its fermionic quadratic form.

Sites are labelled 0..N+1: qubit A sits on site 0, qubit B on site N+1 and
the wire occupies sites 1..N.  The Hamiltonian is

    H = - sum_{bonds} J_b [(1+g_b) S^x_i S^x_{i+1} + (1-g_b) S^y_i S^y_{i+1}]
        - h sum_{i=1}^{N} S^z_i - h_q (S^z_0 + S^z_{N+1})

with J_b = 1, g_b = gamma on bulk bonds and J_b = j, g_b = gamma0 on the two
boundary bonds (0,1) and (N,N+1).  S = sigma/2.

Jordan-Wigner convention
------------------------
The string starts on site 0 and a spin *down* is an occupied fermion:

    a_i^dag = (prod_{l<i} sigma^z_l) sigma^-_i ,   n_i = (1 - sigma^z_i)/2 .

The quadratic form is

    H = sum_ij hop_ij a_i^dag a_j + sum_{i<j} (pair_ij a_i^dag a_j^dag + h.c.) + e0

so that the gamma = 0 band of the bulk is eps_k = h - cos k.

Majorana convention
-------------------
c_{2i} = a_i + a_i^dag,  c_{2i+1} = i (a_i^dag - a_i), {c_m, c_n} = 2 delta_mn.
With this choice sigma^x_0 = c_0, sigma^y_0 = c_1 and sigma^z_i = -i c_{2i} c_{2i+1}.
The Hamiltonian reads H = (i/4) c^T A c + const with A real antisymmetric and
the Heisenberg evolution is c(t) = expm(A t) c.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

CONFIG_KEYS = ("n", "gamma", "gamma0", "h", "h_q", "j")


@dataclass(frozen=True)
class ChainSpec:
    """Parameters of the wire + qubits Hamiltonian.

    Attributes
    ----------
    N : int
        Number of wire sites (the two qubits are extra).
    gamma, gamma0 : float
        Bulk and boundary anisotropy.
    h, h_q : float
        Field on the wire and on the two qubits.
    j : float
        Qubit-wire coupling, the same on both ends.
    """

    N: int
    gamma: float = 0.0
    gamma0: float = 0.0
    h: float = 0.0
    h_q: float = 0.0
    j: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if self.j < 0:
            raise ValueError(f"coupling j must be non-negative, got {self.j!r}")

    @property
    def n_sites(self) -> int:
        return self.N + 2

    @property
    def is_xx(self) -> bool:
        return self.gamma == 0 and self.gamma0 == 0

    def with_(self, **changes) -> "ChainSpec":
        return replace(self, **changes)

    def to_config(self) -> dict:
        d = asdict(self)
        return {"n": d["N"], "gamma": d["gamma"], "gamma0": d["gamma0"],
                "h": d["h"], "h_q": d["h_q"], "j": d["j"]}

    @classmethod
    def from_config(cls, cfg: dict) -> "ChainSpec":
        unknown = set(cfg) - set(CONFIG_KEYS)
        if unknown:
            raise KeyError(f"unknown chain keys: {sorted(unknown)}")
        if "n" not in cfg:
            raise KeyError("chain config needs 'n'")
        kw = {k: float(cfg[k]) for k in CONFIG_KEYS[1:] if k in cfg}
        return cls(N=int(cfg["n"]), **kw)


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def write_config(cfg: dict, path) -> None:
    lines = [f"{k} = {v}" for k, v in cfg.items()]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Fermionic quadratic form ``a^dag hop a + (a^dag pair a^dag + h.c.)/2 + e0``."""

    hop: np.ndarray
    pair: np.ndarray
    e0: float

    @property
    def dim(self) -> int:
        return self.hop.shape[0]

    def block(self, sites) -> "QuadraticForm":
        """Restriction to a subset of sites; e0 keeps only the field terms of that subset."""
        idx = np.asarray(sites)
        # e0 = -(1/2) sum of on-site fields, and diag(hop) holds exactly those fields
        return QuadraticForm(self.hop[np.ix_(idx, idx)].copy(),
                             self.pair[np.ix_(idx, idx)].copy(),
                             -0.5 * float(np.trace(self.hop[np.ix_(idx, idx)])))

    def bdg(self) -> np.ndarray:
        """Single-particle BdG matrix in the (a, a^dag) basis."""
        h, d = self.hop, self.pair
        return np.block([[h, d], [-d, -h]])


def build_quadratic_form(spec: ChainSpec) -> QuadraticForm:
    L = spec.n_sites
    N = spec.N
    hop = np.zeros((L, L))
    pair = np.zeros((L, L))

    fields = np.full(L, float(spec.h))
    fields[0] = fields[-1] = spec.h_q
    hop[np.diag_indices(L)] = fields

    for i in range(L - 1):
        boundary = i == 0 or i == N
        J = spec.j if boundary else 1.0
        g = spec.gamma0 if boundary else spec.gamma
        hop[i, i + 1] = hop[i + 1, i] = -0.5 * J
        pair[i, i + 1] = -0.5 * J * g
        pair[i + 1, i] = 0.5 * J * g

    e0 = -0.5 * float(fields.sum())
    return QuadraticForm(hop, pair, e0)


def majorana_generator(q: QuadraticForm) -> np.ndarray:
    """Real antisymmetric A with H = (i/4) c^T A c + const and c(t) = expm(A t) c.

    Majoranas are interleaved per site: (c_{2i}, c_{2i+1}).
    """
    L = q.dim
    A = np.zeros((2 * L, 2 * L))
    K = q.hop - q.pair
    A[0::2, 1::2] = K
    A[1::2, 0::2] = -K.T
    return A


def majorana_offset(q: QuadraticForm) -> float:
    """Constant in H = (i/4) c^T A c + offset."""
    return 0.5 * float(np.trace(q.hop)) + q.e0


def single_particle_energies(q: QuadraticForm) -> np.ndarray:
    """Non-negative quasiparticle energies omega_k, ascending."""
    ev = np.linalg.eigvalsh(1j * majorana_generator(q))
    return np.sort(ev[ev.size // 2:])


def ground_energy(q: QuadraticForm) -> float:
    return majorana_offset(q) - 0.5 * float(single_particle_energies(q).sum())


def mirror_indices(L: int) -> np.ndarray:
    return np.arange(L)[::-1]

"""
The A -> B qubit channel and its figures of merit.

A channel is stored as its Bloch affine map r -> T r + c.  The Choi state is
(E (x) I)(|Phi+><Phi+|) with E acting on the first factor, which is also the
state rho_{BA'} reached when A starts maximally entangled with A'.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .fermion_engine import ZERO_MODE_TOL, PauliResponse, ResponseEngine
from .model import ChainSpec, build_quadratic_form

log = logging.getLogger(__name__)

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)

CP_HARD_TOL = 1e-6
KRAUS_DROP = 1e-12


class CPViolation(ValueError):
    """The reconstructed Choi state is not positive: an upstream algebra bug."""


class WrongModel(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlochAffineMap:
    T: np.ndarray
    c: np.ndarray

    @classmethod
    def identity(cls) -> "BlochAffineMap":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def replacement(cls, bloch) -> "BlochAffineMap":
        return cls(np.zeros((3, 3)), np.asarray(bloch, dtype=float))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Linear extension to any 2x2 operator (complex Pauli coefficients allowed)."""
        r = np.array([np.trace(rho @ P) for P in PAULIS])
        tr = np.trace(rho)
        out = self.T @ r + tr * self.c
        return 0.5 * (tr * I2 + sum(o * P for o, P in zip(out, PAULIS)))

    def then_rotate_z(self, angle: float) -> "BlochAffineMap":
        """Compose with a rotation of the output Bloch vector about z."""
        c, s = np.cos(angle), np.sin(angle)
        Rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        return BlochAffineMap(Rz @ self.T, Rz @ self.c)


@dataclass(frozen=True, eq=False)
class ChannelSnapshot:
    t: float
    choi: np.ndarray
    kraus: list
    f_avg: float
    f_min: float
    concurrence: float
    ent_fidelity: float
    bound_ok: bool
    f_min_aligned: float
    phase: float

    def record(self) -> dict:
        return {
            "t": self.t,
            "f_avg": self.f_avg,
            "f_min": self.f_min,
            "f_min_aligned": self.f_min_aligned,
            "phase": self.phase,
            "concurrence": self.concurrence,
            "ent_fidelity": self.ent_fidelity,
            "bound_ok": self.bound_ok,
            "choi_re": np.real(self.choi).tolist(),
            "choi_im": np.imag(self.choi).tolist(),
            "kraus": [{"re": np.real(k).tolist(), "im": np.imag(k).tolist()} for k in self.kraus],
        }


def channel_from_response(r: PauliResponse | np.ndarray) -> BlochAffineMap:
    e = r.e if isinstance(r, PauliResponse) else np.asarray(r)
    m = BlochAffineMap(e[:, 1:].copy(), e[:, 0].copy())
    _checked_choi(m)
    return m


def choi_matrix(m: BlochAffineMap) -> np.ndarray:
    """(E (x) I)(|Phi+><Phi+|), ordering (output, reference)."""
    choi = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            eij = np.zeros((2, 2), dtype=complex)
            eij[i, j] = 1.0
            choi += 0.5 * np.kron(m.apply(eij), eij)
    return choi


def _checked_choi(m: BlochAffineMap) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    choi = choi_matrix(m)
    w, v = np.linalg.eigh(choi)
    if w.min() < -CP_HARD_TOL:
        raise CPViolation(f"Choi eigenvalue {w.min():.3e} below -{CP_HARD_TOL}")
    if w.min() < 0:
        if w.min() < -1e-9:
            log.warning("clipping Choi eigenvalue %.3e to zero", w.min())
        w = np.clip(w, 0.0, None)
    return choi, w, v


def choi_and_kraus(m: BlochAffineMap) -> tuple[np.ndarray, list]:
    choi, w, v = _checked_choi(m)
    kraus = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam < KRAUS_DROP:
            continue
        # Choi = (1/2) sum_ij E(|i><j|) (x) |i><j|  =>  K[b, a] = sqrt(2 lam) vec[b, a]
        kraus.append(np.sqrt(2 * lam) * vec.reshape(2, 2))
    return choi, kraus


def fidelity_pointwise(m: BlochAffineMap, n) -> float:
    n = np.asarray(n, dtype=float)
    return 0.5 * (1.0 + n @ (m.T @ n + m.c))


def fidelity_average(m: BlochAffineMap) -> float:
    """Haar average of the pointwise fidelity: odd moments vanish, <n_i n_j> = delta_ij/3."""
    return 0.5 + np.trace(m.T) / 6.0


def _sphere(theta, phi):
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def fidelity_min(m: BlochAffineMap, n_theta: int = 64, n_phi: int = 128) -> float:
    """Minimum pointwise fidelity over pure inputs: coarse grid, then local refinement."""
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    n = _sphere(TH.ravel(), PH.ravel())
    f = 0.5 * (1 + np.einsum("ik,ij,jk->k", n, m.T, n) + m.c @ n)
    # the poles are not on the grid
    poles = [fidelity_pointwise(m, (0, 0, 1)), fidelity_pointwise(m, (0, 0, -1))]
    best = int(np.argmin(f))
    x0 = np.array([TH.ravel()[best], PH.ravel()[best]])
    res = minimize(lambda x: fidelity_pointwise(m, _sphere(*x)), x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 2000})
    return float(min(res.fun, f[best], *poles))


def alignment_phase(m: BlochAffineMap) -> float:
    """z-rotation angle of the output that best aligns the transverse block with the identity."""
    T = m.T
    return float(np.arctan2(T[1, 0] - T[0, 1], T[0, 0] + T[1, 1]))


def aligned(m: BlochAffineMap) -> BlochAffineMap:
    """The channel followed by the local z-rotation undoing its transverse phase."""
    return m.then_rotate_z(-alignment_phase(m))


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w.min() < -1e-9:
        raise ValueError(f"density matrix is not positive (eigenvalue {w.min():.3e})")
    yy = np.kron(SY, SY)
    R = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(R).real)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def entanglement_fidelity(choi: np.ndarray) -> float:
    return float(np.real(PHI_PLUS.conj() @ choi @ PHI_PLUS))


def entanglement_suite(m: BlochAffineMap, t: float = 0.0) -> ChannelSnapshot:
    choi, kraus = choi_and_kraus(m)
    f_min = fidelity_min(m)
    fe = entanglement_fidelity(choi)
    conc = concurrence(choi)
    return ChannelSnapshot(
        t=float(t),
        choi=choi,
        kraus=kraus,
        f_avg=float(fidelity_average(m)),
        f_min=f_min,
        concurrence=conc,
        ent_fidelity=fe,
        bound_ok=bool(fe >= 1.5 * f_min - 0.5 - 1e-9),
        f_min_aligned=fidelity_min(aligned(m)),
        phase=alignment_phase(m),
    )


def snapshots(spec: ChainSpec, t_grid, engine: ResponseEngine | None = None) -> list[ChannelSnapshot]:
    eng = engine or ResponseEngine(spec)
    return [entanglement_suite(channel_from_response(eng.at(t)), t) for t in np.atleast_1d(t_grid)]


class XXFastPath:
    """Number-conserving shortcut for gamma = gamma0 = 0.

    With U(t) = expm(-i hop t) the single-particle propagator, the channel is

        T_xy = P_wire [[Re f, -Im f], [Im f, Re f]],  T_zz = |f|^2,
        c_z  = 1 - |f|^2 - 2 sum_{k,l in wire} U*_{Bk} C_kl U_{Bl},

    where f = U_{BA}, C the wire ground-state correlations <a_k^dag a_l> and
    P_wire the ground-state fermion parity of the wire.  Zero-energy wire
    levels are left empty (``zero_mode="pure"``, the +z field limit) or half
    filled (``"half"``).
    """

    def __init__(self, spec: ChainSpec, zero_mode: str = "pure"):
        if not spec.is_xx:
            raise WrongModel("the XX fast path needs gamma = gamma0 = 0")
        self.spec = spec
        q = build_quadratic_form(spec)
        self.eps, self.phi = np.linalg.eigh(q.hop)
        N = spec.N
        we, wv = np.linalg.eigh(q.hop[1:N + 1, 1:N + 1])
        if zero_mode not in ("pure", "half"):
            raise ValueError(f"unknown zero-mode policy {zero_mode!r}")
        z = 0.5 if zero_mode == "half" else 0.0
        occ = np.where(we <= -ZERO_MODE_TOL, 1.0, np.where(np.abs(we) < ZERO_MODE_TOL, z, 0.0))
        self.corr = (wv * occ) @ wv.T
        self.parity = float(np.prod(1.0 - 2.0 * occ))

    def propagator_row(self, t: float) -> np.ndarray:
        """U_{B,k}(t) for all k."""
        B = self.spec.N + 1
        return (self.phi[B] * np.exp(-1j * self.eps * t)) @ self.phi.T

    def amplitude(self, t) -> np.ndarray:
        t = np.atleast_1d(t)
        B = self.spec.N + 1
        w = self.phi[B] * self.phi[0]
        return np.exp(-1j * np.outer(t, self.eps)) @ w

    def response(self, t: float) -> np.ndarray:
        u = self.propagator_row(t)
        f = u[0]
        uw = u[1:self.spec.N + 1]
        nb = np.real(uw.conj() @ self.corr @ uw)
        e = np.zeros((3, 4))
        p = self.parity
        e[0, 1], e[0, 2] = p * f.real, -p * f.imag
        e[1, 1], e[1, 2] = p * f.imag, p * f.real
        e[2, 3] = abs(f) ** 2
        # A maximally mixed contributes |f|^2 / 2 to the occupation of B
        e[2, 0] = 1.0 - 2.0 * nb - abs(f) ** 2
        return e

    def channel(self, t: float) -> BlochAffineMap:
        e = self.response(t)
        return BlochAffineMap(e[:, 1:], e[:, 0])


def xx_fast_path(spec: ChainSpec, t_grid):
    """Transfer amplitude f(t) and the channel metrics derived from it."""
    fp = XXFastPath(spec)
    t_grid = np.atleast_1d(t_grid)
    f = fp.amplitude(t_grid)
    snaps = [entanglement_suite(fp.channel(t), t) for t in t_grid]
    return f, snaps

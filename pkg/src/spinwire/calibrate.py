"""
Choice of the qubit field h_q and of the optimal coupling j_opt.

The coupling j controls how sharply the excitation injected by the qubits is
distributed over the quasiparticle modes of the full chain.  Its width in k
sets the initial real-space width of the travelling packet through
sigma = 1 / (2 sigma_k), and j_opt is the coupling for which this matches the
dispersion optimum sigma_opt.

Finite-chain modes are standing waves, so each quasiparticle mode gets a
quasi-momentum from the sine-transform weight of its wavefunction over the
wire sites.  The injected density is the change of the mode occupations when
the endpoint qubits are flipped along z.  For a finite chain it has Lorentzian
tails, whose second moment grows with the band width rather than with the
peak width; sigma_k is therefore taken as the Gaussian-consistent robust
spread IQR / 1.349.  The plain second-moment value is reported alongside.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.stats import norm

from .dispersion import DegenerateDispersion, DispersionReport, sigma_opt
from .fermion_engine import ground_state_covariance, product_covariance
from .model import ChainSpec, build_quadratic_form, majorana_generator

log = logging.getLogger(__name__)

OCC_TOL = 1e-10
DEGENERACY_TOL = 1e-9
BULK_MIN = 0.5
J_TOL = 1e-3

# interquartile range of a unit Gaussian
IQR_GAUSS = float(norm.ppf(0.75) - norm.ppf(0.25))


class NoBracket(ValueError):
    """sigma_opt lies outside the range of widths reached by the j grid."""


class ModeAssignmentAmbiguous(UserWarning):
    """Weighted modes without a dominant bulk quasi-momentum were left out."""


class NonMonotoneWidth(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class QuasiparticleModes:
    """Positive-energy Bogoliubov modes of the coupled chain.

    ``vectors[:, m]`` is the eigenvector of iA with eigenvalue ``energies[m]``;
    ``k_est`` the spectral-weight quasi-momentum and ``bulk_fraction`` the
    weight of the mode on the wire sites 1..N.
    """

    energies: np.ndarray
    vectors: np.ndarray
    k_est: np.ndarray
    bulk_fraction: np.ndarray


def _sine_basis(N: int) -> tuple[np.ndarray, np.ndarray]:
    sites = np.arange(1, N + 1)
    q = np.pi * sites / (N + 1)
    return q, np.sqrt(2.0 / (N + 1)) * np.sin(np.outer(q, sites))


def quasiparticle_modes(spec: ChainSpec) -> QuasiparticleModes:
    A = majorana_generator(build_quadratic_form(spec))
    lam, U = np.linalg.eigh(1j * A)
    keep = lam > DEGENERACY_TOL
    lam, U = lam[keep], U[:, keep]
    N = spec.N
    q, S = _sine_basis(N)
    wire = np.arange(2, 2 * N + 2)
    # quasi-momentum operator acting on both Majorana components of each wire site
    K = np.zeros((A.shape[0], A.shape[0]))
    Kq = (S.T * q) @ S
    for off in (0, 1):
        K[np.ix_(wire[off::2], wire[off::2])] = Kq
    # eigh leaves degenerate pairs (k, pi - k) mixed: split them by quasi-momentum
    start = 0
    while start < lam.size:
        stop = start + 1
        while stop < lam.size and lam[stop] - lam[start] < DEGENERACY_TOL:
            stop += 1
        if stop - start > 1:
            B = U[:, start:stop]
            _, R = np.linalg.eigh(B.conj().T @ K @ B)
            U[:, start:stop] = B @ R
        start = stop
    w = np.abs(S @ U[wire[0::2]]) ** 2 + np.abs(S @ U[wire[1::2]]) ** 2
    bulk = w.sum(axis=0)
    k = (q @ w) / np.where(bulk > 0, bulk, 1.0)
    return QuasiparticleModes(lam, U, k, bulk)


def mode_occupations(spec: ChainSpec, modes: QuasiparticleModes, z_a: float, z_b: float) -> np.ndarray:
    """<b_m^dag b_m> in rho_A(z_a) (x) wire ground (x) rho_B(z_b)."""
    wire = build_quadratic_form(spec).block(range(1, spec.N + 1))
    G = product_covariance(ground_state_covariance(wire, warn=False), z_a, z_b).cov
    V = modes.vectors
    return 0.5 * (1.0 - np.real(1j * np.einsum("mk,mn,nk->k", V, G, V.conj())))


def _weighted_quantile(x, w, p):
    order = np.argsort(x)
    x, w = x[order], w[order]
    cdf = (np.cumsum(w) - 0.5 * w) / w.sum()
    return np.interp(p, cdf, x)


@dataclass(frozen=True, eq=False)
class ExcitationDensity:
    k_est: np.ndarray
    occupation_excess: np.ndarray
    energies: np.ndarray
    bulk_fraction: np.ndarray
    sigma_est: float
    sigma_variance: float
    k_mean: float
    k_median: float
    excluded_weight: float
    injected: float

    @property
    def modes(self) -> list[tuple[float, float]]:
        return list(zip(self.k_est.tolist(), self.occupation_excess.tolist()))


def excitation_density(spec: ChainSpec, alpha=(0, 0, 1), beta=(0, 0, 1),
                       bulk_min: float = BULK_MIN) -> ExcitationDensity:
    """Quasiparticle occupation change injected by the endpoint qubits.

    ``occupation_excess`` is n_m(alpha, beta) - n_m(alpha', beta') with the
    primed qubit states reflected along z.  Only the z components enter, since
    the occupations are even in the Majoranas.
    """
    if spec.j <= 0:
        raise ValueError("the qubits must be coupled (j > 0)")
    za, zb = float(alpha[2]), float(beta[2])
    if za == 0 and zb == 0:
        raise ValueError("qubit states with zero z component inject no excitation")
    modes = quasiparticle_modes(spec)
    dn = mode_occupations(spec, modes, za, zb) - mode_occupations(spec, modes, -za, -zb)
    w = np.abs(dn)
    use = (w > OCC_TOL) & (modes.bulk_fraction >= bulk_min)
    dropped = (w > OCC_TOL) & ~use
    excluded = float(w[dropped].sum() / w.sum())
    if dropped.any():
        warnings.warn(f"{int(dropped.sum())} boundary-localized mode(s) excluded, "
                      f"carrying {excluded:.3%} of the injected weight", ModeAssignmentAmbiguous, stacklevel=2)
    if use.sum() < 2:
        raise ValueError("fewer than two bulk modes carry the injected excitation")
    k, ww = modes.k_est[use], w[use]
    k_mean = float(ww @ k / ww.sum())
    var = float(ww @ (k - k_mean) ** 2 / ww.sum())
    iqr = _weighted_quantile(k, ww, 0.75) - _weighted_quantile(k, ww, 0.25)
    return ExcitationDensity(
        k_est=modes.k_est,
        occupation_excess=dn,
        energies=modes.energies,
        bulk_fraction=modes.bulk_fraction,
        sigma_est=float(IQR_GAUSS / (2.0 * iqr)),
        sigma_variance=float(1.0 / (2.0 * np.sqrt(var))),
        k_mean=k_mean,
        k_median=float(_weighted_quantile(k, ww, 0.5)),
        excluded_weight=excluded,
        injected=float(w.sum()),
    )


@dataclass(frozen=True, eq=False)
class SigmaTable:
    j: np.ndarray
    sigma: np.ndarray
    monotone: bool

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.j.tolist(), self.sigma.tolist()))


def sigma_of_j(spec: ChainSpec, j_grid, alpha=(0, 0, 1), beta=(0, 0, 1)) -> SigmaTable:
    j_grid = np.asarray(j_grid, dtype=float)
    if np.any(j_grid <= 0) or np.any(j_grid > 1 + 1e-12):
        raise ValueError("j grid must lie in (0, 1]")
    j_grid = np.sort(j_grid)
    sig = np.array([excitation_density(spec.with_(j=float(j)), alpha, beta).sigma_est for j in j_grid])
    mono = bool(np.all(np.diff(sig) < 0))
    if not mono:
        warnings.warn("sigma_est(j) is not monotone decreasing on the grid", NonMonotoneWidth, stacklevel=2)
    return SigmaTable(j_grid, sig, mono)


# below about j = 0.3 the qubit level width drops under the mode spacing of
# short chains and the density collapses onto one or two modes
DEFAULT_J_GRID = np.round(np.arange(0.3, 1.0001, 0.05), 10)


def find_j_opt(spec: ChainSpec, report: DispersionReport, j_grid=None,
               alpha=(0, 0, 1), beta=(0, 0, 1), table: SigmaTable | None = None) -> float:
    """Coupling at which sigma_est(j) = sigma_opt, bisected to 1e-3 in j."""
    if report.a == 0:
        raise DegenerateDispersion("a = 0: no optimal width")
    target = sigma_opt(report.a, report.v, spec.N)
    tab = table or sigma_of_j(spec, DEFAULT_J_GRID if j_grid is None else j_grid, alpha, beta)
    diff = tab.sigma - target
    cross = np.nonzero(np.sign(diff[:-1]) != np.sign(diff[1:]))[0]
    if cross.size == 0:
        raise NoBracket(f"sigma_opt = {target:.4f} outside [{tab.sigma.min():.4f}, {tab.sigma.max():.4f}]")
    if cross.size > 1:
        # non-monotone: take the widest bracket around all sign changes
        lo, hi = tab.j[cross[0]], tab.j[cross[-1] + 1]
        log.warning("several crossings of sigma_opt; bracketing [%.3f, %.3f]", lo, hi)
    else:
        lo, hi = tab.j[cross[0]], tab.j[cross[0] + 1]
    f = lambda j: excitation_density(spec.with_(j=j), alpha, beta).sigma_est - target
    return float(bisect(f, lo, hi, xtol=J_TOL))


@dataclass(frozen=True, eq=False)
class FidelitySurface:
    j: np.ndarray
    t: np.ndarray
    f_min: np.ndarray  # shape (len(j), len(t))

    @property
    def peak(self) -> np.ndarray:
        return self.f_min.max(axis=1)

    @property
    def grid_argmax_j(self) -> float:
        return float(self.j[int(np.argmax(self.peak))])

    @property
    def argmax_j(self) -> float:
        """Grid argmax refined by a parabola through it and its two neighbours."""
        i = int(np.argmax(self.peak))
        if i == 0 or i == self.j.size - 1:
            return float(self.j[i])
        x, y = self.j[i - 1:i + 2], self.peak[i - 1:i + 2]
        c2, c1, _ = np.polyfit(x, y, 2)
        if c2 >= 0:
            return float(self.j[i])
        return float(np.clip(-c1 / (2 * c2), x[0], x[2]))


def scan_j_for_fidelity(spec: ChainSpec, j_grid, t_window, n_t: int = 201,
                        aligned: bool = True) -> FidelitySurface:
    """Minimum fidelity over a (j, t) grid.

    With ``aligned`` the fixed z-rotation of the output is undone first, so the
    figure of merit is the fidelity up to that local operation.
    """
    from . import channel as ch

    t = np.linspace(t_window[0], t_window[1], n_t)
    j_grid = np.asarray(j_grid, dtype=float)
    out = np.empty((j_grid.size, t.size))
    for a, j in enumerate(j_grid):
        s = spec.with_(j=float(j))
        if s.is_xx:
            fp = ch.XXFastPath(s)
            maps = (fp.channel(tt) for tt in t)
        else:
            eng = ch.ResponseEngine(s)
            maps = (ch.channel_from_response(eng.at(tt)) for tt in t)
        for b, m in enumerate(maps):
            out[a, b] = ch.fidelity_min(ch.aligned(m) if aligned else m)
    return FidelitySurface(j_grid, t, out)


def set_hq(report: DispersionReport, spec: ChainSpec, fine_tune: bool = False,
           window: float = 0.1) -> ChainSpec:
    """Put the qubit level at the inflection energy, optionally refined.

    The refinement moves h_q within +-window * omega_k0 to bring the median
    quasi-momentum of the injected density onto k0.
    """
    hq = report.omega_k0
    out = spec.with_(h_q=hq)
    if not fine_tune or hq == 0:
        return out
    lo, hi = hq * (1 - window), hq * (1 + window)
    cost = lambda x: abs(excitation_density(spec.with_(h_q=x)).k_median - report.k0)
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
    return spec.with_(h_q=float(res.x))

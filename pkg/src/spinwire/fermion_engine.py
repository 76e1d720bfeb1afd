"""
Exact Gaussian dynamics of the fermionized chain.

Conventions (see :mod:`spinwire.model` for the Majorana definitions):

* covariance  Gamma_mn = (i/2) <[c_m, c_n]>, so <c_m c_n> = delta_mn - i Gamma_mn
  and the eigenvalues of i*Gamma lie in [-1, 1] (+-1 for pure states);
* <sigma^z_i> = -Gamma_{2i, 2i+1};
* total parity P = prod_i sigma^z_i = (-i)^L c_0 c_1 ... c_{2L-1}.

All observables are evaluated in the Heisenberg picture against the initial
product state rho_A (x) rho_wire (x) rho_B.  A qubit coherence is carried as
a Majorana *insertion* on a Gaussian component, so that

    Tr[X O] = weight * < insertion * O >_gaussian .

Because the initial covariance is block diagonal over (A, wire, B), any
Majorana monomial factorizes into per-block Pfaffians, and the full-block
Pfaffians are cached.  This keeps parity-weighted expectations (needed for the
transverse spin components of qubit B, which carry the Jordan-Wigner string)
cheap even at N = 500.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .model import ChainSpec, QuadraticForm, build_quadratic_form, majorana_generator, majorana_offset
from .pfaffian import pfaffian

ZERO_MODE_TOL = 1e-12


class DegenerateGroundState(UserWarning):
    """A single-particle level sits at zero energy, so its filling is a policy choice."""


@dataclass(eq=False)
class CovarianceState:
    """Gaussian state given by its Majorana covariance matrix.

    ``blocks`` lists contiguous Majorana ranges (start, stop) over which the
    state is a product of even states; an evolved state has a single block.
    """

    cov: np.ndarray
    blocks: tuple = ()
    zero_modes: int = 0
    _pf_cache: dict = field(default_factory=dict, repr=False)
    _pf_sources: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.blocks:
            self.blocks = ((0, self.cov.shape[0]),)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def block_pfaffian(self, b: int):
        if b not in self._pf_cache:
            if b in self._pf_sources:
                src, sb = self._pf_sources[b]
                self._pf_cache[b] = src.block_pfaffian(sb)
            else:
                lo, hi = self.blocks[b]
                self._pf_cache[b] = pfaffian(self.cov[lo:hi, lo:hi])
        return self._pf_cache[b]

    def correlation(self) -> np.ndarray:
        """<c_m c_n> as a complex matrix."""
        return np.eye(self.dim) - 1j * self.cov


@dataclass(frozen=True, eq=False)
class Component:
    """One term ``weight * rho_G * Q`` of a decomposed initial state.

    Q is an optional total-parity factor followed by the Majoranas in ``insertion``.
    """

    weight: float
    state: CovarianceState
    insertion: tuple = ()
    parity: bool = False

    @property
    def is_gaussian(self) -> bool:
        return not self.insertion and not self.parity

    @property
    def is_odd(self) -> bool:
        return len(self.insertion) % 2 == 1


def _zero_mode_covariance(V0: np.ndarray) -> np.ndarray:
    """Pure state on the span of near-zero modes, selected by an infinitesimal +z field.

    When the field does not lift the degeneracy either (separated Majorana edge
    modes), the real basis vectors are paired in order.
    """
    W, sv, _ = np.linalg.svd(np.hstack([V0.real, V0.imag]), full_matrices=False)
    W = W[:, :V0.shape[1]]
    n = W.shape[0] // 2
    Az = np.zeros((2 * n, 2 * n))
    Az[0::2, 1::2] = np.eye(n)
    Az[1::2, 0::2] = -np.eye(n)
    lam, U = np.linalg.eigh(1j * (W.T @ Az @ W))
    if np.min(np.abs(lam)) > 1e-8:
        block = np.real(1j * (U * np.sign(lam)) @ U.conj().T)
    else:
        block = np.zeros((W.shape[1], W.shape[1]))
        block[0::2, 1::2] = np.eye(W.shape[1] // 2)
        block[1::2, 0::2] = -np.eye(W.shape[1] // 2)
    return W @ block @ W.T


def ground_state_covariance(wire: QuadraticForm, warn: bool = True, zero_mode: str = "pure") -> CovarianceState:
    """Covariance of the quasiparticle vacuum of ``wire``.

    Levels with |omega| < 1e-12 are counted in ``zero_modes``.  With
    ``zero_mode="half"`` they get occupation 1/2, giving a mixture of the two
    parity sectors; ``"pure"`` picks one definite-parity ground state instead
    (see :func:`_zero_mode_covariance`).
    """
    if zero_mode not in ("pure", "half"):
        raise ValueError(f"unknown zero-mode policy {zero_mode!r}")
    A = majorana_generator(wire)
    lam, V = np.linalg.eigh(1j * A)
    s = np.sign(lam)
    zero = np.abs(lam) < ZERO_MODE_TOL
    s[zero] = 0.0
    cov = np.real(1j * (V * s) @ V.conj().T)
    nzero = int(zero.sum()) // 2
    if nzero and zero_mode == "pure":
        cov = cov + _zero_mode_covariance(V[:, zero])
    cov = 0.5 * (cov - cov.T)
    if nzero and warn:
        how = "occupation 1/2" if zero_mode == "half" else "a definite-parity choice"
        warnings.warn(f"{nzero} zero mode(s) in the wire spectrum; filled with {how}",
                      DegenerateGroundState, stacklevel=2)
    return CovarianceState(cov, zero_modes=nzero)


def energy(q: QuadraticForm, state: CovarianceState) -> float:
    A = majorana_generator(q)
    return 0.25 * float(np.sum(A * state.cov)) + majorana_offset(q)


def _qubit_block(z: float) -> np.ndarray:
    return np.array([[0.0, -z], [z, 0.0]])


def product_covariance(wire_cov: CovarianceState, z_a: float, z_b: float) -> CovarianceState:
    """Covariance of rho_A(z_a) (x) wire (x) rho_B(z_b), qubits polarized along z only."""
    n = wire_cov.dim
    cov = np.zeros((n + 4, n + 4))
    cov[:2, :2] = _qubit_block(z_a)
    cov[2:n + 2, 2:n + 2] = wire_cov.cov
    cov[n + 2:, n + 2:] = _qubit_block(z_b)
    st = CovarianceState(cov, blocks=((0, 2), (2, n + 2), (n + 2, n + 4)),
                         zero_modes=wire_cov.zero_modes)
    if len(wire_cov.blocks) == 1:
        st._pf_sources[1] = (wire_cov, 0)
    return st


def assemble_initial_state(wire_cov: CovarianceState, alpha, beta) -> list[Component]:
    """Decompose rho_A (x) rho_wire (x) rho_B into Gaussian and Majorana-inserted terms.

    With sigma^x_A = c_0, sigma^y_A = c_1, sigma^x_B = i P c_{2B+1} and
    sigma^y_B = -i P c_{2B}, the transverse parts of the qubit states become
    insertions on the Gaussian with the corresponding qubit unpolarized.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.linalg.norm(alpha) > 1 + 1e-12 or np.linalg.norm(beta) > 1 + 1e-12:
        raise ValueError("Bloch vectors must have norm <= 1")
    L = wire_cov.dim // 2 + 2
    bx, by = 2 * L - 2, 2 * L - 1

    # per qubit: (weight, z-polarization, insertion, parity)
    a_terms = [(1.0, alpha[2], (), False)]
    if alpha[0]:
        a_terms.append((alpha[0], 0.0, (0,), False))
    if alpha[1]:
        a_terms.append((alpha[1], 0.0, (1,), False))
    b_terms = [(1.0, beta[2], (), False)]
    if beta[0]:
        b_terms.append((1j * beta[0], 0.0, (by,), True))
    if beta[1]:
        b_terms.append((-1j * beta[1], 0.0, (bx,), True))

    out = []
    for wa, za, ia, _ in a_terms:
        for wb, zb, ib, pb in b_terms:
            st = product_covariance(wire_cov, za, zb)
            # rho_G c_a (P c_b) = rho_G P c_a c_b with a sign from moving P past c_a
            ins = ia + ib
            w = wa * wb
            if pb and len(ia) % 2:
                w = -w
            out.append(Component(w, st, ins, pb))
    return out


def canonical(seq) -> tuple[int, tuple]:
    """Reduce a product of Majoranas to sorted distinct indices and a sign."""
    s = np.asarray(seq, dtype=np.int64)
    if s.size < 2:
        return 1, tuple(int(x) for x in s)
    inv = int(np.count_nonzero(np.triu(s[:, None] > s[None, :], k=1)))
    sign = -1 if inv % 2 else 1
    s = np.sort(s, kind="stable")
    vals, counts = np.unique(s, return_counts=True)
    return sign, tuple(int(v) for v in vals[counts % 2 == 1])


def _sorted_expectation(state: CovarianceState, idx: tuple) -> complex:
    if len(idx) % 2:
        return 0.0
    if not idx:
        return 1.0
    arr = np.asarray(idx)
    value = 1.0 + 0j
    for b, (lo, hi) in enumerate(state.blocks):
        sub = arr[(arr >= lo) & (arr < hi)]
        if sub.size % 2:
            return 0.0
        if sub.size == 0:
            continue
        if sub.size == hi - lo:
            pf = state.block_pfaffian(b)
        else:
            pf = pfaffian(state.cov[np.ix_(sub, sub)])
        value *= (-1j) ** (sub.size // 2) * pf
        if value == 0:
            return 0.0
    return value


def majorana_monomial_expectation(state: CovarianceState, indices) -> complex:
    """<c_{i1} c_{i2} ... c_{ik}> for distinct indices (Wick's theorem via Pfaffians)."""
    if len(set(indices)) != len(indices):
        raise ValueError("repeated Majorana index")
    sign, idx = canonical(indices)
    return sign * _sorted_expectation(state, idx)


def _sequence_expectation(state, seq, parity=False) -> complex:
    coef = 1.0 + 0j
    if parity:
        L = state.dim // 2
        coef = (-1j) ** L
        seq = list(range(state.dim)) + list(seq)
    sign, idx = canonical(seq)
    return coef * sign * _sorted_expectation(state, idx)


def parity_weighted_expectation(state: CovarianceState, indices) -> complex:
    """<P c_{i1} ... c_{ik}> with P the total fermion parity."""
    if len(set(indices)) != len(indices):
        raise ValueError("repeated Majorana index")
    return _sequence_expectation(state, indices, parity=True)


class Propagator:
    """R(t) = expm(A t) from one eigendecomposition of the Hermitian i*A."""

    def __init__(self, A: np.ndarray):
        self.A = A
        self.lam, self.V = np.linalg.eigh(1j * A)
        self._Vh = self.V.conj().T

    @classmethod
    def from_spec(cls, spec: ChainSpec) -> "Propagator":
        return cls(majorana_generator(build_quadratic_form(spec)))

    def matrix(self, t: float) -> np.ndarray:
        return np.real((self.V * np.exp(-1j * self.lam * t)) @ self._Vh)

    def rows(self, t: float, idx) -> np.ndarray:
        return np.real((self.V[idx] * np.exp(-1j * self.lam * t)) @ self._Vh)


def evolve(state: CovarianceState, M, t: float) -> CovarianceState:
    """Covariance at time t; ``M`` is a generator matrix or a :class:`Propagator`."""
    prop = M if isinstance(M, Propagator) else Propagator(M)
    R = prop.matrix(t)
    return CovarianceState(R @ state.cov @ R.T, zero_modes=state.zero_modes)


class _Moments:
    """Initial-time tables <Q c_k> (with P) and <Q c_k c_l> for one component."""

    def __init__(self, comp: Component):
        self.comp = comp

    @cached_property
    def quadratic(self) -> np.ndarray:
        c = self.comp
        st = c.state
        if c.is_gaussian:
            return st.correlation()
        n = st.dim
        W = np.zeros((n, n), dtype=complex)
        # Q c_k c_l needs an even total count (P is even)
        if len(c.insertion) % 2:
            return W
        for k in range(n):
            W[k, k] = _sequence_expectation(st, c.insertion, c.parity)
            for l in range(k + 1, n):
                W[k, l] = _sequence_expectation(st, c.insertion + (k, l), c.parity)
                W[l, k] = -W[k, l]
        return W

    @cached_property
    def parity_linear(self) -> np.ndarray:
        """<Q P c_k> for every k."""
        c = self.comp
        st = c.state
        n = st.dim
        w = np.zeros(n, dtype=complex)
        if len(c.insertion) % 2 == 0:
            return w
        L = n // 2
        # Q P c_k = [P] insertion P c_k ; the two parities cancel when Q carries one
        for k in range(n):
            if c.parity:
                # P ins P = (-1)^{len(ins)} ins, P^2 = 1
                w[k] = (-1) ** len(c.insertion) * _sequence_expectation(st, c.insertion + (k,))
            else:
                seq = list(c.insertion) + list(range(n)) + [k]
                sign, idx = canonical(seq)
                w[k] = (-1j) ** L * sign * _sorted_expectation(st, idx)
        return w


def _moments(comp: Component) -> _Moments:
    m = getattr(comp, "_moments", None)
    if m is None:
        m = _Moments(comp)
        object.__setattr__(comp, "_moments", m)
    return m


def evolved_quadratic(comp: Component, ra: np.ndarray, rb: np.ndarray) -> complex:
    """weight * <Q c_a(t) c_b(t)> given rows ra = R[a], rb = R[b]."""
    if comp.is_gaussian:
        cov = comp.state.cov
        return comp.weight * (ra @ rb - 1j * ra @ cov @ rb)
    return comp.weight * (ra @ _moments(comp).quadratic @ rb)


def evolved_parity_linear(comp: Component, r: np.ndarray) -> complex:
    """weight * <Q P c_a(t)> given row r = R[a]."""
    if comp.is_gaussian:
        return 0.0
    return comp.weight * (r @ _moments(comp).parity_linear)


def magnetization_profile(components, prop: Propagator, t: float) -> np.ndarray:
    """<S^z_i(t)> on every site; odd components never contribute."""
    R = prop.matrix(t)
    L = R.shape[0] // 2
    out = np.zeros(L)
    for comp in components:
        if comp.is_odd:
            continue
        if comp.is_gaussian:
            G = R @ comp.state.cov @ R.T
            out += comp.weight * -0.5 * np.diagonal(G, 1)[0::2]
        else:
            W = R @ _moments(comp).quadratic @ R.T
            out += np.real(comp.weight * -0.5j * np.diagonal(W, 1)[0::2])
    return out


@dataclass(frozen=True, eq=False)
class PauliResponse:
    """e[alpha, mu] = Tr[(sigma_A^mu/2 (x) rho_wire (x) |up><up|) sigma_B^alpha(t)].

    Rows alpha = x, y, z at B; columns mu = 1, x, y, z at A.
    """

    t: float
    e: np.ndarray


class ResponseEngine:
    """Shared factorization for Pauli responses of qubit B over many times."""

    def __init__(self, spec: ChainSpec, prop: Propagator | None = None, zero_mode: str = "pure"):
        self.spec = spec
        q = build_quadratic_form(spec)
        self.wire_cov = ground_state_covariance(q.block(range(1, spec.N + 1)), zero_mode=zero_mode)
        self.prop = prop or Propagator(majorana_generator(q))
        mixed = product_covariance(self.wire_cov, 0.0, 1.0)
        up = product_covariance(self.wire_cov, 1.0, 1.0)
        self._g_mixed = Component(1.0, mixed)
        self._g_up = Component(1.0, up)
        self._x = Component(1.0, mixed, (0,))
        self._y = Component(1.0, mixed, (1,))
        b = spec.N + 1
        self.bx, self.by = 2 * b, 2 * b + 1

    def at(self, t: float) -> PauliResponse:
        ra, rb = self.prop.rows(t, [self.bx, self.by])
        # sigma^z_B = -i c_{2B} c_{2B+1}
        z = [(-1j * evolved_quadratic(c, ra, rb)).real for c in (self._g_mixed, self._g_up)]
        e = np.zeros((3, 4))
        e[2, 0] = z[0]
        e[2, 3] = z[1] - z[0]
        for col, comp in ((1, self._x), (2, self._y)):
            # sigma^x_B = i P c_{2B+1}, sigma^y_B = -i P c_{2B}
            e[0, col] = (1j * evolved_parity_linear(comp, rb)).real
            e[1, col] = (-1j * evolved_parity_linear(comp, ra)).real
        return PauliResponse(float(t), e)


def pauli_response(spec: ChainSpec, t_grid, prop: Propagator | None = None,
                   zero_mode: str = "pure") -> list[PauliResponse]:
    eng = ResponseEngine(spec, prop, zero_mode)
    return [eng.at(t) for t in np.atleast_1d(t_grid)]

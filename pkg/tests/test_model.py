import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinwire import ed_oracle as ed
from spinwire.model import (ChainSpec, build_quadratic_form, ground_energy, majorana_generator,
                            mirror_indices, read_config, single_particle_energies, write_config)

params = st.builds(
    ChainSpec,
    N=st.integers(1, 5),
    gamma=st.floats(-1, 1),
    gamma0=st.floats(-1, 1),
    h=st.floats(-1.5, 1.5),
    h_q=st.floats(-1.5, 1.5),
    j=st.floats(0, 1.5),
)


def test_spec_validation():
    with pytest.raises(ValueError):
        ChainSpec(N=0)
    with pytest.raises(ValueError):
        ChainSpec(N=3, j=-0.1)
    s = ChainSpec(N=4, gamma=0.5)
    assert s.n_sites == 6
    assert not s.is_xx
    assert ChainSpec(N=4).is_xx


def test_config_round_trip(tmp_path):
    s = ChainSpec(N=7, gamma=0.25, gamma0=0.5, h=0.5, h_q=0.85, j=0.49)
    path = tmp_path / "chain.cfg"
    write_config(s.to_config(), path)
    assert ChainSpec.from_config(read_config(path)) == s


def test_config_rejects_unknown_keys():
    with pytest.raises(KeyError):
        ChainSpec.from_config({"n": 3, "jj": 1})


def test_zero_coupling_decouples_qubits():
    q = build_quadratic_form(ChainSpec(N=5, gamma=0.3, h=0.4, h_q=0.7, j=0.0))
    assert np.all(q.hop[0, 1:] == 0) and np.all(q.pair[0, 1:] == 0)
    assert np.all(q.hop[-1, :-1] == 0) and np.all(q.pair[-1, :-1] == 0)


@given(params)
@settings(max_examples=40, deadline=None)
def test_quadratic_form_structure(spec):
    q = build_quadratic_form(spec)
    assert np.allclose(q.hop, q.hop.T)
    assert np.allclose(q.pair, -q.pair.T)
    A = majorana_generator(q)
    assert np.isrealobj(A)
    assert np.allclose(A, -A.T)


@given(params)
@settings(max_examples=40, deadline=None)
def test_mirror_symmetry(spec):
    q = build_quadratic_form(spec)
    m = mirror_indices(spec.n_sites)
    assert np.allclose(q.hop[np.ix_(m, m)], q.hop)
    assert np.allclose(np.abs(q.pair[np.ix_(m, m)]), np.abs(q.pair))


@pytest.mark.parametrize("spec", [
    ChainSpec(N=4, gamma=0.5, gamma0=0.5, h=0.5, h_q=0.85, j=0.49),
    ChainSpec(N=6, gamma=0.5, h=0.5, j=0.4, h_q=0.85),
    ChainSpec(N=5, gamma=-0.3, gamma0=0.7, h=-0.2, h_q=0.1, j=1.1),
])
def test_spectrum_matches_dense(spec):
    # single-particle energies are the excitation gaps of the many-body spectrum
    E = np.linalg.eigvalsh(ed.build_dense_hamiltonian(spec))
    eps = np.sort(single_particle_energies(build_quadratic_form(spec)))
    assert ground_energy(build_quadratic_form(spec)) == pytest.approx(E[0], abs=1e-10)
    # all 2^L levels are E0 + sums of subsets of eps
    L = eps.size
    sums = np.array([sum(eps[i] for i in range(L) if m >> i & 1) for m in range(2 ** L)])
    assert np.allclose(np.sort(E[0] + sums), E, atol=1e-9)


def test_block_offset_keeps_fields():
    s = ChainSpec(N=4, h=0.3, h_q=0.9, j=0.5)
    q = build_quadratic_form(s)
    assert q.e0 == pytest.approx(-(4 * 0.3 + 2 * 0.9) / 2)
    assert q.block(range(1, 5)).e0 == pytest.approx(-4 * 0.3 / 2)

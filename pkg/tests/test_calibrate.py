import subprocess
import sys
import warnings

import numpy as np
import pytest

from spinwire.calibrate import (DEFAULT_J_GRID, ModeAssignmentAmbiguous, NoBracket, excitation_density, find_j_opt,
                                quasiparticle_modes, scan_j_for_fidelity, set_hq, sigma_of_j)
from spinwire.dispersion import DegenerateDispersion, dispersion_report
from spinwire.model import ChainSpec


def xx(N=50, j=0.6):
    return ChainSpec(N=N, gamma=0.0, gamma0=0.0, h=0.0, h_q=0.0, j=j)


@pytest.fixture(scope="module")
def xx_report():
    return dispersion_report(0.0, 0.0, 50)


@pytest.fixture(scope="module")
def xx_table():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sigma_of_j(xx(), DEFAULT_J_GRID)


def test_modes_are_orthonormal_and_positive():
    m = quasiparticle_modes(ChainSpec(N=12, gamma=0.5, gamma0=0.5, h=0.5, h_q=0.85, j=0.5))
    assert np.all(m.energies > 0)
    assert np.allclose(m.vectors.conj().T @ m.vectors, np.eye(m.energies.size), atol=1e-10)
    assert np.all((m.k_est > 0) & (m.k_est < np.pi))
    assert np.all((m.bulk_fraction >= 0) & (m.bulk_fraction <= 1 + 1e-12))


def test_xx_density_centred_on_half_pi():
    d = excitation_density(xx())
    assert d.k_mean == pytest.approx(np.pi / 2, rel=0.05)
    assert d.k_median == pytest.approx(np.pi / 2, rel=0.05)
    # a flipped up/up pair injects exactly two excitations
    assert d.injected == pytest.approx(2.0, abs=1e-9)
    assert len(d.modes) == d.k_est.size


def test_density_antisymmetric_under_z_reflection():
    s = ChainSpec(N=30, gamma=0.5, gamma0=0.5, h=0.5, h_q=0.85, j=0.5)
    up = excitation_density(s, (0, 0, 1), (0, 0, 1))
    down = excitation_density(s, (0, 0, -1), (0, 0, -1))
    assert np.allclose(up.occupation_excess, -down.occupation_excess, atol=1e-12)
    assert up.sigma_est == pytest.approx(down.sigma_est)


def test_density_input_validation():
    with pytest.raises(ValueError):
        excitation_density(xx(), (1, 0, 0), (0, 1, 0))
    with pytest.raises(ValueError):
        excitation_density(xx(j=0.0))


def test_sigma_table_brackets_target(xx_table, xx_report):
    s = xx_table.sigma
    assert np.sum(s > xx_report.sigma_opt) >= 1 and np.sum(s < xx_report.sigma_opt) >= 1
    assert s[-1] < s[np.searchsorted(xx_table.j, 0.4)]
    assert len(xx_table.rows()) == DEFAULT_J_GRID.size


def test_sigma_grid_validation():
    with pytest.raises(ValueError):
        sigma_of_j(xx(), [0.5, 1.2])


def test_xx_j_opt(xx_report, xx_table):
    j = find_j_opt(xx(), xx_report, table=xx_table)
    assert j == pytest.approx(0.58, abs=0.05)


def test_no_bracket(xx_report):
    with pytest.raises(NoBracket):
        find_j_opt(xx(), xx_report, j_grid=[0.9, 0.95, 1.0])


def test_linear_band_has_no_optimum(xx_report):
    flat = xx_report.__class__(**{**xx_report.to_dict(), "a": 0.0})
    with pytest.raises(DegenerateDispersion):
        find_j_opt(xx(), flat)


def test_j_opt_decreases_with_length():
    grid = np.round(np.arange(0.25, 0.81, 0.05), 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        j50 = find_j_opt(xx(50), dispersion_report(0, 0, 50), j_grid=grid)
        j100 = find_j_opt(xx(100), dispersion_report(0, 0, 100), j_grid=grid)
    assert j100 < j50


def test_set_hq():
    spec = ChainSpec(N=50, gamma=0.5, gamma0=0.5, h=0.5, h_q=0.0, j=0.5)
    rep = dispersion_report(0.5, 0.5, 50)
    assert set_hq(rep, spec).h_q == rep.omega_k0
    tuned = set_hq(rep, spec, fine_tune=True)
    assert abs(tuned.h_q - rep.omega_k0) <= 0.1 * rep.omega_k0 + 1e-9


def test_calibration_is_deterministic():
    s = ChainSpec(N=24, gamma=0.5, gamma0=0.5, h=0.5, h_q=0.85, j=0.6)
    a, b = excitation_density(s), excitation_density(s)
    assert a.sigma_est == b.sigma_est
    assert np.array_equal(a.occupation_excess, b.occupation_excess)


def test_fidelity_scan_prefers_j_opt_over_strong_coupling():
    surf = scan_j_for_fidelity(xx(), [0.6, 1.0], (40, 70), n_t=121)
    assert surf.f_min.shape == (2, 121)
    assert surf.peak[0] > surf.peak[1]
    assert surf.grid_argmax_j == 0.6


def test_boundary_modes_are_flagged():
    # a qubit level far above the band binds the excitation to the qubits
    spec = ChainSpec(N=30, gamma=0.5, gamma0=0.5, h=0.5, h_q=3.0, j=0.3)
    with pytest.warns(ModeAssignmentAmbiguous):
        d = excitation_density(spec)
    assert d.excluded_weight > 0.9
    assert excitation_density(xx()).excluded_weight == 0.0


def test_set_hq_xx_is_zero():
    rep = dispersion_report(0.0, 0.0, 50)
    assert set_hq(rep, xx()).h_q == pytest.approx(0.0, abs=1e-12)


def test_scan_argmax_stable_under_time_refinement():
    js = [0.5, 0.55, 0.6, 0.65]
    coarse = scan_j_for_fidelity(xx(), js, (40, 70), n_t=61)
    fine = scan_j_for_fidelity(xx(), js, (40, 70), n_t=121)
    assert coarse.grid_argmax_j == fine.grid_argmax_j


def test_calibration_does_not_touch_channel_pipeline():
    code = ("import sys\nfrom spinwire.calibrate import excitation_density\nfrom spinwire.model import ChainSpec\n"
            "excitation_density(ChainSpec(N=10, j=0.5))\nassert 'spinwire.channel' not in sys.modules")
    subprocess.run([sys.executable, "-c", code], check=True)

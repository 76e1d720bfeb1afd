"""
Infinite-wire dispersion, its inflection point and the wavepacket kinematics
that fix the optimal packet width.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq


class NoInflection(ValueError):
    pass


class DegenerateDispersion(ValueError):
    """The cubic coefficient vanishes, so no width is preferred."""


def omega(k, gamma: float, h: float):
    k = np.asarray(k, dtype=float)
    return np.sqrt((h - np.cos(k)) ** 2 + gamma ** 2 * np.sin(k) ** 2)


def band(k, gamma: float, h: float):
    """Smooth branch used for derivatives: h - cos k at gamma = 0, omega otherwise."""
    if gamma == 0:
        return h - np.cos(np.asarray(k, dtype=float))
    return omega(k, gamma, h)


# central-difference stencils (offsets, weights) with O(step^2) error
_STENCILS = {
    1: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
}


def derivative(f, x: float, order: int, step: float = 0.1, levels: int = 5) -> float:
    """Central finite difference with Richardson extrapolation over halved steps."""
    offs, wts = _STENCILS[order]
    table = []
    for i in range(levels):
        s = step / 2 ** i
        row = [float(np.dot(wts, f(x + offs * s))) / s ** order]
        for m in range(1, i + 1):
            fac = 4 ** m
            row.append((fac * row[m - 1] - table[i - 1][m - 1]) / (fac - 1))
        table.append(row)
    return table[-1][-1]


def band_derivative(k: float, gamma: float, h: float, order: int) -> float:
    return derivative(lambda x: band(x, gamma, h), k, order)


def find_inflection(gamma: float, h: float, n_grid: int = 2001) -> float:
    """Inflection point of the band in (0, pi); ties broken by the largest |group velocity|."""
    d2 = lambda k: band_derivative(k, gamma, h, 2)
    grid = np.linspace(1e-3, np.pi - 1e-3, n_grid)
    vals = np.array([d2(k) for k in grid])
    if np.max(np.abs(vals)) < 1e-10:
        raise NoInflection(f"flat band for gamma={gamma}, h={h}")
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(d2, a, b, xtol=1e-14, rtol=1e-15))
    if not roots:
        raise NoInflection(f"no inflection point for gamma={gamma}, h={h}")
    return max(roots, key=lambda k: abs(band_derivative(k, gamma, h, 1)))


def expansion_coeffs(gamma: float, h: float, k0: float) -> tuple[float, float, float]:
    """(omega_k0, v, a) with omega ~ omega_k0 + v dk + (2a/3) dk^3 around k0."""
    w0 = float(omega(k0, gamma, h))
    v = band_derivative(k0, gamma, h, 1)
    a = band_derivative(k0, gamma, h, 3) / 4.0
    return w0, v, a


def sigma_opt(a: float, v: float, N: float) -> float:
    if a == 0:
        raise DegenerateDispersion("a = 0: linear band, every width is optimal")
    if v <= 0 or N < 1:
        raise ValueError("need v > 0 and N >= 1")
    return (abs(a) * N / v) ** (1.0 / 3.0)


def kinematics(sigma: float, v: float, a: float, t):
    """Packet centre and width at time t for an initial width sigma."""
    t = np.asarray(t, dtype=float)
    x = (v + a / sigma ** 2) * t
    width = np.sqrt(sigma ** 2 + a ** 2 * t ** 2 / (2 * sigma ** 4))
    return x, width


def predict_arrival(v: float, a: float, N: float, sigma: float) -> dict:
    """Arrival time from the closed form v t = N - sgn(a) sigma / 2 and from x(t) = N."""
    closed = (N - np.sign(a) * sigma / 2) / v
    speed = v + a / sigma ** 2
    root = N / speed if speed > 0 else float("nan")
    return {"closed_form": float(closed), "kinematic_root": float(root)}


@dataclass(frozen=True)
class DispersionReport:
    gamma: float
    h: float
    N: int
    k0: float
    omega_k0: float
    v: float
    a: float
    sigma_opt: float
    t_arrival: float
    t_arrival_kinematic: float
    sigma_at_arrival: float

    def to_dict(self) -> dict:
        return asdict(self)


def dispersion_report(gamma: float, h: float, N: int) -> DispersionReport:
    k0 = find_inflection(gamma, h)
    w0, v, a = expansion_coeffs(gamma, h, k0)
    if v < 0:
        # mirror to the right-moving branch
        v, a = -v, -a
    s = sigma_opt(a, v, N)
    arr = predict_arrival(v, a, N, s)
    _, s_arr = kinematics(s, v, a, N / v)
    return DispersionReport(gamma, h, N, k0, w0, v, a, s, arr["closed_form"],
                            arr["kinematic_root"], float(s_arr))


def dispersion_table(gamma: float, h: float, n_points: int = 201) -> np.ndarray:
    k = np.linspace(0, np.pi, n_points)
    return np.column_stack([k, omega(k, gamma, h)])

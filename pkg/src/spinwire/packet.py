"""Real-space tracking of the excitation injected by qubit A."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .fermion_engine import Propagator, assemble_initial_state, ground_state_covariance, magnetization_profile
from .model import ChainSpec, build_quadratic_form


class PacketTracker:
    """Magnetization change caused by flipping qubit A, with B fixed up.

    For the XX chain this is |U_{iA}(t)|^2, the single-particle probability of
    the excitation released by A.
    """

    def __init__(self, spec: ChainSpec):
        self.spec = spec
        q = build_quadratic_form(spec)
        wire = ground_state_covariance(q.block(range(1, spec.N + 1)), warn=False)
        self.prop = Propagator.from_spec(spec)
        self._up = assemble_initial_state(wire, (0, 0, 1), (0, 0, 1))
        self._down = assemble_initial_state(wire, (0, 0, -1), (0, 0, 1))

    def profile(self, t: float) -> np.ndarray:
        return (magnetization_profile(self._up, self.prop, t)
                - magnetization_profile(self._down, self.prop, t))


@dataclass(frozen=True)
class PacketFit:
    t: float
    center: float
    width: float
    height: float
    weight_on_a: float


def _gauss(x, h, x0, s):
    return h * np.exp(-(x - x0) ** 2 / (2 * s ** 2))


def fit_packet(profile: np.ndarray, t: float = 0.0) -> PacketFit:
    """Gaussian fit over the wire sites 1..N (qubit sites excluded)."""
    N = profile.size - 2
    x = np.arange(1, N + 1, dtype=float)
    p = profile[1:N + 1]
    i = int(np.argmax(p))
    popt, _ = curve_fit(_gauss, x, p, p0=[p[i], x[i], 2.0], maxfev=10000)
    return PacketFit(float(t), float(popt[1]), float(abs(popt[2])), float(popt[0]), float(profile[0]))


def track_packet(spec: ChainSpec, times) -> list[PacketFit]:
    tr = PacketTracker(spec)
    return [fit_packet(tr.profile(t), t) for t in np.atleast_1d(times)]


def packet_velocity(fits: list[PacketFit]) -> float:
    """Least-squares slope of the fitted centre against time."""
    t = np.array([f.t for f in fits])
    x = np.array([f.center for f in fits])
    return float(np.polyfit(t, x, 1)[0])

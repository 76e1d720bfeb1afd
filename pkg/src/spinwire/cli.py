"""
Command-line front end.

Every run resolves a flat configuration (config file, then ``--set`` overrides),
hashes it, and writes ``{experiment}-{hash}.{csv|json}`` plus a manifest
``{experiment}-{hash}.manifest.json`` holding the resolved configuration and a
summary.  Passing a manifest back through ``--config`` repeats the run.

Exit codes: 0 success, 1 invalid configuration, 2 numerical-contract violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as ch
from . import ed_oracle as ed
from .calibrate import (FidelitySurface, excitation_density, find_j_opt, scan_j_for_fidelity, set_hq,
                        sigma_of_j)
from .dispersion import dispersion_report, dispersion_table, kinematics
from .fermion_engine import (DegenerateGroundState, Propagator, ResponseEngine, assemble_initial_state,
                             ground_state_covariance, magnetization_profile)
from .model import CONFIG_KEYS, ChainSpec, build_quadratic_form, read_config
from .packet import PacketTracker, fit_packet, packet_velocity

log = logging.getLogger("spinwire")

SCHEMA_VERSION = 1
EXPERIMENTS = ("dispersion", "calibrate", "evolve", "channel", "scan-j", "scaling", "oracle-check")

# the Bell entry is the reduced state of a qubit maximally entangled with a partner
NAMED_STATES = {
    "up": (0.0, 0.0, 1.0),
    "down": (0.0, 0.0, -1.0),
    "plus": (1.0, 0.0, 0.0),
    "bell": (0.0, 0.0, 0.0),
}

# experiment-specific keys and their defaults (None: derived from the chain)
EXTRA_DEFAULTS = {
    "calibrate": {"j_min": 0.3, "j_max": 1.0, "j_step": 0.05, "hq_mode": "given"},
    "scan-j": {"j_min": 0.4, "j_max": 0.8, "j_step": 0.02, "t_min": None, "aligned": True},
    "scaling": {"n_list": "50,250", "j_min": 0.3, "j_max": 1.0, "j_step": 0.05},
    "oracle-check": {"draws": 20, "max_n": 6, "tol": 1e-8},
}
COMMON_DEFAULTS = {"t_max": None, "t_steps": 600, "alpha": "up", "beta": "up", "seed": 0}


class ContractViolation(RuntimeError):
    """A computed quantity broke one of its numerical guarantees."""


def _to_bool(x) -> bool:
    if isinstance(x, bool):
        return x
    s = str(x).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {x!r}")


def resolve_state(x) -> tuple[float, float, float]:
    if isinstance(x, str):
        s = x.strip().lower()
        if s in NAMED_STATES:
            return NAMED_STATES[s]
        parts = s.replace(" ", "").split(",")
    else:
        parts = list(x)
    if len(parts) != 3:
        raise ValueError(f"state must be a name {sorted(NAMED_STATES)} or a Bloch vector x,y,z: {x!r}")
    vec = tuple(float(p) for p in parts)
    if np.linalg.norm(vec) > 1 + 1e-12:
        raise ValueError(f"Bloch vector {vec} has norm > 1")
    return vec


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    chain: ChainSpec
    t_max: float
    t_steps: int
    alpha: tuple
    beta: tuple
    seed: int
    params: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        out = {"experiment": self.experiment, **self.chain.to_config(), "t_max": self.t_max,
               "t_steps": self.t_steps, "alpha": list(self.alpha), "beta": list(self.beta), "seed": self.seed}
        out.update(self.params)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.t_steps)


def build_config(experiment: str, raw: dict) -> RunConfig:
    """Validate a flat key/value mapping into a RunConfig."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    raw = {k: v for k, v in raw.items() if k != "experiment"}
    extras = dict(EXTRA_DEFAULTS.get(experiment, {}))
    known = set(CONFIG_KEYS) | set(COMMON_DEFAULTS) | set(extras)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown configuration keys for {experiment}: {sorted(unknown)}")
    chain = ChainSpec.from_config({"n": 50, **{k: raw[k] for k in CONFIG_KEYS if k in raw}})
    merged = {**COMMON_DEFAULTS, **{k: raw[k] for k in COMMON_DEFAULTS if k in raw}}
    t_steps = int(merged["t_steps"])
    if t_steps < 2:
        raise ValueError("t_steps must be >= 2")
    t_max = merged["t_max"]
    if t_max is None or str(t_max).lower() == "none":
        rep = dispersion_report(chain.gamma, chain.h, chain.N)
        t_max = 1.5 * chain.N / rep.v
    t_max = float(t_max)
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    params = {}
    for k, default in extras.items():
        v = raw.get(k, default)
        if v is None or str(v).lower() == "none":
            params[k] = None
        elif isinstance(default, bool):
            params[k] = _to_bool(v)
        elif isinstance(default, int) and not isinstance(default, bool):
            params[k] = int(v)
        elif isinstance(default, float):
            params[k] = float(v)
        else:
            params[k] = str(v)
    return RunConfig(experiment, chain, t_max, t_steps, resolve_state(merged["alpha"]),
                     resolve_state(merged["beta"]), int(merged["seed"]), params)


def load_raw_config(path) -> dict:
    """Flat key = value file, or a manifest written by a previous run."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return dict(data["config"])
    return read_config(path)


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 10)


@dataclass
class Result:
    columns: list
    rows: list
    summary: dict


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_dispersion(cfg: RunConfig, threads: int) -> Result:
    s = cfg.chain
    rep = dispersion_report(s.gamma, s.h, s.N)
    table = dispersion_table(s.gamma, s.h)
    t = np.linspace(0.0, rep.t_arrival, 11)
    x, w = kinematics(rep.sigma_opt, rep.v, rep.a, t)
    rows = [[float(k), "omega", float(o)] for k, o in table]
    rows += [[float(tt), "center", float(xx)] for tt, xx in zip(t, x)]
    rows += [[float(tt), "width", float(ww)] for tt, ww in zip(t, w)]
    return Result(["x", "series", "value"], rows, rep.to_dict())


def _calibrated(cfg: RunConfig, spec: ChainSpec, p: dict):
    rep = dispersion_report(spec.gamma, spec.h, spec.N)
    mode = p.get("hq_mode", "given")
    if mode == "omega":
        spec = set_hq(rep, spec)
    elif mode == "fine":
        spec = set_hq(rep, spec, fine_tune=True)
    elif mode != "given":
        raise ValueError(f"hq_mode must be given, omega or fine, not {mode!r}")
    table = sigma_of_j(spec, _grid(p["j_min"], p["j_max"], p["j_step"]), cfg.alpha, cfg.beta)
    j_opt = find_j_opt(spec, rep, alpha=cfg.alpha, beta=cfg.beta, table=table)
    dens = excitation_density(spec.with_(j=j_opt), cfg.alpha, cfg.beta)
    return spec.with_(j=j_opt), rep, table, dens


def run_calibrate(cfg: RunConfig, threads: int) -> Result:
    spec, rep, table, dens = _calibrated(cfg, cfg.chain, cfg.params)
    summary = {"k0": rep.k0, "omega_k0": rep.omega_k0, "v": rep.v, "a": rep.a,
               "sigma_opt": rep.sigma_opt, "h_q": spec.h_q, "j_opt": spec.j,
               "excluded_weight": dens.excluded_weight, "k_median": dens.k_median,
               "sigma_variance_rule": dens.sigma_variance, "monotone": table.monotone}
    return Result(["j", "sigma_est"], [list(r) for r in table.rows()], summary)


def run_evolve(cfg: RunConfig, threads: int) -> Result:
    s = cfg.chain
    q = build_quadratic_form(s)
    wire = ground_state_covariance(q.block(range(1, s.N + 1)))
    comps = assemble_initial_state(wire, cfg.alpha, cfg.beta)
    prop = Propagator.from_spec(s)
    profiles = _map(lambda t: magnetization_profile(comps, prop, t), cfg.times, threads)
    rows = [[float(t), i, float(m)] for t, prof in zip(cfg.times, profiles) for i, m in enumerate(prof)]
    mb = np.array([p[-1] for p in profiles])
    k = int(np.argmax(mb))
    return Result(["t", "site", "sz"], rows, {"peak_sz_b": float(mb[k]), "t_peak_sz_b": float(cfg.times[k])})


def _channel_maps(spec: ChainSpec, times):
    if spec.is_xx:
        fp = ch.XXFastPath(spec)
        return [fp.channel(t) for t in times]
    eng = ResponseEngine(spec)
    return [ch.channel_from_response(eng.at(t)) for t in times]


def _peaks(y: np.ndarray) -> list[int]:
    return [i for i in range(1, y.size - 1) if y[i] > y[i - 1] and y[i] >= y[i + 1]]


def echo_peak(t: np.ndarray, c: np.ndarray, floor: float = 0.05):
    """Main peak and the largest later local maximum separated from it by a dip below half the peak."""
    i = int(np.argmax(c))
    later = [k for k in _peaks(c) if k > i and np.min(c[i:k + 1]) < 0.5 * c[i] and c[k] > floor]
    if not later:
        return i, None
    return i, max(later, key=lambda k: c[k])


def run_channel(cfg: RunConfig, threads: int) -> Result:
    times = cfg.times
    maps = _channel_maps(cfg.chain, times)
    snaps = _map(lambda a: ch.entanglement_suite(a[1], a[0]), list(zip(times, maps)), threads)
    names = ("f_avg", "f_min", "f_min_aligned", "concurrence", "ent_fidelity")
    rows = []
    for sn in snaps:
        for n in names:
            rows.append([sn.t, n, float(getattr(sn, n))])
    c = np.array([sn.concurrence for sn in snaps])
    i, e = echo_peak(times, c)
    unitarity = max(float(np.abs(sum(k.conj().T @ k for k in sn.kraus) - np.eye(2)).max()) for sn in snaps)
    bound = all(sn.bound_ok for sn in snaps)
    if unitarity > 1e-10 or not bound:
        raise ContractViolation(f"Kraus completeness error {unitarity:.2e}, bound ok: {bound}")
    summary = {"peak_concurrence": float(c[i]), "t_peak": float(times[i]),
               "peak_f_avg": float(max(sn.f_avg for sn in snaps)),
               "peak_f_min_aligned": float(max(sn.f_min_aligned for sn in snaps)),
               "echo_concurrence": None if e is None else float(c[e]),
               "t_echo": None if e is None else float(times[e]),
               "kraus_completeness_error": unitarity}
    return Result(["t", "series", "value"], rows, summary)


def run_scan_j(cfg: RunConfig, threads: int) -> Result:
    p = cfg.params
    rep = dispersion_report(cfg.chain.gamma, cfg.chain.h, cfg.chain.N)
    t_min = p["t_min"] if p["t_min"] is not None else 0.5 * cfg.chain.N / rep.v
    js = _grid(p["j_min"], p["j_max"], p["j_step"])
    surfaces = _map(lambda j: scan_j_for_fidelity(cfg.chain, [j], (t_min, cfg.t_max), cfg.t_steps,
                                                  aligned=p["aligned"]), js, threads)
    f = np.vstack([s.f_min for s in surfaces])
    t = surfaces[0].t
    surf = FidelitySurface(js, t, f)
    rows = [[float(j), float(tt), float(v)] for j, row in zip(js, f) for tt, v in zip(t, row)]
    return Result(["j", "t", "f_min"], rows, {"argmax_j": surf.argmax_j, "grid_argmax_j": surf.grid_argmax_j,
                                               "peak_f_min": float(surf.peak.max())})


def _scaling_row(cfg: RunConfig, N: int) -> dict:
    spec, rep, _, _ = _calibrated(cfg, cfg.chain.with_(N=N), cfg.params)
    t_n = rep.t_arrival
    # the transfer peak lags the bulk estimate by the emission and absorption time
    times = np.linspace(0.8 * t_n, 1.4 * t_n + 20, 241)
    maps = _channel_maps(spec, times)
    conc = np.array([ch.concurrence(ch.choi_matrix(m)) for m in maps])
    favg = np.array([ch.fidelity_average(m) for m in maps])
    k = int(np.argmax(conc))
    tracker = PacketTracker(spec)
    start = next(t for t in np.arange(1.0, t_n, 1.0) if abs(tracker.profile(t)[0]) < 0.01)
    w0 = fit_packet(tracker.profile(start), start)
    w1 = fit_packet(tracker.profile(t_n), t_n)
    return {"N": N, "j_opt": spec.j, "peak_concurrence": float(conc[k]), "t_peak": float(times[k]),
            "peak_f_avg": float(favg.max()), "t_n_predicted": t_n,
            "width_ratio_sigma_opt": w1.width / rep.sigma_opt, "width_ratio_initial": w1.width / w0.width,
            "error": ""}


def run_scaling(cfg: RunConfig, threads: int) -> Result:
    ns = [int(x) for x in str(cfg.params["n_list"]).split(",") if x.strip()]
    if ns != sorted(ns):
        raise ValueError("n_list must be sorted ascending")

    def one(N):
        try:
            return _scaling_row(cfg, N)
        except Exception as exc:  # keep going, report the row
            log.error("N=%d failed: %s", N, exc)
            return {"N": N, "error": f"{type(exc).__name__}: {exc}"}

    rows = _map(one, ns, threads)
    cols = ["N", "j_opt", "peak_concurrence", "t_peak", "peak_f_avg", "t_n_predicted",
            "width_ratio_sigma_opt", "width_ratio_initial", "error"]
    return Result(cols, [[r.get(c, "") for c in cols] for r in rows],
                  {"rows": len(rows), "failed": sum(bool(r["error"]) for r in rows)})


def oracle_draw(rng: np.random.Generator, max_n: int):
    N = int(rng.integers(2, max_n + 1))
    xx = rng.random() < 0.3
    g = 0.0 if xx else float(rng.uniform(-0.8, 0.8))
    g0 = 0.0 if xx else float(rng.uniform(-0.8, 0.8))
    spec = ChainSpec(N=N, gamma=g, gamma0=g0, h=float(rng.uniform(-1, 1)),
                     h_q=float(rng.uniform(-1, 1)), j=float(rng.uniform(0.1, 1.2)))
    a = rng.normal(size=3)
    b = rng.normal(size=3)
    alpha = a / np.linalg.norm(a) * rng.uniform(0, 1)
    beta = b / np.linalg.norm(b) * rng.uniform(0, 1)
    return spec, alpha, beta, float(rng.uniform(0.1, 6.0))


def oracle_errors(spec: ChainSpec, alpha, beta, t: float) -> dict:
    """Largest deviations between the Gaussian engine and dense diagonalization."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateGroundState)
        ev = ed.DenseEvolver.from_spec(spec)
        L = spec.n_sites
        rho = ed.evolve_density(ed.initial_density(spec, alpha, beta, policy="field"), ev, t)
        q = build_quadratic_form(spec)
        wire = ground_state_covariance(q.block(range(1, spec.N + 1)))
        comps = assemble_initial_state(wire, alpha, beta)
        prop = Propagator.from_spec(spec)
        err_m = np.abs(magnetization_profile(comps, prop, t) - ed.magnetization(rho, L)).max()
        eng = ResponseEngine(spec, prop)
        e = eng.at(t).e
        err_e = np.abs(e - ed.pauli_response(spec, t, ev, policy="field")).max()
        m = ch.BlochAffineMap(e[:, 1:], e[:, 0])
        rho_b = m.apply(ed.qubit_rho(alpha))
        ref_b = ed.reduced_density_matrix(
            ed.evolve_density(ed.initial_density(spec, alpha, (0, 0, 1), policy="field"), ev, t), [L - 1], L)
        err_b = np.abs(rho_b - ref_b).max()
        err_ba = np.abs(ch.choi_matrix(m) - ed.bell_output(spec, t, ev, policy="field")).max()
    return {"magnetization": float(err_m), "pauli_response": float(err_e),
            "rho_b": float(err_b), "rho_ba": float(err_ba)}


def run_oracle_check(cfg: RunConfig, threads: int) -> Result:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    draws = [oracle_draw(rng, p["max_n"]) for _ in range(p["draws"])]
    errs = _map(lambda d: oracle_errors(*d), draws, threads)
    cols = ["draw", "n", "gamma", "gamma0", "h", "h_q", "j", "t",
            "magnetization", "pauli_response", "rho_b", "rho_ba"]
    rows = []
    for i, ((s, _, _, t), e) in enumerate(zip(draws, errs)):
        rows.append([i, s.N, s.gamma, s.gamma0, s.h, s.h_q, s.j, t] + [e[k] for k in cols[-4:]])
    worst = max(max(e.values()) for e in errs)
    if worst > p["tol"]:
        raise ContractViolation(f"engine deviates from the dense oracle by {worst:.3e}")
    return Result(cols, rows, {"max_error": worst, "draws": len(draws)})


RUNNERS = {
    "dispersion": run_dispersion,
    "calibrate": run_calibrate,
    "evolve": run_evolve,
    "channel": run_channel,
    "scan-j": run_scan_j,
    "scaling": run_scaling,
    "oracle-check": run_oracle_check,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def write_outputs(cfg: RunConfig, res: Result, out_dir: Path, fmt: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.experiment}-{cfg.digest()}"
    table = out_dir / f"{stem}.{fmt}"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(res.columns)
        w.writerows(_jsonable(res.rows))
        table.write_text(buf.getvalue())
    else:
        table.write_text(json.dumps({"columns": res.columns, "rows": _jsonable(res.rows)}, indent=1) + "\n")
    manifest = out_dir / f"{stem}.manifest.json"
    doc = {"schema_version": SCHEMA_VERSION, "tool": "spinwire", "version": __version__,
           "experiment": cfg.experiment, "config": cfg.resolved(), "outputs": [table.name],
           "summary": _jsonable(res.summary)}
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return [table, manifest]


def parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinwire", description="Quantum-state transfer through an XY spin wire")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", type=Path, help="flat key = value file, or a manifest from an earlier run")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    ap.add_argument("--output-dir", type=Path, default=Path("runs"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_raw_config(args.config) if args.config else {}
        raw.update(parse_overrides(args.set))
        cfg = build_config(args.experiment, raw)
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        res = RUNNERS[cfg.experiment](cfg, args.threads)
    except (ch.CPViolation, ContractViolation) as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    paths = write_outputs(cfg, res, args.output_dir, args.format)
    print(json.dumps(_jsonable(res.summary), sort_keys=True))
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

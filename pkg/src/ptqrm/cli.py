"""Command-line front end.

Every subcommand reads a configuration assembled from (lowest to highest
priority) built-in defaults, a named preset, a ``key=value`` file and
command-line flags, then writes a CSV or JSON table.  Data files carry no
run metadata; when ``--out`` is given a ``<out>.manifest.json`` file records
the resolved configuration.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, adiabatic, dynamics, lindblad, model, spectral
from .errors import DimensionError, IntegrationError, SearchError, SolverError
from .model import ModelParams, Representation

logger = logging.getLogger("ptqrm")

LOG_ENV = "PTQRM_LOG_LEVEL"

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SEARCH, EXIT_INTEGRATOR = 0, 2, 3, 4, 5

SPECTRUM_COLUMNS = ["axis_value", "pair", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus",
                    "phase", "fidelity", "photon_plus", "photon_minus", "W_plus", "W_minus"]
DYNAMICS_COLUMNS = ["t", "norm", "log_norm", "photon", "population"]
LINDBLAD_COLUMNS = DYNAMICS_COLUMNS + ["trace", "sink"]
JUDDIAN_COLUMNS = ["pair", "root", "g"]
CONVERGE_COLUMNS = ["n_max_from", "n_max_to", "drift", "threshold", "passed"]

DEFAULTS = {
    "delta": 0.5, "epsilon": 0.0, "omega": 1.0, "g": 0.0, "rep": "bare_z",
    "n_max": 40, "axis": "epsilon", "start": 0.0, "stop": 1.0, "count": 101, "pairs": 4,
    "tol": 1e-10, "im_tol": 1e-9, "workers": 1, "format": "csv",
    "t_max": "20pi", "dt": 1e-3, "initial": "0,+", "record_every": 1,
    "snapshot_stride": 100, "renorm_guard": 1e6, "jump": True, "trace_tol": 1e-8,
    "bracket": "", "bracket_width": 0.1, "g_max": 2.0, "k": 22, "nmax_list": "40,60,80",
    "epsilons": "",
}

PRESETS = {
    "fig2a": {"delta": 0.5, "g": 0.0, "axis": "epsilon", "start": 0.0, "stop": 1.0,
              "count": 201, "n_max": 40},
    "fig2b": {"delta": 0.5, "g": 0.2, "axis": "epsilon", "start": 0.0, "stop": 1.0,
              "count": 201, "n_max": 40},
    "fig2c": {"delta": 0.5, "g": 0.5, "axis": "epsilon", "start": 0.0, "stop": 1.0,
              "count": 201, "n_max": 60},
    "fig2d": {"delta": 0.5, "g": 1.8, "axis": "epsilon", "start": 0.0, "stop": 1.0,
              "count": 201, "n_max": 140},
    "fig3": {"delta": 0.5, "epsilon": 0.1, "axis": "g", "start": 0.0, "stop": 1.0,
             "count": 101, "n_max": 80},
    "fig4": {"delta": 0.5, "g": 0.05, "epsilon": 0.6, "n_max": 20, "initial": "0,+",
             "t_max": "200pi", "epsilons": "0,0.1,0.3,0.55,0.6,0.7", "record_every": 10},
    "fig5": {"delta": 0.5, "g": 0.7, "epsilon": 0.1, "n_max": 110, "initial": "4,+",
             "t_max": "300pi", "record_every": 100},
}

_FLOAT_KEYS = {"delta", "epsilon", "omega", "g", "start", "stop", "tol", "im_tol", "dt",
               "renorm_guard", "trace_tol", "bracket_width", "g_max"}
_INT_KEYS = {"n_max", "count", "pairs", "workers", "record_every", "snapshot_stride", "k"}
_BOOL_KEYS = {"jump"}
_STR_KEYS = {"rep", "axis", "format", "initial", "bracket", "nmax_list", "epsilons", "t_max",
             "out", "snapshots"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS


class ConfigError(ValueError):
    pass


def parse_time(text) -> float:
    """Parse ``"200pi"``, ``"200*pi"``, ``"pi"`` or a plain number."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower().replace(" ", "")
    m = re.fullmatch(r"([0-9.eE+-]*)\*?pi", s)
    try:
        if m:
            return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse time {text!r}") from exc


def _coerce(key: str, value):
    if key not in KNOWN_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            as_float = float(value)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return str(value)


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; blank lines ignored."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = _coerce(key, value)
    return out


@dataclass
class RunConfig:
    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError as exc:
            raise AttributeError(name) from exc

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.delta, self.epsilon, self.omega, self.g)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def as_dict(self) -> dict:
        return dict(sorted(self.values.items()))


def resolve_config(args) -> RunConfig:
    values = dict(DEFAULTS)
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[args.preset])
    if args.config:
        values.update(read_config_file(args.config))
    for key in KNOWN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag)
    values = {k: (_coerce(k, v) if k in KNOWN_KEYS else v) for k, v in values.items()}
    cfg = RunConfig(values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    try:
        cfg.params
        Representation.parse(cfg.rep)
        model.check_n_max(cfg.n_max)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.axis not in ("g", "epsilon"):
        raise ConfigError(f"axis must be g or epsilon, got {cfg.axis!r}")
    if cfg.count < 2 or not cfg.start < cfg.stop:
        raise ConfigError("grid needs count >= 2 and start < stop")
    if cfg.start < 0:
        raise ConfigError("grid values must be non-negative")
    for key in ("tol", "im_tol", "dt", "trace_tol", "bracket_width", "g_max"):
        if not cfg.values[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if cfg.renorm_guard <= 1:
        raise ConfigError("renorm_guard must exceed 1")
    if cfg.pairs < 1 or cfg.workers < 1 or cfg.record_every < 1 or cfg.k < 1:
        raise ConfigError("pairs, workers, record_every and k must be positive")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    if parse_time(cfg.t_max) < 0:
        raise ConfigError("t_max must be non-negative")
    n0, _ = parse_initial(cfg.initial)
    if n0 is not None and n0 > cfg.n_max:
        raise ConfigError(f"initial photon number {n0} exceeds n_max={cfg.n_max}")


def parse_initial(text: str):
    """``"n,q"`` with ``q`` in ``+``/``-``, or ``"eig:k"`` for eigenvector ``k``."""
    s = str(text).strip().lower()
    if s.startswith("eig:"):
        try:
            return None, int(s[4:])
        except ValueError as exc:
            raise ConfigError(f"bad eigenstate index in {text!r}") from exc
    parts = [x.strip() for x in s.split(",")]
    if len(parts) != 2 or parts[1] not in ("+", "-", "+z", "-z"):
        raise ConfigError(f"initial state must look like '4,+' or 'eig:19', got {text!r}")
    try:
        n = int(parts[0])
    except ValueError as exc:
        raise ConfigError(f"bad photon number in {text!r}") from exc
    if n < 0:
        raise ConfigError("initial photon number must be non-negative")
    return n, parts[1][0]


def _float_list(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list for {name}: {text!r}") from exc


# ---- output -------------------------------------------------------------

def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.11e}"
    return str(value)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_value(row[c]) for c in columns) + "\n")
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render_json(rows) -> str:
    clean = [{k: _jsonable(v) for k, v in row.items()} for row in rows]
    return json.dumps(clean, indent=2) + "\n"


def emit(cfg: RunConfig, args, columns, rows, out=None, extra_manifest=None) -> None:
    text = render_csv(columns, rows) if cfg.format == "csv" else render_json(rows)
    target = out if out is not None else cfg.values.get("out")
    if target is None:
        sys.stdout.write(text)
        return
    path = Path(target)
    path.write_text(text, newline="\n")
    manifest = {"command": args.command, "version": __version__, "config": cfg.as_dict(),
                "rows": len(rows), "format": cfg.format}
    if extra_manifest:
        manifest.update(extra_manifest)
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2, default=str)
                                                  + "\n", newline="\n")


# ---- commands ------------------------------------------------------------

def _pair_row(x, pair) -> dict:
    return {"axis_value": x, "pair": pair.n,
            "re_E_plus": pair.e_plus.real, "im_E_plus": pair.e_plus.imag,
            "re_E_minus": pair.e_minus.real, "im_E_minus": pair.e_minus.imag,
            "phase": pair.phase, "fidelity": pair.fidelity,
            "photon_plus": pair.photon_plus, "photon_minus": pair.photon_minus,
            "W_plus": pair.w_plus, "W_minus": pair.w_minus}


def cmd_spectrum(cfg, args):
    rows = spectral.sweep(cfg.params, cfg.axis, cfg.grid, cfg.n_max, n_pairs=cfg.pairs,
                          tol=cfg.tol, im_tol=cfg.im_tol * cfg.omega, workers=cfg.workers)
    emit(cfg, args, SPECTRUM_COLUMNS, [_pair_row(r.axis_value, r.pair) for r in rows])


def aa_level_pair(p: ModelParams, n: int) -> spectral.LevelPair:
    sol = adiabatic.aa_pair(p, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", adiabatic.DegeneratePairWarning)
        w_plus, w_minus = adiabatic.aa_qubit_population(p, n)
    photon = adiabatic.aa_photon(p, n)
    return spectral.LevelPair(n, sol.e_plus, sol.e_minus, "PTS" if sol.is_pts else "PTB",
                              adiabatic.aa_fidelity(p, n), photon, photon, w_plus, w_minus)


def cmd_aa(cfg, args):
    rows = []
    for x in cfg.grid:
        p = cfg.params.replace(**{cfg.axis: float(x)})
        rows.extend(_pair_row(float(x), aa_level_pair(p, n)) for n in range(cfg.pairs))
    emit(cfg, args, SPECTRUM_COLUMNS, rows)


def _seed_brackets(seeds, width, lower=0.0):
    brackets = []
    for i, s in enumerate(seeds):
        lo = s - width if i == 0 else max(s - width, 0.5 * (seeds[i - 1] + s))
        hi = s + width if i == len(seeds) - 1 else min(s + width, 0.5 * (s + seeds[i + 1]))
        brackets.append((max(lo, lower), hi))
    return brackets


def cmd_ep(cfg, args):
    """Exact and AA exceptional points per pair along the configured axis."""
    p = cfg.params
    explicit = _float_list(cfg.bracket, "bracket") if cfg.bracket else None
    if explicit is not None and (len(explicit) != 2 or not explicit[0] < explicit[1]):
        raise ConfigError("bracket must be 'lo,hi' with lo < hi")
    im_tol = cfg.im_tol * p.omega
    rows = []
    for n in range(cfg.pairs):
        if cfg.axis == "epsilon":
            seed = adiabatic.aa_ep_epsilon(p, n)
            annihilated = seed <= 1e-12 * p.omega
            rows.append({"pair": n, "axis": "epsilon", "location": seed, "method": "aa",
                         "status": "annihilated" if annihilated else "predicted"})
            seeds = [seed]
        else:
            seeds = adiabatic.aa_ep_couplings(p, n, cfg.g_max)
            annihilated = False
            rows.extend({"pair": n, "axis": "g", "location": s, "method": "aa",
                         "status": "predicted"} for s in seeds)
        if explicit is not None:
            brackets = [tuple(explicit)]
        elif annihilated:
            brackets = [(0.0, cfg.bracket_width)]
        else:
            brackets = _seed_brackets(seeds, cfg.bracket_width)
        for bracket in brackets:
            try:
                loc = spectral.find_ep(p, cfg.axis, bracket, n, cfg.n_max, im_tol=im_tol,
                                       tol=cfg.tol)
                status = "annihilated" if annihilated else "found"
            except SearchError:
                if not annihilated:
                    raise
                loc, status = None, "annihilated"
            rows.append({"pair": n, "axis": cfg.axis, "location": loc, "method": "exact",
                         "status": status})
    if cfg.format == "csv":
        for row in rows:
            if row["location"] is None:
                row["location"] = "nan"
        emit(cfg, args, ["pair", "axis", "location", "method", "status"], rows)
    else:
        emit(cfg, args, None, rows)


def cmd_juddian(cfg, args):
    rows = []
    for n in range(1, cfg.pairs + 1):
        for k, g in enumerate(adiabatic.juddian_points(n, cfg.omega, cfg.g_max)):
            rows.append({"pair": n, "root": k, "g": g})
    emit(cfg, args, JUDDIAN_COLUMNS, rows)


def cmd_converge(cfg, args):
    try:
        n_list = [int(x) for x in str(cfg.nmax_list).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad nmax_list {cfg.nmax_list!r}") from exc
    if len(n_list) < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("nmax_list needs at least two increasing truncations")
    report = spectral.convergence_check(cfg.params, n_list, cfg.k, Representation.parse(cfg.rep))
    rows = [{"n_max_from": a, "n_max_to": b, "drift": d, "threshold": report.threshold,
             "passed": d <= report.threshold}
            for a, b, d in zip(n_list, n_list[1:], report.drifts)]
    emit(cfg, args, CONVERGE_COLUMNS, rows)


def _initial_state(cfg, rep, p):
    n, q = parse_initial(cfg.initial)
    if n is not None:
        return dynamics.bare_state(n, q, cfg.n_max)
    decomp = spectral.eigendecompose(model.build_hamiltonian(p, rep, cfg.n_max), cfg.tol)
    if not 0 <= q < decomp.dim:
        raise ConfigError(f"eigenstate index {q} outside [0, {decomp.dim})")
    return decomp.vectors[:, q].copy()


def _dynamics_run(job):
    cfg_values, epsilon = job
    cfg = RunConfig(cfg_values)
    p = cfg.params.replace(epsilon=epsilon)
    rep = Representation.parse(cfg.rep)
    h = model.build_hamiltonian(p, rep, cfg.n_max)
    psi0 = _initial_state(cfg, rep, p)
    return dynamics.propagate(h, psi0, parse_time(cfg.t_max), cfg.dt, cfg.renorm_guard,
                              cfg.record_every, cfg.snapshot_stride)


def _series_rows(series, extra=False):
    rows = []
    for i, t in enumerate(series.times):
        row = {"t": t, "norm": series.norms[i], "log_norm": series.log_norms[i],
               "photon": series.photons[i], "population": series.populations[i]}
        if extra:
            row["trace"] = series.traces[i]
            row["sink"] = series.sinks[i]
        rows.append(row)
    return rows


def _suffixed(path, epsilon):
    path = Path(path)
    return path.with_name(f"{path.stem}_eps{epsilon:g}{path.suffix}")


def cmd_dynamics(cfg, args):
    epsilons = _float_list(cfg.epsilons, "epsilons") if cfg.epsilons else [cfg.epsilon]
    if any(e < 0 for e in epsilons):
        raise ConfigError("epsilons must be non-negative")
    target = cfg.values.get("out")
    if len(epsilons) > 1 and target is None:
        raise ConfigError("several epsilon values need --out (one file per value)")
    jobs = [(cfg.values, e) for e in epsilons]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_dynamics_run, jobs))
    else:
        results = [_dynamics_run(job) for job in jobs]
    for eps, series in zip(epsilons, results):
        out = target if len(epsilons) == 1 else _suffixed(target, eps)
        extra = {"epsilon": eps}
        if cfg.values.get("snapshots"):
            snap = Path(cfg.snapshots)
            if len(epsilons) > 1:
                snap = _suffixed(snap, eps)
            np.savez_compressed(snap, times=series.snapshot_times, states=series.snapshots)
            extra["snapshots"] = str(snap)
        emit(cfg, args, DYNAMICS_COLUMNS, _series_rows(series), out=out, extra_manifest=extra)


def cmd_lindblad(cfg, args):
    p = cfg.params
    n, q = parse_initial(cfg.initial)
    if n is None:
        raise ConfigError("lindblad needs an initial state of the form 'n,q'")
    psi0 = lindblad.rotated_initial_state(n, q, cfg.n_max)
    h_full, jump = lindblad.build_three_level_system(p, cfg.n_max)
    vec = lindblad.embed_state(psi0, cfg.n_max)
    series = lindblad.propagate_lme(np.outer(vec, vec.conj()), h_full, jump, 2 * p.epsilon,
                                    cfg.jump, parse_time(cfg.t_max), cfg.dt, cfg.record_every,
                                    cfg.trace_tol)
    emit(cfg, args, LINDBLAD_COLUMNS, _series_rows(series, extra=True))


COMMANDS = {
    "spectrum": (cmd_spectrum, "exact level pairs along a parameter sweep"),
    "aa": (cmd_aa, "adiabatic-approximation level pairs, same columns as spectrum"),
    "ep": (cmd_ep, "exact and AA exceptional points per pair"),
    "juddian": (cmd_juddian, "Laguerre-root level-crossing couplings"),
    "dynamics": (cmd_dynamics, "non-Hermitian Schrodinger evolution"),
    "lindblad": (cmd_lindblad, "three-level master equation"),
    "converge": (cmd_converge, "eigenvalue drift across Fock truncations"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--preset", help=f"named parameter set: {', '.join(sorted(PRESETS))}")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--nmax", dest="n_max", type=int, help="Fock truncation")
    common.add_argument("--workers", type=int, help="process pool size")
    for name in ("delta", "epsilon", "omega", "g"):
        common.add_argument(f"--{name}", type=float)
    common.add_argument("--rep", help="bare_z, rotated_x or passive_x")
    common.add_argument("--axis", choices=["g", "epsilon"])
    common.add_argument("--start", type=float)
    common.add_argument("--stop", type=float)
    common.add_argument("--count", type=int)
    common.add_argument("--pairs", type=int, help="number of level pairs")
    common.add_argument("--tol", type=float, help="eigensolver residual tolerance")
    common.add_argument("--im-tol", dest="im_tol", type=float, help="PTS/PTB threshold (units of omega)")
    common.add_argument("--bracket", help="EP search bracket lo,hi")
    common.add_argument("--bracket-width", dest="bracket_width", type=float)
    common.add_argument("--g-max", dest="g_max", type=float)
    common.add_argument("--k", type=int, help="number of lowest eigenvalues to compare")
    common.add_argument("--nmax-list", dest="nmax_list", help="increasing truncations, comma separated")
    common.add_argument("--t-max", dest="t_max", help="final time, e.g. 200pi")
    common.add_argument("--dt", type=float)
    common.add_argument("--initial", help="initial state 'n,+' / 'n,-' or 'eig:k'")
    common.add_argument("--epsilons", help="comma-separated epsilon values for dynamics")
    common.add_argument("--record-every", dest="record_every", type=int)
    common.add_argument("--snapshot-stride", dest="snapshot_stride", type=int)
    common.add_argument("--snapshots", help="write state snapshots to this .npz file")
    common.add_argument("--renorm-guard", dest="renorm_guard", type=float)
    common.add_argument("--trace-tol", dest="trace_tol", type=float)
    common.add_argument("--jump", dest="jump", action="store_const", const="1")
    common.add_argument("--no-jump", dest="jump", action="store_const", const="0")

    parser = argparse.ArgumentParser(prog="ptqrm", description="PT-symmetric quantum Rabi model lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = resolve_config(args)
        func(cfg, args)
    except (ConfigError, DimensionError) as exc:
        print(f"ptqrm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"ptqrm: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SearchError as exc:
        print(f"ptqrm: search error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except IntegrationError as exc:
        print(f"ptqrm: integration error at t={exc.last_valid_time}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``dephaser <verb> [options]``.

Settings come from an optional JSON file (``--config``) overlaid by flags;
flags win.  Every output file starts with ``#`` metadata lines echoing the
effective configuration.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dephasing import BathConfig, TimeGrid, coherence_trace
from .measures import (ALL_MEASURES, nm_coherence, sweep_temperatures, sweep_to_csv,
                       temperature_sweep)
from .polaron import polaron_sweep, sweep_to_csv as polaron_csv
from .quadrature import QuadSpec, QuadratureError
from .spectral import TableFormatError, builtin_nv, builtin_siv, load_tabulated, ohmic
from .toymodel import CONVENTIONS, CoherentModeModel, TruncationError, toy_to_csv
from .units import DomainError
from .weakcoupling import DrivenSystem, FilterBreakdownError, filtered_coherence

log = logging.getLogger("dephaser")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
DATA_DIR_ENV = "DEPHASER_DATA_DIR"
BUILTINS = ("siv", "nv", "ohmic")
COMPONENTS = ("bulk", "loc1", "loc2", "total")
SDF_POINTS = 2000


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    """Effective settings of one command.  ``None`` means "not given"."""

    sdf: str | None = None
    sdf_exponent: float = 3.0
    sdf_scale: float = 1.0
    ohmic: dict = field(default_factory=lambda: {"eta": 1.0 / 600, "omega_c": 1.0,
                                                 "exponent_s": 1.0})
    temperatures: list | None = None
    sweep: dict = field(default_factory=lambda: {"min": 0.01, "max": 300.0, "count": 12,
                                                 "spacing": "log"})
    t_max: float | None = None
    dt: float | None = None
    Delta: float | None = None
    Omega: float | None = None
    measures: list = field(default_factory=lambda: list(ALL_MEASURES))
    components: list = field(default_factory=lambda: ["total"])
    normalize: bool = False
    rel_tol: float = 1e-8
    lambda_convention: str = "dimensionless"
    fock_levels: int = 60
    oracle: bool = True

    def bath(self, sdf, T):
        return BathConfig(sdf, T, QuadSpec(rel_tol=self.rel_tol))


SCHEMA_HELP = {
    "sdf": "builtin id (siv, nv, ohmic) or path to an omega_thz,J_thz table",
    "sdf_exponent": "low-frequency power law used to extrapolate a table below its first node",
    "sdf_scale": "multiplier applied to tabulated J values",
    "ohmic": "parameters of the ohmic density: eta, omega_c (rad/ps), exponent_s",
    "temperatures": "explicit temperatures in K (overrides sweep)",
    "sweep": "temperature sweep: min, max (K), count, spacing (log|linear)",
    "t_max": "time horizon, ps",
    "dt": "time step, ps",
    "Delta": "detuning, rad/ps",
    "Omega": "Rabi frequency, rad/ps",
    "measures": f"subset of {list(ALL_MEASURES)}",
    "components": f"subset of {list(COMPONENTS)}",
    "normalize": "divide exported J by its maximum",
    "rel_tol": "relative quadrature tolerance",
    "lambda_convention": f"one of {list(CONVENTIONS)}",
    "fock_levels": "Fock-space truncation of the toy-model oracle",
    "oracle": "also evaluate the Fock-space oracle in the toy command",
}

# Per-command defaults applied after config and flags, and required keys.
COMMAND_DEFAULTS = {
    "trace": {"t_max": 300.0, "dt": 0.02},
    "measures": {"t_max": 300.0, "dt": 0.02},
    "filter": {"sdf": "ohmic", "t_max": 50.0, "dt": 0.02, "Delta": 0.5, "Omega": 1.0,
               "temperatures": [0.0]},
    "polaron": {"Omega": 6e-4, "sweep": {"min": 0.01, "max": 300.0, "count": 20,
                                          "spacing": "log"}},
    "toy": {"t_max": 3.0, "dt": 0.005, "temperatures": [300.0]},
}
REQUIRED = {
    "sdf": ("sdf",),
    "trace": ("sdf", "temperatures"),
    "measures": ("sdf",),
    "filter": (),
    "polaron": ("sdf",),
    "toy": ("sdf",),
}


def config_schema():
    """JSON-serializable description of every configuration key."""
    base = RunConfig()
    out = {}
    for f in fields(RunConfig):
        out[f.name] = {"default": getattr(base, f.name), "help": SCHEMA_HELP[f.name]}
    return {"keys": out, "command_defaults": COMMAND_DEFAULTS,
            "required": {k: list(v) for k, v in REQUIRED.items()}}


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def build_config(command, file_values, overrides):
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    merged = {k: v for k, v in file_values.items()}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, value in COMMAND_DEFAULTS.get(command, {}).items():
        merged.setdefault(key, value)
    missing = [k for k in REQUIRED.get(command, ()) if merged.get(k) is None]
    if missing:
        raise ConfigError(f"missing required keys for '{command}': {', '.join(missing)}")
    cfg = RunConfig(**merged)
    validate(cfg, command)
    return cfg


def validate(cfg: RunConfig, command):
    def positive(name):
        v = getattr(cfg, name)
        if v is not None and not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
            raise ConfigError(f"{name} must be a positive number, got {v!r}")

    for name in ("t_max", "dt", "rel_tol", "sdf_scale"):
        positive(name)
    if cfg.t_max is not None and cfg.dt is not None and cfg.dt > cfg.t_max:
        raise ConfigError("dt must not exceed t_max")
    if cfg.temperatures is not None:
        if not isinstance(cfg.temperatures, list) or not cfg.temperatures:
            raise ConfigError("temperatures must be a non-empty list")
        if any(not isinstance(T, (int, float)) or T < 0 or not math.isfinite(T)
               for T in cfg.temperatures):
            raise ConfigError(f"temperatures must be finite and >= 0, got {cfg.temperatures}")
    sw = cfg.sweep
    if set(sw) != {"min", "max", "count", "spacing"}:
        raise ConfigError("sweep needs exactly the keys min, max, count, spacing")
    if not (0 < sw["min"] <= sw["max"]) or int(sw["count"]) < 1 \
            or sw["spacing"] not in ("log", "linear"):
        raise ConfigError(f"invalid sweep {sw}")
    bad = set(cfg.measures) - set(ALL_MEASURES)
    if bad:
        raise ConfigError(f"unknown measures: {', '.join(sorted(bad))}")
    bad = set(cfg.components) - set(COMPONENTS)
    if bad:
        raise ConfigError(f"unknown components: {', '.join(sorted(bad))}")
    if cfg.Omega is not None and cfg.Omega < 0:
        raise ConfigError("Omega must be >= 0")
    if cfg.lambda_convention not in CONVENTIONS:
        raise ConfigError(f"lambda_convention must be one of {CONVENTIONS}")
    if set(cfg.ohmic) - {"eta", "omega_c", "exponent_s"}:
        raise ConfigError("ohmic accepts only eta, omega_c, exponent_s")


def resolve_sdf(cfg: RunConfig):
    name = cfg.sdf
    if name == "siv":
        return builtin_siv()
    if name == "nv":
        return builtin_nv()
    if name == "ohmic":
        return ohmic(**cfg.ohmic)
    path = Path(name)
    if not path.exists() and os.environ.get(DATA_DIR_ENV):
        path = Path(os.environ[DATA_DIR_ENV]) / name
    return load_tabulated(path, cfg.sdf_exponent, cfg.sdf_scale, name=Path(name).stem)


def temperatures(cfg: RunConfig):
    if cfg.temperatures is not None:
        return [float(T) for T in cfg.temperatures]
    sw = cfg.sweep
    return [float(T) for T in sweep_temperatures(sw["min"], sw["max"], int(sw["count"]),
                                                  sw["spacing"])]


def _header(command, cfg, reproducible, extra=None):
    meta = {"command": command, "version": __version__,
            "config": json.dumps(asdict(cfg), sort_keys=True)}
    meta.update(extra or {})
    if not reproducible:
        meta["generated"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _meta_lines(meta):
    return "".join(f"# {k}: {v}\n" for k, v in meta.items())


def _write(out_dir: Path, name, text):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    print(path)
    return path


def _fmt_T(T):
    return f"{T:.9g}".replace(".", "p")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_sdf(cfg, out, reproducible):
    sdf = resolve_sdf(cfg)
    w = np.linspace(0.0, sdf.omega_max, SDF_POINTS)
    J = sdf.evaluate(w)
    if cfg.normalize and J.max() > 0:
        J = J / J.max()
    meta = _header("sdf", cfg, reproducible, {"omega_max_thz": f"{sdf.omega_max:.9g}",
                                             "peak_thz": f"{w[np.argmax(J)]:.9g}"})
    rows = "".join(f"{a:.9g},{b:.9g}\n" for a, b in zip(w, J))
    _write(out, "sdf.csv", _meta_lines(meta) + "omega_thz,J_thz\n" + rows)
    return EXIT_OK


def cmd_trace(cfg, out, reproducible):
    sdf = resolve_sdf(cfg)
    grid = TimeGrid.uniform(cfg.t_max, cfg.dt)
    for comp in cfg.components:
        part = sdf.select(comp)
        for T in temperatures(cfg):
            trace = coherence_trace(cfg.bath(part, T), grid)
            meta = _header("trace", cfg, reproducible, {"component": comp})
            meta.update(trace.metadata)
            trace.metadata = meta
            _write(out, f"trace_{comp}_T{_fmt_T(T)}K.csv", trace.to_csv())
    return EXIT_OK


def cmd_measures(cfg, out, reproducible):
    sdf = resolve_sdf(cfg)
    grid = TimeGrid.uniform(cfg.t_max, cfg.dt)
    reports = temperature_sweep(sdf, temperatures(cfg), grid, cfg.measures,
                                quad=QuadSpec(rel_tol=cfg.rel_tol))
    meta = _header("measures", cfg, reproducible)
    _write(out, "measures.csv", _meta_lines(meta) + sweep_to_csv(reports))
    doc = {"metadata": meta, "reports": [r.to_dict() for r in reports]}
    _write(out, "measures.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    failed = [r for r in reports if not r.ok]
    if failed:
        log.error("%d of %d sweep points failed", len(failed), len(reports))
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_filter(cfg, out, reproducible):
    sdf = resolve_sdf(cfg)
    grid = TimeGrid.uniform(cfg.t_max, cfg.dt)
    T = temperatures(cfg)[0]
    system = DrivenSystem(float(cfg.Delta), float(cfg.Omega))
    ft = filtered_coherence(cfg.bath(sdf, T), system, grid, check_paths=True)
    nc_raw, nc_filt = nm_coherence(ft.C_unfiltered), nm_coherence(ft.C_filtered)
    meta = _header("filter", cfg, reproducible,
                   {"N_C_raw": f"{nc_raw:.9g}", "N_C_filtered": f"{nc_filt:.9g}"})
    meta.update(ft.metadata)
    ft.metadata = meta
    _write(out, "filter.csv", ft.to_csv())
    print(f"N_C raw={nc_raw:.9g} filtered={nc_filt:.9g}")
    return EXIT_OK


def cmd_polaron(cfg, out, reproducible):
    sdf = resolve_sdf(cfg)
    Omega = float(cfg.Omega)
    Delta = Omega / 2 if cfg.Delta is None else float(cfg.Delta)
    Ts = temperatures(cfg)
    if any(T <= 0 for T in Ts):
        raise ConfigError("polaron temperatures must be > 0")
    points = polaron_sweep(sdf, Ts, Omega, Delta)
    meta = _header("polaron", cfg, reproducible, {"Omega_thz": Omega, "Delta_thz": Delta})
    _write(out, "polaron.csv", polaron_csv(points, meta))
    if not all(p.variational.converged for p in points):
        log.error("variational fixed point did not converge at every temperature")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_toy(cfg, out, reproducible):
    sdf = resolve_sdf(cfg)
    T = temperatures(cfg)[0]
    try:
        model = CoherentModeModel.from_sdf(sdf, T, lambda_convention=cfg.lambda_convention)
    except KeyError:
        raise ConfigError(f"density {sdf.name!r} has no loc1 component") from None
    times = TimeGrid.uniform(cfg.t_max, cfg.dt).points
    meta = _header("toy", cfg, reproducible, {"lambda_tilde": f"{model.lam:.9g}",
                                             "beta_amp": f"{model.beta_amp:.9g}",
                                             "period_ps": f"{model.period:.9g}"})
    _write(out, "toy.csv", toy_to_csv(model, times, cfg.oracle, cfg.fock_levels, meta))
    return EXIT_OK


COMMANDS = {"sdf": cmd_sdf, "trace": cmd_trace, "measures": cmd_measures,
            "filter": cmd_filter, "polaron": cmd_polaron, "toy": cmd_toy}


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--reproducible", action="store_true",
                        help="omit the timestamp line so reruns are byte-identical")
    common.add_argument("--tol", metavar="REL", type=float, dest="rel_tol",
                        help="relative quadrature tolerance")
    common.add_argument("--builtin", choices=BUILTINS, help="built-in spectral density")
    common.add_argument("--tabulated", metavar="PATH",
                        help=f"omega_thz,J_thz table (also searched in ${DATA_DIR_ENV})")
    common.add_argument("--exponent", type=float, dest="sdf_exponent",
                        help="low-frequency exponent for table extrapolation")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="dephaser", description=__doc__.split("\n\n")[0],
        epilog="Run 'dephaser config-schema' for every configuration key.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def timed(p):
        p.add_argument("-T", "--temperature", type=float, nargs="+", dest="temperatures",
                       metavar="K")
        p.add_argument("--t-max", type=float, dest="t_max", metavar="PS")
        p.add_argument("--dt", type=float, metavar="PS")
        return p

    p = sub.add_parser("sdf", parents=[common], help="sample J(omega) to sdf.csv")
    p.add_argument("--normalize", action="store_true", default=None)

    p = timed(sub.add_parser("trace", parents=[common], help="gamma, Gamma and C traces"))
    p.add_argument("--components", type=_csv_list, help="comma list of bulk,loc1,loc2,total")

    p = timed(sub.add_parser("measures", parents=[common], help="non-Markovianity sweep"))
    p.add_argument("--measures", type=_csv_list, help="comma list of nc,ngamma,nblp")
    p.add_argument("--count", type=int, help="number of sweep temperatures")

    for name, text in (("filter", "filtered coherence of a driven qubit"),
                       ("polaron", "polaron renormalization sweep")):
        p = timed(sub.add_parser(name, parents=[common], help=text))
        p.add_argument("--delta", type=float, dest="Delta", metavar="THZ")
        p.add_argument("--omega", type=float, dest="Omega", metavar="THZ")
        p.add_argument("--eta", type=float)
        p.add_argument("--omega-c", type=float, dest="omega_c")

    p = timed(sub.add_parser("toy", parents=[common], help="single-mode collapse and revival"))
    p.add_argument("--lambda-convention", choices=CONVENTIONS, dest="lambda_convention")
    p.add_argument("--fock-levels", type=int, dest="fock_levels")
    p.add_argument("--no-oracle", action="store_false", dest="oracle", default=None)

    sub.add_parser("config-schema", help="print the configuration schema as JSON")
    return parser


def _overrides(args):
    ns = vars(args)
    over = {f.name: ns.get(f.name) for f in fields(RunConfig) if f.name in ns}
    if ns.get("builtin"):
        over["sdf"] = ns["builtin"]
    if ns.get("tabulated"):
        over["sdf"] = ns["tabulated"]
    if ns.get("count") is not None:
        over["sweep"] = {"min": 0.01, "max": 300.0, "count": ns["count"], "spacing": "log"}
    if ns.get("eta") is not None or ns.get("omega_c") is not None:
        over["ohmic"] = {"eta": ns.get("eta") or 1.0 / 600, "omega_c": ns.get("omega_c") or 1.0,
                         "exponent_s": 1.0}
    return over


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False)
                        else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "config-schema":
        print(json.dumps(config_schema(), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        cfg = build_config(args.command, load_config(args.config), _overrides(args))
        return COMMANDS[args.command](cfg, Path(args.out), args.reproducible)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, FilterBreakdownError, TruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, TableFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

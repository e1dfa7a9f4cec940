"""Command-line front end: ``coupled-de <command> [options]``.

Every command prints one summary line ``<command> <key-params> => <value>``.
CSV outputs are written atomically and end with a ``#`` metadata line that
records the tool version and the resolved configuration.

Exit status: 0 success, 1 bad input or no threshold in range, 2 staircase
audit violation in a region sweep, 3 continuation failures (partial curve kept).
"""
from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import tempfile
import warnings
from typing import Sequence

import numpy as np

from . import __version__
from . import densities as D
from .ensembles import CoupledSpec, DegreeDistribution, EnsembleError, parse_ensemble
from .joint_de import DESettings, ThresholdError
from .sources import parse_source

log = logging.getLogger("coupled_de")

COMMANDS = ("threshold", "exit-curve", "gexit-curve", "acpr", "sw-region", "mac-threshold", "mac-acpr")

# built-in defaults, applied after the config file (flags > config > these)
DEFAULTS = {
    "ensemble": "4,6",
    "punctured": False,
    "source": "erasure:0.5",
    "channel": "bec",
    "tol": None,
    "delta": None,
    "rate": 0.5,
    "out": None,
    "boundary_out": None,
    "bins": None,
    "grid_max": None,
    "max_iter": 20000,
    "jobs": None,
    "dump_density": None,
    "dump_profile": None,
    "coupled": None,
    "mc": None,
    "seed": 0,
    "grid": None,
    "samples": 2000,
    "targets": "0.02:0.98:0.02",
    "method": None,
    "warm_start": False,
    "verbose": False,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coupled-de", description="Density-evolution thresholds, EXIT curves and regions "
                                                "for joint decoding of correlated sources.")
    p.add_argument("--version", action="version", version=f"coupled-de {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key=value file; keys are flag names, flags win")
        s.add_argument("--ensemble", help="'l,r' or 'l,r,L,w'")
        s.add_argument("--punctured", action="store_true", default=None,
                       help="systematic bits are punctured (required for correlated-source commands)")
        s.add_argument("--source", help="correlation model, e.g. erasure:0.5 or bsc:0.1")
        s.add_argument("--channel", choices=D.FAMILIES)
        s.add_argument("--tol", type=float)
        s.add_argument("--delta", type=float, help="lattice spacing for region sweeps")
        s.add_argument("--rate", type=float, help="transmitted rate for the Slepian-Wolf region")
        s.add_argument("--out")
        s.add_argument("--boundary-out")
        s.add_argument("--bins", type=int)
        s.add_argument("--grid-max", type=float)
        s.add_argument("--max-iter", type=int)
        s.add_argument("--jobs", type=int)
        s.add_argument("--dump-density")
        s.add_argument("--dump-profile")
        s.add_argument("--coupled", help="'L,w' to couple the base ensemble")
        s.add_argument("--mc", type=int, help="Monte-Carlo samples per function-node update")
        s.add_argument("--seed", type=int)
        s.add_argument("--grid", help="lo:hi:step lattice for MAC sweeps")
        s.add_argument("--samples", type=int, help="points on the BEC EBP curve")
        s.add_argument("--targets", help="lo:hi:step message entropies for GEXIT curves")
        s.add_argument("--method", choices=("mc", "quadrature"))
        s.add_argument("--warm-start", action="store_true", default=None)
        s.add_argument("-v", "--verbose", action="store_true", default=None)
    return p


def read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{n}: expected key=value")
            key = key.strip().lstrip("-").replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{n}: unknown key {key!r}")
            out[key] = val.strip()
    return out


def _coerce(key: str, val):
    if isinstance(val, str):
        kind = DEFAULTS[key]
        if isinstance(kind, bool) or key in ("punctured", "warm_start", "verbose"):
            return val.lower() in ("1", "true", "yes", "on")
        if key in ("bins", "max_iter", "jobs", "mc", "seed", "samples"):
            return int(val)
        if key in ("tol", "delta", "rate", "grid_max"):
            return float(val)
    return val


def resolve(args: argparse.Namespace) -> dict:
    cfg = read_config(args.config) if args.config else {}
    out = {"command": args.command}
    for key, default in DEFAULTS.items():
        v = getattr(args, key, None)
        if v is None:
            v = cfg.get(key, default)
        try:
            out[key] = _coerce(key, v)
        except ValueError:
            raise UsageError(f"bad value for {key}: {v!r}") from None
    if out["jobs"] is None:
        from .regions import default_jobs
        out["jobs"] = default_jobs()
    return out


def parse_range(text: str) -> np.ndarray:
    from .regions import lattice
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"malformed range {text!r}; expected lo:hi:step") from None
    return lattice(lo, hi, step)


# ---------------------------------------------------------------------------
# output helpers

def _meta(cfg: dict) -> str:
    items = " ".join(f"{k}={cfg[k]}" for k in sorted(cfg) if cfg[k] is not None)
    return f"# coupled-de {__version__} {items}"


def atomic_write(path: str, lines: Sequence[str], cfg: dict) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w") as fh:
            for line in lines:
                fh.write(line + "\n")
            fh.write(_meta(cfg) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _boundary_path(cfg):
    if cfg["boundary_out"]:
        return cfg["boundary_out"]
    root, ext = os.path.splitext(cfg["out"])
    return f"{root}.boundary{ext or '.csv'}"


def _summary(cfg: dict, keys: Sequence[str], value: str) -> str:
    params = " ".join(f"{k}={cfg[k]}" for k in keys if cfg.get(k) not in (None, False))
    if cfg.get("punctured"):
        params += " punctured"
    return f"{cfg['command']} {params} => {value}"


# ---------------------------------------------------------------------------
# system construction

def _system(cfg: dict):
    try:
        system = parse_ensemble(cfg["ensemble"])
        if cfg["coupled"]:
            if isinstance(system, CoupledSpec):
                raise UsageError("--coupled given together with a coupled --ensemble")
            parts = [int(x) for x in cfg["coupled"].split(",")]
            if len(parts) != 2:
                raise UsageError(f"malformed --coupled {cfg['coupled']!r}; expected L,w")
            if not system.is_regular:
                raise UsageError("coupling needs a regular base ensemble")
            (l,), (r,) = system.lambda_coeffs, system.rho_coeffs
            system = CoupledSpec(l, r, *parts)
    except (EnsembleError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return system


def _sw_inputs(cfg: dict):
    system = _system(cfg)
    if not cfg["punctured"]:
        raise UsageError("correlated-source analysis needs a punctured systematic ensemble (--punctured)")
    try:
        m = parse_source(cfg["source"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        if isinstance(system, DegreeDistribution):
            from .ensembles import puncture_fraction
            puncture_fraction(system)
    except EnsembleError as exc:
        raise UsageError(str(exc)) from None
    return system, m


def _grid(cfg: dict, default: D.Grid) -> D.Grid:
    bins = cfg["bins"] or default.bins
    gmax = cfg["grid_max"] or default.grid_max
    try:
        return D.Grid(gmax, bins)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _settings(cfg: dict) -> DESettings:
    try:
        return DESettings(max_iterations=cfg["max_iter"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands

def cmd_threshold(cfg: dict) -> int:
    from . import joint_de as J
    from . import spatial_coupling as S
    system, m = _sw_inputs(cfg)
    family = cfg["channel"]
    coupled = isinstance(system, CoupledSpec)
    grid = _grid(cfg, D.COUPLED_BMS_GRID if coupled else D.DEFAULT_GRID)
    settings = _settings(cfg)
    tol = cfg["tol"] or (1e-4 if family == D.BEC else 1e-3)
    stats = []

    def run(h):
        ch = J.channel_at(family, h, grid)
        if coupled:
            res = S.run_coupled_de(system, ch, ch, m, settings, grid)
        else:
            res = J.run_de(ch, ch, m, system, settings, grid)
        stats.append(res.iterations)
        return res

    value = J.bisect_threshold(lambda h: run(h).converged, 0.0, 1.0, tol)
    good = value - tol / 2
    if cfg["dump_density"] or cfg["dump_profile"]:
        res = run(good)
        if cfg["dump_density"]:
            if coupled:
                X = res.state[0]
                dens = D.Quantized(grid, X[system.L]) if isinstance(X, np.ndarray) and X.ndim == 2 \
                    else D.ErasureMix(float(X[system.L]))
            else:
                dens = res.final.a
            buf = io.StringIO()
            D.dump_density(dens, buf, grid)
            atomic_write(cfg["dump_density"], buf.getvalue().splitlines(), cfg)
        if cfg["dump_profile"]:
            if not coupled:
                raise UsageError("--dump-profile needs a coupled ensemble")
            rows = ["position,pe1,pe2"] + [f"{i},{a:.6e},{b:.6e}" for i, a, b in S.error_profile(res, system)]
            atomic_write(cfg["dump_profile"], rows, cfg)
    print(_summary(cfg, ("ensemble", "coupled", "source", "channel", "tol"),
                   f"{value:.6f} probes={len(stats)} max_iterations={max(stats)} "
                   f"mean_iterations={np.mean(stats):.1f}"))
    return 0


def cmd_exit_curve(cfg: dict) -> int:
    from . import exit_analysis as X
    system, m = _sw_inputs(cfg)
    if isinstance(system, CoupledSpec) or cfg["channel"] != D.BEC:
        raise UsageError("exit-curve is the closed-form BEC curve of an uncoupled ensemble")
    try:
        curve = X.ebp_exit_bec(system, m, cfg["samples"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lines = ["x,channel_param,exit_value"] + [f"{p.x:.12g},{p.h_channel:.12g},{p.h_exit:.12g}" for p in curve]
    if cfg["out"]:
        atomic_write(cfg["out"], lines, cfg)
    try:
        bound = f"{X.map_threshold_area(curve, m, system):.6f}"
    except X.CurveError:
        bound = "nan"
    print(_summary(cfg, ("ensemble", "source", "samples"),
                   f"map_bound={bound} bp={X.bp_threshold_from_curve(curve):.6f} points={len(curve)}"))
    return 0


def cmd_gexit_curve(cfg: dict) -> int:
    from . import exit_analysis as X
    from . import spatial_coupling as S
    system, m = _sw_inputs(cfg)
    if cfg["channel"] != D.BAWGNC:
        raise UsageError("gexit-curve runs on the bawgnc family")
    targets = parse_range(cfg["targets"])
    grid = _grid(cfg, D.COUPLED_BMS_GRID)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if isinstance(system, CoupledSpec):
            curve = S.coupled_ebp_gexit(system, m, targets, grid, warm_start=cfg["warm_start"])
        else:
            curve = X.ebp_gexit_bms(system, m, targets, grid, warm_start=cfg["warm_start"])
    failures = [str(w.message) for w in caught if "not" in str(w.message)]
    for f in failures:
        print(f"warning: {f}", file=sys.stderr)
    lines = ["x,channel_param,exit_value"] + [f"{p.x:.12g},{p.h_channel:.12g},{p.h_exit:.12g}" for p in curve]
    if cfg["out"]:
        atomic_write(cfg["out"], lines, cfg)
    extra = ""
    if not isinstance(system, CoupledSpec):
        try:
            extra = f" map_bound={X.map_threshold_area(curve, m, system):.6f}"
        except X.CurveError:
            extra = " map_bound=nan"
    print(_summary(cfg, ("ensemble", "coupled", "source", "channel"),
                   f"points={len(curve)} failed={len(failures)}{extra}"))
    return 3 if failures else 0


def cmd_acpr(cfg: dict) -> int:
    from . import regions as R
    system, m = _sw_inputs(cfg)
    family = cfg["channel"]
    delta = cfg["delta"] or (0.01 if family == D.BEC else 0.02)
    p = R.lattice(0.0, 1.0, delta)
    grid = _grid(cfg, D.COUPLED_BMS_GRID if isinstance(system, CoupledSpec) else D.DEFAULT_GRID)
    region = R.acpr_sweep(system, m, family, p, None, _settings(cfg), grid, cfg["jobs"])
    if cfg["out"]:
        atomic_write(cfg["out"], R.region_csv_lines(region), cfg)
        atomic_write(_boundary_path(cfg), R.boundary_csv_lines(region), cfg)
    print(_summary(cfg, ("ensemble", "coupled", "source", "channel", "delta"),
                   f"achievable={int(region.achievable.sum())}/{region.achievable.size} "
                   f"violations={len(region.violations)}"))
    return 2 if region.violations else 0


def cmd_sw_region(cfg: dict) -> int:
    from . import regions as R
    try:
        m = parse_source(cfg["source"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    delta = cfg["delta"] or 0.01
    p = R.lattice(0.0, 1.0, delta)
    region = R.sw_region(m, cfg["channel"], cfg["rate"], p)
    if cfg["out"]:
        atomic_write(cfg["out"], R.region_csv_lines(region), cfg)
        atomic_write(_boundary_path(cfg), R.boundary_csv_lines(region), cfg)
    single, _ = R.sw_bounds(m, cfg["rate"])
    print(_summary(cfg, ("source", "channel", "rate"),
                   f"corner={single:.6f} symmetric={R.sw_symmetric_bound(m, cfg['rate']):.6f}"))
    return 0


def _mac_method(cfg):
    return cfg["method"] or ("mc" if cfg["mc"] else "quadrature")


def cmd_mac_threshold(cfg: dict) -> int:
    from . import mac as M
    system = _system(cfg)
    grid = _grid(cfg, M.default_grid(system))
    method = _mac_method(cfg)
    tol = cfg["tol"] or 5e-3
    try:
        value = M.mac_threshold_symmetric(system, _settings(cfg), tol, grid, method,
                                          cfg["mc"] or 200_000, cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(_summary(cfg, ("ensemble", "coupled", "mc", "seed", "tol"), f"{value:.6f} method={method}"))
    return 0


def cmd_mac_acpr(cfg: dict) -> int:
    from . import mac as M
    from . import regions as R
    system = _system(cfg)
    p = parse_range(cfg["grid"] or "0.6:2.4:0.02")
    grid = _grid(cfg, M.default_grid(system))
    region = R.mac_acpr_sweep(system, p, None, _settings(cfg), grid, _mac_method(cfg),
                              cfg["mc"] or 200_000, cfg["seed"], cfg["jobs"])
    if cfg["out"]:
        atomic_write(cfg["out"], R.region_csv_lines(region), cfg)
        atomic_write(_boundary_path(cfg), R.boundary_csv_lines(region), cfg)
    print(_summary(cfg, ("ensemble", "coupled", "grid"),
                   f"achievable={int(region.achievable.sum())}/{region.achievable.size} "
                   f"violations={len(region.violations)}"))
    return 2 if region.violations else 0


HANDLERS = {
    "threshold": cmd_threshold,
    "exit-curve": cmd_exit_curve,
    "gexit-curve": cmd_gexit_curve,
    "acpr": cmd_acpr,
    "sw-region": cmd_sw_region,
    "mac-threshold": cmd_mac_threshold,
    "mac-acpr": cmd_mac_acpr,
}


def run(cfg: dict) -> int:
    return HANDLERS[cfg["command"]](cfg)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return run(cfg)
    except UsageError as exc:
        print(f"coupled-de: error: {exc}", file=sys.stderr)
        return 1
    except ThresholdError as exc:
        print(f"coupled-de: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"coupled-de: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

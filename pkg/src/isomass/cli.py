"""Command-line front end.

Every command except ``plotdata`` writes a run directory::

    <out>/manifest.json       command, resolved arguments, config snapshot,
                              timestamps, version, backend, outputs, summary
    <out>/inputs/config.json  the config snapshot
    <out>/<outputs>           CSV / JSON results

``isomass replay <out>/manifest.json --out <dir>`` re-runs the recorded
command from the snapshot; CSV outputs are byte-identical.

Exit codes: 0 ok, 2 config error, 3 domain validation, 4 data error,
5 budget exhausted (partial results written).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import shutil
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .errors import (BudgetExhausted, ConfigError, IllConditionedFit,
                     InvalidRegion, IsomassError)
from .mass import exhaust, extrapolate, mass_ql, sweep_centered
from .metrics import model_from_dict
from .optimize import FamilySpec, search
from .quadrature import QuadratureConfig
from .regions import measure, parse_region, validate_region

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_DATA, EXIT_BUDGET = 0, 2, 3, 4, 5


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def fmt(v) -> str:
    """Locale-independent round-trip float formatting for CSV cells."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _clean(obj):
    # JSON has no nan/inf literals
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True,
                               default=_json_default) + "\n", encoding="utf-8")


# config -------------------------------------------------------------------------


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict) or "model" not in cfg:
        raise ConfigError("config must be a JSON object with a 'model' entry")
    return cfg


def _model(config):
    try:
        return model_from_dict(config["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model description: {exc}") from exc


def _quadrature(config) -> QuadratureConfig:
    q = config.get("quadrature", {}) or {}
    known = {f.name for f in fields(QuadratureConfig)}
    unknown = set(q) - known
    if unknown:
        raise ConfigError(f"unknown quadrature keys {sorted(unknown)}")
    try:
        return QuadratureConfig(**q)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad quadrature config: {exc}") from exc


def _section(config, name) -> dict:
    s = config.get(name, {}) or {}
    if not isinstance(s, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return s


def _pick(flag, section, key, default=None):
    return flag if flag is not None else section.get(key, default)


# commands -------------------------------------------------------------------------


def run_massql(config, args, out: Path):
    model, cfg = _model(config), _quadrature(config)
    try:
        region = parse_region(args["region"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CommandError(f"invalid region: {exc}", EXIT_DOMAIN) from exc
    problem = validate_region(model, region)
    if problem:
        raise CommandError(f"invalid region: {problem}", EXIT_DOMAIN)
    mr = measure(model, region, cfg, config.get("backend"))
    rep = mass_ql(mr)
    write_csv(out / "massql.csv",
              ["region", "volume", "perimeter", "mql", "propagated_error",
               "vol_err", "per_err"],
              [[region.literal(), rep.volume, rep.perimeter, rep.mql,
                rep.propagated_error, mr.volume.abs_error_bound,
                mr.perimeter.abs_error_bound]])
    print(f"volume            {rep.volume:.12g}")
    print(f"perimeter         {rep.perimeter:.12g}")
    print(f"mql               {rep.mql:.12f}")
    print(f"propagated_error  {rep.propagated_error:.12e}")
    return ["massql.csv"], {"mql": rep.mql, "volume": rep.volume,
                            "perimeter": rep.perimeter,
                            "propagated_error": rep.propagated_error}


def sweep_radii(rmin, rmax, count, spacing):
    if not (0 < rmin < rmax) or count < 2:
        raise ConfigError("sweep needs 0 < rmin < rmax and count >= 2")
    if spacing == "geometric":
        return list(np.geomspace(rmin, rmax, count))
    if spacing == "linear":
        return list(np.linspace(rmin, rmax, count))
    raise ConfigError(f"unknown spacing {spacing!r}")


def run_sweep(config, args, out: Path):
    model, cfg = _model(config), _quadrature(config)
    radii = sweep_radii(float(args["rmin"]), float(args["rmax"]),
                        int(args["count"]), args["spacing"])
    try:
        table = sweep_centered(model, radii, cfg, config.get("backend"))
    except InvalidRegion as exc:
        raise CommandError(str(exc), EXIT_DOMAIN) from exc
    write_csv(out / "sweep.csv",
              ["R", "volume", "perimeter", "mql", "vol_err", "per_err"],
              [[r.R, r.volume, r.perimeter, r.mql, r.vol_err, r.per_err]
               for r in table.rows])
    summary = {"rows": len(table.rows), "known_adm": model.known_adm}
    try:
        est = extrapolate(table)
    except IllConditionedFit as exc:
        print(f"extrapolation refused: {exc}")
        summary["extrapolation"] = "refused"
        summary["residual"] = exc.estimate.residual if exc.estimate else None
    except ValueError as exc:
        print(f"extrapolation skipped: {exc}")
        summary["extrapolation"] = "skipped"
    else:
        print(f"limit {est.limit:.12g}  (fit {est.model}, a={est.fit_coeffs[0]:.6g}, "
              f"b={est.fit_coeffs[1]:.6g}, residual {est.residual:.3e}, "
              f"rows {est.rows_used})")
        if model.known_adm is not None:
            print(f"known ADM mass {model.known_adm:.12g}")
        summary.update(extrapolation="ok", limit=est.limit,
                       residual=est.residual, fit_a=est.fit_coeffs[0],
                       fit_b=est.fit_coeffs[1])
    return ["sweep.csv"], summary


_TRACE_HEADER = ["step", "target_eps", "achieved_mql_abs", "mql",
                 "propagated_error", "volume", "perimeter", "offset_used",
                 "ball_radius_used", "components", "region"]


def _write_trace(path, trace):
    write_csv(path, _TRACE_HEADER,
              [[s.index, s.target_eps, s.achieved_mql_abs, s.mql,
                s.propagated_error, s.volume, s.perimeter, s.offset_used,
                s.ball_radius_used, len(s.region.components()),
                s.region.literal()] for s in trace.steps])


def run_exhaust(config, args, out: Path):
    model, cfg = _model(config), _quadrature(config)
    R0, N = float(args["r0"]), int(args["steps"])
    try:
        trace = exhaust(model, R0, N, cfg, backend=config.get("backend"))
    except InvalidRegion as exc:
        raise CommandError(str(exc), EXIT_DOMAIN) from exc
    except BudgetExhausted as exc:
        if exc.partial is not None:
            _write_trace(out / "exhaust.csv", exc.partial)
        raise CommandError(f"budget exhausted: {exc}", EXIT_BUDGET) from exc
    _write_trace(out / "exhaust.csv", trace)
    line = trace.statement()
    (out / "bound.txt").write_text(line + "\n", encoding="utf-8")
    print(line)
    return ["exhaust.csv", "bound.txt"], {"delta": trace.delta, "steps": N}


def run_optimize(config, args, out: Path):
    model, cfg = _model(config), _quadrature(config)
    try:
        spec = FamilySpec.from_dict(args["family"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad family spec: {exc}") from exc
    res = search(model, spec, int(args["budget"]), int(args["seed"]), cfg,
                 restarts=int(args["restarts"]),
                 simplex_scale=float(args["simplex_scale"]),
                 backend=config.get("backend"))
    write_csv(out / "history.csv", ["eval"] + spec.names + ["mql"],
              [[i] + list(p) + [("infeasible" if v is None else v)]
               for i, (p, v) in enumerate(res.history)])
    write_json(out / "result.json", {
        "family": spec.to_dict(), "best_params": res.best_params,
        "best_mql": res.best_mql,
        "best_region": res.best_region.literal() if res.best_region else None,
        "evaluations": res.evaluations,
        "lower_bound_family": res.lower_bound_family, "note": res.note})
    print(f"best mql {res.best_mql:.12g} at {res.best_params} "
          f"({res.evaluations} evaluations)")
    print(res.note)
    return ["history.csv", "result.json"], {"best_mql": res.best_mql,
                                            "evaluations": res.evaluations}


COMMANDS = {"massql": run_massql, "sweep": run_sweep,
            "exhaust": run_exhaust, "optimize": run_optimize}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def execute(command: str, config: dict, args: dict, out: Path) -> int:
    """Run a command into a fresh run directory and write its manifest."""
    # validate model/quadrature before touching the filesystem
    model = _model(config)
    _quadrature(config)
    out = Path(out)
    fresh = not out.exists()
    started = _now()
    (out / "inputs").mkdir(parents=True, exist_ok=True)
    write_json(out / "inputs" / "config.json", config)
    code = EXIT_OK
    outputs, summary = [], {}
    try:
        outputs, summary = COMMANDS[command](config, args, out)
    except CommandError as exc:
        code = exc.code
        summary = {"error": str(exc)}
        outputs = sorted(p.name for p in out.iterdir() if p.is_file()
                         and p.name != "manifest.json")
        print(str(exc), file=sys.stderr)
        if code != EXIT_BUDGET:
            if fresh:
                shutil.rmtree(out, ignore_errors=True)
            return code
    except ConfigError:
        if fresh:
            shutil.rmtree(out, ignore_errors=True)
        raise
    write_json(out / "manifest.json", {
        "tool": "isomass", "version": __version__,
        "backend": config.get("backend") or _backend.NAME,
        "command": command, "args": args, "config": config,
        "model": model.describe(), "started": started, "finished": _now(),
        "outputs": outputs, "summary": summary, "exit_code": code})
    return code


def run_plotdata(path, x, y, output) -> int:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
            header = rows and list(rows[0].keys())
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not rows:
        print(f"{path}: no data rows", file=sys.stderr)
        return EXIT_DATA
    missing = [c for c in (x, y) if c not in header]
    if missing:
        print(f"{path}: missing column(s) {missing}", file=sys.stderr)
        return EXIT_DATA
    output = Path(output) if output else Path(path).with_name(
        f"{Path(path).stem}_{x}_{y}.dat")
    with open(output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {x} {y}\n")
        for r in rows:
            fh.write(f"{r[x]} {r[y]}\n")
    print(output)
    return EXIT_OK


# argument parsing -----------------------------------------------------------------


def _family_arg(text):
    if text is None:
        return None
    if text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8")
    return json.loads(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isomass", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="run directory (default runs/<command>)")

    s = sub.add_parser("massql", help="quasilocal mass of one region")
    common(s)
    s.add_argument("--region", help='e.g. "annulus:10+ball:100,0,0,5"')

    s = sub.add_parser("sweep", help="centered B_R sweep and extrapolated limit")
    common(s)
    s.add_argument("--rmin", type=float)
    s.add_argument("--rmax", type=float)
    s.add_argument("--count", type=int)
    s.add_argument("--spacing", choices=["geometric", "linear"])

    s = sub.add_parser("exhaust", help="exhaustion with |mql| <= 1/i")
    common(s)
    s.add_argument("--r0", type=float)
    s.add_argument("--steps", type=int)

    s = sub.add_parser("optimize", help="search a region family for large mql")
    common(s)
    s.add_argument("--family", help="family spec as JSON or @file")
    s.add_argument("--budget", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--restarts", type=int)
    s.add_argument("--simplex-scale", type=float)

    s = sub.add_parser("plotdata", help="extract two columns of a CSV")
    s.add_argument("input")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--output")

    s = sub.add_parser("replay", help="re-run a manifest")
    s.add_argument("manifest")
    s.add_argument("--out", required=True)
    return p


def resolve_args(command, ns, config) -> dict:
    """Merge flags over config defaults into the recorded argument dict."""
    sec = _section(config, command)
    if command == "massql":
        region = _pick(ns.region, sec, "region")
        if region is None:
            raise ConfigError("no region given (--region or massql.region)")
        return {"region": region if isinstance(region, str)
                else parse_region(region).literal()}
    if command == "sweep":
        return {"rmin": _pick(ns.rmin, sec, "r_min", 10.0),
                "rmax": _pick(ns.rmax, sec, "r_max", 10240.0),
                "count": _pick(ns.count, sec, "count", 11),
                "spacing": _pick(ns.spacing, sec, "spacing", "geometric")}
    if command == "exhaust":
        if ns.r0 is None and "r0" not in sec:
            raise ConfigError("no R0 given (--r0 or exhaust.r0)")
        return {"r0": _pick(ns.r0, sec, "r0"),
                "steps": _pick(ns.steps, sec, "steps", 4)}
    if command == "optimize":
        fam = _family_arg(ns.family) if ns.family else sec.get("family")
        if fam is None:
            raise ConfigError("no family given (--family or optimize.family)")
        return {"family": fam, "budget": _pick(ns.budget, sec, "budget", 200),
                "seed": _pick(ns.seed, sec, "seed", 0),
                "restarts": _pick(ns.restarts, sec, "restarts", 4),
                "simplex_scale": _pick(ns.simplex_scale, sec,
                                       "simplex_scale", 0.15)}
    raise ValueError(command)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "plotdata":
            return run_plotdata(ns.input, ns.x, ns.y, ns.output)
        if ns.command == "replay":
            try:
                manifest = json.loads(Path(ns.manifest).read_text(encoding="utf-8"))
                command, config, args = (manifest["command"], manifest["config"],
                                         manifest["args"])
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"bad manifest {ns.manifest}: {exc}") from exc
            return execute(command, config, args, Path(ns.out))
        config = load_config(ns.config)
        args = resolve_args(ns.command, ns, config)
        out = Path(ns.out) if ns.out else Path("runs") / ns.command
        return execute(ns.command, config, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IsomassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())

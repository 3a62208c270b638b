"""Command-line front end.

    python -m integrability <command> (--config PATH | --config-json STR)
                            [--out PREFIX] [--threads N] [--seed N]

Commands: check, recover, expenditure, metric, converge, rp-check. Outputs go
to ``<prefix>.report.json`` and, where applicable, ``<prefix>.table.csv`` and
``<prefix>.path.csv``. Exit status: 0 ok, 1 invalid config, 2 numerical
failure; failures print a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .compensation import solve_path
from .demand import Box, DemandSpec, PriceIncome, check_walras, range_probe
from .errors import IncompletePath, IntegrabilityError, NumericalFailure, ValidationError
from .function_space import rho, rows_to_csv, utility_convergence_experiment
from .recovery import recover_u
from .revealed import strong_axiom_check, weak_axiom_check
from .slutsky import check_S_NSD, quasilinear_kink

COMMANDS = ("check", "recover", "expenditure", "metric", "converge", "rp-check")


@dataclass
class ExperimentConfig:
    command: str
    demand: DemandSpec
    parameters: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, command: str, obj: dict, seed: int | None = None,
                  out: str | None = None) -> "ExperimentConfig":
        if command not in COMMANDS:
            raise ValidationError(f"unknown command {command!r}")
        if not isinstance(obj, dict):
            raise ValidationError("config must be a JSON object")
        if obj.get("command", command) != command:
            raise ValidationError(f"config is for {obj['command']!r}, not {command!r}")
        if "demand" not in obj:
            raise ValidationError("config needs a 'demand' object")
        params = obj.get("parameters", {})
        if not isinstance(params, dict):
            raise ValidationError("'parameters' must be an object")
        raw = dict(obj, command=command)
        if seed is not None:
            raw["seed"] = seed
        return cls(
            command=command,
            demand=DemandSpec.from_json(obj["demand"]),
            parameters=params,
            output=out or obj.get("output", "out"),
            seed=int(raw.get("seed", 0)),
            raw=raw,
        )

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------- output


def _fmt(obj) -> str:
    """JSON with 17 significant digits for floats, sorted keys."""
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in sorted(obj.items()))
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g") if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(obj)


def dump_json(obj) -> str:
    return _fmt(obj) + "\n"


def _write(prefix: str, suffix: str, text: str) -> str:
    path = Path(f"{prefix}.{suffix}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return str(path)


def _vec(params, key, default=None):
    if key not in params:
        if default is None:
            raise ValidationError(f"missing parameter {key!r}")
        return np.asarray(default, dtype=float)
    return np.asarray(params[key], dtype=float)


def _region(spec, params):
    return Box.from_json(params["region"]) if "region" in params else None


# ---------------------------------------------------------------- commands


def _check(cfg, pool):
    spec, prm = cfg.demand, cfg.parameters
    region = _region(spec, prm)
    kink = prm.get("kink_exclusion")
    if kink is None and spec.family == "quasilinear_sqrt":
        kink = 0.05
    walras = check_walras(spec, region, int(prm.get("walras_samples", 100)), cfg.seed)
    slutsky = check_S_NSD(spec, region, int(prm.get("samples", 500)), float(prm.get("tol", 1e-5)),
                          quasilinear_kink(float(kink)) if kink else None, cfg.seed)
    rng = range_probe(spec, region, int(prm.get("range_samples", 200)), cfg.seed)
    report = {
        "walras": walras.to_json(),
        "slutsky": slutsky.to_json(),
        "range": {"lower": rng.lower, "upper": rng.upper, "full_dimensional": rng.full_dimensional()},
        "passed": bool(walras.max_abs_residual <= 1e-10 * max(walras.worst_point.m, 1.0)
                       and slutsky.passed),
    }
    return report, {}


def _recover(cfg, pool):
    spec, prm = cfg.demand, cfg.parameters
    pbar = _vec(prm, "pbar", np.ones(spec.n))
    xs = np.atleast_2d(_vec(prm, "x"))
    inversion = prm.get("inversion", "auto")
    results = list(pool.map(lambda x: recover_u(spec, pbar, x, inversion), xs))
    files = {}
    if len(results) == 1 and results[0].in_range:
        files["path.csv"] = results[0].path.to_csv()
    body = [r.to_json() for r in results]
    return {"pbar": pbar, "results": body} if len(body) > 1 else dict(body[0], pbar=pbar), files


def _expenditure(cfg, pool):
    spec, prm = cfg.demand, cfg.parameters
    base = prm.get("base") or {}
    pi = PriceIncome(base.get("p", np.ones(spec.n)), float(base.get("m", 1.0)))
    q = _vec(prm, "q")
    path = solve_path(spec, pi.p, q, pi.m, float(prm.get("tol", 1e-9)))
    if not path.complete:
        raise IncompletePath(path.status, path)
    return {"E": path.terminal, "base": pi.to_json(), "q": q, "path": path.sidecar()}, {"path.csv": path.to_csv()}


def _metric(cfg, pool):
    prm = cfg.parameters
    if "other" not in prm:
        raise ValidationError("metric needs parameters.other (a demand spec)")
    other = DemandSpec.from_json(prm["other"])
    res = rho(cfg.demand, other, int(prm.get("nu_max", 8)), int(prm.get("points_per_axis", 20)))
    return dict(res.to_json(), sups=res.sups), {}


def _sequence(prm):
    seq = prm.get("sequence")
    if isinstance(seq, dict) and "ces_sigma" in seq:
        return [DemandSpec.ces(float(s)) for s in seq["ces_sigma"]]
    if isinstance(seq, list) and seq:
        return [DemandSpec.from_json(s) for s in seq]
    raise ValidationError("converge needs parameters.sequence: list of specs or {'ces_sigma': [...]}")


def _converge(cfg, pool):
    spec, prm = cfg.demand, cfg.parameters
    seq = _sequence(prm)
    D = Box.from_json(prm["D"]) if "D" in prm else None
    pbar = _vec(prm, "pbar", np.ones(spec.n))
    rows = utility_convergence_experiment(seq, spec, pbar, D, int(prm.get("points_per_axis", 5)),
                                          prm.get("k"), map_fn=pool.map)
    report = {
        "limit": spec.to_json(),
        "rows": [{"k": r.k, "label": r.label, "sup_error": r.sup_error,
                  "not_in_range_count": r.not_in_range_count} for r in rows],
    }
    return report, {"table.csv": rows_to_csv(rows)}


def _rp_check(cfg, pool):
    spec, prm = cfg.demand, cfg.parameters
    region = _region(spec, prm)
    tol = float(prm.get("tol", 1e-9))
    weak = weak_axiom_check(spec, int(prm.get("samples", 40)), cfg.seed, tol, region)
    strong = strong_axiom_check(spec, int(prm.get("chain_length", 4)), int(prm.get("chains", 100)),
                                cfg.seed, tol, region)
    return {"weak": weak.to_json(), "strong": strong.to_json()}, {}


HANDLERS = {
    "check": _check,
    "recover": _recover,
    "expenditure": _expenditure,
    "metric": _metric,
    "converge": _converge,
    "rp-check": _rp_check,
}


def run(cfg: ExperimentConfig, threads: int = 1) -> list:
    """Execute a config and write its artifacts; returns written paths."""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        report, files = HANDLERS[cfg.command](cfg, pool)
    header = {
        "command": cfg.command,
        "config_hash": cfg.config_hash,
        "version": __version__,
        "seed": cfg.seed,
        "demand": cfg.demand.to_json(),
    }
    written = [_write(cfg.output, "report.json", dump_json(dict(header, result=report)))]
    stamp = f"# config_hash={cfg.config_hash} version={__version__}\n"
    for suffix, text in sorted(files.items()):
        written.append(_write(cfg.output, suffix, stamp + text))
    return written


def _error(kind: str, exc: Exception, code: int) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    status = getattr(exc, "status", None)
    if status is not None:
        payload["status"] = getattr(status, "value", str(status))
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="integrability", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="path to a JSON config")
    src.add_argument("--config-json", type=str, help="inline JSON config")
    parser.add_argument("--out", type=str, default=None, help="output path prefix")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else args.config_json
        obj = json.loads(text)
        cfg = ExperimentConfig.from_json(args.command, obj, args.seed, args.out)
        for path in run(cfg, args.threads):
            print(path)
    except (ValidationError, json.JSONDecodeError, OSError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, NumericalFailure):
            return _error("numerical", exc, 2)
        return _error("validation", exc, 1)
    except IntegrabilityError as exc:
        return _error("numerical", exc, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())

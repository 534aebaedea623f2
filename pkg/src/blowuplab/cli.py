"""Command line runner for the experiment catalog.

    blowuplab list
    blowuplab run riccati-instability --out runs --seed 0 --param p_values=1,2,inf
    blowuplab profile --alpha 0.05 --emit --out runs
    blowuplab report runs

Each run writes <out>/<experiment>/report.json plus one CSV per table.
The exit status is 0 when every check passes, 1 when a check fails and
2 on invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

THREAD_ENV = "BLOWUPLAB_THREADS"
MODULES = ("riccati", "burgers", "bichar", "wkb", "profile")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    out: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    REQUIRED = ("experiment", "out")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        missing = [k for k in cls.REQUIRED if data.get(k) in (None, "")]
        if missing:
            raise ConfigError(f"config is missing required fields: {', '.join(missing)}")
        unknown = sorted(set(data) - {"experiment", "out", "seed", "params"})
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params must be a table")
        return cls(str(data["experiment"]), str(data["out"]), seed, dict(params))

    def validated(self):
        from . import experiments

        try:
            exp = experiments.get_experiment(self.experiment)
            return exp, exp.validate(self.params)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def canonical(self) -> dict:
        exp, params = self.validated()
        return {"experiment": exp.name, "seed": self.seed, "params": _jsonable(params)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    return obj


def _digest(obj) -> str:
    text = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunReport:
    experiment: str
    anchor: str
    seed: int
    params: dict
    records: list
    passed: bool
    wall_clock: float
    config_hash: str
    records_hash: str
    tables: list

    def as_dict(self) -> dict:
        return _jsonable(self.__dict__)


def write_table(rows: list, path: Path) -> None:
    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in cols])


def _cell(v):
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return v


def run(config: ExperimentConfig, echo=print) -> RunReport:
    from . import experiments

    exp, params = config.validated()
    canon = config.canonical()
    outcome, wall = experiments.execute(exp.name, params, config.seed)
    records = [c.as_dict() for c in outcome.checks]
    target = Path(config.out) / exp.name
    target.mkdir(parents=True, exist_ok=True)
    tables = []
    for stem, rows in sorted(outcome.tables.items()):
        if rows:
            write_table(rows, target / f"{stem}.csv")
            tables.append(f"{stem}.csv")
    report = RunReport(
        experiment=exp.name,
        anchor=exp.anchor,
        seed=config.seed,
        params=canon["params"],
        records=records,
        passed=outcome.passed,
        wall_clock=wall,
        config_hash=_digest(canon),
        records_hash=_digest({"records": records, "tables": outcome.tables}),
        tables=tables,
    )
    with open(target / "report.json", "w") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
    for c in outcome.checks:
        echo(f"[{exp.name}] {c.line()}")
    echo(f"[{exp.name}] {'PASS' if report.passed else 'FAIL'} in {wall:.2f} s, records {report.records_hash[:12]}")
    return report


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from None


def _build(args, experiment: str | None, extra: dict) -> ExperimentConfig:
    data = _load_config(args.config)
    if experiment:
        data["experiment"] = experiment
    if args.out is not None:
        data["out"] = args.out
    data.setdefault("out", "runs")
    if args.seed is not None:
        data["seed"] = args.seed
    params = dict(data.get("params", {}))
    params.update(extra)
    params.update(_parse_overrides(args.param))
    data["params"] = params
    return ExperimentConfig.from_mapping(data)


def _module_params(args, exp) -> dict:
    p = {}
    if getattr(args, "field", None):
        if "fields" in exp.params:
            p["fields"] = args.field
        elif "field" in exp.params:
            p["field"] = args.field
    for key in ("alpha", "variant"):
        val = getattr(args, key, None)
        if val is not None and key in exp.params:
            p[key] = val
    if getattr(args, "alpha_ladder", None) and "alphas" in exp.params:
        p["alphas"] = args.alpha_ladder
    return p


def _emit_profile(alpha: float, out: str, echo) -> None:
    from . import polar

    g = polar.make_grid(alpha)
    prof = polar.profile_fields(alpha, g)
    target = Path(out) / "profile-fields"
    target.mkdir(parents=True, exist_ok=True)
    for name, f in (("omega_bar", prof.omega), ("eta_bar", prof.eta)):
        polar.write_field_csv(f, target / f"{name}.csv")
        polar.write_field_json(f, target / f"{name}.json", norms={"c": prof.c, "c_l": prof.c_l, "c_omega": prof.c_omega})
    echo(f"[profile] wrote omega_bar and eta_bar at alpha = {alpha:g} to {target}")


def report_dir(path: str, echo=print) -> bool:
    files = sorted(Path(path).glob("*/report.json"))
    if not files:
        raise ConfigError(f"no reports under {path}")
    ok = True
    for f in files:
        rep = json.loads(f.read_text())
        n_pass = sum(r["passed"] for r in rep["records"])
        echo(f"{'PASS' if rep['passed'] else 'FAIL'} {rep['experiment']:<22} {n_pass}/{len(rep['records'])} checks  [{rep['anchor']}]")
        for r in rep["records"]:
            if not r["passed"]:
                echo(f"    failed: {r['name']} (measured {r['measured']:.6g}, expected {r['kind']} {r['expected']:.6g})")
        ok &= rep["passed"]
    return ok


def _add_common(p):
    p.add_argument("--config", help="TOML file with experiment, out, seed and a [params] table")
    p.add_argument("--out", help="output directory (default runs)")
    p.add_argument("--seed", type=int, help="seed for the samplers")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="override one experiment parameter")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowuplab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list the experiment catalog")
    p = sub.add_parser("run", help="run one experiment by name")
    p.add_argument("experiment", nargs="?")
    _add_common(p)
    for mod in MODULES:
        p = sub.add_parser(mod, help=f"run the {mod} experiments")
        p.add_argument("--experiment", help="run only this catalog entry")
        _add_common(p)
        if mod in ("bichar", "wkb"):
            p.add_argument("--field", help="field name (comma separated list where the experiment takes several)")
        if mod == "profile":
            p.add_argument("--alpha", type=float)
            p.add_argument("--alpha-ladder", dest="alpha_ladder")
            p.add_argument("--variant", choices=("half-plane", "cylinder"))
            p.add_argument("--emit", action="store_true", help="write the profile fields as CSV and JSON")
    p = sub.add_parser("report", help="summarize the reports in an output directory")
    p.add_argument("path")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get(THREAD_ENV)
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    from . import experiments

    try:
        if args.command == "list":
            for e in experiments.list_experiments():
                print(f"{e['name']:<22} {e['module']:<8} {e['description']}  [{e['anchor']}]")
            return 0
        if args.command == "report":
            return 0 if report_dir(args.path) else 1
        if args.command == "run":
            reports = [run(_build(args, args.experiment, {}))]
        else:
            names = [e.name for e in experiments.CATALOG.values() if e.module == args.command]
            if args.experiment:
                if args.experiment not in names:
                    raise ConfigError(f"{args.experiment!r} is not a {args.command} experiment; choose from {', '.join(names)}")
                names = [args.experiment]
            if args.command == "profile" and args.emit:
                _emit_profile(args.alpha if args.alpha is not None else 0.1, args.out or "runs", print)
            reports = [run(_build(args, n, _module_params(args, experiments.CATALOG[n]))) for n in names]
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())

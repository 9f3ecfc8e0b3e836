"""Command-line front end.

    python3 -m triformation simulate --d 1,1,1 --z0 0,0,1,0,0,1
    python3 -m triformation equilibria --d 3,4,5 --format csv
    python3 -m triformation verify --quick
    python3 -m triformation montecarlo --d 1,1,1 --trials 500 --seed 42

Exit codes: 0 success, 1 invalid configuration, 2 unresolved trajectory,
3 failed verification. Settings come from defaults, then a flat
``key = value`` file given by ``--config``, then command-line flags.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .algebra import FormationSpec, check_links
from .dynamics import Classification, IntegratorConfig, integrate, integrate_positions
from .equilibria import (
    all_equilibria,
    catalog_dict,
    verify_psi_sum_negative,
    write_catalog_csv,
)
from .errors import ConfigError, TriformationError, VerificationError
from .experiments import initial_links, region_of_attraction_study, run_verification

EXIT_OK, EXIT_CONFIG, EXIT_UNRESOLVED, EXIT_VERIFY = 0, 1, 2, 3

_INTEGRATOR_KEYS = {f.name: f.type for f in fields(IntegratorConfig)}

# key -> default; "d", "z0" and "e0" are comma-separated lists.
_COMMON = {"d": "1,1,1", "format": None, "out": None}
_PER_COMMAND = {
    "simulate": {"seed": 0, "z0": None, "e0": None, "collinear_start": False},
    "equilibria": {},
    "verify": {"seed": 0, "samples": 1000, "quick": False},
    "montecarlo": {"seed": 42, "trials": 500, "collinear": False, "workers": 1, "emit_trajectories": None},
}
_DEFAULT_FORMAT = {"simulate": "csv", "equilibria": "json", "verify": "json", "montecarlo": "json"}


@dataclass
class RunConfig:
    command: str
    spec: FormationSpec
    integrator: IntegratorConfig
    format: str
    out: str
    params: dict = field(default_factory=dict)


def _vector(text, n, name):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"expected {n} comma-separated numbers, got {text!r}")
    if len(vals) != n:
        raise ConfigError(f"expected {n} comma-separated numbers, got {len(vals)}")
    return vals


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; returns ``{key: (value, "path:line")}``."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc.strerror})")
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ConfigError(f"{path}:{no}: empty key")
        if key in out:
            raise ConfigError(f"{path}:{no}: duplicate key {key!r}")
        out[key] = (value, f"{path}:{no}")
    return out


def build_run_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and flags, then validate everything."""
    allowed = {**_COMMON, **_PER_COMMAND[command]}
    merged = {k: (v, "default") for k, v in allowed.items()}
    integ = {}
    if getattr(args, "config", None):
        for key, (value, where) in read_config_file(args.config).items():
            if key in _INTEGRATOR_KEYS:
                integ[key] = (value, where)
            elif key in allowed:
                merged[key] = (value, where)
            else:
                raise ConfigError(f"{where}: unknown key {key!r} for '{command}'")
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = (value, f"--{key.replace('_', '-')}")
    for key in _INTEGRATOR_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            integ[key] = (value, f"--{key.replace('_', '-')}")

    def located(key, fn):
        value, where = merged[key]
        try:
            return fn(value)
        except (ConfigError, ValueError, TypeError) as exc:
            raise ConfigError(f"{where}: {key}: {exc}")

    spec = located("d", lambda v: FormationSpec.from_sequence(_vector(v, 3, "d")))
    icfg = {}
    for key, (value, where) in integ.items():
        cast = str if key == "method" else (int if key == "max_steps" else float)
        try:
            icfg[key] = cast(float(value)) if cast is int else cast(value)
        except ValueError:
            raise ConfigError(f"{where}: {key}: cannot parse {value!r}")
    try:
        integrator = IntegratorConfig(**icfg)
    except ConfigError as exc:
        where = ", ".join(w for _, w in integ.values()) or "defaults"
        raise ConfigError(f"{where}: {exc}")

    fmt = located("format", lambda v: v or _DEFAULT_FORMAT[command])
    if fmt not in ("csv", "json"):
        raise ConfigError(f"{merged['format'][1]}: format must be csv or json, got {fmt!r}")
    out = merged["out"][0] or f"{command}.{fmt}"

    params = {}
    for key in _PER_COMMAND[command]:
        value, _ = merged[key]
        if key in ("seed", "samples", "trials", "workers"):
            params[key] = located(key, lambda v: int(v))
        elif key in ("quick", "collinear", "collinear_start"):
            params[key] = located(key, _bool)
        elif key in ("z0", "e0"):
            params[key] = None if value is None else located(key, lambda v: _vector(v, 6, key))
        else:
            params[key] = value
    if command == "montecarlo":
        if params["trials"] < 1:
            raise ConfigError(f"{merged['trials'][1]}: trials must be >= 1, got {params['trials']}")
        if params["workers"] < 1:
            raise ConfigError(f"{merged['workers'][1]}: workers must be >= 1")
    if command == "verify" and params["samples"] < 1:
        raise ConfigError(f"{merged['samples'][1]}: samples must be >= 1")
    if command == "simulate":
        given = [k for k in ("z0", "e0") if params[k] is not None] + (["collinear_start"] if params["collinear_start"] else [])
        if len(given) > 1:
            raise ConfigError(f"choose one initial condition, got {', '.join(given)}")
        if params["e0"] is not None:
            try:
                check_links(params["e0"])
            except TriformationError as exc:
                raise ConfigError(f"{merged['e0'][1]}: e0: {exc}")
    return RunConfig(command, spec, integrator, fmt, out, params)


def _write(cfg: RunConfig, text: str):
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)


def _summary(cfg: RunConfig, text: str):
    # With --out - the file content owns stdout, so the summary moves to stderr.
    print(text, file=sys.stderr if cfg.out == "-" else sys.stdout)


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    seed = None
    if p["z0"] is not None:
        rec = integrate_positions(p["z0"], cfg.spec, cfg.integrator)
    else:
        if p["e0"] is not None:
            e0 = np.array(p["e0"])
        else:
            seed = p["seed"]
            dist = "collinear" if p["collinear_start"] else "gaussian"
            e0 = initial_links(cfg.spec, dist, np.random.default_rng(seed))
        rec = integrate(e0, cfg.spec, cfg.integrator)
    if cfg.format == "json":
        d = rec.to_dict()
        d["seed"] = seed
        text = json.dumps(d) + "\n"
    else:
        text = (f"# seed={seed}\n" if seed is not None else "") + rec.to_csv()
    _write(cfg, text)
    lengths = ",".join(f"{v:.12g}" for v in rec.final_lengths())
    _summary(cfg, f"simulate: {rec.classification.value} t={rec.final_time:.6g} V={rec.potential_values[-1]:.3e} "
                  f"lengths={lengths} seed={seed} out={cfg.out}")
    return EXIT_UNRESOLVED if rec.classification is Classification.UNRESOLVED else EXIT_OK


def cmd_equilibria(cfg: RunConfig) -> int:
    records = all_equilibria(cfg.spec)
    if cfg.format == "json":
        text = json.dumps(catalog_dict(cfg.spec, records)) + "\n"
    else:
        text = write_catalog_csv(records)
    _write(cfg, text)
    coll = [r for r in records if r.is_collinear]
    bad_gamma = [r for r in coll if not r.gamma_scalar() > 0]
    try:
        verify_psi_sum_negative(records)
        psi_ok = True
    except VerificationError:
        psi_ok = False
    ok = psi_ok and not bad_gamma
    gmin = min((r.gamma_scalar() for r in coll), default=float("nan"))
    _summary(cfg, f"equilibria: {len(records)} records, {len(coll)} collinear, min gamma={gmin:.6g}, "
                  f"psi_sum<0: {psi_ok}, out={cfg.out}")
    if not ok:
        print("VERIFICATION FAILED: a collinear equilibrium has gamma <= 0 or psi_sum >= 0", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    p = cfg.params
    report = run_verification(seed=p["seed"], samples=p["samples"], quick=p["quick"])
    report = {"schema_version": "1", "kind": "verification", "seed": p["seed"], "samples": p["samples"],
              "quick": p["quick"], **report}
    if cfg.format == "json":
        text = json.dumps(report) + "\n"
    else:
        rows = ["check,passed,value,threshold,margin"]
        rows += [f"{c['name']},{c['passed']},{c['value']!r},{c['threshold']!r},{c['margin']!r}" for c in report["checks"]]
        text = f"# seed={p['seed']}\n" + "\n".join(rows) + "\n"
    _write(cfg, text)
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    _summary(cfg, f"verify: {len(report['checks']) - len(failed)}/{len(report['checks'])} checks passed"
                  + (f" (failed: {', '.join(failed)})" if failed else "") + f" seed={p['seed']} out={cfg.out}")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_montecarlo(cfg: RunConfig) -> int:
    p = cfg.params
    rep = region_of_attraction_study(cfg.spec, p["trials"], "collinear" if p["collinear"] else "gaussian",
                                     p["seed"], cfg.integrator, p["workers"], p["emit_trajectories"])
    text = rep.to_json() + "\n" if cfg.format == "json" else rep.to_csv()
    _write(cfg, text)
    counts = rep.counts()
    _summary(cfg, "montecarlo: " + " ".join(f"{k}={v}" for k, v in counts.items())
             + f" dichotomy={rep.dichotomy_holds()} seed={p['seed']} out={cfg.out}")
    if rep.unresolved():
        return EXIT_UNRESOLVED
    return EXIT_OK if rep.dichotomy_holds() else EXIT_VERIFY


COMMANDS = {"simulate": cmd_simulate, "equilibria": cmd_equilibria, "verify": cmd_verify,
            "montecarlo": cmd_montecarlo}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triformation", description="Three-robot cyclic formation control experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--d", help="target lengths d1,d2,d3 (default 1,1,1)")
        sp.add_argument("--config", help="flat key = value settings file")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--out", help="output path, '-' for stdout")
        g = sp.add_argument_group("integrator")
        g.add_argument("--method", choices=("dop853", "rk45", "rk4"))
        for name in ("rtol", "atol", "step", "t_max", "v_target", "field_tol", "v_collinear_min", "velocity_tol"):
            g.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
        g.add_argument("--max-steps", dest="max_steps", type=int)

    sp = sub.add_parser("simulate", help="integrate one trajectory")
    common(sp)
    sp.add_argument("--z0", help="initial positions z1x,z1y,z2x,z2y,z3x,z3y")
    sp.add_argument("--e0", help="initial links e1x,...,e3y (must sum to zero)")
    sp.add_argument("--collinear-start", action="store_true", help="seeded start on a line")
    sp.add_argument("--seed", type=int, help="seed for random starts (default 0)")

    sp = sub.add_parser("equilibria", help="catalog equilibria with Gamma and psi sums")
    common(sp)

    sp = sub.add_parser("verify", help="run the property suite")
    common(sp)
    sp.add_argument("--quick", action="store_true", help="reduced sweep sizes")
    sp.add_argument("--samples", type=int, help="random states for pointwise identities (default 1000)")
    sp.add_argument("--seed", type=int, help="default 0")

    sp = sub.add_parser("montecarlo", help="region-of-attraction study")
    common(sp)
    sp.add_argument("--trials", type=int, help="default 500")
    sp.add_argument("--collinear", action="store_true", help="exactly collinear starts")
    sp.add_argument("--seed", type=int, help="default 42")
    sp.add_argument("--workers", type=int, help="worker processes (default 1)")
    sp.add_argument("--emit-trajectories", dest="emit_trajectories", metavar="DIR",
                    help="write each trial's trajectory CSV into DIR")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_run_config(args.command, args)
    except (ConfigError, TriformationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())

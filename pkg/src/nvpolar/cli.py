"""Command-line entry point: ``nvpolar <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 validation error,
3 degenerate-physics warning escalated by ``--strict``, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import _io, fixtures
from .coherence import DEFAULT_T_MAX, GridKind, CoherenceSeries, build_grid, prime_envelope, series_on_grid
from .estimator import (
    HEADLINE_HORIZON,
    AmplitudeCalibration,
    DegenerateSpinWarning,
    calibrate,
    estimate_from_doubleprime,
    estimate_from_prime,
    sweep,
    warn_if_degenerate,
)
from .hyperfine import DegenerateSpinError, PhysicalConstants, larmor_frequency
from .lattice import EmptyEnvironmentError, EnvironmentRealization, LatticeConfig, generate_environment, read_environment, set_polarizations, write_environment

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4

FIG3_FIELDS = (0.25, 0.75, 1.0, 5.0)
EXTRA_TABLES_FIELD = 3.0
FIG1_T_MAX = 250.0
FIG2_T_MAX = 50.0
FIG2_DT = 0.005
REPRODUCE_TARGETS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "headline")


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    fields: list = field(default_factory=lambda: [1.0])
    polarization: object = 0.8
    grid: dict = field(default_factory=lambda: {"kind": "t_prime", "t_max": DEFAULT_T_MAX, "dt": None})
    horizon_us: float | None = None
    out: str = "out"
    seed: int | None = None
    strict: bool = False

    _KEYS = ("constants", "lattice", "fields", "polarization", "grid", "horizon_us", "io", "seed", "strict")
    _GRID_KEYS = ("kind", "t_max", "dt")

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        unknown = set(data) - set(cls._KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        if "constants" in data:
            cfg.constants = PhysicalConstants.from_dict(data["constants"])
        if "lattice" in data:
            cfg.lattice = LatticeConfig.from_dict(data["lattice"])
        if "fields" in data:
            cfg.fields = [float(B) for B in data["fields"]]
        if "polarization" in data:
            cfg.polarization = data["polarization"]
        if "grid" in data:
            bad = set(data["grid"]) - set(cls._GRID_KEYS)
            if bad:
                raise ValidationError(f"unknown grid keys: {sorted(bad)}")
            cfg.grid = {**cfg.grid, **data["grid"]}
        if "io" in data:
            bad = set(data["io"]) - {"out"}
            if bad:
                raise ValidationError(f"unknown io keys: {sorted(bad)}")
            cfg.out = data["io"].get("out", cfg.out)
        cfg.horizon_us = data.get("horizon_us", cfg.horizon_us)
        cfg.seed = data.get("seed", cfg.seed)
        cfg.strict = bool(data.get("strict", cfg.strict))
        return cfg

    def validate(self) -> RunConfig:
        if not self.fields or any(not B > 0 for B in self.fields):
            raise ValidationError(f"fields must be a non-empty list of positive values, got {self.fields}")
        GridKind.parse(self.grid["kind"])
        if not float(self.grid["t_max"]) > 0:
            raise ValidationError("grid.t_max must be positive")
        if self.horizon_us is not None and not self.horizon_us > 0:
            raise ValidationError("horizon_us must be positive")
        parse_polarization(self.polarization)
        if self.seed is not None:
            self.lattice = replace(self.lattice, seed=int(self.seed))
        return self

    def to_dict(self) -> dict:
        return {
            "constants": self.constants.to_dict(),
            "lattice": self.lattice.to_dict(),
            "fields": list(self.fields),
            "polarization": self.polarization,
            "grid": dict(self.grid, kind=GridKind.parse(self.grid["kind"]).value),
            "horizon_us": self.horizon_us,
            "io": {"out": str(self.out)},
            "seed": self.seed,
            "strict": self.strict,
        }


def parse_polarization(spec):
    """A number, a list, or a comma-separated string of polarizations."""
    if isinstance(spec, str):
        parts = [s for s in spec.split(",") if s.strip()]
        values = [float(s) for s in parts]
        return values[0] if len(values) == 1 else values
    if isinstance(spec, (int, float)):
        return float(spec)
    return [float(v) for v in spec]


def load_env(ref: str, B_z: float | None = None) -> EnvironmentRealization:
    if ref in fixtures.NAMES:
        fixtures.verify(ref)
        return fixtures.load(ref, B_z)
    return read_environment(ref, B_z)


def _meta(cfg: RunConfig, command: str, **more) -> dict:
    return {"command": command, "config": cfg.to_dict(), **more}


# ---------------------------------------------------------------- commands


def cmd_generate(cfg: RunConfig, args) -> int:
    env = generate_environment(cfg.lattice, cfg.constants)
    stem = Path(cfg.out) / (args.name or "environment")
    csv_path, _ = write_environment(env, stem, extra=_meta(cfg, "generate", constants=cfg.constants.to_dict()))
    print(f"wrote {env.n_spins} spins to {csv_path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    B = cfg.fields[0]
    env = set_polarizations(load_env(args.env), parse_polarization(cfg.polarization)).with_field(B)
    warn_if_degenerate(env, cfg.constants)
    kind = GridKind.parse(cfg.grid["kind"])
    series = series_on_grid(env, cfg.constants, kind, float(cfg.grid["t_max"]), dt=cfg.grid.get("dt"),
                            include_free_phase=args.free_phase)
    paths = series.write(Path(cfg.out) / (args.name or "series"), extra=_meta(cfg, "simulate", env=str(args.env)))
    print(f"wrote {len(series)} samples to {paths[0]}")
    return EXIT_OK


def cmd_estimate(cfg: RunConfig, args) -> int:
    calibration = None
    if args.calibration:
        calibration = AmplitudeCalibration.from_dict(json.loads(Path(args.calibration).read_text()))
    if args.series:
        series = CoherenceSeries.read(args.series)
    elif args.env:
        B = cfg.fields[0]
        env = set_polarizations(load_env(args.env), parse_polarization(cfg.polarization)).with_field(B)
        warn_if_degenerate(env, cfg.constants)
        t_max = cfg.horizon_us or float(cfg.grid["t_max"])
        series = series_on_grid(env, cfg.constants, cfg.grid["kind"], t_max)
    else:
        raise ValidationError("estimate needs --series or --env")
    horizon = cfg.horizon_us
    if series.grid.kind is GridKind.T_PRIME:
        est = estimate_from_prime(series, args.n_spins, horizon)
    elif series.grid.kind is GridKind.T_DOUBLEPRIME:
        est = estimate_from_doubleprime(series, args.n_spins, calibration, horizon)
    else:
        raise ValidationError("estimation needs a t_prime or t_doubleprime series, not a continuous one")
    stem = Path(cfg.out) / (args.name or "estimate")
    est.write(stem, extra=_meta(cfg, "estimate"))
    print(f"p_bar = {_io.fmt(est.p_bar)}  product_bound = {_io.fmt(est.product_bound)}  (N={est.N}, horizon={_io.fmt(est.horizon)} us)")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, args) -> int:
    B = cfg.fields[0]
    env = load_env(args.env).with_field(B)
    cal = calibrate(env, cfg.constants, B, cfg.horizon_us or float(cfg.grid["t_max"]))
    path = _io.write_json(Path(cfg.out) / (args.name or "calibration.json"), {**cal.to_dict(), **_meta(cfg, "calibrate")})
    print(f"amplitude product lower bound = {_io.fmt(cal.amplitude_product_lower_bound)} -> {path}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    env = load_env(args.env)
    horizon = cfg.horizon_us or float(cfg.grid["t_max"])
    for B in cfg.fields:
        warn_if_degenerate(env, cfg.constants, B)
    results = sweep(env, cfg.constants, cfg.fields, parse_polarization(cfg.polarization), horizon,
                    cfg.grid["kind"], workers=args.workers)
    out = Path(cfg.out)
    summary = []
    for B, est in zip(cfg.fields, results):
        est.write(out / f"estimate_B{_io.fmt(B)}T", extra=_meta(cfg, "sweep"))
        summary.append({"B_z": B, "p_bar": est.p_bar, "product_bound": est.product_bound, "steps": len(est.staircase)})
        print(f"B = {_io.fmt(B)} T: p_bar = {_io.fmt(est.p_bar)}")
    _io.write_json(out / "sweep.json", {"results": summary, **_meta(cfg, "sweep")})
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    from .oracle import run_battery

    report = run_battery(n_single=args.n_single)
    path = _io.write_json(Path(cfg.out) / "verify.json", report)
    for name, check in report["checks"].items():
        print(f"{'PASS' if check['passed'] else 'FAIL'}  {name}  worst={check['worst']:.3g}")
    print(f"report: {path}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _floor(p: float, n: int) -> float:
    return 0.5 * p**n


def reproduce(target: str, out: Path, constants: PhysicalConstants | None = None) -> dict:
    """Write the data behind one figure (or the headline number) under ``out/target``."""
    if target not in REPRODUCE_TARGETS:
        raise ValidationError(f"unknown target {target!r}; choose from {', '.join(REPRODUCE_TARGETS)}")
    fixtures.verify()
    constants = constants or PhysicalConstants()
    out = Path(out) / target
    meta = {"target": target, "constants": constants.to_dict()}

    if target in ("fig1", "fig4", "fig5", "fig6"):
        table = {"fig1": "table1", "fig4": "table2", "fig5": "table3", "fig6": "table4"}[target]
        B = 1.0 if target == "fig1" else EXTRA_TABLES_FIELD
        floors = {}
        for p in (0.8, 0.6):
            env = set_polarizations(fixtures.load(table, B), p)
            floor = _floor(p, env.n_spins)
            series = series_on_grid(env, constants, GridKind.T_PRIME, FIG1_T_MAX)
            series.write(out / f"series_p{p}", extra={**meta, "table": table, "floor": floor})
            floors[f"p{p}"] = {"floor": floor, "min_abs": float(series.abs.min())}
        meta.update(table=table, B_z=B, floors=floors)
    elif target == "fig2":
        env = set_polarizations(fixtures.load("table1", 1.0), 0.8)
        series = series_on_grid(env, constants, GridKind.T_PRIME, FIG2_T_MAX)
        series.write(out / "series_p0.8", extra=meta)
        grid = build_grid(GridKind.CONTINUOUS, larmor_frequency(1.0, constants), FIG2_T_MAX, FIG2_DT)
        t = grid.times
        env_curve = prime_envelope(t, env, constants)
        text = "t_us,abs_rho01_envelope\n" + "".join(f"{_io.fmt(a)},{_io.fmt(b)}\n" for a, b in zip(t, env_curve))
        _io.atomic_write_text(out / "envelope_p0.8.csv", text)
        meta.update(table="table1", B_z=1.0, floor=_floor(0.8, 8))
    elif target == "fig3":
        env = fixtures.load("table1")
        results = sweep(env, constants, FIG3_FIELDS, 0.8, DEFAULT_T_MAX, GridKind.T_PRIME)
        summary = []
        for B, est in zip(FIG3_FIELDS, results):
            est.write(out / f"estimate_B{_io.fmt(B)}T", extra=meta)
            summary.append({"B_z": B, "p_bar": est.p_bar, "steps": len(est.staircase)})
        meta.update(table="table1", results=summary)
    else:
        env = set_polarizations(fixtures.load("table1", 1.0), 0.8)
        series = series_on_grid(env, constants, GridKind.T_PRIME, HEADLINE_HORIZON)
        est = estimate_from_prime(series, env.n_spins, HEADLINE_HORIZON)
        est.write(out / "estimate", extra=meta)
        meta.update(table="table1", B_z=1.0, p_bar=est.p_bar, product_bound=est.product_bound, horizon_us=HEADLINE_HORIZON)
    _io.write_json(out / "summary.json", meta)
    return meta


def cmd_reproduce(cfg: RunConfig, args) -> int:
    targets = REPRODUCE_TARGETS if args.target == "all" else (args.target,)
    for target in targets:
        meta = reproduce(target, Path(cfg.out), cfg.constants)
        if target == "headline":
            print(f"headline: p_bar = {_io.fmt(meta['p_bar'])} at {_io.fmt(meta['horizon_us'])} us")
        else:
            print(f"{target}: written to {Path(cfg.out) / target}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int)
    common.add_argument("--field", type=float, action="append", help="B_z in tesla (repeat for sweeps)")
    common.add_argument("--pol", help="polarization: one value or comma-separated list")
    common.add_argument("--grid", choices=["prime", "doubleprime", "continuous"])
    common.add_argument("--tmax-us", type=float)
    common.add_argument("--dt-us", type=float, help="step of the continuous grid")
    common.add_argument("--horizon-us", type=float)
    common.add_argument("--out", help="output directory")
    common.add_argument("--strict", action="store_true", help="treat degenerate-spin warnings as errors")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nvpolar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="draw a random 13C environment")
    p.add_argument("--max-spins", type=int)
    p.add_argument("--abundance", type=float)
    p.add_argument("--radius-nm", type=float)
    p.add_argument("--exclusion-nm", type=float)
    p.add_argument("--selection", choices=["strongest_coupling", "nearest"])
    p.add_argument("--name")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", parents=[common], help="sample the coherence on a grid")
    p.add_argument("--env", required=True, help="environment CSV/JSON or fixture name (table1..table4)")
    p.add_argument("--free-phase", action="store_true")
    p.add_argument("--name")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="polarization-product bound from a series")
    p.add_argument("--series", help="series stem written by simulate")
    p.add_argument("--env", help="environment to simulate instead of reading a series")
    p.add_argument("--n-spins", type=int)
    p.add_argument("--calibration", help="calibration JSON for t_doubleprime series")
    p.add_argument("--name")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("calibrate", parents=[common], help="unpolarized amplitude-product calibration")
    p.add_argument("--env", required=True)
    p.add_argument("--name")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", parents=[common], help="estimates over several fields")
    p.add_argument("--env", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", parents=[common], help="regenerate figure data")
    p.add_argument("target", choices=REPRODUCE_TARGETS + ("all",))
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("verify", parents=[common], help="run the oracle battery")
    p.add_argument("--n-single", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)
    return parser


def resolve_config(args) -> RunConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    cfg = RunConfig.from_dict(data)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.field:
        cfg.fields = list(args.field)
    if args.pol is not None:
        cfg.polarization = parse_polarization(args.pol)
    if args.grid:
        cfg.grid["kind"] = GridKind.parse(args.grid).value
    if args.tmax_us is not None:
        cfg.grid["t_max"] = args.tmax_us
    if args.dt_us is not None:
        cfg.grid["dt"] = args.dt_us
    if args.horizon_us is not None:
        cfg.horizon_us = args.horizon_us
    if args.out:
        cfg.out = args.out
    cfg.strict = cfg.strict or args.strict
    overrides = {}
    for flag, key in (("max_spins", "max_spins"), ("abundance", "abundance"), ("radius_nm", "supercell_radius"),
                      ("exclusion_nm", "exclusion_radius"), ("selection", "selection_rule")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if overrides:
        cfg.lattice = LatticeConfig.from_dict({**cfg.lattice.to_dict(), **overrides})
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateSpinWarning)
            code = args.func(cfg, args)
        degenerate = [w for w in caught if issubclass(w.category, DegenerateSpinWarning)]
        for w in degenerate:
            print(f"warning: {w.message}", file=sys.stderr)
        if degenerate and cfg.strict:
            return EXIT_DEGENERATE
        return code
    except EmptyEnvironmentError as exc:
        print(f"empty environment: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegenerateSpinError as exc:
        print(f"degenerate spin: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValueError, KeyError, ZeroDivisionError, fixtures.FixtureIntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

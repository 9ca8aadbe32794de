"""Command-line pipeline: estimate, uncertainty, validate, synth."""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import FilamentError, InvalidInputError
from .geometry import order_curve, vertex_chains
from .io import COLOR_SCALE, read_point_cloud, svg_scatter, write_csv, write_json
from .ridge import ScmsConfig, estimate_ridge, resolve_bandwidth
from .rng import DEFAULT_SEED
from .synthetic import KINDS, make_points
from .uncertainty import bootstrap_ridges, confidence_radii, local_uncertainty, order_statistic_index
from .validation import SUITES, run_suite

log = logging.getLogger("filaments")

EXIT_OK, EXIT_USER, EXIT_NUMERIC, EXIT_WARN = 0, 1, 2, 3


@dataclass
class RunConfig:
    input: str | None = None
    columns: list = field(default_factory=list)
    filters: list = field(default_factory=list)       # [column, lo, hi]
    bandwidth: str = "auto"
    bandwidth_multiplier: float = 1.0
    tau: float = 0.1
    grid: list = field(default_factory=lambda: [50, 50])
    bootstrap: str = "smooth"
    B: int = 100
    alpha: float = 0.1
    seed: int = DEFAULT_SEED
    out: str = "out"
    suite: str | None = None
    repetitions: int | None = None
    seeding: str = "grid"
    kind: str = "circle"
    n: int = 2000
    noise: float = 0.1

    def validate(self) -> "RunConfig":
        if not 0 < self.tau < 1:
            raise InvalidInputError("--tau must be in (0, 1)")
        if not 0 < self.alpha < 1:
            raise InvalidInputError("--alpha must be in (0, 1)")
        if self.B < 1:
            raise InvalidInputError("--B must be at least 1")
        if not self.bandwidth_multiplier > 0:
            raise InvalidInputError("--bandwidth-multiplier must be positive")
        if self.bootstrap not in ("empirical", "smooth"):
            raise InvalidInputError("--bootstrap must be empirical or smooth")
        if self.seeding not in ("grid", "base"):
            raise InvalidInputError("--seeding must be grid or base")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise InvalidInputError("--seed must be an unsigned 64-bit integer")
        if self.bandwidth != "auto":
            try:
                if not float(self.bandwidth) > 0:
                    raise ValueError
            except ValueError:
                raise InvalidInputError("--bandwidth must be 'auto' or a positive number") from None
        return self

    def scms(self) -> ScmsConfig:
        return ScmsConfig(tau=self.tau, grid=tuple(int(g) for g in self.grid))

    def echo(self) -> dict:
        return asdict(self)


def parse_filter(text) -> list:
    if isinstance(text, (list, tuple)) and len(text) == 3:
        col, lo, hi = text
    else:
        parts = str(text).rsplit(":", 2)
        if len(parts) != 3:
            raise InvalidInputError(f"filter {text!r} must look like COL:LO:HI")
        col, lo, hi = parts
    try:
        return [str(col), float(lo), float(hi)]
    except ValueError:
        raise InvalidInputError(f"filter {text!r} has non-numeric bounds") from None


def parse_grid(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).lower().split("x")]
    except ValueError:
        raise InvalidInputError(f"grid {text!r} must look like NxM") from None


def parse_columns(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [c.strip() for c in str(value).split(",") if c.strip()]


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the user-error status and an error record."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"status": EXIT_USER, "error": "UsageError", "message": message}, sort_keys=True),
              file=sys.stderr)
        raise SystemExit(EXIT_USER)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="filaments", description="Density ridge estimation with bootstrap uncertainty.")
    sub = p.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=S, help="JSON file with option values (flags override it)")
    common.add_argument("--input", default=S)
    common.add_argument("--columns", default=S, help="comma-separated names or 0-based indices")
    common.add_argument("--filter", dest="filters", action="append", default=S, metavar="COL:LO:HI")
    common.add_argument("--bandwidth", default=S, help="auto or a positive number")
    common.add_argument("--bandwidth-multiplier", dest="bandwidth_multiplier", type=float, default=S)
    common.add_argument("--tau", type=float, default=S)
    common.add_argument("--grid", default=S, metavar="NxM")
    common.add_argument("--bootstrap", choices=("empirical", "smooth"), default=S)
    common.add_argument("--B", type=int, default=S)
    common.add_argument("--alpha", type=float, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--out", default=S)
    common.add_argument("--suite", default=S)
    common.add_argument("--repetitions", type=int, default=S)
    common.add_argument("--seeding", choices=("grid", "base"), default=S,
                        help="bootstrap replicate seeds: full grid or the base ridge points")
    common.add_argument("--kind", default=S, help=f"synthetic shape: {', '.join(KINDS)}")
    common.add_argument("--n", type=int, default=S)
    common.add_argument("--noise", type=float, default=S)
    common.add_argument("-v", "--verbose", action="store_true", default=False)
    sub.add_parser("estimate", parents=[common], help="ridge points from a CSV point cloud")
    sub.add_parser("uncertainty", parents=[common], help="bootstrap uncertainty and confidence radii")
    sub.add_parser("validate", parents=[common], help="run a validation suite")
    sub.add_parser("synth", parents=[common], help="write a synthetic point cloud")
    return p


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values: dict = {}
    opts = vars(ns)
    if "config" in opts:
        path = Path(opts["config"])
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise InvalidInputError("config file must contain a JSON object")
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key == "filter":
                key = "filters"
            values[key] = v
    for k, v in opts.items():
        if k not in ("config", "command", "verbose"):
            values[k] = v
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise InvalidInputError(f"unknown option(s): {', '.join(unknown)}")
    if "filters" in values:
        values["filters"] = [parse_filter(f) for f in values["filters"]]
    if "grid" in values:
        values["grid"] = parse_grid(values["grid"])
    if "columns" in values:
        values["columns"] = parse_columns(values["columns"])
    if "bandwidth" in values:
        values["bandwidth"] = str(values["bandwidth"])
    return RunConfig(**values).validate()


def _versions() -> dict:
    return {"filaments": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _load(cfg: RunConfig):
    if not cfg.input:
        raise InvalidInputError("--input is required")
    return read_point_cloud(cfg.input, cfg.columns or None, [tuple(f) for f in cfg.filters])


def _bandwidth_label(cfg: RunConfig) -> str:
    return f"{cfg.bandwidth} x {cfg.bandwidth_multiplier:g}"


def _ridge_outputs(out: Path, cloud, R) -> list:
    cols = list(cloud.columns)
    curve_id = vertex_chains(R.points, R.h) if R.d == 2 else np.full(len(R), -1, dtype=int)
    write_csv(out / "ridge.csv", cols + ["density", "lambda2", "eigengap", "grad_norm", "iterations", "curve_id"],
              [R.points[:, k] for k in range(R.d)] + [R.density, R.lambda2, R.eigengap, R.grad_norm,
                                                     R.iterations.astype(int), curve_id.astype(int)])
    return curve_id


def run_estimate(cfg: RunConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    out = Path(cfg.out)
    cloud = _load(cfg)
    t_read = time.perf_counter()
    h = resolve_bandwidth(cloud.points, cfg.bandwidth, cfg.bandwidth_multiplier)
    R = estimate_ridge(cloud, cfg.scms(), bandwidth=h, rng_seed=cfg.seed)
    t_ridge = time.perf_counter()
    curve_id = _ridge_outputs(out, cloud, R)
    outputs = ["ridge.csv"]
    if R.d == 2 and len(R):
        svg_scatter(out / "ridge.svg", cloud.points, R.points, R.density,
                    curves=order_curve(R.points, R.h), title="ridge estimate")
        outputs.append("ridge.svg")
    warnings = [] if len(R) else ["empty ridge"]
    manifest = {
        "command": "estimate",
        "status": "warning" if warnings else "ok",
        "warnings": warnings,
        "config": cfg.echo(),
        "resolved": {"h": R.h, "bandwidth_rule": _bandwidth_label(cfg), "config_hash": R.config_hash},
        "counts": {"n": cloud.n, "rows_read": cloud.meta.get("rows_read"), "dropped_by_filter": cloud.meta.get("dropped"),
                   "seeds": R.n_seeds, "seeds_retained": R.n_retained, "converged": R.n_converged,
                   "rejected": R.rejected, "ridge_points": len(R), "curves": int(curve_id.max() + 1) if len(R) else 0},
        "color_scale": {"ridge.svg": "point colour = density, low to high", "stops": COLOR_SCALE},
        "outputs": outputs + ["manifest.json"],
        "versions": _versions(),
        "timings": {"read_s": t_read - t0, "ridge_s": t_ridge - t_read, "total_s": time.perf_counter() - t0},
    }
    write_json(out / "manifest.json", manifest)
    return (EXIT_WARN if warnings else EXIT_OK), manifest


def run_uncertainty(cfg: RunConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    out = Path(cfg.out)
    cloud = _load(cfg)
    h = resolve_bandwidth(cloud.points, cfg.bandwidth, cfg.bandwidth_multiplier)
    scms = cfg.scms()
    base = estimate_ridge(cloud, scms, bandwidth=h, rng_seed=cfg.seed)
    t_base = time.perf_counter()
    curve_id = _ridge_outputs(out, cloud, base)
    ens = bootstrap_ridges(cloud, base, cfg.B, cfg.bootstrap, scms, seed=cfg.seed, seeding=cfg.seeding)
    t_boot = time.perf_counter()
    fld = confidence_radii(local_uncertainty(base, ens), cfg.alpha)
    cols = list(cloud.columns)
    coords = [fld.anchors[:, k] for k in range(base.d)]
    write_csv(out / "uncertainty.csv", cols + ["rho2_hat", "B_effective"],
              coords + [fld.rho2, np.full(len(base), ens.B, dtype=int)])
    write_csv(out / "confidence.csv", cols + ["radius"], coords + [fld.radius])
    write_csv(out / "distances.csv", ["anchor"] + [f"d_{b}" for b in range(ens.B)],
              [np.arange(len(base))] + [fld.distances[:, b] for b in range(ens.B)])
    outputs = ["ridge.csv", "uncertainty.csv", "confidence.csv", "distances.csv"]
    if base.d == 2:
        svg_scatter(out / "uncertainty.svg", cloud.points, base.points, fld.rho2, radii=fld.radius,
                    curves=order_curve(base.points, base.h), title="local uncertainty")
        outputs.append("uncertainty.svg")
    warnings = [f"dropped {len(ens.dropped)} empty replicates"] if ens.dropped else []
    manifest = {
        "command": "uncertainty",
        "status": "warning" if warnings else "ok",
        "warnings": warnings,
        "config": cfg.echo(),
        "resolved": {"h": base.h, "bandwidth_rule": _bandwidth_label(cfg), "config_hash": base.config_hash,
                     "order_statistic": order_statistic_index(ens.B, cfg.alpha)},
        "counts": {"n": cloud.n, "rows_read": cloud.meta.get("rows_read"), "dropped_by_filter": cloud.meta.get("dropped"),
                   "seeds": base.n_seeds, "seeds_retained": base.n_retained, "ridge_points": len(base),
                   "curves": int(curve_id.max() + 1) if len(base) else 0,
                   "replicates_requested": cfg.B, "replicates_kept": ens.B, "replicates_dropped": ens.dropped},
        "color_scale": {"uncertainty.svg": "point colour = rho2_hat, low to high; discs = confidence radii",
                        "stops": COLOR_SCALE},
        "outputs": outputs + ["manifest.json"],
        "versions": _versions(),
        "timings": {"base_s": t_base - t0, "bootstrap_s": t_boot - t_base, "total_s": time.perf_counter() - t0},
    }
    write_json(out / "manifest.json", manifest)
    return (EXIT_WARN if warnings else EXIT_OK), manifest


def _demo_svg(path: Path, seed: int) -> None:
    """Small circle example: ridge with confidence discs coloured by rho2_hat."""
    X = make_points("circle", 1000, 0.1, seed)
    base = estimate_ridge(X)
    ens = bootstrap_ridges(X, base, 20, "smooth", seed=seed, seeding="base")
    fld = confidence_radii(local_uncertainty(base, ens), 0.1)
    svg_scatter(path, X, base.points, fld.rho2, radii=fld.radius, curves=order_curve(base.points, base.h),
                title="circle example: ridge and 90% confidence discs")


def run_validate(cfg: RunConfig) -> tuple[int, dict]:
    if not cfg.suite:
        raise InvalidInputError(f"--suite is required; available suites: {', '.join(SUITES)}")
    if cfg.suite not in SUITES:
        raise InvalidInputError(f"unknown suite {cfg.suite!r}; available suites: {', '.join(SUITES)}")
    if cfg.repetitions is not None and cfg.repetitions < 1:
        raise InvalidInputError("--repetitions must be at least 1")
    t0 = time.perf_counter()
    out = Path(cfg.out)
    report = run_suite(cfg.suite, seed=cfg.seed, repetitions=cfg.repetitions, B=cfg.B, alpha=cfg.alpha)
    tables = report.pop("tables", {})
    outputs = []
    for name, table in tables.items():
        keys = list(table)
        write_csv(out / f"{name}.csv", keys, [np.asarray(table[k]) for k in keys])
        outputs.append(f"{name}.csv")
    _demo_svg(out / "example.svg", cfg.seed)
    outputs.append("example.svg")
    report["config"] = cfg.echo()
    report["outputs"] = outputs + ["report.json"]
    report["versions"] = _versions()
    report["timings"] = {"total_s": time.perf_counter() - t0}
    report["color_scale"] = {"example.svg": "point colour = rho2_hat, low to high", "stops": COLOR_SCALE}
    write_json(out / "report.json", report)
    return (EXIT_OK if report["passed"] else EXIT_WARN), report


def run_synth(cfg: RunConfig) -> tuple[int, dict]:
    X = make_points(cfg.kind, cfg.n, cfg.noise, cfg.seed)
    out = Path(cfg.out)
    path = out if out.suffix == ".csv" else out / f"{cfg.kind}.csv"
    write_csv(path, ["x", "y"], [X[:, 0], X[:, 1]])
    return EXIT_OK, {"command": "synth", "path": str(path), "n": cfg.n}


COMMANDS = {"estimate": run_estimate, "uncertainty": run_uncertainty, "validate": run_validate, "synth": run_synth}


def _error_record(exc: BaseException, status: int) -> dict:
    return {"status": status, "error": type(exc).__name__, "message": str(exc)}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = None
    try:
        cfg = resolve_config(ns)
        out_dir = Path(cfg.out)
        status, _ = COMMANDS[ns.command](cfg)
        return status
    except FilamentError as exc:
        return _fail(exc, exc.exit_status, out_dir)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERIC, out_dir)


def _fail(exc: BaseException, status: int, out_dir: Path | None) -> int:
    record = _error_record(exc, status)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out_dir is not None:
        try:
            write_json(out_dir / "error.json", record)
        except OSError:
            pass
    return status


if __name__ == "__main__":
    sys.exit(main())

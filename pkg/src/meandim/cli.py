"""Command-line experiments.

Subcommands ``keister-sweep``, ``multiquadric-bound``, ``gaussian-tune`` and
``oracle-compare`` each write one CSV (and the Keister sweep an SVG) into
``--out``. Settings resolve as built-in defaults, then the ``--config`` JSON
document, then command-line flags. Work is split by grid cell and merged in
grid order, so the CSV bytes do not depend on ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone

import numpy as np

from .anova import exact_anova
from .estimate import (
    estimate_mean_dimension_generic,
    estimate_mean_dimension_radial,
    estimate_mean_dimension_weighted,
    gaussian_product_proposal,
)
from .lowdisc import default_direction_table, direction_file_path
from .model import (
    FiniteDiscrete,
    GaussianProduct,
    InputModel,
    Keister,
    LogZ,
    MomentSummary,
    MultiquadricZ,
    NormalShift,
    StandardNormal,
    SyntheticAdditive,
    SyntheticProduct,
    inputs_from_dict,
    inputs_to_dict,
    spec_from_dict,
    spec_to_dict,
)
from .theory import (
    gaussian_product_nu,
    moment_expansion_p,
    tau_sum_bound,
    theorem_nu_bound,
    tune_theta,
    variance_expansion,
)

log = logging.getLogger("meandim")

EXPERIMENTS = ("keister-sweep", "multiquadric-bound", "gaussian-tune", "oracle-compare")
ESTIMATORS = ("auto", "radial", "generic", "weighted")
DEFAULT_SEED = 20240229
TABLE_DIMS = 4096

KEISTER_COLUMNS = ("d", "replicate", "n", "sigma2", "sum_tau2", "nu", "seed")
BOUND_COLUMNS = ("p", "d", "n", "replicates", "nu_hat", "nu_se", "sigma2", "sum_tau2", "nu_bound",
                 "moment_expansion", "variance_expansion", "tau_sum_bound", "scaled_gap", "estimator")
TUNE_COLUMNS = ("d", "target", "theta", "nu_closed_form", "nu_hat", "nu_se")
ORACLE_COLUMNS = ("instance", "d", "nu_exact", "nu_hat", "nu_se", "gap", "threshold", "pass")


class ConfigError(ValueError):
    pass


def _default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    d_values: tuple[int, ...] = ()
    p_values: tuple[float, ...] = ()
    targets: tuple[float, ...] = ()
    n: int = 2 ** 14
    R: int = 5
    master_seed: int = DEFAULT_SEED
    out_dir: str = "."
    z3_df: int = 1
    dirs: str | None = None
    jobs: int = field(default_factory=_default_jobs)
    a: float = 0.0
    centers: tuple[float, ...] = (0.0,)
    estimator: str = "auto"
    log_transform: bool = False
    theta_tol: float = 1e-9
    alpha: float = 0.1
    instances: tuple[dict, ...] | None = None

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.n < 2 or self.n & (self.n - 1):
            raise ConfigError(f"n must be a power of two >= 2, got {self.n}")
        if self.R < 1:
            raise ConfigError("R must be >= 1")
        if any(d < 1 for d in self.d_values):
            raise ConfigError("d values must be >= 1")
        if self.z3_df not in (1, 2):
            raise ConfigError("z3_df must be 1 or 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.a < 0:
            raise ConfigError("a must be nonnegative")
        if self.experiment == "multiquadric-bound":
            if any(p == 0 or p > 1 for p in self.p_values):
                raise ConfigError("p values must be nonzero and at most 1")
            if self.estimator == "weighted":
                raise ConfigError("the weighted estimator is only for gaussian-tune")
            if self.estimator == "radial" and any(self.centers):
                raise ConfigError("radial estimator needs all shifts c_j = 0")
        if self.experiment == "gaussian-tune":
            for d in self.d_values:
                for t in self.targets:
                    if not 1 < t < d:
                        raise ConfigError(f"target {t} outside (1, {d})")
            if self.estimator == "radial":
                raise ConfigError("gaussian-tune supports the weighted and generic estimators")
            if not 0 < self.alpha <= 1:
                raise ConfigError("alpha must lie in (0, 1]")
        return self

    def centers_for(self, d: int) -> tuple[float, ...]:
        if len(self.centers) == 1:
            return self.centers * d
        if len(self.centers) != d:
            raise ConfigError(f"{len(self.centers)} centers given for d = {d}")
        return self.centers


EXPERIMENT_DEFAULTS = {
    "keister-sweep": dict(d_values=tuple(range(2, 1001))),
    "multiquadric-bound": dict(d_values=(64, 256, 1024), p_values=(-1.0, -0.5, 0.5)),
    "gaussian-tune": dict(d_values=(10,), targets=(1.5, 3.0, 7.0, 9.9), estimator="weighted"),
    "oracle-compare": dict(),
}


def parse_d_values(value) -> tuple[int, ...]:
    """Accepts an int, a list, ``"2..1000"`` (inclusive), ``"10,39,89"`` or ``{"start", "stop"}``."""
    if isinstance(value, bool):
        raise ConfigError("d must be an integer, list or range")
    if isinstance(value, int):
        return (value,)
    if isinstance(value, dict):
        return tuple(range(int(value["start"]), int(value["stop"]) + 1, int(value.get("step", 1))))
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    if isinstance(value, str):
        out = []
        for part in value.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
        if not out:
            raise ConfigError(f"empty d specification {value!r}")
        return tuple(out)
    raise ConfigError(f"cannot read d values from {value!r}")


def _floats(value) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, str):
        return tuple(float(v) for v in value.split(",") if v.strip())
    return tuple(float(v) for v in value)


_JSON_ALIASES = {"d": "d_values", "p": "p_values", "seed": "master_seed", "out": "out_dir",
                 "replicates": "R", "z3-df": "z3_df"}


def _coerce(name: str, value):
    if name == "d_values":
        return parse_d_values(value)
    if name in ("p_values", "targets", "centers"):
        return _floats(value)
    if name in ("n", "R", "master_seed", "z3_df", "jobs"):
        if isinstance(value, bool) or int(value) != value:
            raise ConfigError(f"{name} must be an integer")
        return int(value)
    if name in ("a", "theta_tol", "alpha"):
        return float(value)
    if name == "log_transform":
        if not isinstance(value, bool):
            raise ConfigError("log_transform must be true or false")
        return value
    if name == "instances":
        return tuple(value)
    return value


def config_from_mapping(experiment: str, data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    updates = {}
    for key, value in data.items():
        name = _JSON_ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown config key {key!r}")
        if name == "experiment":
            if value != experiment:
                raise ConfigError(f"config is for {value!r}, not {experiment!r}")
            continue
        updates[name] = _coerce(name, value)
    base = base or ExperimentConfig(experiment, **EXPERIMENT_DEFAULTS[experiment])
    return replace(base, **updates)


def load_config(experiment: str, path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the JSON file at ``path``, then ``overrides``."""
    cfg = ExperimentConfig(experiment, **EXPERIMENT_DEFAULTS[experiment])
    if path:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        cfg = config_from_mapping(experiment, data, cfg)
    if overrides:
        cfg = config_from_mapping(experiment, overrides, cfg)
    return cfg.validate()


# ---------------------------------------------------------------- output


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: str, columns, rows) -> None:
    """RFC-4180 CSV (CRLF line ends, minimal quoting), floats at 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])


def keister_svg(d_values, nu_by_replicate, timestamp: str | None = None) -> str:
    """Line chart of nu against sqrt(d): one polyline per replicate, dotted lines at 1 and 2."""
    width, height = 800, 500
    left, right, top, bottom = 70, 20, 20, 50
    nu = np.asarray(nu_by_replicate, dtype=np.float64)
    roots = np.sqrt(np.asarray(d_values, dtype=np.float64))
    x_max = max(1.0, math.ceil(roots.max()))
    y_lo = min(0.8, math.floor(np.nanmin(nu) * 10) / 10)
    y_hi = max(2.4, math.ceil(np.nanmax(nu) * 10) / 10)

    def sx(v):
        return left + (width - left - right) * v / x_max

    def sy(v):
        return height - bottom - (height - top - bottom) * (v - y_lo) / (y_hi - y_lo)

    stamp = timestamp or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}">',
        f"<!-- generated {stamp} -->",
        '<rect x="0" y="0" width="800" height="500" fill="white"/>',
        f'<path d="M{sx(0):.2f},{sy(y_lo):.2f} H{sx(x_max):.2f} M{sx(0):.2f},{sy(y_lo):.2f} '
        f'V{sy(y_hi):.2f}" stroke="black" fill="none"/>',
    ]
    step = 5 if x_max > 10 else 1
    ticks = []
    for t in range(0, int(x_max) + 1, step):
        ticks.append(f"M{sx(t):.2f},{sy(y_lo):.2f} v5")
        out.append(f'<text x="{sx(t):.2f}" y="{sy(y_lo) + 18:.2f}" font-size="12" '
                   f'text-anchor="middle">{t}</text>')
    y = math.ceil(y_lo * 2) / 2
    while y <= y_hi + 1e-9:
        ticks.append(f"M{sx(0):.2f},{sy(y):.2f} h-5")
        out.append(f'<text x="{sx(0) - 8:.2f}" y="{sy(y) + 4:.2f}" font-size="12" '
                   f'text-anchor="end">{y:g}</text>')
        y += 0.5
    out.append(f'<path d="{" ".join(ticks)}" stroke="black" fill="none"/>')
    out.append(f'<text x="{sx(x_max / 2):.2f}" y="{height - 10}" font-size="14" '
               f'text-anchor="middle">sqrt(d)</text>')
    out.append(f'<text x="18" y="{sy((y_lo + y_hi) / 2):.2f}" font-size="14" text-anchor="middle" '
               f'transform="rotate(-90 18 {sy((y_lo + y_hi) / 2):.2f})">mean dimension</text>')
    for level in (1.0, 2.0):
        out.append(f'<line x1="{sx(0):.2f}" y1="{sy(level):.2f}" x2="{sx(x_max):.2f}" '
                   f'y2="{sy(level):.2f}" stroke="gray" stroke-dasharray="2,4"/>')
    for trace in nu:
        pts = " ".join(f"{sx(r):.2f},{sy(v):.2f}" for r, v in zip(roots, trace))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- tasks


def _run(fn, tasks, jobs):
    """Map ``fn`` over ``tasks`` and return results in task order."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _table(dirs, dims):
    return default_direction_table(max_dim=max(TABLE_DIMS, dims), path=dirs)


def _keister_task(args):
    d, n, R, seed, z3_df, dirs = args
    return estimate_mean_dimension_radial(Keister(d), d, n, R, seed, _table(dirs, 3), z3_df=z3_df)


def z_summary(centers, a: float = 0.0) -> MomentSummary:
    """Moments of ``z_j = (x_j - c_j)^2`` with ``a`` added to ``z_1``."""
    rows = np.array([NormalShift(c).moments() for c in centers], dtype=np.float64)
    rows[0, 0] += a
    return MomentSummary.from_moments(rows)


def _bound_task(args):
    p, d, n, R, seed, a, centers, estimator, z3_df, dirs = args
    summary = z_summary(centers, a)
    mu = summary.mu_total
    spec = LogZ(d, mu, a) if p == "log" else MultiquadricZ(p, d, mu, a)
    if estimator == "auto":
        estimator = "generic" if any(centers) else "radial"
    if estimator == "radial":
        rep = estimate_mean_dimension_radial(spec, d, n, R, seed, _table(dirs, 3), z3_df=z3_df)
    else:
        inputs = InputModel(tuple(NormalShift(c) for c in centers))
        rep = estimate_mean_dimension_generic(spec, inputs, n, R, seed, _table(dirs, 2 * d))
    row = dict(p=p, d=d, n=n, replicates=R, nu_hat=rep.pooled_nu, nu_se=rep.nu_se,
               sigma2=rep.pooled_sigma2, sum_tau2=rep.pooled_sum_tau2,
               scaled_gap=(rep.pooled_nu - 1.0) * d, estimator=estimator,
               moment_expansion=None, variance_expansion=None, tau_sum_bound=None)
    if p == "log":
        row["nu_bound"] = theorem_nu_bound(summary, 0.0, allow_zero=True)
        return row
    row["nu_bound"] = theorem_nu_bound(summary, p)
    row["moment_expansion"] = moment_expansion_p(summary, p)
    row["variance_expansion"] = variance_expansion(summary, p)
    row["tau_sum_bound"] = tau_sum_bound(summary, p) if p < 1 else None
    return row


def _tune_task(args):
    d, target, centers, tol, n, R, seed, estimator, alpha, dirs = args
    theta = tune_theta(d, centers, target, tol=tol)
    spec = GaussianProduct(theta, centers)
    if estimator == "generic":
        rep = estimate_mean_dimension_generic(spec, InputModel.iid(StandardNormal(), d), n, R, seed,
                                              _table(dirs, 2 * d))
    else:
        rep = estimate_mean_dimension_weighted(spec, gaussian_product_proposal(theta, centers, alpha),
                                               n, R, seed, _table(dirs, 2 * d))
    return dict(d=d, target=target, theta=theta, nu_closed_form=gaussian_product_nu(theta, centers),
                nu_hat=rep.pooled_nu, nu_se=rep.nu_se)


def default_oracle_instances() -> tuple[dict, ...]:
    def inst(name, spec, inputs, threshold=0.01):
        return dict(name=name, function=spec_to_dict(spec), inputs=inputs_to_dict(inputs),
                    threshold=threshold)

    return (
        inst("multiquadric_z_d2", MultiquadricZ(0.5, 2, 3.0),
             InputModel.iid(FiniteDiscrete.uniform((1.0, 2.0)), 2)),
        inst("synthetic_additive_d4", SyntheticAdditive(4),
             InputModel.iid(FiniteDiscrete.uniform((0.0, 1.0, 3.0)), 4)),
        inst("synthetic_product_d3", SyntheticProduct(3),
             InputModel.iid(FiniteDiscrete.uniform((-1.0, 1.0)), 3), threshold=0.05),
    )


def _oracle_task(args):
    inst, n, R, seed, dirs = args
    spec = spec_from_dict(inst["function"])
    inputs = inputs_from_dict(inst["inputs"])
    threshold = float(inst.get("threshold", 0.01))
    exact = exact_anova(spec, inputs).mean_dimension
    rep = estimate_mean_dimension_generic(spec, inputs, n, R, seed, _table(dirs, 2 * inputs.dim))
    gap = abs(rep.pooled_nu - exact)
    se = rep.nu_se if math.isfinite(rep.nu_se) else 0.0
    return dict(instance=inst.get("name", "instance"), d=inputs.dim, nu_exact=exact, nu_hat=rep.pooled_nu,
                nu_se=rep.nu_se, gap=gap, threshold=threshold, **{"pass": gap <= max(threshold, 3 * se)})


# ---------------------------------------------------------------- commands


def _out_path(cfg: ExperimentConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _dirs_path(cfg: ExperimentConfig) -> str:
    # resolve once so worker processes read the same file
    return direction_file_path(cfg.dirs)


def cmd_keister_sweep(cfg: ExperimentConfig, timestamp: str | None = None) -> dict:
    dirs = _dirs_path(cfg)
    tasks = [(d, cfg.n, cfg.R, cfg.master_seed, cfg.z3_df, dirs) for d in cfg.d_values]
    reports = _run(_keister_task, tasks, cfg.jobs)
    rows = [row for rep in reports for row in rep.rows()]
    csv_path = _out_path(cfg, "keister_sweep.csv")
    write_csv(csv_path, KEISTER_COLUMNS, rows)
    traces = np.array([rep.nu for rep in reports]).T
    svg_path = _out_path(cfg, "keister_sweep.svg")
    with open(svg_path, "w", encoding="utf-8") as fh:
        fh.write(keister_svg(cfg.d_values, traces, timestamp))
    return dict(csv=csv_path, svg=svg_path, reports=reports)


def cmd_multiquadric_bound(cfg: ExperimentConfig) -> dict:
    dirs = _dirs_path(cfg)
    ps = list(cfg.p_values) + (["log"] if cfg.log_transform else [])
    tasks = [(p, d, cfg.n, cfg.R, cfg.master_seed, cfg.a, cfg.centers_for(d), cfg.estimator, cfg.z3_df, dirs)
             for p in ps for d in cfg.d_values]
    rows = _run(_bound_task, tasks, cfg.jobs)
    path = _out_path(cfg, "multiquadric_bound.csv")
    write_csv(path, BOUND_COLUMNS, rows)
    return dict(csv=path, rows=rows)


def cmd_gaussian_tune(cfg: ExperimentConfig) -> dict:
    dirs = _dirs_path(cfg)
    estimator = "weighted" if cfg.estimator == "auto" else cfg.estimator
    tasks = [(d, t, cfg.centers_for(d), cfg.theta_tol, cfg.n, cfg.R, cfg.master_seed, estimator, cfg.alpha, dirs)
             for d in cfg.d_values for t in cfg.targets]
    rows = _run(_tune_task, tasks, cfg.jobs)
    path = _out_path(cfg, "gaussian_tune.csv")
    write_csv(path, TUNE_COLUMNS, rows)
    return dict(csv=path, rows=rows)


def cmd_oracle_compare(cfg: ExperimentConfig) -> dict:
    dirs = _dirs_path(cfg)
    instances = cfg.instances if cfg.instances is not None else default_oracle_instances()
    tasks = [(inst, cfg.n, cfg.R, cfg.master_seed, dirs) for inst in instances]
    rows = _run(_oracle_task, tasks, cfg.jobs)
    path = _out_path(cfg, "oracle_compare.csv")
    write_csv(path, ORACLE_COLUMNS, rows)
    return dict(csv=path, rows=rows)


COMMANDS = {
    "keister-sweep": cmd_keister_sweep,
    "multiquadric-bound": cmd_multiquadric_bound,
    "gaussian-tune": cmd_gaussian_tune,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--seed", dest="master_seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    common.add_argument("--z3-df", dest="z3_df", type=int, choices=(1, 2),
                        help="degrees of freedom for the radial z3 draw")
    common.add_argument("--dirs", help="Sobol' direction-number file (else $MEANDIM_DIRS, else bundled)")
    common.add_argument("--n", type=int, help="points per replicate (power of two)")
    common.add_argument("--replicates", dest="R", type=int, help="independent scrambles")
    common.add_argument("--d", dest="d_values", help='dimensions, e.g. "2..1000" or "64,256,1024"')
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="meandim", description="Mean dimension experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("keister-sweep", parents=[common], help="nu of Keister's function over d")
    mq = sub.add_parser("multiquadric-bound", parents=[common], help="estimated nu against the bound")
    mq.add_argument("--p", dest="p_values", help="comma-separated exponents")
    mq.add_argument("--a", type=float, help="offset folded into z_1")
    mq.add_argument("--centers", help="shift c (one value or one per coordinate)")
    mq.add_argument("--estimator", choices=("auto", "radial", "generic"))
    mq.add_argument("--log-transform", dest="log_transform", action="store_true", default=None,
                    help="also estimate nu of log(z_{1:d})")
    gt = sub.add_parser("gaussian-tune", parents=[common], help="tune theta to a target nu")
    gt.add_argument("--targets", help="comma-separated target mean dimensions")
    gt.add_argument("--centers", help="center (one value or one per coordinate)")
    gt.add_argument("--estimator", choices=("auto", "weighted", "generic"))
    gt.add_argument("--tol", dest="theta_tol", type=float)
    sub.add_parser("oracle-compare", parents=[common], help="RQMC against exact ANOVA")
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    skip = {"command", "config", "verbose"}
    return {k: v for k, v in vars(ns).items() if k not in skip and v is not None}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(ns.command, ns.config, _overrides(ns))
        start = time.perf_counter()
        result = COMMANDS[ns.command](cfg)
    except (ValueError, ArithmeticError, OSError, KeyError, TypeError) as exc:
        print(f"meandim {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    log.info("%s finished in %.1f s", ns.command, time.perf_counter() - start)
    for key in ("csv", "svg"):
        if key in result:
            print(result[key])
    return 0


if __name__ == "__main__":
    sys.exit(main())

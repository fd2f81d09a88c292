"""Command line front end and experiment runner.

Every run writes one JSON report holding the resolved configuration, a
hash of it, and the results; tabular outputs go to CSV files named after
the same hash.  The wall-clock timestamp is the only nondeterministic
field (``metadata.timestamp``).

Exit status: 0 success, 1 validation error, 2 numerical-guard failure.
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import asdict, dataclass, fields
import datetime as _dt
import hashlib
import io
import json
import logging
from pathlib import Path
import sys
import warnings

import numpy as np

from . import caps as _caps
from . import counterexample as _cx
from . import direction as _direction
from . import lattice as _lattice
from . import maximal as _maximal
from .errors import LabError, NumericalGuardError, OverlapWarning, ValidationError
from .propagator import QuadratureConfig, extension_eval
from .spectra import BumpSumSpectrum, PhaseSpec

log = logging.getLogger(__name__)

EXPERIMENTS = ("lattice-shell", "shell-table", "find-direction", "counterexample", "eval",
               "maximal", "operator-norm", "caps-classify", "fit-exponent")

# fields that never influence numbers
_NON_NUMERIC = ("out", "threads")


@dataclass
class ExperimentConfig:
    experiment: str
    dim: int | None = None
    seed: int = 0
    out: str | None = None
    threads: int = 1
    # lattice
    m: int | None = None
    m_max: int | None = None
    # direction / counterexample
    R: float | None = None
    k: int | None = None
    k_ladder: list | None = None
    R_ladder: list | None = None
    rho: float = _cx.DEFAULT_RHO
    C3: float = 10.0
    trials: int = 100
    policy: object = "median"
    truncation: int | None = None
    lambda_range: float | None = None
    gap_samples: int = 200
    samples: int = 500
    maximal_samples: int = 32
    time_window: float = 1.0
    # quadrature and windows
    nodes_per_axis: int = 8
    rtol: float = 1e-6
    window: str = "rescaled"
    resolution: int | None = None
    C: float = 2.0
    # files
    spectrum: str | None = None
    points: str | None = None
    table: str | None = None
    phase: str = "paraboloid"
    # caps
    delta: float | None = None
    K: float | None = None
    plane_constant: float = _caps.DEFAULT_PLANE_CONSTANT
    balls: int = 8
    annulus: list | None = None
    # operator norm
    x_count: int = 256
    bumps: int = 64

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown config field(s): {', '.join(unknown)}", reason="unknown-field")
        if "experiment" not in data:
            raise ValidationError("config needs 'experiment'", reason="missing-field")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}", reason="unknown-experiment")
        required = {
            "lattice-shell": ("dim", "m"), "shell-table": ("dim", "m_max"),
            "find-direction": ("dim", "R"), "counterexample": ("dim",),
            "eval": ("spectrum", "points"), "maximal": ("spectrum", "points"),
            "operator-norm": ("dim", "R"), "caps-classify": ("spectrum", "delta", "K"),
            "fit-exponent": ("table",),
        }[self.experiment]
        missing = [r for r in required if getattr(self, r) is None]
        if self.experiment == "counterexample" and self.k is None and self.k_ladder is None:
            missing.append("k")
        if missing:
            raise ValidationError(f"{self.experiment} needs {', '.join(missing)}", reason="missing-field")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1", reason="invalid-value")

    def numeric(self):
        return {k: v for k, v in asdict(self).items() if k not in _NON_NUMERIC}

    def hash(self):
        text = json.dumps(self.numeric(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def quad(self):
        return QuadratureConfig(self.nodes_per_axis, self.rtol, threads=self.threads)


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _read_points(path, width):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if len(header) != width:
        raise ValidationError(f"{path}: expected {width} columns, found {len(header)}", reason="bad-csv")
    return np.array([[float(v) for v in r] for r in body if r], dtype=float).reshape(-1, width)


def _load_spectrum(path):
    return BumpSumSpectrum.from_json(Path(path).read_text(encoding="utf-8"))


def _phase(cfg, n):
    if cfg.phase == "paraboloid":
        return PhaseSpec.paraboloid(n)
    if cfg.phase == "scaled-paraboloid":
        if cfg.R is None:
            raise ValidationError("scaled-paraboloid phase needs R", reason="missing-field")
        return PhaseSpec.scaled_paraboloid(n, cfg.R)
    raise ValidationError(f"phase {cfg.phase!r} is not available from the command line", reason="invalid-value")


def _direction_config(cfg):
    policy = cfg.policy if cfg.policy == "median" else float(cfg.policy)
    return _cx.DirectionConfig(cfg.C3, cfg.trials, policy, cfg.truncation)


# -- experiment bodies: each returns (result dict, {suffix: csv text}) ---------

def _run_lattice_shell(cfg):
    shell = _lattice.enumerate_shell(cfg.dim, cfg.m)
    header = [f"x{i + 1}" for i in range(cfg.dim)]
    return shell.to_dict() | {"count": len(shell)}, {"points": _csv_text(header, shell.points.tolist())}


def _run_shell_table(cfg):
    table = _lattice.shell_count_table(cfg.dim, cfg.m_max)
    return {"dim": cfg.dim, "m_max": cfg.m_max, "rows": len(table)}, {"counts": _lattice.count_table_csv(table)}


def _run_find_direction(cfg):
    n, R = cfg.dim, cfg.R
    moll = _cx.build_mollifier(n, R)
    dc = _direction_config(cfg)
    cert = _direction.find_direction(n, R, moll.C1, dc.C3, dc.threshold_policy, dc.trials, cfg.seed,
                                     dc.resolved_truncation(n))
    if cfg.lambda_range is not None:
        cert.empirical_max_gap = _direction.empirical_density_gap(
            cert.theta, n, R, cfg.lambda_range, cfg.gap_samples, cfg.seed)
    result = {"certificate": cert.to_dict(), "gap_target": _direction.default_gap_target(n, R),
              "strict_gap_target": _direction.STRICT_GAP_CONSTANT * R ** (-1 / n),
              "criterion_e1": _direction.criterion_sum(np.eye(n)[0], n, R, dc.C3, cert.truncation_radius)}
    return result, {}


def _run_counterexample(cfg):
    ks = [cfg.k] if cfg.k_ladder is None else list(cfg.k_ladder)
    rows, entries = [], []
    for k in ks:
        inst = _cx.build_theorem2_instance(cfg.dim, k, cfg.rho, cfg.seed, _direction_config(cfg))
        entry = {"k": k, "R": inst.R, "E1_size": len(inst.E1), "theta": inst.theta_cert.to_dict(),
                 "sphere_residual": inst.sphere_residual(), "min_separation": inst.min_separation()}
        sob = _cx.sobolev_obstruction(inst)
        entry["sobolev"] = sob.to_dict()
        if cfg.samples > 0:
            rep = _cx.verify_lower_bound(inst, cfg.samples, cfg.quad(), cfg.seed, cfg.time_window,
                                         maximal_samples=cfg.maximal_samples)
            entry["lower_bound"] = rep.to_dict()
        entries.append(entry)
        rows.append([k, inst.R, len(inst.E1), sob.s_required])
    result = {"instances": entries}
    if len(ks) > 1:
        fit = _maximal.fit_exponent([(r[1], r[2] ** 0.5) for r in rows])
        result["obstruction_fit"] = fit.to_dict()
    return result, {"ladder": _csv_text(["k", "R", "E1_size", "s_required"], rows)}


def _run_eval(cfg):
    spec = _load_spectrum(cfg.spectrum)
    pts = _read_points(cfg.points, spec.dim + 1)
    vals = extension_eval(spec, _phase(cfg, spec.dim), pts, cfg.quad())
    rows = [[v.real, v.imag, abs(v)] for v in vals]
    return {"points": len(pts)}, {"values": _csv_text(["re", "im", "abs"], rows)}


def _window(cfg, max_phase):
    if cfg.resolution is None:
        return _maximal.guarded_window(cfg.window, max_phase, cfg.R, cfg.C)
    return _maximal.TimeWindow(cfg.window, cfg.resolution, cfg.R, cfg.C)


def _run_maximal(cfg):
    spec = _load_spectrum(cfg.spectrum)
    phase = _phase(cfg, spec.dim)
    x = _read_points(cfg.points, spec.dim)
    window = _window(cfg, phase.max_abs(spec))
    sup = _maximal.sup_over_time(spec, phase, x, window, cfg.quad())
    header = [f"x{i + 1}" for i in range(spec.dim)] + ["sup"]
    return {"window": window.to_dict(), "points": len(x)}, \
        {"sup": _csv_text(header, np.concatenate([x, sup[:, None]], axis=1).tolist())}


def _run_operator_norm(cfg):
    n, R = cfg.dim, cfg.R
    annulus = tuple(cfg.annulus) if cfg.annulus else (1.0, 2.0)
    window = _window(cfg, annulus[1] ** 2)
    best, trials = _maximal.operator_norm_estimate(
        n, R, window, cfg.trials, cfg.seed, cfg.quad(), x_count=cfg.x_count, bumps=cfg.bumps,
        rho=cfg.rho, annulus=annulus, return_trials=True)
    return {"lower_estimate": best, "trials": trials, "window": window.to_dict()}, {}


def _run_caps_classify(cfg):
    spec = _load_spectrum(cfg.spectrum)
    n = spec.dim
    annulus = tuple(cfg.annulus or spec.annulus or (1.0, 2.0))
    cells = _caps.partition_caps(n, annulus, cfg.delta)
    radius = cfg.R if cfg.R is not None else cfg.K
    rng = np.random.default_rng(cfg.seed)
    from .quadrature import ball_samples
    centers = ball_samples(n + 1, radius, cfg.balls, rng)
    amps = _caps.cap_amplitudes(spec, cells, centers, cfg.quad())
    verdicts = []
    for c, a in zip(centers, amps):
        cls = _caps.classify_ball((c, cfg.K), cells, a, cfg.K, cfg.C, cfg.plane_constant)
        verdicts.append(cls.to_dict() | {"verified": cls.verify()})
    header = [f"xi{i + 1}" for i in range(n)]
    return {"caps": len(cells), "verdicts": verdicts}, \
        {"partition": _csv_text(header, [c.center.tolist() for c in cells])}


def _run_fit_exponent(cfg):
    with open(cfg.table, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"R", "value"} <= set(reader.fieldnames):
            raise ValidationError("table needs columns R,value", reason="bad-csv")
        samples = [(float(r["R"]), float(r["value"])) for r in reader]
    return _maximal.fit_exponent(samples).to_dict(), {}


_RUNNERS = {
    "lattice-shell": _run_lattice_shell, "shell-table": _run_shell_table,
    "find-direction": _run_find_direction, "counterexample": _run_counterexample,
    "eval": _run_eval, "maximal": _run_maximal, "operator-norm": _run_operator_norm,
    "caps-classify": _run_caps_classify, "fit-exponent": _run_fit_exponent,
}


def build_report(cfg):
    """Run ``cfg`` and return ``(report dict, {name: csv text})`` without touching disk."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OverlapWarning)
        result, tables = _RUNNERS[cfg.experiment](cfg)
    h = cfg.hash()
    report = {
        "metadata": {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "config_hash": h,
                     "tables": {name: f"{cfg.experiment}-{name}-{h}.csv" for name in tables}},
        "config": asdict(cfg),
        "result": _to_jsonable(result),
    }
    return report, {f"{cfg.experiment}-{name}-{h}.csv": text for name, text in tables.items()}


def dumps_report(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def run_experiment(cfg):
    """Run and write artifacts; returns the exit status."""
    try:
        if not isinstance(cfg, ExperimentConfig):
            cfg = ExperimentConfig.from_dict(cfg)
        report, tables = build_report(cfg)
    except ValidationError as exc:
        _report_error(exc)
        return 1
    except NumericalGuardError as exc:
        _report_error(exc)
        return 2
    out = Path(cfg.out) if cfg.out else None
    text = dumps_report(report)
    if out is None:
        sys.stdout.write(text)
        for name, body in tables.items():
            log.info("table %s not written (no --out)", name)
        return 0
    if out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        report_path, table_dir = out, out.parent
    else:
        out.mkdir(parents=True, exist_ok=True)
        report_path, table_dir = out / f"{cfg.experiment}-{report['metadata']['config_hash']}.json", out
    report_path.write_text(text, encoding="utf-8")
    for name, body in tables.items():
        (table_dir / name).write_text(body, encoding="utf-8")
    log.info("wrote %s", report_path)
    return 0


def _report_error(exc):
    reason = exc.reason if isinstance(exc, LabError) else "error"
    sys.stderr.write(json.dumps({"error": reason, "message": str(exc)}) + "\n")


# -- argument parsing ----------------------------------------------------------

_FLAGS = {
    "lattice-shell": [("--dim", int), ("--m", int)],
    "shell-table": [("--dim", int), ("--m-max", int)],
    "find-direction": [("--dim", int), ("--R", float), ("--c3", float), ("--trials", int),
                       ("--policy", str), ("--truncation", int), ("--lambda-range", float),
                       ("--gap-samples", int)],
    "counterexample": [("--dim", int), ("--k", int), ("--k-ladder", int, "+"), ("--rho", float),
                       ("--samples", int), ("--maximal-samples", int), ("--c3", float), ("--trials", int),
                       ("--policy", str), ("--nodes-per-axis", int), ("--time-window", float)],
    "eval": [("--spectrum", str), ("--points", str), ("--phase", str), ("--R", float),
             ("--nodes-per-axis", int), ("--rtol", float)],
    "maximal": [("--spectrum", str), ("--points", str), ("--phase", str), ("--R", float),
                ("--window", str), ("--resolution", int), ("--C", float), ("--nodes-per-axis", int)],
    "operator-norm": [("--dim", int), ("--R", float), ("--window", str), ("--resolution", int),
                      ("--C", float), ("--trials", int), ("--x-count", int), ("--bumps", int),
                      ("--rho", float), ("--nodes-per-axis", int)],
    "caps-classify": [("--dim", int), ("--delta", float), ("--K", float), ("--C", float),
                      ("--spectrum", str), ("--balls", int), ("--R", float), ("--plane-constant", float)],
    "fit-exponent": [("--table", str)],
}

_DEST = {"c3": "C3", "C": "C", "K": "K", "R": "R"}


def make_parser():
    parser = argparse.ArgumentParser(prog="schrodinger-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, flags in _FLAGS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config; command line flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory, or a .json report path")
        p.add_argument("--threads", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        for flag in flags:
            key = flag[0][2:].replace("-", "_")
            kw = {"type": flag[1], "dest": _DEST.get(key, key)}
            if len(flag) > 2:
                kw["nargs"] = flag[2]
            p.add_argument(flag[0], **kw)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            _report_error(ValidationError(f"cannot read config: {exc}", reason="bad-config"))
            return 1
    data["experiment"] = args.experiment
    for key, value in vars(args).items():
        if key in ("config", "verbose", "experiment") or value is None:
            continue
        data[key] = value
    try:
        cfg = ExperimentConfig.from_dict(data)
    except ValidationError as exc:
        _report_error(exc)
        return 1
    except TypeError as exc:
        _report_error(ValidationError(str(exc)))
        return 1
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())

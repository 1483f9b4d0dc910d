"""Command line front end.

    sndrawdown scale-fn --model bm --mu 0 --sigma2 1 --q 0 --x 1
    sndrawdown risk dd-before-rally --model bm --alpha 0.2 --beta 0.25 --horizon inf
    sndrawdown run config.yaml
    sndrawdown validate --quick

Exit codes: 0 success, 1 failed validation, 2 configuration error,
3 numerical failure. The default number of worker threads for batch
evaluation comes from SNDRAWDOWN_THREADS.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from . import mc_oracle as mc
from .laplace_inversion import InversionConfig, InversionError
from .process_models import Family, ModelError, ProcessSpec
from .risk_analytics import (PriceModel, RiskQuery, carr_wu_crash_prob, carr_wu_symmetric,
                             drawdown_before_rally, expected_drawdown_at_D, prob_drawdown_before,
                             prob_new_max_at_drawup, prob_new_min_at_drawdown)
from .scale_functions import Backend, BackendError, ScaleEngine
from .special_functions import SeriesError, SeriesTolerance

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
THREADS_ENV = "SNDRAWDOWN_THREADS"

MODEL_ALIASES = {"bm": Family.BROWNIAN_DRIFT, "stable": Family.STABLE_NEG,
                 "stable-drift": Family.STABLE_DRIFT, "jd": Family.JUMP_DIFFUSION_EXP}

RISK_KINDS = ("dd-before-rally", "new-min", "new-max", "dd-before-horizon", "expected-dd",
              "carr-wu-sym", "carr-wu-crash")
QUERY_KEYS = {
    "scale-fn": {"q", "x"},
    "dd-before-rally": {"alpha", "beta", "horizon", "paths"},
    "new-min": {"alpha", "horizon"},
    "new-max": {"beta", "horizon"},
    "dd-before-horizon": {"alpha", "horizon"},
    "expected-dd": {"alpha", "horizon"},
    "carr-wu-sym": {"alpha"},
    "carr-wu-crash": {"alpha", "beta"},
}
_NUMERICAL = (InversionError, SeriesError, OverflowError, ZeroDivisionError, FloatingPointError)


class ConfigError(ValueError):
    pass


# configuration ---------------------------------------------------------------------


def _strict(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class OutputBlock:
    format: str = "csv"
    path: str | None = None

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ValueError("output format must be csv or json")


@dataclass(frozen=True)
class NumericsBlock:
    backend: str = "closed"
    fallback_paths: int = 100_000
    inversion: InversionConfig = field(default_factory=InversionConfig)
    series: SeriesTolerance = field(default_factory=SeriesTolerance)
    simulation: mc.SimConfig = field(default_factory=mc.SimConfig)

    def __post_init__(self):
        Backend(self.backend)
        if self.fallback_paths < 0:
            raise ValueError("fallback_paths must be nonnegative")

    @classmethod
    def from_dict(cls, data) -> "NumericsBlock":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown keys in numerics: {sorted(unknown)}")
        blocks = {"inversion": InversionConfig, "series": SeriesTolerance, "simulation": mc.SimConfig}
        for key, kind in blocks.items():
            if key in data:
                data[key] = _strict(kind, data[key], f"numerics.{key}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"numerics: {exc}") from exc

    def to_dict(self) -> dict:
        d = {"backend": self.backend, "fallback_paths": self.fallback_paths,
             "inversion": asdict(self.inversion), "series": asdict(self.series),
             "simulation": asdict(self.simulation)}
        d["inversion"]["method"] = self.inversion.method.value
        return d


def _check_query(q) -> dict:
    if not isinstance(q, dict) or "kind" not in q:
        raise ConfigError("each query needs a 'kind'")
    kind = q["kind"]
    if kind not in QUERY_KEYS:
        raise ConfigError(f"unknown query kind {kind!r}; choose from {sorted(QUERY_KEYS)}")
    unknown = set(q) - QUERY_KEYS[kind] - {"kind"}
    if unknown:
        raise ConfigError(f"unknown keys in {kind} query: {sorted(unknown)}")
    q = dict(q)
    if "horizon" in q:
        q["horizon"] = float(q["horizon"])
    return q


@dataclass(frozen=True)
class RunConfig:
    model: ProcessSpec
    S0: float = 1.0
    queries: tuple = ()
    numerics: NumericsBlock = field(default_factory=NumericsBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    seed: int = 20240101

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(data) - {"model", "queries", "numerics", "output", "seed"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        if "model" not in data:
            raise ConfigError("configuration needs a model block")
        model = dict(data["model"])
        S0 = float(model.pop("S0", 1.0))
        try:
            spec = ProcessSpec.from_dict(model)
        except (ModelError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc
        queries = tuple(_check_query(q) for q in data.get("queries") or ())
        return cls(spec, S0, queries, NumericsBlock.from_dict(data.get("numerics")),
                   _strict(OutputBlock, data.get("output"), "output"), int(data.get("seed", 20240101)))

    def to_dict(self) -> dict:
        model = self.model.to_dict()
        model["S0"] = self.S0
        queries = [{k: _plain(v) for k, v in q.items()} for q in self.queries]
        return {"model": model, "queries": queries, "numerics": self.numerics.to_dict(),
                "output": asdict(self.output), "seed": self.seed}


def load_config(path) -> RunConfig:
    """Read a YAML or JSON run configuration (JSON is valid YAML)."""
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return RunConfig.from_dict(data)


def _plain(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return _plain(v.item())
    return v


# evaluation ------------------------------------------------------------------------


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    return n


def scale_rows(cfg: RunConfig, qs, xs) -> list[dict]:
    """Tidy rows of W, W', Z and lambda; diff is the relative gap to the closed form."""
    n = cfg.numerics
    engine = ScaleEngine(cfg.model, n.backend, n.inversion, n.series)
    ref = engine if engine.backend is Backend.CLOSED_FORM else ScaleEngine(cfg.model, tolerance=n.series)
    xs = np.asarray(xs, dtype=float)
    rows = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for q in qs:
            W = np.atleast_1d(engine.W(q, xs)).astype(float)
            Wp = np.atleast_1d(engine.W_prime(q, xs)).astype(float)
            Z = np.atleast_1d(engine.Z(q, xs)).astype(float)
            W_ref = np.atleast_1d(ref.W(q, xs)).astype(float)
            diff = np.where(W_ref != 0, np.abs(W - W_ref) / np.abs(W_ref), np.abs(W - W_ref))
            for i, x in enumerate(np.atleast_1d(xs)):
                rows.append({"backend": engine.backend.value, "x": float(x), "q": float(q),
                             "W": float(W[i]), "W_prime": float(Wp[i]), "Z": float(Z[i]),
                             "lambda": float(Wp[i] / W[i]), "diff": float(diff[i])})
    return rows


def risk_query(kind: str, q: dict) -> RiskQuery:
    horizon = float(q.get("horizon", math.inf))
    alpha, beta = q.get("alpha"), q.get("beta")
    if kind in ("new-max",):
        return RiskQuery(beta=beta, horizon=horizon)
    if kind in ("new-min", "dd-before-horizon", "expected-dd"):
        return RiskQuery(alpha=alpha, horizon=horizon)
    if kind == "carr-wu-sym":
        return RiskQuery(alpha=alpha, beta=alpha / (1 - alpha) if alpha is not None and alpha < 1 else None)
    return RiskQuery(alpha=alpha, beta=beta, horizon=horizon)


def risk_report(cfg: RunConfig, kind: str, q: dict):
    n = cfg.numerics
    model = PriceModel(cfg.model, cfg.S0)
    query = risk_query(kind, q)
    common = {"config": n.inversion, "fallback_paths": n.fallback_paths, "seed": cfg.seed}
    if kind == "new-min":
        return prob_new_min_at_drawdown(model, query, **common)
    if kind == "new-max":
        return prob_new_max_at_drawup(model, query, **common)
    if kind == "dd-before-horizon":
        return prob_drawdown_before(model, query, **common)
    if kind == "expected-dd":
        return expected_drawdown_at_D(model, query, **common)
    if kind == "dd-before-rally":
        return drawdown_before_rally(model, query, paths=int(q.get("paths", 0)), **common)
    if kind == "carr-wu-sym":
        return carr_wu_symmetric(model, query.alpha, n.series)
    if kind == "carr-wu-crash":
        return carr_wu_crash_prob(model, query.alpha, query.beta, n.inversion, n.series)
    raise ConfigError(f"unknown risk kind {kind!r}")


def _event(kind, query: RiskQuery, S0):
    T = query.horizon
    if kind == "new-min":
        return (lambda p: (p.tau_a < T) & (p.hatY_at_tau == 0.0)), query.a, None
    if kind == "new-max":
        return (lambda p: (p.hat_tau_b < T) & (p.Y_at_hat_tau == 0.0)), None, query.b
    if kind == "dd-before-horizon":
        return (lambda p: p.tau_a < T), query.a, None
    if kind == "expected-dd":
        def gap(p):
            hit = p.tau_a < T
            with np.errstate(invalid="ignore", over="ignore"):
                return np.where(hit, S0 * (np.exp(p.X_bar) - np.exp(p.X_at_tau)), 0.0)
        return gap, query.a, None
    return (lambda p: (p.tau_a < p.hat_tau_b) & (p.tau_a < T)), query.a, query.b


def simulation_check(cfg: RunConfig, kind: str, q: dict, report, paths: int) -> dict:
    """Simulation estimate of the same quantity, with the gap in standard errors."""
    query = report.query if kind != "carr-wu-sym" else risk_query(kind, q)
    functional, a, b = _event(kind, query, cfg.S0)
    sim = cfg.numerics.simulation
    t_max = min(sim.t_max, query.horizon)
    dt = min(sim.dt, t_max / 200.0)
    config = mc.SimConfig(**{**asdict(sim), "n_paths": paths, "seed": cfg.seed, "t_max": t_max, "dt": dt,
                             "dt_min": min(sim.dt_min, dt)})
    fn = mc.simulate(cfg.model, config, a, b)
    est = mc.estimate(functional, fn)
    slack = est.standard_error + report.error_estimate
    z = abs(est.value - report.value) / slack if slack > 0 else 0.0
    not_reached = fn.truncated_a if a is not None else fn.truncated_b
    return {"mc_value": est.value, "mc_standard_error": est.standard_error, "mc_paths": paths,
            "mc_gap_in_se": float(z), "mc_not_reached": not_reached}


def evaluate_queries(cfg: RunConfig, threads: int | None = None, validate_paths: int = 0) -> list[dict]:
    """Evaluate every query of cfg; independent queries run on a thread pool."""
    threads = threads or default_threads()

    def one(q):
        kind = q["kind"]
        if kind == "scale-fn":
            qs = np.atleast_1d(q.get("q", 0.0)).astype(float)
            xs = np.atleast_1d(q.get("x", 1.0)).astype(float)
            return [{"kind": kind, **row} for row in scale_rows(cfg, qs, xs)]
        rep = risk_report(cfg, kind, q)
        row = {"kind": kind, "alpha": rep.query.alpha, "beta": rep.query.beta,
               "horizon": rep.query.horizon, "value": rep.value, "error_estimate": rep.error_estimate,
               "method": rep.method, "evaluations": rep.evaluations, "details": dict(rep.details)}
        if validate_paths:
            row["details"].update(simulation_check(cfg, kind, q, rep, validate_paths))
        return [row]

    if threads == 1 or len(cfg.queries) <= 1:
        chunks = [one(q) for q in cfg.queries]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one, cfg.queries))
    return [row for chunk in chunks for row in chunk]


# output ----------------------------------------------------------------------------


SCALE_COLUMNS = ("kind", "backend", "x", "q", "W", "W_prime", "Z", "lambda", "diff")
RISK_COLUMNS = ("kind", "alpha", "beta", "horizon", "value", "error_estimate", "method", "evaluations")


def render(cfg: RunConfig, rows: list[dict]) -> str:
    if cfg.output.format == "json":
        doc = {"config": cfg.to_dict(), "results": [_plain(r) for r in rows]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    scale = [r for r in rows if r["kind"] == "scale-fn"]
    risk = [r for r in rows if r["kind"] != "scale-fn"]
    for cols, part in ((SCALE_COLUMNS, scale), (RISK_COLUMNS, risk)):
        if not part:
            continue
        extra = sorted({k for r in part for k in r.get("details", {}) if k.startswith("mc_")})
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols + tuple(extra))
        for r in part:
            vals = [r.get(c) for c in cols] + [r["details"].get(k) for k in extra]
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in vals])
    return buf.getvalue()


def emit(cfg: RunConfig, rows: list[dict]) -> None:
    text = render(cfg, rows)
    if cfg.output.path:
        with open(cfg.output.path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# argument parsing ------------------------------------------------------------------


def _add_model_args(p: argparse.ArgumentParser, alpha_is_index: bool) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--config", help="YAML or JSON run configuration supplying model and numerics")
    g.add_argument("--model", choices=sorted(MODEL_ALIASES), default=None)
    g.add_argument("--mu", type=float, default=0.0)
    g.add_argument("--sigma2", type=float, default=1.0, help="Gaussian variance (bm, jd)")
    g.add_argument("--sigma", type=float, default=1.0, help="stable scale")
    flags = ["--index", "--stable-alpha"] + (["--alpha"] if alpha_is_index else [])
    g.add_argument(*flags, dest="index", type=float, default=1.5, help="stable index in (1, 2]")
    g.add_argument("--lambda", dest="lam", type=float, default=1.0, help="jump rate (jd)")
    g.add_argument("--eta", type=float, default=1.0, help="exponential jump parameter (jd)")
    g.add_argument("--S0", type=float, default=None, help="initial price")
    g.add_argument("--backend", choices=[b.value for b in Backend], default=None)
    g.add_argument("--seed", type=int, default=None)
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"), default=None)
    o.add_argument("--output", default=None, help="file path (default stdout)")
    o.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")


def _spec_from_args(args) -> ProcessSpec:
    fam = MODEL_ALIASES[args.model]
    if fam is Family.BROWNIAN_DRIFT:
        return ProcessSpec.brownian(args.mu, args.sigma2)
    if fam is Family.STABLE_NEG:
        return ProcessSpec.stable(args.index, args.sigma)
    if fam is Family.STABLE_DRIFT:
        return ProcessSpec.stable_drift(args.mu, args.sigma, args.index)
    return ProcessSpec.jump_diffusion(args.mu, args.sigma2, args.lam, args.eta)


def _config_from_args(args, queries) -> RunConfig:
    base = load_config(args.config) if args.config else None
    if args.model is not None:
        spec = _spec_from_args(args)
    elif base is not None:
        spec = base.model
    else:
        raise ConfigError("give --model or --config")
    numerics = base.numerics if base else NumericsBlock()
    if args.backend is not None:
        numerics = NumericsBlock(args.backend, numerics.fallback_paths, numerics.inversion,
                                 numerics.series, numerics.simulation)
    output = base.output if base else OutputBlock()
    output = OutputBlock(args.format or output.format, args.output or output.path)
    S0 = args.S0 if args.S0 is not None else (base.S0 if base else 1.0)
    seed = args.seed if args.seed is not None else (base.seed if base else 20240101)
    return RunConfig(spec, float(S0), tuple(queries), numerics, output, seed)


def _grid(args):
    xs = list(args.x or [])
    if args.grid:
        start, stop, n = args.grid
        xs += list(np.linspace(float(start), float(stop), int(n)))
    return xs or [1.0]


def cmd_scale_fn(args) -> int:
    xs = _grid(args)
    query = {"kind": "scale-fn", "q": [float(q) for q in args.q], "x": [float(x) for x in xs]}
    cfg = _config_from_args(args, [query])
    emit(cfg, evaluate_queries(cfg, args.threads))
    return EXIT_OK


def cmd_risk(args) -> int:
    queries = []
    for alpha in args.alpha or [None]:
        for beta in args.beta or [None]:
            for horizon in args.horizon:
                q = {"kind": args.kind}
                if alpha is not None:
                    q["alpha"] = alpha
                if beta is not None and "beta" in QUERY_KEYS[args.kind]:
                    q["beta"] = beta
                if "horizon" in QUERY_KEYS[args.kind]:
                    q["horizon"] = horizon
                if args.paths and args.kind == "dd-before-rally":
                    q["paths"] = args.paths
                queries.append(_check_query(q))
    cfg = _config_from_args(args, queries)
    rows = evaluate_queries(cfg, args.threads, validate_paths=args.validate_paths if args.validate else 0)
    emit(cfg, rows)
    if args.validate:
        worst = max(r["details"]["mc_gap_in_se"] for r in rows)
        print(f"simulation cross-check: largest gap {worst:.2f} SE (limit 4)", file=sys.stderr)
        if worst > 4.0:
            return EXIT_FAILED
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.path)
    if args.format or args.output:
        cfg = RunConfig(cfg.model, cfg.S0, cfg.queries, cfg.numerics,
                        OutputBlock(args.format or cfg.output.format, args.output or cfg.output.path), cfg.seed)
    emit(cfg, evaluate_queries(cfg, args.threads))
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import validation
    lines = []

    def report(line):
        lines.append(line)
        print(line, flush=True)

    criteria = args.criteria or None
    if criteria and any(c not in validation.CRITERIA for c in criteria):
        raise ConfigError(f"criteria must be in {sorted(validation.CRITERIA)}")
    if args.mutate:
        with validation.perturbed_scale_function(1.0 + args.mutate):
            results = validation.run_suite(args.quick, criteria, report)
    else:
        results = validation.run_suite(args.quick, criteria, report)
    ok = validation.suite_passed(results)
    failed = sum(1 for r in results if not r.passed and not r.expected_failure)
    print(f"{len(results)} checks, {failed} failed: {'PASS' if ok else 'FAIL'}", flush=True)
    if args.output:
        with open(args.output, "w") as fh:
            json.dump([_plain(asdict(r)) for r in results], fh, indent=2)
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sndrawdown", description="Drawdown and rally laws for "
                                "spectrally negative Levy processes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scale-fn", help="tabulate W, W', Z and lambda = W'/W")
    _add_model_args(s, alpha_is_index=True)
    s.add_argument("--q", type=float, nargs="+", default=[0.0])
    s.add_argument("--x", type=float, nargs="+", default=None)
    s.add_argument("--grid", nargs=3, metavar=("START", "STOP", "N"), default=None)
    s.set_defaults(func=cmd_scale_fn)

    r = sub.add_parser("risk", help="risk quantities for S = S0 exp(X)")
    r.add_argument("kind", choices=RISK_KINDS)
    _add_model_args(r, alpha_is_index=False)
    r.add_argument("--alpha", type=float, nargs="+", default=None, help="relative drawdown size(s)")
    r.add_argument("--beta", type=float, nargs="+", default=None, help="relative rally size(s)")
    r.add_argument("--horizon", type=float, nargs="+", default=[math.inf])
    r.add_argument("--paths", type=int, default=0,
                   help="dd-before-rally with finite horizon: simulate instead of bounds")
    r.add_argument("--validate", action="store_true", help="cross-check against simulation")
    r.add_argument("--validate-paths", type=int, default=100_000)
    r.set_defaults(func=cmd_risk)

    b = sub.add_parser("run", help="evaluate a YAML or JSON run configuration")
    b.add_argument("path")
    b.add_argument("--format", choices=("csv", "json"), default=None)
    b.add_argument("--output", default=None)
    b.add_argument("--threads", type=int, default=None)
    b.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--quick", action="store_true", help="analytic checks and small simulations (<60 s)")
    v.add_argument("--criteria", type=int, nargs="+", default=None)
    v.add_argument("--mutate", type=float, nargs="?", const=1e-4, default=0.0,
                   help="scale W by 1 + EPS to check the harness catches it (expect exit 1)")
    v.add_argument("--output", default=None, help="write results as JSON")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelError, BackendError, ValueError, OSError) as exc:
        if isinstance(exc, _NUMERICAL):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

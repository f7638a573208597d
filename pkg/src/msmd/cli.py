"""Command-line interface.

Every command writes its artifact to ``--out`` plus a ``<out>.meta.json``
sidecar recording the configuration hash, library versions and runtime.
Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .forecast import HORIZONS, AcvProvider, SingularToeplitzError, linear_forecast_paths
from .model import DurationSeries, MsmdParams, simulate

log = logging.getLogger("msmd")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    """Invalid configuration detected after argument parsing."""


# --------------------------------------------------------------------------- #
def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("msmd", "numpy", "scipy", "numba", "pandas"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def _write(path, text: str, args, started: float, extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    cfg = _config(args)
    meta = {
        "artifact": path.name,
        "command": args.command,
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "versions": _versions(),
        "runtime_seconds": round(time.perf_counter() - started, 3),
        **(extra or {}),
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _read_durations(path) -> DurationSeries:
    try:
        return DurationSeries.from_csv(path)
    except FileNotFoundError as err:
        raise UsageError(f"data file not found: {path}") from err


def _load_model(source):
    from .registry import load_spec, model_from_dict

    try:
        d = load_spec(source)
    except FileNotFoundError as err:
        raise UsageError(str(err)) from err
    return model_from_dict(d.get("params", d))


def _positive(kind=int):
    def check(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return check


def _csv_rows(rows) -> str:
    return "".join(",".join(map(str, r)) + "\n" for r in rows)


# --------------------------------------------------------------------------- #
def cmd_simulate(args, t0):
    from .jumps import simulate_durations

    model = _load_model(args.model)
    if isinstance(model, MsmdParams):
        series, states = simulate(model, args.n, args.seed, args.replication)
        if args.states:
            header = ",".join(f"m{j + 1}" for j in range(model.k))
            body = "\n".join(",".join(repr(float(v)) for v in row) for row in states)
            _write(args.states, header + "\n" + body + "\n", args, t0)
    else:
        if args.states:
            raise UsageError("--states is only available for MSMD models")
        series = DurationSeries(simulate_durations(model, args.n, args.seed, args.replication))
    tmp = Path(args.out)
    tmp.parent.mkdir(parents=True, exist_ok=True)
    series.to_csv(tmp)
    _write(tmp, tmp.read_text(), args, t0, {"rows": len(series)})


def cmd_fit_mle(args, t0):
    from .mle import fit_mle

    data = _read_durations(args.data)
    fit = fit_mle(data, args.k, args.innovation, n_starts=args.n_starts, seed=args.seed)
    _write(args.out, fit.to_json() + "\n", args, t0)


def _whittle_spec(args):
    from .whittle import MsmdSpectrum

    return MsmdSpectrum(args.k, args.multiplier, args.innovation)


def cmd_fit_whittle(args, t0):
    from .gof import gof_statistic
    from .whittle import fit_whittle, periodogram

    data = _read_durations(args.data)
    spec = _whittle_spec(args)
    pg = periodogram(data.logs)
    cov = None if args.covariance == "none" else args.covariance
    fit = fit_whittle(spec, pg, n_starts=args.n_starts, seed=args.seed, covariance=cov, bandwidth=args.bandwidth)
    d = fit.to_dict()
    d["params"] = fit.params(psi_bar=float(data.values.mean())).to_dict()
    if args.gof:
        d["gof"] = gof_statistic(spec, fit.theta, pg).to_dict()
    _write(args.out, json.dumps(d, indent=2) + "\n", args, t0)


def cmd_fit_acd(args, t0):
    from .rivals import fit_acd

    data = _read_durations(args.data)
    fit = fit_acd(data, args.p, args.q, args.innovation, seed=args.seed)
    _write(args.out, fit.to_json() + "\n", args, t0)


def cmd_fit_lmsd(args, t0):
    from .rivals import fit_lmsd_whittle

    data = _read_durations(args.data)
    fit = fit_lmsd_whittle(data.logs, args.innovation, n_starts=args.n_starts, seed=args.seed)
    _write(args.out, fit.to_json() + "\n", args, t0)


def cmd_forecast(args, t0):
    from .mle import filter_loglik, forecast_paths
    from .rivals import AcdParams, LmsdKalman, acd_forecast_paths

    model = _load_model(args.model)
    data = _read_durations(args.data)
    x = data.values
    last = [x.size - 1]
    if isinstance(model, MsmdParams):
        method = args.method or ("optimal" if model.is_binomial else "linear")
        if method == "optimal":
            if not model.is_binomial:
                raise UsageError("optimal forecasts need binomial multipliers; use --method linear")
            probs = filter_loglik(model, x).final_probs
            path = forecast_paths(model, probs, args.horizon)[0]
        else:
            path = linear_forecast_paths(AcvProvider.from_msmd(model), x, last, args.horizon, args.window)[0]
    elif isinstance(model, AcdParams):
        path = acd_forecast_paths(model, x, last, args.horizon)[0]
    else:
        path = LmsdKalman(model).forecast_paths(np.log(x), last, args.horizon)[0]
    cum = np.cumsum(path)
    rows = [["h", "point", "cumulative"]] + [[h + 1, repr(float(p)), repr(float(c))] for h, (p, c) in enumerate(zip(path, cum))]
    _write(args.out, _csv_rows(rows), args, t0)


def cmd_tournament(args, t0):
    from .tournament import TournamentConfig, run_tournament

    data = _read_durations(args.data)
    cfg = TournamentConfig(
        n_train=args.train,
        n_test=args.test,
        models=tuple(args.models),
        combinations=tuple(args.combine or ()),
        innovation=args.innovation,
        benchmark=args.benchmark,
        window=args.window,
        n_starts=args.n_starts,
        seed=args.seed,
    )
    res = run_tournament(data, cfg)
    out = Path(args.out)
    _write(out / "mse.csv", res.report.to_csv("mse"), args, t0)
    _write(out / "mad.csv", res.report.to_csv("mad"), args, t0)
    _write(out / "report.json", json.dumps(res.to_dict(), indent=2, default=float) + "\n", args, t0)


def cmd_goftest(args, t0):
    from .gof import gof_statistic
    from .whittle import fit_whittle, periodogram

    data = _read_durations(args.data)
    spec = _whittle_spec(args)
    pg = periodogram(data.logs)
    if args.theta:
        theta = np.array([float(v) for v in args.theta.split(",")])
        if theta.size != spec.dim:
            raise UsageError(f"--theta needs {spec.dim} values {spec.names}")
    else:
        theta = fit_whittle(spec, pg, n_starts=args.n_starts, seed=args.seed).theta
    res = gof_statistic(spec, theta, pg, args.bandwidth)
    d = res.to_dict()
    d["theta"] = dict(zip(spec.names, map(float, theta)))
    _write(args.out, json.dumps(d, indent=2) + "\n", args, t0)


def cmd_mc(args, t0):
    from .montecarlo import gof_size, run_mc

    truth = _load_model(args.model)
    if not isinstance(truth, MsmdParams):
        raise UsageError("Monte Carlo studies take an MSMD model")
    if args.mode == "gof-size":
        res = gof_size(truth, args.n, args.R, args.seed, n_starts=args.n_starts)
    else:
        try:
            res = run_mc(args.estimator, truth, args.n, args.R, args.seed, args.k_fit, args.n_starts)
        except ValueError as err:
            raise UsageError(str(err)) from err
    out = Path(args.out)
    _write(out, res.to_csv(), args, t0, {"summary": res.to_dict()})
    if args.mode == "estimate":
        _write(out.with_name(out.stem + "-replications.csv"), res.replications_csv(), args, t0)


def cmd_rv_sim(args, t0):
    from .jumps import RV_PRESETS, acf_table_csv, rv_acf_experiment

    if args.models:
        models = {}
        for m in args.models:
            name, _, src = m.partition("=")
            models[name] = _load_model(src or name)
    else:
        models = RV_PRESETS
    table = rv_acf_experiment(models, args.days, args.max_lag, args.seed, dt=args.dt)
    _write(args.out, acf_table_csv(table), args, t0)


def cmd_ingest(args, t0):
    from .data import THRESHOLDS, SessionConfig, adjust, describe_table, fit_seasonal, read_ticks, thin_to_price_durations

    session = SessionConfig.from_json(args.session) if args.session else SessionConfig()
    if args.c is None and args.currency is None:
        raise UsageError("give --c or --currency")
    c = args.c if args.c is not None else THRESHOLDS[args.currency]
    try:
        ticks = read_ticks(args.ticks, session)
    except FileNotFoundError as err:
        raise UsageError(f"tick file not found: {args.ticks}") from err
    raw = thin_to_price_durations(ticks, c)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    raw.to_csv(out)
    _write(out, out.read_text(), args, t0, {"rows": len(raw), "threshold": c})
    if args.adjusted:
        prof = fit_seasonal(raw, session, args.bandwidth)
        adj = adjust(raw, prof)
        p = Path(args.adjusted)
        p.parent.mkdir(parents=True, exist_ok=True)
        adj.to_csv(p)
        _write(p, p.read_text(), args, t0, {"bandwidth": prof.bandwidth})
        if args.describe:
            _write(args.describe, json.dumps(describe_table(raw, adj), indent=2) + "\n", args, t0)


# --------------------------------------------------------------------------- #
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msmd", description="Multifractal duration models from the command line.")
    p.add_argument("--threads", type=_positive(), default=1, help="numba worker threads (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, out=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if out:
            sp.add_argument("--out", required=True, help="output file")

    s = sub.add_parser("simulate", help="simulate durations from a model spec or preset")
    s.add_argument("--model", required=True, help="JSON file, JSON string or preset name")
    s.add_argument("--n", type=_positive(), required=True)
    s.add_argument("--replication", type=int, default=0)
    s.add_argument("--states", help="also write the hidden multiplier path (MSMD only)")
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit-mle", help="exact maximum likelihood for binomial MSMD")
    s.add_argument("--data", required=True)
    s.add_argument("--k", type=_positive(), default=8)
    s.add_argument("--innovation", choices=("exponential", "weibull"), default="exponential")
    s.add_argument("--n-starts", type=_positive(), default=5)
    common(s)
    s.set_defaults(func=cmd_fit_mle)

    def spectral(sp):
        sp.add_argument("--data", required=True)
        sp.add_argument("--k", type=_positive(), default=8)
        sp.add_argument("--multiplier", choices=("binomial", "lognormal"), default="binomial")
        sp.add_argument("--innovation", choices=("exponential", "weibull", "lognormal"), default="exponential")
        sp.add_argument("--n-starts", type=_positive(), default=5)

    s = sub.add_parser("fit-whittle", help="Whittle estimation of MSMD on log durations")
    spectral(s)
    s.add_argument("--covariance", choices=("none", "plugin", "neweywest", "auto"), default="auto")
    s.add_argument("--bandwidth", type=int, default=None, help="Newey-West lag truncation")
    s.add_argument("--gof", action="store_true", help="append the goodness-of-fit test")
    common(s)
    s.set_defaults(func=cmd_fit_whittle)

    s = sub.add_parser("fit-acd", help="ACD(p, q) maximum likelihood")
    s.add_argument("--data", required=True)
    s.add_argument("--p", type=_positive(), default=1)
    s.add_argument("--q", type=_positive(), default=1)
    s.add_argument("--innovation", choices=("exponential", "weibull"), default="exponential")
    common(s)
    s.set_defaults(func=cmd_fit_acd)

    s = sub.add_parser("fit-lmsd", help="LMSD Whittle estimation on log durations")
    s.add_argument("--data", required=True)
    s.add_argument("--innovation", choices=("exponential", "weibull"), default="exponential")
    s.add_argument("--n-starts", type=_positive(), default=5)
    common(s)
    s.set_defaults(func=cmd_fit_lmsd)

    s = sub.add_parser("forecast", help="point and cumulative forecasts from the end of a series")
    s.add_argument("--model", required=True, help="parameter JSON, fit JSON or preset")
    s.add_argument("--data", required=True)
    s.add_argument("--horizon", type=_positive(), default=max(HORIZONS))
    s.add_argument("--method", choices=("optimal", "linear"), default=None, help="MSMD only")
    s.add_argument("--window", type=_positive(), default=1024)
    common(s, seed=False)
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("tournament", help="out-of-sample forecast comparison")
    s.add_argument("--data", required=True)
    s.add_argument("--train", type=_positive(), default=10_000)
    s.add_argument("--test", type=_positive(), default=2_000)
    s.add_argument("--models", nargs="+", default=["msmd-mle:8", "acd", "lmsd"],
                   help="msmd-mle:K, msmd-whittle:K, acd, lmsd")
    s.add_argument("--combine", nargs="*", help="equal-weight combinations, e.g. MSMD(8)+LMSD")
    s.add_argument("--innovation", choices=("exponential", "weibull"), default="exponential")
    s.add_argument("--benchmark", default="ACD")
    s.add_argument("--window", type=_positive(), default=1024)
    s.add_argument("--n-starts", type=_positive(), default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_tournament)

    s = sub.add_parser("goftest", help="spectral goodness-of-fit test")
    spectral(s)
    s.add_argument("--theta", help="comma-separated parameters; fitted by Whittle when omitted")
    s.add_argument("--bandwidth", type=float, default=None, help="kernel bandwidth p_n")
    common(s)
    s.set_defaults(func=cmd_goftest)

    s = sub.add_parser("mc", help="Monte Carlo of estimators or of the test size")
    s.add_argument("--model", required=True)
    s.add_argument("--mode", choices=("estimate", "gof-size"), default="estimate")
    s.add_argument("--estimator", choices=("whittle", "mle"), default="whittle")
    s.add_argument("--n", type=_positive(), required=True)
    s.add_argument("--R", type=_positive(), required=True)
    s.add_argument("--k-fit", type=_positive(), default=None)
    s.add_argument("--n-starts", type=_positive(), default=5)
    common(s)
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("rv-sim", help="daily realized variance ACF under pure-jump prices")
    s.add_argument("--models", nargs="*", help="NAME=SPEC pairs; default: the four shipped rv-* presets")
    s.add_argument("--days", type=_positive(), default=2000)
    s.add_argument("--max-lag", type=_positive(), default=50)
    s.add_argument("--dt", type=_positive(float), default=60.0)
    common(s)
    s.set_defaults(func=cmd_rv_sim)

    s = sub.add_parser("ingest", help="thin ticks to price durations and remove the intraday pattern")
    s.add_argument("--ticks", required=True, help="CSV with timestamp,price")
    s.add_argument("--c", type=_positive(float), default=None)
    s.add_argument("--currency", choices=("CHF", "EUR", "JPY"), default=None)
    s.add_argument("--session", help="session/calendar JSON")
    s.add_argument("--adjusted", help="also write seasonally adjusted durations here")
    s.add_argument("--bandwidth", type=_positive(float), default=None, help="kernel bandwidth in seconds")
    s.add_argument("--describe", help="descriptive statistics JSON (needs --adjusted)")
    s.add_argument("--out", required=True, help="raw durations CSV")
    s.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    from .optim import ConvergenceError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    import warnings

    import numba

    if args.threads > numba.config.NUMBA_NUM_THREADS:
        print(f"error: --threads {args.threads} exceeds the {numba.config.NUMBA_NUM_THREADS} available", file=sys.stderr)
        return EXIT_USAGE
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(args.threads)
    t0 = time.perf_counter()
    try:
        args.func(args, t0)
    except (UsageError, ValueError, KeyError, FileNotFoundError, NotImplementedError, TypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, np.linalg.LinAlgError, SingularToeplitzError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    qkdlab rate --protocol bb84 --mode finite --qber 0.05 --signals 1e8 --optimize
    qkdlab n0 --protocol six-state --disturbance 0.12 --optimize-noise
    qkdlab sweep --kind n0-vs-d --protocol both --d-range 0.05:0.14:0.005 --output n0.csv
    qkdlab verify --grid fine

Exit codes: 0 success, 1 usage or domain error, 2 infeasible parameters
(including "no key at any N"), 3 output path not writable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import __version__
from .checks import run_checks
from .keyrate import SecurityBudget, asymptotic_rate, finite_rate
from .optimizer import (
    DEFAULT_CONFIG,
    NoKeyError,
    OptimizationConfig,
    SweepParams,
    disturbance_threshold,
    find_N0,
    optimal_noise_detail,
    optimize_rate,
    sweep,
)
from .states import InfeasibleAttackError, Protocol, Scenario

CSV_HEADER = "protocol,scenario,D,p,Q,N,m,eps_bar,eps_PE,eps_EC,eps_PA,SXE,HXY,zeta,aep,pa_corr,rate,status"

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3

ENV_CONFIG = "QKDLAB_CONFIG"

DEFAULTS = {
    "protocol": "bb84",
    "scenario": 1,
    "mode": "asym",
    "disturbance": None,
    "qber": None,
    "noise": 0.0,
    "signals": None,
    "epsilon": 1e-9,
    "f_ec": 1.0,
    "optimize": False,
    "optimize_noise": False,
    "m": None,
    "budget": "0.25,0.25,0.25",
    "m_points": DEFAULT_CONFIG.m_points,
    "refine": True,
    "p_step": DEFAULT_CONFIG.p_step,
    "p_max": DEFAULT_CONFIG.p_max,
    "objective": "asymptotic",
    "kind": None,
    "d_range": None,
    "n_range": None,
    "noise_list": "0,0.05",
    "workers": 1,
    "grid": "coarse",
    "self_test": False,
    "format": None,
    "output": "-",
}

KINDS = ("n0-vs-d", "p-vs-d", "r-vs-n", "r-vs-n-channel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    """12 significant digits, shortest form; blanks for missing values."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return format(x, ".12g")


def csv_fields(r) -> list:
    b = r.budget
    return [
        r.protocol, r.scenario, r.D, r.p, r.Q, r.N, r.m,
        None if b is None else b.eps_bar, None if b is None else b.eps_pe,
        None if b is None else b.eps_ec, None if b is None else b.eps_pa,
        r.sxe, r.hxy, r.zeta, r.aep_penalty, r.pa_correction, r.rate, r.status,
    ]


def csv_row(r) -> str:
    return ",".join(fmt(v) for v in csv_fields(r))


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return fmt(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


# -- configuration ---------------------------------------------------------

def load_config_file(path) -> dict:
    """JSON object or key=value lines (``#`` comments); keys use underscores."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad JSON in {path}: {exc}") from None
    else:
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"bad config line in {path}: {line!r}")
            k, v = line.split("=", 1)
            raw[k.strip()] = _coerce(v.strip())
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {k!r} in {path}")
        out[key] = v
    return out


def _coerce(text):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def resolve(args, command) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    cfg["format"] = "csv" if command == "sweep" else "json"
    path = getattr(args, "config", None) or os.environ.get(ENV_CONFIG)
    if path:
        cfg.update(load_config_file(path))
        cfg["config_file"] = path
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            cfg[k] = v
    return cfg


def _float(cfg, key, lo=None, hi=None, lo_open=False, hi_open=False):
    v = cfg.get(key)
    if v is None:
        return None
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise UsageError(f"--{key.replace('_', '-')} expects a number, got {v!r}") from None
    bad = (lo is not None and (v < lo or (lo_open and v == lo))) or (
        hi is not None and (v > hi or (hi_open and v == hi)))
    if bad or math.isnan(v):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise UsageError(f"--{key.replace('_', '-')} = {v:g} outside its domain {lb}{lo}, {hi}{rb}")
    return v


def _protocols(cfg, allow_both):
    name = str(cfg["protocol"]).lower()
    if name == "both":
        if not allow_both:
            raise UsageError("--protocol both is only accepted by threshold and sweep")
        return (Protocol.BB84, Protocol.SIX_STATE)
    try:
        return (Protocol.parse(name),)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scenario(cfg):
    try:
        return Scenario.parse(cfg["scenario"])
    except (ValueError, KeyError):
        raise UsageError(f"unknown scenario {cfg['scenario']!r}; use 0-4") from None


def opt_config(cfg) -> OptimizationConfig:
    m_points = int(cfg["m_points"])
    if m_points < 2:
        raise UsageError("--m-points must be at least 2")
    return OptimizationConfig(
        m_points=m_points, refine=bool(cfg["refine"]), f_ec=_float(cfg, "f_ec", 1.0),
        p_step=_float(cfg, "p_step", 0.0, 1.0, lo_open=True), p_max=_float(cfg, "p_max", 0.0, 1.0, hi_open=True),
        scenario=_scenario(cfg),
    )


def parse_range(text, name, log=False):
    """``start:stop:step`` with stop included; stop below start gives no points."""
    try:
        a, b, step = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise UsageError(f"--{name} expects start:stop:step, got {text!r}") from None
    if step <= 0:
        raise UsageError(f"--{name} step must be positive")
    count = int(math.floor((b - a) / step + 1e-9)) + 1 if b >= a else 0
    vals = [round(a + i * step, 12) for i in range(count)]
    return tuple(10.0 ** v for v in vals) if log else tuple(vals)


def echo_config(cfg, stream):
    for k in sorted(cfg):
        stream.write(f"# {k} = {fmt(cfg[k]) if isinstance(cfg[k], float) else cfg[k]}\n")


# -- output ----------------------------------------------------------------

def emit(cfg, rows, extra=None, stderr=sys.stderr):
    """Write rows in the configured format; returns the exit code."""
    if cfg["format"] == "csv":
        text = CSV_HEADER + "\n" + "".join(csv_row(r) + "\n" for r in rows)
    elif cfg["format"] == "json":
        doc = {"config": cfg, "results": [r.as_dict() for r in rows]}
        if extra:
            doc.update(extra)
        text = json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"
    else:
        raise UsageError(f"unknown format {cfg['format']!r}; use csv or json")
    out = cfg["output"]
    if out == "-":
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        stderr.write(f"error: cannot write {out}: {exc}\n")
        return EXIT_IO
    return EXIT_OK


def _writable(path) -> bool:
    if path == "-":
        return True
    if os.path.isdir(path):
        return False
    if os.path.exists(path):
        return os.access(path, os.W_OK)
    return os.access(os.path.dirname(os.path.abspath(path)), os.W_OK)


# -- commands --------------------------------------------------------------

def _point(cfg):
    D = _float(cfg, "disturbance", 0.0, 0.5, hi_open=True)
    Q = _float(cfg, "qber", 0.0, 0.5)
    if D is not None and Q is not None:
        raise UsageError("give only one of --disturbance and --qber")
    p = _float(cfg, "noise", 0.0, 1.0, hi_open=True)
    return D, Q, p


def _signals(cfg, required=True):
    N = _float(cfg, "signals", 2.0)
    if N is None and required:
        raise UsageError("this mode needs --signals N")
    return N


def cmd_rate(cfg):
    (protocol,) = _protocols(cfg, False)
    D, Q, p = _point(cfg)
    if D is None and Q is None:
        raise UsageError("give --disturbance or --qber")
    oc = opt_config(cfg)
    eps = _float(cfg, "epsilon", 0.0, 1.0, lo_open=True, hi_open=True)
    extra = {}
    if cfg["mode"] == "asym":
        if cfg["optimize_noise"]:
            if D is None:
                raise UsageError("--optimize-noise needs --disturbance")
            p, _ = optimal_noise_detail(protocol, D, "asymptotic", config=oc)
            extra["optimal_p"] = p
        if D is None:
            from .states import disturbance_from_qber

            D = disturbance_from_qber(Q, p)
        r = asymptotic_rate(protocol, D, p, scenario=oc.scenario, f_ec=oc.f_ec)
    elif cfg["mode"] == "finite":
        N = _signals(cfg)
        if cfg["optimize_noise"]:
            if D is None:
                raise UsageError("--optimize-noise needs --disturbance")
            p, _ = optimal_noise_detail(protocol, D, "maximize_rate_at_N", eps, oc, N=N)
            extra["optimal_p"] = p
        if cfg["optimize"]:
            r = optimize_rate(protocol, D=D, Q=Q, p=p, N=N, eps_total=eps, config=oc)
        else:
            m = _float(cfg, "m", 1.0, N - 1)
            if m is None:
                raise UsageError("finite mode needs --optimize or --m")
            try:
                fr = tuple(float(x) for x in str(cfg["budget"]).split(","))
                budget = SecurityBudget.from_fractions(eps, *fr)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad --budget {cfg['budget']!r}: {exc}") from None
            r = finite_rate(protocol, D=D, Q=Q, p=p, N=N, m=m, budget=budget, scenario=oc.scenario, f_ec=oc.f_ec)
    else:
        raise UsageError(f"unknown --mode {cfg['mode']!r}; use asym or finite")
    return [r], extra


def cmd_n0(cfg):
    (protocol,) = _protocols(cfg, False)
    D, Q, p = _point(cfg)
    if D is None:
        raise UsageError("n0 needs --disturbance")
    oc = opt_config(cfg)
    eps = _float(cfg, "epsilon", 0.0, 1.0, lo_open=True, hi_open=True)
    if cfg["optimize_noise"]:
        p, _ = optimal_noise_detail(protocol, D, "minimize_N0", eps, oc)
    res = find_N0(protocol, D, p, eps, oc)
    extra = {"N0": res.N0, "N0_estimate": res.estimate, "N0_below": res.below, "optimal_p": res.optimal_p}
    return [res.witness], extra


_OBJECTIVES = {"asymptotic": "asymptotic", "min-n0": "minimize_N0", "rate-at-n": "maximize_rate_at_N"}


def cmd_opt_noise(cfg):
    (protocol,) = _protocols(cfg, False)
    D, _, _ = _point(cfg)
    if D is None:
        raise UsageError("opt-noise needs --disturbance")
    mode = _OBJECTIVES.get(str(cfg["objective"]).replace("_", "-").lower())
    if mode is None:
        raise UsageError(f"unknown --objective; use one of {sorted(_OBJECTIVES)}")
    oc = opt_config(cfg)
    eps = _float(cfg, "epsilon", 0.0, 1.0, lo_open=True, hi_open=True)
    N = _signals(cfg, required=mode == "maximize_rate_at_N")
    p, value = optimal_noise_detail(protocol, D, mode, eps, oc, N=N)
    if mode == "asymptotic":
        row = asymptotic_rate(protocol, D, p, scenario=oc.scenario, f_ec=oc.f_ec)
    elif mode == "minimize_N0":
        row = find_N0(protocol, D, p, eps, oc).witness
    else:
        row = optimize_rate(protocol, D=D, p=p, N=N, eps_total=eps, config=oc)
    return [row], {"optimal_p": p, "objective": value}


def cmd_threshold(cfg):
    oc = opt_config(cfg)
    rows, found = [], {}
    for protocol in _protocols(cfg, True):
        D = disturbance_threshold(protocol, bool(cfg["optimize_noise"]), oc)
        p = 0.0
        if cfg["optimize_noise"]:
            p, _ = optimal_noise_detail(protocol, D, "asymptotic", config=oc, p_max=oc.threshold_p_max)
        rows.append(asymptotic_rate(protocol, D, p, scenario=oc.scenario, f_ec=oc.f_ec))
        found[protocol.value] = D
    return rows, {"threshold": found}


def cmd_sweep(cfg):
    kind = cfg["kind"]
    if kind is None or str(kind).replace("_", "-") not in KINDS:
        raise UsageError(f"--kind must be one of {', '.join(KINDS)}")
    kind = str(kind).replace("_", "-")
    oc = opt_config(cfg)
    eps = _float(cfg, "epsilon", 0.0, 1.0, lo_open=True, hi_open=True)
    D, Q, _ = _point(cfg)
    fields = dict(protocols=_protocols(cfg, True), eps_total=eps, config=oc,
                  optimize_noise=bool(cfg["optimize_noise"]))
    if kind in ("n0-vs-d", "p-vs-d"):
        if cfg["d_range"] is None:
            raise UsageError(f"{kind} needs --d-range start:stop:step")
        fields["D_values"] = parse_range(cfg["d_range"], "d-range")
        for d in fields["D_values"]:
            if not 0.0 <= d < 0.5:
                raise UsageError(f"--d-range value {d:g} outside [0, 0.5)")
    else:
        if cfg["n_range"] is None:
            raise UsageError(f"{kind} needs --n-range start:stop:step (log10 N)")
        fields["N_values"] = parse_range(cfg["n_range"], "n-range", log=True)
        if any(n < 2 for n in fields["N_values"]):
            raise UsageError("--n-range must stay at N >= 2")
        if kind == "r-vs-n":
            if D is None:
                raise UsageError("r-vs-n needs --disturbance")
            fields["D"] = D
        else:
            if Q is None:
                raise UsageError("r-vs-n-channel needs --qber")
            fields["Q"] = Q
            try:
                ps = tuple(float(x) for x in str(cfg["noise_list"]).split(","))
            except ValueError:
                raise UsageError(f"bad --noise-list {cfg['noise_list']!r}") from None
            if any(not 0.0 <= x < 1.0 for x in ps):
                raise UsageError("--noise-list values must lie in [0, 1)")
            fields["p_values"] = ps
    workers = int(cfg["workers"])
    if workers < 1:
        raise UsageError("--workers must be at least 1")
    return sweep(kind.replace("-", "_"), SweepParams(**fields), workers=workers), {}


def cmd_verify(cfg):
    if cfg["grid"] not in ("coarse", "fine"):
        raise UsageError("--grid must be coarse or fine")
    results = run_checks(cfg["grid"], bool(cfg["self_test"]), report=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return failed


COMMANDS = {
    "rate": cmd_rate,
    "n0": cmd_n0,
    "opt-noise": cmd_opt_noise,
    "threshold": cmd_threshold,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkdlab", description="Finite-key rates of BB84 and six-state QKD with trusted noise.")
    parser.add_argument("--version", action="version", version=f"qkdlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    common = _Parser(add_help=False)
    common.add_argument("--config", help=f"key=value or JSON defaults (else ${ENV_CONFIG})")
    common.add_argument("--protocol", help="bb84, six-state (or both for threshold/sweep)")
    common.add_argument("--scenario", help="noise scenario 0-4 (default 1, Alice's depolarizing)")
    common.add_argument("--epsilon", type=float, help="total security parameter (default 1e-9)")
    common.add_argument("--f-ec", type=float, help="error-correction inefficiency (default 1)")
    common.add_argument("--m-points", type=int, help="size of the log grid over m (default 30)")
    common.add_argument("--no-refine", dest="refine", action="store_false", default=None,
                        help="skip the golden refinement of m and the budget")
    common.add_argument("--p-step", type=float, help="noise grid step (default 0.01)")
    common.add_argument("--p-max", type=float, help="largest noise value searched (default 0.5)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--output", help="output file, - for stdout")

    point = _Parser(add_help=False)
    g = point.add_mutually_exclusive_group()
    g.add_argument("--disturbance", type=float, help="disturbance D caused by Eve")
    g.add_argument("--qber", type=float, help="observed QBER")
    point.add_argument("--noise", type=float, help="depolarizing parameter p (default 0)")
    point.add_argument("--signals", type=float, help="total number of signals N")
    point.add_argument("--optimize-noise", action="store_true", default=None)

    s = sub.add_parser("rate", parents=[common, point], help="key rate at one point")
    s.add_argument("--mode", choices=("asym", "finite"))
    s.add_argument("--optimize", action="store_true", default=None, help="maximize over m and the budget")
    s.add_argument("--m", type=float, help="parameter-estimation samples (without --optimize)")
    s.add_argument("--budget", help="fractions f_bar,f_PE,f_PA of epsilon; EC gets the rest")

    sub.add_parser("n0", parents=[common, point], help="smallest N with a positive rate")

    s = sub.add_parser("opt-noise", parents=[common, point], help="best noise parameter")
    s.add_argument("--objective", help="asymptotic, min-n0 or rate-at-n")

    sub.add_parser("threshold", parents=[common, point], help="largest tolerable disturbance")

    s = sub.add_parser("sweep", parents=[common, point], help="tables behind the rate figures")
    s.add_argument("--kind", help=", ".join(KINDS))
    s.add_argument("--d-range", help="start:stop:step over D")
    s.add_argument("--n-range", help="start:stop:step over log10 N")
    s.add_argument("--noise-list", help="comma-separated p values for r-vs-n-channel")
    s.add_argument("--workers", type=int, help="process pool size (default 1)")

    s = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    s.add_argument("--grid", choices=("coarse", "fine"))
    s.add_argument("--self-test", action="store_true", default=None,
                   help="break one channel constant; the suite must then fail")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; try qkdlab --help")
        cfg = resolve(args, args.command)
        cfg["command"] = args.command
        echo_config(cfg, sys.stderr)
        if not _writable(cfg["output"]):
            sys.stderr.write(f"error: cannot write {cfg['output']}\n")
            return EXIT_IO
        if args.command == "verify":
            return EXIT_OK if not cmd_verify(cfg) else EXIT_USAGE
        rows, extra = COMMANDS[args.command](cfg)
        return emit(cfg, rows, extra)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (InfeasibleAttackError, NoKeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INFEASIBLE
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

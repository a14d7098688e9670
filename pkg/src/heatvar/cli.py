"""
Command-line front end.

    heatvar simulate --n 256 --m 8 --delta-n 0.0009765625 --dx 0.25 --theta 1 --sigma 1 --seed 7 --out inc.csv
    heatvar cov      --n 4 --m 2 --delta-n 0.01 --dx 0.5 --theta 1 --sigma 1 --out cov.csv
    heatvar asymvar  --p 2 --theta 1 --sigma 1 --radius 10000
    heatvar estimate --input inc.csv --p 2 --known-theta 1
    heatvar mc-clt   --n 256 --m 8 --delta-n 0.0009765625 --dx 0.25 --reps 2000 --out report.json

Options may also come from ``--config file.json``; flags given on the
command line always win. Exit codes: 0 success, 2 usage or constraint
error, 1 runtime error. Errors go to stderr prefixed with ``error:``.
"""
import argparse
import json
import os
import sys
import warnings

from .asymptotics import DEFAULT_RADIUS, asymptotic_variance
from .covariance import DEFAULT_SIZE_CAP, GridSpec, ModelParams, build_cov_matrix
from .kernel import DomainError
from .montecarlo import MCConfig, run_replications
from .sampler import Seed, read_field_csv, reconstruct_path, sample_increments, write_field_csv
from .statistics import averaged_pv, estimate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULTS = {
    "m": 1,
    "dx": 1.0,
    "p": 2,
    "seed": 0,
    "stream": 0,
    "reps": 2000,
    "radius": DEFAULT_RADIUS,
    "alpha": 0.05,
    "size_cap": DEFAULT_SIZE_CAP,
}


def _add_grid(sp):
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--delta-n", dest="delta_n", type=float)
    sp.add_argument("--dx", type=float, help="uniform spacing of the m points starting at 0")
    sp.add_argument("--xs", help="comma-separated spatial points (overrides --m/--dx)")
    sp.add_argument("--size-cap", dest="size_cap", type=int)


def _add_params(sp):
    sp.add_argument("--theta", type=float)
    sp.add_argument("--sigma", type=float)


def build_parser():
    parser = _Parser(prog="heatvar", description="Exact simulation and power-variation inference "
                                                 "for the stochastic heat equation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values; flags override it")
        sp.add_argument("--out", help="output file (stdout when omitted)")
        sp.add_argument("--threads", type=int)

    sp = sub.add_parser("simulate", help="sample one increment field and write it as CSV")
    common(sp)
    _add_grid(sp)
    _add_params(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--stream", type=int)
    sp.add_argument("--path-out", dest="path_out", help="also write the reconstructed path X")

    sp = sub.add_parser("cov", help="write the exact increment covariance matrix as CSV")
    common(sp)
    _add_grid(sp)
    _add_params(sp)

    sp = sub.add_parser("asymvar", help="asymptotic variance of the CLT as JSON")
    common(sp)
    _add_params(sp)
    sp.add_argument("--p", type=int)
    sp.add_argument("--radius", type=int)

    sp = sub.add_parser("estimate", help="estimate a parameter from an increments CSV")
    common(sp)
    sp.add_argument("--input")
    sp.add_argument("--p", type=int)
    sp.add_argument("--known-theta", dest="known_theta", type=float)
    sp.add_argument("--known-sigma", dest="known_sigma", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--radius", type=int)

    sp = sub.add_parser("mc-clt", help="Monte Carlo check of the CLT")
    common(sp)
    _add_grid(sp)
    _add_params(sp)
    sp.add_argument("--p", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--samples-out", dest="samples_out", help="CSV with one column s")
    return parser


def resolve(args):
    """Merge flags over the config file over defaults."""
    conf = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        conf = {k.replace("-", "_"): v for k, v in raw.items()}
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command")}
    allowed = set(vars(args)) - {"config", "command"}
    extra = set(conf) - allowed
    if extra:
        raise UsageError(f"unknown config key(s) for {args.command}: {', '.join(sorted(extra))}")
    if "xs" not in flags and ({"m", "dx"} & set(flags)):
        # an explicit uniform grid on the command line replaces config points
        conf.pop("xs", None)
    out = {k: v for k, v in DEFAULTS.items() if k in allowed}
    out.update(conf)
    out.update(flags)
    if out.get("threads") is None and "threads" in allowed:
        env = os.environ.get("HEATVAR_THREADS")
        out["threads"] = int(env) if env else 1
    return out


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _grid(cfg):
    _require(cfg, "n", "delta_n")
    xs = cfg.get("xs")
    try:
        if xs is not None:
            if isinstance(xs, str):
                xs = [float(v) for v in xs.split(",") if v.strip()]
            grid = GridSpec(cfg["n"], cfg["delta_n"], tuple(xs))
        else:
            grid = GridSpec.uniform(cfg["n"], cfg["delta_n"], cfg["m"], cfg["dx"])
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    cfg["xs"] = list(grid.xs)
    cfg["m"] = grid.m
    return grid


def _params(cfg):
    _require(cfg, "theta", "sigma")
    try:
        return ModelParams(cfg["theta"], cfg["sigma"])
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _check_positive_int(cfg, key, low=1):
    v = cfg.get(key)
    if v is None or int(v) != v or v < low:
        raise UsageError(f"--{key.replace('_', '-')} must be an integer >= {low}, got {v!r}")


def _emit_json(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_simulate(cfg):
    grid = _grid(cfg)
    params = _params(cfg)
    try:
        seed = Seed(cfg["seed"], cfg["stream"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    field = sample_increments(grid, params, seed, size_cap=cfg["size_cap"])
    write_field_csv(cfg.get("out") or sys.stdout, grid, field.values, "dX")
    if cfg.get("path_out"):
        write_field_csv(cfg["path_out"], grid, reconstruct_path(field), "X")


def _cmd_cov(cfg):
    grid = _grid(cfg)
    params = _params(cfg)
    cov = build_cov_matrix(grid, params, size_cap=cfg["size_cap"])
    cov.to_csv(cfg.get("out") or sys.stdout)


def _cmd_asymvar(cfg):
    params = _params(cfg)
    _check_positive_int(cfg, "p")
    _check_positive_int(cfg, "radius", 2)
    res = asymptotic_variance(cfg["p"], params, cfg["radius"])
    payload = res.to_dict()
    payload["config"] = cfg
    _emit_json(payload, cfg.get("out"))


def _cmd_estimate(cfg):
    _require(cfg, "input")
    _check_positive_int(cfg, "p")
    known = {}
    if cfg.get("known_theta") is not None:
        known["theta"] = cfg["known_theta"]
    if cfg.get("known_sigma") is not None:
        known["sigma"] = cfg["known_sigma"]
    if len(known) > 1:
        raise UsageError("give at most one of --known-theta and --known-sigma")
    if any(not v > 0 for v in known.values()):
        raise UsageError("known parameter values must be positive")
    if not 0 < cfg["alpha"] < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    field = read_field_csv(cfg["input"])
    res = estimate(averaged_pv(field, cfg["p"]), known, cfg["alpha"], cfg["radius"])
    payload = res.to_dict()
    payload["config"] = cfg
    _emit_json(payload, cfg.get("out"))


def _cmd_mc(cfg):
    grid = _grid(cfg)
    params = _params(cfg)
    _check_positive_int(cfg, "p")
    _check_positive_int(cfg, "reps", 2)
    _check_positive_int(cfg, "radius", 2)
    if not 0 < cfg["alpha"] < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        config = MCConfig(grid, params, cfg["p"], cfg["reps"], cfg["seed"], cfg["alpha"], cfg["radius"],
                          max(1, cfg["threads"]), cfg["size_cap"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = run_replications(config)
    payload = report.to_dict()
    payload["config"] = cfg
    _emit_json(payload, cfg.get("out"))
    if cfg.get("samples_out"):
        report.samples_csv(cfg["samples_out"])


COMMANDS = {
    "simulate": _cmd_simulate,
    "cov": _cmd_cov,
    "asymvar": _cmd_asymvar,
    "estimate": _cmd_estimate,
    "mc-clt": _cmd_mc,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported on stderr with exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

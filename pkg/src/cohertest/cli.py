"""Command-line front end.

Subcommands read an optional strict JSON config (unknown keys are an error),
apply flag overrides, and write JSON (or CSV) results carrying a provenance
block.  Exit status is 0 on success, 2 on configuration errors and 3 on
runtime or numerical errors; diagnostics are one JSON line on stderr.
"""
import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__, harness, rmt, simulate, specdens, spectral, stats
from .errors import CohertestError, ConfigurationError

log = logging.getLogger("cohertest")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


# -- config parsing ------------------------------------------------------------


def _strict(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigurationError(f"{where}: expected a JSON object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigurationError(f"{where}: unknown key(s) {unknown}")
    return d


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    return cfg


INNOVATION_KEYS = ("kind", "k", "shared_tau")
DGP_KEYS = ("kind", "phi", "psi", "coef_mode", "sigma", "mixing_seed", "factors", "snr_db",
            "innovation")


def parse_dgp(d):
    d = dict(_strict(d or {}, DGP_KEYS, "dgp"))
    inn = d.pop("innovation", None)
    if inn is not None:
        d["innovation"] = simulate.InnovationSpec(**_strict(inn, INNOVATION_KEYS, "innovation"))
    return simulate.DgpSpec(**d)


def dgp_to_dict(spec):
    out = {k: getattr(spec, k) for k in DGP_KEYS if k != "innovation"}
    for k in ("phi", "psi"):
        if isinstance(out[k], tuple):
            out[k] = list(out[k])
    out["innovation"] = {k: getattr(spec.innovation, k) for k in INNOVATION_KEYS}
    return out


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def provenance(subcommand, cfg, seed=None):
    return {"subcommand": subcommand, "version": __version__, "config_sha256": config_hash(cfg),
            "master_seed": seed, "config": cfg}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def emit_json(obj, out):
    # float repr is the shortest string that round-trips exactly
    text = json.dumps(_jsonable(obj), indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _threads(args, cfg):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("COHERTEST_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"COHERTEST_THREADS must be an integer, got {env!r}") from None
    return cfg.get("threads", 1)


# -- subcommands ---------------------------------------------------------------


SIMULATE_KEYS = ("dgp", "n", "m", "alpha", "c", "seed", "rep", "format")


def cmd_simulate(args):
    cfg = _strict(load_config(args.config), SIMULATE_KEYS, "simulate config")
    cfg = dict(cfg)
    if args.n is not None:
        cfg["n"] = args.n
    if args.m is not None:
        cfg["m"] = args.m
    if args.seed is not None:
        cfg["seed"] = args.seed
    spec = parse_dgp(cfg.get("dgp"))
    if "n" not in cfg:
        raise ConfigurationError("simulate needs n")
    n = cfg["n"]
    m = cfg.get("m")
    if m is None:
        m = spectral.choose_params(n, cfg.get("alpha", 2.0 / 3.0), cfg.get("c", 0.5))[0]
    seed = cfg.get("seed", 0)
    if args.out is None:
        raise ConfigurationError("simulate needs --out")
    panel = simulate.simulate_panel(spec, m, n, seed, cfg.get("rep", 0))
    simulate.write_panel(args.out, panel, cfg.get("format"))
    full = {"dgp": dgp_to_dict(spec), "n": n, "m": m, "seed": seed, "rep": cfg.get("rep", 0)}
    emit_json({"panel": args.out, "m": m, "n": n, "provenance": provenance("simulate", full, seed)},
              None)


TEST_KEYS = ("panel", "f", "b", "c", "delta", "correction", "oracle", "lag_window", "level",
             "calibration", "sidedness", "ratio", "freq_csv")


def _oracle_function(d, m):
    d = _strict(d, ("phi", "psi", "dgp", "seed"), "oracle")
    if "dgp" in d:
        spec = parse_dgp(d["dgp"])
        return lambda nus: harness.oracle_r_for(spec, m, 0, d.get("seed", 0), nus)
    return lambda nus: specdens.oracle_r(d.get("phi", 0.0), d.get("psi", 0.0), nus)


def write_frequency_csv(path, est, full_precision=False):
    fmt = "%.17g" if full_precision else "%.4g"
    with open(path, "w", newline="") as fh:
        fh.write("nu,f_hat,r,theta,xi0\n")
        for row in zip(est.frequencies_, est.f_hat_, est.r_, est.theta_, est.xi0_):
            fh.write(",".join(fmt % v for v in row) + "\n")


def cmd_test(args):
    cfg = dict(_strict(load_config(args.config), TEST_KEYS, "test config"))
    if args.panel is not None:
        cfg["panel"] = args.panel
    if args.f is not None:
        cfg["f"] = args.f
    if "panel" not in cfg:
        raise ConfigurationError("test needs a panel file")
    try:
        panel = simulate.read_panel(cfg["panel"])
    except FileNotFoundError:
        raise ConfigurationError(f"panel file not found: {cfg['panel']}") from None
    kw = {k: cfg[k] for k in ("f", "b", "c", "delta", "correction", "lag_window", "level",
                              "calibration", "sidedness", "ratio") if k in cfg}
    est = stats.CoherenceIndependenceTest(**kw)
    r_oracle = _oracle_function(cfg["oracle"], panel.shape[0]) if "oracle" in cfg else None
    est.fit(panel, r_oracle=r_oracle)
    out = est.summary()
    out["frequencies"] = est.frequencies_
    out["xi0"] = est.xi0_
    out["provenance"] = provenance("test", cfg)
    if cfg.get("freq_csv"):
        write_frequency_csv(cfg["freq_csv"], est, args.full_precision)
    emit_json(out, args.out)


MC_KEYS = ("n_list", "alpha", "c", "reps", "level", "dgp", "f", "correction_mode", "delta",
           "lag_exponent", "ratio", "weight", "sidedness", "master_seed", "threads")


def cmd_mc(args):
    cfg = dict(_strict(load_config(args.config), MC_KEYS, "mc config"))
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    cfg["threads"] = _threads(args, cfg)
    cfg["dgp"] = parse_dgp(cfg.get("dgp"))
    config = harness.McConfig(**cfg)
    report = harness.mc_table(config)
    prov = provenance("mc", config.to_dict(), config.master_seed)
    # the worker count does not affect results, keep it out of the hash
    prov["config_sha256"] = config_hash({k: v for k, v in config.to_dict().items()
                                         if k != "threads"})
    if args.out is None:
        sys.stdout.write(report.csv_text(args.full_precision, args.timing))
        return
    report.to_csv(args.out, full_precision=args.full_precision, timing=args.timing)
    side = report.to_dict()
    side["provenance"] = prov
    emit_json(side, args.out + ".json")


RMT_KEYS = ("c", "b", "n", "f", "weight", "max_l")


def cmd_rmt(args):
    cfg = dict(_strict(load_config(args.config), RMT_KEYS, "rmt config"))
    for k in ("c", "b", "n", "f", "weight"):
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    if "c" not in cfg:
        raise ConfigurationError("rmt needs c")
    c = cfg["c"]
    f = rmt.TestFunction.from_name(cfg.get("f", "quadratic"))
    lo, hi = rmt.support(c)
    max_l = cfg.get("max_l", 6)
    out = {
        "c": c,
        "f": cfg.get("f", "quadratic"),
        "lambda_minus": lo,
        "lambda_plus": hi,
        "mp_integral": rmt.mp_integral(f, c),
        "d_pairing": rmt.d_pairing(f, c),
        "dl_pairing": {str(l): rmt.dl_pairing(f, c, l) for l in range(1, max_l + 1)},
        "sigma2": rmt.sigma2(f, c, cfg.get("weight", "omega")),
        "v_n": None,
    }
    if cfg.get("b") is not None and cfg.get("n") is not None:
        out["v_n"] = rmt.v_n(cfg["b"], cfg["n"])
    out["provenance"] = provenance("rmt", cfg)
    emit_json(out, args.out)


SPECDENS_KEYS = ("panel", "b", "c", "delta", "lag_window", "floor_eps")


def cmd_specdens(args):
    cfg = dict(_strict(load_config(args.config), SPECDENS_KEYS, "specdens config"))
    if args.panel is not None:
        cfg["panel"] = args.panel
    if "panel" not in cfg:
        raise ConfigurationError("specdens needs a panel file")
    try:
        panel = simulate.read_panel(cfg["panel"])
    except FileNotFoundError:
        raise ConfigurationError(f"panel file not found: {cfg['panel']}") from None
    m, n = panel.shape
    b = cfg.get("b")
    if b is None:
        b = int(np.floor(m / cfg.get("c", 0.5)))
        b -= b % 2
    grid = spectral.build_grid(n, b, cfg.get("delta", 0.0))
    eps = cfg.get("floor_eps", 1e-6)
    lw = (specdens.LagWindowSpec(cfg["lag_window"], eps) if cfg.get("lag_window")
          else specdens.LagWindowSpec.default(n, eps))
    r = specdens.autocov_matrix(panel, lw.l_max)
    s, ds, clamped = specdens.lag_window_from_autocov(r, grid.frequencies, lw.floor_eps)
    rh = specdens.rhat_from_sd(s, ds)
    fmt = "%.17g" if args.full_precision else "%.4g"
    lines = ["nu,channel,s_hat,ds_hat,clamped,r_hat"]
    for j, nu in enumerate(grid.frequencies):
        for ch in range(m):
            lines.append(f"{fmt % nu},{ch},{fmt % s[ch, j]},{fmt % ds[ch, j]},"
                         f"{int(clamped[ch, j])},{fmt % rh[j]}")
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        emit_json({"l_max": lw.l_max, "b": b, "provenance": provenance("specdens", cfg)},
                  args.out + ".json")


POWER_KEYS = ("kind", "m", "sigma", "c", "mixing_seed")


def cmd_power(args):
    cfg = dict(_strict(load_config(args.config), POWER_KEYS, "power config"))
    kind = cfg.get("kind", "ar1")
    m = cfg.get("m", 500)
    sigma = cfg.get("sigma", 0.5)
    c = cfg.get("c", 0.5)
    if kind == "ar1":
        a = simulate.ar1_mixing_root(m, sigma)
    elif kind == "dgp3":
        a = simulate.dgp3_matrix(m, sigma, cfg.get("mixing_seed", 0))
    else:
        raise ConfigurationError(f"power kind must be 'ar1' or 'dgp3', got {kind!r}")
    # columns of A* are the mixing rows
    a_star = a.conj().T
    d = np.ones(m)
    first, second = harness.mu1_moments(a_star, d, c)
    out = {"kind": kind, "m": m, "sigma": sigma, "c": c,
           "tr_h2_minus_1": harness.tr_h2_minus_1(a_star, d),
           "mu1_first_moment": first, "mu1_second_moment": second,
           "provenance": provenance("power", cfg)}
    emit_json(out, args.out)


# -- entry point ---------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--threads", type=int,
                        help="worker processes (default: $COHERTEST_THREADS or 1)")
    common.add_argument("--full-precision", action="store_true",
                        help="17 significant digits in CSV output")
    common.add_argument("--timing", action="store_true",
                        help="fill the wall-seconds column of mc tables")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="cohertest", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="simulate a panel")
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("test", parents=[common], help="run the independence test on a panel")
    sp.add_argument("--panel")
    sp.add_argument("--f")
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("mc", parents=[common], help="Monte Carlo size/power table")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("rmt", parents=[common], help="Marchenko-Pastur constants")
    sp.add_argument("--c", type=float)
    sp.add_argument("--b", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--f")
    sp.add_argument("--weight")
    sp.set_defaults(func=cmd_rmt)

    sp = sub.add_parser("specdens", parents=[common], help="lag-window spectral diagnostics")
    sp.add_argument("--panel")
    sp.set_defaults(func=cmd_specdens)

    sp = sub.add_parser("power", parents=[common], help="power-analysis constants")
    sp.set_defaults(func=cmd_power)
    return p


def _diagnose(kind, exc):
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__,
                                 "message": str(exc)}) + "\n")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; keep --help/--version at 0
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigurationError, TypeError) as exc:
        # TypeError covers bad keyword values coming from JSON
        _diagnose("configuration", exc)
        return EXIT_CONFIG
    except (CohertestError, ArithmeticError, OSError, ValueError) as exc:
        _diagnose("runtime", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``chisup <subcommand> [--config FILE] [--key value ...]``.

Parameters resolve as defaults, then the config file, then flags. The
resolved configuration is echoed into the CSV header as ``# key = value``
lines, so an output file is itself a valid config file for the same
subcommand. Metadata lines start with ``# @`` and are ignored on input.

Exit codes: 0 success, 2 parameter error, 3 numerical failure, 4 failed
check in ``verify``.
"""
from __future__ import annotations

import argparse
import io
import math
import sys
import time
from typing import Callable, Optional

from . import __version__
from .errors import ChisupError, NumericalError

EXIT_OK, EXIT_PARAM, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(ChisupError, ValueError):
    pass


# --- typed keys ---------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _floats(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {s!r}") from exc


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ConfigError(f"{s!r} is not one of {', '.join(options)}")
        return s
    return parse


MODEL_KEYS = {
    "model": (_choice("bridge", "fbm"), "bridge"),
    "H": (float, 0.5),
}
WEIGHT_KEYS = {
    "weight": (_choice("one", "rho-loglog", "fbm-plateau"), "rho-loglog"),
    "rho1": (float, 1.5),
    "rho2": (float, 0.0),
    "rho": (float, 1.0),
    "eps": (float, 0.1),
}
COMMON_KEYS = {"seed": (int, 0), "workers": (int, 1)}
MC_KEYS = {
    "b": (_floats, (1.0,)),
    "u": (_floats, (4.0, 6.0, 8.0)),
    "n_paths": (int, 100_000),
    "n_points": (int, 1024),
    "delta": (float, 2.0 ** -14),
    "block_size": (int, 1024),
}

SCHEMAS = {
    "simulate": {**COMMON_KEYS, **MODEL_KEYS, **WEIGHT_KEYS, **MC_KEYS},
    "verify": {**COMMON_KEYS, **MODEL_KEYS, **WEIGHT_KEYS, **MC_KEYS,
               "S1": (_floats, (0.2, 0.4)), "S2": (_floats, (0.6, 0.8))},
    "criteria": {**COMMON_KEYS, **MODEL_KEYS, **WEIGHT_KEYS,
                 "test": (_choice("I", "J", "finiteness"), "I"),
                 "S": (int, 1), "k": (int, 1), "c": (float, 1.0)},
    "constants": {**COMMON_KEYS,
                  "kind": (_choice("pickands", "piterbarg"), "pickands"),
                  "alpha": (float, 1.0), "d": (float, 1.0),
                  "S": (float, 128.0), "lam": (float, 32.0), "step": (float, 1.0 / 64.0),
                  "n": (int, 10_000),
                  "method": (_choice("dieker-yakir", "definition"), "dieker-yakir"),
                  "block_size": (int, 256)},
    "asymptotics": {**COMMON_KEYS,
                    "corollary": (_choice("3.4", "3.5", "none"), "3.4"),
                    "model": MODEL_KEYS["model"], "H": MODEL_KEYS["H"], **WEIGHT_KEYS,
                    "b": (_floats, (1.0,)), "u": (_floats, (50.0,)),
                    "pickands": (_opt_float, None)},
}


def parse_config_text(text: str, subcommand: str) -> dict:
    """``key = value`` lines (optionally ``#``-prefixed); lines without ``=`` and ``# @`` lines are skipped."""
    schema = SCHEMAS[subcommand]
    out = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("#"):
            line = line[1:].strip()
            if line.startswith("@"):
                continue
        if "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for {subcommand}")
        out[key] = value
    return out


def resolve(subcommand: str, file_values: dict, flag_values: dict) -> dict:
    schema = SCHEMAS[subcommand]
    cfg = {k: default for k, (_, default) in schema.items()}
    for source in (file_values, flag_values):
        for key, raw in source.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} for {subcommand}")
            try:
                cfg[key] = schema[key][0](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    return cfg


def header_lines(subcommand: str, cfg: dict, meta: Optional[dict] = None) -> list[str]:
    lines = [f"# @chisup: {__version__}", f"# @subcommand: {subcommand}"]
    lines += [f"# {k} = {_fmt(cfg[k])}" for k in sorted(cfg)]
    lines.append(f"# @seed: {cfg['seed']}")
    for k, v in (meta or {}).items():
        lines.append(f"# @{k}: {_fmt(v)}")
    return lines


# --- builders ------------------------------------------------------------------------

def _model(cfg):
    from .paths import bridge_model, fbm_model
    return bridge_model() if cfg["model"] == "bridge" else fbm_model(cfg["H"])


def _weight(cfg):
    from .weights import make_weight
    if cfg["weight"] == "one":
        return None
    if cfg["weight"] == "rho-loglog":
        return make_weight("rho-loglog", rho1=cfg["rho1"], rho2=cfg["rho2"])
    return make_weight("fbm-plateau", rho=cfg["rho"], eps=cfg["eps"])


def _experiment(cfg):
    from .chi import BVector
    from .harness import ExperimentConfig
    return ExperimentConfig(_model(cfg), _weight(cfg), BVector(cfg["b"]), cfg["u"],
                            n_paths=cfg["n_paths"], n_points=cfg["n_points"], delta=cfg["delta"],
                            master_seed=cfg["seed"], workers=cfg["workers"], block_size=cfg["block_size"])


def _table(fh, columns, rows) -> None:
    import csv
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])


# --- subcommands ------------------------------------------------------------------------

def cmd_simulate(cfg, out) -> tuple[int, dict]:
    from .harness import empirical_tail
    exp = _experiment(cfg)
    rep = empirical_tail(exp)
    meta = {k: v for k, v in rep.metadata.items() if k in ("statistic", "scenario")}
    buf = io.StringIO()
    rep.write_csv(buf)
    return EXIT_OK, {"meta": meta, "body": buf.getvalue()}


def cmd_verify(cfg, out) -> tuple[int, dict]:
    from .harness import borell_bound, double_sup_bound
    exp = _experiment(cfg)
    bor = borell_bound(exp)
    dbl = double_sup_bound(exp, tuple(cfg["S1"]), tuple(cfg["S2"]))
    rows = []
    for rep in (bor, dbl):
        for r in rep.rows:
            rows.append((rep.kind, r.u, r.bound, int(r.applicable), int(r.testable), r.count, r.p_hat,
                         r.wilson_ci_lo, r.wilson_ci_hi, int(r.holds)))
    buf = io.StringIO()
    _table(buf, ("check", "u", "bound", "applicable", "testable", "count", "p_hat", "wilson_ci_lo", "wilson_ci_hi", "holds"),
           rows)
    ok = bor.holds and dbl.holds
    meta = {"borell_Q": bor.Q, "borell_sigma2": bor.sigma2, "double_Q": dbl.Q,
            "double_sigma2": dbl.sigma2, "eta": dbl.extra["eta"], "all_hold": ok}
    return (EXIT_OK if ok else EXIT_CHECK), {"meta": meta, "body": buf.getvalue()}


def cmd_criteria(cfg, out) -> tuple[int, dict]:
    from . import criteria
    model, w = _model(cfg), _weight(cfg)
    if w is None:
        raise ConfigError("criteria need a weight other than 'one'")
    if cfg["test"] == "I":
        v = criteria.eval_I(model, w, cfg["S"], cfg["k"])
        rows = [("I", v.classification, v.integral_value, v.level or "", "", v.reason)]
    elif cfg["test"] == "J":
        v = criteria.eval_J(model, w, cfg["S"], cfg["c"])
        rows = [("J", v.classification, v.integral_value, v.level or "", cfg["c"], v.reason)]
    else:
        fr = criteria.finiteness_verdict(model, w, cfg["S"])
        rows = [("J", v.classification, v.integral_value, v.level or "", c, v.reason) for c, v in fr.verdicts]
        rows.append(("finiteness", fr.verdict, "", "", "" if fr.c is None else fr.c, "c ladder"))
    buf = io.StringIO()
    _table(buf, ("test", "classification", "integral_value", "level", "c", "reason"), rows)
    return EXIT_OK, {"meta": {}, "body": buf.getvalue()}


def cmd_constants(cfg, out) -> tuple[int, dict]:
    from . import constants as K
    if cfg["kind"] == "pickands":
        est = K.pickands(cfg["alpha"], S=cfg["S"], step=cfg["step"], n=cfg["n"], seed=cfg["seed"],
                         method=cfg["method"], workers=cfg["workers"], block_size=cfg["block_size"])
        ref = K.known_constant(cfg["alpha"])
        d = ""
    else:
        est = K.piterbarg(cfg["alpha"], cfg["d"], lam=cfg["lam"], step=cfg["step"], n=cfg["n"],
                          seed=cfg["seed"], workers=cfg["workers"], block_size=cfg["block_size"])
        ref = K.known_piterbarg(cfg["alpha"], cfg["d"])
        d = cfg["d"]
    buf = io.StringIO()
    _table(buf, ("kind", "alpha", "d", "value", "std_error", "reference", "unstable"),
           [(cfg["kind"], cfg["alpha"], d, est.value, est.std_error, "" if ref is None else ref,
             int(est.unstable))])
    return EXIT_OK, {"meta": {}, "body": buf.getvalue()}


def cmd_asymptotics(cfg, out) -> tuple[int, dict]:
    from .asymptotics import corollary_evaluators, evaluate
    from .chi import BVector
    b = BVector(cfg["b"])
    rows = []
    if cfg["corollary"] == "none":
        w = _weight(cfg)
        if w is None:
            raise ConfigError("asymptotics need a weight other than 'one'")
        ev = evaluate(_model(cfg), w, b, pickands=cfg["pickands"])
        for u in cfg["u"]:
            lv = ev.log_value(u)
            rows.append((u, math.exp(lv), lv, "", ""))
    else:
        if cfg["corollary"] == "3.4":
            params = {"rho1": cfg["rho1"], "rho2": cfg["rho2"], "b": b}
        else:
            params = {"rho": cfg["rho"], "eps": cfg["eps"], "H": cfg["H"], "b": b, "pickands": cfg["pickands"]}
        closed, ev = corollary_evaluators(cfg["corollary"], **params)
        for u in cfg["u"]:
            lc = closed(u)
            lv = ev.log_value(u)
            rows.append((u, math.exp(lc), lc, math.exp(lv), abs(math.expm1(lv - lc))))
    buf = io.StringIO()
    _table(buf, ("u", "value", "log_value", "theorem_value", "rel_diff"), rows)
    return EXIT_OK, {"meta": {"scenario": ev.scenario}, "body": buf.getvalue()}


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "criteria": cmd_criteria,
            "constants": cmd_constants, "asymptotics": cmd_asymptotics}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chisup", description="Suprema of weighted chi-square processes.")
    ap.add_argument("--version", action="version", version=f"chisup {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file; CSV outputs are accepted")
        p.add_argument("--out", help="output CSV (default: stdout)")
        p.add_argument("--timing", action="store_true", help="record the runtime in the header")
        for key, (parser, _) in schema.items():
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            nargs = "+" if parser is _floats else None
            p.add_argument(*flags, dest=key, nargs=nargs, default=None)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARAM
    name = ns.subcommand
    try:
        file_values = {}
        if ns.config:
            with open(ns.config, encoding="utf-8") as fh:
                file_values = parse_config_text(fh.read(), name)
        flags = {}
        for key in SCHEMAS[name]:
            val = getattr(ns, key)
            if val is not None:
                flags[key] = " ".join(val) if isinstance(val, list) else val
        cfg = resolve(name, file_values, flags)
        t0 = time.perf_counter()
        code, res = COMMANDS[name](cfg, ns.out)
        meta = dict(res["meta"])
        if ns.timing:
            meta["runtime_s"] = round(time.perf_counter() - t0, 3)
        text = "\n".join(header_lines(name, cfg, meta)) + "\n" + res["body"]
    except (NumericalError, ArithmeticError) as exc:
        print(f"chisup: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ChisupError, ValueError, OSError) as exc:
        print(f"chisup: {exc}", file=sys.stderr)
        return EXIT_PARAM
    if ns.out:
        with open(ns.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())

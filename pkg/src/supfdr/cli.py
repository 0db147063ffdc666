"""Command-line interface: ``run``, ``simulate``, ``bench`` and ``verify``."""

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .core import ConfigError, DomainError, GammaSequence, Observation, ParseError
from .simlab import (
    E_FAMILY,
    P_FAMILY,
    PROCEDURES,
    BoundedHoeffdingConfig,
    GaussianLocalConfig,
    bench,
    make_procedure,
    run_trials,
)

SCHEMA = "supfdr-decisions/1"
OUTPUT_COLUMNS = ("t", "alpha", "decision", "num_rejections", "wealth")

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


# -- csv input -------------------------------------------------------------


def _parse_float(text, what, row):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{what} {text!r} is not a number", row=row) from None
    if math.isnan(v):
        raise ParseError(f"{what} is NaN", row=row)
    return v


def ingest_csv(path, evidence="e", deadline_column="deadline"):
    """Read an evidence stream; returns a list of :class:`Observation`.

    Required columns are ``index`` and ``e_value`` (or ``p_value``);
    ``is_null`` and the deadline column are optional. Indices must run
    ``1, 2, 3, ...``. Row numbers in errors count the header as row 1.
    """
    col = "e_value" if evidence == "e" else "p_value"
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(rows)
        fields = reader.fieldnames or []
        if "index" not in fields or col not in fields:
            raise ParseError(f"header must contain 'index' and '{col}', got {fields}", row=1)
        for row_no, rec in enumerate(reader, start=2):
            idx_text = (rec.get("index") or "").strip()
            try:
                idx = int(idx_text)
            except ValueError:
                raise ParseError(f"index {idx_text!r} is not an integer", row=row_no) from None
            if idx != len(out) + 1:
                raise ParseError(f"expected index {len(out) + 1}, got {idx}", row=row_no)
            raw = (rec.get(col) or "").strip()
            if raw == "":
                raise ParseError(f"missing {col}", row=row_no)
            v = _parse_float(raw, col, row_no)
            if evidence == "e" and v < 0:
                raise ParseError(f"negative e-value {v}", row=row_no)
            if evidence == "p" and not 0.0 <= v <= 1.0:
                raise ParseError(f"p-value {v} outside [0, 1]", row=row_no)
            nul = (rec.get("is_null") or "").strip().lower()
            if nul in _TRUE:
                is_null = True
            elif nul in _FALSE:
                is_null = False
            elif nul == "":
                is_null = None
            else:
                raise ParseError(f"is_null {nul!r} is not a boolean", row=row_no)
            dl_text = (rec.get(deadline_column) or "").strip() if deadline_column else ""
            deadline = None
            if dl_text and dl_text.lower() not in ("inf", "nan"):
                d = _parse_float(dl_text, "deadline", row_no)
                if d != int(d) or d < idx:
                    raise ParseError(f"deadline {dl_text} must be an integer >= index {idx}", row=row_no)
                deadline = int(d)
            kw = {"e_value": v} if evidence == "e" else {"p_value": v}
            out.append(Observation(index=idx, is_null=is_null, deadline=deadline, **kw))
    return out


def write_observations(path, observations):
    """Inverse of :func:`ingest_csv`; floats are written with ``repr`` so they round-trip."""
    evidence = "e" if not observations or observations[0].e_value is not None else "p"
    col = "e_value" if evidence == "e" else "p_value"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("index", col, "is_null", "deadline"))
        for o in observations:
            w.writerow((
                o.index,
                repr(float(o.evidence)),
                "" if o.is_null is None else int(o.is_null),
                "" if o.deadline is None else o.deadline,
            ))


def read_windows(path):
    """Inclusive ``(start_index, end_index)`` pairs."""
    wins = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            try:
                a, b = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                if row_no == 1:
                    continue
                raise ParseError(f"window {row} is not a pair of integers", row=row_no) from None
            if b < a:
                raise ParseError(f"window end {b} precedes start {a}", row=row_no)
            wins.append((a, b))
    return wins


def load_gamma(spec, tail="zero"):
    """A rule name, or a CSV of ``(t, gamma_t)`` rows continued by ``tail``."""
    if spec is None or not os.path.exists(spec):
        return GammaSequence(spec or "default")
    vals = {}
    with open(spec, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            try:
                t, g = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                if row_no == 1:
                    continue
                raise ParseError(f"gamma row {row} is not (t, gamma_t)", row=row_no) from None
            vals[t] = g
    n = max(vals, default=0)
    if sorted(vals) != list(range(1, n + 1)):
        raise ParseError("gamma file must list t = 1, 2, ... without gaps")
    return GammaSequence(tail, table=[vals[t] for t in range(1, n + 1)], name=os.path.basename(spec))


# -- run ---------------------------------------------------------------------


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(float(v))


def run_stream(procedure, observations, delta=0.1, gamma="default", seed=None):
    """Run a registered procedure; returns the fitted estimator and output rows."""
    est = make_procedure(procedure, delta, gamma, np.random.default_rng(seed))
    x = [o.evidence for o in observations]
    n = len(x)
    if not PROCEDURES[procedure][2]:
        est.fit(np.asarray(x, dtype=float))
        rejected = est.rejected_
        counts = np.cumsum(rejected)
        rows = [(t, "", int(rejected[t - 1]), int(counts[t - 1]), "") for t in range(1, n + 1)]
        return est, rows
    kwargs = {}
    if est.uses_deadlines:
        kwargs["deadlines"] = [math.inf if o.deadline is None else o.deadline for o in observations]
    est.fit(np.asarray(x, dtype=float), **kwargs)
    rec = est.record_
    decisions = rec.decisions
    donation = procedure.startswith(("donation", "randomized"))
    rows = []
    for t in range(1, n + 1):
        rows.append((
            t,
            _fmt(rec.alpha[t - 1]),
            int(decisions[t - 1]),
            int(rec.n_rejections[t - 1]),
            _fmt(rec.wealth[t - 1]) if donation else "",
        ))
    return est, rows


def _final_rejections(est):
    if hasattr(est, "rejection_time_"):
        return [i + 1 for i in np.flatnonzero(est.rejection_time_ > 0)]
    return [i + 1 for i in np.flatnonzero(est.rejected_)]


def count_in_windows(rejected, windows):
    return sum(1 for i in rejected if any(a <= i <= b for a, b in windows))


# -- config plumbing ---------------------------------------------------------


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment; keys use flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


DEFAULTS = {
    "delta": 0.1,
    "gamma": "default",
    "gamma_tail": "zero",
    "seed": 0,
    "m_grid": "750,1500,3000",
    "output": "-",
    "deadlines": "deadline",
    "m": 200,
    "pi1": 0.3,
    "mu1": 3.0,
    "generator": "gaussian",
    "jobs": 1,
}

_CASTS = {"delta": float, "seed": int, "trials": int, "m": int, "pi1": float, "mu1": float, "jobs": int}


def _resolve(args):
    """Merge defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config_file(args.config))
    for k, v in vars(args).items():
        if v is not None:
            cfg[k] = v
    for k, cast in _CASTS.items():
        if k in cfg and cfg[k] is not None:
            try:
                cfg[k] = cast(cfg[k])
            except ValueError:
                raise ConfigError(f"{k} must be {cast.__name__}, got {cfg[k]!r}") from None
    return cfg


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def cmd_run(cfg):
    procedure = cfg.get("procedure") or "elond"
    if procedure not in PROCEDURES:
        raise ConfigError(f"unknown procedure {procedure!r}")
    kind = PROCEDURES[procedure][1]
    evidence = cfg.get("evidence") or kind
    if evidence != kind:
        raise ConfigError(f"procedure {procedure} consumes {kind}-values, not {evidence}-values")
    if not cfg.get("input"):
        raise ConfigError("run needs --input")
    obs = ingest_csv(cfg["input"], evidence, cfg["deadlines"])
    gamma = load_gamma(cfg["gamma"], cfg["gamma_tail"])
    est, rows = run_stream(procedure, obs, cfg["delta"], gamma, cfg["seed"])
    fh, close = _open_out(cfg["output"])
    try:
        fh.write(f"# {SCHEMA} procedure={procedure} delta={cfg['delta']} gamma={gamma.name}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OUTPUT_COLUMNS)
        w.writerows(rows)
        if cfg.get("windows"):
            wins = read_windows(cfg["windows"])
            rej = _final_rejections(est)
            fh.write(
                f"# windows: rejections_in_windows={count_in_windows(rej, wins)} "
                f"total_rejections={len(rej)} windows={len(wins)}\n"
            )
    finally:
        if close:
            fh.close()
    return 0


def _procedure_list(text, default):
    names = default if not text else [s.strip() for s in str(text).split(",") if s.strip()]
    for n in names:
        if n not in PROCEDURES:
            raise ConfigError(f"unknown procedure {n!r}")
    return list(names)


def cmd_simulate(cfg):
    procs = _procedure_list(cfg.get("procedure"), list(E_FAMILY) + list(P_FAMILY))
    if cfg["generator"] == "gaussian":
        gen = GaussianLocalConfig(m=cfg["m"], pi1=cfg["pi1"], mu1=cfg["mu1"], delta=cfg["delta"], seed=cfg["seed"])
    elif cfg["generator"] == "hoeffding":
        gen = BoundedHoeffdingConfig(m=cfg["m"], pi1=cfg["pi1"], delta=cfg["delta"], seed=cfg["seed"])
    else:
        raise ConfigError(f"unknown generator {cfg['generator']!r}")
    rep = run_trials(procs, gen, cfg.get("trials", 200), seed=cfg["seed"], gamma=load_gamma(cfg["gamma"], cfg["gamma_tail"]),
                     n_jobs=cfg["jobs"])
    fh, close = _open_out(cfg["output"])
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("procedure", "setting", "metric", "mean", "se"))
        w.writerows(rep.rows())
    finally:
        if close:
            fh.close()
    return 0


def cmd_bench(cfg):
    procs = _procedure_list(cfg.get("procedure"), ["donation-elond", "closed-elond"])
    try:
        grid = [int(s) for s in str(cfg["m_grid"]).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"m-grid must be comma-separated integers, got {cfg['m_grid']!r}") from None
    rows = bench(procs, grid, n_trials=cfg.get("trials", 3), seed=cfg["seed"], pi1=cfg["pi1"], delta=cfg["delta"])
    fh, close = _open_out(cfg["output"])
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("procedure", "m", "mean_seconds", "se_seconds"))
        w.writerows(rows)
    finally:
        if close:
            fh.close()
    return 0


def cmd_verify(cfg):
    from .verification import run_checks

    ok = True
    for name, passed, detail in run_checks(seed=cfg["seed"], n=cfg.get("trials", 20)):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="supfdr", description="Online FDR procedures with SupFDR control.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value file; explicit flags take precedence")
        sp.add_argument("--delta", help="target level in (0, 1]")
        sp.add_argument("--gamma", help="gamma rule name or CSV of (t, gamma_t)")
        sp.add_argument("--gamma-tail", dest="gamma_tail", help="rule for t beyond a gamma file")
        sp.add_argument("--seed", help="master seed")
        sp.add_argument("--output", "-o", help="output path ('-' for stdout)")

    r = sub.add_parser("run", help="run one procedure on a CSV stream")
    common(r)
    r.add_argument("--procedure", choices=sorted(PROCEDURES))
    r.add_argument("--input", "-i")
    r.add_argument("--evidence", choices=("e", "p"))
    r.add_argument("--deadlines", help="name of the deadline column")
    r.add_argument("--windows", help="CSV of inclusive (start_index, end_index) windows")

    s = sub.add_parser("simulate", help="Monte Carlo power / sup-FDP study")
    common(s)
    s.add_argument("--procedure", help="comma-separated procedure names")
    s.add_argument("--trials")
    s.add_argument("--m")
    s.add_argument("--pi1")
    s.add_argument("--mu1")
    s.add_argument("--generator", choices=("gaussian", "hoeffding"))
    s.add_argument("--jobs", help="worker processes")

    b = sub.add_parser("bench", help="wall-clock timing over stream lengths")
    common(b)
    b.add_argument("--procedure", help="comma-separated procedure names")
    b.add_argument("--m-grid", dest="m_grid", help="ascending comma-separated lengths")
    b.add_argument("--trials")
    b.add_argument("--pi1")

    v = sub.add_parser("verify", help="cross-check fast paths against oracles")
    common(v)
    v.add_argument("--trials", help="random instances per check")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "bench":
            return cmd_bench(cfg)
        return cmd_verify(cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

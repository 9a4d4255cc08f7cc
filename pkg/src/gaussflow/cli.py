"""Command-line front end.

    gaussflow check          --input model.json [--t T]
    gaussflow te             --input model.json --s S --t T
    gaussflow di             --input model.json --t T
    gaussflow split-x        --input model.json --s S --t T
    gaussflow split-w        --input model.json --s S --t T
    gaussflow oracle-compare --input model.json --s S --t T --oracle-dt DT

Curves go to ``--output`` (stdout by default) as CSV or JSON.  Exit status is
0 on success, 2 when a structural hypothesis fails and 1 for bad input or a
numerical failure; errors are reported as one line on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import measures, oracle
from .errors import (
    GaussFlowError,
    H3Violation,
    H4Violation,
    HypothesisViolation,
    ModelError,
)
from .factor import (
    H2_TOL,
    H5_TOL,
    check_h5,
    initial_factorization,
    noise_factorization,
    three_block_factorization,
)
from .model import Partition2, Partition3, load_model
from .riccati import DEFAULT_STEP

COMMANDS = ("check", "te", "di", "split-x", "split-w", "oracle-compare")
LN2 = math.log(2.0)

__all__ = ["main", "build_parser", "check_hypotheses", "run"]


# -- hypothesis report -----------------------------------------------------------


def _interval_starts(model, horizon):
    return (0.0,) + model.breakpoints_between(0.0, horizon)


def check_hypotheses(model, partition, horizon=None):
    """Evaluate H1-H5 on every coefficient interval up to ``horizon``.

    Returns a list of dicts with keys ``name``, ``passed``, ``residual`` and
    ``detail``.  H3-H5 are reported as skipped for a two-block partition.
    """
    if horizon is None:
        horizon = (model.breakpoints[-1] + 1.0) if model.breakpoints else 1.0
    p2 = partition.two_block if isinstance(partition, Partition3) else partition
    starts = _interval_starts(model, horizon)
    rows = []

    def add(name, passed, residual, detail):
        rows.append({"name": name, "passed": passed, "residual": residual, "detail": detail})

    ranks, h2_res, h2_fail, factors = [], 0.0, None, {}
    for t in starts:
        try:
            nf = noise_factorization(model, p2, t, h2_tol=math.inf)
        except HypothesisViolation:
            ranks.append(0)
            continue
        ranks.append(nf.k)
        factors[t] = nf
        scale = 1.0 + float(np.linalg.norm(np.asarray(model.b(t))[p2.idx1, p2.idx2]))
        if nf.h2_residual > h2_res:
            h2_res = nf.h2_residual
        if nf.h2_residual > H2_TOL * scale and h2_fail is None:
            h2_fail = t
    h1_ok = min(ranks) > 0 and len(set(ranks)) == 1
    add("H1", h1_ok, 0.0, f"rank(a11) per interval = {ranks}")
    if h1_ok:
        detail = "b12 in range(a11)" if h2_fail is None else f"first failure at t={h2_fail:g}"
        add("H2", h2_fail is None, h2_res, detail)
    else:
        add("H2", False, math.nan, "not evaluated (H1 failed)")

    if not isinstance(partition, Partition3):
        for name in ("H3", "H4", "H5"):
            add(name, None, math.nan, "skipped (two-block partition)")
        return rows
    if not (rows[0]["passed"] and rows[1]["passed"]):
        for name in ("H3", "H4", "H5"):
            add(name, False, math.nan, "not evaluated (H1/H2 failed)")
        return rows
    init = initial_factorization(model, p2)
    kts, h4_res, h4_fail = [], 0.0, None
    for t in starts:
        try:
            tb = three_block_factorization(model, partition, t, base=factors[t], init=init)
            kts.append(tb.kt)
            h4_res = max(h4_res, tb.h4_residual, tb.h2_residual_joint)
        except H3Violation:
            kts.append(0)
        except H4Violation as exc:
            kts.append(-1)
            h4_res = max(h4_res, exc.residual)
            if h4_fail is None:
                h4_fail = t
    ranks3 = [k for k in kts if k != -1]
    h3_ok = bool(ranks3) and min(ranks3) > 0 and len(set(ranks3)) == 1
    add("H3", h3_ok, 0.0, f"rank(alpha22) per interval = {kts}")
    if h3_ok:
        detail = "coupling of X~3 solvable" if h4_fail is None else f"fails at t={h4_fail:g}"
        add("H4", h4_fail is None, h4_res, detail)
    else:
        add("H4", False, math.nan, "not evaluated (H3 failed)")
    report = check_h5(model, partition, starts, H5_TOL)
    name, value, when = report.worst()
    where = "" if when is None else f" at t={when:g}"
    add("H5", report.passed, value, f"largest cross term |{name}|{where}")
    return rows


# -- output ------------------------------------------------------------------------


def _fmt(x):
    return "%.12g" % x


def _write_table(columns, names, fmt, metadata, out):
    if fmt == "json":
        doc = {"columns": {k: [float(x) for x in c] for k, c in zip(names, columns)},
               "metadata": metadata}
        out.write(json.dumps(doc, indent=2, sort_keys=True))
        out.write("\n")
        return
    out.write(",".join(names) + "\n")
    for row in zip(*columns):
        out.write(",".join(_fmt(x) for x in row) + "\n")


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# -- commands ----------------------------------------------------------------------


def _partition(args, model, file_partition, need3=False):
    if args.n1 is not None:
        if args.nt2 is not None:
            part = Partition3(args.n1, args.nt2, model.n - args.n1 - args.nt2)
        else:
            part = Partition2(args.n1, model.n - args.n1)
    else:
        part = file_partition
    if part is None:
        raise ModelError("no partition: add one to the model file or pass --n1/--nt2")
    if part.n != model.n:
        raise ModelError(f"partition covers {part.n} coordinates, model has {model.n}")
    if need3 and not isinstance(part, Partition3):
        raise ModelError("split commands need a three-block partition (n1, nt2, nt3)")
    return part


def _need_t(args):
    if args.t is None:
        raise ModelError(f"{args.command} needs --t")
    if args.s > args.t or args.s < 0:
        raise ModelError(f"need 0 <= s <= t, got s={args.s}, t={args.t}")
    return args.t


def _metadata(args, model, partition, grid, rows=None):
    meta = {
        "command": args.command,
        "step": args.step,
        "grid_size": int(len(grid)),
        "units": args.units,
        "s": args.s,
        "t": args.t,
        "partition": list(vars(partition).values()),
    }
    if rows is not None:
        meta["hypotheses"] = {
            r["name"]: {"passed": r["passed"], "residual": _json_safe(r["residual"])}
            for r in rows
        }
    return meta


def run(args, out):
    """Execute a parsed command, writing results to ``out``; returns the exit status."""
    model, file_partition = load_model(args.input)
    need3 = args.command in ("split-x", "split-w")
    partition = _partition(args, model, file_partition, need3)
    scale = 1.0 / LN2 if args.units == "bits" else 1.0

    if args.command == "check":
        rows = check_hypotheses(model, partition, args.t)
        if args.format == "json":
            doc = {r["name"]: {"passed": r["passed"], "residual": _json_safe(r["residual"]),
                               "detail": r["detail"]} for r in rows}
            out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            for r in rows:
                status = {True: "PASS", False: "FAIL", None: "SKIP"}[r["passed"]]
                out.write(f"{r['name']} {status} residual={_fmt(r['residual'])} {r['detail']}\n")
        failed = [r for r in rows if r["passed"] is False]
        if failed:
            r = failed[0]
            raise _CheckFailed(f"{r['name']} violated: residual {_fmt(r['residual'])} "
                               f"({r['detail']})")
        return 0

    t = _need_t(args)
    # JSON metadata always carries the hypothesis residuals
    wants_rows = args.check_hypotheses or args.format == "json"
    rows = check_hypotheses(model, partition, t) if wants_rows else None
    if args.check_hypotheses:
        failed = [r for r in rows if r["passed"] is False]
        if args.command in ("te", "di", "oracle-compare"):
            failed = [r for r in failed if r["name"] in ("H1", "H2")]
        elif args.command == "split-x":
            failed = [r for r in failed if r["name"] != "H5"]
        if failed:
            r = failed[0]
            raise _CheckFailed(f"{r['name']} violated: residual {_fmt(r['residual'])} "
                               f"({r['detail']})")

    if args.command == "te":
        curve = measures.transfer_entropy_curve(model, partition, args.s, t, args.step)
        cols, names = [curve.grid, curve.values * scale], ["t", "T"]
        grid = curve.grid
    elif args.command == "di":
        rate, dinf = measures.di_curves(model, partition, t, args.step)
        cols, names = [rate.grid, rate.values * scale, dinf.values * scale], ["t", "R", "D"]
        grid = rate.grid
    elif need3:
        if args.command == "split-x":
            sc = measures.te_split_x_curve(model, partition, args.s, t, args.step,
                                           variant=args.variant)
        else:
            sc = measures.te_split_w_curve(model, partition, args.s, t, args.step)
        cols = [sc.grid, sc.total * scale, sc.part_2to1 * scale, sc.part_3to1_given2 * scale]
        names = ["t", "total", "part_2to1", "part_3to1_given2"]
        grid = sc.grid
    else:
        cols, names, grid = _oracle_compare(args, model, partition, t, scale)

    meta = _metadata(args, model, partition, grid, rows)
    _write_table(cols, names, args.format, meta, out)
    return 0


def _oracle_compare(args, model, partition, t, scale):
    dt = args.oracle_dt
    chain = oracle.discretize(model, dt, t)
    s_idx, t_idx = round(args.s / dt), round(t / dt)
    disc = oracle.discrete_transfer_entropy_curve(chain, partition, s_idx, t_idx)
    times = np.arange(s_idx, t_idx + 1) * dt
    curve = measures.transfer_entropy_curve(model, partition, args.s, t, args.step)
    cont = np.interp(times, curve.grid, curve.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(cont != 0, np.abs(disc - cont) / np.abs(cont),
                       np.where(disc == 0, 0.0, np.inf))
    cols = [times, cont * scale, disc * scale, rel]
    return cols, ["t", "continuous", "oracle", "rel_error"], times


class _CheckFailed(Exception):
    pass


# -- entry point -------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="model file (JSON)")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--s", type=float, default=0.0, help="window start")
    common.add_argument("--t", type=float, help="window end / horizon")
    common.add_argument("--step", type=float, default=DEFAULT_STEP, help="RK4 step")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--units", choices=("nats", "bits"), default="nats")
    common.add_argument("--bits", dest="units", action="store_const", const="bits",
                        help="shorthand for --units bits")
    common.add_argument("--oracle-dt", type=float, default=1e-3,
                        help="sampling step of the discrete oracle")
    common.add_argument("--check-hypotheses", action="store_true",
                        help="check H1-H5 before computing and record residuals")
    common.add_argument("--n1", type=int, help="size of block X1 (overrides the file)")
    common.add_argument("--nt2", type=int, help="size of block X~2 for three-block runs")
    common.add_argument("--variant", choices=("exact", "direct"), default="exact",
                        help="X-split formula (split-x only)")

    parser = argparse.ArgumentParser(
        prog="gaussflow",
        description="Transfer entropy and directed information of Gaussian diffusions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "report hypotheses H1-H5",
        "te": "transfer entropy curve T(s, .)",
        "di": "rate R and directed information D on [0, t]",
        "split-x": "X-split of T(s, .)",
        "split-w": "W-split of T(s, .)",
        "oracle-compare": "continuous vs discrete-oracle transfer entropy",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.step > 0:
        parser.error("--step must be positive")
    buf = io.StringIO()
    try:
        status = run(args, buf)
    except (_CheckFailed, HypothesisViolation) as exc:
        if args.command == "check":
            _emit(buf, args.output)
        print(f"gaussflow: {exc}", file=sys.stderr)
        return 2
    except (GaussFlowError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"gaussflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    try:
        _emit(buf, args.output)
    except OSError as exc:
        print(f"gaussflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return status


def _emit(buf, path):
    text = buf.getvalue()
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())

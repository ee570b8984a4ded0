"""Command-line front end.

Subcommands: ``fit`` and ``credible`` operate on CSV data files; ``simulate``
and ``compare`` run seeded Monte Carlo experiments from JSON configs;
``oracle`` and ``kappa`` expose the closed-form constants.  Exit codes:
0 success, 2 input error, 3 numeric failure.  Diagnostics go to stderr;
with ``--stdout`` the primary JSON payload is echoed to stdout.  All file
outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile

import numpy as np

from .credible import RadiusSpec, credible_ball, sample_posterior
from .errors import EbsplinesError
from .gcv import gcv_ball_experiment
from .oracles import SignalSpectrum, asymptotic_variances, kappa, oracle_lambda
from .selection import ModelFamily, default_q_grid, fit
from .simlab import Generator, StudyConfig, run_study
from .spectral import design_grid

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-ebs-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_xy_csv(path: str) -> tuple[np.ndarray | None, np.ndarray]:
    """CSV with header ``x,y`` or ``y``; raises EbsplinesError with the
    offending line number on malformed or non-finite input."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise EbsplinesError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EbsplinesError(f"{path}: empty file") from None
        cols = [c.strip().lower() for c in header]
        if cols == ["x", "y"]:
            has_x = True
        elif cols == ["y"]:
            has_x = False
        else:
            raise EbsplinesError(f"{path}: line 1: header must be 'x,y' or 'y'")
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(cols):
                raise EbsplinesError(f"{path}: line {lineno}: expected {len(cols)} fields")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise EbsplinesError(f"{path}: line {lineno}: non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise EbsplinesError(f"{path}: line {lineno}: non-finite value")
            if has_x:
                xs.append(vals[0])
                ys.append(vals[1])
            else:
                ys.append(vals[0])
    if not ys:
        raise EbsplinesError(f"{path}: no data rows")
    x = np.asarray(xs) if has_x else None
    return x, np.asarray(ys)


def _emit(payload: dict, out_path: str | None, args) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        _atomic_write(out_path, text + "\n")
        print(f"wrote {out_path}", file=sys.stderr)
    if getattr(args, "stdout", False) or not out_path:
        print(text)


def _fit_from_args(y: np.ndarray, args):
    grid = design_grid(len(y), args.design)
    family = ModelFamily(grid)
    qgrid = default_q_grid(len(y), q_max=args.qmax, refine=args.qstep)
    if args.qmin > 1:
        qgrid = tuple(q for q in qgrid if q >= args.qmin)
    return grid, fit(family, y, qgrid=qgrid)


def _fit_payload(res) -> dict:
    return {
        "schema_version": 1,
        "lambda_hat": res.lambda_hat,
        "q_hat": res.q_hat,
        "q_star": res.q_star,
        "sigma2_hat": res.sigma2_hat,
        "boundary": bool(res.boundary),
        "per_q": [{"q": d.q, "lambda_hat": d.lambda_hat,
                   "t_q": d.t_q_value, "boundary": bool(d.boundary)}
                  for d in res.selection.per_q],
    }


def _cmd_fit(args) -> int:
    x, y = _read_xy_csv(args.input)
    grid, res = _fit_from_args(y, args)
    xs = x if x is not None else grid.x
    _emit(_fit_payload(res), args.out, args)
    if args.fitted_csv:
        rows = ["x,y,fitted"]
        rows += [f"{xs[i]:.10g},{y[i]:.10g},{res.fitted[i]:.10g}" for i in range(len(y))]
        _atomic_write(args.fitted_csv, "\n".join(rows) + "\n")
        print(f"wrote {args.fitted_csv}", file=sys.stderr)
    return 0


def _cmd_credible(args) -> int:
    x, y = _read_xy_csv(args.input)
    grid, res = _fit_from_args(y, args)
    spec = RadiusSpec(alpha=args.alpha, mc_draws=args.mc_draws, seed=args.seed)
    ball = credible_ball(res, L=args.L, spec=spec)
    payload = ball.to_dict()
    payload["fit"] = _fit_payload(res)
    payload["center_inside"] = bool(ball.contains(ball.center))
    _emit(payload, args.out, args)
    if args.draws > 0 and args.samples_csv:
        # stream disjoint from the radius bank's
        curve_seed = np.random.SeedSequence(entropy=args.seed, spawn_key=(1,))
        curves = sample_posterior(res, args.draws, seed=curve_seed)
        xs = x if x is not None else grid.x
        header = "x," + ",".join(f"s{j+1}" for j in range(args.draws))
        lines = [header]
        for i in range(len(y)):
            lines.append(f"{xs[i]:.10g}," + ",".join(f"{curves[j, i]:.10g}"
                                                     for j in range(args.draws)))
        _atomic_write(args.samples_csv, "\n".join(lines) + "\n")
        print(f"wrote {args.samples_csv}", file=sys.stderr)
    return 0


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise EbsplinesError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EbsplinesError(f"{path}: invalid JSON: {exc}") from exc


def _cmd_simulate(args) -> int:
    d = _load_json(args.config)
    if args.sigma is not None:
        d["sigma"] = args.sigma
    if args.seed is not None:
        d["seed"] = args.seed
    cfg = StudyConfig.from_dict(d)
    report = run_study(cfg)
    _emit(report.to_dict(), args.out, args)
    if args.table:
        _atomic_write(args.table, report.table_csv())
        print(f"wrote {args.table}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    d = _load_json(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    gen = Generator.from_dict(d["generator"])
    spec = RadiusSpec(alpha=float(d.get("alpha", 0.05)),
                      mc_draws=int(d.get("mc_draws", 10_000)),
                      seed=int(d.get("radius_seed", d.get("seed", 0))))
    report = gcv_ball_experiment(
        gen, n=int(d.get("n", 1000)),
        q_choices=tuple(d.get("q_choices", (2.0,))),
        replicates=int(d.get("replicates", 200)),
        spec=spec, sigma=float(d.get("sigma", 0.01)),
        beta=d.get("beta"),
        convention=d.get("design_convention", "midpoint"),
        seed=int(d.get("seed", 0)),
        two_samples=bool(d.get("two_samples", True)))
    _emit(report.to_dict(), args.out, args)
    return 0


def _cmd_oracle(args) -> int:
    gen = Generator(kind=args.generator)
    grid = design_grid(args.n, args.design)
    f = gen.values(grid)
    family = ModelFamily(grid)
    model = family.model(float(args.q))
    spectrum = SignalSpectrum(B=model.basis.forward(f), beta_nominal=gen.beta)
    closed = oracle_lambda(spectrum, args.sigma ** 2, float(args.q), "closed-form")
    numeric = oracle_lambda(spectrum, args.sigma ** 2, float(args.q), "numeric-root")
    var = asymptotic_variances(float(args.q))
    payload = {
        "schema_version": 1,
        "generator": args.generator,
        "n": args.n,
        "q": args.q,
        "sigma": args.sigma,
        "lambda_closed_form": closed.lambda_q,
        "lambda_numeric_root": numeric.lambda_q,
        "derivative_energy": closed.derivative_energy,
        "selector_variance_eb": var.eb,
        "selector_variance_gcv": var.gcv,
        "selector_variance_ratio": var.ratio,
    }
    _emit(payload, args.out, args)
    return 0


def _cmd_kappa(args) -> int:
    payload = {
        "schema_version": 1,
        "q": args.q,
        "m": args.m,
        "l": args.l,
        "kappa": kappa(args.q, args.m, args.l),
    }
    _emit(payload, args.out, args)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ebsplines",
        description="Adaptive empirical Bayesian smoothing splines")
    sub = p.add_subparsers(dest="command", required=True)

    def add_fit_flags(sp):
        sp.add_argument("--qmin", type=int, default=1)
        sp.add_argument("--qmax", type=int, default=None,
                        help="largest order (default: 6, capped at log n)")
        sp.add_argument("--qstep", type=float, default=None,
                        help="refined real-valued order grid spacing")
        sp.add_argument("--design", choices=("midpoint", "right"), default="midpoint")
        sp.add_argument("--stdout", action="store_true",
                        help="echo the JSON payload to stdout")

    sp = sub.add_parser("fit", help="fit a data file")
    sp.add_argument("input")
    sp.add_argument("--out", default=None, help="fit JSON path")
    sp.add_argument("--fitted-csv", default=None)
    add_fit_flags(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("credible", help="fit and build the credible ball")
    sp.add_argument("input")
    sp.add_argument("--out", default=None, help="ball JSON path")
    sp.add_argument("--samples-csv", default=None)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--L", type=float, default=2.0)
    sp.add_argument("--mc-draws", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--draws", type=int, default=0,
                    help="posterior curves written to --samples-csv")
    add_fit_flags(sp)
    sp.set_defaults(func=_cmd_credible)

    sp = sub.add_parser("simulate", help="run a Monte Carlo study from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.add_argument("--table", default=None, help="comparison table CSV path")
    sp.add_argument("--sigma", type=float, default=None, help="override config noise level")
    sp.add_argument("--seed", type=int, default=None, help="override config seed")
    sp.add_argument("--stdout", action="store_true")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("compare", help="GCV-centered vs EB credible-ball coverage")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=None, help="override config seed")
    sp.add_argument("--stdout", action="store_true")
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("oracle", help="oracle smoothing parameter for a generator")
    sp.add_argument("--generator", choices=("f1-spectral", "f2-cosine"),
                    default="f1-spectral")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--q", type=float, default=3.0)
    sp.add_argument("--sigma", type=float, default=0.01)
    sp.add_argument("--design", choices=("midpoint", "right"), default="midpoint")
    sp.add_argument("--out", default=None)
    sp.add_argument("--stdout", action="store_true")
    sp.set_defaults(func=_cmd_oracle)

    sp = sub.add_parser("kappa", help="trace constant kappa_q(m, l)")
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--l", type=int, required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--stdout", action="store_true")
    sp.set_defaults(func=_cmd_kappa)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EbsplinesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

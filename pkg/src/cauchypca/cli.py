"""Command-line entry point: ``cauchypca {fit,simulate,influence}``.

Exit status: 0 success, 2 bad input or arguments, 3 numeric failure,
4 too many failed simulation replications.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cauchy_pca import CauchyPcaConfig, fit_cauchy_pca
from .errors import CauchyPcaError, SimulationAbortError, SingularFisherError
from .influence import VARIANTS, cauchy_if, classical_if, empirical_if_richardson
from .linalg import CovarianceModel, classical_first_pc
from .prep import CenteringSpec, preprocess
from .simulation import METHODS, SIM_CENTERING, SimScenario, run_grid, scenario_grid

logger = logging.getLogger("cauchypca")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_ABORT = 0, 2, 3, 4

CENTER_CHOICES = {"column": "column-median", "spatial": "spatial-median", "none": "none"}
SCALE_CHOICES = {
    "mad": "mad-about-median",
    "mad-mean": "mad-about-mean",
    "medad": "median-abs-dev",
    "none": "none",
}
DEFAULT_ALPHAS = "1,10,100,1000,10000,100000,1000000"
# Richardson step pairs for the finite-contamination check.  The Cauchy pair
# is smaller because its IF is strongly nonlinear in eps at moderate n.
VALIDATE_EPS = {"classical": (0.02, 0.01), "cauchy": (0.004, 0.002)}


class UsageError(Exception):
    """Bad input detected before any computation; maps to exit status 2."""


def fmt(x: float) -> str:
    """17 significant digits, enough for an exact float round trip."""
    return format(float(x), ".17g")


def _parse_float(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v


def read_matrix(path) -> tuple[np.ndarray, list[str] | None]:
    """Parse a numeric CSV; a first row with no numeric cell is a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not UTF-8 text") from None
    # Keep physical line numbers for messages; drop blank lines.
    numbered = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise UsageError(f"{path} contains no data")
    header = None
    first = numbered[0][1]
    if all(_parse_float(c.strip()) is None for c in first):
        header = [c.strip() for c in first]
        numbered = numbered[1:]
    if not numbered:
        raise UsageError(f"{path} has a header but no data rows")
    width = len(header) if header is not None else len(numbered[0][1])
    data = np.empty((len(numbered), width))
    for i, (line, row) in enumerate(numbered):
        if len(row) != width:
            raise UsageError(f"{path}: row {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            v = _parse_float(cell.strip())
            if v is None or not math.isfinite(v):
                raise UsageError(
                    f"{path}: row {line}, column {j + 1}: {cell.strip()!r} is not a finite number"
                )
            data[i, j] = v
    return data, header


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _float_list(text: str, name: str) -> list[float]:
    out = []
    for tok in text.split(","):
        v = _parse_float(tok.strip())
        if v is None or not math.isfinite(v):
            raise UsageError(f"{name}: {tok.strip()!r} is not a finite number")
        out.append(v)
    return out


def _kappa_list(text: str) -> list[float | None]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok in ("none", "-inf"):
            out.append(None)
        else:
            out.extend(_float_list(tok, "kappa"))
    return out


# --- fit -----------------------------------------------------------------


def cmd_fit(args) -> int:
    if args.components < 1:
        raise UsageError(f"--components must be >= 1, got {args.components}")
    if not args.outer_tol > 0:
        raise UsageError("--outer-tol must be > 0")
    X, header = read_matrix(args.input)
    n, p = X.shape
    if n < 3:
        raise UsageError(f"need at least 3 data rows, got {n}")
    if args.components > p:
        raise UsageError(f"--components {args.components} exceeds the {p} columns")
    spec = CenteringSpec(CENTER_CHOICES[args.center], SCALE_CHOICES[args.scale])
    cfg = CauchyPcaConfig(
        k=args.components,
        outer_tol=args.outer_tol,
        max_outer_iters=args.max_iter,
        init_mode="random" if args.init == "random" else "classical-pc",
        seed=args.seed,
    )
    Xp, center, scales = preprocess(X, spec)
    res = fit_cauchy_pca(Xp, cfg)

    prefix = args.out
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    cols = header or [f"x{j + 1}" for j in range(p)]
    write_csv(f"{prefix}.directions.csv", cols, [[fmt(v) for v in u] for u in res.directions])
    write_csv(
        f"{prefix}.params.csv",
        ["mu", "sigma", "iterations", "converged"],
        [
            [fmt(th.mu), fmt(th.sigma), it, str(ok).lower()]
            for th, it, ok in zip(res.params, res.iterations, res.converged)
        ],
    )
    meta = {
        "version": __version__,
        "input": str(args.input),
        "n": n,
        "p": p,
        "components": args.components,
        "center": spec.mode,
        "scale": spec.scale,
        "center_vector": [float(v) for v in center],
        "scale_vector": [float(v) for v in scales],
        "outer_tol_deg": args.outer_tol,
        "max_outer_iters": args.max_iter,
        "init": cfg.init_mode,
        "seed": args.seed,
        "score_tol": "1e-9 * n",
        "all_converged": all(res.converged),
    }
    with open(f"{prefix}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    for j, (ok, it) in enumerate(zip(res.converged, res.iterations), start=1):
        if not ok:
            print(f"warning: component {j} stopped at the {it}-iteration cap", file=sys.stderr)
    print(f"wrote {prefix}.directions.csv, {prefix}.params.csv, {prefix}.meta.json")
    return EXIT_OK


# --- simulate ------------------------------------------------------------

SIM_KEYS = {
    "n", "p", "kappa", "phi", "reps", "seed", "contamination", "shift",
    "eigen_rate", "center", "scale", "iid_outliers", "threads", "out", "timing",
}


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"config {path}: {exc.message.splitlines()[0]}") from None
    values = dict(parser["run"])
    unknown = sorted(set(values) - SIM_KEYS)
    if unknown:
        raise UsageError(f"config {path}: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(sorted(SIM_KEYS))}")
    return values


def _to_int(value, name: str) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {value!r}") from None


def _to_float(value, name: str) -> float:
    v = _parse_float(str(value).strip())
    if v is None or not math.isfinite(v):
        raise UsageError(f"{name} must be a finite number, got {value!r}")
    return v


def _to_bool(value, name: str) -> bool:
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{name} must be true or false, got {value!r}")


def _sim_settings(args) -> dict:
    settings = {
        "n": "100", "p": "100", "kappa": "none", "phi": "0", "reps": "30",
        "seed": "0", "contamination": "0.02", "shift": "50", "eigen_rate": "0.4",
        "center": "column", "scale": "medad", "iid_outliers": "false",
        "threads": None, "out": None, "timing": "false",
    }
    if args.config:
        settings.update(read_config(args.config))
    for key in SIM_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            settings[key] = v
    return settings


def _format_kappa(k) -> str:
    return "none" if k is None else format(k, "g")


def simulation_rows(summaries, timing: bool) -> list[list[str]]:
    rows = []
    for s in summaries:
        for m in METHODS:
            rows.append([
                format(s.scenario.phi_degrees, "g"),
                m,
                _format_kappa(s.scenario.kappa),
                fmt(s.mean_angle[m]),
                fmt(s.mean_runtime[m]) if timing else "NA",
                str(s.reps_used),
            ])
    return rows


def wide_table(summaries) -> str:
    """Aligned text laid out like the published tables: method rows, kappa columns."""
    kappas = list(dict.fromkeys(s.scenario.kappa for s in summaries))
    phis = list(dict.fromkeys(s.scenario.phi_degrees for s in summaries))
    cell = {(s.scenario.phi_degrees, s.scenario.kappa): s for s in summaries}
    head = ["phi", "method"] + [f"k={_format_kappa(k)}" for k in kappas]
    body = []
    for phi in phis:
        for m in METHODS:
            body.append([format(phi, "g"), m] + [f"{cell[phi, k].mean_angle[m]:.2f}" for k in kappas])
    widths = [max(len(r[j]) for r in [head] + body) for j in range(len(head))]
    out = io.StringIO()
    for r in [head] + body:
        out.write("  ".join(c.rjust(w) if j >= 2 else c.ljust(w) for j, (c, w) in enumerate(zip(r, widths))).rstrip())
        out.write("\n")
    return out.getvalue()


def cmd_simulate(args) -> int:
    st = _sim_settings(args)
    center = str(st["center"]).strip()
    scale = str(st["scale"]).strip()
    if center not in CENTER_CHOICES:
        raise UsageError(f"center must be one of {', '.join(CENTER_CHOICES)}, got {center!r}")
    if scale not in SCALE_CHOICES:
        raise UsageError(f"scale must be one of {', '.join(SCALE_CHOICES)}, got {scale!r}")
    kappas = _kappa_list(str(st["kappa"]))
    phis = _float_list(str(st["phi"]), "phi")
    threads = None if st["threads"] is None else _to_int(st["threads"], "threads")
    if threads is not None and threads < 1:
        raise UsageError("threads must be >= 1")
    try:
        base = SimScenario(
            n=_to_int(st["n"], "n"),
            p=_to_int(st["p"], "p"),
            kappa=None,
            reps=_to_int(st["reps"], "reps"),
            seed=_to_int(st["seed"], "seed"),
            contamination=_to_float(st["contamination"], "contamination"),
            shift=_to_float(st["shift"], "shift"),
            eigen_rate=_to_float(st["eigen_rate"], "eigen_rate"),
            centering=CenteringSpec(CENTER_CHOICES[center], SCALE_CHOICES[scale]),
            iid_outliers=_to_bool(st["iid_outliers"], "iid_outliers"),
        )
        grid = scenario_grid(base, kappas, phis)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    timing = _to_bool(st["timing"], "timing")

    summaries = run_grid(grid, threads)
    rows = simulation_rows(summaries, timing)
    header = ["phi", "method", "k", "mean_angle_deg", "mean_runtime_s", "reps_used"]
    if st["out"]:
        Path(st["out"]).parent.mkdir(parents=True, exist_ok=True)
        write_csv(st["out"], header, rows)
    sys.stdout.write(wide_table(summaries))
    failed = sum(s.reps_failed for s in summaries)
    if failed:
        print(f"note: {failed} replication(s) failed and were excluded", file=sys.stderr)
    return EXIT_OK


# --- influence -----------------------------------------------------------


def _sweep_base(X: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Default sweep direction: halfway between ``u`` and the next classical PC."""
    P = np.eye(X.shape[1]) - np.outer(u, u)
    try:
        v, _ = classical_first_pc(X @ P)
    except CauchyPcaError:
        v = P[:, int(np.argmax(np.diag(P)))]
        v = v / np.linalg.norm(v)
    z = u + v
    return z / np.linalg.norm(z)


def cmd_influence(args) -> int:
    X, _ = read_matrix(args.input)
    n, p = X.shape
    if n < 3:
        raise UsageError(f"need at least 3 data rows, got {n}")
    z0 = None
    if args.z is not None:
        z0 = np.array(_float_list(args.z, "--z"))
        if z0.size != p:
            raise UsageError(f"--z has {z0.size} entries but the data have {p} columns")
    if args.z_mode == "point" and z0 is None:
        raise UsageError("give --z, or use --z-mode sweep")
    alphas = _float_list(args.alphas, "--alphas") if args.z_mode == "sweep" else [1.0]

    if args.estimator == "classical":
        model = CovarianceModel.from_sample(X)
        u_hat, _ = classical_first_pc(X)
        params = None
    else:
        res = fit_cauchy_pca(X, CauchyPcaConfig(k=1, outer_tol=1e-9, max_outer_iters=20_000))
        u_hat, params = res.directions[0], res.params[0]
    if z0 is None:
        z0 = _sweep_base(X, u_hat)

    rows = []
    for alpha in alphas:
        z = alpha * z0
        b_norm, singular, if_vec = None, False, None
        if args.estimator == "classical":
            if_vec = classical_if(z, model).if_vector
        else:
            try:
                r = cauchy_if(z, X, u_hat, params, variant=args.variant)
            except SingularFisherError as exc:
                logger.warning("alpha=%g: %s", alpha, exc)
                singular = True
            else:
                b_norm = float(np.linalg.norm(r.b_vector))
                singular = r.singular
                if_vec = r.if_vector
        gap = None
        if args.validate and if_vec is not None:
            emp = empirical_if_richardson(z, X, args.estimator, eps=VALIDATE_EPS[args.estimator])
            denom = float(np.linalg.norm(emp))
            diff = float(np.linalg.norm(if_vec - emp))
            gap = diff / denom if denom > 0 else diff
        rows.append([
            fmt(alpha),
            "NA" if if_vec is None else fmt(np.linalg.norm(if_vec)),
            "NA" if b_norm is None else fmt(b_norm),
            str(singular).lower(),
            "NA" if gap is None else fmt(gap),
        ])
    header = ["alpha", "if_norm", "b_norm", "singular", "rel_gap"]
    if args.out:
        write_csv(args.out, header, rows)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return EXIT_OK


# --- wiring --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cauchypca", description="Cauchy-likelihood robust PCA.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate Cauchy principal directions of a CSV matrix")
    f.add_argument("input", help="numeric CSV, rows are observations; optional header row")
    f.add_argument("-k", "--components", type=int, default=1)
    f.add_argument("--center", choices=list(CENTER_CHOICES), default="column")
    f.add_argument("--scale", choices=list(SCALE_CHOICES), default="mad",
                   help="mad: mean absolute deviation about the median (default); "
                        "mad-mean: about the mean; medad: median absolute deviation")
    f.add_argument("--out", required=True, help="output prefix")
    f.add_argument("--outer-tol", type=float, default=1e-6, help="angle change in degrees")
    f.add_argument("--max-iter", type=int, default=500)
    f.add_argument("--init", choices=["classical", "random"], default="classical")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run the contamination Monte Carlo")
    s.add_argument("--config", help="flat key = value file; flags override it")
    s.add_argument("--n", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--kappa", help='comma list of outlier log-norms, "none" for no outliers')
    s.add_argument("--phi", help="comma list of outlier angles in degrees")
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--contamination", type=float)
    s.add_argument("--shift", type=float)
    s.add_argument("--eigen-rate", dest="eigen_rate", type=float)
    s.add_argument("--center", choices=list(CENTER_CHOICES))
    s.add_argument("--scale", choices=list(SCALE_CHOICES),
                   help=f"default {[k for k, v in SCALE_CHOICES.items() if v == SIM_CENTERING.scale][0]}")
    s.add_argument("--iid-outliers", dest="iid_outliers", action="store_true", default=None)
    s.add_argument("--threads", type=int, help="worker processes (default: $CPCA_THREADS or all cores)")
    s.add_argument("--timing", action="store_true", default=None,
                   help="fill mean_runtime_s (makes output run-dependent)")
    s.add_argument("--out", help="write the long-form CSV here")
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("influence", help="evaluate influence functions of the first direction")
    i.add_argument("input")
    i.add_argument("--z", help="comma-separated point (or sweep direction)")
    i.add_argument("--z-mode", choices=["point", "sweep"], default="point")
    i.add_argument("--estimator", choices=["classical", "cauchy"], default="cauchy")
    i.add_argument("--variant", choices=list(VARIANTS), default="derived")
    i.add_argument("--alphas", default=DEFAULT_ALPHAS, help="scalings used by --z-mode sweep")
    i.add_argument("--validate", action="store_true", help="add the finite-contamination gap")
    i.add_argument("--out", help="also write the table to this CSV")
    i.set_defaults(func=cmd_influence)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except CauchyPcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

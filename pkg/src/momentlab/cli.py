"""Command-line entry point: ``momentlab <subcommand>``.

Every run writes its data files plus ``manifest.json`` into the ``--out``
directory. Files are written to a temporary name and renamed into place.
Exit codes: 0 success, 1 a verification check failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import mpmath
import numpy as np

from .arith import mod_inverse
from .delta import build_expansion, delta_eval
from .errors import InsufficientData, MomentLabError
from .expsums import (
    C_bruteforce,
    C_factored,
    CharSumParams,
    offdiag_char_sum_bruteforce,
    offdiag_char_sum_factored,
)
from .gl3 import GL3Form, VoronoiWeight, l_value_afe, voronoi_lhs, voronoi_rhs
from .moment import MomentCurve, exponent_fit, moment_curve
from .oscillatory import (
    Bump,
    PhaseDescriptor,
    bky_main_term,
    phase_J,
    phase_poisson_h,
    phase_voronoi_m,
    phase_voronoi_n,
    quad_oscillatory_1d,
)
from .suites import SUITES, run_suite

PRECISIONS = {
    # quadrature / AFE tolerances and mpmath digits per backend
    "double": {"afe_tol": 1e-6, "quad_tol": 1e-10, "dps": 15},
    "extended": {"afe_tol": 1e-9, "quad_tol": 1e-13, "dps": 30},
}


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ output

def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


class Run:
    """Collects the files of one invocation and writes the manifest last."""

    def __init__(self, args: argparse.Namespace):
        self.out = Path(args.out)
        self.args = args
        self.files: list[str] = []
        self.passed = 0
        self.failed = 0
        self.extra: dict = {}
        self.start = time.perf_counter()

    def write(self, name: str, text: str) -> None:
        _atomic_write(self.out / name, text)
        self.files.append(name)

    def finish(self) -> None:
        echo = {k: v for k, v in vars(self.args).items() if k != "func"}
        manifest = {
            "subcommand": self.args.command,
            "parameters": echo,
            "precision": self.args.precision,
            "version": _version(),
            "wall_time_s": round(time.perf_counter() - self.start, 3),
            "passed": self.passed,
            "failed": self.failed,
            "files": self.files,
            **self.extra,
        }
        _atomic_write(self.out / "manifest.json", _json_text(manifest))


# ----------------------------------------------------------------- parsing

def _load_params(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read parameters from {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("parameter file must hold a JSON object")
    return obj


def _grid(spec: str, geometric: bool = False) -> np.ndarray:
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError(f"grid must look like a:b:n, got {spec!r}") from None
    if n < 1 or (geometric and (a <= 0 or b <= 0)):
        raise ConfigError(f"invalid grid {spec!r}")
    return np.geomspace(a, b, n) if geometric else np.linspace(a, b, n)


def _form(model: str, coeffs: str | None, bound: int) -> GL3Form:
    if model == "tau3":
        return GL3Form.tau3(bound)
    if coeffs is None:
        raise ConfigError("--model file needs --coeffs PATH")
    try:
        return GL3Form.from_file(coeffs)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load coefficients from {coeffs}: {exc}") from None


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -------------------------------------------------------------- subcommands

def cmd_verify(args, run: Run) -> int:
    checks = run_suite(args.suite, args.seed)
    run.passed = sum(c.passed for c in checks)
    run.failed = len(checks) - run.passed
    run.extra["checks"] = [vars(c) for c in checks]
    rows = [(c.suite, c.tag, int(c.passed), c.detail) for c in checks]
    run.write("checks.csv", _csv_text(["suite", "check", "passed", "detail"], rows))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.suite}/{c.tag} {c.detail}")
    return 0 if run.failed == 0 else 1


def cmd_charsum(args, run: Run) -> int:
    if args.grid is not None:
        # the factored form needs gcd(q1, q2) | m
        inst = [CharSumParams(q1, q2, h1, h2, h2p, k * math.gcd(q1, q2))
                for q1 in range(1, args.grid + 1) for q2 in range(1, args.grid // q1 + 1)
                for h1, h2, h2p in ((1, 1, 1), (1, 2, 3)) for k in (0, 1, -2)
                if math.gcd(h1, q1) == 1 and math.gcd(h2, q2) == 1 and math.gcd(h2p, q2) == 1]
    else:
        try:
            inst = [CharSumParams(args.q1, args.q2, args.h1, args.h2, args.h2p, args.m)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    rows = []
    for p in inst:
        if args.u1t is not None:
            brute = C_bruteforce(p, args.u1t).value
            fact = C_factored(p, args.u1t)[0].value
        else:
            brute = offdiag_char_sum_bruteforce(p).value
            fact = offdiag_char_sum_factored(p).value
        diff = abs(brute - fact)
        run.passed += diff < 1e-8
        run.failed += diff >= 1e-8
        rows.append((p.q1, p.q2, p.h1, p.h2, p.h2p, p.m, brute.real, brute.imag, fact.real, fact.imag, diff))
    run.write("charsum.csv", _csv_text(["q1", "q2", "h1", "h2", "h2p", "m", "brute_re", "brute_im",
                                        "factored_re", "factored_im", "abs_diff"], rows))
    return 0


def cmd_delta(args, run: Run) -> int:
    try:
        exp = build_expansion(args.Q)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    lim = int(args.Q**2 // 4)
    if args.n_range is None:
        lo, hi = -lim, lim
    else:
        try:
            lo, hi = (int(x) for x in args.n_range.split(":"))
        except ValueError:
            raise ConfigError("--n-range must look like a:b") from None
    if max(abs(lo), abs(hi)) > args.Q**2 / 2:
        raise ConfigError("--n-range exceeds Q^2/2")
    rows = []
    for n in range(lo, hi + 1):
        v = delta_eval(n, exp)
        err = abs(v - (n == 0))
        run.passed += err < 1e-8
        run.failed += err >= 1e-8
        rows.append((n, v, err))
    run.write("delta.csv", _csv_text(["n", "value", "abs_error"], rows))
    return 0


def _quadratic(lam: float, c: float = 0.0) -> PhaseDescriptor:
    g = Bump(-1.0, 1.0)
    return PhaseDescriptor(lambda x: lam * (x - c) ** 2, g, (-1.0, 1.0),
                           lambda x: 2 * lam * (x - c), lambda x: 2 * lam + 0 * x,
                           theta_f=2 * lam, omega_g=g.scale)


FAMILIES = {
    "quadratic": _quadratic,
    "voronoi-m": phase_voronoi_m,
    "voronoi-n": phase_voronoi_n,
    "poisson-h": phase_poisson_h,
    "J": phase_J,
}


def cmd_phases(args, run: Run) -> int:
    import warnings

    kw = _load_params(args.params)
    try:
        made = FAMILIES[args.family](**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for {args.family}: {exc}") from None
    data = None if isinstance(made, PhaseDescriptor) else made
    desc = made if data is None else data.descriptor
    tol = PRECISIONS[args.precision]["quad_tol"]
    oracle = quad_oscillatory_1d(desc, tol)
    report = {"family": args.family, "params": kw, "oracle": oracle.value, "oracle_err": oracle.err,
              "theta_f": desc.theta_f}
    if data is not None:
        report.update(in_window=data.in_window, window=data.window)
    try:
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            main = bky_main_term(desc, x0=None if data is None else data.x0)
        rel = abs(main.value - oracle.value) / abs(oracle.value)
        report.update(main_term=main.value, relative_error=rel, x0=main.flags["x0"],
                      f_x0=main.flags["f_x0"], f2_x0=main.flags["f2_x0"],
                      conditions=main.flags["conditions"])
    except MomentLabError as exc:  # no stationary point in the support
        report.update(main_term=None, relative_error=None, x0=None, f_x0=None, f2_x0=None,
                      conditions={"ok": False, "reason": str(exc)})
    run.write("phases.json", _json_text(report))
    mt = report["main_term"]
    row = (args.family, "" if report["x0"] is None else report["x0"],
           "" if mt is None else mt.real, "" if mt is None else mt.imag,
           oracle.value.real, oracle.value.imag,
           "" if report["relative_error"] is None else report["relative_error"],
           int(report["conditions"]["ok"]))
    run.write("phases.csv", _csv_text(["family", "x0", "main_re", "main_im", "oracle_re", "oracle_im",
                                       "relative_error", "conditions_ok"], [row]))
    return 0


def cmd_afe(args, run: Run) -> int:
    kw = _load_params(args.params)
    if args.t_grid is not None:
        ts = _grid(args.t_grid)
    elif "t" in kw:
        ts = np.atleast_1d(np.asarray(kw["t"], dtype=np.float64))
    else:
        raise ConfigError("give --t-grid or a parameter file with a 't' list")
    form = _form(args.model, args.coeffs, int(kw.get("table", 2 * 10**6)))
    tol = PRECISIONS[args.precision]["afe_tol"]

    def one(t):
        return l_value_afe(float(t), form, float(kw.get("length_factor", 1.0)), tol=tol).value

    try:
        vals = _map(one, ts, args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [(t, v.real, v.imag, abs(v) ** 2) for t, v in zip(ts, vals)]
    run.write("afe.csv", _csv_text(["t", "re_L", "im_L", "abs_L_squared"], rows))
    return 0


def cmd_voronoi(args, run: Run) -> int:
    kw = _load_params(args.params)
    qs = [int(q) for q in np.atleast_1d(kw.get("q", [1, 2, 3]))]
    Ys = [float(y) for y in np.atleast_1d(kw.get("Y", [500.0]))]
    if min(qs) < 1 or min(Ys) <= 0:
        raise ConfigError("q and Y must be positive")
    form = _form(args.model, args.coeffs, int(kw.get("table", 2 * int(2 * max(Ys)) + 10)))
    jobs = []
    for q in qs:
        units = [a for a in range(1, q + 1) if math.gcd(a, q) == 1]
        jobs += [(q, a, Y) for a in np.atleast_1d(kw.get("a", units)) for Y in Ys
                 if math.gcd(int(a), q) == 1]

    def one(job):
        q, a, Y = job
        psi = VoronoiWeight(Y)
        abar = mod_inverse(int(a), q) if q > 1 else 0
        return voronoi_lhs(q, abar, psi, form), voronoi_rhs(q, int(a), psi, form)

    res = _map(one, jobs, args.threads)
    rows = []
    for (q, a, Y), (lhs, rhs) in zip(jobs, res):
        rel = abs(lhs - rhs) / abs(lhs)
        run.passed += rel < 1e-3
        run.failed += rel >= 1e-3
        rows.append((q, int(a), Y, lhs.real, lhs.imag, rhs.real, rhs.imag, rel))
    run.write("voronoi.csv", _csv_text(["q", "a", "Y", "lhs_re", "lhs_im", "rhs_re", "rhs_im",
                                        "relative_gap"], rows))
    return 0


def cmd_moment(args, run: Run) -> int:
    Ts = _grid(args.T_grid, geometric=True)
    form = _form(args.model, args.coeffs, 10**4)
    curves = _map(lambda T: moment_curve([T], form, args.resolution).points[0], Ts, args.threads)
    rows = [(p.T, p.value, p.err) for p in curves]
    run.write("moment.csv", _csv_text(["T", "M", "err"], rows))
    try:
        fit = exponent_fit(MomentCurve(tuple(curves)))
        body = {"slope": fit.slope, "stderr": fit.stderr, "intercept": fit.intercept}
    except InsufficientData as exc:
        body = {"slope": None, "stderr": None, "intercept": None, "reason": str(exc)}
    body["config"] = {"T_grid": args.T_grid, "model": args.model, "coeffs": args.coeffs,
                      "resolution": args.resolution, "precision": args.precision}
    run.write("fit.json", _json_text(body))
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentlab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    p.add_argument("--suite", required=True, choices=[*SUITES, "all"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("charsum", parents=[common], help="factored vs brute-force character sums")
    for name, default in (("q1", 1), ("q2", 1), ("h1", 1), ("h2", 1), ("h2p", 1), ("m", 0)):
        p.add_argument(f"--{name}", type=int, default=default)
    p.add_argument("--u1t", type=int, default=None, help="compare the C decomposition at this u1~")
    p.add_argument("--grid", type=int, default=None, help="all instances with q1 q2 <= GRID")
    p.set_defaults(func=cmd_charsum)

    p = sub.add_parser("delta", parents=[common], help="delta identity over a range of n")
    p.add_argument("--Q", type=float, required=True)
    p.add_argument("--n-range", default=None, help="a:b, default |n| <= Q^2/4")
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("phases", parents=[common], help="stationary-phase report for one family")
    p.add_argument("--family", required=True, choices=list(FAMILIES))
    p.add_argument("--params", required=True, help="JSON file of keyword arguments")
    p.set_defaults(func=cmd_phases)

    for name, fn, helptext in (("afe", cmd_afe, "L(1/2 + it) on a grid of t"),
                               ("voronoi", cmd_voronoi, "both sides of the Voronoi formula")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--params", default=None, help="JSON parameter file")
        p.add_argument("--model", choices=["tau3", "file"], default="tau3")
        p.add_argument("--coeffs", default=None, help="coefficient file for --model file")
        if name == "afe":
            p.add_argument("--t-grid", default=None, help="a:b:n, linear")
        p.set_defaults(func=fn)

    p = sub.add_parser("moment", parents=[common], help="second-moment curve and exponent fit")
    p.add_argument("--T-grid", required=True, help="a:b:n, geometric")
    p.add_argument("--model", choices=["tau3", "file"], default="tau3")
    p.add_argument("--coeffs", default=None)
    p.add_argument("--resolution", type=float, default=1.0)
    p.set_defaults(func=cmd_moment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.precision = os.environ.get("MOMENTLAB_PRECISION", "double")
    if args.precision not in PRECISIONS:
        print(f"momentlab: MOMENTLAB_PRECISION must be one of {sorted(PRECISIONS)}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("momentlab: --threads must be positive", file=sys.stderr)
        return 2
    mpmath.mp.dps = PRECISIONS[args.precision]["dps"]
    run = Run(args)
    try:
        code = args.func(args, run)
    except (ConfigError, MomentLabError) as exc:
        if isinstance(exc, MomentLabError) and not isinstance(exc, ValueError):
            raise
        print(f"momentlab: {exc}", file=sys.stderr)
        return 2
    run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())

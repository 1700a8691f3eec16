"""Command-line entry point.

Exit codes for ``decide``: 0 Separable, 1 Entangled, 2 Border,
3 BudgetExhausted.  Every subcommand uses 64 for usage errors, 65 for invalid
input data and 74 for I/O failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .config import DEFAULTS, MODES, ConfigError, make_config
from .dps import DpsConfig, ppt_check, run_dps
from .enumeration import iter_products
from .hull import (
    barycentric_membership,
    facet_sign_membership,
    growing_hull_check,
)
from .linalg import DimensionError
from .scheduler import run
from .states import (
    ProductState,
    StateFormatError,
    StateValidationError,
    bell,
    isotropic,
    max_mixed,
    random_rational_separable,
    read_state,
    werner,
    write_state,
)

EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_IO = 74


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# argument types; ranges are checked before any computation starts


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _dim(text):
    v = _positive_int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("local dimensions must be >= 2")
    return v


def _open_unit(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {v}")
    return v


def _unit(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


# ---------------------------------------------------------------------------
# I/O helpers


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_state(path: str):
    return read_state(_read_text(path))


def _emit(text: str, out: str | None = None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_decide(args) -> int:
    rho = _load_state(args.state)
    cfg = make_config(
        eta=args.eta,
        budget=args.budget,
        mode=args.mode,
        dps_level=args.dps_level,
        hull_tol=args.hull_tol,
    )
    verdict = run(rho, cfg)
    if args.json:
        _emit(verdict.dumps() + "\n")
    else:
        lines = [f"verdict: {verdict.kind}", f"iterations: {verdict.steps['iterations']}"]
        cert = verdict.certificate
        if verdict.kind == "Entangled":
            lines.append(f"certificate: {cert.get('label')} (min PT eigenvalue {cert.get('min_eigenvalue', 'n/a')})")
        elif verdict.kind == "Separable":
            lines.append(f"certificate: {cert['atom_count']} product atoms, residual {cert['residual']:.3e}")
        elif verdict.kind == "Border":
            lines.append(f"border band: eta = {cert['eta']} (f1 at step {cert['f1_step']}, f2 at step {cert['f2_step']})")
        _emit("\n".join(lines) + "\n")
    return verdict.exit_code


def cmd_ppt(args) -> int:
    rho = _load_state(args.state)
    res = ppt_check(rho)
    if args.json:
        _emit(_dump({"result": "PPT" if res.ppt else "NPT", **res.to_json()}))
    else:
        _emit(f"{'PPT' if res.ppt else 'NPT'}: min PT eigenvalue {res.min_eigenvalue:.12g}\n")
    return 0


def cmd_dps(args) -> int:
    rho = _load_state(args.state)
    try:
        cfg = DpsConfig(level=args.level, impose_ppt_on_extension=args.impose_ppt, max_iterations=args.max_iter)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out, history = run_dps(rho, cfg)
    payload = {
        "verdict": out.verdict,
        "level": out.level,
        "iterations": out.iterations,
        "residual": out.residual,
        "certificate": out.certificate,
    }
    if args.json:
        _emit(_dump(payload))
    else:
        label = (out.certificate or {}).get("label", "")
        _emit(f"{out.verdict} at level {out.level} after {out.iterations} iteration(s) [{label}]\n")
    return 0


def cmd_enumerate(args) -> int:
    lines = []
    count = 0
    for pidx, st in iter_products(tuple(args.dims), start=args.start, max_level=args.height_max):
        if count >= args.count:
            break
        count += 1
        if st is None and not args.include_skipped:
            continue
        rec = {"index": pidx.index, "height": pidx.height, "weight": pidx.weight, "tuple": pidx.to_json()}
        rec["state"] = st.to_json() if st is not None else None
        lines.append(json.dumps(rec, sort_keys=True))
    _emit("".join(line + "\n" for line in lines))
    return 0


def _load_points(path: str) -> list[ProductState]:
    points = []
    for n, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StateFormatError(f"line {n}: invalid JSON: {exc}") from exc
        points.append(ProductState.from_json(obj.get("state", obj)))
    if not points:
        raise StateFormatError("no points given")
    return points


def cmd_hull_check(args) -> int:
    rho = _load_state(args.state)
    points = _load_points(args.points)
    for p in points:
        if p.dims != rho.dims:
            raise DimensionError(f"point dims {p.dims.as_list()} do not match state dims {rho.dims.as_list()}")
    if args.mode == "grow":
        dist, w = growing_hull_check(rho.mat, [p.projector for p in points], tol=args.tol)
        payload = {"mode": "grow", "distance": dist, "inside": dist <= args.tol, "weights": w.tolist()}
    else:
        fn = facet_sign_membership if args.mode == "facet" else barycentric_membership
        try:
            res = fn(rho.mat, [p.projector for p in points])
        except np.linalg.LinAlgError as exc:
            raise StateValidationError([f"points are affinely dependent: {exc}"]) from exc
        payload = {"mode": args.mode, **res.to_json()}
    if args.json:
        _emit(_dump(payload))
    elif args.mode == "grow":
        _emit(f"distance {payload['distance']:.3e} ({'inside' if payload['inside'] else 'outside'})\n")
    else:
        _emit(f"{payload['verdict']}\n")
    return 0


def cmd_gen(args) -> int:
    if args.bell is not None:
        rho = bell(args.bell)
    elif args.isotropic is not None:
        rho = isotropic(args.isotropic, args.n)
    elif args.werner is not None:
        rho = werner(args.werner, args.n)
    elif args.max_mixed is not None:
        rho = max_mixed(tuple(args.max_mixed))
    else:
        rho = random_rational_separable(args.seed, args.count, (args.n, args.n), args.max_den)
    _emit(write_state(rho), args.out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sepdecide", description="Two-sided separability decision for bipartite states.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=_nonneg_int, default=0, help="seed for randomized generators (default 0)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def state_arg(p):
        p.add_argument("--state", required=True, help="state JSON file, or - for stdin")
        p.add_argument("--json", action="store_true", help="emit JSON instead of text")

    p = sub.add_parser("decide", help="run the combined decision procedure")
    state_arg(p)
    p.add_argument("--eta", type=_open_unit, default=DEFAULTS["eta"])
    p.add_argument("--budget", type=_nonneg_int, default=DEFAULTS["budget"])
    p.add_argument("--dps-level", type=_positive_int, default=DEFAULTS["dps_level"])
    p.add_argument("--mode", choices=MODES, default=DEFAULTS["mode"])
    p.add_argument("--hull-tol", type=_positive_float, default=DEFAULTS["hull_tol"])
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("ppt", help="partial-transpose test")
    state_arg(p)
    p.set_defaults(func=cmd_ppt)

    p = sub.add_parser("dps", help="symmetric-extension test at a fixed level")
    state_arg(p)
    p.add_argument("--level", type=_positive_int, default=DEFAULTS["dps_level"])
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULTS["dps_max_iterations"])
    p.add_argument("--impose-ppt", action="store_true", help="also require PPT extensions")
    p.set_defaults(func=cmd_dps)

    p = sub.add_parser("enumerate", help="list grid product states as JSON lines")
    p.add_argument("--dims", nargs=2, type=_dim, required=True, metavar=("N", "M"))
    p.add_argument("--count", type=_nonneg_int, required=True, help="number of indices to scan")
    p.add_argument("--start", type=_nonneg_int, default=0)
    p.add_argument("--height-max", type=_positive_int, default=None, help="stop after this denominator level")
    p.add_argument("--include-skipped", action="store_true", help="also print skipped indices (state null)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("hull-check", help="test whether a state lies in the hull of product states")
    state_arg(p)
    p.add_argument("--points", required=True, help="JSON lines of product states")
    p.add_argument("--mode", choices=("facet", "bary", "grow"), default="grow")
    p.add_argument("--tol", type=_positive_float, default=DEFAULTS["hull_tol"])
    p.set_defaults(func=cmd_hull_check)

    p = sub.add_parser("gen", help="write a standard test state as JSON")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--bell", choices=("phi+", "phi-", "psi+", "psi-"))
    grp.add_argument("--isotropic", type=_unit, metavar="P")
    grp.add_argument("--werner", type=_unit, metavar="P")
    grp.add_argument("--max-mixed", nargs=2, type=_dim, metavar=("N", "M"))
    grp.add_argument("--random-separable", action="store_true", help="random rational separable mixture, drawn with --seed")
    p.add_argument("--n", type=_dim, default=2, help="local dimension for the isotropic, Werner and random families")
    p.add_argument("--count", type=_positive_int, default=3, help="atoms in a random separable mixture")
    p.add_argument("--max-den", type=_positive_int, default=4, help="largest denominator of random atoms")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"sepdecide: configuration error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"sepdecide: I/O error: {exc}\n")
        return EXIT_IO
    except (StateValidationError, StateFormatError, DimensionError, ValueError) as exc:
        sys.stderr.write(f"sepdecide: invalid input: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())

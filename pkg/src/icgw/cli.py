"""Command-line entry point: ``icgw <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .boxes import chsh_value, is_no_signaling, is_quantum_feasible, parse_box
from .explorer import SweepConfig, enumerate_classical_suite, report_dict, run_sweep, write_report
from .game import BoxStrategy, ClassicalStrategy, evaluate_ic, message_witness, run_box_strategy, run_classical_strategy
from .gray_wyner import (
    DualOptions,
    MembershipOptions,
    RatePoint,
    dual_value,
    membership_test,
)
from .info import (
    DomainError,
    JointPmf,
    bernoulli_product,
    conditional_entropy,
    dsbs,
    entropy,
    load_pmf,
    mutual_information,
    uniform_bits,
)

log = logging.getLogger("icgw")

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def round_sig(obj: Any, digits: int = 12) -> Any:
    """Round every float in a JSON-like structure to ``digits`` significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    return obj


def parse_source(spec: str) -> JointPmf:
    """``uniform:N``, ``dsbs:RHO``, ``bernoulli-product:Q1,Q2,...`` or a pmf JSON path."""
    kind, sep, arg = spec.partition(":")
    try:
        if sep and kind == "uniform":
            return uniform_bits(int(arg))
        if sep and kind == "dsbs":
            return dsbs(float(arg))
        if sep and kind == "bernoulli-product":
            return bernoulli_product([float(x) for x in arg.split(",")])
    except ValueError as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"bad source spec {spec!r}: {e}") from None
    path = Path(spec)
    if not path.exists():
        raise DomainError(f"source {spec!r} is neither a named family nor an existing file")
    try:
        return load_pmf(path)
    except (KeyError, json.JSONDecodeError) as e:
        raise DomainError(f"{path}: malformed pmf file ({e})") from None


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise DomainError(f"bad {what} {text!r}; expected comma-separated numbers") from None


def _var_list(text: str | None, n: int) -> list[int]:
    if text is None:
        return list(range(n))
    try:
        return [int(x) - 1 for x in text.split(",") if x]
    except ValueError:
        raise DomainError(f"bad variable list {text!r}; expected 1-based indices like 1,2") from None


def parse_strategy(spec: str, k: int):
    kind, _, arg = spec.partition(":")
    if kind == "box":
        return BoxStrategy.uniform(parse_box(arg), k)
    if kind == "classical":
        try:
            return ClassicalStrategy.load(arg)
        except (OSError, KeyError, json.JSONDecodeError) as e:
            raise DomainError(f"cannot load classical strategy {arg!r}: {e}") from None
    raise DomainError(f"unknown strategy {spec!r}; expected box:<box spec> or classical:<file>")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ICGW_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise DomainError(f"ICGW_SEED must be an integer, got {env!r}") from None


def _membership_opts(args) -> MembershipOptions:
    dual = DualOptions(cap=args.cap, restarts=args.restarts, iterations=args.iterations, seed=_seed(args))
    return MembershipOptions(dual=dual, witness_tol=args.witness_tol, cert_tol=args.cert_tol)


def _emit(result: dict, fmt: str, pretty_lines: list[str] | None = None):
    result = round_sig(result)
    if fmt == "json":
        print(json.dumps(result, indent=2))
    elif fmt == "csv":
        for k, v in result.items():
            if not isinstance(v, (dict, list)):
                print(f"{k},{json.dumps(v)}")
    else:
        print("\n".join(pretty_lines) if pretty_lines else json.dumps(result, indent=2))


def _fmt(x: float) -> str:
    return repr(round_sig(float(x)))


# -- subcommands --------------------------------------------------------------------


def cmd_entropy(args) -> int:
    p = parse_source(args.pmf)
    target = _var_list(args.vars, p.n_vars)
    if args.mi_with:
        other = _var_list(args.mi_with, p.n_vars)
        value, what = mutual_information(p, target, other), "mutual_information"
    elif args.given:
        value, what = conditional_entropy(p, target, _var_list(args.given, p.n_vars)), "conditional_entropy"
    else:
        value, what = entropy(p, target), "entropy"
    _emit({what: value, "unit": "bits"}, args.format, [_fmt(value)])
    return EXIT_OK


def cmd_box(args) -> int:
    box = parse_box(args.box)
    ns = is_no_signaling(box, args.tol)
    out: dict = {"no_signaling": ns, "box": box.to_dict()}
    lines = [f"no_signaling: {ns}"]
    if box.is_binary:
        s = chsh_value(box)
        out.update(chsh=s, quantum_feasible=is_quantum_feasible(box))
        lines += [f"chsh: {_fmt(s)}", f"quantum_feasible: {out['quantum_feasible']}"]
    _emit(out, args.format, lines)
    return EXIT_OK


def cmd_ic_run(args) -> int:
    p = parse_source(args.source)
    strategy = parse_strategy(args.strategy, args.k)
    joint = run_classical_strategy(p, strategy) if isinstance(strategy, ClassicalStrategy) else run_box_strategy(p, strategy)
    ev = evaluate_ic(joint, p)
    report = {"source": p.to_dict(), "strategy": args.strategy, "k": args.k, **ev.to_dict()}
    if args.member:
        hints = [message_witness(p, strategy)] if isinstance(strategy, ClassicalStrategy) else []
        report["membership"] = membership_test(p, ev.rate_point, _membership_opts(args), hints).to_dict()
    if args.out:
        _write_json(args.out, round_sig(report))
    lines = [
        f"H(x) = {_fmt(ev.h_x)}",
        f"sum I_i = {_fmt(ev.eq1_rhs)}  (eq1 violated: {ev.eq1_violated})",
        f"H(x) + sum C_i = {_fmt(ev.eq2_lhs)} vs H(a) = {_fmt(ev.eq2_rhs)}  (eq2 violated: {ev.eq2_violated})",
        "rate point = (" + ", ".join(_fmt(x) for x in ev.rate_point.as_list()) + ")",
    ]
    if args.member:
        lines.append(f"verdict: {report['membership']['verdict']}")
    _emit(report, args.format, lines)
    return EXIT_OK


def cmd_gw_dual(args) -> int:
    p = parse_source(args.source)
    lam = _floats(args.lam, "lambda")
    opts = DualOptions(cap=args.cap, restarts=args.restarts, iterations=args.iterations, seed=_seed(args))
    res = dual_value(p, lam, opts)
    out = {**res.to_dict(), "options": {"cap": opts.cap or p.alphabet_size + p.n_vars, "restarts": opts.restarts,
                                        "iterations": opts.iterations, "tol": opts.tol, "seed": opts.seed}}
    lines = [
        _fmt(res.upper),
        f"certified_lower: {_fmt(res.certified_lower)}",
        "witness_point: (" + ", ".join(_fmt(x) for x in res.witness_point.as_list()) + ")",
        "witness rows:",
        *("  " + " ".join(_fmt(x) for x in row) for row in res.witness.rows),
    ]
    _emit(out, args.format, lines)
    return EXIT_OK


def cmd_gw_member(args) -> int:
    p = parse_source(args.source)
    pt = RatePoint.from_list(_floats(args.point, "point"))
    opts = _membership_opts(args)
    v = membership_test(p, pt, opts)
    out = {"point": pt.as_list(), **v.to_dict(),
           "tolerances": {"witness": opts.witness_tol, "certificate": opts.cert_tol}}
    lines = [v.tag]
    if v.certificate is not None:
        lines.append(f"certificate lambda={list(v.certificate.lambdas)} bound={_fmt(v.certified_bound)}")
    if v.witness_point is not None:
        lines.append("witness_point: (" + ", ".join(_fmt(x) for x in v.witness_point.as_list()) + ")")
    if v.gap is not None:
        lines.append(f"gap: {_fmt(v.gap)}")
    _emit(out, args.format, lines)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = SweepConfig.load(args.config)
    except (OSError, json.JSONDecodeError, TypeError) as e:
        raise DomainError(f"cannot load sweep config {args.config}: {e}") from None
    if args.jobs:
        cfg.jobs = args.jobs
    result = run_sweep(cfg)
    paths = write_report(result, args.out, config=cfg.to_dict())
    summary = {**result.summary, "partial": result.partial, "files": [str(p) for p in paths]}
    _emit(summary, args.format, [json.dumps(round_sig(summary), indent=2)])
    if result.partial:
        return EXIT_ERROR
    return EXIT_FLAGGED if result.flagged else EXIT_OK


def cmd_classical_suite(args) -> int:
    p = parse_source(args.source)
    res = enumerate_classical_suite(
        p, args.message_bits, args.seed_arity_cap, args.mixtures, _seed(args), opts=_membership_opts(args)
    )
    out = {
        "n_deterministic": res.n_deterministic,
        "n_mixtures": res.n_mixtures,
        "n_violations": len(res.violations),
        "min_eq2_slack": res.min_eq2_slack,
        "verdict_counts": res.verdict_counts,
        "violations": res.violations,
    }
    _emit(out, args.format, [f"violations: {len(res.violations)}", f"min eq2 slack: {_fmt(res.min_eq2_slack)}",
                             f"verdicts: {res.verdict_counts}"])
    return EXIT_OK if not res.violations else EXIT_FLAGGED


def _write_json(path: str, obj: dict):
    try:
        with open(path, "w") as f:
            json.dump(obj, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (falls back to $ICGW_SEED, then 0)")
    common.add_argument("--format", choices=("json", "csv", "pretty"), default="pretty")
    common.add_argument("-v", "--verbose", action="count", default=0)

    member = _Parser(add_help=False)
    member.add_argument("--cap", type=int, default=None, help="auxiliary cardinality cap (default |A| + N)")
    member.add_argument("--restarts", type=int, default=None)
    member.add_argument("--iterations", type=int, default=None)
    member.add_argument("--witness-tol", type=float, default=1e-6)
    member.add_argument("--cert-tol", type=float, default=1e-9)

    parser = _Parser(prog="icgw", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("entropy", parents=[common], help="Shannon entropy of a pmf")
    p.add_argument("--pmf", required=True, help="pmf JSON or named source")
    p.add_argument("--vars", help="1-based variable list (default: all)")
    p.add_argument("--given", help="condition on these variables")
    p.add_argument("--mi-with", help="mutual information between --vars and these variables")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("box", parents=[common], help="inspect a bipartite box")
    p.add_argument("--box", required=True, help="pr | isotropic:<eta> | file:<path>")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_box)

    p = sub.add_parser("ic-run", parents=[common, member], help="play the IC game exactly")
    p.add_argument("--source", required=True)
    p.add_argument("--strategy", required=True, help="box:pr | box:isotropic:<eta> | box:file:<path> | classical:<file>")
    p.add_argument("--k", type=int, default=1, help="nesting depth, N = 2^k bits")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--member", action="store_true", help="also place the induced rate point")
    p.set_defaults(func=cmd_ic_run)

    p = sub.add_parser("gw-dual", parents=[common, member], help="dual support function T(lambda)")
    p.add_argument("--source", required=True)
    p.add_argument("--lambda", dest="lam", required=True, help="comma-separated weights, e.g. 1,1")
    p.set_defaults(func=cmd_gw_dual)

    p = sub.add_parser("gw-member", parents=[common, member], help="Gray-Wyner membership verdict")
    p.add_argument("--source", required=True)
    p.add_argument("--point", required=True, help="R0,R1,...,RN")
    p.set_defaults(func=cmd_gw_member)

    p = sub.add_parser("sweep", parents=[common], help="run a configured sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("classical-suite", parents=[common, member], help="classical-world regression")
    p.add_argument("--source", required=True)
    p.add_argument("--message-bits", type=int, default=1)
    p.add_argument("--seed-arity-cap", type=int, default=4)
    p.add_argument("--mixtures", type=int, default=64)
    p.set_defaults(func=cmd_classical_suite)
    return parser


def _fill_defaults(args):
    """Per-command defaults for the shared optimizer flags."""
    if not hasattr(args, "restarts"):
        return
    full = args.command == "gw-dual"
    if args.restarts is None:
        args.restarts = 64 if full else 16
    if args.iterations is None:
        args.iterations = 500 if full else 300
    if args.restarts < 0 or args.iterations < 0:
        raise DomainError("restarts and iterations must be >= 0")
    if args.witness_tol <= 0 or args.cert_tol <= 0:
        raise DomainError("tolerances must be > 0")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        _fill_defaults(args)
        return args.func(args)
    except UsageError as e:
        _diagnose("usage", str(e))
    except (DomainError, ValueError, OSError, RuntimeError) as e:
        _diagnose(type(e).__name__, str(e))
    return EXIT_ERROR


def _diagnose(kind: str, message: str):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

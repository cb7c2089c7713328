"""Command-line surface: machine-readable reports over the library.

Exit codes: 0 pass, 1 threshold fail, 2 bad input, 3 type-system
violation, 4 runtime/numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__, reps, tensorfile
from .capsules import FiberSpec, get_capsule
from .errors import (
    NotARepresentationError,
    NumericalFailureError,
    TrainingFailureError,
    TypeSystemError,
    UtilizationUndefinedError,
)
from .induction import build_pi0, build_patch_rep
from .intertwiners import basis_for_pair, parameter_utilization
from .reps import Representation

EXIT_PASS = 0
EXIT_THRESHOLD = 1
EXIT_BAD_INPUT = 2
EXIT_TYPE_SYSTEM = 3
EXIT_RUNTIME = 4


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _envelope(command: str, inputs, result, passed: bool) -> dict:
    return {
        "command": command,
        "input_digest": _digest(inputs),
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "result": result,
        "pass": passed,
    }


def _emit(report: dict, as_json: bool):
    if as_json:
        print(json.dumps(report, sort_keys=True, indent=2))
    return report


def cmd_irreps(args) -> int:
    if args.group != "d4":
        print(f"error: unsupported group {args.group!r} (only d4)", file=sys.stderr)
        return EXIT_BAD_INPUT
    catalog = reps.irrep_catalog()
    if args.json:
        result = {rep.name: rep.to_json() for rep in catalog}
        _emit(_envelope("irreps", {"group": args.group}, result, True), True)
    else:
        for rep in catalog:
            chi = rep.character()
            print(f"{rep.name} (dim {rep.dim}) character {chi.astype(int).tolist()}")
            for el, mat in rep.matrices.items():
                print(f"  {el:4s} {mat.astype(int).tolist()}")
    return EXIT_PASS


def _load_rep(spec: str) -> Representation:
    if spec.startswith("pi0:"):
        size = spec.split(":", 1)[1]
        s, _, s2 = size.partition("x")
        if s2 and s2 != s:
            raise ValueError(f"patch must be square, got {size!r}")
        return build_pi0(int(s), 1)
    if spec.startswith("builtin:"):
        return get_capsule(spec.split(":", 1)[1]).rep
    with open(spec) as fh:
        return Representation.from_json(json.load(fh))


def cmd_decompose(args) -> int:
    try:
        rep = _load_rep(args.rep)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: cannot load representation: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if not reps.is_representation(rep, tol=1e-8):
        print("error: input fails the homomorphism check", file=sys.stderr)
        return EXIT_TYPE_SYSTEM
    try:
        rep_type = reps.decompose_type(rep)
    except NotARepresentationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TYPE_SYSTEM
    result = {
        "dim": rep.dim,
        "type": list(rep_type),
        "multiplicities": dict(zip(reps.IRREP_NAMES, rep_type)),
    }
    _emit(_envelope("decompose", {"rep": args.rep}, result, True), args.json)
    if not args.json:
        print(f"type {tuple(rep_type)}")
    return EXIT_PASS


def cmd_homs(args) -> int:
    if args.size < 1 or args.size % 2 == 0:
        print(f"error: patch size must be odd, got {args.size}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        in_cap = get_capsule(args.in_capsule)
        out_cap = get_capsule(args.out_capsule)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        basis = basis_for_pair(in_cap.id, out_cap.id, args.size)
    except NumericalFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    pi = build_patch_rep(in_cap.rep, args.size)
    try:
        mu = parameter_utilization(pi, out_cap.rep)
    except UtilizationUndefinedError:
        mu = None
    result = {
        "in": in_cap.id,
        "out": out_cap.id,
        "s": args.size,
        "dim_hom": basis.n,
        "utilization": mu,
    }
    inputs = {"in": in_cap.id, "out": out_cap.id, "s": args.size}
    _emit(_envelope("homs", inputs, result, True), args.json)
    if not args.json:
        mu_text = "null" if mu is None else f"{mu:g}"
        print(f"dim Hom = {basis.n}, utilization = {mu_text}")
    if args.emit:
        tensorfile.write_tensor(args.emit, basis.flat())
    return EXIT_PASS


def cmd_verify(args) -> int:
    from .network import NetworkSpec, init_params, load_params, verify_equivariance

    try:
        with open(args.net) as fh:
            net = NetworkSpec.from_json(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: cannot load network spec: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        net.fibers()
    except TypeSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TYPE_SYSTEM
    try:
        if args.params:
            try:
                params = load_params(args.params)
            except (OSError, json.JSONDecodeError, ValueError) as exc:
                print(f"error: cannot load parameters: {exc}", file=sys.stderr)
                return EXIT_BAD_INPUT
        else:
            params = init_params(net, seed=args.seed)
        report = verify_equivariance(net, params, trials=args.trials, seed=args.seed, tol=args.tol)
    except (NumericalFailureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    inputs = {
        "net": args.net,
        "params": args.params,
        "trials": args.trials,
        "seed": args.seed,
        "tol": args.tol,
    }
    _emit(_envelope("verify", inputs, report, report["pass"]), args.json)
    if not args.json:
        print(f"max relative error {report['max_rel_error']:.3e} (tol {args.tol:g})")
    return EXIT_PASS if report["pass"] else EXIT_THRESHOLD


def cmd_train_demo(args) -> int:
    from .training import train_demo

    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot load config: {exc}", file=sys.stderr)
            return EXIT_BAD_INPUT
    if args.seed is not None:
        config["seed"] = args.seed
    try:
        metrics = train_demo(config)
    except TrainingFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    report = _envelope("train-demo", config, metrics, True)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
    _emit(report, args.json)
    if not args.json:
        print(
            f"train acc {metrics['train_accuracy']:.3f}, "
            f"test acc {metrics['test_accuracy']:.3f}, "
            f"invariance gap {metrics['invariance_gap']:.4f}"
        )
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steerkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("irreps", help="list the irreps of a group")
    p.add_argument("--group", default="d4")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_irreps)

    p = sub.add_parser("decompose", help="type-decompose a representation")
    p.add_argument("--rep", required=True, help='JSON file, "pi0:SxC", or "builtin:<capsule>"')
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("homs", help="intertwiner space between two capsules")
    p.add_argument("--in", dest="in_capsule", required=True)
    p.add_argument("--out", dest="out_capsule", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--emit", help="write the basis tensor to this SFT file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_homs)

    p = sub.add_parser("verify", help="check network equivariance")
    p.add_argument("--net", required=True)
    p.add_argument("--params", help="parameter file (tensor records); random init if absent")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train-demo", help="run the synthetic training demo")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""``deqflow`` command line: reference experiments, custom runs, verification suites, constants."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import artifacts
from .errors import DEQError
from .experiments import RunConfig, linear_config, run, sigmoid_config, theory_constants
from .verification import SUITES, run_suite


def _xi(text):
    return tuple(float(v) for v in text.split(","))


def _common(p, defaults):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="output directory (default runs/<command>-seed<seed>)")
    p.add_argument("--solver", choices=["picard", "brent"], default=defaults.get("solver", "picard"))
    p.add_argument("--tol", type=float, default=1e-12, help="fixed-point solver tolerance")


def _training(p, defaults):
    p.add_argument("--eta", type=float, default=defaults.get("eta", 0.01))
    p.add_argument("--epochs", type=int, default=defaults.get("epochs", 200))
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--init", choices=["origin", "trivial", "target"], default="origin")
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--no-constants", action="store_true", help="skip the theory constants in the summary")


def _model(p):
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--xi", type=_xi, default=(2.0,), help="comma-separated target vector")
    p.add_argument("--activation", choices=["linear", "sigmoid", "tanh", "softplus"], default="linear")
    p.add_argument("--data", choices=["uniform", "gaussian"], default="uniform")
    p.add_argument("--delta1", type=float, default=0.1)
    p.add_argument("--delta2", type=float, default=None)
    p.add_argument("--grid", type=int, default=9, help="grid points per axis for rho and lambda2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deqflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reproduce-linear", help="linear DEQ reference experiment")
    _common(p, {})
    _training(p, {"eta": 0.01, "epochs": 200})

    p = sub.add_parser("reproduce-sigmoid", help="sigmoid DEQ reference experiment")
    _common(p, {"solver": "brent"})
    _training(p, {"eta": 0.1, "epochs": 4000})

    for name, helptext in (("gd", "custom gradient descent run"), ("flow", "custom gradient flow run")):
        p = sub.add_parser(name, help=helptext)
        _common(p, {})
        _training(p, {})
        _model(p)
        p.add_argument("--config", type=Path, default=None, help="JSON RunConfig; flags given explicitly win")
        if name == "flow":
            p.add_argument("--step", type=float, default=1e-2)
            p.add_argument("--horizon", type=float, default=10.0)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--activation", choices=["linear", "sigmoid", "tanh", "softplus"], default="sigmoid",
                   help="activation for the constants suite")

    p = sub.add_parser("constants", help="print the theory constants for a configuration")
    _common(p, {})
    _training(p, {})
    _model(p)
    return parser


_ARG_FOR_FIELD = {"n_samples": "samples", "grid_n": "grid", "constants": "no_constants"}


def _config(args, command) -> RunConfig:
    shared = dict(seed=args.seed, eta=args.eta, epochs=args.epochs, n_samples=args.samples, init=args.init,
                  init_scale=args.init_scale, solver=args.solver, tol=args.tol,
                  constants=not args.no_constants)
    if command == "reproduce-linear":
        return linear_config(**shared)
    if command == "reproduce-sigmoid":
        return sigmoid_config(**shared)
    flags = dict(shared, dim=args.dim, xi=args.xi, activation=args.activation, data=args.data,
                 delta1=args.delta1, delta2=args.delta2, grid_n=args.grid,
                 mode="flow" if command == "flow" else "gd")
    if command == "flow":
        flags.update(step=args.step, horizon=args.horizon)
    if getattr(args, "config", None) is not None:
        # values from the file, overridden only by flags that differ from their defaults
        defaults = vars(build_parser().parse_args([command]))
        given = vars(args)
        base = json.loads(args.config.read_text())
        for key, value in flags.items():
            arg = _ARG_FOR_FIELD.get(key, key)
            if key == "mode" or key not in base or given.get(arg) != defaults.get(arg):
                base[key] = value
        flags = base
    flags.setdefault("experiment", "custom")
    return RunConfig(**flags)


def _report(lines):
    for line in lines:
        print(line)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        if args.command == "verify":
            report = run_suite(args.suite, args.seed,
                               **({"activation": args.activation} if args.suite == "constants" else {}))
            out = out or Path("runs") / f"verify-{args.suite}-seed{args.seed}"
            out.mkdir(parents=True, exist_ok=True)
            artifacts.write_json(out / "report.json", report)
            _report(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}: value={c['value']} bound={c['bound']}"
                    for c in report["checks"])
            print(f"{args.suite}: {report['status']} ({out / 'report.json'})")
            return 0 if report["status"] == "pass" else 1

        config = _config(args, args.command)
        if args.command == "constants":
            payload = {"config": config.to_dict(), "constants": theory_constants(config)}
            if out is not None:
                out.mkdir(parents=True, exist_ok=True)
                artifacts.write_json(out / "constants.json", payload)
            print(json.dumps(artifacts.jsonable(payload), indent=2))
            return 0

        out = out or Path("runs") / f"{args.command}-seed{args.seed}"
        result = run(config, out)
        _report(f"{'PASS' if a['pass'] else 'FAIL'}  {a['name']}: value={a['value']} bound={a['bound']}"
                for a in result.assertions)
        print(f"status: {result.status}; artifacts in {out}")
        return result.exit_code
    except (DEQError, ValueError, OSError) as exc:
        print(f"deqflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

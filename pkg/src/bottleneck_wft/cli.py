"""Command-line interface.

Exit codes: 0 success, 1 an invariant or bound check failed, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
from fractions import Fraction
from pathlib import Path

from .engine import EngineError, check_solution, simulate
from .fundamental import DomainError, ModelParams
from .harness import (
    ConfigError,
    UniquenessViolation,
    convergence_study,
    load_config,
    run_pair,
)
from .mesh import MeshError, build_mesh, quantize
from .rational import Q, fmt
from .riemann import constrained_solve, discrete_constrained
from .tangent import (
    B,
    AncestorGraph,
    attach_shifts,
    backward_weights,
    propagate_all,
    q,
    verify_weight_bound,
    weighted_norm,
)

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "BOTTLENECK_WFT_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(args, config) -> Path:
    out = Path(args.out) if args.out else (config.output or Path("."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def seed_from_env(default: int = 0) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def _simulate_config(config, snapshot_times=None):
    mesh = config.mesh()
    rho0 = quantize(config.rho0_a, mesh)
    max_events = int(config.extra.get("max_events", 10**6))
    return simulate(
        rho0,
        config.y0_a,
        mesh,
        config.params,
        config.T,
        snapshot_times=snapshot_times,
        window=config.window,
        max_events=max_events,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_riemann(args) -> int:
    params = ModelParams(Q(args.vb), Q(args.alpha))
    fan = constrained_solve(args.left, args.right, params)
    summary = {
        "left": fmt(fan.left),
        "right": fmt(fan.right),
        "case": fan.case,
        "sv_speed": fmt(fan.sv_speed),
        "waves": [
            {"kind": w.kind, "left": fmt(w.left), "right": fmt(w.right), "lo": fmt(w.lo), "hi": fmt(w.hi)}
            for w in fan.waves
        ],
    }
    if args.n is not None:
        mesh = build_mesh(args.n, params)
        disc = discrete_constrained(mesh.nearest(fan.left), mesh.nearest(fan.right), mesh, params)
        summary["discrete"] = {
            "case": disc.case,
            "sv_speed": fmt(disc.sv_speed),
            "fronts": [[fmt(a), fmt(b), fmt(v)] for a, b, v in disc.fronts],
            "ns": disc.ns,
        }
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(fan)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    times = config.extra.get("snapshot_times")
    if times is None:
        times = [config.T * k / config.n_times for k in range(config.n_times + 1)]
    result = _simulate_config(config, [Q(s) for s in times])
    with open(out / "snapshots.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "value", "y"])
        for snap in result.snapshots:
            for t, x, v, y, _ in snap.csv_rows():
                w.writerow([fmt(t), x if isinstance(x, str) else fmt(x), fmt(v), fmt(y)])
    with open(out / "events.jsonl", "w") as fh:
        for e in result.events:
            fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")
    report = check_solution(result)
    _write_json(
        out / "summary.json",
        {
            "events": len(result.events),
            "class_counts": result.class_counts(),
            "y_final": fmt(result.y_final),
            "sv_speed_final": fmt(result.sv_speed_final),
            "ns_final": result.ns_final,
            "checks_ok": report.ok,
            "failures": report.failures,
        },
    )
    print(report)
    return EXIT_OK if report.ok else EXIT_INVARIANT


def cmd_stability(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    try:
        rep = run_pair(config)
    except UniquenessViolation as exc:
        _write_json(out / "stability_report.json", {"error": str(exc)})
        print(f"uniqueness violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    _write_json(out / "stability_report.json", rep.to_json())
    print(f"ratio {rep.ratio:.6g} against constant {rep.constant:.6g}")
    return EXIT_OK if rep.within_constant else EXIT_INVARIANT


def _random_shift(rng: random.Random):
    return Fraction(rng.randint(-64, 64), 64)


def cmd_weights(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    result = _simulate_config(config)
    graph = AncestorGraph(result)
    weights = backward_weights(result, graph)
    rep = verify_weight_bound(weights, result.rho0, config.params, result, graph)

    seed = args.seed if args.seed is not None else seed_from_env()
    rng = random.Random(seed)
    n_jumps = len(result.rho0.jumps())
    failures = list(rep.violations)
    for k in range(args.samples):
        xi_b = _random_shift(rng)
        xi0 = [xi_b if x == result.y0 else _random_shift(rng) for x, _, _ in result.rho0.jumps()]
        s0 = attach_shifts(result, xi0, xi_b)
        sT = propagate_all(s0, result.events)
        image = weights.apply(s0)
        expected = {q(fid): sT.q(fid) for fid in sT.xi}
        expected[B] = sT.xi_b
        if image != expected:
            failures.append(f"sample {k}: composed map disagrees with forward propagation")
        if weighted_norm(sT) > weights.bound(s0):
            failures.append(f"sample {k}: weighted norm exceeds the weight bound")
    body = weights.to_json(rep.constant)
    body.update(
        seed=seed,
        samples=args.samples,
        jumps=n_jumps,
        restricted_regime=rep.restricted,
        realized_sv_weight=rep.realized,
        nc_counts=rep.nc_counts,
        failures=failures,
    )
    _write_json(out / "weights.json", body)
    print(rep)
    return EXIT_OK if not failures else EXIT_INVARIANT


def cmd_converge(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    levels = args.levels or config.extra.get("levels")
    if not levels:
        raise ConfigError("no mesh levels given")
    cells = int(args.cells or config.extra.get("cells", 4096))
    rows = convergence_study(
        config.rho0_a, config.y0_a, config.params, config.T, [int(n) for n in levels], cells, config.window
    )
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "events", "l1_to_godunov", "l1_to_next_level"])
        for r in rows:
            w.writerow([r.n, r.events, f"{r.to_oracle:.12e}", "" if r.to_next is None else f"{r.to_next:.12e}"])
    for r in rows:
        print(f"n={r.n}: {r.events} events, L1 to Godunov {r.to_oracle:.4e}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bottleneck-wft", description="Wave-front tracking with a moving bottleneck.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("riemann", help="solve one constrained Riemann problem")
    r.add_argument("--left", required=True, type=Q)
    r.add_argument("--right", required=True, type=Q)
    r.add_argument("--vb", required=True, type=Q)
    r.add_argument("--alpha", required=True, type=Q)
    r.add_argument("--n", type=int, help="also show the discrete fan on this mesh level")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_riemann)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "run the front tracking engine"),
        ("stability", cmd_stability, "compare two solutions"),
        ("weights", cmd_weights, "backward weights and their bound"),
        ("converge", cmd_converge, "mesh refinement against the Godunov oracle"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out", help="output directory (default: config 'output' or cwd)")
        s.set_defaults(func=func)
        if name == "weights":
            s.add_argument("--samples", type=int, default=20)
            s.add_argument("--seed", type=int, help=f"overrides ${SEED_ENV}")
        if name == "converge":
            s.add_argument("--levels", type=int, nargs="+")
            s.add_argument("--cells", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, MeshError, DomainError, ValueError, ZeroDivisionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands::

    delaysync synthesize MODEL.json --yr 5 --out DIR
    delaysync simulate  PROTOCOL.json GRAPH.json --steps N --seed S --out DIR
    delaysync verify    PROTOCOL.json GRAPH.json --grid 256 --out DIR
    delaysync sweep     PROTOCOL.json GRAPH.json --delay-max M --trials T --seed S --out DIR

Exit codes: 0 success, 1 usage or unexpected error, 2 infeasible
reference, 3 model assumption failure, 4 not converged, 5 unrooted
graph, 6 divergence, 7 verification scan failed.

Every run writes a ``manifest.json`` into the output directory with the
tool version, input digests, seed and resolved tolerances.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__, graph, numerics, plant, sim, verify
from .errors import (
    InfeasibleReferenceError,
    ModelAssumptionError,
    SimulationDivergedError,
    UnrootedGraphError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_ASSUMPTION = 3
EXIT_NOT_CONVERGED = 4
EXIT_UNROOTED = 5
EXIT_DIVERGED = 6
EXIT_VERIFY_FAILED = 7


class _Parser(argparse.ArgumentParser):
    # keep exit code 2 reserved for "infeasible reference"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, inputs, outputs, seed=None, extra=None):
    manifest = {
        "tool": "delaysync",
        "version": __version__,
        "command": command,
        "inputs": {os.path.basename(p): _sha256(p) for p in inputs},
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
        "seed": seed,
        "tolerances": {"rank_rtol": numerics.default_rank_tolerance()},
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_vector(text):
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def cmd_synthesize(args):
    y_r = _parse_vector(args.yr)
    try:
        model = plant.load_model(args.model)
        result = plant.synthesize(model, y_r)
    except InfeasibleReferenceError as exc:
        print(f"infeasible reference: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ModelAssumptionError as exc:
        print(f"model assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    os.makedirs(args.out, exist_ok=True)
    proto_path = os.path.join(args.out, "protocol.json")
    _write_json(proto_path, plant.synthesis_to_json(result))
    _write_manifest(args.out, "synthesize", [args.model], [proto_path])
    rho_k = result.checks["closed_loop_radius_state"]
    rho_f = result.checks["closed_loop_radius_observer"]
    print(
        f"synthesized protocol (n={result.n}, m={result.m}, p={result.p}, "
        f"v={result.v}; closed-loop radii {rho_k:.4f}/{rho_f:.4f}) -> {proto_path}"
    )
    return EXIT_OK


def cmd_simulate(args):
    synth = plant.synthesis_from_json(args.protocol)
    net = graph.load_network(args.graph)
    y_r = _parse_vector(args.yr) if args.yr else synth.y_r
    cfg = sim.SimConfig(
        steps=args.steps,
        y_r=y_r,
        seed=args.seed,
        prefill=args.prefill,
        eps_sync=args.eps_sync,
        eps_reg=args.eps_reg,
        stride=args.stride,
    )
    os.makedirs(args.out, exist_ok=True)
    try:
        traj = sim.simulate(synth, net, cfg)
    except UnrootedGraphError as exc:
        print(f"unrooted graph: {exc}", file=sys.stderr)
        return EXIT_UNROOTED
    except SimulationDivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    traj_path = os.path.join(args.out, "traj.csv")
    traj.to_csv(traj_path)
    outputs = [traj_path]
    if args.plot:
        plot_path = os.path.join(args.out, "plot.svg")
        sim.plot_trajectory(traj, plot_path)
        outputs.append(plot_path)
    _write_manifest(
        args.out, "simulate", [args.protocol, args.graph], outputs, seed=args.seed
    )
    if traj.converged:
        print(
            f"converged at tick {traj.converged_tick} "
            f"(sync={traj.final_sync:.3e}, reg={traj.final_reg:.3e}) -> {traj_path}"
        )
        return EXIT_OK
    print(
        f"did not converge within {args.steps} ticks "
        f"(sync={traj.final_sync:.3e}, reg={traj.final_reg:.3e}) -> {traj_path}"
    )
    return EXIT_NOT_CONVERGED


def cmd_verify(args):
    synth = plant.synthesis_from_json(args.protocol)
    net = graph.load_network(args.graph)
    try:
        net.require_rooted()
    except UnrootedGraphError as exc:
        print(f"unrooted graph: {exc}", file=sys.stderr)
        return EXIT_UNROOTED
    omegas = graph.omega_grid(args.grid)
    values = tuple(int(x) for x in args.delays.split(","))
    free = verify.delay_free_closed_loop(synth, net)
    scan = verify.closed_loop_frequency_scan(
        synth, net, omegas, budget=args.budget, values=values
    )
    bound_ok, worst_rho = graph.check_delayed_spectral_bound(
        net.Dbar, net.kappa, omegas, rooted=True
    )
    passed = free.passed and scan.passed and bound_ok
    report = {
        "passed": bool(passed),
        "delay_free": free.to_json(),
        "frequency_scan": scan.to_json(),
        "coupling_bound": {
            "passed": bool(bound_ok),
            "max_modulus": float(worst_rho),
        },
    }
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    _write_json(report_path, report)
    _write_manifest(args.out, "verify", [args.protocol, args.graph], [report_path])
    print(
        f"verification {'passed' if passed else 'FAILED'} "
        f"(margin {scan.min_margin:.3e}, delay-free radius "
        f"{free.spectral_radius:.6f}) -> {report_path}"
    )
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def _sweep_trial(payload):
    synth_doc, graph_doc, trial, base_seed, delay_max, steps = payload
    synth = plant.synthesis_from_json(synth_doc)
    base = graph.load_network(graph_doc)
    rng = np.random.default_rng(np.random.SeedSequence([base_seed, trial]))
    edges = base.edges()
    kappa = np.zeros((base.N, base.N), dtype=int)
    delays = []
    for i, j in edges:
        d = int(rng.integers(0, delay_max + 1))
        kappa[i, j] = d
        delays.append(f"{i + 1}<-{j + 1}:{d}")
    net = graph.NetworkSpec(graph=base.graph, roots=base.roots, kappa=kappa)
    cfg = sim.SimConfig(steps=steps, y_r=synth.y_r, seed=base_seed)
    try:
        traj = sim.simulate(synth, net, cfg)
        status = "converged" if traj.converged else "maxed"
        tick = traj.converged_tick if traj.converged else ""
        return [
            trial,
            base_seed,
            ";".join(delays),
            tick,
            repr(traj.final_sync),
            repr(traj.final_reg),
            status,
        ]
    except SimulationDivergedError as exc:
        return [trial, base_seed, ";".join(delays), "", "", "", f"diverged@{exc.tick}"]


def cmd_sweep(args):
    with open(args.protocol, "r", encoding="utf-8") as fh:
        synth_doc = json.load(fh)
    with open(args.graph, "r", encoding="utf-8") as fh:
        graph_doc = json.load(fh)
    try:
        graph.load_network(graph_doc).require_rooted()
    except UnrootedGraphError as exc:
        print(f"unrooted graph: {exc}", file=sys.stderr)
        return EXIT_UNROOTED
    payloads = [
        (synth_doc, graph_doc, t, args.seed, args.delay_max, args.steps)
        for t in range(args.trials)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_trial, payloads))
    else:
        rows = [_sweep_trial(p) for p in payloads]
    os.makedirs(args.out, exist_ok=True)
    sweep_path = os.path.join(args.out, "sweep.csv")
    with open(sweep_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trial", "seed", "delays", "converged_tick", "final_sync",
             "final_reg", "status"]
        )
        writer.writerows(rows)
    _write_manifest(
        args.out, "sweep", [args.protocol, args.graph], [sweep_path], seed=args.seed
    )
    converged = sum(1 for r in rows if r[-1] == "converged")
    print(f"{converged}/{args.trials} trials converged -> {sweep_path}")
    return EXIT_OK if converged == args.trials else EXIT_NOT_CONVERGED


def build_parser():
    parser = _Parser(
        prog="delaysync",
        description="Synthesize, simulate and verify delay-tolerant "
        "synchronization protocols for identical discrete-time agents.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synthesize", help="design a protocol from an agent model")
    p.add_argument("model", help="agent model JSON file")
    p.add_argument("--yr", required=True, help="constant reference, e.g. '5' or '1,2'")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_synthesize)

    p = subs.add_parser("simulate", help="run the closed loop on a network")
    p.add_argument("protocol", help="protocol JSON from 'synthesize'")
    p.add_argument("graph", help="network JSON file")
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--yr", default=None, help="override the protocol's reference")
    p.add_argument("--eps-sync", type=float, default=1e-2)
    p.add_argument("--eps-reg", type=float, default=1e-2)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--prefill", choices=("hold", "zero"), default="hold")
    p.add_argument("--plot", action="store_true", help="also write plot.svg")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("verify", help="frequency/delay stability scans")
    p.add_argument("protocol")
    p.add_argument("graph")
    p.add_argument("--grid", type=int, default=256, help="omega grid points")
    p.add_argument(
        "--delays",
        default=",".join(str(d) for d in verify.DEFAULT_DELAY_VALUES),
        help="comma-separated per-channel delay values to sample",
    )
    p.add_argument("--budget", type=int, default=verify.DEFAULT_TUPLE_BUDGET)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("sweep", help="random-delay convergence sweep")
    p.add_argument("protocol")
    p.add_argument("graph")
    p.add_argument("--delay-max", type=int, default=10)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: run scenarios, design fleets, merge reports.

Exit codes: 0 success, 1 internal failure, 2 configuration error, 3 data
error, 4 uncoverable nodes in fleet design.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__, fleet, simulator
from .fleet import Station, UncoverableNodeError
from .model import ConfigError, DataError, ScenarioConfig, load_requests
from .network import NetworkFormatError, grid_network, load_network, write_network

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_UNCOVERABLE = 4


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out: Path, cfg: ScenarioConfig, inputs: dict[str, Path], seed: int) -> None:
    manifest = {
        "version": __version__,
        "seed": seed,
        "config": cfg.to_dict(),
        "inputs": {name: _sha256(p) for name, p in sorted(inputs.items())},
        "out": str(out),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = ScenarioConfig.from_json(args.config) if args.config else ScenarioConfig()
    if args.dispatcher:
        cfg.dispatcher = args.dispatcher
        cfg.validate()
    net = load_network(args.network)
    requests = load_requests(args.requests, net)
    stations = fleet.load_stations(args.stations, net, cfg.tau_fraction) if args.stations else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = simulator.run(cfg, net, requests, stations, record_traces=args.emit_trace)
    simulator.write_outputs(result, out)
    if args.emit_trace:
        with open(out / "trace.csv", "w", encoding="utf-8") as fh:
            fh.write("vehicle,from,to,t_enter,t_exit\n")
            for vid, u, v, t0, t1 in result.traces:
                fh.write(f"{vid},{u},{v},{t0},{t1}\n")
    inputs = {
        "nodes": Path(args.network) / "nodes.csv",
        "edges": Path(args.network) / "edges.csv",
        "requests": Path(args.requests),
    }
    if args.stations:
        inputs["stations"] = Path(args.stations)
    _write_manifest(out, cfg, inputs, cfg.seed)
    return EXIT_OK


def cmd_design(args: argparse.Namespace) -> int:
    net = load_network(args.network)
    requests = load_requests(args.requests, net)
    serviced = sorted({r.origin for r in requests} | {r.dest for r in requests})
    station_nodes_list = fleet.position_stations(net, serviced, reach_s=args.reach_s)
    station_nodes = {i: n for i, n in enumerate(station_nodes_list)}

    def shortage_oracle(stocks) -> int:
        sizing_cfg = ScenarioConfig(
            dispatcher="ih", q_max_s=args.q_max_s, capacity=1, batch_s=args.batch_s,
            warmup_s=0,
            horizon_s=max(r.announce_s for r in requests) + args.q_max_s + 86400,
            rebalance_period_s=10**9,
        )
        sized = [Station.create(sid, node, stocks[sid]) for sid, node in station_nodes.items()]
        report = simulator.run(sizing_cfg, net, requests, sized).report
        return report.rejected + report.active_at_end

    stocks = fleet.size_fleet(net, requests, station_nodes, shortage_oracle, step=args.step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fleet.write_stations(
        [(sid, node, stocks[sid]) for sid, node in station_nodes.items()],
        out / "stations.csv",
    )
    print(f"{len(station_nodes)} stations, {sum(stocks.values())} vehicles -> {out / 'stations.csv'}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    if not args.runs:
        print("report: no run directories given", file=sys.stderr)
        return EXIT_CONFIG
    runs = []
    for run_dir in args.runs:
        p = Path(run_dir)
        metrics_file = p / "metrics.json"
        if not metrics_file.exists():
            raise DataError(f"missing metrics.json in {p}")
        runs.append((p.name, p, json.loads(metrics_file.read_text(encoding="utf-8"))))
    windows = {(m["warmup_s"], m["horizon_s"], m["batch_s"]) for _, _, m in runs}
    if len(windows) > 1:
        print(f"report: mismatched scenario windows across runs: {sorted(windows)}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base_km = runs[0][2]["total_vehicle_km"]
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([
            "run", "dispatcher", "total_vehicle_km", "avg_delay_s", "avg_density_veh_per_km",
            "congested_segments", "heavily_loaded_segments", "used_vehicles",
            "avg_batch_ms", "dist_reduction_vs_first_pct",
        ])
        for name, _, m in runs:
            reduction = 100.0 * (base_km - m["total_vehicle_km"]) / base_km if base_km else 0.0
            w.writerow([
                name, m["dispatcher"], m["total_vehicle_km"], m["avg_delay_s"],
                m["avg_density_veh_per_km"], m["congested_segments"],
                m["heavily_loaded_segments"], m["used_vehicles"], m["avg_batch_ms"],
                f"{reduction:.4f}",
            ])
    with open(out / "delay_bins.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "delay_bin_lo_s", "count"])
        for name, _, m in runs:
            for bin_lo, count in sorted(m["delay_histogram"].items(), key=lambda kv: int(kv[0])):
                w.writerow([name, bin_lo, count])
    with open(out / "occupancy_bins.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "occupancy", "distance_km"])
        for name, _, m in runs:
            for occ, km in sorted(m["occupancy_km"].items(), key=lambda kv: int(kv[0])):
                w.writerow([name, occ, km])
    with open(out / "density_map.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "from", "to", "length_m", "density_veh_per_m"])
        for name, p, _ in runs:
            density_file = p / "edge_density.csv"
            if not density_file.exists():
                continue
            with open(density_file, newline="", encoding="utf-8") as src:
                for row in csv.DictReader(src):
                    w.writerow([name, row["from"], row["to"], row["length_m"],
                                row["density_veh_per_m"]])
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    net_dir = out / "network"
    out.mkdir(parents=True, exist_ok=True)
    net = grid_network(args.grid, args.grid)
    write_network(net, net_dir)
    rows = simulator.generate_synthetic_demand(
        seed=args.seed, grid=args.grid, rate_per_hour=args.rate,
        duration_s=args.duration_s, out_path=out / "requests.csv")
    print(f"{args.grid}x{args.grid} grid -> {net_dir}; {len(rows)} requests -> {out / 'requests.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgadispatch")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("--config", help="scenario config JSON")
    p_run.add_argument("--network", required=True, help="directory with nodes.csv / edges.csv")
    p_run.add_argument("--requests", required=True)
    p_run.add_argument("--stations")
    p_run.add_argument("--dispatcher", choices=["none", "ih", "vga", "vga-limited", "vga-pnas"])
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--emit-trace", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_design = sub.add_parser("design", help="position stations and size the fleet")
    p_design.add_argument("--network", required=True)
    p_design.add_argument("--requests", required=True)
    p_design.add_argument("--reach-s", type=float, default=210.0)
    p_design.add_argument("--q-max-s", type=int, default=240)
    p_design.add_argument("--batch-s", type=int, default=30)
    p_design.add_argument("--step", type=float, default=0.05)
    p_design.add_argument("--out", required=True)
    p_design.set_defaults(func=cmd_design)

    p_report = sub.add_parser("report", help="merge runs into comparison tables")
    p_report.add_argument("--runs", nargs="*", default=[])
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=cmd_report)

    p_synth = sub.add_parser("synth", help="emit a grid network and Poisson demand")
    p_synth.add_argument("--grid", type=int, required=True)
    p_synth.add_argument("--rate", type=float, required=True, help="requests per hour")
    p_synth.add_argument("--duration-s", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UncoverableNodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCOVERABLE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, NetworkFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - unexpected failure path
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

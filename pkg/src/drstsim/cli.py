"""Command-line entry point: ``drstsim run|sweep|validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .demand import TractSet
from .errors import DrstError
from .sim import run
from .sweep import RUN_COLUMNS, SweepSpec, csv_text, emit_results, result_row, run_sweep

log = logging.getLogger("drstsim")

EXIT_CODES = {"parse": 2, "validation": 3, "network": 4, "io": 5}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario (run/validate) or sweep (sweep) file; defaults to the shipped scenario")
    p.add_argument("--network", help="network file, overrides the scenario's reference")
    p.add_argument("--tracts", help="tracts file, overrides the scenario's reference")
    p.add_argument("--seed", type=int, help="seed (run) or seed base (sweep)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drstsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    _common(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--keep-logs", action="store_true", help="write the event log as events.ndjson")

    p = sub.add_parser("sweep", help="run a fleet-size or randomness grid")
    _common(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--keep-logs", action="store_true", help="write one event log per run")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("validate", help="check input files without simulating")
    _common(p)
    p.add_argument("--sweep", action="store_true", help="treat --config as a sweep file")
    return parser


def cmd_run(args) -> int:
    cfg, network, tracts, paths = io.load_bundle(args.config, args.network, args.tracts, args.seed)
    result = run(cfg, network, tracts)
    row = result_row(cfg, result)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "indicators.csv"
        append = csv_path.exists() and csv_path.read_text().split("\n", 1)[0] == ",".join(RUN_COLUMNS)
        with csv_path.open("a" if append else "w") as fh:
            fh.write(csv_text([row], RUN_COLUMNS, header=not append))
        summary = {"provenance": {**paths, "seed": cfg.seed}, "result": row}
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if args.keep_logs:
            (out / "events.ndjson").write_text("".join(line + "\n" for line in result.log_lines()))
    except OSError as exc:
        from .errors import IoError

        raise IoError(str(exc)) from exc
    ind = result.indicators
    tuc = "NA" if ind.TUC is None else f"{ind.TUC:.3f}"
    print(f"NP={ind.NP} TDD={ind.TDD:.1f}km AWT={ind.AWT:.2f}min TPTT={ind.TPTT:.2f}h OC={ind.OC:.2f} TUC={tuc} -> {out}")
    return 0


def _sweep_inputs(args):
    sweep_path = args.config or io.data_path("fleet_mix_sweep.json")
    sf = io.load_sweep(sweep_path)
    if isinstance(sf.scenario, str):
        scen_path = io._resolve(sf.scenario, sweep_path)
        cfg, network, tracts, paths = io.load_bundle(scen_path, args.network, args.tracts)
    else:
        cfg, scen = io.scenario_from_doc(sf.scenario, f"{sweep_path}:scenario")
        net_ref = args.network or (scen.network and io._resolve(scen.network, sweep_path)) or io.data_path("ragusa_like_network.json")
        tr_ref = args.tracts or (scen.tracts and io._resolve(scen.tracts, sweep_path)) or io.data_path("ragusa_like_tracts.json")
        network = io.load_network(net_ref)
        tracts = TractSet(io.load_tracts(tr_ref), cfg.demand.gravity_exponent, cfg.demand.origin_weighting)
        paths = {"scenario": f"{sweep_path}:scenario", "network": str(net_ref), "tracts": str(tr_ref)}
    spec = SweepSpec(
        base=cfg,
        axis=sf.axis,
        values=tuple(sf.values),
        replications=sf.replications,
        seed_base=sf.seed_base if args.seed is None else args.seed,
        total_seats=sf.total_seats,
        strategies=tuple(sf.strategies) if sf.strategies else None,
    )
    paths["sweep"] = str(sweep_path)
    return spec, network, tracts, paths


def cmd_sweep(args) -> int:
    spec, network, tracts, paths = _sweep_inputs(args)
    rows, logs = run_sweep(spec, network, tracts, workers=args.workers, keep_logs=args.keep_logs)
    prov = {**paths, "seed_base": spec.seed_base, "replications": spec.replications, "axis": spec.axis}
    written = emit_results(rows, args.out, logs, prov)
    print(f"{len(rows)} runs -> {written['csv']}")
    return 0


def cmd_validate(args) -> int:
    if args.sweep:
        spec, network, _, paths = _sweep_inputs(args)
        extra = {"runs": len(spec.configs())}
    else:
        cfg, network, _, paths = io.load_bundle(args.config, args.network, args.tracts, args.seed)
        extra = {}
    report = {
        "ok": True,
        **paths,
        "stops": len(network.stops),
        "diversion_nodes": list(network.diversion_nodes),
        "flex_routes": sorted(network.flex_routes),
        **extra,
    }
    print(json.dumps(report, sort_keys=True))
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DrstError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())

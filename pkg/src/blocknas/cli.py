"""Command-line interface: search, decode, analyze, export.

Exit code 0 on success; failures print one machine-parsable line to stderr
(`error: <class>: <message>`) and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    FrontSnapshot,
    knee_and_boundary,
    normalized_hv_series,
    objective_bounds,
)
from .engine import (
    EngineConfig,
    SearchEngine,
    config_from_mapping,
    parse_config_file,
)
from .errors import BlocknasError, SchemaError
from .phenotype import mobile_feasible, report_doc
from .run_io import read_evaluations, read_front, read_genomes, read_json, write_json


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blocknas", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="run a seeded multi-objective search")
    p_search.add_argument("--config", type=Path, help="key = value config file")
    p_search.add_argument("--seed", type=int)
    p_search.add_argument("--algo", choices=("nsga2_sbx", "nsga2_de", "moead", "smsemoa"))
    p_search.add_argument("--variant", choices=("v1", "v2"))
    p_search.add_argument("--evaluator-cmd", help="external evaluator command (default: built-in surrogate)")
    p_search.add_argument("--generations", type=int)
    p_search.add_argument("--population", type=int)
    p_search.add_argument("--parallel", type=int)
    p_search.add_argument("--out", type=Path, help="run directory (resumes if it has a checkpoint)")

    p_decode = sub.add_parser("decode", help="decode a real-genome file to an architecture graph")
    p_decode.add_argument("genome", type=Path, help="JSON array of reals, or {'real': [...]}")
    p_decode.add_argument("--variant", choices=("v1", "v2"), default="v2")
    p_decode.add_argument("--config", type=Path)
    p_decode.add_argument("--out", type=Path, required=True)
    p_decode.add_argument("--report", action="store_true", help="also write shapes/params report")

    p_analyze = sub.add_parser("analyze", help="recompute report, tables and figures for a run")
    p_analyze.add_argument("run_dir", type=Path)
    p_analyze.add_argument("--out", type=Path, help="report directory (default <run_dir>/report)")

    p_export = sub.add_parser("export", help="export architecture files for a stored solution")
    p_export.add_argument("run_dir", type=Path)
    p_export.add_argument("--select", choices=("knee", "boundary_light", "boundary_heavy", "best_f1"))
    p_export.add_argument("--id", type=int, dest="individual_id")
    p_export.add_argument("--out", type=Path, required=True)
    return parser


def _load_engine_config(config_path: Path | None, args: argparse.Namespace) -> EngineConfig:
    mapping = parse_config_file(config_path) if config_path else {}
    overrides = {
        "seed": getattr(args, "seed", None),
        "algorithm": getattr(args, "algo", None),
        "variant": getattr(args, "variant", None),
        "evaluator_cmd": getattr(args, "evaluator_cmd", None),
        "generations": getattr(args, "generations", None),
        "population": getattr(args, "population", None),
        "parallel": getattr(args, "parallel", None),
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    return config_from_mapping(mapping)


def cmd_search(args: argparse.Namespace) -> int:
    config = _load_engine_config(args.config, args)
    out_dir = args.out
    if out_dir is None:
        s = config.search
        out_dir = Path("runs") / f"{config.variant.value}-{s.algorithm}-seed{s.seed}"
    result = SearchEngine(config, out_dir).run()
    print(result.out_dir)
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    mapping = parse_config_file(args.config) if args.config else {}
    mapping.setdefault("variant", args.variant)
    config = config_from_mapping(mapping)
    engine = SearchEngine(config, out_dir=None)

    try:
        doc = json.loads(args.genome.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read genome file: {exc}") from exc
    real = doc.get("real") if isinstance(doc, dict) else doc
    if not isinstance(real, list):
        raise SchemaError("genome file must hold a JSON array or {'real': [...]}")
    expected = engine.codec.total_length
    if len(real) != expected:
        raise SchemaError(f"expected {expected} genes for variant {config.variant.value}, got {len(real)}")

    stages = engine.codec.decode(np.asarray(real, dtype=np.float64))
    graph, shapes, report = engine.phenotype_of(stages)
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "arch.graph.json", graph.to_doc())
    (args.out / "arch.dot").write_text(graph.to_dot())
    if args.report:
        write_json(args.out / "arch.report.json", report_doc(graph, shapes, report))
    print(args.out / "arch.graph.json")
    return 0


def _load_snapshots(run_dir: Path) -> list[FrontSnapshot]:
    gen_dir = run_dir / "generations"
    snapshots = []
    for path in sorted(gen_dir.glob("*.front")):
        members = tuple((r["id"], r["objectives"]) for r in read_front(path))
        snapshots.append(FrontSnapshot(generation=int(path.stem), members=members))
    return snapshots


def cmd_analyze(args: argparse.Namespace) -> int:
    run_dir = args.run_dir
    if not (run_dir / "manifest.json").exists():
        raise SchemaError(f"{run_dir} is not a run directory (missing manifest.json)")
    evaluations = read_evaluations(run_dir / "evaluations.csv")
    snapshots = _load_snapshots(run_dir)
    final_front = read_front(run_dir / "archive.front")

    ideal, nadir = objective_bounds([row["objectives"] for row in evaluations])
    series = normalized_hv_series(snapshots, ideal, nadir)
    sel = knee_and_boundary(
        [r["objectives"] for r in final_front], [r["id"] for r in final_front]
    )
    best = min(final_front, key=lambda r: (r["objectives"].f1, r["id"]))

    def row_doc(row: dict) -> dict:
        madds = int(row["objectives"].f2)
        return {
            "id": row["id"],
            "f1": row["objectives"].f1,
            "f2": madds,
            "params": row["params"],
            "madds_millions": madds / 1e6,
            "mobile_feasible": mobile_feasible(madds),
        }

    report = {
        "bounds": {"ideal": [ideal.f1, ideal.f2], "nadir": [nadir.f1, nadir.f2]},
        "hv_normalized": series,
        "final_hv_normalized": series[-1] if series else 0.0,
        "selections": {
            "knee": row_doc(final_front[sel.knee]),
            "boundary_light": row_doc(final_front[sel.boundary_light]),
            "boundary_heavy": row_doc(final_front[sel.boundary_heavy]),
            "best_f1": row_doc(best),
        },
        "front": [row_doc(r) for r in final_front],
        "mobile_feasible_front": sum(1 for r in final_front if mobile_feasible(int(r["objectives"].f2))),
        "evaluation_requests": len(evaluations),
        "evaluator_calls": sum(1 for r in evaluations if not r["cached"]),
    }

    out = args.out or (run_dir / "report")
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report)
    with (out / "hv_series.csv").open("w") as fh:
        fh.write("generation,hv_normalized\n")
        for snap, hv in zip(snapshots, series):
            fh.write(f"{snap.generation},{hv!r}\n")
    with (out / "front_scatter.csv").open("w") as fh:
        fh.write("id,birth_gen,f1,f2\n")
        for row in evaluations:
            fh.write(f"{row['id']},{row['birth_gen']},{row['objectives'].f1!r},{int(row['objectives'].f2)}\n")

    from .plots import render_front_scatter, render_hv_series

    render_hv_series(series, out / "hv_series.png")
    render_front_scatter(
        [(r["birth_gen"], r["objectives"].f1, r["objectives"].f2) for r in evaluations],
        [(r["objectives"].f1, r["objectives"].f2) for r in final_front],
        out / "front_scatter.png",
    )
    print(out / "report.json")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    run_dir = args.run_dir
    manifest = read_json(run_dir / "manifest.json")
    config = config_from_mapping({k: str(v) for k, v in manifest["config"].items()})
    engine = SearchEngine(config, out_dir=None)

    if (args.select is None) == (args.individual_id is None):
        raise SchemaError("provide exactly one of --select or --id")
    if args.select is not None:
        sel = read_json(run_dir / "selections" / f"{args.select}.json")
        stages_genes = sel["genotype"]["stages"]
        name = args.select
    else:
        genomes = read_genomes(run_dir / "genomes.jsonl")
        if args.individual_id not in genomes:
            raise SchemaError(f"individual {args.individual_id} not found in genomes.jsonl")
        stages_genes = genomes[args.individual_id]["stages"]
        name = f"id{args.individual_id}"

    from .cgp import IntegerCgpGenome

    stages = tuple(IntegerCgpGenome(genes=tuple(g)) for g in stages_genes)
    graph, shapes, report = engine.phenotype_of(stages)
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / f"{name}.graph.json", graph.to_doc())
    (args.out / f"{name}.dot").write_text(graph.to_dot())
    write_json(args.out / f"{name}.report.json", report_doc(graph, shapes, report))
    print(args.out / f"{name}.graph.json")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "search": cmd_search,
        "decode": cmd_decode,
        "analyze": cmd_analyze,
        "export": cmd_export,
    }
    try:
        return handlers[args.command](args)
    except BlocknasError as exc:
        print(f"error: {exc.error_class}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

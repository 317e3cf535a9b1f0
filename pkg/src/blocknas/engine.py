"""End-to-end search orchestration: config, run loop, persistence, resume.

Random-stream discipline: one root seed spawns independent child streams per
purpose (init, variation, encode), so adding consumers to one stream never
shifts another.  Evaluation batches may run with parallelism, but results are
reattached by position, keeping the trajectory independent of completion
order.  A checkpoint is written after every generation; re-running the same
output directory resumes from it with an identical continuation.
"""

from __future__ import annotations

import shlex
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import (
    FrontSnapshot,
    knee_and_boundary,
    normalized_hv_series,
    objective_bounds,
)
from .cgp import IntegerCgpGenome, random_genome
from .codec import GenomeCodec
from .errors import ConfigError, ShapeError
from .evaluator import EvaluationCache, ExternalEvaluator, surrogate_evaluate
from .moea import (
    Archive,
    Individual,
    ObjectiveVector,
    STEPPERS,
    SearchConfig,
    SearchState,
    assign_ranks,
    init_moead,
)
from .phenotype import (
    TensorShape,
    complexity,
    decode_architecture,
    mobile_feasible,
    propagate_shapes,
    report_doc,
)
from .run_io import (
    append_lines,
    eval_row,
    genome_line,
    individual_from_doc,
    individual_to_doc,
    read_front,
    read_json,
    rng_state_from_doc,
    rng_state_to_doc,
    truncate_log,
    write_front,
    write_json,
    EVAL_HEADER,
)
from .space import BlockTemplate, Variant, template_default

VERSION = "0.1.0"

SELECTION_ROLES = ("knee", "boundary_light", "boundary_heavy", "best_f1")


@dataclass
class EngineConfig:
    """Search config plus everything the engine needs around it."""

    search: SearchConfig = field(default_factory=SearchConfig)
    variant: Variant = Variant.V2
    rows: int | None = None
    cols: int | None = None
    level_back: int = 1
    v1_full_function_set: bool = False
    input_shape: tuple[int, int, int] = (3, 32, 32)
    n_classes: int = 10
    epochs: int = 36
    dataset: str = "cifar10"
    evaluator_cmd: str | None = None
    evaluator_timeout: float = 0.0
    parallel: int = 1
    failure_madds: int = 10**12

    def build_template(self) -> BlockTemplate:
        return template_default(
            self.variant,
            rows=self.rows,
            cols=self.cols,
            level_back=self.level_back,
            v1_stage_restricted=not self.v1_full_function_set,
        )


_BOOL_KEYS = {"v1_full_function_set"}
_INT_KEYS = {
    "rows", "columns", "level_back", "population", "generations", "seed",
    "moead_neighborhood", "n_classes", "epochs", "parallel", "failure_madds",
}
_FLOAT_KEYS = {"pm", "pc", "sbx_eta", "pm_eta", "de_cr", "de_f", "evaluator_timeout"}
_STR_KEYS = {"algorithm", "variant", "dataset", "evaluator_cmd", "input_shape"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def parse_config_file(path: Path) -> dict[str, str]:
    """`key = value` lines; blank lines and # comments ignored."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        mapping[key] = value
    return mapping


def config_from_mapping(mapping: dict[str, str]) -> EngineConfig:
    def coerce(key: str, value: str):
        if key in _BOOL_KEYS:
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        try:
            if key in _INT_KEYS:
                return int(value)
            if key in _FLOAT_KEYS:
                return float(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
        return value

    values = {k: coerce(k, v) for k, v in mapping.items()}
    search_kwargs = {}
    for src, dst in (
        ("population", "population_size"), ("generations", "generations"),
        ("pm", "pm"), ("pc", "pc"), ("sbx_eta", "sbx_eta"), ("pm_eta", "pm_eta"),
        ("algorithm", "algorithm"), ("de_cr", "de_cr"), ("de_f", "de_f"),
        ("moead_neighborhood", "moead_neighborhood"), ("seed", "seed"),
    ):
        if src in values:
            search_kwargs[dst] = values.pop(src)
    engine_kwargs = {}
    if "variant" in values:
        try:
            engine_kwargs["variant"] = Variant(values.pop("variant"))
        except ValueError as exc:
            raise ConfigError(f"variant: {exc}") from exc
    if "columns" in values:
        engine_kwargs["cols"] = values.pop("columns")
    if "input_shape" in values:
        parts = values.pop("input_shape").lower().split("x")
        if len(parts) != 3:
            raise ConfigError("input_shape must look like 3x32x32")
        engine_kwargs["input_shape"] = tuple(int(p) for p in parts)
    if "evaluator_cmd" in values:
        cmd = values.pop("evaluator_cmd")
        engine_kwargs["evaluator_cmd"] = cmd or None
    engine_kwargs.update(values)
    return EngineConfig(search=SearchConfig(**search_kwargs), **engine_kwargs)


def config_to_mapping(config: EngineConfig, template: BlockTemplate) -> dict:
    """Flat echo of every effective setting (grid sizes resolved)."""
    grid = template.normal_stages[0].grid
    s = config.search
    return {
        "algorithm": s.algorithm,
        "variant": config.variant.value,
        "rows": grid.rows,
        "columns": grid.cols,
        "level_back": grid.level_back,
        "population": s.population_size,
        "generations": s.generations,
        "pm": s.pm,
        "pc": s.pc,
        "sbx_eta": s.sbx_eta,
        "pm_eta": s.pm_eta,
        "de_cr": s.de_cr,
        "de_f": s.de_f,
        "moead_neighborhood": s.moead_neighborhood,
        "seed": s.seed,
        "v1_full_function_set": config.v1_full_function_set,
        "input_shape": "x".join(str(v) for v in config.input_shape),
        "n_classes": config.n_classes,
        "epochs": config.epochs,
        "dataset": config.dataset,
        "evaluator_cmd": config.evaluator_cmd or "",
        "evaluator_timeout": config.evaluator_timeout,
        "parallel": config.parallel,
        "failure_madds": config.failure_madds,
    }


@dataclass(frozen=True)
class EvalOutcome:
    f1: float
    failed: bool
    madds: int
    params: int


@dataclass
class RunResult:
    out_dir: Path | None
    population: list[Individual]
    archive: Archive
    snapshots: list[FrontSnapshot]
    eval_log: list[dict]
    summary: dict
    manifest: dict


class SearchEngine:
    """Owns one run: streams, evaluation pipeline, persistence."""

    def __init__(self, config: EngineConfig, out_dir: str | Path | None = None):
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.template = config.build_template()
        self.codec = GenomeCodec.for_template(self.template)
        self.input_shape = TensorShape(*config.input_shape)
        seq = np.random.SeedSequence(config.search.seed)
        init_seq, var_seq, enc_seq = seq.spawn(3)
        self.rng = {
            "init": np.random.default_rng(init_seq),
            "variation": np.random.default_rng(var_seq),
            "encode": np.random.default_rng(enc_seq),
        }
        self.cache = EvaluationCache()
        self.archive = Archive()
        self.snapshots: list[FrontSnapshot] = []
        self.eval_log: list[dict] = []
        self._next_id = 0
        self._current_gen = 0
        self._external: ExternalEvaluator | None = None
        if config.evaluator_cmd:
            self._external = ExternalEvaluator(
                shlex.split(config.evaluator_cmd),
                timeout=config.evaluator_timeout,
                max_inflight=config.parallel,
                epochs=config.epochs,
                dataset=config.dataset,
                variant=config.variant.value,
            )
        self.manifest = self._build_manifest()

    # ------------------------------------------------------------------
    # Evaluation pipeline

    def phenotype_of(self, stages: Sequence[IntegerCgpGenome]):
        graph = decode_architecture(stages, self.template, self.input_shape, self.config.n_classes)
        shapes = propagate_shapes(graph)
        return graph, shapes, complexity(graph, shapes)

    def _evaluate(self, reals: list[np.ndarray]) -> list[Individual]:
        inds: list[Individual] = []
        for real in reals:
            real = np.asarray(real, dtype=np.float64)
            stages = self.codec.decode(real)
            inds.append(
                Individual(id=self._next_id, real=real.copy(), stages=stages, birth_gen=self._current_gen)
            )
            self._next_id += 1

        outcomes: dict[tuple, EvalOutcome | None] = {}
        rep: dict[tuple, Individual] = {}
        fresh: list[tuple] = []
        for ind in inds:
            key = ind.genotype_key()
            if key in outcomes:
                continue
            cached = self.cache.get(key)
            outcomes[key] = cached
            if cached is None:
                fresh.append(key)
                rep[key] = ind

        graphs = {}
        for key in list(fresh):
            try:
                graph, _, report = self.phenotype_of(rep[key].stages)
                graphs[key] = (graph, report)
            except ShapeError:
                outcomes[key] = EvalOutcome(
                    f1=1.0, failed=True, madds=self.config.failure_madds, params=0
                )
                self.cache.put(key, outcomes[key])
                fresh.remove(key)

        if fresh:
            if self._external is not None:
                docs = [graphs[key][0].to_doc() for key in fresh]
                results = self._external.evaluate_graphs(docs)
            else:
                def run_one(key):
                    graph, report = graphs[key]
                    return surrogate_evaluate(graph, report)

                if self.config.parallel > 1:
                    with ThreadPoolExecutor(max_workers=self.config.parallel) as pool:
                        results = list(pool.map(run_one, fresh))
                else:
                    results = [run_one(key) for key in fresh]
            for key, result in zip(fresh, results):
                report = graphs[key][1]
                if result.ok:
                    outcome = EvalOutcome(
                        f1=float(result.error), failed=False, madds=report.madds, params=report.params
                    )
                else:
                    # Complexity is known analytically; punish only the error objective.
                    outcome = EvalOutcome(f1=1.0, failed=True, madds=report.madds, params=report.params)
                outcomes[key] = outcome
                self.cache.put(key, outcome)

        rep_ids = {r.id for r in rep.values()}
        log_lines = []
        genome_lines = []
        for ind in inds:
            outcome = outcomes[ind.genotype_key()]
            ind.objectives = ObjectiveVector(outcome.f1, float(outcome.madds))
            ind.params = outcome.params
            ind.failed = outcome.failed
            cached = ind.id not in rep_ids
            row = {
                "id": ind.id,
                "birth_gen": ind.birth_gen,
                "objectives": ind.objectives,
                "params": ind.params,
                "status": "failed" if ind.failed else "ok",
                "cached": cached,
            }
            self.eval_log.append(row)
            log_lines.append(eval_row(ind, cached))
            genome_lines.append(genome_line(ind))
        if self.out_dir is not None:
            append_lines(self.out_dir / "evaluations.csv", log_lines, header=EVAL_HEADER)
            append_lines(self.out_dir / "genomes.jsonl", genome_lines)
        self.archive.update_all(inds)
        return inds

    # ------------------------------------------------------------------
    # Run loop

    def _initial_population(self) -> list[Individual]:
        reals = []
        for _ in range(self.config.search.population_size):
            stages = tuple(
                random_genome(s.grid, s.arities, s.hyper_totals, self.rng["init"])
                for s in self.template.normal_stages
            )
            reals.append(self.codec.encode(stages, self.rng["encode"]))
        population = self._evaluate(reals)
        assign_ranks(population)
        return population

    def _snapshot(self, generation: int) -> None:
        snap = FrontSnapshot(
            generation=generation,
            members=tuple((m.id, m.objectives) for m in self.archive.members),
        )
        self.snapshots.append(snap)
        if self.out_dir is not None:
            write_front(self.out_dir / "generations" / f"{generation:03d}.front", self.archive.members)

    def run(self) -> RunResult:
        cfg = self.config.search
        state: SearchState | None = None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            (self.out_dir / "generations").mkdir(exist_ok=True)
            checkpoint = self.out_dir / "checkpoint.json"
            if checkpoint.exists():
                state = self._restore(checkpoint)
            else:
                write_json(self.out_dir / "manifest.json", self.manifest)
        if state is None:
            self._current_gen = 0
            population = self._initial_population()
            state = SearchState(
                config=cfg,
                population=population,
                slices=self.codec.slices,
                evaluate=self._evaluate,
                archive=self.archive,
                rng_variation=self.rng["variation"],
                generation=0,
            )
            if cfg.algorithm == "moead":
                init_moead(state)
            self._snapshot(0)
            self._checkpoint(state)

        step = STEPPERS[cfg.algorithm]
        while state.generation < cfg.generations:
            self._current_gen = state.generation + 1
            step(state)
            self._snapshot(state.generation)
            self._checkpoint(state)

        summary = self._finalize(state)
        if self._external is not None:
            self._external.close()
        return RunResult(
            out_dir=self.out_dir,
            population=state.population,
            archive=self.archive,
            snapshots=self.snapshots,
            eval_log=self.eval_log,
            summary=summary,
            manifest=self.manifest,
        )

    # ------------------------------------------------------------------
    # Persistence

    def _build_manifest(self) -> dict:
        stages_doc = []
        for stage in self.template.stages:
            if hasattr(stage, "grid"):
                stages_doc.append(
                    {
                        "kind": "normal",
                        "index": stage.index,
                        "rows": stage.grid.rows,
                        "cols": stage.grid.cols,
                        "level_back": stage.grid.level_back,
                        "channel_options": list(stage.channel_options),
                        "n_functions": len(stage.function_set),
                        "function_set": [spec.label() for spec in stage.function_set],
                        "hyper_totals": list(stage.hyper_totals),
                        "genome_length": stage.genome_length,
                    }
                )
            else:
                stages_doc.append({"kind": "reduction", "pool_size": stage.pool_size, "stride": stage.stride})
        return {
            "engine": "blocknas",
            "engine_version": VERSION,
            "seed": self.config.search.seed,
            "config": config_to_mapping(self.config, self.template),
            "template": {"variant": self.config.variant.value, "stages": stages_doc},
            "codec": {
                "total_length": self.codec.total_length,
                "subvector_lengths": [b.length for b in self.codec.blocks],
            },
        }

    def _checkpoint(self, state: SearchState) -> None:
        if self.out_dir is None:
            return
        moead_doc = None
        if state.moead is not None:
            ms = state.moead
            moead_doc = {
                "z": [float(ms.z[0]), float(ms.z[1])],
                "f2_lo": ms.f2_lo,
                "f2_hi": ms.f2_hi,
            }
        doc = {
            "generation": state.generation,
            "next_id": self._next_id,
            "cache_counters": {"hits": self.cache.hits, "misses": self.cache.misses},
            "rng": {name: rng_state_to_doc(rng) for name, rng in self.rng.items()},
            "population": [individual_to_doc(ind) for ind in state.population],
            "archive": [individual_to_doc(ind) for ind in self.archive.members],
            "moead": moead_doc,
            "cache": [
                {
                    "stages": [list(genes) for genes in key],
                    "f1": outcome.f1,
                    "failed": outcome.failed,
                    "madds": outcome.madds,
                    "params": outcome.params,
                }
                for key, outcome in self.cache.items()
            ],
            "eval_log": [
                {
                    "id": row["id"],
                    "birth_gen": row["birth_gen"],
                    "f1": row["objectives"].f1,
                    "f2": row["objectives"].f2,
                    "params": row["params"],
                    "status": row["status"],
                    "cached": row["cached"],
                }
                for row in self.eval_log
            ],
        }
        write_json(self.out_dir / "checkpoint.json", doc)

    def _restore(self, checkpoint: Path) -> SearchState:
        doc = read_json(checkpoint)
        self._next_id = doc["next_id"]
        self.cache.hits = doc["cache_counters"]["hits"]
        self.cache.misses = doc["cache_counters"]["misses"]
        for name in self.rng:
            self.rng[name] = rng_state_from_doc(doc["rng"][name])
        population = [individual_from_doc(d) for d in doc["population"]]
        self.archive = Archive()
        self.archive.update_all([individual_from_doc(d) for d in doc["archive"]])
        for entry in doc["cache"]:
            key = tuple(tuple(genes) for genes in entry["stages"])
            self.cache.restore(
                key,
                EvalOutcome(
                    f1=entry["f1"], failed=entry["failed"], madds=entry["madds"], params=entry["params"]
                ),
            )
        self.eval_log = [
            {
                "id": row["id"],
                "birth_gen": row["birth_gen"],
                "objectives": ObjectiveVector(row["f1"], row["f2"]),
                "params": row["params"],
                "status": row["status"],
                "cached": row["cached"],
            }
            for row in doc["eval_log"]
        ]
        truncate_log(self.out_dir / "evaluations.csv", self._next_id, has_header=True)
        truncate_log(self.out_dir / "genomes.jsonl", self._next_id, has_header=False)

        generation = doc["generation"]
        self.snapshots = []
        for gen in range(generation + 1):
            front_path = self.out_dir / "generations" / f"{gen:03d}.front"
            members = tuple((r["id"], r["objectives"]) for r in read_front(front_path))
            self.snapshots.append(FrontSnapshot(generation=gen, members=members))

        state = SearchState(
            config=self.config.search,
            population=population,
            slices=self.codec.slices,
            evaluate=self._evaluate,
            archive=self.archive,
            rng_variation=self.rng["variation"],
            generation=generation,
        )
        if self.config.search.algorithm == "moead":
            init_moead(state)
            ms_doc = doc["moead"]
            state.moead.z = np.asarray(ms_doc["z"], dtype=np.float64)
            state.moead.f2_lo = ms_doc["f2_lo"]
            state.moead.f2_hi = ms_doc["f2_hi"]
        return state

    # ------------------------------------------------------------------
    # Finalization

    def selections(self) -> dict[str, Individual]:
        members = self.archive.members
        sel = knee_and_boundary([m.objectives for m in members], [m.id for m in members])
        best = min(members, key=lambda m: (m.objectives.f1, m.id))
        return {
            "knee": members[sel.knee],
            "boundary_light": members[sel.boundary_light],
            "boundary_heavy": members[sel.boundary_heavy],
            "best_f1": best,
        }

    def _selection_doc(self, ind: Individual) -> dict:
        return {
            "id": ind.id,
            "f1": ind.objectives.f1,
            "f2": int(ind.objectives.f2),
            "params": ind.params,
            "madds_millions": int(ind.objectives.f2) / 1e6,
            "mobile_feasible": mobile_feasible(int(ind.objectives.f2)),
            "birth_gen": ind.birth_gen,
            "genotype": {
                "real": [float(v) for v in ind.real],
                "stages": [list(g.genes) for g in ind.stages],
            },
        }

    def _finalize(self, state: SearchState) -> dict:
        ideal, nadir = objective_bounds([row["objectives"] for row in self.eval_log])
        series = normalized_hv_series(self.snapshots, ideal, nadir)
        picks = self.selections()
        summary = {
            "generations": state.generation,
            "evaluation_requests": len(self.eval_log),
            "evaluator_calls": self.cache.misses,
            "front_size": len(self.archive.members),
            "bounds": {"ideal": [ideal.f1, ideal.f2], "nadir": [nadir.f1, nadir.f2]},
            "hv_normalized": series,
            "final_hv_normalized": series[-1] if series else 0.0,
            "selections": {
                role: {k: v for k, v in self._selection_doc(ind).items() if k != "genotype"}
                for role, ind in picks.items()
            },
            "mobile_feasible_front": sum(
                1 for m in self.archive.members if mobile_feasible(int(m.objectives.f2))
            ),
        }
        if self.out_dir is not None:
            write_front(self.out_dir / "archive.front", self.archive.members)
            with (self.out_dir / "hv_series.csv").open("w") as fh:
                fh.write("generation,hv_normalized\n")
                for snap, hv in zip(self.snapshots, series):
                    fh.write(f"{snap.generation},{hv!r}\n")
            sel_dir = self.out_dir / "selections"
            sel_dir.mkdir(exist_ok=True)
            exp_dir = self.out_dir / "exports"
            exp_dir.mkdir(exist_ok=True)
            for role, ind in picks.items():
                write_json(sel_dir / f"{role}.json", self._selection_doc(ind))
                graph, shapes, report = self.phenotype_of(ind.stages)
                write_json(exp_dir / f"{role}.graph.json", graph.to_doc())
                (exp_dir / f"{role}.dot").write_text(graph.to_dot())
                write_json(exp_dir / f"{role}.report.json", report_doc(graph, shapes, report))
            write_json(self.out_dir / "summary.json", summary)
        return summary


def run_search(config: EngineConfig, out_dir: str | Path | None = None) -> RunResult:
    return SearchEngine(config, out_dir).run()

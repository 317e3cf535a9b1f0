"""Run-directory persistence.

Layout (documented in docs/schemas.md):

    manifest.json        config snapshot, template, codec context, seed
    evaluations.csv      every evaluation request, one row per individual
    genomes.jsonl        id -> real vector + per-stage integer genomes
    generations/NNN.front   archive snapshot after generation NNN
    archive.front        final archive
    selections/*.json    knee / boundary / best-error picks
    exports/*            graph + DOT files for the selections
    summary.json         run-level numbers (replayable via `analyze`)
    checkpoint.json      resume state (populations, rng streams, memo)
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cgp import IntegerCgpGenome
from .moea import Individual, ObjectiveVector

FRONT_HEADER = "id,f1,f2,params,madds_millions,genotype"
EVAL_HEADER = "id,birth_gen,f1,f2,params,status,cached"


def write_json(path: Path, doc: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_json(path: Path) -> dict:
    return json.loads(path.read_text())


def front_row(ind: Individual) -> str:
    obj = ind.objectives
    return ",".join(
        [
            str(ind.id),
            repr(float(obj.f1)),
            str(int(obj.f2)),
            str(ind.params),
            repr(int(obj.f2) / 1e6),
            f"genomes.jsonl:{ind.id}",
        ]
    )


def write_front(path: Path, members: Sequence[Individual]) -> None:
    lines = [FRONT_HEADER]
    lines.extend(front_row(m) for m in sorted(members, key=lambda m: m.id))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_front(path: Path) -> list[dict]:
    rows = []
    lines = path.read_text().splitlines()
    if not lines or lines[0] != FRONT_HEADER:
        raise ValueError(f"{path} is not a front table")
    for line in lines[1:]:
        id_, f1, f2, params, mm, ref = line.split(",")
        rows.append(
            {
                "id": int(id_),
                "objectives": ObjectiveVector(float(f1), float(f2)),
                "params": int(params),
                "madds_millions": float(mm),
                "genotype": ref,
            }
        )
    return rows


def eval_row(ind: Individual, cached: bool) -> str:
    obj = ind.objectives
    status = "failed" if ind.failed else "ok"
    return ",".join(
        [
            str(ind.id),
            str(ind.birth_gen),
            repr(float(obj.f1)),
            str(int(obj.f2)),
            str(ind.params),
            status,
            "1" if cached else "0",
        ]
    )


def append_lines(path: Path, lines: Iterable[str], header: str | None = None) -> None:
    new_file = not path.exists()
    with path.open("a") as fh:
        if new_file and header:
            fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def read_evaluations(path: Path) -> list[dict]:
    rows = []
    lines = path.read_text().splitlines()
    if not lines or lines[0] != EVAL_HEADER:
        raise ValueError(f"{path} is not an evaluations log")
    for line in lines[1:]:
        id_, gen, f1, f2, params, status, cached = line.split(",")
        rows.append(
            {
                "id": int(id_),
                "birth_gen": int(gen),
                "objectives": ObjectiveVector(float(f1), float(f2)),
                "params": int(params),
                "status": status,
                "cached": cached == "1",
            }
        )
    return rows


def genome_line(ind: Individual) -> str:
    return json.dumps(
        {
            "id": ind.id,
            "real": [float(v) for v in ind.real],
            "stages": [list(g.genes) for g in ind.stages],
        },
        sort_keys=True,
    )


def read_genomes(path: Path) -> dict[int, dict]:
    out = {}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        out[doc["id"]] = doc
    return out


def truncate_log(path: Path, keep_below_id: int, has_header: bool) -> None:
    """Drop rows written past the last checkpoint (interrupted generation)."""
    if not path.exists():
        return
    lines = path.read_text().splitlines()
    kept = []
    for i, line in enumerate(lines):
        if has_header and i == 0:
            kept.append(line)
            continue
        if not line.strip():
            continue
        if has_header:
            row_id = int(line.split(",", 1)[0])
        else:
            row_id = json.loads(line)["id"]
        if row_id < keep_below_id:
            kept.append(line)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(kept) + ("\n" if kept else ""))
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Checkpoint serialization


def individual_to_doc(ind: Individual) -> dict:
    return {
        "id": ind.id,
        "real": [float(v) for v in ind.real],
        "stages": [list(g.genes) for g in ind.stages],
        "f1": float(ind.objectives.f1),
        "f2": float(ind.objectives.f2),
        "params": ind.params,
        "failed": ind.failed,
        "birth_gen": ind.birth_gen,
        "rank": ind.rank,
        "crowding": None if np.isinf(ind.crowding) else float(ind.crowding),
    }


def individual_from_doc(doc: dict) -> Individual:
    return Individual(
        id=doc["id"],
        real=np.asarray(doc["real"], dtype=np.float64),
        stages=tuple(IntegerCgpGenome(genes=tuple(genes)) for genes in doc["stages"]),
        objectives=ObjectiveVector(doc["f1"], doc["f2"]),
        params=doc["params"],
        failed=doc["failed"],
        birth_gen=doc["birth_gen"],
        rank=doc["rank"],
        crowding=np.inf if doc["crowding"] is None else doc["crowding"],
    )


def rng_state_to_doc(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "state": {k: str(v) for k, v in state["state"].items()},
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }


def rng_state_from_doc(doc: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = {
        "bit_generator": doc["bit_generator"],
        "state": {k: int(v) for k, v in doc["state"].items()},
        "has_uint32": doc["has_uint32"],
        "uinteger": doc["uinteger"],
    }
    return rng

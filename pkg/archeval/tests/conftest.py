import json
import subprocess
import sys
from pathlib import Path

import pytest


def decode_via_engine(real_vector, out_dir: Path, variant="v2"):
    """Drive the engine CLI to turn a real vector into graph + report docs."""
    genome_file = out_dir / "genome.json"
    genome_file.write_text(json.dumps(list(map(float, real_vector))))
    proc = subprocess.run(
        [
            sys.executable, "-m", "blocknas.cli", "decode", str(genome_file),
            "--variant", variant, "--out", str(out_dir), "--report",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    arch = json.loads((out_dir / "arch.graph.json").read_text())
    report = json.loads((out_dir / "arch.report.json").read_text())
    return arch, report


def identity_arch_doc(input_shape=(3, 16, 16), n_classes=2):
    """All-Identity architecture: identity stages, pools, pooled classifier."""
    nodes = [{"id": "input", "block_type": "Input", "channels": None, "kernel": None, "stage": None}]
    edges = []
    upstream = "input"
    for stage in range(3):
        nid = f"s{stage}n0"
        nodes.append({"id": nid, "block_type": "Identity", "channels": None, "kernel": None, "stage": stage})
        edges.append([upstream, nid])
        upstream = nid
        if stage < 2:
            pool = f"pool{stage + 1}"
            nodes.append({"id": pool, "block_type": "MaxPool2x2", "channels": None, "kernel": None, "stage": None})
            edges.append([upstream, pool])
            upstream = pool
    nodes.append({"id": "gap", "block_type": "GlobalAvgPool", "channels": None, "kernel": None, "stage": None})
    edges.append([upstream, "gap"])
    nodes.append({"id": "classifier", "block_type": "Classifier", "channels": None, "kernel": None, "stage": None})
    edges.append(["gap", "classifier"])
    return {
        "format": "arch-graph",
        "version": 1,
        "input_shape": list(input_shape),
        "n_classes": n_classes,
        "nodes": nodes,
        "edges": edges,
    }


@pytest.fixture
def identity_doc():
    return identity_arch_doc()

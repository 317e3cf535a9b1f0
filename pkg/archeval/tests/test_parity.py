"""Shape/parameter parity with the engine on random searched graphs."""

import numpy as np

from archeval.shapes import shape_check

from conftest import decode_via_engine

V2_REAL_LENGTH = 603


def test_fifty_random_v2_graphs_agree(tmp_path):
    """Zero disagreements between materialized models and the engine's
    propagated shapes / analytic parameter counts."""
    rng = np.random.default_rng(2024)
    for i in range(50):
        out = tmp_path / f"g{i}"
        out.mkdir()
        arch, report = decode_via_engine(rng.random(V2_REAL_LENGTH), out)
        disagreements = shape_check(arch, report)
        assert disagreements == [], f"graph {i}: {disagreements}"


def test_v1_graphs_agree_too(tmp_path):
    rng = np.random.default_rng(7)
    for i in range(5):
        out = tmp_path / f"g{i}"
        out.mkdir()
        arch, report = decode_via_engine(rng.random(1128), out, variant="v1")
        assert shape_check(arch, report) == []


def test_disagreement_is_reported(tmp_path):
    out = tmp_path / "g"
    out.mkdir()
    arch, report = decode_via_engine(np.full(V2_REAL_LENGTH, 0.5), out)
    report["nodes"][0]["shape"] = [1, 1, 1]
    report["params"] += 3
    issues = shape_check(arch, report)
    fields = {(d["id"], d["field"]) for d in issues}
    assert (report["nodes"][0]["id"], "shape") in fields
    assert ("<total>", "params") in fields

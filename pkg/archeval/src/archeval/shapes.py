"""Cross-implementation agreement: materialized model vs. engine report."""

from __future__ import annotations

from .model import GraphModel


def shape_check(arch_doc: dict, report_doc: dict) -> list[dict]:
    """Compare the materialized model against the engine's report.

    For every node, the real output shape of the torch module must equal the
    engine's propagated shape, and its parameter count must match the
    engine's analytic count exactly.  Returns a list of disagreements
    (empty = full agreement)."""
    model = GraphModel(arch_doc)
    shapes = model.node_output_shapes()
    params = model.node_parameter_counts()
    disagreements = []
    for entry in report_doc["nodes"]:
        nid = entry["id"]
        expected_shape = tuple(entry["shape"])
        if shapes.get(nid) != expected_shape:
            disagreements.append(
                {"id": nid, "field": "shape", "engine": list(expected_shape), "model": list(shapes.get(nid, ()))}
            )
        if params.get(nid, 0) != entry["params"]:
            disagreements.append(
                {"id": nid, "field": "params", "engine": entry["params"], "model": params.get(nid, 0)}
            )
    total = sum(p.numel() for p in model.parameters() if p.requires_grad)
    if total != report_doc["params"]:
        disagreements.append({"id": "<total>", "field": "params", "engine": report_doc["params"], "model": total})
    return disagreements

"""Graph decode, shape propagation, and complexity vs. an independent oracle.

The oracle counts MACs by materializing im2col sliding windows with numpy and
taking their element counts, over its own copy of the block decomposition
table from docs/schemas.md.  It never calls the engine's cost code.
"""

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view

from blocknas.cgp import IntegerCgpGenome, random_genome, trace_active
from blocknas.errors import ShapeError
from blocknas.phenotype import (
    ArchitectureGraph,
    GraphNode,
    TensorShape,
    complexity,
    decode_architecture,
    mobile_feasible,
    node_cost,
    propagate_shapes,
)
from blocknas.space import template_default

# ---------------------------------------------------------------------------
# Independent oracle


def oracle_conv_madds(c_in, c_out, k_h, k_w, h, w, groups=1):
    """MACs via an explicit im2col enumeration: one MAC per element of the
    materialized window view, per output channel."""
    padded = np.zeros((c_in // groups, h + k_h - 1, w + k_w - 1), dtype=np.int8)
    windows = sliding_window_view(padded, (k_h, k_w), axis=(1, 2))
    assert windows.shape[:3] == (c_in // groups, h, w)
    return windows.size * c_out


def oracle_conv_params(c_in, c_out, k_h, k_w, groups=1, bn=True):
    weight = np.empty((c_out, c_in // groups, k_h, k_w), dtype=np.int8)
    bn_terms = np.empty((2, c_out), dtype=np.int8).size if bn else 0
    return weight.size + bn_terms


def oracle_block(block_type, c_in, c, k):
    """(c_in, c_out, k_h, k_w, groups, bn) rows per the documented table."""
    if block_type == "ConvBlock":
        return [(c_in, c, k, k, 1, True)]
    if block_type == "ResBlock":
        rows = [(c_in, c, k, k, 1, True), (c, c, k, k, 1, True)]
        if c_in != c:
            rows.append((c_in, c, 1, 1, 1, True))
        return rows
    if block_type == "Bottleneck":
        mid = c // 4
        rows = [(c_in, mid, 1, 1, 1, True), (mid, mid, k, k, 1, True), (mid, c, 1, 1, 1, True)]
        if c_in != c:
            rows.append((c_in, c, 1, 1, 1, True))
        return rows
    if block_type == "SepConv":
        return [
            (c_in, c_in, k, k, c_in, False),
            (c_in, c, 1, 1, 1, True),
            (c, c, k, k, c, False),
            (c, c, 1, 1, 1, True),
        ]
    if block_type == "DiConv":
        return [(c_in, c, k, k, 1, True)]
    if block_type == "MBConv":
        e = 6 * c_in
        return [(c_in, e, 1, 1, 1, True), (e, e, k, k, e, True), (e, c, 1, 1, 1, True)]
    if block_type == "FusedMBConv":
        e = 6 * c_in
        return [(c_in, e, k, k, 1, True), (e, c, 1, 1, 1, True)]
    if block_type == "C1x7-7x1":
        return [(c_in, c_in, 1, 7, 1, True), (c_in, c_in, 7, 1, 1, True)]
    return []


def oracle_cost(block_type, c_in, c, k, h, w):
    rows = oracle_block(block_type, c_in, c, k)
    madds = sum(oracle_conv_madds(ci, co, kh, kw, h, w, g) for ci, co, kh, kw, g, _ in rows)
    params = sum(oracle_conv_params(ci, co, kh, kw, g, bn) for ci, co, kh, kw, g, bn in rows)
    return madds, params


PARAMETRIC = {
    "ConvBlock": (1, 3, 5, 7),
    "ResBlock": (3, 5, 7),
    "Bottleneck": (3, 5, 7),
    "FusedMBConv": (3, 5),
    "MBConv": (3, 5),
    "SepConv": (3, 5, 7),
    "DiConv": (3, 5),
}

SHAPES = [TensorShape(3, 32, 32), TensorShape(16, 16, 16), TensorShape(64, 8, 8)]


class TestComplexityOracle:
    def test_known_conv_block_count(self):
        node = GraphNode(id="n", block_type="ConvBlock", inputs=("input",), channels=32, kernel=3)
        madds, params = node_cost(node, [TensorShape(3, 32, 32)], n_classes=10)
        assert madds == 32 * 32 * 32 * (3 * 3 * 3) == 884_736
        assert params == 3 * 9 * 32 + 2 * 32 == 928

    @pytest.mark.parametrize("block_type,kernels", sorted(PARAMETRIC.items()))
    def test_all_parametric_blocks_match_oracle(self, block_type, kernels):
        for shape in SHAPES:
            for c in (32, 64, 128, 256):
                for k in kernels:
                    node = GraphNode(
                        id="n", block_type=block_type, inputs=("input",), channels=c, kernel=k
                    )
                    got = node_cost(node, [shape], n_classes=10)
                    want = oracle_cost(block_type, shape.channels, c, k, shape.height, shape.width)
                    assert got == want, (block_type, c, k, shape)

    def test_c1x7_7x1_matches_oracle(self):
        for shape in SHAPES:
            node = GraphNode(id="n", block_type="C1x7-7x1", inputs=("input",))
            got = node_cost(node, [shape], n_classes=10)
            want = oracle_cost("C1x7-7x1", shape.channels, None, None, shape.height, shape.width)
            assert got == want

    def test_parameter_free_blocks_cost_nothing(self):
        for block_type in ("Identity", "Summation", "Concatenation", "MaxPool2x2", "GlobalAvgPool"):
            node = GraphNode(id="n", block_type=block_type, inputs=("a", "b"))
            assert node_cost(node, [TensorShape(8, 4, 4)] * 2, n_classes=10) == (0, 0)

    def test_classifier_cost(self):
        node = GraphNode(id="c", block_type="Classifier", inputs=("gap",))
        madds, params = node_cost(node, [TensorShape(128, 1, 1)], n_classes=10)
        assert madds == 1280 and params == 128 * 10 + 10

    def test_linearity_in_spatial_area(self):
        node = GraphNode(id="n", block_type="ConvBlock", inputs=("input",), channels=64, kernel=3)
        single, _ = node_cost(node, [TensorShape(16, 16, 16)], n_classes=10)
        double, _ = node_cost(node, [TensorShape(16, 16, 32)], n_classes=10)
        assert double == 2 * single


class TestMobileFeasibility:
    def _single_conv_graph(self, c_in, c_out):
        nodes = (
            GraphNode(id="input", block_type="Input", inputs=()),
            GraphNode(id="conv", block_type="ConvBlock", inputs=("input",), channels=c_out, kernel=1),
        )
        return ArchitectureGraph(nodes=nodes, input_shape=TensorShape(c_in, 25, 25), n_classes=10)

    def test_exactly_at_budget_is_feasible(self):
        graph = self._single_conv_graph(1000, 960)
        report = complexity(graph, propagate_shapes(graph))
        assert report.madds == 600 * 10**6
        assert report.mobile_feasible and mobile_feasible(report.madds)

    def test_one_madd_over_is_not(self):
        nodes = (
            GraphNode(id="input", block_type="Input", inputs=()),
            GraphNode(id="conv", block_type="ConvBlock", inputs=("input",), channels=600_000_001, kernel=1),
        )
        graph = ArchitectureGraph(nodes=nodes, input_shape=TensorShape(1, 1, 1), n_classes=10)
        report = complexity(graph, propagate_shapes(graph))
        assert report.madds == 600 * 10**6 + 1
        assert not report.mobile_feasible and not mobile_feasible(report.madds)


def identity_stage_genome(stage):
    """Every node is Identity reading the block input; output names node 0."""
    identity_fid = next(
        i for i, s in enumerate(stage.function_set) if s.block_type.value == "Identity"
    )
    record = [identity_fid] + [0] * stage.grid.max_arity + [0] * len(stage.hyper_totals)
    genes = tuple(record * stage.grid.n_nodes) + (stage.grid.n_inputs,)
    return IntegerCgpGenome(genes=genes)


class TestDecodeArchitecture:
    def test_identity_chain_shapes(self, v2_template):
        stages = tuple(identity_stage_genome(s) for s in v2_template.normal_stages)
        graph = decode_architecture(stages, v2_template, TensorShape(3, 32, 32), 10)
        ids = [n.id for n in graph.nodes]
        assert ids == ["input", "s0n0", "pool1", "s1n0", "pool2", "s2n0", "gap", "classifier"]
        shapes = propagate_shapes(graph)
        assert shapes["s0n0"].as_tuple() == (3, 32, 32)
        assert shapes["s1n0"].as_tuple() == (3, 16, 16)
        assert shapes["s2n0"].as_tuple() == (3, 8, 8)
        assert shapes["gap"].as_tuple() == (3, 1, 1)
        report = complexity(graph, shapes)
        assert report.madds == 3 * 10  # classifier only
        assert report.params == 3 * 10 + 10

    def test_stage_with_output_on_input_contributes_nothing(self, v2_template):
        stage = v2_template.normal_stages[0]
        genome = identity_stage_genome(stage)
        passthrough = IntegerCgpGenome(genes=genome.genes[:-1] + (0,))
        stages = (passthrough,) + tuple(identity_stage_genome(s) for s in v2_template.normal_stages[1:])
        graph = decode_architecture(stages, v2_template, TensorShape(3, 32, 32), 10)
        assert [n.id for n in graph.nodes if n.stage == 0] == []
        assert graph.nodes[1].id == "pool1"
        assert graph.nodes[1].inputs == ("input",)

    @pytest.mark.parametrize("variant", ["v1", "v2"])
    def test_node_count_equals_active_trace(self, variant):
        template = template_default(variant)
        rng = np.random.default_rng(31)
        for _ in range(30):
            stages = tuple(
                random_genome(s.grid, s.arities, s.hyper_totals, rng)
                for s in template.normal_stages
            )
            graph = decode_architecture(stages, template, TensorShape(3, 32, 32), 10)
            expected = sum(
                len(trace_active(g, s.grid, s.arities, len(s.hyper_totals)).active)
                for g, s in zip(stages, template.normal_stages)
            )
            assert len(graph.stage_nodes) == expected

    def test_v2_hyper_genes_resolve_channels_and_kernel(self, v2_template):
        stage = v2_template.normal_stages[0]
        record = [0, 0, 0, 3, 1]  # ConvBlock, input, input, C index 3 -> 256, k index 1 -> 5
        genes = tuple(record * stage.grid.n_nodes) + (1,)
        stages = (IntegerCgpGenome(genes=genes),) + tuple(
            identity_stage_genome(s) for s in v2_template.normal_stages[1:]
        )
        graph = decode_architecture(stages, v2_template, TensorShape(3, 32, 32), 10)
        node = graph.node_map()["s0n0"]
        assert node.block_type == "ConvBlock"
        assert node.channels == 256 and node.kernel == 5


class TestShapePropagation:
    def _merge_graph(self, merge_type):
        nodes = (
            GraphNode(id="input", block_type="Input", inputs=()),
            GraphNode(id="a", block_type="ConvBlock", inputs=("input",), channels=32, kernel=3),
            GraphNode(id="b", block_type="ConvBlock", inputs=("input",), channels=64, kernel=3),
            GraphNode(id="m", block_type=merge_type, inputs=("a", "b")),
        )
        return ArchitectureGraph(nodes=nodes, input_shape=TensorShape(3, 16, 16), n_classes=10)

    def test_concat_sums_channels(self):
        shapes = propagate_shapes(self._merge_graph("Concatenation"))
        assert shapes["m"].as_tuple() == (96, 16, 16)

    def test_sum_takes_max_channels_like_zero_padded_add(self):
        shapes = propagate_shapes(self._merge_graph("Summation"))
        # oracle: actually execute zero-pad + add on random tensors
        rng = np.random.default_rng(0)
        a = rng.random((32, 16, 16))
        b = rng.random((64, 16, 16))
        c = max(a.shape[0], b.shape[0])

        def pad(x):
            return np.concatenate([x, np.zeros((c - x.shape[0],) + x.shape[1:])], axis=0)

        executed = pad(a) + pad(b)
        assert shapes["m"].as_tuple() == executed.shape == (64, 16, 16)

    def test_conv_preserves_spatial(self):
        graph = self._merge_graph("Summation")
        shapes = propagate_shapes(graph)
        assert shapes["a"].as_tuple() == (32, 16, 16)

    def test_pooling_to_zero_raises(self, v2_template):
        stages = tuple(identity_stage_genome(s) for s in v2_template.normal_stages)
        graph = decode_architecture(stages, v2_template, TensorShape(3, 2, 2), 10)
        with pytest.raises(ShapeError):
            propagate_shapes(graph)


class TestInactiveInvariance:
    def test_complexity_unchanged_by_inactive_mutation(self, v2_template):
        rng = np.random.default_rng(77)
        template = v2_template
        for _ in range(20):
            stages = [
                random_genome(s.grid, s.arities, s.hyper_totals, rng)
                for s in template.normal_stages
            ]
            graph = decode_architecture(tuple(stages), template, TensorShape(3, 32, 32), 10)
            base = complexity(graph, propagate_shapes(graph))
            stage = template.normal_stages[0]
            trace = trace_active(stages[0], stage.grid, stage.arities, len(stage.hyper_totals))
            inactive = sorted(set(range(stage.grid.n_nodes)) - trace.active)
            if not inactive:
                continue
            width = stage.grid.record_width(len(stage.hyper_totals))
            genes = list(stages[0].genes)
            for ordinal in inactive:
                legal = stage.grid.legal_targets(stage.grid.column_of(ordinal))
                base_idx = ordinal * width
                genes[base_idx] = int(rng.integers(len(stage.function_set)))
                for a in range(stage.grid.max_arity):
                    genes[base_idx + 1 + a] = legal[int(rng.integers(len(legal)))]
                genes[base_idx + 3] = int(rng.integers(4))
                genes[base_idx + 4] = int(rng.integers(2))
            stages[0] = IntegerCgpGenome(genes=tuple(genes))
            graph2 = decode_architecture(tuple(stages), template, TensorShape(3, 32, 32), 10)
            report = complexity(graph2, propagate_shapes(graph2))
            assert (report.madds, report.params) == (base.madds, base.params)


class TestExport:
    def test_doc_schema_fields(self, v2_template):
        stages = tuple(identity_stage_genome(s) for s in v2_template.normal_stages)
        graph = decode_architecture(stages, v2_template, TensorShape(3, 32, 32), 10)
        doc = graph.to_doc()
        assert doc["format"] == "arch-graph" and doc["version"] == 1
        assert doc["input_shape"] == [3, 32, 32] and doc["n_classes"] == 10
        assert set(doc["nodes"][0]) == {"id", "block_type", "channels", "kernel", "stage"}
        assert all(len(edge) == 2 for edge in doc["edges"])
        dst_order = [e[1] for e in doc["edges"]]
        node_order = [n["id"] for n in doc["nodes"]]
        assert dst_order == sorted(dst_order, key=node_order.index)

    def test_dot_render_mentions_every_node(self, v2_template):
        stages = tuple(identity_stage_genome(s) for s in v2_template.normal_stages)
        graph = decode_architecture(stages, v2_template, TensorShape(3, 32, 32), 10)
        dot = graph.to_dot()
        assert dot.startswith("digraph")
        for node in graph.nodes:
            assert f'"{node.id}"' in dot

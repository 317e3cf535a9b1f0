"""Decoded architectures: graph building, shape propagation, complexity.

Only active CGP nodes materialize.  Complexity counts one multiply-accumulate
per MAdd; batch norm, activations, pooling and elementwise merges contribute
zero.  Every composite block is defined by its convolution decomposition in
`conv_layers`, which is also the contract the reference evaluator mirrors
(see docs/schemas.md for the full table, including residual connections).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .cgp import IntegerCgpGenome, trace_active
from .errors import ShapeError
from .space import BlockTemplate, BlockType, NormalStage, ReductionStage

# Structural (non-catalog) node kinds.
INPUT = "Input"
MAX_POOL = "MaxPool2x2"
GLOBAL_AVG_POOL = "GlobalAvgPool"
CLASSIFIER = "Classifier"

CONV_FAMILY = {
    BlockType.CONV_BLOCK.value,
    BlockType.RES_BLOCK.value,
    BlockType.BOTTLENECK.value,
    BlockType.FUSED_MBCONV.value,
    BlockType.MBCONV.value,
    BlockType.SEP_CONV.value,
    BlockType.DI_CONV.value,
}

MOBILE_MADDS_BUDGET = 600 * 10**6

GRAPH_FORMAT = "arch-graph"
REPORT_FORMAT = "arch-report"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.channels < 1 or self.height < 1 or self.width < 1:
            raise ShapeError(f"non-positive tensor shape {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass(frozen=True)
class GraphNode:
    """One materialized block; `inputs` lists producer ids in consumption order."""

    id: str
    block_type: str
    inputs: tuple[str, ...]
    channels: int | None = None
    kernel: int | None = None
    stage: int | None = None


@dataclass(frozen=True)
class ArchitectureGraph:
    """Acyclic chain of stages; nodes are stored in topological order."""

    nodes: tuple[GraphNode, ...]
    input_shape: TensorShape
    n_classes: int

    def node_map(self) -> dict[str, GraphNode]:
        return {n.id: n for n in self.nodes}

    def edges(self) -> list[tuple[str, str]]:
        return [(src, node.id) for node in self.nodes for src in node.inputs]

    @property
    def stage_nodes(self) -> tuple[GraphNode, ...]:
        return tuple(n for n in self.nodes if n.stage is not None)

    @property
    def branch_count(self) -> int:
        return sum(1 for n in self.nodes if len(n.inputs) >= 2)

    @property
    def distinct_block_types(self) -> int:
        return len({n.block_type for n in self.stage_nodes})

    def to_doc(self) -> dict:
        return {
            "format": GRAPH_FORMAT,
            "version": SCHEMA_VERSION,
            "input_shape": list(self.input_shape.as_tuple()),
            "n_classes": self.n_classes,
            "nodes": [
                {
                    "id": n.id,
                    "block_type": n.block_type,
                    "channels": n.channels,
                    "kernel": n.kernel,
                    "stage": n.stage,
                }
                for n in self.nodes
            ],
            "edges": [[src, dst] for src, dst in self.edges()],
        }

    def to_dot(self) -> str:
        lines = ["digraph architecture {", "  rankdir=TB;"]
        for n in self.nodes:
            label = n.block_type
            if n.channels is not None:
                label += f"\\nC={n.channels} k={n.kernel}"
            shape = "box" if n.stage is not None else "ellipse"
            lines.append(f'  "{n.id}" [label="{label}", shape={shape}];')
        for src, dst in self.edges():
            lines.append(f'  "{src}" -> "{dst}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def decode_architecture(
    stage_genomes: Sequence[IntegerCgpGenome],
    template: BlockTemplate,
    input_shape: TensorShape = TensorShape(3, 32, 32),
    n_classes: int = 10,
) -> ArchitectureGraph:
    """Materialize the active subgraph of every Normal stage, chained through
    the template's reductions and capped by pooling + classifier."""
    normal_stages = template.normal_stages
    if len(stage_genomes) != len(normal_stages):
        raise ShapeError(f"expected {len(normal_stages)} stage genomes, got {len(stage_genomes)}")

    nodes: list[GraphNode] = [GraphNode(id="input", block_type=INPUT, inputs=())]
    upstream = "input"
    genome_iter = iter(stage_genomes)
    pool_count = 0
    for stage in template.stages:
        if isinstance(stage, ReductionStage):
            pool_count += 1
            pool_id = f"pool{pool_count}"
            nodes.append(GraphNode(id=pool_id, block_type=MAX_POOL, inputs=(upstream,)))
            upstream = pool_id
            continue
        upstream = _decode_stage(stage, next(genome_iter), upstream, nodes)

    nodes.append(GraphNode(id="gap", block_type=GLOBAL_AVG_POOL, inputs=(upstream,)))
    nodes.append(GraphNode(id="classifier", block_type=CLASSIFIER, inputs=("gap",)))
    return ArchitectureGraph(nodes=tuple(nodes), input_shape=input_shape, n_classes=n_classes)


def _decode_stage(
    stage: NormalStage,
    genome: IntegerCgpGenome,
    upstream: str,
    nodes: list[GraphNode],
) -> str:
    grid = stage.grid
    arities = stage.arities
    n_hyper = len(stage.hyper_totals)
    width = grid.record_width(n_hyper)
    trace = trace_active(genome, grid, arities, n_hyper)

    def ref(gene: int) -> str:
        return upstream if gene < grid.n_inputs else f"s{stage.index}n{gene - grid.n_inputs}"

    # Ascending ordinals are topological: connections only reach earlier columns.
    for ordinal in sorted(trace.active):
        record = genome.record(ordinal, width)
        spec = stage.function_set[record[0]]
        channels, kernel = spec.channels, spec.kernel
        if stage.hyper is not None and spec.block_type.value in CONV_FAMILY:
            channels = stage.hyper.channel_options[record[1 + grid.max_arity]]
            kernel = stage.hyper.kernel_options[record[2 + grid.max_arity]]
        inputs = tuple(ref(g) for g in record[1 : 1 + spec.arity])
        nodes.append(
            GraphNode(
                id=f"s{stage.index}n{ordinal}",
                block_type=spec.block_type.value,
                inputs=inputs,
                channels=channels,
                kernel=kernel,
                stage=stage.index,
            )
        )
    return ref(genome.output_gene)


def propagate_shapes(graph: ArchitectureGraph, input_shape: TensorShape | None = None) -> dict[str, TensorShape]:
    """Forward shape inference; raises ShapeError if pooling exhausts space."""
    shape: dict[str, TensorShape] = {}
    current = input_shape or graph.input_shape
    for node in graph.nodes:
        ins = [shape[i] for i in node.inputs]
        if node.block_type == INPUT:
            shape[node.id] = current
        elif node.block_type == MAX_POOL:
            s = ins[0]
            h, w = s.height // 2, s.width // 2
            if h < 1 or w < 1:
                raise ShapeError(f"pooling reduces {s.as_tuple()} to zero spatial size at {node.id}")
            shape[node.id] = TensorShape(s.channels, h, w)
        elif node.block_type == GLOBAL_AVG_POOL:
            shape[node.id] = TensorShape(ins[0].channels, 1, 1)
        elif node.block_type == CLASSIFIER:
            shape[node.id] = TensorShape(graph.n_classes, 1, 1)
        elif node.block_type == BlockType.SUMMATION.value:
            a, b = ins
            shape[node.id] = TensorShape(max(a.channels, b.channels), a.height, a.width)
        elif node.block_type == BlockType.CONCATENATION.value:
            a, b = ins
            shape[node.id] = TensorShape(a.channels + b.channels, a.height, a.width)
        elif node.block_type in (BlockType.IDENTITY.value, BlockType.C1X7_7X1.value):
            shape[node.id] = ins[0]
        elif node.block_type in CONV_FAMILY:
            s = ins[0]
            shape[node.id] = TensorShape(node.channels, s.height, s.width)
        else:
            raise ShapeError(f"unknown block type {node.block_type!r} at {node.id}")
    return shape


@dataclass(frozen=True)
class ConvLayerSpec:
    """One primitive convolution inside a composite block."""

    c_in: int
    c_out: int
    k_h: int
    k_w: int
    groups: int = 1
    batch_norm: bool = True

    @property
    def params(self) -> int:
        p = self.k_h * self.k_w * (self.c_in // self.groups) * self.c_out
        if self.batch_norm:
            p += 2 * self.c_out
        return p

    def madds(self, h: int, w: int) -> int:
        return h * w * self.c_out * (self.c_in // self.groups) * self.k_h * self.k_w


def conv_layers(block_type: str, c_in: int, channels: int | None, kernel: int | None) -> list[ConvLayerSpec]:
    """Convolution decomposition of each block type (the complexity contract)."""
    c, k = channels, kernel
    if block_type == BlockType.CONV_BLOCK.value:
        return [ConvLayerSpec(c_in, c, k, k)]
    if block_type == BlockType.RES_BLOCK.value:
        layers = [ConvLayerSpec(c_in, c, k, k), ConvLayerSpec(c, c, k, k)]
        if c_in != c:
            layers.append(ConvLayerSpec(c_in, c, 1, 1))
        return layers
    if block_type == BlockType.BOTTLENECK.value:
        mid = c // 4
        layers = [
            ConvLayerSpec(c_in, mid, 1, 1),
            ConvLayerSpec(mid, mid, k, k),
            ConvLayerSpec(mid, c, 1, 1),
        ]
        if c_in != c:
            layers.append(ConvLayerSpec(c_in, c, 1, 1))
        return layers
    if block_type == BlockType.SEP_CONV.value:
        return [
            ConvLayerSpec(c_in, c_in, k, k, groups=c_in, batch_norm=False),
            ConvLayerSpec(c_in, c, 1, 1),
            ConvLayerSpec(c, c, k, k, groups=c, batch_norm=False),
            ConvLayerSpec(c, c, 1, 1),
        ]
    if block_type == BlockType.DI_CONV.value:
        return [ConvLayerSpec(c_in, c, k, k)]
    if block_type == BlockType.MBCONV.value:
        e = 6 * c_in
        return [
            ConvLayerSpec(c_in, e, 1, 1),
            ConvLayerSpec(e, e, k, k, groups=e),
            ConvLayerSpec(e, c, 1, 1),
        ]
    if block_type == BlockType.FUSED_MBCONV.value:
        e = 6 * c_in
        return [ConvLayerSpec(c_in, e, k, k), ConvLayerSpec(e, c, 1, 1)]
    if block_type == BlockType.C1X7_7X1.value:
        return [ConvLayerSpec(c_in, c_in, 1, 7), ConvLayerSpec(c_in, c_in, 7, 1)]
    return []


def node_cost(node: GraphNode, in_shapes: Sequence[TensorShape], n_classes: int) -> tuple[int, int]:
    """(madds, params) for one node given its input shapes."""
    if node.block_type == CLASSIFIER:
        c = in_shapes[0].channels
        return c * n_classes, c * n_classes + n_classes
    if node.block_type in CONV_FAMILY or node.block_type == BlockType.C1X7_7X1.value:
        s = in_shapes[0]
        layers = conv_layers(node.block_type, s.channels, node.channels, node.kernel)
        madds = sum(layer.madds(s.height, s.width) for layer in layers)
        params = sum(layer.params for layer in layers)
        return madds, params
    return 0, 0


@dataclass(frozen=True)
class NodeCost:
    madds: int
    params: int


@dataclass(frozen=True)
class ComplexityReport:
    madds: int
    params: int
    per_node: dict[str, NodeCost]

    @property
    def madds_millions(self) -> float:
        return self.madds / 1e6

    @property
    def mobile_feasible(self) -> bool:
        return self.madds <= MOBILE_MADDS_BUDGET


def complexity(graph: ArchitectureGraph, shapes: dict[str, TensorShape]) -> ComplexityReport:
    per_node: dict[str, NodeCost] = {}
    for node in graph.nodes:
        ins = [shapes[i] for i in node.inputs]
        madds, params = node_cost(node, ins, graph.n_classes)
        per_node[node.id] = NodeCost(madds=madds, params=params)
    return ComplexityReport(
        madds=sum(c.madds for c in per_node.values()),
        params=sum(c.params for c in per_node.values()),
        per_node=per_node,
    )


def mobile_feasible(madds: int) -> bool:
    """True when the raw MAdd count fits the 600-million mobile budget."""
    return madds <= MOBILE_MADDS_BUDGET


def report_doc(graph: ArchitectureGraph, shapes: dict[str, TensorShape], report: ComplexityReport) -> dict:
    """Sidecar document with per-node shapes and costs (see docs/schemas.md)."""
    return {
        "format": REPORT_FORMAT,
        "version": SCHEMA_VERSION,
        "madds": report.madds,
        "params": report.params,
        "madds_millions": report.madds_millions,
        "mobile_feasible": report.mobile_feasible,
        "nodes": [
            {
                "id": n.id,
                "shape": list(shapes[n.id].as_tuple()),
                "madds": report.per_node[n.id].madds,
                "params": report.per_node[n.id].params,
            }
            for n in graph.nodes
        ],
    }

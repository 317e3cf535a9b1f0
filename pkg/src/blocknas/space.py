"""Block-chained search space: function-set catalogs and stage templates.

Architectures follow a fixed chain of Normal blocks (searchable CGP grids)
separated by Reduction blocks (2x2 stride-2 max pooling), capped by global
average pooling and a linear classifier.  Two granularities exist:

* v1 binds (channels, kernel) into each catalog entry, so the per-stage
  catalog enumerates every combination;
* v2 keeps one catalog entry per block type and evolves channels/kernel as
  two extra genes per node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .cgp import GridConfig
from .errors import ConfigError


class Variant(str, enum.Enum):
    V1 = "v1"
    V2 = "v2"


class BlockType(str, enum.Enum):
    CONV_BLOCK = "ConvBlock"
    RES_BLOCK = "ResBlock"
    BOTTLENECK = "Bottleneck"
    FUSED_MBCONV = "FusedMBConv"
    MBCONV = "MBConv"
    SEP_CONV = "SepConv"
    DI_CONV = "DiConv"
    IDENTITY = "Identity"
    C1X7_7X1 = "C1x7-7x1"
    SUMMATION = "Summation"
    CONCATENATION = "Concatenation"


# Block types that take (channels, kernel); order matches the catalog layout.
_PARAMETRIC_KERNELS_V1: dict[BlockType, tuple[int, ...]] = {
    BlockType.CONV_BLOCK: (1, 3, 5, 7),
    BlockType.RES_BLOCK: (3, 5, 7),
    BlockType.BOTTLENECK: (3, 5, 7),
    BlockType.FUSED_MBCONV: (3,),
    BlockType.SEP_CONV: (3, 5, 7),
    BlockType.DI_CONV: (3, 5),
}

_PARAMETRIC_V2: tuple[BlockType, ...] = (
    BlockType.CONV_BLOCK,
    BlockType.RES_BLOCK,
    BlockType.BOTTLENECK,
    BlockType.FUSED_MBCONV,
    BlockType.MBCONV,
    BlockType.SEP_CONV,
    BlockType.DI_CONV,
)

_PARAMETER_FREE: tuple[tuple[BlockType, int], ...] = (
    (BlockType.IDENTITY, 1),
    (BlockType.C1X7_7X1, 1),
    (BlockType.SUMMATION, 2),
    (BlockType.CONCATENATION, 2),
)


@dataclass(frozen=True)
class FunctionSpec:
    """One catalog entry; channels/kernel are None when supplied by genes."""

    block_type: BlockType
    arity: int
    channels: int | None = None
    kernel: int | None = None

    def label(self) -> str:
        if self.channels is None and self.kernel is None:
            return self.block_type.value
        return f"{self.block_type.value}({self.channels},{self.kernel})"


def build_v1_function_set(channel_options: tuple[int, ...]) -> tuple[FunctionSpec, ...]:
    """Enumerate every bound (block_type, C, k) combination plus the
    parameter-free blocks."""
    if not channel_options:
        raise ConfigError("channel options must be nonempty")
    specs: list[FunctionSpec] = []
    for block_type, kernels in _PARAMETRIC_KERNELS_V1.items():
        for c in channel_options:
            for k in kernels:
                specs.append(FunctionSpec(block_type, arity=1, channels=c, kernel=k))
    for block_type, arity in _PARAMETER_FREE:
        specs.append(FunctionSpec(block_type, arity=arity))
    return tuple(specs)


def build_v2_function_set() -> tuple[FunctionSpec, ...]:
    """One unbound entry per block type; hyperparameters come from genes."""
    specs = [FunctionSpec(bt, arity=1) for bt in _PARAMETRIC_V2]
    specs.extend(FunctionSpec(bt, arity=arity) for bt, arity in _PARAMETER_FREE)
    return tuple(specs)


@dataclass(frozen=True)
class HyperparameterSchema:
    """Per-node gene slots appended to every v2 record."""

    channel_options: tuple[int, ...] = (32, 64, 128, 256)
    kernel_options: tuple[int, ...] = (3, 5)

    @property
    def totals(self) -> tuple[int, int]:
        return (len(self.channel_options), len(self.kernel_options))


@dataclass(frozen=True)
class NormalStage:
    """A searchable CGP grid with its stage-local catalog."""

    index: int
    grid: GridConfig
    channel_options: tuple[int, ...]
    function_set: tuple[FunctionSpec, ...]
    hyper: HyperparameterSchema | None = None

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(spec.arity for spec in self.function_set)

    @property
    def hyper_totals(self) -> tuple[int, ...]:
        return self.hyper.totals if self.hyper is not None else ()

    @property
    def genome_length(self) -> int:
        return self.grid.genome_length(len(self.hyper_totals))


@dataclass(frozen=True)
class ReductionStage:
    """Fixed spatial reduction: max pooling, 2x2 kernel, stride 2."""

    pool_size: int = 2
    stride: int = 2


@dataclass(frozen=True)
class BlockTemplate:
    """Alternating Normal/Reduction chain; trailer (global average pooling +
    classifier) is implied and added at phenotype decode."""

    variant: Variant
    stages: tuple[NormalStage | ReductionStage, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.stages or not isinstance(self.stages[0], NormalStage):
            raise ConfigError("template must start with a Normal stage")
        if not isinstance(self.stages[-1], NormalStage):
            raise ConfigError("template must end with a Normal stage")
        for i, stage in enumerate(self.stages):
            want_normal = i % 2 == 0
            if want_normal != isinstance(stage, NormalStage):
                raise ConfigError("stages must alternate Normal, Reduction, ...")

    @property
    def normal_stages(self) -> tuple[NormalStage, ...]:
        return tuple(s for s in self.stages if isinstance(s, NormalStage))

    @property
    def subvector_lengths(self) -> tuple[int, ...]:
        return tuple(s.genome_length for s in self.normal_stages)


V1_STAGE_CHANNELS: tuple[tuple[int, ...], ...] = ((32, 64), (64, 128), (128, 256))
FULL_CHANNELS: tuple[int, ...] = (32, 64, 128, 256)


def template_default(
    variant: Variant | str,
    *,
    rows: int | None = None,
    cols: int | None = None,
    level_back: int = 1,
    n_normal: int = 3,
    v1_stage_restricted: bool = True,
) -> BlockTemplate:
    """Shipped defaults: v1 searches 5x25 grids over the bound catalog, v2
    searches 10x4 grids over the 11-entry catalog with hyperparameter genes."""
    variant = Variant(variant)
    if variant is Variant.V1:
        grid = GridConfig(rows=rows or 5, cols=cols or 25, level_back=level_back)
    else:
        grid = GridConfig(rows=rows or 10, cols=cols or 4, level_back=level_back)

    stages: list[NormalStage | ReductionStage] = []
    for i in range(n_normal):
        if variant is Variant.V1:
            channels = V1_STAGE_CHANNELS[i % len(V1_STAGE_CHANNELS)] if v1_stage_restricted else FULL_CHANNELS
            stage = NormalStage(
                index=i,
                grid=grid,
                channel_options=channels,
                function_set=build_v1_function_set(channels),
            )
        else:
            stage = NormalStage(
                index=i,
                grid=grid,
                channel_options=FULL_CHANNELS,
                function_set=build_v2_function_set(),
                hyper=HyperparameterSchema(),
            )
        if i:
            stages.append(ReductionStage())
        stages.append(stage)
    return BlockTemplate(variant=variant, stages=tuple(stages))

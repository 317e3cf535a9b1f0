"""Function-set catalogs and template defaults."""

import pytest

from blocknas.errors import ConfigError
from blocknas.space import (
    BlockType,
    FULL_CHANNELS,
    NormalStage,
    ReductionStage,
    build_v1_function_set,
    build_v2_function_set,
    template_default,
)


class TestV1FunctionSet:
    def test_full_enumeration_is_68(self):
        specs = build_v1_function_set(FULL_CHANNELS)
        assert len(specs) == 68
        by_type = {}
        for s in specs:
            by_type.setdefault(s.block_type, []).append(s)
        assert len(by_type[BlockType.CONV_BLOCK]) == 16
        assert len(by_type[BlockType.RES_BLOCK]) == 12
        assert len(by_type[BlockType.BOTTLENECK]) == 12
        assert len(by_type[BlockType.FUSED_MBCONV]) == 4
        assert len(by_type[BlockType.SEP_CONV]) == 12
        assert len(by_type[BlockType.DI_CONV]) == 8
        assert BlockType.MBCONV not in by_type

    def test_two_channel_restriction_gives_36(self):
        assert len(build_v1_function_set((32, 64))) == 36

    def test_empty_channels_rejected(self):
        with pytest.raises(ConfigError):
            build_v1_function_set(())

    def test_arities(self):
        for spec in build_v1_function_set(FULL_CHANNELS):
            if spec.block_type in (BlockType.SUMMATION, BlockType.CONCATENATION):
                assert spec.arity == 2
            else:
                assert spec.arity == 1


class TestV2FunctionSet:
    def test_eleven_specs(self):
        specs = build_v2_function_set()
        assert len(specs) == 11
        assert len({s.block_type for s in specs}) == 11

    def test_contains_mbconv_unlike_v1(self):
        v2_types = {s.block_type for s in build_v2_function_set()}
        v1_types = {s.block_type for s in build_v1_function_set(FULL_CHANNELS)}
        assert BlockType.MBCONV in v2_types
        assert BlockType.MBCONV not in v1_types

    def test_hyperparameters_unbound(self):
        for spec in build_v2_function_set():
            assert spec.channels is None and spec.kernel is None


class TestTemplates:
    def test_v1_grid_defaults(self, v1_template):
        grid = v1_template.normal_stages[0].grid
        assert (grid.rows, grid.cols, grid.level_back) == (5, 25, 1)

    def test_v2_grid_defaults(self, v2_template):
        grid = v2_template.normal_stages[0].grid
        assert (grid.rows, grid.cols, grid.level_back) == (10, 4, 1)

    @pytest.mark.parametrize("variant", ["v1", "v2"])
    def test_three_normals_two_reductions(self, variant):
        template = template_default(variant)
        kinds = [type(s) for s in template.stages]
        assert kinds == [NormalStage, ReductionStage, NormalStage, ReductionStage, NormalStage]

    def test_v1_per_stage_channels(self, v1_template):
        assert [s.channel_options for s in v1_template.normal_stages] == [
            (32, 64),
            (64, 128),
            (128, 256),
        ]
        assert all(len(s.function_set) == 36 for s in v1_template.normal_stages)

    def test_v1_full_switch(self):
        template = template_default("v1", v1_stage_restricted=False)
        assert all(len(s.function_set) == 68 for s in template.normal_stages)

    def test_v2_record_width_is_five(self, v2_template):
        stage = v2_template.normal_stages[0]
        assert stage.grid.record_width(len(stage.hyper_totals)) == 5
        assert stage.hyper_totals == (4, 2)
        assert stage.genome_length == 10 * 4 * 5 + 1

    def test_arity_within_grid_max(self, v1_template, v2_template):
        for template in (v1_template, v2_template):
            for stage in template.normal_stages:
                assert max(stage.arities) <= stage.grid.max_arity == 2

    def test_subvector_partition_covers_genome(self, v2_template):
        assert len(v2_template.subvector_lengths) == 3
        assert sum(v2_template.subvector_lengths) == 3 * 201

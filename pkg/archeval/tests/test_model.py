"""Block materialization details that the parity fuzz would not isolate."""

import pytest
import torch

from archeval.model import GraphModel, Summation, build_block

from conftest import identity_arch_doc


class TestBlockParams:
    @pytest.mark.parametrize(
        "block_type,c_in,c,k,expected",
        [
            ("ConvBlock", 3, 32, 3, 3 * 9 * 32 + 2 * 32),
            ("ConvBlock", 16, 64, 5, 16 * 25 * 64 + 2 * 64),
            # two stacked convs, no projection when channels match
            ("ResBlock", 32, 32, 3, (9 * 32 * 32 + 64) * 2),
            # projection adds a 1x1 conv + bn
            ("ResBlock", 16, 32, 3, 9 * 16 * 32 + 64 + 9 * 32 * 32 + 64 + 16 * 32 + 64),
            ("SepConv", 16, 32, 3, 9 * 16 + 16 * 32 + 64 + 9 * 32 + 32 * 32 + 64),
            ("MBConv", 16, 16, 3, 16 * 96 + 192 + 9 * 96 + 192 + 96 * 16 + 32),
            ("FusedMBConv", 16, 32, 3, 9 * 16 * 96 + 192 + 96 * 32 + 64),
            ("C1x7-7x1", 16, None, None, (7 * 16 * 16 + 32) * 2),
            ("Identity", 16, None, None, 0),
        ],
    )
    def test_parameter_counts_match_documented_table(self, block_type, c_in, c, k, expected):
        module, _ = build_block(block_type, c_in, c, k)
        assert sum(p.numel() for p in module.parameters()) == expected

    def test_bottleneck_quarter_width(self):
        module, _ = build_block("Bottleneck", 32, 64, 3)
        expected = (32 * 16 + 32) + (9 * 16 * 16 + 32) + (16 * 64 + 128) + (32 * 64 + 128)
        assert sum(p.numel() for p in module.parameters()) == expected

    def test_exhaustive_param_table(self):
        """Every block type x catalog channels x kernels against the
        documented decomposition formulas."""

        def expected_params(block_type, ci, c, k):
            if block_type in ("ConvBlock", "DiConv"):
                return k * k * ci * c + 2 * c
            if block_type == "ResBlock":
                proj = (ci * c + 2 * c) if ci != c else 0
                return k * k * ci * c + 2 * c + k * k * c * c + 2 * c + proj
            if block_type == "Bottleneck":
                m = c // 4
                proj = (ci * c + 2 * c) if ci != c else 0
                return ci * m + 2 * m + k * k * m * m + 2 * m + m * c + 2 * c + proj
            if block_type == "SepConv":
                return k * k * ci + ci * c + 2 * c + k * k * c + c * c + 2 * c
            if block_type == "MBConv":
                e = 6 * ci
                return ci * e + 2 * e + k * k * e + 2 * e + e * c + 2 * c
            if block_type == "FusedMBConv":
                e = 6 * ci
                return k * k * ci * e + 2 * e + e * c + 2 * c
            raise AssertionError(block_type)

        kinds = ("ConvBlock", "ResBlock", "Bottleneck", "SepConv", "DiConv", "MBConv", "FusedMBConv")
        for block_type in kinds:
            for ci in (3, 32, 64):
                for c in (32, 64, 128, 256):
                    for k in (3, 5):
                        module, _ = build_block(block_type, ci, c, k)
                        got = sum(p.numel() for p in module.parameters())
                        assert got == expected_params(block_type, ci, c, k), (block_type, ci, c, k)


class TestBlockBehaviour:
    def test_spatial_preserved_by_every_conv_kind(self):
        x = torch.randn(2, 16, 13, 13)  # odd size catches padding mistakes
        for block_type in ("ConvBlock", "ResBlock", "Bottleneck", "SepConv", "DiConv", "MBConv", "FusedMBConv"):
            for k in (3, 5):
                module, c_out = build_block(block_type, 16, 32, k)
                module.eval()
                out = module(x)
                assert out.shape == (2, c_out, 13, 13), (block_type, k)

    def test_factorized_conv_preserves_everything_spatially(self):
        module, c_out = build_block("C1x7-7x1", 16, None, None)
        module.eval()
        assert module(torch.randn(2, 16, 9, 9)).shape == (2, 16, 9, 9)
        assert c_out == 16

    def test_summation_zero_pads_channels(self):
        s = Summation()
        a = torch.ones(1, 2, 4, 4)
        b = torch.full((1, 5, 4, 4), 2.0)
        out = s(a, b)
        assert out.shape == (1, 5, 4, 4)
        assert torch.equal(out[:, :2], torch.full((1, 2, 4, 4), 3.0))
        assert torch.equal(out[:, 2:], torch.full((1, 3, 4, 4), 2.0))

    def test_mbconv_residual_only_when_channels_match(self):
        with_res, _ = build_block("MBConv", 32, 32, 3)
        without, _ = build_block("MBConv", 32, 64, 3)
        assert with_res.residual and not without.residual


class TestGraphModel:
    def test_identity_graph_forward(self, identity_doc):
        model = GraphModel(identity_doc)
        model.eval()
        out = model(torch.randn(3, 3, 16, 16))
        assert out.shape == (3, 2)
        # only the classifier holds parameters
        assert sum(p.numel() for p in model.parameters()) == 3 * 2 + 2

    def test_rejects_wrong_version(self, identity_doc):
        identity_doc["version"] = 2
        with pytest.raises(ValueError):
            GraphModel(identity_doc)

    def test_aux_head_taps_second_reduction(self, identity_doc):
        model = GraphModel(identity_doc, aux_head=True)
        model.train()
        logits, aux = model(torch.randn(2, 3, 16, 16))
        assert logits.shape == aux.shape == (2, 2)
        model.eval()
        assert model(torch.randn(2, 3, 16, 16)).shape == (2, 2)

    def test_concat_node_spliced_into_chain(self):
        doc = identity_arch_doc()
        # concat the stage-2 identity output with the pool2 tensor before gap
        doc["nodes"].insert(
            -2,
            {"id": "s2n1", "block_type": "Concatenation", "channels": None, "kernel": None, "stage": 2},
        )
        doc["edges"] = [e for e in doc["edges"] if e != ["s2n0", "gap"]]
        doc["edges"].extend([["s2n0", "s2n1"], ["pool2", "s2n1"], ["s2n1", "gap"]])
        model = GraphModel(doc)
        shapes = model.node_output_shapes()
        assert shapes["s2n1"] == (6, 4, 4)
        assert shapes["gap"] == (6, 1, 1)

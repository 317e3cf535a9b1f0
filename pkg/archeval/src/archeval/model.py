"""Materialize arch-graph documents as trainable torch models.

The block definitions mirror the engine's complexity conventions
(docs/schemas.md in the engine repo): every convolution is bias-free,
batch norm carries 2*C parameters, and the layer decompositions per block
type match the documented table row for row, so parameter counts agree
exactly with the engine's analytic accounting.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

CONV_KINDS = {
    "ConvBlock",
    "ResBlock",
    "Bottleneck",
    "FusedMBConv",
    "MBConv",
    "SepConv",
    "DiConv",
}


def conv_bn(c_in, c_out, kernel, *, groups=1, dilation=1, bn=True, relu=True):
    if isinstance(kernel, int):
        kernel = (kernel, kernel)
    padding = (dilation * (kernel[0] - 1) // 2, dilation * (kernel[1] - 1) // 2)
    layers = [
        nn.Conv2d(c_in, c_out, kernel, padding=padding, groups=groups, dilation=dilation, bias=False)
    ]
    if bn:
        layers.append(nn.BatchNorm2d(c_out))
    if relu:
        layers.append(nn.ReLU(inplace=True))
    return layers


class ConvBlock(nn.Sequential):
    def __init__(self, c_in, c, k):
        super().__init__(*conv_bn(c_in, c, k))


class ResBlock(nn.Module):
    def __init__(self, c_in, c, k):
        super().__init__()
        self.main = nn.Sequential(
            *conv_bn(c_in, c, k),
            *conv_bn(c, c, k, relu=False),
        )
        self.shortcut = (
            nn.Identity() if c_in == c else nn.Sequential(*conv_bn(c_in, c, 1, relu=False))
        )

    def forward(self, x):
        return F.relu(self.main(x) + self.shortcut(x))


class Bottleneck(nn.Module):
    def __init__(self, c_in, c, k):
        super().__init__()
        mid = c // 4
        self.main = nn.Sequential(
            *conv_bn(c_in, mid, 1),
            *conv_bn(mid, mid, k),
            *conv_bn(mid, c, 1, relu=False),
        )
        self.shortcut = (
            nn.Identity() if c_in == c else nn.Sequential(*conv_bn(c_in, c, 1, relu=False))
        )

    def forward(self, x):
        return F.relu(self.main(x) + self.shortcut(x))


class SepConv(nn.Sequential):
    def __init__(self, c_in, c, k):
        super().__init__(
            *conv_bn(c_in, c_in, k, groups=c_in, bn=False, relu=False),
            *conv_bn(c_in, c, 1),
            *conv_bn(c, c, k, groups=c, bn=False, relu=False),
            *conv_bn(c, c, 1),
        )


class DiConv(nn.Sequential):
    def __init__(self, c_in, c, k):
        super().__init__(*conv_bn(c_in, c, k, dilation=2))


class MBConv(nn.Module):
    def __init__(self, c_in, c, k):
        super().__init__()
        e = 6 * c_in
        self.main = nn.Sequential(
            *conv_bn(c_in, e, 1),
            *conv_bn(e, e, k, groups=e),
            *conv_bn(e, c, 1, relu=False),
        )
        self.residual = c_in == c

    def forward(self, x):
        out = self.main(x)
        return out + x if self.residual else out


class FusedMBConv(nn.Sequential):
    def __init__(self, c_in, c, k):
        e = 6 * c_in
        super().__init__(
            *conv_bn(c_in, e, k),
            *conv_bn(e, c, 1, relu=False),
        )


class FactorizedConv7(nn.Sequential):
    """1x7 then 7x1 convolution, channel-preserving."""

    def __init__(self, c_in):
        super().__init__(
            *conv_bn(c_in, c_in, (1, 7)),
            *conv_bn(c_in, c_in, (7, 1)),
        )


class Summation(nn.Module):
    """Elementwise add; the channel-lighter operand is zero-padded."""

    def forward(self, a, b):
        c = max(a.size(1), b.size(1))
        if a.size(1) < c:
            a = F.pad(a, (0, 0, 0, 0, 0, c - a.size(1)))
        if b.size(1) < c:
            b = F.pad(b, (0, 0, 0, 0, 0, c - b.size(1)))
        return a + b


class Concatenation(nn.Module):
    def forward(self, a, b):
        return torch.cat([a, b], dim=1)


class Classifier(nn.Module):
    def __init__(self, c_in, n_classes):
        super().__init__()
        self.linear = nn.Linear(c_in, n_classes)

    def forward(self, x):
        return self.linear(torch.flatten(x, 1))


def build_block(block_type, c_in, channels, kernel):
    """Instantiate one node; returns (module, output_channels)."""
    if block_type == "ConvBlock":
        return ConvBlock(c_in, channels, kernel), channels
    if block_type == "ResBlock":
        return ResBlock(c_in, channels, kernel), channels
    if block_type == "Bottleneck":
        return Bottleneck(c_in, channels, kernel), channels
    if block_type == "SepConv":
        return SepConv(c_in, channels, kernel), channels
    if block_type == "DiConv":
        return DiConv(c_in, channels, kernel), channels
    if block_type == "MBConv":
        return MBConv(c_in, channels, kernel), channels
    if block_type == "FusedMBConv":
        return FusedMBConv(c_in, channels, kernel), channels
    if block_type == "C1x7-7x1":
        return FactorizedConv7(c_in), c_in
    if block_type == "Identity":
        return nn.Identity(), c_in
    if block_type == "MaxPool2x2":
        return nn.MaxPool2d(2, 2), c_in
    if block_type == "GlobalAvgPool":
        return nn.AdaptiveAvgPool2d(1), c_in
    raise ValueError(f"unknown block type {block_type!r}")


class GraphModel(nn.Module):
    """Executable network built from an arch-graph document.

    Nodes are instantiated in document (topological) order; each node's
    operand order follows the document's edge order.  With `aux_head=True`
    an auxiliary classifier taps the output of the second reduction
    (training-time loss helper for final retraining; never used in search).
    """

    def __init__(self, doc: dict, aux_head: bool = False):
        super().__init__()
        if doc.get("format") != "arch-graph" or doc.get("version") != 1:
            raise ValueError("not a version-1 arch-graph document")
        self.input_shape = tuple(doc["input_shape"])
        self.n_classes = int(doc["n_classes"])
        self.node_order = [n["id"] for n in doc["nodes"]]
        self.inputs_of: dict[str, list[str]] = {nid: [] for nid in self.node_order}
        for src, dst in doc["edges"]:
            self.inputs_of[dst].append(src)

        self.blocks = nn.ModuleDict()
        channels: dict[str, int] = {}
        for node in doc["nodes"]:
            nid, kind = node["id"], node["block_type"]
            ins = self.inputs_of[nid]
            if kind == "Input":
                channels[nid] = self.input_shape[0]
                continue
            if kind == "Classifier":
                self.blocks[nid] = Classifier(channels[ins[0]], self.n_classes)
                channels[nid] = self.n_classes
                continue
            if kind == "Summation":
                self.blocks[nid] = Summation()
                channels[nid] = max(channels[ins[0]], channels[ins[1]])
                continue
            if kind == "Concatenation":
                self.blocks[nid] = Concatenation()
                channels[nid] = channels[ins[0]] + channels[ins[1]]
                continue
            module, c_out = build_block(kind, channels[ins[0]], node.get("channels"), node.get("kernel"))
            self.blocks[nid] = module
            channels[nid] = c_out
        self.channels = channels

        self.aux = None
        if aux_head and "pool2" in channels:
            self.aux = nn.Sequential(
                nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(channels["pool2"], self.n_classes)
            )

    def _run(self, x):
        outputs: dict[str, torch.Tensor] = {}
        for nid in self.node_order:
            ins = self.inputs_of[nid]
            if not ins:
                outputs[nid] = x
            elif nid in self.blocks and isinstance(self.blocks[nid], (Summation, Concatenation)):
                outputs[nid] = self.blocks[nid](outputs[ins[0]], outputs[ins[1]])
            else:
                outputs[nid] = self.blocks[nid](outputs[ins[0]])
        return outputs

    def forward(self, x):
        outputs = self._run(x)
        logits = outputs[self.node_order[-1]]
        if self.aux is not None and self.training:
            return logits, self.aux(outputs["pool2"])
        return logits

    @torch.no_grad()
    def node_output_shapes(self) -> dict[str, tuple[int, int, int]]:
        """Per-node output shape (C, H, W) from a real dummy forward pass."""
        was_training = self.training
        self.eval()
        x = torch.zeros(1, *self.input_shape)
        outputs = self._run(x)
        self.train(was_training)
        shapes = {}
        for nid, tensor in outputs.items():
            if tensor.dim() == 4:
                shapes[nid] = tuple(tensor.shape[1:])
            else:
                shapes[nid] = (tensor.shape[1], 1, 1)
        return shapes

    def node_parameter_counts(self) -> dict[str, int]:
        counts = {nid: 0 for nid in self.node_order}
        for nid, module in self.blocks.items():
            counts[nid] = sum(p.numel() for p in module.parameters())
        return counts

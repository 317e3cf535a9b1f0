"""Interval codec between integer genomes and real vectors in [0,1).

Every integer gene owns a quantization total T: an integer value v occupies
the interval [v/T, (v+1)/T), encode draws uniformly inside it, and decode
recovers v = floor(gene * T).  Function, hyperparameter and output genes map
straight through their index; connection genes quantize over the list of
level-back-legal targets for their column, so any vector in [0,1]^n decodes
to a genome that passes validation without repair.  Values at or beyond the
interval bounds clamp (1.0 decodes as T-1), keeping decode total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cgp import IntegerCgpGenome
from .errors import CodecError
from .space import BlockTemplate, NormalStage


@dataclass(frozen=True)
class BlockCodec:
    """Per-gene quantization tables for one Normal block."""

    length: int
    totals: np.ndarray        # (L,) quantization total per gene
    legal_offset: np.ndarray  # (L,) offset into legal_flat, -1 for identity genes
    legal_flat: np.ndarray    # concatenated legal-target lists
    inverse: np.ndarray       # (L, max_index) target -> position, -1 where illegal

    @classmethod
    def for_stage(cls, stage: NormalStage) -> "BlockCodec":
        grid = stage.grid
        n_funcs = len(stage.function_set)
        totals: list[int] = []
        offsets: list[int] = []
        flat: list[int] = []
        legal_per_gene: list[list[int] | None] = []
        for ordinal in range(grid.n_nodes):
            col = grid.column_of(ordinal)
            legal = grid.legal_targets(col)
            totals.append(n_funcs)
            offsets.append(-1)
            legal_per_gene.append(None)
            for _ in range(grid.max_arity):
                totals.append(len(legal))
                offsets.append(len(flat))
                flat.extend(legal)
                legal_per_gene.append(legal)
            for total in stage.hyper_totals:
                totals.append(total)
                offsets.append(-1)
                legal_per_gene.append(None)
        totals.append(grid.n_inputs + grid.n_nodes)
        offsets.append(-1)
        legal_per_gene.append(None)

        max_index = grid.n_inputs + grid.n_nodes
        inverse = np.full((len(totals), max_index), -1, dtype=np.int64)
        for i, legal in enumerate(legal_per_gene):
            if legal is not None:
                inverse[i, legal] = np.arange(len(legal))
        return cls(
            length=len(totals),
            totals=np.asarray(totals, dtype=np.int64),
            legal_offset=np.asarray(offsets, dtype=np.int64),
            legal_flat=np.asarray(flat, dtype=np.int64),
            inverse=inverse,
        )

    def _quantize(self, real: np.ndarray) -> np.ndarray:
        clipped = np.clip(real, 0.0, 1.0)
        idx = np.floor(clipped * self.totals).astype(np.int64)
        return np.clip(idx, 0, self.totals - 1)

    def _apply_mapping(self, idx: np.ndarray) -> np.ndarray:
        mapped = self.legal_offset >= 0
        out = idx.copy()
        out[..., mapped] = self.legal_flat[self.legal_offset[mapped] + idx[..., mapped]]
        return out

    def decode(self, real: np.ndarray) -> IntegerCgpGenome:
        real = np.asarray(real, dtype=np.float64)
        if real.shape != (self.length,):
            raise CodecError(f"expected {self.length} genes, got {real.shape}")
        values = self._apply_mapping(self._quantize(real))
        return IntegerCgpGenome(genes=tuple(int(v) for v in values))

    def decode_batch(self, real: np.ndarray) -> np.ndarray:
        """(N, L) real matrix -> (N, L) integer matrix, one genome per row."""
        idx = self._quantize(np.asarray(real, dtype=np.float64))
        return self._apply_mapping(idx)

    def _positions(self, genome: IntegerCgpGenome) -> np.ndarray:
        values = np.asarray(genome.genes, dtype=np.int64)
        if values.shape != (self.length,):
            raise CodecError(f"expected {self.length} genes, got {values.shape}")
        mapped = self.legal_offset >= 0
        in_table = (values >= 0) & (values < self.inverse.shape[1])
        pos = np.where(mapped & in_table, self.inverse[np.arange(self.length), np.clip(values, 0, self.inverse.shape[1] - 1)], values)
        bad = np.where(mapped, ~in_table | (pos < 0), (values < 0) | (values >= self.totals))
        if bad.any():
            i = int(np.argmax(bad))
            raise CodecError(f"gene {i}: value {values[i]} not encodable (total {self.totals[i]})")
        return pos

    def encode(self, genome: IntegerCgpGenome, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw inside each gene's interval; round trip is exact."""
        pos = self._positions(genome)
        real = (pos + rng.random(self.length)) / self.totals
        # Float rounding at interval edges could land one cell off; midpoints
        # always decode back, so redraw those genes at the midpoint.
        wrong = self._quantize(real) != pos
        if wrong.any():
            real[wrong] = (pos[wrong] + 0.5) / self.totals[wrong]
        return real


@dataclass(frozen=True)
class GenomeCodec:
    """Concatenated per-block codec with fixed sub-vector boundaries."""

    blocks: tuple[BlockCodec, ...]

    @classmethod
    def for_template(cls, template: BlockTemplate) -> "GenomeCodec":
        return cls(blocks=tuple(BlockCodec.for_stage(s) for s in template.normal_stages))

    @property
    def total_length(self) -> int:
        return sum(b.length for b in self.blocks)

    @property
    def slices(self) -> tuple[slice, ...]:
        out = []
        start = 0
        for b in self.blocks:
            out.append(slice(start, start + b.length))
            start += b.length
        return tuple(out)

    def decode(self, real: np.ndarray) -> tuple[IntegerCgpGenome, ...]:
        real = np.asarray(real, dtype=np.float64)
        if real.shape != (self.total_length,):
            raise CodecError(f"expected {self.total_length} genes, got {real.shape}")
        return tuple(b.decode(real[s]) for b, s in zip(self.blocks, self.slices))

    def encode(self, stage_genomes: tuple[IntegerCgpGenome, ...], rng: np.random.Generator) -> np.ndarray:
        if len(stage_genomes) != len(self.blocks):
            raise CodecError(f"expected {len(self.blocks)} stage genomes, got {len(stage_genomes)}")
        return np.concatenate([b.encode(g, rng) for b, g in zip(self.blocks, stage_genomes)])

"""Fixed-grid CGP genotypes: layout, connectivity rules, active-node tracing.

Nodes live on a rows x cols grid, indexed column-major: block inputs occupy
global indices [0, n_inputs), grid nodes follow at n_inputs + ordinal where
ordinal = col * rows + row.  A node may read block inputs (from any column)
or nodes in the preceding `level_back` columns, so genomes are acyclic by
construction.  Each node record is

    [function_id, input_1, ..., input_max_arity, hyper_1, ..., hyper_H]

and the final gene names the node (or block input) feeding the block output.
Connection genes beyond a function's arity are carried but never consumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GridConfig:
    """Grid geometry and connectivity limits for one block."""

    rows: int
    cols: int
    level_back: int = 1
    n_inputs: int = 1
    n_outputs: int = 1
    max_arity: int = 2

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.level_back < 1:
            raise ConfigError("level_back must be >= 1")
        if self.n_inputs < 1 or self.max_arity < 1:
            raise ConfigError("n_inputs and max_arity must be >= 1")
        if self.n_outputs != 1:
            raise ConfigError("exactly one block output is supported")

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    def column_of(self, ordinal: int) -> int:
        return ordinal // self.rows

    def record_width(self, n_hyper: int = 0) -> int:
        return 1 + self.max_arity + n_hyper

    def genome_length(self, n_hyper: int = 0) -> int:
        return self.n_nodes * self.record_width(n_hyper) + 1

    def legal_targets(self, col: int) -> list[int]:
        """Global indices a connection gene in column `col` may name."""
        first = max(0, col - self.level_back)
        targets = list(range(self.n_inputs))
        targets.extend(
            self.n_inputs + k
            for k in range(first * self.rows, col * self.rows)
        )
        return targets


@dataclass(frozen=True)
class IntegerCgpGenome:
    """Flat integer gene vector; the last gene is the block output."""

    genes: tuple[int, ...]

    @property
    def output_gene(self) -> int:
        return self.genes[-1]

    def record(self, ordinal: int, width: int) -> tuple[int, ...]:
        return self.genes[ordinal * width : (ordinal + 1) * width]


@dataclass(frozen=True)
class ActiveTrace:
    """Node ordinals backward-reachable from the block output."""

    active: frozenset[int]


@dataclass(frozen=True)
class Violation:
    """First genome invariant breach found by `validate`."""

    gene_index: int
    reason: str


def random_genome(
    config: GridConfig,
    function_arities: Sequence[int],
    hyper_totals: Sequence[int] = (),
    rng: np.random.Generator | int = 0,
) -> IntegerCgpGenome:
    """Draw a uniformly random genome satisfying all invariants."""
    if not function_arities:
        raise ConfigError("function set must be nonempty")
    if max(function_arities) > config.max_arity:
        raise ConfigError("function arity exceeds grid max_arity")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)

    width = config.record_width(len(hyper_totals))
    n = config.n_nodes
    genes = np.empty(n * width + 1, dtype=np.int64)
    base = np.arange(n) * width
    genes[base] = rng.integers(len(function_arities), size=n)
    for col in range(config.cols):
        legal = np.asarray(config.legal_targets(col), dtype=np.int64)
        ordinals = np.arange(col * config.rows, (col + 1) * config.rows)
        draws = rng.integers(len(legal), size=(len(ordinals), config.max_arity))
        for a in range(config.max_arity):
            genes[base[ordinals] + 1 + a] = legal[draws[:, a]]
    for h, total in enumerate(hyper_totals):
        genes[base + 1 + config.max_arity + h] = rng.integers(total, size=n)
    # Initial outputs always name a node; search may still move the output
    # onto a block input later (identity blocks stay representable).
    genes[-1] = config.n_inputs + int(rng.integers(n))
    return IntegerCgpGenome(genes=tuple(int(v) for v in genes))


def trace_active(
    genome: IntegerCgpGenome,
    config: GridConfig,
    function_arities: Sequence[int],
    n_hyper: int = 0,
) -> ActiveTrace:
    """Backward reachability from the output gene, consuming only the first
    arity(function_id) connection genes of each node."""
    width = config.record_width(n_hyper)
    active: set[int] = set()
    stack: list[int] = []
    if genome.output_gene >= config.n_inputs:
        stack.append(genome.output_gene - config.n_inputs)
    while stack:
        ordinal = stack.pop()
        if ordinal in active:
            continue
        active.add(ordinal)
        record = genome.record(ordinal, width)
        arity = function_arities[record[0]]
        for conn in record[1 : 1 + arity]:
            if conn >= config.n_inputs:
                stack.append(conn - config.n_inputs)
    return ActiveTrace(active=frozenset(active))


def validate(
    genome: IntegerCgpGenome,
    config: GridConfig,
    function_arities: Sequence[int],
    hyper_totals: Sequence[int] = (),
) -> Violation | None:
    """Check every genome invariant; return the first violation or None.

    Legality is re-derived arithmetically from the grid rules (column of the
    named node vs. level_back), independent of any target-list enumeration.
    """
    width = config.record_width(len(hyper_totals))
    expected = config.genome_length(len(hyper_totals))
    if len(genome.genes) != expected:
        return Violation(gene_index=0, reason=f"length {len(genome.genes)} != expected {expected}")
    n_funcs = len(function_arities)
    for ordinal in range(config.n_nodes):
        base = ordinal * width
        col = config.column_of(ordinal)
        fid = genome.genes[base]
        if not 0 <= fid < n_funcs:
            return Violation(gene_index=base, reason=f"function_id {fid} out of range [0,{n_funcs})")
        for a in range(config.max_arity):
            idx = base + 1 + a
            conn = genome.genes[idx]
            if conn < 0:
                return Violation(gene_index=idx, reason=f"connection {conn} negative")
            if conn >= config.n_inputs:
                target_col = config.column_of(conn - config.n_inputs)
                if conn - config.n_inputs >= config.n_nodes:
                    return Violation(gene_index=idx, reason=f"connection {conn} names no node")
                if target_col >= col:
                    return Violation(
                        gene_index=idx,
                        reason=f"connection {conn} in column {target_col} not earlier than {col}",
                    )
                if target_col < col - config.level_back:
                    return Violation(
                        gene_index=idx,
                        reason=f"connection {conn} beyond level_back {config.level_back}",
                    )
        for h, total in enumerate(hyper_totals):
            idx = base + 1 + config.max_arity + h
            val = genome.genes[idx]
            if not 0 <= val < total:
                return Violation(gene_index=idx, reason=f"hyperparameter {val} out of range [0,{total})")
    out = genome.output_gene
    if not 0 <= out < config.n_inputs + config.n_nodes:
        return Violation(gene_index=expected - 1, reason=f"output gene {out} out of range")
    return None


def validate_batch(
    int_matrix: np.ndarray,
    config: GridConfig,
    function_arities: Sequence[int],
    hyper_totals: Sequence[int] = (),
) -> int:
    """Vectorized invariant check over a (N, genome_length) matrix.

    Returns the number of invalid genomes; used for bulk fuzzing where the
    per-genome `validate` loop would dominate runtime.
    """
    n_hyper = len(hyper_totals)
    width = config.record_width(n_hyper)
    if int_matrix.shape[1] != config.genome_length(n_hyper):
        raise ConfigError("matrix width does not match genome length")
    bad = np.zeros(int_matrix.shape[0], dtype=bool)
    n_funcs = len(function_arities)
    for ordinal in range(config.n_nodes):
        base = ordinal * width
        col = config.column_of(ordinal)
        fid = int_matrix[:, base]
        bad |= (fid < 0) | (fid >= n_funcs)
        for a in range(config.max_arity):
            conn = int_matrix[:, base + 1 + a]
            is_node = conn >= config.n_inputs
            target_col = (conn - config.n_inputs) // config.rows
            bad |= conn < 0
            bad |= is_node & (
                (conn - config.n_inputs >= config.n_nodes)
                | (target_col >= col)
                | (target_col < col - config.level_back)
            )
        for h, total in enumerate(hyper_totals):
            val = int_matrix[:, base + 1 + config.max_arity + h]
            bad |= (val < 0) | (val >= total)
    out = int_matrix[:, -1]
    bad |= (out < 0) | (out >= config.n_inputs + config.n_nodes)
    return int(bad.sum())

"""Genome encoding and decoding for the two-cell CNN search space.

A genome is 40 integers: 20 describing the normal cell followed by 20
describing the reduction cell.  Each cell has five internal nodes,
numbered 2..6; nodes 0 and 1 are the outputs of the two preceding
cells.  A node contributes four genes (input_a, op_a, input_b, op_b)
and may draw each input from any strictly earlier node, so the cell is
a DAG by construction and every internal node has in-degree exactly 2.
Internal nodes that no later node consumes are concatenated
channel-wise to form the cell output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput, DegenerateResolution, InvalidLength, OutOfBounds

GENOME_LENGTH = 40
NODES_PER_CELL = 5
GENES_PER_NODE = 4
GENES_PER_CELL = NODES_PER_CELL * GENES_PER_NODE
NUM_OPS = 7


class OpCode(IntEnum):
    IDENTITY = 0
    SEP_CONV_3 = 1
    SEP_CONV_5 = 2
    DIL_CONV_3 = 3
    DIL_CONV_5 = 4
    AVG_POOL_3 = 5
    MAX_POOL_3 = 6


OP_KERNEL = {
    OpCode.IDENTITY: 1,
    OpCode.SEP_CONV_3: 3,
    OpCode.SEP_CONV_5: 5,
    OpCode.DIL_CONV_3: 3,
    OpCode.DIL_CONV_5: 5,
    OpCode.AVG_POOL_3: 3,
    OpCode.MAX_POOL_3: 3,
}

OP_DILATION = {
    OpCode.IDENTITY: 1,
    OpCode.SEP_CONV_3: 1,
    OpCode.SEP_CONV_5: 1,
    OpCode.DIL_CONV_3: 2,
    OpCode.DIL_CONV_5: 2,
    OpCode.AVG_POOL_3: 1,
    OpCode.MAX_POOL_3: 1,
}

CONV_OPS = frozenset(
    {OpCode.SEP_CONV_3, OpCode.SEP_CONV_5, OpCode.DIL_CONV_3, OpCode.DIL_CONV_5}
)
POOL_OPS = frozenset({OpCode.AVG_POOL_3, OpCode.MAX_POOL_3})


def gene_bounds() -> tuple[int, ...]:
    """Inclusive upper bound for each of the 40 genome positions.

    Bounds depend only on position, never on other gene values, so any
    position-aligned recombination of valid genomes is valid.
    """
    per_cell = []
    for node in range(NODES_PER_CELL):
        input_bound = node + 1  # node k (id k+2) may consume nodes 0..k+1
        per_cell.extend([input_bound, NUM_OPS - 1, input_bound, NUM_OPS - 1])
    return tuple(per_cell) * 2


@dataclass(frozen=True)
class NodeGene:
    """One internal node: two (input, op) picks.  Inputs may coincide."""

    input_a: int
    op_a: OpCode
    input_b: int
    op_b: OpCode


@dataclass(frozen=True)
class CellGenome:
    nodes: tuple[NodeGene, ...]

    def __post_init__(self):
        if len(self.nodes) != NODES_PER_CELL:
            raise InvalidLength(len(self.nodes) * GENES_PER_NODE, GENES_PER_CELL)
        for k, node in enumerate(self.nodes):
            bound = k + 1
            for value in (node.input_a, node.input_b):
                if not 0 <= value <= bound:
                    raise OutOfBounds(-1, value, bound)


@dataclass(frozen=True)
class Genome:
    normal: CellGenome
    reduction: CellGenome


def flatten(genome: Genome) -> list[int]:
    """Serialize to the canonical 40-integer vector (normal cell first)."""
    out: list[int] = []
    for cell in (genome.normal, genome.reduction):
        for node in cell.nodes:
            out.extend([node.input_a, int(node.op_a), node.input_b, int(node.op_b)])
    return out


def parse(values: Sequence[int] | Iterable[int]) -> Genome:
    """Build a Genome from a 40-integer vector, validating per-position bounds.

    Raises InvalidLength for a wrong-sized vector and OutOfBounds (with
    the flat position) for the first violating gene.
    """
    vec = [int(v) for v in values]
    if len(vec) != GENOME_LENGTH:
        raise InvalidLength(len(vec), GENOME_LENGTH)
    bounds = gene_bounds()
    for pos, (value, bound) in enumerate(zip(vec, bounds)):
        if not 0 <= value <= bound:
            raise OutOfBounds(pos, value, bound)
    cells = []
    for base in (0, GENES_PER_CELL):
        nodes = []
        for k in range(NODES_PER_CELL):
            i = base + k * GENES_PER_NODE
            nodes.append(
                NodeGene(vec[i], OpCode(vec[i + 1]), vec[i + 2], OpCode(vec[i + 3]))
            )
        cells.append(CellGenome(tuple(nodes)))
    return Genome(cells[0], cells[1])


def random_genome(rng: np.random.Generator) -> Genome:
    """Sample every gene uniformly over its positional range."""
    bounds = np.array(gene_bounds(), dtype=np.int64)
    values = rng.integers(0, bounds + 1)
    return parse(values.tolist())


def default_reductions(num_layers: int) -> frozenset[int]:
    """Reduction cells at the one-third and two-thirds layer positions."""
    return frozenset({math.ceil(num_layers / 3), math.ceil(2 * num_layers / 3)})


@dataclass(frozen=True)
class MacroConfig:
    """Macro skeleton: how many cells are stacked and where width doubles."""

    num_layers: int = 5
    init_channels: int = 10
    reduction_positions: frozenset[int] = frozenset({2, 4})
    num_classes: int = 10
    input_shape: tuple[int, int, int] = (3, 32, 32)

    def __post_init__(self):
        if self.num_layers < 1:
            raise DegenerateInput("num_layers must be >= 1")
        if self.init_channels < 1:
            raise DegenerateInput("init_channels must be >= 1")
        if self.num_classes < 2:
            raise DegenerateInput("num_classes must be >= 2")
        if len(self.input_shape) != 3 or any(d < 1 for d in self.input_shape):
            raise DegenerateInput("input_shape must be three positive ints")
        bad = [p for p in self.reduction_positions if not 1 <= p <= self.num_layers]
        if bad:
            raise DegenerateInput(
                f"reduction positions {sorted(bad)} outside 1..{self.num_layers}"
            )
        object.__setattr__(self, "reduction_positions", frozenset(self.reduction_positions))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))


@dataclass(frozen=True)
class OpSpec:
    code: OpCode
    stride: int


@dataclass(frozen=True)
class NodeSpec:
    input_a: int
    op_a: OpSpec
    input_b: int
    op_b: OpSpec


@dataclass(frozen=True)
class CellPlan:
    """One stacked cell, fully resolved: widths, strides, and wiring."""

    index: int  # 1-based position in the stack
    reduction: bool
    width: int  # channel count of every internal node
    s0_channels: int
    s1_channels: int
    s0_reduce: bool  # input 0 arrives at 2x resolution and is downsampled
    in_hw: tuple[int, int]  # resolution of input 1 (the cell working resolution)
    out_hw: tuple[int, int]
    nodes: tuple[NodeSpec, ...]
    concat: tuple[int, ...]  # node ids (2..6) concatenated into the output

    @property
    def out_channels(self) -> int:
        return len(self.concat) * self.width


@dataclass(frozen=True)
class NetworkPlan:
    """A decoded genome: the full stack from stem to pooled feature vector."""

    macro: MacroConfig
    stem_channels: int
    cells: tuple[CellPlan, ...]
    feature_dim: int
    out_hw: tuple[int, int]


def _half(x: int) -> int:
    # stride-2 same padding: output is ceil(input / 2)
    return -(-x // 2)


def decode(genome: Genome, macro: MacroConfig) -> NetworkPlan:
    """Resolve a genome against a macro skeleton into an executable plan.

    Channel width doubles at each reduction cell; ops consuming the two
    cell inputs inside a reduction cell get stride 2.  Raises
    DegenerateResolution if a reduction cell would see a spatial side
    smaller than 2.
    """
    height, width_px = macro.input_shape[1], macro.input_shape[2]
    hw_prev_prev = hw_prev = (height, width_px)
    c_prev_prev = c_prev = macro.init_channels
    node_width = macro.init_channels
    cells = []
    for layer in range(1, macro.num_layers + 1):
        is_reduction = layer in macro.reduction_positions
        if is_reduction:
            if min(hw_prev) < 2:
                raise DegenerateResolution(layer, hw_prev)
            node_width *= 2
            out_hw = (_half(hw_prev[0]), _half(hw_prev[1]))
        else:
            out_hw = hw_prev
        cell_genes = genome.reduction if is_reduction else genome.normal
        nodes = []
        used: set[int] = set()
        for gene in cell_genes.nodes:
            specs = []
            for inp, op in ((gene.input_a, gene.op_a), (gene.input_b, gene.op_b)):
                stride = 2 if is_reduction and inp < 2 else 1
                specs.append(OpSpec(op, stride))
                used.add(inp)
            nodes.append(NodeSpec(gene.input_a, specs[0], gene.input_b, specs[1]))
        concat = tuple(
            node_id for node_id in range(2, 2 + NODES_PER_CELL) if node_id not in used
        )
        cells.append(
            CellPlan(
                index=layer,
                reduction=is_reduction,
                width=node_width,
                s0_channels=c_prev_prev,
                s1_channels=c_prev,
                s0_reduce=hw_prev_prev != hw_prev,
                in_hw=hw_prev,
                out_hw=out_hw,
                nodes=tuple(nodes),
                concat=concat,
            )
        )
        c_prev_prev, c_prev = c_prev, len(concat) * node_width
        hw_prev_prev, hw_prev = hw_prev, out_hw
    return NetworkPlan(
        macro=macro,
        stem_channels=macro.init_channels,
        cells=tuple(cells),
        feature_dim=c_prev,
        out_hw=hw_prev,
    )

"""Encoding invariants: bounds, round trips, decode structure."""

from __future__ import annotations

import numpy as np
import pytest

from rwenas.errors import DegenerateResolution, InvalidLength, OutOfBounds
from rwenas.search_space import (
    GENOME_LENGTH,
    MacroConfig,
    OpCode,
    decode,
    default_reductions,
    flatten,
    gene_bounds,
    parse,
    random_genome,
)


def test_bounds_layout():
    bounds = gene_bounds()
    assert len(bounds) == GENOME_LENGTH
    # the two cell halves use identical positional bounds
    assert bounds[:20] == bounds[20:]
    # node k (0-based) may address inputs 0..k+1; op genes allow the 7 ops
    for k in range(5):
        base = k * 4
        assert bounds[base] == bounds[base + 2] == k + 1
        assert bounds[base + 1] == bounds[base + 3] == 6


def test_parse_rejects_wrong_length():
    with pytest.raises(InvalidLength) as err:
        parse([0] * 39)
    assert err.value.length == 39 and err.value.expected == 40


@pytest.mark.parametrize("position", [0, 1, 4, 17, 20, 39])
def test_parse_rejects_out_of_bounds_with_position(position):
    bounds = gene_bounds()
    vec = [0] * GENOME_LENGTH
    vec[position] = bounds[position] + 1
    with pytest.raises(OutOfBounds) as err:
        parse(vec)
    assert err.value.position == position
    assert err.value.value == bounds[position] + 1
    assert err.value.bound == bounds[position]


def test_parse_rejects_negative_gene():
    vec = [0] * GENOME_LENGTH
    vec[8] = -1
    with pytest.raises(OutOfBounds) as err:
        parse(vec)
    assert err.value.position == 8


def test_flatten_parse_round_trip_random():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        genome = random_genome(rng)
        vec = flatten(genome)
        assert len(vec) == GENOME_LENGTH
        assert parse(vec) == genome
        assert flatten(parse(vec)) == vec


def test_random_genome_is_uniform_per_position():
    rng = np.random.default_rng(9)
    draws = np.array([flatten(random_genome(rng)) for _ in range(20000)])
    bounds = gene_bounds()
    # op genes: each of the 7 codes near frequency 1/7
    op_positions = [p for p in range(GENOME_LENGTH) if bounds[p] == 6]
    counts = np.zeros(7)
    for p in op_positions:
        counts += np.bincount(draws[:, p], minlength=7)
    freq = counts / counts.sum()
    assert np.all(np.abs(freq - 1 / 7) < 0.02)
    # every admissible value appears at every position
    for p in range(GENOME_LENGTH):
        assert set(np.unique(draws[:, p])) == set(range(bounds[p] + 1))


def test_genome_dag_structure():
    rng = np.random.default_rng(5)
    for _ in range(200):
        genome = random_genome(rng)
        for cell in (genome.normal, genome.reduction):
            for k, node in enumerate(cell.nodes):
                # acyclic: inputs strictly precede the node (id k+2)
                assert 0 <= node.input_a <= k + 1
                assert 0 <= node.input_b <= k + 1


def test_default_reductions_thirds():
    assert default_reductions(5) == frozenset({2, 4})
    assert default_reductions(8) == frozenset({3, 6})
    assert default_reductions(1) == frozenset({1})


def test_decode_all_zero_genome():
    # every node: both inputs node 0, identity ops; nodes 2..6 all unused
    plan = decode(parse([0] * GENOME_LENGTH), MacroConfig())
    assert [c.reduction for c in plan.cells] == [False, True, False, True, False]
    assert [c.width for c in plan.cells] == [10, 20, 20, 40, 40]
    for cell in plan.cells:
        assert cell.concat == (2, 3, 4, 5, 6)
        assert cell.out_channels == 5 * cell.width
    assert [c.out_hw for c in plan.cells] == [
        (32, 32),
        (16, 16),
        (16, 16),
        (8, 8),
        (8, 8),
    ]
    assert plan.feature_dim == 5 * 40
    # reduction cells: ops fed by cell inputs are strided
    red = plan.cells[1]
    assert all(
        spec.stride == 2
        for node in red.nodes
        for inp, spec in ((node.input_a, node.op_a), (node.input_b, node.op_b))
        if inp < 2
    )


def test_decode_concat_excludes_consumed_nodes():
    vec = [0] * GENOME_LENGTH
    # normal cell: node 3 (genes 4..7) consumes node 2 twice
    vec[4] = 2
    vec[6] = 2
    plan = decode(parse(vec), MacroConfig())
    normal_cells = [c for c in plan.cells if not c.reduction]
    for cell in normal_cells:
        assert 2 not in cell.concat
        assert cell.concat == (3, 4, 5, 6)


def test_decode_node_six_always_unused():
    rng = np.random.default_rng(77)
    for _ in range(100):
        plan = decode(random_genome(rng), MacroConfig())
        for cell in plan.cells:
            assert 6 in cell.concat
            assert len(cell.concat) >= 1


def test_decode_width_and_channel_flow():
    rng = np.random.default_rng(13)
    macro = MacroConfig()
    for _ in range(50):
        plan = decode(random_genome(rng), macro)
        prev_prev_c = prev_c = macro.init_channels
        for cell in plan.cells:
            assert cell.s0_channels == prev_prev_c
            assert cell.s1_channels == prev_c
            prev_prev_c, prev_c = prev_c, cell.out_channels
        assert plan.feature_dim == prev_c


def test_decode_s0_reduce_follows_resolution_change():
    plan = decode(parse([0] * GENOME_LENGTH), MacroConfig())
    # the cell right after each reduction sees mismatched input resolutions
    assert [c.s0_reduce for c in plan.cells] == [False, False, True, False, True]


def test_decode_degenerate_resolution():
    macro = MacroConfig(
        num_layers=7,
        init_channels=4,
        reduction_positions=frozenset({1, 2, 3, 4, 5, 6}),
        input_shape=(3, 32, 32),
    )
    with pytest.raises(DegenerateResolution) as err:
        decode(parse([0] * GENOME_LENGTH), macro)
    # 32 -> 16 -> 8 -> 4 -> 2 -> 1: the sixth reduction cannot halve 1x1
    assert err.value.layer == 6
    assert err.value.resolution == (1, 1)


def test_decode_odd_resolution_rounds_up():
    macro = MacroConfig(
        num_layers=3,
        init_channels=4,
        reduction_positions=frozenset({1, 2}),
        input_shape=(3, 11, 11),
    )
    plan = decode(parse([0] * GENOME_LENGTH), macro)
    assert [c.out_hw for c in plan.cells] == [(6, 6), (3, 3), (3, 3)]

"""Independently written reference computations shared by the test suite.

Nothing here imports from the modules under test: the cost oracle
re-derives widths and resolutions straight from the flat gene vector,
and the front partition is the O(n^3) repeated nondominance filter.
"""

from __future__ import annotations

import math


def oracle_dominates(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def oracle_fronts(objectives):
    """Brute-force front partition by repeated nondominance filtering."""
    remaining = list(range(len(objectives)))
    fronts = []
    while remaining:
        front = [
            i
            for i in remaining
            if not any(
                oracle_dominates(objectives[j], objectives[i])
                for j in remaining
                if j != i
            )
        ]
        fronts.append(sorted(front))
        remaining = [i for i in remaining if i not in front]
    return fronts


def oracle_costs(vec, layers, channels, reductions, classes=10, in_hw=32, in_c=3):
    """(flops, params) summed layer by layer, straight from the genes."""
    flops = 0
    params = 0
    # stem: dense 3x3 conv plus batch-stat norm
    flops += in_hw * in_hw * channels * in_c * 9 + 2 * channels * in_hw * in_hw
    params += channels * in_c * 9

    def cell_genes(is_reduction):
        base = 20 if is_reduction else 0
        return vec[base : base + 20]

    width = channels
    res = in_hw
    c_pp = c_p = channels
    for layer in range(1, layers + 1):
        reduction = layer in reductions
        if reduction:
            width *= 2
        rin = res
        rout = math.ceil(res / 2) if reduction else res
        genes = cell_genes(reduction)
        # preprocessing: both inputs become `width` channels at rin
        for c_in in (c_pp, c_p):
            flops += rin * rin * width * c_in + 2 * width * rin * rin
            params += width * c_in
        used = set()
        for k in range(5):
            ia, oa, ib, ob = genes[4 * k : 4 * k + 4]
            used.update((ia, ib))
            for inp, op in ((ia, oa), (ib, ob)):
                strided = reduction and inp < 2
                if op == 0:  # identity
                    if strided:
                        flops += rout * rout * width * width + 2 * width * rout * rout
                        params += width * width
                elif op in (1, 2, 3, 4):  # separable (possibly dilated) conv
                    kern = 3 if op in (1, 3) else 5
                    flops += rout * rout * width * kern * kern
                    flops += rout * rout * width * width
                    flops += 2 * width * rout * rout
                    params += width * kern * kern + width * width
                else:  # 3x3 pools
                    flops += rout * rout * width * 9
        concat = len([n for n in range(2, 7) if n not in used])
        c_pp, c_p = c_p, concat * width
        res = rout
    # global average pool and linear head
    flops += c_p * res * res
    flops += c_p * classes
    params += c_p * classes + classes
    return flops, params

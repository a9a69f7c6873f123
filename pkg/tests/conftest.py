"""Shared helpers for building random instances."""

import numpy as np
import pytest

from widepaths.blocks import BlockSide
from widepaths.netcore import Architecture, Dataset, NetworkParams


def random_params(arch: Architecture, rng: np.random.Generator,
                  scale: float = 1.0) -> NetworkParams:
    return NetworkParams(tuple(scale * rng.normal(size=s)
                               for s in arch.matrix_shapes()))


def random_dataset(arch: Architecture, n: int,
                   rng: np.random.Generator) -> Dataset:
    return Dataset(rng.normal(size=(arch.input_dim, n)),
                   rng.normal(size=(arch.output_dim, n)))


def random_block_params(arch: Architecture, s: int, side: BlockSide,
                        rng: np.random.Generator,
                        scale: float = 1.0) -> NetworkParams:
    """Random parameter supported on the s-corner of the given side."""
    mats = []
    shapes = arch.matrix_shapes()
    l = len(shapes) - 1
    for j, (rows, cols) in enumerate(shapes):
        M = np.zeros((rows, cols))
        if side is BlockSide.UPPER:
            rsl = slice(0, min(s, rows)) if j < l else slice(None)
            csl = slice(0, min(s, cols)) if j > 0 else slice(None)
        else:
            rsl = slice(max(rows - s, 0), rows) if j < l else slice(None)
            csl = slice(max(cols - s, 0), cols) if j > 0 else slice(None)
        block = M[rsl, csl]
        M[rsl, csl] = scale * rng.normal(size=block.shape)
        mats.append(M)
    return NetworkParams(tuple(mats))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

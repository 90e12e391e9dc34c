# =======================================================================
# Project:      SeqPack Solver
# File:         Random cuboid instances
# =======================================================================

import logging
from fractions import Fraction

import numpy as np

from .base import BaseGenerator
from geometry import ConvexPolygon
from model import Instance, PrintObject
from constants import CUBOID_MAX_DIM, CUBOID_MIN_DIM
from exceptions import InvalidInstance

logger = logging.getLogger(__name__)


class CuboidGenerator(BaseGenerator):
    """
    Cuboids with integer length, width and height drawn uniformly from
    [CUBOID_MIN_DIM, CUBOID_MAX_DIM] mm. The footprint is length x width.
    """

    def __init__(self, *args, min_dim: int = CUBOID_MIN_DIM, max_dim: int = CUBOID_MAX_DIM, **kwargs):
        super().__init__(*args, **kwargs)
        if not 0 < min_dim <= max_dim:
            raise InvalidInstance(f"Bad cuboid dimension range [{min_dim}, {max_dim}]")
        self.min_dim = min_dim
        self.max_dim = max_dim

    def generate(self, k: int, seed: int) -> Instance:
        if k < 1:
            raise InvalidInstance(f"k must be at least 1, got {k}")
        rng = np.random.default_rng(seed)
        dims = rng.integers(self.min_dim, self.max_dim + 1, size=(k, 3))

        objects = []
        for n, (length, width, height) in enumerate(dims.tolist()):
            objects.append(PrintObject(
                id=f"cuboid-{n}",
                footprint=ConvexPolygon.rectangle(length, width),
                height=Fraction(height),
            ))
        logger.debug(f"Generated {k} cuboids with seed {seed}")
        return Instance(
            plate=self.plate,
            extruder=self.extruder,
            objects=tuple(objects),
            params=self.params,
            name=f"cuboids-k{k}-s{seed}",
        )

# =======================================================================
# Project:      SeqPack Solver
# File:         Base generator interface
# =======================================================================

from abc import ABC, abstractmethod
from typing import Optional

from config import settings
from model import Extruder, Instance, Plate, SolverParams
from constants import PLATE_HEIGHT, PLATE_WIDTH


class BaseGenerator(ABC):
    """Base class for all instance generators"""

    def __init__(
        self,
        plate: Optional[Plate] = None,
        extruder: Optional[Extruder] = None,
        params: Optional[SolverParams] = None,
    ):
        self.plate = plate or Plate.rectangle(PLATE_WIDTH, PLATE_HEIGHT)
        self.extruder = extruder or Extruder.square(settings.EXTRUDER_HALF_SIZE)
        self.params = params or SolverParams()

    @abstractmethod
    def generate(self, k: int, seed: int) -> Instance:
        """
        Build a random instance.

        Args:
            k: Number of objects, at least 1
            seed: Seed for numpy's default_rng; equal seeds give equal instances

        Returns:
            Instance on this generator's plate with this generator's extruder
        """
        pass

# =======================================================================
# Project:      SeqPack Solver
# File:         Generator factory pattern
# =======================================================================

from typing import Dict, List, Type
from .base import BaseGenerator
from .cuboid_generator import CuboidGenerator
from .complex_generator import ComplexGenerator
from exceptions import InvalidInstance


class GeneratorFactory:
    _generators: Dict[str, Type[BaseGenerator]] = {
        'cuboids': CuboidGenerator,
        'complex': ComplexGenerator,
    }

    @classmethod
    def names(cls) -> List[str]:
        return sorted(cls._generators)

    @classmethod
    def get_generator(cls, name: str, **kwargs) -> BaseGenerator:
        """
        Get the generator registered under name.

        Args:
            name: Generator name ('cuboids' or 'complex')
            **kwargs: Passed to the generator constructor (plate, extruder, params, ...)

        Returns:
            A configured generator instance

        Raises:
            InvalidInstance: If no generator has that name
        """
        generator_class = cls._generators.get(name.lower())

        if not generator_class:
            raise InvalidInstance(f"Unknown generator: {name}")

        return generator_class(**kwargs)

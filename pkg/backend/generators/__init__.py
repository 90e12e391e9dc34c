# =======================================================================
# Project:      SeqPack Solver
# File:         Generator module initialization
# =======================================================================

# Instance generators package
from .base import BaseGenerator
from .cuboid_generator import CuboidGenerator
from .complex_generator import ComplexGenerator
from .factory import GeneratorFactory

# =======================================================================
# Project:      SeqPack Solver
# File:         Custom exception definitions
# =======================================================================

from typing import List, Optional


class SeqPackException(Exception):
    """Base exception for the application."""
    def __init__(self, message: str, details: str = None):
        self.message = message
        self.details = details
        super().__init__(self.message)


# -----------------------------------------------------------------------
# Geometry
# -----------------------------------------------------------------------

class GeometryError(SeqPackException):
    """Raised when a geometric operation receives unusable input."""
    pass

class DegenerateInput(GeometryError):
    """Raised when points do not span a polygon of positive area."""
    pass

class InvalidScale(GeometryError):
    """Raised when a scale factor is not strictly positive (or above 1 where forbidden)."""
    pass

class DegenerateEdge(GeometryError):
    """Raised when an edge has identical endpoints."""
    pass

class ParallelEdges(GeometryError):
    """Raised when a segment constraint is requested for parallel edges."""
    pass


# -----------------------------------------------------------------------
# Problem model
# -----------------------------------------------------------------------

class ModelError(SeqPackException):
    """Raised when an instance or placement breaks a model invariant."""
    pass

class InvalidInstance(ModelError):
    """Raised when an instance cannot be built (ids, extruder, plate center)."""
    pass

class TieError(ModelError):
    """Raised when two print times are not separated by more than epsilon_T."""
    pass


# -----------------------------------------------------------------------
# Encoding
# -----------------------------------------------------------------------

class EncodingError(SeqPackException):
    """Raised when the formula cannot be built or emitted."""
    pass

class UndeclaredVariable(EncodingError):
    """Raised when a formula references a variable that was never declared."""
    pass


# -----------------------------------------------------------------------
# SMT solver process
# -----------------------------------------------------------------------

class SolverError(SeqPackException):
    """Raised when talking to the external SMT solver fails."""
    pass

class SolverSpawnError(SolverError):
    """Raised when the solver executable cannot be started."""
    pass

class HandshakeError(SolverError):
    """Raised when the solver does not answer the initial configuration commands."""
    pass

class SolverProtocolError(SolverError):
    """Raised when the solver answers with an error or unparsable output."""
    pass

class MalformedModelValue(SolverError):
    """Raised when a model value is not a rational literal."""
    pass

class StackUnderflow(SolverError):
    """Raised on pop at assertion level 0."""
    pass

class SolverCrashed(SolverError):
    """Raised when the solver process is gone (exited or killed after a deadline)."""
    pass


# -----------------------------------------------------------------------
# Refinement loop
# -----------------------------------------------------------------------

class CegarError(SeqPackException):
    """Raised when the refinement loop cannot make progress."""
    pass

class NonTermination(CegarError):
    """Raised when refinement exceeds the number of constraints that exist."""
    pass

class ObjectNeverFits(CegarError):
    """Raised when a single object cannot be placed on an empty plate."""
    def __init__(self, message: str, details: str = None, object_ids: Optional[List[str]] = None):
        super().__init__(message, details)
        self.object_ids = object_ids or []


# -----------------------------------------------------------------------
# Verification and file formats
# -----------------------------------------------------------------------

class VerificationError(SeqPackException):
    """Raised when a placement cannot be checked, or a solver placement fails certification."""
    pass

class MissingPlacement(VerificationError):
    """Raised when a placement does not cover every object of the instance."""
    pass

class FormatError(SeqPackException):
    """Raised when an instance or solution document is unusable."""
    pass

class InstanceParseError(FormatError):
    """Raised on syntax or schema errors; carries line/column or field positions."""
    def __init__(self, message: str, details: str = None, line: Optional[int] = None,
                 column: Optional[int] = None, positions: Optional[List[str]] = None):
        super().__init__(message, details)
        self.line = line
        self.column = column
        self.positions = positions or []

class InconsistentFiles(FormatError):
    """Raised when a solution does not belong to the given instance."""
    pass

# =======================================================================
# Project:      SeqPack Solver
# File:         Instance and solution file formats
# =======================================================================

"""
JSON documents for instances and solutions.

Coordinates are exact: integers, decimal strings ("2.5") or fraction
strings ("1/3"). Unknown fields are rejected and every schema error names
the field path it came from.
"""
import json
import logging
from pathlib import Path
from typing import Annotated, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import settings
from geometry import ConvexPolygon, Point2, convex_hull, project_xy, to_rat
from model import (
    Extruder,
    Instance,
    ObjectPosition,
    Placement,
    Plate,
    PrintObject,
    SolveOutcome,
    SolverMode,
    SolverParams,
    SolveStatus,
    footprint_from_points,
)
from cegar import PlateAssignment
from exceptions import GeometryError, InconsistentFiles, InstanceParseError, ModelError

logger = logging.getLogger(__name__)


def _check_rational(value: Union[int, float, str]) -> Union[int, float, str]:
    try:
        to_rat(value)
    except GeometryError as e:
        raise ValueError(e.message)
    return value


Rational = Annotated[Union[int, float, str], AfterValidator(_check_rational)]
Point = Tuple[Rational, Rational]
Point3 = Tuple[Rational, Rational, Rational]


def fraction_text(value) -> str:
    """Exact text form: '3', '-1/3'"""
    return str(to_rat(value))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ==================== Instance documents ====================

class PlateSpec(_Strict):
    width: Optional[Rational] = None
    height: Optional[Rational] = None
    polygon: Optional[List[Point]] = None
    center: Optional[Point] = None

    @model_validator(mode="after")
    def one_shape(self):
        rect = self.width is not None or self.height is not None
        if rect == (self.polygon is not None):
            raise ValueError("give either width and height, or polygon")
        if rect and (self.width is None or self.height is None):
            raise ValueError("a rectangular plate needs both width and height")
        return self


class ExtruderSpec(_Strict):
    half_size: Optional[Rational] = None
    polygon: Optional[List[Point]] = None

    @model_validator(mode="after")
    def one_shape(self):
        if (self.half_size is None) == (self.polygon is None):
            raise ValueError("give either half_size or polygon")
        return self


class ObjectSpec(_Strict):
    id: str = Field(min_length=1)
    footprint: Optional[List[Point]] = None
    points3d: Optional[List[Point3]] = None
    height: Optional[Rational] = None

    @model_validator(mode="after")
    def one_outline(self):
        if (self.footprint is None) == (self.points3d is None):
            raise ValueError("give either footprint or points3d")
        return self


class ParamsSpec(_Strict):
    epsilon_t: Optional[Rational] = None
    epsilon_xy: Optional[Rational] = None
    timeout_ms: Optional[int] = Field(default=None, gt=0)
    mode: Optional[SolverMode] = None
    optimize_sigma: Optional[bool] = None


class InstanceFile(_Strict):
    name: str = "instance"
    plate: PlateSpec
    extruder: ExtruderSpec = Field(default_factory=lambda: ExtruderSpec(half_size=settings.EXTRUDER_HALF_SIZE))
    objects: List[ObjectSpec] = Field(min_length=1)
    params: ParamsSpec = Field(default_factory=ParamsSpec)


def _points(raw: Sequence[Sequence]) -> List[Point2]:
    return [Point2(p[0], p[1]) for p in raw]


def _build_object(n: int, spec: ObjectSpec) -> PrintObject:
    height = to_rat(spec.height) if spec.height is not None else None
    if spec.points3d is not None:
        source = tuple(tuple(to_rat(c) for c in p) for p in spec.points3d)
        footprint = convex_hull(project_xy(source))
        if height is None:
            zs = [p[2] for p in source]
            height = max(zs) - min(zs)
        return PrintObject(id=spec.id, footprint=footprint, source_points=source, height=height)

    footprint, was_convex = footprint_from_points(_points(spec.footprint))
    if not was_convex:
        logger.warning(f"Object {spec.id} (objects.{n}) footprint is not a counterclockwise convex polygon; "
                       f"using its convex hull")
    return PrintObject(id=spec.id, footprint=footprint, height=height)


def _default_params(spec: ParamsSpec) -> SolverParams:
    return SolverParams(
        epsilon_t=to_rat(spec.epsilon_t if spec.epsilon_t is not None else settings.EPSILON_T),
        epsilon_xy=to_rat(spec.epsilon_xy if spec.epsilon_xy is not None else settings.EPSILON_XY),
        timeout_ms=spec.timeout_ms if spec.timeout_ms is not None else settings.TIMEOUT_MS,
        mode=spec.mode or SolverMode.CEGAR,
        optimize_sigma=spec.optimize_sigma if spec.optimize_sigma is not None else True,
    )


def _positions(error: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in error.errors()]


def instance_from_document(doc: InstanceFile) -> Instance:
    """Turn a validated document into an Instance"""
    field = "plate"
    try:
        if doc.plate.polygon is not None:
            center = Point2(*doc.plate.center) if doc.plate.center is not None else None
            plate = Plate(ConvexPolygon(_points(doc.plate.polygon)), center)
        else:
            plate = Plate.rectangle(to_rat(doc.plate.width), to_rat(doc.plate.height))
            if doc.plate.center is not None:
                plate = Plate(plate.polygon, Point2(*doc.plate.center))

        field = "extruder"
        if doc.extruder.polygon is not None:
            extruder = Extruder(ConvexPolygon(_points(doc.extruder.polygon)))
        else:
            extruder = Extruder.square(doc.extruder.half_size)

        objects = []
        for n, spec in enumerate(doc.objects):
            field = f"objects.{n}"
            objects.append(_build_object(n, spec))

        field = "params"
        params = _default_params(doc.params)
        field = "objects"
        return Instance(plate=plate, extruder=extruder, objects=tuple(objects), params=params, name=doc.name)
    except (GeometryError, ModelError) as e:
        raise InstanceParseError(f"Invalid instance at {field}: {e.message}", details=e.details, positions=[field])


def parse_instance(text: str, source: str = "<string>") -> Instance:
    """
    Parse instance JSON text.

    Raises:
        InstanceParseError: On JSON syntax errors (with line and column),
            schema errors (with field positions) or invalid geometry
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(f"{source}: {e.msg}", line=e.lineno, column=e.colno)
    try:
        doc = InstanceFile.model_validate(raw)
    except ValidationError as e:
        positions = _positions(e)
        raise InstanceParseError(f"{source}: {len(positions)} schema errors", details="; ".join(positions),
                                 positions=positions)
    return instance_from_document(doc)


def load_instance(path: Union[str, Path]) -> Instance:
    path = Path(path)
    logger.info(f"Loading instance from {path}")
    return parse_instance(path.read_text(encoding="utf-8"), source=str(path))


def dump_instance(instance: Instance) -> str:
    """Instance as JSON text; parse_instance(dump_instance(i)) == i"""
    objects = []
    for obj in instance.objects:
        entry: Dict = {"id": obj.id}
        if obj.source_points is not None:
            entry["points3d"] = [[fraction_text(c) for c in p] for p in obj.source_points]
        else:
            entry["footprint"] = [[fraction_text(v.x), fraction_text(v.y)] for v in obj.footprint.vertices]
        if obj.height is not None:
            entry["height"] = fraction_text(obj.height)
        objects.append(entry)

    params = instance.params
    doc = {
        "name": instance.name,
        "plate": {
            "polygon": [[fraction_text(v.x), fraction_text(v.y)] for v in instance.plate.polygon.vertices],
            "center": [fraction_text(instance.plate.center.x), fraction_text(instance.plate.center.y)],
        },
        "extruder": {
            "polygon": [[fraction_text(v.x), fraction_text(v.y)] for v in instance.extruder.footprint.vertices],
        },
        "objects": objects,
        "params": {
            "epsilon_t": fraction_text(params.epsilon_t),
            "epsilon_xy": fraction_text(params.epsilon_xy),
            "timeout_ms": params.timeout_ms,
            "mode": params.mode.value,
            "optimize_sigma": params.optimize_sigma,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


# ==================== Solution documents ====================

class PositionEntry(_Strict):
    x: Rational
    y: Rational
    t: Rational
    x_approx: Optional[float] = None
    y_approx: Optional[float] = None
    t_approx: Optional[float] = None


class StatsEntry(_Strict):
    refinement_rounds: int = 0
    constraints_added: int = 0
    solver_calls: int = 0
    sigma_iterations: int = 0
    wall_ms: int = 0
    search_complete: bool = True


class PlateSolution(_Strict):
    plate_index: int = 0
    status: SolveStatus
    sigma_star: Optional[Rational] = None
    sigma_lower: Optional[Rational] = None
    order: List[str] = Field(default_factory=list)
    positions: Dict[str, PositionEntry] = Field(default_factory=dict)
    stats: StatsEntry = Field(default_factory=StatsEntry)


class SolverInfo(_Strict):
    name: str = ""
    version: str = ""


class SolutionFile(_Strict):
    instance: str
    mode: SolverMode
    status: SolveStatus
    solver: SolverInfo = Field(default_factory=SolverInfo)
    plates: List[PlateSolution] = Field(default_factory=list)


def _plate_solution(index: int, outcome: SolveOutcome) -> PlateSolution:
    positions = {}
    order: List[str] = []
    if outcome.placement is not None:
        order = outcome.placement.order()
        for oid, pos in outcome.placement.positions.items():
            positions[oid] = PositionEntry(
                x=fraction_text(pos.x), y=fraction_text(pos.y), t=fraction_text(pos.t),
                x_approx=float(pos.x), y_approx=float(pos.y), t_approx=float(pos.t),
            )
    stats = outcome.stats
    return PlateSolution(
        plate_index=index,
        status=outcome.status,
        sigma_star=fraction_text(outcome.sigma_star) if outcome.sigma_star is not None else None,
        sigma_lower=fraction_text(outcome.sigma_lower) if outcome.sigma_lower is not None else None,
        order=order,
        positions=positions,
        stats=StatsEntry(
            refinement_rounds=stats.refinement_rounds,
            constraints_added=stats.constraints_added,
            solver_calls=stats.solver_calls,
            sigma_iterations=stats.sigma_iterations,
            wall_ms=stats.wall_ms,
            search_complete=stats.search_complete,
        ),
    )


def build_solution_file(instance: Instance, plates: Sequence[PlateAssignment]) -> SolutionFile:
    """Solution document for one plate or a multi-plate schedule"""
    plate_docs = [_plate_solution(p.plate_index, p.outcome) for p in plates]
    statuses = [p.status for p in plate_docs]
    if statuses and all(s == SolveStatus.SAT for s in statuses):
        status = SolveStatus.SAT
    elif SolveStatus.TIMEOUT in statuses:
        status = SolveStatus.TIMEOUT
    else:
        status = SolveStatus.UNSAT
    first = plates[0].outcome if plates else None
    return SolutionFile(
        instance=instance.name,
        mode=instance.params.mode,
        status=status,
        solver=SolverInfo(name=first.solver_name if first else "", version=first.solver_version if first else ""),
        plates=plate_docs,
    )


def dump_solution(solution: SolutionFile) -> str:
    return solution.model_dump_json(indent=2) + "\n"


def parse_solution(text: str, source: str = "<string>") -> SolutionFile:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(f"{source}: {e.msg}", line=e.lineno, column=e.colno)
    try:
        return SolutionFile.model_validate(raw)
    except ValidationError as e:
        positions = _positions(e)
        raise InstanceParseError(f"{source}: {len(positions)} schema errors", details="; ".join(positions),
                                 positions=positions)


def load_solution(path: Union[str, Path]) -> SolutionFile:
    path = Path(path)
    return parse_solution(path.read_text(encoding="utf-8"), source=str(path))


def placement_from_solution(plate: PlateSolution) -> Placement:
    return Placement({
        oid: ObjectPosition(to_rat(p.x), to_rat(p.y), to_rat(p.t))
        for oid, p in plate.positions.items()
    })


def plate_instance(instance: Instance, plate: PlateSolution) -> Instance:
    """
    Sub-instance holding the objects placed on one plate.

    Raises:
        InconsistentFiles: If the plate names an object the instance lacks
    """
    try:
        indices = sorted(instance.index_of(oid) for oid in plate.positions)
    except KeyError as e:
        raise InconsistentFiles(f"Solution places unknown object {e.args[0]} on plate {plate.plate_index}")
    if not indices:
        raise InconsistentFiles(f"Plate {plate.plate_index} has no placements")
    return instance.subset(indices)


def check_consistent(instance: Instance, solution: SolutionFile) -> None:
    """
    Every instance object appears on exactly one plate.

    Raises:
        InconsistentFiles: On unknown, missing or duplicated object ids
    """
    if solution.instance != instance.name:
        logger.warning(f"Solution was produced for {solution.instance!r}, instance is {instance.name!r}")
    seen: Dict[str, int] = {}
    for plate in solution.plates:
        for oid in plate.positions:
            if oid in seen:
                raise InconsistentFiles(f"Object {oid} is placed on plates {seen[oid]} and {plate.plate_index}")
            seen[oid] = plate.plate_index
    ids = {obj.id for obj in instance.objects}
    unknown = sorted(set(seen) - ids)
    if unknown:
        raise InconsistentFiles(f"Solution places unknown objects: {', '.join(unknown)}")
    missing = sorted(ids - set(seen))
    if missing:
        raise InconsistentFiles(f"Solution has no position for: {', '.join(missing)}")

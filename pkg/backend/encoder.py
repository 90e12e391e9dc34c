# =======================================================================
# Project:      SeqPack Solver
# File:         Linear real arithmetic encoding and SMT-LIB emission
# =======================================================================

"""
Encoder - builds the linear arithmetic formula over X_i, Y_i, T_i

Constraint primitives (all polygons counterclockwise, edge a runs from
vertex a to vertex a+1):

    PoH   point strictly outside the half-plane of an edge
    PiH   point inside (or on) the half-plane of an edge
    LnI   two non-parallel edges do not meet (fresh t, t')
    PoP   points-outside-polygon, both directions
    PLnI  LnI over every non-parallel edge pair
    PiP   every vertex inside every edge half-plane of the container
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union
import logging

from geometry import ConvexPolygon, Point2, Vec2, edges_parallel, scale_about, to_rat
from model import Instance, Plate
from constants import SMT_LOGIC
from exceptions import DegenerateEdge, InvalidScale, ParallelEdges, UndeclaredVariable

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------
# Variables and linear terms
# -----------------------------------------------------------------------

class VarKind(str, Enum):
    X = "X"
    Y = "Y"
    T = "T"
    TPARAM = "t"
    TPRIMEPARAM = "tp"


@dataclass(frozen=True, order=True)
class VarRef:
    kind: VarKind
    index: int

    @property
    def name(self) -> str:
        return f"{self.kind.value}_{self.index}"


Offset = Optional[Tuple[VarRef, VarRef]]
Assignment = Mapping[VarRef, Fraction]


def x_var(i: int) -> VarRef:
    return VarRef(VarKind.X, i)


def y_var(i: int) -> VarRef:
    return VarRef(VarKind.Y, i)


def t_var(i: int) -> VarRef:
    return VarRef(VarKind.T, i)


def position_of(i: int) -> Tuple[VarRef, VarRef]:
    return x_var(i), y_var(i)


@dataclass(frozen=True)
class LinTerm:
    """sum(coefficient * variable) + constant"""
    coeffs: Tuple[Tuple[Fraction, VarRef], ...]
    constant: Fraction = Fraction(0)

    @classmethod
    def build(cls, pairs: Iterable[Tuple[Union[Fraction, int], VarRef]], constant=0) -> "LinTerm":
        merged: Dict[VarRef, Fraction] = {}
        for coeff, var in pairs:
            merged[var] = merged.get(var, Fraction(0)) + to_rat(coeff)
        coeffs = tuple((c, v) for v, c in sorted(merged.items()) if c != 0)
        return cls(coeffs, to_rat(constant))

    def evaluate(self, assignment: Assignment) -> Fraction:
        return sum((c * assignment[v] for c, v in self.coeffs), Fraction(0)) + self.constant

    def variables(self) -> Set[VarRef]:
        return {v for _, v in self.coeffs}


class Relation(str, Enum):
    LT = "<"
    LE = "<="
    EQ = "="
    GT = ">"
    GE = ">="


def _offset_pairs(offset: Offset, sign: int, nx: Fraction, ny: Fraction) -> List[Tuple[Fraction, VarRef]]:
    if offset is None:
        return []
    return [(sign * nx, offset[0]), (sign * ny, offset[1])]


# -----------------------------------------------------------------------
# Formula tree
# -----------------------------------------------------------------------

class Formula:
    """Boolean combination of linear constraints"""

    def evaluate(self, assignment: Assignment) -> bool:
        raise NotImplementedError

    def variables(self) -> Set[VarRef]:
        raise NotImplementedError


@dataclass(frozen=True)
class LinConstraint(Formula):
    term: LinTerm
    relation: Relation

    def evaluate(self, assignment: Assignment) -> bool:
        value = self.term.evaluate(assignment)
        return {
            Relation.LT: value < 0,
            Relation.LE: value <= 0,
            Relation.EQ: value == 0,
            Relation.GT: value > 0,
            Relation.GE: value >= 0,
        }[self.relation]

    def variables(self) -> Set[VarRef]:
        return self.term.variables()


@dataclass(frozen=True)
class And(Formula):
    children: Tuple[Formula, ...]

    def evaluate(self, assignment: Assignment) -> bool:
        return all(c.evaluate(assignment) for c in self.children)

    def variables(self) -> Set[VarRef]:
        return set().union(*(c.variables() for c in self.children)) if self.children else set()


@dataclass(frozen=True)
class Or(Formula):
    children: Tuple[Formula, ...]

    def evaluate(self, assignment: Assignment) -> bool:
        return any(c.evaluate(assignment) for c in self.children)

    def variables(self) -> Set[VarRef]:
        return set().union(*(c.variables() for c in self.children)) if self.children else set()


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def evaluate(self, assignment: Assignment) -> bool:
        return (not self.lhs.evaluate(assignment)) or self.rhs.evaluate(assignment)

    def variables(self) -> Set[VarRef]:
        return self.lhs.variables() | self.rhs.variables()


@dataclass(frozen=True)
class Not(Formula):
    child: Formula

    def evaluate(self, assignment: Assignment) -> bool:
        return not self.child.evaluate(assignment)

    def variables(self) -> Set[VarRef]:
        return self.child.variables()


@dataclass(frozen=True)
class LnI(Formula):
    """
    Segments A_a + P_A + t U and B_b + P_B + t' V do not meet for t, t' in [0, 1].

    Kept as a node so evaluation can solve for t, t' when only positions
    are known; emission expands it to the two equalities plus the
    disjunction over fresh t, t'.
    """
    xa: Offset
    a_start: Point2
    a_end: Point2
    xb: Offset
    b_start: Point2
    b_end: Point2
    t: VarRef
    t_prime: VarRef

    def expand(self) -> Formula:
        u = self.a_end - self.a_start
        v = self.b_end - self.b_start
        equalities = []
        for axis, ua, vb, ca, cb in (
            (0, u.dx, v.dx, self.a_start.x, self.b_start.x),
            (1, u.dy, v.dy, self.a_start.y, self.b_start.y),
        ):
            pairs = [(ua, self.t), (-vb, self.t_prime)]
            if self.xa is not None:
                pairs.append((1, self.xa[axis]))
            if self.xb is not None:
                pairs.append((-1, self.xb[axis]))
            equalities.append(LinConstraint(LinTerm.build(pairs, ca - cb), Relation.EQ))
        outside = Or((
            LinConstraint(LinTerm.build([(1, self.t)]), Relation.LT),
            LinConstraint(LinTerm.build([(1, self.t)], -1), Relation.GT),
            LinConstraint(LinTerm.build([(1, self.t_prime)]), Relation.LT),
            LinConstraint(LinTerm.build([(1, self.t_prime)], -1), Relation.GT),
        ))
        return And((equalities[0], equalities[1], outside))

    def parameters(self, assignment: Assignment) -> Tuple[Fraction, Fraction]:
        """Unique (t, t') solving the two equalities for the assigned positions"""
        u = self.a_end - self.a_start
        v = self.b_end - self.b_start
        pa = Vec2(*(assignment[var] for var in self.xa)) if self.xa else Vec2(0, 0)
        pb = Vec2(*(assignment[var] for var in self.xb)) if self.xb else Vec2(0, 0)
        d = (self.b_start + pb) - (self.a_start + pa)
        neg_v = -v
        det = u.cross(neg_v)
        return d.cross(neg_v) / det, u.cross(d) / det

    def evaluate(self, assignment: Assignment) -> bool:
        if self.t in assignment and self.t_prime in assignment:
            return self.expand().evaluate(assignment)
        t, t_prime = self.parameters(assignment)
        return t < 0 or t > 1 or t_prime < 0 or t_prime > 1

    def variables(self) -> Set[VarRef]:
        found = {self.t, self.t_prime}
        for offset in (self.xa, self.xb):
            if offset is not None:
                found.update(offset)
        return found



# -----------------------------------------------------------------------
# Provenance
# -----------------------------------------------------------------------

class TagOrigin(str, Enum):
    TEMPORAL = "temporal"
    POP = "pop"
    PLNI_REFINEMENT = "plni_refinement"
    PLATE = "plate"
    PLNI_EAGER = "plni_eager"
    SEPARATING_CUT = "separating_cut"


@dataclass(frozen=True)
class ConstraintTag:
    origin: TagOrigin
    pair: Optional[Tuple[int, int]] = None
    obj: Optional[int] = None
    edges: Optional[Tuple[int, int]] = None
    sigma: Optional[Fraction] = None

    def label(self) -> str:
        parts = [self.origin.value]
        if self.pair is not None:
            parts.append(f"pair={self.pair[0]},{self.pair[1]}")
        if self.obj is not None:
            parts.append(f"obj={self.obj}")
        if self.edges is not None:
            parts.append(f"edges={self.edges[0]},{self.edges[1]}")
        if self.sigma is not None:
            parts.append(f"sigma={self.sigma}")
        return " ".join(parts)


@dataclass(frozen=True)
class TaggedFormula:
    formula: Formula
    tag: ConstraintTag


@dataclass
class ConstraintSet:
    """
    The persistent formula F (grows by refinement) and the sigma-dependent
    plate assumptions Phi, each constraint carrying one tag.
    """
    base: List[TaggedFormula] = field(default_factory=list)
    assumptions: List[TaggedFormula] = field(default_factory=list)
    refinement_keys: Set[Tuple[int, int, int, int]] = field(default_factory=set)

    def add(self, formula: Formula, tag: ConstraintTag) -> TaggedFormula:
        tagged = TaggedFormula(formula, tag)
        self.base.append(tagged)
        return tagged

    def set_assumptions(self, tagged: Sequence[TaggedFormula]) -> None:
        self.assumptions = list(tagged)

    def count(self, origin: TagOrigin) -> int:
        return sum(1 for tf in self.base if tf.tag.origin == origin)

    def formulas(self) -> List[Formula]:
        return [tf.formula for tf in self.base] + [tf.formula for tf in self.assumptions]

    def evaluate(self, assignment: Assignment) -> bool:
        return all(f.evaluate(assignment) for f in self.formulas())


# -----------------------------------------------------------------------
# Stateless primitives
# -----------------------------------------------------------------------

def _halfplane_term(xa: Offset, a: Point2, a_next: Point2, xb: Offset, b: Point2) -> LinTerm:
    u = a_next - a
    if u.is_zero():
        raise DegenerateEdge(f"Edge endpoints coincide at {a}")
    nx, ny = u.dy, -u.dx
    pairs = _offset_pairs(xb, 1, nx, ny) + _offset_pairs(xa, -1, nx, ny)
    return LinTerm.build(pairs, (b - a).dot(Vec2(nx, ny)))


def encode_poh(xa: Offset, a: Point2, a_next: Point2, xb: Offset, b: Point2) -> Formula:
    """((B_b + P_B) - (A_a + P_A)) . (U.y, -U.x) > 0"""
    return LinConstraint(_halfplane_term(xa, a, a_next, xb, b), Relation.GT)


def encode_pih(xa: Offset, a: Point2, a_next: Point2, xb: Offset, b: Point2) -> Formula:
    """Same dot product as PoH, <= 0"""
    return LinConstraint(_halfplane_term(xa, a, a_next, xb, b), Relation.LE)


def non_parallel_edge_pairs(pa: ConvexPolygon, pb: ConvexPolygon) -> List[Tuple[int, int]]:
    pairs = []
    for a, (sa, ea) in enumerate(pa.edges()):
        for b, (sb, eb) in enumerate(pb.edges()):
            if not edges_parallel(ea - sa, eb - sb):
                pairs.append((a, b))
    return pairs


def encode_temporal_pair(i: int, j: int, epsilon_t: Fraction = Fraction(1)) -> Formula:
    """T_i + eps < T_j  or  T_j + eps < T_i"""
    if i == j:
        raise ValueError("Temporal separation needs two distinct objects")
    eps = to_rat(epsilon_t)
    ti, tj = t_var(i), t_var(j)
    return Or((
        LinConstraint(LinTerm.build([(1, ti), (-1, tj)], eps), Relation.LT),
        LinConstraint(LinTerm.build([(1, tj), (-1, ti)], eps), Relation.LT),
    ))


def earlier(i: int, j: int) -> Formula:
    """T_i < T_j"""
    return LinConstraint(LinTerm.build([(1, t_var(i)), (-1, t_var(j))]), Relation.LT)


# -----------------------------------------------------------------------
# Builder
# -----------------------------------------------------------------------

class FormulaBuilder:
    """
    Single-use builder bound to one instance.

    Hands out fresh t / t' parameters (never reused) and records every
    variable it produced so emission can declare them.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self.hulls = [obj.footprint for obj in instance.objects]
        self.envelopes = [env.polygon for env in instance.envelopes]
        self._next_param = 0
        self.declarations: Set[VarRef] = set()
        for i in range(instance.k):
            self.declarations.update((x_var(i), y_var(i), t_var(i)))

    def fresh_params(self) -> Tuple[VarRef, VarRef]:
        t = VarRef(VarKind.TPARAM, self._next_param)
        t_prime = VarRef(VarKind.TPRIMEPARAM, self._next_param)
        self._next_param += 1
        self.declarations.update((t, t_prime))
        return t, t_prime

    @property
    def params_issued(self) -> int:
        return self._next_param

    # --- segment and polygon primitives ---

    def encode_lni(self, xa: Offset, a: Point2, a_next: Point2, xb: Offset, b: Point2, b_next: Point2) -> LnI:
        u, v = a_next - a, b_next - b
        if u.is_zero() or v.is_zero():
            raise DegenerateEdge("Segment endpoints coincide")
        if edges_parallel(u, v):
            raise ParallelEdges(f"Edges {a}->{a_next} and {b}->{b_next} are parallel")
        t, t_prime = self.fresh_params()
        return LnI(xa, a, a_next, xb, b, b_next, t, t_prime)

    def encode_pop(self, xa: Offset, pa: ConvexPolygon, xb: Offset, pb: ConvexPolygon) -> Formula:
        """Some vertex of PB outside some edge of PA, and some vertex of PA outside some edge of PB"""
        first = Or(tuple(
            encode_poh(xa, s, e, xb, vb) for s, e in pa.edges() for vb in pb.vertices
        ))
        second = Or(tuple(
            encode_poh(xb, s, e, xa, va) for s, e in pb.edges() for va in pa.vertices
        ))
        return And((first, second))

    def encode_plni(self, xa: Offset, pa: ConvexPolygon, xb: Offset, pb: ConvexPolygon) -> Formula:
        """One LnI per unordered non-parallel edge pair"""
        conjuncts = []
        for a, b in non_parallel_edge_pairs(pa, pb):
            sa, ea = pa.edge(a)
            sb, eb = pb.edge(b)
            conjuncts.append(self.encode_lni(xa, sa, ea, xb, sb, eb))
        return And(tuple(conjuncts))

    def encode_pip(self, xa: Offset, pa: ConvexPolygon, xb: Offset, pb: ConvexPolygon) -> Formula:
        """PA inside PB: PiH for every (edge of PB, vertex of PA)"""
        return And(tuple(
            encode_pih(xb, s, e, xa, va) for s, e in pb.edges() for va in pa.vertices
        ))

    # --- instance-level constraints ---

    def encode_temporal_pair(self, i: int, j: int) -> Formula:
        return encode_temporal_pair(i, j, self.instance.params.epsilon_t)

    def encode_seq_pair(self, i: int, j: int, abstraction: bool) -> Formula:
        """T_i < T_j => PoP(hull_i, env_j) and PoP(env_j, hull_i) [and PLnI(hull_i, env_j)]"""
        if i == j:
            raise ValueError("Sequential constraint needs two distinct objects")
        hull_i, env_j = self.hulls[i], self.envelopes[j]
        pi, pj = position_of(i), position_of(j)
        parts = [
            self.encode_pop(pi, hull_i, pj, env_j),
            self.encode_pop(pj, env_j, pi, hull_i),
        ]
        if not abstraction:
            parts.append(self.encode_plni(pi, hull_i, pj, env_j))
        return Implies(earlier(i, j), And(tuple(parts)))

    def encode_plate(self, i: int, sigma: Fraction, plate: Optional[Plate] = None) -> Formula:
        """Hull of object i inside sigma-scaled plate, plate fixed at the origin"""
        sigma = to_rat(sigma)
        if not 0 < sigma <= 1:
            raise InvalidScale(f"Plate scale must lie in (0, 1], got {sigma}")
        plate = plate or self.instance.plate
        scaled = scale_about(plate.polygon, sigma, plate.center)
        return self.encode_pip(position_of(i), self.hulls[i], None, scaled)

    def encode_refinement(self, i: int, j: int, a: int, b: int) -> Formula:
        """T_i < T_j => LnI(edge a of hull_i, edge b of envelope_j)"""
        sa, ea = self.hulls[i].edge(a)
        sb, eb = self.envelopes[j].edge(b)
        lni = self.encode_lni(position_of(i), sa, ea, position_of(j), sb, eb)
        return Implies(earlier(i, j), lni)

    def encode_separating_cut(self, i: int, j: int) -> Formula:
        """
        T_i < T_j => some edge of either polygon has every vertex of the other
        strictly outside it (exact separation of convex polygons).
        """
        hull_i, env_j = self.hulls[i], self.envelopes[j]
        pi, pj = position_of(i), position_of(j)
        options = []
        for s, e in hull_i.edges():
            options.append(And(tuple(encode_poh(pi, s, e, pj, v) for v in env_j.vertices)))
        for s, e in env_j.edges():
            options.append(And(tuple(encode_poh(pj, s, e, pi, v) for v in hull_i.vertices)))
        return Implies(earlier(i, j), Or(tuple(options)))

    def build_formula(self, abstraction: bool) -> ConstraintSet:
        """
        Temporal separation for every unordered pair and the sequential
        implication for every ordered pair; PLnI only when not abstracting.
        """
        constraints = ConstraintSet()
        k = self.instance.k
        for i in range(k):
            for j in range(i + 1, k):
                constraints.add(self.encode_temporal_pair(i, j), ConstraintTag(TagOrigin.TEMPORAL, pair=(i, j)))
        origin = TagOrigin.POP if abstraction else TagOrigin.PLNI_EAGER
        for i in range(k):
            for j in range(k):
                if i != j:
                    constraints.add(self.encode_seq_pair(i, j, abstraction), ConstraintTag(origin, pair=(i, j)))
        logger.debug(f"Built {'abstraction' if abstraction else 'eager'} formula: {len(constraints.base)} constraints, "
                     f"{self._next_param} LnI parameter pairs")
        return constraints

    def plate_assumptions(self, sigma: Fraction) -> List[TaggedFormula]:
        return [
            TaggedFormula(self.encode_plate(i, sigma), ConstraintTag(TagOrigin.PLATE, obj=i, sigma=to_rat(sigma)))
            for i in range(self.instance.k)
        ]


def eager_lni_count(instance: Instance) -> int:
    """Number of LnI conjuncts the eager formula carries over all ordered pairs"""
    hulls = [obj.footprint for obj in instance.objects]
    envs = [env.polygon for env in instance.envelopes]
    return sum(
        len(non_parallel_edge_pairs(hulls[i], envs[j]))
        for i in range(instance.k) for j in range(instance.k) if i != j
    )


# -----------------------------------------------------------------------
# SMT-LIB v2.6 text
# -----------------------------------------------------------------------

def format_rational(value: Fraction) -> str:
    """Exact SMT-LIB literal: 3, (/ 1 3), (- 2), (- (/ 7 2))"""
    value = to_rat(value)
    magnitude = abs(value)
    if magnitude.denominator == 1:
        text = str(magnitude.numerator)
    else:
        text = f"(/ {magnitude.numerator} {magnitude.denominator})"
    return f"(- {text})" if value < 0 else text


def emit_term(term: LinTerm) -> str:
    parts = []
    for coeff, var in term.coeffs:
        parts.append(var.name if coeff == 1 else f"(* {format_rational(coeff)} {var.name})")
    if term.constant != 0 or not parts:
        parts.append(format_rational(term.constant))
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def emit_formula(formula: Formula) -> str:
    if isinstance(formula, LinConstraint):
        return f"({formula.relation.value} {emit_term(formula.term)} 0)"
    if isinstance(formula, LnI):
        return emit_formula(formula.expand())
    if isinstance(formula, And):
        if not formula.children:
            return "true"
        if len(formula.children) == 1:
            return emit_formula(formula.children[0])
        return f"(and {' '.join(emit_formula(c) for c in formula.children)})"
    if isinstance(formula, Or):
        if not formula.children:
            return "false"
        if len(formula.children) == 1:
            return emit_formula(formula.children[0])
        return f"(or {' '.join(emit_formula(c) for c in formula.children)})"
    if isinstance(formula, Implies):
        return f"(=> {emit_formula(formula.lhs)} {emit_formula(formula.rhs)})"
    if isinstance(formula, Not):
        return f"(not {emit_formula(formula.child)})"
    raise TypeError(f"Unknown formula node: {type(formula).__name__}")


def emit_declaration(var: VarRef) -> str:
    return f"(declare-const {var.name} Real)"


def emit_assert(item: Union[Formula, TaggedFormula]) -> str:
    formula = item.formula if isinstance(item, TaggedFormula) else item
    return f"(assert {emit_formula(formula)})"


def check_declared(formulas: Iterable[Formula], declarations: Iterable[VarRef]) -> None:
    declared = set(declarations)
    for formula in formulas:
        missing = formula.variables() - declared
        if missing:
            names = ", ".join(sorted(v.name for v in missing))
            raise UndeclaredVariable(f"Formula uses undeclared variables: {names}")


def emit_smtlib(items: Sequence[Union[Formula, TaggedFormula]], declarations: Iterable[VarRef],
                get_values: bool = True) -> str:
    """
    Complete, deterministic SMT-LIB script: logic, declarations (sorted),
    one assert per item (tagged items preceded by a comment), check-sat and
    get-value for every X/Y/T variable.
    """
    declared = sorted(set(declarations))
    check_declared((i.formula if isinstance(i, TaggedFormula) else i for i in items), declared)

    lines = ["(set-option :produce-models true)", f"(set-logic {SMT_LOGIC})"]
    lines.extend(emit_declaration(v) for v in declared)
    for item in items:
        if isinstance(item, TaggedFormula):
            lines.append(f"; {item.tag.label()}")
        lines.append(emit_assert(item))
    lines.append("(check-sat)")
    model_vars = [v for v in declared if v.kind in (VarKind.X, VarKind.Y, VarKind.T)]
    if get_values and model_vars:
        lines.append(f"(get-value ({' '.join(v.name for v in model_vars)}))")
    return "\n".join(lines) + "\n"

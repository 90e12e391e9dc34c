# =======================================================================
# Project:      SeqPack Solver
# File:         Placement certifier tests
# =======================================================================

from fractions import Fraction

import pytest

from geometry import ConvexPolygon
from model import ObjectPosition, Placement
from verify import ViolationKind, sample_overlap_oracle, verify_solution
from exceptions import InvalidScale, MissingPlacement
from conftest import square_instance


def placed(**positions) -> Placement:
    return Placement({oid: ObjectPosition(*xyt) for oid, xyt in positions.items()})


@pytest.fixture
def squares():
    # side 10, nozzle half size 5: envelopes reach 5 past every hull edge
    return square_instance([10, 10])


def test_well_separated_placement_is_certified(squares):
    report = verify_solution(squares, placed(sq0=(0, 0, 0), sq1=(30, 0, 2)))
    assert report.ok
    assert report.to_dict() == {"ok": True, "sigma": "1", "violations": []}


def test_overlap_with_later_envelope(squares):
    report = verify_solution(squares, placed(sq0=(0, 0, 0), sq1=(12, 3, 2)))
    assert not report.ok
    [violation] = report.of_kind(ViolationKind.SEQ_OVERLAP)
    assert violation.object_ids == ("sq0", "sq1")
    assert violation.witness.endswith("cross")


def test_hull_inside_later_envelope_is_containment(squares):
    report = verify_solution(squares, placed(sq0=(40, 40, 0), sq1=(40, 40, 5)))
    [violation] = report.of_kind(ViolationKind.SEQ_OVERLAP)
    assert violation.witness == "containment"


def test_touching_is_accepted_unless_strict(squares):
    placement = placed(sq0=(0, 0, 0), sq1=(15, 0, 2))
    assert verify_solution(squares, placement).ok
    strict = verify_solution(squares, placement, allow_touching=False)
    assert [v.kind for v in strict.violations] == [ViolationKind.SEQ_OVERLAP]


def test_print_times_must_be_separated(squares):
    report = verify_solution(squares, placed(sq0=(0, 0, 0), sq1=(30, 0, 1)))
    [violation] = report.violations
    assert violation.kind == ViolationKind.TEMPORAL_TIE
    assert violation.object_ids == ("sq0", "sq1")

    looser = square_instance([10, 10], epsilon_t=Fraction(1, 2))
    assert verify_solution(looser, placed(sq0=(0, 0, 0), sq1=(30, 0, 1))).ok


def test_plate_escape(squares):
    report = verify_solution(squares, placed(sq0=(0, 0, 0), sq1=(95, 0, 2)))
    [violation] = report.violations
    assert violation.kind == ViolationKind.PLATE_ESCAPE
    assert violation.object_ids == ("sq1",)


def test_scaled_plate(squares):
    placement = placed(sq0=(25, 25, 0), sq1=(55, 25, 2))
    assert verify_solution(squares, placement, Fraction(1, 2)).ok
    report = verify_solution(squares, placement, "1/4")
    assert len(report.of_kind(ViolationKind.PLATE_ESCAPE)) == 2
    assert report.to_dict()["sigma"] == "1/4"


@pytest.mark.parametrize("sigma", [0, Fraction(3, 2), -1])
def test_sigma_out_of_range(squares, sigma):
    with pytest.raises(InvalidScale):
        verify_solution(squares, placed(sq0=(0, 0, 0), sq1=(30, 0, 2)), sigma)


def test_missing_and_unknown_objects(squares):
    with pytest.raises(MissingPlacement):
        verify_solution(squares, placed(sq0=(0, 0, 0)))
    with pytest.raises(MissingPlacement):
        verify_solution(squares, placed(sq0=(0, 0, 0), sq1=(30, 0, 2), ghost=(60, 0, 4)))


def test_sample_overlap_oracle():
    a = ConvexPolygon.rectangle(4, 4)
    assert sample_overlap_oracle(a, ConvexPolygon.rectangle(4, 4, 2, 2), 1)
    assert not sample_overlap_oracle(a, ConvexPolygon.rectangle(4, 4, 4, 0), 1)
    with pytest.raises(ValueError):
        sample_overlap_oracle(a, a, 0)

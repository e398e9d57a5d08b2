import numpy as np
import pytest

from rangeinteract.core import (
    MarkedPointPattern,
    Relocation,
    Trajectory,
    Window,
    split_by_mark,
    validate_trajectory,
)
from rangeinteract.errors import (
    DataError,
    DuplicateTimestamp,
    EmptyInput,
    NonFiniteCoordinate,
    UnknownMark,
)


def test_validate_passthrough():
    tr = validate_trajectory([(0, 0, 0), (3600, 1, 1)])
    assert len(tr) == 2
    assert tr.t.tolist() == [0, 3600]
    assert tr.xy.tolist() == [[0, 0], [1, 1]]


def test_validate_sorts():
    tr = validate_trajectory([Relocation(3600, 1, 1), Relocation(0, 0, 0)])
    assert tr.t.tolist() == [0, 3600]
    assert tr.xy.tolist() == [[0, 0], [1, 1]]


def test_validate_duplicate():
    with pytest.raises(DuplicateTimestamp) as exc:
        validate_trajectory([(0, 0, 0), (0, 5, 5)])
    assert exc.value.t == 0


def test_validate_empty_and_nonfinite():
    with pytest.raises(EmptyInput):
        validate_trajectory([])
    with pytest.raises(NonFiniteCoordinate) as exc:
        validate_trajectory([(0, 0, 0), (1, np.nan, 0)])
    assert exc.value.index == 1


def test_validate_idempotent_and_immutable():
    tr = validate_trajectory([(5, 1, 2), (1, 3, 4)], animal_id="x", crs={"proj": "identity"})
    again = validate_trajectory(tr)
    assert again == tr
    with pytest.raises(ValueError):
        tr.xy[0, 0] = 9.0


def test_trajectory_dict_roundtrip():
    tr = validate_trajectory([(0, 0.5, 1.5), (60, 2.0, -1.0)], animal_id="a", crs={"units": "m"})
    assert Trajectory.from_dict(tr.to_dict()) == tr
    assert tr.duration == 60


def test_window_defaults_and_geometry():
    w = Window.from_points([[0, 0], [10, 20]])
    assert w.as_tuple() == pytest.approx((-0.1, 10.1, -0.2, 20.2))
    with pytest.raises(DataError):
        Window(1, 1, 0, 1)
    u = Window(0, 2, 0, 1)
    assert u.area == 2
    assert u.boundary_distance([[0.5, 0.25]]).tolist() == [0.25]
    xc, yc = u.cell_centers(4, 2)
    assert xc.tolist() == [0.25, 0.75, 1.25, 1.75]
    assert yc.tolist() == [0.25, 0.75]


def _pattern():
    return MarkedPointPattern.from_groups(
        {"A": [[0.1, 0.1], [0.2, 0.2], [0.3, 0.3]], "B": [[0.5, 0.5], [0.6, 0.6]], "C": np.empty((0, 2))},
        Window(0, 1, 0, 1))


def test_split_by_mark():
    p = _pattern()
    a = split_by_mark(p, "A")
    assert len(a) == 3 and a.window == p.window
    empty = split_by_mark(p, "C")
    assert len(empty) == 0 and empty.window == p.window
    b = split_by_mark(p, "B")
    assert len(a) + len(b) == len(p)
    with pytest.raises(UnknownMark):
        split_by_mark(p, "Z")


def test_pattern_invariants():
    with pytest.raises(DataError):
        MarkedPointPattern.from_groups({"A": [[2.0, 0.5]]}, Window(0, 1, 0, 1))
    with pytest.raises(UnknownMark):
        MarkedPointPattern(np.zeros((1, 2)), ["Q"], ("A",), Window(-1, 1, -1, 1))
    p = _pattern()
    assert p.counts() == {"A": 3, "B": 2, "C": 0}
    q = p.with_points("B", [[0.9, 0.9]])
    assert q.counts()["B"] == 1
    assert np.array_equal(q.points_of("A"), p.points_of("A"))

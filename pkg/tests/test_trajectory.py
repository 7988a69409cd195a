import pytest
from hypothesis import given, strategies as st

from crashcast.trajectory import (
    BBox,
    Mobility,
    ObjectState,
    OrderingError,
    PredictedTrajectory,
    SceneRegistry,
    TrackWindow,
    classify_mobility,
)


def state(frame, oid="a", cx=0.0, cy=0.0, w=10.0, h=10.0, label="car"):
    return ObjectState(frame, oid, label, BBox(cx, cy, w, h))


@pytest.mark.parametrize("w,h", [(0, 1), (1, 0), (-1, 5), (float("nan"), 1)])
def test_bbox_rejects_non_positive_size(w, h):
    with pytest.raises(ValueError):
        BBox(0, 0, w, h)


def test_bbox_rejects_non_finite_center():
    with pytest.raises(ValueError):
        BBox(float("inf"), 0, 1, 1)


def test_eleven_pushes_keep_ten():
    reg = SceneRegistry(P=10)
    for f in range(11):
        reg.push_observation(state(f, cx=f))
    window = reg.windows["a"]
    assert len(window) == 10
    assert window.states[0].frame == 1
    assert window.states[-1].frame == 10


def test_unseen_id_opens_undecided_window():
    reg = SceneRegistry()
    reg.push_observation(state(3, oid="k7"))
    assert len(reg.windows["k7"]) == 1
    assert reg.windows["k7"].mobility is Mobility.UNDECIDED


def test_out_of_order_push_is_rejected():
    reg = SceneRegistry()
    reg.push_observation(state(5))
    with pytest.raises(OrderingError):
        reg.push_observation(state(3))


def test_equal_frame_replaces_last_state():
    reg = SceneRegistry()
    reg.push_observation(state(5, cx=1))
    reg.push_observation(state(5, cx=2))
    window = reg.windows["a"]
    assert len(window) == 1
    assert window.last.box.cx == 2


def test_static_when_nothing_moves():
    window = TrackWindow("a", 10, [state(f, cx=100, cy=100) for f in range(6)])
    assert classify_mobility(window, min_obs=5, eps_move=3) is Mobility.STATIC


def test_moving_at_four_px_per_frame():
    window = TrackWindow("a", 10, [state(f, cx=4 * f) for f in range(5)])
    assert classify_mobility(window, min_obs=5, eps_move=3) is Mobility.MOVING


def test_undecided_with_short_history():
    window = TrackWindow("a", 10, [state(f, cx=4 * f) for f in range(3)])
    assert classify_mobility(window, min_obs=5, eps_move=3) is Mobility.UNDECIDED


def test_mobility_is_sticky():
    reg = SceneRegistry(min_obs=5, eps_move=3)
    for f in range(5):
        reg.push_observation(state(f, cx=100))
    assert reg.windows["a"].mobility is Mobility.STATIC
    assert "a" in reg.statics
    for f in range(5, 15):
        reg.push_observation(state(f, cx=100 + 10 * f))
    assert reg.windows["a"].mobility is Mobility.STATIC
    assert reg.statics["a"].cx == 100


def test_long_gap_restarts_window():
    reg = SceneRegistry(max_gap=5)
    for f in range(6):
        reg.push_observation(state(f, cx=5 * f))
    assert reg.windows["a"].mobility is Mobility.MOVING
    reg.push_observation(state(20, cx=0))
    assert len(reg.windows["a"]) == 1
    assert reg.windows["a"].mobility is Mobility.UNDECIDED


def test_short_gap_keeps_window():
    reg = SceneRegistry(max_gap=5)
    reg.push_observation(state(0))
    reg.push_observation(state(6))  # five missing frames
    assert len(reg.windows["a"]) == 2


def test_registry_rejects_bad_horizons():
    with pytest.raises(ValueError):
        SceneRegistry(P=1)
    with pytest.raises(ValueError):
        SceneRegistry(Q=0)


def test_predicted_trajectory_frames_are_consecutive():
    traj = PredictedTrajectory("a", 7, ((1.0, 2.0), (3.0, 4.0)), 5.0, 6.0, "bus")
    assert [p.frame for p in traj.points] == [8, 9]
    assert all(p.box.w == 5.0 and p.box.h == 6.0 for p in traj.points)
    with pytest.raises(ValueError):
        PredictedTrajectory.from_points("a", 7, [state(8), state(10)])


pushes = st.lists(
    st.tuples(st.sampled_from("abc"), st.integers(0, 3), st.floats(-1e3, 1e3)),
    max_size=60,
)


@given(pushes, st.integers(2, 8))
def test_windows_bounded_and_strictly_ordered(seq, P):
    reg = SceneRegistry(P=P)
    clock = {}
    for oid, step, cx in seq:
        clock[oid] = clock.get(oid, 0) + step
        reg.push_observation(state(clock[oid], oid=oid, cx=cx))
    for window in reg.windows.values():
        frames = [s.frame for s in window.states]
        assert len(frames) <= P
        assert all(a < b for a, b in zip(frames, frames[1:]))
    moving = {oid for oid, w in reg.windows.items() if w.mobility is Mobility.MOVING}
    assert not moving & set(reg.statics)


@given(pushes)
def test_push_sequence_is_deterministic(seq):
    def build():
        reg = SceneRegistry(P=4, min_obs=3)
        clock = {}
        for oid, step, cx in seq:
            clock[oid] = clock.get(oid, 0) + step
            reg.push_observation(state(clock[oid], oid=oid, cx=cx))
        return {k: (list(w.states), w.mobility) for k, w in reg.windows.items()}, dict(reg.statics)

    assert build() == build()

import itertools

import numpy as np
import pytest

from roadplan.decision import (
    EMERGENCY,
    LANE_CHANGE,
    LTM,
    LaneActor,
    PlannerState,
    SituationFlags,
    criticality,
    lane_change_safety,
    mobil_incentive,
    step_fsm,
    structural_gate,
)
from roadplan.drivers import IdmParams, LeaderObservation, eidm_accel
from roadplan.road import Lane, Route

P = IdmParams(a=1.4, b=2.0, v_target=15.0)


class TestMobil:
    def test_empty_road_no_incentive(self):
        ego = LaneActor(s=0.0, v=15.0)
        incentive, score = mobil_incentive(ego, [], [], P)
        assert score == pytest.approx(0.0)
        assert not incentive

    def test_slow_leader_empty_candidate(self):
        # ego braking behind a slow leader; empty left lane: score equals
        # the two eidm evaluations' difference
        ego = LaneActor(s=0.0, v=15.0)
        leader = LaneActor(s=25.0, v=8.0)
        a_cur = eidm_accel(
            15.0,
            LeaderObservation(gap=25.0 - 4.5, dv=7.0, leader_accel=0.0),
            P,
        )
        incentive, score = mobil_incentive(ego, [leader], [], P, politeness=0.0)
        assert score == pytest.approx(eidm_accel(15.0, None, P) - a_cur)
        assert score > 0.1
        assert incentive

    def test_score_sign_invariant_under_common_shift(self):
        # difference form: adding the same leader to both situations keeps
        # the ego term at zero
        ego = LaneActor(s=0.0, v=12.0)
        same = LaneActor(s=30.0, v=10.0)
        _, score = mobil_incentive(ego, [same], [same], P, politeness=0.0)
        assert score == pytest.approx(0.0, abs=1e-12)

    def test_politeness_counts_new_follower(self):
        ego = LaneActor(s=0.0, v=15.0)
        follower = LaneActor(s=-8.0, v=17.0)
        _, selfish = mobil_incentive(ego, [], [follower], P, politeness=0.0)
        _, polite = mobil_incentive(ego, [], [follower], P, politeness=1.0)
        assert polite < selfish  # follower must brake, politeness penalizes

    def test_symmetric_scene_equal_scores(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            ego = LaneActor(s=0.0, v=float(rng.uniform(5, 18)))
            ahead = LaneActor(
                s=float(rng.uniform(10, 60)), v=float(rng.uniform(3, 15))
            )
            behind = LaneActor(
                s=-float(rng.uniform(8, 40)), v=float(rng.uniform(5, 18))
            )
            mirror_current = [ahead, behind]
            _, left = mobil_incentive(ego, mirror_current, mirror_current, P)
            _, right = mobil_incentive(ego, mirror_current, mirror_current, P)
            assert left == pytest.approx(right)


class TestSafety:
    def test_empty_candidate_safe(self):
        assert lane_change_safety(LaneActor(s=0.0, v=15.0), [], P)

    def test_close_fast_follower_unsafe(self):
        ego = LaneActor(s=0.0, v=10.0)
        follower = LaneActor(s=-6.5, v=15.0)  # 2 m bumper gap, +5 closing
        assert not lane_change_safety(ego, [follower], P, b_safe=4.0)

    def test_far_slower_leader_safe(self):
        ego = LaneActor(s=0.0, v=15.0)
        leader = LaneActor(s=80.0, v=13.0)
        assert lane_change_safety(ego, [leader], P, b_safe=4.0)


def _straight_route(lane_type="normal", length=400.0):
    lane = Lane.build(
        "a",
        [[0.0, 0.0], [length, 0.0]],
        width=3.5,
        lane_type=lane_type,
    )
    return Route([lane])


class TestStructuralGate:
    def test_straight_highway_true(self):
        assert structural_gate(_straight_route(), 0.0, lookahead=150.0)

    def test_roundabout_ahead_false(self):
        a = Lane.build("a", [[0, 0], [80, 0]], width=3.5, successors=("b",))
        b = Lane.build("b", [[80, 0], [160, 0]], width=3.5, lane_type="roundabout")
        route = Route([a, b])
        assert not structural_gate(route, 0.0, lookahead=100.0)
        # far enough away it no longer gates
        assert structural_gate(route, 0.0, lookahead=50.0)

    def test_high_curvature_false(self):
        theta = np.linspace(0, np.pi / 2, 100)
        pts = np.column_stack((25 * np.sin(theta), 25 * (1 - np.cos(theta))))
        lane = Lane.build("c", np.vstack(([[-50, 0]], pts)), width=3.5)
        route = Route([lane])
        assert not structural_gate(route, 0.0, lookahead=150.0, kappa_gate=0.03)


class TestCriticality:
    def test_no_leader_false(self):
        assert not criticality(None)

    def test_no_closing_false(self):
        assert not criticality(LeaderObservation(gap=10.0, dv=0.0))

    def test_arithmetic_true(self):
        # 100 / (2*5) = 10 > 5
        assert criticality(LeaderObservation(gap=5.0, dv=10.0), a_critical=5.0)

    def test_arithmetic_false(self):
        # 25 / 100 = 0.25
        assert not criticality(LeaderObservation(gap=50.0, dv=5.0), a_critical=5.0)

    def test_overlap_critical(self):
        assert criticality(LeaderObservation(gap=-0.5, dv=-3.0))


def all_flag_combinations():
    names = [
        "incentive_left",
        "incentive_right",
        "safe_left",
        "safe_right",
        "structural_gate",
        "critical",
    ]
    for bits in itertools.product([False, True], repeat=6):
        yield SituationFlags(**dict(zip(names, bits)))


class TestFsm:
    def test_ltm_idle(self):
        state = PlannerState(mode=LTM)
        out = step_fsm(state, SituationFlags(), t=0.0)
        assert out.mode == LTM

    def test_ltm_to_lane_change(self):
        flags = SituationFlags(incentive_left=True, safe_left=True, structural_gate=True)
        out = step_fsm(PlannerState(mode=LTM), flags, t=1.0)
        assert out.mode == LANE_CHANGE
        assert out.lc_side == "left"

    def test_lane_change_preempted_by_critical(self):
        flags = SituationFlags(critical=True)
        out = step_fsm(PlannerState(mode=LANE_CHANGE, lc_side="left"), flags, t=2.0)
        assert out.mode == EMERGENCY

    def test_lane_change_completes(self):
        flags = SituationFlags(lane_change_complete=True)
        out = step_fsm(PlannerState(mode=LANE_CHANGE, lc_side="left"), flags, t=2.0)
        assert out.mode == LTM

    def test_lane_change_abort_retargets_source(self):
        state = PlannerState(
            mode=LANE_CHANGE, lc_side="left", lc_target="L", lc_source="R"
        )
        flags = SituationFlags(lane_change_still_safe=False)
        out = step_fsm(state, flags, t=2.0)
        assert out.mode == LANE_CHANGE
        assert out.lc_target == "R"
        assert out.lc_side == "right"

    def test_emergency_dwell(self):
        state = step_fsm(PlannerState(mode=LTM), SituationFlags(critical=True), t=0.0)
        assert state.mode == EMERGENCY
        state = step_fsm(state, SituationFlags(), t=0.5)
        assert state.mode == EMERGENCY  # dwell not yet over
        state = step_fsm(state, SituationFlags(), t=1.05)
        assert state.mode == LTM

    def test_deterministic(self):
        for flags in all_flag_combinations():
            for mode in (LTM, LANE_CHANGE, EMERGENCY):
                s = PlannerState(mode=mode, lc_side="left", lc_target="L", lc_source="R")
                a = step_fsm(s, flags, t=3.0)
                b = step_fsm(s, flags, t=3.0)
                assert a == b

    def test_exhaustive_priority_and_gating(self):
        count = 0
        for flags in all_flag_combinations():
            for mode in (LTM, LANE_CHANGE, EMERGENCY):
                state = PlannerState(
                    mode=mode, lc_side="left", lc_target="L", lc_source="R",
                    last_critical_time=2.9,
                )
                out = step_fsm(state, flags, t=3.0)
                count += 1
                if flags.critical:
                    assert out.mode == EMERGENCY
                if mode == LTM and not flags.structural_gate and not flags.critical:
                    assert out.mode != LANE_CHANGE
                if mode == EMERGENCY and not flags.critical:
                    # dwell from t=2.9 not yet over at t=3.0
                    assert out.mode == EMERGENCY
        assert count == 64 * 3

import math

import numpy as np
import pytest

from roadplan.drivers import IdmParams
from roadplan.lane_change import (
    SingleTrackParams,
    SingleTrackState,
    generate_lane_change,
    integrate_single_track,
    pure_pursuit_steering,
)
from roadplan.road import Polyline

PARAMS = SingleTrackParams(l_f=1.3, l_r=1.5, delta_max=0.6, lookahead_gain=1.0, lookahead_min=4.0)
IDM = IdmParams(a=1.4, b=2.0, v_target=13.89)


def straight_line(y=0.0, length=400.0):
    return Polyline([[-50.0, y], [length, y]])


class TestPurePursuit:
    def test_dead_ahead_zero(self):
        state = SingleTrackState(x=0.0, y=0.0, theta=0.0, v=10.0)
        delta = pure_pursuit_steering(state, straight_line(0.0), PARAMS)
        assert delta == pytest.approx(0.0, abs=1e-9)

    def test_formula_arithmetic(self):
        # alpha = 45 deg, L = 10, wheelbase 2.8:
        # kappa = 2 sin(45)/10, delta = atan(2.8 * kappa)
        state = SingleTrackState(x=0.0, y=0.0, theta=0.0, v=10.0)
        # lookahead point at distance 10 under 45 degrees: target line passes
        # exactly through it horizontally
        y_t = 10.0 * math.sin(math.pi / 4)
        line = Polyline([[-50.0, y_t], [50.0, y_t]])
        delta = pure_pursuit_steering(state, line, PARAMS)
        kappa = 2.0 * math.sin(math.pi / 4) / 10.0
        assert delta == pytest.approx(math.atan(2.8 * kappa), abs=1e-9)

    def test_target_behind_clamps(self):
        # endpoint at bearing 135 deg with the minimum lookahead: the raw
        # steering command exceeds the bound and clamps
        state = SingleTrackState(x=0.0, y=0.0, theta=0.0, v=2.0)
        line = Polyline([[-6.0, 5.0], [-5.0, 5.0]])
        delta = pure_pursuit_steering(state, line, PARAMS)
        raw = math.atan(2.8 * 2.0 * math.sin(3.0 * math.pi / 4.0) / 4.0)
        assert raw > PARAMS.delta_max
        assert delta == pytest.approx(PARAMS.delta_max)


class TestIntegration:
    def test_straight_advance(self):
        state = SingleTrackState(x=0.0, y=0.0, theta=0.0, v=10.0)
        out = integrate_single_track(state, 0.0, 0.0, 0.1, PARAMS)
        assert out.x == pytest.approx(1.0)
        assert out.y == pytest.approx(0.0)
        assert out.theta == pytest.approx(0.0)

    def test_constant_steering_circle(self):
        # theta-dot = v delta / wheelbase: radius wheelbase/delta
        delta = 0.1
        v = 5.0
        radius = PARAMS.wheelbase / delta
        period = 2.0 * math.pi * radius / v
        dt = 0.01
        n = int(round(period / dt))
        state = SingleTrackState(x=0.0, y=0.0, theta=0.0, v=v)
        for _ in range(n):
            state = integrate_single_track(state, delta, 0.0, dt, PARAMS)
        err = math.hypot(state.x, state.y)
        assert err < 1e-3 * 2.0 * math.pi * radius

    def test_standing_vehicle_stays(self):
        state = SingleTrackState(x=1.0, y=2.0, theta=0.5, v=0.0)
        out = integrate_single_track(state, 0.3, -2.0, 0.1, PARAMS)
        assert (out.x, out.y, out.theta, out.v) == (1.0, 2.0, 0.5, 0.0)

    def test_heading_rate_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            v = float(rng.uniform(0.5, 20.0))
            delta = float(rng.uniform(-0.6, 0.6))
            dt = 0.05
            state = SingleTrackState(x=0.0, y=0.0, theta=0.0, v=v)
            out = integrate_single_track(state, delta, 0.0, dt, PARAMS)
            bound = PARAMS.delta_max * dt * v / PARAMS.wheelbase
            assert abs(out.theta) <= bound + 1e-9


class TestRollout:
    def roll(self, gain=1.0, v=13.89, n=60, offset=3.5, leader=None):
        params = SingleTrackParams(
            l_f=1.3, l_r=1.5, delta_max=0.6, lookahead_gain=gain, lookahead_min=4.0
        )
        state = SingleTrackState(x=0.0, y=-offset, theta=0.0, v=v)
        kwargs = {}
        if leader is not None:
            kwargs = dict(leader_s0=leader[0], leader_v=leader[1])
        return generate_lane_change(
            state, straight_line(0.0), params, IDM, dt=0.05, n_points=n, **kwargs
        )

    def test_converges_within_horizon(self):
        out = self.roll()
        assert abs(out.points[-1, 1]) < 0.2

    def test_slower_leader_causes_braking(self):
        out = self.roll(leader=(15.0 + 50.0, 9.0), v=13.89)
        assert out.a.min() < -0.2
        assert out.v[-1] < 13.89

    def test_already_on_centerline_straight(self):
        out = self.roll(offset=0.0)
        assert np.abs(out.delta).max() < 1e-6
        assert np.abs(out.points[:, 1]).max() < 1e-9

    def test_no_large_overshoot(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            v = float(rng.uniform(8.0, 18.0))
            offset = float(rng.uniform(2.5, 4.0))
            out = self.roll(v=v, offset=offset, n=200)
            overshoot = out.points[:, 1].max()  # beyond target (y=0)
            assert overshoot <= 0.15 * offset + 1e-9

    def test_lookahead_gain_smooths_lateral_accel(self):
        def max_alat(gain):
            out = self.roll(gain=gain, n=120)
            ay = np.diff(out.points[:, 1], 2) / 0.05**2
            return np.abs(ay).max()

        grid = [0.8, 1.0, 1.2, 1.5]
        values = [max_alat(g) for g in grid]
        assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))

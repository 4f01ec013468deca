import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from strhc.params import SafetyParams, VehicleState
from strhc.sim import (IdmParams, ScenarioConfig, SvAgent, VehicleOverlap, WorldState, check_collision,
                       idm_accel, idm_equilibrium_gap, spawn_scenario, step_world)

IDM = IdmParams()
SP = SafetyParams()
finite = dict(allow_nan=False, allow_infinity=False)


class TestIdm:
    def test_free_flow_at_desired_speed(self):
        assert abs(idm_accel(1e9, IDM.v0, IDM.v0, IDM)) < 1e-9

    def test_start_from_rest(self):
        assert idm_accel(1e12, 0.0, 5.0, IDM) == pytest.approx(IDM.a_max, abs=1e-9)

    def test_half_speed_at_desired_gap(self):
        v = 0.5 * IDM.v0
        s_star = IDM.s0 + v * IDM.headway
        assert idm_accel(s_star, v, v, IDM) == pytest.approx(-0.0625 * IDM.a_max, abs=1e-9)

    @given(st.floats(0.5, 200, **finite), st.floats(0, 15, **finite), st.floats(0, 15, **finite))
    def test_matches_reference_formula(self, gap, v, v_lead):
        expected = min(max(oracles.idm(gap, v, v_lead), -8.0), IDM.a_max)
        assert idm_accel(gap, v, v_lead, IDM) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_overlap_raises(self):
        with pytest.raises(VehicleOverlap, match="vehicle overlap"):
            idm_accel(0.0, 5.0, 5.0, IDM)

    @pytest.mark.parametrize("frac", [0.3, 0.6, 0.9])
    def test_platoon_equilibrium(self, frac):
        v = frac * IDM.v0
        gap = idm_equilibrium_gap(v, IDM)
        cfg = ScenarioConfig(sv_count=0, ev_init=VehicleState(0, 100.0, 0, 0, 0, 0))
        agents = tuple(SvAgent(i, 0, i * (gap + cfg.vehicle_length), cfg.lane_centers()[0], v, IDM.v0)
                       for i in range(5))
        # the front vehicle has no leader, so it accelerates; followers must stay in equilibrium
        w = WorldState(0.0, cfg.ev_init, agents)
        nxt = step_world(w, (0, 0), 0.1, cfg)
        for a in nxt.svs[:-1]:
            assert abs((a.v - v) / 0.1) < 1e-6

    def test_equilibrium_gap_infinite_at_desired_speed(self):
        assert idm_equilibrium_gap(IDM.v0, IDM) == math.inf


class TestSpawn:
    def test_empty(self):
        w = spawn_scenario(ScenarioConfig(sv_count=0))
        assert w.svs == () and w.ev == ScenarioConfig().ev_init

    def test_deterministic(self):
        assert spawn_scenario(ScenarioConfig(rng_seed=5)) == spawn_scenario(ScenarioConfig(rng_seed=5))

    @pytest.mark.parametrize("seed", range(10))
    def test_gaps_and_lanes(self, seed):
        cfg = ScenarioConfig(rng_seed=seed)
        w = spawn_scenario(cfg)
        assert len(w.svs) == 18
        centers = cfg.lane_centers()
        np.testing.assert_allclose(centers, [-10, -6, -2, 2, 6, 10])
        for lane in range(6):
            xs = sorted(a.x for a in w.svs if a.lane == lane)
            assert all(b - a >= cfg.min_gap for a, b in zip(xs, xs[1:]))
        for a in w.svs:
            assert -50 <= a.x <= 130 and a.y == centers[a.lane]
            assert 7.2 <= a.v0 <= 12
            if a.lane == 2:  # the EV's lane
                assert abs(a.x) >= cfg.ev_clearance


class TestStepWorld:
    def test_coasting_ev_alone(self):
        cfg = ScenarioConfig(sv_count=0)
        w = step_world(spawn_scenario(cfg), (0, 0), 0.1, cfg)
        assert w.ev.px == pytest.approx(15 * 0.1, abs=1e-12)
        assert w.time == pytest.approx(0.1)

    def test_lone_vehicle_accelerates(self):
        cfg = ScenarioConfig(sv_count=0, ev_init=VehicleState(0, 100.0, 0, 0, 0, 0))
        w = WorldState(0.0, cfg.ev_init, (SvAgent(0, 0, 0.0, -10.0, 5.0, 10.0),))
        nxt = step_world(w, (0, 0), 0.1, cfg)
        assert nxt.svs[0].v > 5.0

    def test_follower_brakes_behind_slower_leader(self):
        cfg = ScenarioConfig(sv_count=0, ev_init=VehicleState(0, 100.0, 0, 0, 0, 0))
        agents = (SvAgent(0, 0, 0.0, -10.0, 10.0, 10.0), SvAgent(1, 0, 12.0, -10.0, 5.0, 5.0))
        nxt = step_world(WorldState(0.0, cfg.ev_init, agents), (0, 0), 0.1, cfg)
        assert idm_accel(12.0 - 3.0, 10.0, 5.0, dataclasses.replace(IDM, v0=10.0)) < 0
        assert nxt.svs[0].v < 10.0

    def test_stepwise_has_no_hidden_state(self):
        cfg = ScenarioConfig(rng_seed=2)
        w0 = spawn_scenario(cfg)
        a = step_world(step_world(w0, (0.5, 0.01), 0.1, cfg), (0.2, -0.01), 0.1, cfg)
        w1 = step_world(w0, (0.5, 0.01), 0.1, cfg)
        rebuilt = WorldState(w1.time, w1.ev, tuple(dataclasses.replace(s) for s in w1.svs))
        b = step_world(rebuilt, (0.2, -0.01), 0.1, cfg)
        assert a == b

    @pytest.mark.parametrize("seed", range(10))
    def test_idm_traffic_never_overlaps(self, seed):
        cfg = ScenarioConfig(rng_seed=seed, ev_init=VehicleState(0, 100.0, 0, 0, 0, 0))
        w = spawn_scenario(cfg)
        for _ in range(600):
            w = step_world(w, (0, 0), 0.1, cfg)
        for lane in range(6):
            xs = sorted(a.x for a in w.svs if a.lane == lane)
            assert all(b - a > cfg.vehicle_length for a, b in zip(xs, xs[1:]))


class TestCollision:
    def _world(self, *offsets):
        ev = VehicleState(0, 0, 0, 10, 0, 0)
        return WorldState(0.0, ev, tuple(SvAgent(i, 0, dx, dy, 10, 10) for i, (dx, dy) in enumerate(offsets)))

    def test_alone(self):
        rep = check_collision(self._world(), SP)
        assert rep.min_h == math.inf and not rep.collided and not rep.margin_violated

    def test_boundary(self):
        rep = check_collision(self._world((3, 0)), SP)
        assert rep.min_h == pytest.approx(0, abs=1e-12)
        assert not rep.collided and rep.margin_violated

    def test_inside(self):
        rep = check_collision(self._world((1, 0), (20, 0)), SP)
        assert rep.min_h < 0 and rep.collided

"""Tests for `socialnav.sim` package."""
from unittest import TestCase

import numpy as np
import pytest

from socialnav.geometry import Pose
from socialnav.sim import (
    ACTIONS, SCENARIOS, CaptionPair, Group, Human, World, caption_oracle, make_scenario,
    plan_expert, raycast_lidar, rasterize_view, sense)
from socialnav.sim.expert import HORIZON, assess_scene
from socialnav.sim.rollout import drive
from socialnav.sim.sensors import N_BEAMS, RASTER_CHANNELS, beam_angles, scan_points
from socialnav.sim.world import segment_distances


def _open_world(humans=(), goal=(3.0, 0.0, 0.0)):
    walls = [(-5.0, -5.0, 10.0, -5.0), (10.0, -5.0, 10.0, 5.0),
             (10.0, 5.0, -5.0, 5.0), (-5.0, 5.0, -5.0, -5.0)]
    return World(walls, list(humans), Pose(), Pose(*goal))


def test_segment_distances():
    distances = segment_distances([[0.0, 1.0], [3.0, 0.0]], [(0.0, 0.0, 2.0, 0.0)])

    np.testing.assert_allclose(distances, [[1.0], [1.0]])


def test_segment_distances_without_walls():
    assert segment_distances([[0.0, 0.0]], []).shape == (1, 0)


class TestHuman(TestCase):

    def test_walks_through_waypoints(self):
        human = Human(position=(0.0, 0.0), waypoints=[(1.0, 0.0), (1.0, 1.0)], speed=1.0)

        human.step(1.5)

        np.testing.assert_allclose(human.position, [1.0, 0.5])
        assert human.target == 1

    def test_stops_at_the_end(self):
        human = Human(position=(0.0, 0.0), waypoints=[(1.0, 0.0)], speed=1.0)

        human.step(3.0)

        np.testing.assert_allclose(human.position, [1.0, 0.0])
        assert not human.moving
        assert not human.intended_velocity.any()

    def test_speed_limit(self):
        with pytest.raises(ValueError):
            Human(position=(0.0, 0.0), waypoints=[(1.0, 0.0)], speed=3.0)


class TestWorld(TestCase):

    def test_unicycle_step(self):
        world = World([], [], Pose(0.0, 0.0, np.pi / 2), Pose(5.0, 0.0, 0.0))

        world.step((1.0, 0.5))

        np.testing.assert_allclose(world.robot.xy, [0.0, 0.1], atol=1e-12)
        assert world.robot.phi == pytest.approx(np.pi / 2 + 0.05)
        assert world.time == pytest.approx(0.1)

    def test_collisions(self):
        human = Human(position=(0.5, 0.0), waypoints=[(0.5, 0.0)], speed=0.0)
        world = World([(0.0, 0.2, 1.0, 0.2)], [human], Pose(), Pose(5.0, 0.0, 0.0))

        world.step((0.0, 0.0))

        assert world.wall_collision
        assert world.human_collision

    def test_non_finite_command(self):
        with pytest.raises(ValueError):
            _open_world().step((np.nan, 0.0))

    def test_group_labels_must_match(self):
        human = Human(position=(1.0, 1.0), waypoints=[(1.0, 1.0)], speed=0.0, group='a')

        with pytest.raises(ValueError):
            World([], [human], Pose(), Pose(), groups=[Group('b', [0])])

    def test_predict_humans_leaves_world_untouched(self):
        human = Human(position=(0.0, 0.0), waypoints=[(5.0, 0.0)], speed=1.0)
        world = _open_world([human])

        times, positions = world.predict_humans(2.0, 0.5)

        assert positions.shape == (5, 1, 2)
        np.testing.assert_allclose(positions[-1, 0], [2.0, 0.0])
        np.testing.assert_allclose(world.humans[0].position, [0.0, 0.0])

    def test_copy_is_independent(self):
        world = _open_world()
        clone = world.copy()

        clone.step((1.0, 0.0))

        assert world.time == 0.0
        assert world.robot.x == 0.0


class TestScenarios(TestCase):

    def test_every_family_is_deterministic(self):
        for kind in SCENARIOS:
            first = make_scenario(kind, 7)
            second = make_scenario(kind, 7)

            assert first.kind == kind
            np.testing.assert_array_equal(first.human_positions, second.human_positions)
            np.testing.assert_array_equal(first.robot.as_array(), second.robot.as_array())

    def test_seeds_differ(self):
        first = make_scenario('narrow_hallway', 1)
        second = make_scenario('narrow_hallway', 2)

        assert not np.array_equal(first.human_positions, second.human_positions)

    def test_blind_corner_has_a_corner(self):
        world = make_scenario('blind_corner', 0)

        assert world.corners.shape == (1, 2)
        assert len(world.humans) == 1

    def test_groups(self):
        world = make_scenario('static_groups_dynamic', 0)

        assert len(world.groups) == 2
        assert all(group.static for group in world.groups)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_scenario('airport', 0)


class TestSensors(TestCase):

    def test_beam_angles(self):
        angles = beam_angles(4)

        np.testing.assert_allclose(angles, [-np.pi, -np.pi / 2, 0.0, np.pi / 2])

    def test_raycast_wall(self):
        world = World([(2.0, -5.0, 2.0, 5.0)], [], Pose(), Pose(5.0, 0.0, 0.0))

        ranges = raycast_lidar(world.robot, world)

        assert ranges.shape == (N_BEAMS,)
        assert ranges[N_BEAMS // 2] == pytest.approx(2.0)
        assert ranges[0] == pytest.approx(8.0)

    def test_raycast_human(self):
        human = Human(position=(3.0, 0.0), waypoints=[(3.0, 0.0)], speed=0.0)
        world = World([], [human], Pose(), Pose(5.0, 0.0, 0.0))

        ranges = raycast_lidar(world.robot, world)

        assert ranges[N_BEAMS // 2] == pytest.approx(2.7)

    def test_scan_points(self):
        scan = np.full(4, 8.0)
        scan[2] = 2.0

        np.testing.assert_allclose(scan_points(scan), [[2.0, 0.0]], atol=1e-12)

    def test_raster(self):
        human = Human(position=(2.0, 0.0), waypoints=[(2.0, 0.0)], speed=0.0)
        world = _open_world([human])

        raster = rasterize_view(world.robot, world)

        assert raster.shape == (len(RASTER_CHANNELS), 64, 64)
        assert set(np.unique(raster)) <= {0.0, 1.0}
        assert raster[1].any()
        assert raster[3].any()
        assert not raster[2].any()

    def test_sense(self):
        world = World([], [], Pose(1.0, 1.0, np.pi / 2), Pose(1.0, 4.0, np.pi / 2))

        frame = sense(world)

        assert frame.goal.x == pytest.approx(3.0)
        assert frame.goal.y == pytest.approx(0.0, abs=1e-12)
        assert frame.scan.shape == (N_BEAMS,)


class TestExpert(TestCase):

    def test_open_world_plan(self):
        plan = plan_expert(_open_world(goal=(8.0, 0.0, 0.0)))

        poses = plan.trajectory.poses
        assert plan.speed_mode == 'normal'
        assert not plan.stopped
        assert poses.shape == (HORIZON, 3)
        np.testing.assert_array_equal(poses[0], [0.0, 0.0, 0.0])
        assert np.all(np.diff(poses[:, 0]) >= -1e-9)
        assert poses[-1, 0] > 3.0

    def test_stops_at_the_goal(self):
        plan = plan_expert(_open_world(goal=(0.1, 0.0, 0.0)))

        assert plan.stopped
        assert not plan.trajectory.poses.any()

    def test_yields_to_a_close_person(self):
        human = Human(position=(0.9, 0.0), waypoints=[(0.9, 0.0)], speed=0.0)

        assert assess_scene(_open_world([human])).speed_mode == 'yield'

    def test_does_not_modify_world(self):
        world = make_scenario('dynamic_groups_dynamic', 3)
        positions = world.human_positions.copy()

        plan_expert(world)

        np.testing.assert_array_equal(world.human_positions, positions)
        assert world.time == 0.0


class TestCaptions(TestCase):

    def test_every_family(self):
        for kind in SCENARIOS:
            caption = caption_oracle(make_scenario(kind, 0))

            assert isinstance(caption, CaptionPair)
            assert caption.action in ACTIONS
            assert caption.long_text.startswith('the robot is in')

    def test_yield_caption(self):
        human = Human(position=(0.9, 0.0), waypoints=[(0.9, 0.0)], speed=0.0)

        assert caption_oracle(_open_world([human])).action == 'stop-and-yield'

    def test_invalid_caption(self):
        with pytest.raises(ValueError):
            CaptionPair('text', 'short', 'dance')


class TestDrive(TestCase):

    def test_trace_shapes(self):
        calls = []
        human = Human(position=(6.0, 3.0), waypoints=[(6.0, -3.0)], speed=0.5)
        world = _open_world([human], goal=(8.0, 0.0, 0.0))

        trace = drive(world, max_steps=15, replan_every=10,
                      on_step=lambda current, step: calls.append(step))

        assert calls == list(range(15))
        assert len(trace.plans) == 2
        assert trace.times.shape == (16,)
        assert trace.robot.shape == (16, 3)
        assert trace.humans.shape == (16, 1, 2)
        assert trace.command_log().shape == (15, 3)
        assert len(trace.human_tracks()) == 1

    @pytest.mark.slow
    def test_expert_reaches_an_open_goal(self):
        trace = drive(_open_world(goal=(3.0, 0.0, 0.0)), max_steps=400)

        assert trace.reached_goal
        assert not trace.wall_collision
        assert not trace.human_collision

# -*- coding: utf-8 -*-

"""Built-in 2D pedestrian simulator."""

from socialnav.sim.captions import ACTIONS, CaptionError, CaptionPair, caption_oracle
from socialnav.sim.expert import ExpertPlan, plan_expert, scripted_expert
from socialnav.sim.scenarios import SCENARIOS, make_scenario
from socialnav.sim.sensors import SensorFrame, raycast_lidar, rasterize_view, sense
from socialnav.sim.world import Group, Human, World

__all__ = (
    'ACTIONS',
    'CaptionError',
    'CaptionPair',
    'ExpertPlan',
    'Group',
    'Human',
    'SCENARIOS',
    'SensorFrame',
    'World',
    'caption_oracle',
    'make_scenario',
    'plan_expert',
    'raycast_lidar',
    'rasterize_view',
    'scripted_expert',
    'sense',
)

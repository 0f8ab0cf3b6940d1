import numpy as np
import pytest
import torch

from socialnav.context import SocialContextModel, build_database
from socialnav.geometry import Pose
from socialnav.pipeline import SocialNavPipeline
from socialnav.planner import TrajectoryPlanner
from socialnav.selector import SelectionHead
from socialnav.sim.captions import CaptionPair
from socialnav.sim.sensors import N_BEAMS, SensorFrame

CAPTIONS = [
    CaptionPair('the robot should proceed towards the goal', 'proceed', 'proceed'),
    CaptionPair('the robot should slow down near the corner', 'slow down', 'slow-down'),
    CaptionPair('the robot should veer left around the group', 'veer left', 'veer-left'),
]


def _make_pipeline(retrieval_threshold=-1.01, **kwargs):
    """Small untrained pipeline whose selector is marked as fitted."""
    torch.manual_seed(0)
    model = SocialContextModel(embedding_dim=16, width=16, image_layers=1, text_layers=1,
                               heads=2, components=4)
    planner = TrajectoryPlanner(image_width=16, channels=8, heads=2, candidates=5,
                                horizon=10, lidar_blocks=1)
    selector = SelectionHead(embedding_dim=16, candidates=5, horizon=10, hidden=8,
                             fusion_hidden=16)
    selector.fitted = True
    database = build_database(CAPTIONS, model)
    return SocialNavPipeline(model, planner, selector, database,
                             retrieval_threshold=retrieval_threshold, **kwargs)


def _make_frame(seed=0):
    rng = np.random.default_rng(seed)
    return SensorFrame(
        scan=np.full(N_BEAMS, 3.0),
        raster=(rng.random((4, 64, 64)) < 0.1).astype(np.uint8),
        goal=Pose(3.0, 0.5, 0.0),
    )


def _make_record(kind='narrow_hallway', seed=0):
    frame = _make_frame(seed)
    expert = np.zeros((10, 3), dtype=np.float32)
    expert[:, 0] = 0.5 * np.arange(10)
    return {
        'kind': kind,
        'episode': seed,
        'frame': 0,
        'seed': seed,
        'raster': frame.raster,
        'scan': frame.scan.astype(np.float32),
        'goal': frame.goal.as_array().astype(np.float32),
        'expert': expert,
    }


@pytest.fixture
def make_pipeline():
    return _make_pipeline


@pytest.fixture
def make_frame():
    return _make_frame


@pytest.fixture
def make_record():
    return _make_record


@pytest.fixture
def pipeline():
    return _make_pipeline()

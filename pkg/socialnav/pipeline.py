# -*- coding: utf-8 -*-

import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
from sklearn.exceptions import NotFittedError

from socialnav.context import ContextDatabase, SocialContextModel
from socialnav.controller import PidController
from socialnav.geometry import Trajectory
from socialnav.planner import TrajectoryPlanner
from socialnav.selector import SelectionHead
from socialnav.sim.sensors import sense

LOGGER = logging.getLogger(__name__)

ABLATIONS = ('ei', 'et', 'el')
RETRIEVAL_THRESHOLD = 0.2
CHECKPOINTS = {
    'context_model': 'scclip.h5',
    'planner': 'tpn.h5',
    'selector': 'tsm.h5',
    'database': 'database.h5',
}
SELECTION_COLUMNS = ['t', 'k', 'max_cosine', 'action']


@dataclass
class Selection:
    """Outcome of one planning call.

    Attributes:
        index (int):
            Chosen candidate.
        candidates (numpy.ndarray):
            ``(K, T, 3)`` robot frame candidates.
        score (float):
            Cosine similarity of the retrieved caption.
        action (str):
            Action of the retrieved caption.
        fallback (bool):
            Whether the retrieval was too weak and candidate 0 was used.
    """

    index: int
    candidates: np.ndarray
    score: float
    action: str
    fallback: bool = False
    logits: np.ndarray = None

    @property
    def trajectory(self):
        poses = self.candidates[self.index]
        return Trajectory(poses, np.arange(len(poses), dtype=float))


class SocialNavPipeline:
    """Social context model, planner and selector wired into a planning call.

    Every call encodes the raster view once, feeds its tokens to the planner,
    retrieves the closest caption from the context database and lets the
    selection head pick one of the candidates using that caption's embedding.

    Args:
        context_model (SocialContextModel):
            Trained social context model.
        planner (TrajectoryPlanner):
            Trained trajectory planner.
        selector (SelectionHead):
            Trained selection head.
        database (ContextDatabase):
            Caption database built with ``context_model``.
        ablate (iterable):
            Inputs replaced by zeros: ``ei`` image tokens, ``el`` LiDAR
            tokens, ``et`` the retrieved text embedding.
        retrieval_threshold (float):
            Below this cosine similarity the first candidate is used.
        controller (PidController):
            Controller tracking the selected trajectory.
    """

    def __init__(self, context_model=None, planner=None, selector=None, database=None,
                 ablate=(), retrieval_threshold=RETRIEVAL_THRESHOLD, controller=None):
        self.context_model = context_model
        self.planner = planner
        self.selector = selector
        self.database = database
        self.retrieval_threshold = retrieval_threshold
        self.controller = controller or PidController()
        self.selections = []
        self.set_ablation(ablate)

    @property
    def fitted(self):
        components = (self.context_model, self.planner, self.selector, self.database)
        return all(component is not None for component in components) and self.selector.fitted

    def set_ablation(self, ablate):
        ablate = set(ablate)
        unknown = ablate - set(ABLATIONS)
        if unknown:
            raise ValueError('Unknown ablations {}'.format(sorted(unknown)))

        self.ablate = ablate
        if self.planner is not None:
            self.planner.set_ablation(ablate & {'ei', 'el'})

    def plan(self, frame, time=0.0):
        """Select a candidate trajectory for a ``SensorFrame``.

        Returns:
            Selection
        """
        if not self.fitted:
            raise NotFittedError('The pipeline needs trained and loaded components')

        self.context_model.eval()
        with torch.no_grad():
            features = self.context_model.encode_images(np.asarray(frame.raster)[None])

        embedding = features.embedding[0]

        goal = frame.goal.as_array()[None]
        candidates = self.planner.predict(features.tokens(), [frame.scan], goal)[0]

        retrieval = self.database.retrieve(embedding)
        if 'et' in self.ablate:
            text = np.zeros_like(retrieval.embedding)
        else:
            text = retrieval.embedding

        if retrieval.score < self.retrieval_threshold:
            LOGGER.info('Retrieval score %.3f below %.3f at t=%.1f, using candidate 0',
                        retrieval.score, self.retrieval_threshold, time)
            selection = Selection(0, candidates, retrieval.score, retrieval.caption.action,
                                  fallback=True)
        else:
            index, logits = self.selector.select(candidates, text)
            selection = Selection(index, candidates, retrieval.score,
                                  retrieval.caption.action, logits=logits)

        self.selections.append((time, selection.index, selection.score, selection.action))
        return selection

    def plan_world(self, world):
        """Robot frame trajectory for the current world state, usable by ``drive``."""
        return self.plan(sense(world), world.time).trajectory

    def selection_log(self):
        return pd.DataFrame(self.selections, columns=SELECTION_COLUMNS)

    def write_selections(self, path):
        self.selection_log().to_csv(path, sep=' ', header=False, index=False,
                                    float_format='%.6f')

    def save(self, folder):
        """Write every component checkpoint into ``folder``."""
        if not self.fitted:
            raise NotFittedError('Only fitted pipelines can be saved')

        os.makedirs(folder, exist_ok=True)
        for attribute, filename in CHECKPOINTS.items():
            getattr(self, attribute).save(os.path.join(folder, filename))

    @classmethod
    def load(cls, folder, ablate=(), retrieval_threshold=RETRIEVAL_THRESHOLD):
        """Load a pipeline saved with ``save``.

        Raises:
            FileNotFoundError:
                Naming every missing checkpoint.
        """
        paths = {
            attribute: os.path.join(folder, filename)
            for attribute, filename in CHECKPOINTS.items()
        }
        missing = [path for path in paths.values() if not os.path.exists(path)]
        if missing:
            raise FileNotFoundError('Missing checkpoints: {}'.format(', '.join(missing)))

        pipeline = cls(
            context_model=SocialContextModel.load(paths['context_model']),
            planner=TrajectoryPlanner.load(paths['planner']),
            selector=SelectionHead.load(paths['selector']),
            database=ContextDatabase.load(paths['database']),
            ablate=ablate,
            retrieval_threshold=retrieval_threshold,
        )
        LOGGER.info('Loaded pipeline from %s', folder)
        return pipeline

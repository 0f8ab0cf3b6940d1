# -*- coding: utf-8 -*-

"""Trajectory planning network.

The planner fuses three embeddings with a learned query through sequential
cross attention stages: image tokens from the social context encoder, LiDAR
pillar tokens and a goal token. The fused query seeds ``K`` recurrent heads,
each of which unrolls one candidate trajectory of ten poses in the robot
frame. Training uses a winner-takes-all loss against expert trajectories.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from socialnav.core.checkpoint import (
    load_checkpoint, load_module_tensors, module_tensors, save_checkpoint)
from socialnav.core.layers import AttentionLayer, ResidualBlock, ResidualFFN, gru_step, init_linear
from socialnav.core.training import train_model
from socialnav.sim.sensors import scan_points

LOGGER = logging.getLogger(__name__)

CHANNELS = 128
HEADS = 32
CANDIDATES = 5
HORIZON = 10
LIDAR_BLOCKS = 5
VOXEL_EXTENT = 8.0
VOXEL_RESOLUTION = 0.5
TOKEN_CAP = 256
TOKEN_FEATURES = 6
GOAL_SCALE = 10.0
HEADING_WEIGHT = 0.1
RELAX_EPSILON = 0.05
ABLATIONS = ('ei', 'el')


@dataclass
class VoxelGrid:
    """Planar pillar grid centred on the robot.

    Attributes:
        features (numpy.ndarray):
            ``(H, W, 4)`` per cell point count, mean offset from the cell
            centre along x and y, and maximum range of its points.
    """

    features: np.ndarray
    resolution: float
    extent: float

    @property
    def counts(self):
        return self.features[..., 0]

    @property
    def occupied(self):
        return int(np.count_nonzero(self.counts))

    def centers(self):
        size = self.features.shape[0]
        offsets = -self.extent + (np.arange(size) + 0.5) * self.resolution
        x, y = np.meshgrid(offsets, offsets)
        return np.stack([x, y], axis=-1)


def voxelize(points, extent=VOXEL_EXTENT, resolution=VOXEL_RESOLUTION):
    """Bin robot frame points into a ``(2 extent / resolution)`` square grid.

    Rows index ``y`` and columns index ``x``. Points outside
    ``[-extent, extent)`` on either axis are ignored.
    """
    size = int(round(2 * extent / resolution))
    features = np.zeros((size, size, 4))
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    points = points[np.all(np.isfinite(points), axis=1)]
    inside = np.all((points >= -extent) & (points < extent), axis=1)
    points = points[inside]
    if not len(points):
        return VoxelGrid(features, resolution, extent)

    cells = np.floor((points + extent) / resolution).astype(int)
    cells = np.clip(cells, 0, size - 1)
    cols, rows = cells[:, 0], cells[:, 1]
    centers = -extent + (cells + 0.5) * resolution

    np.add.at(features[..., 0], (rows, cols), 1.0)
    np.add.at(features[..., 1], (rows, cols), points[:, 0] - centers[:, 0])
    np.add.at(features[..., 2], (rows, cols), points[:, 1] - centers[:, 1])
    np.maximum.at(features[..., 3], (rows, cols), np.linalg.norm(points, axis=1))

    counts = features[..., 0]
    occupied = counts > 0
    features[occupied, 1] /= counts[occupied]
    features[occupied, 2] /= counts[occupied]

    return VoxelGrid(features, resolution, extent)


def grid_tokens(grid, cap=TOKEN_CAP):
    """Occupied cells as ``(n, 6)`` token features, nearest cells first.

    Each token holds ``log(1 + count)``, the mean offsets in cell units, the
    maximum range and the cell centre, both scaled by the extent.
    """
    rows, cols = np.nonzero(grid.counts)
    if not len(rows):
        return np.zeros((0, TOKEN_FEATURES), dtype=np.float32)

    centers = grid.centers()[rows, cols]
    distances = np.linalg.norm(centers, axis=1)
    order = np.lexsort((rows * grid.features.shape[1] + cols, distances))[:cap]
    rows, cols, centers = rows[order], cols[order], centers[order]

    cells = grid.features[rows, cols]
    tokens = np.column_stack([
        np.log1p(cells[:, 0]),
        cells[:, 1] / grid.resolution,
        cells[:, 2] / grid.resolution,
        cells[:, 3] / grid.extent,
        centers / grid.extent,
    ])
    return tokens.astype(np.float32)


def scan_tokens(scan, cap=TOKEN_CAP):
    return grid_tokens(voxelize(scan_points(scan)), cap)


def goal_features(goals):
    """``(B, 3)`` robot frame goal poses to ``(B, 4)`` encoder inputs."""
    goals = np.asarray(goals, dtype=float).reshape(-1, 3)
    return np.column_stack([
        goals[:, 0] / GOAL_SCALE,
        goals[:, 1] / GOAL_SCALE,
        np.cos(goals[:, 2]),
        np.sin(goals[:, 2]),
    ]).astype(np.float32)


def pad_tokens(token_sets, dtype=torch.float32):
    """Right-pad variable length token sets.

    Returns:
        tuple:
            ``(tokens, padding_mask)`` with shapes ``(B, N, F)`` and ``(B, N)``.
    """
    length = max([len(tokens) for tokens in token_sets] + [0])
    width = TOKEN_FEATURES
    batch = torch.zeros((len(token_sets), length, width), dtype=dtype)
    mask = torch.ones((len(token_sets), length), dtype=torch.bool)
    for row, tokens in enumerate(token_sets):
        if len(tokens):
            batch[row, :len(tokens)] = torch.as_tensor(np.asarray(tokens), dtype=dtype)
            mask[row, :len(tokens)] = False

    return batch, mask


class LidarEncoder(nn.Module):
    """Linear token embedding followed by a stack of residual blocks.

    A batch row without any occupied cell is represented by a single learned
    null token.
    """

    def __init__(self, channels=CHANNELS, blocks=LIDAR_BLOCKS, features=TOKEN_FEATURES):
        super().__init__()
        self.embed = nn.Linear(features, channels)
        self.blocks = nn.Sequential(*(ResidualBlock(channels) for _ in range(blocks)))
        self.null_token = nn.Parameter(0.02 * torch.randn(1, 1, channels))
        init_linear(self.embed)

    def forward(self, tokens, padding_mask):
        encoded = self.blocks(self.embed(tokens))
        empty = padding_mask.all(dim=1)
        null = self.null_token.expand(len(tokens), -1, -1).to(encoded.dtype)
        encoded = torch.cat([encoded, null], dim=1)
        mask = torch.cat([padding_mask, ~empty.unsqueeze(1)], dim=1)
        return encoded, mask

    def encode_grid(self, grid):
        """Embedding of every occupied cell of ``grid``, ``(n, C)``, or the null token."""
        dtype = self.embed.weight.dtype
        tokens, mask = pad_tokens([grid_tokens(grid)], dtype)
        encoded, mask = self(tokens, mask)
        return encoded[0][~mask[0]]


class GoalEncoder(nn.Module):
    """Single linear layer with ReLU over the goal features."""

    def __init__(self, channels=CHANNELS):
        super().__init__()
        self.linear = nn.Linear(4, channels)
        init_linear(self.linear)

    def forward(self, goals):
        return torch.relu(self.linear(goals))


class MultiHeadAttentionBlock(nn.Module):
    """Learned query refined by image, LiDAR and goal cross attention stages."""

    STAGES = ('image', 'lidar', 'goal')

    def __init__(self, channels=CHANNELS, heads=HEADS, queries=1):
        super().__init__()
        self.query = nn.Parameter(torch.randn(queries, channels))
        self.attention = nn.ModuleList(AttentionLayer(channels, heads) for _ in self.STAGES)
        self.ffn = nn.ModuleList(ResidualFFN(channels) for _ in self.STAGES)

    def forward(self, image, lidar, goal, lidar_mask=None):
        """Fuse ``(B, n, C)`` token sets into ``(B, n_q, C)`` queries."""
        query = self.query.unsqueeze(0).expand(len(image), -1, -1)
        masks = (None, lidar_mask, None)
        for attention, ffn, keys, mask in zip(self.attention, self.ffn,
                                              (image, lidar, goal), masks):
            query = ffn(attention(query, keys, mask))

        return query


class ForecastHead(nn.Module):
    """``K`` recurrent heads, each unrolling one candidate trajectory.

    Every step feeds the fused query and the previous pose to the head's GRU
    cell and adds the predicted offset to the previous pose.
    """

    def __init__(self, channels=CHANNELS, candidates=CANDIDATES, horizon=HORIZON):
        super().__init__()
        self.horizon = horizon
        self.cells = nn.ModuleList(nn.GRUCell(channels + 3, channels) for _ in range(candidates))
        self.heads = nn.ModuleList(nn.Linear(channels, 3) for _ in range(candidates))
        for head in self.heads:
            init_linear(head)

    def forward(self, query):
        """``(B, C)`` fused queries to ``(B, K, T, 3)`` candidate poses."""
        candidates = []
        for cell, head in zip(self.cells, self.heads):
            hidden = query
            pose = query.new_zeros(query.shape[0], 3)
            poses = []
            for _ in range(self.horizon):
                hidden = gru_step(cell, hidden, torch.cat([query, pose], dim=-1))
                pose = pose + head(hidden)
                poses.append(pose)

            candidates.append(torch.stack(poses, dim=1))

        return torch.stack(candidates, dim=1)


class TrajectoryPlanner(nn.Module):
    """Image, LiDAR and goal encoders, attention fusion and forecast heads.

    Args:
        image_width (int):
            Width of the social context image tokens.
        channels (int):
            Common width ``C`` of every fused embedding.
        heads (int):
            Attention heads per stage.
        candidates (int):
            Number of predicted trajectories ``K``.
        ablate (iterable):
            Embeddings replaced by a single zero token, among ``'ei'`` and ``'el'``.
    """

    def __init__(self, image_width=64, channels=CHANNELS, heads=HEADS, candidates=CANDIDATES,
                 horizon=HORIZON, lidar_blocks=LIDAR_BLOCKS, ablate=()):
        super().__init__()
        self.hyperparameters = {
            'image_width': image_width,
            'channels': channels,
            'heads': heads,
            'candidates': candidates,
            'horizon': horizon,
            'lidar_blocks': lidar_blocks,
        }
        self.candidates = candidates
        self.horizon = horizon
        self.ablate = set()
        self.set_ablation(ablate)

        self.image_proj = nn.Linear(image_width, channels)
        self.lidar_encoder = LidarEncoder(channels, lidar_blocks)
        self.goal_encoder = GoalEncoder(channels)
        self.fusion = MultiHeadAttentionBlock(channels, heads)
        self.forecast = ForecastHead(channels, candidates, horizon)
        init_linear(self.image_proj)

    def set_ablation(self, ablate):
        unknown = set(ablate) - set(ABLATIONS)
        if unknown:
            raise ValueError('Unknown planner ablations {}'.format(sorted(unknown)))

        self.ablate = set(ablate)

    def forward(self, image_tokens, lidar_tokens, lidar_mask, goals):
        """Predict candidate trajectories.

        Args:
            image_tokens (torch.Tensor):
                ``(B, P, image_width)`` social context image tokens.
            lidar_tokens (torch.Tensor):
                ``(B, N, 6)`` padded pillar tokens.
            lidar_mask (torch.Tensor):
                ``(B, N)`` padding mask.
            goals (torch.Tensor):
                ``(B, 4)`` goal features.

        Returns:
            torch.Tensor:
                ``(B, K, T, 3)`` candidate poses in the robot frame.
        """
        batch = len(goals)
        channels = self.hyperparameters['channels']
        if 'ei' in self.ablate:
            image = goals.new_zeros(batch, 1, channels)
        else:
            image = self.image_proj(image_tokens)

        if 'el' in self.ablate:
            lidar, mask = goals.new_zeros(batch, 1, channels), None
        else:
            lidar, mask = self.lidar_encoder(lidar_tokens, lidar_mask)

        goal = self.goal_encoder(goals).unsqueeze(1)
        query = self.fusion(image, lidar, goal, mask)
        return self.forecast(query[:, 0])

    def predict(self, image_tokens, scans, goals):
        """Candidates for raw inputs, as a ``(B, K, T, 3)`` numpy array."""
        dtype = self.image_proj.weight.dtype
        tokens, mask = pad_tokens([scan_tokens(scan) for scan in scans], dtype)
        self.eval()
        with torch.no_grad():
            candidates = self(
                image_tokens.to(dtype), tokens, mask,
                torch.as_tensor(goal_features(goals), dtype=dtype))

        return candidates.cpu().numpy().astype(float)

    def save(self, path):
        save_checkpoint(path, module_tensors(self), dict(self.hyperparameters))

    @classmethod
    def load(cls, path, ablate=()):
        tensors, metadata, _ = load_checkpoint(path)
        planner = cls(ablate=ablate, **metadata)
        load_module_tensors(planner, tensors)
        planner.eval()
        return planner


def candidate_losses(candidates, expert, heading_weight=HEADING_WEIGHT):
    """Per-candidate mean over poses of squared position error plus weighted heading error.

    Args:
        candidates (torch.Tensor):
            ``(B, K, T, 3)`` or ``(K, T, 3)``.
        expert (torch.Tensor):
            ``(B, T, 3)`` or ``(T, 3)``.

    Returns:
        torch.Tensor:
            ``(B, K)`` losses, or ``(K,)`` for unbatched inputs.
    """
    if candidates.shape[-2:] != expert.shape[-2:] or candidates.dim() != expert.dim() + 1:
        raise ValueError('Candidates {} do not match expert {}'.format(
            tuple(candidates.shape), tuple(expert.shape)))

    delta = candidates - expert.unsqueeze(-3)
    heading = torch.atan2(torch.sin(delta[..., 2]), torch.cos(delta[..., 2]))
    squared = delta[..., 0] ** 2 + delta[..., 1] ** 2 + heading_weight * heading ** 2
    return squared.mean(dim=-1)


def wta_loss(candidates, expert, heading_weight=HEADING_WEIGHT, winner_only=True,
             relax=RELAX_EPSILON):
    """Winner-takes-all loss averaged over the batch.

    With ``winner_only`` only the best candidate receives a gradient.
    Otherwise the other candidates share an ``relax`` fraction of the loss.
    """
    losses = candidate_losses(candidates, expert, heading_weight)
    losses = losses.reshape(-1, losses.shape[-1])
    best = losses.min(dim=1).values
    if winner_only or losses.shape[1] == 1:
        return best.mean()

    others = (losses.sum(dim=1) - best) / (losses.shape[1] - 1)
    return ((1 - relax) * best + relax * others).mean()


@dataclass
class PlannerSample:
    image_tokens: torch.Tensor
    lidar_tokens: np.ndarray
    goal: np.ndarray
    expert: np.ndarray


def prepare_samples(records, context_model, batch_size=256):
    """Attach frozen social context image tokens to planner records."""
    samples = []
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        tokens = context_model.image_tokens(np.stack([record['raster'] for record in chunk]))
        for record, image_tokens in zip(chunk, tokens):
            samples.append(PlannerSample(
                image_tokens=image_tokens,
                lidar_tokens=scan_tokens(record['scan']),
                goal=goal_features(record['goal'])[0],
                expert=np.asarray(record['expert'], dtype=np.float32),
            ))

    return samples


def collate(samples, dtype=torch.float32):
    lidar, mask = pad_tokens([sample.lidar_tokens for sample in samples], dtype)
    return (
        torch.stack([sample.image_tokens for sample in samples]).to(dtype),
        lidar,
        mask,
        torch.as_tensor(np.stack([sample.goal for sample in samples]), dtype=dtype),
        torch.as_tensor(np.stack([sample.expert for sample in samples]), dtype=dtype),
    )


def planner_batch_loss(planner, batch, winner_only=True):
    image, lidar, mask, goals, expert = collate(batch, planner.image_proj.weight.dtype)
    return wta_loss(planner(image, lidar, mask, goals), expert, winner_only=winner_only)


def train_tpn(planner, train_samples, val_samples=(), epochs=500, batch_size=10, lr=8e-4,
              weight_decay=1e-4, patience=None, seed=0, winner_only=True, verbose=False):
    """Train the planner on prepared samples, keeping the best validation state.

    Returns:
        pandas.DataFrame:
            Training history.
    """
    def loss_fn(model, batch):
        return planner_batch_loss(model, batch, winner_only)

    return train_model(
        planner, loss_fn, train_samples, val_samples,
        epochs=epochs, batch_size=batch_size, lr=lr, weight_decay=weight_decay,
        patience=patience, seed=seed, description='tpn', verbose=verbose)

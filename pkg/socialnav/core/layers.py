# -*- coding: utf-8 -*-

"""Differentiable building blocks shared by the encoders and planners."""

import logging
import math

import torch
from torch import nn

LOGGER = logging.getLogger(__name__)

LAYER_NORM_EPS = 1e-5


def init_linear(module):
    """Xavier uniform weights and zero biases for every ``nn.Linear``."""
    if isinstance(module, nn.Linear):
        nn.init.xavier_uniform_(module.weight)
        if module.bias is not None:
            nn.init.zeros_(module.bias)


def _batched(tensor):
    if tensor.dim() == 2:
        return tensor.unsqueeze(0), True

    if tensor.dim() == 3:
        return tensor, False

    raise ValueError('Expected a (n, C) or (B, n, C) tensor, got shape {}'.format(
        tuple(tensor.shape)))


class AttentionLayer(nn.Module):
    """Multi-head cross attention followed by a residual layer norm.

    Computes ``LN(Q + A(Q, KV))`` where ``A`` is scaled dot product attention
    split across ``heads``. Keys carry no positional encoding, so the output
    does not depend on the order of the ``KV`` rows.

    Args:
        channels (int):
            Width ``C`` of queries, keys and values.
        heads (int):
            Number of attention heads. Must divide ``channels``.
    """

    def __init__(self, channels, heads):
        super().__init__()
        if channels % heads:
            raise ValueError('channels ({}) must be divisible by heads ({})'.format(
                channels, heads))

        self.channels = channels
        self.heads = heads
        self.head_dim = channels // heads

        self.w_q = nn.Linear(channels, channels)
        # a key bias shifts every logit of a query equally, softmax ignores it
        self.w_k = nn.Linear(channels, channels, bias=False)
        self.w_v = nn.Linear(channels, channels)
        self.w_o = nn.Linear(channels, channels)
        self.norm = nn.LayerNorm(channels, eps=LAYER_NORM_EPS)
        self.apply(init_linear)

    def _split(self, tensor):
        batch, length, _ = tensor.shape
        return tensor.view(batch, length, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, queries, keys, key_padding_mask=None):
        """Attend from ``queries`` to ``keys``.

        Args:
            queries (torch.Tensor):
                ``(n_q, C)`` or ``(B, n_q, C)``.
            keys (torch.Tensor):
                ``(n_kv, C)`` or ``(B, n_kv, C)``, used as keys and values.
            key_padding_mask (torch.Tensor):
                Optional ``(B, n_kv)`` boolean mask, ``True`` marks padding.

        Returns:
            torch.Tensor:
                Same shape as ``queries``.
        """
        queries, squeeze = _batched(queries)
        keys, _ = _batched(keys)
        if queries.shape[-1] != self.channels or keys.shape[-1] != self.channels:
            raise ValueError('Expected width {}, got queries {} and keys {}'.format(
                self.channels, tuple(queries.shape), tuple(keys.shape)))

        if queries.shape[0] != keys.shape[0]:
            raise ValueError('Batch mismatch between queries {} and keys {}'.format(
                tuple(queries.shape), tuple(keys.shape)))

        q = self._split(self.w_q(queries))
        k = self._split(self.w_k(keys))
        v = self._split(self.w_v(keys))

        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float('-inf'))

        weights = torch.softmax(scores, dim=-1)
        attended = (weights @ v).transpose(1, 2).reshape(queries.shape)
        output = self.norm(queries + self.w_o(attended))

        return output.squeeze(0) if squeeze else output


class ResidualFFN(nn.Module):
    """``LN(x + W2 relu(W1 x))`` with a hidden expansion of ``expansion``."""

    def __init__(self, channels, expansion=4):
        super().__init__()
        self.channels = channels
        self.w_1 = nn.Linear(channels, expansion * channels)
        self.w_2 = nn.Linear(expansion * channels, channels)
        self.norm = nn.LayerNorm(channels, eps=LAYER_NORM_EPS)
        self.apply(init_linear)

    def forward(self, inputs):
        if inputs.shape[-1] != self.channels:
            raise ValueError('Expected width {}, got shape {}'.format(
                self.channels, tuple(inputs.shape)))

        return self.norm(inputs + self.w_2(torch.relu(self.w_1(inputs))))


class ResidualBlock(nn.Module):
    """Two-layer residual MLP block, ``relu(x + W2 relu(W1 x))``."""

    def __init__(self, channels):
        super().__init__()
        self.w_1 = nn.Linear(channels, channels)
        self.w_2 = nn.Linear(channels, channels)
        self.apply(init_linear)

    def forward(self, inputs):
        return torch.relu(inputs + self.w_2(torch.relu(self.w_1(inputs))))


def gru_step(cell, hidden, inputs):
    """Advance a ``nn.GRUCell`` by one step, accepting unbatched vectors."""
    if hidden.shape[-1] != cell.hidden_size:
        raise ValueError('Hidden state width {} does not match cell size {}'.format(
            hidden.shape[-1], cell.hidden_size))

    if inputs.shape[-1] != cell.input_size:
        raise ValueError('Input width {} does not match cell input size {}'.format(
            inputs.shape[-1], cell.input_size))

    if hidden.dim() == 1:
        return cell(inputs.unsqueeze(0), hidden.unsqueeze(0)).squeeze(0)

    return cell(inputs, hidden)

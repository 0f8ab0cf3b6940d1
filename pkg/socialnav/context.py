# -*- coding: utf-8 -*-

"""Social context model: image and text encoders aligned on caption pairs.

The image encoder reads the robot's egocentric raster view and the text
encoder reads caption token sequences. Both produce unit-norm embeddings in a
shared space. Long captions are aligned with the pooled image feature and
short captions with a principal-component summary of the patch features.
A ``ContextDatabase`` of long caption embeddings is searched at run time to
recover the social context that best matches the current view.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from socialnav.core.checkpoint import (
    load_checkpoint, load_module_tensors, module_tensors, save_checkpoint)
from socialnav.core.layers import init_linear
from socialnav.core.losses import contrastive_logits, diagonal_labels, softmax_ce
from socialnav.core.training import train_model
from socialnav.sim.captions import CaptionPair
from socialnav.sim.sensors import RASTER_CHANNELS, RASTER_SIZE
from socialnav.tokenizer import Tokenizer

LOGGER = logging.getLogger(__name__)

EMBEDDING_DIM = 64
WIDTH = 64
PATCH_SIZE = 8
PCE_COMPONENTS = 8
LONG_MAX_TOKENS = 248
SHORT_MAX_TOKENS = 20
LOGIT_SCALE = 1 / 0.07
DATABASE_SIZE = 256
ENCODE_BATCH = 256


def _normalize(values):
    return F.normalize(values, dim=-1, eps=1e-12)


def _encoder_stack(width, heads, layers):
    layer = nn.TransformerEncoderLayer(
        width, heads, dim_feedforward=4 * width, dropout=0.0,
        batch_first=True, norm_first=True)
    return nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)


@dataclass
class ImageFeatures:
    """Output of ``ImageEncoder``.

    Attributes:
        embedding (torch.Tensor):
            ``(B, D)`` unit-norm image embeddings.
        pooled (torch.Tensor):
            ``(B, C)`` class token features before the projection.
        patches (torch.Tensor):
            ``(B, P, C)`` patch features before pooling.
    """

    embedding: torch.Tensor
    pooled: torch.Tensor
    patches: torch.Tensor

    def tokens(self):
        """Patch features with the pooled feature appended, ``(B, P + 1, C)``."""
        return torch.cat([self.patches, self.pooled.unsqueeze(1)], dim=1)


class ImageEncoder(nn.Module):
    """Patch embedding transformer over the egocentric raster view."""

    def __init__(self, channels=len(RASTER_CHANNELS), size=RASTER_SIZE, patch_size=PATCH_SIZE,
                 width=WIDTH, layers=4, heads=4, embedding_dim=EMBEDDING_DIM):
        super().__init__()
        if size % patch_size:
            raise ValueError('Image size {} is not a multiple of the patch size {}'.format(
                size, patch_size))

        self.channels = channels
        self.size = size
        self.patch_size = patch_size
        self.n_patches = (size // patch_size) ** 2

        self.patch_embed = nn.Linear(channels * patch_size * patch_size, width)
        self.cls_token = nn.Parameter(0.02 * torch.randn(1, 1, width))
        self.position = nn.Parameter(0.02 * torch.randn(1, self.n_patches + 1, width))
        self.encoder = _encoder_stack(width, heads, layers)
        self.norm = nn.LayerNorm(width)
        self.proj = nn.Linear(width, embedding_dim, bias=False)
        self.short_proj = nn.Linear(width, embedding_dim, bias=False)
        init_linear(self.patch_embed)

    def _patchify(self, images):
        patch = self.patch_size
        batch = images.shape[0]
        blocks = images.unfold(2, patch, patch).unfold(3, patch, patch)
        blocks = blocks.permute(0, 2, 3, 1, 4, 5)
        return blocks.reshape(batch, self.n_patches, -1)

    def forward(self, images):
        expected = (self.channels, self.size, self.size)
        if images.dim() != 4 or tuple(images.shape[1:]) != expected:
            raise ValueError('Expected images of shape (B, {}, {}, {}), got {}'.format(
                *expected, tuple(images.shape)))

        tokens = self.patch_embed(self._patchify(images))
        cls_token = self.cls_token.expand(len(images), -1, -1)
        hidden = torch.cat([cls_token, tokens], dim=1) + self.position
        hidden = self.norm(self.encoder(hidden))

        pooled = hidden[:, 0]
        return ImageFeatures(
            embedding=_normalize(self.proj(pooled)),
            pooled=pooled,
            patches=hidden[:, 1:],
        )


class TextEncoder(nn.Module):
    """Self-attention encoder over caption tokens with masked mean pooling."""

    def __init__(self, vocab_size, width=WIDTH, layers=2, heads=4, max_len=LONG_MAX_TOKENS,
                 embedding_dim=EMBEDDING_DIM):
        super().__init__()
        self.max_len = max_len
        self.token = nn.Embedding(vocab_size, width, padding_idx=0)
        self.position = nn.Parameter(0.02 * torch.randn(1, max_len, width))
        self.encoder = _encoder_stack(width, heads, layers)
        self.norm = nn.LayerNorm(width)
        self.proj = nn.Linear(width, embedding_dim, bias=False)

    def forward(self, ids, padding_mask):
        """Embed a batch of token id sequences.

        Args:
            ids (torch.Tensor):
                ``(B, L)`` token ids.
            padding_mask (torch.Tensor):
                ``(B, L)`` boolean mask, ``True`` on padding.

        Returns:
            torch.Tensor:
                ``(B, D)`` unit-norm text embeddings.
        """
        if ids.dim() != 2 or not ids.shape[1] or bool(padding_mask.all(dim=1).any()):
            raise ValueError('Cannot encode an empty token sequence')

        if ids.shape[1] > self.max_len:
            raise ValueError('Token sequence of length {} exceeds {}'.format(
                ids.shape[1], self.max_len))

        hidden = self.token(ids) + self.position[:, :ids.shape[1]]
        hidden = self.norm(self.encoder(hidden, src_key_padding_mask=padding_mask))

        keep = (~padding_mask).unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * keep).sum(dim=1) / keep.sum(dim=1)
        return _normalize(self.proj(pooled))


@dataclass
class PrincipalComponents:
    """Eigen-decomposition of a patch feature covariance, largest first.

    ``mask`` flags the components kept; components of a rank-deficient
    covariance are dropped and ``explained`` gives each kept component's
    share of the total variance.
    """

    values: torch.Tensor
    vectors: torch.Tensor
    mask: torch.Tensor
    mean: torch.Tensor
    explained: torch.Tensor


def principal_components(patches, components=PCE_COMPONENTS):
    """Top ``components`` principal directions of ``(B, P, C)`` or ``(P, C)`` features.

    The decomposition is computed on detached features, so gradients flow
    only through the projected vectors.
    """
    patches = patches.detach()
    if patches.dim() == 2:
        patches = patches.unsqueeze(0)

    count, width = patches.shape[1:]
    if count < components:
        raise ValueError('Need at least {} patches, got {}'.format(components, count))

    components = min(components, width)
    mean = patches.mean(dim=1)
    centered = patches - mean.unsqueeze(1)
    covariance = centered.transpose(1, 2) @ centered / max(count - 1, 1)
    values, vectors = torch.linalg.eigh(covariance)
    values = values.flip(-1).clamp(min=0.0)
    vectors = vectors.flip(-1)

    total = values.sum(dim=-1, keepdim=True)
    tolerance = width * torch.finfo(values.dtype).eps * values[:, :1]
    values, vectors = values[:, :components], vectors[..., :components]
    mask = values > tolerance
    explained = torch.where(total > 0, values / total.clamp(min=1e-30),
                            torch.zeros_like(values))

    return PrincipalComponents(values, vectors, mask, mean, explained * mask)


def pce(patches, pooled, components=PCE_COMPONENTS):
    """Project ``pooled`` features onto the leading principal components of ``patches``.

    Args:
        patches (torch.Tensor):
            ``(B, P, C)`` or ``(P, C)`` patch features.
        pooled (torch.Tensor):
            ``(B, C)`` or ``(C,)`` pooled features.

    Returns:
        torch.Tensor:
            ``U U^T (pooled - mean)`` with the same shape as ``pooled``.
    """
    squeeze = pooled.dim() == 1
    basis = principal_components(patches, components)
    pooled = pooled.reshape(-1, pooled.shape[-1])
    vectors = basis.vectors * basis.mask.unsqueeze(1).to(basis.vectors.dtype)
    centered = (pooled - basis.mean).unsqueeze(-1)
    projected = (vectors @ (vectors.transpose(1, 2) @ centered)).squeeze(-1)

    return projected.squeeze(0) if squeeze else projected


def sc_clip_loss(image_embeddings, long_embeddings, short_image_embeddings,
                 short_embeddings, scale=LOGIT_SCALE):
    """Dual caption contrastive loss.

    Cross entropy of the scaled image to long caption similarity matrix plus
    cross entropy of the principal component image summary to short caption
    matrix, both with matching pairs on the diagonal.
    """
    count = len(image_embeddings)
    labels = diagonal_labels(count, device=image_embeddings.device)
    long_term = softmax_ce(contrastive_logits(image_embeddings, long_embeddings, scale), labels)
    short_term = softmax_ce(
        contrastive_logits(short_image_embeddings, short_embeddings, scale), labels)

    return long_term + short_term


def _as_images(rasters, dtype):
    if isinstance(rasters, torch.Tensor):
        return rasters.to(dtype)

    return torch.as_tensor(np.asarray(rasters), dtype=dtype)


class SocialContextModel(nn.Module):
    """Image encoder, text encoder and tokenizer trained together.

    Args:
        tokenizer (Tokenizer):
            Caption tokenizer. A default vocabulary is used when omitted.
        embedding_dim (int):
            Width of the shared embedding space.
        components (int):
            Principal components kept for the short caption branch.
    """

    iteration = 0

    def __init__(self, tokenizer=None, embedding_dim=EMBEDDING_DIM, width=WIDTH, image_layers=4,
                 text_layers=2, heads=4, patch_size=PATCH_SIZE, components=PCE_COMPONENTS,
                 logit_scale=LOGIT_SCALE):
        super().__init__()
        self.tokenizer = tokenizer or Tokenizer()
        self.hyperparameters = {
            'embedding_dim': embedding_dim,
            'width': width,
            'image_layers': image_layers,
            'text_layers': text_layers,
            'heads': heads,
            'patch_size': patch_size,
            'components': components,
            'logit_scale': logit_scale,
        }
        self.components = components
        self.logit_scale = logit_scale
        self.image_encoder = ImageEncoder(
            patch_size=patch_size, width=width, layers=image_layers, heads=heads,
            embedding_dim=embedding_dim)
        self.text_encoder = TextEncoder(
            len(self.tokenizer), width=width, layers=text_layers, heads=heads,
            embedding_dim=embedding_dim)

    @property
    def dtype(self):
        return self.image_encoder.position.dtype

    def encode_images(self, rasters):
        return self.image_encoder(_as_images(rasters, self.dtype))

    def encode_short_images(self, features):
        projected = pce(features.patches, features.pooled, self.components)
        return _normalize(self.image_encoder.short_proj(projected))

    def encode_texts(self, texts, max_len=LONG_MAX_TOKENS):
        ids, mask = self.tokenizer.pad_batch(texts, max_len)
        return self.text_encoder(ids, mask)

    def loss(self, rasters, long_texts, short_texts):
        features = self.encode_images(rasters)
        return sc_clip_loss(
            features.embedding,
            self.encode_texts(long_texts, LONG_MAX_TOKENS),
            self.encode_short_images(features),
            self.encode_texts(short_texts, SHORT_MAX_TOKENS),
            self.logit_scale,
        )

    def encode_image(self, raster):
        """Unit-norm embedding of a single ``(4, H, W)`` raster view."""
        self.eval()
        with torch.no_grad():
            return self.encode_images(np.asarray(raster)[None]).embedding[0]

    def encode_text(self, text, max_len=LONG_MAX_TOKENS):
        self.eval()
        with torch.no_grad():
            return self.encode_texts([text], max_len)[0]

    def image_tokens(self, rasters):
        """``(B, P + 1, C)`` image tokens consumed by the trajectory planner."""
        self.eval()
        with torch.no_grad():
            return self.encode_images(rasters).tokens()

    def save(self, path):
        metadata = dict(self.hyperparameters, iteration=self.iteration)
        save_checkpoint(path, module_tensors(self), metadata,
                        {'vocabulary': self.tokenizer.vocabulary})

    @classmethod
    def load(cls, path):
        tensors, metadata, strings = load_checkpoint(path)
        iteration = metadata.pop('iteration', 0)
        model = cls(Tokenizer(strings['vocabulary']), **metadata)
        load_module_tensors(model, tensors)
        model.iteration = iteration
        model.eval()
        LOGGER.info('Loaded social context model %s at iteration %s', path, iteration)
        return model


def scclip_batch_loss(model, batch):
    """Training loss of ``SocialContextModel`` on a list of caption records."""
    rasters = np.stack([record['raster'] for record in batch])
    return model.loss(
        rasters,
        [record['long'] for record in batch],
        [record['short'] for record in batch],
    )


def train_scclip(model, train_records, val_records=(), epochs=100, batch_size=256, lr=1e-4,
                 weight_decay=0.01, patience=None, seed=0, verbose=False):
    """Train the social context model on caption records.

    Returns:
        pandas.DataFrame:
            Training history.
    """
    return train_model(
        model, scclip_batch_loss, train_records, val_records,
        epochs=epochs, batch_size=batch_size, lr=lr, weight_decay=weight_decay,
        patience=patience, seed=seed, description='scclip', verbose=verbose)


def _encode_in_batches(function, items):
    outputs = []
    for start in range(0, len(items), ENCODE_BATCH):
        outputs.append(function(items[start:start + ENCODE_BATCH]))

    return torch.cat(outputs)


def retrieval_accuracy(model, records):
    """In-batch top-1 image to long caption retrieval accuracy.

    A retrieval counts as a hit when the retrieved caption text equals the
    paired caption, since template captions repeat across records.
    """
    if not len(records):
        raise ValueError('Retrieval accuracy needs at least one record')

    model.eval()
    with torch.no_grad():
        rasters = np.stack([record['raster'] for record in records])
        texts = [record['long'] for record in records]
        images = _encode_in_batches(lambda chunk: model.encode_images(chunk).embedding, rasters)
        captions = _encode_in_batches(model.encode_texts, texts)
        retrieved = torch.argmax(images @ captions.t(), dim=1).tolist()

    hits = sum(texts[found] == text for found, text in zip(retrieved, texts))
    return hits / len(records)


@dataclass
class Retrieval:
    index: int
    score: float
    embedding: np.ndarray
    caption: CaptionPair


class ContextDatabase:
    """Long caption embeddings searched by cosine similarity.

    Args:
        embeddings (numpy.ndarray):
            ``(N, D)`` unit-norm text embeddings.
        captions (list[CaptionPair]):
            Caption of each row.
        iteration (int):
            Update iteration of the text encoder that produced the embeddings.
    """

    def __init__(self, embeddings, captions, iteration=0):
        embeddings = np.asarray(embeddings, dtype=np.float32)
        if embeddings.ndim != 2 or len(embeddings) != len(captions):
            raise ValueError('Got {} embeddings for {} captions'.format(
                embeddings.shape, len(captions)))

        norms = np.linalg.norm(embeddings, axis=1)
        if len(norms) and not np.allclose(norms, 1.0, atol=1e-5):
            raise ValueError('Database embeddings must be normalized')

        self.embeddings = embeddings
        self.captions = list(captions)
        self.iteration = iteration

    def __len__(self):
        return len(self.captions)

    def scores(self, query):
        query = np.asarray(query, dtype=np.float64).reshape(-1)
        norm = np.linalg.norm(query)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError('Cannot retrieve with a zero or non-finite query')

        if query.shape[0] != self.embeddings.shape[1]:
            raise ValueError('Query has dimension {}, database has {}'.format(
                query.shape[0], self.embeddings.shape[1]))

        return self.embeddings.astype(np.float64) @ (query / norm)

    def retrieve(self, query):
        """Entry with the highest cosine similarity; the lowest index wins ties."""
        if not len(self):
            raise ValueError('Cannot retrieve from an empty context database')

        if isinstance(query, torch.Tensor):
            query = query.detach().cpu().numpy()

        scores = self.scores(query)
        index = int(np.argmax(scores))
        return Retrieval(index, float(scores[index]), self.embeddings[index],
                         self.captions[index])

    def save(self, path):
        save_checkpoint(
            path,
            {'embeddings': self.embeddings},
            {'iteration': self.iteration},
            {
                'long': [caption.long_text for caption in self.captions],
                'short': [caption.short_text for caption in self.captions],
                'action': [caption.action for caption in self.captions],
            },
        )

    @classmethod
    def load(cls, path):
        tensors, metadata, strings = load_checkpoint(path)
        captions = [
            CaptionPair(long_text, short_text, action)
            for long_text, short_text, action in zip(
                strings['long'], strings['short'], strings['action'])
        ]
        return cls(tensors['embeddings'], captions, metadata.get('iteration', 0))


def build_database(captions, model):
    """Embed the long text of every caption with the current text encoder."""
    captions = list(captions)
    if not captions:
        raise ValueError('Cannot build a context database without captions')

    model.eval()
    with torch.no_grad():
        texts = [caption.long_text for caption in captions]
        embeddings = _encode_in_batches(model.encode_texts, texts)

    LOGGER.info('Built context database with %s entries at iteration %s',
                len(captions), model.iteration)
    return ContextDatabase(embeddings.float().numpy(), captions, model.iteration)


def sample_captions(records, size=DATABASE_SIZE, seed=0):
    """Random subset of caption pairs from caption records, in record order."""
    if not len(records):
        raise ValueError('No caption records to sample from')

    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(len(records), size=min(size, len(records)), replace=False))
    return [
        CaptionPair(records[index]['long'], records[index]['short'], records[index]['action'])
        for index in indices
    ]

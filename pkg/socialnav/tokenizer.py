# -*- coding: utf-8 -*-

"""Lowercase word-piece tokenizer over a fixed caption vocabulary."""

import logging
import re
import string

import torch

from socialnav.sim.captions import caption_vocabulary

LOGGER = logging.getLogger(__name__)

PAD_TOKEN = '[PAD]'
UNK_TOKEN = '[UNK]'
PAD_ID = 0
UNK_ID = 1
CONTINUATION = '##'

WORD_PATTERN = re.compile(r'[a-z0-9]+|[^\sa-z0-9]')


def default_vocabulary():
    """Caption words plus single characters so any word can be spelled out."""
    characters = list(string.ascii_lowercase + string.digits)
    pieces = set(caption_vocabulary())
    pieces.update(characters)
    pieces.update(CONTINUATION + character for character in characters)
    pieces.update(string.punctuation)

    return [PAD_TOKEN, UNK_TOKEN] + sorted(pieces)


class Tokenizer:
    """Split text into known word pieces.

    Words found in the vocabulary are kept whole. Other words are split
    greedily into the longest known prefix followed by ``##`` continuation
    pieces, and fall back to ``[UNK]`` when no split exists.

    Args:
        vocabulary (list):
            Ordered pieces. The first two entries must be ``[PAD]`` and ``[UNK]``.
            Defaults to ``default_vocabulary()``.
    """

    def __init__(self, vocabulary=None):
        vocabulary = list(vocabulary or default_vocabulary())
        if vocabulary[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError('Vocabulary must start with {} and {}'.format(PAD_TOKEN, UNK_TOKEN))

        if len(set(vocabulary)) != len(vocabulary):
            raise ValueError('Vocabulary contains duplicated pieces')

        self.vocabulary = vocabulary
        self.ids = {piece: index for index, piece in enumerate(vocabulary)}

    def __len__(self):
        return len(self.vocabulary)

    def _word_pieces(self, word):
        if word in self.ids:
            return [word]

        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            while end > start:
                piece = word[start:end] if not start else CONTINUATION + word[start:end]
                if piece in self.ids:
                    break

                end -= 1

            if end == start:
                return [UNK_TOKEN]

            pieces.append(piece)
            start = end

        return pieces

    def tokenize(self, text):
        pieces = []
        for word in WORD_PATTERN.findall(text.lower()):
            pieces.extend(self._word_pieces(word))

        return pieces

    def encode(self, text, max_len=None):
        """Token ids of ``text``, truncated to ``max_len``."""
        ids = [self.ids.get(piece, UNK_ID) for piece in self.tokenize(text)]
        if max_len is not None and len(ids) > max_len:
            LOGGER.debug('Truncating %s tokens to %s', len(ids), max_len)
            ids = ids[:max_len]

        return ids

    def decode(self, ids):
        words = []
        for index in ids:
            if index == PAD_ID:
                continue

            piece = self.vocabulary[index]
            if piece.startswith(CONTINUATION) and words:
                words[-1] += piece[len(CONTINUATION):]
            else:
                words.append(piece)

        return ' '.join(words)

    def pad_batch(self, texts, max_len):
        """Encode and right-pad ``texts``.

        Returns:
            tuple:
                ``(ids, padding_mask)`` tensors of shape ``(B, L)``; the mask is
                ``True`` on padding positions.

        Raises:
            ValueError:
                If any text produces no tokens.
        """
        if not len(texts):
            raise ValueError('Cannot tokenize an empty batch')

        encoded = [self.encode(text, max_len) for text in texts]
        empty = [index for index, ids in enumerate(encoded) if not ids]
        if empty:
            raise ValueError('Texts {} produce an empty token sequence'.format(empty))

        length = max(len(ids) for ids in encoded)
        batch = torch.full((len(encoded), length), PAD_ID, dtype=torch.long)
        for row, ids in enumerate(encoded):
            batch[row, :len(ids)] = torch.tensor(ids, dtype=torch.long)

        return batch, batch == PAD_ID

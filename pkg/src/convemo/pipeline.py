"""Glue: corpus -> tokenized corpus -> feature matrix.

These helpers keep the CLI thin and give tests one obvious way to run
the whole path.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .corpus import LABEL_TO_INDEX, Conversation
from .features import FeatureSpace, FeatureVector, vectorize, vectors_to_csr
from .lexicons import EmoLexicon, VadLexicon
from .preprocess import PreprocessConfig, TokenizedConversation, preprocess_conversation
from .providers import ZeroScoreProvider, score_block


def preprocess_corpus(conversations: list[Conversation],
                      config: PreprocessConfig | None = None) -> list[TokenizedConversation]:
    return [preprocess_conversation(conv, config) for conv in conversations]


def score_blocks(conversations: list[Conversation], provider=None) -> list[list[float]]:
    """One 9-value neural block per conversation (zeros without a provider)."""
    if provider is None:
        provider = ZeroScoreProvider()
    return [score_block(provider, conv) for conv in conversations]


def vectorize_corpus(tokenized: list[TokenizedConversation], space: FeatureSpace,
                     vad: VadLexicon, emo: EmoLexicon,
                     blocks: list[list[float]]) -> list[FeatureVector]:
    if len(blocks) != len(tokenized):
        raise ValueError(f"{len(blocks)} score blocks for {len(tokenized)} conversations")
    return [vectorize(tc, space, vad, emo, block)
            for tc, block in zip(tokenized, blocks)]


def corpus_matrix(tokenized: list[TokenizedConversation], space: FeatureSpace,
                  vad: VadLexicon, emo: EmoLexicon,
                  blocks: list[list[float]]) -> sp.csr_matrix:
    return vectors_to_csr(vectorize_corpus(tokenized, space, vad, emo, blocks),
                          space.dimension)


def label_array(conversations: list[Conversation]) -> np.ndarray:
    missing = [c.id for c in conversations if c.label is None]
    if missing:
        raise ValueError(f"{len(missing)} conversations without labels "
                         f"(first: {missing[0]!r})")
    return np.asarray([LABEL_TO_INDEX[c.label] for c in conversations], dtype=np.int64)

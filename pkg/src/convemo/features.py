"""Feature space construction and conversation vectorization.

Six feature families ("groups"), always laid out in the same order:

  word_ngram  sparse, per turn: term frequencies of word skip-grams
  char_ngram  sparse, per turn: term frequencies of character n-grams
  vad         dense, 5 per turn: affect statistics from the VAD lexicon
  emolex      dense, 10 per turn: emotion/sentiment word counts
  neural      dense, 3 per turn: sentiment/adult/offensive scores
  counts      dense, 9 per turn: surface counts from the raw turn text

Column order is fully deterministic: groups in the order above, turns
ascending within a group, names in lexicographic byte order within a
(group, turn) block.  Dense column names carry a numeric prefix so this
single ordering rule holds everywhere.  With the default configuration
the dense block is 15 + 30 + 9 + 27 = 81 columns wide, and
sparse + dense = total always holds.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError, DimensionMismatch
from .lexicons import EMOLEX_CATEGORIES, EmoLexicon, VadLexicon
from .preprocess import TokenizedConversation, tokenize
from .resources import default_emoji_ranges, default_emoticons

GROUP_WORD = "word_ngram"
GROUP_CHAR = "char_ngram"
GROUP_VAD = "vad"
GROUP_EMOLEX = "emolex"
GROUP_NEURAL = "neural"
GROUP_COUNTS = "counts"

GROUP_ORDER: tuple[str, ...] = (GROUP_WORD, GROUP_CHAR, GROUP_VAD,
                                GROUP_EMOLEX, GROUP_NEURAL, GROUP_COUNTS)
SPARSE_GROUPS: tuple[str, ...] = (GROUP_WORD, GROUP_CHAR)
TURNS: tuple[int, ...] = (1, 2, 3)

VAD_COLUMN_NAMES = (
    "1_mean_valence", "2_mean_arousal", "3_mean_dominance",
    "4_max_dominance", "5_arousal_at_max_dominance",
)
EMOLEX_COLUMN_NAMES = tuple(f"{i:02d}_{cat}" for i, cat in enumerate(EMOLEX_CATEGORIES, start=1))
NEURAL_COLUMN_NAMES = ("1_sentiment", "2_adult", "3_offensive")
COUNT_COLUMN_NAMES = (
    "1_question_marks", "2_exclamation_marks", "3_uppercase_letters",
    "4_words", "5_letters", "6_emoticons",
    "7_allcaps_words", "8_elongated_words", "9_punctuation_runs",
)
DENSE_NAMES: dict[str, tuple[str, ...]] = {
    GROUP_VAD: VAD_COLUMN_NAMES,
    GROUP_EMOLEX: EMOLEX_COLUMN_NAMES,
    GROUP_NEURAL: NEURAL_COLUMN_NAMES,
    GROUP_COUNTS: COUNT_COLUMN_NAMES,
}

# Neutral midpoint emitted for turns with no VAD lexicon hit.
VAD_NEUTRAL = 0.5

NEURAL_SCORE_LENGTH = 9

_ELONGATED_RE = re.compile(r"(.)\1\1", re.DOTALL)
_PUNCT_RUN_RE = re.compile(r"[?!.]{2,}")

SPACE_FORMAT = "convemo-feature-space"
SPACE_VERSION = 1


class EmptyCorpus(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class CorruptSpace(DataError):
    pass


@dataclass(frozen=True)
class NgramConfig:
    """Sparse n-gram extraction settings.

    ``word_orders`` defaults to {1,2,3}: unigrams are kept alongside the
    bi/tri-grams because single emotion-bearing words pull a lot of
    weight; set ``word_orders=(2, 3)`` for the stricter reading.  A gram
    enters the space only if it occurs in at least ``min_doc_freq``
    distinct conversations' corresponding turn.
    """

    word_orders: tuple[int, ...] = (1, 2, 3)
    word_skip: int = 1
    char_orders: tuple[int, ...] = (2, 3)
    min_doc_freq: int = 5

    def __post_init__(self):
        object.__setattr__(self, "word_orders", tuple(sorted(set(self.word_orders))))
        object.__setattr__(self, "char_orders", tuple(sorted(set(self.char_orders))))
        if not self.word_orders or min(self.word_orders) < 1:
            raise ValueError("word_orders must be non-empty with all n >= 1")
        if not self.char_orders or min(self.char_orders) < 1:
            raise ValueError("char_orders must be non-empty with all n >= 1")
        if self.word_skip < 0:
            raise ValueError("word_skip must be >= 0")
        if self.min_doc_freq < 1:
            raise ValueError("min_doc_freq must be >= 1")

    def to_dict(self) -> dict:
        return {
            "word_orders": list(self.word_orders),
            "word_skip": self.word_skip,
            "char_orders": list(self.char_orders),
            "min_doc_freq": self.min_doc_freq,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NgramConfig":
        return cls(word_orders=tuple(doc["word_orders"]), word_skip=int(doc["word_skip"]),
                   char_orders=tuple(doc["char_orders"]), min_doc_freq=int(doc["min_doc_freq"]))


def word_skipgrams(tokens, n: int, skip: int) -> Counter:
    """All ordered n-token combinations whose index gaps sum to <= skip.

    Gram strings are the tokens joined with '|'; multiplicities are
    counted.  skip=0 reduces to plain contiguous n-grams.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if skip < 0:
        raise ValueError("skip must be >= 0")
    grams: Counter = Counter()
    total = len(tokens)
    if total < n:
        return grams

    def extend(prev_index: int, picked: list[str], budget: int):
        depth = len(picked)
        if depth == n:
            grams["|".join(picked)] += 1
            return
        # next index may leave a gap of at most `budget` tokens
        for j in range(prev_index + 1, min(prev_index + budget + 2, total)):
            picked.append(tokens[j])
            extend(j, picked, budget - (j - prev_index - 1))
            picked.pop()

    for start in range(total - n + 1):
        extend(start, [tokens[start]], skip)
    return grams


def char_ngrams(text: str, n: int) -> Counter:
    """All contiguous length-n substrings (by unicode scalar), counted."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(text[i:i + n] for i in range(len(text) - n + 1))


@dataclass(frozen=True)
class Column:
    group: str
    turn: int
    name: str


class FeatureSpace:
    """Deterministic ordered registry of feature columns.

    Instances are immutable after construction and safe to share across
    threads.  ``drop`` derives the hold-one-out subspaces used by the
    ablation harness.
    """

    def __init__(self, config: NgramConfig,
                 sparse_names: dict[tuple[str, int], list[str]],
                 dropped_groups: frozenset[str] = frozenset(),
                 dropped_turns: frozenset[int] = frozenset()):
        self.config = config
        self.dropped_groups = frozenset(dropped_groups)
        self.dropped_turns = frozenset(dropped_turns)
        self._sparse_names = {
            (group, turn): tuple(sorted(sparse_names.get((group, turn), ())))
            for group in SPARSE_GROUPS for turn in TURNS
        }

        columns: list[Column] = []
        sparse_index: dict[tuple[str, int], dict[str, int]] = {}
        dense_offsets: dict[tuple[str, int], int] = {}
        for group in GROUP_ORDER:
            if group in self.dropped_groups:
                continue
            for turn in TURNS:
                if turn in self.dropped_turns:
                    continue
                if group in SPARSE_GROUPS:
                    index = {}
                    for name in self._sparse_names[(group, turn)]:
                        index[name] = len(columns)
                        columns.append(Column(group, turn, name))
                    sparse_index[(group, turn)] = index
                else:
                    dense_offsets[(group, turn)] = len(columns)
                    for name in DENSE_NAMES[group]:
                        columns.append(Column(group, turn, name))
        self.columns: tuple[Column, ...] = tuple(columns)
        self._sparse_index = sparse_index
        self._dense_offsets = dense_offsets

    @property
    def dimension(self) -> int:
        return len(self.columns)

    def sparse_column_count(self) -> int:
        return sum(len(v) for v in self._sparse_index.values())

    def dense_column_count(self) -> int:
        return self.dimension - self.sparse_column_count()

    def group_sizes(self) -> dict[str, int]:
        sizes = {group: 0 for group in GROUP_ORDER}
        for col in self.columns:
            sizes[col.group] += 1
        return sizes

    def turn_sizes(self) -> dict[int, int]:
        sizes = {turn: 0 for turn in TURNS}
        for col in self.columns:
            sizes[col.turn] += 1
        return sizes

    def sparse_index(self, group: str, turn: int) -> dict[str, int]:
        return self._sparse_index.get((group, turn), {})

    def dense_offset(self, group: str, turn: int) -> int | None:
        return self._dense_offsets.get((group, turn))

    def has_block(self, group: str, turn: int) -> bool:
        return group not in self.dropped_groups and turn not in self.dropped_turns

    def drop(self, groups=(), turns=()) -> "FeatureSpace":
        """A new space without the given groups/turns (masks accumulate)."""
        dropped_groups = self.dropped_groups | frozenset(groups)
        dropped_turns = self.dropped_turns | frozenset(turns)
        for group in dropped_groups:
            if group not in GROUP_ORDER:
                raise ValueError(f"unknown feature group {group!r}")
        for turn in dropped_turns:
            if turn not in TURNS:
                raise ValueError(f"unknown turn {turn!r}")
        kept_sparse = {
            key: list(names) for key, names in self._sparse_names.items()
            if key[0] not in dropped_groups and key[1] not in dropped_turns
        }
        return FeatureSpace(self.config, kept_sparse, dropped_groups, dropped_turns)

    def kept_indices(self, drop_groups=(), drop_turns=()) -> np.ndarray:
        """Column ids of this space that survive the given drop masks."""
        drop_groups = frozenset(drop_groups)
        drop_turns = frozenset(drop_turns)
        return np.array([i for i, col in enumerate(self.columns)
                         if col.group not in drop_groups and col.turn not in drop_turns],
                        dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "format": SPACE_FORMAT,
            "version": SPACE_VERSION,
            "config": self.config.to_dict(),
            "dropped_groups": sorted(self.dropped_groups),
            "dropped_turns": sorted(self.dropped_turns),
            "sparse": {
                group: {str(turn): list(self._sparse_names[(group, turn)]) for turn in TURNS}
                for group in SPARSE_GROUPS
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSpace":
        try:
            if doc.get("format") != SPACE_FORMAT:
                raise CorruptSpace(f"not a feature-space document: {doc.get('format')!r}")
            if doc.get("version") != SPACE_VERSION:
                raise UnsupportedVersion(f"feature-space version {doc.get('version')!r} "
                                         f"not supported (expected {SPACE_VERSION})")
            config = NgramConfig.from_dict(doc["config"])
            sparse = {
                (group, int(turn)): list(names)
                for group, by_turn in doc["sparse"].items()
                for turn, names in by_turn.items()
            }
            return cls(config, sparse,
                       frozenset(doc["dropped_groups"]),
                       frozenset(int(t) for t in doc["dropped_turns"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptSpace(f"malformed feature-space document: {exc}") from None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSpace":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptSpace(f"cannot parse {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise CorruptSpace(f"{path} does not contain a JSON object")
        return cls.from_dict(doc)


def _conversation_grams(tc: TokenizedConversation, config: NgramConfig,
                        turn: int) -> dict[str, Counter]:
    """Gram multiset per sparse group for one turn of one conversation."""
    tokens = tc.tokens[turn - 1]
    word_counts: Counter = Counter()
    for n in config.word_orders:
        word_counts.update(word_skipgrams(tokens, n, config.word_skip))
    char_counts: Counter = Counter()
    for n in config.char_orders:
        char_counts.update(char_ngrams(tc.lower_turns[turn - 1], n))
    return {GROUP_WORD: word_counts, GROUP_CHAR: char_counts}


def build_feature_space(corpus: list[TokenizedConversation],
                        config: NgramConfig | None = None) -> FeatureSpace:
    """Build the deterministic feature space for a corpus.

    A (group, turn)-scoped gram is admitted iff it occurs in at least
    ``min_doc_freq`` distinct conversations' corresponding turn.  The
    dense blocks are always present.
    """
    if not corpus:
        raise EmptyCorpus("cannot build a feature space from an empty corpus")
    if config is None:
        config = NgramConfig()
    doc_freq: dict[tuple[str, int], Counter] = {
        (group, turn): Counter() for group in SPARSE_GROUPS for turn in TURNS
    }
    for tc in corpus:
        for turn in TURNS:
            by_group = _conversation_grams(tc, config, turn)
            for group, counts in by_group.items():
                doc_freq[(group, turn)].update(counts.keys())
    sparse_names = {
        key: [gram for gram, df in counts.items() if df >= config.min_doc_freq]
        for key, counts in doc_freq.items()
    }
    return FeatureSpace(config, sparse_names)


def vad_features(tc: TokenizedConversation, vad: VadLexicon) -> list[float]:
    """15 dense values: per turn (mean V, mean A, mean D, max D, A at max D).

    Hits are token occurrences found in the lexicon (multiplicity
    counts).  A turn with no hits emits the neutral 0.5 for all five.
    """
    values: list[float] = []
    for turn_tokens in tc.tokens:
        hits = [vad.get(tok) for tok in turn_tokens]
        hits = [h for h in hits if h is not None]
        if not hits:
            values.extend([VAD_NEUTRAL] * 5)
            continue
        n = len(hits)
        mean_v = sum(h[0] for h in hits) / n
        mean_a = sum(h[1] for h in hits) / n
        mean_d = sum(h[2] for h in hits) / n
        best = max(hits, key=lambda h: h[2])
        values.extend([mean_v, mean_a, mean_d, best[2], best[1]])
    return values


def emolex_features(tc: TokenizedConversation, emo: EmoLexicon) -> list[float]:
    """30 dense values: per turn, counts for the 10 fixed categories.

    Token occurrences count with multiplicity; a token mapped to k
    categories increments k counters.
    """
    values: list[float] = []
    for turn_tokens in tc.tokens:
        counts = dict.fromkeys(EMOLEX_CATEGORIES, 0)
        for tok in turn_tokens:
            categories = emo.get(tok)
            if categories:
                for cat in categories:
                    counts[cat] += 1
        values.extend(float(counts[cat]) for cat in EMOLEX_CATEGORIES)
    return values


def _turn_counts(turn: str, emoticons: frozenset[str],
                 ranges: tuple[tuple[int, int], ...]) -> list[float]:
    words = turn.split()
    question = turn.count("?")
    exclamation = turn.count("!")
    uppercase = sum(1 for ch in turn if ch.isalpha() and ch.isupper())
    letters = sum(1 for ch in turn if ch.isalpha())
    emoji = sum(1 for ch in turn for lo, hi in ranges if lo <= ord(ch) <= hi)
    emoji += sum(1 for w in words if w in emoticons)
    allcaps = sum(1 for w in words if len(w) >= 2 and w.isupper())
    elongated = sum(1 for w in words if _ELONGATED_RE.search(w))
    punct_runs = len(_PUNCT_RUN_RE.findall(turn))
    return [float(question), float(exclamation), float(uppercase), float(len(words)),
            float(letters), float(emoji), float(allcaps), float(elongated),
            float(punct_runs)]


def count_features(conv, emoticons: frozenset[str] | None = None) -> list[float]:
    """27 dense values: 9 surface counts per raw turn.

    Per turn: '?' count, '!' count, uppercase letters, whitespace words,
    alphabetic characters, emoji/emoticon occurrences, all-caps words
    (length >= 2), elongated words (a run of >= 3 identical characters),
    and runs of >= 2 characters among ``?!.``.  Works on the raw text,
    never the lowercased tokens, because casing is signal here.
    """
    if emoticons is None:
        emoticons = default_emoticons()
    ranges = default_emoji_ranges()
    turns = conv.raw_turns if isinstance(conv, TokenizedConversation) else conv.turns
    values: list[float] = []
    for turn in turns:
        values.extend(_turn_counts(turn, emoticons, ranges))
    return values


@dataclass(frozen=True)
class FeatureVector:
    """Sparse row: strictly increasing indices with nonzero values."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    dimension: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        prev = -1
        for idx, val in zip(self.indices, self.values):
            if idx <= prev:
                raise ValueError("indices must be strictly increasing")
            if idx >= self.dimension:
                raise ValueError(f"index {idx} out of range for dimension {self.dimension}")
            if val == 0.0:
                raise ValueError("explicit zeros are not stored")
            prev = idx

    def to_text(self) -> str:
        """Debug form: space-separated ``index:value`` pairs."""
        return " ".join(f"{i}:{v:g}" for i, v in zip(self.indices, self.values))

    def get(self, index: int) -> float:
        pos = np.searchsorted(self.indices, index)
        if pos < len(self.indices) and self.indices[pos] == index:
            return self.values[pos]
        return 0.0


def vectorize(tc: TokenizedConversation, space: FeatureSpace, vad: VadLexicon,
              emo: EmoLexicon, neural_scores) -> FeatureVector:
    """Turn one preprocessed conversation into a sparse feature row.

    Sparse gram values are raw term frequencies of the grams present in
    the space; the dense blocks follow in fixed group order.
    ``neural_scores`` is the 9-value turn-major block (sentiment, adult,
    offensive per turn) from a score provider; zeros are fine.
    """
    if len(neural_scores) != NEURAL_SCORE_LENGTH:
        raise DimensionMismatch(NEURAL_SCORE_LENGTH, len(neural_scores), "neural score block")
    entries: dict[int, float] = {}

    for turn in TURNS:
        if turn in space.dropped_turns:
            continue
        by_group = None
        for group in SPARSE_GROUPS:
            if group in space.dropped_groups:
                continue
            if by_group is None:
                by_group = _conversation_grams(tc, space.config, turn)
            index = space.sparse_index(group, turn)
            for gram, count in by_group[group].items():
                col = index.get(gram)
                if col is not None:
                    entries[col] = entries.get(col, 0.0) + float(count)

    def emit(group: str, block: list[float], per_turn: int):
        for turn in TURNS:
            offset = space.dense_offset(group, turn)
            if offset is None:
                continue
            for j in range(per_turn):
                value = block[(turn - 1) * per_turn + j]
                if value != 0.0:
                    entries[offset + j] = value

    if GROUP_VAD not in space.dropped_groups:
        emit(GROUP_VAD, vad_features(tc, vad), 5)
    if GROUP_EMOLEX not in space.dropped_groups:
        emit(GROUP_EMOLEX, emolex_features(tc, emo), 10)
    if GROUP_NEURAL not in space.dropped_groups:
        emit(GROUP_NEURAL, [float(s) for s in neural_scores], 3)
    if GROUP_COUNTS not in space.dropped_groups:
        emit(GROUP_COUNTS, count_features(tc), 9)

    indices = tuple(sorted(entries))
    return FeatureVector(indices=indices,
                         values=tuple(entries[i] for i in indices),
                         dimension=space.dimension)


def vectors_to_csr(vectors: list[FeatureVector], dimension: int | None = None) -> sp.csr_matrix:
    """Stack feature vectors into a CSR matrix for training."""
    if dimension is None:
        if not vectors:
            raise ValueError("need a dimension for an empty vector list")
        dimension = vectors[0].dimension
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        if vec.dimension != dimension:
            raise DimensionMismatch(dimension, vec.dimension, "feature vector")
        indices.extend(vec.indices)
        data.extend(vec.values)
        indptr.append(len(indices))
    return sp.csr_matrix((np.asarray(data, dtype=np.float64),
                          np.asarray(indices, dtype=np.int64),
                          np.asarray(indptr, dtype=np.int64)),
                         shape=(len(vectors), dimension))

"""Affect lexicon loading: word -> VAD triples and word -> emotion sets.

Both lexicons are read from UTF-8 TSV streams.  Multi-word entries (they
exist in real VAD data) are skipped with a counted warning because the
feature extractors operate token-wise.  Lookups are exact lowercase
match; an absent word is reported as absent, never defaulted.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable
from pathlib import Path

from .errors import DataError

logger = logging.getLogger(__name__)

# Fixed category order: eight emotions, then the two sentiments.
EMOLEX_CATEGORIES: tuple[str, ...] = (
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust",
    "negative", "positive",
)


class MalformedRow(DataError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class OutOfRange(DataError):
    def __init__(self, line_no: int, value: float):
        self.line_no = line_no
        super().__init__(f"line {line_no}: value {value} outside [0, 1]")


class DuplicateWord(DataError):
    def __init__(self, word: str):
        self.word = word
        super().__init__(f"duplicate lexicon word {word!r}")


class UnknownCategory(DataError):
    def __init__(self, line_no: int, name: str):
        self.name = name
        super().__init__(f"line {line_no}: unknown category {name!r}")


class VadLexicon:
    """word -> (valence, arousal, dominance), each in [0, 1]."""

    def __init__(self, entries: dict[str, tuple[float, float, float]], skipped_multiword: int = 0):
        self._entries = entries
        self.skipped_multiword = skipped_multiword

    def get(self, word: str) -> tuple[float, float, float] | None:
        return self._entries.get(word)

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __len__(self) -> int:
        return len(self._entries)


class EmoLexicon:
    """word -> subset of the ten EMOLEX_CATEGORIES."""

    def __init__(self, entries: dict[str, frozenset[str]], skipped_multiword: int = 0):
        self._entries = entries
        self.skipped_multiword = skipped_multiword

    def get(self, word: str) -> frozenset[str] | None:
        return self._entries.get(word)

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __len__(self) -> int:
        return len(self._entries)


def _strip_line_end(line: str) -> str:
    if line.endswith("\n"):
        line = line[:-1]
    if line.endswith("\r"):
        line = line[:-1]
    return line


def load_vad(source: Iterable[str]) -> VadLexicon:
    """Load ``word<TAB>V<TAB>A<TAB>D`` rows; optional header.

    Values must parse as floats in [0, 1]; duplicate words are hard
    errors.  Keys are lowercased.
    """
    entries: dict[str, tuple[float, float, float]] = {}
    skipped = 0
    for line_no, raw_line in enumerate(source, start=1):
        line = _strip_line_end(raw_line)
        if line == "":
            continue
        fields = line.split("\t")
        if line_no == 1 and fields and fields[0].strip().lower() in ("word", "term"):
            continue
        if len(fields) != 4:
            raise MalformedRow(line_no, f"expected 4 columns, got {len(fields)}")
        word = fields[0].strip().lower()
        if not word:
            raise MalformedRow(line_no, "empty word")
        if " " in word:
            skipped += 1
            continue
        try:
            triple = tuple(float(f) for f in fields[1:4])
        except ValueError:
            raise MalformedRow(line_no, f"non-numeric value in {fields[1:4]}") from None
        for value in triple:
            if not 0.0 <= value <= 1.0:
                raise OutOfRange(line_no, value)
        if word in entries:
            raise DuplicateWord(word)
        entries[word] = triple
    if skipped:
        logger.warning("skipped %d multi-word VAD entries", skipped)
    return VadLexicon(entries, skipped_multiword=skipped)


def load_emolex(source: Iterable[str]) -> EmoLexicon:
    """Load long-format rows ``word<TAB>category<TAB>flag`` (flag 0/1).

    A word gains a category iff its flag is 1; rows only add, so loading
    is order-insensitive.  Unknown category names are rejected.
    """
    valid = set(EMOLEX_CATEGORIES)
    entries: dict[str, set[str]] = {}
    skipped = 0
    for line_no, raw_line in enumerate(source, start=1):
        line = _strip_line_end(raw_line)
        if line == "":
            continue
        fields = line.split("\t")
        if line_no == 1 and fields and fields[0].strip().lower() in ("word", "term"):
            continue
        if len(fields) != 3:
            raise MalformedRow(line_no, f"expected 3 columns, got {len(fields)}")
        word = fields[0].strip().lower()
        if not word:
            raise MalformedRow(line_no, "empty word")
        category = fields[1].strip().lower()
        if category not in valid:
            raise UnknownCategory(line_no, fields[1])
        flag = fields[2].strip()
        if flag not in ("0", "1"):
            raise MalformedRow(line_no, f"flag must be 0 or 1, got {flag!r}")
        if " " in word:
            skipped += 1
            continue
        if flag == "1":
            entries.setdefault(word, set()).add(category)
    if skipped:
        logger.warning("skipped %d multi-word EmoLex entries", skipped)
    return EmoLexicon({w: frozenset(c) for w, c in entries.items()}, skipped_multiword=skipped)


def read_vad(path: str | Path) -> VadLexicon:
    with open(path, encoding="utf-8") as fh:
        return load_vad(fh)


def read_emolex(path: str | Path) -> EmoLexicon:
    with open(path, encoding="utf-8") as fh:
        return load_emolex(fh)


def empty_vad() -> VadLexicon:
    return VadLexicon({})


def empty_emolex() -> EmoLexicon:
    return EmoLexicon({})

"""The 3-turn conversation dataset format and its summary statistics.

Input files are UTF-8 TSV, one conversation per line::

    id <TAB> turn1 <TAB> turn2 <TAB> turn3 [<TAB> label]

An optional header row is recognised by a first cell equal to ``id``
(case-insensitive).  Labels are one of ``happy``, ``sad``, ``angry``,
``others`` (case-insensitive); anything else is a hard error so the
4-class confusion matrix downstream stays total.
"""
from __future__ import annotations

import enum
from collections.abc import Callable, Iterable
from dataclasses import dataclass

from . import preprocess
from .errors import DataError, EmptyDataset


class Label(enum.Enum):
    HAPPY = "happy"
    SAD = "sad"
    ANGRY = "angry"
    OTHERS = "others"


CLASS_ORDER: tuple[Label, ...] = (Label.HAPPY, Label.SAD, Label.ANGRY, Label.OTHERS)
EMOTION_CLASSES: tuple[Label, ...] = CLASS_ORDER[:3]
LABEL_TO_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}

_LABEL_BY_NAME = {label.value: label for label in CLASS_ORDER}


def parse_label(text: str) -> Label:
    label = _LABEL_BY_NAME.get(text.strip().lower())
    if label is None:
        raise UnknownLabel(0, text)
    return label


class WrongColumnCount(DataError):
    def __init__(self, line_no: int, got: int, expected: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: expected {expected} tab-separated columns, got {got}")


class UnknownLabel(DataError):
    def __init__(self, line_no: int, text: str):
        self.line_no = line_no
        self.text = text
        super().__init__(f"line {line_no}: unknown label {text!r} "
                         f"(expected one of happy/sad/angry/others)")


class DuplicateId(DataError):
    def __init__(self, conv_id: str):
        self.conv_id = conv_id
        super().__init__(f"duplicate conversation id {conv_id!r}")


@dataclass(frozen=True)
class Conversation:
    """One 3-turn conversation; turns 1 and 3 are the first speaker."""

    id: str
    turns: tuple[str, str, str]
    label: Label | None = None

    def __post_init__(self):
        if len(self.turns) != 3:
            raise ValueError(f"conversation {self.id!r} has {len(self.turns)} turns, need 3")


def _strip_line_end(line: str) -> str:
    if line.endswith("\n"):
        line = line[:-1]
    if line.endswith("\r"):
        line = line[:-1]
    return line


def parse_dataset(source: Iterable[str], has_labels: bool) -> list[Conversation]:
    """Parse a line stream into conversations, preserving turn text exactly.

    Fields are split on TAB only; no trimming is applied to turn text.
    Blank lines (e.g. a trailing newline) are skipped.
    """
    expected = 5 if has_labels else 4
    conversations: list[Conversation] = []
    seen_ids: set[str] = set()
    for line_no, raw_line in enumerate(source, start=1):
        line = _strip_line_end(raw_line)
        if line == "":
            continue
        fields = line.split("\t")
        if line_no == 1 and fields and fields[0].strip().lower() == "id":
            continue
        if len(fields) != expected:
            raise WrongColumnCount(line_no, len(fields), expected)
        label = None
        if has_labels:
            try:
                label = parse_label(fields[4])
            except UnknownLabel:
                raise UnknownLabel(line_no, fields[4]) from None
        conv_id = fields[0]
        if conv_id in seen_ids:
            raise DuplicateId(conv_id)
        seen_ids.add(conv_id)
        conversations.append(Conversation(id=conv_id, turns=(fields[1], fields[2], fields[3]),
                                          label=label))
    return conversations


def read_dataset(path, has_labels: bool) -> list[Conversation]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_dataset(fh, has_labels)


def write_dataset(path, conversations: list[Conversation], header: bool = True) -> None:
    """Serialize conversations back to the TSV format (canonical header)."""
    labelled = all(c.label is not None for c in conversations)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            cols = ["id", "turn1", "turn2", "turn3"] + (["label"] if labelled else [])
            fh.write("\t".join(cols) + "\n")
        for conv in conversations:
            fields = [conv.id, *conv.turns]
            if labelled:
                fields.append(conv.label.value)
            fh.write("\t".join(fields) + "\n")


@dataclass(frozen=True)
class DatasetStats:
    """Corpus-level summary; all percentages are in [0, 100].

    ``class_pct`` is present only when every conversation carries a
    label.  ``oov_pct`` is per-token (not per-type) and compares
    lowercased tokens against the supplied vocabulary.
    """

    example_count: int
    emoji_pct: float
    oov_pct: float
    avg_length: float
    class_pct: dict[Label, float] | None

    def to_dict(self) -> dict:
        doc = {
            "format": "convemo-stats",
            "version": 1,
            "examples": self.example_count,
            "emoji_pct": self.emoji_pct,
            "oov_pct": self.oov_pct,
            "avg_length": self.avg_length,
            "class_pct": None,
        }
        if self.class_pct is not None:
            doc["class_pct"] = {label.value: pct for label, pct in self.class_pct.items()}
        return doc


def dataset_stats(conversations: list[Conversation], vocab: set[str],
                  emoji_detector: Callable[[str], bool] | None = None) -> DatasetStats:
    """Compute Table-1-style statistics over a dataset.

    Tokenization reuses :func:`convemo.preprocess.tokenize` so the
    numbers stay consistent with the feature pipeline.  The default
    emoji detector flags listed emoticons and emoji codepoints.
    """
    if not conversations:
        raise EmptyDataset("cannot compute statistics of an empty dataset")
    if emoji_detector is None:
        emoji_detector = preprocess.is_emoji_token

    total_tokens = 0
    oov_tokens = 0
    emoji_convs = 0
    for conv in conversations:
        has_emoji = False
        for turn in conv.turns:
            for token in preprocess.tokenize(turn):
                total_tokens += 1
                if token.lower() not in vocab:
                    oov_tokens += 1
                if not has_emoji and emoji_detector(token):
                    has_emoji = True
        if has_emoji:
            emoji_convs += 1

    n = len(conversations)
    class_pct = None
    if all(c.label is not None for c in conversations):
        counts = {label: 0 for label in CLASS_ORDER}
        for conv in conversations:
            counts[conv.label] += 1
        class_pct = {label: 100.0 * counts[label] / n for label in CLASS_ORDER}

    return DatasetStats(
        example_count=n,
        emoji_pct=100.0 * emoji_convs / n,
        oov_pct=(100.0 * oov_tokens / total_tokens) if total_tokens else 0.0,
        avg_length=total_tokens / n,
        class_pct=class_pct,
    )

"""Tokenization and the optional chat-text normalizations.

The default pipeline is deliberately minimal: lowercase the tokens and
nothing else.  Elongation collapse, slang expansion and the aggressive
strip-normalize step (diacritics/numbers/stop-words/question marks) are
all opt-in flags on :class:`PreprocessConfig`.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

from .resources import default_emoji_ranges, default_emoticons

# Apostrophes are word-internal: "I'm" stays one token.
_WORD_INTERNAL = {"'", "’"}

_ELONGATION_RE = re.compile(r"(.)\1{2,}", re.DOTALL)
_QUESTION_RUN_RE = re.compile(r"\?+\Z")


def _is_splitting_punct(ch: str) -> bool:
    if ch in _WORD_INTERNAL:
        return False
    cat = unicodedata.category(ch)
    return cat.startswith("P") or cat.startswith("S")


def tokenize(text: str, emoticons: frozenset[str] | None = None) -> list[str]:
    """Split ``text`` into tokens, keeping case.

    Whitespace separates tokens; within a whitespace-delimited chunk,
    maximal runs of punctuation/symbol characters are split off as their
    own tokens ("happy!!" -> "happy", "!!").  Chunks that appear verbatim
    in the emoticon list are kept intact (":D" survives).  Lowercasing is
    a separate step so downstream count features can still see case.
    """
    if emoticons is None:
        emoticons = default_emoticons()
    tokens: list[str] = []
    for chunk in text.split():
        if chunk in emoticons:
            tokens.append(chunk)
            continue
        start = 0
        mode = _is_splitting_punct(chunk[0])
        for i in range(1, len(chunk)):
            m = _is_splitting_punct(chunk[i])
            if m != mode:
                tokens.append(chunk[start:i])
                start, mode = i, m
        tokens.append(chunk[start:])
    return tokens


def collapse_elongation(token: str) -> str:
    """Shorten every run of >= 3 identical characters to exactly 2.

    "soooo" -> "soo"; runs of 2 stay, so "heelloo" is untouched and the
    doubled forms keep carrying more weight than the plain ones.
    Idempotent.
    """
    return _ELONGATION_RE.sub(r"\1\1", token)


def expand_slang(tokens: list[str], table: dict[str, tuple[str, ...]]) -> list[str]:
    """Replace table entries by their expansion, one left-to-right pass.

    Expansion output is never re-expanded.  Tokens are expected to be
    lowercase already (table keys are).
    """
    out: list[str] = []
    for token in tokens:
        expansion = table.get(token)
        if expansion is None:
            out.append(token)
        else:
            out.extend(expansion)
    return out


def strip_normalize(tokens: list[str], stopwords: frozenset[str]) -> list[str]:
    """Remove diacritics, pure-number tokens, stop-words and '?' tokens.

    Diacritics go via NFKD decomposition + combining-mark deletion, so
    "café" -> "cafe".  Tokens consisting solely of question marks are
    dropped.
    """
    out: list[str] = []
    for token in tokens:
        decomposed = unicodedata.normalize("NFKD", token)
        stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
        if not stripped:
            continue
        if stripped.isdigit():
            continue
        if stripped in stopwords:
            continue
        if _QUESTION_RUN_RE.fullmatch(stripped):
            continue
        out.append(stripped)
    return out


@dataclass(frozen=True)
class PreprocessConfig:
    """Which normalizations to run on top of lowercase + tokenize.

    All flags default to off, which reproduces the plain
    lowercase-then-tokenize pipeline.
    """

    collapse_elongation: bool = False
    expand_slang: bool = False
    strip_normalize: bool = False
    slang_table: dict[str, tuple[str, ...]] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()

    def __post_init__(self):
        for key in self.slang_table:
            if key != key.lower() or len(key.split()) != 1:
                raise ValueError(f"slang table keys must be lowercase single tokens: {key!r}")

    def to_dict(self) -> dict:
        return {
            "collapse_elongation": self.collapse_elongation,
            "expand_slang": self.expand_slang,
            "strip_normalize": self.strip_normalize,
            "slang_table": {k: " ".join(v) for k, v in sorted(self.slang_table.items())},
            "stopwords": sorted(self.stopwords),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessConfig":
        return cls(
            collapse_elongation=bool(doc["collapse_elongation"]),
            expand_slang=bool(doc["expand_slang"]),
            strip_normalize=bool(doc["strip_normalize"]),
            slang_table={k: tuple(v.split()) for k, v in doc["slang_table"].items()},
            stopwords=frozenset(doc["stopwords"]),
        )


@dataclass(frozen=True)
class TokenizedConversation:
    """A conversation plus its per-turn token lists.

    ``raw_turns`` keep the original text (count features need case and
    punctuation), ``lower_turns`` feed character n-grams, ``tokens`` feed
    everything token-based.
    """

    id: str
    raw_turns: tuple[str, str, str]
    lower_turns: tuple[str, str, str]
    tokens: tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]


def preprocess_conversation(conv, config: PreprocessConfig | None = None,
                            emoticons: frozenset[str] | None = None) -> TokenizedConversation:
    """Tokenize one conversation under ``config``.

    ``conv`` needs ``id`` and ``turns`` attributes (see corpus module).
    With all flags off the token lists are exactly
    ``[t.lower() for t in tokenize(turn)]``.
    """
    if config is None:
        config = PreprocessConfig()
    raw = tuple(conv.turns)
    lower = tuple(t.lower() for t in raw)
    token_lists = []
    for turn in raw:
        toks = [t.lower() for t in tokenize(turn, emoticons)]
        if config.collapse_elongation:
            toks = [collapse_elongation(t) for t in toks]
        if config.expand_slang:
            toks = expand_slang(toks, config.slang_table)
        if config.strip_normalize:
            toks = strip_normalize(toks, config.stopwords)
        token_lists.append(tuple(toks))
    return TokenizedConversation(id=conv.id, raw_turns=raw, lower_turns=lower,
                                 tokens=tuple(token_lists))


def is_emoji_token(token: str, emoticons: frozenset[str] | None = None,
                   ranges: tuple[tuple[int, int], ...] | None = None) -> bool:
    """True when ``token`` is a listed emoticon or contains an emoji codepoint."""
    if emoticons is None:
        emoticons = default_emoticons()
    if ranges is None:
        ranges = default_emoji_ranges()
    if token in emoticons:
        return True
    for ch in token:
        cp = ord(ch)
        for lo, hi in ranges:
            if lo <= cp <= hi:
                return True
    return False

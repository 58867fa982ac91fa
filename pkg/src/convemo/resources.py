"""Loaders for the small data files bundled with the package.

All of these are plain-text and auditable: the emoticon list, the emoji
codepoint ranges, a default slang table and a default stop-word list.
External files in the same formats can be supplied instead of the
bundled ones; see the loaders below for the exact formats.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path


def _bundled_lines(name: str) -> list[str]:
    text = resources.files("convemo").joinpath("data", name).read_text(encoding="utf-8")
    return text.splitlines()


def _strip_comments(lines) -> list[str]:
    out = []
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@lru_cache(maxsize=1)
def default_emoticons() -> frozenset[str]:
    """Emoticon list: one emoticon per line, '#' comments allowed."""
    return frozenset(_strip_comments(_bundled_lines("emoticons.txt")))


@lru_cache(maxsize=1)
def default_emoji_ranges() -> tuple[tuple[int, int], ...]:
    """Inclusive codepoint ranges, one ``START END`` hex pair per line."""
    ranges = []
    for line in _strip_comments(_bundled_lines("emoji_blocks.txt")):
        lo, hi = line.split()
        ranges.append((int(lo, 16), int(hi, 16)))
    return tuple(ranges)


def load_slang_table(path: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    """Slang table: TSV rows ``token<TAB>expansion words``.

    Keys are lowercase single tokens, values the space-separated
    expansion.  ``None`` loads the bundled default table.
    """
    if path is None:
        lines = _bundled_lines("slang.tsv")
    else:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    table: dict[str, tuple[str, ...]] = {}
    for line in lines:
        if not line.strip() or line.startswith("#"):
            continue
        token, _, expansion = line.partition("\t")
        table[token.strip().lower()] = tuple(expansion.split())
    return table


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stop-word file: one token per line, '#' comments allowed."""
    if path is None:
        lines = _bundled_lines("stopwords.txt")
    else:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(_strip_comments(lines))


def load_emoticons(path: str | Path | None = None) -> frozenset[str]:
    """Emoticon file in the same format as the bundled one."""
    if path is None:
        return default_emoticons()
    return frozenset(_strip_comments(Path(path).read_text(encoding="utf-8").splitlines()))

"""Pluggable sources for the 9 per-conversation "neural" score columns.

Every provider answers ``score_turn(conversation_id, turn_index, text)``
with a :class:`TurnScores` whose three values are in [0, 1]; a provider
failure raises, it never silently defaults.  Providers are safe to share
across threads.

Sources:
  * :class:`FileScoreProvider` replays precomputed scores from a TSV
    keyed by (conversation id, 1-based turn index).
  * :class:`HttpScoreProvider` POSTs ``{"text": ...}`` to an endpoint
    answering ``{"sentiment": x, "adult": y, "offensive": z}``, with an
    on-disk cache keyed by the text's SHA-256 and bounded retries.
  * :class:`StubScoreProvider` is a deterministic word-list double for
    tests and offline runs.
  * :class:`ZeroScoreProvider` emits zeros when no source is configured.
"""
from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import DataError
from .preprocess import tokenize


class MalformedRow(DataError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class MissingScore(DataError):
    def __init__(self, conv_id: str, turn_index: int):
        self.conv_id = conv_id
        self.turn_index = turn_index
        super().__init__(f"no score for conversation {conv_id!r} turn {turn_index}")


class Timeout(DataError):
    pass


class BadStatus(DataError):
    def __init__(self, code: int):
        self.code = code
        super().__init__(f"score endpoint answered HTTP {code}")


class MalformedResponse(DataError):
    pass


@dataclass(frozen=True)
class TurnScores:
    """Sentiment (1 = positive), adult and offensive scores, all in [0, 1]."""

    sentiment: float
    adult: float
    offensive: float

    def __post_init__(self):
        for name in ("sentiment", "adult", "offensive"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)
                    and 0.0 <= value <= 1.0):
                raise ValueError(f"{name} score {value!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.sentiment, self.adult, self.offensive)


class ZeroScoreProvider:
    """Scores everything as (0, 0, 0); the no-source default."""

    def score_turn(self, conv_id: str, turn_index: int, text: str) -> TurnScores:
        return TurnScores(0.0, 0.0, 0.0)


class StubScoreProvider:
    """Word-list scorer: deterministic, lexicon-style.

    sentiment = (1 + (pos - neg) / max(1, pos + neg)) / 2 over lowercase
    token hits, offensive = min(1, hits / 3), adult = 0.
    """

    def __init__(self, pos_words: Iterable[str], neg_words: Iterable[str],
                 offensive_words: Iterable[str]):
        self.pos_words = frozenset(pos_words)
        self.neg_words = frozenset(neg_words)
        self.offensive_words = frozenset(offensive_words)

    def score_turn(self, conv_id: str, turn_index: int, text: str) -> TurnScores:
        tokens = [t.lower() for t in tokenize(text)]
        pos = sum(1 for t in tokens if t in self.pos_words)
        neg = sum(1 for t in tokens if t in self.neg_words)
        bad = sum(1 for t in tokens if t in self.offensive_words)
        sentiment = (1.0 + (pos - neg) / max(1, pos + neg)) / 2.0
        return TurnScores(sentiment, 0.0, min(1.0, bad / 3.0))


class FileScoreProvider:
    """Replay of a score TSV: ``conversation_id  turn_index  sentiment  adult  offensive``.

    Turn indices are 1-based.  Missing keys raise :class:`MissingScore`;
    malformed or duplicate rows raise :class:`MalformedRow`.
    """

    def __init__(self, source: Iterable[str]):
        self._scores: dict[tuple[str, int], TurnScores] = {}
        for line_no, raw_line in enumerate(source, start=1):
            line = raw_line.rstrip("\n").rstrip("\r")
            if line == "" or line.startswith("#"):
                continue
            fields = line.split("\t")
            if line_no == 1 and fields[0].strip().lower() == "conversation_id":
                continue
            if len(fields) != 5:
                raise MalformedRow(line_no, f"expected 5 columns, got {len(fields)}")
            conv_id = fields[0]
            try:
                turn_index = int(fields[1])
                values = [float(f) for f in fields[2:5]]
            except ValueError:
                raise MalformedRow(line_no, f"non-numeric field in {fields[1:5]}") from None
            if turn_index not in (1, 2, 3):
                raise MalformedRow(line_no, f"turn index must be 1..3, got {turn_index}")
            for value in values:
                if not 0.0 <= value <= 1.0:
                    raise MalformedRow(line_no, f"score {value} outside [0, 1]")
            key = (conv_id, turn_index)
            if key in self._scores:
                raise MalformedRow(line_no, f"duplicate key {key}")
            self._scores[key] = TurnScores(*values)

    @classmethod
    def from_path(cls, path: str | Path) -> "FileScoreProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(fh)

    def score_turn(self, conv_id: str, turn_index: int, text: str) -> TurnScores:
        scores = self._scores.get((conv_id, turn_index))
        if scores is None:
            raise MissingScore(conv_id, turn_index)
        return scores


class HttpScoreProvider:
    """Scores text via an HTTP endpoint, with caching, retries and
    in-flight deduplication.

    Cache layout: one ``<sha256-of-text>.json`` file per distinct text
    under ``cache_dir``, holding the three scores.  Cache hits never
    contact the endpoint, so exporting and replaying a run is exact.
    Transient failures (timeouts, connection errors, 5xx) are retried at
    most ``max_retries`` times with exponential backoff.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0,
                 cache_dir: str | Path | None = None, max_retries: int = 2,
                 backoff: float = 0.5, session: requests.Session | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = session or requests.Session()
        self._lock = threading.Lock()
        self._memory: dict[str, TurnScores] = {}
        self._in_flight: dict[str, threading.Event] = {}

    @staticmethod
    def text_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _read_cache(self, key: str) -> TurnScores | None:
        cached = self._memory.get(key)
        if cached is not None:
            return cached
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        scores = TurnScores(doc["sentiment"], doc["adult"], doc["offensive"])
        self._memory[key] = scores
        return scores

    def _write_cache(self, key: str, scores: TurnScores) -> None:
        self._memory[key] = scores
        path = self._cache_path(key)
        if path is None:
            return
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"sentiment": scores.sentiment, "adult": scores.adult,
                                   "offensive": scores.offensive}), encoding="utf-8")
        tmp.replace(path)

    def _fetch(self, text: str) -> TurnScores:
        attempts = self.max_retries + 1
        last_exc: DataError | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                response = self._session.post(self.endpoint, json={"text": text},
                                              timeout=self.timeout)
            except requests.Timeout:
                last_exc = Timeout(f"score endpoint timed out after {self.timeout}s")
                continue
            except requests.ConnectionError as exc:
                last_exc = Timeout(f"cannot reach score endpoint: {exc}")
                continue
            if 500 <= response.status_code < 600:
                last_exc = BadStatus(response.status_code)
                continue
            if response.status_code != 200:
                raise BadStatus(response.status_code)
            try:
                doc = response.json()
                scores = TurnScores(float(doc["sentiment"]), float(doc["adult"]),
                                    float(doc["offensive"]))
            except (ValueError, TypeError, KeyError) as exc:
                raise MalformedResponse(f"bad score payload: {exc}") from None
            return scores
        raise last_exc

    def score_turn(self, conv_id: str, turn_index: int, text: str) -> TurnScores:
        key = self.text_key(text)
        while True:
            with self._lock:
                cached = self._read_cache(key)
                if cached is not None:
                    return cached
                pending = self._in_flight.get(key)
                if pending is None:
                    self._in_flight[key] = threading.Event()
                    break
            pending.wait()
        try:
            scores = self._fetch(text)
            with self._lock:
                self._write_cache(key, scores)
            return scores
        finally:
            with self._lock:
                self._in_flight.pop(key).set()


def score_block(provider, conv) -> list[float]:
    """The 9-value turn-major block (sentiment, adult, offensive per turn)."""
    block: list[float] = []
    for turn_index, text in enumerate(conv.turns, start=1):
        scores = provider.score_turn(conv.id, turn_index, text)
        block.extend(scores.as_tuple())
    return block


def export_scores(provider, conversations, path: str | Path) -> None:
    """Score a corpus and write the replayable TSV for FileScoreProvider."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("conversation_id\tturn_index\tsentiment\tadult\toffensive\n")
        for conv in conversations:
            for turn_index, text in enumerate(conv.turns, start=1):
                s = provider.score_turn(conv.id, turn_index, text)
                fh.write(f"{conv.id}\t{turn_index}\t{s.sentiment!r}\t{s.adult!r}\t{s.offensive!r}\n")

"""Corpus ingestion, ratio mixing, and instruction-record serialization.

Input corpora are JSON-lines. Image rows carry ``{"id", "image",
"caption"}``; clip rows carry ``{"id", "video", "label", "caption",
"duration_s", "fps"}``. Output instruction records are JSON-lines with a
fixed key order (id, media, task, question, answer, meta) and no float
re-formatting, so equal inputs produce byte-identical files and builds can
be regression-tested by hash.

Captions normally come from files. ``fetch_clip_captions`` is the optional
remote path: it asks an HTTP captioning service to describe clips given
their action labels, retrying transient failures and reporting per-clip
failures without aborting the run.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Iterator, Sequence

import requests

from .errors import (
    CaptionProtocolError,
    ConfigError,
    CorpusFormatError,
    StreamExhaustedError,
)
from .position_token import TimeRepresentation

if TYPE_CHECKING:  # only for annotations; avoids an import cycle
    from .clip_sequence import CaptionedClip
    from .image_sequence import CaptionedImage

RECORD_KEY_ORDER = ("id", "media", "task", "question", "answer", "meta")


def derive_record_seed(seed: int, ordinal: int, namespace: str = "record") -> int:
    """Stable per-record RNG seed, independent of process hash randomization.

    Each record of a run draws from its own generator seeded by
    (namespace, run seed, ordinal), which is what makes record generation
    pure per ordinal and parallel fan-out byte-identical to sequential.
    """
    digest = hashlib.sha256(f"{namespace}:{seed}:{ordinal}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class InstructionRecord:
    """One question/answer training instance plus its provenance metadata."""

    id: str
    media: tuple[str, ...]
    task: str
    question: str
    answer: str
    meta: dict

    def __post_init__(self) -> None:
        if not self.question or not self.answer:
            raise CorpusFormatError(
                f"record {self.id!r} has an empty question or answer"
            )

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "media": list(self.media),
            "task": self.task,
            "question": self.question,
            "answer": self.answer,
            "meta": self.meta,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "InstructionRecord":
        missing = [k for k in RECORD_KEY_ORDER if k not in obj]
        if missing:
            raise CorpusFormatError(f"record missing fields: {', '.join(missing)}")
        return cls(
            id=obj["id"],
            media=tuple(obj["media"]),
            task=obj["task"],
            question=obj["question"],
            answer=obj["answer"],
            meta=obj["meta"],
        )


@dataclass(frozen=True)
class CorpusConfig:
    """Mixing plan: which sources feed the output and in what proportion."""

    sources: dict[str, str]
    counts: dict[str, int]
    ratios: dict[str, float]
    seed: int
    time_repr: TimeRepresentation
    output_path: str | None = None

    def __post_init__(self) -> None:
        if any(n < 0 for n in self.counts.values()):
            raise ConfigError(f"counts must be >= 0, got {self.counts}")
        validate_ratios(self.ratios)


def validate_ratios(ratios: dict[str, float]) -> None:
    if not ratios:
        raise ConfigError("at least one mix ratio is required")
    if any(r < 0 for r in ratios.values()):
        raise ConfigError(f"ratios must be >= 0, got {ratios}")
    total = sum(ratios.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1 within 1e-9, got {total!r}")


def iter_jsonl_with_lines(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for every non-blank line of a JSONL file."""
    p = Path(path)
    with p.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{p}: line {lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{p}: line {lineno}: expected an object")
            yield lineno, obj


def _require(obj: dict, lineno: int, field_name: str, path: Path) -> object:
    if field_name not in obj:
        raise CorpusFormatError(f"{path}: line {lineno}: missing field {field_name}")
    return obj[field_name]


def _require_text(obj: dict, lineno: int, field_name: str, path: Path) -> str:
    value = _require(obj, lineno, field_name, path)
    if not isinstance(value, str) or not value.strip():
        raise CorpusFormatError(
            f"{path}: line {lineno}: field {field_name} must be non-empty text"
        )
    return value.strip() if field_name == "caption" else value


def _require_positive(obj: dict, lineno: int, field_name: str, path: Path) -> float:
    value = _require(obj, lineno, field_name, path)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise CorpusFormatError(
            f"{path}: line {lineno}: field {field_name} must be a positive number"
        )
    return float(value)


def load_image_captions(path: str | Path) -> list["CaptionedImage"]:
    """Load an image-caption corpus, rejecting malformed rows by line number."""
    from .image_sequence import CaptionedImage

    p = Path(path)
    seen: dict[str, int] = {}
    corpus: list[CaptionedImage] = []
    for lineno, obj in iter_jsonl_with_lines(p):
        row_id = _require_text(obj, lineno, "id", p)
        if row_id in seen:
            raise CorpusFormatError(
                f"{p}: duplicate id {row_id!r} at lines {seen[row_id]} and {lineno}"
            )
        seen[row_id] = lineno
        corpus.append(
            CaptionedImage(
                id=row_id,
                image=_require_text(obj, lineno, "image", p),
                caption=_require_text(obj, lineno, "caption", p),
            )
        )
    return corpus


def load_clip_captions(path: str | Path) -> list["CaptionedClip"]:
    """Load a clip-caption corpus, rejecting malformed rows by line number."""
    from .clip_sequence import CaptionedClip

    p = Path(path)
    seen: dict[str, int] = {}
    corpus: list[CaptionedClip] = []
    for lineno, obj in iter_jsonl_with_lines(p):
        row_id = _require_text(obj, lineno, "id", p)
        if row_id in seen:
            raise CorpusFormatError(
                f"{p}: duplicate id {row_id!r} at lines {seen[row_id]} and {lineno}"
            )
        seen[row_id] = lineno
        corpus.append(
            CaptionedClip(
                id=row_id,
                video=_require_text(obj, lineno, "video", p),
                label=_require_text(obj, lineno, "label", p),
                caption=_require_text(obj, lineno, "caption", p),
                duration_s=_require_positive(obj, lineno, "duration_s", p),
                fps=_require_positive(obj, lineno, "fps", p),
            )
        )
    return corpus


@dataclass(frozen=True)
class ClipStub:
    """A clip that still needs a caption from the captioning service."""

    id: str
    video: str
    label: str
    duration_s: float
    fps: float


@dataclass(frozen=True)
class FetchFailure:
    clip_id: str
    attempts: int
    reason: str


@dataclass(frozen=True)
class CaptionFetchResult:
    corpus: list  # list[CaptionedClip]
    failures: list[FetchFailure] = field(default_factory=list)


def fetch_clip_captions(
    service_endpoint: str,
    clips_without_captions: Sequence[ClipStub],
    *,
    max_attempts: int = 3,
    backoff_s: float = 1.0,
    timeout_s: float = 30.0,
    sleep: Callable[[float], None] = time.sleep,
) -> CaptionFetchResult:
    """Caption clips via ``POST <endpoint>/caption``, one request per clip.

    Transient failures (non-200 status, connection errors) are retried up
    to ``max_attempts`` times with exponential backoff; a clip that never
    succeeds lands in the failure report while the rest of the run
    continues. A 200 response that does not carry the expected
    ``{"clip_id", "caption"}`` payload is a protocol violation and raises
    :class:`CaptionProtocolError` immediately.
    """
    from .clip_sequence import CaptionedClip

    if max_attempts < 1:
        raise ConfigError(f"max_attempts must be >= 1, got {max_attempts}")
    url = service_endpoint.rstrip("/") + "/caption"
    corpus: list[CaptionedClip] = []
    failures: list[FetchFailure] = []
    for stub in clips_without_captions:
        payload = {
            "clip_id": stub.id,
            "video_uri": stub.video,
            "action_label": stub.label,
        }
        reason = "no attempt made"
        caption: str | None = None
        for attempt in range(max_attempts):
            if attempt > 0:
                sleep(backoff_s * 2 ** (attempt - 1))
            try:
                response = requests.post(url, json=payload, timeout=timeout_s)
            except requests.RequestException as exc:
                reason = f"request failed: {exc}"
                continue
            if response.status_code != 200:
                reason = f"HTTP {response.status_code}"
                continue
            try:
                body = response.json()
            except ValueError as exc:
                raise CaptionProtocolError(
                    f"clip {stub.id!r}: response is not JSON"
                ) from exc
            if (
                not isinstance(body, dict)
                or body.get("clip_id") != stub.id
                or not isinstance(body.get("caption"), str)
                or not body["caption"].strip()
            ):
                raise CaptionProtocolError(
                    f"clip {stub.id!r}: response missing or mismatching "
                    f"clip_id/caption fields"
                )
            caption = body["caption"].strip()
            break
        if caption is None:
            failures.append(
                FetchFailure(clip_id=stub.id, attempts=max_attempts, reason=reason)
            )
            continue
        corpus.append(
            CaptionedClip(
                id=stub.id,
                video=stub.video,
                label=stub.label,
                caption=caption,
                duration_s=stub.duration_s,
                fps=stub.fps,
            )
        )
    return CaptionFetchResult(corpus=corpus, failures=failures)


def mix_corpora(
    sources: dict[str, Iterable],
    ratios: dict[str, float],
    total_n: int,
    seed: int,
    allow_replacement: bool = False,
) -> Iterator:
    """Interleave sources by drawing each record's origin i.i.d. per ratios.

    Relative order within each source is preserved. A source that runs dry
    raises :class:`StreamExhaustedError` unless ``allow_replacement`` lets
    it restart from its beginning (requires a re-iterable source).
    """
    validate_ratios(ratios)
    if set(sources) != set(ratios):
        raise ConfigError(
            f"sources {sorted(sources)} and ratios {sorted(ratios)} disagree"
        )
    if total_n < 0:
        raise ConfigError(f"total_n must be >= 0, got {total_n}")
    names = sorted(n for n in sources if ratios[n] > 0)
    weights = [ratios[n] for n in names]
    iterators = {name: iter(sources[name]) for name in names}
    rng = random.Random(f"{seed}:mix")
    for position in range(total_n):
        name = rng.choices(names, weights=weights)[0]
        try:
            yield next(iterators[name])
        except StopIteration:
            if allow_replacement:
                iterators[name] = iter(sources[name])
                try:
                    yield next(iterators[name])
                    continue
                except StopIteration:
                    pass
            raise StreamExhaustedError(
                f"source {name!r} exhausted at output position {position}"
            ) from None


def write_jsonl(records: Iterable, path: str | Path) -> int:
    """Write records (InstructionRecord or plain dict) one per line.

    Returns the record count. Output is UTF-8, newline-terminated, with
    the fixed record key order preserved for byte-stable files.
    """
    p = Path(path)
    count = 0
    try:
        with p.open("w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                obj = record.to_json_obj() if hasattr(record, "to_json_obj") else record
                fh.write(json.dumps(obj, ensure_ascii=False))
                fh.write("\n")
                count += 1
    except OSError as exc:
        raise CorpusFormatError(f"cannot write {p}: {exc}") from exc
    return count


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Stream raw objects back from a JSON-lines file."""
    for _, obj in iter_jsonl_with_lines(path):
        yield obj


def read_records(path: str | Path) -> Iterator[InstructionRecord]:
    for obj in read_jsonl(path):
        yield InstructionRecord.from_json_obj(obj)


@dataclass(frozen=True)
class CorpusStats:
    total: int
    task_counts: dict[str, int]
    mean_question_chars: float
    mean_answer_chars: float

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "task_counts": dict(sorted(self.task_counts.items())),
            "mean_question_chars": self.mean_question_chars,
            "mean_answer_chars": self.mean_answer_chars,
        }


def corpus_stats(path: str | Path) -> CorpusStats:
    """Per-task record counts and mean question/answer lengths of a file."""
    counts: dict[str, int] = {}
    total = 0
    q_chars = 0
    a_chars = 0
    for obj in read_jsonl(path):
        record = InstructionRecord.from_json_obj(obj)
        counts[record.task] = counts.get(record.task, 0) + 1
        q_chars += len(record.question)
        a_chars += len(record.answer)
        total += 1
    return CorpusStats(
        total=total,
        task_counts=counts,
        mean_question_chars=q_chars / total if total else 0.0,
        mean_answer_chars=a_chars / total if total else 0.0,
    )

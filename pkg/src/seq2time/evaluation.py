"""Parse timed-event predictions and score temporal/lexical quality.

Model outputs arrive as free text. Two line grammars are recognized,
matching how the generators render answers:

* free-form: ``<float> - <float> seconds[,:] <caption>`` (whitespace
  tolerant, ``second``/``seconds`` case-insensitive);
* position tokens: two 4-token codes back to back, then the caption;
  codes decode to fractions and scale by the video duration.

Non-blank lines matching neither grammar are skipped and counted, never
fatal: real model outputs are noisy.

Metrics:

* ``temporal_f1`` scores one video's predicted events against ground
  truth. Per IoU threshold it finds a one-to-one event matching of
  maximum size among pairs with IoU >= threshold (exact, via augmenting
  paths), then precision = matches/|pred|, recall = matches/|gt|, F1
  their harmonic mean. The reported F1 averages thresholds {0.3, 0.5,
  0.7, 0.9}, and run-level F1 averages videos. Absolute values depend on
  this protocol, so it is spelled out here and in the report metadata.
* ``recall_at_1`` scores aligned single-query grounding at IoU 0.5/0.7.
* ``richness`` reports caption diversity: mean tokens per caption and
  type-token ratio, with tokens = lowercased maximal alphanumeric runs.
  TTR is tokenizer-sensitive; the rule is embedded in the report.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .dataset_io import iter_jsonl_with_lines
from .errors import CorpusFormatError, DomainError
from .position_token import (
    IntervalUnit,
    TimeInterval,
    TimeRepresentation,
    code_from_string,
    code_to_index,
    to_timestamp,
)

DEFAULT_F1_THRESHOLDS = (0.3, 0.5, 0.7, 0.9)
DEFAULT_R1_THRESHOLDS = (0.5, 0.7)
TOKENIZATION_RULE = "lowercase; tokens are maximal alphanumeric runs"

_FREE_FORM_LINE = re.compile(
    r"^\s*(\d+(?:\.\d+)?)\s*-\s*(\d+(?:\.\d+)?)\s*seconds?\s*[,:]*\s*(.*?)\s*$",
    re.IGNORECASE,
)
_RPT_LINE = re.compile(r"^\s*((?:<\d>){8})\s*(.*?)\s*$")
_TOKEN_GROUP = re.compile(r"(?:<\d>){4}")
_WORD = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class EventPrediction:
    interval: TimeInterval
    caption: str


@dataclass(frozen=True)
class ParseResult:
    """Parsed events plus the count of non-blank lines that did not parse."""

    events: tuple[EventPrediction, ...]
    skipped_lines: int

    def __iter__(self) -> Iterator[EventPrediction]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)


def parse_predictions(
    text: str,
    time_repr: TimeRepresentation,
    video_duration_s: float | None = None,
) -> ParseResult:
    """Extract timed events from output text, line by line.

    Position-token decoding needs the video duration. Inverted intervals
    are swapped rather than dropped.
    """
    if time_repr is TimeRepresentation.RPT:
        if video_duration_s is None or video_duration_s <= 0:
            raise DomainError(
                "position-token decoding requires a positive video_duration_s, "
                f"got {video_duration_s}"
            )
    events: list[EventPrediction] = []
    skipped = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        if time_repr is TimeRepresentation.RPT:
            match = _RPT_LINE.match(line)
            if match is None:
                skipped += 1
                continue
            tokens, caption = match.groups()
            start = to_timestamp(
                code_from_string(tokens[: len(tokens) // 2]).value(), video_duration_s
            )
            end = to_timestamp(
                code_from_string(tokens[len(tokens) // 2 :]).value(), video_duration_s
            )
        else:
            match = _FREE_FORM_LINE.match(line)
            if match is None:
                skipped += 1
                continue
            start_text, end_text, caption = match.groups()
            start, end = float(start_text), float(end_text)
        if start > end:
            start, end = end, start
        events.append(
            EventPrediction(
                interval=TimeInterval(start, end, IntervalUnit.SECONDS),
                caption=caption,
            )
        )
    return ParseResult(events=tuple(events), skipped_lines=skipped)


def parse_index_mentions(
    text: str, time_repr: TimeRepresentation, seq_len: int
) -> list[int]:
    """All sequence positions mentioned in an image-task answer, in order.

    Free form reads every integer literal (so captions must be digit-free
    for the parse to be a faithful inverse); position tokens read every
    4-token code and map it to the nearest position of ``seq_len``.
    """
    if time_repr is TimeRepresentation.RPT:
        return [
            code_to_index(code_from_string(m.group(0)), seq_len)
            for m in _TOKEN_GROUP.finditer(text)
        ]
    return [int(m.group(0)) for m in re.finditer(r"\d+", text)]


def iou(a: TimeInterval, b: TimeInterval) -> float:
    """Intersection over union; 0 when the union has zero length."""
    if a.unit is not b.unit:
        raise DomainError(f"cannot compare intervals in {a.unit} and {b.unit}")
    intersection = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - intersection
    if union <= 0.0:
        return 0.0
    return intersection / union


def _interval(event: EventPrediction | TimeInterval) -> TimeInterval:
    return event.interval if isinstance(event, EventPrediction) else event


def recall_at_1(
    predictions: Sequence,
    ground_truth: Sequence,
    thresholds: Sequence[float] = DEFAULT_R1_THRESHOLDS,
) -> dict[float, float]:
    """Fraction of aligned queries whose prediction reaches each IoU bar.

    ``predictions[i]`` answers the query whose truth is
    ``ground_truth[i]``; a missing prediction may be passed as None and
    counts as a miss. Empty query sets are an error, not a silent zero.
    """
    if len(predictions) != len(ground_truth):
        raise DomainError(
            f"{len(predictions)} predictions for {len(ground_truth)} queries"
        )
    if not ground_truth:
        raise DomainError("recall@1 is undefined for an empty query set")
    ious = [
        0.0 if pred is None else iou(_interval(pred), _interval(gt))
        for pred, gt in zip(predictions, ground_truth)
    ]
    return {
        float(th): sum(1 for v in ious if v >= th) / len(ious) for th in thresholds
    }


def match_events(
    pred_events: Sequence, gt_events: Sequence, threshold: float
) -> int:
    """Size of the largest one-to-one matching with IoU >= threshold.

    Exact maximum-cardinality bipartite matching via augmenting paths;
    event lists at this granularity are small, so exactness is cheap.
    """
    preds = [_interval(e) for e in pred_events]
    gts = [_interval(e) for e in gt_events]
    adjacency = [
        [j for j, gt in enumerate(gts) if iou(pred, gt) >= threshold]
        for pred in preds
    ]
    owner = [-1] * len(gts)

    def augment(u: int, seen: list[bool]) -> bool:
        for v in adjacency[u]:
            if seen[v]:
                continue
            seen[v] = True
            if owner[v] < 0 or augment(owner[v], seen):
                owner[v] = u
                return True
        return False

    matches = 0
    for u in range(len(preds)):
        if augment(u, [False] * len(gts)):
            matches += 1
    return matches


@dataclass(frozen=True)
class ThresholdScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class TemporalF1Result:
    per_threshold: dict[float, ThresholdScore]
    f1: float  # mean of per-threshold F1


def temporal_f1(
    pred_events: Sequence,
    gt_events: Sequence,
    thresholds: Sequence[float] = DEFAULT_F1_THRESHOLDS,
) -> TemporalF1Result:
    """One video's event-level F1, averaged over IoU thresholds."""
    if not thresholds:
        raise DomainError("at least one IoU threshold is required")
    per_threshold: dict[float, ThresholdScore] = {}
    for th in thresholds:
        matched = match_events(pred_events, gt_events, th)
        precision = matched / len(pred_events) if pred_events else 0.0
        recall = matched / len(gt_events) if gt_events else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision > 0.0 and recall > 0.0
            else 0.0
        )
        per_threshold[float(th)] = ThresholdScore(precision, recall, f1)
    mean_f1 = sum(s.f1 for s in per_threshold.values()) / len(per_threshold)
    return TemporalF1Result(per_threshold=per_threshold, f1=mean_f1)


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


@dataclass(frozen=True)
class RichnessResult:
    l_avg: float  # mean tokens per caption
    ttr: float    # distinct tokens / total tokens


def richness(captions: Sequence[str]) -> RichnessResult:
    """Lexical richness of one video's captions.

    Raises :class:`DomainError` when there are no captions or no tokens
    at all; a type-token ratio of an empty bag is undefined.
    """
    if not captions:
        raise DomainError("richness is undefined for an empty caption list")
    tokens: list[str] = []
    for caption in captions:
        tokens.extend(tokenize(caption))
    if not tokens:
        raise DomainError("richness is undefined when captions have no tokens")
    return RichnessResult(
        l_avg=len(tokens) / len(captions), ttr=len(set(tokens)) / len(tokens)
    )


def aggregate_richness(
    captions_per_video: Sequence[Sequence[str]],
) -> RichnessResult:
    """Pooled mean caption length; TTR per video, then averaged.

    Videos contributing no tokens are skipped in the TTR average; if no
    video has tokens the ratio is undefined and raises.
    """
    total_tokens = 0
    total_captions = 0
    ttrs: list[float] = []
    for captions in captions_per_video:
        video_tokens: list[str] = []
        for caption in captions:
            video_tokens.extend(tokenize(caption))
        total_tokens += len(video_tokens)
        total_captions += len(captions)
        if video_tokens:
            ttrs.append(len(set(video_tokens)) / len(video_tokens))
    if not ttrs or total_captions == 0:
        raise DomainError("richness is undefined when no video has caption tokens")
    return RichnessResult(
        l_avg=total_tokens / total_captions, ttr=sum(ttrs) / len(ttrs)
    )


@dataclass(frozen=True)
class MetricsReport:
    n_videos: int
    f1: float
    f1_per_threshold: dict[float, float]
    precision_per_threshold: dict[float, float]
    recall_per_threshold: dict[float, float]
    r_at_1: dict[float, float]
    n_pred: float
    l_avg: float | None
    ttr: float | None
    skipped_lines: int
    time_repr: str
    tokenization: str = TOKENIZATION_RULE

    def to_dict(self) -> dict:
        def keyed(d: dict[float, float]) -> dict[str, float]:
            return {f"{k:g}": v for k, v in sorted(d.items())}

        return {
            "n_videos": self.n_videos,
            "temporal_f1": self.f1,
            "f1_per_threshold": keyed(self.f1_per_threshold),
            "precision_per_threshold": keyed(self.precision_per_threshold),
            "recall_per_threshold": keyed(self.recall_per_threshold),
            "r_at_1": keyed(self.r_at_1),
            "n_pred": self.n_pred,
            "l_avg": self.l_avg,
            "ttr": self.ttr,
            "skipped_lines": self.skipped_lines,
            "time_repr": self.time_repr,
            "tokenization": self.tokenization,
        }


def load_ground_truth(path: str | Path) -> dict[str, list[EventPrediction]]:
    """Ground truth JSONL: {"video_id", "events": [{start, end, caption}]}."""
    p = Path(path)
    videos: dict[str, list[EventPrediction]] = {}
    for lineno, obj in iter_jsonl_with_lines(p):
        video_id = obj.get("video_id")
        events = obj.get("events")
        if not isinstance(video_id, str) or not isinstance(events, list):
            raise CorpusFormatError(
                f"{p}: line {lineno}: expected video_id and events fields"
            )
        if video_id in videos:
            raise CorpusFormatError(f"{p}: line {lineno}: duplicate video {video_id!r}")
        parsed = []
        for k, ev in enumerate(events):
            try:
                parsed.append(
                    EventPrediction(
                        interval=TimeInterval(
                            float(ev["start"]), float(ev["end"]), IntervalUnit.SECONDS
                        ),
                        caption=str(ev.get("caption", "")),
                    )
                )
            except (KeyError, TypeError, ValueError, DomainError) as exc:
                raise CorpusFormatError(
                    f"{p}: line {lineno}: bad event {k}: {exc}"
                ) from exc
        videos[video_id] = parsed
    return videos


def load_predictions(path: str | Path) -> dict[str, tuple[str, float]]:
    """Prediction JSONL: {"video_id", "output", "duration_s"}."""
    p = Path(path)
    videos: dict[str, tuple[str, float]] = {}
    for lineno, obj in iter_jsonl_with_lines(p):
        video_id = obj.get("video_id")
        output = obj.get("output")
        duration = obj.get("duration_s")
        if (
            not isinstance(video_id, str)
            or not isinstance(output, str)
            or not isinstance(duration, (int, float))
            or isinstance(duration, bool)
            or duration <= 0
        ):
            raise CorpusFormatError(
                f"{p}: line {lineno}: expected video_id, output and positive duration_s"
            )
        if video_id in videos:
            raise CorpusFormatError(f"{p}: line {lineno}: duplicate video {video_id!r}")
        videos[video_id] = (output, float(duration))
    return videos


def evaluate_run(
    pred_file: str | Path,
    gt_file: str | Path,
    time_repr: TimeRepresentation,
    thresholds: Sequence[float] = DEFAULT_F1_THRESHOLDS,
    r1_thresholds: Sequence[float] = DEFAULT_R1_THRESHOLDS,
) -> MetricsReport:
    """Score a prediction file against ground truth, video by video.

    Videos must align one-to-one by id; mismatches are listed. Grounding
    queries are formed by pairing the i-th ground-truth event with the
    i-th predicted event of the same video (missing predictions count as
    misses), pooled across videos. Richness fields are None when the
    predictions carry no caption tokens at all.
    """
    preds = load_predictions(pred_file)
    gts = load_ground_truth(gt_file)
    missing = sorted(set(gts) - set(preds))
    extra = sorted(set(preds) - set(gts))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"videos without predictions: {', '.join(missing)}")
        if extra:
            parts.append(f"predictions without ground truth: {', '.join(extra)}")
        raise CorpusFormatError("; ".join(parts))
    if not gts:
        raise DomainError("cannot evaluate an empty run")

    per_video_f1: list[TemporalF1Result] = []
    query_preds: list[EventPrediction | None] = []
    query_gts: list[EventPrediction] = []
    captions_per_video: list[list[str]] = []
    skipped = 0
    n_pred_total = 0
    for video_id in sorted(gts):
        output, duration = preds[video_id]
        parsed = parse_predictions(output, time_repr, duration)
        skipped += parsed.skipped_lines
        gt_events = gts[video_id]
        per_video_f1.append(temporal_f1(parsed.events, gt_events, thresholds))
        for i, gt_event in enumerate(gt_events):
            query_gts.append(gt_event)
            query_preds.append(parsed.events[i] if i < len(parsed.events) else None)
        captions_per_video.append([e.caption for e in parsed.events])
        n_pred_total += len(parsed.events)

    n_videos = len(gts)
    f1_per_threshold = {
        float(th): sum(r.per_threshold[float(th)].f1 for r in per_video_f1) / n_videos
        for th in thresholds
    }
    precision_per_threshold = {
        float(th): sum(r.per_threshold[float(th)].precision for r in per_video_f1)
        / n_videos
        for th in thresholds
    }
    recall_per_threshold = {
        float(th): sum(r.per_threshold[float(th)].recall for r in per_video_f1)
        / n_videos
        for th in thresholds
    }
    try:
        rich = aggregate_richness(captions_per_video)
        l_avg, ttr = rich.l_avg, rich.ttr
    except DomainError:
        l_avg, ttr = None, None
    return MetricsReport(
        n_videos=n_videos,
        f1=sum(r.f1 for r in per_video_f1) / n_videos,
        f1_per_threshold=f1_per_threshold,
        precision_per_threshold=precision_per_threshold,
        recall_per_threshold=recall_per_threshold,
        r_at_1=recall_at_1(query_preds, query_gts, r1_thresholds),
        n_pred=n_pred_total / n_videos,
        l_avg=l_avg,
        ttr=ttr,
        skipped_lines=skipped,
        time_repr=time_repr.value,
    )

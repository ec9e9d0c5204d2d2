"""Pseudo-long-videos from short captioned clips, with derived timestamps.

A sample concatenates 2 to 10 clips into one synthetic video of
``total_frames`` sampled frames. Each clip gets a random rate factor, so
clips of equal length can occupy very different shares of the frame
budget; frames are then apportioned largest-remainder with a floor of one
frame per clip. A clip's temporal annotation is, by construction, exactly
the relative span of its frames, which is what makes the labels free: no
human timestamps are involved.

Two record generators: DVC (dense captioning: list every event with its
time span) and TVG (grounding: locate one queried caption). Times render
as boundary position codes or as seconds at 0.1 s display precision, and
the synthetic timeline is D = the sum of real clip durations.
"""

from __future__ import annotations

import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Sequence

from .dataset_io import InstructionRecord, derive_record_seed, validate_ratios
from .errors import ConfigError, InvariantViolation
from .position_token import (
    IntervalUnit,
    TimeInterval,
    TimeRepresentation,
    decode_relative,
    encode_ratio,
    format_seconds,
    render_code,
)
from .templates import TemplateBank, find_missing_in_order, render_template

MIN_CLIPS = 2
MAX_CLIPS = 10


def _check_in_order(text: str, needles, what: str) -> None:
    missing = find_missing_in_order(text, needles)
    if missing is not None:
        raise InvariantViolation(f"{what}: {missing!r} missing from {text!r}")


class ClipTask(Enum):
    DVC = "dvc"
    TVG = "tvg"


@dataclass(frozen=True)
class CaptionedClip:
    id: str
    video: str
    label: str
    caption: str
    duration_s: float
    fps: float

    def __post_init__(self) -> None:
        if not self.caption.strip():
            raise ConfigError(f"clip {self.id!r} has an empty caption")
        if self.duration_s <= 0 or self.fps <= 0:
            raise ConfigError(
                f"clip {self.id!r} needs positive duration and fps, got "
                f"({self.duration_s}, {self.fps})"
            )


@dataclass(frozen=True)
class ClipSequenceSample:
    clips: tuple[CaptionedClip, ...]
    rate_factors: tuple[float, ...]
    frame_counts: tuple[int, ...]
    total_frames: int
    pseudo_duration_s: float
    rng_seed: int = 0

    def __post_init__(self) -> None:
        n = len(self.clips)
        if not MIN_CLIPS <= n <= MAX_CLIPS:
            raise ConfigError(f"sample needs {MIN_CLIPS}..{MAX_CLIPS} clips, got {n}")
        if len(self.rate_factors) != n or len(self.frame_counts) != n:
            raise ConfigError("clips, rate_factors and frame_counts must align")
        if any(r <= 0 for r in self.rate_factors):
            raise ConfigError(f"rate factors must be positive, got {self.rate_factors}")
        if any(c < 1 for c in self.frame_counts):
            raise InvariantViolation(
                f"every clip needs at least one frame, got {self.frame_counts}"
            )
        if sum(self.frame_counts) != self.total_frames:
            raise InvariantViolation(
                f"frame counts {self.frame_counts} do not sum to {self.total_frames}"
            )
        expected = sum(c.duration_s for c in self.clips)
        if abs(self.pseudo_duration_s - expected) > 1e-9 * max(1.0, expected):
            raise InvariantViolation(
                f"pseudo duration {self.pseudo_duration_s} != clip total {expected}"
            )


@dataclass(frozen=True)
class EventAnnotation:
    """One clip's span on the synthetic timeline, in relative units."""

    interval: TimeInterval
    caption: str
    clip_id: str


def apportion_frames(weights: Sequence[float], total: int) -> tuple[int, ...]:
    """Split ``total`` frames proportionally to weights, floor one each.

    Largest-remainder method; remainder ties resolve by position. If the
    proportional share of a clip rounds to zero frames it is topped up to
    one by taking a frame from the biggest allocation.
    """
    if not weights:
        raise ConfigError("at least one weight is required")
    if any(w <= 0 for w in weights):
        raise ConfigError(f"weights must be positive, got {tuple(weights)}")
    if total < len(weights):
        raise ConfigError(
            f"cannot give {len(weights)} clips at least one of {total} frames"
        )
    scale = sum(weights)
    quotas = [total * w / scale for w in weights]
    counts = [int(q) for q in quotas]
    leftovers = sorted(
        range(len(weights)), key=lambda j: (-(quotas[j] - counts[j]), j)
    )
    for j in leftovers[: total - sum(counts)]:
        counts[j] += 1
    while min(counts) < 1:
        recipient = counts.index(min(counts))
        donor = counts.index(max(counts))
        counts[donor] -= 1
        counts[recipient] += 1
    return tuple(counts)


def _spread_labels(chosen: Sequence[CaptionedClip]) -> list[CaptionedClip]:
    """Order clips so equal action labels are never adjacent when avoidable.

    Greedy most-frequent-first; deterministic given the input order.
    """
    queues: dict[str, list[CaptionedClip]] = {}
    for clip in chosen:
        queues.setdefault(clip.label, []).append(clip)
    first_seen = {label: i for i, label in enumerate(queues)}
    remaining = Counter({label: len(q) for label, q in queues.items()})
    out: list[CaptionedClip] = []
    last_label: str | None = None
    for _ in range(len(chosen)):
        order = sorted(
            (label for label in remaining if remaining[label] > 0),
            key=lambda lb: (-remaining[lb], first_seen[lb]),
        )
        pick = next((lb for lb in order if lb != last_label), order[0])
        out.append(queues[pick].pop(0))
        remaining[pick] -= 1
        last_label = pick
    return out


def compose_sequence(
    pool: Sequence[CaptionedClip],
    n_clips: int,
    total_frames: int,
    rate_range: tuple[float, float],
    rng: random.Random,
    rng_seed: int | None = None,
) -> ClipSequenceSample:
    """Draw clips without replacement and split the frame budget among them.

    Distinct action labels are preferred; when the drawn window cannot
    supply enough distinct labels, repeats are allowed but arranged so
    equal labels never sit next to each other (when avoidable). Rate
    factors are uniform on ``rate_range``, so a clip's share of frames is
    proportional to duration times its rate factor.
    """
    if not MIN_CLIPS <= n_clips <= MAX_CLIPS:
        raise ConfigError(f"n_clips must be in {MIN_CLIPS}..{MAX_CLIPS}, got {n_clips}")
    if len(pool) < n_clips:
        raise ConfigError(f"pool of {len(pool)} clips cannot supply {n_clips}")
    if total_frames < n_clips:
        raise ConfigError(
            f"total_frames {total_frames} below one frame per clip ({n_clips})"
        )
    lo, hi = rate_range
    if not 0 < lo <= hi:
        raise ConfigError(f"rate_range must satisfy 0 < lo <= hi, got {rate_range}")
    window_size = min(len(pool), max(8 * n_clips, n_clips))
    window = [pool[i] for i in rng.sample(range(len(pool)), window_size)]
    taken: list[CaptionedClip] = []
    skipped: list[CaptionedClip] = []
    labels_used: set[str] = set()
    for clip in window:
        if len(taken) == n_clips:
            break
        if clip.label in labels_used:
            skipped.append(clip)
            continue
        taken.append(clip)
        labels_used.add(clip.label)
    for clip in skipped:
        if len(taken) == n_clips:
            break
        taken.append(clip)
    clips = _spread_labels(taken)
    rates = tuple(rng.uniform(lo, hi) for _ in clips)
    counts = apportion_frames(
        [c.duration_s * r for c, r in zip(clips, rates)], total_frames
    )
    return ClipSequenceSample(
        clips=tuple(clips),
        rate_factors=rates,
        frame_counts=counts,
        total_frames=total_frames,
        pseudo_duration_s=sum(c.duration_s for c in clips),
        rng_seed=rng_seed if rng_seed is not None else 0,
    )


def derive_annotations(sample: ClipSequenceSample) -> list[EventAnnotation]:
    """Each clip's relative interval: its frame span over the frame budget.

    Intervals are contiguous, ordered, and tile [0, 1] exactly.
    """
    annotations: list[EventAnnotation] = []
    cumulative = 0
    for clip, count in zip(sample.clips, sample.frame_counts):
        start = cumulative / sample.total_frames
        cumulative += count
        end = cumulative / sample.total_frames
        annotations.append(
            EventAnnotation(
                interval=TimeInterval(start, end, IntervalUnit.RELATIVE),
                caption=clip.caption,
                clip_id=clip.id,
            )
        )
    if cumulative != sample.total_frames:
        raise InvariantViolation(
            f"frame spans cover {cumulative} of {sample.total_frames} frames"
        )
    return annotations


def _boundary_codes(sample: ClipSequenceSample) -> list[tuple]:
    """Per clip, the (start, end) codes of its boundary frame indices.

    Adjacent clips share a boundary frame, so the end code of clip j
    equals the start code of clip j+1 exactly.
    """
    codes = []
    cumulative = 0
    for count in sample.frame_counts:
        start = encode_ratio(cumulative, sample.total_frames)
        cumulative += count
        end = encode_ratio(cumulative, sample.total_frames)
        codes.append((start, end))
    return codes


def render_event_line(
    start_s: float | None,
    end_s: float | None,
    caption: str,
    codes: tuple | None,
    time_repr: TimeRepresentation,
) -> str:
    if time_repr is TimeRepresentation.RPT:
        start_code, end_code = codes  # type: ignore[misc]
        return f"{render_code(start_code)}{render_code(end_code)} {caption}"
    return f"{format_seconds(start_s)} - {format_seconds(end_s)} seconds, {caption}"


def _answer_precision_intervals(
    sample: ClipSequenceSample, time_repr: TimeRepresentation
) -> list[list[float]]:
    """Interval metadata exactly as recoverable from the rendered answer."""
    duration = sample.pseudo_duration_s
    out = []
    if time_repr is TimeRepresentation.RPT:
        for start_code, end_code in _boundary_codes(sample):
            out.append(
                [
                    decode_relative(start_code) * duration,
                    decode_relative(end_code) * duration,
                ]
            )
    else:
        for ann in derive_annotations(sample):
            seconds = ann.interval.to_seconds(duration)
            out.append(
                [
                    float(format_seconds(seconds.start)),
                    float(format_seconds(seconds.end)),
                ]
            )
    return out


def gen_dvc(
    sample: ClipSequenceSample,
    templates: TemplateBank,
    time_repr: TimeRepresentation,
    rng: random.Random,
) -> InstructionRecord:
    """All events with their time spans, one line per clip, in order."""
    annotations = derive_annotations(sample)
    duration = sample.pseudo_duration_s
    codes = _boundary_codes(sample)
    lines = []
    for ann, pair in zip(annotations, codes):
        seconds = ann.interval.to_seconds(duration)
        lines.append(
            render_event_line(seconds.start, seconds.end, ann.caption, pair, time_repr)
        )
    q_tpl, a_tpl = templates.sample(ClipTask.DVC.value, "single", rng)
    question = render_template(q_tpl, {})
    answer = render_template(a_tpl, {"<EVENTS>": "\n".join(lines)})
    _check_in_order(answer, [ann.caption for ann in annotations], "dvc answer")
    return InstructionRecord(
        id=f"dvc-{sample.rng_seed:016x}",
        media=tuple(clip.video for clip in sample.clips),
        task=ClipTask.DVC.name,
        question=question,
        answer=answer,
        meta={
            "total_frames": sample.total_frames,
            "duration_s": duration,
            "intervals": _answer_precision_intervals(sample, time_repr),
            "captions": [ann.caption for ann in annotations],
            "time_repr": time_repr.value,
        },
    )


def gen_tvg(
    sample: ClipSequenceSample,
    templates: TemplateBank,
    time_repr: TimeRepresentation,
    rng: random.Random,
) -> InstructionRecord:
    """One uniformly chosen clip: caption in the question, span in the answer."""
    annotations = derive_annotations(sample)
    pick = rng.randrange(len(annotations))
    ann = annotations[pick]
    duration = sample.pseudo_duration_s
    codes = _boundary_codes(sample)[pick]
    seconds = ann.interval.to_seconds(duration)
    if time_repr is TimeRepresentation.RPT:
        interval_text = f"{render_code(codes[0])}{render_code(codes[1])}"
    else:
        interval_text = (
            f"{format_seconds(seconds.start)} - {format_seconds(seconds.end)} seconds"
        )
    q_tpl, a_tpl = templates.sample(ClipTask.TVG.value, "single", rng)
    question = render_template(q_tpl, {"<CAPTION>": ann.caption})
    answer = render_template(a_tpl, {"<INTERVAL>": interval_text})
    _check_in_order(question, [ann.caption], "tvg question")
    _check_in_order(answer, [interval_text], "tvg answer")
    return InstructionRecord(
        id=f"tvg-{sample.rng_seed:016x}",
        media=tuple(clip.video for clip in sample.clips),
        task=ClipTask.TVG.name,
        question=question,
        answer=answer,
        meta={
            "total_frames": sample.total_frames,
            "duration_s": duration,
            "intervals": [_answer_precision_intervals(sample, time_repr)[pick]],
            "captions": [ann.caption],
            "target_clip": ann.clip_id,
            "time_repr": time_repr.value,
        },
    )


def _default_task_mix() -> dict[str, float]:
    return {t.value: 0.5 for t in ClipTask}


@dataclass(frozen=True)
class ClipCorpusConfig:
    n_instances: int
    clip_range: tuple[int, int] = (MIN_CLIPS, MAX_CLIPS)
    total_frames: int = 96
    rate_range: tuple[float, float] = (0.5, 2.0)
    task_mix: dict[str, float] = field(default_factory=_default_task_mix)
    seed: int = 0
    time_repr: TimeRepresentation = TimeRepresentation.RPT

    def __post_init__(self) -> None:
        if self.n_instances < 0:
            raise ConfigError(f"n_instances must be >= 0, got {self.n_instances}")
        lo, hi = self.clip_range
        if not MIN_CLIPS <= lo <= hi <= MAX_CLIPS:
            raise ConfigError(
                f"clip_range must lie within {MIN_CLIPS}..{MAX_CLIPS}, got {self.clip_range}"
            )
        if self.total_frames < hi:
            raise ConfigError(
                f"total_frames {self.total_frames} below one frame per clip ({hi})"
            )
        rlo, rhi = self.rate_range
        if not 0 < rlo <= rhi:
            raise ConfigError(f"invalid rate_range {self.rate_range}")
        validate_ratios(self.task_mix)
        known = {t.value for t in ClipTask}
        unknown = set(self.task_mix) - known
        if unknown:
            raise ConfigError(f"unknown tasks in mix: {sorted(unknown)}")


def generate_clip_record(
    config: ClipCorpusConfig,
    pool: Sequence[CaptionedClip],
    templates: TemplateBank,
    ordinal: int,
) -> InstructionRecord:
    """Record ``ordinal`` of a run; pure in (config, seed, ordinal)."""
    rseed = derive_record_seed(config.seed, ordinal, namespace="clip-seq")
    rng = random.Random(rseed)
    names = sorted(n for n in config.task_mix if config.task_mix[n] > 0)
    task = ClipTask(rng.choices(names, weights=[config.task_mix[n] for n in names])[0])
    n_clips = rng.randint(*config.clip_range)
    sample = compose_sequence(
        pool, n_clips, config.total_frames, config.rate_range, rng, rng_seed=rseed
    )
    if task is ClipTask.DVC:
        record = gen_dvc(sample, templates, config.time_repr, rng)
    else:
        record = gen_tvg(sample, templates, config.time_repr, rng)
    return replace(
        record,
        id=f"cs-{config.seed}-{ordinal:08d}",
        meta={**record.meta, "seed": config.seed, "ordinal": ordinal},
    )


_WORKER: tuple | None = None


def _init_worker(config: ClipCorpusConfig, pool: tuple, templates: TemplateBank) -> None:
    global _WORKER
    _WORKER = (config, pool, templates)


def _run_worker(ordinal: int) -> InstructionRecord:
    config, pool, templates = _WORKER  # type: ignore[misc]
    return generate_clip_record(config, pool, templates, ordinal)


def build_clip_corpus(
    config: ClipCorpusConfig,
    pool: Sequence[CaptionedClip],
    templates: TemplateBank | None = None,
    jobs: int = 1,
) -> Iterator[InstructionRecord]:
    """Emit exactly ``n_instances`` records, task drawn i.i.d. per the mix."""
    if templates is None:
        templates = TemplateBank.load()
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    if len(pool) < config.clip_range[1]:
        raise ConfigError(
            f"pool of {len(pool)} clips cannot fill sequences of up to "
            f"{config.clip_range[1]}"
        )
    if jobs == 1 or config.n_instances < 2:
        for ordinal in range(config.n_instances):
            yield generate_clip_record(config, pool, templates, ordinal)
        return
    with ProcessPoolExecutor(
        max_workers=jobs,
        initializer=_init_worker,
        initargs=(config, tuple(pool), templates),
    ) as executor:
        chunk = max(16, config.n_instances // (jobs * 8))
        yield from executor.map(_run_worker, range(config.n_instances), chunksize=chunk)

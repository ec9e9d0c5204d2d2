"""Image-sequence pretext tasks: position-aware instruction records.

A sample is a run of ``seq_len`` captioned images drawn without
replacement from a pool (duplicates would make index grounding
ill-posed). Three record generators operate on a sample:

* IIG (index grounding): caption in the question, index in the answer.
* IIC (indexed captioning): index in the question, index + caption in the
  answer.
* ALR (adjacent location reasoning): the question names the caption of an
  anchor image and a direction; the answer gives the index and caption of
  the immediate neighbor. Boundary anchors are re-drawn, never emitted.

Indices render per the active time representation: four digit position
tokens, or the bare integer. Every generator re-checks its own output
(rendered indices and captions must appear in the emitted text, in order)
and raises :class:`InvariantViolation` rather than emit an inconsistent
record.

Corpus building is pure per record ordinal: record i of a run is a
function of (config, seed, i) only, so generation can fan out across
processes without changing a byte of the output.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .dataset_io import InstructionRecord, derive_record_seed, validate_ratios
from .errors import ConfigError, InvariantViolation
from .position_token import TimeRepresentation, encode_relative, render_code
from .templates import TemplateBank, find_missing_in_order, render_template


class PretextTask(Enum):
    IIG = "iig"
    IIC = "iic"
    ALR = "alr"


class Direction(Enum):
    BEFORE = "before"
    AFTER = "after"


@dataclass(frozen=True)
class CaptionedImage:
    id: str
    image: str
    caption: str

    def __post_init__(self) -> None:
        if not self.caption.strip():
            raise ConfigError(f"image {self.id!r} has an empty caption")


@dataclass(frozen=True)
class ImageSequenceSample:
    """An ordered draw of images plus the 1-based target positions."""

    images: tuple[CaptionedImage, ...]
    targets: tuple[int, ...]
    rng_seed: int = 0

    def __post_init__(self) -> None:
        n = len(self.images)
        if n < 1:
            raise ConfigError("sample needs at least one image")
        if not self.targets:
            raise ConfigError("sample needs at least one target")
        if list(self.targets) != sorted(set(self.targets)):
            raise ConfigError(f"targets must be strictly increasing, got {self.targets}")
        if self.targets[0] < 1 or self.targets[-1] > n:
            raise ConfigError(f"targets {self.targets} outside 1..{n}")

    @property
    def seq_len(self) -> int:
        return len(self.images)

    def image_at(self, index: int) -> CaptionedImage:
        """1-based position lookup."""
        if not 1 <= index <= len(self.images):
            raise ConfigError(f"index {index} outside 1..{len(self.images)}")
        return self.images[index - 1]


def sample_sequence(
    pool: Sequence[CaptionedImage],
    seq_len: int,
    rng: random.Random,
    max_targets: int = 5,
    rng_seed: int | None = None,
) -> ImageSequenceSample:
    """Draw a sequence uniformly without replacement, plus target positions.

    Target count is uniform on 1..max_targets (capped at seq_len); target
    positions are a sorted uniform draw. Deterministic given pool order
    and rng state.
    """
    if seq_len < 1:
        raise ConfigError(f"seq_len must be >= 1, got {seq_len}")
    if len(pool) < seq_len:
        raise ConfigError(
            f"pool of {len(pool)} images cannot fill a sequence of {seq_len}"
        )
    if max_targets < 1:
        raise ConfigError(f"max_targets must be >= 1, got {max_targets}")
    images = tuple(rng.sample(list(pool), seq_len))
    n_targets = rng.randint(1, min(max_targets, seq_len))
    targets = tuple(sorted(rng.sample(range(1, seq_len + 1), n_targets)))
    return ImageSequenceSample(
        images=images, targets=targets, rng_seed=rng_seed if rng_seed is not None else 0
    )


def render_index(index: int, seq_len: int, time_repr: TimeRepresentation) -> str:
    """Position as digit tokens, or the bare integer in free form."""
    if time_repr is TimeRepresentation.RPT:
        return render_code(encode_relative(index, seq_len))
    return str(index)


def _check_in_order(text: str, needles: Iterable[str], what: str) -> None:
    """Every needle must appear in text, in order; else the record is bad."""
    missing = find_missing_in_order(text, needles)
    if missing is not None:
        raise InvariantViolation(f"{what}: {missing!r} missing from {text!r}")


def _arity(targets: Sequence[int]) -> str:
    return "single" if len(targets) == 1 else "multi"


def _join_captions(captions: Sequence[str]) -> str:
    if len(captions) == 1:
        return captions[0]
    return '"' + '", "'.join(captions) + '"'


def gen_iig(
    sample: ImageSequenceSample,
    templates: TemplateBank,
    time_repr: TimeRepresentation,
    rng: random.Random,
) -> InstructionRecord:
    """Caption(s) in the question, matching index(es) in the answer."""
    captions = [sample.image_at(i).caption for i in sample.targets]
    rendered = [render_index(i, sample.seq_len, time_repr) for i in sample.targets]
    q_tpl, a_tpl = templates.sample(PretextTask.IIG.value, _arity(sample.targets), rng)
    question = render_template(q_tpl, {"<CAPTION>": _join_captions(captions)})
    answer = render_template(a_tpl, {"<INDEX>": ", ".join(rendered)})
    _check_in_order(question, captions, "iig question")
    _check_in_order(answer, rendered, "iig answer")
    return InstructionRecord(
        id=f"iig-{sample.rng_seed:016x}",
        media=tuple(img.image for img in sample.images),
        task=PretextTask.IIG.name,
        question=question,
        answer=answer,
        meta={
            "seq_len": sample.seq_len,
            "targets": list(sample.targets),
            "time_repr": time_repr.value,
        },
    )


def gen_iic(
    sample: ImageSequenceSample,
    templates: TemplateBank,
    time_repr: TimeRepresentation,
    rng: random.Random,
) -> InstructionRecord:
    """Index(es) in the question, index + stored caption pairs in the answer."""
    captions = [sample.image_at(i).caption for i in sample.targets]
    rendered = [render_index(i, sample.seq_len, time_repr) for i in sample.targets]
    arity = _arity(sample.targets)
    q_tpl, a_tpl = templates.sample(PretextTask.IIC.value, arity, rng)
    question = render_template(q_tpl, {"<INDEX>": ", ".join(rendered)})
    # the answer template is one (index, caption) sentence; multi-target
    # answers repeat it per target in question order
    answer = " ".join(
        render_template(a_tpl, {"<INDEX>": idx, "<CAPTION>": cap})
        for idx, cap in zip(rendered, captions)
    )
    _check_in_order(question, rendered, "iic question")
    interleaved = [part for pair in zip(rendered, captions) for part in pair]
    _check_in_order(answer, interleaved, "iic answer")
    return InstructionRecord(
        id=f"iic-{sample.rng_seed:016x}",
        media=tuple(img.image for img in sample.images),
        task=PretextTask.IIC.name,
        question=question,
        answer=answer,
        meta={
            "seq_len": sample.seq_len,
            "targets": list(sample.targets),
            "time_repr": time_repr.value,
        },
    )


def gen_alr(
    sample: ImageSequenceSample,
    templates: TemplateBank,
    direction: Direction,
    time_repr: TimeRepresentation,
    rng: random.Random,
) -> InstructionRecord:
    """Anchor caption + direction in the question, neighbor in the answer.

    The anchor is drawn uniformly; anchors whose neighbor would fall off
    the sequence edge are rejected and re-drawn.
    """
    seq_len = sample.seq_len
    if seq_len < 2:
        raise ConfigError("adjacent-location reasoning needs seq_len >= 2")
    while True:
        anchor = rng.randint(1, seq_len)
        if direction is Direction.BEFORE and anchor == 1:
            continue
        if direction is Direction.AFTER and anchor == seq_len:
            continue
        break
    neighbor = anchor - 1 if direction is Direction.BEFORE else anchor + 1
    anchor_caption = sample.image_at(anchor).caption
    neighbor_caption = sample.image_at(neighbor).caption
    rendered = render_index(neighbor, seq_len, time_repr)
    q_tpl, a_tpl = templates.sample(PretextTask.ALR.value, "single", rng)
    question = render_template(
        q_tpl, {"<CAPTION1>": anchor_caption, "<DIRECTION>": direction.value}
    )
    answer = render_template(
        a_tpl, {"<INDEX>": rendered, "<CAPTION2>": neighbor_caption}
    )
    _check_in_order(question, [anchor_caption], "alr question")
    _check_in_order(answer, [rendered, neighbor_caption], "alr answer")
    if abs(neighbor - anchor) != 1:
        raise InvariantViolation(
            f"alr neighbor {neighbor} not adjacent to anchor {anchor}"
        )
    return InstructionRecord(
        id=f"alr-{sample.rng_seed:016x}",
        media=tuple(img.image for img in sample.images),
        task=PretextTask.ALR.name,
        question=question,
        answer=answer,
        meta={
            "seq_len": seq_len,
            "targets": [neighbor],
            "anchor": anchor,
            "direction": direction.value,
            "time_repr": time_repr.value,
        },
    )


def _default_task_mix() -> dict[str, float]:
    return {t.value: 1.0 / 3.0 for t in PretextTask}


@dataclass(frozen=True)
class ImageCorpusConfig:
    n_instances: int
    seq_len: int = 96
    max_targets: int = 5
    task_mix: dict[str, float] = field(default_factory=_default_task_mix)
    seed: int = 0
    time_repr: TimeRepresentation = TimeRepresentation.RPT

    def __post_init__(self) -> None:
        if self.n_instances < 0:
            raise ConfigError(f"n_instances must be >= 0, got {self.n_instances}")
        if self.seq_len < 2:
            raise ConfigError(f"seq_len must be >= 2, got {self.seq_len}")
        if not 1 <= self.max_targets <= self.seq_len:
            raise ConfigError(
                f"max_targets must be in 1..{self.seq_len}, got {self.max_targets}"
            )
        validate_ratios(self.task_mix)
        known = {t.value for t in PretextTask}
        unknown = set(self.task_mix) - known
        if unknown:
            raise ConfigError(f"unknown tasks in mix: {sorted(unknown)}")


def generate_image_record(
    config: ImageCorpusConfig,
    pool: Sequence[CaptionedImage],
    templates: TemplateBank,
    ordinal: int,
) -> InstructionRecord:
    """Record ``ordinal`` of a run; pure in (config, seed, ordinal)."""
    rseed = derive_record_seed(config.seed, ordinal, namespace="image-seq")
    rng = random.Random(rseed)
    names = sorted(n for n in config.task_mix if config.task_mix[n] > 0)
    task = PretextTask(rng.choices(names, weights=[config.task_mix[n] for n in names])[0])
    sample = sample_sequence(
        pool, config.seq_len, rng, max_targets=config.max_targets, rng_seed=rseed
    )
    if task is PretextTask.IIG:
        record = gen_iig(sample, templates, config.time_repr, rng)
    elif task is PretextTask.IIC:
        record = gen_iic(sample, templates, config.time_repr, rng)
    else:
        direction = rng.choice((Direction.BEFORE, Direction.AFTER))
        record = gen_alr(sample, templates, direction, config.time_repr, rng)
    return replace(
        record,
        id=f"is-{config.seed}-{ordinal:08d}",
        meta={**record.meta, "seed": config.seed, "ordinal": ordinal},
    )


_WORKER: tuple | None = None


def _init_worker(config: ImageCorpusConfig, pool: tuple, templates: TemplateBank) -> None:
    global _WORKER
    _WORKER = (config, pool, templates)


def _run_worker(ordinal: int) -> InstructionRecord:
    config, pool, templates = _WORKER  # type: ignore[misc]
    return generate_image_record(config, pool, templates, ordinal)


def build_image_corpus(
    config: ImageCorpusConfig,
    pool: Sequence[CaptionedImage],
    templates: TemplateBank | None = None,
    jobs: int = 1,
) -> Iterator[InstructionRecord]:
    """Emit exactly ``n_instances`` records, task drawn i.i.d. per the mix.

    ``jobs`` > 1 fans records out across processes; output order (and
    bytes) match the sequential run because each record depends only on
    its ordinal.
    """
    if templates is None:
        templates = TemplateBank.load()
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or config.n_instances < 2:
        for ordinal in range(config.n_instances):
            yield generate_image_record(config, pool, templates, ordinal)
        return
    with ProcessPoolExecutor(
        max_workers=jobs,
        initializer=_init_worker,
        initargs=(config, tuple(pool), templates),
    ) as executor:
        chunk = max(16, config.n_instances // (jobs * 8))
        yield from executor.map(_run_worker, range(config.n_instances), chunksize=chunk)

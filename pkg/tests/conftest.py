"""Shared fixtures: synthetic caption pools and self-evaluation helpers.

Captions are digit-free by construction so that free-form index
parse-back (which reads integer literals) is an exact inverse, and clip
durations stay in 5..15 s so rendered 0.1 s timestamps never collapse a
short event to a point.
"""

import json
from pathlib import Path

import pytest

from seq2time import (
    CaptionedClip,
    CaptionedImage,
    TimeRepresentation,
    write_jsonl,
)

_ADJECTIVES = ("amber", "rusty", "pale", "shiny", "crooked", "quiet", "vivid")
_NOUNS = (
    "kettle",
    "bicycle",
    "lantern",
    "sparrow",
    "ladder",
    "teapot",
    "anvil",
    "compass",
    "mitten",
    "barrel",
    "violin",
)
_VERBS = ("rests", "spins", "leans", "glows", "wobbles")
_PLACES = ("by the window", "on the porch", "under the awning")

_ACTIONS = (
    "kneading dough",
    "raking leaves",
    "tying a knot",
    "pouring tea",
    "folding laundry",
    "sharpening a pencil",
    "stacking crates",
    "wiping a counter",
    "rolling a barrel",
    "sweeping the floor",
    "braiding rope",
    "stirring soup",
    "hanging a picture",
    "packing a box",
    "washing windows",
    "planting seedlings",
    "shuffling cards",
    "polishing shoes",
    "carving wood",
    "threading a needle",
)


def _image_caption(k: int) -> str:
    a = _ADJECTIVES[k % len(_ADJECTIVES)]
    n = _NOUNS[(k // len(_ADJECTIVES)) % len(_NOUNS)]
    v = _VERBS[(k // (len(_ADJECTIVES) * len(_NOUNS))) % len(_VERBS)]
    p = _PLACES[(k // (len(_ADJECTIVES) * len(_NOUNS) * len(_VERBS))) % len(_PLACES)]
    return f"a {a} {n} {v} {p}"


@pytest.fixture(scope="session")
def image_pool() -> list[CaptionedImage]:
    return [
        CaptionedImage(
            id=f"img-{k:04d}", image=f"images/{k:06d}.jpg", caption=_image_caption(k)
        )
        for k in range(500)
    ]


@pytest.fixture(scope="session")
def clip_pool() -> list[CaptionedClip]:
    pool = []
    for k in range(160):
        action = _ACTIONS[k % len(_ACTIONS)]
        flavor = _ADJECTIVES[(k // len(_ACTIONS)) % len(_ADJECTIVES)]
        pool.append(
            CaptionedClip(
                id=f"clip-{k:04d}",
                video=f"clips/{k:05d}.mp4",
                label=action,
                caption=f"a person is {action} with a {flavor} rhythm",
                duration_s=5.0 + (k * 37 % 101) / 10.0,  # 5.0 .. 15.0 s
                fps=30.0,
            )
        )
    return pool


def write_image_source(pool, path: Path) -> Path:
    rows = [{"id": c.id, "image": c.image, "caption": c.caption} for c in pool]
    write_jsonl(rows, path)
    return path


def write_clip_source(pool, path: Path) -> Path:
    rows = [
        {
            "id": c.id,
            "video": c.video,
            "label": c.label,
            "caption": c.caption,
            "duration_s": c.duration_s,
            "fps": c.fps,
        }
        for c in pool
    ]
    write_jsonl(rows, path)
    return path


@pytest.fixture
def image_source(image_pool, tmp_path) -> Path:
    return write_image_source(image_pool, tmp_path / "images.jsonl")


@pytest.fixture
def clip_source(clip_pool, tmp_path) -> Path:
    return write_clip_source(clip_pool, tmp_path / "clips.jsonl")


def self_eval_files(records, directory: Path, stem: str) -> tuple[Path, Path]:
    """Render generated clip records as a (pred, gt) file pair.

    The record's own answer becomes the prediction output; ground truth
    events come from the record metadata, which stores intervals at the
    exact precision recoverable from the rendered answer.
    """
    pred_rows = []
    gt_rows = []
    for record in records:
        pred_rows.append(
            {
                "video_id": record.id,
                "output": record.answer,
                "duration_s": record.meta["duration_s"],
            }
        )
        gt_rows.append(
            {
                "video_id": record.id,
                "events": [
                    {"start": start, "end": end, "caption": caption}
                    for (start, end), caption in zip(
                        record.meta["intervals"], record.meta["captions"]
                    )
                ],
            }
        )
    pred_path = directory / f"{stem}_pred.jsonl"
    gt_path = directory / f"{stem}_gt.jsonl"
    write_jsonl(pred_rows, pred_path)
    write_jsonl(gt_rows, gt_path)
    return pred_path, gt_path


def repr_of(name: str) -> TimeRepresentation:
    return TimeRepresentation.RPT if name == "rpt" else TimeRepresentation.FREE_FORM


def read_config(path: Path) -> dict:
    return json.loads(path.read_text())

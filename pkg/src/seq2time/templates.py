"""Question/answer template bank with slot substitution.

Templates live in an external JSON file (``data/template_bank.json`` ships
with the package) keyed by task then arity::

    {"iig": {"single": {"questions": [...], "answers": [...]}, ...}, ...}

Each list holds at least ten phrasings; the first entry of every list is
the canonical wording, the rest are paraphrases. Slots are uppercase
angle-bracket markers (``<CAPTION>``, ``<INDEX>``, ``<CAPTION1>``,
``<CAPTION2>``, ``<DIRECTION>``, ``<EVENTS>``, ``<INTERVAL>``); they never
collide with digit position tokens, which are single digits. The bank
validates on load that every template carries all slots its task needs.
"""

from __future__ import annotations

import json
import random
import re
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import TemplateError

_SLOT_RE = re.compile(r"<(?:CAPTION[12]?|INDEX|DIRECTION|EVENTS|INTERVAL)>")

# (task, arity) -> (slots every question needs, slots every answer needs)
REQUIRED_SLOTS: dict[tuple[str, str], tuple[tuple[str, ...], tuple[str, ...]]] = {
    ("iig", "single"): (("<CAPTION>",), ("<INDEX>",)),
    ("iig", "multi"): (("<CAPTION>",), ("<INDEX>",)),
    ("iic", "single"): (("<INDEX>",), ("<INDEX>", "<CAPTION>")),
    # multi IIC answers are per-target sentences, joined by the generator
    ("iic", "multi"): (("<INDEX>",), ("<INDEX>", "<CAPTION>")),
    ("alr", "single"): (("<CAPTION1>", "<DIRECTION>"), ("<INDEX>", "<CAPTION2>")),
    ("dvc", "single"): ((), ("<EVENTS>",)),
    ("tvg", "single"): (("<CAPTION>",), ("<INTERVAL>",)),
}

DEFAULT_MIN_VARIANTS = 10


def find_missing_in_order(text: str, needles: Iterable[str]) -> str | None:
    """First needle that does not appear in text after its predecessor.

    Returns None when all needles occur in order. Generators use this to
    re-check their own rendered output before emitting a record.
    """
    pos = 0
    for needle in needles:
        found = text.find(needle, pos)
        if found < 0:
            return needle
        pos = found + len(needle)
    return None


def render_template(template: str, values: dict[str, str]) -> str:
    """Fill every slot of ``template`` from ``values``.

    Raises :class:`TemplateError` if the template contains a slot with no
    value, or leaves any known slot marker unfilled.
    """
    out = template
    for slot in _SLOT_RE.findall(template):
        if slot not in values:
            raise TemplateError(f"no value provided for slot {slot} in {template!r}")
    for slot, value in values.items():
        out = out.replace(slot, value)
    leftover = _SLOT_RE.search(out)
    if leftover is not None:
        raise TemplateError(f"slot {leftover.group(0)} left unfilled in {out!r}")
    return out


class TemplateBank:
    """Validated question/answer phrasings, drawn uniformly per record."""

    def __init__(self, data: dict, min_variants: int = DEFAULT_MIN_VARIANTS):
        self._data = data
        self.min_variants = min_variants
        self._validate()

    @classmethod
    def load(
        cls, path: str | Path | None = None, min_variants: int = DEFAULT_MIN_VARIANTS
    ) -> "TemplateBank":
        """Read a bank from ``path`` or fall back to the packaged default."""
        if path is None:
            text = (
                resources.files("seq2time").joinpath("data/template_bank.json")
            ).read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TemplateError(f"template bank is not valid JSON: {exc}") from exc
        return cls(data, min_variants=min_variants)

    def _validate(self) -> None:
        if not isinstance(self._data, dict):
            raise TemplateError("template bank root must be an object")
        for (task, arity), (q_slots, a_slots) in REQUIRED_SLOTS.items():
            entry = self._data.get(task, {}).get(arity)
            if entry is None:
                continue  # tasks may omit arities they do not support
            for kind, slots in (("questions", q_slots), ("answers", a_slots)):
                variants = entry.get(kind)
                if not isinstance(variants, list) or len(variants) < self.min_variants:
                    raise TemplateError(
                        f"{task}/{arity}/{kind} needs >= {self.min_variants} variants"
                    )
                for tpl in variants:
                    for slot in slots:
                        if slot not in tpl:
                            raise TemplateError(
                                f"{task}/{arity}/{kind} template missing {slot}: {tpl!r}"
                            )
                    # answers pairing an index with a caption must put the
                    # index first; parse-back association depends on it
                    if kind == "answers" and "<INDEX>" in slots:
                        caption_slot = next(
                            (s for s in slots if s.startswith("<CAPTION")), None
                        )
                        if caption_slot and tpl.index("<INDEX>") > tpl.index(
                            caption_slot
                        ):
                            raise TemplateError(
                                f"{task}/{arity} answer must render <INDEX> before "
                                f"{caption_slot}: {tpl!r}"
                            )

    def variants(self, task: str, arity: str) -> tuple[list[str], list[str]]:
        """All (questions, answers) for a task/arity pair."""
        entry = self._data.get(task, {}).get(arity)
        if entry is None:
            raise TemplateError(f"no templates for task {task!r} arity {arity!r}")
        return list(entry["questions"]), list(entry["answers"])

    def sample(self, task: str, arity: str, rng: random.Random) -> tuple[str, str]:
        """One uniformly drawn question template and answer template."""
        questions, answers = self.variants(task, arity)
        return rng.choice(questions), rng.choice(answers)

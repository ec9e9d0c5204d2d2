"""Relative position codec: sequence positions as 4-digit token codes.

A 1-based position ``i`` in a sequence of length ``L`` is normalized to
``round(i/L, 4)`` and rendered as four digit tokens, so the 7th image of a
96-image sequence becomes 0.0729 -> ``<0><7><2><9>``. Only ten distinct
tokens (``<0>`` .. ``<9>``) exist. Absolute timestamps are recovered by
scaling the decoded fraction with the video duration.

The value 1.0000 does not fit in four digits; it is clamped to 0.9999 so
every code is exactly four tokens wide. The clamp affects every ratio
that rounds to 1.0000 (that is, i/L >= 0.99995, always including i = L),
where the round-trip error grows to at most one quantum (1e-4) instead
of the usual half quantum. Rounding is half-away-from-zero on the 4th
decimal and is done in exact integer arithmetic, so results never depend
on binary float representation of ``i/L``.

``quantization_error_report`` measures the temporal error of the
representation under two explicit models, because "the" error of a finite
code depends on what is being approximated:

* ``ROUNDING_ONLY`` -- pure 4-decimal rounding of a continuous target time.
  This is the precision of the code itself (mean ~0.0025% of the duration)
  and is independent of frame rate. The single boundary clamp is excluded
  here; it is a property of the token rendering, not of the rounding.
* ``FRAME_SAMPLING`` -- every source-frame time of a real video must be
  expressed through one of the uniformly sampled frames carried by the
  codec, so the error is dominated by the sampling stride, not the code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DomainError, TokenParseError

SCALE = 10_000        # four decimal digits
MAX_CODE = SCALE - 1  # 0.9999, the largest representable fraction

_TOKENS = tuple(f"<{d}>" for d in range(10))
_TOKEN_TO_DIGIT = {tok: d for d, tok in enumerate(_TOKENS)}


class TimeRepresentation(Enum):
    """How generators render (and parsers read) positions and timestamps."""

    RPT = "rpt"              # four digit tokens per position
    FREE_FORM = "free_form"  # seconds like "12.3", or a bare integer index


class IntervalUnit(Enum):
    RELATIVE = "relative"
    SECONDS = "seconds"


@dataclass(frozen=True, order=True)
class RelativePositionCode:
    """A normalized position 0.d1d2d3d4 stored as its four digits."""

    digits: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.digits) != 4 or any(
            not isinstance(d, int) or not 0 <= d <= 9 for d in self.digits
        ):
            raise DomainError(
                f"code digits must be four integers in 0..9, got {self.digits!r}"
            )

    @classmethod
    def from_int(cls, value: int) -> "RelativePositionCode":
        if not 0 <= value <= MAX_CODE:
            raise DomainError(f"code value {value} outside 0..{MAX_CODE}")
        d1, rest = divmod(value, 1000)
        d2, rest = divmod(rest, 100)
        d3, d4 = divmod(rest, 10)
        return cls((d1, d2, d3, d4))

    def as_int(self) -> int:
        d1, d2, d3, d4 = self.digits
        return 1000 * d1 + 100 * d2 + 10 * d3 + d4

    def value(self) -> float:
        """The encoded fraction digits/10000, in [0.0, 0.9999]."""
        return self.as_int() / SCALE

    def __str__(self) -> str:
        return render_code(self)


@dataclass(frozen=True)
class TimeInterval:
    """A start/end pair, either in seconds or as fractions of a duration."""

    start: float
    end: float
    unit: IntervalUnit = IntervalUnit.SECONDS

    def __post_init__(self) -> None:
        if not 0.0 <= self.start <= self.end:
            raise DomainError(
                f"interval requires 0 <= start <= end, got ({self.start}, {self.end})"
            )
        if self.unit is IntervalUnit.RELATIVE and self.end > 1.0:
            raise DomainError(f"relative interval end {self.end} exceeds 1.0")

    @property
    def length(self) -> float:
        return self.end - self.start

    def to_seconds(self, video_duration_s: float) -> "TimeInterval":
        """Scale a relative interval onto a concrete video duration."""
        if self.unit is IntervalUnit.SECONDS:
            return self
        if video_duration_s <= 0:
            raise DomainError(f"duration must be positive, got {video_duration_s}")
        return TimeInterval(
            self.start * video_duration_s,
            self.end * video_duration_s,
            IntervalUnit.SECONDS,
        )


def vocabulary() -> tuple[str, ...]:
    """The full token vocabulary: exactly the ten strings "<0>".."<9>"."""
    return _TOKENS


def encode_ratio(numerator: int, denominator: int) -> RelativePositionCode:
    """Encode the exact rational numerator/denominator in [0, 1] as a code.

    Integer-only half-away-from-zero rounding to 4 decimals, clamping
    1.0000 to 0.9999. Used for frame boundaries, where numerator 0 is
    legal.
    """
    if denominator < 1:
        raise DomainError(f"denominator must be >= 1, got {denominator}")
    if not 0 <= numerator <= denominator:
        raise DomainError(f"ratio {numerator}/{denominator} outside [0, 1]")
    # floor((SCALE*num + den/2) / den), exact for all integers
    scaled = (2 * SCALE * numerator + denominator) // (2 * denominator)
    return RelativePositionCode.from_int(min(scaled, MAX_CODE))


def encode_relative(index: int, length: int) -> RelativePositionCode:
    """Encode 1-based ``index`` of a ``length``-long sequence as a code.

    Computes round(index/length, 4) with half-away-from-zero rounding in
    integer arithmetic; ratios rounding to 1.0000 clamp to 0.9999.
    """
    if length < 1:
        raise DomainError(f"sequence length must be >= 1, got {length}")
    if not 1 <= index <= length:
        raise DomainError(f"index {index} outside valid range 1..{length}")
    return encode_ratio(index, length)


def encode_fraction(fraction: float) -> RelativePositionCode:
    """Encode a fraction in [0, 1] directly (used for frame boundaries)."""
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"fraction {fraction} outside [0, 1]")
    scaled = int(math.floor(fraction * SCALE + 0.5))
    return RelativePositionCode.from_int(min(scaled, MAX_CODE))


def decode_relative(code: RelativePositionCode) -> float:
    """The fraction digits/10000 encoded by ``code``."""
    return code.value()


def code_to_index(code: RelativePositionCode, length: int) -> int:
    """Nearest 1-based position for a decoded fraction.

    Inverse of :func:`encode_relative` for all length <= 10^4 / 2 (half a
    code quantum resolves to a unique position).
    """
    if length < 1:
        raise DomainError(f"sequence length must be >= 1, got {length}")
    nearest = int(math.floor(code.value() * length + 0.5))
    return min(length, max(1, nearest))


def code_to_tokens(code: RelativePositionCode) -> list[str]:
    return [_TOKENS[d] for d in code.digits]


def tokens_to_code(tokens: Sequence[str]) -> RelativePositionCode:
    """Parse exactly four digit tokens back into a code.

    Raises :class:`TokenParseError` naming the offending token and its
    1-based position on unknown tokens or wrong arity.
    """
    if len(tokens) != 4:
        raise TokenParseError(f"expected exactly 4 digit tokens, got {len(tokens)}")
    digits = []
    for pos, tok in enumerate(tokens, start=1):
        digit = _TOKEN_TO_DIGIT.get(tok)
        if digit is None:
            raise TokenParseError(f"unknown token {tok!r} at token {pos}")
        digits.append(digit)
    return RelativePositionCode(tuple(digits))


def render_code(code: RelativePositionCode) -> str:
    """Concatenate the four tokens with no separator, e.g. "<0><7><2><9>"."""
    return "".join(code_to_tokens(code))


def split_token_string(text: str) -> list[str]:
    """Split a concatenated token string into individual tokens.

    The whole string must consist of digit tokens; anything else raises
    :class:`TokenParseError` with the position of the first bad character.
    """
    tokens: list[str] = []
    i = 0
    while i < len(text):
        chunk = text[i : i + 3]
        if chunk not in _TOKEN_TO_DIGIT:
            raise TokenParseError(
                f"invalid token starting at character {i + 1}: {text[i:i+3]!r}"
            )
        tokens.append(chunk)
        i += 3
    return tokens


def code_from_string(text: str) -> RelativePositionCode:
    """Parse one rendered code such as "<0><7><2><9>"."""
    return tokens_to_code(split_token_string(text))


def to_timestamp(fraction: float, video_duration_s: float) -> float:
    """Reconstruct an absolute timestamp from a relative position.

    Returns ``fraction * video_duration_s`` at full float precision;
    callers round for display (see :func:`format_seconds`).
    """
    if video_duration_s <= 0:
        raise DomainError(f"duration must be positive, got {video_duration_s}")
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"fraction {fraction} outside [0, 1]")
    return fraction * video_duration_s


def format_seconds(seconds: float) -> str:
    """Render seconds at the 0.1 s display precision used in answers."""
    return f"{seconds:.1f}"


class ErrorModel(Enum):
    ROUNDING_ONLY = "rounding_only"
    FRAME_SAMPLING = "frame_sampling"


@dataclass(frozen=True)
class QuantizationErrorReport:
    """Temporal error statistics of the codec under one error model."""

    model: ErrorModel
    video_duration_s: float
    fps: float
    sampled_frames: int
    mean_abs_error_s: float
    mean_relative_error_pct: float
    max_abs_error_s: float

    def to_dict(self) -> dict:
        return {
            "model": self.model.value,
            "video_duration_s": self.video_duration_s,
            "fps": self.fps,
            "sampled_frames": self.sampled_frames,
            "mean_abs_error_s": self.mean_abs_error_s,
            "mean_relative_error_pct": self.mean_relative_error_pct,
            "max_abs_error_s": self.max_abs_error_s,
        }


def quantization_error_report(
    model: ErrorModel,
    video_duration_s: float,
    fps: float,
    sampled_frames: int,
    grid_points: int = 1_000_000,
) -> QuantizationErrorReport:
    """Measure codec temporal error for a video configuration.

    ROUNDING_ONLY sweeps a dense uniform grid of target times over the
    whole duration and quantizes each normalized time to 4 decimals; the
    result depends only on the duration (mean ~= quantum/4 = 0.0025% of
    it). FRAME_SAMPLING takes every source-frame time (duration * fps of
    them) as a target and measures the distance to the nearest
    reconstruction among the ``sampled_frames`` codec-carried frame
    positions; here the sampling stride dominates.
    """
    if video_duration_s <= 0 or fps <= 0 or sampled_frames < 1:
        raise DomainError(
            "duration, fps and sampled_frames must all be positive, got "
            f"({video_duration_s}, {fps}, {sampled_frames})"
        )
    duration = float(video_duration_s)
    if model is ErrorModel.ROUNDING_ONLY:
        if grid_points < 2:
            raise DomainError(f"grid_points must be >= 2, got {grid_points}")
        targets = np.linspace(0.0, duration, grid_points)
        quantized = np.floor(targets / duration * SCALE + 0.5) / SCALE
        errors = np.abs(targets - quantized * duration)
    elif model is ErrorModel.FRAME_SAMPLING:
        n_source = max(1, int(round(duration * fps)))
        targets = np.arange(n_source, dtype=np.float64) / fps
        reconstructed = np.array(
            [
                to_timestamp(decode_relative(encode_relative(i, sampled_frames)), duration)
                for i in range(1, sampled_frames + 1)
            ]
        )
        reconstructed = np.unique(reconstructed)
        slot = np.clip(np.searchsorted(reconstructed, targets), 1, len(reconstructed) - 1)
        if len(reconstructed) == 1:
            errors = np.abs(targets - reconstructed[0])
        else:
            left = np.abs(targets - reconstructed[slot - 1])
            right = np.abs(targets - reconstructed[slot])
            errors = np.minimum(left, right)
    else:
        raise DomainError(f"unknown error model {model!r}")
    mean_abs = float(errors.mean())
    return QuantizationErrorReport(
        model=model,
        video_duration_s=duration,
        fps=float(fps),
        sampled_frames=int(sampled_frames),
        mean_abs_error_s=mean_abs,
        mean_relative_error_pct=100.0 * mean_abs / duration,
        max_abs_error_s=float(errors.max()),
    )

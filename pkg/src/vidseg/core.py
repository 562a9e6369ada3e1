"""Domain types shared by every other module: class tables, label maps,
images, score maps, and video sequences.

All types are immutable after construction (arrays are copied and marked
read-only), so they are safe to share across threads. Operations are pure
functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np


def _frozen_array(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ClassDef:
    """One semantic class: small integer id, display name, RGB color."""

    id: int
    name: str
    color: Tuple[int, int, int]

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"class id must be >= 0, got {self.id}")
        r, g, b = self.color
        for v in (r, g, b):
            if not (0 <= int(v) <= 255):
                raise ValueError(f"color component out of range: {self.color}")


@dataclass(frozen=True)
class ClassTable:
    """The set of classes governing a dataset.

    Ids are unique and contiguous from 0. Exactly one class is the unknown
    class; it is excluded from score maps, training loss, and evaluation.
    Score-map channel j corresponds to ``scored_ids[j]`` (non-unknown ids in
    ascending order).
    """

    classes: Tuple[ClassDef, ...]
    unknown_id: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        ids = sorted(c.id for c in self.classes)
        if ids != list(range(len(self.classes))):
            raise ValueError(f"class ids must be unique and contiguous from 0, got {ids}")
        if self.unknown_id not in ids:
            raise ValueError(f"unknown id {self.unknown_id} not among class ids")
        if len(self.classes) - 1 < 2:
            raise ValueError("need at least 2 non-unknown classes")

    @property
    def num_ids(self) -> int:
        return len(self.classes)

    @property
    def scored_ids(self) -> Tuple[int, ...]:
        """Non-unknown class ids in ascending order (score-map channel order)."""
        return tuple(c for c in range(self.num_ids) if c != self.unknown_id)

    @property
    def num_scored(self) -> int:
        return self.num_ids - 1

    def id_to_channel(self) -> np.ndarray:
        """Lookup array mapping class id -> score channel, -1 for unknown."""
        lut = np.full(self.num_ids, -1, dtype=np.int64)
        for ch, cid in enumerate(self.scored_ids):
            lut[cid] = ch
        return lut

    def channel_to_id(self) -> np.ndarray:
        return np.array(self.scored_ids, dtype=np.int64)

    def by_id(self, cid: int) -> ClassDef:
        for c in self.classes:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def name_of(self, cid: int) -> str:
        return self.by_id(cid).name


@dataclass(frozen=True, eq=False)
class LabelMap:
    """H x W grid of class ids (row-major, integer dtype)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"label map dims must be >= 1, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"label map dtype must be integer, got {arr.dtype}")
        if arr.size and arr.min() < 0:
            raise ValueError("label map contains negative ids")
        object.__setattr__(self, "data", _frozen_array(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class Image:
    """H x W x 3 image with float values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image must be HxWx3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dims must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen_array(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """H x W x C real-valued per-class scores; channel j is scored_ids[j]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"score map must be HxWxC, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"score map dims must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("score map contains non-finite values")
        object.__setattr__(self, "data", _frozen_array(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def num_classes(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class Frame:
    """One video frame: image, optional label map, timestamp in seconds."""

    image: Image
    label: Optional[LabelMap]
    timestamp: float


@dataclass(frozen=True, eq=False)
class VideoSequence:
    """Ordered frames sharing dimensions, with a nominal frame rate in Hz.

    Cross-frame invariants (equal dimensions, strictly increasing
    timestamps, positive frame rate, label validity) are checked by
    ``validate_sequence`` rather than at construction so that malformed
    sequences can be represented and reported.
    """

    frames: Tuple[Frame, ...] = field(default_factory=tuple)
    frame_rate: float = 30.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)


def argmax_labels(scores: ScoreMap, table: ClassTable) -> LabelMap:
    """Per-pixel argmax over score channels, mapped to class ids.

    Ties resolve to the lowest class id (channels are in ascending-id order,
    and argmax returns the first maximum).
    """
    if scores.num_classes != table.num_scored:
        raise ValueError(
            f"score map has {scores.num_classes} channels, table defines "
            f"{table.num_scored} non-unknown classes"
        )
    channels = np.argmax(scores.data, axis=2)
    return LabelMap(table.channel_to_id()[channels])


def one_hot_scores(labels: LabelMap, table: ClassTable) -> ScoreMap:
    """One-hot score map for a label map; unknown pixels get all-zero scores."""
    lut = table.id_to_channel()
    if labels.data.max() >= table.num_ids:
        raise ValueError("label map contains ids outside the class table")
    ch = lut[labels.data]  # (H, W), -1 at unknown
    scores = np.zeros((labels.height, labels.width, table.num_scored))
    known = ch >= 0
    ii, jj = np.nonzero(known)
    scores[ii, jj, ch[known]] = 1.0
    return ScoreMap(scores)


def validate_sequence(seq: VideoSequence, table: ClassTable) -> List[str]:
    """Check sequence invariants; returns one message per violation.

    Violations are data, not failures: an empty list means the sequence is
    well-formed under the given class table.
    """
    violations: List[str] = []
    if seq.frame_rate <= 0:
        violations.append(f"frame_rate must be > 0, got {seq.frame_rate}")
    if not seq.frames:
        violations.append("sequence has no frames")
        return violations

    h0, w0 = seq.frames[0].image.height, seq.frames[0].image.width
    prev_t = None
    for i, fr in enumerate(seq.frames):
        if (fr.image.height, fr.image.width) != (h0, w0):
            violations.append(
                f"frame {i}: image dimensions {fr.image.height}x{fr.image.width} "
                f"differ from frame 0 ({h0}x{w0})"
            )
        if fr.label is not None:
            if (fr.label.height, fr.label.width) != (fr.image.height, fr.image.width):
                violations.append(
                    f"frame {i}: label dimensions {fr.label.height}x{fr.label.width} "
                    f"do not match image"
                )
            bad = np.setdiff1d(np.unique(fr.label.data), np.arange(table.num_ids))
            if bad.size:
                violations.append(
                    f"frame {i}: label ids {bad.tolist()} not in class table"
                )
        if prev_t is not None and fr.timestamp <= prev_t:
            violations.append(
                f"frame {i}: timestamp {fr.timestamp} not greater than previous {prev_t}"
            )
        prev_t = fr.timestamp
    return violations

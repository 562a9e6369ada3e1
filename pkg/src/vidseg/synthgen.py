"""Deterministic synthetic driving-scene generator.

Scenes are horizontal bands (sky / fence / road / fixed unknown margin at
the bottom) with slanted thin lane lines and rectangular movers (cars,
trucks) translating at bounded per-frame velocities, so motion is
continuous and smooth. Labels are exact by construction; images are the
class colors plus seeded noise and a mild global brightness drift,
quantized to the 8-bit grid so saving and reloading is bit-exact.

Static band boundaries sit on multiples of 8 (sky boundary on 32) when the
height allows, so coarse-stride subsampling degradation measures scene
content rather than band alignment.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .core import ClassDef, ClassTable, Frame, Image, LabelMap, VideoSequence

ROAD, SKY, FENCE, LANE, CAR, TRUCK, UNKNOWN = range(7)

_CLASS_DEFS = (
    ClassDef(ROAD, "road", (95, 95, 105)),
    ClassDef(SKY, "sky", (135, 190, 235)),
    ClassDef(FENCE, "fence", (170, 90, 40)),
    ClassDef(LANE, "lane", (235, 235, 210)),
    ClassDef(CAR, "car", (200, 40, 40)),
    ClassDef(TRUCK, "truck", (40, 90, 200)),
    ClassDef(UNKNOWN, "unknown", (0, 0, 0)),
)


def class_table() -> ClassTable:
    """The fixed 7-class table (6 scored classes plus unknown)."""
    return ClassTable(classes=_CLASS_DEFS, unknown_id=UNKNOWN)


@dataclass(frozen=True)
class SceneConfig:
    """Generator parameters; every derived quantity is a pure function of these."""

    width: int = 384
    height: int = 256
    num_frames: int = 30
    frame_rate: float = 30.0
    seed: int = 0
    num_cars: int = 2
    num_trucks: int = 1
    num_lanes: int = 2
    lane_width: int = 2
    max_speed: int = 2  # px/frame, bounds every mover and lane drift
    unknown_margin_rows: Optional[int] = None  # default: height // 8
    noise_sigma: float = 0.03
    brightness_amp: float = 0.04

    def __post_init__(self) -> None:
        if self.width < 32 or self.height < 32:
            raise ValueError(f"scene must be at least 32x32, got {self.height}x{self.width}")
        if self.num_frames < 2:
            raise ValueError("need at least 2 frames")
        if self.frame_rate <= 0:
            raise ValueError("frame rate must be > 0")
        if not (0 <= self.max_speed <= 3):
            raise ValueError("max_speed must lie in [0, 3] px/frame")
        if self.lane_width not in (1, 2):
            raise ValueError("lane_width must be 1 or 2")
        if self.num_cars < 0 or self.num_trucks < 0 or self.num_lanes < 0:
            raise ValueError("object counts must be >= 0")
        m = self.margin_rows
        if not (0 <= m <= self.height // 2):
            raise ValueError(f"unknown margin of {m} rows does not fit height {self.height}")

    @property
    def margin_rows(self) -> int:
        return self.height // 8 if self.unknown_margin_rows is None else self.unknown_margin_rows

    @property
    def unknown_fraction(self) -> float:
        """Exact fraction of pixels in the fixed unknown margin."""
        return self.margin_rows / self.height

    @property
    def bands(self) -> Tuple[int, int, int]:
        """(sky_end, road_start, road_end) row indices."""
        sky_end = 3 * self.height // 8
        fence_rows = max(2, self.height // 32)
        road_start = sky_end + fence_rows
        road_end = self.height - self.margin_rows
        if road_end - road_start < 8:
            raise ValueError("road band too small; reduce margin or object sizes")
        return sky_end, road_start, road_end


@dataclass(frozen=True)
class _Mover:
    cls: int
    y0: int
    h: int
    w: int
    x0: int
    vel: int  # signed px/frame


@dataclass(frozen=True)
class _LaneLine:
    x0: float
    slope: float  # px per row
    drift: float  # signed px/frame


def _plan_movers(cfg: SceneConfig, rng: np.random.Generator) -> List[_Mover]:
    _, road_start, road_end = cfg.bands
    n = cfg.num_cars + cfg.num_trucks
    if n == 0:
        return []
    band_h = (road_end - road_start) // n
    movers = []
    for i in range(n):
        is_car = i < cfg.num_cars
        cls = CAR if is_car else TRUCK
        h = max(3, cfg.height // (12 if is_car else 9))
        w = max(5, cfg.height // (8 if is_car else 5))
        h = min(h, max(2, band_h - 2))
        w = min(w, cfg.width // 3)
        band_top = road_start + i * band_h
        y0 = band_top + int(rng.integers(0, max(1, band_h - h)))
        vel = 0
        if cfg.max_speed > 0:
            vel = int(rng.integers(1, cfg.max_speed + 1))
            vel = min(vel, max(0, (cfg.width - w - 2) // (cfg.num_frames - 1)))
        direction = 1 if rng.random() < 0.5 else -1
        travel = vel * (cfg.num_frames - 1)
        if direction > 0:
            x0 = int(rng.integers(1, max(2, cfg.width - w - travel)))
        else:
            x0 = int(rng.integers(1 + travel, max(2 + travel, cfg.width - w)))
        movers.append(_Mover(cls, y0, h, w, x0, vel * direction))
    return movers


def _plan_lanes(cfg: SceneConfig, rng: np.random.Generator) -> List[_LaneLine]:
    _, road_start, road_end = cfg.bands
    road_h = road_end - road_start
    lanes = []
    for j in range(cfg.num_lanes):
        slope = float(rng.uniform(-0.5, 0.5))
        drift = 0.0
        if cfg.max_speed > 0:
            drift = float(rng.uniform(0.3, min(1.0, cfg.max_speed)))
            if rng.random() < 0.5:
                drift = -drift
        base = cfg.width * (j + 1) / (cfg.num_lanes + 1) + float(rng.uniform(-4, 4))
        # shift so the line stays inside the frame over all rows and frames
        lo = base + min(0.0, slope * road_h) + min(0.0, drift * (cfg.num_frames - 1))
        hi = base + max(0.0, slope * road_h) + max(0.0, drift * (cfg.num_frames - 1))
        if lo < 1.0:
            base += 1.0 - lo
        elif hi + cfg.lane_width > cfg.width - 1:
            base -= hi + cfg.lane_width - (cfg.width - 1)
        lanes.append(_LaneLine(base, slope, drift))
    return lanes


def _render_labels(
    cfg: SceneConfig, movers: List[_Mover], lanes: List[_LaneLine], t: int
) -> np.ndarray:
    sky_end, road_start, road_end = cfg.bands
    lab = np.full((cfg.height, cfg.width), ROAD, dtype=np.uint8)
    lab[:sky_end, :] = SKY
    lab[sky_end:road_start, :] = FENCE
    rows = np.arange(road_start, road_end)
    for ln in lanes:
        xs = np.rint(ln.x0 + ln.slope * (rows - road_start) + ln.drift * t).astype(int)
        xs = np.clip(xs, 0, cfg.width - cfg.lane_width)
        for r, x in zip(rows, xs):
            lab[r, x : x + cfg.lane_width] = LANE
    for m in movers:
        x = int(m.x0 + m.vel * t)
        x = max(0, min(cfg.width - m.w, x))
        lab[m.y0 : m.y0 + m.h, x : x + m.w] = m.cls
    if cfg.margin_rows:
        lab[cfg.height - cfg.margin_rows :, :] = UNKNOWN
    return lab


def generate(cfg: SceneConfig) -> VideoSequence:
    """Render one fully labeled sequence; identical seeds give identical bits."""
    rng = np.random.default_rng(cfg.seed)
    movers = _plan_movers(cfg, rng)
    lanes = _plan_lanes(cfg, rng)
    phase = float(rng.uniform(0, 2 * math.pi))
    color_lut = np.array([c.color for c in _CLASS_DEFS], dtype=np.float64) / 255.0

    frames = []
    for t in range(cfg.num_frames):
        lab = _render_labels(cfg, movers, lanes, t)
        img = color_lut[lab]
        img = img + rng.normal(0.0, cfg.noise_sigma, img.shape)
        img = img + cfg.brightness_amp * math.sin(2 * math.pi * t / cfg.num_frames + phase)
        img = np.clip(img, 0.0, 1.0)
        img = np.round(img * 255.0) / 255.0  # 8-bit grid: survives save/load exactly
        frames.append(
            Frame(image=Image(img), label=LabelMap(lab), timestamp=t / cfg.frame_rate)
        )
    return VideoSequence(frames=tuple(frames), frame_rate=cfg.frame_rate)


def generate_many(cfg: SceneConfig, count: int) -> List[VideoSequence]:
    """Generate ``count`` sequences with seeds cfg.seed, cfg.seed+1, ..."""
    return [generate(dataclasses.replace(cfg, seed=cfg.seed + i)) for i in range(count)]


def label_agreement(seq: VideoSequence, lag: int) -> float:
    """Mean fraction of pixels whose labels agree between frames t and t+lag."""
    pairs = [
        (a.label, b.label)
        for a, b in zip(seq.frames, seq.frames[lag:])
        if a.label is not None and b.label is not None
    ]
    if not pairs:
        raise ValueError(f"no labeled frame pairs at lag {lag}")
    fracs = [np.mean(a.data == b.data) for a, b in pairs]
    return float(np.mean(fracs))

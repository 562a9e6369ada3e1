"""On-disk dataset format, class-table config, and split handling.

Directory layout (all paths relative to the manifest's directory):

    root/classes.cfg                YAML class table (id, name, color, unknown flag)
    root/manifest.cfg               YAML manifest (sequences, timestamps, splits)
    root/seq_000/frame_0000.png     8-bit RGB frames
    root/seq_000/label_0000.png     8-bit single-channel id maps (lossless)

Label files may alternatively be RGB color maps (CamVid-style exports);
they are decoded through the class table's colors. Frames without a label
entry (null in the manifest) load as unannotated.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from PIL import Image as PILImage

from .core import ClassDef, ClassTable, Frame, Image, LabelMap, VideoSequence
from .errors import DataError

CLASSES_FILE = "classes.cfg"
MANIFEST_FILE = "manifest.cfg"
MANIFEST_VERSION = 1


def save_class_table(table: ClassTable, path: Path) -> None:
    doc = {
        "version": MANIFEST_VERSION,
        "classes": [
            {
                "id": c.id,
                "name": c.name,
                "color": list(c.color),
                "unknown": c.id == table.unknown_id,
            }
            for c in sorted(table.classes, key=lambda c: c.id)
        ],
    }
    path.write_text(yaml.safe_dump(doc, sort_keys=False))


def load_class_table(path: Path) -> ClassTable:
    if not path.is_file():
        raise DataError(f"class table file not found: {path}")
    doc = yaml.safe_load(path.read_text())
    try:
        defs = []
        unknown_id = None
        for entry in doc["classes"]:
            defs.append(
                ClassDef(int(entry["id"]), str(entry["name"]), tuple(int(v) for v in entry["color"]))
            )
            if entry.get("unknown"):
                if unknown_id is not None:
                    raise DataError(f"{path}: more than one class flagged unknown")
                unknown_id = int(entry["id"])
        if unknown_id is None:
            raise DataError(f"{path}: no class flagged unknown")
        return ClassTable(classes=tuple(defs), unknown_id=unknown_id)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed class table {path}: {exc}") from exc


def save_frame_image(img: Image, path: Path) -> None:
    arr = np.round(img.data * 255.0).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path)


def load_frame_image(path: Path) -> Image:
    if not path.is_file():
        raise DataError(f"frame file not found: {path}")
    arr = np.asarray(PILImage.open(path).convert("RGB"), dtype=np.float64)
    return Image(arr / 255.0)


def save_label_image(label: LabelMap, path: Path) -> None:
    if label.data.max() > 255:
        raise DataError("label ids above 255 cannot be stored in 8-bit files")
    PILImage.fromarray(label.data.astype(np.uint8), mode="L").save(path)


def _color_lut(table: ClassTable) -> Dict[Tuple[int, int, int], int]:
    lut: Dict[Tuple[int, int, int], int] = {}
    for c in table.classes:
        if c.color in lut:
            raise DataError(
                f"ambiguous color map: classes {lut[c.color]} and {c.id} share color {c.color}"
            )
        lut[c.color] = c.id
    return lut


def load_label_image(path: Path, table: ClassTable, strict: bool = True) -> LabelMap:
    """Decode a label file: single-channel files hold class ids directly,
    RGB files are decoded through the table's color map."""
    if not path.is_file():
        raise DataError(f"label file not found: {path}")
    pil = PILImage.open(path)
    if pil.mode in ("L", "P", "I", "I;16"):
        arr = np.asarray(pil.convert("L"), dtype=np.int64)
        bad = np.setdiff1d(np.unique(arr), np.arange(table.num_ids))
        if bad.size:
            raise DataError(f"{path}: label ids {bad.tolist()} not in class table")
        return LabelMap(arr)
    rgb = np.asarray(pil.convert("RGB"), dtype=np.int64)
    lut = _color_lut(table)
    out = np.full(rgb.shape[:2], -1, dtype=np.int64)
    for color, cid in lut.items():
        out[(rgb == np.array(color)).all(axis=2)] = cid
    if (out < 0).any():
        ii, jj = np.nonzero(out < 0)
        i, j = int(ii[0]), int(jj[0])
        color = tuple(int(v) for v in rgb[i, j])
        if strict:
            raise DataError(f"{path}: unmapped color {color} at pixel ({i}, {j})")
        out[out < 0] = table.unknown_id
    return LabelMap(out)


@dataclass(frozen=True)
class LoadedDataset:
    table: ClassTable
    sequences: Tuple[VideoSequence, ...]
    names: Tuple[str, ...]
    split: Dict[str, List[str]]

    def select(self, split_name: Optional[str]) -> List[VideoSequence]:
        """Sequences of one named split, or all sequences when None."""
        if split_name is None:
            return list(self.sequences)
        if split_name not in self.split:
            raise DataError(f"dataset has no split named {split_name!r}")
        wanted = set(self.split[split_name])
        out = [s for n, s in zip(self.names, self.sequences) if n in wanted]
        missing = wanted - set(self.names)
        if missing:
            raise DataError(f"split {split_name!r} references unknown sequences {sorted(missing)}")
        return out


def save_dataset(
    sequences: Sequence[VideoSequence],
    table: ClassTable,
    root: Path,
    split: Optional[Dict[str, List[int]]] = None,
    names: Optional[Sequence[str]] = None,
) -> Path:
    """Write frames, labels, class table, and manifest; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    save_class_table(table, root / CLASSES_FILE)
    if names is None:
        names = [f"seq_{i:03d}" for i in range(len(sequences))]
    if len(names) != len(sequences):
        raise ValueError("names and sequences must align")

    entries = []
    for name, seq in zip(names, sequences):
        seq_dir = root / name
        seq_dir.mkdir(exist_ok=True)
        frame_files: List[str] = []
        label_files: List[Optional[str]] = []
        stamps: List[float] = []
        for i, frame in enumerate(seq.frames):
            rel = f"{name}/frame_{i:04d}.png"
            save_frame_image(frame.image, root / rel)
            frame_files.append(rel)
            if frame.label is not None:
                lrel = f"{name}/label_{i:04d}.png"
                save_label_image(frame.label, root / lrel)
                label_files.append(lrel)
            else:
                label_files.append(None)
            stamps.append(float(frame.timestamp))
        entries.append(
            {
                "name": name,
                "frame_rate": float(seq.frame_rate),
                "frames": frame_files,
                "labels": label_files,
                "timestamps": stamps,
            }
        )

    split_names: Dict[str, List[str]] = {}
    if split:
        for sname, idxs in split.items():
            split_names[sname] = [names[i] for i in idxs]
    manifest = {
        "version": MANIFEST_VERSION,
        "classes": CLASSES_FILE,
        "sequences": entries,
        "splits": split_names,
    }
    path = root / MANIFEST_FILE
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path


def load_dataset(manifest_path: Path, strict: bool = True) -> LoadedDataset:
    """Load a dataset; images come back as [0,1] floats, labels as id maps."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_FILE
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    root = manifest_path.parent
    try:
        doc = yaml.safe_load(manifest_path.read_text())
        if doc.get("version") != MANIFEST_VERSION:
            raise DataError(f"unsupported manifest version {doc.get('version')}")
        table = load_class_table(root / doc["classes"])
        entry_list = doc["sequences"]
        split = {k: list(v) for k, v in (doc.get("splits") or {}).items()}
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed manifest {manifest_path}: {exc}") from exc

    sequences: List[VideoSequence] = []
    names: List[str] = []
    for entry in entry_list:
        name = str(entry["name"])
        rate = float(entry["frame_rate"])
        frame_files = entry["frames"]
        label_files = entry.get("labels") or [None] * len(frame_files)
        stamps = entry.get("timestamps") or [i / rate for i in range(len(frame_files))]
        if len(label_files) != len(frame_files) or len(stamps) != len(frame_files):
            raise DataError(f"sequence {name}: frame/label/timestamp lists do not align")
        frames: List[Frame] = []
        dims = None
        for i, (f_rel, l_rel, ts) in enumerate(zip(frame_files, label_files, stamps)):
            img = load_frame_image(root / f_rel)
            if dims is None:
                dims = (img.height, img.width)
            elif (img.height, img.width) != dims:
                raise DataError(
                    f"sequence {name}: frame {i} is {img.height}x{img.width}, "
                    f"expected {dims[0]}x{dims[1]}"
                )
            label = None
            if l_rel is not None:
                label = load_label_image(root / l_rel, table, strict=strict)
                if (label.height, label.width) != dims:
                    raise DataError(f"sequence {name}: label {i} does not match frame dims")
            frames.append(Frame(image=img, label=label, timestamp=float(ts)))
        sequences.append(VideoSequence(frames=tuple(frames), frame_rate=rate))
        names.append(name)
    return LoadedDataset(
        table=table, sequences=tuple(sequences), names=tuple(names), split=split
    )


def _class_histogram(seq: VideoSequence, table: ClassTable) -> np.ndarray:
    hist = np.zeros(table.num_scored, dtype=np.int64)
    lut = table.id_to_channel()
    for frame in seq.frames:
        if frame.label is None:
            continue
        ch = lut[frame.label.data]
        hist += np.bincount(ch[ch >= 0], minlength=table.num_scored)
    return hist


def _split_distance(train_hist: np.ndarray, test_hist: np.ndarray) -> float:
    tr = train_hist / max(1, train_hist.sum())
    te = test_hist / max(1, test_hist.sum())
    return float(np.abs(tr - te).sum())


_EXHAUSTIVE_LIMIT = 100_000


def split_by_distribution(
    sequences: Sequence[VideoSequence],
    table: ClassTable,
    train_fraction: float,
    seed: int = 0,
) -> Dict[str, List[int]]:
    """Assign sequence indices to train/test so the per-split class-pixel
    histograms are as close as possible (L1 on normalized histograms).

    Small datasets are searched exhaustively (the optimum is deterministic
    regardless of seed); larger ones fall back to a seeded greedy pass.
    """
    n = len(sequences)
    if n < 2:
        raise ValueError("need at least 2 sequences to split")
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train fraction must lie strictly between 0 and 1")
    k = min(n - 1, max(1, round(train_fraction * n)))
    hists = [_class_histogram(seq, table) for seq in sequences]

    if math.comb(n, k) <= _EXHAUSTIVE_LIMIT:
        best = None
        best_d = None
        for combo in itertools.combinations(range(n), k):
            train_h = sum(hists[i] for i in combo)
            test_h = sum(hists[i] for i in range(n) if i not in combo)
            d = _split_distance(train_h, test_h)
            if best_d is None or d < best_d:
                best, best_d = combo, d
        train = sorted(best)
    else:
        rng = np.random.default_rng(seed)
        order = list(rng.permutation(n))
        train = []
        test = []
        train_h = np.zeros(table.num_scored, dtype=np.int64)
        test_h = np.zeros(table.num_scored, dtype=np.int64)
        for idx in order:
            can_train = len(train) < k
            can_test = len(test) < n - k
            if can_train and can_test:
                d_tr = _split_distance(train_h + hists[idx], test_h)
                d_te = _split_distance(train_h, test_h + hists[idx])
                to_train = d_tr <= d_te
            else:
                to_train = can_train
            if to_train:
                train.append(idx)
                train_h += hists[idx]
            else:
                test.append(idx)
                test_h += hists[idx]
        train = sorted(train)
    test = [i for i in range(n) if i not in set(train)]
    return {"train": train, "test": test}

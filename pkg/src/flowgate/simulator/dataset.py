"""Labeled sequence collections: generation, disk layout, loading.

Disk layout, one directory per sequence:

    <root>/<class>/<seq_id>/frame_000.png ... frame_NNN.png
    <root>/<class>/<seq_id>/annotations.json   (per-frame box/keypoints)
    <root>/<class>/<seq_id>/label              (class name, plain text)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from ..geometry import FrameAnnotation, load_annotations, save_annotations
from ..imaging import read_image, write_image
from .scene import AttackClass, RenderedSequence, SceneSpec, SimulatorError, render

__all__ = ["SimDataset", "make_dataset", "save_dataset", "load_dataset",
           "CLASS_ORDER"]

CLASS_ORDER = (AttackClass.REAL, AttackClass.SCREEN_PHOTO,
               AttackClass.PRINTED_PHOTO, AttackClass.PRINTED_MASK,
               AttackClass.DYNAMIC_VIDEO, AttackClass.STATIC_VIDEO)

_SEED_STRIDE = 1_000_003


@dataclass
class SimDataset:
    """Balanced labeled sequences with a texture-seed-disjoint split."""

    sequences: list[RenderedSequence]
    train_idx: list[int]
    test_idx: list[int]
    seed: int

    def train_sequences(self) -> list[RenderedSequence]:
        return [self.sequences[i] for i in self.train_idx]

    def test_sequences(self) -> list[RenderedSequence]:
        return [self.sequences[i] for i in self.test_idx]

    def classes(self) -> list[AttackClass]:
        return sorted({s.label for s in self.sequences}, key=lambda c: c.value)


def make_dataset(n_per_class: int, seed: int,
                 classes: tuple[AttackClass, ...] = CLASS_ORDER,
                 frames: int = 30, frame_size: int = 320) -> SimDataset:
    """Render n sequences per class, split 80/20 on disjoint texture seeds."""
    if n_per_class < 1:
        raise SimulatorError("need at least one sequence per class")
    n_train = max(1, int(round(0.8 * n_per_class))) if n_per_class > 1 else 1
    sequences: list[RenderedSequence] = []
    train_idx: list[int] = []
    test_idx: list[int] = []
    for ci, cls in enumerate(classes):
        for k in range(n_per_class):
            texture_seed = seed * _SEED_STRIDE + ci * n_per_class + k
            spec = SceneSpec(attack=cls, texture_seed=texture_seed,
                             frames=frames, frame_size=frame_size)
            seq = render(spec)
            seq.seq_id = f"{cls.value}_{k:03d}"
            idx = len(sequences)
            sequences.append(seq)
            (train_idx if k < n_train else test_idx).append(idx)
    return SimDataset(sequences=sequences, train_idx=train_idx,
                      test_idx=test_idx, seed=seed)


def save_sequence(seq: RenderedSequence, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        write_image(frame, out / f"frame_{i:03d}.png")
    annotations = [FrameAnnotation(box=b, keypoints=k)
                   for b, k in zip(seq.boxes, seq.keypoints)]
    save_annotations(out / "annotations.json", annotations,
                     extra={"label": seq.label.value,
                            "rel_heights": [float(r) for r in seq.rel_heights]})
    (out / "label").write_text(seq.label.value + "\n")
    return out


def save_dataset(ds: SimDataset, root: str | Path) -> None:
    root = Path(root)
    for split, idxs in (("train", ds.train_idx), ("test", ds.test_idx)):
        for i in idxs:
            seq = ds.sequences[i]
            save_sequence(seq, root / split / seq.label.value / seq.seq_id)


def load_sequence(seq_dir: str | Path) -> RenderedSequence:
    """Sequence from a simulator directory; no analytic scene handle."""
    seq_dir = Path(seq_dir)
    frame_paths = sorted(seq_dir.glob("frame_*.png"))
    if not frame_paths:
        raise SimulatorError(f"no frames in {seq_dir}")
    ann_path = seq_dir / "annotations.json"
    if not ann_path.is_file():
        raise SimulatorError(f"missing annotations.json in {seq_dir}")
    annotations, extra = load_annotations(ann_path)
    if len(annotations) != len(frame_paths):
        raise SimulatorError(
            f"{seq_dir}: {len(annotations)} annotations for {len(frame_paths)} frames")
    frames = [read_image(p) for p in frame_paths]
    boxes, kps = [], []
    for i, ann in enumerate(annotations):
        if ann.box is None or ann.keypoints is None:
            raise SimulatorError(f"{seq_dir}: frame {i} lacks box/keypoints")
        boxes.append(ann.box)
        kps.append(ann.keypoints)
    label_file = seq_dir / "label"
    label_text = (label_file.read_text().strip() if label_file.is_file()
                  else extra.get("label", ""))
    try:
        label = AttackClass(label_text)
    except ValueError as exc:
        raise SimulatorError(f"{seq_dir}: unknown label {label_text!r}") from exc
    frame_h = frames[0].height
    rels = extra.get("rel_heights") or [b.h / frame_h for b in boxes]
    return RenderedSequence(frames=frames, boxes=boxes, keypoints=kps,
                            rel_heights=[float(r) for r in rels], label=label,
                            seq_id=seq_dir.name)


def load_dataset(root: str | Path) -> SimDataset:
    """Dataset from a saved tree; split follows the train/test directories."""
    root = Path(root)
    if not root.is_dir():
        raise SimulatorError(f"dataset root {root} is not a directory")
    sequences: list[RenderedSequence] = []
    train_idx: list[int] = []
    test_idx: list[int] = []
    splits = [d for d in ("train", "test") if (root / d).is_dir()]
    if not splits:
        raise SimulatorError(f"{root} has no train/ or test/ subdirectory")
    for split in splits:
        for class_dir in sorted((root / split).iterdir()):
            if not class_dir.is_dir():
                continue
            for seq_dir in sorted(class_dir.iterdir()):
                if not seq_dir.is_dir():
                    continue
                idx = len(sequences)
                sequences.append(load_sequence(seq_dir))
                (train_idx if split == "train" else test_idx).append(idx)
    return SimDataset(sequences=sequences, train_idx=train_idx,
                      test_idx=test_idx, seed=-1)

"""Frame/class tensor containers and file (de)serialization.

Activity is encoded implicitly: a target vector of norm 1 marks the class
active in that frame, norm 0 marks it inactive. No separate activity
channel is stored; flags are always re-derived from target norms.

File formats
  frames, CSV (default): header ``t,c,tx,ty,tz,px,py,pz``, one row per
    (t, c) cell. Cells without a row default to zero target AND zero
    prediction, so any cell with a non-zero prediction needs an explicit
    row even when the class is inactive.
  frames, JSONL: one object per frame,
    ``{"t": int, "targets": [[x,y,z], ...], "predictions": [[x,y,z], ...]}``.
  counts: CSV with header ``class,name,count``.

Floats are written with 17 significant digits, so a save/load round trip
reproduces every value bit-exactly.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - annotation only, avoids an import cycle
    from seldkit.metrics import SeldMetrics

# Tolerance of the {0, 1} norm test; values pass through decimal text.
ACTIVITY_TOL = 1e-9

LAYOUTS = ("csv", "jsonl")

_FRAME_HEADER = ["t", "c", "tx", "ty", "tz", "px", "py", "pz"]
_COUNT_HEADER = ["class", "name", "count"]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class AccdoaFrame:
    """One time frame: a target and a prediction 3-vector per class.

    Target norms must be exactly 0 or 1 within ACTIVITY_TOL; anything else
    is rejected at construction. Arrays are copied and marked read-only,
    so frames are safe to share across threads.
    """

    targets: np.ndarray      # (C, 3)
    predictions: np.ndarray  # (C, 3)
    frame_index: int = 0

    def __post_init__(self):
        t = np.array(self.targets, dtype=np.float64)
        p = np.array(self.predictions, dtype=np.float64)
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError(f"targets must have shape (C, 3), got {t.shape}")
        if t.shape[0] < 1:
            raise ValueError("a frame needs at least one class")
        if p.shape != t.shape:
            raise ValueError(f"predictions shape {p.shape} != targets shape {t.shape}")
        if not (np.isfinite(t).all() and np.isfinite(p).all()):
            raise ValueError(f"non-finite values in frame t={self.frame_index}")
        norms = np.linalg.norm(t, axis=1)
        ok = (np.abs(norms) <= ACTIVITY_TOL) | (np.abs(norms - 1.0) <= ACTIVITY_TOL)
        if not ok.all():
            c = int(np.argmin(ok))
            raise ValueError(
                f"target norm {norms[c]!r} is neither 0 nor 1 "
                f"at (t={self.frame_index}, c={c})"
            )
        object.__setattr__(self, "targets", _freeze(t))
        object.__setattr__(self, "predictions", _freeze(p))

    @property
    def num_classes(self) -> int:
        return self.targets.shape[0]

    @property
    def activity(self) -> np.ndarray:
        """Boolean per-class activity, re-derived from target norms."""
        return np.linalg.norm(self.targets, axis=1) > 0.5


@dataclass(frozen=True)
class Dataset:
    """A frame sequence plus class names and active-frame counts.

    frame_counts is always re-derived from the frames; passing it in only
    cross-checks the caller's bookkeeping. Counts loaded from an external
    count file feed prior construction directly and are never attached to
    a Dataset. Immutable after construction.
    """

    frames: tuple[AccdoaFrame, ...]
    class_names: tuple[str, ...] | None = None
    frame_counts: np.ndarray | None = None

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 1:
            raise ValueError("a dataset needs at least one frame")
        num_classes = frames[0].num_classes
        for f in frames:
            if f.num_classes != num_classes:
                raise ValueError(
                    f"frame t={f.frame_index} has {f.num_classes} classes, "
                    f"expected {num_classes}"
                )
        targets = np.stack([f.targets for f in frames])
        predictions = np.stack([f.predictions for f in frames])
        activity = np.linalg.norm(targets, axis=2) > 0.5
        counts = activity.sum(axis=0).astype(np.int64)
        if self.frame_counts is not None:
            given = np.asarray(self.frame_counts, dtype=np.int64)
            if given.shape != counts.shape or not np.array_equal(given, counts):
                raise ValueError(
                    f"frame_counts {given.tolist()} do not match the counts "
                    f"derived from frame activity {counts.tolist()}"
                )
        if self.class_names is None:
            names = tuple(f"class{c}" for c in range(num_classes))
        else:
            names = tuple(str(n) for n in self.class_names)
            if len(names) != num_classes:
                raise ValueError(f"got {len(names)} class names for {num_classes} classes")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "frame_counts", _freeze(counts))
        object.__setattr__(self, "_targets", _freeze(targets))
        object.__setattr__(self, "_predictions", _freeze(predictions))
        object.__setattr__(self, "_activity", _freeze(activity))

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def num_classes(self) -> int:
        return self.frames[0].num_classes

    @property
    def targets(self) -> np.ndarray:
        """Dense (T, C, 3) target stack."""
        return self._targets

    @property
    def predictions(self) -> np.ndarray:
        """Dense (T, C, 3) prediction stack."""
        return self._predictions

    @property
    def activity(self) -> np.ndarray:
        """(T, C) boolean activity derived from target norms."""
        return self._activity

    def with_predictions(self, predictions: np.ndarray) -> "Dataset":
        """Copy of this dataset with the prediction stack replaced."""
        predictions = np.asarray(predictions, dtype=np.float64)
        if predictions.shape != self._targets.shape:
            raise ValueError(
                f"predictions shape {predictions.shape} != {self._targets.shape}"
            )
        frames = tuple(
            AccdoaFrame(targets=f.targets, predictions=predictions[i], frame_index=f.frame_index)
            for i, f in enumerate(self.frames)
        )
        return Dataset(frames=frames, class_names=self.class_names)


# ---------------------------------------------------------------------------
# frames files
# ---------------------------------------------------------------------------

def _parse_csv_frames(path) -> tuple[np.ndarray, np.ndarray]:
    cells: dict[tuple[int, int], tuple[list[float], list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _FRAME_HEADER:
            raise ValueError(f"{path}: expected header {','.join(_FRAME_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise ValueError(f"{path}: row {line_no}: expected 8 fields, got {len(row)}")
            try:
                t, c = int(row[0]), int(row[1])
                vals = [float(x) for x in row[2:]]
            except ValueError as exc:
                raise ValueError(f"{path}: row {line_no}: {exc}") from None
            if t < 0 or c < 0:
                raise ValueError(f"{path}: row {line_no}: negative frame or class index")
            if (t, c) in cells:
                raise ValueError(f"{path}: row {line_no}: duplicate cell (t={t}, c={c})")
            cells[(t, c)] = (vals[:3], vals[3:])
    if not cells:
        raise ValueError(f"{path}: file contains no data rows")
    num_frames = max(t for t, _ in cells) + 1
    num_classes = max(c for _, c in cells) + 1
    targets = np.zeros((num_frames, num_classes, 3))
    predictions = np.zeros((num_frames, num_classes, 3))
    for (t, c), (tv, pv) in cells.items():
        targets[t, c] = tv
        predictions[t, c] = pv
    return targets, predictions


def _parse_jsonl_frames(path) -> tuple[np.ndarray, np.ndarray]:
    rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    num_classes = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: row {line_no}: invalid JSON ({exc})") from None
            try:
                t = int(obj["t"])
                tv = np.asarray(obj["targets"], dtype=np.float64)
                pv = np.asarray(obj["predictions"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: row {line_no}: {exc}") from None
            if tv.ndim != 2 or tv.shape[1] != 3 or pv.shape != tv.shape:
                raise ValueError(
                    f"{path}: row {line_no}: targets/predictions must both be C x 3"
                )
            if num_classes is None:
                num_classes = tv.shape[0]
            elif tv.shape[0] != num_classes:
                raise ValueError(
                    f"{path}: row {line_no}: {tv.shape[0]} classes, expected {num_classes}"
                )
            if t in rows:
                raise ValueError(f"{path}: row {line_no}: duplicate frame t={t}")
            rows[t] = (tv, pv)
    if not rows:
        raise ValueError(f"{path}: file contains no data rows")
    num_frames = max(rows) + 1
    if set(rows) != set(range(num_frames)):
        missing = sorted(set(range(num_frames)) - set(rows))[:5]
        raise ValueError(f"{path}: missing frame indices {missing}")
    targets = np.stack([rows[t][0] for t in range(num_frames)])
    predictions = np.stack([rows[t][1] for t in range(num_frames)])
    return targets, predictions


def load_frames(path, layout: str = "csv") -> Dataset:
    """Read a reference/prediction file into a Dataset.

    Activity flags and frame counts are recomputed from the target norms;
    a target whose norm is neither 0 nor 1 (within ACTIVITY_TOL) raises a
    ValueError naming the offending (t, c) cell.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    parse = _parse_csv_frames if layout == "csv" else _parse_jsonl_frames
    targets, predictions = parse(path)
    frames = tuple(
        AccdoaFrame(targets=targets[t], predictions=predictions[t], frame_index=t)
        for t in range(targets.shape[0])
    )
    return Dataset(frames=frames)


def save_frames(dataset: Dataset, path, layout: str = "csv") -> None:
    """Write a Dataset so that load_frames reproduces it bit-exactly."""
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    if layout == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_FRAME_HEADER)
            for f in dataset.frames:
                for c in range(dataset.num_classes):
                    writer.writerow(
                        [f.frame_index, c]
                        + [_fmt(x) for x in f.targets[c]]
                        + [_fmt(x) for x in f.predictions[c]]
                    )
    else:
        with open(path, "w") as fh:
            for f in dataset.frames:
                obj = {
                    "t": f.frame_index,
                    "targets": [[float(x) for x in v] for v in f.targets],
                    "predictions": [[float(x) for x in v] for v in f.predictions],
                }
                fh.write(json.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# count files and metric reports
# ---------------------------------------------------------------------------

def load_counts(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a per-class count CSV; returns (names, counts) ordered by class."""
    entries: dict[int, tuple[str, int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _COUNT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(_COUNT_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {line_no}: expected 3 fields, got {len(row)}")
            try:
                idx, name, count = int(row[0]), row[1], int(row[2])
            except ValueError as exc:
                raise ValueError(f"{path}: row {line_no}: {exc}") from None
            if count < 0:
                raise ValueError(f"{path}: row {line_no}: negative count")
            if idx in entries:
                raise ValueError(f"{path}: row {line_no}: duplicate class index {idx}")
            entries[idx] = (name, count)
    if not entries:
        raise ValueError(f"{path}: file contains no data rows")
    if set(entries) != set(range(len(entries))):
        raise ValueError(f"{path}: class indices must cover 0..{len(entries) - 1}")
    names = tuple(entries[i][0] for i in range(len(entries)))
    counts = np.array([entries[i][1] for i in range(len(entries))], dtype=np.int64)
    return names, counts


def save_report(metrics: "SeldMetrics", path, class_names=None) -> None:
    """Write the per-class metric table plus a trailing macro row.

    Columns, in fixed order: class, ER20, F20, LE_CD, LR_CD. The file has
    one data row per class and one final row labelled ``macro``.
    """
    per_class = metrics.per_class
    if len(per_class) == 0:
        raise ValueError("metrics carry no per-class entries")
    if class_names is None:
        class_names = [f"class{c}" for c in range(len(per_class))]
    elif len(class_names) != len(per_class):
        raise ValueError(
            f"got {len(class_names)} class names for {len(per_class)} classes"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "ER20", "F20", "LE_CD", "LR_CD"])
        for name, m in zip(class_names, per_class):
            writer.writerow([name, _fmt(m.er20), _fmt(m.f20), _fmt(m.le_cd), _fmt(m.lr_cd)])
        writer.writerow(
            ["macro", _fmt(metrics.er20), _fmt(metrics.f20), _fmt(metrics.le_cd), _fmt(metrics.lr_cd)]
        )

"""CSV readers and writers for truth, detections, estimates and metric series.

Every writer goes through a temp file and an atomic rename, so a failed run
never leaves a half-written CSV behind.  Floats are written with ``repr`` so
files round-trip exactly.
"""
from __future__ import annotations

import csv
import io as _io
import os
import tempfile
from pathlib import Path

import numpy as np

from .frames import MEAS_DIM, DetectionFrame, GroundTruthFrame, TruthObject
from .metrics import METRIC_COLUMNS, FrameRecord

TRUTH_COLUMNS = ("frame", "truth_id", "type", "cx", "cy", "vx", "vy", "w", "h")
DETECTION_COLUMNS = ("frame", "detector", "cx", "cy", "w", "h")
ESTIMATE_COLUMNS = ("frame", "type", "label", "cx", "cy", "vx", "vy", "w", "h", "weight")


class FormatError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    write_text_atomic(path, buf.getvalue())


def _read_rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if tuple(first) != tuple(header):
            raise FormatError(f"{path}: line 1: expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if row:
                yield lineno, row


def _check_frame_order(path, lineno, frame, last):
    if last is not None and frame < last:
        raise FormatError(f"{path}: line {lineno}: frame {frame} after frame {last} (frames must be nondecreasing)")


# -- truth ------------------------------------------------------------------


def write_truth_csv(path, frames: list[GroundTruthFrame]) -> None:
    rows = ((f.frame, o.truth_id, o.type_index, *o.state) for f in frames for o in f.objects)
    write_csv(path, TRUTH_COLUMNS, rows)


def read_truth_csv(path, n_frames: int | None = None) -> list[GroundTruthFrame]:
    objs, last = [], None
    for lineno, row in _read_rows(path, TRUTH_COLUMNS):
        try:
            frame, tid, typ = int(row[0]), int(row[1]), int(row[2])
            state = np.array([float(v) for v in row[3:9]])
            if len(row) != 9:
                raise ValueError("wrong column count")
        except (ValueError, IndexError) as e:
            raise FormatError(f"{path}: line {lineno}: malformed row ({e})") from None
        _check_frame_order(path, lineno, frame, last)
        last = frame
        objs.append((frame, TruthObject(tid, typ, state)))
    count = n_frames if n_frames is not None else (objs[-1][0] + 1 if objs else 0)
    frames = [GroundTruthFrame(k) for k in range(count)]
    for k, o in objs:
        if k < count:
            frames[k].objects.append(o)
    return frames


# -- detections ---------------------------------------------------------------


def write_detections_csv(path, frames: list[list[DetectionFrame]], provenance: bool = False) -> None:
    header = DETECTION_COLUMNS + (("provenance",) if provenance else ())
    rows = []
    for per_det in frames:
        for df in per_det:
            tags = df.provenance if provenance else None
            for k, z in enumerate(df.measurements):
                row = [df.frame, df.detector, *z]
                if provenance:
                    row.append(tags[k] if tags is not None else "")
                rows.append(row)
    write_csv(path, header, rows)


def _read_sim_csv(path, n_detectors, n_frames):
    with open(path, newline="") as fh:
        first = fh.readline().strip()
    if not first:
        return []
    cols = tuple(first.split(","))
    with_prov = cols == DETECTION_COLUMNS + ("provenance",)
    header = cols if with_prov else DETECTION_COLUMNS
    entries, last = [], None
    for lineno, row in _read_rows(path, header):
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} columns, got {len(row)}")
            frame, det = int(row[0]), int(row[1])
            z = [float(v) for v in row[2:6]]
            if frame < 0 or det < 0 or not np.all(np.isfinite(z)):
                raise ValueError("negative index or non-finite value")
        except ValueError as e:
            raise FormatError(f"{path}: line {lineno}: malformed row ({e})") from None
        _check_frame_order(path, lineno, frame, last)
        last = frame
        entries.append((frame, det, z, row[6] if with_prov else None))
    if not entries and n_frames is None:
        return []
    N = n_detectors if n_detectors is not None else max(e[1] for e in entries) + 1
    count = n_frames if n_frames is not None else entries[-1][0] + 1
    return _bucket(entries, N, count, 0, with_prov)


def _bucket(entries, n_detectors, count, first_frame, with_prov):
    zs = {(k, j): [] for k in range(count) for j in range(n_detectors)}
    tags = {key: [] for key in zs}
    for frame, det, z, tag in entries:
        key = (frame - first_frame, det)
        if key not in zs:
            if det >= n_detectors:
                raise FormatError(f"detector index {det} out of range for {n_detectors} detectors")
            continue
        zs[key].append(z)
        tags[key].append(tag)
    return [
        [
            DetectionFrame(k + first_frame, j, np.array(zs[k, j]).reshape(-1, MEAS_DIM), tags[k, j] if with_prov else None)
            for j in range(n_detectors)
        ]
        for k in range(count)
    ]


def _read_mot(path, n_frames):
    entries, last = [], None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                if len(parts) < 7:
                    raise ValueError(f"expected at least 7 columns, got {len(parts)}")
                frame = int(float(parts[0]))
                left, top, bw, bh = (float(v) for v in parts[2:6])
                if not np.all(np.isfinite([left, top, bw, bh])):
                    raise ValueError("non-finite box")
            except ValueError as e:
                raise FormatError(f"{path}: line {lineno}: malformed MOT row ({e})") from None
            _check_frame_order(path, lineno, frame, last)
            last = frame
            entries.append((frame, 0, [left + bw / 2, top + bh / 2, bw, bh], None))
    if not entries and n_frames is None:
        return []
    # MOT frames are 1-based
    count = n_frames if n_frames is not None else entries[-1][0]
    return _bucket(entries, 1, count, 1, False)


def ingest_detections(path, format: str = "sim_csv", n_detectors: int | None = None, n_frames: int | None = None) -> list[list[DetectionFrame]]:
    """Per-frame lists of :class:`DetectionFrame`, one per detector.

    Frames without rows come back as empty frames.  ``mot`` files map to a
    single detector with measurements converted to box centroids.
    """
    if format == "sim_csv":
        return _read_sim_csv(path, n_detectors, n_frames)
    if format == "mot":
        return _read_mot(path, n_frames)
    raise ValueError(f"unknown detection format {format!r}")


# -- estimates and metrics ------------------------------------------------------


def write_estimates_csv(path, rows) -> None:
    """``rows``: iterable of ``(frame, type, label, state[6], weight)``."""
    write_csv(path, ESTIMATE_COLUMNS, ((f, t, lab, *s, w) for f, t, lab, s, w in rows))


def read_estimates_csv(path) -> list[tuple[int, int, int, np.ndarray, float]]:
    out, last = [], None
    for lineno, row in _read_rows(path, ESTIMATE_COLUMNS):
        try:
            if len(row) != len(ESTIMATE_COLUMNS):
                raise ValueError("wrong column count")
            frame, typ, label = int(row[0]), int(row[1]), int(row[2])
            vals = [float(v) for v in row[3:]]
        except ValueError as e:
            raise FormatError(f"{path}: line {lineno}: malformed row ({e})") from None
        _check_frame_order(path, lineno, frame, last)
        last = frame
        out.append((frame, typ, label, np.array(vals[:6]), vals[6]))
    return out


def write_metrics_csv(path, records: list[FrameRecord]) -> None:
    write_csv(path, METRIC_COLUMNS, (r.row() for r in records))


def read_metrics_csv(path) -> list[dict]:
    out = []
    for lineno, row in _read_rows(path, METRIC_COLUMNS):
        try:
            out.append(
                {
                    "frame": int(row[0]),
                    "ospa": float(row[1]),
                    "card_truth": int(row[2]),
                    "card_est": int(row[3]),
                    "card_err": int(row[4]),
                    "disc_rate": float(row[5]),
                }
            )
        except (ValueError, IndexError) as e:
            raise FormatError(f"{path}: line {lineno}: malformed row ({e})") from None
    return out

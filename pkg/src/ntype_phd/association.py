"""Frame-to-frame labelling of extracted estimates with a Hungarian solver."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .phd import TypedEstimate


@dataclass(frozen=True)
class Assignment:
    pairs: list[tuple[int, int]]
    unmatched_rows: list[int]
    unmatched_cols: list[int]
    cost: float


def _hungarian_rows_le_cols(a: np.ndarray) -> np.ndarray:
    """Shortest-augmenting-path Hungarian method with row/column potentials.

    ``a`` is ``(n, m)`` with ``n <= m``.  Returns ``col_of_row`` (length n).
    Rows are inserted in index order and the first minimum wins every scan,
    so the result is deterministic.
    """
    n, m = a.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j] = row (1-based) matched to column j, 0 = free
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, m + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


def solve_assignment(costs) -> Assignment:
    """Minimum-total-cost matching of size ``min(rows, cols)``."""
    a = np.asarray(costs, dtype=float)
    if a.ndim != 2:
        if a.size:
            raise ValueError("cost matrix must be 2-D")
        a = a.reshape(0, 0)
    n, m = a.shape
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)), 0.0)
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ValueError("costs must be finite and nonnegative")
    if n <= m:
        cols = _hungarian_rows_le_cols(a)
        pairs = [(r, int(c)) for r, c in enumerate(cols)]
    else:
        rows = _hungarian_rows_le_cols(a.T)
        pairs = sorted((int(r), c) for c, r in enumerate(rows))
    matched_r = {r for r, _ in pairs}
    matched_c = {c for _, c in pairs}
    return Assignment(
        pairs,
        [r for r in range(n) if r not in matched_r],
        [c for c in range(m) if c not in matched_c],
        float(sum(a[r, c] for r, c in pairs)),
    )


@dataclass
class Track:
    label: int
    type_index: int
    last_state: np.ndarray
    last_seen_frame: int
    age: int = 1


@dataclass(frozen=True)
class LabeledEstimate:
    label: int
    estimate: TypedEstimate


def centroid_costs(tracks: list[Track], estimates: list[TypedEstimate]) -> np.ndarray:
    """Euclidean centroid distances, tracks as rows and estimates as columns."""
    if not tracks or not estimates:
        return np.zeros((len(tracks), len(estimates)))
    a = np.stack([t.last_state[:2] for t in tracks])
    b = np.stack([e.mean[:2] for e in estimates])
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def label_frame(tracks: list[Track], estimates: list[TypedEstimate], gate: float, next_label: int, frame: int = 0):
    """Carry labels from ``tracks`` onto ``estimates``.

    Pairs whose distance exceeds ``gate`` are split; unmatched tracks are
    deleted at once and unmatched estimates open tracks with fresh labels
    starting at ``next_label``.

    Returns ``(tracks, labeled, deleted_labels, new_labels)``.
    """
    costs = centroid_costs(tracks, estimates)
    sol = solve_assignment(costs)
    assigned = {c: r for r, c in sol.pairs if costs[r, c] <= gate}
    kept_rows = set(assigned.values())

    new_tracks, labeled, new_labels = [], [], []
    for c, est in enumerate(estimates):
        if c in assigned:
            old = tracks[assigned[c]]
            t = Track(old.label, old.type_index, est.mean.copy(), frame, old.age + 1)
        else:
            t = Track(next_label, est.type_index, est.mean.copy(), frame)
            new_labels.append(next_label)
            next_label += 1
        new_tracks.append(t)
        labeled.append(LabeledEstimate(t.label, est))
    deleted = [t.label for r, t in enumerate(tracks) if r not in kept_rows]
    return new_tracks, labeled, deleted, new_labels


@dataclass
class TrackLabeler:
    """Per-type labeller holding the live tracks and the label counter."""

    type_index: int
    gate: float = 50.0
    tracks: list[Track] = field(default_factory=list)
    next_label: int = 0

    def __call__(self, estimates: list[TypedEstimate], frame: int) -> list[LabeledEstimate]:
        self.tracks, labeled, _, new = label_frame(self.tracks, estimates, self.gate, self.next_label, frame)
        self.next_label += len(new)
        return labeled

"""OSPA, cardinality error, type discrimination and label-switch rate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .association import solve_assignment

METRIC_COLUMNS = ("frame", "ospa", "card_truth", "card_est", "card_err", "disc_rate")


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return X.reshape(0, 2)
    X = np.atleast_2d(X)
    if not np.all(np.isfinite(X)):
        raise ValueError("point coordinates must be finite")
    return X


def ospa(X, Y, p: float = 1.0, c: float = 100.0) -> float:
    """OSPA distance of order ``p`` and cutoff ``c`` between two point sets."""
    if p < 1 or c <= 0:
        raise ValueError("need p >= 1 and c > 0")
    X, Y = _as_points(X), _as_points(Y)
    if len(X) > len(Y):
        X, Y = Y, X
    m, n = len(X), len(Y)
    if n == 0:
        return 0.0
    if m == 0:
        return float(c)
    d = np.minimum(c, np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)) ** p
    loc = solve_assignment(d).cost
    return float(((loc + c**p * (n - m)) / n) ** (1.0 / p))


def cardinality_error(truth_count: int, est_count: int) -> int:
    return abs(int(truth_count) - int(est_count))


@dataclass(frozen=True)
class Discrimination:
    rate: float
    correct: int
    evaluated: int  # estimates with some truth inside the gate
    false_tracks: int  # estimates with no truth inside the gate
    empty: bool = False  # no estimates at all; rate is 1 by convention


def discrimination_rate(est_points, est_types, truth_points, truth_types, gate: float = 50.0) -> Discrimination:
    """Fraction of gated estimates whose nearest ground-truth target has the same type."""
    E, T = _as_points(est_points), _as_points(truth_points)
    est_types = np.asarray(est_types, dtype=int).reshape(len(E))
    truth_types = np.asarray(truth_types, dtype=int).reshape(len(T))
    if len(E) == 0:
        return Discrimination(1.0, 0, 0, 0, empty=True)
    if len(T) == 0:
        return Discrimination(1.0, 0, 0, len(E))
    d = np.linalg.norm(E[:, None, :] - T[None, :, :], axis=-1)
    nearest = np.argmin(d, axis=1)
    gated = d[np.arange(len(E)), nearest] <= gate
    correct = int(np.sum(gated & (truth_types[nearest] == est_types)))
    evaluated = int(gated.sum())
    rate = correct / evaluated if evaluated else 1.0
    return Discrimination(rate, correct, evaluated, len(E) - evaluated)


def ospa_axioms_check(n_samples: int = 100, max_points: int = 5, p: float = 1.0, c: float = 100.0, seed: int = 0, scale: float = 150.0) -> dict:
    """Sample random small point sets and check the metric axioms.

    Returns a dict of booleans plus the worst violations seen.
    """
    rng = np.random.default_rng(seed)

    def sample():
        return rng.uniform(0.0, scale, size=(int(rng.integers(0, max_points + 1)), 2))

    sym = ident = bounded = tri = True
    worst_tri = 0.0
    for _ in range(n_samples):
        X, Y, Z = sample(), sample(), sample()
        dxy, dyx = ospa(X, Y, p, c), ospa(Y, X, p, c)
        sym &= abs(dxy - dyx) <= 1e-9 * c
        ident &= ospa(X, X, p, c) <= 1e-9 and (dxy > 0 or _same_set(X, Y))
        dxz, dyz = ospa(X, Z, p, c), ospa(Y, Z, p, c)
        bounded &= all(0.0 <= v <= c + 1e-9 for v in (dxy, dxz, dyz))
        slack = dxz - (dxy + dyz)
        worst_tri = max(worst_tri, slack)
        tri &= slack <= 1e-9 * c
    return {"symmetry": sym, "identity": ident, "bounded": bounded, "triangle": tri, "worst_triangle_slack": worst_tri}


def _same_set(X, Y) -> bool:
    if len(X) != len(Y):
        return False
    return np.allclose(np.sort(X, axis=0), np.sort(Y, axis=0))


@dataclass
class FrameRecord:
    frame: int
    ospa: float
    card_truth: int
    card_est: int
    card_err: int
    disc_rate: float
    disc: Discrimination = field(repr=False, default=None)

    def row(self) -> tuple:
        return (self.frame, self.ospa, self.card_truth, self.card_est, self.card_err, self.disc_rate)


def evaluate_frame(frame: int, est_points, est_types, truth_points, truth_types, p=1.0, c=100.0, gate=50.0) -> FrameRecord:
    """Pooled (all types together) OSPA, cardinality and discrimination for one frame."""
    E, T = _as_points(est_points), _as_points(truth_points)
    disc = discrimination_rate(E, est_types, T, truth_types, gate)
    return FrameRecord(frame, ospa(E, T, p, c), len(T), len(E), cardinality_error(len(T), len(E)), disc.rate, disc)


def per_type_ospa(est_points, est_types, truth_points, truth_types, n_types: int, p=1.0, c=100.0) -> list[float]:
    E, T = _as_points(est_points), _as_points(truth_points)
    et, tt = np.asarray(est_types, dtype=int), np.asarray(truth_types, dtype=int)
    return [ospa(E[et == i], T[tt == i], p, c) for i in range(n_types)]


def summarize(records: list[FrameRecord]) -> dict:
    """Frame averages; the discrimination rate pools counts over all frames."""
    if not records:
        return {"frames": 0, "mean_ospa": 0.0, "mean_card_err": 0.0, "discrimination_rate": 1.0}
    correct = sum(r.disc.correct for r in records if r.disc is not None)
    evaluated = sum(r.disc.evaluated for r in records if r.disc is not None)
    return {
        "frames": len(records),
        "mean_ospa": float(np.mean([r.ospa for r in records])),
        "mean_card_err": float(np.mean([r.card_err for r in records])),
        "discrimination_rate": correct / evaluated if evaluated else 1.0,
    }


def label_switch_rate(truth_frames, labeled_frames, gate: float = 50.0) -> float:
    """Fraction of truth targets matched in consecutive frames whose estimate label changed.

    ``truth_frames[k]`` is a list of ``(truth_id, type, (x, y))`` and
    ``labeled_frames[k]`` a list of ``(label, type, (x, y))``.  Truth and
    estimates are matched per type by minimum-cost assignment within ``gate``.
    """
    prev: dict[int, tuple[int, int]] = {}
    matched = switched = 0
    for truth, labeled in zip(truth_frames, labeled_frames):
        cur: dict[int, tuple[int, int]] = {}
        for t in {tt for _, tt, _ in truth}:
            tr = [(tid, xy) for tid, tt, xy in truth if tt == t]
            es = [(lab, xy) for lab, et, xy in labeled if et == t]
            if not tr or not es:
                continue
            d = np.linalg.norm(np.array([x for _, x in tr])[:, None] - np.array([x for _, x in es])[None], axis=-1)
            for r, col in solve_assignment(d).pairs:
                if d[r, col] <= gate:
                    cur[tr[r][0]] = (t, es[col][0])
        for tid, key in cur.items():
            if tid in prev:
                matched += 1
                switched += prev[tid] != key
        prev = cur
    return switched / matched if matched else 0.0

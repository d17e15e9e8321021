"""Synthetic multi-type scenarios: typed ground truth and confused, cluttered detections."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import MEAS_DIM, DetectionFrame, GroundTruthFrame, TruthObject
from .phd import box_observation, cv_transition


@dataclass
class Region:
    """Image frame plus the admissible box-size range, in pixels."""

    width: float = 720.0
    height: float = 576.0
    w_min: float = 5.0
    w_max: float = 100.0
    h_min: float = 5.0
    h_max: float = 100.0

    def box(self) -> np.ndarray:
        """Measurement-space box ``(4, 2)`` for [cx, cy, w, h]."""
        return np.array(
            [[0.0, self.width], [0.0, self.height], [self.w_min, self.w_max], [self.h_min, self.h_max]]
        )

    @property
    def volume(self) -> float:
        return float(np.prod(np.diff(self.box(), axis=1)))


@dataclass
class TargetSpec:
    """One scheduled target: alive on frames ``birth_frame <= k < death_frame``."""

    type_index: int
    birth_frame: int
    initial_state: list[float]
    death_frame: int | None = None


@dataclass
class Scenario:
    n_types: int
    frame_count: int
    region: Region
    targets: list[TargetSpec]
    sigma_v: list[float]  # per type, pixels/frame^2 (motion model the filter assumes)
    sigma_r: list[list[float]]  # [detector][type], pixels
    p_D: list[list[float]]  # [detector][type]
    lambda_c: list[float]  # expected clutter count per frame, per detector
    seed: int = 0
    truth_sigma_v: list[float] | None = None  # truth acceleration noise; None means sigma_v

    def motion_noise(self, type_index: int) -> float:
        src = self.sigma_v if self.truth_sigma_v is None else self.truth_sigma_v
        return float(src[type_index])

    def validate(self) -> None:
        N = self.n_types
        if np.shape(self.p_D) != (N, N) or np.shape(self.sigma_r) != (N, N):
            raise ValueError("p_D and sigma_r must be N x N")
        if len(self.sigma_v) != N or len(self.lambda_c) != N:
            raise ValueError("sigma_v and lambda_c need one entry per type")
        if self.truth_sigma_v is not None and len(self.truth_sigma_v) != N:
            raise ValueError("truth_sigma_v needs one entry per type")
        pD = np.asarray(self.p_D, dtype=float)
        if np.any((pD < 0) | (pD > 1)):
            raise ValueError("p_D entries must lie in [0, 1]")
        for k, t in enumerate(self.targets):
            if not 0 <= t.type_index < N:
                raise ValueError(f"targets[{k}]: type {t.type_index} out of range")
            if not 0 <= t.birth_frame < self.frame_count:
                raise ValueError(f"targets[{k}]: birth frame {t.birth_frame} outside the scenario")
            if t.death_frame is not None and t.death_frame <= t.birth_frame:
                raise ValueError(f"targets[{k}]: death frame must follow birth frame")
            if len(t.initial_state) != 6:
                raise ValueError(f"targets[{k}]: initial state must have 6 entries")


def _clip_state(x: np.ndarray, region: Region) -> np.ndarray:
    """Keep the target in frame; the outward velocity component is reflected."""
    x = x.copy()
    for pos, vel, hi in ((0, 2, region.width), (1, 3, region.height)):
        if x[pos] < 0.0:
            x[pos], x[vel] = 0.0, abs(x[vel])
        elif x[pos] > hi:
            x[pos], x[vel] = hi, -abs(x[vel])
    x[4] = np.clip(x[4], region.w_min, region.w_max)
    x[5] = np.clip(x[5], region.h_min, region.h_max)
    return x


def _process_noise(rng: np.random.Generator, sigma: float, dt: float = 1.0) -> np.ndarray:
    # piecewise-constant white acceleration on the centroid, random walk on size
    a = rng.normal(0.0, sigma, size=4)
    return np.array([dt**2 / 2 * a[0], dt**2 / 2 * a[1], dt * a[0], dt * a[1], dt * a[2], dt * a[3]])


def generate_truth(scn: Scenario) -> list[GroundTruthFrame]:
    scn.validate()
    F = cv_transition(1.0)
    frames = [GroundTruthFrame(k) for k in range(scn.frame_count)]
    for tid, spec in enumerate(scn.targets):
        rng = np.random.default_rng([scn.seed, 0, tid])
        end = scn.frame_count if spec.death_frame is None else min(spec.death_frame, scn.frame_count)
        x = _clip_state(np.asarray(spec.initial_state, dtype=float), scn.region)
        for k in range(spec.birth_frame, end):
            if k > spec.birth_frame:
                x = _clip_state(F @ x + _process_noise(rng, scn.motion_noise(spec.type_index)), scn.region)
            frames[k].objects.append(TruthObject(tid, spec.type_index, x))
    return frames


def simulate_detections(truth: GroundTruthFrame, scn: Scenario) -> list[DetectionFrame]:
    """Detector outputs for one frame: true hits, confusions and Poisson clutter.

    Randomness is keyed on ``(seed, frame)`` so any frame can be regenerated alone.
    """
    rng = np.random.default_rng([scn.seed, 1, truth.frame])
    H = box_observation()
    box = scn.region.box()
    out = []
    for j in range(scn.n_types):
        zs, tags = [], []
        for obj in truth.objects:
            i = obj.type_index
            if rng.random() < scn.p_D[j][i]:
                z = H @ obj.state + rng.normal(0.0, scn.sigma_r[j][i], size=MEAS_DIM)
                zs.append(np.clip(z, box[:, 0], box[:, 1]))
                tags.append(f"true:{obj.truth_id}" if i == j else f"confusion:{i}:{obj.truth_id}")
        n_clutter = rng.poisson(scn.lambda_c[j])
        if n_clutter:
            zs.extend(rng.uniform(box[:, 0], box[:, 1], size=(n_clutter, MEAS_DIM)))
            tags.extend(["clutter"] * n_clutter)
        out.append(DetectionFrame(truth.frame, j, np.array(zs).reshape(-1, MEAS_DIM), tags))
    return out


def simulate(scn: Scenario) -> tuple[list[GroundTruthFrame], list[list[DetectionFrame]]]:
    truth = generate_truth(scn)
    return truth, [simulate_detections(t, scn) for t in truth]


def replicate_seeds(seed: int, n: int) -> list[int]:
    """Independent per-replicate seeds spawned from one root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


# -- presets ----------------------------------------------------------------


def _football_targets() -> list[TargetSpec]:
    # two teams running across each other in lanes, plus a referee cutting through
    t = []
    for k in range(5):
        t.append(TargetSpec(0, 0, [80.0 + 30 * k, 100.0 + 90 * k, 3.0, 0.5, 22.0, 50.0]))
    for k in range(5):
        t.append(TargetSpec(1, 0, [640.0 - 30 * k, 130.0 + 90 * k, -3.0, -0.5, 22.0, 50.0]))
    t.append(TargetSpec(2, 0, [360.0, 60.0, 0.0, 4.0, 20.0, 48.0]))
    t[4].death_frame = 70
    t.append(TargetSpec(0, 25, [100.0, 300.0, 2.0, 0.0, 22.0, 50.0]))
    return t


def _urban_targets() -> list[TargetSpec]:
    t = []
    for k in range(6):
        t.append(TargetSpec(0, 5 * k, [100.0 + 180 * k, 250.0 + 10 * (k % 2), (-1) ** k * 1.5, 0.0, 35.0, 90.0]))
    for k in range(4):
        t.append(TargetSpec(1, 0, [1100.0 - 300 * k, 200.0 + 20 * k, -6.0 + 4 * k, 0.0, 160.0, 110.0]))
    t[-1].death_frame = 60
    return t


def preset_scenarios() -> dict[str, Scenario]:
    football_pd = [
        [0.93, 0.24, 0.50],
        [0.24, 0.99, 0.18],
        [0.19, 0.17, 0.99],
    ]
    return {
        "football3": Scenario(
            n_types=3,
            frame_count=100,
            region=Region(720.0, 576.0, 5.0, 100.0, 5.0, 100.0),
            targets=_football_targets(),
            sigma_v=[5.0, 5.0, 5.0],
            sigma_r=[[6.0] * 3 for _ in range(3)],
            p_D=football_pd,
            lambda_c=[10.0, 10.0, 10.0],
            truth_sigma_v=[0.2, 0.2, 0.2],
        ),
        "urban2": Scenario(
            n_types=2,
            frame_count=100,
            region=Region(1242.0, 375.0, 5.0, 400.0, 5.0, 300.0),
            targets=_urban_targets(),
            sigma_v=[5.0, 6.0],
            sigma_r=[[7.0, 7.0], [7.0, 7.0]],
            p_D=[[0.83, 0.10], [0.30, 0.86]],
            lambda_c=[10.0, 10.0],
            truth_sigma_v=[0.2, 0.2],
        ),
        "single": Scenario(
            n_types=1,
            frame_count=110,
            region=Region(720.0, 576.0, 5.0, 100.0, 5.0, 100.0),
            targets=[TargetSpec(0, 0, [300.0, 250.0, 2.0, 1.0, 24.0, 52.0])],
            sigma_v=[5.0],
            sigma_r=[[6.0]],
            p_D=[[0.95]],
            lambda_c=[10.0],
            truth_sigma_v=[0.2],
        ),
    }

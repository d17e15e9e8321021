"""Per-frame containers shared by the simulator, the filter and the I/O layer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MEAS_DIM = 4  # [cx, cy, w, h]
STATE_DIM = 6  # [cx, cy, vx, vy, w, h]


@dataclass
class DetectionFrame:
    """Measurement set of one detector at one frame.

    ``provenance`` is simulator bookkeeping (``"true:<id>"``,
    ``"confusion:<src_type>:<id>"`` or ``"clutter"``); the filter never reads it.
    """

    frame: int
    detector: int
    measurements: np.ndarray = field(default_factory=lambda: np.zeros((0, MEAS_DIM)))
    provenance: list[str] | None = None

    def __post_init__(self):
        z = np.asarray(self.measurements, dtype=float)
        if z.size == 0:
            z = z.reshape(0, MEAS_DIM)
        self.measurements = np.atleast_2d(z)
        if self.provenance is not None and len(self.provenance) != len(self.measurements):
            raise ValueError("provenance length does not match measurement count")

    def __len__(self) -> int:
        return len(self.measurements)

    def stripped(self) -> DetectionFrame:
        """Copy without provenance tags (what the filter is allowed to see)."""
        return DetectionFrame(self.frame, self.detector, self.measurements.copy())


@dataclass(frozen=True)
class TruthObject:
    truth_id: int
    type_index: int
    state: np.ndarray

    @property
    def centroid(self) -> np.ndarray:
        return self.state[:2]


@dataclass
class GroundTruthFrame:
    frame: int
    objects: list[TruthObject] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.objects)

    def of_type(self, type_index: int) -> list[TruthObject]:
        return [o for o in self.objects if o.type_index == type_index]

"""N-type Gaussian-mixture PHD filter.

Each target type ``i`` keeps its own Gaussian-mixture intensity.  Type ``i``
is updated with its own detector's measurements only, and detections that
detector ``i`` produces on targets of the other types enter the update as a
structured clutter term built from the other types' *predicted* intensities.
With all confusion probabilities zero the recursion is exactly N independent
standard GM-PHD filters.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .frames import MEAS_DIM, STATE_DIM, DetectionFrame
from .gaussian import (
    CovarianceError,
    GaussianComponent,
    batch_marginal_chols,
    batch_mvn_logpdf,
    batch_predict,
    batch_update_terms,
    robust_cholesky,
)

log = logging.getLogger(__name__)


def cv_transition(dt: float = 1.0) -> np.ndarray:
    """Constant velocity on the centroid, random walk on box size."""
    I2, Z2 = np.eye(2), np.zeros((2, 2))
    return np.block([[I2, dt * I2, Z2], [Z2, I2, Z2], [Z2, Z2, I2]])


def cv_process_noise(sigma_v: float, dt: float = 1.0) -> np.ndarray:
    I2, Z2 = np.eye(2), np.zeros((2, 2))
    return sigma_v**2 * np.block(
        [
            [dt**4 / 4 * I2, dt**3 / 2 * I2, Z2],
            [dt**3 / 2 * I2, dt**2 * I2, Z2],
            [Z2, Z2, dt**2 * I2],
        ]
    )


def box_observation() -> np.ndarray:
    """Selects [cx, cy, w, h] out of [cx, cy, vx, vy, w, h]."""
    I2, Z2 = np.eye(2), np.zeros((2, 2))
    return np.block([[I2, Z2, Z2], [Z2, Z2, I2]])


@dataclass
class FilterConfig:
    """Model parameters of the N-type filter.

    Index conventions: ``H[j][i]``, ``R[j][i]`` and ``p_D[j, i]`` describe
    detector ``j`` observing a target of type ``i``; the diagonal is true
    detection, off-diagonal entries are confusion.  ``clutter_box`` is the
    ``(d_z, 2)`` measurement-space box over which background clutter is
    uniform.
    """

    n_types: int
    F: list[np.ndarray]
    Q: list[np.ndarray]
    p_S: np.ndarray
    birth_cov: list[np.ndarray]
    birth_weight: np.ndarray
    lambda_c: np.ndarray
    clutter_box: np.ndarray
    H: list[list[np.ndarray]]
    R: list[list[np.ndarray]]
    p_D: np.ndarray
    prune_T: float = 1e-5
    merge_U: float = 4.0
    extract_threshold: float = 0.5
    max_components: int = 100

    def __post_init__(self):
        self.p_S = np.asarray(self.p_S, dtype=float).reshape(self.n_types)
        self.birth_weight = np.asarray(self.birth_weight, dtype=float).reshape(self.n_types)
        self.lambda_c = np.asarray(self.lambda_c, dtype=float).reshape(self.n_types)
        self.p_D = np.asarray(self.p_D, dtype=float).reshape(self.n_types, self.n_types)
        self.clutter_box = np.asarray(self.clutter_box, dtype=float)
        self.validate()
        lo, hi = self.clutter_box[:, 0], self.clutter_box[:, 1]
        self._box_logvolume = float(np.log(hi - lo).sum())

    def validate(self) -> None:
        N = self.n_types
        if N < 1:
            raise ValueError("n_types must be >= 1")
        for name in ("F", "Q", "birth_cov"):
            if len(getattr(self, name)) != N:
                raise ValueError(f"{name} needs one matrix per type")
        for name in ("H", "R"):
            rows = getattr(self, name)
            if len(rows) != N or any(len(r) != N for r in rows):
                raise ValueError(f"{name} must be an N x N nested list")
        for name, arr in (("p_S", self.p_S), ("p_D", self.p_D)):
            bad = np.argwhere(~((arr >= 0) & (arr <= 1)))
            if bad.size:
                idx = tuple(int(k) for k in bad[0])
                raise ValueError(f"{name}{list(idx)} = {arr[idx]} outside [0, 1]")
        if np.any(self.birth_weight < 0) or np.any(self.lambda_c < 0):
            raise ValueError("birth_weight and lambda_c must be nonnegative")
        if self.clutter_box.shape != (MEAS_DIM, 2) or np.any(self.clutter_box[:, 1] <= self.clutter_box[:, 0]):
            raise ValueError("clutter_box must be (4, 2) with lower < upper bounds")
        if not (self.prune_T > 0 and self.merge_U > 0 and self.max_components >= 1):
            raise ValueError("need prune_T > 0, merge_U > 0, max_components >= 1")
        for i in range(N):
            others = [self.p_D[j, i] for j in range(N) if j != i]
            if others and self.p_D[i, i] <= max(others):
                log.warning("type %d: true detection p_D=%.3g not above max confusion %.3g", i, self.p_D[i, i], max(others))

    def clutter_logintensity(self, i: int, Z: np.ndarray) -> np.ndarray:
        """log of λ_i · uniform density over the box, -inf outside it."""
        Z = np.asarray(Z, dtype=float).reshape(-1, MEAS_DIM)
        inside = np.all((Z >= self.clutter_box[:, 0]) & (Z <= self.clutter_box[:, 1]), axis=1)
        with np.errstate(divide="ignore"):
            level = np.log(self.lambda_c[i]) - self._box_logvolume
        return np.where(inside, level, -np.inf)

    def without_confusion(self) -> FilterConfig:
        p_D = np.diag(np.diag(self.p_D))
        return replace(self, p_D=p_D)

    def single_type(self, i: int) -> FilterConfig:
        """Standalone single-type filter for type ``i`` (confusion dropped)."""
        return FilterConfig(
            n_types=1,
            F=[self.F[i]],
            Q=[self.Q[i]],
            p_S=[self.p_S[i]],
            birth_cov=[self.birth_cov[i]],
            birth_weight=[self.birth_weight[i]],
            lambda_c=[self.lambda_c[i]],
            clutter_box=self.clutter_box,
            H=[[self.H[i][i]]],
            R=[[self.R[i][i]]],
            p_D=[[self.p_D[i, i]]],
            prune_T=self.prune_T,
            merge_U=self.merge_U,
            extract_threshold=self.extract_threshold,
            max_components=self.max_components,
        )

    @classmethod
    def constant_velocity(
        cls,
        n_types: int,
        sigma_v,
        sigma_r,
        p_D,
        p_S,
        lambda_c,
        clutter_box,
        birth_weight=1e-4,
        birth_cov_diag=(100, 100, 25, 25, 20, 20),
        dt: float = 1.0,
        **thresholds,
    ) -> FilterConfig:
        """Box-tracking model: CV dynamics per type, [cx, cy, w, h] observation.

        ``sigma_v`` is per type; ``sigma_r`` is an N x N matrix (detector j,
        type i) or anything broadcastable to it.
        """
        N = n_types
        sigma_v = np.broadcast_to(np.asarray(sigma_v, dtype=float), (N,))
        sigma_r = np.broadcast_to(np.asarray(sigma_r, dtype=float), (N, N))
        H = box_observation()
        return cls(
            n_types=N,
            F=[cv_transition(dt) for _ in range(N)],
            Q=[cv_process_noise(s, dt) for s in sigma_v],
            p_S=np.broadcast_to(np.asarray(p_S, dtype=float), (N,)),
            birth_cov=[np.diag(np.asarray(birth_cov_diag, dtype=float)) for _ in range(N)],
            birth_weight=np.broadcast_to(np.asarray(birth_weight, dtype=float), (N,)),
            lambda_c=np.broadcast_to(np.asarray(lambda_c, dtype=float), (N,)),
            clutter_box=clutter_box,
            H=[[H.copy() for _ in range(N)] for _ in range(N)],
            R=[[sigma_r[j, i] ** 2 * np.eye(MEAS_DIM) for i in range(N)] for j in range(N)],
            p_D=p_D,
            **thresholds,
        )


@dataclass
class TypedIntensity:
    """Gaussian-mixture intensity of one target type, stored as stacked arrays."""

    type_index: int
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @classmethod
    def empty(cls, type_index: int, dim: int = STATE_DIM) -> TypedIntensity:
        return cls(type_index, np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)))

    @classmethod
    def from_components(cls, type_index: int, comps: list[GaussianComponent], dim: int = STATE_DIM):
        if not comps:
            return cls.empty(type_index, dim)
        return cls(
            type_index,
            np.array([c.weight for c in comps]),
            np.stack([c.mean for c in comps]),
            np.stack([c.cov for c in comps]),
        )

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def total_mass(self) -> float:
        """Expected number of targets of this type."""
        return float(self.weights.sum())

    @property
    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(w, m, P) for w, m, P in zip(self.weights, self.means, self.covs)]

    def concat(self, other: TypedIntensity) -> TypedIntensity:
        return TypedIntensity(
            self.type_index,
            np.concatenate([self.weights, other.weights]),
            np.concatenate([self.means, other.means]),
            np.concatenate([self.covs, other.covs]),
        )


@dataclass(frozen=True)
class TypedEstimate:
    type_index: int
    mean: np.ndarray
    weight: float
    count: int  # number of estimates extracted for this type at this frame

    @property
    def centroid(self) -> np.ndarray:
        return self.mean[:2]


def birth_intensity(measurements, cfg: FilterConfig, type_index: int) -> TypedIntensity:
    """One birth component per measurement, zero velocity, fixed covariance and weight."""
    Z = np.asarray(measurements, dtype=float).reshape(-1, MEAS_DIM)
    H = cfg.H[type_index][type_index]
    n = len(Z)
    # H is a selection matrix, so Hᵀ z places [cx, cy, w, h] and zeros the velocity
    means = Z @ H
    covs = np.broadcast_to(cfg.birth_cov[type_index], (n,) + cfg.birth_cov[type_index].shape).copy()
    return TypedIntensity(type_index, np.full(n, cfg.birth_weight[type_index]), means, covs)


def predict(prior: TypedIntensity, births: TypedIntensity, cfg: FilterConfig) -> TypedIntensity:
    """Births (as-is) followed by the survival-thinned, propagated prior."""
    i = prior.type_index
    if len(prior) == 0:
        surv = prior
    else:
        w, m, P = batch_predict(prior.weights, prior.means, prior.covs, cfg.F[i], cfg.Q[i], cfg.p_S[i])
        surv = TypedIntensity(i, w, m, P)
    return replace(births, type_index=i).concat(surv)


def _confusion_logintensity(Z: np.ndarray, i: int, predicted: list[TypedIntensity], cfg: FilterConfig) -> np.ndarray:
    out = np.full(len(Z), -np.inf)
    if len(Z) == 0:
        return out
    terms = [out]
    for j, pred_j in enumerate(predicted):
        # weighted by p_D[j, i] (not [i, j]) and integrated over type j's predicted intensity
        p = cfg.p_D[j, i]
        if j == i or p == 0.0 or len(pred_j) == 0:
            continue
        eta, L = batch_marginal_chols(pred_j.means, pred_j.covs, cfg.H[j][i], cfg.R[j][i], f"confusion S ({j}, {i})")
        with np.errstate(divide="ignore"):
            logw = np.log(p) + np.log(pred_j.weights)
        terms.append(logsumexp(batch_mvn_logpdf(Z, eta, L) + logw[None, :], axis=1))
    if len(terms) == 1:
        return out
    return logsumexp(np.stack(terms, axis=1), axis=1)


def confusion_clutter_logintensity(z, type_index: int, predicted: list[TypedIntensity], cfg: FilterConfig):
    """log of the clutter intensity at ``z`` induced by the other types' predicted targets.

    Accepts a single measurement (returns a float) or an ``(m, 4)`` array.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    with np.errstate(divide="ignore"):
        out = _confusion_logintensity(z.reshape(-1, MEAS_DIM), type_index, predicted, cfg)
    return float(out[0]) if single else out


def update(predicted_i: TypedIntensity, frame: DetectionFrame, all_predicted: list[TypedIntensity], cfg: FilterConfig) -> TypedIntensity:
    """PHD update of one type with its own detector's measurement set.

    Output layout: the ``V`` missed-detection terms first, then ``V``
    detection terms per measurement in measurement order, ``(|Z| + 1) V``
    components in total.
    """
    i = predicted_i.type_index
    if frame.detector != i:
        raise ValueError(f"type {i} must be updated with detector {i}'s measurements, got detector {frame.detector}")
    Z = frame.measurements
    m, n = len(Z), len(predicted_i)
    pD = cfg.p_D[i, i]
    missed_w = (1.0 - pD) * predicted_i.weights
    if m == 0 or n == 0:
        return TypedIntensity(i, missed_w, predicted_i.means.copy(), predicted_i.covs.copy())

    H, R = cfg.H[i][i], cfg.R[i][i]
    eta, L, K, P_post = batch_update_terms(predicted_i.means, predicted_i.covs, H, R, f"S (type {i})")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_num = np.log(pD) + np.log(predicted_i.weights)[None, :] + batch_mvn_logpdf(Z, eta, L)
        log_cs = cfg.clutter_logintensity(i, Z)
        log_ct = _confusion_logintensity(Z, i, all_predicted, cfg)
        log_den = logsumexp(np.column_stack([log_cs, log_ct, log_num]), axis=1)
        det_w = np.where(np.isfinite(log_den)[:, None], np.exp(log_num - log_den[:, None]), 0.0)

    resid = Z[:, None, :] - eta[None, :, :]  # (m, n, dz)
    det_means = predicted_i.means[None] + np.einsum("nij,mnj->mni", K, resid)
    return TypedIntensity(
        i,
        np.concatenate([missed_w, det_w.ravel()]),
        np.concatenate([predicted_i.means, det_means.reshape(m * n, -1)]),
        np.concatenate([predicted_i.covs, np.tile(P_post, (m, 1, 1))]),
    )


def _inverse_or_none(P: np.ndarray, k: int):
    try:
        L = robust_cholesky(P, f"component {k} covariance")
    except CovarianceError:
        return None
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def prune_and_merge(intensity: TypedIntensity, cfg: FilterConfig) -> TypedIntensity:
    """Drop weights below ``prune_T``, then greedily moment-match clusters.

    The pivot is the heaviest remaining component (lowest index on ties);
    every remaining ``v`` with (m_v - m_u)ᵀ P_v⁻¹ (m_v - m_u) <= U joins its
    cluster.  Merging conserves mass; only the ``max_components`` cap drops it.
    """
    i = intensity.type_index
    keep = intensity.weights >= cfg.prune_T
    w, mu, P = intensity.weights[keep], intensity.means[keep], intensity.covs[keep]
    n = len(w)
    if n == 0:
        return TypedIntensity.empty(i, intensity.dim)

    try:
        Pinv = np.linalg.inv(np.linalg.cholesky(P))
        Pinv = np.swapaxes(Pinv, -1, -2) @ Pinv
        usable = np.ones(n, dtype=bool)
    except np.linalg.LinAlgError:
        Pinv = np.zeros_like(P)
        usable = np.ones(n, dtype=bool)
        for k in range(n):
            inv = _inverse_or_none(P[k], k)
            if inv is None:
                log.warning("type %d: singular covariance on component %d, not merged", i, k)
                usable[k] = False
            else:
                Pinv[k] = inv

    remaining = np.ones(n, dtype=bool)
    out_w, out_m, out_P = [], [], []
    while remaining.any():
        u = int(np.argmax(np.where(remaining, w, -np.inf)))
        diff = mu - mu[u]
        d2 = np.einsum("vi,vij,vj->v", diff, Pinv, diff)
        members = remaining & usable & (d2 <= cfg.merge_U) if usable[u] else np.zeros(n, dtype=bool)
        members[u] = True
        wl = w[members]
        wt = wl.sum()
        m_new = (wl @ mu[members]) / wt
        dm = m_new - mu[members]
        P_new = (np.einsum("v,vij->ij", wl, P[members]) + np.einsum("v,vi,vj->ij", wl, dm, dm)) / wt
        out_w.append(wt)
        out_m.append(m_new)
        out_P.append(0.5 * (P_new + P_new.T))
        remaining &= ~members

    out_w = np.asarray(out_w)
    out_m, out_P = np.stack(out_m), np.stack(out_P)
    if len(out_w) > cfg.max_components:
        order = np.argsort(-out_w, kind="stable")[: cfg.max_components]
        order.sort()
        out_w, out_m, out_P = out_w[order], out_m[order], out_P[order]
    return TypedIntensity(i, out_w, out_m, out_P)


def extract_states(intensity: TypedIntensity, cfg: FilterConfig) -> list[TypedEstimate]:
    """One estimate per component with weight strictly above the threshold, heaviest first."""
    idx = np.flatnonzero(intensity.weights > cfg.extract_threshold)
    idx = idx[np.argsort(-intensity.weights[idx], kind="stable")]
    return [TypedEstimate(intensity.type_index, intensity.means[k].copy(), float(intensity.weights[k]), len(idx)) for k in idx]


def step(state: list[TypedIntensity], frames: list[DetectionFrame], cfg: FilterConfig):
    """One full recursion over all types.

    Returns ``(new_state, estimates)`` where ``estimates[i]`` is the list of
    extracted estimates for type ``i``.
    """
    N = cfg.n_types
    if len(frames) != N or len(state) != N:
        raise ValueError(f"expected {N} detection frames and {N} intensities, got {len(frames)} and {len(state)}")
    predicted = [predict(state[i], birth_intensity(frames[i].measurements, cfg, i), cfg) for i in range(N)]
    # every type reads the same predicted snapshot; no update sees another's posterior
    posterior = [update(predicted[i], frames[i], predicted, cfg) for i in range(N)]
    new_state = [prune_and_merge(p, cfg) for p in posterior]
    return new_state, [extract_states(s, cfg) for s in new_state]


@dataclass
class NTypeGMPHD:
    """Stateful wrapper around :func:`step`; one instance, one writer."""

    cfg: FilterConfig
    state: list[TypedIntensity] = field(default=None)
    step_times: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.state is None:
            self.reset()

    def reset(self) -> None:
        self.state = [TypedIntensity.empty(i) for i in range(self.cfg.n_types)]
        self.step_times = []

    def step(self, frames: list[DetectionFrame]) -> list[list[TypedEstimate]]:
        t0 = time.perf_counter()
        self.state, estimates = step(self.state, frames, self.cfg)
        self.step_times.append(time.perf_counter() - t0)
        return estimates

    def expected_cardinality(self) -> np.ndarray:
        return np.array([s.total_mass for s in self.state])


class IndependentGMPHD:
    """N standard GM-PHD filters run side by side, each blind to the others."""

    def __init__(self, cfg: FilterConfig):
        self.cfg = cfg
        self.filters = [NTypeGMPHD(cfg.single_type(i)) for i in range(cfg.n_types)]
        self.step_times: list[float] = []

    @property
    def state(self) -> list[TypedIntensity]:
        return [replace(f.state[0], type_index=i) for i, f in enumerate(self.filters)]

    def step(self, frames: list[DetectionFrame]) -> list[list[TypedEstimate]]:
        if len(frames) != self.cfg.n_types:
            raise ValueError(f"expected {self.cfg.n_types} detection frames, got {len(frames)}")
        t0 = time.perf_counter()
        out = []
        for i, (f, fr) in enumerate(zip(self.filters, frames)):
            est = f.step([DetectionFrame(fr.frame, 0, fr.measurements)])[0]
            out.append([replace(e, type_index=i) for e in est])
        self.step_times.append(time.perf_counter() - t0)
        return out

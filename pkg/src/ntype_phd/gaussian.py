"""Small dense Gaussian primitives.

Single-component functions (``mvn_logpdf``, ``predict_component``,
``update_component``, ``gaussian_product_marginal``) plus batched variants
that operate on stacks of means ``(n, d)`` and covariances ``(n, d, d)``.
The filter uses the batched forms; the scalar forms are the reference
surface and are what the tests pin down.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

# relative diagonal jitter ladder, scaled by trace/d
_JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class CovarianceError(ValueError):
    """A covariance matrix could not be factorized, even after jitter."""


@dataclass
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.weight = float(self.weight)
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def check(self, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` if weight/symmetry/PSD invariants are broken."""
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"invalid weight {self.weight}")
        P = self.cov
        scale = np.abs(P).max() if P.size else 0.0
        if np.abs(P - P.T).max(initial=0.0) > tol * max(scale, 1e-300):
            raise ValueError("covariance is not symmetric")
        d = P.shape[0]
        lam_min = np.linalg.eigvalsh(P).min()
        if lam_min < -tol * max(np.trace(P) / d, 0.0):
            raise ValueError(f"covariance is not PSD (min eigenvalue {lam_min:g})")


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name}: non-finite input")


def robust_cholesky(P: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor of ``P`` with escalating diagonal jitter.

    Jitter runs from 0 up to ``1e-6 * trace(P)/d``; beyond that the matrix is
    declared not factorizable and :class:`CovarianceError` names it.
    """
    P = symmetrize(np.asarray(P, dtype=float))
    d = P.shape[0]
    scale = np.trace(P) / d
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    eye = np.eye(d)
    for rel in _JITTER_LADDER:
        try:
            return np.linalg.cholesky(P + rel * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise CovarianceError(f"{name} is not positive definite (jitter up to 1e-6*trace/d failed)")


def batch_cholesky(P: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Cholesky factors for a stack ``(n, d, d)``; falls back to per-matrix jitter."""
    P = symmetrize(np.asarray(P, dtype=float))
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return np.stack([robust_cholesky(p, f"{name}[{k}]") for k, p in enumerate(P)])


def mvn_logpdf(x, mean, cov) -> float:
    """log N(x; mean, cov)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if x.shape != mean.shape or cov.shape != (x.size, x.size):
        raise ValueError(f"dimension mismatch: x{x.shape} mean{mean.shape} cov{cov.shape}")
    _check_finite("mvn_logpdf", x, mean, cov)
    L = robust_cholesky(cov, "cov")
    y = np.linalg.solve(L, x - mean)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return float(-0.5 * (x.size * LOG_2PI + logdet + y @ y))


def batch_mvn_logpdf(Z: np.ndarray, means: np.ndarray, chols: np.ndarray) -> np.ndarray:
    """log N(z_a; means_b, L_b L_bᵀ) for all pairs, shape ``(len(Z), len(means))``."""
    Z = np.asarray(Z, dtype=float).reshape(-1, means.shape[-1])
    d = means.shape[-1]
    Linv = np.linalg.inv(chols)  # (n, d, d), lower triangular
    logdet = 2.0 * np.log(np.diagonal(chols, axis1=-2, axis2=-1)).sum(axis=-1)
    resid = Z[:, None, :] - means[None, :, :]  # (m, n, d)
    y = np.einsum("nij,mnj->mni", Linv, resid)
    maha = np.einsum("mni,mni->mn", y, y)
    return -0.5 * (d * LOG_2PI + logdet[None, :] + maha)


def predict_component(c: GaussianComponent, F, Q, p_S: float) -> GaussianComponent:
    """Push one component through linear-Gaussian dynamics and survival thinning."""
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if not 0.0 <= p_S <= 1.0:
        raise ValueError(f"p_S={p_S} outside [0, 1]")
    d = c.dim
    if F.shape != (d, d) or Q.shape != (d, d):
        raise ValueError(f"dimension mismatch: state {d}, F{F.shape}, Q{Q.shape}")
    return GaussianComponent(p_S * c.weight, F @ c.mean, symmetrize(Q + F @ c.cov @ F.T))


def update_component(c: GaussianComponent, z, H, R) -> tuple[GaussianComponent, float]:
    """Kalman update of one component against measurement ``z``.

    Returns the posterior component (weight carried over unchanged; the PHD
    update sets it) and the predicted-measurement likelihood ``q(z)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if H.shape != (z.size, c.dim) or R.shape != (z.size, z.size):
        raise ValueError(f"dimension mismatch: z{z.shape} H{H.shape} R{R.shape} state {c.dim}")
    _check_finite("update_component", z, c.mean, c.cov)
    eta = H @ c.mean
    S = symmetrize(R + H @ c.cov @ H.T)
    L = robust_cholesky(S, "innovation covariance S")
    # K = P Hᵀ S⁻¹ via two triangular solves
    K = np.linalg.solve(L.T, np.linalg.solve(L, H @ c.cov)).T
    A = np.eye(c.dim) - K @ H
    P_post = symmetrize(A @ c.cov @ A.T + K @ R @ K.T)
    resid = z - eta
    y = np.linalg.solve(L, resid)
    logq = -0.5 * (z.size * LOG_2PI + 2.0 * np.log(np.diag(L)).sum() + y @ y)
    return GaussianComponent(c.weight, c.mean + K @ resid, P_post), float(np.exp(logq))


def gaussian_product_marginal(M, P1, m2, P2) -> tuple[np.ndarray, np.ndarray]:
    """Closed form of ∫ N(y; M ζ, P1) N(ζ; m2, P2) dζ = N(y; M m2, P1 + M P2 Mᵀ)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    P1 = np.atleast_2d(np.asarray(P1, dtype=float))
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))
    P2 = np.atleast_2d(np.asarray(P2, dtype=float))
    dy, dz = M.shape
    if P1.shape != (dy, dy) or m2.shape != (dz,) or P2.shape != (dz, dz):
        raise ValueError(f"dimension mismatch: M{M.shape} P1{P1.shape} m2{m2.shape} P2{P2.shape}")
    return M @ m2, symmetrize(P1 + M @ P2 @ M.T)


# -- batched forms used by the filter -------------------------------------


def batch_predict(weights, means, covs, F, Q, p_S):
    means = means @ F.T
    covs = symmetrize(Q[None] + F[None] @ covs @ F.T[None])
    return p_S * weights, means, covs


def batch_update_terms(means, covs, H, R, name="S"):
    """Per-component innovation terms shared by every measurement.

    Returns ``(eta, chol_S, K, P_post)`` with shapes ``(n, dz)``,
    ``(n, dz, dz)``, ``(n, dx, dz)``, ``(n, dx, dx)``.
    """
    eta = means @ H.T
    PHt = covs @ H.T[None]  # (n, dx, dz)
    S = symmetrize(R[None] + H[None] @ PHt)
    L = batch_cholesky(S, name)
    Linv = np.linalg.inv(L)
    K = PHt @ (np.swapaxes(Linv, -1, -2) @ Linv)
    A = np.eye(means.shape[1])[None] - K @ H[None]
    P_post = symmetrize(A @ covs @ np.swapaxes(A, -1, -2) + K @ R[None] @ np.swapaxes(K, -1, -2))
    return eta, L, K, P_post


def batch_marginal_chols(means, covs, H, R, name="S"):
    """Observation-space marginals ``N(z; H m, R + H P Hᵀ)`` of a mixture."""
    eta = means @ H.T
    S = symmetrize(R[None] + H[None] @ covs @ H.T[None])
    return eta, batch_cholesky(S, name)

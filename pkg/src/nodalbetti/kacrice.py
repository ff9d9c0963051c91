"""Kac-Rice density of critical points of |x - p|^2 on the nodal set.

With G(x) = (F(x), <v_2, grad F>, ..., <v_d, grad F>) for a frame v_2..v_d
orthogonal to v_1 = x/|x|, critical points are zeros of G.  The density is

    K1(v_1) = E[|det J| | G = 0] / ((2 pi)^{d/2} sqrt(det C_G))

where J = [grad F^T ; V^T Hess F] is the Jacobian of G with the frame held
locally constant.  The conditional law of (grad F, Hess F) given G = 0 is
Gaussian and follows from the second and fourth spectral moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFieldError, DegenerateKacRiceError
from .models import SpectralModel
from .seeding import rng_for
from .topology import ball_volume

CHUNK = 65536


def patch_frame(v1):
    """Orthonormal completion of v1 that is smooth on each coordinate patch.

    The patch is chosen by the largest |component| of v1; the remaining unit
    axes are Gram-Schmidt orthogonalised against v1.  Returns (d, d-1).
    """
    v1 = np.asarray(v1, dtype=float)
    v1 = v1 / np.linalg.norm(v1)
    d = v1.size
    k = int(np.argmax(np.abs(v1)))
    basis = [v1]
    for j in range(d):
        if j == k:
            continue
        e = np.zeros(d)
        e[j] = 1.0
        for b in basis:
            e -= (e @ b) * b
        basis.append(e / np.linalg.norm(e))
    return np.stack(basis[1:], axis=1)


def _hess_index(d):
    return [(i, j) for i in range(d) for j in range(i, d)]


def joint_covariance(model: SpectralModel):
    """Covariance of (F, grad F, upper-triangular Hess F) at one point."""
    d = model.dimension
    lam = model.second_moment_matrix()
    m4 = model.fourth_moment_tensor()
    idx = _hess_index(d)
    nh = len(idx)
    n = 1 + d + nh
    cov = np.zeros((n, n))
    cov[0, 0] = 1.0
    cov[1 : 1 + d, 1 : 1 + d] = lam
    for a, (i, j) in enumerate(idx):
        cov[0, 1 + d + a] = cov[1 + d + a, 0] = -lam[i, j]
        for b, (k, l) in enumerate(idx):
            cov[1 + d + a, 1 + d + b] = m4[i, j, k, l]
    return cov


@dataclass
class KacRiceEstimate:
    direction: np.ndarray
    frame: np.ndarray
    C_G: np.ndarray
    K1: float
    stderr: float
    mc_samples: int
    bound_integral: float = float("nan")

    def to_json(self):
        return {
            "direction": self.direction.tolist(),
            "frame": self.frame.tolist(),
            "C_G": self.C_G.tolist(),
            "K1": self.K1,
            "stderr": self.stderr,
            "mc_samples": self.mc_samples,
            "bound_integral": self.bound_integral,
        }


def kacrice_density(model: SpectralModel, v1, mc_samples=200_000, seed=0) -> KacRiceEstimate:
    if not model.check_axioms().rho3:
        raise DegenerateFieldError()
    d = model.dimension
    v1 = np.asarray(v1, dtype=float)
    v1 = v1 / np.linalg.norm(v1)
    V = patch_frame(v1)
    lam = model.second_moment_matrix()

    c_g = np.zeros((d, d))
    c_g[0, 0] = 1.0
    c_g[1:, 1:] = V.T @ lam @ V
    det_cg = float(np.linalg.det(c_g))
    if det_cg < 1e-12:
        raise DegenerateKacRiceError()

    # condition the joint vector on A z = 0 with A picking out G
    cov = joint_covariance(model)
    n = cov.shape[0]
    A = np.zeros((d, n))
    A[0, 0] = 1.0
    A[1:, 1 : 1 + d] = V.T
    sa = cov @ A.T
    cond = cov - sa @ np.linalg.solve(A @ sa, sa.T)
    cond = 0.5 * (cond + cond.T)
    w, U = np.linalg.eigh(cond)
    root = U * np.sqrt(np.clip(w, 0.0, None))

    idx = _hess_index(d)
    total = 0.0
    total_sq = 0.0
    for c, start in enumerate(range(0, mc_samples, CHUNK)):
        m = min(CHUNK, mc_samples - start)
        z = rng_for(seed, c).standard_normal((m, n)) @ root.T
        grad = z[:, 1 : 1 + d]
        hess = np.empty((m, d, d))
        for a, (i, j) in enumerate(idx):
            hess[:, i, j] = hess[:, j, i] = z[:, 1 + d + a]
        jac = np.empty((m, d, d))
        jac[:, 0, :] = grad
        jac[:, 1:, :] = np.einsum("ik,mkl->mil", V.T, hess)
        det = np.abs(np.linalg.det(jac))
        total += det.sum()
        total_sq += (det * det).sum()
    mean = total / mc_samples
    var = max(total_sq / mc_samples - mean * mean, 0.0) * mc_samples / max(mc_samples - 1, 1)
    pref = 1.0 / ((2 * math.pi) ** (d / 2) * math.sqrt(det_cg))
    return KacRiceEstimate(
        direction=v1,
        frame=V,
        C_G=c_g,
        K1=pref * mean,
        stderr=pref * math.sqrt(var / mc_samples),
        mc_samples=int(mc_samples),
    )


def sphere_directions(d, k):
    """Deterministic quasi-uniform unit vectors (equal angles / Fibonacci sphere)."""
    if d == 2:
        t = 2 * math.pi * (np.arange(k) + 0.5) / k
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if d == 3:
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        phi = math.pi * (3 - math.sqrt(5)) * i
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    raise ValueError("unsupported dimension")


def kacrice_upper_bound(model: SpectralModel, R, mc_samples=200_000, seed=0, directions=16):
    """Bound on E[number of critical points in B(R)]; returns (bound, stderr)."""
    vol = ball_volume(model.dimension, R)
    if model.isotropic:
        e = np.zeros(model.dimension)
        e[0] = 1.0
        est = kacrice_density(model, e, mc_samples, seed)
        return est.K1 * vol, est.stderr * vol
    ests = [
        kacrice_density(model, v, mc_samples, seed + k)
        for k, v in enumerate(sphere_directions(model.dimension, directions))
    ]
    k1 = np.mean([e.K1 for e in ests])
    se = math.sqrt(sum(e.stderr**2 for e in ests)) / len(ests)
    return k1 * vol, se * vol

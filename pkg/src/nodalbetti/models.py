"""Stationary Gaussian ensembles: covariance kernels, spectral moments and
the non-degeneracy/ergodicity axioms on the spectral measure.

Every model is normalised to unit variance, ``covariance(0) == 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import ConfigError, MomentOverflowError

KINDS = ("bargmann-fock", "berry", "band-limited", "kostlan", "custom")

# Radial switch point between the power series and scipy's Bessel routine.
_BESSEL_SWITCH = 8.0
_GL_NODES = 64


class Axioms(NamedTuple):
    rho1: bool  # no atoms
    rho2: bool  # finite p-th moment for some p > 6
    rho3: bool  # support not contained in a hyperplane
    rho4: bool  # support has non-empty interior


def sphere_covariance(t, d):
    """Radial covariance of the uniform measure on the unit sphere of R^d.

    ``Gamma(nu+1) (2/t)^nu J_nu(t)`` with ``nu = d/2 - 1``; this is J_0 for
    d=2 and sin(t)/t for d=3.
    """
    t = np.abs(np.asarray(t, dtype=float))
    nu = d / 2.0 - 1.0
    out = np.empty_like(t)
    small = t < _BESSEL_SWITCH
    if np.any(small):
        ts = t[small]
        q = -(ts * ts) / 4.0
        term = np.ones_like(ts)
        acc = np.ones_like(ts)
        for k in range(1, 80):
            term = term * q / (k * (k + nu))
            acc = acc + term
        out[small] = acc
    if np.any(~small):
        tl = t[~small]
        out[~small] = special.gamma(nu + 1.0) * (2.0 / tl) ** nu * special.jv(nu, tl)
    return out


def _sym4(d):
    eye = np.eye(d)
    return (
        np.einsum("ij,kl->ijkl", eye, eye)
        + np.einsum("ik,jl->ijkl", eye, eye)
        + np.einsum("il,jk->ijkl", eye, eye)
    )


@dataclass(frozen=True)
class SpectralModel:
    """A unit-variance stationary Gaussian ensemble on R^d.

    ``kind`` is one of :data:`KINDS`.  ``alpha`` is the inner radius of the
    band-limited annulus, ``degree`` the Kostlan degree n, and
    ``frequencies``/``weights`` the atoms of a custom discrete measure
    (stored symmetrised and normalised).
    """

    kind: str
    dimension: int
    alpha: float = 0.0
    degree: int = 0
    frequencies: tuple = field(default=(), repr=False)
    weights: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.dimension < 2:
            raise ConfigError("unsupported dimension")
        if self.kind == "band-limited" and not 0.0 <= self.alpha < 1.0:
            raise ConfigError("band-limited alpha must lie in [0, 1)")
        if self.kind == "kostlan" and self.degree < 1:
            raise ConfigError("kostlan degree must be positive")
        if self.kind == "custom" and len(self.frequencies) == 0:
            raise ConfigError("custom model needs at least one atom")

    # -- constructors -------------------------------------------------------

    @classmethod
    def bargmann_fock(cls, d=2):
        return cls("bargmann-fock", d)

    @classmethod
    def berry(cls, d=2):
        return cls("berry", d)

    @classmethod
    def band_limited(cls, d=2, alpha=0.0):
        return cls("band-limited", d, alpha=float(alpha))

    @classmethod
    def kostlan(cls, n, d=2):
        return cls("kostlan", d, degree=int(n))

    @classmethod
    def custom(cls, atoms):
        """Build a discrete measure from ``[(frequency_vector, weight), ...]``.

        The measure is symmetrised (each atom split between +lambda and
        -lambda) and normalised to total mass one.
        """
        freqs = np.array([np.asarray(f, dtype=float) for f, _ in atoms])
        w = np.array([float(wt) for _, wt in atoms])
        if freqs.ndim != 2 or np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("custom atoms must be (vector, nonnegative weight)")
        w = w / w.sum()
        sym_f = np.concatenate([freqs, -freqs])
        sym_w = np.concatenate([w, w]) / 2.0
        return cls(
            "custom",
            freqs.shape[1],
            frequencies=tuple(map(tuple, sym_f)),
            weights=tuple(sym_w),
        )

    @classmethod
    def from_csv(cls, path):
        """Read ``freq_1,...,freq_d,weight`` rows (a header line is allowed)."""
        atoms = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    vals = [float(v) for v in row]
                except ValueError:
                    if atoms:
                        raise ConfigError(f"bad row in {path}: {row}")
                    continue  # header
                atoms.append((vals[:-1], vals[-1]))
        if not atoms:
            raise ConfigError(f"no atoms in {path}")
        return cls.custom(atoms)

    # -- identity -----------------------------------------------------------

    @property
    def identifier(self):
        d = self.dimension
        if self.kind == "band-limited":
            return f"band-limited(d={d},alpha={self.alpha:g})"
        if self.kind == "kostlan":
            return f"kostlan(n={self.degree},d={d})"
        if self.kind == "custom":
            return f"custom(d={d},atoms={len(self.weights)})"
        return f"{self.kind}(d={d})"

    def to_dict(self):
        out = {"model": self.kind, "dim": self.dimension}
        if self.kind == "band-limited":
            out["alpha"] = self.alpha
        if self.kind == "kostlan":
            out["degree_n"] = self.degree
        if self.kind == "custom":
            out["frequencies"] = [list(f) for f in self.frequencies]
            out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_dict(cls, spec):
        kind, d = spec["model"], int(spec["dim"])
        if kind == "band-limited":
            return cls.band_limited(d, float(spec.get("alpha", 0.0)))
        if kind == "kostlan":
            return cls.kostlan(int(spec["degree_n"]), d)
        if kind == "custom":
            # already symmetrised; weights sum to one
            return cls(
                "custom",
                d,
                frequencies=tuple(map(tuple, spec["frequencies"])),
                weights=tuple(spec["weights"]),
            )
        return cls(kind, d)

    @property
    def isotropic(self):
        return self.kind != "custom"

    # -- covariance ---------------------------------------------------------

    def radial_covariance(self, t):
        """Covariance as a function of the lag length (isotropic kinds only)."""
        t = np.abs(np.asarray(t, dtype=float))
        d = self.dimension
        if self.kind == "bargmann-fock":
            return np.exp(-0.5 * t * t)
        if self.kind == "berry":
            return sphere_covariance(t, d)
        if self.kind == "band-limited":
            s, w = _annulus_rule(self.alpha, d)
            vals = sphere_covariance(np.multiply.outer(t, s), d)
            return vals @ w
        if self.kind == "kostlan":
            return np.cos(t / math.sqrt(self.degree)) ** self.degree
        raise ValueError("custom models are not radial")

    def covariance(self, tau):
        """r_F(tau) for lag vectors of shape (..., d)."""
        tau = np.asarray(tau, dtype=float)
        if tau.shape[-1] != self.dimension:
            raise ValueError(f"lag must have trailing dimension {self.dimension}")
        if self.kind == "custom":
            lam = np.asarray(self.frequencies)
            w = np.asarray(self.weights)
            return np.cos(tau @ lam.T) @ w
        return self.radial_covariance(np.linalg.norm(tau, axis=-1))

    # -- spectral moments ---------------------------------------------------

    @property
    def moment_order_p(self):
        # All built-in measures are compactly supported or Gaussian, and a
        # finite discrete measure has every moment.
        return math.inf

    def _radial_moments(self):
        """(E|lambda|^2, E|lambda|^4) for isotropic kinds."""
        d = self.dimension
        if self.kind == "bargmann-fock":
            return float(d), float(d * (d + 2))
        if self.kind == "berry":
            return 1.0, 1.0
        if self.kind == "band-limited":
            a = self.alpha

            def m(k):
                return d / (d + k) * (1.0 - a ** (d + k)) / (1.0 - a**d)

            return m(2), m(4)
        if self.kind == "kostlan":
            # radial Taylor coefficients of cos(t/sqrt(n))^n at 0
            n = self.degree
            return float(d), d * (d + 2) * (1.0 - 2.0 / (3.0 * n))
        raise ValueError("custom models are not radial")

    def second_moment_matrix(self):
        """Lambda = -Hess r(0) = Cov(grad F(0))."""
        d = self.dimension
        if self.kind == "custom":
            lam = np.asarray(self.frequencies)
            w = np.asarray(self.weights)
            with np.errstate(over="raise", invalid="raise"):
                try:
                    out = np.einsum("k,ki,kj->ij", w, lam, lam)
                except FloatingPointError:
                    raise MomentOverflowError() from None
            if not np.all(np.isfinite(out)):
                raise MomentOverflowError()
            return out
        m2, _ = self._radial_moments()
        return m2 / d * np.eye(d)

    def fourth_moment_tensor(self):
        """E[l_i l_j l_k l_l] = Cov(d_ij F, d_kl F)."""
        d = self.dimension
        if self.kind == "custom":
            lam = np.asarray(self.frequencies)
            w = np.asarray(self.weights)
            with np.errstate(over="raise", invalid="raise"):
                try:
                    out = np.einsum("q,qi,qj,qk,ql->ijkl", w, lam, lam, lam, lam)
                except FloatingPointError:
                    raise MomentOverflowError() from None
            if not np.all(np.isfinite(out)):
                raise MomentOverflowError()
            return out
        _, m4 = self._radial_moments()
        return m4 / (d * (d + 2)) * _sym4(d)

    # -- axioms -------------------------------------------------------------

    def check_axioms(self):
        if self.kind == "custom":
            lam = np.asarray(self.frequencies)
            try:
                finite = bool(np.all(np.isfinite(self.second_moment_matrix())))
            except MomentOverflowError:
                finite = False
            rank = np.linalg.matrix_rank(lam, tol=1e-12 * max(1.0, np.abs(lam).max()))
            return Axioms(False, finite and self.moment_order_p > 6, rank == self.dimension, False)
        if self.kind == "berry":
            # the unit sphere has empty interior
            return Axioms(True, True, True, False)
        # Gaussian density, a full annulus, and the Kostlan scaling limit
        # (Bargmann-Fock) all have absolutely continuous, open-support measures.
        return Axioms(True, True, True, True)

    # -- grid resolution ----------------------------------------------------

    def correlation_scale(self):
        """Smallest positive lag along a coordinate axis with r = 1/2."""
        d = self.dimension
        best = math.inf
        axes = range(d) if self.kind == "custom" else [0]
        for ax in axes:
            e = np.zeros(d)
            e[ax] = 1.0
            ts = np.linspace(0.0, 50.0, 5001)
            vals = self.covariance(np.outer(ts, e)) - 0.5
            idx = np.flatnonzero(vals <= 0.0)
            if idx.size == 0:
                continue
            k = idx[0]
            lo, hi = ts[k - 1], ts[k]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if self.covariance(mid * e) - 0.5 > 0:
                    lo = mid
                else:
                    hi = mid
            best = min(best, 0.5 * (lo + hi))
        return best

    def h_max(self):
        """Largest spacing accepted by the samplers (a quarter of the scale)."""
        return self.correlation_scale() / 4.0

    def default_spacing(self):
        """Default grid spacing: six nodes per correlation scale."""
        return self.correlation_scale() / 6.0

    # -- spectral sampling --------------------------------------------------

    def sample_frequencies(self, rng, m):
        """Draw m i.i.d. frequencies from the normalised spectral measure."""
        d = self.dimension
        if self.kind == "bargmann-fock":
            return rng.standard_normal((m, d))
        if self.kind in ("berry", "band-limited"):
            g = rng.standard_normal((m, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            if self.kind == "berry":
                return g
            a = self.alpha
            u = rng.random(m)
            radius = (a**d + u * (1.0 - a**d)) ** (1.0 / d)
            return g * radius[:, None]
        if self.kind == "custom":
            lam = np.asarray(self.frequencies)
            w = np.asarray(self.weights)
            idx = rng.choice(len(w), size=m, p=w / w.sum())
            return lam[idx]
        raise ValueError("kostlan fields are sampled on the sphere chart, not spectrally")


def _annulus_rule(alpha, d, _cache={}):
    """Gauss-Legendre nodes on [alpha, 1] with weights for the radial density
    proportional to s^(d-1), normalised to sum to one."""
    key = (alpha, d)
    if key not in _cache:
        x, w = np.polynomial.legendre.leggauss(_GL_NODES)
        s = alpha + (1.0 - alpha) * (x + 1.0) / 2.0
        ww = w * s ** (d - 1)
        _cache[key] = (s, ww / ww.sum())
    return _cache[key]


def covariance(model, tau):
    return model.covariance(tau)


def check_axioms(model):
    return model.check_axioms()


def second_moment_matrix(model):
    return model.second_moment_matrix()


def model_from_options(kind, dim=2, alpha=0.0, degree_n=0, custom_csv=None):
    """Build a model from the flat run-config keys."""
    if kind == "bargmann-fock":
        return SpectralModel.bargmann_fock(dim)
    if kind == "berry":
        return SpectralModel.berry(dim)
    if kind == "band-limited":
        return SpectralModel.band_limited(dim, alpha)
    if kind == "kostlan":
        return SpectralModel.kostlan(degree_n, dim)
    if kind == "custom":
        if not custom_csv:
            raise ConfigError("custom model needs custom_csv")
        model = SpectralModel.from_csv(custom_csv)
        if model.dimension != dim:
            raise ConfigError("custom CSV dimension does not match dim")
        return model
    raise ConfigError(f"unknown model kind {kind!r}")

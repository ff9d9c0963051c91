"""Gaussian field realizations on regular grids.

Two methods for stationary models (circulant embedding, randomized spectral
sums) and the Kostlan ensemble in a scaled exponential chart of S^2.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft as sfft

from .errors import (
    ChartRangeError,
    DegenerateFieldError,
    EmbeddingError,
    GridTooCoarseError,
    NoEvaluatorError,
)
from .evaluators import (
    AnalyticField,
    KostlanChart,
    SpectralSum,
    grid_points,
    kostlan_coefficient_count,
)
from .models import SpectralModel
from .seeding import rng_for

CIRCULANT = "circulant"
SPECTRAL = "spectral"
KOSTLAN = "kostlan"
SYNTHETIC = "synthetic"

DEFAULT_TERMS = 4096
MAX_KOSTLAN_DEGREE = 400
CHART_BOUND = math.pi / 2 - 0.02  # stay inside the open hemisphere
CLIP_FRACTION = 1e-6


@dataclass
class FieldRealization:
    """One sampled field on the grid ``origin + spacing * index``.

    ``values`` has shape ``dims`` (C order, so flattening is row-major with
    the last axis fastest).  ``evaluator`` is set for analytic methods.
    """

    origin: tuple
    spacing: float
    values: np.ndarray
    seed: Optional[int] = None
    model_ref: str = ""
    method: str = SYNTHETIC
    evaluator: Optional[AnalyticField] = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def dimension(self):
        return self.values.ndim

    @property
    def dims(self):
        return self.values.shape

    @property
    def half_width(self):
        """Radius of the largest centred cube inside the grid box."""
        lo = -np.asarray(self.origin)
        hi = np.asarray(self.origin) + self.spacing * (np.asarray(self.dims) - 1)
        return float(min(lo.min(), hi.min()))

    def points(self):
        return grid_points(self.origin, self.spacing, self.dims)


@functools.lru_cache(maxsize=64)
def _scale(model):
    return model.correlation_scale()


def grid_shape(half_width, spacing, d):
    n = int(math.ceil(2.0 * half_width / spacing - 1e-9)) + 1
    origin = tuple([-(n - 1) * spacing / 2.0] * d)
    return (n,) * d, origin


def _check_spacing(model, spacing):
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if spacing > _scale(model) / 4.0 + 1e-12:
        raise GridTooCoarseError()


def default_method(model):
    return CIRCULANT if model.kind == "bargmann-fock" else SPECTRAL


def sample_field(
    model: SpectralModel,
    half_width: float,
    spacing: float,
    seed: int,
    method: str = "auto",
    terms: int = DEFAULT_TERMS,
    padding: int = 2,
) -> FieldRealization:
    """Draw a realization covering the cube [-half_width, half_width]^d."""
    if model.kind == "kostlan":
        raise ValueError("use sample_kostlan for the Kostlan ensemble")
    if not model.check_axioms().rho3:
        raise DegenerateFieldError()
    _check_spacing(model, spacing)
    if method == "auto":
        method = default_method(model)
    d = model.dimension
    dims, origin = grid_shape(half_width, spacing, d)
    rng = rng_for(seed)
    meta = {
        "model": model.to_dict(),
        "half_width": half_width,
        "spacing": spacing,
        "seed": int(seed),
        "method": method,
    }
    if method == CIRCULANT:
        values, used = _circulant(model, dims, spacing, rng, padding)
        meta["padding"] = used
        return FieldRealization(origin, spacing, values, seed, model.identifier, CIRCULANT, None, meta)
    if method == SPECTRAL:
        lam = model.sample_frequencies(rng, terms)
        a = rng.standard_normal(terms)
        b = rng.standard_normal(terms)
        ev = SpectralSum(lam, a, b)
        meta["terms"] = terms
        values = ev.grid_values(origin, spacing, dims)
        return FieldRealization(origin, spacing, values, seed, model.identifier, SPECTRAL, ev, meta)
    raise ValueError(f"unknown sampling method {method!r}")


def circulant_eigenvalues(model, dims, spacing, padding):
    """Eigenvalues of the torus-embedded covariance on the padded grid."""
    shape = tuple(sfft.next_fast_len(padding * n) for n in dims)
    axes = []
    for m in shape:
        j = np.arange(m)
        axes.append(np.minimum(j, m - j) * spacing)
    mesh = np.meshgrid(*axes, indexing="ij")
    lags = np.stack(mesh, axis=-1)
    base = model.covariance(lags)
    return sfft.fftn(base).real, shape


def _circulant(model, dims, spacing, rng, padding):
    pad = padding
    while True:
        lam, shape = circulant_eigenvalues(model, dims, spacing, pad)
        neg = -lam[lam < 0].sum()
        if neg <= CLIP_FRACTION * np.abs(lam).sum():
            break
        if pad * 2 > 8:
            raise EmbeddingError()
        pad *= 2
    lam = np.clip(lam, 0.0, None)
    size = lam.size
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y = sfft.fftn(np.sqrt(lam / size) * z)
    crop = tuple(slice(0, n) for n in dims)
    return np.ascontiguousarray(y.real[crop]), pad


def sample_kostlan(n: int, half_width: float, spacing: float, seed: int) -> FieldRealization:
    """Degree-n Kostlan polynomial on S^2 in the chart u -> exp_pole(u/sqrt(n))."""
    if n < 1 or n > MAX_KOSTLAN_DEGREE:
        raise ValueError(f"degree must lie in [1, {MAX_KOSTLAN_DEGREE}]")
    if half_width / math.sqrt(n) >= CHART_BOUND:
        raise ChartRangeError()
    model = SpectralModel.kostlan(n, 2)
    _check_spacing(model, spacing)
    dims, origin = grid_shape(half_width, spacing, 2)
    rng = rng_for(seed)
    coef = rng.standard_normal(kostlan_coefficient_count(n))
    ev = KostlanChart(n, coef)
    values = ev.grid_values(origin, spacing, dims)
    meta = {
        "model": model.to_dict(),
        "half_width": half_width,
        "spacing": spacing,
        "seed": int(seed),
        "method": KOSTLAN,
    }
    return FieldRealization(origin, spacing, values, seed, model.identifier, KOSTLAN, ev, meta)


def realize(evaluator: AnalyticField, half_width: float, spacing: float, **kw) -> FieldRealization:
    """Tabulate any analytic field on the centred grid (no sampling involved)."""
    dims, origin = grid_shape(half_width, spacing, evaluator.dimension)
    values = evaluator.grid_values(origin, spacing, dims)
    return FieldRealization(origin, spacing, values, evaluator=evaluator, **kw)


def evaluate_with_derivatives(realization: FieldRealization, x):
    """F(x), grad F(x), Hess F(x) from the realization's analytic evaluator."""
    if realization.evaluator is None:
        raise NoEvaluatorError()
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    lo = np.asarray(realization.origin)
    hi = lo + realization.spacing * (np.asarray(realization.dims) - 1)
    if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        raise ValueError("point outside the sampled box")
    f, g, h = realization.evaluator.derivatives(pts)
    if single:
        return f[0], g[0], h[0]
    return f, g, h


def resample(meta: dict) -> FieldRealization:
    """Rebuild a realization from its sidecar metadata (bit-identical)."""
    model = SpectralModel.from_dict(meta["model"])
    if meta["method"] == KOSTLAN:
        return sample_kostlan(model.degree, meta["half_width"], meta["spacing"], meta["seed"])
    return sample_field(
        model,
        meta["half_width"],
        meta["spacing"],
        meta["seed"],
        method=meta["method"],
        terms=meta.get("terms", DEFAULT_TERMS),
        padding=meta.get("padding", 2),
    )

"""Seeded Monte Carlo campaigns: Betti densities, Kostlan probes, genus census."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ConfigError, NodalError, ReplicateFailureError
from .evaluators import chart_exp
from .models import SpectralModel
from .sampler import CHART_BOUND, sample_field, sample_kostlan
from .seeding import derive_seed
from .topology import analyze, ball_volume

ABORT_LIMIT = 0.05
MARGIN_CELLS = 3


@dataclass
class ExperimentConfig:
    model: SpectralModel
    R_list: tuple = (12.0,)
    r_list: tuple = ()
    replicates: int = 200
    master_seed: int = 0
    spacing: Optional[float] = None
    method: str = "auto"
    threads: int = 1

    def __post_init__(self):
        self.R_list = tuple(float(r) for r in self.R_list)
        self.r_list = tuple(float(r) for r in self.r_list)
        if self.model.dimension not in (2, 3):
            raise ConfigError("unsupported dimension")
        if not self.R_list or any(b <= a for a, b in zip(self.R_list, self.R_list[1:])):
            raise ConfigError("invalid radius ordering")
        if any(r >= self.R_list[0] or r <= 0 for r in self.r_list):
            raise ConfigError("invalid radius ordering")
        if self.replicates < 2:
            raise ConfigError("replicates must be at least 2")
        if self.spacing is None:
            self.spacing = self.model.default_spacing()
        self.spacing = float(self.spacing)

    def half_width(self, R):
        return R + (2 * math.sqrt(self.model.dimension) + MARGIN_CELLS) * self.spacing


def replicate_seed(master, k_R, rep):
    return derive_seed(master, k_R, rep)


def _run_replicate(args):
    """One sample -> report.  Returns a plain dict, or None on abort."""
    config, k_R, rep = args
    R = config.R_list[k_R]
    seed = replicate_seed(config.master_seed, k_R, rep)
    try:
        real = sample_field(config.model, config.half_width(R), config.spacing, seed, method=config.method)
        report = analyze(real, R, config.r_list, seed=seed)
    except NodalError:
        return None
    sandwich_ok = all(
        report.psi[(i, r)] <= report.totals[i]
        for r in config.r_list
        for i in range(config.model.dimension)
    )
    return {
        "seed": seed,
        "totals": report.totals,
        "census": report.class_census,
        "censored": report.censored_count,
        "sandwich_ok": sandwich_ok,
    }


def _map(func, jobs, threads):
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, jobs, chunksize=4))
    return [func(j) for j in jobs]


def student_ci(samples, level=0.95):
    x = np.asarray(samples, dtype=float)
    n = len(x)
    mean = float(x.mean())
    std = float(x.std(ddof=1)) if n > 1 else 0.0
    half = float(stats.t.ppf(0.5 + level / 2, n - 1) * std / math.sqrt(n)) if n > 1 else float("inf")
    return mean, std, mean - half, mean + half


@dataclass
class EstimateRow:
    R: float
    i: int
    mean: float
    std: float
    ci_lo: float
    ci_hi: float
    N: int


@dataclass
class EstimateResult:
    model: str
    dimension: int
    rows: list
    cauchy_gaps: dict  # i -> list of gaps along R_list
    c_i_hat: tuple
    nu_hat: Optional[float]
    sandwich_pass_rate: float
    class_census: dict  # H -> total count at the largest R
    census_samples: dict = field(default_factory=dict, repr=False)  # R -> list of per-replicate census
    seeds: dict = field(default_factory=dict, repr=False)  # R -> list of seeds
    aborted: int = 0

    def row(self, R, i):
        for r in self.rows:
            if r.R == R and r.i == i:
                return r
        raise KeyError((R, i))


def estimate_betti_density(config: ExperimentConfig) -> EstimateResult:
    """beta_i(R) / Vol B(R) over independent replicates at every R."""
    axioms = config.model.check_axioms()
    if not (axioms.rho2 and axioms.rho3):
        raise ConfigError("model violates the moment or non-degeneracy axiom")
    d = config.model.dimension
    jobs = [(config, k, rep) for k in range(len(config.R_list)) for rep in range(config.replicates)]
    outcomes = _map(_run_replicate, jobs, config.threads)

    rows, census_samples, seeds = [], {}, {}
    aborted = 0
    sandwich_ok = sandwich_total = 0
    for k, R in enumerate(config.R_list):
        chunk = outcomes[k * config.replicates : (k + 1) * config.replicates]
        good = [o for o in chunk if o is not None]
        aborted += len(chunk) - len(good)
        if len(chunk) - len(good) > ABORT_LIMIT * len(chunk) or len(good) < 2:
            raise ReplicateFailureError()
        vol = ball_volume(d, R)
        for i in range(d):
            mean, std, lo, hi = student_ci([o["totals"][i] / vol for o in good])
            rows.append(EstimateRow(R, i, mean, std, lo, hi, len(good)))
        census_samples[R] = [o["census"] for o in good]
        seeds[R] = [o["seed"] for o in good]
        sandwich_ok += sum(o["sandwich_ok"] for o in good)
        sandwich_total += len(good)

    gaps = {}
    for i in range(d):
        means = [next(r.mean for r in rows if r.R == R and r.i == i) for R in config.R_list]
        gaps[i] = [abs(b - a) for a, b in zip(means, means[1:])]
    top = config.R_list[-1]
    c_hat = tuple(max(0.0, next(r.mean for r in rows if r.R == top and r.i == i)) for i in range(d))
    total = Counter()
    for c in census_samples[top]:
        total.update(c)
    return EstimateResult(
        model=config.model.identifier,
        dimension=d,
        rows=rows,
        cauchy_gaps=gaps,
        c_i_hat=c_hat,
        nu_hat=c_hat[0] if config.model.kind == "kostlan" else None,
        sandwich_pass_rate=sandwich_ok / sandwich_total,
        class_census=dict(sorted(total.items())),
        census_samples=census_samples,
        seeds=seeds,
        aborted=aborted,
    )


@dataclass
class CensusRate:
    label: str
    rate: float
    std: float
    ci_lo: float
    ci_hi: float
    N: int


def genus_census(config: ExperimentConfig) -> list:
    """Per-class component counts per unit volume at the largest R, with CIs."""
    if config.model.dimension != 3:
        raise ConfigError("genus census needs a d=3 model")
    result = estimate_betti_density(config)
    R = config.R_list[-1]
    vol = ball_volume(3, R)
    samples = result.census_samples[R]
    labels = sorted({k for c in samples for k in c}, key=lambda s: int(s.split("-")[1]))
    out = []
    for lab in labels:
        mean, std, lo, hi = student_ci([c.get(lab, 0) / vol for c in samples])
        out.append(CensusRate(lab, mean, std, lo, hi, len(samples)))
    return out


# ---------------------------------------------------------------------------
# Kostlan scaling probes


def scaling_sup(n, t_max=3.0, points=3001):
    """sup over t in [0, t_max] of |cos(t/sqrt n)^n - exp(-t^2/2)|."""
    t = np.linspace(0.0, t_max, points)
    return float(np.max(np.abs(np.cos(t / math.sqrt(n)) ** n - np.exp(-0.5 * t * t))))


@dataclass
class ScalingProbe:
    degrees: tuple
    R: float
    covariance_sup: dict = field(default_factory=dict)  # n -> sup
    betti_samples: dict = field(default_factory=dict)  # n -> list of (beta_0, beta_1) / Vol
    exceedance: dict = field(default_factory=dict)  # n -> P(|beta_0/Vol - c| > eps)
    reference: Optional[float] = None
    epsilon: Optional[float] = None


def _disc_grid(R, k):
    ax = np.linspace(-R, R, k)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    return pts[np.linalg.norm(pts, axis=1) <= R + 1e-12]


def kostlan_local_limit_check(n_list, R, grid=21) -> ScalingProbe:
    """Covariance distance between the scaled Kostlan kernel and Bargmann-Fock.

    For chart points u, v in the disc of radius R, the Kostlan kernel is
    cos(theta)^n with theta the spherical angle between exp(u/sqrt n) and
    exp(v/sqrt n); the limit is exp(-|u - v|^2 / 2).
    """
    n_list = tuple(int(n) for n in n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("degrees must increase")
    if R / math.sqrt(n_list[0]) >= CHART_BOUND:
        from .errors import ChartRangeError

        raise ChartRangeError()
    u = _disc_grid(R, grid)
    lim = np.exp(-0.5 * np.sum((u[:, None, :] - u[None, :, :]) ** 2, axis=-1))
    probe = ScalingProbe(n_list, float(R))
    for n in n_list:
        x, _, _ = chart_exp(u / math.sqrt(n))
        cosang = np.clip(x @ x.T, -1.0, 1.0)
        probe.covariance_sup[n] = float(np.max(np.abs(cosang**n - lim)))
    return probe


def kostlan_betti_convergence(n_list, R, epsilon, replicates, seed, reference, spacing=None):
    """Exceedance frequencies of |beta_0 / Vol B(R) - reference| > epsilon per degree."""
    probe = ScalingProbe(tuple(int(n) for n in n_list), float(R), reference=reference, epsilon=epsilon)
    vol = ball_volume(2, R)
    for k, n in enumerate(probe.degrees):
        model = SpectralModel.kostlan(n, 2)
        h = spacing or model.default_spacing()
        hw = R + (2 * math.sqrt(2) + MARGIN_CELLS) * h
        vals = []
        for rep in range(replicates):
            real = sample_kostlan(n, hw, h, derive_seed(seed, k, rep))
            rep_ = analyze(real, R)
            vals.append((rep_.totals[0] / vol, rep_.totals[1] / vol))
        probe.betti_samples[n] = vals
        b0 = np.array([v[0] for v in vals])
        probe.exceedance[n] = float(np.mean(np.abs(b0 - reference) > epsilon))
    return probe

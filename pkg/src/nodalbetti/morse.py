"""Critical points of g_p(x) = |x - p|^2 restricted to the nodal set.

Critical points solve the Lagrange system 2(x - p) = mu grad F(x), F(x) = 0,
which is square in (x, mu) and equivalent to grad F being collinear with
x - p.  Roots are polished by batched Newton from seeds taken on the nodal
mesh; the Morse index is the number of negative eigenvalues of
2I - mu Hess F on the tangent space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoEvaluatorError
from .meshing import nodal_mesh, unique_edges
from .sampler import FieldRealization

MAX_ITER = 60
TOL = 1e-11
DAMPING = 0.7
DEGENERATE_EIG = 1e-8
SEED_SINE = 0.35  # seed mesh vertices where grad F is within ~20 degrees of x - p
MERGE_RADIUS = 1e-6  # converged roots closer than this are the same point


@dataclass
class CriticalPoint:
    x: np.ndarray
    index: int
    g_value: float
    component: int
    degenerate: bool = False


@dataclass
class CriticalPointSet:
    p: np.ndarray
    points: list = field(default_factory=list)
    newton_failures: int = 0
    dimension: int = 2

    @property
    def counts(self):
        c = [0] * self.dimension
        for q in self.points:
            if not q.degenerate:
                c[q.index] += 1
        return tuple(c)

    @property
    def total(self):
        return sum(self.counts)

    @property
    def degenerate_count(self):
        return sum(q.degenerate for q in self.points)

    def counts_on(self, components):
        ids = set(components)
        c = [0] * self.dimension
        for q in self.points:
            if not q.degenerate and q.component in ids:
                c[q.index] += 1
        return tuple(c)

    def to_json(self):
        return {
            "p": self.p.tolist(),
            "counts": list(self.counts),
            "total": self.total,
            "newton_failures": self.newton_failures,
            "degenerate": self.degenerate_count,
            "points": [
                {
                    "x": q.x.tolist(),
                    "index": q.index,
                    "g": q.g_value,
                    "component": q.component,
                    "degenerate": q.degenerate,
                }
                for q in self.points
            ],
        }


def _residual(x, mu, p, f, g):
    r = np.empty((len(x), x.shape[1] + 1))
    r[:, :-1] = 2.0 * (x - p) - mu[:, None] * g
    r[:, -1] = f
    return r


def _newton(evaluator, x0, p, lo, hi, max_step=np.inf):
    """Batched damped Newton on the Lagrange system; returns (x, mu, converged).

    Steps in x are capped at max_step so roots stay near their seeds.
    """
    x = np.array(x0, dtype=float)
    n, d = x.shape
    f, g, h = evaluator.derivatives(x)
    f, g, h = f.copy(), g.copy(), h.copy()
    mu = 2.0 * np.einsum("pi,pi->p", x - p, g) / np.maximum(np.einsum("pi,pi->p", g, g), 1e-300)
    res = np.linalg.norm(_residual(x, mu, p, f, g), axis=1)
    done = res <= TOL
    alive = ~done
    eye = np.eye(d)
    for _ in range(MAX_ITER):
        act = np.flatnonzero(alive & ~done)
        if act.size == 0:
            break
        xa, ma = x[act], mu[act]
        fa, ga, ha = f[act], g[act], h[act]
        jac = np.zeros((act.size, d + 1, d + 1))
        jac[:, :d, :d] = 2.0 * eye - ma[:, None, None] * ha
        jac[:, :d, d] = -ga
        jac[:, d, :d] = ga
        r = _residual(xa, ma, p, fa, ga)
        try:
            step = np.linalg.solve(jac, -r[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(j, -b, rcond=None)[0] for j, b in zip(jac, r)])
        length = np.linalg.norm(step[:, :d], axis=1)
        step *= np.minimum(1.0, max_step / np.maximum(length, 1e-300))[:, None]
        r0 = np.linalg.norm(r, axis=1)
        xn, mn = xa + step[:, :d], ma + step[:, d]
        fn, gn, hn = evaluator.derivatives(xn)
        rn = np.linalg.norm(_residual(xn, mn, p, fn, gn), axis=1)
        worse = ~(rn < r0)
        if worse.any():
            w = np.flatnonzero(worse)
            xn[w] = xa[w] + DAMPING * step[w, :d]
            mn[w] = ma[w] + DAMPING * step[w, d]
            fn[w], gn[w], hn[w] = evaluator.derivatives(xn[w])
            rn[w] = np.linalg.norm(_residual(xn[w], mn[w], p, fn[w], gn[w]), axis=1)
        x[act], mu[act] = xn, mn
        f[act], g[act], h[act] = fn, gn, hn
        bad = ~np.isfinite(rn) | np.any(xn < lo, axis=1) | np.any(xn > hi, axis=1)
        alive[act[bad]] = False
        done[act[~bad & (rn <= TOL)]] = True
    return x, mu, done


def morse_index(grad, hess, mu):
    """(index, degenerate) of g_p restricted to {F = 0} at a Lagrange point."""
    d = grad.size
    n = grad / np.linalg.norm(grad)
    # orthonormal tangent basis from the QR of [n, I]
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(d)]))
    tangent = q[:, 1:d]
    restricted = tangent.T @ (2.0 * np.eye(d) - mu * hess) @ tangent
    eig = np.linalg.eigvalsh(0.5 * (restricted + restricted.T))
    return int(np.sum(eig < 0)), bool(np.min(np.abs(eig)) < DEGENERATE_EIG)


def _signed_sine(x, g, p):
    u = x - p
    norm = np.maximum(np.linalg.norm(u, axis=1) * np.linalg.norm(g, axis=1), 1e-300)
    return (u[:, 0] * g[:, 1] - u[:, 1] * g[:, 0]) / norm


def _mesh_seeds(mesh, evaluator, p, R):
    """Seeds on the nodal mesh within B(R + 1).

    Vertices where grad F is nearly collinear with x - p and the angle is
    locally minimal along mesh edges, the nearest and farthest vertex of each
    component, plus (d=2) the points where the signed angle changes sign
    along a segment and the endpoints of those segments.
    """
    v = mesh.vertices
    ids = np.flatnonzero(np.linalg.norm(v, axis=1) <= R + 1.0)
    if ids.size == 0:
        return np.empty((0, v.shape[1]))
    _, g, _ = evaluator.derivatives(v[ids])
    u = v[ids] - p
    cos = np.einsum("pi,pi->p", u, g) / np.maximum(
        np.linalg.norm(u, axis=1) * np.linalg.norm(g, axis=1), 1e-300
    )
    sine = np.full(len(v), np.inf)
    sine[ids] = np.sqrt(np.clip(1 - cos * cos, 0, None))
    edges = mesh.simplices if v.shape[1] == 2 else unique_edges(mesh.simplices)[0]
    lowest = np.full(len(v), np.inf)
    np.minimum.at(lowest, edges[:, 0], sine[edges[:, 1]])
    np.minimum.at(lowest, edges[:, 1], sine[edges[:, 0]])
    seeds = [v[(sine < SEED_SINE) & (sine <= lowest)]]
    # nearest and farthest vertex of every component bracket its extremes of g_p
    dist = np.sum((v[ids] - p) ** 2, axis=1)
    lab = mesh.labels[ids]
    order = np.lexsort((dist, lab))
    first = np.r_[True, lab[order][1:] != lab[order][:-1]]
    last = np.r_[lab[order][1:] != lab[order][:-1], True]
    seeds.append(v[ids[order[first | last]]])
    if v.shape[1] == 2:
        phi = np.full(len(v), np.nan)
        phi[ids] = _signed_sine(v[ids], g, p)
        a, b = mesh.simplices[:, 0], mesh.simplices[:, 1]
        pa, pb = phi[a], phi[b]
        flip = np.flatnonzero(np.isfinite(pa) & np.isfinite(pb) & (np.sign(pa) != np.sign(pb)))
        t = pa[flip] / (pa[flip] - pb[flip])
        seeds.append(v[a[flip]] + t[:, None] * (v[b[flip]] - v[a[flip]]))
        seeds.append(v[np.unique(np.r_[a[flip], b[flip]])])
    return np.concatenate(seeds)


def _nearest_component(mesh, x, h, level=6):
    """Label of the mesh component whose simplices pass closest to each point.

    Simplices are sampled on a barycentric lattice; only those within 2h of
    some query point are considered.
    """
    v, s = mesh.vertices, mesh.simplices
    centroids = v[s].mean(axis=1)
    near = cKDTree(x).query(centroids, distance_upper_bound=2.0 * h)[0]
    s = s[np.isfinite(near)] if np.isfinite(near).any() else s
    k = s.shape[1]
    lattice = np.array([w for w in np.ndindex(*(level + 1,) * k) if sum(w) == level], dtype=float) / level
    pts = np.einsum("wk,skd->swd", lattice, v[s]).reshape(-1, v.shape[1])
    _, idx = cKDTree(pts).query(x)
    return mesh.labels[s[idx // len(lattice), 0]]


def find_critical_points(realization: FieldRealization, p=None, R=None) -> CriticalPointSet:
    """Critical points of |x - p|^2 on the nodal set inside B(R) (default: the box)."""
    ev = realization.evaluator
    if ev is None:
        raise NoEvaluatorError()
    d = realization.dimension
    p = np.zeros(d) if p is None else np.asarray(p, dtype=float)
    lo = np.asarray(realization.origin, dtype=float)
    hi = lo + realization.spacing * (np.asarray(realization.dims) - 1)
    if np.any(p < lo) or np.any(p > hi):
        raise ValueError("p outside the sampled box")
    if R is None:
        R = realization.half_width
    h = realization.spacing

    mesh = nodal_mesh(realization.values, realization.origin, h)
    out = CriticalPointSet(p=p, dimension=d)
    if mesh.n_components == 0:
        return out
    seeds = _mesh_seeds(mesh, ev, p, R)
    if len(seeds) == 0:
        return out
    x, mu, ok = _newton(ev, seeds, p, lo, hi, max_step=h / 4)
    out.newton_failures = int(np.sum(~ok))
    x, mu = x[ok], mu[ok]
    keep = np.linalg.norm(x, axis=1) < R
    x, mu = x[keep], mu[keep]
    if len(x) == 0:
        return out

    # deduplicate converged roots; genuine critical points can be far closer than h
    tree = cKDTree(x)
    taken = np.zeros(len(x), dtype=bool)
    reps = []
    for i in range(len(x)):
        if taken[i]:
            continue
        nb = tree.query_ball_point(x[i], MERGE_RADIUS)
        taken[nb] = True
        reps.append(i)
    x, mu = x[reps], mu[reps]

    f, g, hs = ev.derivatives(x)
    labels = _nearest_component(mesh, x, h)
    for k in range(len(x)):
        idx, degen = morse_index(g[k], hs[k], mu[k])
        out.points.append(
            CriticalPoint(
                x=x[k],
                index=idx,
                g_value=float(np.sum((x[k] - p) ** 2)),
                component=int(labels[k]),
                degenerate=degen,
            )
        )
    return out


@dataclass
class MorseBoundReport:
    holds: tuple
    margins: tuple
    betti: tuple
    counts: tuple
    newton_failures: int
    morse_equality: bool  # sum (-1)^i C_i = chi on every component
    components_checked: int = 0
    components_equal: int = 0

    def to_json(self):
        return {
            "holds": list(self.holds),
            "margins": list(self.margins),
            "betti": list(self.betti),
            "counts": list(self.counts),
            "newton_failures": self.newton_failures,
            "morse_equality": self.morse_equality,
            "components_checked": self.components_checked,
            "components_equal": self.components_equal,
        }


def morse_bound_check(realization, R, components, critical=None, p=None) -> MorseBoundReport:
    """beta_i(R) <= C_i with both sides over closed components inside B(R)."""
    d = realization.dimension
    inside = [c for c in components if c.inside(R)]
    if critical is None:
        critical = find_critical_points(realization, p, R)
    betti = tuple(int(sum(c.betti[i] for c in inside)) for i in range(d))
    counts = critical.counts_on(c.id for c in inside)
    margins = tuple(ci - bi for ci, bi in zip(counts, betti))
    equal = 0
    for c in inside:
        ci = critical.counts_on([c.id])
        chi = 0 if d == 2 else c.euler_characteristic
        equal += sum((-1) ** i * n for i, n in enumerate(ci)) == chi
    return MorseBoundReport(
        holds=tuple(m >= 0 for m in margins),
        margins=margins,
        betti=betti,
        counts=counts,
        newton_failures=critical.newton_failures,
        morse_equality=equal == len(inside),
        components_checked=len(inside),
        components_equal=equal,
    )

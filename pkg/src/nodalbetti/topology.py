"""Nodal components, Betti reports, the sandwich functional and stability checks."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DomainTooSmallError
from .meshing import euler_characteristic, nodal_mesh
from .sampler import FieldRealization, grid_shape
from .seeding import rng_for

PSI_CENTERS = 10_000
PSI_STREAM = 0x505349  # fixed sub-stream tag for the Psi Monte Carlo centers


def ball_volume(d, radius=1.0):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


@dataclass
class NodalComponent:
    id: int
    dimension: int
    spacing: float
    closed: bool
    vertices: np.ndarray = field(repr=False)
    simplices: np.ndarray = field(repr=False)  # local vertex ids
    interface_cells: np.ndarray = field(repr=False)
    max_center_distance: float = 0.0
    betti: Optional[tuple] = None
    euler_characteristic: Optional[int] = None
    genus: Optional[int] = None
    diffeo_class: Optional[str] = None

    def inside(self, R):
        """Closed and within B(R) with a one-cell safety margin."""
        margin = self.spacing * math.sqrt(self.dimension)
        return self.closed and self.max_center_distance < R - margin


def extract_components(realization: FieldRealization, R: float):
    """Split the nodal mesh of ``realization`` into closed and censored components.

    Closed components get their homology filled in.  Returns
    ``(closed, censored)``.
    """
    d = realization.dimension
    h = realization.spacing
    if realization.half_width < R + 2 * h * math.sqrt(d) - 1e-9:
        raise DomainTooSmallError()
    mesh = nodal_mesh(realization.values, realization.origin, h)
    if mesh.n_components == 0:
        return [], []

    simp_label = mesh.labels[mesh.simplices[:, 0]]
    s_order = np.argsort(simp_label, kind="stable")
    s_bounds = np.searchsorted(simp_label[s_order], np.arange(mesh.n_components + 1))
    v_order = np.argsort(mesh.labels, kind="stable")
    v_bounds = np.searchsorted(mesh.labels[v_order], np.arange(mesh.n_components + 1))
    remap = np.empty(len(mesh.vertices), dtype=np.int64)
    dist = np.linalg.norm(mesh.vertices, axis=1)

    closed, censored = [], []
    for k in range(mesh.n_components):
        vids = v_order[v_bounds[k]:v_bounds[k + 1]]
        sids = s_order[s_bounds[k]:s_bounds[k + 1]]
        remap[vids] = np.arange(vids.size)
        comp = NodalComponent(
            id=k,
            dimension=d,
            spacing=h,
            closed=not bool(mesh.on_boundary[sids].any()),
            vertices=mesh.vertices[vids],
            simplices=remap[mesh.simplices[sids]],
            interface_cells=np.unique(mesh.cells[sids]),
            max_center_distance=float(dist[vids].max()),
        )
        if comp.closed:
            component_homology(comp)
            closed.append(comp)
        else:
            censored.append(comp)
    return closed, censored


def component_homology(component: NodalComponent, realization=None):
    """Fill in Betti numbers, Euler characteristic, genus and class in place."""
    if not component.closed:
        raise ValueError("homology requires a closed component")
    if component.dimension == 2:
        component.betti = (1, 1)
    else:
        chi = euler_characteristic(component.simplices)
        assert chi % 2 == 0, "odd Euler characteristic"
        component.euler_characteristic = chi
        component.genus = (2 - chi) // 2
        component.betti = (1, 2 - chi, 1)
    component.diffeo_class = classify_diffeo(component)
    return component


def classify_diffeo(component: NodalComponent):
    if component.dimension == 2:
        return "circle"
    if component.genus is None:
        raise ValueError("homology not computed")
    return f"genus-{component.genus}"


def genus_label(chi):
    return f"genus-{(2 - chi) // 2}"


@dataclass
class BettiReport:
    radius_R: float
    dimension: int
    totals: tuple
    nodal_count: int
    censored_count: int
    class_census: dict
    psi: dict = field(default_factory=dict)  # (i, r) -> value
    ball_volume: float = 0.0

    def to_json(self):
        psi = {}
        for (i, r), v in sorted(self.psi.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            psi.setdefault(repr(float(r)), [0.0] * self.dimension)[i] = v
        return {
            "R": self.radius_R,
            "totals": list(self.totals),
            "nodal_count": self.nodal_count,
            "censored": self.censored_count,
            "census": dict(sorted(self.class_census.items())),
            "psi": psi,
        }


def betti_report(components, R, r_list=None, censored=(), seed=0):
    """Aggregate closed components lying inside B(R)."""
    comps = [c for c in components if c.closed]
    dims = {c.dimension for c in comps} | {c.dimension for c in censored}
    d = dims.pop() if dims else 2
    inside = [c for c in comps if c.inside(R)]
    totals = tuple(int(sum(c.betti[i] for c in inside)) for i in range(d))
    census = dict(Counter(c.diffeo_class for c in inside))
    report = BettiReport(
        radius_R=float(R),
        dimension=d,
        totals=totals,
        nodal_count=totals[0] if totals else 0,
        censored_count=len(censored),
        class_census=census,
        ball_volume=ball_volume(d, R),
    )
    for r in r_list or ():
        for i, v in enumerate(sandwich_psi(comps, R, r, seed=seed, dimension=d)):
            report.psi[(i, float(r))] = v
    return report


def analyze(realization: FieldRealization, R: float, r_list=None, seed=0):
    """Extract components and build the report in one go."""
    closed, censored = extract_components(realization, R)
    return betti_report(closed, R, r_list, censored=censored, seed=seed)


def _hull_points(pts):
    if len(pts) <= pts.shape[1] + 1:
        return pts
    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        return pts


def _ball_centers(d, radius, n, seed):
    rng = rng_for(seed, PSI_STREAM)
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * (radius * rng.random(n) ** (1.0 / d))[:, None]


def sandwich_psi(components, R, r, n_centers=PSI_CENTERS, seed=0, dimension=None):
    """Psi_i(R, r) for i = 0..d-1 over the components counted in beta_i(R).

    The volume of centres x in B(R-r) with the component inside B_x(r) is a
    Monte Carlo fraction of Vol B(R-r), clamped to Vol B(r), so each
    component contributes at most b_i and Psi_i <= beta_i always.
    """
    if not 0 < r < R:
        raise ValueError("r >= R")
    comps = [c for c in components if c.inside(R)]
    if dimension is None:
        dimension = comps[0].dimension if comps else 2
    d = dimension
    psi = np.zeros(d)
    if not comps:
        return tuple(psi.tolist())
    centers = _ball_centers(d, R - r, n_centers, seed)
    outer = ball_volume(d, R - r)
    cap = ball_volume(d, r)
    r2 = r * r
    for c in comps:
        hull = _hull_points(c.vertices)
        ok = np.sum((centers - hull[0]) ** 2, axis=1) < r2
        for y in hull[1:]:
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                break
            ok[idx] = np.sum((centers[idx] - y) ** 2, axis=1) < r2
        vol = min(outer * ok.sum() / n_centers, cap)
        psi += np.asarray(c.betti, dtype=float) * (vol / cap)
    return tuple(psi.tolist())


def write_off(component: NodalComponent, path):
    """ASCII OFF export of one component (segments are padded to degenerate triangles in d=2)."""
    v = component.vertices
    if v.shape[1] == 2:
        v = np.hstack([v, np.zeros((len(v), 1))])
    faces = component.simplices
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(v)} {len(faces)} 0\n")
        for p in v:
            fh.write(" ".join(f"{x:.17g}" for x in p) + "\n")
        for f in faces:
            fh.write(f"{len(f)} " + " ".join(str(int(i)) for i in f) + "\n")


@dataclass
class StabilityReport:
    holds: Optional[bool]
    hypothesis_met: bool
    reason: str
    gate_min: float
    sup_difference: float
    count_f: Optional[int] = None
    count_g: Optional[int] = None
    census_f: dict = field(default_factory=dict)
    census_g: dict = field(default_factory=dict)


def _multiset_embeds(small, big):
    return all(big.get(k, 0) >= n for k, n in small.items())


def perturbation_stability_check(f, g, alpha, R, spacing, margin_cells=3):
    """Compare nodal counts of f in B(R-1) and of g in B(R) when |f - g| < alpha.

    Both fields are tabulated on the same grid.  If max(|f|, |grad f|) <= alpha
    somewhere on B(R), or sup |f - g| >= alpha there, the check does not apply
    and ``holds`` is None (counts are then not computed).
    """
    d = f.dimension
    hw = R + (2 * math.sqrt(d) + margin_cells) * spacing
    dims, origin = grid_shape(hw, spacing, d)
    fv = f.grid_values(origin, spacing, dims)
    gv = g.grid_values(origin, spacing, dims)
    pts = FieldRealization(origin, spacing, fv).points()
    in_ball = np.linalg.norm(pts, axis=1) <= R
    fb, grad, _ = f.derivatives(pts[in_ball])
    gate = float(np.maximum(np.abs(fb), np.linalg.norm(grad, axis=1)).min())
    sup = float(np.abs(fv.ravel() - gv.ravel())[in_ball].max())

    if gate <= alpha:
        return StabilityReport(None, False, "hypothesis not met", gate, sup)
    if sup >= alpha:
        return StabilityReport(None, False, "hypothesis not met: perturbation too large", gate, sup)

    def census(values, radius):
        closed, _ = extract_components(FieldRealization(origin, spacing, values), R)
        inside = [c for c in closed if c.inside(radius)]
        return len(inside), dict(Counter(c.diffeo_class for c in inside))

    nf, cf = census(fv, R - 1)
    ng, cg = census(gv, R)
    holds = nf <= ng
    if d == 3:
        holds = holds and _multiset_embeds(cf, cg)
    return StabilityReport(bool(holds), True, "", gate, sup, nf, ng, cf, cg)

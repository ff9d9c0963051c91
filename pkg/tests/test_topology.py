import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalbetti.errors import DomainTooSmallError
from nodalbetti.evaluators import Bump, SyntheticField
from nodalbetti.meshing import euler_characteristic, is_closed_manifold, nodal_mesh
from nodalbetti.models import SpectralModel
from nodalbetti.sampler import realize, sample_field
from nodalbetti.topology import (
    NodalComponent,
    analyze,
    ball_volume,
    betti_report,
    classify_diffeo,
    component_homology,
    extract_components,
    perturbation_stability_check,
    sandwich_psi,
    write_off,
)

BF2 = SpectralModel.bargmann_fock(2)


def sphere(radius=1.0, center=(0.0, 0.0, 0.0)):
    c = np.asarray(center)
    return SyntheticField(3, lambda p: np.sum((p - c) ** 2, axis=1) - radius**2)


def torus(p, major=2.0, minor=1.0, cx=0.0):
    rho = np.sqrt((p[:, 0] - cx) ** 2 + p[:, 1] ** 2)
    return (rho - major) ** 2 + p[:, 2] ** 2 - minor**2


def test_constant_sign_field_has_no_components():
    f = SyntheticField(2, lambda p: np.ones(len(p)))
    closed, censored = extract_components(realize(f, 4.0, 0.2), 3.0)
    assert closed == [] and censored == []


def test_unit_sphere():
    closed, censored = extract_components(realize(sphere(), 2.6, 0.1), 2.0)
    assert len(closed) == 1 and censored == []
    c = closed[0]
    assert c.betti == (1, 0, 1) and c.euler_characteristic == 2 and c.genus == 0
    assert classify_diffeo(c) == "genus-0"
    assert is_closed_manifold(c.simplices)


def test_torus():
    f = SyntheticField(3, torus)
    closed, _ = extract_components(realize(f, 4.8, 0.1), 4.0)
    assert len(closed) == 1
    assert closed[0].euler_characteristic == 0
    assert closed[0].betti == (1, 2, 1)
    assert closed[0].diffeo_class == "genus-1"


def test_genus_two():
    f = SyntheticField(
        3, lambda p: np.minimum(torus(p, 1.0, 0.35, -1.2), torus(p, 1.0, 0.35, 1.2))
    )
    closed, _ = extract_components(realize(f, 3.0, 0.06), 2.6)
    assert len(closed) == 1
    assert closed[0].euler_characteristic == -2
    assert closed[0].betti == (1, 4, 1)


def test_icosphere_euler_characteristic():
    # icosahedron refined once: V=42, E=120, F=80
    t = (1 + math.sqrt(5)) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) for v in verts]
    mid = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in mid:
            verts.append((verts[a] + verts[b]) / 2)
            mid[key] = len(verts) - 1
        return mid[key]

    refined = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    tri = np.array(refined)
    assert len(verts) == 42 and len(tri) == 80
    assert euler_characteristic(tri) == 2


def test_circle_in_plane():
    f = SyntheticField(2, lambda p: np.sum(p * p, axis=1) - 1.0)
    closed, _ = extract_components(realize(f, 2.0, 0.05), 1.5)
    assert len(closed) == 1 and closed[0].betti == (1, 1)
    assert classify_diffeo(closed[0]) == "circle"


def test_domain_too_small():
    r = realize(sphere(), 2.0, 0.1)
    with pytest.raises(DomainTooSmallError):
        extract_components(r, 1.9)


def test_report_counts_and_censoring():
    # one circle inside, one stripe crossing the box
    f = SyntheticField(2, lambda p: np.minimum(np.sum(p * p, axis=1) - 1.0, np.abs(p[:, 0] - 3.0) - 0.3))
    r = realize(f, 5.0, 0.05)
    closed, censored = extract_components(r, 4.5)
    rep = betti_report(closed, 4.5, censored=censored)
    assert rep.totals == (1, 1)
    assert rep.censored_count == 2  # both sides of the stripe
    assert rep.class_census == {"circle": 1}
    assert rep.ball_volume == pytest.approx(math.pi * 4.5**2)


def test_report_single_sphere():
    rep = analyze(realize(sphere(), 2.6, 0.1), 2.0)
    assert rep.totals == (1, 0, 1)
    assert rep.class_census == {"genus-0": 1}
    assert rep.to_json()["totals"] == [1, 0, 1]


def _blob(points, d=2, closed=True, betti=(1, 1), spacing=0.1):
    return NodalComponent(
        id=0, dimension=d, spacing=spacing, closed=closed, vertices=np.asarray(points, float),
        simplices=np.empty((0, d), int), interface_cells=np.empty(0, int),
        max_center_distance=float(np.linalg.norm(points, axis=1).max()), betti=betti,
    )


def test_psi_zero_for_wide_component():
    comp = _blob([[-3.5, 0.0], [3.5, 0.0], [0.0, 0.5]])
    assert sandwich_psi([comp], 10.0, 3.0) == (0.0, 0.0)


def test_psi_tiny_component_at_origin():
    comp = _blob([[0.01, 0.0], [-0.01, 0.0], [0.0, 0.01]])
    psi = sandwich_psi([comp], 10.0, 3.0)
    assert 0.0 < psi[0] <= 1.0
    # the small-ball volume is capped at Vol B(r)
    assert psi[0] == pytest.approx(1.0)


def test_psi_requires_r_less_than_R():
    with pytest.raises(ValueError):
        sandwich_psi([], 3.0, 3.0)


def test_classify_labels():
    c = _blob([[0.0, 0.0]], d=3, betti=(1, 6, 1))
    c.genus = 3
    assert classify_diffeo(c) == "genus-3"


def test_off_export(tmp_path):
    closed, _ = extract_components(realize(sphere(), 2.8, 0.2), 2.0)
    path = tmp_path / "c.off"
    write_off(closed[0], path)
    lines = path.read_text().splitlines()
    nv, nf, _ = map(int, lines[1].split())
    assert lines[0] == "OFF" and nv == len(closed[0].vertices) and nf == len(closed[0].simplices)


# -- properties over sampled fields ---------------------------------------------

@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_duality_sandwich_and_monotonicity(seed):
    r = sample_field(BF2, 9.0, BF2.default_spacing(), seed)
    closed, censored = extract_components(r, 8.0)
    previous = None
    for R in (3.0, 5.0, 8.0):
        rep = betti_report(closed, R, r_list=[1.0, 2.5], censored=censored, seed=seed)
        assert rep.totals[0] == rep.totals[1]
        for (i, rr), value in rep.psi.items():
            assert value <= rep.totals[i]
        if previous is not None:
            assert all(a <= b for a, b in zip(previous, rep.totals))
        previous = rep.totals
    assert all(c.betti == c.betti[::-1] for c in closed)


@settings(max_examples=4, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_duality_and_manifold_soundness_3d(seed):
    m = SpectralModel.bargmann_fock(3)
    r = sample_field(m, 4.5, m.default_spacing(), seed)
    closed, _ = extract_components(r, 3.0)
    for c in closed:
        assert c.euler_characteristic % 2 == 0
        assert c.betti == c.betti[::-1]
        assert is_closed_manifold(c.simplices)


def test_tie_break_zero_is_positive():
    values = np.array([[-1.0, -1.0, -1.0], [-1.0, 0.0, -1.0], [-1.0, -1.0, -1.0]])
    mesh = nodal_mesh(values, (0.0, 0.0), 1.0)
    assert mesh.n_components == 1
    # the zero node is the only positive one, so every vertex sits on it
    assert np.allclose(mesh.vertices, [[1.0, 1.0]] * len(mesh.vertices))


# -- perturbation stability -------------------------------------------------------

def _analytic(seed, hw=8.0):
    return sample_field(BF2, hw, BF2.default_spacing(), seed, method="spectral", terms=1024).evaluator


def test_stability_identity():
    f = _analytic(1)
    rep = perturbation_stability_check(f, f, 0.01, 5.0, BF2.default_spacing())
    assert rep.sup_difference == 0.0
    if rep.hypothesis_met:
        assert rep.holds and rep.count_f <= rep.count_g


def test_stability_gate_rejects_large_alpha():
    f = _analytic(2)
    rep = perturbation_stability_check(f, f, 5.0, 5.0, BF2.default_spacing())
    assert rep.holds is None and rep.reason == "hypothesis not met"


def test_stability_with_bump():
    f = _analytic(3)
    h = BF2.default_spacing()
    probe = perturbation_stability_check(f, f, 1e-9, 5.0, h)
    alpha = 0.5 * probe.gate_min
    g = f + Bump([0.7, -0.4], 1.5, 0.5 * alpha)
    rep = perturbation_stability_check(f, g, alpha, 5.0, h)
    assert rep.hypothesis_met and rep.holds

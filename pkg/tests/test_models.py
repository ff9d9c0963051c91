import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from nodalbetti.errors import ConfigError
from nodalbetti.models import SpectralModel, check_axioms, covariance, second_moment_matrix

from conftest import BUILTIN


def test_bargmann_fock_values():
    m = SpectralModel.bargmann_fock(2)
    assert covariance(m, np.zeros(2)) == 1.0
    assert covariance(m, np.array([1.0, 0.0])) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert covariance(m, np.array([1.0, 0.0])) == pytest.approx(0.60653, abs=5e-6)


def test_kostlan_chart_covariance():
    m = SpectralModel.kostlan(4, 2)
    for t in (0.3, 1.0, 2.5):
        assert covariance(m, np.array([t, 0.0])) == pytest.approx(math.cos(t / 2.0) ** 4, abs=1e-15)


def test_berry_against_scipy_bessel():
    t = np.linspace(0.0, 30.0, 301)
    m2 = SpectralModel.berry(2)
    m3 = SpectralModel.berry(3)
    lag = np.stack([t, np.zeros_like(t)], axis=1)
    assert np.allclose(m2.covariance(lag), special.j0(t), atol=1e-12)
    lag3 = np.stack([t, np.zeros_like(t), np.zeros_like(t)], axis=1)
    assert np.allclose(m3.covariance(lag3), np.sinc(t / np.pi), atol=1e-12)


def test_band_limited_against_adaptive_quadrature():
    alpha = 0.5
    m = SpectralModel.band_limited(2, alpha)
    norm = (1 - alpha**2) / 2
    for t in (0.5, 2.0, 7.0, 15.0):
        ref, _ = integrate.quad(lambda s: special.j0(s * t) * s, alpha, 1.0, epsabs=1e-13)
        assert m.radial_covariance(t) == pytest.approx(ref / norm, abs=1e-10)


def test_axiom_flags():
    assert tuple(check_axioms(SpectralModel.bargmann_fock(3))) == (True, True, True, True)
    assert tuple(check_axioms(SpectralModel.berry(2))) == (True, True, True, False)
    flat = SpectralModel.custom([((1.0, 0.0), 1.0), ((2.0, 0.0), 1.0)])
    ax = check_axioms(flat)
    assert not ax.rho1 and not ax.rho3 and not ax.rho4
    full = SpectralModel.custom([((1.0, 0.0), 1.0), ((0.0, 1.0), 1.0)])
    assert check_axioms(full).rho3


def test_second_moments():
    assert np.allclose(second_moment_matrix(SpectralModel.bargmann_fock(3)), np.eye(3))
    assert np.allclose(second_moment_matrix(SpectralModel.berry(2)), np.eye(2) / 2)
    assert np.allclose(second_moment_matrix(SpectralModel.berry(3)), np.eye(3) / 3)
    m = SpectralModel.custom([((1.0, 0.0), 0.5), ((0.0, 1.0), 0.5)])
    assert np.allclose(second_moment_matrix(m), np.diag([0.5, 0.5]), atol=1e-15)


def _fd_hessian(model, step=1e-4):
    d = model.dimension
    out = np.zeros((d, d))
    e = np.eye(d) * step
    r = lambda v: float(model.covariance(v))  # noqa: E731
    for i in range(d):
        for j in range(d):
            out[i, j] = (r(e[i] + e[j]) - r(e[i] - e[j]) - r(-e[i] + e[j]) + r(-e[i] - e[j])) / (4 * step**2)
    return -out


@pytest.mark.parametrize("model", BUILTIN + [SpectralModel.custom([((1.0, 0.3), 1.0), ((-0.2, 0.8), 2.0)])],
                         ids=lambda m: m.identifier)
def test_second_moment_matches_finite_difference(model):
    assert np.allclose(second_moment_matrix(model), _fd_hessian(model), atol=1e-6)


def test_fourth_moments_match_sampled_frequencies(rng):
    m = SpectralModel.band_limited(2, 0.3)
    lam = m.sample_frequencies(rng, 400_000)
    emp = np.einsum("qi,qj,qk,ql->ijkl", lam, lam, lam, lam) / len(lam)
    assert np.allclose(m.fourth_moment_tensor(), emp, atol=5e-3)


def test_round_trip_dict():
    for m in BUILTIN:
        assert SpectralModel.from_dict(m.to_dict()) == m


def test_custom_csv(tmp_path):
    p = tmp_path / "atoms.csv"
    p.write_text("freq_1,freq_2,weight\n1.0,0.0,1\n0.0,1.0,1\n")
    m = SpectralModel.from_csv(p)
    assert m.dimension == 2
    assert np.allclose(m.second_moment_matrix(), np.eye(2) / 2)


def test_invalid_models():
    with pytest.raises(ConfigError):
        SpectralModel.band_limited(2, 1.0)
    with pytest.raises(ConfigError):
        SpectralModel.kostlan(0, 2)
    with pytest.raises(ConfigError):
        SpectralModel("bogus", 2)


def test_spacing_rule(builtin_model):
    s = builtin_model.correlation_scale()
    assert float(builtin_model.covariance(np.r_[s, np.zeros(builtin_model.dimension - 1)])) == pytest.approx(0.5, abs=1e-9)
    assert builtin_model.default_spacing() < builtin_model.h_max()


# -- properties ---------------------------------------------------------------

probe_sets = st.integers(min_value=1, max_value=64).flatmap(
    lambda n: st.lists(
        st.tuples(st.floats(-6, 6), st.floats(-6, 6), st.floats(-6, 6)),
        min_size=n, max_size=n,
    )
)


@settings(max_examples=40, deadline=None)
@given(pts=probe_sets, k=st.integers(0, len(BUILTIN) - 1))
def test_gram_matrix_psd(pts, k):
    model = BUILTIN[k]
    x = np.array(pts)[:, : model.dimension]
    gram = model.covariance(x[:, None, :] - x[None, :, :])
    assert np.linalg.eigvalsh(0.5 * (gram + gram.T)).min() >= -1e-9


@settings(max_examples=60, deadline=None)
@given(tau=st.tuples(st.floats(-40, 40), st.floats(-40, 40), st.floats(-40, 40)),
       k=st.integers(0, len(BUILTIN) - 1))
def test_symmetric_and_bounded(tau, k):
    model = BUILTIN[k]
    t = np.array(tau[: model.dimension])
    a, b = float(model.covariance(t)), float(model.covariance(-t))
    assert a == b
    assert a <= 1.0 + 1e-12
    assert float(model.covariance(np.zeros(model.dimension))) == pytest.approx(1.0, abs=1e-14)


def test_axioms_pure():
    m = SpectralModel.custom([((1.0, 2.0), 1.0)])
    assert check_axioms(m) == check_axioms(m)

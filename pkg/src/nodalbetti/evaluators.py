"""Closed-form field evaluators giving F, grad F and Hess F at arbitrary points.

All evaluators take points as an array of shape (P, d) and are vectorised
over P.  ``grid_values`` evaluates on a regular grid and may use a faster
separable path; it agrees with ``value`` to rounding.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

_CHUNK = 2048


def grid_axes(origin, spacing, dims):
    return [origin[k] + spacing * np.arange(n) for k, n in enumerate(dims)]


def grid_points(origin, spacing, dims):
    axes = grid_axes(origin, spacing, dims)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


class AnalyticField:
    dimension: int

    def value(self, points):
        raise NotImplementedError

    def derivatives(self, points):
        """Return (F, grad, hess) with shapes (P,), (P, d), (P, d, d)."""
        raise NotImplementedError

    def grid_values(self, origin, spacing, dims):
        pts = grid_points(origin, spacing, dims)
        out = np.concatenate(
            [self.value(pts[i : i + 65536]) for i in range(0, len(pts), 65536)]
        )
        return out.reshape(dims)

    def __add__(self, other):
        return SumField(self, other)


class SpectralSum(AnalyticField):
    """F(x) = M^{-1/2} sum_k a_k cos<l_k, x> + b_k sin<l_k, x>."""

    def __init__(self, frequencies, cos_amp, sin_amp):
        self.frequencies = np.ascontiguousarray(frequencies, dtype=float)
        self.cos_amp = np.asarray(cos_amp, dtype=float)
        self.sin_amp = np.asarray(sin_amp, dtype=float)
        self.dimension = self.frequencies.shape[1]
        self._scale = 1.0 / math.sqrt(len(self.cos_amp))

    @property
    def terms(self):
        return len(self.cos_amp)

    def value(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(points))
        for i in range(0, len(points), _CHUNK):
            th = points[i : i + _CHUNK] @ self.frequencies.T
            out[i : i + _CHUNK] = np.cos(th) @ self.cos_amp + np.sin(th) @ self.sin_amp
        return out * self._scale

    def derivatives(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lam = self.frequencies
        d = self.dimension
        f = np.empty(len(points))
        g = np.empty((len(points), d))
        h = np.empty((len(points), d, d))
        ll = np.einsum("ki,kj->kij", lam, lam).reshape(len(lam), d * d)
        for i in range(0, len(points), _CHUNK):
            th = points[i : i + _CHUNK] @ lam.T
            c, s = np.cos(th), np.sin(th)
            even = c * self.cos_amp + s * self.sin_amp
            odd = s * self.cos_amp - c * self.sin_amp
            f[i : i + _CHUNK] = even.sum(axis=1)
            g[i : i + _CHUNK] = -(odd @ lam)
            h[i : i + _CHUNK] = -(even @ ll).reshape(-1, d, d)
        return f * self._scale, g * self._scale, h * self._scale

    def grid_values(self, origin, spacing, dims):
        axes = grid_axes(origin, spacing, dims)
        coef = (self.cos_amp - 1j * self.sin_amp) * self._scale
        lam = self.frequencies
        exps = [np.exp(1j * np.outer(lam[:, k], ax)) for k, ax in enumerate(axes)]
        if self.dimension == 2:
            return ((exps[0] * coef[:, None]).T @ exps[1]).real
        if self.dimension == 3:
            n0, n1, n2 = dims
            out = np.zeros((n0 * n1, n2))
            step = max(1, (1 << 22) // (n0 * n1))
            for k in range(0, len(coef), step):
                sl = slice(k, k + step)
                a = (exps[0][sl] * coef[sl, None])[:, :, None] * exps[1][sl][:, None, :]
                out += (a.reshape(a.shape[0], -1).T @ exps[2][sl]).real
            return out.reshape(dims)
        return super().grid_values(origin, spacing, dims)


class SyntheticField(AnalyticField):
    """Wraps user callables; ``grad`` and ``hess`` are optional."""

    def __init__(self, dimension, func, grad=None, hess=None):
        self.dimension = dimension
        self._f, self._g, self._h = func, grad, hess

    def value(self, points):
        return np.asarray(self._f(np.atleast_2d(points)), dtype=float)

    def derivatives(self, points):
        if self._g is None or self._h is None:
            raise NotImplementedError("synthetic field has no derivatives")
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return self.value(p), np.asarray(self._g(p)), np.asarray(self._h(p))


class SumField(AnalyticField):
    def __init__(self, left, right):
        self.left, self.right = left, right
        self.dimension = left.dimension

    def value(self, points):
        return self.left.value(points) + self.right.value(points)

    def derivatives(self, points):
        a, b = self.left.derivatives(points), self.right.derivatives(points)
        return tuple(x + y for x, y in zip(a, b))

    def grid_values(self, origin, spacing, dims):
        return self.left.grid_values(origin, spacing, dims) + self.right.grid_values(
            origin, spacing, dims
        )


class Bump(AnalyticField):
    """amplitude * exp(-|x - center|^2 / (2 width^2)); sup-norm = |amplitude|."""

    def __init__(self, center, width, amplitude):
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)
        self.amplitude = float(amplitude)
        self.dimension = len(self.center)

    def value(self, points):
        dx = np.atleast_2d(points) - self.center
        return self.amplitude * np.exp(-0.5 * np.sum(dx * dx, axis=1) / self.width**2)

    def derivatives(self, points):
        dx = np.atleast_2d(points) - self.center
        w2 = self.width**2
        f = self.value(points)
        g = -dx / w2 * f[:, None]
        eye = np.eye(self.dimension)
        h = (np.einsum("pi,pj->pij", dx, dx) / w2**2 - eye / w2) * f[:, None, None]
        return f, g, h


# ---------------------------------------------------------------------------
# Kostlan polynomials in the exponential chart at the north pole of S^2


def _series(q, coeffs):
    out = np.zeros_like(q)
    for c in coeffs[::-1]:
        out = out * q + c
    return out


def _chart_series(nterms=30):
    """Power-series coefficients in q=|w|^2 of S(q)=sin(sqrt q)/sqrt q and
    C(q)=cos(sqrt q), with their first two q-derivatives."""
    s = [(-1) ** k / math.factorial(2 * k + 1) for k in range(nterms)]
    c = [(-1) ** k / math.factorial(2 * k) for k in range(nterms)]

    def deriv(a):
        return [k * a[k] for k in range(1, len(a))]

    return s, deriv(s), deriv(deriv(s)), c, deriv(c), deriv(deriv(c))


_SERIES = _chart_series()


def chart_exp(w):
    """exp map at the north pole (0,0,1) of S^2 with its first two
    derivatives: returns x (P,3), J (P,3,2), H (P,3,2,2)."""
    w = np.atleast_2d(w)
    q = np.sum(w * w, axis=1)
    s, s1, s2, c, c1, c2 = (_series(q, a) for a in _SERIES)
    p = len(w)
    x = np.empty((p, 3))
    x[:, :2] = s[:, None] * w
    x[:, 2] = c
    eye = np.eye(2)
    jac = np.empty((p, 3, 2))
    jac[:, :2, :] = s[:, None, None] * eye + 2.0 * s1[:, None, None] * w[:, :, None] * w[:, None, :]
    jac[:, 2, :] = 2.0 * c1[:, None] * w
    hes = np.empty((p, 3, 2, 2))
    ww = np.einsum("pa,pb->pab", w, w)
    for i in range(2):
        hes[:, i] = 2.0 * s1[:, None, None] * (
            eye[i][None, :, None] * w[:, None, :]
            + eye[i][None, None, :] * w[:, :, None]
            + eye[None] * w[:, i, None, None]
        ) + 4.0 * s2[:, None, None] * ww * w[:, i, None, None]
    hes[:, 2] = 2.0 * c1[:, None, None] * eye + 4.0 * c2[:, None, None] * ww
    return x, jac, hes


def kostlan_coefficient_count(n, d=2):
    return math.comb(n + d, d)


class KostlanChart(AnalyticField):
    """P_n(x) = sum_{|j|=n} sqrt(n choose j) a_j x^j on S^2, pulled back by
    u -> exp_pole(u / sqrt(n)).

    Coefficients are ordered by m = j0 + j1 (so j2 = n - m) and then by j0.
    """

    def __init__(self, n, coefficients):
        self.n = int(n)
        self.coefficients = np.asarray(coefficients, dtype=float)
        if len(self.coefficients) != kostlan_coefficient_count(self.n):
            raise ValueError("wrong number of Kostlan coefficients")
        self.dimension = 2
        n = self.n
        m_idx = np.concatenate([np.full(m + 1, m) for m in range(n + 1)])
        j0 = np.concatenate([np.arange(m + 1) for m in range(n + 1)])
        self._exps = np.stack([j0, m_idx - j0, n - m_idx], axis=1)
        self._weights = np.exp(
            0.5 * (gammaln(n + 1) - gammaln(self._exps + 1).sum(axis=1))
        )
        self._fourier = None

    @property
    def scale(self):
        return math.sqrt(self.n)

    # -- ambient polynomial -------------------------------------------------

    def ambient_derivatives(self, x):
        """P, grad P, Hess P at ambient points x of shape (P, 3)."""
        n = self.n
        ex = self._exps
        c = self._weights * self.coefficients
        k = np.arange(n + 1)
        pw = [x[:, i, None] ** k for i in range(3)]
        pm1 = [np.concatenate([np.zeros((len(x), 1)), p[:, :-1]], axis=1) for p in pw]
        pm2 = [np.concatenate([np.zeros((len(x), 2)), p[:, :-2]], axis=1) for p in pw]
        base = [p[:, ex[:, i]] for i, p in enumerate(pw)]
        d1 = [ex[:, i] * pm1[i][:, ex[:, i]] for i in range(3)]
        d2 = [ex[:, i] * (ex[:, i] - 1) * pm2[i][:, ex[:, i]] for i in range(3)]
        val = (base[0] * base[1] * base[2]) @ c
        grad = np.empty((len(x), 3))
        hess = np.empty((len(x), 3, 3))
        for i in range(3):
            o = [base[j] for j in range(3) if j != i]
            grad[:, i] = (d1[i] * o[0] * o[1]) @ c
            hess[:, i, i] = (d2[i] * o[0] * o[1]) @ c
            for j in range(i + 1, 3):
                rest = base[3 - i - j]
                hess[:, i, j] = hess[:, j, i] = (d1[i] * d1[j] * rest) @ c
        return val, grad, hess

    def derivatives(self, points):
        u = np.atleast_2d(np.asarray(points, dtype=float))
        f = np.empty(len(u))
        g = np.empty((len(u), 2))
        h = np.empty((len(u), 2, 2))
        step = max(1, 4_000_000 // len(self.coefficients))
        for i in range(0, len(u), step):
            sl = slice(i, i + step)
            x, jac, hes = chart_exp(u[sl] / self.scale)
            pv, pg, ph = self.ambient_derivatives(x)
            f[sl] = pv
            g[sl] = np.einsum("pia,pi->pa", jac, pg) / self.scale
            h[sl] = (
                np.einsum("pia,pij,pjb->pab", jac, ph, jac)
                + np.einsum("pi,piab->pab", pg, hes)
            ) / self.n
        return f, g, h

    # -- fast trigonometric route ------------------------------------------

    def _fourier_tables(self):
        """Fourier coefficients in the azimuth of each degree-m block
        Q_m(phi) = sum_j0 sqrt(C(m,j0)) a_{m,j0} cos^j0 sin^(m-j0)."""
        if self._fourier is None:
            n = self.n
            kk = 2 * n + 2
            phi = 2.0 * np.pi * np.arange(kk) / kk
            k = np.arange(n + 1)
            pc = np.cos(phi)[:, None] ** k
            ps = np.sin(phi)[:, None] ** k
            a_cos = np.zeros((n + 1, n + 1))
            a_sin = np.zeros((n + 1, n + 1))
            start = 0
            for m in range(n + 1):
                j0 = np.arange(m + 1)
                w = np.exp(0.5 * (gammaln(m + 1) - gammaln(j0 + 1) - gammaln(m - j0 + 1)))
                coef = w * self.coefficients[start : start + m + 1]
                start += m + 1
                q = (pc[:, : m + 1] * ps[:, m::-1]) @ coef
                spec = np.fft.rfft(q)
                keep = (k <= m) & ((m - k) % 2 == 0)
                a_cos[m] = np.where(keep, 2.0 * spec[: n + 1].real / kk, 0.0)
                a_sin[m] = np.where(keep, -2.0 * spec[: n + 1].imag / kk, 0.0)
                a_cos[m, 0] /= 2.0
            self._fourier = (a_cos, a_sin)
        return self._fourier

    def value(self, points):
        u = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.n
        a_cos, a_sin = self._fourier_tables()
        m = np.arange(n + 1)
        log_binom = 0.5 * (gammaln(n + 1) - gammaln(m + 1) - gammaln(n - m + 1))
        out = np.empty(len(u))
        for i in range(0, len(u), 4096):
            uu = u[i : i + 4096]
            r = np.linalg.norm(uu, axis=1) / self.scale
            phi = np.arctan2(uu[:, 1], uu[:, 0])
            cr, sr = np.cos(r), np.sin(r)
            with np.errstate(divide="ignore", invalid="ignore"):
                lc = np.log(np.abs(cr))[:, None] * (n - m)
                ls = np.where(m > 0, np.log(sr)[:, None] * m, 0.0)
            sign = np.where((cr[:, None] < 0) & ((n - m) % 2 == 1), -1.0, 1.0)
            g = sign * np.exp(log_binom + lc + ls)
            kphi = np.outer(phi, m)
            out[i : i + 4096] = np.sum(
                np.cos(kphi) * (g @ a_cos) + np.sin(kphi) * (g @ a_sin), axis=1
            )
        return out

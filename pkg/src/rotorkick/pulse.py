"""
Dimensionless driving field on the window [tau_i, tau_f] = [0, 1].

``Pulse`` is shape-agnostic: a subclass supplies ``field`` and, when it can,
closed-form overrides for the area and its integrals. The base class falls
back to quadrature for everything beyond ``field``.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

TAU_I = 0.0
TAU_F = 1.0

_QUAD_CHUNK = 512


@lru_cache(maxsize=64)
def gauss_legendre(n):
    """Nodes and weights on [-1, 1], cached per order."""
    x, w = special.roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_order(omega_max, bandwidth):
    """Gauss-Legendre node count for an integrand oscillating at up to
    ``omega_max + bandwidth`` rad per unit time on a unit window."""
    return max(16, 4 * math.ceil(abs(omega_max) + bandwidth))


class Pulse:
    """Field E_r(tau) vanishing outside [tau_i, tau_f]."""

    tau_i = TAU_I
    tau_f = TAU_F

    # Highest angular frequency present in the field; sets quadrature order.
    bandwidth = 2 * math.pi

    def _field_inside(self, tau):
        raise NotImplementedError

    def field(self, tau):
        tau = np.asarray(tau, dtype=float)
        inside = (tau >= self.tau_i) & (tau <= self.tau_f)
        out = np.where(inside, self._field_inside(np.clip(tau, self.tau_i, self.tau_f)), 0.0)
        return out if out.ndim else float(out)

    def area(self, tau):
        """Running area A(tau) = integral of the field from tau_i to tau."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.array([
            integrate.quad(self._field_inside, self.tau_i, min(max(t, self.tau_i), self.tau_f),
                           epsabs=1e-14, epsrel=1e-13, limit=200)[0]
            for t in tau
        ])
        return out if out.size > 1 else float(out[0])

    @property
    def final_area(self):
        return float(self.area(self.tau_f))

    def area_time_integral(self):
        """Integral of A(u) over the pulse window."""
        I1, _ = self.weighted_integrals(0.0)
        return float(I1.real)

    def area_fourier(self, k):
        """A^(k) = (2 pi)^(-1/2) * int_{tau_i}^{tau_f} A(u) exp(-i u k) du."""
        k = np.asarray(k, dtype=float)
        I1, _ = self.weighted_integrals(-k)
        # weighted_integrals measures phases from tau_i
        return np.exp(-1j * k * self.tau_i) * I1 / math.sqrt(2 * math.pi)

    def weighted_integrals(self, omega, upper=None):
        """Integrals of A and A^2 against exp(i omega (u - tau_i)).

        Parameters
        ----------
        omega : float or array
            Angular frequencies; any shape.
        upper : float, optional
            Upper limit, clipped to [tau_i, tau_f]. Defaults to tau_f.

        Returns
        -------
        I1, I2 : complex arrays shaped like ``omega``
        """
        omega = np.asarray(omega, dtype=float)
        upper = self.tau_f if upper is None else min(max(upper, self.tau_i), self.tau_f)
        length = upper - self.tau_i
        if length <= 0.0:
            z = np.zeros(omega.shape, dtype=complex)
            return z, z.copy()
        wmax = float(np.max(np.abs(omega))) if omega.size else 0.0
        n = gl_order(wmax * length, self.bandwidth * length)
        x, w = gauss_legendre(n)
        u = self.tau_i + 0.5 * length * (x + 1.0)
        w = 0.5 * length * w
        A = np.asarray(self.area(u), dtype=float)
        flat = omega.reshape(-1)
        I1 = np.zeros(flat.shape, dtype=complex)
        I2 = np.zeros(flat.shape, dtype=complex)
        for s in range(0, n, _QUAD_CHUNK):
            sl = slice(s, s + _QUAD_CHUNK)
            ph = np.exp(1j * np.outer(flat, u[sl] - self.tau_i))
            I1 += ph @ (w[sl] * A[sl])
            I2 += ph @ (w[sl] * A[sl] ** 2)
        return I1.reshape(omega.shape), I2.reshape(omega.shape)

    def area_partial_integrals(self, upper):
        """(int A, int A^2) from tau_i to ``upper``."""
        I1, I2 = self.weighted_integrals(0.0, upper)
        return float(I1.real), float(I2.real)


def _ft_unit(x):
    # int_0^1 exp(-i x u) du
    return np.exp(-0.5j * x) * np.sinc(x / (2 * np.pi))


@dataclass(frozen=True)
class Sin2SinPulse(Pulse):
    """E_r(tau) = e0r * sin^2(pi tau) * sin(2 pi f tau) on [0, 1].

    Integer ``f`` gives zero total area.
    """

    e0r: float
    f: float

    def __post_init__(self):
        if self.e0r < 0:
            raise ValueError("e0r must be non-negative")
        if not self.f > 0:
            raise ValueError("f must be positive")

    @property
    def bandwidth(self):
        return 2 * math.pi * self.f

    @property
    def _components(self):
        # sin^2(pi t) sin(a t) = sin(a t)/2 - sin((a+b)t)/4 - sin((a-b)t)/4, b = 2 pi
        a = 2 * math.pi * self.f
        b = 2 * math.pi
        comps = [(0.5 * self.e0r, a), (-0.25 * self.e0r, a + b), (-0.25 * self.e0r, a - b)]
        return [(amp, k) for amp, k in comps if abs(k) > 1e-12]

    def _field_inside(self, tau):
        return self.e0r * np.sin(np.pi * tau) ** 2 * np.sin(2 * np.pi * self.f * tau)

    def area(self, tau):
        tau = np.clip(np.asarray(tau, dtype=float), self.tau_i, self.tau_f)
        out = np.zeros_like(tau)
        for amp, k in self._components:
            out = out + amp * (1.0 - np.cos(k * tau)) / k
        return out if out.ndim else float(out)

    def area_time_integral(self):
        L = self.tau_f - self.tau_i
        return float(sum(amp / k * (L - math.sin(k * L) / k) for amp, k in self._components))

    def area_fourier(self, k):
        k = np.asarray(k, dtype=float)
        total = np.zeros(k.shape, dtype=complex)
        for amp, kn in self._components:
            total = total + amp / kn * (_ft_unit(k) - 0.5 * (_ft_unit(k - kn) + _ft_unit(k + kn)))
        out = total / math.sqrt(2 * math.pi)
        return out if out.ndim else complex(out)


def area_integral_closed_form(e0r, f):
    """Closed form of int A over a zero-area sin^2 sin pulse, integer f >= 1."""
    if f != int(f) or f < 1:
        raise ValueError("closed form holds for integer f >= 1 only")
    if f == 1:
        return e0r * 3.0 / (16 * math.pi)
    return e0r / (4 * math.pi) * (-1.0) / (f * (f * f - 1))

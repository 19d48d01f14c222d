"""
Orientation measures: <cos theta> for single states and thermal ensembles,
exact (from propagated states) and first order in epsilon (closed form).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from rotorkick.basis import RotorBasis, c_coeff

NORM_TOL = 1e-8
TAIL_TOL = 1e-10
DEFAULT_JMAX_THERMAL = 12


def _c(j, m):
    if j < 1 or abs(m) >= j:
        return 0.0
    return c_coeff(j, m)


def cos_expect(psi, b: RotorBasis):
    """<psi| cos theta |psi> for a unit-norm state."""
    psi = np.asarray(psi)
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state norm {norm} deviates from 1")
    val = np.vdot(psi, b.cos @ psi)
    if abs(val.imag) > 1e-12:
        raise ValueError(f"<cos> has imaginary residue {val.imag:.2e}")
    return float(val.real)


def free_cos_trace(b: RotorBasis, psi_f, epsilon, taus, tau_f=1.0):
    """<cos theta>(tau) for a state evolving freely from ``psi_f`` at ``tau_f``.

    ``psi_f`` may hold several states as columns; the result then has shape
    (len(taus), k).
    """
    psi_f = np.asarray(psi_f, dtype=complex)
    vec = psi_f.ndim == 1
    psi = psi_f.reshape(b.dim, -1)
    s = np.asarray(taus, dtype=float) - tau_f
    lam = b.eigen_j2
    off = np.diagonal(b.cos, -1)
    omega = epsilon * (lam[1:] - lam[:-1])
    pair = off[:, None] * psi[1:].conj() * psi[:-1]           # (n-1, k)
    phases = np.exp(1j * np.outer(s, omega))                   # (t, n-1)
    out = 2.0 * np.real(phases @ pair)
    return out[:, 0] if vec else out


def _cos_kernel(pulse, epsilon, k, taus):
    # int A(u) cos(2 eps k [u - tau + tau_i]) du over the pulse window
    taus = np.asarray(taus, dtype=float)
    w = 2.0 * epsilon * k
    I1, _ = pulse.weighted_integrals(w)
    return np.real(np.exp(-1j * w * (taus - pulse.tau_i)) * I1)


def cos_firstorder_state(j, m, taus, pulse, epsilon):
    """First-order post-pulse <cos theta> starting from |j, m>."""
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < pulse.tau_f):
        raise ValueError("first-order formula holds after the pulse only")
    up = 4 * epsilon * (j + 1) * _c(j + 1, m) ** 2 * _cos_kernel(pulse, epsilon, j + 1, taus)
    down = 0.0
    if j > 0:
        down = 4 * epsilon * j * _c(j, m) ** 2 * _cos_kernel(pulse, epsilon, j, taus)
    return up - down


def cos1_formula(taus, pulse, epsilon):
    """First-order <cos theta> from |0,0>, written through the area's Fourier transform."""
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < pulse.tau_f):
        raise ValueError("first-order formula holds after the pulse only")
    Ahat = complex(pulse.area_fourier(2 * epsilon))
    return (4 * math.sqrt(2 * math.pi) / 3 * epsilon * abs(Ahat)
            * np.cos(2 * epsilon * (taus - pulse.tau_i) + np.angle(Ahat)))


def _boltzmann(beta, x):
    x = np.asarray(x, dtype=float)
    if math.isinf(beta):
        return np.where(x == 0, 1.0, 0.0)
    return np.exp(-beta * x)


@dataclass(frozen=True)
class ThermalEnsemble:
    """Boltzmann populations exp(-beta_B j (j+1)) over j = 0..jmax_thermal."""

    beta_B: float
    jmax_thermal: int = DEFAULT_JMAX_THERMAL
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    Q: float = field(init=False, compare=False)

    def __post_init__(self):
        if not self.beta_B > 0:
            raise ValueError("beta_B must be positive")
        js = np.arange(self.jmax_thermal + 1)
        w = _boltzmann(self.beta_B, js * (js + 1))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "Q", float(np.sum((2 * js + 1) * w)))
        if self.tail > TAIL_TOL:
            raise ValueError(f"Boltzmann tail {self.tail:.2e} too large; raise jmax_thermal")

    @property
    def tail(self):
        if math.isinf(self.beta_B):
            return 0.0  # only j = 0 is populated; nothing is cut off
        J = self.jmax_thermal
        return float((2 * J + 1) * self.weights[J] / self.Q)

    @classmethod
    def auto(cls, beta_B, start=DEFAULT_JMAX_THERMAL):
        if math.isinf(beta_B):
            return cls(beta_B, 0)
        J = start
        while True:
            js = J
            w = math.exp(-beta_B * js * (js + 1))
            if w * (2 * js + 1) < TAIL_TOL:  # Q >= 1
                return cls(beta_B, J)
            J += 1

    def states(self):
        """Initial states (j, m) carrying weight, m from -j to j."""
        return [(j, m) for j in range(self.jmax_thermal + 1) for m in range(-j, j + 1)]


def thermal_average(traces, ens: ThermalEnsemble):
    """(1/Q) sum_j w_j sum_m trace[(j, m)].

    ``traces`` maps (j, m) to an array over tau; every state of the ensemble
    must be present.
    """
    total = None
    for j in range(ens.jmax_thermal + 1):
        wj = ens.weights[j]
        for m in range(-j, j + 1):
            try:
                tr = np.asarray(traces[(j, m)], dtype=float)
            except KeyError:
                raise KeyError(f"missing trace for initial state (j={j}, m={m})") from None
            total = wj * tr if total is None else total + wj * tr
    return total / ens.Q


def thermal_firstorder(taus, pulse, epsilon, ens: ThermalEnsemble, coeff_mode="derived"):
    """First-order thermally averaged <<cos theta>> after the pulse.

    ``coeff_mode="derived"`` sums the single-state first-order result over
    (j, m), which weights level pair (j-1, j) by sum_m c_{jm}^2 = j/3.
    ``coeff_mode="literal"`` uses the unsquared sum c_j = sum_m c_{jm}
    instead, with all levels up to jmax_thermal.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < pulse.tau_f):
        raise ValueError("first-order formula holds after the pulse only")
    J = ens.jmax_thermal
    w = np.append(ens.weights, 0.0)  # w_{J+1}: level outside the ensemble
    total = np.zeros_like(taus)
    if coeff_mode == "derived":
        for k in range(1, J + 2):
            coef = 4 * epsilon * k * (k / 3.0) * (w[k - 1] - w[k])
            if coef:
                total += coef * _cos_kernel(pulse, epsilon, k, taus)
    elif coeff_mode == "literal":
        for k in range(1, J + 1):
            cj = sum(_c(k, m) for m in range(-k, k + 1))
            coef = 4 * epsilon * k * cj * (w[k - 1] - w[k])
            if coef:
                total += coef * _cos_kernel(pulse, epsilon, k, taus)
    else:
        raise ValueError(f"unknown coeff_mode {coeff_mode!r}")
    return total / ens.Q


def rotational_mean(taus, values, epsilon, j_dominant=0, start=None):
    """Mean of a trace over one period pi / (epsilon (j_dominant + 1)).

    The period is that of the beat between levels j_dominant and
    j_dominant + 1. Integration is trapezoidal on the samples, with linear
    interpolation for a partial last interval.
    """
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    period = math.pi / (epsilon * (j_dominant + 1))
    t0 = taus[0] if start is None else start
    t1 = t0 + period
    if t0 < taus[0] or t1 > taus[-1] * (1 + 1e-12):
        raise ValueError("averaging window exceeds trace support")
    t1 = min(t1, taus[-1])
    inside = (taus >= t0) & (taus <= t1)
    t = taus[inside]
    v = values[inside]
    if t[0] > t0:
        t = np.insert(t, 0, t0)
        v = np.insert(v, 0, np.interp(t0, taus, values))
    if t[-1] < t1:
        t = np.append(t, t1)
        v = np.append(v, np.interp(t1, taus, values))
    return float(np.trapezoid(v, t) / period)


def refine_peak(taus, values):
    """(tau, value) of the largest |value|, refined by a parabola through
    the neighbouring samples."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(np.abs(values)))
    if 0 < i < len(values) - 1:
        y0, y1, y2 = values[i - 1:i + 2]
        h = taus[i + 1] - taus[i]
        denom = y0 - 2 * y1 + y2
        if denom != 0 and abs(taus[i] - taus[i - 1] - h) < 1e-9 * max(1.0, h):
            x = 0.5 * (y0 - y2) / denom
            return float(taus[i] + x * h), float(y1 - 0.25 * (y0 - y2) * x)
    return float(taus[i]), float(values[i])


def local_extrema(taus, values, min_abs=0.0):
    """Refined interior local extrema of ``values`` with |value| >= ``min_abs``."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    out = []
    for i in range(1, len(values) - 1):
        y0, y1, y2 = values[i - 1:i + 2]
        if abs(y1) < min_abs:
            continue
        if (y1 > y0 and y1 >= y2) or (y1 < y0 and y1 <= y2):
            out.append(refine_peak(taus[i - 1:i + 2], values[i - 1:i + 2]))
    return out


def longest_span_above(taus, values, threshold):
    """Length of the longest contiguous interval where ``values > threshold``.

    Crossing points are located by linear interpolation.
    """
    taus = np.asarray(taus, dtype=float)
    v = np.asarray(values, dtype=float) - threshold
    best = 0.0
    start = taus[0] if v[0] > 0 else None
    for i in range(1, len(v)):
        if v[i - 1] <= 0 < v[i]:
            start = taus[i - 1] + (taus[i] - taus[i - 1]) * (-v[i - 1]) / (v[i] - v[i - 1])
        elif v[i - 1] > 0 >= v[i] and start is not None:
            end = taus[i - 1] + (taus[i] - taus[i - 1]) * v[i - 1] / (v[i - 1] - v[i])
            best = max(best, end - start)
            start = None
    if start is not None:
        best = max(best, taus[-1] - start)
    return float(best)


@dataclass(frozen=True)
class OrientationTrace:
    taus: np.ndarray
    values: np.ndarray
    method: str

    def peak(self):
        return refine_peak(self.taus, self.values)

    def span_above(self, threshold, absolute=False):
        v = np.abs(self.values) if absolute else self.values
        return longest_span_above(self.taus, v, threshold)

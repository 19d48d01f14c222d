"""
Exact and first-order propagators for the kicked rotor

    i dU/dtau = (-E_r(tau) cos(theta) + epsilon J^2) U

on one m-block. All approximate propagators share the outer factor
exp(i A(tau) cos(theta)) and differ in how the interaction-picture
Hamiltonian

    H1(tau) = J^2 + 2i A(tau) (sigma + cos) + A(tau)^2 (1 - cos^2)

is exponentiated. Past tau_f every propagator continues by free rotation.
"""

from dataclasses import dataclass, replace
import enum
import math

import numpy as np

from rotorkick.basis import (RotorBasis, herm_expm, hermitian_residual, NotHermitianError,
                             c_coeff)
from rotorkick.pulse import Pulse

ASSEMBLY_TOL = 1e-9
NORM_TOL = 1e-8
DEFAULT_DT = 1e-4


class ConvergenceError(RuntimeError):
    pass


class Kind(str, enum.Enum):
    REFERENCE = "ref"
    MAGNUS = "M"
    SECULAR = "S"
    IMPROVED = "I"
    SUDDEN_IMPACT = "SI"


@dataclass(frozen=True)
class PropagatorConfig:
    kind: Kind
    tau1: float = 0.0
    tau2: float = 0.0
    tau_h: float = 0.5
    dt: float = DEFAULT_DT

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("tau1", "tau2", "tau_h"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside the pulse window [0, 1]")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def with_(self, **kw):
        return replace(self, **kw)


def _sigma_plus_cos(b: RotorBasis):
    # real antisymmetric, so 2i A (sigma + cos) is Hermitian
    return b.sigma + b.cos


def _one_minus_cos2(b: RotorBasis):
    return np.eye(b.dim) - b.cos2


def free_propagator(b: RotorBasis, epsilon, dtau):
    """exp(-i epsilon dtau J^2) as a dense diagonal matrix."""
    return np.diag(np.exp(-1j * epsilon * dtau * b.eigen_j2))


def kick_propagator(b: RotorBasis, A_val):
    """exp(i A cos(theta)), reusing the cached diagonalization of cos."""
    return herm_expm(b.cos, A_val, eig=b.cos_eig)


def h1_from_area(b: RotorBasis, A_val):
    return b.j2 + 2j * A_val * _sigma_plus_cos(b) + A_val ** 2 * _one_minus_cos2(b)


def h1(b: RotorBasis, pulse: Pulse, tau):
    """Interaction-picture Hamiltonian at ``tau`` (closed commutator form)."""
    return h1_from_area(b, pulse.area(tau))


def h1_integral(b: RotorBasis, pulse: Pulse, lo, hi):
    """int_lo^hi H1(u) du, from the partial integrals of A and A^2."""
    a_hi, a2_hi = pulse.area_partial_integrals(hi)
    a_lo, a2_lo = pulse.area_partial_integrals(lo)
    return ((hi - lo) * b.j2 + 2j * (a_hi - a_lo) * _sigma_plus_cos(b)
            + (a2_hi - a2_lo) * _one_minus_cos2(b))


def _exp_minus_i_eps(X, epsilon):
    res = hermitian_residual(X)
    if res > ASSEMBLY_TOL * max(1.0, float(np.max(np.abs(X)))):
        raise NotHermitianError(f"exponent not Hermitian: residual {res:.3e}")
    X = 0.5 * (X + X.conj().T)
    return herm_expm(X, -epsilon, eig=np.linalg.eigh(X))


def _check_window(pulse, tau):
    if not pulse.tau_i <= tau <= pulse.tau_f:
        raise ValueError(f"tau={tau} outside the pulse window; use propagator_at")


def magnus_u(b, pulse, epsilon, tau, tp=None):
    """First-order Magnus propagator U^M(tau, tau_i).

    With ``tp`` set, the propagator is assembled in the interaction picture
    anchored at ``tp`` instead of tau_i; the result is the same.
    """
    _check_window(pulse, tau)
    if tp is None or tp == pulse.tau_i:
        X = h1_integral(b, pulse, pulse.tau_i, tau)
        return kick_propagator(b, pulse.area(tau)) @ _exp_minus_i_eps(X, epsilon)
    # H1(u; tp) has the area measured from tp
    Ap = pulse.area(tp)
    L = tau - pulse.tau_i
    iA, iA2 = pulse.area_partial_integrals(tau)
    iA_shift = iA - Ap * L
    iA2_shift = iA2 - 2 * Ap * iA + Ap ** 2 * L
    X = L * b.j2 + 2j * iA_shift * _sigma_plus_cos(b) + iA2_shift * _one_minus_cos2(b)
    return (kick_propagator(b, pulse.area(tau) - Ap) @ _exp_minus_i_eps(X, epsilon)
            @ kick_propagator(b, Ap))


def secular_u(b, pulse, epsilon, tau, tau2=0.0):
    """U^S: secular part J^2 split off, remainder anchored at ``tau2``."""
    _check_window(pulse, tau)
    ti = pulse.tau_i
    X_late = h1_integral(b, pulse, tau2, tau) - (tau - tau2) * b.j2
    X_early = h1_integral(b, pulse, ti, tau2) - (tau2 - ti) * b.j2
    return (kick_propagator(b, pulse.area(tau)) @ _exp_minus_i_eps(X_late, epsilon)
            @ free_propagator(b, epsilon, tau - ti) @ _exp_minus_i_eps(X_early, epsilon))


def _sinc_integral(omega, length):
    # int_0^length exp(i omega u) du
    return length * np.exp(0.5j * omega * length) * np.sinc(omega * length / (2 * np.pi))


def improved_generator(b, pulse, epsilon, tau, tau1=0.0):
    """Hermitian Z with U^I = kick . exp(-i eps H1(tau1) (tau - tau_i)) . exp(-i eps Z).

    Z = int_{tau_i}^{tau} e^{i eps (u - tau_i) D} [H1(u) - D] e^{-i eps (u - tau_i) D} du
    with D = H1(tau1). In the eigenbasis of D every matrix element only picks
    up a phase, so the integral reduces to scalar weighted integrals of A and
    A^2 at the eigenvalue differences.
    """
    ti = pulse.tau_i
    A1 = pulse.area(tau1)
    if A1 == 0.0:
        mu = b.eigen_j2
        V = None
    else:
        mu, V = np.linalg.eigh(h1_from_area(b, A1))
    D = h1_from_area(b, A1)
    K = 2j * _sigma_plus_cos(b)
    L2 = _one_minus_cos2(b)
    const = b.j2 - D
    if V is not None:
        K = V.conj().T @ K @ V
        L2 = V.conj().T @ L2 @ V
        const = V.conj().T @ const @ V
    omega = epsilon * (mu[:, None] - mu[None, :])
    I1, I2 = pulse.weighted_integrals(omega, upper=tau)
    Z = const * _sinc_integral(omega, tau - ti) + K * I1 + L2 * I2
    if V is not None:
        Z = V @ Z @ V.conj().T
    return Z, D


def improved_u(b, pulse, epsilon, tau, tau1=0.0):
    """U^I(tau, tau_i): first-order propagator after re-splitting H1 around H1(tau1)."""
    _check_window(pulse, tau)
    Z, D = improved_generator(b, pulse, epsilon, tau, tau1)
    U_D = _exp_minus_i_eps(D, epsilon * (tau - pulse.tau_i))
    return kick_propagator(b, pulse.area(tau)) @ U_D @ _exp_minus_i_eps(Z, epsilon)


def sudden_impact_u(b, pulse, epsilon, tau, tau_h=0.5):
    """Sudden-impact propagator: free rotation, instantaneous kick at tau_h, free rotation."""
    if tau < pulse.tau_f:
        raise ValueError("sudden impact propagator is defined for tau >= tau_f")
    return (free_propagator(b, epsilon, tau - tau_h) @ kick_propagator(b, pulse.final_area)
            @ free_propagator(b, epsilon, tau_h - pulse.tau_i))


def pulse_propagator(cfg: PropagatorConfig, b, pulse, epsilon):
    """Approximate propagator over the full pulse window, U(tau_f, tau_i)."""
    tf = pulse.tau_f
    if cfg.kind is Kind.MAGNUS:
        return magnus_u(b, pulse, epsilon, tf)
    if cfg.kind is Kind.SECULAR:
        return secular_u(b, pulse, epsilon, tf, cfg.tau2)
    if cfg.kind is Kind.IMPROVED:
        return improved_u(b, pulse, epsilon, tf, cfg.tau1)
    if cfg.kind is Kind.SUDDEN_IMPACT:
        return sudden_impact_u(b, pulse, epsilon, tf, cfg.tau_h)
    raise ValueError(f"{cfg.kind} has no closed-form propagator")


def propagator_at(cfg: PropagatorConfig, b, pulse, epsilon, tau):
    """Approximate propagator U(tau, tau_i) for any tau >= tau_i."""
    if cfg.kind is Kind.SUDDEN_IMPACT:
        return sudden_impact_u(b, pulse, epsilon, max(tau, pulse.tau_f), cfg.tau_h)
    if tau <= pulse.tau_f:
        fn = {Kind.MAGNUS: lambda: magnus_u(b, pulse, epsilon, tau),
              Kind.SECULAR: lambda: secular_u(b, pulse, epsilon, tau, cfg.tau2),
              Kind.IMPROVED: lambda: improved_u(b, pulse, epsilon, tau, cfg.tau1)}
        return fn[cfg.kind]()
    return free_propagator(b, epsilon, tau - pulse.tau_f) @ pulse_propagator(cfg, b, pulse, epsilon)


# -- exact reference ---------------------------------------------------------

def _strang_step(psi, half_phase, kick_phase, V):
    psi = half_phase[:, None] * psi
    psi = V @ (kick_phase[:, None] * (V.conj().T @ psi))
    return half_phase[:, None] * psi


def reference_propagate(b, pulse, epsilon, psi0, taus, dt=DEFAULT_DT):
    """Split-step solution of the full Schrodinger equation.

    Each step of length h applies exp(-i eps J^2 h/2), the exact field kick
    exp(i [A(t+h) - A(t)] cos), and another half free step. Beyond tau_f the
    state rotates freely and exactly.

    Parameters
    ----------
    psi0 : (n,) or (n, k) array
        Initial state(s) at tau_i; columns propagate independently.
    taus : sequence of float
        Sample times >= tau_i, in any order.

    Returns
    -------
    array of shape (len(taus),) + psi0.shape
    """
    ti, tf = pulse.tau_i, pulse.tau_f
    window = tf - ti
    nsteps = int(round(window / dt))
    if nsteps < 1 or abs(nsteps * dt - window) > 1e-9 * window:
        raise ValueError(f"dt={dt} does not divide the pulse window")
    psi0 = np.asarray(psi0, dtype=complex)
    vec = psi0.ndim == 1
    psi = psi0.reshape(b.dim, -1).copy()
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < ti):
        raise ValueError("sample times precede tau_i")
    out = np.empty((len(taus),) + psi.shape, dtype=complex)

    mu, V = b.cos_eig
    lam = b.eigen_j2
    h = window / nsteps
    grid = ti + h * np.arange(nsteps + 1)
    A = np.asarray(pulse.area(grid), dtype=float)
    half = np.exp(-0.5j * epsilon * h * lam)

    order = np.argsort(taus, kind="stable")
    pos = 0
    for k in range(nsteps):
        # samples falling strictly inside this step get a partial step
        while pos < len(order) and taus[order[pos]] < grid[k + 1] and taus[order[pos]] < tf:
            t = taus[order[pos]]
            dh = t - grid[k]
            if dh <= 0.0:
                out[order[pos]] = psi
            else:
                dA = pulse.area(t) - A[k]
                out[order[pos]] = _strang_step(psi, np.exp(-0.5j * epsilon * dh * lam),
                                               np.exp(1j * dA * mu), V)
            pos += 1
        psi = _strang_step(psi, half, np.exp(1j * (A[k + 1] - A[k]) * mu), V)

    drift = float(np.max(np.abs(np.linalg.norm(psi, axis=0) - np.linalg.norm(psi0.reshape(b.dim, -1), axis=0))))
    if drift > NORM_TOL:
        raise ConvergenceError(f"norm drift {drift:.2e} exceeds {NORM_TOL}")

    while pos < len(order):
        t = taus[order[pos]]
        out[order[pos]] = np.exp(-1j * epsilon * (t - tf) * lam)[:, None] * psi
        pos += 1
    if vec:
        out = out[..., 0]
    return out


def reference_final(b, pulse, epsilon, psi0, dt=DEFAULT_DT):
    return reference_propagate(b, pulse, epsilon, psi0, [pulse.tau_f], dt)[0]


def converged_reference(b, pulse, epsilon, psi0, dt=DEFAULT_DT, tol=1e-10, max_halvings=6):
    """Reference state at tau_f, halving dt until the endpoint moves by < ``tol``.

    Returns ``(psi, report)`` where ``report`` holds the accepted dt and the
    last endpoint change.
    """
    psi = reference_final(b, pulse, epsilon, psi0, dt)
    change = math.inf
    for _ in range(max_halvings):
        finer = reference_final(b, pulse, epsilon, psi0, dt / 2)
        change = float(np.max(np.abs(finer - psi)))
        psi, dt = finer, dt / 2
        if change < tol:
            return psi, {"dt": dt, "dt_change": change, "converged": True}
    raise ConvergenceError(f"reference not converged: endpoint change {change:.2e} at dt={dt:.2e}")


def top_population(psi, levels=2):
    psi = np.asarray(psi).reshape(psi.shape[0], -1)
    return float(np.max(np.sum(np.abs(psi[-levels:]) ** 2, axis=0)))


def choose_basis(pulse, epsilon, m=0, initial_js=(0,), jmax=16, tol=1e-10, dt=1e-3, limit=256):
    """Smallest basis (by doubling ``jmax``) whose top two levels stay empty.

    The reference is run from every |j, m> in ``initial_js``; the population
    of the two highest levels at tau_f must stay below ``tol``.
    """
    jmax = max(jmax, max(initial_js) + 4, abs(m) + 4)
    while jmax <= limit:
        b = RotorBasis(m, jmax)
        psi0 = np.stack([b.state(j) for j in initial_js], axis=1)
        psi = reference_final(b, pulse, epsilon, psi0, dt)
        if top_population(psi) < tol:
            return b
        jmax *= 2
    raise ConvergenceError(f"population reaches the basis edge even at jmax={jmax // 2}")


# -- F operator --------------------------------------------------------------

def _c(j, m):
    if j < 1 or abs(m) >= j:
        return 0.0
    return c_coeff(j, m)


def f_operator_coeffs(j, m, pulse, epsilon):
    """Coefficients (a, b, alpha, beta, gamma) of F|j,m> on |j-1>, |j+1>, |j-2>, |j+2>, |j>."""
    if j < 0 or abs(m) > j:
        raise ValueError(f"invalid state j={j}, m={m}")
    e = epsilon
    w = np.array([-2 * e * j, 2 * e * (j + 1), -2 * e * (2 * j - 1), 2 * e * (2 * j + 3), 0.0])
    I1, I2 = pulse.weighted_integrals(w)
    cj, cj1, cj2, cjm1 = _c(j, m), _c(j + 1, m), _c(j + 2, m), _c(j - 1, m)
    a = 2 * j * cj * I1[0]
    b = -2 * (j + 1) * cj1 * I1[1]
    alpha = -1j * cjm1 * cj * I2[2]
    beta = -1j * cj1 * cj2 * I2[3]
    gamma = 1j * (1 - cj ** 2 - cj1 ** 2) * I2[4].real
    return complex(a), complex(b), complex(alpha), complex(beta), complex(gamma)


def f_matrix(b: RotorBasis, pulse, epsilon):
    """F assembled column by column from ``f_operator_coeffs``.

    Columns near jmax omit the couplings that would leave the basis.
    """
    n = b.dim
    F = np.zeros((n, n), dtype=complex)
    for k, j in enumerate(b.js):
        a, bb, alpha, beta, gamma = f_operator_coeffs(int(j), b.m, pulse, epsilon)
        F[k, k] = gamma
        for dk, val in ((-1, a), (1, bb), (-2, alpha), (2, beta)):
            if 0 <= k + dk < n:
                F[k + dk, k] = val
    return F


def error_delta(psi, psi_ref):
    """Squared distance between states; global phase counts."""
    psi = np.asarray(psi)
    psi_ref = np.asarray(psi_ref)
    if psi.shape != psi_ref.shape:
        raise ValueError(f"basis mismatch: {psi.shape} vs {psi_ref.shape}")
    return float(np.sum(np.abs(psi - psi_ref) ** 2))

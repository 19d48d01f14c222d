"""
Truncated |j, m> basis at fixed m and the rotor operators acting on it.

States are ordered j = |m|, |m|+1, ..., jmax. Matrices are dense numpy
arrays; ``M[k, l] = <j_k| O |j_l>``.
"""

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

HERMITIAN_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


def c_coeff(j, m):
    """Ladder coefficient c_{jm} = sqrt((j-m)(j+m) / ((2j-1)(2j+1))).

    Zero whenever |m| >= j.
    """
    if j < 1:
        raise ValueError(f"c_coeff needs j >= 1, got j={j}")
    if abs(m) > j:
        raise ValueError(f"|m| must not exceed j (j={j}, m={m})")
    return math.sqrt((j - m) * (j + m) / ((2 * j - 1) * (2 * j + 1)))


def _c_safe(j, m):
    # c_{jm} extended by zero outside its domain (j < 1 or |m| >= j)
    if j < 1 or abs(m) >= j:
        return 0.0
    return c_coeff(j, m)


@dataclass(frozen=True)
class RotorBasis:
    m: int
    jmax: int

    def __post_init__(self):
        if self.jmax < abs(self.m):
            raise ValueError(f"jmax={self.jmax} below |m|={abs(self.m)}")

    @property
    def dim(self):
        return self.jmax - abs(self.m) + 1

    @property
    def js(self):
        return np.arange(abs(self.m), self.jmax + 1)

    def index(self, j):
        if not abs(self.m) <= j <= self.jmax:
            raise IndexError(f"j={j} outside basis [{abs(self.m)}, {self.jmax}]")
        return j - abs(self.m)

    def state(self, j):
        """Unit vector |j, m>."""
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(j)] = 1.0
        return psi

    def enlarged(self, jmax):
        return RotorBasis(self.m, jmax)

    @cached_property
    def j2(self):
        return j2_matrix(self)

    @cached_property
    def eigen_j2(self):
        return (self.js * (self.js + 1)).astype(float)

    @cached_property
    def cos(self):
        return cos_matrix(self)

    @cached_property
    def sigma(self):
        return sigma_matrix(self)

    @cached_property
    def cos2(self):
        return cos2_matrix(self)

    @cached_property
    def cos_eig(self):
        """(eigenvalues, eigenvectors) of cos(theta), computed once."""
        return np.linalg.eigh(self.cos)


def j2_matrix(b: RotorBasis):
    js = b.js
    return np.diag((js * (js + 1)).astype(float))


def cos_matrix(b: RotorBasis):
    n = b.dim
    M = np.zeros((n, n))
    for k, j in enumerate(b.js[:-1]):
        M[k + 1, k] = M[k, k + 1] = _c_safe(j + 1, b.m)
    return M


def sigma_matrix(b: RotorBasis):
    """Matrix of sin(theta) d/dtheta. Real, tridiagonal, not Hermitian."""
    n = b.dim
    M = np.zeros((n, n))
    for k, j in enumerate(b.js[:-1]):
        c = _c_safe(j + 1, b.m)
        M[k + 1, k] = j * c
        M[k, k + 1] = -(j + 2) * c
    return M


def cos2_matrix(b: RotorBasis):
    """cos^2(theta) with every element exact, including the last row.

    Squaring the truncated cos matrix drops c_{jmax+1,m}^2 from the last
    diagonal element, so the square is taken on a basis one level larger.
    """
    big = cos_matrix(RotorBasis(b.m, b.jmax + 1))
    return (big @ big)[: b.dim, : b.dim]


def is_hermitian(M, tol=HERMITIAN_TOL):
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    return float(np.max(np.abs(M - M.conj().T))) <= tol * scale


def hermitian_residual(M):
    return float(np.max(np.abs(M - M.conj().T)))


def herm_expm(M, s, tol=HERMITIAN_TOL, eig=None):
    """exp(i * s * M) for Hermitian ``M`` via its eigendecomposition.

    Parameters
    ----------
    M : (n, n) array
        Hermitian generator. Checked against ``tol`` relative to its largest
        element.
    s : float
        Real scale factor.
    eig : tuple, optional
        Precomputed ``np.linalg.eigh(M)``, reused across many ``s``.
    """
    if eig is None:
        if not is_hermitian(M, tol):
            raise NotHermitianError(
                f"generator not Hermitian: residual {hermitian_residual(M):.3e}")
        eig = np.linalg.eigh(M)
    w, V = eig
    return (V * np.exp(1j * s * w)) @ V.conj().T


def unitarity_error(U):
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))

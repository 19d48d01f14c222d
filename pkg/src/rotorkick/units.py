"""
Laboratory parameters and their dimensionless counterparts.

Time is rescaled by the pulse duration ``delta``. The rotational constant is
taken as an angular frequency, ``B = 2*pi*c*B_wavenumber``, so that

    epsilon = B * delta
    e0r     = mu0 * delta * E0 / hbar
    beta_B  = hbar * B / (k_B * T) = h * c * B_wavenumber / (k_B * T)

The same ``B`` therefore enters the rescaled Schrodinger equation and the
Boltzmann factors.
"""

from dataclasses import dataclass, asdict
import math

from scipy import constants as _sc

C_CM = _sc.c * 100.0  # speed of light [cm/s]
HBAR = _sc.hbar
H_PLANCK = _sc.h
K_B = _sc.k
DEBYE = 1e-21 / _sc.c  # [C m]
PS = 1e-12
V_PER_CM = 100.0  # V/cm -> V/m

B_CONVENTION = "B = 2*pi*c*B_wavenumber (angular frequency); beta_B = h*c*B_wavenumber/(k_B*T)"

# LiCl
LICL_B_WAVENUMBER = 0.70652
LICL_MU0_DEBYE = 7.129


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    B_wavenumber: float = LICL_B_WAVENUMBER  # cm^-1
    delta: float = 1.0  # ps
    mu0: float = LICL_MU0_DEBYE  # Debye
    E0: float = 0.0  # V/cm
    T: float = 0.0  # K

    def validate(self):
        if not self.delta > 0:
            raise InvalidParameterError(f"pulse duration must be positive, got {self.delta}")
        if not self.B_wavenumber > 0:
            raise InvalidParameterError(
                f"rotational constant must be positive, got {self.B_wavenumber}")
        for name in ("mu0", "E0", "T"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")
        return self


@dataclass(frozen=True)
class DimensionlessParams:
    epsilon: float
    e0r: float
    beta_B: float  # math.inf at T = 0

    def metadata(self):
        d = asdict(self)
        d["convention"] = B_CONVENTION
        return d


def angular_rotational_constant(B_wavenumber):
    """Rotational constant in rad/s for ``B_wavenumber`` in cm^-1."""
    return 2.0 * math.pi * C_CM * B_wavenumber


def beta_rot(B_wavenumber, T):
    """B/(k_B T) with B as an energy, hbar * (2 pi c B~). Infinite at T = 0."""
    if T < 0:
        raise InvalidParameterError("temperature must be non-negative")
    if T == 0:
        return math.inf
    return H_PLANCK * C_CM * B_wavenumber / (K_B * T)


def to_dimensionless(p: PhysicalParams) -> DimensionlessParams:
    p.validate()
    eps = angular_rotational_constant(p.B_wavenumber) * p.delta * PS
    e0r = p.mu0 * DEBYE * p.delta * PS * p.E0 * V_PER_CM / HBAR
    return DimensionlessParams(epsilon=eps, e0r=e0r, beta_B=beta_rot(p.B_wavenumber, p.T))


def rotational_period(epsilon, j):
    """Free rotation period of level ``j`` in units of the pulse duration.

    Returns ``1 / (epsilon * j * (j + 1))``.
    """
    if j < 1:
        raise InvalidParameterError("j = 0 does not rotate; its period is infinite")
    if not epsilon > 0:
        raise InvalidParameterError("epsilon must be positive")
    return 1.0 / (epsilon * j * (j + 1))


def delta_for_epsilon(epsilon, B_wavenumber=LICL_B_WAVENUMBER):
    """Pulse duration in ps that yields ``epsilon`` for the given molecule."""
    return epsilon / (angular_rotational_constant(B_wavenumber) * PS)

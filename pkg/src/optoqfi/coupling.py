"""Time-dependent Hamiltonian coefficients, probe state and unit handling.

All physics is expressed in the rescaled time ``tau = omega_m * t``.  The
three coefficient functions are

* the optomechanical coupling ``G(tau)``,
* the mechanical displacement drive ``D1(tau)``,
* the mechanical squeezing drive ``D2(tau)``,

each described by a small immutable form object.  The parameter to be
estimated is selected with a :class:`Theta` tag rather than a closure, so
that closed-form derivative dispatch stays explicit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import ValidationError

HBAR = 1.054571817e-34
K_B = 1.380649e-23


def _finite(name, value):
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")


def _frequency(name, value):
    _finite(name, value)
    if value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class Zero:
    """Identically vanishing coefficient."""

    def at(self, tau):
        return np.zeros_like(np.asarray(tau, dtype=float)) + 0.0

    @property
    def max_frequency(self):
        return 0.0


@dataclass(frozen=True)
class Constant:
    """Time-independent coefficient with value ``amplitude``."""

    amplitude: float

    def __post_init__(self):
        _finite("amplitude", self.amplitude)

    def at(self, tau):
        return np.zeros_like(np.asarray(tau, dtype=float)) + self.amplitude

    @property
    def max_frequency(self):
        return 0.0


@dataclass(frozen=True)
class SineModulated:
    """``amplitude * (1 + epsilon * sin(omega * tau))``."""

    amplitude: float
    epsilon: float
    omega: float

    def __post_init__(self):
        _finite("amplitude", self.amplitude)
        _finite("epsilon", self.epsilon)
        _frequency("omega", self.omega)

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.amplitude * (1.0 + self.epsilon * np.sin(self.omega * tau))

    @property
    def max_frequency(self):
        return self.omega


@dataclass(frozen=True)
class CosModulated:
    """``amplitude * cos(omega * tau)``."""

    amplitude: float
    omega: float

    def __post_init__(self):
        _finite("amplitude", self.amplitude)
        _frequency("omega", self.omega)

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.amplitude * np.cos(self.omega * tau)

    @property
    def max_frequency(self):
        return self.omega


GForm = Union[Constant, SineModulated]
DriveForm = Union[Zero, Constant, CosModulated]


class Theta(enum.Enum):
    """Which scalar of a :class:`CouplingSpec` is the estimation parameter."""

    G0 = "g0"
    EPSILON = "epsilon"
    OMEGA_G = "omega_g"
    D1 = "d1"
    OMEGA_D1 = "omega_d1"
    D2 = "d2"
    OMEGA_D2 = "omega_d2"

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower()
        for member in cls:
            if member.value == key or member.name.lower() == key:
                return member
        raise ValidationError(f"unknown estimation parameter {text!r}")


# tag -> (form slot, dataclass field)
_THETA_SLOTS = {
    Theta.G0: ("g_form", "amplitude"),
    Theta.EPSILON: ("g_form", "epsilon"),
    Theta.OMEGA_G: ("g_form", "omega"),
    Theta.D1: ("d1_form", "amplitude"),
    Theta.OMEGA_D1: ("d1_form", "omega"),
    Theta.D2: ("d2_form", "amplitude"),
    Theta.OMEGA_D2: ("d2_form", "omega"),
}


@dataclass(frozen=True)
class CouplingSpec:
    """Functional forms of the three coefficients plus the parameter tag.

    ``omega_c`` is the rescaled cavity frequency.  It is carried for
    completeness of the Hamiltonian but is never treated as an estimation
    parameter.
    """

    g_form: GForm
    d1_form: DriveForm = field(default_factory=Zero)
    d2_form: DriveForm = field(default_factory=Zero)
    theta: Theta = Theta.G0
    omega_c: float = 0.0

    def __post_init__(self):
        if not isinstance(self.g_form, (Constant, SineModulated)):
            raise ValidationError("g_form must be Constant or SineModulated")
        for name in ("d1_form", "d2_form"):
            if not isinstance(getattr(self, name), (Zero, Constant, CosModulated)):
                raise ValidationError(f"{name} must be Zero, Constant or CosModulated")
        if not isinstance(self.theta, Theta):
            raise ValidationError("theta must be a Theta tag")
        _finite("omega_c", self.omega_c)
        slot, attr = _THETA_SLOTS[self.theta]
        if not hasattr(getattr(self, slot), attr):
            raise ValidationError(
                f"estimation parameter {self.theta.value} is not a parameter "
                f"of the chosen {slot} ({type(getattr(self, slot)).__name__})"
            )

    @property
    def max_frequency(self):
        return max(f.max_frequency for f in (self.g_form, self.d1_form, self.d2_form))

    def theta_value(self):
        slot, attr = _THETA_SLOTS[self.theta]
        return float(getattr(getattr(self, slot), attr))

    def with_theta(self, value):
        """Copy of this coupling specification with the tagged parameter set to ``value``."""
        slot, attr = _THETA_SLOTS[self.theta]
        form = replace(getattr(self, slot), **{attr: float(value)})
        return replace(self, **{slot: form})


def eval_G(spec, tau):
    """Optomechanical coupling ``G(tau)``."""
    return spec.g_form.at(tau)


def eval_D1(spec, tau):
    """Displacement drive ``D1(tau)``."""
    return spec.d1_form.at(tau)


def eval_D2(spec, tau):
    """Squeezing drive ``D2(tau)``."""
    return spec.d2_form.at(tau)


@dataclass(frozen=True)
class ProbeState:
    """Coherent cavity amplitude ``mu_c`` and mechanical thermal parameter ``r_T``."""

    mu_c: complex
    r_T: float = 0.0

    def __post_init__(self):
        mu = complex(self.mu_c)
        if not (math.isfinite(mu.real) and math.isfinite(mu.imag)):
            raise ValidationError("mu_c must be finite")
        _finite("r_T", self.r_T)
        if self.r_T < 0:
            raise ValidationError(f"r_T must be >= 0, got {self.r_T!r}")
        object.__setattr__(self, "mu_c", mu)

    @property
    def mu2(self):
        return abs(self.mu_c) ** 2


@dataclass(frozen=True)
class PhysicalUnits:
    """Mechanical angular frequency [rad/s], optional mass [kg] and temperature [K]."""

    omega_m: float
    mass: float | None = None
    temperature: float | None = None

    def __post_init__(self):
        _finite("omega_m", self.omega_m)
        if self.omega_m <= 0:
            raise ValidationError("omega_m must be > 0")
        if self.mass is not None:
            _finite("mass", self.mass)
            if self.mass <= 0:
                raise ValidationError("mass must be > 0")
        if self.temperature is not None:
            _finite("temperature", self.temperature)
            if self.temperature < 0:
                raise ValidationError("temperature must be >= 0")

    def r_T(self):
        if self.temperature is None:
            raise ValidationError("temperature not set")
        return r_T_from_temperature(self.temperature, self.omega_m)


def r_T_from_temperature(temperature, omega_m):
    """Thermal parameter ``artanh(exp(-hbar omega_m / (2 k_B T)))``.

    ``temperature == 0`` is the vacuum limit and returns exactly 0.
    """
    _finite("temperature", temperature)
    _finite("omega_m", omega_m)
    if temperature < 0:
        raise ValidationError("temperature must be >= 0")
    if omega_m <= 0:
        raise ValidationError("omega_m must be > 0")
    if temperature == 0:
        return 0.0
    x = math.exp(-HBAR * omega_m / (2.0 * K_B * temperature))
    if x >= 1.0:
        raise ValidationError("temperature too high for double precision r_T")
    return math.atanh(x)


def dimensionful_rescale(qfi_dimensionless, dtheta_dphys):
    """Chain rule for restoring units: ``(d theta / d theta_phys)**2 * QFI``."""
    return dtheta_dphys * dtheta_dphys * qfi_dimensionless

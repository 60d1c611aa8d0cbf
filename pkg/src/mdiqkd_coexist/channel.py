"""Fibre attenuation and spontaneous Raman noise from classical channels.

Attenuation coefficients are configured in dB/km and converted to natural
units (1/km) before they enter the Raman expressions. The Raman scattering
coefficient and the quantum-channel filter width are always carried together
as a single product ``beta_dlambda`` with units of 1/km.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import DomainError

PLANCK = 6.62607015e-34  # J s
SPEED_OF_LIGHT = 2.99792458e8  # m/s
DB_TO_NATURAL = math.log(10.0) / 10.0

# Below this gap the co-propagating expression is replaced by its limit.
DEGENERATE_ALPHA_GAP = 1e-9


def db_to_natural(alpha_db_per_km: float) -> float:
    """Convert an attenuation coefficient from dB/km to 1/km."""
    return alpha_db_per_km * DB_TO_NATURAL


def natural_to_db(alpha_per_km: float) -> float:
    return alpha_per_km / DB_TO_NATURAL


class Direction(str, enum.Enum):
    CO = "co_propagating"
    COUNTER = "counter_propagating"


@dataclass(frozen=True)
class FibreSpec:
    """One fibre arm (user to Charlie).

    Attributes
    ----------
    length_km : float
        Length of the arm.
    alpha_q : float
        Attenuation at the quantum wavelength, dB/km.
    alpha_c : float
        Attenuation at the classical wavelength, dB/km.
    """

    length_km: float
    alpha_q: float = 0.20
    alpha_c: float = 0.30

    def __post_init__(self):
        if not self.length_km >= 0:
            raise DomainError(f"length_km must be >= 0, got {self.length_km}")
        if not self.alpha_q > 0:
            raise DomainError(f"alpha_q must be > 0, got {self.alpha_q}")
        if not self.alpha_c > 0:
            raise DomainError(f"alpha_c must be > 0, got {self.alpha_c}")

    @property
    def alpha_q_nat(self) -> float:
        return db_to_natural(self.alpha_q)

    @property
    def alpha_c_nat(self) -> float:
        return db_to_natural(self.alpha_c)

    @property
    def quantum_loss_db(self) -> float:
        return self.alpha_q * self.length_km

    @property
    def classical_loss_db(self) -> float:
        return self.alpha_c * self.length_km


@dataclass(frozen=True)
class ClassicalChannel:
    wavelength_nm: float
    launch_power_w: float
    direction: Direction = Direction.CO

    def __post_init__(self):
        if not self.launch_power_w >= 0:
            raise DomainError(f"launch_power_w must be >= 0, got {self.launch_power_w}")
        if not 1260.0 <= self.wavelength_nm <= 1625.0:
            raise DomainError(
                f"classical wavelength {self.wavelength_nm} nm outside [1260, 1625] nm"
            )
        object.__setattr__(self, "direction", Direction(self.direction))


@dataclass(frozen=True)
class QuantumChannelSpec:
    """Quantum channel centre wavelength and filter passband.

    Give either ``bandwidth_ghz`` or ``bandwidth_nm``; the other is derived.
    If both are given they must agree to 0.1 %.
    """

    wavelength_nm: float
    bandwidth_ghz: float | None = None
    bandwidth_nm: float | None = None

    def __post_init__(self):
        if self.bandwidth_ghz is None and self.bandwidth_nm is None:
            object.__setattr__(self, "bandwidth_ghz", 6.0)
        lam_m = self.wavelength_nm * 1e-9
        if self.bandwidth_nm is None:
            dnu = self.bandwidth_ghz * 1e9
            object.__setattr__(self, "bandwidth_nm", lam_m**2 * dnu / SPEED_OF_LIGHT * 1e9)
        elif self.bandwidth_ghz is None:
            dlam = self.bandwidth_nm * 1e-9
            object.__setattr__(self, "bandwidth_ghz", dlam * SPEED_OF_LIGHT / lam_m**2 / 1e9)
        if not (self.bandwidth_ghz > 0 and self.bandwidth_nm > 0):
            raise DomainError("filter bandwidth must be positive")
        implied_ghz = self.bandwidth_nm * 1e-9 * SPEED_OF_LIGHT / lam_m**2 / 1e9
        if abs(implied_ghz - self.bandwidth_ghz) > 1e-3 * self.bandwidth_ghz:
            raise DomainError(
                f"bandwidth {self.bandwidth_nm} nm and {self.bandwidth_ghz} GHz disagree "
                f"at {self.wavelength_nm} nm"
            )


def _check_nonneg(**values):
    for name, v in values.items():
        if not v >= 0:
            raise DomainError(f"{name} must be >= 0, got {v}")


def attenuate(power_w: float, alpha_db_per_km: float, length_km: float) -> float:
    """Power remaining after ``length_km`` of fibre."""
    _check_nonneg(power_w=power_w, alpha_db_per_km=alpha_db_per_km, length_km=length_km)
    return power_w * 10.0 ** (-alpha_db_per_km * length_km / 10.0)


def raman_co(
    launch_power_w: float,
    beta_dlambda: float,
    alpha_q_nat: float,
    alpha_c_nat: float,
    length_km: float,
) -> float:
    """Raman power reaching the receiver from a co-propagating classical channel.

    Uses ``expm1`` so that the expression stays accurate for nearly equal
    attenuation coefficients; below ``DEGENERATE_ALPHA_GAP`` the exact limit
    ``P * beta_dlambda * L * exp(-alpha L)`` is returned.
    """
    _check_nonneg(
        launch_power_w=launch_power_w,
        beta_dlambda=beta_dlambda,
        alpha_q_nat=alpha_q_nat,
        alpha_c_nat=alpha_c_nat,
        length_km=length_km,
    )
    gap = alpha_c_nat - alpha_q_nat
    L = length_km
    if abs(gap) < DEGENERATE_ALPHA_GAP:
        alpha = 0.5 * (alpha_c_nat + alpha_q_nat)
        return launch_power_w * beta_dlambda * L * math.exp(-alpha * L)
    # (e^{-aQ L} - e^{-aC L}) / (aC - aQ) == e^{-aQ L} * (-expm1(-gap L)) / gap
    return launch_power_w * beta_dlambda * math.exp(-alpha_q_nat * L) * (-math.expm1(-gap * L)) / gap


def raman_counter(
    launch_power_w: float,
    beta_dlambda: float,
    alpha_q_nat: float,
    alpha_c_nat: float,
    length_km: float,
) -> float:
    """Raman power reaching the receiver from a counter-propagating channel."""
    _check_nonneg(
        launch_power_w=launch_power_w,
        beta_dlambda=beta_dlambda,
        alpha_q_nat=alpha_q_nat,
        alpha_c_nat=alpha_c_nat,
        length_km=length_km,
    )
    total = alpha_c_nat + alpha_q_nat
    if total == 0.0:
        return launch_power_w * beta_dlambda * length_km
    return launch_power_w * beta_dlambda * (-math.expm1(-total * length_km)) / total


def raman_bidirectional(
    plan: Iterable[ClassicalChannel], fibre: FibreSpec, beta_dlambda: float
) -> float:
    """Total Raman power at the receiver end of one arm for a channel plan."""
    aq, ac = fibre.alpha_q_nat, fibre.alpha_c_nat
    total = 0.0
    for ch in plan:
        if ch.direction is Direction.CO:
            total += raman_co(ch.launch_power_w, beta_dlambda, aq, ac, fibre.length_km)
        else:
            total += raman_counter(ch.launch_power_w, beta_dlambda, aq, ac, fibre.length_km)
    return total


def power_to_photon_rate(power_w: float, wavelength_nm: float) -> float:
    """Photon flux (Hz) carried by ``power_w`` at ``wavelength_nm``."""
    _check_nonneg(power_w=power_w)
    if not wavelength_nm > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength_nm}")
    return power_w * wavelength_nm * 1e-9 / (PLANCK * SPEED_OF_LIGHT)

"""Analytic gains, decoy-state bounds and the asymptotic secret key rate.

Alice and Bob send phase-randomised weak coherent pulses in time-bin states.
For a fixed relative phase each of Charlie's four detection slots receives
an independent Poissonian photon number, so the probability that a set of
slots stays silent is an exponential of a linear form in ``cos(phi)``.
Averaging over the uniformly random relative phase turns that into a
modified Bessel function. Exact click-pattern probabilities then follow by
inclusion-exclusion over the slots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import optics
from .errors import DomainError

LABELS = ("mu", "nu", "omega")
PAIRS = tuple((a, b) for a in LABELS for b in LABELS)
DEFAULT_F_EC = 1.14
DEFAULT_CLOCK_HZ = 20e6


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class DecoyParams:
    """Three-intensity decoy settings shared by Alice and Bob.

    ``e_d`` is the probability that the X-basis interference outcome is
    flipped by residual distinguishability (timing, polarisation, frequency).
    """

    mu: float = 0.3
    nu: float = 0.04
    omega: float = 1e-4
    p_mu: float = 1 / 3
    p_nu: float = 1 / 3
    p_omega: float = 1 / 3
    p_z: float = 0.5
    e_d: float = 0.03

    def __post_init__(self):
        if not self.mu > self.nu > self.omega >= 0:
            raise DomainError(f"need mu > nu > omega >= 0, got {self.intensities}")
        probs = (self.p_mu, self.p_nu, self.p_omega)
        if any(not 0 <= p <= 1 for p in probs) or abs(sum(probs) - 1) > 1e-9:
            raise DomainError(f"intensity probabilities must lie in [0, 1] and sum to 1, got {probs}")
        if not 0 <= self.p_z <= 1:
            raise DomainError(f"p_z must lie in [0, 1], got {self.p_z}")
        if not 0 <= self.e_d <= 0.5:
            raise DomainError(f"e_d must lie in [0, 0.5], got {self.e_d}")

    @property
    def p_x(self) -> float:
        return 1.0 - self.p_z

    @property
    def intensities(self) -> dict[str, float]:
        return {"mu": self.mu, "nu": self.nu, "omega": self.omega}

    @property
    def probabilities(self) -> dict[str, float]:
        return {"mu": self.p_mu, "nu": self.p_nu, "omega": self.p_omega}


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float = 0.50
    dark_rate_hz: float = 100.0
    jitter_ps: float = 100.0
    dead_time_ns: float = 0.0
    mode_separation_ns: float = 2.5

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise DomainError(f"detector efficiency must lie in [0, 1], got {self.efficiency}")
        if min(self.dark_rate_hz, self.jitter_ps, self.dead_time_ns) < 0:
            raise DomainError("detector rates and times must be non-negative")
        if not self.mode_separation_ns > 0:
            raise DomainError("mode separation must be positive")

    @property
    def migration_prob(self) -> float:
        return optics.jitter_migration_prob(self.jitter_ps, self.mode_separation_ns)


@dataclass(frozen=True)
class LinkParameters:
    """Everything the gain models need for one operating point."""

    decoy: DecoyParams = field(default_factory=DecoyParams)
    loss_a_db: float = 0.0
    loss_b_db: float = 0.0
    noise_p: float = 0.0
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    clock_rate_hz: float = DEFAULT_CLOCK_HZ
    dark_p: float | None = None

    def __post_init__(self):
        if min(self.loss_a_db, self.loss_b_db) < 0:
            raise DomainError("arm losses must be non-negative dB")
        if not 0 <= self.noise_p < 1:
            raise DomainError(f"noise probability must lie in [0, 1), got {self.noise_p}")

    @property
    def transmittance(self) -> tuple[float, float]:
        return 10 ** (-self.loss_a_db / 10), 10 ** (-self.loss_b_db / 10)

    def swapped(self) -> "LinkParameters":
        return replace(self, loss_a_db=self.loss_b_db, loss_b_db=self.loss_a_db)


@dataclass
class PairGains:
    q_z: float
    e_z: float
    q_x: float
    e_x: float
    q_z_se: float = 0.0
    e_z_se: float = 0.0
    q_x_se: float = 0.0
    e_x_se: float = 0.0

    def gain(self, basis: str) -> float:
        return self.q_z if basis == "Z" else self.q_x

    def error(self, basis: str) -> float:
        return self.e_z if basis == "Z" else self.e_x


@dataclass
class GainErrorSet:
    intensities: dict[str, float]
    pairs: dict[tuple[str, str], PairGains]

    def __getitem__(self, key: tuple[str, str]) -> PairGains:
        return self.pairs[key]

    def signal(self) -> PairGains:
        return self.pairs["mu", "mu"]


def effective_efficiency(link: LinkParameters) -> float:
    """Detector efficiency after a non-paralysable dead-time correction."""
    det = link.detector
    if det.dead_time_ns <= 0:
        return det.efficiency
    d = link.decoy
    mean_int = sum(d.probabilities[k] * d.intensities[k] for k in LABELS)
    ta, tb = link.transmittance
    photons = det.efficiency * mean_int * (ta + tb) / 2.0
    click_rate = link.clock_rate_hz * (photons + 2.0 * link.noise_p)
    return det.efficiency / (1.0 + click_rate * det.dead_time_ns * 1e-9)


def _phase_nodes(xa: float, xb: float) -> np.ndarray:
    # the integrand's Fourier coefficients fall off like I_n(xa + xb), so this
    # many trapezoid nodes put the aliasing error far below double precision
    n = 64 + 8 * int(math.ceil(xa + xb))
    return np.arange(n) * (2.0 * math.pi / n)


def psi_minus_prob(state_a: int, state_b: int, xa: float, xb: float, noise_p: float, migration_prob: float = 0.0) -> float:
    """Probability that Charlie announces psi-minus for fixed prepared states.

    ``xa`` and ``xb`` are mean photon numbers reaching the detectors (after
    channel loss and detector efficiency). For a fixed relative phase the four
    slots are independent Poisson processes, so the exact pattern probability
    is a product of per-slot factors; the phase average uses the trapezoid
    rule, which converges geometrically for this smooth periodic integrand.
    Every term is positive, so tiny gains keep full relative precision.
    """
    m = optics.jitter_matrix(migration_prob)
    phi = _phase_nodes(xa, xb)
    amp = (
        math.sqrt(xa) * optics.ALICE_MODES[state_a][None, :]
        + math.sqrt(xb) * optics.BOB_MODES[state_b][None, :] * np.exp(1j * phi)[:, None]
    )
    lam = (np.abs(amp) ** 2) @ m
    log_silent = math.log1p(-noise_p) - lam
    silent = np.exp(log_silent)
    click = -np.expm1(log_silent)
    total = 0.0
    for mask in optics.PSI_MINUS_MASKS:
        on = np.array([bool(mask >> s & 1) for s in range(optics.N_SLOTS)])
        total += float(np.mean(np.prod(np.where(on, click, silent), axis=1)))
    return total


def pair_gains(xa: float, xb: float, noise_p: float, e_d: float = 0.0, migration_prob: float = 0.0) -> PairGains:
    """Gains and error rates in both bases for one intensity pair.

    In both bases psi-minus means anticorrelated bits, so an error is an
    announcement where Alice and Bob prepared equal bits. Misalignment swaps
    the X-basis interference outcome with probability ``e_d``.
    """
    if not 0 <= noise_p < 1:
        raise DomainError(f"noise probability must lie in [0, 1), got {noise_p}")
    p = {
        (a, b): psi_minus_prob(a, b, xa, xb, noise_p, migration_prob)
        for a in range(4)
        for b in range(4)
        if a >> 1 == b >> 1
    }
    out = {}
    for basis in (optics.Z, optics.X):
        total = err = 0.0
        for bit_a in (0, 1):
            for bit_b in (0, 1):
                a = optics.state_index(basis, bit_a)
                b = optics.state_index(basis, bit_b)
                prob = p[a, b]
                if basis == optics.X:
                    prob = (1 - e_d) * prob + e_d * p[a, optics.flip_bit(b)]
                total += prob / 4
                if bit_a == bit_b:
                    err += prob / 4
        out[basis] = (total, err / total if total > 0 else 0.0)
    return PairGains(q_z=out[0][0], e_z=out[0][1], q_x=out[1][0], e_x=out[1][1])


def gains_and_errors(link: LinkParameters) -> GainErrorSet:
    """Analytic gains/errors for all nine intensity pairs."""
    eta = effective_efficiency(link)
    ta, tb = link.transmittance
    q = link.detector.migration_prob
    ints = link.decoy.intensities
    pairs = {
        (a, b): pair_gains(ints[a] * ta * eta, ints[b] * tb * eta, link.noise_p, link.decoy.e_d, q)
        for a, b in PAIRS
    }
    return GainErrorSet(dict(ints), pairs)


@dataclass
class DecoyBounds:
    y11_z_lower: float
    y11_x_lower: float
    q11_z_lower: float
    e11_x_upper: float
    clamped: bool = False
    notes: list[str] = field(default_factory=list)


def _weighted_difference(g: GainErrorSet, x: str, w: str, value) -> float:
    """sum over the 2x2 intensity square {x, w}^2 with alternating signs, Poisson-weighted."""
    ints = g.intensities

    def term(a, b):
        return math.exp(ints[a] + ints[b]) * value(g[a, b])

    return term(x, x) - term(x, w) - term(w, x) + term(w, w)


def y11_lower(g: GainErrorSet, basis: str) -> float:
    """Lower bound on the single-photon-pair yield from the three intensities.

    With ``D(x) = sum_{n,m>=1} (x^n - w^n)(x^m - w^m) Y_nm / (n! m!)`` for the
    decoy (``nu``) and signal (``mu``) squares, the combination
    ``(mu-w)^2 (mu+w) D(nu) - (nu-w)^2 (nu+w) D(mu)`` cancels the (1,2) and
    (2,1) terms and leaves all higher terms non-positive, so it bounds the
    (1,1) term from below without assuming the weakest intensity is vacuum.
    """
    ints = g.intensities
    mu, nu, w = ints["mu"], ints["nu"], ints["omega"]
    gain = (lambda pg: pg.q_z) if basis == "Z" else (lambda pg: pg.q_x)
    d_nu = _weighted_difference(g, "nu", "omega", gain)
    d_mu = _weighted_difference(g, "mu", "omega", gain)
    num = (mu - w) ** 2 * (mu + w) * d_nu - (nu - w) ** 2 * (nu + w) * d_mu
    return num / ((mu - w) ** 2 * (nu - w) ** 2 * (mu - nu))


def decoy_bounds(g: GainErrorSet, decoy: DecoyParams | None = None) -> DecoyBounds:
    """Single-photon-pair gain lower bound (Z) and phase-error upper bound (X).

    Negative or undefined bounds are clamped (``Q11 -> 0``, ``e11 -> 0.5``)
    and flagged rather than raised.
    """
    if decoy is not None and dict(g.intensities) != decoy.intensities:
        raise DomainError("gain set and decoy parameters disagree on intensities")
    ints = g.intensities
    mu, nu, w = ints["mu"], ints["nu"], ints["omega"]
    notes = []
    y11z = y11_lower(g, "Z")
    y11x = y11_lower(g, "X")
    if not y11z > 0:
        notes.append(f"Z-basis Y11 lower bound {y11z:.3g} clamped to 0")
        y11z = 0.0
    if not y11x > 0:
        notes.append(f"X-basis Y11 lower bound {y11x:.3g} clamped to 0")
        y11x = 0.0
    err_num = _weighted_difference(g, "nu", "omega", lambda pg: pg.q_x * pg.e_x)
    if y11x > 0:
        e11 = err_num / ((nu - w) ** 2 * y11x)
        if e11 < 0:
            notes.append(f"e11 upper bound {e11:.3g} clamped to 0")
            e11 = 0.0
        elif e11 > 0.5:
            notes.append(f"e11 upper bound {e11:.3g} capped at 0.5")
            e11 = 0.5
    else:
        e11 = 0.5
    q11 = mu * mu * math.exp(-2.0 * mu) * y11z
    return DecoyBounds(y11z, y11x, q11, e11, clamped=bool(notes), notes=notes)


def secret_key_rate(
    q11_z_lower: float, e11_x_upper: float, qz_signal: float, ez_signal: float, f: float = DEFAULT_F_EC
) -> float:
    """Asymptotic key rate per clock cycle; may be negative."""
    for name, val in (("q11_z_lower", q11_z_lower), ("qz_signal", qz_signal)):
        if not 0 <= val <= 1:
            raise DomainError(f"{name} must lie in [0, 1], got {val}")
    for name, val in (("e11_x_upper", e11_x_upper), ("ez_signal", ez_signal)):
        if not 0 <= val <= 1:
            raise DomainError(f"{name} must lie in [0, 1], got {val}")
    if f < 1:
        raise DomainError(f"error-correction efficiency must be >= 1, got {f}")
    return q11_z_lower * (1.0 - binary_entropy(e11_x_upper)) - qz_signal * f * binary_entropy(ez_signal)


@dataclass
class KeyRateReport:
    descriptor: str
    gains: GainErrorSet
    bounds: DecoyBounds
    r_inf_raw: float
    clock_rate_hz: float = DEFAULT_CLOCK_HZ

    @property
    def q11_lower(self) -> float:
        return self.bounds.q11_z_lower

    @property
    def e11x_upper(self) -> float:
        return self.bounds.e11_x_upper

    @property
    def r_inf(self) -> float:
        return max(self.r_inf_raw, 0.0)

    @property
    def r_positive(self) -> bool:
        return self.r_inf > 0

    @property
    def r_inf_bps(self) -> float:
        return self.r_inf_raw * self.clock_rate_hz


def report_from_gains(g: GainErrorSet, f: float = DEFAULT_F_EC, descriptor: str = "", clock_rate_hz: float = DEFAULT_CLOCK_HZ) -> KeyRateReport:
    bounds = decoy_bounds(g)
    sig = g.signal()
    raw = secret_key_rate(bounds.q11_z_lower, bounds.e11_x_upper, sig.q_z, sig.e_z, f)
    return KeyRateReport(descriptor, g, bounds, raw, clock_rate_hz)


def evaluate(link: LinkParameters, f: float = DEFAULT_F_EC, descriptor: str = "") -> KeyRateReport:
    """Full analytic pipeline for one operating point."""
    return report_from_gains(gains_and_errors(link), f, descriptor, link.clock_rate_hz)


def gain_table(g: GainErrorSet) -> Mapping[str, np.ndarray]:
    """3x3 arrays (rows Alice, columns Bob) of each gain/error quantity."""
    out = {}
    for name in ("q_z", "e_z", "q_x", "e_x"):
        out[name] = np.array([[getattr(g[a, b], name) for b in LABELS] for a in LABELS])
    return out

"""Raman-noise calibration from the measured noise spectrum.

The shipped table holds noise counts measured at the central node through a
6 GHz filter at 1532.68 nm while classical light at a swept wavelength ran in
both directions over two 20 km arms. Inverting the forward Raman model
against those counts gives the lumped scattering factor ``beta_dlambda``
(1/km), which then predicts the noise for any other channel plan.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import (
    ClassicalChannel,
    Direction,
    FibreSpec,
    QuantumChannelSpec,
    power_to_photon_rate,
    raman_bidirectional,
)
from .errors import DomainError

DEFAULT_TABLE_FILE = "raman_noise_1532nm.csv"
QUANTUM_WAVELENGTH_NM = 1532.68
REFERENCE_BANDWIDTH_GHZ = 6.0

# beta*dlambda for a 1310 nm quantum channel with C-band classical light.
# Not measured here; order of magnitude taken from published O-band/C-band
# coexistence data and tuned so the bidirectional 2 x 20 km limit sits near
# 500 channels. Override it when better data is available.
BETA_DLAMBDA_1310_DEFAULT = 1.0e-12


@dataclass(frozen=True)
class MeasurementContext:
    """Conditions under which a noise spectrum was recorded.

    ``counts_scope`` says what a table entry counts: ``"detector"`` means
    the rate seen by each of the two detectors, ``"charlie"`` means the sum
    over both.
    """

    length_km: float = 20.0
    bandwidth_ghz: float = REFERENCE_BANDWIDTH_GHZ
    eta_det: float = 0.50
    launch_power_w: float = 8e-6
    quantum_wavelength_nm: float = QUANTUM_WAVELENGTH_NM
    n_arms: int = 2
    n_detectors: int = 2
    counts_scope: str = "detector"

    def __post_init__(self):
        if self.counts_scope not in ("detector", "charlie"):
            raise DomainError(f"counts_scope must be 'detector' or 'charlie', not {self.counts_scope!r}")
        if not (self.length_km > 0 and self.launch_power_w > 0 and 0 < self.eta_det <= 1):
            raise DomainError("measurement context needs positive length, launch power and efficiency")
        if self.n_arms < 1 or self.n_detectors < 1:
            raise DomainError("measurement context needs at least one arm and one detector")


@dataclass(frozen=True)
class NoiseSpectrumTable:
    wavelengths_nm: tuple[float, ...]
    counts_hz: tuple[float, ...]
    context: MeasurementContext = field(default_factory=MeasurementContext)

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=float)
        counts = np.asarray(self.counts_hz, dtype=float)
        if wl.shape != counts.shape or wl.size < 2:
            raise DomainError("noise table needs matching wavelength/count columns with >= 2 rows")
        if np.any(np.diff(wl) <= 0):
            raise DomainError("noise table wavelengths must be strictly increasing")
        if np.any(counts < 0):
            raise DomainError("noise counts must be non-negative")

    def scaled(self, factor: float) -> "NoiseSpectrumTable":
        return NoiseSpectrumTable(
            self.wavelengths_nm, tuple(c * factor for c in self.counts_hz), self.context
        )

    def charlie_counts(self, counts_hz: float) -> float:
        """Convert a table-scope count rate to the total over all detectors."""
        if self.context.counts_scope == "detector":
            return counts_hz * self.context.n_detectors
        return counts_hz


def parse_table(text: str, context: MeasurementContext | None = None) -> NoiseSpectrumTable:
    """Parse ``wavelength_nm,counts_hz`` CSV text; ``#`` lines are comments."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    if reader.fieldnames is None or set(reader.fieldnames) != {"wavelength_nm", "counts_hz"}:
        raise DomainError(f"expected columns wavelength_nm,counts_hz; got {reader.fieldnames}")
    wl, counts = [], []
    for i, row in enumerate(reader, start=2):
        try:
            wl.append(float(row["wavelength_nm"]))
            counts.append(float(row["counts_hz"]))
        except (TypeError, ValueError) as exc:
            raise DomainError(f"bad numeric value in noise table row {i}: {row}") from exc
    return NoiseSpectrumTable(tuple(wl), tuple(counts), context or MeasurementContext())


def load_table(path: str | Path | None = None, context: MeasurementContext | None = None) -> NoiseSpectrumTable:
    """Load a noise spectrum; with no path, the shipped 1532 nm table."""
    if path is None:
        text = resources.files(__package__).joinpath("data").joinpath(DEFAULT_TABLE_FILE).read_text()
    else:
        text = Path(path).read_text()
    return parse_table(text, context)


def noise_counts_at(table: NoiseSpectrumTable, lambda_c_nm: float) -> float:
    """Measured noise counts at ``lambda_c_nm`` by linear interpolation (no extrapolation)."""
    lo, hi = table.wavelengths_nm[0], table.wavelengths_nm[-1]
    if not lo <= lambda_c_nm <= hi:
        raise DomainError(f"classical wavelength {lambda_c_nm} nm outside table range [{lo}, {hi}] nm")
    return float(np.interp(lambda_c_nm, table.wavelengths_nm, table.counts_hz))


def measurement_plan(table: NoiseSpectrumTable, lambda_c_nm: float) -> list[ClassicalChannel]:
    """Classical channels present on each arm during the calibration run."""
    p = table.context.launch_power_w
    return [
        ClassicalChannel(lambda_c_nm, p, Direction.CO),
        ClassicalChannel(lambda_c_nm, p, Direction.COUNTER),
    ]


def charlie_noise_rate(
    beta_dlambda: float,
    fibres: Sequence[FibreSpec],
    plans: Sequence[Sequence[ClassicalChannel]],
    eta_det: float,
    wavelength_nm: float,
) -> float:
    """Detected Raman count rate summed over all detectors at Charlie."""
    power = sum(raman_bidirectional(plan, f, beta_dlambda) for f, plan in zip(fibres, plans))
    return eta_det * power_to_photon_rate(power, wavelength_nm)


def _context_fibre(table: NoiseSpectrumTable, fibre: FibreSpec) -> FibreSpec:
    ctx = table.context
    if fibre.length_km != ctx.length_km:
        raise DomainError(
            f"fibre length {fibre.length_km} km does not match the measurement context "
            f"({ctx.length_km} km)"
        )
    return fibre


def forward_counts(
    table: NoiseSpectrumTable, lambda_c_nm: float, fibre: FibreSpec, eta_det: float, beta_dlambda: float
) -> float:
    """Table-scope counts the forward model predicts for ``beta_dlambda``."""
    fibre = _context_fibre(table, fibre)
    ctx = table.context
    plan = measurement_plan(table, lambda_c_nm)
    total = charlie_noise_rate(
        beta_dlambda, [fibre] * ctx.n_arms, [plan] * ctx.n_arms, eta_det, ctx.quantum_wavelength_nm
    )
    return total / ctx.n_detectors if ctx.counts_scope == "detector" else total


def beta_from_table(
    table: NoiseSpectrumTable, lambda_c_nm: float, fibre: FibreSpec, eta_det: float | None = None
) -> float:
    """Invert the forward Raman model against the measured counts.

    The model is linear in ``beta_dlambda``, so one forward evaluation at
    unit scattering fixes the answer.
    """
    if eta_det is None:
        eta_det = table.context.eta_det
    if not 0 < eta_det <= 1:
        raise DomainError(f"eta_det must lie in (0, 1], got {eta_det}")
    measured = noise_counts_at(table, lambda_c_nm)
    if measured == 0.0:
        return 0.0
    per_unit = forward_counts(table, lambda_c_nm, fibre, eta_det, 1.0)
    if per_unit <= 0:
        raise DomainError("measurement context produces no Raman light; cannot calibrate")
    return measured / per_unit


@dataclass(frozen=True)
class NoiseModel:
    beta_dlambda: float
    dark_rate_hz: float = 100.0
    window_ns: float = 0.5
    n_detectors: int = 2
    reference_bandwidth_ghz: float = REFERENCE_BANDWIDTH_GHZ

    def __post_init__(self):
        if min(self.beta_dlambda, self.dark_rate_hz, self.window_ns) < 0:
            raise DomainError("noise model parameters must be non-negative")
        if self.n_detectors < 1:
            raise DomainError("need at least one detector")


def raman_rate_per_detector(
    model: NoiseModel,
    fibres: FibreSpec | Sequence[FibreSpec],
    plan: Sequence[ClassicalChannel],
    quantum: QuantumChannelSpec,
    eta_det: float,
    n_arms: int = 2,
) -> float:
    """Detected Raman counts per second at one detector.

    A single ``FibreSpec`` describes ``n_arms`` identical arms; a sequence
    gives each arm its own fibre. Every arm carries ``plan``. The flux is
    split evenly over the detectors behind the 50/50 beamsplitter.
    """
    if isinstance(fibres, FibreSpec):
        fibres = [fibres] * n_arms
    beta = model.beta_dlambda * quantum.bandwidth_ghz / model.reference_bandwidth_ghz
    total = charlie_noise_rate(beta, fibres, [plan] * len(fibres), eta_det, quantum.wavelength_nm)
    return total / model.n_detectors


def noise_prob_per_window(
    model: NoiseModel,
    fibres: FibreSpec | Sequence[FibreSpec],
    plan: Sequence[ClassicalChannel],
    quantum: QuantumChannelSpec,
    eta_det: float,
    n_arms: int = 2,
) -> float:
    """Probability of a noise click in one detector during one temporal mode."""
    rate = raman_rate_per_detector(model, fibres, plan, quantum, eta_det, n_arms) + model.dark_rate_hz
    return float(min(max(rate * model.window_ns * 1e-9, 0.0), 1.0))

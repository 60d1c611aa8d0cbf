"""Scenario configuration, sweeps over classical channel counts, and reports.

A classical plan of ``N`` channels is emulated the way the experiment did:
all channels share one worst-case wavelength, so they collapse into one
laser per direction carrying ``N`` times the per-channel power. The launch
power is back-computed so each receiver sees ``receiver_power_uw`` per
channel.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import calibration
from .channel import ClassicalChannel, Direction, FibreSpec, QuantumChannelSpec
from .errors import ConfigError, DomainError
from .keyrate import (
    LABELS,
    DecoyParams,
    DetectorSpec,
    GainErrorSet,
    KeyRateReport,
    LinkParameters,
    evaluate,
    report_from_gains,
)

DIRECTION_MODES = ("bidirectional", "unidirectional_co")
ENGINES = ("analytic", "montecarlo")

# Per-arm loss of the quantum signal not seen by the Raman calibration
# (sender optics, DWDM, polarisation control and BSM optics). Fitted together
# with e_d so the 2 x 20 km, N = 0 operating point matches the measured rate.
DEFAULT_EXCESS_LOSS_DB = 7.75

ALPHA_Q_DEFAULTS = {1532: 0.20, 1310: 0.33}

# key -> (default, note); a note is written into the report header whenever the default is used
SCENARIO_KEYS: dict[str, tuple[Any, str]] = {
    "id": (None, "required"),
    "length_km": (None, "required"),
    "n_channels": (0, "no classical data"),
    "lambda_q_nm": (1532.68, "quantum channel of the measured system"),
    "lambda_c_nm": (1548.0, "worst-case C-band Raman wavelength"),
    "direction": ("bidirectional", "classical data in both directions"),
    "alpha_q_db_per_km": (None, "0.20 dB/km at 1532 nm, 0.33 dB/km at 1310 nm (typical SMF-28)"),
    "alpha_c_db_per_km": (0.30, "from ~8 uW launch giving 2 uW after 20 km"),
    "excess_loss_db": (DEFAULT_EXCESS_LOSS_DB, "fitted per-arm insertion loss"),
    "receiver_power_uw": (2.0, "minimum received power for one 10 Gbps link"),
    "bandwidth_ghz": (6.0, "filter width of the measured system"),
    "beta_dlambda_per_km": (None, "calibrated from the noise table near 1532 nm; fixed default at 1310 nm"),
    "noise_table": (None, "shipped 1532 nm noise table"),
    "counts_scope": ("detector", "table counts read as per-detector rates"),
    "window_ns": (0.5, "one temporal mode"),
    "mu": (0.3, "implementer default signal intensity"),
    "nu": (0.04, "implementer default decoy intensity"),
    "omega": (1e-4, "implementer default near-vacuum intensity"),
    "p_mu": (1 / 3, "uniform intensity choice"),
    "p_nu": (1 / 3, "uniform intensity choice"),
    "p_omega": (1 / 3, "uniform intensity choice"),
    "p_z": (0.5, "balanced basis choice"),
    "e_d": (0.03, "fitted X-basis misalignment"),
    "efficiency": (0.50, "SNSPD system efficiency"),
    "dark_rate_hz": (100.0, "SNSPD dark counts"),
    "jitter_ps": (100.0, "SNSPD timing jitter"),
    "dead_time_ns": (0.0, "dead time ignored"),
    "f_ec": (1.14, "error-correction efficiency"),
    "clock_rate_hz": (20e6, "current system clock"),
    "engine": ("analytic", "closed-form engine"),
    "cycles": (10_000_000, "Monte Carlo cycles"),
    "seed": (12345, "Monte Carlo seed"),
}

FLOAT_KEYS = {
    "length_km", "lambda_q_nm", "lambda_c_nm", "alpha_q_db_per_km", "alpha_c_db_per_km",
    "excess_loss_db", "receiver_power_uw", "bandwidth_ghz", "beta_dlambda_per_km", "window_ns",
    "mu", "nu", "omega", "p_mu", "p_nu", "p_omega", "p_z", "e_d", "efficiency", "dark_rate_hz",
    "jitter_ps", "dead_time_ns", "f_ec", "clock_rate_hz",
}
INT_KEYS = {"n_channels", "cycles", "seed"}
STR_KEYS = {"id", "direction", "noise_table", "counts_scope", "engine"}


@dataclass(frozen=True)
class Scenario:
    id: str
    length_km: float
    n_channels: int = 0
    lambda_q_nm: float = 1532.68
    lambda_c_nm: float = 1548.0
    direction: str = "bidirectional"
    alpha_q_db_per_km: float | None = None
    alpha_c_db_per_km: float = 0.30
    excess_loss_db: float = DEFAULT_EXCESS_LOSS_DB
    receiver_power_uw: float = 2.0
    bandwidth_ghz: float = 6.0
    beta_dlambda_per_km: float | None = None
    noise_table: str | None = None
    counts_scope: str = "detector"
    window_ns: float = 0.5
    mu: float = 0.3
    nu: float = 0.04
    omega: float = 1e-4
    p_mu: float = 1 / 3
    p_nu: float = 1 / 3
    p_omega: float = 1 / 3
    p_z: float = 0.5
    e_d: float = 0.03
    efficiency: float = 0.50
    dark_rate_hz: float = 100.0
    jitter_ps: float = 100.0
    dead_time_ns: float = 0.0
    f_ec: float = 1.14
    clock_rate_hz: float = 20e6
    engine: str = "analytic"
    cycles: int = 10_000_000
    seed: int = 12345
    group: str = ""
    ordinal: int = 0
    defaults_used: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.n_channels < 0:
            raise ConfigError(f"{self.id}: n_channels must be >= 0")
        if self.direction not in DIRECTION_MODES:
            raise ConfigError(f"{self.id}: direction must be one of {DIRECTION_MODES}, got {self.direction!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"{self.id}: engine must be one of {ENGINES}, got {self.engine!r}")
        if self.alpha_q_db_per_km is None:
            band = min(ALPHA_Q_DEFAULTS, key=lambda k: abs(k - self.lambda_q_nm))
            object.__setattr__(self, "alpha_q_db_per_km", ALPHA_Q_DEFAULTS[band])
        if not self.group:
            object.__setattr__(self, "group", self.id)
        for name in ("length_km", "excess_loss_db", "receiver_power_uw", "window_ns", "clock_rate_hz"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{self.id}: {name} must be non-negative")
        if self.cycles < 1:
            raise ConfigError(f"{self.id}: cycles must be >= 1")

    def with_channels(self, n: int) -> "Scenario":
        return dataclasses.replace(self, n_channels=n)

    @property
    def fibre(self) -> FibreSpec:
        return FibreSpec(self.length_km, self.alpha_q_db_per_km, self.alpha_c_db_per_km)

    @property
    def quantum(self) -> QuantumChannelSpec:
        return QuantumChannelSpec(self.lambda_q_nm, bandwidth_ghz=self.bandwidth_ghz)

    @property
    def detector(self) -> DetectorSpec:
        return DetectorSpec(self.efficiency, self.dark_rate_hz, self.jitter_ps, self.dead_time_ns)

    @property
    def decoy(self) -> DecoyParams:
        return DecoyParams(self.mu, self.nu, self.omega, self.p_mu, self.p_nu, self.p_omega, self.p_z, self.e_d)

    @property
    def conditional(self) -> bool:
        """True when the Raman factor is a non-measured default (1310 nm band)."""
        return self.beta_dlambda_per_km is None and not _in_measured_band(self.lambda_q_nm)

    def launch_power_w(self) -> float:
        """Per-direction launch power emulating ``n_channels`` links."""
        per_channel = self.receiver_power_uw * 1e-6 * 10 ** (self.alpha_c_db_per_km * self.length_km / 10)
        return self.n_channels * per_channel

    def classical_plan(self) -> list[ClassicalChannel]:
        p = self.launch_power_w()
        plan = [ClassicalChannel(self.lambda_c_nm, p, Direction.CO)]
        if self.direction == "bidirectional":
            plan.append(ClassicalChannel(self.lambda_c_nm, p, Direction.COUNTER))
        return plan

    def beta_dlambda(self) -> float:
        if self.beta_dlambda_per_km is not None:
            return self.beta_dlambda_per_km
        if not _in_measured_band(self.lambda_q_nm):
            return calibration.BETA_DLAMBDA_1310_DEFAULT
        return _calibrated_beta(self.noise_table, self.counts_scope, self.lambda_c_nm, self.alpha_c_db_per_km)

    def noise_model(self) -> calibration.NoiseModel:
        return calibration.NoiseModel(self.beta_dlambda(), self.dark_rate_hz, self.window_ns)

    def noise_prob(self) -> float:
        return calibration.noise_prob_per_window(
            self.noise_model(), self.fibre, self.classical_plan(), self.quantum, self.efficiency
        )

    def dark_prob(self) -> float:
        return self.dark_rate_hz * self.window_ns * 1e-9

    def link(self) -> LinkParameters:
        loss = self.alpha_q_db_per_km * self.length_km + self.excess_loss_db
        return LinkParameters(
            self.decoy, loss, loss, self.noise_prob(), self.detector, self.clock_rate_hz, self.dark_prob()
        )


def _in_measured_band(lambda_q_nm: float) -> bool:
    return 1525.0 <= lambda_q_nm <= 1540.0


_BETA_CACHE: dict = {}


def _calibrated_beta(table_path, counts_scope, lambda_c_nm, alpha_c):
    key = (table_path, counts_scope, lambda_c_nm, alpha_c)
    if key not in _BETA_CACHE:
        ctx = calibration.MeasurementContext(counts_scope=counts_scope)
        table = calibration.load_table(table_path, ctx)
        # the calibration run used the quantum-wavelength attenuation of the measured band
        fibre = FibreSpec(ctx.length_km, ALPHA_Q_DEFAULTS[1532], alpha_c)
        _BETA_CACHE[key] = calibration.beta_from_table(table, lambda_c_nm, fibre)
    return _BETA_CACHE[key]


# -- configuration -------------------------------------------------------

def _coerce(key: str, value, where: str):
    if key in FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: '{key}' must be a number, got {value!r}")
        return float(value)
    if key in INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where}: '{key}' must be an integer, got {value!r}")
        return value
    if key in STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: '{key}' must be a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unknown key '{key}'")


def scenarios_from_dict(data: dict, source: str = "<config>") -> list[Scenario]:
    unknown_top = set(data) - {"defaults", "scenario"}
    if unknown_top:
        raise ConfigError(f"{source}: unknown top-level key(s) {sorted(unknown_top)}")
    defaults = data.get("defaults", {})
    entries = data.get("scenario", [])
    if not entries:
        raise ConfigError(f"{source}: no [[scenario]] entries")
    for k in defaults:
        if k in ("id",) or k not in SCENARIO_KEYS:
            raise ConfigError(f"{source}: unknown key '{k}' in [defaults]")
    out: list[Scenario] = []
    seen = set()
    for idx, entry in enumerate(entries):
        where = f"{source}: scenario #{idx + 1}"
        for k in entry:
            if k not in SCENARIO_KEYS:
                raise ConfigError(f"{where}: unknown key '{k}'")
        merged = {**defaults, **entry}
        for req in ("id", "length_km"):
            if req not in merged:
                raise ConfigError(f"{where}: missing required key '{req}'")
        n_values = merged.pop("n_channels", 0)
        if not isinstance(n_values, list):
            n_values = [n_values]
        n_values = [_coerce("n_channels", n, where) for n in n_values]
        kwargs = {k: _coerce(k, v, where) for k, v in merged.items()}
        if kwargs["id"] in seen:
            raise ConfigError(f"{where}: duplicate scenario id {kwargs['id']!r}")
        seen.add(kwargs["id"])
        provenance = tuple(
            (k, note) for k, (default, note) in SCENARIO_KEYS.items()
            if k not in merged and k not in ("id", "length_km", "n_channels")
        )
        if "n_channels" not in entry and "n_channels" not in defaults:
            provenance += (("n_channels", SCENARIO_KEYS["n_channels"][1]),)
        for n in n_values:
            sid = kwargs["id"] if len(n_values) == 1 else f"{kwargs['id']}/N={n}"
            try:
                sc = Scenario(
                    **{**kwargs, "id": sid}, n_channels=n, group=kwargs["id"],
                    ordinal=len(out), defaults_used=provenance,
                )
                sc.decoy, sc.detector, sc.fibre, sc.quantum  # validate nested types now
            except DomainError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
            out.append(sc)
    return out


def load_config(path: str | Path) -> list[Scenario]:
    """Parse a TOML scenario file into fully resolved scenarios.

    Unknown keys are errors. A list-valued ``n_channels`` expands into one
    scenario per entry.
    """
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return scenarios_from_dict(data, str(path))


# -- sweeps --------------------------------------------------------------

CSV_COLUMNS = (
    "scenario_id", "length_km_total", "lambda_q_nm", "lambda_c_nm", "direction", "n_channels",
    "noise_prob", "q11_lower", "e11x_upper", "r_inf_per_cycle", "r_inf_bps", "stderr",
)


@dataclass(frozen=True)
class SweepRow:
    scenario_id: str
    length_km_total: float
    lambda_q_nm: float
    lambda_c_nm: float
    direction: str
    n_channels: int
    noise_prob: float
    q11_lower: float
    e11x_upper: float
    r_inf_per_cycle: float
    r_inf_bps: float
    stderr: float

    @property
    def positive(self) -> bool:
        return self.r_inf_per_cycle > 0


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reports: list[KeyRateReport] = field(default_factory=list)
    scenarios: list[Scenario] = field(default_factory=list)
    n_max: dict[str, int] = field(default_factory=dict)
    n_max_unidirectional: dict[str, int] = field(default_factory=dict)

    def group_rows(self) -> dict[str, list[SweepRow]]:
        out: dict[str, list[SweepRow]] = {}
        for sc, row in zip(self.scenarios, self.rows):
            out.setdefault(sc.group, []).append(row)
        return out

    def invariant_flags(self) -> dict[str, bool]:
        """Non-increasing key rate in N for every configuration."""
        flags = {}
        for group, rows in self.group_rows().items():
            ordered = sorted(rows, key=lambda r: r.n_channels)
            rates = [r.r_inf_per_cycle for r in ordered]
            flags[f"{group}: R non-increasing in N"] = all(b <= a * (1 + 1e-12) + 1e-18 for a, b in zip(rates, rates[1:]))
        for group, uni in self.n_max_unidirectional.items():
            flags[f"{group}: unidirectional N_max >= bidirectional"] = uni >= self.n_max[group]
        return flags


def _rate_stderr(g: GainErrorSet, f: float) -> float:
    """Linear error propagation of simulated gain/error uncertainties into R."""
    base = report_from_gains(g, f).r_inf_raw
    var = 0.0
    for key, pg in g.pairs.items():
        for name in ("q_z", "e_z", "q_x", "e_x"):
            se = getattr(pg, f"{name}_se")
            if se <= 0:
                continue
            val = getattr(pg, name)
            h = se * 1e-2
            bumped = dataclasses.replace(pg, **{name: min(val + h, 1.0)})
            g2 = GainErrorSet(g.intensities, {**g.pairs, key: bumped})
            step = min(val + h, 1.0) - val
            if step <= 0:
                continue
            deriv = (report_from_gains(g2, f).r_inf_raw - base) / step
            var += (deriv * se) ** 2
    return math.sqrt(var)


def evaluate_scenario(sc: Scenario, workers: int = 1) -> tuple[SweepRow, KeyRateReport]:
    link = sc.link()
    stderr = 0.0
    if sc.engine == "analytic":
        report = evaluate(link, sc.f_ec, sc.id)
    else:
        from .protocol import run_campaign

        result = run_campaign(link, sc.cycles, sc.seed, workers=workers)
        g = result.gain_error_set()
        report = report_from_gains(g, sc.f_ec, sc.id, sc.clock_rate_hz)
        stderr = _rate_stderr(g, sc.f_ec)
    row = SweepRow(
        sc.id, 2 * sc.length_km, sc.lambda_q_nm, sc.lambda_c_nm, sc.direction, sc.n_channels,
        link.noise_p, report.q11_lower, report.e11x_upper, report.r_inf_raw, report.r_inf_bps, stderr,
    )
    return row, report


def _evaluate_job(sc: Scenario):
    try:
        return evaluate_scenario(sc)
    except Exception as exc:
        raise RuntimeError(f"scenario {sc.id!r} failed: {exc}") from exc


def rate_at(sc: Scenario, n: int) -> float:
    return evaluate(sc.with_channels(n).link(), sc.f_ec).r_inf_raw


def find_n_max(sc: Scenario, limit: int = 1_000_000) -> int:
    """Largest channel count with a positive analytic key rate (-1 if none).

    Relies on the key rate being non-increasing in N.
    """
    if rate_at(sc, 0) <= 0:
        return -1
    lo, hi = 0, 1
    while rate_at(sc, hi) > 0:
        lo, hi = hi, hi * 2
        if hi > limit:
            return limit
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate_at(sc, mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def run_sweep(scenarios: Sequence[Scenario], workers: int = 1) -> SweepResult:
    """Evaluate every scenario; rows come back in scenario order."""
    scenarios = sorted(scenarios, key=lambda s: s.ordinal)
    if workers > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_evaluate_job, scenarios))
    else:
        outputs = [_evaluate_job(sc) for sc in scenarios]
    result = SweepResult([o[0] for o in outputs], [o[1] for o in outputs], list(scenarios))
    first: dict[str, Scenario] = {}
    for sc in scenarios:
        first.setdefault(sc.group, sc)
    result.n_max = {group: find_n_max(sc) for group, sc in first.items()}
    result.n_max_unidirectional = {
        group: find_n_max(dataclasses.replace(sc, direction="unidirectional_co"))
        for group, sc in first.items() if sc.direction == "bidirectional"
    }
    return result


# -- reports -------------------------------------------------------------

def _header_lines(result: SweepResult) -> list[str]:
    lines = [
        "units: length_km_total km (both arms); wavelengths nm; noise_prob per detector per temporal mode;",
        "       q11_lower, r_inf_per_cycle per clock cycle (infinite-key); r_inf_bps bit/s at the clock rate",
    ]
    done = set()
    for sc in result.scenarios:
        if sc.group in done:
            continue
        done.add(sc.group)
        if sc.defaults_used:
            lines.append(f"defaults used by {sc.group}:")
            lines.extend(f"  {k} = {getattr(sc, k)!r}  ({note})" for k, note in sc.defaults_used)
        if sc.conditional:
            lines.append(f"{sc.group}: conditional on the default 1310 nm Raman factor")
    return lines


def write_csv(result: SweepResult, path: str | Path) -> None:
    if not result.rows:
        raise ValueError("refusing to write an empty sweep")
    with open(path, "w", newline="") as fh:
        for line in _header_lines(result):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in dataclasses.astuple(row)])


def read_csv(path: str | Path) -> list[SweepRow]:
    text = Path(path).read_text()
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    rows = []
    types = {f.name: f.type for f in dataclasses.fields(SweepRow)}
    for rec in csv.DictReader(io.StringIO(body)):
        vals = {}
        for k, v in rec.items():
            t = types[k]
            vals[k] = float(v) if t == "float" else int(v) if t == "int" else v
        rows.append(SweepRow(**vals))
    return rows


def text_summary(result: SweepResult) -> str:
    if not result.rows:
        raise ValueError("empty sweep")
    out = ["configuration                          N_max   (classical capacity at 10 Gbps/channel)"]
    conditional = {sc.group for sc in result.scenarios if sc.conditional}
    for group, n in result.n_max.items():
        cap = f"{max(n, 0) * 10:,} Gbps"
        flag = "  [conditional on 1310 nm Raman default]" if group in conditional else ""
        out.append(f"{group:<38} {n:>6}   {cap}{flag}")
    out.append("")
    for name, ok in result.invariant_flags().items():
        out.append(f"{'PASS' if ok else 'FAIL'}  {name}")
    return "\n".join(out) + "\n"


def emit_report(result: SweepResult, path: str | Path, format: str = "csv") -> Path:
    """Write the sweep as CSV or as a text summary listing N_max per configuration."""
    if not result.rows:
        raise ValueError("refusing to write a report for an empty sweep")
    path = Path(path)
    if format == "csv":
        write_csv(result, path)
    elif format in ("text", "text-summary"):
        path.write_text(text_summary(result))
    else:
        raise ValueError(f"unknown report format {format!r}")
    return path


# -- measured key rates --------------------------------------------------

# Measured R_inf (per clock cycle) and one-sigma errors, by per-arm length and N.
MEASURED_KEY_RATES = {
    20.0: {0: (1.13e-5, 5.52e-6), 1: (8.37e-6, 2.93e-6), 2: (5.34e-6, 3.36e-6),
           3: (6.66e-6, 2.69e-6), 4: (3.43e-6, 3.16e-6), 5: (3.66e-6, 2.29e-6)},
    40.0: {0: (1.72e-6, 6.16e-7), 1: (2.66e-7, 5.35e-7)},
}


@dataclass(frozen=True)
class Table2Row:
    length_km: float
    n_channels: int
    measured: float
    sigma: float
    computed: float

    @property
    def within_band(self) -> bool:
        return abs(self.computed - self.measured) <= self.sigma


def table2_comparison(base: Scenario | None = None) -> list[Table2Row]:
    base = base or Scenario(id="table2", length_km=20.0)
    rows = []
    for length, entries in MEASURED_KEY_RATES.items():
        sc = dataclasses.replace(base, length_km=length)
        for n, (value, sigma) in entries.items():
            rows.append(Table2Row(length, n, value, sigma, rate_at(sc, n)))
    return rows


def format_table2(rows: Iterable[Table2Row]) -> str:
    out = ["arm length  N   measured R_inf        computed R_inf   within 1 sigma"]
    for r in rows:
        out.append(
            f"2 x {r.length_km:>4.0f} km  {r.n_channels}   {r.measured:.2e} +/- {r.sigma:.2e}   "
            f"{r.computed:.3e}        {'yes' if r.within_band else 'NO'}"
        )
    return "\n".join(out) + "\n"

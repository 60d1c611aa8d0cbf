"""MDI-QKD key rates in fibres shared with classical data channels.

Modules
-------
channel
    Fibre attenuation and forward/backward Raman noise power.
calibration
    Raman scattering factor from a measured noise spectrum.
keyrate
    Closed-form gains, decoy-state bounds and the asymptotic key rate.
protocol
    Event-level Monte Carlo of the time-bin protocol (independent oracle).
runner
    TOML scenarios, channel-count sweeps and CSV/text reports.
"""
from .calibration import NoiseModel, load_table, noise_prob_per_window
from .channel import (
    ClassicalChannel,
    Direction,
    FibreSpec,
    QuantumChannelSpec,
    attenuate,
    raman_co,
    raman_counter,
)
from .errors import ConfigError, DomainError, SimulationIntegrityError
from .keyrate import (
    DecoyParams,
    DetectorSpec,
    LinkParameters,
    binary_entropy,
    decoy_bounds,
    evaluate,
    gains_and_errors,
    secret_key_rate,
)
from .protocol import run_campaign
from .runner import Scenario, emit_report, evaluate_scenario, find_n_max, load_config, run_sweep

__version__ = "0.1.0"

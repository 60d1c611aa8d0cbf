"""Mode bookkeeping for the time-bin Bell-state measurement.

Charlie has two detectors behind a 50/50 beamsplitter and each detector
distinguishes an early and a late time bin, giving four detection slots::

    slot 0 = (D1, early)   slot 1 = (D1, late)
    slot 2 = (D2, early)   slot 3 = (D2, late)

A click pattern is a 4-bit mask with bit ``s`` set when slot ``s`` clicked.
Prepared states are indexed ``0..3`` as Z0, Z1, X0, X1 (``|e>``, ``|l>``,
``|+>``, ``|->``).
"""
from __future__ import annotations

import math

import numpy as np

N_SLOTS = 4
N_PATTERNS = 1 << N_SLOTS
SLOTS = ((1, "early"), (1, "late"), (2, "early"), (2, "late"))

# psi-minus signature: opposite detectors, opposite time bins, nothing else.
PSI_MINUS_MASKS = (0b1001, 0b0110)
# psi-plus signature: one detector fires in both bins. Never announced.
PSI_PLUS_MASKS = (0b0011, 0b1100)

Z, X = 0, 1
STATE_NAMES = ("Z0", "Z1", "X0", "X1")


def state_index(basis: int, bit: int) -> int:
    return 2 * basis + bit


def flip_bit(state: int) -> int:
    return state ^ 1


def time_bin_amplitudes(state: int) -> np.ndarray:
    """Amplitudes on (early, late) for a prepared state."""
    r = 1.0 / math.sqrt(2.0)
    return np.array([(1.0, 0.0), (0.0, 1.0), (r, r), (r, -r)][state], dtype=complex)


def output_modes(state: int, port: int) -> np.ndarray:
    """Slot amplitudes of one input photon after the beamsplitter.

    ``port`` 0 is Alice's input, port 1 Bob's; Bob picks up the minus sign
    at the second output.
    """
    e, l = time_bin_amplitudes(state)
    sign = 1.0 if port == 0 else -1.0
    return np.array([e, l, sign * e, sign * l]) / math.sqrt(2.0)


ALICE_MODES = np.array([output_modes(s, 0) for s in range(4)])
BOB_MODES = np.array([output_modes(s, 1) for s in range(4)])


def jitter_migration_prob(jitter_ps: float, separation_ns: float = 2.5) -> float:
    """Chance that Gaussian timing jitter moves a detection into the other time bin."""
    if jitter_ps <= 0:
        return 0.0
    half_gap = 0.5 * separation_ns * 1e3
    return 0.5 * math.erfc(half_gap / (jitter_ps * math.sqrt(2.0)))


def jitter_matrix(q: float) -> np.ndarray:
    """``M[j, s]``: probability a photon in mode ``j`` registers in slot ``s``."""
    block = np.array([[1.0 - q, q], [q, 1.0 - q]])
    m = np.zeros((N_SLOTS, N_SLOTS))
    m[:2, :2] = block
    m[2:, 2:] = block
    return m


def silent_weights(mask: int, migration: np.ndarray) -> np.ndarray:
    """Per-mode probability that a photon lands in one of the slots of ``mask``."""
    cols = [s for s in range(N_SLOTS) if mask >> s & 1]
    return migration[:, cols].sum(axis=1) if cols else np.zeros(N_SLOTS)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def patterns_from_silence(silence: np.ndarray) -> np.ndarray:
    """Exact click-pattern distribution from all-silent probabilities.

    ``silence[..., S]`` is the probability that every slot in mask ``S`` is
    silent. Returns ``P[..., C]``, the probability that exactly the slots in
    ``C`` click.
    """
    silence = np.asarray(silence)
    full = N_PATTERNS - 1
    out = np.zeros_like(silence)
    for c in range(N_PATTERNS):
        t = c
        while True:
            sign = -1.0 if popcount(t) & 1 else 1.0
            out[..., c] += sign * silence[..., (full ^ c) | t]
            if t == 0:
                break
            t = (t - 1) & c
    return out

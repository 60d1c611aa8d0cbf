"""Event-level Monte Carlo of the three-party protocol.

Each clock cycle Alice and Bob pick an intensity, a basis and a bit, emit a
phase-randomised weak coherent pulse (a Poissonian mixture of Fock states),
lose photons independently in their fibre and at the detector, and Charlie
records which of the four (detector, time bin) slots fired. Charlie
announces only the psi-minus click signature; Alice and Bob recover the
matching preparation records from FIFO buffers and sift.

Multi-photon interference at the beamsplitter is exact: for ``k_a`` photons
in Alice's mode ``u`` and ``k_b`` in Bob's mode ``v`` the probability that a
set of slots stays empty is a permanent of a two-block Gram matrix, which
reduces to ``sum_j C(k_a, j) C(k_b, j) |<u,v>|^2j |u|^2(k_a-j) |v|^2(k_b-j)``
with both vectors restricted to the remaining slots.
"""
from __future__ import annotations

import collections
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.special import comb

from . import optics
from .errors import DomainError, SimulationIntegrityError
from .keyrate import (
    LABELS,
    DecoyParams,
    DetectorSpec,
    GainErrorSet,
    LinkParameters,
    PairGains,
    effective_efficiency,
)

K_TABLE = 12  # photon numbers above this are handled outside the lookup table
DEFAULT_CHUNK = 1 << 20
THREE_SIGMA_TAIL = 2.0 * stats.norm.sf(3.0)
BASIS_NAMES = ("Z", "X")
WINDOW_NAMES = ("early", "late")


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator used for every campaign stream."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# -- exact multi-photon click statistics ---------------------------------

def _silence_fock(state_a: int, state_b: int, k_a: np.ndarray, k_b: np.ndarray, migration: np.ndarray) -> np.ndarray:
    """``P(all slots of S silent | k_a, k_b photons arrive)`` for every mask S."""
    u0 = optics.ALICE_MODES[state_a]
    v0 = optics.BOB_MODES[state_b]
    k_a = np.asarray(k_a)
    k_b = np.asarray(k_b)
    out = np.empty(np.broadcast(k_a, k_b).shape + (optics.N_PATTERNS,))
    jmax = int(min(np.max(k_a), np.max(k_b))) if k_a.size else 0
    for mask in range(optics.N_PATTERNS):
        keep = np.sqrt(1.0 - optics.silent_weights(mask, migration))
        u, v = u0 * keep, v0 * keep
        a = float(np.sum(abs(u) ** 2))
        b = float(np.sum(abs(v) ** 2))
        g2 = float(abs(np.vdot(u, v)) ** 2)
        total = np.zeros(out.shape[:-1])
        for j in range(jmax + 1):
            ok = (k_a >= j) & (k_b >= j)
            ea = np.where(ok, k_a - j, 0)
            eb = np.where(ok, k_b - j, 0)
            term = comb(k_a, j) * comb(k_b, j) * g2**j * np.power(a, ea) * np.power(b, eb)
            total = total + np.where(ok, term, 0.0)
        out[..., mask] = total
    return out


def fock_pattern_probs(state_a: int, state_b: int, k_a, k_b, migration_prob: float = 0.0) -> np.ndarray:
    """Click-pattern distribution (last axis, 16 masks) for given arriving photon numbers."""
    m = optics.jitter_matrix(migration_prob)
    probs = optics.patterns_from_silence(_silence_fock(state_a, state_b, k_a, k_b, m))
    return np.clip(probs, 0.0, None)


@lru_cache(maxsize=16)
def _pattern_cdf(migration_prob: float) -> np.ndarray:
    """Cumulative pattern tables indexed ``[state_a, state_b, k_a, k_b, mask]``."""
    ks = np.arange(K_TABLE + 1)
    ka, kb = np.meshgrid(ks, ks, indexing="ij")
    table = np.empty((4, 4, K_TABLE + 1, K_TABLE + 1, optics.N_PATTERNS))
    for sa in range(4):
        for sb in range(4):
            table[sa, sb] = fock_pattern_probs(sa, sb, ka, kb, migration_prob)
    cdf = np.cumsum(table, axis=-1)
    cdf /= cdf[..., -1:]
    return cdf


def single_photon_pair_yield(state_a: int, state_b: int, eta_a: float, eta_b: float, noise_p: float, migration_prob: float = 0.0) -> float:
    """Exact psi-minus probability when each source emits exactly one photon."""
    p = 0.0
    for ka, pa in ((0, 1 - eta_a), (1, eta_a)):
        for kb, pb in ((0, 1 - eta_b), (1, eta_b)):
            pat = fock_pattern_probs(state_a, state_b, ka, kb, migration_prob)
            p += pa * pb * _psi_minus_with_noise(pat, noise_p)
    return p


def _psi_minus_with_noise(signal_patterns: np.ndarray, noise_p: float) -> float:
    noise = np.array([noise_p ** optics.popcount(m) * (1 - noise_p) ** (4 - optics.popcount(m)) for m in range(16)])
    total = 0.0
    for s in range(16):
        for n in range(16):
            if (s | n) in optics.PSI_MINUS_MASKS:
                total += signal_patterns[s] * noise[n]
    return total


def true_single_photon_stats(link: LinkParameters) -> dict[str, float]:
    """Exact Y11 and e11 in both bases from the Fock-state model."""
    eta = effective_efficiency(link)
    ta, tb = link.transmittance
    q = link.detector.migration_prob
    e_d = link.decoy.e_d
    out = {}
    for basis in (optics.Z, optics.X):
        total = err = 0.0
        for bit_a in (0, 1):
            for bit_b in (0, 1):
                a = optics.state_index(basis, bit_a)
                b = optics.state_index(basis, bit_b)
                y = single_photon_pair_yield(a, b, ta * eta, tb * eta, link.noise_p, q)
                if basis == optics.X:
                    y_flip = single_photon_pair_yield(a, optics.flip_bit(b), ta * eta, tb * eta, link.noise_p, q)
                    y = (1 - e_d) * y + e_d * y_flip
                total += y / 4
                if bit_a == bit_b:
                    err += y / 4
        name = BASIS_NAMES[basis].lower()
        out[f"y11_{name}"] = total
        out[f"e11_{name}"] = err / total if total > 0 else 0.0
    mu = link.decoy.mu
    out["q11_z"] = mu * mu * math.exp(-2 * mu) * out["y11_z"]
    return out


# -- single-cycle testbed ------------------------------------------------

@dataclass(frozen=True)
class PreparedQubit:
    basis: str
    bit: int
    intensity_label: str
    intensity: float
    phase: float

    @property
    def state(self) -> int:
        return optics.state_index(BASIS_NAMES.index(self.basis), self.bit)

    @property
    def amplitudes(self) -> np.ndarray:
        """Coherent amplitudes on (early, late); squared norm equals the intensity."""
        return math.sqrt(self.intensity) * np.exp(1j * self.phase) * optics.time_bin_amplitudes(self.state)


@dataclass(frozen=True)
class DetectionEvent:
    detector: int
    window: str
    cycle_index: int = 0
    origin: str = "signal"  # diagnostic only


@dataclass(frozen=True)
class BSMAnnouncement:
    cycle_index: int
    outcome: str = "psi-"


@dataclass(frozen=True)
class SiftedRecord:
    cycle_index: int
    alice: tuple[str, int, str]
    bob: tuple[str, int, str]
    bob_flipped: bool

    @property
    def bases_match(self) -> bool:
        return self.alice[0] == self.bob[0]

    @property
    def key_bits(self) -> tuple[int, int]:
        return self.alice[1], self.bob[1] ^ int(self.bob_flipped)


def prepare_qubit(rng: np.random.Generator, decoy: DecoyParams) -> PreparedQubit:
    probs = decoy.probabilities
    label = LABELS[rng.choice(3, p=[probs[k] for k in LABELS])]
    basis = "Z" if rng.random() < decoy.p_z else "X"
    bit = int(rng.integers(2))
    return PreparedQubit(basis, bit, label, decoy.intensities[label], float(rng.uniform(0.0, 2 * math.pi)))


def sample_click_masks(
    state_a: int,
    state_b: int,
    k_a,
    k_b,
    rng: np.random.Generator,
    noise_p: float = 0.0,
    migration_prob: float = 0.0,
    size: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample (signal mask, noise mask) for photons that reach the detectors."""
    k_a = np.broadcast_to(np.asarray(k_a), (size,) if size else np.shape(k_a))
    k_b = np.broadcast_to(np.asarray(k_b), k_a.shape)
    n = k_a.size
    signal = np.zeros(n, dtype=np.int64)
    flat_a, flat_b = k_a.ravel(), k_b.ravel()
    cdf = _pattern_cdf(float(migration_prob))
    small = (flat_a <= K_TABLE) & (flat_b <= K_TABLE)
    u = rng.random(n)
    idx = np.nonzero(small)[0]
    signal[idx] = (u[idx, None] > cdf[state_a, state_b, flat_a[idx], flat_b[idx]]).sum(axis=1)
    for i in np.nonzero(~small)[0]:
        row = np.cumsum(fock_pattern_probs(state_a, state_b, flat_a[i], flat_b[i], migration_prob))
        signal[i] = int((u[i] > row / row[-1]).sum())
    noise = _noise_masks(rng, n, noise_p)
    return signal.reshape(k_a.shape), noise.reshape(k_a.shape)


def _noise_masks(rng: np.random.Generator, n: int, noise_p: float) -> np.ndarray:
    if noise_p <= 0:
        return np.zeros(n, dtype=np.int64)
    hits = rng.random((n, optics.N_SLOTS)) < noise_p
    return hits @ (1 << np.arange(optics.N_SLOTS))


def transmit_and_detect(
    a: PreparedQubit,
    b: PreparedQubit,
    losses_db: tuple[float, float],
    noise_p: float,
    det: DetectorSpec,
    rng: np.random.Generator,
    e_d: float = 0.0,
    dark_p: float = 0.0,
    cycle_index: int = 0,
) -> list[DetectionEvent]:
    """One cycle: photon emission, loss, interference, noise and threshold detection."""
    if not 0 <= noise_p <= 1:
        raise DomainError(f"noise probability must lie in [0, 1], got {noise_p}")
    eta_a = 10 ** (-losses_db[0] / 10) * det.efficiency
    eta_b = 10 ** (-losses_db[1] / 10) * det.efficiency
    k_a = rng.binomial(rng.poisson(a.intensity), eta_a)
    k_b = rng.binomial(rng.poisson(b.intensity), eta_b)
    state_b = b.state
    if b.basis == "X" and rng.random() < e_d:
        state_b = optics.flip_bit(state_b)
    sig, noise = sample_click_masks(a.state, state_b, k_a, k_b, rng, noise_p, det.migration_prob)
    sig, noise = int(sig), int(noise)
    events = []
    for s, (detector, window) in enumerate(optics.SLOTS):
        if sig >> s & 1:
            origin = "signal"
        elif noise >> s & 1:
            origin = "dark" if noise_p > 0 and rng.random() < dark_p / noise_p else "raman"
        else:
            continue
        events.append(DetectionEvent(detector, window, cycle_index, origin))
    return events


def bsm_decide(events: Iterable[DetectionEvent]) -> BSMAnnouncement | None:
    """Announce psi-minus iff exactly one early and one late click on opposite detectors."""
    events = list(events)
    slots = {(e.detector, e.window) for e in events}
    if slots in ({(1, "early"), (2, "late")}, {(1, "late"), (2, "early")}):
        return BSMAnnouncement(events[0].cycle_index)
    return None


def round_trip_cycles(length_km: float, clock_rate_hz: float, group_index: float = 1.468) -> int:
    """Cycles between emission and the return of Charlie's announcement."""
    seconds = 2.0 * length_km * 1e3 * group_index / 2.99792458e8
    return int(math.ceil(seconds * clock_rate_hz))


@dataclass
class SiftResult:
    records: list[SiftedRecord]
    dropped: int = 0

    def key_records(self) -> list[SiftedRecord]:
        return [r for r in self.records if r.bases_match]


def sift(
    alice_log: Sequence[PreparedQubit],
    bob_log: Sequence[PreparedQubit],
    announcements: Iterable[BSMAnnouncement],
    buffer_depth: int,
    delay_cycles: int = 0,
) -> SiftResult:
    """FIFO sifting of preparation logs against Charlie's announcements.

    Each party pushes its preparation record into a FIFO of ``buffer_depth``
    entries every cycle. The announcement for cycle ``c`` arrives at cycle
    ``c + delay_cycles``; if that record has already left the FIFO the
    announcement is dropped and counted.
    """
    if buffer_depth < 1:
        raise DomainError("buffer_depth must be at least 1")
    n_cycles = len(alice_log)
    if len(bob_log) != n_cycles:
        raise SimulationIntegrityError("Alice and Bob logs cover different numbers of cycles")
    arrivals = collections.defaultdict(list)
    for ann in announcements:
        if not 0 <= ann.cycle_index < n_cycles:
            raise SimulationIntegrityError(f"announcement for cycle {ann.cycle_index} that was never prepared")
        arrivals[ann.cycle_index + delay_cycles].append(ann.cycle_index)
    fifo_a: collections.deque = collections.deque(maxlen=buffer_depth)
    fifo_b: collections.deque = collections.deque(maxlen=buffer_depth)
    records, dropped = [], 0
    last = max(arrivals, default=-1)
    for t in range(max(n_cycles, last + 1)):
        # the clock keeps running after the last preparation, so old entries still age out
        fifo_a.append((t, alice_log[t] if t < n_cycles else None))
        fifo_b.append((t, bob_log[t] if t < n_cycles else None))
        for c in arrivals.get(t, ()):
            head = fifo_a[0][0] if fifo_a else t + 1
            if c < head:
                dropped += 1
                continue
            qa = fifo_a[c - head][1]
            qb = fifo_b[c - head][1]
            match = qa.basis == qb.basis
            records.append(
                SiftedRecord(c, (qa.basis, qa.bit, qa.intensity_label), (qb.basis, qb.bit, qb.intensity_label), match)
            )
    return SiftResult(records, dropped)


# -- vectorised campaign -------------------------------------------------

@dataclass
class Tallies:
    """Integer counters; merging is plain addition."""

    cycles: np.ndarray = field(default_factory=lambda: np.zeros((2, 3, 3), dtype=np.int64))
    announced: np.ndarray = field(default_factory=lambda: np.zeros((2, 3, 3), dtype=np.int64))
    errors: np.ndarray = field(default_factory=lambda: np.zeros((2, 3, 3), dtype=np.int64))
    tagged_cycles: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    tagged_announced: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    tagged_errors: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    tagged_mumu_announced: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    psi_plus: int = 0
    mismatched_announced: int = 0
    signal_clicks: int = 0
    noise_clicks: int = 0
    dead_time_blocked: int = 0

    def __add__(self, other: "Tallies") -> "Tallies":
        return Tallies(**{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__})

    def __eq__(self, other) -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in self.__dataclass_fields__)


def _dead_time_filter(masks: np.ndarray, period_ns: float, separation_ns: float, dead_ns: float) -> tuple[np.ndarray, int]:
    """Remove clicks that fall inside a detector's dead time (within one block)."""
    masks = masks.copy()
    blocked = 0
    for det_bits in ((0, 1), (2, 3)):
        cyc_e = np.nonzero(masks >> det_bits[0] & 1)[0]
        cyc_l = np.nonzero(masks >> det_bits[1] & 1)[0]
        times = np.concatenate([cyc_e * period_ns, cyc_l * period_ns + separation_ns])
        owner = np.concatenate([np.stack([cyc_e, np.full_like(cyc_e, det_bits[0])], 1),
                                np.stack([cyc_l, np.full_like(cyc_l, det_bits[1])], 1)])
        if times.size < 2:
            continue
        order = np.argsort(times, kind="stable")
        times, owner = times[order], owner[order]
        close = np.diff(times) < dead_ns
        if not close.any():
            continue
        # a click more than one dead time after its predecessor is always kept,
        # so only runs of closely spaced clicks need the sequential pass
        starts = np.concatenate([[0], np.nonzero(~close)[0] + 1])
        ends = np.concatenate([starts[1:], [times.size]])
        for s, e in zip(starts, ends):
            last_ok = times[s]
            for i in range(s + 1, e):
                if times[i] - last_ok >= dead_ns:
                    last_ok = times[i]
                else:
                    c, slot = owner[i]
                    masks[c] &= ~(1 << slot)
                    blocked += 1
    return masks, blocked


def _simulate_block(link: LinkParameters, n: int, seed: np.random.SeedSequence, trace: list | None = None, cycle_offset: int = 0) -> Tallies:
    rng = make_rng(seed)
    d = link.decoy
    det = link.detector
    q = det.migration_prob
    eta = det.efficiency  # dead time is simulated explicitly below
    ta, tb = link.transmittance
    ints = np.array([d.intensities[k] for k in LABELS])
    cum = np.cumsum([d.probabilities[k] for k in LABELS])
    cum[-1] = 1.0

    def side():
        label = np.searchsorted(cum, rng.random(n), side="right")
        basis = (rng.random(n) >= d.p_z).astype(np.int64)
        bit = rng.integers(0, 2, n)
        photons = rng.poisson(ints[label])
        return label, basis, bit, photons

    la, ba, bita, na = side()
    lb, bb, bitb, nb = side()
    ka = rng.binomial(na, ta * eta)
    kb = rng.binomial(nb, tb * eta)
    flip = (rng.random(n) < d.e_d) & (bb == optics.X)
    sa = 2 * ba + bita
    sb = (2 * bb + bitb) ^ flip.astype(np.int64)

    signal = np.zeros(n, dtype=np.int64)
    active = np.nonzero((ka + kb) > 0)[0]
    if active.size:
        u = rng.random(active.size)
        cdf = _pattern_cdf(float(q))
        ka_a, kb_a = ka[active], kb[active]
        small = (ka_a <= K_TABLE) & (kb_a <= K_TABLE)
        si = active[small]
        signal[si] = (u[small, None] > cdf[sa[si], sb[si], ka[si], kb[si]]).sum(axis=1)
        for j in np.nonzero(~small)[0]:
            i = active[j]
            row = np.cumsum(fock_pattern_probs(sa[i], sb[i], ka[i], kb[i], q))
            signal[i] = int((u[j] > row / row[-1]).sum())
    noise = _noise_masks(rng, n, link.noise_p)
    masks = signal | noise

    t = Tallies()
    if det.dead_time_ns > 0:
        masks, t.dead_time_blocked = _dead_time_filter(
            masks, 1e9 / link.clock_rate_hz, det.mode_separation_ns, det.dead_time_ns
        )
    announced = (masks == optics.PSI_MINUS_MASKS[0]) | (masks == optics.PSI_MINUS_MASKS[1])
    matched = ba == bb
    error = bita == bitb
    single = (na == 1) & (nb == 1)

    for basis in (optics.Z, optics.X):
        sel = matched & (ba == basis)
        flat = la[sel] * 3 + lb[sel]
        t.cycles[basis] += np.bincount(flat, minlength=9).reshape(3, 3)
        ann = announced[sel]
        t.announced[basis] += np.bincount(flat[ann], minlength=9).reshape(3, 3)
        t.errors[basis] += np.bincount(flat[ann & error[sel]], minlength=9).reshape(3, 3)
        tag = single[sel]
        t.tagged_cycles[basis] += int(tag.sum())
        t.tagged_announced[basis] += int((tag & ann).sum())
        t.tagged_errors[basis] += int((tag & ann & error[sel]).sum())
        t.tagged_mumu_announced[basis] += int((tag & ann & (flat == 0)).sum())
    t.psi_plus = int(np.isin(masks, optics.PSI_PLUS_MASKS).sum())
    t.mismatched_announced = int((announced & ~matched).sum())
    t.signal_clicks = int(np.unpackbits(signal.astype(np.uint8)[:, None], axis=1).sum())
    t.noise_clicks = int(np.unpackbits((noise & ~signal).astype(np.uint8)[:, None], axis=1).sum())

    if trace is not None:
        for i in range(min(n, trace_cap(trace))):
            trace.append({
                "cycle": cycle_offset + i,
                "alice": [BASIS_NAMES[ba[i]], int(bita[i]), LABELS[la[i]], int(na[i]), int(ka[i])],
                "bob": [BASIS_NAMES[bb[i]], int(bitb[i]), LABELS[lb[i]], int(nb[i]), int(kb[i])],
                "signal_mask": int(signal[i]),
                "noise_mask": int(noise[i] & ~signal[i]),
                "announced": bool(announced[i]),
            })
    return t


class _Trace(list):
    def __init__(self, cap: int):
        super().__init__()
        self.cap = cap


def trace_cap(trace) -> int:
    return getattr(trace, "cap", 0)


def _run_chunk(args):
    link, n, seed = args
    return _simulate_block(link, n, seed)


def _count_se(k: int, n: int) -> float:
    """Binomial standard error of k/n, Laplace-smoothed so zero counts still carry uncertainty."""
    return _se((k + 1) / (n + 2), n)


def _se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else 0.0


@dataclass
class CampaignResult:
    link: LinkParameters
    cycles: int
    seed: int
    tallies: Tallies

    def gain_error_set(self) -> GainErrorSet:
        t = self.tallies
        pairs = {}
        for i, a in enumerate(LABELS):
            for j, b in enumerate(LABELS):
                vals = {}
                for basis, name in ((0, "z"), (1, "x")):
                    n = int(t.cycles[basis, i, j])
                    k = int(t.announced[basis, i, j])
                    e = int(t.errors[basis, i, j])
                    qv = k / n if n else 0.0
                    ev = e / k if k else 0.0
                    vals[f"q_{name}"] = qv
                    vals[f"e_{name}"] = ev
                    vals[f"q_{name}_se"] = _count_se(k, n)
                    vals[f"e_{name}_se"] = _count_se(e, k)
                pairs[a, b] = PairGains(**vals)
        return GainErrorSet(dict(self.link.decoy.intensities), pairs)

    def tagged_truth(self) -> dict[str, float]:
        """Single-photon-pair statistics measured on cycles where both sources emitted one photon."""
        t = self.tallies
        out = {}
        for basis, name in ((0, "z"), (1, "x")):
            n = int(t.tagged_cycles[basis])
            k = int(t.tagged_announced[basis])
            y = k / n if n else 0.0
            e = int(t.tagged_errors[basis]) / k if k else 0.0
            out[f"y11_{name}"] = y
            out[f"y11_{name}_se"] = _count_se(k, n)
            out[f"e11_{name}"] = e
            out[f"e11_{name}_se"] = _count_se(int(t.tagged_errors[basis]), k)
            out[f"n11_{name}"] = n
            out[f"announced11_{name}"] = k
            out[f"errors11_{name}"] = int(t.tagged_errors[basis])
        mu = self.link.decoy.mu
        w = mu * mu * math.exp(-2 * mu)
        out["q11_z"] = w * out["y11_z"]
        out["q11_z_se"] = w * out["y11_z_se"]
        n_mumu = int(t.cycles[0, 0, 0])
        out["q11_z_direct"] = int(t.tagged_mumu_announced[0]) / n_mumu if n_mumu else 0.0
        return out


def run_campaign(
    link: LinkParameters,
    cycles: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
    trace_path: str | Path | None = None,
    trace_limit: int = 10_000,
) -> CampaignResult:
    """Simulate ``cycles`` clock cycles.

    Cycles are cut into fixed chunks, each with its own Philox substream
    spawned from ``seed``; the result is bit-identical for any ``workers``.
    """
    if cycles < 1:
        raise DomainError("a campaign needs at least one cycle")
    if link.noise_p > 1:
        raise DomainError("noise probability above 1")
    n_chunks = -(-cycles // chunk_size)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk_size, cycles - i * chunk_size) for i in range(n_chunks)]
    total = Tallies()
    start = 0
    if trace_path is not None:
        trace = _Trace(min(trace_limit, sizes[0]))
        total = total + _simulate_block(link, sizes[0], seeds[0], trace, 0)
        with open(trace_path, "w") as fh:
            for row in trace:
                fh.write(json.dumps(row) + "\n")
        start = 1
    jobs = [(link, sizes[i], seeds[i]) for i in range(start, n_chunks)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, jobs):
                total = total + part
    else:
        for job in jobs:
            total = total + _run_chunk(job)
    return CampaignResult(link, cycles, seed, total)


@dataclass
class OracleComparison:
    """One simulated count ``k`` out of ``n`` trials against an analytic probability.

    The test is an exact two-sided binomial tail at the level of a 3-sigma
    Gaussian band. Announcement counts at realistic losses are often in the
    single digits, where a Gaussian sigma badly misstates the tail.
    """

    pair: tuple[str, str]
    quantity: str
    successes: int
    trials: int
    analytic: float
    testable: bool = True

    @property
    def simulated(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def sigma(self) -> float:
        return _se(self.analytic, self.trials)

    @property
    def p_value(self) -> float:
        if self.trials == 0:
            return 1.0
        lower = stats.binom.cdf(self.successes, self.trials, self.analytic)
        upper = stats.binom.sf(self.successes - 1, self.trials, self.analytic)
        return float(min(1.0, 2.0 * min(lower, upper)))

    @property
    def z(self) -> float:
        """Normal deviate with the same two-sided tail probability, signed."""
        sign = 1.0 if self.simulated >= self.analytic else -1.0
        return sign * float(stats.norm.isf(self.p_value / 2.0))

    @property
    def ok(self) -> bool:
        return (not self.testable) or self.p_value >= THREE_SIGMA_TAIL


def compare_with_analytic(result: CampaignResult, analytic: GainErrorSet) -> list[OracleComparison]:
    """3-sigma comparison of simulated gains/errors with the analytic model.

    Each gain is a count of announcements among the cycles of that pair and
    basis, each error rate a count of errors among the announcements. Error
    rates are untestable when nothing was announced.
    """
    t = result.tallies
    out = []
    for i, a in enumerate(LABELS):
        for j, b in enumerate(LABELS):
            ref = analytic[a, b]
            for basis, name in ((0, "z"), (1, "x")):
                n = int(t.cycles[basis, i, j])
                k = int(t.announced[basis, i, j])
                e = int(t.errors[basis, i, j])
                out.append(OracleComparison((a, b), f"Q_{name.upper()}", k, n, getattr(ref, f"q_{name}")))
                out.append(OracleComparison((a, b), f"e_{name.upper()}", e, k, getattr(ref, f"e_{name}"), testable=k > 0))
    return out

"""Session simulator for the sending-or-not-sending coherent-state protocol.

Each signal window both parties independently choose to inject a coherent
pulse of mean photon number ``mu`` (probability ``epsilon``) or vacuum.  The
pulses travel through lossy fibre arms, interfere on a symmetric beam
splitter, and two threshold detectors watch the output ports.  A window is
*effective* when exactly one detector clicks.  The interferometer phase
performs a slow random walk which is tracked from interleaved reference
pulses (see :mod:`scfqkd.phasetrack`); windows whose estimated phase
magnitude falls below the post-selection threshold are kept.

Bit convention: the party labelled A maps "send" to bit 1, the party
labelled B maps "send" to bit 0, so the mismatched-decision windows carry
perfectly correlated bits.  State labels are two digits, A first, each digit
1 when that party sent ("01" means only B sent).

The Monte Carlo is organised in fixed-size chunks of whole reference spans.
Every chunk owns an independent, deterministically seeded random stream and
draws in a frozen order (drift increments first), so a cheap sequential
prefix pass can recover each chunk's starting phase and the chunks can then
be simulated in any number of worker processes with bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import phasetrack
from .phasecore import interfere

STATE_LABELS = ("00", "01", "10", "11")
"""Joint send states, A's digit first, 1 = sent a pulse."""

CHUNK_SPANS = 1024
"""Reference spans per simulation chunk."""


def _state_label(alice_sent: bool, bob_sent: bool) -> str:
    return STATE_LABELS[2 * int(alice_sent) + int(bob_sent)]


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol-level configuration shared by simulation and analysis.

    ``mu`` is the signal mean photon number at the source, ``epsilon`` the
    per-window send probability of each party, ``delta_threshold`` the
    post-selection bound on the minor angle of the estimated phase (radians),
    ``f_ec`` the error-correction inefficiency, ``p_t`` the fraction of kept
    windows sacrificed as the test set, and ``mu_ref`` the reference-pulse
    mean photon number (recorded for bookkeeping; reference statistics are
    parameterised directly by detected counts per span).  ``gamma_a`` and
    ``gamma_b`` are the parties' static source phases; only their difference
    matters and it is absorbed into the uniformly random initial phase.
    """

    mu: float = 0.002
    epsilon: float = 0.021
    delta_threshold: float = math.radians(30.0)
    f_ec: float = 1.1
    p_t: float = 0.1
    mu_ref: float = 0.062
    gamma_a: float = 0.0
    gamma_b: float = 0.0

    def __post_init__(self) -> None:
        if not self.mu >= 0.0:
            raise ValueError(f"mu must be non-negative, got {self.mu!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        if not 0.0 < self.delta_threshold <= math.pi:
            raise ValueError(
                f"delta_threshold must lie in (0, pi], got {self.delta_threshold!r}"
            )
        if not self.f_ec >= 1.0:
            raise ValueError(f"f_ec must be at least 1, got {self.f_ec!r}")
        if not 0.0 <= self.p_t <= 1.0:
            raise ValueError(f"p_t must lie in [0, 1], got {self.p_t!r}")
        if not self.mu_ref >= 0.0:
            raise ValueError(f"mu_ref must be non-negative, got {self.mu_ref!r}")
        for name in ("gamma_a", "gamma_b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ChannelModel:
    """Physical model of the two arms, the interference and the detectors.

    Fibre attenuation and lumped component losses are in dB; detector
    efficiencies fold in everything after the beam splitter.  ``dark_prob``
    is the per-window dark-click probability of each detector.
    ``drift_rad_per_window`` is the standard deviation of the Gaussian phase
    increment per signal window.  ``gate_fraction`` scales the effective
    signal intensity for detector gating narrower than the pulse.
    """

    fiber_km_a: float = 25.0
    fiber_km_b: float = 25.0
    atten_db_per_km: float = 0.2
    comp_loss_db_a: float = 0.0
    comp_loss_db_b: float = 0.0
    det_eff_left: float = 1.0
    det_eff_right: float = 1.0
    dark_prob: float = 1e-8
    drift_rad_per_window: float = phasetrack.drift_scale_per_window()
    visibility: float = 1.0
    gate_fraction: float = 1.0

    def __post_init__(self) -> None:
        for name in ("fiber_km_a", "fiber_km_b", "atten_db_per_km", "comp_loss_db_a", "comp_loss_db_b"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("det_eff_left", "det_eff_right"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.dark_prob < 1.0:
            raise ValueError(f"dark_prob must lie in [0, 1), got {self.dark_prob!r}")
        if not self.drift_rad_per_window >= 0.0:
            raise ValueError("drift_rad_per_window must be non-negative")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility!r}")
        if not 0.0 < self.gate_fraction <= 1.0:
            raise ValueError(f"gate_fraction must lie in (0, 1], got {self.gate_fraction!r}")


@dataclass(frozen=True)
class PulseSchedule:
    """Timing layout of one transmission frame.

    A frame packs ``signal_slots`` narrow signal windows at
    ``signal_period_ns`` spacing, then ``ref_slots`` long reference slots,
    then a recovery gap.  The three regions tile the frame exactly.  The
    default layout gives 15 signal windows per microsecond, i.e. an
    equivalent signal rate of 15 MHz, and a 12-frame reference statistics
    span of 180 signal windows.
    """

    frame_ns: float = 1000.0
    signal_slots: int = 15
    signal_slot_ns: float = 1.0
    signal_period_ns: float = 30.0
    ref_slots: int = 4
    ref_slot_ns: float = 100.0
    recovery_ns: float = 150.0
    frames_per_span: int = 12

    def __post_init__(self) -> None:
        if self.signal_slots < 1 or self.ref_slots < 1 or self.frames_per_span < 1:
            raise ValueError("slot and span counts must be positive")
        if self.signal_slot_ns > self.signal_period_ns:
            raise ValueError("signal slots overlap: slot wider than its period")
        if abs(self.signal_region_ns + self.ref_region_ns + self.recovery_ns - self.frame_ns) > 1e-9:
            raise ValueError("slot regions must tile the frame exactly")

    @property
    def signal_region_ns(self) -> float:
        return self.signal_slots * self.signal_period_ns

    @property
    def ref_region_ns(self) -> float:
        return self.ref_slots * self.ref_slot_ns

    @property
    def signal_offsets_ns(self) -> np.ndarray:
        """Start time of each signal slot within the frame."""
        return np.arange(self.signal_slots) * self.signal_period_ns

    @property
    def equivalent_signal_rate_hz(self) -> float:
        """Signal windows per second averaged over the whole frame."""
        return self.signal_slots / (self.frame_ns * 1e-9)

    @property
    def span_windows(self) -> int:
        """Signal windows per reference statistics span."""
        return self.signal_slots * self.frames_per_span


@dataclass(frozen=True)
class WindowRecord:
    """Outcome of a single signal window."""

    index: int
    alice_sent: bool
    bob_sent: bool
    true_phase: float
    estimated_phase: float
    click_left: bool
    click_right: bool

    @property
    def state(self) -> str:
        return _state_label(self.alice_sent, self.bob_sent)

    @property
    def alice_bit(self) -> int:
        """A's local bit: 1 for sending, 0 for not sending."""
        return int(self.alice_sent)

    @property
    def bob_bit(self) -> int:
        """B's local bit: 0 for sending, 1 for not sending."""
        return 0 if self.bob_sent else 1

    @property
    def effective(self) -> bool:
        """True when exactly one detector clicked."""
        return self.click_left != self.click_right


@dataclass
class SessionTallies:
    """Aggregate counts of a session, shaped like the raw data files.

    ``sent`` counts every window by joint state; ``sent_selected`` restricts
    to windows passing the phase threshold; ``sent_test`` / ``sent_key``
    split those into the announced test subset and the key subset.
    ``detected_test`` / ``detected_key`` count effective windows by state and
    physical output channel (0 or 1).  Values are ints for Monte Carlo runs
    and floats for expected-value calculations.
    """

    n_windows: float
    threshold: float
    sent: dict = field(default_factory=dict)
    sent_selected: dict = field(default_factory=dict)
    sent_test: dict = field(default_factory=dict)
    sent_key: dict = field(default_factory=dict)
    detected_test: dict = field(default_factory=dict)
    detected_key: dict = field(default_factory=dict)
    effective_windows: float = 0

    def check_conservation(self) -> None:
        """Raise ValueError if the tally structure is internally inconsistent."""
        if sum(self.sent.values()) != self.n_windows:
            raise ValueError("sent counts do not sum to the number of windows")
        for s in STATE_LABELS:
            if self.sent_selected.get(s, 0) > self.sent.get(s, 0):
                raise ValueError(f"selected count exceeds sent count for state {s}")
            split = self.sent_test.get(s, 0) + self.sent_key.get(s, 0)
            if split != self.sent_selected.get(s, 0):
                raise ValueError(f"test/key split does not partition state {s}")
        for (s, _ch), n in list(self.detected_test.items()) + list(self.detected_key.items()):
            if n < 0 or s not in STATE_LABELS:
                raise ValueError("malformed detection cell")

    def detected_total(self) -> float:
        return sum(self.detected_test.values()) + sum(self.detected_key.values())


@dataclass
class SimulationResult:
    """Outcome of :func:`simulate_session`.

    ``tallies`` is cut at the configured threshold; ``by_threshold`` holds
    one tally set per requested threshold (always including the primary one)
    so a single run can be re-analysed at several post-selection widths.
    """

    params: ProtocolParams
    model: ChannelModel
    n_windows: int
    seed: int
    tallies: SessionTallies
    by_threshold: dict


def arm_transmittance(model: ChannelModel, arm: str) -> float:
    """Power transmittance of one arm from source to beam splitter.

    ``arm`` is "a" or "b" (case-insensitive).  Combines fibre attenuation
    with the lumped component loss of that arm; detector efficiency is not
    included.
    """
    key = arm.lower() if isinstance(arm, str) else arm
    if key == "a":
        loss_db = model.fiber_km_a * model.atten_db_per_km + model.comp_loss_db_a
    elif key == "b":
        loss_db = model.fiber_km_b * model.atten_db_per_km + model.comp_loss_db_b
    else:
        raise ValueError(f"arm must be 'a' or 'b', got {arm!r}")
    return 10.0 ** (-loss_db / 10.0)


def click_probabilities(
    params: ProtocolParams,
    model: ChannelModel,
    alice_sent,
    bob_sent,
    phase_diff,
):
    """Per-window click probabilities of the two detectors.

    A sending party contributes ``mu * gate_fraction * arm_transmittance``
    at the beam splitter, a silent one contributes vacuum.  Threshold
    detection of the coherent output with efficiency eta and dark
    probability d clicks with probability 1 - (1 - d) * exp(-I * eta); the
    two detectors sample independently.  Returns ``(p_left, p_right)``
    where left watches the port that is bright at zero phase difference.
    Accepts scalars or broadcastable arrays.
    """
    mu_a = params.mu * model.gate_fraction * arm_transmittance(model, "a")
    mu_b = params.mu * model.gate_fraction * arm_transmittance(model, "b")
    ports = interfere(
        np.where(alice_sent, mu_a, 0.0),
        np.where(bob_sent, mu_b, 0.0),
        phase_diff,
        model.visibility,
    )
    d = model.dark_prob
    p_left = d - (1.0 - d) * np.expm1(-np.asarray(ports.left) * model.det_eff_left)
    p_right = d - (1.0 - d) * np.expm1(-np.asarray(ports.right) * model.det_eff_right)
    if np.ndim(p_left) == 0:
        return float(p_left), float(p_right)
    return p_left, p_right


# ---------------------------------------------------------------------------
# Deterministic chunked Monte Carlo
# ---------------------------------------------------------------------------

_SPAN = phasetrack.DEFAULT_SPAN_WINDOWS
CHUNK_WINDOWS = CHUNK_SPANS * _SPAN


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent random stream for one chunk; index 0 is the session stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chunk_index])))


def _chunk_bounds(n_windows: int) -> list:
    return [
        (start, min(CHUNK_WINDOWS, n_windows - start))
        for start in range(0, n_windows, CHUNK_WINDOWS)
    ]


def _initial_phase(params: ProtocolParams, seed: int) -> float:
    rng = _chunk_rng(seed, 0)
    return params.gamma_a - params.gamma_b + rng.uniform(0.0, 2.0 * math.pi)


def _chunk_offsets(model: ChannelModel, n_windows: int, seed: int, phi0: float) -> np.ndarray:
    """Starting phase of every chunk, recovered by a sequential prefix pass.

    Re-generates each chunk's drift increments (the first draw of its
    stream) and accumulates their sums; cost is one pass of Gaussian
    generation, independent of the worker count used later.
    """
    bounds = _chunk_bounds(n_windows)
    offsets = np.empty(len(bounds))
    phi = phi0
    scale = model.drift_rad_per_window
    for k, (_start, m) in enumerate(bounds):
        offsets[k] = phi
        inc = _chunk_rng(seed, k + 1).standard_normal(m)
        phi += scale * float(inc.sum())
    return offsets


def _chunk_arrays(
    params: ProtocolParams,
    model: ChannelModel,
    seed: int,
    chunk_index: int,
    m: int,
    phi_offset: float,
    mean_ref_counts: float,
):
    """Simulate one chunk and return its per-window outcome arrays.

    Draw order is frozen: drift increments, A's send decisions, B's send
    decisions, reference counts, left click uniforms, right click uniforms,
    test-split uniforms.  Changing it would silently break reproducibility
    across worker counts, because the prefix pass relies on the increments
    being the first draw.
    """
    rng = _chunk_rng(seed, chunk_index + 1)
    inc = rng.standard_normal(m)
    phases = phi_offset + np.cumsum(model.drift_rad_per_window * inc)
    alice = rng.random(m) < params.epsilon
    bob = rng.random(m) < params.epsilon

    starts = np.arange(0, m, _SPAN)
    span_len = np.minimum(_SPAN, m - starts)
    span_mean = np.add.reduceat(phases, starts) / span_len
    lam = 0.5 * mean_ref_counts * phasetrack.slot_probabilities(span_mean)
    ref_counts = rng.poisson(lam)
    est_span = phasetrack.estimate_phase_batch(ref_counts)
    est = np.repeat(est_span, _SPAN)[:m]

    p_left, p_right = click_probabilities(params, model, alice, bob, phases)
    click_left = rng.random(m) < p_left
    click_right = rng.random(m) < p_right
    is_test = rng.random(m) < params.p_t
    return phases, alice, bob, est, click_left, click_right, is_test


def _accumulate(
    state: np.ndarray,
    minor_est: np.ndarray,
    is_test: np.ndarray,
    effective: np.ndarray,
    channel: np.ndarray,
    thresholds: np.ndarray,
):
    """Per-threshold tally arrays for one chunk of window outcomes."""
    n_thr = len(thresholds)
    sent_sel = np.zeros((n_thr, 4), dtype=np.int64)
    sent_tt = np.zeros((n_thr, 4), dtype=np.int64)
    det_tt = np.zeros((n_thr, 8), dtype=np.int64)
    det_ss = np.zeros((n_thr, 8), dtype=np.int64)
    det_cell = 2 * state + channel
    for j, thr in enumerate(thresholds):
        kept = minor_est < thr
        sent_sel[j] = np.bincount(state[kept], minlength=4)
        sent_tt[j] = np.bincount(state[kept & is_test], minlength=4)
        eff_kept = kept & effective
        det_tt[j] = np.bincount(det_cell[eff_kept & is_test], minlength=8)
        det_ss[j] = np.bincount(det_cell[eff_kept & ~is_test], minlength=8)
    return sent_sel, sent_tt, det_tt, det_ss


def _chunk_tallies(args):
    (params, model, seed, chunk_index, m, phi_offset, thresholds, mean_ref_counts) = args
    phases, alice, bob, est, click_left, click_right, is_test = _chunk_arrays(
        params, model, seed, chunk_index, m, phi_offset, mean_ref_counts
    )
    state = (alice.astype(np.int64) << 1) | bob
    minor_est = np.abs(np.remainder(est + math.pi, 2.0 * math.pi) - math.pi)
    effective = click_left != click_right
    channel = click_right.astype(np.int64)
    sent_total = np.bincount(state, minlength=4)
    eff_total = int(effective.sum())
    per_thr = _accumulate(state, minor_est, is_test, effective, channel, thresholds)
    return chunk_index, sent_total, eff_total, per_thr


def _empty_tallies(n_windows: float, threshold: float) -> SessionTallies:
    return SessionTallies(
        n_windows=n_windows,
        threshold=threshold,
        sent={s: 0 for s in STATE_LABELS},
        sent_selected={s: 0 for s in STATE_LABELS},
        sent_test={s: 0 for s in STATE_LABELS},
        sent_key={s: 0 for s in STATE_LABELS},
        detected_test={(s, ch): 0 for s in STATE_LABELS for ch in (0, 1)},
        detected_key={(s, ch): 0 for s in STATE_LABELS for ch in (0, 1)},
    )


def simulate_session(
    params: ProtocolParams,
    model: ChannelModel,
    n_windows: int,
    seed: int,
    workers: int = 1,
    thresholds: Sequence[float] | None = None,
    mean_ref_counts: float = phasetrack.DEFAULT_MEAN_REF_COUNTS,
) -> SimulationResult:
    """Run a full Monte Carlo session and aggregate raw-file-shaped tallies.

    ``thresholds`` optionally lists additional post-selection widths
    (radians) to tally alongside ``params.delta_threshold``.  The result is
    bit-identical for any ``workers`` value: the session is cut into
    fixed-size chunks with independent seeded streams, a sequential prefix
    pass recovers every chunk's starting phase, and partial tallies are
    merged in chunk order.
    """
    n_windows = int(n_windows)
    if n_windows < 1:
        raise ValueError("n_windows must be positive")
    if workers < 1:
        raise ValueError("workers must be positive")
    thr_list = [params.delta_threshold]
    for t in thresholds or ():
        if not 0.0 < t <= math.pi:
            raise ValueError(f"thresholds must lie in (0, pi], got {t!r}")
        if t not in thr_list:
            thr_list.append(t)
    thr_arr = np.array(thr_list)

    phi0 = _initial_phase(params, seed)
    offsets = _chunk_offsets(model, n_windows, seed, phi0)
    bounds = _chunk_bounds(n_windows)
    tasks = [
        (params, model, seed, k, m, offsets[k], thr_arr, mean_ref_counts)
        for k, (_start, m) in enumerate(bounds)
    ]

    if workers == 1:
        results = map(_chunk_tallies, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_chunk_tallies, tasks, chunksize=max(1, len(tasks) // (4 * workers)))

    sent_total = np.zeros(4, dtype=np.int64)
    eff_total = 0
    n_thr = len(thr_list)
    acc_sel = np.zeros((n_thr, 4), dtype=np.int64)
    acc_tt = np.zeros((n_thr, 4), dtype=np.int64)
    acc_det_tt = np.zeros((n_thr, 8), dtype=np.int64)
    acc_det_ss = np.zeros((n_thr, 8), dtype=np.int64)
    for _k, chunk_sent, chunk_eff, (sel, tt, dtt, dss) in results:
        sent_total += chunk_sent
        eff_total += chunk_eff
        acc_sel += sel
        acc_tt += tt
        acc_det_tt += dtt
        acc_det_ss += dss
    if workers > 1:
        pool.shutdown()

    by_threshold = {}
    for j, thr in enumerate(thr_list):
        t = _empty_tallies(n_windows, thr)
        for i, s in enumerate(STATE_LABELS):
            t.sent[s] = int(sent_total[i])
            t.sent_selected[s] = int(acc_sel[j, i])
            t.sent_test[s] = int(acc_tt[j, i])
            t.sent_key[s] = int(acc_sel[j, i] - acc_tt[j, i])
            for ch in (0, 1):
                t.detected_test[(s, ch)] = int(acc_det_tt[j, 2 * i + ch])
                t.detected_key[(s, ch)] = int(acc_det_ss[j, 2 * i + ch])
        t.effective_windows = eff_total
        t.check_conservation()
        by_threshold[thr] = t
    return SimulationResult(
        params=params,
        model=model,
        n_windows=n_windows,
        seed=seed,
        tallies=by_threshold[params.delta_threshold],
        by_threshold=by_threshold,
    )


def iter_windows(
    params: ProtocolParams,
    model: ChannelModel,
    n_windows: int,
    seed: int,
    mean_ref_counts: float = phasetrack.DEFAULT_MEAN_REF_COUNTS,
) -> Iterator[WindowRecord]:
    """Yield the per-window outcomes of a session, one record at a time.

    Uses the same chunk streams as :func:`simulate_session`, so for equal
    arguments the records reproduce exactly the windows that the aggregate
    tallies count.  Intended for inspection and small sessions; the
    aggregate path is the fast one.
    """
    n_windows = int(n_windows)
    if n_windows < 1:
        raise ValueError("n_windows must be positive")
    phi0 = _initial_phase(params, seed)
    offsets = _chunk_offsets(model, n_windows, seed, phi0)
    for k, (start, m) in enumerate(_chunk_bounds(n_windows)):
        phases, alice, bob, est, click_left, click_right, _is_test = _chunk_arrays(
            params, model, seed, k, m, offsets[k], mean_ref_counts
        )
        for i in range(m):
            yield WindowRecord(
                index=start + i,
                alice_sent=bool(alice[i]),
                bob_sent=bool(bob[i]),
                true_phase=float(phases[i]),
                estimated_phase=float(est[i]),
                click_left=bool(click_left[i]),
                click_right=bool(click_right[i]),
            )


# ---------------------------------------------------------------------------
# Expected-value model
# ---------------------------------------------------------------------------

_QUAD_NODES = 64


def _effective_probs_both_send(
    params: ProtocolParams, model: ChannelModel, lo: float, hi: float
):
    """Mean effective-click probabilities per channel for both-send windows,
    averaged over a phase difference uniform on [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(_QUAD_NODES)
    delta = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weight = w / w.sum()
    p_left, p_right = click_probabilities(params, model, True, True, delta)
    p_ch0 = float(np.sum(weight * p_left * (1.0 - p_right)))
    p_ch1 = float(np.sum(weight * p_right * (1.0 - p_left)))
    return p_ch0, p_ch1


def expected_tallies(
    params: ProtocolParams,
    model: ChannelModel,
    n_windows: float,
    thresholds: Sequence[float] | None = None,
) -> dict:
    """Expected-value tallies of a session, keyed by threshold.

    Treats the estimated phase as uniformly distributed (its marginal under
    the random-walk model with uniform start), so a threshold delta keeps
    the fraction delta/pi of windows, and approximates the kept both-send
    windows' phase difference as uniform on [-delta, delta].  Estimation
    noise is not folded in; the visibility parameter absorbs it when the
    model is calibrated against measured data.  Single-send and vacuum
    windows have phase-independent click statistics, so for them the
    expectation is exact.

    Returns ``{threshold: SessionTallies}`` with float-valued cells,
    covering ``params.delta_threshold`` and any extra ``thresholds``.
    """
    if n_windows <= 0:
        raise ValueError("n_windows must be positive")
    thr_list = [params.delta_threshold]
    for t in thresholds or ():
        if not 0.0 < t <= math.pi:
            raise ValueError(f"thresholds must lie in (0, pi], got {t!r}")
        if t not in thr_list:
            thr_list.append(t)

    eps = params.epsilon
    priors = {
        "00": (1.0 - eps) ** 2,
        "01": (1.0 - eps) * eps,
        "10": eps * (1.0 - eps),
        "11": eps * eps,
    }
    single = {}
    for s, (a_sent, b_sent) in (("00", (False, False)), ("01", (False, True)), ("10", (True, False))):
        p_left, p_right = click_probabilities(params, model, a_sent, b_sent, 0.0)
        single[s] = (p_left * (1.0 - p_right), p_right * (1.0 - p_left))
    p11_full = _effective_probs_both_send(params, model, 0.0, math.pi)

    out = {}
    for thr in thr_list:
        keep = thr / math.pi
        p_eff = dict(single)
        p_eff["11"] = _effective_probs_both_send(params, model, 0.0, thr)
        t = _empty_tallies(float(n_windows), thr)
        for s in STATE_LABELS:
            base = n_windows * priors[s]
            t.sent[s] = base
            t.sent_selected[s] = base * keep
            t.sent_test[s] = base * keep * params.p_t
            t.sent_key[s] = base * keep * (1.0 - params.p_t)
            for ch in (0, 1):
                t.detected_test[(s, ch)] = t.sent_test[s] * p_eff[s][ch]
                t.detected_key[(s, ch)] = t.sent_key[s] * p_eff[s][ch]
        t.effective_windows = n_windows * (
            sum(priors[s] * (single[s][0] + single[s][1]) for s in ("00", "01", "10"))
            + priors["11"] * (p11_full[0] + p11_full[1])
        )
        out[thr] = t
    return out

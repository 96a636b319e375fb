"""Scenario-driven closed-loop simulation of sleep/wake positioning.

A scenario runs one receiver through: initial acquisition and ephemeris
collection, a position fix, a snapshot, a power-off interval, then a wake
in one or both arms:

* estimator arm: frame sync predicted from elapsed RTC counts; a fix is
  available one processing epsilon after bit lock.
* hotstart arm: frame sync waits for a real preamble plus handover word.

Both arms share the same truth, the same receiver clock errors, and the
same epoch-keyed measurement noise, so their outputs differ only through
the frame-sync path. The simulation is event driven and fully deterministic
for a given scenario and seed.

All internal times are seconds relative to the scenario start; week-scale
absolute floats would quantize transmit times at millimeter level. The
receive epoch of a fix is common to every channel, so its coarser precision
is absorbed by the clock-bias unknown.
"""
from __future__ import annotations

import copy
import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import constellation as cst
from . import frame_sync as fs
from . import nav_message as nav
from . import pvt
from . import receiver as rcv
from .constants import (
    BIT_S,
    DEFAULT_PROPAGATION_DELAY_S,
    SPEED_OF_LIGHT_M_S,
    SUBFRAME_S,
    TIC_S,
    TOW_COUNT,
    WEEK_S,
    WORD_S,
)
from .rx_clock import (
    GpsTime,
    ReceiverClockState,
    code_time_at_tic,
    compute_rco,
    to_gps_time,
)


class ScenarioError(ValueError):
    """Scenario configuration is invalid or produces unusable geometry."""


ARM_ESTIMATOR = "estimator"
ARM_HOTSTART = "hotstart"

# Default truth site: mid-latitude, 1.6 km altitude.
_DEFAULT_USER = (-1266643.136, -4727176.539, 4079014.032)


@dataclass(frozen=True)
class ScenarioConfig:
    start_week: int = 100
    start_tow_s: float = 86400.0
    user_pos_ecef: tuple[float, float, float] = _DEFAULT_USER
    user_vel_ecef: tuple[float, float, float] = (0.0, 0.0, 0.0)
    n_sats: int = 8
    satellites: tuple[cst.EphemerisRecord, ...] | None = None
    code_s: float = 0.5
    carrier_s: float = 0.3
    bit_s: float = 0.4
    rtc_nominal_hz: float = 32_000.0
    rtc_ppm: float = 10.0
    clock_bias_s: float = 0.001
    bit_margin_ms: float = 10.0
    off_duration_s: float = 900.0
    noise_sigma_m: float = 5.0
    arms: str = "both"
    seed: int = 1
    sample_period_s: float = 1.0
    wake_run_s: float = 10.0
    session1_extra_s: float = 3.0
    estimator_epsilon_s: float = 0.0
    snapshot_path: str | None = None
    min_elevation_deg: float = 5.0
    condition_cap: float = 1e8
    estimation_mode: fs.EstimationMode = fs.EstimationMode.EXACT

    def validate(self) -> None:
        if self.arms not in (ARM_ESTIMATOR, ARM_HOTSTART, "both"):
            raise ScenarioError(f"unknown arms selection {self.arms!r}")
        if self.off_duration_s < 0:
            raise ScenarioError("off_duration_s must be non-negative")
        if self.noise_sigma_m < 0:
            raise ScenarioError("noise_sigma_m must be non-negative")
        if self.sample_period_s <= 0:
            raise ScenarioError("sample_period_s must be positive")
        if min(self.code_s, self.carrier_s, self.bit_s) < 0:
            raise ScenarioError("lock latencies must be non-negative")
        if self.rtc_nominal_hz <= 0:
            raise ScenarioError("rtc_nominal_hz must be positive")
        if self.rtc_ppm < 0:
            raise ScenarioError("rtc_ppm must be non-negative")
        if self.bit_margin_ms <= 0:
            raise ScenarioError("bit_margin_ms must be positive")
        if self.wake_run_s < self.sample_period_s:
            raise ScenarioError("wake_run_s shorter than one sample period")
        if not 0 <= self.start_tow_s < WEEK_S:
            raise ScenarioError("start_tow_s must lie within one week")
        if self.satellites is None and not 4 <= self.n_sats <= 32:
            raise ScenarioError("n_sats must be in 4..32")
        if self.estimator_epsilon_s < 0:
            raise ScenarioError("estimator_epsilon_s must be non-negative")


@dataclass(frozen=True)
class Sample:
    t_s: float
    fix_valid: bool
    err_east_m: float
    err_north_m: float
    err_2d_m: float


@dataclass(frozen=True)
class FixRecord:
    t_since_wake_s: float
    err_east_m: float
    err_north_m: float
    err_2d_m: float
    b_u_m: float
    iterations: int
    converged: bool


@dataclass
class ArmReport:
    arm: str
    time_to_first_fix_s: float
    samples: list[Sample]
    fixes: list[FixRecord]
    rms_2d_m: float
    power_ratio: float
    used_estimate: bool
    hotstart_delay_s: float | None = None


@dataclass
class RunReport:
    arms: dict[str, ArmReport]
    diagnostics: dict[str, float] = field(default_factory=dict)


def power_savings_ratio(off_duration_s: float, on_duration_s: float) -> float:
    """Duty-cycle power fraction: on time over total cycle time."""
    if on_duration_s <= 0:
        raise ValueError("on_duration_s must be positive")
    if off_duration_s < 0:
        raise ValueError("off_duration_s must be non-negative")
    return on_duration_s / (on_duration_s + off_duration_s)


@dataclass
class _Chan:
    eph_true: cst.EphemerisRecord
    eph_rx: cst.EphemerisRecord | None = None
    lock: rcv.LockState = field(default_factory=rcv.LockState)
    labeled: bool = False
    label_shift_s: float = 0.0
    assumed_delay_s: float | None = None
    payloads: dict[int, bytes] = field(default_factory=dict)

    @property
    def sat_id(self) -> int:
        return self.eph_true.sat_id


@dataclass
class _State:
    """Everything that evolves during a session (cloned per wake arm)."""

    clock: ReceiverClockState
    t_rel: float
    channels: dict[int, _Chan]
    rco: object | None = None
    anchor: int | None = None
    last_known: np.ndarray | None = None
    fixes: list[FixRecord] = field(default_factory=list)


class _Engine:
    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.t0_gps = GpsTime(config.start_week, config.start_tow_s)
        self.t0_abs = self.t0_gps.total_seconds()
        self.user0 = np.array(config.user_pos_ecef, float)
        self.user_vel = np.array(config.user_vel_ecef, float)
        if config.satellites is not None:
            self.sats = list(config.satellites)
        else:
            self.sats = cst.default_constellation(
                self.user0, self.t0_abs, config.n_sats
            )
        if len(self.sats) < 4:
            raise ScenarioError("need at least 4 satellites")
        self._mask = math.radians(config.min_elevation_deg)
        self._check_geometry(0.0)
        self.diagnostics: dict[str, float] = {}
        self._rco_trace: list[float] = []

    # --- truth helpers ----------------------------------------------------

    def user_pos(self, t_rel: float) -> np.ndarray:
        return self.user0 + self.user_vel * t_rel

    def tx_rel(self, eph: cst.EphemerisRecord, t_rel: float) -> float:
        """Transmit time (relative seconds) of the signal received at t_rel."""
        user = self.user_pos(t_rel)
        t_tx = t_rel - DEFAULT_PROPAGATION_DELAY_S
        for _ in range(3):
            sat = cst.propagate(eph, self.t0_abs + t_tx).position
            t_tx = t_rel - float(np.linalg.norm(sat - user)) / SPEED_OF_LIGHT_M_S
        return t_tx

    def decomp(self, s_rel: float) -> tuple[int, int, int, int, float]:
        """(subframe_index, tow, word, bit, bit_fraction) of a signal time."""
        s_week = self.config.start_tow_s + s_rel
        k = int(s_week // SUBFRAME_S)
        within = s_week - k * SUBFRAME_S
        word = int(within // WORD_S)
        in_word = within - word * WORD_S
        bit = int(in_word // BIT_S)
        frac = (in_word - bit * BIT_S) / BIT_S
        return k, (k + 1) % TOW_COUNT, word + 1, min(bit, 29), min(frac, 1.0 - 1e-12)

    def visible(self, ch: _Chan, t_rel: float) -> bool:
        sat = cst.propagate(ch.eph_true, self.t0_abs + t_rel).position
        return cst.elevation_angle(sat, self.user_pos(t_rel)) >= self._mask

    def _check_geometry(self, t_rel: float) -> None:
        user = self.user_pos(t_rel)
        up = [
            cst.propagate(e, self.t0_abs + t_rel).position
            for e in self.sats
            if cst.elevation_angle(
                cst.propagate(e, self.t0_abs + t_rel).position, user
            )
            >= self._mask
        ]
        if len(up) < 4:
            raise ScenarioError(
                f"only {len(up)} satellites visible at t={t_rel:.0f} s"
            )
        jac = pvt.design_matrix(user, np.array(up))
        if np.linalg.cond(jac) > self.config.condition_cap:
            raise ScenarioError("degenerate satellite geometry")

    # --- time bookkeeping ---------------------------------------------------

    def _scale(self) -> float:
        return 1.0 + self.config.rtc_ppm * 1e-6

    def t_of_r(self, r: float) -> float:
        """True time at which receiver elapsed time reaches r."""
        return r / self._scale()

    def advance_to_t(self, st: _State, t_rel: float) -> None:
        dt = t_rel - st.t_rel
        if dt < -1e-9:
            raise ScenarioError("event scheduled in the past")
        if dt > 0:
            st.clock.advance(dt)
            st.t_rel += dt

    # --- measurement and fixes ---------------------------------------------

    def _noise(self, st: _State, n: int) -> np.ndarray:
        sigma = self.config.noise_sigma_m
        if sigma == 0:
            return np.zeros(n)
        key = int(round(st.clock.elapsed_rx_s * 1000.0))
        rng = np.random.default_rng((self.config.seed, key))
        return rng.normal(0.0, sigma, n)

    def _refine_rco(self, st: _State) -> None:
        """Recompute the clock offset from the anchor channel's counters."""
        ch = st.channels[st.anchor]
        s_bel = self.tx_rel(ch.eph_true, st.t_rel) + ch.label_shift_s
        _, tow, word, bit, frac = self.decomp(s_bel)
        within = (word - 1) * WORD_S + bit * BIT_S + code_time_at_tic(frac)
        sync_tic = st.clock.tic_value + (SUBFRAME_S - within) / TIC_S
        delay = ch.assumed_delay_s
        if delay is None:
            delay = DEFAULT_PROPAGATION_DELAY_S
        st.rco = compute_rco(
            st.clock.zt,
            self.config.start_week,
            sync_tic,
            tow,
            propagation_delay_s=delay,
        )

    def rco_error_s(self, st: _State) -> float:
        """Believed minus true clock offset, precise to float noise."""
        true_offset = (
            st.clock.zt.diff(self.t0_gps) + st.clock.elapsed_rx_s - st.t_rel
        )
        return st.rco.week * WEEK_S + st.rco.second - true_offset

    def _fix(self, st: _State, t_since_wake: float | None, first: bool) -> FixRecord:
        t = st.t_rel
        receive_rx = st.clock.receiver_time()
        receive_gps = to_gps_time(receive_rx, st.rco)
        r_rel = receive_gps.diff(self.t0_gps)

        chans = [
            ch
            for _, ch in sorted(st.channels.items())
            if ch.labeled and ch.eph_rx is not None and self.visible(ch, t)
        ]
        if len(chans) < 4:
            raise ScenarioError("fewer than 4 usable channels at a fix epoch")
        noise = self._noise(st, len(chans))

        meas: list[pvt.PseudorangeMeasurement] = []
        sat_pos = np.empty((len(chans), 3))
        believed_tx: list[float] = []
        for i, (ch, nz) in enumerate(zip(chans, noise)):
            s_bel = self.tx_rel(ch.eph_true, t) + ch.label_shift_s
            believed_tx.append(s_bel)
            rho = SPEED_OF_LIGHT_M_S * (r_rel - s_bel) + nz
            delay = ch.assumed_delay_s
            if first or delay is None:
                delay = DEFAULT_PROPAGATION_DELAY_S
            sat_pos[i] = cst.propagate(ch.eph_rx, self.t0_abs + (r_rel - delay)).position
            meas.append(
                pvt.PseudorangeMeasurement(
                    ch.sat_id, rho, self.t0_gps.add(s_bel), receive_rx
                )
            )

        guess = np.zeros(4)
        if st.last_known is not None:
            guess[:3] = st.last_known
        sol = pvt.solve(
            meas, sat_pos, guess, condition_cap=self.config.condition_cap
        )
        st.last_known = sol.position

        for ch, s_bel in zip(chans, believed_tx):
            sat_at_tx = cst.propagate(ch.eph_rx, self.t0_abs + s_bel).position
            ch.assumed_delay_s = (
                float(np.linalg.norm(sat_at_tx - sol.position)) / SPEED_OF_LIGHT_M_S
            )
        self._refine_rco(st)
        self._rco_trace.append(self.rco_error_s(st))

        truth = self.user_pos(t)
        e, n, _ = pvt.enu_errors(sol.position, truth)
        rec = FixRecord(
            -1.0 if t_since_wake is None else t_since_wake,
            e,
            n,
            math.hypot(e, n),
            sol.b_u,
            sol.iterations,
            sol.converged,
        )
        st.fixes.append(rec)
        return rec

    # --- session one --------------------------------------------------------

    def run_session_one(self) -> tuple[_State, fs.PersistedSnapshot]:
        cfg = self.config
        zt = GpsTime(cfg.start_week, cfg.start_tow_s + cfg.clock_bias_s)
        st = _State(
            clock=ReceiverClockState(
                zt,
                rtc_nominal_hz=cfg.rtc_nominal_hz,
                rtc_ppm_error=cfg.rtc_ppm,
                clock_bias_s=cfg.clock_bias_s,
            ),
            t_rel=0.0,
            channels={e.sat_id: _Chan(e) for e in self.sats},
        )

        latencies = rcv.LockLatencyConfig(cfg.code_s, cfg.carrier_s, cfg.bit_s)
        r_bit = self._run_locks(st, 0.0, latencies)

        heap: list[tuple[float, int, int, str, object]] = []
        seq = 0

        def push(t: float, prio: int, kind: str, data: object = None) -> None:
            nonlocal seq
            heapq.heappush(heap, (t, prio, seq, kind, data))
            seq += 1

        # Conventional frame lock: wait out the modeled preamble delay.
        for sid, ch in sorted(st.channels.items()):
            s = self.tx_rel(ch.eph_true, st.t_rel)
            _, _, word, bit, _ = self.decomp(s)
            delay = rcv.hotstart_frame_lock_delay(word, bit)
            push(self.t_of_r(r_bit + delay), 0, "label", sid)

        first_fix_r: float | None = None
        off_r: float | None = None
        snapshot: fs.PersistedSnapshot | None = None

        while heap:
            t_ev, _, _, kind, data = heapq.heappop(heap)
            self.advance_to_t(st, t_ev)

            if kind == "label":
                ch = st.channels[data]
                ch.lock = ch.lock.step(rcv.LockEvent("preamble", st.clock.elapsed_rx_s))
                ch.labeled = True
                if st.anchor is None:
                    st.anchor = data
                    self._refine_rco(st)
                    self.diagnostics["s1_rco_first_err_s"] = self.rco_error_s(st)
                # The subframe in progress was only partially received; wait
                # for the completion of the first one heard start to finish.
                t_edge, _ = self._next_boundary_t(ch, st.t_rel)
                push(self._next_boundary_t(ch, t_edge)[0], 0, "boundary", data)

            elif kind == "boundary":
                ch = st.channels[data]
                self._deliver_subframe(ch, st.t_rel)
                if ch.eph_rx is None:
                    push(self._next_boundary_t(ch, st.t_rel)[0], 0, "boundary", data)
                if (
                    first_fix_r is None
                    and st.rco is not None
                    and all(c.labeled and c.eph_rx is not None for c in st.channels.values())
                ):
                    first_fix_r = math.floor(st.clock.elapsed_rx_s) + 1.0
                    push(self.t_of_r(first_fix_r), 0, "fix", None)

            elif kind == "fix":
                first = not st.fixes
                self._fix(st, None, first)
                r_now = st.clock.elapsed_rx_s
                if first:
                    off_r = r_now + cfg.session1_extra_s
                    push(self.t_of_r(off_r), 1, "off", None)
                if off_r is not None and r_now + 1.0 < off_r - 1e-9:
                    push(self.t_of_r(r_now + 1.0), 0, "fix", None)

            elif kind == "off":
                snapshot = self._take_snapshot(st)
                break

        if snapshot is None:
            raise ScenarioError("session one never reached a snapshot")
        self.diagnostics["s1_rco_refined_err_s"] = self.rco_error_s(st)
        if len(self._rco_trace) >= 2:
            self.diagnostics["s1_rco_jitter_s"] = max(self._rco_trace) - min(
                self._rco_trace
            )
        return st, snapshot

    def _run_locks(
        self, st: _State, r_start: float, latencies: rcv.LockLatencyConfig
    ) -> float:
        """Advance through code/carrier/bit lock; returns bit-lock time."""
        stages = (
            ("code", r_start + latencies.code_s),
            ("carrier", r_start + latencies.code_s + latencies.carrier_s),
            ("bit", r_start + latencies.total_s),
        )
        for kind, r in stages:
            self.advance_to_t(st, self.t_of_r(r))
            for _, ch in sorted(st.channels.items()):
                ch.lock = ch.lock.step(rcv.LockEvent(kind, st.clock.elapsed_rx_s))
        return r_start + latencies.total_s

    def _next_boundary_t(self, ch: _Chan, t_rel: float) -> tuple[float, int]:
        """True time at which the channel's next subframe boundary arrives.

        The small bias keeps a call made exactly at a boundary from finding
        that same boundary again.
        """
        s = self.tx_rel(ch.eph_true, t_rel)
        k = int((self.config.start_tow_s + s + 1e-6) // SUBFRAME_S) + 1
        target = k * SUBFRAME_S - self.config.start_tow_s
        t = t_rel + (target - s)
        for _ in range(2):
            t += target - self.tx_rel(ch.eph_true, t)
        return t, k - 1

    def _deliver_subframe(self, ch: _Chan, t_rel: float) -> None:
        """Generate, encode, decode and ingest the subframe just completed."""
        s = self.tx_rel(ch.eph_true, t_rel)
        k = int(round((self.config.start_tow_s + s) / SUBFRAME_S)) - 1
        sfid = k % 5 + 1
        payload = b""
        if sfid <= cst.EPHEMERIS_SUBFRAMES:
            payload = cst.pack_ephemeris(ch.eph_true)[sfid - 1]
        sf = nav.build_subframe(
            ch.sat_id,
            sfid,
            (k + 1) % TOW_COUNT,
            self.config.start_week,
            payload,
        )
        decoded = nav.decode_subframe(nav.subframe_bits(sf))
        if decoded.subframe_id <= cst.EPHEMERIS_SUBFRAMES:
            ch.payloads[decoded.subframe_id] = decoded.payload
        if ch.eph_rx is None and len(ch.payloads) == cst.EPHEMERIS_SUBFRAMES:
            ch.eph_rx = cst.unpack_ephemeris(
                decoded.sat_id,
                (ch.payloads[1], ch.payloads[2], ch.payloads[3]),
            )

    def _take_snapshot(self, st: _State) -> fs.PersistedSnapshot:
        ch = st.channels[st.anchor]
        t = st.t_rel
        s = self.tx_rel(ch.eph_true, t) + ch.label_shift_s
        _, tow, word, bit, frac = self.decomp(s)
        cursor = nav.BitstreamCursor(word, bit, tow)
        # Latch the RTC count at the edge of the bit in progress so the
        # stored counter pair is coherent; the fraction since that edge
        # would otherwise bias every estimate by up to one bit.
        edge_rx_s = st.clock.elapsed_rx_s - frac * BIT_S * self._scale()
        rtc_edge = int(math.floor(edge_rx_s * self.config.rtc_nominal_hz + 1e-9))
        sat = cst.propagate(ch.eph_true, self.t0_abs + s)
        tracking = fs.TrackingStatus(
            bit_locked=True,
            carrier_doppler_hz=cst.carrier_doppler(
                sat, self.user_pos(t), self.user_vel
            ),
            code_phase_chips=cst.code_phase_chips(self.config.start_tow_s + s),
            have_fix=st.last_known is not None,
        )
        eph_ids = tuple(
            (c.eph_rx.sat_id, c.eph_rx.epoch)
            for _, c in sorted(st.channels.items())
            if c.eph_rx is not None
        )
        snapshot = fs.take_snapshot(
            cursor, st.clock, tracking, st.rco, eph_ids, rtc_count=rtc_edge
        )
        if self.config.snapshot_path:
            fs.save_snapshot(snapshot, self.config.snapshot_path)
        return snapshot

    # --- wake sessions --------------------------------------------------------

    def run_wake(
        self, base: _State, snapshot: fs.PersistedSnapshot, arm: str
    ) -> ArmReport:
        cfg = self.config
        st = _State(
            clock=copy.deepcopy(base.clock),
            t_rel=base.t_rel,
            channels={
                sid: _Chan(c.eph_true, c.eph_rx)
                for sid, c in base.channels.items()
            },
            rco=snapshot.rco,
            anchor=base.anchor,
            last_known=None if base.last_known is None else base.last_known.copy(),
        )
        self._check_geometry(st.t_rel)

        r_wake = st.clock.elapsed_rx_s

        heap: list[tuple[float, int, int, str, object]] = []
        seq = 0

        def push(t: float, prio: int, kind: str, data: object = None) -> None:
            nonlocal seq
            heapq.heappush(heap, (t, prio, seq, kind, data))
            seq += 1

        push(self.t_of_r(r_wake + cfg.code_s), 0, "lock", "code")
        push(self.t_of_r(r_wake + cfg.code_s + cfg.carrier_s), 0, "lock", "carrier")
        push(self.t_of_r(r_wake + cfg.code_s + cfg.carrier_s + cfg.bit_s), 0, "lock", "bit")
        n_samples = int(round(cfg.wake_run_s / cfg.sample_period_s))
        for k in range(n_samples + 1):
            push(self.t_of_r(r_wake + k * cfg.sample_period_s), 3, "sample", k)

        used_estimate = False
        label_shift_bits = 0
        hotstart_delay: float | None = None
        labeled_count = 0
        samples: list[Sample] = []
        ttff: float | None = None

        while heap:
            t_ev, _, _, kind, data = heapq.heappop(heap)
            self.advance_to_t(st, t_ev)
            r_now = st.clock.elapsed_rx_s

            if kind == "lock":
                for _, ch in sorted(st.channels.items()):
                    ch.lock = ch.lock.step(rcv.LockEvent(data, r_now))
                if data != "bit":
                    continue
                if arm == ARM_ESTIMATOR:
                    snap = self._load_snapshot_maybe(snapshot)
                    if snap is not None:
                        used_estimate, label_shift_bits = self._try_estimate(st, snap)
                if used_estimate:
                    labeled_count = len(st.channels)
                    push(
                        self.t_of_r(r_now + cfg.estimator_epsilon_s),
                        1,
                        "first_fix",
                        None,
                    )
                else:
                    delays = []
                    for sid, ch in sorted(st.channels.items()):
                        s = self.tx_rel(ch.eph_true, st.t_rel)
                        _, _, word, bit, _ = self.decomp(s)
                        d = rcv.hotstart_frame_lock_delay(word, bit)
                        delays.append(d)
                        push(self.t_of_r(r_now + d), 1, "label", sid)
                    hotstart_delay = sorted(delays)[3]

            elif kind == "label":
                ch = st.channels[data]
                ch.lock = ch.lock.step(rcv.LockEvent("preamble", r_now))
                ch.labeled = True
                labeled_count += 1
                if labeled_count == 1:
                    st.anchor = data
                if labeled_count == 4:
                    self._refine_rco(st)
                    push(t_ev, 1, "first_fix", None)

            elif kind == "first_fix":
                self._fix(st, r_now - r_wake, first=True)
                ttff = r_now - r_wake
                k_next = math.floor((r_now - r_wake) / cfg.sample_period_s) + 1
                if k_next <= n_samples:
                    push(
                        self.t_of_r(r_wake + k_next * cfg.sample_period_s),
                        2,
                        "fix",
                        k_next,
                    )

            elif kind == "fix":
                self._fix(st, r_now - r_wake, first=False)
                if data + 1 <= n_samples:
                    push(
                        self.t_of_r(r_wake + (data + 1) * cfg.sample_period_s),
                        2,
                        "fix",
                        data + 1,
                    )

            elif kind == "sample":
                truth = self.user_pos(st.t_rel)
                if st.last_known is not None:
                    e, n, _ = pvt.enu_errors(st.last_known, truth)
                else:
                    e = n = float("nan")
                samples.append(
                    Sample(
                        data * cfg.sample_period_s,
                        bool(st.fixes),
                        e,
                        n,
                        math.hypot(e, n),
                    )
                )

        if ttff is None:
            raise ScenarioError("wake session produced no fix inside wake_run_s")
        valid_errors = [s.err_2d_m for s in samples if s.fix_valid]
        report = ArmReport(
            arm=arm,
            time_to_first_fix_s=ttff,
            samples=samples,
            fixes=st.fixes,
            rms_2d_m=pvt.rms_2d(valid_errors) if valid_errors else float("nan"),
            power_ratio=power_savings_ratio(
                cfg.off_duration_s, ttff + cfg.sample_period_s
            ),
            used_estimate=used_estimate,
            hotstart_delay_s=hotstart_delay,
        )
        self.diagnostics[f"{arm}_label_shift_bits"] = float(label_shift_bits)
        self.diagnostics[f"{arm}_used_estimate"] = float(used_estimate)
        self.diagnostics[f"{arm}_rco_refined_err_s"] = self.rco_error_s(st)
        return report

    def _load_snapshot_maybe(
        self, in_memory: fs.PersistedSnapshot
    ) -> fs.PersistedSnapshot | None:
        """Reload the snapshot from disk when persistence is configured."""
        if not self.config.snapshot_path:
            return in_memory
        try:
            return fs.load_snapshot(self.config.snapshot_path)
        except (fs.SnapshotFormatError, OSError):
            return None

    def _try_estimate(
        self, st: _State, snap: fs.PersistedSnapshot
    ) -> tuple[bool, int]:
        """Run the acceptance gate and, if it passes, label every channel."""
        cfg = self.config
        rtc_now = st.clock.rtc_count
        elapsed_ms = fs.elapsed_ms_from_rtc(rtc_now, snap.rtc_count, cfg.rtc_nominal_hz)
        budget = fs.drift_budget(cfg.rtc_ppm, cfg.bit_margin_ms)
        if elapsed_ms > budget:
            return False, 0
        t_abs_now = self.t0_abs + st.t_rel
        for ch in st.channels.values():
            eph = ch.eph_rx
            if eph is None or abs(t_abs_now - eph.epoch) > eph.validity:
                return False, 0

        est = fs.estimate_frame_state(
            snap,
            rtc_now,
            cfg.rtc_nominal_hz,
            mode=cfg.estimation_mode,
            current_tic=st.clock.tic_value,
        )
        est_week_s = (
            (est.tow - 1) % TOW_COUNT * SUBFRAME_S
            + (est.word_index - 1) * WORD_S
            + est.bit_index * BIT_S
            + est.residual_ms / 1000.0
        )
        anchor = st.channels[st.anchor]
        true_week_s = self.config.start_tow_s + self.tx_rel(anchor.eph_true, st.t_rel)
        n_err = round((est_week_s - true_week_s) / BIT_S)
        shift = n_err * BIT_S
        r_now = st.clock.elapsed_rx_s
        for _, ch in sorted(st.channels.items()):
            ch.lock = ch.lock.step(rcv.LockEvent("estimate", r_now))
            ch.labeled = True
            ch.label_shift_s = shift
        # The estimate stands in for a decoded handover word, so the clock
        # offset is rebuilt from its sync TIC with the flat assumed delay.
        st.rco = compute_rco(
            st.clock.zt, self.config.start_week, est.sync_tic, est.tow
        )
        return True, n_err


def run_scenario(config: ScenarioConfig) -> RunReport:
    """Run session one, the power-off, and the configured wake arms."""
    engine = _Engine(config)
    base, snapshot = engine.run_session_one()
    if config.off_duration_s > 0:
        base.clock.advance(config.off_duration_s)
        base.t_rel += config.off_duration_s

    arms = (
        (ARM_ESTIMATOR, ARM_HOTSTART)
        if config.arms == "both"
        else (config.arms,)
    )
    report = RunReport(arms={})
    for arm in arms:
        report.arms[arm] = engine.run_wake(base, snapshot, arm)
    report.diagnostics = dict(engine.diagnostics)
    return report


# --- scenario text format ----------------------------------------------------
# Line-oriented key/value text with [section] headers. '#' starts a comment.
# Sections and keys:
#   [scenario] seed, arms, off_duration_s, noise_sigma_m, wake_run_s,
#              sample_period_s, session1_extra_s, estimator_epsilon_s,
#              snapshot_path, start_week, start_tow_s
#   [user]    pos_ecef_m = x y z ; vel_ecef_mps = x y z
#   [clock]   rtc_nominal_hz, rtc_ppm, clock_bias_s, bit_margin_ms
#   [locks]   code_s, carrier_s, bit_s
#   [constellation] count = n  (default constellation)
#                   sat = id incl_deg raan_deg phase_deg [radius_m [validity_s]]
# 'sat' may repeat; explicit satellites override 'count'.

_SCALAR_KEYS = {
    ("scenario", "seed"): ("seed", int),
    ("scenario", "arms"): ("arms", str),
    ("scenario", "off_duration_s"): ("off_duration_s", float),
    ("scenario", "noise_sigma_m"): ("noise_sigma_m", float),
    ("scenario", "wake_run_s"): ("wake_run_s", float),
    ("scenario", "sample_period_s"): ("sample_period_s", float),
    ("scenario", "session1_extra_s"): ("session1_extra_s", float),
    ("scenario", "estimator_epsilon_s"): ("estimator_epsilon_s", float),
    ("scenario", "snapshot_path"): ("snapshot_path", str),
    ("scenario", "start_week"): ("start_week", int),
    ("scenario", "start_tow_s"): ("start_tow_s", float),
    ("scenario", "min_elevation_deg"): ("min_elevation_deg", float),
    ("clock", "rtc_nominal_hz"): ("rtc_nominal_hz", float),
    ("clock", "rtc_ppm"): ("rtc_ppm", float),
    ("clock", "clock_bias_s"): ("clock_bias_s", float),
    ("clock", "bit_margin_ms"): ("bit_margin_ms", float),
    ("locks", "code_s"): ("code_s", float),
    ("locks", "carrier_s"): ("carrier_s", float),
    ("locks", "bit_s"): ("bit_s", float),
    ("constellation", "count"): ("n_sats", int),
}


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse the scenario text format into a validated ScenarioConfig."""
    fields: dict[str, object] = {}
    sats: list[tuple[float, ...]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("scenario", "user", "clock", "locks", "constellation"):
                raise ScenarioError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value")
        if section is None:
            raise ScenarioError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        try:
            if section == "user" and key in ("pos_ecef_m", "vel_ecef_mps"):
                vec = tuple(float(v) for v in value.split())
                if len(vec) != 3:
                    raise ValueError("expected 3 components")
                fields["user_pos_ecef" if key == "pos_ecef_m" else "user_vel_ecef"] = vec
            elif section == "constellation" and key == "sat":
                parts = [float(v) for v in value.split()]
                if not 4 <= len(parts) <= 6:
                    raise ValueError("expected: id incl raan phase [radius [validity]]")
                sats.append(tuple(parts))
            elif (section, key) in _SCALAR_KEYS:
                name, conv = _SCALAR_KEYS[(section, key)]
                fields[name] = conv(value)
            else:
                raise ScenarioError(f"line {lineno}: unknown key {key!r} in [{section}]")
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from exc

    config = ScenarioConfig(**fields)  # type: ignore[arg-type]
    if sats:
        t0 = GpsTime(config.start_week, config.start_tow_s).total_seconds()
        records = tuple(
            cst.EphemerisRecord(
                int(p[0]),
                math.radians(p[1]),
                math.radians(p[2]),
                phase_at_epoch=math.radians(p[3]),
                epoch=t0,
                orbit_radius=p[4] if len(p) > 4 else cst.GPS_ORBIT_RADIUS_M,
                validity=p[5] if len(p) > 5 else cst.DEFAULT_VALIDITY_S,
            )
            for p in sats
        )
        config = replace(config, satellites=records)
    config.validate()
    return config


def read_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# --- report export -----------------------------------------------------------

CSV_HEADER = "t_s,arm,fix_valid,err_east_m,err_north_m,err_2d_m"


def render_report_csv(report: RunReport) -> str:
    """CSV text: sample rows, then '#'-prefixed per-arm summary lines."""
    lines = [CSV_HEADER]
    for arm in sorted(report.arms):
        for s in report.arms[arm].samples:
            lines.append(
                f"{s.t_s:.3f},{arm},{int(s.fix_valid)},"
                f"{s.err_east_m:.6f},{s.err_north_m:.6f},{s.err_2d_m:.6f}"
            )
    for arm in sorted(report.arms):
        a = report.arms[arm]
        lines.append(
            f"# arm={arm} time_to_first_fix_s={a.time_to_first_fix_s:.3f} "
            f"rms_2d_m={a.rms_2d_m:.6f} power_ratio={a.power_ratio:.9f} "
            f"used_estimate={int(a.used_estimate)}"
        )
    return "\n".join(lines) + "\n"


def export_report(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_report_csv(report))

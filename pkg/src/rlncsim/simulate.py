"""Deterministic time-slotted single-link simulation.

One packet leaves the source per slot (the source never idles while it has
anything to send), survivors reach the sink t_p = RTT/2 later, and feedback
reaches the source round(RTT/t_s) slots after the transmission it reacts to.
Propagation is folded out of the event loop: a packet transmitted in slot s
is processed at the sink with slot stamp s, and the constant t_p is added
back when delays are reported in milliseconds
(D = (delivery_slot - first_tx_slot) * t_s + t_p).  Ordering is unaffected
because every packet is shifted by the same offset.

Schemes: ``generation`` (Algorithm-1-style emission with per-generation
feedback and repair in reliable mode), ``sliding-window`` (Algorithm-2-style
emission; no feedback until the end-of-stream flush), and ``arq`` (idealized
selective repeat: every loss is discovered exactly one feedback delay after
the transmission and retransmitted in the next free slot).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .channel import GilbertChannel, LosslessChannel, derive_params
from .coding import (CODED, UNCODED, GenerationEncoder, SlidingWindowEncoder,
                     StreamDecoder, generation_span, redundancy_ratio)
from .gf import GF

SCHEMES = ("generation", "sliding-window", "arq")
MODES = ("reliable", "unreliable")


class ConfigError(ValueError):
    """Invalid or rejected simulation/experiment configuration."""


class ContractError(RuntimeError):
    """A runtime contract of the simulation was violated."""


@dataclass
class SimConfig:
    scheme: str
    mode: str = "reliable"
    R: float = 1.25
    k: int = 16
    stream_len: int = 1000
    slot_ms: float = 1.2
    rtt_ms: float = 200.0
    pi_b: float = 0.05
    mean_burst: float = 1.0
    q: int = 8
    seed: int = 0
    reps: int = 1                      # used by the sweep layer, not per run
    payload_len: int = 1
    loss_script: frozenset | None = None   # slots forced lost (overrides channel)
    max_slots: int | None = None

    @property
    def t_p_ms(self) -> float:
        return self.rtt_ms / 2.0

    @property
    def fb_delay_slots(self) -> int:
        return max(1, round(self.rtt_ms / self.slot_ms))

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scheme == "arq" and self.mode != "reliable":
            raise ConfigError("arq supports reliable mode only")
        if self.R < 1:
            raise ConfigError(f"R must be >= 1, got {self.R}")
        if self.scheme == "generation" and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.stream_len < 1:
            raise ConfigError(f"stream_len must be >= 1, got {self.stream_len}")
        if self.slot_ms <= 0:
            raise ConfigError(f"slot_ms must be positive, got {self.slot_ms}")
        if self.rtt_ms < 0:
            raise ConfigError(f"rtt_ms must be non-negative, got {self.rtt_ms}")
        if not 0.0 <= self.pi_b < 1.0:
            raise ConfigError(f"pi_b must be in [0, 1), got {self.pi_b}")
        if self.mean_burst < 1.0:
            raise ConfigError(f"mean_burst must be >= 1, got {self.mean_burst}")
        if self.q not in (1, 4, 8):
            raise ConfigError(f"q must be one of 1, 4, 8, got {self.q}")
        if self.payload_len < 1:
            raise ConfigError(f"payload_len must be >= 1, got {self.payload_len}")
        if self.scheme == "sliding-window" and self.mode == "reliable":
            capacity = 1.0 / (1.0 - self.pi_b)
            if float(redundancy_ratio(self.R)) <= capacity:
                raise ConfigError(
                    f"reliable sliding-window needs R > 1/(1-pi_b) = {capacity:.6g}; "
                    f"got R = {self.R} (delivery not guaranteed)")


@dataclass
class RunMetrics:
    scheme: str
    mode: str
    seed: int
    dof_needed: int
    delay_samples: list = field(default_factory=list)   # (packet_index, delay_ms)
    delivered_count: int = 0
    erased_count: int = 0
    erased_indices: list = field(default_factory=list)
    sink_received_count: int = 0
    retransmission_count: int = 0
    duration_slots: int = 0
    degraded_no_redundancy: bool = False
    tx_counts: list | None = None       # per-packet transmissions (arq only)


class _Link:
    """Per-run state shared by the scheme loops: rngs, channel, stream."""

    def __init__(self, cfg: SimConfig):
        master = random.Random(cfg.seed)
        channel_seed = master.randrange(2 ** 63)
        coeff_seed = master.randrange(2 ** 63)
        payload_seed = master.randrange(2 ** 63)
        self.gf = GF(cfg.q)
        self.coeff_rng = np.random.default_rng(coeff_seed)
        self.payloads = np.random.default_rng(payload_seed).integers(
            0, self.gf.order, size=(cfg.stream_len, cfg.payload_len),
            dtype=np.int64).astype(np.uint8)
        if cfg.pi_b == 0.0:
            self.channel = LosslessChannel()
        else:
            self.channel = GilbertChannel(derive_params(cfg.pi_b, cfg.mean_burst),
                                          random.Random(channel_seed))
        self.script = cfg.loss_script

    def lost(self, slot: int) -> bool:
        erased = self.channel.step()
        if self.script is not None:
            return slot in self.script
        return erased


def _max_slots(cfg: SimConfig) -> int:
    if cfg.max_slots is not None:
        return cfg.max_slots
    return 10_000 + cfg.stream_len * 50 + cfg.fb_delay_slots * 500


def run_simulation(cfg: SimConfig) -> RunMetrics:
    """Execute one seeded run and collect its metrics."""
    cfg.validate()
    if cfg.scheme == "arq":
        return arq_baseline(cfg)
    if cfg.scheme == "generation":
        return _run_generation(cfg)
    return _run_sliding_window(cfg)


def unreliable_session(cfg: SimConfig) -> RunMetrics:
    """Convenience entry point for unreliable-mode runs."""
    if cfg.mode != "unreliable":
        raise ConfigError("unreliable_session requires mode='unreliable'")
    return run_simulation(cfg)


def _record(metrics: RunMetrics, events, first_tx, cfg: SimConfig) -> None:
    for ev in events:
        delay = (ev.delivery_slot - first_tx[ev.packet_index - 1]) * cfg.slot_ms \
            + cfg.t_p_ms
        metrics.delay_samples.append((ev.packet_index, delay))
        metrics.delivered_count += 1


def generation_feedback(decoder: StreamDecoder, generation_id: int, k: int,
                        total: int) -> tuple[int, int]:
    """(generation_id, dof deficit) once a generation's round has fully arrived.

    A zero deficit means the generation decoded; a positive deficit asks the
    source for that many more coded packets.  The tail generation is judged
    against its actual span, not the nominal k.
    """
    w_l, w_u = generation_span(generation_id, k, total)
    deficit = (w_u - w_l + 1) - decoder.dofs_in_span(w_l, w_u)
    return generation_id, deficit


def _run_generation(cfg: SimConfig) -> RunMetrics:
    link = _Link(cfg)
    total = cfg.stream_len
    encoder = GenerationEncoder(link.gf, link.payloads, cfg.k, cfg.R, link.coeff_rng)
    decoder = StreamDecoder(link.gf, total, cfg.payload_len)
    metrics = RunMetrics(cfg.scheme, cfg.mode, cfg.seed, total)
    reliable = cfg.mode == "reliable"
    first_tx = [0] * total
    feedback_due: dict[int, list] = {}
    round_no: dict[int, int] = {}
    flushed = 0
    fb_delay = cfg.fb_delay_slots
    limit = _max_slots(cfg)

    slot = 0
    while True:
        if reliable:
            for gen_id, rnd, deficit in feedback_due.pop(slot, ()):
                if deficit > 0:
                    encoder.handle_feedback(gen_id, deficit, message_id=(gen_id, rnd))
        emission = encoder.next_emission()
        lost = link.lost(slot)
        if emission is not None:
            if emission.info_index is not None:
                first_tx[emission.info_index - 1] = slot
            if not lost:
                metrics.sink_received_count += 1
                _record(metrics, decoder.ingest(emission.packet, slot), first_tx, cfg)
            if emission.round_complete:
                gen_id = emission.generation_id
                if reliable:
                    _, deficit = generation_feedback(decoder, gen_id, cfg.k, total)
                    rnd = round_no.get(gen_id, 0)
                    round_no[gen_id] = rnd + 1
                    feedback_due.setdefault(slot + fb_delay, []).append(
                        (gen_id, rnd, deficit))
                else:
                    w_l, w_u = generation_span(gen_id, cfg.k, total)
                    events, erased = decoder.flush_generation(w_l, w_u, slot)
                    _record(metrics, events, first_tx, cfg)
                    metrics.erased_count += len(erased)
                    metrics.erased_indices.extend(erased)
                    flushed += 1
        slot += 1
        if reliable and metrics.delivered_count == total:
            break
        if not reliable and flushed == encoder.n_generations:
            break
        if slot > limit:
            raise ContractError(f"generation run exceeded {limit} slots")
    metrics.retransmission_count = encoder.retransmissions_sent
    metrics.duration_slots = slot
    return metrics


def _run_sliding_window(cfg: SimConfig) -> RunMetrics:
    link = _Link(cfg)
    gf = link.gf
    total = cfg.stream_len
    encoder = SlidingWindowEncoder(gf, link.payloads, cfg.R, link.coeff_rng)
    decoder = StreamDecoder(gf, total, cfg.payload_len)
    metrics = RunMetrics(cfg.scheme, cfg.mode, cfg.seed, total,
                         degraded_no_redundancy=encoder.no_redundancy)
    reliable = cfg.mode == "reliable"
    first_tx = [0] * total
    limit = _max_slots(cfg)
    mul = gf.mul_table
    trailing_coded_left = 0 if encoder.no_redundancy else 1

    slot = 0
    while True:
        if reliable:
            action = encoder.next_action()
        else:
            if not encoder.exhausted():
                action = encoder.next_action()
            elif trailing_coded_left:
                trailing_coded_left -= 1
                action = (CODED, total)
            else:
                break
        if not link.lost(slot):
            metrics.sink_received_count += 1
            kind, value = action
            if kind == UNCODED:
                first_tx[value - 1] = slot
                _record(metrics,
                        decoder.ingest_row(value, np.ones(1, dtype=np.uint8),
                                           link.payloads[value - 1], slot),
                        first_tx, cfg)
            else:
                # Coefficients below the undelivered window would be
                # substituted away immediately, so draw the row directly on
                # [window_origin, span_end]; the distribution is unchanged.
                origin = decoder.window_origin
                if origin <= value:
                    span = value - origin + 1
                    coeffs = link.coeff_rng.integers(
                        0, gf.order, size=span, dtype=np.int64).astype(np.uint8)
                    if coeffs.any():
                        block = link.payloads[origin - 1:value]
                        payload = np.bitwise_xor.reduce(
                            mul[coeffs[:, None], block], axis=0)
                        _record(metrics,
                                decoder.ingest_row(origin, coeffs, payload, slot),
                                first_tx, cfg)
        elif action[0] == UNCODED:
            first_tx[action[1] - 1] = slot
        slot += 1
        if reliable and metrics.delivered_count == total:
            break
        if slot > limit:
            raise ContractError(f"sliding-window run exceeded {limit} slots")
    if not reliable:
        undelivered = [i for i in range(1, total + 1)
                       if i not in decoder.delivered_payload]
        metrics.erased_count = len(undelivered)
        metrics.erased_indices = undelivered
    metrics.duration_slots = slot
    return metrics


def arq_baseline(cfg: SimConfig) -> RunMetrics:
    """Idealized selective-repeat ARQ: per-slot feedback, no timeouts, no window."""
    cfg.validate()
    if cfg.scheme != "arq":
        raise ConfigError("arq_baseline requires scheme='arq'")
    link = _Link(cfg)
    total = cfg.stream_len
    metrics = RunMetrics(cfg.scheme, cfg.mode, cfg.seed, total)
    first_tx = [0] * total
    tx_counts = [0] * total
    outcome_due: dict[int, list] = {}
    pending: deque[int] = deque()
    next_new = 1
    delivered_through = 0
    buffer: set[int] = set()
    fb_delay = cfg.fb_delay_slots
    limit = _max_slots(cfg)

    slot = 0
    while delivered_through < total:
        for idx, was_lost in outcome_due.pop(slot, ()):
            if was_lost:
                pending.append(idx)
        idx = None
        if pending:
            idx = pending.popleft()
            metrics.retransmission_count += 1
        elif next_new <= total:
            idx = next_new
            next_new += 1
            first_tx[idx - 1] = slot
        lost = link.lost(slot)
        if idx is not None:
            tx_counts[idx - 1] += 1
            outcome_due.setdefault(slot + fb_delay, []).append((idx, lost))
            if not lost:
                metrics.sink_received_count += 1
                if idx == delivered_through + 1:
                    delivered_through += 1
                    released = [idx]
                    while delivered_through + 1 in buffer:
                        delivered_through += 1
                        buffer.remove(delivered_through)
                        released.append(delivered_through)
                    for r in released:
                        delay = (slot - first_tx[r - 1]) * cfg.slot_ms + cfg.t_p_ms
                        metrics.delay_samples.append((r, delay))
                        metrics.delivered_count += 1
                else:
                    buffer.add(idx)
        slot += 1
        if slot > limit:
            raise ContractError(f"arq run exceeded {limit} slots")
    metrics.duration_slots = slot
    metrics.tx_counts = tx_counts
    return metrics

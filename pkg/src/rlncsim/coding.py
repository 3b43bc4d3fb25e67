"""Systematic RLNC encoders and an in-order Gaussian-elimination decoder.

Two encoders are provided:

* ``GenerationEncoder`` partitions the stream into generations of k packets,
  sends each generation uncoded and follows it with ceil(k*(R-1)) coded
  packets drawn over that generation only.  Feedback can enqueue extra coded
  packets for a named generation; those take priority over new generations.

* ``SlidingWindowEncoder`` interleaves coded packets over *all* information
  packets sent so far, one coded packet every n = R/(R-1) transmissions.  R
  is realized exactly for any rational R via an integer phase accumulator,
  so fractional n does not quantize the redundancy.

``StreamDecoder`` keeps the undelivered window in reduced row-echelon form.
Incoming rows are first reduced by already-delivered packets, so the active
matrix is bounded by the undelivered span even when coded packets reach back
to the start of the stream.  Whenever the leading rows of the window become
pure unit rows, the corresponding packets are delivered in order.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gf import GF, CoeffVector

UNCODED = "uncoded"
CODED = "coded"


@dataclass
class InfoPacket:
    index: int                 # 1-based position in the stream
    payload: np.ndarray
    tx_slot: int | None = None


def stack_payloads(packets) -> np.ndarray:
    """Payload matrix for the encoders from a packet list.

    Packets must be indexed 1..n without gaps and share one payload length.
    """
    packets = sorted(packets, key=lambda p: p.index)
    if [p.index for p in packets] != list(range(1, len(packets) + 1)):
        raise ValueError("packet indexes must be contiguous starting at 1")
    lengths = {len(p.payload) for p in packets}
    if len(lengths) != 1:
        raise ValueError("payload length must be constant across the stream")
    return np.stack([np.asarray(p.payload, dtype=np.uint8) for p in packets])


@dataclass
class CodedPacket:
    coeffs: CoeffVector
    payload: np.ndarray
    generation_id: int | None = None
    kind: str = CODED

    @classmethod
    def uncoded(cls, index: int, payload: np.ndarray,
                generation_id: int | None = None) -> "CodedPacket":
        return cls(CoeffVector.unit(index), np.array(payload, dtype=np.uint8),
                   generation_id, UNCODED)

    @property
    def is_uncoded(self) -> bool:
        return self.kind == UNCODED


@dataclass(frozen=True)
class DeliveryEvent:
    packet_index: int
    delivery_slot: int


def redundancy_ratio(R: float) -> Fraction:
    """R as an exact small fraction (1.1 -> 11/10, 1.25 -> 5/4)."""
    if R < 1:
        raise ValueError(f"redundancy R must be >= 1, got {R}")
    return Fraction(R).limit_denominator(1_000_000)


def coded_per_generation(k: int, R: float) -> int:
    """ceil(k*(R-1)) computed exactly in integer arithmetic."""
    r = redundancy_ratio(R)
    num = k * (r.numerator - r.denominator)
    return -(-num // r.denominator)


def generation_span(gen_id: int, k: int, total: int) -> tuple[int, int]:
    """Inclusive packet-index bounds of a generation (tail may be short)."""
    w_l = (gen_id - 1) * k + 1
    w_u = min(gen_id * k, total)
    return w_l, w_u


def random_combination(gf: GF, payloads: np.ndarray, origin: int, end: int,
                       rng, resample_zero: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Fresh uniform coefficients over packets [origin, end] plus the combined payload.

    ``payloads`` is the full (stream_len x payload_len) symbol matrix;
    packet indexes are 1-based.
    """
    span = end - origin + 1
    if span < 1:
        raise ValueError("empty coding span")
    while True:
        coeffs = rng.integers(0, gf.order, size=span, dtype=np.int64).astype(np.uint8)
        if not resample_zero or coeffs.any():
            break
    block = payloads[origin - 1:end]
    payload = np.bitwise_xor.reduce(gf.mul_table[coeffs[:, None], block], axis=0)
    return coeffs, payload


@dataclass
class Emission:
    """One encoder output plus scheduling metadata for the simulator."""

    packet: CodedPacket
    info_index: int | None = None       # set for uncoded emissions
    generation_id: int | None = None
    round_complete: bool = False        # last packet of a generation round
    is_retransmission: bool = False


class GenerationEncoder:
    """Generation-based packet emission with feedback-driven repair."""

    def __init__(self, gf: GF, payloads: np.ndarray, k: int, R: float, rng):
        if k < 1:
            raise ValueError(f"generation size k must be >= 1, got {k}")
        self.gf = gf
        self.payloads = payloads
        self.k = k
        self.R = R
        self.rng = rng
        self.total = len(payloads)
        self.coded_per_gen = coded_per_generation(k, R)
        self.n_generations = math.ceil(self.total / k)
        self._gen = 1
        self._pos = 0        # emissions made within the current generation
        self._retx: deque[list] = deque()   # [generation_id, remaining]
        self._seen_feedback: set = set()
        self.retransmissions_sent = 0

    def handle_feedback(self, generation_id: int, dof_deficit: int,
                        message_id=None) -> None:
        """Enqueue dof_deficit fresh coded packets for a generation.

        Idempotent per message_id; a deficit of zero leaves the state alone.
        """
        if not 1 <= generation_id <= self.n_generations:
            raise ValueError(f"unknown generation id {generation_id}")
        if message_id is not None:
            if message_id in self._seen_feedback:
                return
            self._seen_feedback.add(message_id)
        if dof_deficit > 0:
            self._retx.append([generation_id, dof_deficit])

    def pending_retransmissions(self) -> int:
        return sum(item[1] for item in self._retx)

    def _coded_packet(self, gen_id: int) -> CodedPacket:
        w_l, w_u = generation_span(gen_id, self.k, self.total)
        coeffs, payload = random_combination(self.gf, self.payloads, w_l, w_u, self.rng)
        return CodedPacket(CoeffVector(w_l, coeffs), payload, gen_id, CODED)

    def next_emission(self) -> Emission | None:
        """Next packet to transmit, or None when idle (nothing pending)."""
        if self._retx:
            item = self._retx[0]
            gen_id = item[0]
            item[1] -= 1
            done = item[1] == 0
            if done:
                self._retx.popleft()
            self.retransmissions_sent += 1
            return Emission(self._coded_packet(gen_id), None, gen_id,
                            round_complete=done, is_retransmission=True)
        if self._gen > self.n_generations:
            return None
        gen_id = self._gen
        w_l, w_u = generation_span(gen_id, self.k, self.total)
        span = w_u - w_l + 1
        scheduled = span + self.coded_per_gen
        pos = self._pos
        self._pos += 1
        if self._pos >= scheduled:
            self._gen += 1
            self._pos = 0
        if pos < span:
            idx = w_l + pos
            packet = CodedPacket.uncoded(idx, self.payloads[idx - 1], gen_id)
            return Emission(packet, idx, gen_id, round_complete=(pos + 1 == scheduled))
        packet = self._coded_packet(gen_id)
        return Emission(packet, None, gen_id, round_complete=(pos + 1 == scheduled))


class SlidingWindowEncoder:
    """Sliding-window emission: one coded packet every n = R/(R-1) sends.

    With R = 1 the spacing n is undefined; the encoder degrades to pure
    uncoded emission and raises ``no_redundancy`` so callers can flag the
    configuration.
    """

    def __init__(self, gf: GF, payloads: np.ndarray, R: float, rng):
        self.gf = gf
        self.payloads = payloads
        self.rng = rng
        self.total = len(payloads)
        r = redundancy_ratio(R)
        self.R = R
        self.no_redundancy = r == 1
        if self.no_redundancy:
            self._cnum = 0       # coded packets per _cden transmissions
            self._cden = 1
        else:
            # Over t transmissions exactly floor(t * cnum / cden) are coded,
            # which realizes the redundancy R = cden / (cden - cnum) exactly.
            self._cnum = r.numerator - r.denominator
            self._cden = r.numerator
        self._t = 0          # transmissions made
        self._sent = 0       # information packets sent

    def _coded_due(self) -> bool:
        t = self._t
        return (t + 1) * self._cnum // self._cden > t * self._cnum // self._cden

    def exhausted(self) -> bool:
        return self._sent >= self.total

    def next_action(self) -> tuple[str, int] | None:
        """("uncoded", index) or ("coded", span_end); None for an empty stream.

        After the last information packet every further call yields coded
        packets over the whole stream (the caller decides how many to take).
        """
        if self._sent >= self.total:
            if self._sent == 0:
                return None
            self._t += 1
            return (CODED, self._sent)
        if self._sent > 0 and not self.no_redundancy and self._coded_due():
            self._t += 1
            return (CODED, self._sent)
        self._t += 1
        self._sent += 1
        return (UNCODED, self._sent)

    def materialize(self, action: tuple[str, int]) -> CodedPacket:
        """Turn an action into a full packet with explicit coefficients."""
        kind, value = action
        if kind == UNCODED:
            return CodedPacket.uncoded(value, self.payloads[value - 1])
        coeffs, payload = random_combination(self.gf, self.payloads, 1, value, self.rng)
        return CodedPacket(CoeffVector(1, coeffs), payload, None, CODED)

    def next_packet(self) -> CodedPacket | None:
        action = self.next_action()
        return None if action is None else self.materialize(action)


class _Row:
    """One normalized row of the decoder matrix (leading coefficient 1)."""

    __slots__ = ("origin", "coeffs", "payload")

    def __init__(self, origin: int, coeffs: np.ndarray, payload: np.ndarray):
        self.origin = origin
        self.coeffs = coeffs
        self.payload = payload

    @property
    def end(self) -> int:
        return self.origin + len(self.coeffs)


def _trim(origin: int, coeffs: np.ndarray) -> tuple[int, np.ndarray]:
    nz = np.nonzero(coeffs)[0]
    if len(nz) == 0:
        return origin, coeffs[:0]
    return origin + int(nz[0]), coeffs[int(nz[0]):int(nz[-1]) + 1]


class StreamDecoder:
    """In-order RLNC decoder over a sliding undelivered window.

    The active matrix is held in reduced row-echelon form keyed by pivot
    index.  Incoming rows are reduced by already-delivered packets first, so
    rows never reference anything below ``window_origin``.  Deliveries are
    emitted strictly in index order; ``window_origin`` is the lowest index not
    yet resolved (delivered, or declared erased by a generation flush).
    """

    def __init__(self, gf: GF, total: int, payload_len: int):
        self.gf = gf
        self.total = total
        self.payload_len = payload_len
        self.rows: dict[int, _Row] = {}
        self.window_origin = 1
        self.delivered_through = 0
        self.delivered_payload: dict[int, np.ndarray] = {}
        self.uncoded_seen: dict[int, np.ndarray] = {}
        self.erased_indices: list[int] = []

    @property
    def rank(self) -> int:
        return len(self.rows)

    def dofs_in_span(self, first: int, last: int) -> int:
        """Delivered packets plus independent rows pivoted inside a span."""
        delivered = max(0, min(self.window_origin - 1, last) - first + 1)
        active = sum(1 for p in self.rows if first <= p <= last)
        return delivered + active

    # -- ingest ------------------------------------------------------------

    def ingest(self, pkt: CodedPacket, slot: int) -> list[DeliveryEvent]:
        if pkt.is_uncoded:
            idx = pkt.coeffs.origin
            self.uncoded_seen[idx] = pkt.payload
        return self.ingest_row(pkt.coeffs.origin, pkt.coeffs.coeffs, pkt.payload, slot)

    def ingest_row(self, origin: int, coeffs: np.ndarray, payload: np.ndarray,
                   slot: int) -> list[DeliveryEvent]:
        gf = self.gf
        coeffs = np.array(coeffs, dtype=np.uint8)
        payload = np.array(payload, dtype=np.uint8)
        origin, coeffs = _trim(origin, coeffs)
        if len(coeffs) == 0:
            return []

        # Substitute already-delivered packets out of the row.
        W = self.window_origin
        if origin < W:
            cut = min(len(coeffs), W - origin)
            for j in range(cut):
                c = int(coeffs[j])
                if c:
                    gf.axpy_into(payload, c, self.delivered_payload[origin + j])
            origin, coeffs = _trim(origin + cut, coeffs[cut:])
            if len(coeffs) == 0:
                return []

        # Fast path: a unit row on a fresh pivot needs no elimination.
        if not (len(coeffs) == 1 and origin not in self.rows):
            origin, coeffs = self._eliminate(origin, coeffs, payload)
            if len(coeffs) == 0:
                return []

        lead = int(coeffs[0])
        if lead != 1:
            inv = gf.inv(lead)
            coeffs = gf.scale(inv, coeffs)
            payload = gf.scale(inv, payload)
        row = _Row(origin, coeffs, payload)
        self._reduce_existing(row)
        self.rows[origin] = row
        return self._deliver_ready(slot)

    def _eliminate(self, origin: int, coeffs: np.ndarray,
                   payload: np.ndarray) -> tuple[int, np.ndarray]:
        """Reduce the row against every pivot in its support, left to right."""
        gf = self.gf
        j = 0
        while j < len(coeffs):
            if coeffs[j] == 0:
                j += 1
                continue
            pivot = origin + j
            row = self.rows.get(pivot)
            if row is None:
                j += 1
                continue
            c = int(coeffs[j])
            if row.end > origin + len(coeffs):
                coeffs = np.concatenate(
                    [coeffs, np.zeros(row.end - origin - len(coeffs), dtype=np.uint8)])
            gf.axpy_into(coeffs[j:j + len(row.coeffs)], c, row.coeffs)
            gf.axpy_into(payload, c, row.payload)
            j += 1
        new_origin, coeffs = _trim(origin, coeffs)
        return new_origin, coeffs

    def _reduce_existing(self, new: _Row) -> None:
        """Clear the new pivot's column from every other active row."""
        gf = self.gf
        p = new.origin
        nlen = len(new.coeffs)
        for row in self.rows.values():
            off = p - row.origin
            if 0 < off < len(row.coeffs) and row.coeffs[off]:
                c = int(row.coeffs[off])
                if row.origin + len(row.coeffs) < p + nlen:
                    row.coeffs = np.concatenate(
                        [row.coeffs,
                         np.zeros(p + nlen - row.origin - len(row.coeffs), dtype=np.uint8)])
                gf.axpy_into(row.coeffs[off:off + nlen], c, new.coeffs)
                gf.axpy_into(row.payload, c, new.payload)
                # leading 1 at the pivot survives; only the tail can shrink
                row.coeffs = _trim(row.origin, row.coeffs)[1]

    def _deliver_ready(self, slot: int) -> list[DeliveryEvent]:
        """Deliver the longest fully-resolved prefix of the window."""
        i = self.window_origin
        max_end = 0
        ready_through = None
        while i in self.rows:
            max_end = max(max_end, self.rows[i].end)
            if max_end - 1 <= i:
                ready_through = i
            i += 1
        if ready_through is None:
            return []
        events = []
        for idx in range(self.window_origin, ready_through + 1):
            row = self.rows.pop(idx)
            self.delivered_payload[idx] = row.payload
            events.append(DeliveryEvent(idx, slot))
        self.window_origin = ready_through + 1
        self.delivered_through = ready_through
        return events

    # -- unreliable-mode generation flush -----------------------------------

    def flush_generation(self, first: int, last: int,
                         slot: int) -> tuple[list[DeliveryEvent], list[int]]:
        """Settle a finished generation: deliver what is recoverable, mark the rest erased.

        Every transmission of the generation must already have arrived or been
        erased.  If the generation decoded it was delivered by ``ingest``;
        whatever remains gets only its successfully received uncoded packets.
        """
        if self.window_origin < first:
            raise RuntimeError(
                f"generation [{first},{last}] flushed before earlier packets settled")
        events: list[DeliveryEvent] = []
        erased: list[int] = []
        for idx in range(max(first, self.window_origin), last + 1):
            if idx in self.uncoded_seen:
                self.delivered_payload[idx] = self.uncoded_seen[idx]
                events.append(DeliveryEvent(idx, slot))
            else:
                erased.append(idx)
        if last >= self.window_origin:
            for pivot in [p for p in self.rows if p <= last]:
                del self.rows[pivot]
            self.window_origin = last + 1
            self.delivered_through = last
        self.erased_indices.extend(erased)
        for idx in list(self.uncoded_seen):
            if idx <= last:
                del self.uncoded_seen[idx]
        return events, erased

"""Three-link tandem network: end-to-end coding vs recoding at the relays.

The source S sends |P| information packets to D over links 1..3 with i.i.d.
Bernoulli erasures.  Under end-to-end coding S adds enough coded packets to
survive the product of all three links and the relays forward survivors
verbatim.  Under hop-by-hop coding each relay buffers what it receives and
emits fresh random recombinations sized for its own outgoing link, without
ever decoding; only D solves.  If a random realization leaves D short of
degrees of freedom, the nearest node that still holds innovation tops it up
one packet at a time, and those extras are counted against the links they
cross.

Coding runs blockwise (block = whole stream by default).  For large streams
use q = 1 with a moderate block size: rows become plain integer bitsets and
the run stays fast while the per-link packet counts keep their expected
values.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .gf import GF


@dataclass
class TandemConfig:
    eps: tuple[float, float, float]
    n_packets: int
    strategy: str                   # 'end-to-end' | 'hop-by-hop'
    seed: int = 0
    q: int = 8
    block_size: int | None = None   # None: code over the whole stream
    payload_len: int = 2            # payload symbols per packet

    def validate(self):
        if len(self.eps) != 3:
            raise ValueError("exactly three link erasure probabilities required")
        for e in self.eps:
            if not 0.0 <= e < 1.0:
                raise ValueError(f"link erasure probability must be in [0, 1), got {e}")
        if self.strategy not in ("end-to-end", "hop-by-hop"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.n_packets < 1:
            raise ValueError("n_packets must be >= 1")
        if self.q not in (1, 4, 8):
            raise ValueError(f"q must be one of 1, 4, 8, got {self.q}")


@dataclass
class LinkReport:
    link: int
    packets_carried: int
    useful_dof_delivered: int
    efficiency: float


@dataclass
class TandemResult:
    strategy: str
    links: list[LinkReport]
    decode_events: dict              # node name -> number of solves
    retries: int
    blocks: int


def e2e_redundancy_count(n_packets: int, eps) -> int:
    """Extra coded packets S must add to cover losses on every link in series."""
    prod = 1.0
    for e in eps:
        if e >= 1.0:
            raise ValueError("link with erasure probability 1 has zero capacity")
        if e < 0.0:
            raise ValueError("erasure probabilities must be non-negative")
        prod *= 1.0 - e
    return math.ceil(n_packets * (1.0 / prod - 1.0))


def _hop_redundancy(k: int, eps_i: float) -> int:
    return math.ceil(k * (1.0 / (1.0 - eps_i) - 1.0))


def recode(gf: GF, buffer_rows, rng) -> tuple[np.ndarray, np.ndarray] | None:
    """Fresh random combination of buffered (coeffs, payload) rows.

    The output is expressed in original packet coordinates because the
    buffered coefficient vectors are combined along with the payloads.
    Returns None for an empty buffer.
    """
    if not buffer_rows:
        return None
    coeff_mat = np.stack([c for c, _ in buffer_rows])
    payload_mat = np.stack([p for _, p in buffer_rows])
    return _recode_stacked(gf, coeff_mat, payload_mat, rng)


def _recode_stacked(gf: GF, coeff_mat, payload_mat, rng):
    mul = gf.mul_table
    while True:
        betas = rng.integers(0, gf.order, size=len(coeff_mat),
                             dtype=np.int64).astype(np.uint8)
        coeffs = np.bitwise_xor.reduce(mul[betas[:, None], coeff_mat], axis=0)
        if coeffs.any():
            payload = np.bitwise_xor.reduce(mul[betas[:, None], payload_mat], axis=0)
            return coeffs, payload


class _Rref:
    """Forward row-echelon accumulator over GF(2^q); solve only on demand."""

    def __init__(self, gf: GF, width: int):
        self.gf = gf
        self.width = width
        self.rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def rank(self) -> int:
        return len(self.rows)

    def insert(self, coeffs: np.ndarray, payload: np.ndarray) -> bool:
        gf = self.gf
        coeffs = coeffs.copy()
        payload = payload.copy()
        j = 0
        while j < self.width:
            if coeffs[j] == 0:
                j += 1
                continue
            if j not in self.rows:
                inv = gf.inv(int(coeffs[j]))
                self.rows[j] = (gf.scale(inv, coeffs), gf.scale(inv, payload))
                return True
            rc, rp = self.rows[j]
            c = int(coeffs[j])
            gf.axpy_into(coeffs, c, rc)
            gf.axpy_into(payload, c, rp)
        return False

    def solve(self) -> np.ndarray:
        """Back-substitute to recover all packets; requires full rank."""
        if self.rank != self.width:
            raise RuntimeError(f"cannot solve at rank {self.rank} < {self.width}")
        gf = self.gf
        plen = len(next(iter(self.rows.values()))[1])
        out = np.zeros((self.width, plen), dtype=np.uint8)
        for j in range(self.width - 1, -1, -1):
            rc, rp = self.rows[j]
            acc = rp.copy()
            for l in range(j + 1, self.width):
                if rc[l]:
                    gf.axpy_into(acc, int(rc[l]), out[l])
            out[j] = acc
        return out


class _BitRref:
    """GF(2) row-echelon accumulator; rows are ints with payload bits above the coeffs."""

    def __init__(self, width: int):
        self.width = width
        self.rows: dict[int, int] = {}

    @property
    def rank(self) -> int:
        return len(self.rows)

    def insert(self, row: int) -> bool:
        mask = (1 << self.width) - 1
        while row & mask:
            j = ((row & mask) & -(row & mask)).bit_length() - 1
            existing = self.rows.get(j)
            if existing is None:
                self.rows[j] = row
                return True
            row ^= existing
        return False

    def solve(self) -> list[int]:
        """Payload ints for every packet; requires full rank."""
        if self.rank != self.width:
            raise RuntimeError(f"cannot solve at rank {self.rank} < {self.width}")
        solved = [0] * self.width
        for j in range(self.width - 1, -1, -1):
            row = self.rows[j]
            for l in range(j + 1, self.width):
                if (row >> l) & 1:
                    row ^= (1 << l) | (solved[l] << self.width)
            solved[j] = row >> self.width
        return solved


class _Node:
    """Relay or sink: buffers received rows, tracks rank, recodes on request."""

    def __init__(self, gf: GF | None, width: int, rng, bits: bool):
        self.bits = bits
        self.gf = gf
        self.width = width
        self.rng = rng
        self.buffer: list = []
        self.tracker = _BitRref(width) if bits else _Rref(gf, width)
        self.innovative = 0
        self.decode_events = 0
        self._stacked = None   # cached (coeff_mat, payload_mat) for recoding

    @property
    def rank(self) -> int:
        return self.tracker.rank

    def receive(self, row) -> None:
        self.buffer.append(row)
        self._stacked = None
        if self.bits:
            inn = self.tracker.insert(row)
        else:
            inn = self.tracker.insert(*row)
        if inn:
            self.innovative += 1

    def recode(self):
        if not self.buffer:
            return None
        if self.bits:
            mask = (1 << self.width) - 1
            while True:
                betas = self.rng.getrandbits(len(self.buffer))
                out = 0
                for i, row in enumerate(self.buffer):
                    if (betas >> i) & 1:
                        out ^= row
                if out & mask:
                    return out
        if self._stacked is None:
            self._stacked = (np.stack([c for c, _ in self.buffer]),
                             np.stack([p for _, p in self.buffer]))
        return _recode_stacked(self.gf, *self._stacked, self.rng)

    def decode(self):
        self.decode_events += 1
        return self.tracker.solve()


def run_tandem(cfg: TandemConfig) -> TandemResult:
    """Simulate one strategy over the tandem network and report per-link loads."""
    cfg.validate()
    master = random.Random(cfg.seed)
    loss_rng = random.Random(master.randrange(2 ** 63))
    payload_seed = master.randrange(2 ** 63)
    coeff_seed = master.randrange(2 ** 63)

    bits = cfg.q == 1
    gf = None if bits else GF(cfg.q)
    if bits:
        coeff_rng = random.Random(coeff_seed)
        payload_rng = random.Random(payload_seed)
    else:
        coeff_rng = np.random.default_rng(coeff_seed)
        payload_rng = np.random.default_rng(payload_seed)

    carried = [0, 0, 0]
    decode_events = {"relay1": 0, "relay2": 0, "sink": 0}
    useful = [0, 0, 0]
    retries = 0

    block = cfg.block_size or cfg.n_packets
    starts = list(range(0, cfg.n_packets, block))
    for start in starts:
        kb = min(block, cfg.n_packets - start)
        if bits:
            payloads = [payload_rng.getrandbits(8 * cfg.payload_len) for _ in range(kb)]
            originals = list(payloads)
        else:
            payloads = payload_rng.integers(0, gf.order, size=(kb, cfg.payload_len),
                                            dtype=np.int64).astype(np.uint8)
            originals = payloads.copy()

        def source_row(i=None):
            """Uncoded packet i, or a fresh coded packet over the block."""
            if bits:
                if i is not None:
                    return (1 << i) | (payloads[i] << kb)
                while True:
                    coeffs = coeff_rng.getrandbits(kb)
                    if coeffs:
                        break
                out = coeffs
                pay = 0
                for j in range(kb):
                    if (coeffs >> j) & 1:
                        pay ^= payloads[j]
                return out | (pay << kb)
            if i is not None:
                coeffs = np.zeros(kb, dtype=np.uint8)
                coeffs[i] = 1
                return coeffs, payloads[i].copy()
            while True:
                coeffs = coeff_rng.integers(0, gf.order, size=kb,
                                            dtype=np.int64).astype(np.uint8)
                if coeffs.any():
                    break
            payload = np.bitwise_xor.reduce(gf.mul_table[coeffs[:, None], payloads],
                                            axis=0)
            return coeffs, payload

        relay1 = _Node(gf, kb, coeff_rng, bits)
        relay2 = _Node(gf, kb, coeff_rng, bits)
        sink = _Node(gf, kb, coeff_rng, bits)
        nodes = [relay1, relay2, sink]

        def send(link: int, row) -> bool:
            """Transmit one packet onto link 1..3; deliver to the next node."""
            carried[link - 1] += 1
            if loss_rng.random() < cfg.eps[link - 1]:
                return False
            nodes[link - 1].receive(row)
            return True

        if cfg.strategy == "end-to-end":
            extra = e2e_redundancy_count(kb, cfg.eps)
            volley = [source_row(i) for i in range(kb)] + \
                     [source_row() for _ in range(extra)]
            for row in volley:
                if send(1, row) and send(2, row):
                    send(3, row)
            while sink.rank < kb:
                retries += 1
                row = source_row()
                if send(1, row) and send(2, row):
                    send(3, row)
        else:
            # Each stage injects redundancy sized for its own outgoing link and
            # tops up until the receiver holds the full block, so shortfalls do
            # not compound down the chain.
            for i in range(kb):
                send(1, source_row(i))
            for _ in range(_hop_redundancy(kb, cfg.eps[0])):
                send(1, source_row())
            while relay1.rank < kb:
                retries += 1
                send(1, source_row())
            for _ in range(kb + _hop_redundancy(kb, cfg.eps[1])):
                send(2, relay1.recode())
            while relay2.rank < kb:
                retries += 1
                send(2, relay1.recode())
            for _ in range(kb + _hop_redundancy(kb, cfg.eps[2])):
                send(3, relay2.recode())
            while sink.rank < kb:
                retries += 1
                send(3, relay2.recode())

        solved = sink.decode()
        if bits:
            if solved != originals:
                raise RuntimeError("sink decode mismatch")
        elif not np.array_equal(solved, originals):
            raise RuntimeError("sink decode mismatch")
        decode_events["relay1"] += relay1.decode_events
        decode_events["relay2"] += relay2.decode_events
        decode_events["sink"] += sink.decode_events
        for li, node in enumerate(nodes):
            useful[li] += node.innovative

    links = [LinkReport(i + 1, carried[i], useful[i],
                        cfg.n_packets / carried[i] if carried[i] else 1.0)
             for i in range(3)]
    return TandemResult(cfg.strategy, links, decode_events, retries, len(starts))

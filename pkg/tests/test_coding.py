import numpy as np
import pytest

from rlncsim.coding import (CodedPacket, CoeffVector, GenerationEncoder,
                            InfoPacket, SlidingWindowEncoder, StreamDecoder,
                            coded_per_generation, generation_span,
                            random_combination, redundancy_ratio,
                            stack_payloads)
from rlncsim.gf import GF

from helpers import DenseOracle


def make_payloads(n, plen=2, q=8, seed=0):
    order = 1 << q
    return np.random.default_rng(seed).integers(
        0, order, size=(n, plen), dtype=np.int64).astype(np.uint8)


def emission_labels(encoder):
    labels = []
    while True:
        em = encoder.next_emission()
        if em is None:
            return labels
        labels.append(f"p{em.info_index}" if em.info_index else f"c{em.generation_id}")


# ---------------------------------------------------------------- encoders


def test_generation_emission_order_matches_figure_trace():
    gf = GF(8)
    enc = GenerationEncoder(gf, make_payloads(8), 4, 1.25, np.random.default_rng(1))
    assert emission_labels(enc) == \
        ["p1", "p2", "p3", "p4", "c1", "p5", "p6", "p7", "p8", "c2"]


def test_generation_tail_keeps_full_coded_count():
    # |P|=6, k=4, R=3/2: generation 2 spans packets 5..6 but still gets
    # ceil(4 * 0.5) = 2 coded packets
    assert generation_span(2, 4, 6) == (5, 6)
    assert coded_per_generation(4, 1.5) == 2
    gf = GF(8)
    enc = GenerationEncoder(gf, make_payloads(6), 4, 1.5, np.random.default_rng(1))
    assert emission_labels(enc) == \
        ["p1", "p2", "p3", "p4", "c1", "c1", "p5", "p6", "c2", "c2"]


def test_generation_r1_is_pure_passthrough():
    gf = GF(8)
    enc = GenerationEncoder(gf, make_payloads(4), 1, 1.0, np.random.default_rng(1))
    assert emission_labels(enc) == ["p1", "p2", "p3", "p4"]


def test_coded_per_generation_is_exact_for_decimal_r():
    # 20 * 0.1 must not pick up float noise (20 * (1.1 - 1) = 2.0000000000000018)
    assert coded_per_generation(20, 1.1) == 2
    assert coded_per_generation(4, 1.25) == 1
    assert coded_per_generation(4, 1.05) == 1


def test_generation_feedback_queueing_and_idempotence():
    gf = GF(8)
    enc = GenerationEncoder(gf, make_payloads(8), 4, 1.25, np.random.default_rng(1))
    while enc.next_emission() is not None:
        pass
    enc.handle_feedback(1, 0, message_id=("m0"))
    assert enc.next_emission() is None                 # zero deficit: no-op
    enc.handle_feedback(2, 2, message_id=("m1"))
    enc.handle_feedback(2, 2, message_id=("m1"))       # duplicate message
    ems = []
    while True:
        em = enc.next_emission()
        if em is None:
            break
        ems.append(em)
    assert len(ems) == 2                               # single enqueue
    assert all(em.generation_id == 2 and em.is_retransmission for em in ems)
    assert [em.round_complete for em in ems] == [False, True]
    with pytest.raises(ValueError):
        enc.handle_feedback(99, 1)


def test_retransmissions_preempt_new_generations():
    gf = GF(8)
    enc = GenerationEncoder(gf, make_payloads(8), 4, 1.25, np.random.default_rng(1))
    for _ in range(5):
        enc.next_emission()                            # finish generation 1
    enc.handle_feedback(1, 1, message_id="fb")
    em = enc.next_emission()
    assert em.generation_id == 1 and em.is_retransmission
    em = enc.next_emission()
    assert em.info_index == 5                          # then generation 2 resumes


def test_sliding_window_trace_r125():
    gf = GF(8)
    enc = SlidingWindowEncoder(gf, make_payloads(8), 1.25, np.random.default_rng(1))
    acts = [enc.next_action() for _ in range(10)]
    assert acts == [("uncoded", 1), ("uncoded", 2), ("uncoded", 3), ("uncoded", 4),
                    ("coded", 4), ("uncoded", 5), ("uncoded", 6), ("uncoded", 7),
                    ("uncoded", 8), ("coded", 8)]


def test_sliding_window_trace_r2_alternates():
    gf = GF(8)
    enc = SlidingWindowEncoder(gf, make_payloads(3), 2.0, np.random.default_rng(1))
    acts = [enc.next_action() for _ in range(6)]
    assert acts == [("uncoded", 1), ("coded", 1), ("uncoded", 2), ("coded", 2),
                    ("uncoded", 3), ("coded", 3)]


def test_sliding_window_r1_degrades_uncoded_with_flag():
    gf = GF(8)
    enc = SlidingWindowEncoder(gf, make_payloads(5), 1.0, np.random.default_rng(1))
    assert enc.no_redundancy
    acts = [enc.next_action() for _ in range(5)]
    assert all(kind == "uncoded" for kind, _ in acts)


def test_sliding_window_realizes_fractional_redundancy_exactly():
    # R = 10/7: over 500 transmissions exactly 150 must be coded
    gf = GF(8)
    enc = SlidingWindowEncoder(gf, make_payloads(350), 10 / 7, np.random.default_rng(1))
    kinds = [enc.next_action()[0] for _ in range(500)]
    assert kinds.count("coded") == 150
    assert enc.exhausted()
    assert redundancy_ratio(1.43).numerator == 143


def test_stream_from_info_packets():
    packets = [InfoPacket(i, np.array([i, i + 1], np.uint8)) for i in (2, 1, 3)]
    mat = stack_payloads(packets)
    assert mat.shape == (3, 2) and mat[0][0] == 1
    enc = GenerationEncoder(GF(8), mat, 2, 1.5, np.random.default_rng(0))
    assert emission_labels(enc) == ["p1", "p2", "c1", "p3", "c2"]
    with pytest.raises(ValueError):
        stack_payloads([InfoPacket(2, np.array([0], np.uint8))])
    with pytest.raises(ValueError):
        stack_payloads([InfoPacket(1, np.array([0], np.uint8)),
                        InfoPacket(2, np.array([0, 1], np.uint8))])


def test_random_combination_nonzero_and_consistent():
    gf = GF(8)
    payloads = make_payloads(6)
    rng = np.random.default_rng(3)
    for _ in range(50):
        coeffs, payload = random_combination(gf, payloads, 2, 5, rng)
        assert coeffs.any()
        expect = np.zeros_like(payloads[0])
        for i, c in enumerate(coeffs):
            expect ^= gf.mul_table[c, payloads[1 + i]]
        assert np.array_equal(payload, expect)


# ---------------------------------------------------------------- decoder


def uncoded(i, payloads):
    return CodedPacket.uncoded(i, payloads[i - 1])


def coded_over(gf, payloads, lo, hi, rng, gen=None):
    coeffs, payload = random_combination(gf, payloads, lo, hi, rng)
    return CodedPacket(CoeffVector(lo, coeffs), payload, gen)


def test_in_order_uncoded_deliver_immediately():
    gf = GF(8)
    payloads = make_payloads(3)
    dec = StreamDecoder(gf, 3, 2)
    for slot, i in enumerate((1, 2, 3)):
        events = dec.ingest(uncoded(i, payloads), slot)
        assert [(e.packet_index, e.delivery_slot) for e in events] == [(i, slot)]
        assert np.array_equal(dec.delivered_payload[i], payloads[i - 1])


def test_figure_trace_loss_recovered_by_generation_coded():
    gf = GF(8)
    payloads = make_payloads(4)
    rng = np.random.default_rng(5)
    dec = StreamDecoder(gf, 4, 2)
    assert [e.packet_index for e in dec.ingest(uncoded(1, payloads), 1)] == [1]
    assert dec.ingest(uncoded(3, payloads), 3) == []
    assert dec.ingest(uncoded(4, payloads), 4) == []
    events = dec.ingest(coded_over(gf, payloads, 1, 4, rng), 5)
    assert [(e.packet_index, e.delivery_slot) for e in events] == \
        [(2, 5), (3, 5), (4, 5)]
    for i in range(1, 5):
        assert np.array_equal(dec.delivered_payload[i], payloads[i - 1])


def test_duplicate_is_absorbed_without_rank_change():
    gf = GF(8)
    payloads = make_payloads(3)
    dec = StreamDecoder(gf, 3, 2)
    dec.ingest(uncoded(2, payloads), 0)
    rank = dec.rank
    assert dec.ingest(uncoded(2, payloads), 1) == []
    assert dec.rank == rank


def test_two_losses_need_two_independent_coded():
    gf = GF(8)
    payloads = make_payloads(4)
    rng = np.random.default_rng(11)
    dec = StreamDecoder(gf, 4, 2)
    dec.ingest(uncoded(3, payloads), 2)
    dec.ingest(uncoded(4, payloads), 3)
    assert dec.ingest(coded_over(gf, payloads, 1, 4, rng), 4) == []
    assert dec.rank == 3
    events = dec.ingest(coded_over(gf, payloads, 1, 4, rng), 5)
    assert [e.packet_index for e in events] == [1, 2, 3, 4]
    assert all(e.delivery_slot == 5 for e in events)


def test_cross_gap_delivery_requires_back_reduction():
    # c(1..2) then p2: p1 is solvable even though index 2 arrived later
    gf = GF(8)
    payloads = make_payloads(2)
    rng = np.random.default_rng(2)
    dec = StreamDecoder(gf, 2, 2)
    while True:   # make sure the combination involves p1
        pkt = coded_over(gf, payloads, 1, 2, rng)
        if pkt.coeffs.coeffs[0]:
            break
    assert dec.ingest(pkt, 0) == []
    events = dec.ingest(uncoded(2, payloads), 1)
    assert [e.packet_index for e in events] == [1, 2]
    assert np.array_equal(dec.delivered_payload[1], payloads[0])


def test_delivery_events_strictly_increasing():
    gf = GF(1)
    payloads = make_payloads(12, q=1)
    rng = np.random.default_rng(9)
    order_rng = np.random.default_rng(10)
    seen = []
    dec = StreamDecoder(gf, 12, 2)
    packets = [uncoded(i, payloads) for i in range(1, 13)]
    packets += [coded_over(gf, payloads, 1, 12, rng, None) for _ in range(6)]
    order_rng.shuffle(packets)
    for slot, pkt in enumerate(packets):
        seen += [e.packet_index for e in dec.ingest(pkt, slot)]
    assert seen == sorted(seen)
    assert len(set(seen)) == len(seen)


@pytest.mark.parametrize("q", [1, 8])
def test_decoder_matches_dense_oracle_on_random_traces(q):
    gf = GF(q)
    oracle = DenseOracle(q, 6, 2)
    payloads = make_payloads(6, q=q, seed=21)
    rng = np.random.default_rng(22)
    mix_rng = np.random.default_rng(23)
    for case in range(400):
        dec = StreamDecoder(gf, 6, 2)
        packets = [uncoded(i, payloads) for i in range(1, 7)]
        for _ in range(mix_rng.integers(0, 5)):
            lo = int(mix_rng.integers(1, 7))
            hi = int(mix_rng.integers(lo, 7))
            packets.append(coded_over(gf, payloads, lo, hi, rng))
        keep = [p for p in packets if mix_rng.random() > 0.4]
        mix_rng.shuffle(keep)
        rows = []
        delivered = []
        for slot, pkt in enumerate(keep):
            full = np.zeros(6, np.uint8)
            full[pkt.coeffs.origin - 1:pkt.coeffs.end - 1] = pkt.coeffs.coeffs
            rows.append((full, pkt.payload.copy()))
            delivered += [e.packet_index for e in dec.ingest(pkt, slot)]
        prefix = oracle.deliverable_prefix(rows)
        assert delivered == list(range(1, prefix + 1))
        assert dec.rank + len(delivered) == oracle.rank(rows)
        for i in delivered:
            assert np.array_equal(dec.delivered_payload[i], payloads[i - 1])


def test_generation_packets_never_help_other_generations():
    gf = GF(8)
    payloads = make_payloads(8)
    rng = np.random.default_rng(31)
    dec = StreamDecoder(gf, 8, 2)
    for _ in range(4):
        dec.ingest(coded_over(gf, payloads, 1, 4, rng, gen=1), 0)
    assert dec.dofs_in_span(1, 4) == 4
    assert dec.dofs_in_span(5, 8) == 0


def test_decode_probability_with_k_random_combinations():
    # k fresh random coded packets decode a generation with prob >= 0.99 at q=8
    gf = GF(8)
    payloads = make_payloads(4)
    rng = np.random.default_rng(41)
    ok = 0
    trials = 10000
    for _ in range(trials):
        dec = StreamDecoder(gf, 4, 2)
        done = []
        for _ in range(4):
            done += dec.ingest(coded_over(gf, payloads, 1, 4, rng, gen=1), 0)
        ok += len(done) == 4
    assert ok / trials >= 0.99


# ------------------------------------------------------------- flush rule


def test_flush_all_uncoded_received():
    gf = GF(8)
    payloads = make_payloads(4)
    dec = StreamDecoder(gf, 4, 2)
    for slot, i in enumerate((1, 2, 3, 4)):
        dec.ingest(uncoded(i, payloads), slot)
    events, erased = dec.flush_generation(1, 4, 5)
    assert events == [] and erased == []           # already delivered in-order


def test_flush_partial_generation_delivers_received_uncoded_only():
    gf = GF(8)
    payloads = make_payloads(4)
    rng = np.random.default_rng(51)
    dec = StreamDecoder(gf, 4, 2)
    dec.ingest(uncoded(2, payloads), 1)            # p1, p3 lost
    dec.ingest(uncoded(4, payloads), 3)
    dec.ingest(coded_over(gf, payloads, 1, 4, rng, gen=1), 4)
    assert dec.rank == 3
    events, erased = dec.flush_generation(1, 4, 4)
    assert [e.packet_index for e in events] == [2, 4]
    assert erased == [1, 3]
    assert dec.window_origin == 5


def test_flush_decodable_generation_already_delivered():
    gf = GF(8)
    payloads = make_payloads(4)
    rng = np.random.default_rng(61)
    dec = StreamDecoder(gf, 4, 2)
    for i in (1, 2, 3):
        dec.ingest(uncoded(i, payloads), i)
    events = dec.ingest(coded_over(gf, payloads, 1, 4, rng, gen=1), 5)
    assert [e.packet_index for e in events] == [4]
    events, erased = dec.flush_generation(1, 4, 5)
    assert events == [] and erased == []


def test_flush_before_prior_generation_settles_is_rejected():
    gf = GF(8)
    payloads = make_payloads(8)
    dec = StreamDecoder(gf, 8, 2)
    dec.ingest(uncoded(2, payloads), 0)
    with pytest.raises(RuntimeError):
        dec.flush_generation(5, 8, 9)

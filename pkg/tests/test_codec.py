import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvba import codec
from mvba.codec import (
    DataVector,
    InsufficientPacketsError,
    Packet,
    check_consistency,
    decode,
    encode,
    encode_subset,
    lane_widths,
    make_code_spec,
    make_z,
)

from oracles import all_subsets_consistent, horner

SPEC4 = make_code_spec(4, 1, 4)


def test_points_for_small_system():
    assert SPEC4.y_points == (1, 2, 3, 4, 5, 6)
    assert SPEC4.z_points == (7, 8, 9)
    assert SPEC4.k == 3


def test_field_too_small():
    with pytest.raises(ValueError):
        make_code_spec(7, 2, 4)


def test_t_zero_boundary():
    spec = make_code_spec(3, 0, 4)
    assert len(spec.y_points) == 4


@pytest.mark.parametrize(
    "c, lanes",
    [(8, (8,)), (16, (16,)), (17, (9, 8)), (61, (16, 15, 15, 15)), (256, (16,) * 16), (167, (16, 16) + (15,) * 9)],
)
def test_lane_split(c, lanes):
    assert lane_widths(c) == lanes
    assert sum(lanes) == c


def test_zero_and_constant_data():
    assert all((p.value == 0).all() for p in encode(DataVector.zeros(SPEC4), SPEC4))
    d = DataVector.from_ints([7, 0, 0])
    assert all(int(p.value[0]) == 7 for p in encode(d, SPEC4))


def test_encode_matches_horner():
    pkts = encode(DataVector.from_ints([1, 2, 3]), SPEC4)
    at2 = next(p for p in pkts if p.point == 2)
    assert int(at2.value[0]) == horner([1, 2, 3], 2, 4, 0x13)
    for p in pkts:
        assert int(p.value[0]) == horner([1, 2, 3], p.point, 4, 0x13)


def test_encode_subset():
    d = DataVector.from_ints([1, 2, 3])
    full = encode(d, SPEC4)
    same = encode_subset(d, SPEC4, accusers=())
    assert [(p.index, int(p.value[0])) for p in same] == [(p.index, int(p.value[0])) for p in full]
    assert sorted(p.index for p in encode_subset(d, SPEC4, m=1, accusers={3})) == [1, 2, 4, 5]
    spec7 = make_code_spec(7, 2, 8)
    d7 = DataVector(np.arange(5)[:, None])
    assert len(encode_subset(d7, spec7, accusers={1, 2})) == 8
    with pytest.raises(ValueError):
        encode_subset(d, SPEC4, m=2, accusers={3})


def test_decode_round_trip_and_errors():
    rng = np.random.default_rng(1)
    spec = make_code_spec(7, 2, 61)
    d = DataVector(rng.integers(0, 1 << 15, size=(5, spec.num_lanes)))
    pkts = encode(d, spec)
    for _ in range(20):
        pick = rng.choice(len(pkts), size=5, replace=False)
        assert decode([pkts[i] for i in pick], spec) == d
    with pytest.raises(InsufficientPacketsError):
        decode(pkts[:4], spec)


def test_tampered_packet_changes_decode():
    d = DataVector.from_ints([1, 2, 3])
    pkts = encode(d, SPEC4)
    bad = Packet(pkts[0].point, pkts[0].value ^ 5, "Y", 1, 0)
    assert decode([bad, pkts[1], pkts[2]], SPEC4) != d


def test_consistency():
    d = DataVector.from_ints([4, 0, 9])
    pkts = encode(d, SPEC4)
    assert check_consistency(pkts, SPEC4) == d
    flipped = list(pkts[:4])
    flipped[3] = Packet(flipped[3].point, flipped[3].value ^ 1, "Y", 4, 0)
    assert check_consistency(flipped, SPEC4) is None
    assert codec.all_subsets_agree(flipped, SPEC4) is False
    junk = [Packet(p, np.array([v]), "Y", p, 0) for p, v in [(1, 5), (4, 12), (6, 3)]]
    assert check_consistency(junk, SPEC4) is not None


def test_make_z():
    d = DataVector.from_ints([1, 2, 3])
    pkts = encode(d, SPEC4)
    z = make_z(pkts[:3], 2, SPEC4)
    assert z.point == 8 and int(z.value[0]) == horner([1, 2, 3], 8, 4, 0x13)
    assert int(make_z(encode(DataVector.zeros(SPEC4), SPEC4)[:3], 1, SPEC4).value[0]) == 0
    bad = list(pkts[:4])
    bad[0] = Packet(bad[0].point, bad[0].value ^ 3, "Y", 1, 0)
    assert make_z(bad, 1, SPEC4) is None


def test_missing_packet_is_zero():
    p = codec.zero_packet(SPEC4, "Z", 2, origin=2)
    assert p.missing and p.point == 8 and int(p.value[0]) == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(4, 1, 8), (7, 2, 16), (10, 3, 40), (7, 2, 33)]))
def test_bits_round_trip(seed, ntc):
    spec = make_code_spec(*ntc)
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=spec.k * spec.c, dtype=np.uint8)
    d = codec.bits_to_data(bits, spec)
    assert np.array_equal(codec.data_to_bits(d, spec), bits)
    assert decode(encode(d, spec)[-spec.k :], spec) == d


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 9))
def test_consistency_matches_oracle(seed, m):
    rng = np.random.default_rng(seed)
    pts = sorted(rng.choice(np.arange(1, 10), size=m, replace=False).tolist())
    coeffs = rng.integers(0, 16, size=3)
    vals = np.array([[horner(coeffs, p, 4, 0x13)] for p in pts])
    if rng.random() < 0.7:
        vals[int(rng.integers(m)), 0] ^= int(rng.integers(1, 16))
    pkts = [Packet(p, vals[i], "Y", p, 0) for i, p in enumerate(pts)]
    got = check_consistency(pkts, SPEC4) is not None
    assert got == bool(all_subsets_consistent(pts, vals, 3, 4, 0x13)[0])

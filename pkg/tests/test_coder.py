import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdlab.coder import (
    FLUSH_BYTES,
    CdfTable,
    RangeDecoder,
    RangeEncoder,
    TruncatedStreamError,
    rc_decode,
    rc_encode,
)
from rdlab.ggm import GGMParams, build_cdf_table, ggm_sample


def ideal_bits(symbols, tables):
    return math.fsum(t.cost_bits(s) for s, t in zip(symbols, tables))


@st.composite
def tables_and_symbols(draw, max_len=60):
    """Random tables (every frequency >= 1) and symbols drawn from their ranges."""
    n_tables = draw(st.integers(1, 4))
    tables = []
    for _ in range(n_tables):
        bits = draw(st.integers(1, 16))
        total = 1 << bits
        n = draw(st.integers(1, min(total, 40)))
        cuts = sorted(draw(st.sets(st.integers(1, total - 1), min_size=n - 1, max_size=n - 1)))
        cum = [0, *cuts, total]
        tables.append(CdfTable(draw(st.integers(-50, 50)), total, tuple(cum)))
    length = draw(st.integers(0, max_len))
    which = draw(st.lists(st.integers(0, n_tables - 1), min_size=length, max_size=length))
    seq = [tables[w] for w in which]
    syms = [draw(st.integers(t.min_symbol, t.max_symbol)) for t in seq]
    return syms, seq


class TestCdfTable:
    def test_uniform(self):
        t = CdfTable.uniform(256)
        assert t.n_symbols == 256 and t.total == 65536
        assert all(t.freq(s) == 256 for s in range(256))
        assert t.cost_bits(17) == pytest.approx(8.0)

    def test_from_freqs(self):
        t = CdfTable.from_freqs([1, 6, 1], min_symbol=-1)
        assert t.cum_freqs == (0, 1, 7, 8)
        assert t.max_symbol == 1 and t.mps == 1 and t.total_bits == 3

    @pytest.mark.parametrize(
        "total, cum",
        [(10, (0, 5, 10)), (8, (0, 4, 4, 8)), (8, (1, 4, 8)), (8, (0, 4, 7)), (8, (0,))],
    )
    def test_invalid(self, total, cum):
        with pytest.raises(ValueError):
            CdfTable(0, total, cum)

    def test_uniform_too_many_symbols(self):
        with pytest.raises(ValueError):
            CdfTable.uniform(300, total_bits=8)


class TestExamples:
    def test_empty_stream(self):
        stream = rc_encode([], [])
        assert len(stream) == FLUSH_BYTES <= 8
        assert rc_decode(stream, [], 0) == []

    def test_uniform_bytes(self, rng):
        t = CdfTable.uniform(256)
        syms = rng.integers(0, 256, 1000).tolist()
        stream = rc_encode(syms, [t] * 1000)
        assert 1000 <= len(stream) <= 1010
        assert rc_decode(stream, [t] * 1000, 1000) == syms

    def test_ggm_roundtrip_1e5(self):
        rng = np.random.default_rng(7)
        t = build_cdf_table(GGMParams(0, 1, 1.5), -40, 40)
        syms = np.clip(np.rint(ggm_sample(GGMParams(0, 1, 1.5), 100_000, rng)), -40, 40).astype(int).tolist()
        tables = [t] * len(syms)
        stream = rc_encode(syms, tables)
        assert rc_decode(stream, tables, len(syms)) == syms
        assert 8 * len(stream) <= ideal_bits(syms, tables) * 1.001 + 64

    def test_symbol_out_of_range(self):
        t = CdfTable.uniform(4)
        with pytest.raises(ValueError):
            rc_encode([4], [t])
        with pytest.raises(ValueError):
            rc_encode([-1], [t])

    def test_count_mismatch(self):
        t = CdfTable.uniform(4)
        with pytest.raises(ValueError):
            rc_encode([1, 2], [t])
        with pytest.raises(ValueError):
            rc_decode(rc_encode([1], [t]), [t], 2)

    def test_truncated(self):
        t = CdfTable.uniform(256)
        stream = rc_encode(list(range(200)), [t] * 200)
        with pytest.raises(TruncatedStreamError):
            rc_decode(stream[:50], [t] * 200, 200)
        with pytest.raises(TruncatedStreamError):
            RangeDecoder(b"\x00\x01")

    def test_finish_is_idempotent(self):
        enc = RangeEncoder()
        enc.encode(3, CdfTable.uniform(8))
        first = enc.finish()
        assert enc.finish() == first
        with pytest.raises(RuntimeError):
            enc.encode(1, CdfTable.uniform(8))

    def test_stream_starts_with_cache_byte(self, rng):
        t = CdfTable.from_freqs([1, 65534, 1])
        syms = rng.integers(0, 3, 500).tolist()
        assert rc_encode(syms, [t] * 500)[0] == 0

    def test_decoder_consumes_whole_stream(self, rng):
        t = CdfTable.uniform(100)
        syms = rng.integers(0, 100, 300).tolist()
        stream = rc_encode(syms, [t] * 300)
        dec = RangeDecoder(stream)
        assert [dec.decode(t) for _ in syms] == syms
        assert dec.bytes_consumed <= len(stream)

    def test_corrupt_input_is_best_effort(self, rng):
        t = CdfTable.from_freqs([3, 60000, 5533])
        syms = rng.integers(0, 3, 400).tolist()
        stream = bytearray(rc_encode(syms, [t] * 400))
        stream[10] ^= 0xFF
        out = rc_decode(bytes(stream) + bytes(16), [t] * 400, 400)
        assert all(0 <= s <= 2 for s in out)

    def test_carry_propagation(self):
        # low sits just under a byte boundary, forcing pending 0xFF runs
        t = CdfTable.from_freqs([65535, 1])
        syms = [1] * 3 + [0] * 2000 + [1] * 5
        assert rc_decode(rc_encode(syms, [t] * len(syms)), [t] * len(syms), len(syms)) == syms


class TestProperties:
    @settings(max_examples=400, deadline=None)
    @given(tables_and_symbols())
    def test_lossless(self, case):
        syms, tables = case
        assert rc_decode(rc_encode(syms, tables), tables, len(syms)) == syms

    @settings(max_examples=200, deadline=None)
    @given(tables_and_symbols(max_len=200))
    def test_length_bound(self, case):
        syms, tables = case
        assert 8 * len(rc_encode(syms, tables)) <= ideal_bits(syms, tables) + 64

    @settings(max_examples=50, deadline=None)
    @given(tables_and_symbols())
    def test_deterministic(self, case):
        syms, tables = case
        assert rc_encode(syms, tables) == rc_encode(list(syms), list(tables))

    def test_random_fuzz(self):
        # adversarial tables with skewed and degenerate frequencies
        rng = np.random.default_rng(99)
        for _ in range(300):
            n = int(rng.integers(1, 300))
            bits = int(rng.integers(max(1, math.ceil(math.log2(n))), 17))
            extra = (1 << bits) - n
            w = rng.pareto(0.7, n)
            freqs = 1 + np.floor(w / w.sum() * extra).astype(int)
            freqs[int(rng.integers(n))] += (1 << bits) - int(freqs.sum())
            t = CdfTable.from_freqs(freqs.tolist(), int(rng.integers(-100, 100)))
            syms = rng.integers(t.min_symbol, t.max_symbol + 1, int(rng.integers(0, 200))).tolist()
            tables = [t] * len(syms)
            assert rc_decode(rc_encode(syms, tables), tables, len(syms)) == syms

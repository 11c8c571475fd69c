"""Multi-symbol range coder over fixed-point cumulative frequency tables.

Stream format
-------------
The encoder keeps a 32-bit ``range`` and a 32-bit ``low`` with one carry bit
above it.  Whenever ``range`` drops below 2**24 the top byte of ``low`` is
shifted out, most significant byte first (big-endian emission order).  Bytes
are held back in a one-byte cache plus a run of pending 0xFF bytes so that a
carry out of ``low`` can be propagated into already-produced output.  Finishing
a stream shifts ``low`` out five times, so every stream starts with the cache
byte (always 0x00) and an empty stream is exactly five bytes long.

For a symbol with cumulative bounds ``[c_lo, c_hi)`` in a table of total
``2**k`` the interval is ``r * c_lo`` .. ``r * c_hi`` with ``r = range >> k``.
The remainder ``range - r * 2**k`` is handed to the table's most probable
symbol (its interval is widened and every later symbol is shifted up by the
remainder), so peaked tables waste almost nothing to integer truncation.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

__all__ = [
    "CdfTable",
    "RangeEncoder",
    "RangeDecoder",
    "TruncatedStreamError",
    "rc_encode",
    "rc_decode",
]

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
FLUSH_BYTES = 5


class TruncatedStreamError(ValueError):
    """The decoder needed more bytes than the stream holds."""


@dataclass(frozen=True)
class CdfTable:
    """Cumulative frequencies for symbols ``min_symbol .. min_symbol + n - 1``.

    ``cum_freqs`` has ``n + 1`` entries, starts at 0, ends at ``total`` and is
    strictly increasing, so every symbol has frequency of at least one.
    """

    min_symbol: int
    total: int
    cum_freqs: tuple[int, ...]
    total_bits: int = field(init=False, repr=False, compare=False)
    mps: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cum = tuple(int(c) for c in self.cum_freqs)
        object.__setattr__(self, "cum_freqs", cum)
        total = int(self.total)
        if total <= 0 or total & (total - 1):
            raise ValueError(f"total must be a power of two, got {total}")
        if len(cum) < 2 or cum[0] != 0 or cum[-1] != total:
            raise ValueError("cum_freqs must start at 0 and end at total")
        freqs = [b - a for a, b in zip(cum, cum[1:])]
        if min(freqs) < 1:
            raise ValueError("every symbol needs a frequency of at least 1")
        object.__setattr__(self, "total_bits", total.bit_length() - 1)
        object.__setattr__(self, "mps", max(range(len(freqs)), key=freqs.__getitem__))

    @classmethod
    def uniform(cls, n_symbols: int, min_symbol: int = 0, total_bits: int = 16) -> "CdfTable":
        total = 1 << total_bits
        if not 1 <= n_symbols <= total:
            raise ValueError(f"cannot fit {n_symbols} symbols into total {total}")
        base, extra = divmod(total, n_symbols)
        cum = [0]
        for i in range(n_symbols):
            cum.append(cum[-1] + base + (1 if i < extra else 0))
        return cls(min_symbol, total, tuple(cum))

    @classmethod
    def from_freqs(cls, freqs: Sequence[int], min_symbol: int = 0) -> "CdfTable":
        cum = [0]
        for f in freqs:
            cum.append(cum[-1] + int(f))
        return cls(min_symbol, cum[-1], tuple(cum))

    @property
    def n_symbols(self) -> int:
        return len(self.cum_freqs) - 1

    @property
    def max_symbol(self) -> int:
        return self.min_symbol + self.n_symbols - 1

    def freq(self, symbol: int) -> int:
        i = symbol - self.min_symbol
        return self.cum_freqs[i + 1] - self.cum_freqs[i]

    def cost_bits(self, symbol: int) -> float:
        """Ideal code length of ``symbol`` under this table."""
        from math import log2

        return self.total_bits - log2(self.freq(symbol))


class RangeEncoder:
    """Single-threaded encoder state machine; call :meth:`finish` once."""

    def __init__(self):
        self._low = 0
        self._range = _MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self._done = False

    def _shift_low(self):
        low = self._low
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            out = self._out
            out.append((self._cache + carry) & 0xFF)
            for _ in range(self._cache_size - 1):
                out.append((0xFF + carry) & 0xFF)
            self._cache_size = 0
            self._cache = (low >> 24) & 0xFF
        self._cache_size += 1
        self._low = (low << 8) & _MASK32

    def encode(self, symbol: int, table: CdfTable) -> None:
        if self._done:
            raise RuntimeError("encoder already finished")
        i = symbol - table.min_symbol
        cum = table.cum_freqs
        if not 0 <= i < len(cum) - 1:
            raise ValueError(
                f"symbol {symbol} outside table range [{table.min_symbol}, {table.max_symbol}]"
            )
        rng = self._range
        r = rng >> table.total_bits
        m = table.mps
        start = r * cum[i]
        width = r * (cum[i + 1] - cum[i])
        if i > m:
            start += rng - (r << table.total_bits)
        elif i == m:
            width += rng - (r << table.total_bits)
        self._low += start
        rng = width
        while rng < _TOP:
            rng <<= 8
            self._shift_low()
        self._range = rng

    def finish(self) -> bytes:
        if not self._done:
            for _ in range(FLUSH_BYTES):
                self._shift_low()
            self._done = True
        return bytes(self._out)


class RangeDecoder:
    """Mirror of :class:`RangeEncoder`.

    Feeding a stream with a different table sequence than it was encoded with
    is undefined input: the decoder still returns in-range symbols but they are
    meaningless.  Running out of bytes raises :class:`TruncatedStreamError`.
    """

    def __init__(self, data: bytes):
        self._data = bytes(data)
        if len(self._data) < FLUSH_BYTES:
            raise TruncatedStreamError(
                f"stream holds {len(self._data)} bytes, at least {FLUSH_BYTES} required"
            )
        self._pos = FLUSH_BYTES
        self._code = int.from_bytes(self._data[1:FLUSH_BYTES], "big")
        self._range = _MASK32

    @property
    def bytes_consumed(self) -> int:
        return self._pos

    def decode(self, table: CdfTable) -> int:
        cum = table.cum_freqs
        n = len(cum) - 1
        bits = table.total_bits
        rng = self._range
        code = self._code
        r = rng >> bits
        rem = rng - (r << bits)
        m = table.mps
        split = r * cum[m]
        if code < split:
            i = bisect_right(cum, code // r) - 1
        elif code < split + r * (cum[m + 1] - cum[m]) + rem:
            i = m
        else:
            i = min(bisect_right(cum, (code - rem) // r) - 1, n - 1)
        start = r * cum[i]
        width = r * (cum[i + 1] - cum[i])
        if i > m:
            start += rem
        elif i == m:
            width += rem
        code -= start
        rng = width
        while rng < _TOP:
            if self._pos >= len(self._data):
                raise TruncatedStreamError("stream ended before all symbols were decoded")
            code = ((code << 8) | self._data[self._pos]) & _MASK32
            self._pos += 1
            rng <<= 8
        self._code = code
        self._range = rng
        return table.min_symbol + i


def rc_encode(symbols: Sequence[int], tables: Sequence[CdfTable]) -> bytes:
    if len(symbols) != len(tables):
        raise ValueError(f"{len(symbols)} symbols but {len(tables)} tables")
    enc = RangeEncoder()
    for s, t in zip(symbols, tables):
        enc.encode(int(s), t)
    return enc.finish()


def rc_decode(stream: bytes, tables: Sequence[CdfTable], n: int) -> list[int]:
    if n != len(tables):
        raise ValueError(f"asked for {n} symbols but got {len(tables)} tables")
    dec = RangeDecoder(stream)
    return [dec.decode(t) for t in tables]

"""Block-DCT image codec with generalized Gaussian entropy coding.

Pipeline: optional YCbCr, level shift, edge-replicated padding, 8x8
orthonormal DCT, DC prediction from the previous block, uniform quantization,
per-subband scale fit and side information, then range coding of every
coefficient under a GGM table.  With the checkerboard context enabled the
second-pass blocks shift their GGM mean towards the mean of their four
already-coded neighbours.
"""

from __future__ import annotations

import math
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .coder import CdfTable, RangeDecoder, RangeEncoder, TruncatedStreamError
from .ggm import DEFAULT_BETA, GGMParams, discrete_pmf, ggm_fit_moment, quantize_pmf
from .imageio import ImageBuffer
from .metrics import RDCurve, RDPoint

__all__ = [
    "BitstreamError",
    "CodecConfig",
    "EncodeReport",
    "EncodedImage",
    "dct8_forward",
    "dct8_inverse",
    "decode_image",
    "encode_image",
    "encode_image_report",
    "psnr",
    "rd_loss",
    "rd_sweep",
]

MAGIC = b"GGLC"
VERSION = 1
DELTA_MIN = 0.25
LAMBDAS = (0.0018, 0.0035, 0.0067, 0.0130, 0.0250, 0.0483)

ALPHA_GRID_MIN = 0.01
ALPHA_GRID_MAX = 4096.0
ALPHA_LEVELS = 64
MAX_HALF_WIDTH = 2**11 - 1

_HEADER = struct.Struct(">4sBIIBBfffI")
_U32 = struct.Struct(">I")
_FLAG_COLOR = 0x01
_FLAG_CONTEXT = 0x02

_SIDE_TABLE = CdfTable.uniform(ALPHA_LEVELS)
_SIDE_BITS = math.log2(ALPHA_LEVELS)
_ESC_LEN_TABLE = CdfTable.uniform(64)
_RAW_TABLES = {k: CdfTable.uniform(1 << k) for k in range(1, 9)}


class BitstreamError(ValueError):
    """Malformed, truncated or corrupted codec bitstream."""


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class CodecConfig:
    delta: float = 1.0
    beta: float = DEFAULT_BETA
    color_transform: bool = False
    context_enabled: bool = False
    context_rho: float = 0.0

    def __post_init__(self):
        if not self.delta >= DELTA_MIN:
            raise ValueError(f"delta must be >= {DELTA_MIN}, got {self.delta}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 <= self.context_rho <= 1.0:
            raise ValueError(f"context_rho must be in [0, 1], got {self.context_rho}")

    def on_wire(self) -> "CodecConfig":
        """The config as the decoder sees it (real fields rounded to binary32)."""
        return replace(
            self,
            delta=_f32(self.delta),
            beta=_f32(self.beta),
            context_rho=_f32(self.context_rho),
        )


# --- transforms -------------------------------------------------------------

def _dct_matrix() -> np.ndarray:
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    d = np.sqrt(2.0 / 8.0) * np.cos(np.pi * (2 * n + 1) * k / 16.0)
    d[0, :] = np.sqrt(1.0 / 8.0)
    return d


DCT8 = _dct_matrix()


def _zigzag() -> np.ndarray:
    cells = [(r, c) for r in range(8) for c in range(8)]
    cells.sort(key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else -rc[0]))
    return np.array([r * 8 + c for r, c in cells])


ZIGZAG = _zigzag()
_UNZIGZAG = np.argsort(ZIGZAG)


def dct8_forward(block) -> np.ndarray:
    b = np.asarray(block, dtype=np.float64).reshape(8, 8)
    return DCT8 @ b @ DCT8.T


def dct8_inverse(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64).reshape(8, 8)
    return DCT8.T @ c @ DCT8


_RGB2YCC = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCC2RGB = np.linalg.inv(_RGB2YCC)
_CHROMA_OFFSET = np.array([0.0, 128.0, 128.0])


def _planes(img: ImageBuffer, cfg: CodecConfig) -> np.ndarray:
    """Level-shifted (C, Hp, Wp) planes padded to whole blocks."""
    x = img.samples.astype(np.float64)
    if cfg.color_transform and img.channels == 3:
        x = x @ _RGB2YCC.T + _CHROMA_OFFSET
    x = x - 128.0
    hp = -(-img.height // 8) * 8
    wp = -(-img.width // 8) * 8
    x = np.pad(x, ((0, hp - img.height), (0, wp - img.width), (0, 0)), mode="edge")
    return np.ascontiguousarray(np.moveaxis(x, 2, 0))


def _forward_blocks(planes: np.ndarray) -> np.ndarray:
    c, hp, wp = planes.shape
    b = planes.reshape(c, hp // 8, 8, wp // 8, 8).transpose(0, 1, 3, 2, 4)
    coeffs = np.einsum("kn,cyxnm,lm->cyxkl", DCT8, b, DCT8, optimize=True)
    return coeffs.reshape(c, hp // 8, wp // 8, 64)[..., ZIGZAG]


def _inverse_blocks(coeffs: np.ndarray) -> np.ndarray:
    c, nby, nbx, _ = coeffs.shape
    blocks = coeffs[..., _UNZIGZAG].reshape(c, nby, nbx, 8, 8)
    pix = np.einsum("kn,cyxkl,lm->cyxnm", DCT8, blocks, DCT8, optimize=True)
    return pix.transpose(0, 1, 3, 2, 4).reshape(c, nby * 8, nbx * 8)


def _reconstruct(symbols: np.ndarray, grid: tuple[int, int], width: int, height: int,
                 cfg: CodecConfig) -> ImageBuffer:
    nby, nbx = grid
    q = symbols.astype(np.int64).copy()
    q[:, :, 0] = np.cumsum(q[:, :, 0], axis=1)
    coeffs = q.reshape(q.shape[0], nby, nbx, 64).astype(np.float64) * cfg.delta
    x = _inverse_blocks(coeffs)[:, :height, :width] + 128.0
    x = np.moveaxis(x, 0, 2)
    if cfg.color_transform and x.shape[2] == 3:
        x = (x - _CHROMA_OFFSET) @ _YCC2RGB.T
    return ImageBuffer(np.clip(np.rint(x), 0, 255).astype(np.uint8))


# --- entropy models ---------------------------------------------------------

def alpha_from_index(idx: int) -> float:
    return ALPHA_GRID_MIN * (ALPHA_GRID_MAX / ALPHA_GRID_MIN) ** (idx / (ALPHA_LEVELS - 1))


def alpha_to_index(alpha: float) -> int:
    pos = math.log(alpha / ALPHA_GRID_MIN) / math.log(ALPHA_GRID_MAX / ALPHA_GRID_MIN)
    return int(min(max(round(pos * (ALPHA_LEVELS - 1)), 0), ALPHA_LEVELS - 1))


def half_width(alpha: float, beta: float) -> int:
    """Table half-width: covers the GGM out to where ``(|x|/alpha)**beta = 20``."""
    return int(min(MAX_HALF_WIDTH, max(2, math.ceil(alpha * 20.0 ** (1.0 / beta)) + 1)))


@dataclass(frozen=True)
class _Model:
    """Table over offsets ``-k .. k`` from ``center``; the end bins are escapes."""

    table: CdfTable
    k: int
    cost: tuple[float, ...]  # ideal -log2 p under the floored float PMF
    center: int = 0


class _ModelBank:
    """Models keyed by scale index and mean.

    A model depends on the mean only through its offset from the nearest
    integer, so tables are shared across means with the same fraction.
    """

    def __init__(self, beta: float):
        self.beta = beta
        self._base: dict[tuple[int, float], _Model] = {}
        self._cache: dict[tuple[int, float], _Model] = {}

    def get(self, alpha_idx: int, mu: float) -> _Model:
        key = (alpha_idx, mu)
        model = self._cache.get(key)
        if model is None:
            center = math.floor(mu + 0.5)
            frac = mu - center
            base = self._base.get((alpha_idx, frac))
            if base is None:
                alpha = alpha_from_index(alpha_idx)
                k = half_width(alpha, self.beta)
                pmf = discrete_pmf(GGMParams(frac, alpha, self.beta), -k, k)
                base = _Model(quantize_pmf(pmf), k, tuple((-np.log2(pmf.probs)).tolist()))
                self._base[(alpha_idx, frac)] = base
            model = replace(base, center=center)
            self._cache[key] = model
        return model


def _encode_escape(enc: RangeEncoder, excess: int) -> float:
    n = excess.bit_length()
    enc.encode(n, _ESC_LEN_TABLE)
    rest = n - 1
    while rest > 0:
        k = min(rest, 8)
        rest -= k
        enc.encode((excess >> rest) & ((1 << k) - 1), _RAW_TABLES[k])
    return 6.0 + max(n - 1, 0)


def _decode_escape(dec: RangeDecoder) -> int:
    n = dec.decode(_ESC_LEN_TABLE)
    if n == 0:
        return 0
    value = 1
    rest = n - 1
    while rest > 0:
        k = min(rest, 8)
        rest -= k
        value = (value << k) | dec.decode(_RAW_TABLES[k])
    return value


def _encode_symbol(enc: RangeEncoder, s: int, m: _Model) -> float:
    v = s - m.center
    k = m.k
    if v <= -k:
        enc.encode(-k, m.table)
        return m.cost[0] + _encode_escape(enc, -k - v)
    if v >= k:
        enc.encode(k, m.table)
        return m.cost[-1] + _encode_escape(enc, v - k)
    enc.encode(v, m.table)
    return m.cost[v + k]


def _decode_symbol(dec: RangeDecoder, m: _Model) -> int:
    v = dec.decode(m.table)
    k = m.k
    if v == -k:
        v -= _decode_escape(dec)
    elif v == k:
        v += _decode_escape(dec)
    return v + m.center


def _block_passes(grid: tuple[int, int], context: bool) -> tuple[np.ndarray, np.ndarray]:
    """Block indices of the first and second coding pass (raster within a pass)."""
    nby, nbx = grid
    idx = np.arange(nby * nbx)
    if not context:
        return idx, idx[:0]
    parity = (idx // nbx + idx % nbx) % 2
    return idx[parity == 0], idx[parity == 1]


def _context_means(symbols: np.ndarray, blocks: np.ndarray, grid: tuple[int, int],
                   rho: float) -> np.ndarray:
    """``rho`` times the mean of each block's in-bounds 4-neighbours, per subband."""
    nby, nbx = grid
    out = np.zeros((len(blocks), 64))
    for j, b in enumerate(blocks):
        by, bx = divmod(int(b), nbx)
        nbrs = [(by + dy) * nbx + bx + dx
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if 0 <= by + dy < nby and 0 <= bx + dx < nbx]
        out[j] = rho * symbols[nbrs].mean(axis=0)
    return out + 0.0  # no negative zeros in cache keys


def _code_channel(enc: RangeEncoder, symbols: np.ndarray, alpha_idx: Sequence[int],
                  bank: _ModelBank, grid: tuple[int, int], cfg: CodecConfig) -> float:
    first, second = _block_passes(grid, cfg.context_enabled)
    zero_models = [bank.get(int(a), 0.0) for a in alpha_idx]
    rows = symbols.tolist()
    est = 0.0
    for b in first:
        for s, m in zip(rows[b], zero_models):
            est += _encode_symbol(enc, s, m)
    if len(second):
        mus = _context_means(symbols, second, grid, cfg.context_rho).tolist()
        for b, mu_row in zip(second, mus):
            for band, (s, mu) in enumerate(zip(rows[b], mu_row)):
                est += _encode_symbol(enc, s, bank.get(int(alpha_idx[band]), mu))
    return est


def _decode_channel(dec: RangeDecoder, alpha_idx: Sequence[int], bank: _ModelBank,
                    grid: tuple[int, int], cfg: CodecConfig) -> np.ndarray:
    nblocks = grid[0] * grid[1]
    out = np.zeros((nblocks, 64), dtype=np.int64)
    first, second = _block_passes(grid, cfg.context_enabled)
    zero_models = [bank.get(int(a), 0.0) for a in alpha_idx]
    for b in first:
        out[b] = [_decode_symbol(dec, m) for m in zero_models]
    if len(second):
        mus = _context_means(out, second, grid, cfg.context_rho).tolist()
        for b, mu_row in zip(second, mus):
            out[b] = [_decode_symbol(dec, bank.get(int(alpha_idx[band]), mu))
                      for band, mu in enumerate(mu_row)]
    return out


# --- container --------------------------------------------------------------

@dataclass(frozen=True)
class EncodedImage:
    width: int
    height: int
    channels: int
    config: CodecConfig
    side_stream: bytes
    coeff_streams: tuple[bytes, ...]

    @property
    def stream_bits(self) -> int:
        """Coded payload bits (side information plus coefficients), headers excluded."""
        return 8 * (len(self.side_stream) + sum(len(s) for s in self.coeff_streams))

    def _payload(self) -> bytes:
        parts = [_U32.pack(len(self.side_stream)), self.side_stream]
        for s in self.coeff_streams:
            parts += [_U32.pack(len(s)), s]
        return b"".join(parts)

    def to_bytes(self) -> bytes:
        payload = self._payload()
        cfg = self.config
        flags = (_FLAG_COLOR if cfg.color_transform else 0) | (
            _FLAG_CONTEXT if cfg.context_enabled else 0)
        header = _HEADER.pack(MAGIC, VERSION, self.width, self.height, self.channels, flags,
                              cfg.delta, cfg.beta, cfg.context_rho, zlib.crc32(payload))
        return header + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedImage":
        if len(data) < _HEADER.size:
            raise BitstreamError(f"truncated header: {len(data)} bytes")
        magic, version, w, h, ch, flags, delta, beta, rho, crc = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BitstreamError(f"unsupported version {version}")
        payload = data[_HEADER.size:]
        if zlib.crc32(payload) != crc:
            raise BitstreamError("payload CRC mismatch")
        if ch not in (1, 3) or w < 1 or h < 1:
            raise BitstreamError(f"invalid geometry {w}x{h}x{ch}")
        streams = []
        pos = 0
        for _ in range(1 + ch):
            if pos + 4 > len(payload):
                raise BitstreamError("truncated stream length")
            (n,) = _U32.unpack_from(payload, pos)
            pos += 4
            if pos + n > len(payload):
                raise BitstreamError("truncated stream")
            streams.append(bytes(payload[pos:pos + n]))
            pos += n
        if pos != len(payload):
            raise BitstreamError("trailing bytes after last stream")
        try:
            cfg = CodecConfig(delta, beta, bool(flags & _FLAG_COLOR),
                              bool(flags & _FLAG_CONTEXT), rho)
        except ValueError as e:
            raise BitstreamError(f"invalid coding parameters: {e}") from e
        return cls(w, h, ch, cfg, streams[0], tuple(streams[1:]))


@dataclass(frozen=True, eq=False)
class EncodeReport:
    """Everything the encoder knows, for analysis and tests."""

    encoded: EncodedImage
    point: RDPoint
    reconstruction: ImageBuffer
    symbols: np.ndarray  # (channels, blocks, 64), zigzag order, DC as prediction residual
    alpha_indices: np.ndarray  # (channels, 64)
    side_estimate_bits: float
    coeff_estimate_bits: tuple[float, ...]


def encode_image_report(img: ImageBuffer, cfg: CodecConfig) -> EncodeReport:
    cfg = cfg.on_wire()
    planes = _planes(img, cfg)
    coeffs = _forward_blocks(planes)
    c, nby, nbx, _ = coeffs.shape
    grid = (nby, nbx)
    q = np.rint(coeffs / cfg.delta).astype(np.int64).reshape(c, nby * nbx, 64)
    symbols = q.copy()
    symbols[:, 1:, 0] = np.diff(q[:, :, 0], axis=1)

    alpha_idx = np.array([
        [alpha_to_index(ggm_fit_moment(symbols[ch, :, band], cfg.beta, mu=0.0,
                                       alpha_min=ALPHA_GRID_MIN).alpha)
         for band in range(64)]
        for ch in range(c)
    ])

    side = RangeEncoder()
    for v in alpha_idx.ravel().tolist():
        side.encode(v, _SIDE_TABLE)
    side_stream = side.finish()

    bank = _ModelBank(cfg.beta)
    streams, estimates = [], []
    for ch in range(c):
        enc = RangeEncoder()
        estimates.append(_code_channel(enc, symbols[ch], alpha_idx[ch], bank, grid, cfg))
        streams.append(enc.finish())

    encoded = EncodedImage(img.width, img.height, img.channels, cfg, side_stream, tuple(streams))
    recon = _reconstruct(symbols, grid, img.width, img.height, cfg)
    mse = _mse(img, recon)
    point = RDPoint(encoded.stream_bits / (img.width * img.height), _psnr_from_mse(mse), mse)
    return EncodeReport(encoded, point, recon, symbols, alpha_idx,
                        _SIDE_BITS * alpha_idx.size, tuple(estimates))


def encode_image(img: ImageBuffer, cfg: CodecConfig) -> tuple[EncodedImage, RDPoint]:
    report = encode_image_report(img, cfg)
    return report.encoded, report.point


def decode_symbols(enc: EncodedImage) -> np.ndarray:
    cfg = enc.config
    grid = (-(-enc.height // 8), -(-enc.width // 8))
    if len(enc.coeff_streams) != enc.channels:
        raise BitstreamError(f"{len(enc.coeff_streams)} coefficient streams for {enc.channels} channels")
    try:
        side = RangeDecoder(enc.side_stream)
        alpha_idx = np.array([side.decode(_SIDE_TABLE) for _ in range(64 * enc.channels)])
        alpha_idx = alpha_idx.reshape(enc.channels, 64)
        bank = _ModelBank(cfg.beta)
        return np.stack([
            _decode_channel(RangeDecoder(stream), alpha_idx[ch], bank, grid, cfg)
            for ch, stream in enumerate(enc.coeff_streams)
        ])
    except TruncatedStreamError as e:
        raise BitstreamError(str(e)) from e


def decode_image(enc: EncodedImage | bytes) -> ImageBuffer:
    if not isinstance(enc, EncodedImage):
        enc = EncodedImage.from_bytes(enc)
    grid = (-(-enc.height // 8), -(-enc.width // 8))
    return _reconstruct(decode_symbols(enc), grid, enc.width, enc.height, enc.config)


# --- evaluation -------------------------------------------------------------

def _as_array(img) -> np.ndarray:
    return img.samples if isinstance(img, ImageBuffer) else np.asarray(img)


def _mse(a, b) -> float:
    x, y = _as_array(a), _as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x.astype(np.float64) - y.astype(np.float64)
    return float(np.mean(d * d))


def _psnr_from_mse(mse: float) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def psnr(a, b) -> float:
    """PSNR in dB over all samples; identical inputs give ``math.inf``."""
    return _psnr_from_mse(_mse(a, b))


def rd_loss(point: RDPoint, lam: float) -> float:
    """``bpp + lam * mse`` with the MSE on the 0-255 sample scale."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return point.bpp + lam * point.mse


def _sweep_job(args) -> tuple[float, float]:
    img, cfg = args
    _, pt = encode_image(img, cfg)
    return pt.bpp, pt.mse


def rd_sweep(images: Sequence[ImageBuffer], deltas: Sequence[float],
             cfg: CodecConfig | None = None, workers: int = 1, label: str = "") -> RDCurve:
    """Average RD point per delta: mean bpp, PSNR of the mean MSE."""
    if len(images) < 1:
        raise ValueError("rd_sweep needs at least one image")
    if len(deltas) < 2:
        raise ValueError("rd_sweep needs at least two deltas")
    cfg = cfg or CodecConfig()
    jobs = [(img, replace(cfg, delta=float(d))) for d in deltas for img in images]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    n = len(images)
    points = []
    for i in range(len(deltas)):
        chunk = results[i * n:(i + 1) * n]
        bpp = math.fsum(r[0] for r in chunk) / n
        mse = math.fsum(r[1] for r in chunk) / n
        points.append(RDPoint(bpp, _psnr_from_mse(mse), mse))
    return RDCurve(tuple(points), label)

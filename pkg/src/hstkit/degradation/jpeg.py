"""Baseline sequential JPEG (JFIF) encoder and decoder.

The encoder writes 4:2:0 YCbCr (or single-component grayscale) with the
standard example quantization and Huffman tables. The decoder accepts any
baseline Huffman stream without restart intervals.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .image import Image, round_half_away

BASE_LUMA_Q = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64).reshape(8, 8)

BASE_CHROMA_Q = np.full((8, 8), 99, dtype=np.int64)
BASE_CHROMA_Q[:4, :4] = [[17, 18, 24, 47], [18, 21, 26, 66], [24, 26, 56, 99], [47, 66, 99, 99]]

DC_LUMA_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
DC_CHROMA_BITS = (0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0)
DC_VALS = tuple(range(12))

AC_LUMA_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
AC_LUMA_VALS = bytes.fromhex(
    "01020300041105122131410613516107227114328191a1082342b1c11552d1f0"
    "2433627282090a161718191a25262728292a3435363738393a43444546474849"
    "4a535455565758595a636465666768696a737475767778797a83848586878889"
    "8a92939495969798999aa2a3a4a5a6a7a8a9aab2b3b4b5b6b7b8b9bac2c3c4c5"
    "c6c7c8c9cad2d3d4d5d6d7d8d9dae1e2e3e4e5e6e7e8e9eaf1f2f3f4f5f6f7f8"
    "f9fa")

AC_CHROMA_BITS = (0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77)
AC_CHROMA_VALS = bytes.fromhex(
    "000102031104052131061241510761711322328108144291a1b1c109233352f0"
    "156272d10a162434e125f11718191a262728292a35363738393a434445464748"
    "494a535455565758595a636465666768696a737475767778797a828384858687"
    "88898a92939495969798999aa2a3a4a5a6a7a8a9aab2b3b4b5b6b7b8b9bac2c3"
    "c4c5c6c7c8c9cad2d3d4d5d6d7d8d9dae2e3e4e5e6e7e8e9eaf2f3f4f5f6f7f8"
    "f9fa")

MARKER_NAMES = {
    0xD8: "SOI", 0xD9: "EOI", 0xDA: "SOS", 0xDB: "DQT", 0xC4: "DHT", 0xDD: "DRI",
    0xC0: "SOF0", 0xC1: "SOF1", 0xC2: "SOF2", 0xC3: "SOF3", 0xFE: "COM",
    **{0xE0 + i: f"APP{i}" for i in range(16)},
    **{0xD0 + i: f"RST{i}" for i in range(8)},
}


class JpegDecodeError(ValueError):
    """Malformed or unsupported stream; the message names the segment."""


def _zigzag() -> np.ndarray:
    cells = sorted(((i, j) for i in range(8) for j in range(8)),
                   key=lambda p: (p[0] + p[1], p[1] if (p[0] + p[1]) % 2 == 0 else p[0]))
    return np.array([i * 8 + j for i, j in cells], dtype=np.int64)


ZIGZAG = _zigzag()  # ZIGZAG[k] = natural (row-major) index of the k-th zig-zag entry


def dct_matrix(n: int = 8) -> np.ndarray:
    """Orthonormal DCT-II basis; rows are frequencies."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    c = np.sqrt(2.0 / n) * np.cos((2 * x + 1) * k * np.pi / (2 * n))
    c[0] /= np.sqrt(2.0)
    return c


_C = dct_matrix()


def fdct(blocks: np.ndarray) -> np.ndarray:
    """Forward 2-D DCT over the trailing ``(8, 8)`` axes."""
    return _C @ blocks @ _C.T


def idct(coefs: np.ndarray) -> np.ndarray:
    return _C.T @ coefs @ _C


def quality_scale(quality: int) -> int:
    _check_quality(quality)
    return 5000 // quality if quality < 50 else 200 - 2 * quality


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    s = quality_scale(quality)
    return np.clip((base * s + 50) // 100, 1, 255)


def _check_quality(quality) -> None:
    if isinstance(quality, bool) or not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be an integer in [1, 100], got {quality!r}")


# ---------------------------------------------------------------------------
# colour


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """Full-range BT.601 on reals in [0, 255]; no rounding."""
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = (ycc[..., i].astype(np.float64) for i in range(3))
    cb, cr = cb - 128.0, cr - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def _to_8bit(x: np.ndarray) -> np.ndarray:
    return np.clip(round_half_away(x), 0, 255)


# ---------------------------------------------------------------------------
# Huffman


@dataclass(frozen=True)
class HuffmanTable:
    bits: tuple
    values: bytes

    def __post_init__(self):
        if len(self.bits) != 16 or sum(self.bits) != len(self.values):
            raise ValueError("Huffman table counts do not match its symbol list")

    def codes(self) -> dict:
        """symbol -> (code, length), canonical assignment."""
        out, code, k = {}, 0, 0
        for length, count in enumerate(self.bits, start=1):
            for _ in range(count):
                out[self.values[k]] = (code, length)
                code += 1
                k += 1
            code <<= 1
        return out

    def encoder(self) -> dict:
        """symbol -> code as a '0'/'1' string."""
        return {s: format(c, f"0{n}b") for s, (c, n) in self.codes().items()}

    def decoder(self) -> dict:
        return {format(c, f"0{n}b"): s for s, (c, n) in self.codes().items()}


STD_TABLES = {
    ("dc", 0): HuffmanTable(DC_LUMA_BITS, bytes(DC_VALS)),
    ("ac", 0): HuffmanTable(AC_LUMA_BITS, AC_LUMA_VALS),
    ("dc", 1): HuffmanTable(DC_CHROMA_BITS, bytes(DC_VALS)),
    ("ac", 1): HuffmanTable(AC_CHROMA_BITS, AC_CHROMA_VALS),
}


def _magnitude_bits(v: int) -> str:
    """Size category bits for a signed coefficient (empty for zero)."""
    n = abs(v).bit_length()
    if n == 0:
        return ""
    if v < 0:
        v += (1 << n) - 1
    return format(v, f"0{n}b")


def _extend(bits: str) -> int:
    n = len(bits)
    if n == 0:
        return 0
    v = int(bits, 2)
    return v if v >= 1 << (n - 1) else v - (1 << n) + 1


def encode_block(zz: np.ndarray, pred: int, dc_codes: dict, ac_codes: dict, out: list) -> int:
    """Append the entropy-coded bits of one zig-zag block; returns its DC."""
    dc = int(zz[0])
    mb = _magnitude_bits(dc - pred)
    out.append(dc_codes[len(mb)])
    out.append(mb)
    nz = np.flatnonzero(zz[1:]) + 1
    prev = 0
    for k in nz:
        run = int(k) - prev - 1
        while run > 15:
            out.append(ac_codes[0xF0])
            run -= 16
        mb = _magnitude_bits(int(zz[k]))
        out.append(ac_codes[(run << 4) | len(mb)])
        out.append(mb)
        prev = int(k)
    if prev != 63:
        out.append(ac_codes[0x00])
    return dc


class BitReader:
    def __init__(self, data: bytes):
        self.bits = bin(int.from_bytes(b"\x01" + data, "big"))[3:]
        self.pos = 0

    def read(self, n: int) -> str:
        if self.pos + n > len(self.bits):
            raise JpegDecodeError("entropy-coded data in SOS scan ended early")
        s = self.bits[self.pos:self.pos + n]
        self.pos += n
        return s

    def symbol(self, table: dict) -> int:
        for n in range(1, 17):
            code = self.bits[self.pos:self.pos + n]
            if len(code) < n:
                break
            if code in table:
                self.pos += n
                return table[code]
        raise JpegDecodeError("invalid Huffman code in SOS scan")


def decode_block(reader: BitReader, pred: int, dc_table: dict, ac_table: dict) -> np.ndarray:
    zz = np.zeros(64, dtype=np.int64)
    size = reader.symbol(dc_table)
    if size > 11:
        raise JpegDecodeError("DC size category out of range in SOS scan")
    zz[0] = pred + _extend(reader.read(size))
    k = 1
    while k < 64:
        rs = reader.symbol(ac_table)
        run, size = rs >> 4, rs & 15
        if size == 0:
            if run == 15:
                k += 16
                continue
            break
        k += run
        if k > 63:
            raise JpegDecodeError("AC run overflows block in SOS scan")
        zz[k] = _extend(reader.read(size))
        k += 1
    return zz


def _stuff(data: bytes) -> bytes:
    return data.replace(b"\xff", b"\xff\x00")


def _pack(bits: str) -> bytes:
    pad = (-len(bits)) % 8
    bits += "1" * pad
    if not bits:
        return b""
    return int(bits, 2).to_bytes(len(bits) // 8, "big")


# ---------------------------------------------------------------------------
# encoder


def _blocks(plane: np.ndarray) -> np.ndarray:
    """``(H, W)`` with H, W multiples of 8 -> ``(H/8, W/8, 8, 8)``."""
    H, W = plane.shape
    return plane.reshape(H // 8, 8, W // 8, 8).transpose(0, 2, 1, 3)


def _unblocks(blocks: np.ndarray) -> np.ndarray:
    by, bx = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(by * 8, bx * 8)


def _pad_edges(a: np.ndarray, m: int) -> np.ndarray:
    H, W = a.shape[:2]
    ph, pw = (-H) % m, (-W) % m
    widths = ((0, ph), (0, pw)) + ((0, 0),) * (a.ndim - 2)
    return np.pad(a, widths, mode="edge")


def quantize_blocks(samples: np.ndarray, table: np.ndarray) -> np.ndarray:
    """8-bit plane -> quantized coefficients ``(by, bx, 64)`` in zig-zag order."""
    coefs = fdct(_blocks(samples.astype(np.float64) - 128.0))
    q = round_half_away(coefs / table).astype(np.int64)
    q[..., 1:, :] = np.clip(q[..., 1:, :], -1023, 1023)
    q[..., 0, 1:] = np.clip(q[..., 0, 1:], -1023, 1023)
    q[..., 0, 0] = np.clip(q[..., 0, 0], -2047, 2047)
    by, bx = q.shape[:2]
    return q.reshape(by, bx, 64)[..., ZIGZAG]


def _segment(marker: int, payload: bytes) -> bytes:
    return struct.pack(">BBH", 0xFF, marker, len(payload) + 2) + payload


def jpeg_encode(img: Image, quality: int) -> bytes:
    _check_quality(quality)
    H, W = img.height, img.width
    if H > 65535 or W > 65535:
        raise ValueError("image too large for a baseline JPEG frame")
    tables = [scaled_table(BASE_LUMA_Q, quality), scaled_table(BASE_CHROMA_Q, quality)]
    gray = img.channels == 1

    if gray:
        y = _pad_edges(img.pixels[..., 0].astype(np.float64), 8)
        planes = [quantize_blocks(y, tables[0])]
        comps = [(1, 1, 1, 0)]  # id, h, v, table slot
    else:
        ycc = rgb_to_ycbcr(_pad_edges(img.pixels, 16))
        y = _to_8bit(ycc[..., 0])
        Hp, Wp = y.shape
        chroma = ycc[..., 1:].reshape(Hp // 2, 2, Wp // 2, 2, 2).mean(axis=(1, 3))
        planes = [quantize_blocks(y, tables[0]),
                  quantize_blocks(_to_8bit(chroma[..., 0]), tables[1]),
                  quantize_blocks(_to_8bit(chroma[..., 1]), tables[1])]
        comps = [(1, 2, 2, 0), (2, 1, 1, 1), (3, 1, 1, 1)]

    enc = {key: t.encoder() for key, t in STD_TABLES.items()}
    bits: list = []
    preds = [0] * len(comps)
    hmax = max(c[1] for c in comps)
    vmax = max(c[2] for c in comps)
    mcu_rows = planes[0].shape[0] // vmax
    mcu_cols = planes[0].shape[1] // hmax
    for my in range(mcu_rows):
        for mx in range(mcu_cols):
            for ci, (_, h, v, slot) in enumerate(comps):
                for dy in range(v):
                    for dx in range(h):
                        blk = planes[ci][my * v + dy, mx * h + dx]
                        preds[ci] = encode_block(blk, preds[ci], enc[("dc", slot)],
                                                 enc[("ac", slot)], bits)

    out = bytearray(b"\xff\xd8")
    out += _segment(0xE0, b"JFIF\x00" + bytes([1, 1, 0]) + struct.pack(">HH", 1, 1) + b"\x00\x00")
    n_tables = 1 if gray else 2
    for slot in range(n_tables):
        out += _segment(0xDB, bytes([slot]) + bytes(int(v) for v in tables[slot].ravel()[ZIGZAG]))
    sof = struct.pack(">BHHB", 8, H, W, len(comps))
    for cid, h, v, slot in comps:
        sof += bytes([cid, (h << 4) | v, slot])
    out += _segment(0xC0, sof)
    for slot in range(n_tables):
        for cls, kind in ((0, "dc"), (1, "ac")):
            t = STD_TABLES[(kind, slot)]
            out += _segment(0xC4, bytes([(cls << 4) | slot]) + bytes(t.bits) + t.values)
    sos = bytes([len(comps)])
    for cid, _, _, slot in comps:
        sos += bytes([cid, (slot << 4) | slot])
    out += _segment(0xDA, sos + bytes([0, 63, 0]))
    out += _stuff(_pack("".join(bits)))
    out += b"\xff\xd9"
    return bytes(out)


# ---------------------------------------------------------------------------
# decoder


@dataclass
class _Component:
    cid: int
    h: int
    v: int
    tq: int
    td: int = 0
    ta: int = 0


def _marker_name(m: int) -> str:
    return MARKER_NAMES.get(m, f"0xFF{m:02X}")


def jpeg_decode(stream: bytes) -> Image:
    data = bytes(stream)
    if data[:2] != b"\xff\xd8":
        raise JpegDecodeError("missing SOI marker at stream start")
    pos = 2
    qtables: dict = {}
    htables: dict = {}
    frame = None
    comps: list = []
    coef_planes = None

    while True:
        while pos < len(data) and data[pos] == 0xFF and pos + 1 < len(data) and data[pos + 1] == 0xFF:
            pos += 1  # fill bytes
        if pos + 2 > len(data):
            raise JpegDecodeError("stream truncated before EOI marker")
        if data[pos] != 0xFF:
            raise JpegDecodeError(f"expected a marker at offset {pos}, found 0x{data[pos]:02X}")
        marker = data[pos + 1]
        name = _marker_name(marker)
        pos += 2
        if marker == 0xD9:
            break
        if pos + 2 > len(data):
            raise JpegDecodeError(f"truncated {name} segment length")
        (length,) = struct.unpack(">H", data[pos:pos + 2])
        if length < 2 or pos + length > len(data):
            raise JpegDecodeError(f"truncated {name} segment")
        seg = data[pos + 2:pos + length]
        pos += length

        if marker == 0xDB:
            _parse_dqt(seg, qtables)
        elif marker == 0xC4:
            _parse_dht(seg, htables)
        elif marker == 0xC0 or marker == 0xC1:
            frame, comps = _parse_sof(seg, name)
        elif marker in (0xC2, 0xC3) or 0xC5 <= marker <= 0xCF and marker != 0xC8 and marker != 0xCC:
            raise JpegDecodeError(f"unsupported frame type {name}; only baseline is decoded")
        elif marker == 0xDD:
            (interval,) = struct.unpack(">H", seg[:2]) if len(seg) >= 2 else (None,)
            if interval is None:
                raise JpegDecodeError("truncated DRI segment")
            if interval:
                raise JpegDecodeError("restart intervals (DRI) are not supported")
        elif marker == 0xDA:
            if frame is None:
                raise JpegDecodeError("SOS segment before any SOF0 frame header")
            scomps = _parse_sos(seg, comps)
            end = _scan_end(data, pos)
            entropy = data[pos:end].replace(b"\xff\x00", b"\xff")
            pos = end
            if coef_planes is None:
                coef_planes = _alloc_planes(frame, comps)
            _decode_scan(entropy, frame, comps, scomps, htables, coef_planes)
        # APPn, COM and other segments are skipped

    if frame is None or coef_planes is None:
        raise JpegDecodeError("EOI reached without a frame header and scan (SOF0/SOS)")
    return _reconstruct(frame, comps, coef_planes, qtables)


def _parse_dqt(seg: bytes, qtables: dict) -> None:
    i = 0
    while i < len(seg):
        pq, tq = seg[i] >> 4, seg[i] & 15
        size = 128 if pq else 64
        if i + 1 + size > len(seg):
            raise JpegDecodeError("truncated DQT segment")
        raw = seg[i + 1:i + 1 + size]
        vals = np.frombuffer(raw, dtype=">u2" if pq else np.uint8).astype(np.int64)
        t = np.zeros(64, dtype=np.int64)
        t[ZIGZAG] = vals
        qtables[tq] = t.reshape(8, 8)
        i += 1 + size


def _parse_dht(seg: bytes, htables: dict) -> None:
    i = 0
    while i < len(seg):
        if i + 17 > len(seg):
            raise JpegDecodeError("truncated DHT segment")
        tc, th = seg[i] >> 4, seg[i] & 15
        bits = tuple(seg[i + 1:i + 17])
        n = sum(bits)
        if i + 17 + n > len(seg):
            raise JpegDecodeError("truncated DHT segment")
        vals = bytes(seg[i + 17:i + 17 + n])
        htables[("dc" if tc == 0 else "ac", th)] = HuffmanTable(bits, vals).decoder()
        i += 17 + n


def _parse_sof(seg: bytes, name: str):
    if len(seg) < 6:
        raise JpegDecodeError(f"truncated {name} segment")
    prec, H, W, nc = struct.unpack(">BHHB", seg[:6])
    if prec != 8:
        raise JpegDecodeError(f"{name}: only 8-bit precision is supported")
    if H == 0 or W == 0 or nc not in (1, 3) or len(seg) < 6 + 3 * nc:
        raise JpegDecodeError(f"malformed {name} segment")
    comps = []
    for k in range(nc):
        cid, hv, tq = seg[6 + 3 * k:9 + 3 * k]
        h, v = hv >> 4, hv & 15
        if not (1 <= h <= 4 and 1 <= v <= 4):
            raise JpegDecodeError(f"{name}: invalid sampling factors")
        comps.append(_Component(cid, h, v, tq))
    return (H, W), comps


def _parse_sos(seg: bytes, comps: list) -> list:
    if not seg:
        raise JpegDecodeError("truncated SOS segment")
    ns = seg[0]
    if len(seg) < 1 + 2 * ns + 3:
        raise JpegDecodeError("truncated SOS segment")
    by_id = {c.cid: c for c in comps}
    out = []
    for k in range(ns):
        cid, t = seg[1 + 2 * k], seg[2 + 2 * k]
        if cid not in by_id:
            raise JpegDecodeError(f"SOS references unknown component {cid}")
        c = by_id[cid]
        c.td, c.ta = t >> 4, t & 15
        out.append(c)
    ss, se, a = seg[1 + 2 * ns:4 + 2 * ns]
    if ss != 0 or se != 63 or a != 0:
        raise JpegDecodeError("SOS spectral selection is not baseline")
    return out


def _scan_end(data: bytes, pos: int) -> int:
    i = pos
    while True:
        i = data.find(b"\xff", i)
        if i < 0 or i + 1 >= len(data):
            raise JpegDecodeError("entropy-coded data in SOS scan is not terminated by a marker")
        nxt = data[i + 1]
        if nxt == 0x00 or 0xD0 <= nxt <= 0xD7:
            i += 2
            continue
        return i


def _geometry(frame, comps):
    H, W = frame
    hmax = max(c.h for c in comps)
    vmax = max(c.v for c in comps)
    mcux = -(-W // (8 * hmax))
    mcuy = -(-H // (8 * vmax))
    return hmax, vmax, mcux, mcuy


def _alloc_planes(frame, comps) -> list:
    _, _, mcux, mcuy = _geometry(frame, comps)
    return [np.zeros((mcuy * c.v, mcux * c.h, 64), dtype=np.int64) for c in comps]


def _decode_scan(entropy, frame, comps, scomps, htables, planes) -> None:
    reader = BitReader(entropy)
    H, W = frame
    hmax, vmax, mcux, mcuy = _geometry(frame, comps)
    tabs = []
    for c in scomps:
        try:
            tabs.append((htables[("dc", c.td)], htables[("ac", c.ta)]))
        except KeyError:
            raise JpegDecodeError(f"SOS uses Huffman table missing from DHT (component {c.cid})") from None
    idx = [comps.index(c) for c in scomps]
    preds = [0] * len(scomps)
    if len(scomps) == 1:
        c = scomps[0]
        bx = -(-(-(-W * c.h // hmax)) // 8)
        by = -(-(-(-H * c.v // vmax)) // 8)
        for y in range(by):
            for x in range(bx):
                blk = decode_block(reader, preds[0], *tabs[0])
                preds[0] = int(blk[0])
                planes[idx[0]][y, x] = blk
        return
    for my in range(mcuy):
        for mx in range(mcux):
            for k, c in enumerate(scomps):
                for dy in range(c.v):
                    for dx in range(c.h):
                        blk = decode_block(reader, preds[k], *tabs[k])
                        preds[k] = int(blk[0])
                        planes[idx[k]][my * c.v + dy, mx * c.h + dx] = blk


def _upsample(a: np.ndarray, f: int, axis: int) -> np.ndarray:
    """Linear interpolation by an integer factor, sample centres aligned."""
    if f == 1:
        return a
    n = a.shape[axis]
    pos = (np.arange(n * f) + 0.5) / f - 0.5
    lo = np.floor(pos).astype(np.int64)
    w = pos - lo
    a0 = np.take(a, np.clip(lo, 0, n - 1), axis=axis)
    a1 = np.take(a, np.clip(lo + 1, 0, n - 1), axis=axis)
    shape = [1, 1]
    shape[axis] = -1
    w = w.reshape(shape)
    return a0 * (1 - w) + a1 * w


def _reconstruct(frame, comps, planes, qtables) -> Image:
    H, W = frame
    hmax, vmax, _, _ = _geometry(frame, comps)
    full = []
    for c, zz in zip(comps, planes):
        if c.tq not in qtables:
            raise JpegDecodeError(f"SOF0 references quantization table {c.tq} missing from DQT")
        by, bx = zz.shape[:2]
        nat = np.zeros_like(zz)
        nat[..., ZIGZAG] = zz
        coefs = nat.reshape(by, bx, 8, 8) * qtables[c.tq]
        samples = _to_8bit(_unblocks(idct(coefs.astype(np.float64))) + 128.0)
        samples = _upsample(_upsample(samples, vmax // c.v, 0), hmax // c.h, 1)
        full.append(samples[:H, :W])
    if len(full) == 1:
        return Image(full[0].astype(np.uint8)[..., None])
    rgb = ycbcr_to_rgb(np.stack(full, axis=-1))
    return Image(_to_8bit(rgb).astype(np.uint8))


def jpeg_roundtrip(img: Image, quality: int) -> Image:
    return jpeg_decode(jpeg_encode(img, quality))

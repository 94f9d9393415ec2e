"""Radiance picture (RGBE) codec.

Files start with a `#?RADIANCE` header, declare
`FORMAT=32-bit_rle_rgbe`, and give the raster as `-Y <H> +X <W>` (the
only pixel ordering supported here). Scanlines of width 8..32767 may use
adaptive run-length coding of the four component planes; anything else
is flat RGBE. A texel (m_r, m_g, m_b, e) decodes to m * 2^(e - 136),
with e == 0 meaning pure black.
"""

from __future__ import annotations

import math
import re

import numpy as np


class HdrFormatError(ValueError):
    """Raised for malformed Radiance headers, rasters or RLE runs."""


_RESOLUTION_RE = re.compile(rb"^-Y (\d+) \+X (\d+)$")


def rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    """(..., 4) uint8 -> (..., 3) float32 linear radiance."""
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    mant = rgbe[..., :3].astype(np.float32)
    exp = rgbe[..., 3].astype(np.int32)
    scale = np.where(exp == 0, 0.0, np.ldexp(np.float32(1.0), exp - 136)).astype(np.float32)
    return mant * scale[..., None]


def float_to_rgbe(rgb: np.ndarray) -> np.ndarray:
    """(..., 3) float -> (..., 4) uint8, shared-exponent quantization."""
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, None)
    peak = rgb.max(axis=-1)
    out = np.zeros(rgb.shape[:-1] + (4,), dtype=np.uint8)
    live = peak >= 1e-38
    if np.any(live):
        mant, exp = np.frexp(peak[live])
        fac = mant * 256.0 / peak[live]
        quant = np.minimum(np.floor(rgb[live] * fac[..., None]), 255.0)
        out[live, :3] = quant.astype(np.uint8)
        out[live, 3] = (exp + 128).astype(np.uint8)
    return out


def _parse_header(buf: bytes):
    if not buf.startswith(b"#?RADIANCE"):
        raise HdrFormatError("bad magic: not a Radiance picture")
    pos = 0
    format_seen = None
    while True:
        end = buf.find(b"\n", pos)
        if end < 0:
            raise HdrFormatError("unterminated header")
        line = buf[pos:end]
        pos = end + 1
        if line.startswith(b"#?") or line.startswith(b"#"):
            continue
        if line == b"":
            break
        if line.startswith(b"FORMAT="):
            format_seen = line[len(b"FORMAT=") :]
    if format_seen is None:
        raise HdrFormatError("header declares no FORMAT")
    if format_seen != b"32-bit_rle_rgbe":
        raise HdrFormatError(f"unsupported FORMAT {format_seen.decode('ascii', 'replace')!r}")
    end = buf.find(b"\n", pos)
    if end < 0:
        raise HdrFormatError("missing resolution line")
    m = _RESOLUTION_RE.match(buf[pos:end])
    if not m:
        raise HdrFormatError(
            f"unsupported pixel ordering {buf[pos:end].decode('ascii', 'replace')!r}"
            " (only '-Y H +X W')"
        )
    h, w = int(m.group(1)), int(m.group(2))
    if h < 1 or w < 1:
        raise HdrFormatError(f"bad raster size {w}x{h}")
    return w, h, end + 1


def _decode_rle_scanline(buf: bytes, pos: int, width: int, y: int):
    rgbe = np.empty((width, 4), dtype=np.uint8)
    for c in range(4):
        x = 0
        while x < width:
            if pos >= len(buf):
                raise HdrFormatError(f"truncated RLE data in scanline {y}")
            code = buf[pos]
            pos += 1
            if code > 128:  # run
                count = code - 128
                if x + count > width:
                    raise HdrFormatError(f"RLE run overflows scanline {y}")
                if pos >= len(buf):
                    raise HdrFormatError(f"truncated RLE run in scanline {y}")
                rgbe[x : x + count, c] = buf[pos]
                pos += 1
            else:  # literal block
                count = code
                if count == 0 or x + count > width:
                    raise HdrFormatError(f"malformed RLE literal in scanline {y}")
                if pos + count > len(buf):
                    raise HdrFormatError(f"truncated RLE literal in scanline {y}")
                rgbe[x : x + count, c] = np.frombuffer(buf[pos : pos + count], dtype=np.uint8)
                pos += count
            x += count
    return rgbe, pos


def parse_hdr(payload: bytes) -> np.ndarray:
    """Decode a Radiance picture into (H, W, 3) float32 linear radiance."""
    w, h, pos = _parse_header(payload)
    out = np.empty((h, w, 3), dtype=np.float32)
    for y in range(h):
        use_rle = False
        if 8 <= w <= 32767 and pos + 4 <= len(payload):
            b = payload[pos : pos + 4]
            if b[0] == 2 and b[1] == 2:
                if ((b[2] << 8) | b[3]) != w:
                    raise HdrFormatError(f"RLE width mismatch in scanline {y}")
                use_rle = True
        if use_rle:
            rgbe, pos = _decode_rle_scanline(payload, pos + 4, w, y)
        else:
            need = w * 4
            if pos + need > len(payload):
                raise HdrFormatError(f"truncated scanline {y}")
            rgbe = np.frombuffer(payload[pos : pos + need], dtype=np.uint8).reshape(w, 4)
            pos += need
        out[y] = rgbe_to_float(rgbe)
    return out


def load_hdr(path) -> np.ndarray:
    with open(path, "rb") as f:
        return parse_hdr(f.read())


def _encode_rle_plane(plane: np.ndarray) -> bytes:
    """Adaptive RLE for one component plane: runs of >= 4 as run blocks."""
    out = bytearray()
    n = len(plane)
    x = 0
    while x < n:
        run = 1
        while x + run < n and run < 127 and plane[x + run] == plane[x]:
            run += 1
        if run >= 4:
            out.append(128 + run)
            out.append(int(plane[x]))
            x += run
        else:
            start = x
            while x < n and x - start < 128:
                nxt = 1
                while x + nxt < n and nxt < 4 and plane[x + nxt] == plane[x]:
                    nxt += 1
                if nxt >= 4:
                    break
                x += 1
            out.append(x - start)
            out.extend(plane[start:x].tobytes())
    return bytes(out)


def write_hdr(path, rgb: np.ndarray) -> None:
    """Write (H, W, 3) linear radiance as a Radiance picture.

    Widths in the RLE-capable range get run-length coded scanlines,
    everything else is flat RGBE.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) radiance, got {rgb.shape}")
    h, w = rgb.shape[:2]
    rgbe = float_to_rgbe(rgb)
    with open(path, "wb") as f:
        f.write(b"#?RADIANCE\n")
        f.write(b"FORMAT=32-bit_rle_rgbe\n\n")
        f.write(f"-Y {h} +X {w}\n".encode("ascii"))
        if 8 <= w <= 32767:
            for y in range(h):
                f.write(bytes([2, 2, (w >> 8) & 0xFF, w & 0xFF]))
                for c in range(4):
                    f.write(_encode_rle_plane(rgbe[y, :, c]))
        else:
            f.write(rgbe.tobytes())

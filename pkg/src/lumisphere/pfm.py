"""Portable float map I/O.

Maps, normal fields and linear images travel as PFM: `PF` for 3-channel,
`Pf` for 1-channel, negative scale marking little-endian scanlines. PFM
stores scanlines bottom-to-top; arrays here are row 0 first, so writers
flip and readers flip back. Validity masks ride in a `<name>.mask.pfm`
sidecar holding {0, 1}.
"""

from __future__ import annotations

import os

import numpy as np


class PfmFormatError(ValueError):
    """Raised for malformed PFM headers or truncated payloads."""


def write_pfm(path, data: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) float array as little-endian PFM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        magic = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM holds (H, W) or (H, W, 3) data, got {data.shape}")
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data[::-1]).astype("<f4").tobytes())


def _read_token(f) -> bytes:
    tok = b""
    while True:
        c = f.read(1)
        if c == b"":
            raise PfmFormatError("unexpected end of PFM header")
        if c in b" \t\r\n":
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into (H, W) or (H, W, 3) float32, row 0 on top."""
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise PfmFormatError(f"bad PFM magic {magic!r}")
        try:
            w = int(_read_token(f))
            h = int(_read_token(f))
            scale = float(_read_token(f))
        except ValueError as e:
            raise PfmFormatError(f"bad PFM header: {e}") from e
        if w <= 0 or h <= 0:
            raise PfmFormatError(f"bad PFM dimensions {w}x{h}")
        dtype = "<f4" if scale < 0 else ">f4"
        count = w * h * channels
        payload = f.read(count * 4)
        if len(payload) != count * 4:
            raise PfmFormatError(
                f"truncated PFM payload: expected {count * 4} bytes, got {len(payload)}"
            )
        data = np.frombuffer(payload, dtype=dtype).reshape(h, w, channels)[::-1]
        if abs(scale) != 1.0:
            data = data * abs(scale)
    return np.ascontiguousarray(data[..., 0] if channels == 1 else data)


def mask_path(path) -> str:
    base, ext = os.path.splitext(os.fspath(path))
    return base + ".mask" + ext


def write_masked(path, data: np.ndarray, mask: np.ndarray) -> None:
    """Write data plus its {0,1} mask sidecar."""
    write_pfm(path, data)
    write_pfm(mask_path(path), np.asarray(mask, dtype=np.float32))


def read_masked(path):
    """Read (data, mask) written by write_masked."""
    data = read_pfm(path)
    mask = read_pfm(mask_path(path)) > 0.5
    return data, mask

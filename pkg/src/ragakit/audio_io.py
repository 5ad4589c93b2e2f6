"""WAV decoding, resampling and fixed-length segmentation."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import CorruptHeader, EmptyInput, UnsupportedEncoding

ANALYSIS_RATE = 22050

_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, alpha: float) -> "AudioClip":
        return AudioClip(self.samples * alpha, self.sample_rate, self.source_id)


def _parse_chunks(data: bytes) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader("missing RIFF/WAVE signature")
    chunks = {}
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise CorruptHeader(f"truncated {cid!r} chunk")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def decode_wav(data: bytes) -> tuple[np.ndarray, int]:
    """Decode RIFF/WAVE bytes into a (frames, channels) float64 array and its rate."""
    chunks = _parse_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise CorruptHeader("missing fmt or data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise CorruptHeader("fmt chunk too short")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _FMT_EXTENSIBLE and len(fmt) >= 26:
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels")
    if rate == 0 or block_align == 0:
        raise CorruptHeader("zero sample rate or block alignment")

    if tag == _FMT_PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif tag == _FMT_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedEncoding(f"format tag {tag} with {bits} bits per sample")
    if block_align != channels * dtype.itemsize:
        raise CorruptHeader("block alignment disagrees with channel layout")

    raw = chunks[b"data"]
    n = len(raw) // block_align
    frames = np.frombuffer(raw[: n * block_align], dtype=dtype).reshape(n, channels)
    if tag == _FMT_PCM:
        x = frames.astype(np.float64) / 32768.0
    else:
        x = np.clip(frames.astype(np.float64), -1.0, 1.0)
    return x, rate


def load_audio(path) -> AudioClip:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    x, rate = decode_wav(path.read_bytes())
    return AudioClip(x.mean(axis=1), rate, path.stem)


def encode_wav(samples: np.ndarray, sample_rate: int, encoding: str = "pcm16") -> bytes:
    """Encode mono or (frames, channels) samples in [-1, 1] as WAV bytes."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    if encoding == "pcm16":
        body = np.clip(np.round(x * 32767.0), -32768, 32767).astype("<i2").tobytes()
        tag, width = _FMT_PCM, 2
    elif encoding == "float32":
        body = x.astype("<f4").tobytes()
        tag, width = _FMT_FLOAT, 4
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    fmt = struct.pack(
        "<HHIIHH", tag, channels, sample_rate, sample_rate * channels * width,
        channels * width, width * 8,
    )
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(body)) + body
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def save_audio(path, clip: AudioClip, encoding: str = "pcm16") -> None:
    Path(path).write_bytes(encode_wav(clip.samples, clip.sample_rate, encoding))


def resample(clip: AudioClip, target_rate: int = ANALYSIS_RATE) -> AudioClip:
    """Band-limited (Kaiser-windowed sinc, polyphase) rate conversion."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return clip
    ratio = Fraction(target_rate, clip.sample_rate)
    y = resample_poly(clip.samples, ratio.numerator, ratio.denominator)
    return AudioClip(y, target_rate, clip.source_id)


def segment(clip: AudioClip, seconds: float = 5.0) -> list[AudioClip]:
    """Split into consecutive non-overlapping windows; the short tail is dropped."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    width = int(round(seconds * clip.sample_rate))
    count = len(clip.samples) // width
    if count == 0:
        raise EmptyInput(
            f"clip of {len(clip.samples)} samples is shorter than one {width}-sample window"
        )
    return [
        AudioClip(clip.samples[i * width : (i + 1) * width], clip.sample_rate,
                  f"{clip.source_id}_seg{i:03d}")
        for i in range(count)
    ]

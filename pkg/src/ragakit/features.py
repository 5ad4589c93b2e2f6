"""Frame-level spectral features and the 30-value clip descriptor.

All routines share one framing: ``frame_len``-sample frames every ``hop``
samples, centred on ``t * hop`` with reflect padding of ``frame_len // 2``
at both ends, periodic Hann window. Matrices are laid out (bins, frames).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct

from .audio_io import AudioClip
from .errors import InputTooShort
from .fft import is_power_of_two, rfft

FRAME_LEN = 2048
HOP = 512
N_MELS = 128
N_MFCC = 19
LOG_EPS = 1e-10
ROLLOFF_PERCENT = 0.85
A4_HZ = 440.0
# C0 in equal temperament referenced to A4 = 440 Hz
C0_HZ = A4_HZ * 2.0 ** (-57 / 12)
CHROMA_FMIN = 32.0
CENS_STEPS = (0.05, 0.1, 0.2, 0.4)
CENS_LEVELS = (0.25, 0.5, 0.75, 1.0)

FEATURE_NAMES = (
    [f"mfcc{i:02d}" for i in range(N_MFCC)]
    + ["chroma_stft", "chroma_cens", "rmse", "pitch_mean", "pitch_std",
       "mag_mean", "mag_std", "centroid", "bandwidth", "rolloff", "zcr"]
)


@dataclass
class FrameMatrix:
    values: np.ndarray
    bin_axis: str
    frame_rate: float

    @property
    def shape(self):
        return self.values.shape


@dataclass
class PitchTrack:
    pitches: np.ndarray
    magnitudes: np.ndarray


@dataclass
class FrameDescriptors:
    rmse: np.ndarray
    centroid: np.ndarray
    bandwidth: np.ndarray
    rolloff: np.ndarray
    zcr: np.ndarray


def hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def _check_framing(n_samples: int, frame_len: int, hop: int) -> None:
    if not is_power_of_two(frame_len):
        raise ValueError(f"frame_len must be a power of two, got {frame_len}")
    if not 0 < hop <= frame_len:
        raise ValueError(f"hop must be in (0, frame_len], got {hop}")
    if n_samples < frame_len:
        raise InputTooShort(f"{n_samples} samples < frame length {frame_len}")


def frames(clip: AudioClip, frame_len: int = FRAME_LEN, hop: int = HOP) -> np.ndarray:
    """Centred, reflect-padded time frames, shape (frame_len, n_frames)."""
    x = np.asarray(clip.samples, dtype=np.float64)
    _check_framing(len(x), frame_len, hop)
    padded = np.pad(x, frame_len // 2, mode="reflect")
    return sliding_window_view(padded, frame_len)[::hop].T


def fft_frequencies(sample_rate: int, n_fft: int) -> np.ndarray:
    return np.arange(n_fft // 2 + 1) * sample_rate / n_fft


def stft(clip: AudioClip, frame_len: int = FRAME_LEN, hop: int = HOP) -> FrameMatrix:
    fr = frames(clip, frame_len, hop)
    spec = rfft((fr * hann(frame_len)[:, None]).T).T
    return FrameMatrix(spec, "fft_bin", clip.sample_rate / hop)


# mel scale, Slaney flavour: linear to 1 kHz, logarithmic above
_F_SP = 200.0 / 3
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOGSTEP = np.log(6.4) / 27.0


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    mel = f / _F_SP
    log_part = f >= _MIN_LOG_HZ
    safe = np.where(log_part, f, _MIN_LOG_HZ)
    return np.where(log_part, _MIN_LOG_MEL + np.log(safe / _MIN_LOG_HZ) / _LOGSTEP, mel)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    return np.where(
        m >= _MIN_LOG_MEL,
        _MIN_LOG_HZ * np.exp(_LOGSTEP * (m - _MIN_LOG_MEL)),
        _F_SP * m,
    )


def mel_centers(n_mels: int = N_MELS, fmin: float = 0.0, fmax: float = 11025.0) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


@lru_cache(maxsize=16)
def _mel_filterbank_cached(sample_rate, n_fft, n_mels, fmin, fmax):
    freqs = fft_frequencies(sample_rate, n_fft)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights *= 2.0 / (hi - lo)
    weights.setflags(write=False)
    return weights


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int = N_MELS,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Area-normalized triangular filters, shape (n_mels, 1 + n_fft // 2)."""
    if fmax is None:
        fmax = sample_rate / 2
    if not 0 <= fmin < fmax <= sample_rate / 2:
        raise ValueError(f"need 0 <= fmin < fmax <= Nyquist, got {fmin}, {fmax}")
    return _mel_filterbank_cached(sample_rate, n_fft, n_mels, float(fmin), float(fmax))


def power_spectrogram(spec: FrameMatrix) -> FrameMatrix:
    return FrameMatrix(np.abs(spec.values) ** 2, "fft_bin", spec.frame_rate)


def _mel_from_stft(spec: FrameMatrix, sample_rate: int) -> FrameMatrix:
    n_fft = 2 * (spec.values.shape[0] - 1)
    fb = mel_filterbank(sample_rate, n_fft)
    return FrameMatrix(fb @ (np.abs(spec.values) ** 2), "mel_band", spec.frame_rate)


def mel_spectrogram(clip: AudioClip) -> FrameMatrix:
    return _mel_from_stft(stft(clip), clip.sample_rate)


def mfcc_from_mel(mel: FrameMatrix, n_coeff: int = N_MFCC) -> FrameMatrix:
    log_mel = np.log(mel.values + LOG_EPS)
    coeffs = dct(log_mel, type=2, axis=0, norm="ortho")[:n_coeff]
    return FrameMatrix(coeffs, "mfcc_coeff", mel.frame_rate)


def mfcc(clip: AudioClip, n_coeff: int = N_MFCC) -> FrameMatrix:
    return mfcc_from_mel(mel_spectrogram(clip), n_coeff)


def pitch_class(freq_hz) -> np.ndarray:
    """Fractional pitch class in [0, 12), 0 = C."""
    return np.mod(12.0 * np.log2(np.asarray(freq_hz, dtype=np.float64) / C0_HZ), 12.0)


@lru_cache(maxsize=16)
def chroma_weights(sample_rate: int, n_fft: int) -> np.ndarray:
    """Binary (12, bins) map assigning each FFT bin to its nearest pitch class.

    Bins below ``CHROMA_FMIN`` carry no weight: one bin spans several
    semitones there.
    """
    freqs = fft_frequencies(sample_rate, n_fft)
    weights = np.zeros((12, len(freqs)))
    usable = freqs >= CHROMA_FMIN
    classes = np.round(pitch_class(freqs[usable])).astype(int) % 12
    weights[classes, np.flatnonzero(usable)] = 1.0
    weights.setflags(write=False)
    return weights


def _normalize_columns(m: np.ndarray, order) -> np.ndarray:
    norms = np.linalg.norm(m, ord=order, axis=0)
    out = np.zeros_like(m)
    nz = norms > 0
    out[:, nz] = m[:, nz] / norms[nz]
    return out


def _chroma_from_stft(spec: FrameMatrix, sample_rate: int) -> FrameMatrix:
    n_fft = 2 * (spec.values.shape[0] - 1)
    raw = chroma_weights(sample_rate, n_fft) @ (np.abs(spec.values) ** 2)
    return FrameMatrix(_normalize_columns(raw, np.inf), "pitch_class", spec.frame_rate)


def chroma_stft(clip: AudioClip) -> FrameMatrix:
    return _chroma_from_stft(stft(clip), clip.sample_rate)


def cens_from_chroma(chroma: FrameMatrix, smooth_len: int = 41, downsample: int = 10) -> FrameMatrix:
    c = _normalize_columns(chroma.values, 1)
    quant = np.zeros_like(c)
    for step, level in zip(CENS_STEPS, CENS_LEVELS):
        quant[c >= step] = level
    # symmetric Hann with smooth_len non-zero taps
    win = np.hanning(smooth_len + 2)[1:-1]
    win = win / win.sum()
    smoothed = np.apply_along_axis(lambda row: np.convolve(row, win, mode="same"), 1, quant)
    return FrameMatrix(
        _normalize_columns(smoothed[:, ::downsample], 2),
        "pitch_class",
        chroma.frame_rate / downsample,
    )


def chroma_cens(clip: AudioClip, smooth_len: int = 41, downsample: int = 10) -> FrameMatrix:
    return cens_from_chroma(chroma_stft(clip), smooth_len, downsample)


def _descriptors(clip: AudioClip, spec: FrameMatrix, frame_len: int, hop: int) -> FrameDescriptors:
    fr = frames(clip, frame_len, hop)
    rmse = np.sqrt(np.mean(fr ** 2, axis=0))
    positive = fr >= 0
    zcr = np.count_nonzero(positive[1:] != positive[:-1], axis=0) / (frame_len - 1)

    S = np.abs(spec.values)
    f = fft_frequencies(clip.sample_rate, frame_len)[:, None]
    total = S.sum(axis=0)
    live = total > 0
    safe_total = np.where(live, total, 1.0)
    centroid = np.where(live, (f * S).sum(axis=0) / safe_total, 0.0)
    spread = (S * (f - centroid) ** 2).sum(axis=0) / safe_total
    bandwidth = np.where(live, np.sqrt(spread), 0.0)
    cum = np.cumsum(S, axis=0)
    idx = np.argmax(cum >= ROLLOFF_PERCENT * total, axis=0)
    rolloff = np.where(live, f[idx, 0], 0.0)
    return FrameDescriptors(rmse, centroid, bandwidth, rolloff, zcr)


def frame_descriptors(clip: AudioClip, frame_len: int = FRAME_LEN, hop: int = HOP) -> FrameDescriptors:
    return _descriptors(clip, stft(clip, frame_len, hop), frame_len, hop)


def _piptrack_from_stft(spec: FrameMatrix, sample_rate: int, threshold: float) -> PitchTrack:
    S = np.abs(spec.values)
    n_fft = 2 * (S.shape[0] - 1)
    pitches = np.zeros_like(S)
    mags = np.zeros_like(S)
    a, b, c = S[:-2], S[1:-1], S[2:]
    floor = threshold * S.max(axis=0, keepdims=True)
    peak = (b > a) & (b >= c) & (b > floor)
    k, t = np.nonzero(peak)
    a, b, c = a[k, t], b[k, t], c[k, t]
    shift = 0.5 * (a - c) / (a - 2 * b + c)
    rows = k + 1
    pitches[rows, t] = (rows + shift) * sample_rate / n_fft
    mags[rows, t] = b - 0.25 * (a - c) * shift
    return PitchTrack(pitches, mags)


def piptrack(clip: AudioClip, threshold: float = 0.1) -> PitchTrack:
    """Spectral peaks above ``threshold`` x frame maximum, refined by a
    parabola through the peak bin and its two neighbours."""
    return _piptrack_from_stft(stft(clip), clip.sample_rate, threshold)


def _mean_std(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return 0.0, 0.0
    return float(x.mean()), float(x.std())


def extract_feature_vector(clip: AudioClip) -> np.ndarray:
    """The 30-value clip descriptor, ordered as ``FEATURE_NAMES``."""
    spec = stft(clip)
    mel = _mel_from_stft(spec, clip.sample_rate)
    chroma = _chroma_from_stft(spec, clip.sample_rate)
    cens = cens_from_chroma(chroma)
    desc = _descriptors(clip, spec, FRAME_LEN, HOP)
    track = _piptrack_from_stft(spec, clip.sample_rate, 0.1)
    voiced = track.pitches > 0

    out = np.empty(len(FEATURE_NAMES))
    out[:N_MFCC] = mfcc_from_mel(mel).values.mean(axis=1)
    out[19] = chroma.values.mean()
    out[20] = cens.values.mean()
    out[21] = desc.rmse.mean()
    out[22:24] = _mean_std(track.pitches[voiced])
    out[24:26] = _mean_std(track.magnitudes[voiced])
    out[26] = desc.centroid.mean()
    out[27] = desc.bandwidth.mean()
    out[28] = desc.rolloff.mean()
    out[29] = desc.zcr.mean()
    return out

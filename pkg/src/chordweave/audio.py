"""Audio buffers, RIFF/WAVE I/O, resampling, and the STFT.

Samples live in float64 arrays shaped (channels, n) in [-1, 1].  The WAV
codec handles the two encodings that actually occur in this pipeline:
16-bit PCM and 32-bit IEEE float.  Everything is deliberately plain
numpy so the numerical behaviour is easy to pin down in tests.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass

import numpy as np


class WavFormatError(ValueError):
    """Unreadable WAV data: truncated, non-RIFF, or an unsupported codec."""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Immutable (channels, n) float64 audio at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples.reshape(1, -1)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 1-D or (channels, n), got shape {samples.shape}")
        if samples.shape[0] < 1:
            raise ValueError("need at least one channel")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )


def to_mono(buffer: AudioBuffer) -> AudioBuffer:
    """Average the channels; a mono buffer passes through unchanged."""
    if buffer.n_channels == 1:
        return buffer
    return AudioBuffer(buffer.samples.mean(axis=0), buffer.sample_rate)


def resample_linear(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Linear-interpolation resampling to target_rate.

    Output length is round(n * target / source); sample k of the output
    reads the source at time k / target_rate.  Identity when the rates
    already match.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be > 0")
    if target_rate == buffer.sample_rate:
        return buffer
    n_out = int(round(buffer.n_samples * target_rate / buffer.sample_rate))
    if buffer.n_samples == 0 or n_out == 0:
        return AudioBuffer(np.zeros((buffer.n_channels, 0)), target_rate)
    src_positions = np.arange(buffer.n_samples, dtype=np.float64)
    out_positions = np.arange(n_out, dtype=np.float64) * (buffer.sample_rate / target_rate)
    out = np.stack([np.interp(out_positions, src_positions, ch) for ch in buffer.samples])
    return AudioBuffer(out, target_rate)


_PCM16_SCALE = 32768.0
_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode RIFF/WAVE bytes (PCM16 or float32) into an AudioBuffer."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE stream")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavFormatError("truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise WavFormatError("data chunk shorter than its declared size")
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)
    if fmt is None:
        raise WavFormatError("missing fmt chunk")
    if payload is None:
        raise WavFormatError("missing data chunk")
    codec, n_channels, sample_rate, _, block_align, bits = fmt
    if n_channels < 1:
        raise WavFormatError("fmt chunk declares zero channels")
    if codec == _WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2")
        samples = raw.astype(np.float64) / _PCM16_SCALE
    elif codec == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload, dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise WavFormatError(f"unsupported codec: format tag {codec}, {bits} bits per sample")
    if samples.size % n_channels:
        raise WavFormatError("data chunk does not hold a whole number of sample frames")
    frames = samples.reshape(-1, n_channels).T
    return AudioBuffer(frames, sample_rate)


def encode_wav(buffer: AudioBuffer, encoding: str = "pcm16") -> bytes:
    """Encode a buffer as RIFF/WAVE bytes; encoding is "pcm16" or "float32"."""
    interleaved = buffer.samples.T.reshape(-1)
    if encoding == "pcm16":
        scaled = np.round(interleaved * _PCM16_SCALE)
        payload = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
        codec, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = interleaved.astype("<f4").tobytes()
        codec, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = buffer.n_channels * bits // 8
    fmt_body = struct.pack(
        "<HHIIHH",
        codec,
        buffer.n_channels,
        buffer.sample_rate,
        buffer.sample_rate * block_align,
        block_align,
        bits,
    )
    pad = b"\x00" if len(payload) & 1 else b""
    riff_size = 4 + (8 + len(fmt_body)) + (8 + len(payload) + len(pad))
    return b"".join(
        [
            b"RIFF",
            struct.pack("<I", riff_size),
            b"WAVE",
            b"fmt ",
            struct.pack("<I", len(fmt_body)),
            fmt_body,
            b"data",
            struct.pack("<I", len(payload)),
            payload,
            pad,
        ]
    )


def read_wav(path_or_file) -> AudioBuffer:
    """Read a WAV file from a path or a binary file-like object."""
    if hasattr(path_or_file, "read"):
        return decode_wav(path_or_file.read())
    with open(os.fspath(path_or_file), "rb") as fh:
        return decode_wav(fh.read())


def write_wav(buffer: AudioBuffer, path_or_file, encoding: str = "pcm16") -> None:
    data = encode_wav(buffer, encoding)
    if hasattr(path_or_file, "write"):
        path_or_file.write(data)
        return
    with open(os.fspath(path_or_file), "wb") as fh:
        fh.write(data)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Magnitude STFT frames, shaped (frames, bins)."""

    magnitudes: np.ndarray
    sample_rate: int
    window_size: int
    hop_size: int

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 2:
            raise ValueError("magnitudes must be 2-D")
        mags = mags.copy()
        mags.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def frame_rate_hz(self) -> float:
        return self.sample_rate / self.hop_size

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.window_size

    def frame_time_s(self, index: int) -> float:
        """Centre time of analysis frame `index`."""
        return (index * self.hop_size + self.window_size / 2) / self.sample_rate

    def __eq__(self, other) -> bool:
        if not isinstance(other, Spectrogram):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.window_size == other.window_size
            and self.hop_size == other.hop_size
            and np.array_equal(self.magnitudes, other.magnitudes)
        )


def stft(buffer: AudioBuffer, window_size: int, hop_size: int) -> Spectrogram:
    """Hann-windowed magnitude STFT of a mono buffer, no padding.

    Frame count is floor((n - window) / hop) + 1; a clip shorter than one
    window yields zero frames.
    """
    if buffer.n_channels != 1:
        raise ValueError("stft expects a mono buffer; call to_mono first")
    if window_size < 2 or window_size & (window_size - 1):
        raise ValueError("window_size must be a power of two >= 2")
    if hop_size < 1:
        raise ValueError("hop_size must be >= 1")
    x = buffer.samples[0]
    n_bins = window_size // 2 + 1
    if buffer.n_samples < window_size:
        return Spectrogram(np.zeros((0, n_bins)), buffer.sample_rate, window_size, hop_size)
    n_frames = (buffer.n_samples - window_size) // hop_size + 1
    window = np.hanning(window_size)
    mags = np.empty((n_frames, n_bins))
    # Chunked so the windowed-frame scratch matrix stays modest.
    block = max(1, 2**18 // window_size)
    offsets = np.arange(window_size)
    for start in range(0, n_frames, block):
        stop = min(start + block, n_frames)
        idx = np.arange(start, stop)[:, None] * hop_size + offsets[None, :]
        mags[start:stop] = np.abs(np.fft.rfft(x[idx] * window, axis=1))
    return Spectrogram(mags, buffer.sample_rate, window_size, hop_size)

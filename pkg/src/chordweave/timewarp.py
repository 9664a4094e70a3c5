"""Time-scale modification by waveform-similarity overlap-add.

Stretching shifts durations without shifting pitch: Hann-windowed grains
are laid down at a fixed synthesis hop while their analysis positions
slide through the input at the stretch ratio, each nudged within a
search tolerance to best continue the previous grain.  Anchor maps apply
a different ratio per segment so specific instants (downbeats) land
exactly where asked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .beats import BeatGrid

RATIO_MIN = 0.25
RATIO_MAX = 4.0


@dataclass(frozen=True)
class WsolaConfig:
    """Grain length, synthesis hop (defaults to half a grain), and search range."""

    frame_length: int = 1024
    synthesis_hop: int | None = None
    search_tolerance: int = 512

    def __post_init__(self):
        if self.frame_length < 4 or self.frame_length % 2:
            raise ValueError("frame_length must be an even integer >= 4")
        if self.synthesis_hop is not None and not 0 < self.synthesis_hop <= self.frame_length:
            raise ValueError("synthesis_hop must lie in 1..frame_length")
        if self.search_tolerance < 0:
            raise ValueError("search_tolerance must be >= 0")

    @property
    def hop(self) -> int:
        return self.frame_length // 2 if self.synthesis_hop is None else self.synthesis_hop


def _fft_correlate_valid(region: np.ndarray, template: np.ndarray) -> np.ndarray:
    """scores[j] = dot(region[j : j+len(template)], template)."""
    n = len(region)
    m = len(template)
    size = 1 << (n + m - 1).bit_length()
    spectrum = np.fft.rfft(region, size) * np.fft.rfft(template[::-1], size)
    full = np.fft.irfft(spectrum, size)
    return full[m - 1 : n]


def _wsola_mono_offsets(x: np.ndarray, target_len: int, config: WsolaConfig) -> np.ndarray:
    """Chosen analysis start per synthesis grain for stretching x to target_len."""
    n = len(x)
    grain = config.frame_length
    hop = config.hop
    max_start = n - grain
    n_grains = 1 if target_len <= grain else int(np.ceil((target_len - grain) / hop)) + 1
    starts = np.zeros(n_grains, dtype=np.int64)
    prev = 0
    for k in range(n_grains):
        nominal = int(round(k * hop * n / target_len))
        nominal = min(max(nominal, 0), max_start)
        if k == 0:
            starts[0] = prev = nominal
            continue
        template = x[prev + hop : prev + hop + grain]
        if len(template) < grain:
            template = np.concatenate([template, np.zeros(grain - len(template))])
        lo = max(nominal - config.search_tolerance, 0)
        hi = min(nominal + config.search_tolerance, max_start)
        if hi <= lo:
            starts[k] = prev = min(max(nominal, lo), max(hi, lo))
            continue
        scores = _fft_correlate_valid(x[lo : hi + grain], template)
        # Near-ties resolve toward the nominal offset: in silence every
        # score is ~0 and a bare argmax would drag each grain to the
        # window edge, shifting content and never reading the last
        # samples of the buffer.
        best = float(scores.max())
        tol = 1e-6 * max(abs(best), 1e-12)
        near = np.flatnonzero(scores >= best - tol)
        starts[k] = prev = lo + int(near[np.argmin(np.abs(near + lo - nominal))])
    return starts


def _overlap_add(x: np.ndarray, starts: np.ndarray, target_len: int, config: WsolaConfig):
    grain = config.frame_length
    hop = config.hop
    window = np.hanning(grain)
    length = (len(starts) - 1) * hop + grain
    out = np.zeros(length)
    weight = np.zeros(length)
    for k, start in enumerate(starts):
        seg = x[start : start + grain]
        if len(seg) < grain:
            seg = np.concatenate([seg, np.zeros(grain - len(seg))])
        pos = k * hop
        out[pos : pos + grain] += seg * window
        weight[pos : pos + grain] += window
    np.divide(out, weight, out=out, where=weight > 1e-8)
    return out[:target_len]


def _wsola_to_length(samples: np.ndarray, target_len: int, config: WsolaConfig) -> np.ndarray:
    """Stretch (channels, n) samples to exactly target_len samples.

    Grain offsets are searched on the channel mean so channels stay
    phase-locked.
    """
    if samples.shape[1] == target_len:
        return samples.copy()
    if target_len == 0:
        return np.zeros((samples.shape[0], 0))
    if samples.shape[1] == 0:
        return np.zeros((samples.shape[0], target_len))
    if samples.shape[1] <= config.frame_length or target_len <= config.frame_length:
        # Too short to grain: fall back to resampling the waveform.
        src = np.arange(samples.shape[1], dtype=np.float64)
        dst = np.linspace(0.0, samples.shape[1] - 1, target_len)
        return np.stack([np.interp(dst, src, ch) for ch in samples])
    mono = samples.mean(axis=0) if samples.shape[0] > 1 else samples[0]
    starts = _wsola_mono_offsets(mono, target_len, config)
    return np.stack([_overlap_add(ch, starts, target_len, config) for ch in samples])


def wsola_stretch(
    buffer: AudioBuffer, ratio: float, config: WsolaConfig | None = None
) -> AudioBuffer:
    """Stretch a buffer's duration by `ratio` without changing its pitch.

    ratio 2.0 doubles the duration, 0.5 halves it; the allowed range is
    [0.25, 4].  ratio 1.0 returns the samples untouched.  The output
    length is exactly round(ratio * n) samples.
    """
    if config is None:
        config = WsolaConfig()
    if not RATIO_MIN <= ratio <= RATIO_MAX:
        raise ValueError(f"stretch ratio {ratio} outside [{RATIO_MIN}, {RATIO_MAX}]")
    if buffer.n_samples < config.frame_length:
        raise ValueError(
            f"buffer of {buffer.n_samples} samples is too short for "
            f"frame length {config.frame_length}"
        )
    if ratio == 1.0:
        return buffer
    target_len = int(round(buffer.n_samples * ratio))
    return AudioBuffer(_wsola_to_length(buffer.samples, target_len, config), buffer.sample_rate)


@dataclass(frozen=True)
class AnchorMap:
    """(source_s, target_s) pairs, strictly increasing, starting at (0, 0)."""

    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(s), float(t)) for s, t in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if len(pairs) < 2:
            raise ValueError("an anchor map needs at least two pairs")
        if pairs[0] != (0.0, 0.0):
            raise ValueError("the first anchor pair must be (0, 0)")
        for (s0, t0), (s1, t1) in zip(pairs, pairs[1:]):
            if s1 <= s0 or t1 <= t0:
                raise ValueError("anchor pairs must strictly increase in both coordinates")

    @property
    def source_duration_s(self) -> float:
        return self.pairs[-1][0]

    @property
    def target_duration_s(self) -> float:
        return self.pairs[-1][1]


def build_anchor_map(source: BeatGrid, target: BeatGrid) -> AnchorMap:
    """Pair the k-th source downbeat with the k-th target downbeat.

    The longer downbeat list is truncated to the shorter; a leading
    (0, 0) is supplied when absent.  Leading pairs so close to zero that
    anchoring through the origin would force a ratio outside the legal
    stretch range are dropped rather than breaking the map.
    """
    if not source.downbeats_s or not target.downbeats_s:
        raise ValueError("both grids must contain at least one downbeat")
    pairs = list(zip(source.downbeats_s, target.downbeats_s))
    while pairs:
        s, t = pairs[0]
        if s == 0.0 and t == 0.0:
            break
        if s > 0.0 and t > 0.0 and RATIO_MIN <= t / s <= RATIO_MAX:
            break
        pairs.pop(0)
    if not pairs or pairs[0] != (0.0, 0.0):
        pairs.insert(0, (0.0, 0.0))
    if len(pairs) < 2:
        raise ValueError("not enough usable downbeat pairs to build an anchor map")
    return AnchorMap(tuple(pairs))


def align_to_anchors(
    buffer: AudioBuffer, anchors: AnchorMap, config: WsolaConfig | None = None
) -> AudioBuffer:
    """Warp a buffer piecewise so each source anchor lands on its target.

    Segment i (between consecutive anchor pairs) is stretched by its own
    ratio, which must stay inside [0.25, 4].  The output holds exactly
    round(last_target * rate) samples; input past the last source anchor
    is dropped.
    """
    if config is None:
        config = WsolaConfig()
    rate = buffer.sample_rate
    if round(anchors.source_duration_s * rate) > buffer.n_samples:
        raise ValueError(
            f"last source anchor at {anchors.source_duration_s:g} s lies past "
            f"the {buffer.duration_s:g} s buffer"
        )
    for (s0, t0), (s1, t1) in zip(anchors.pairs, anchors.pairs[1:]):
        ratio = (t1 - t0) / (s1 - s0)
        if not RATIO_MIN <= ratio <= RATIO_MAX:
            raise ValueError(
                f"segment [{s0:g}, {s1:g}] s needs ratio {ratio:.3f}, "
                f"outside [{RATIO_MIN}, {RATIO_MAX}]"
            )
    pieces = []
    for (s0, t0), (s1, t1) in zip(anchors.pairs, anchors.pairs[1:]):
        src_lo, src_hi = int(round(s0 * rate)), int(round(s1 * rate))
        tgt_len = int(round(t1 * rate)) - int(round(t0 * rate))
        segment = buffer.samples[:, min(src_lo, buffer.n_samples) : min(src_hi, buffer.n_samples)]
        pieces.append(_wsola_to_length(segment, tgt_len, config))
    return AudioBuffer(np.concatenate(pieces, axis=1), rate)

"""End-to-end remix preparation around a remote generation backend.

The flow has five steps: (1) analyze the input's tempo and downbeats,
(2) take in pre-separated stems, (3) extract the chord progression and
render it to conditioning chroma, (4) warp the generated track onto the
input's downbeat grid, (5) mix with the preserved vocal stem.  Every
pipeline error names the step it arose from.  The backend itself is
remote: this module only builds requests, posts them, and treats the
response as audio.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from .analysis import ChromagramConfig, RecognitionConfig, compute_chromagram, recognize_chords
from .audio import (
    AudioBuffer,
    WavFormatError,
    decode_wav,
    resample_linear,
    to_mono,
)
from .beats import BeatGrid, NoTempoError, estimate_bpm, onset_envelope, track_beats
from .chords import ChordSequence, TimeSignature
from .chroma import ChromaMatrix, chroma_matrix_from_dict, chroma_matrix_to_dict, render_matrix
from .formats import FormatError, dump_document, load_document
from .timewarp import WsolaConfig, align_to_anchors, build_anchor_map

STEP_NAMES = {
    1: "structure analysis",
    2: "stem preparation",
    3: "chord extraction",
    4: "timing alignment",
    5: "mixing",
}


class PipelineStepError(RuntimeError):
    """A pipeline failure attributed to the step that produced it."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step} ({STEP_NAMES[step]}): {message}")
        self.step = step


class GenerationBackendError(RuntimeError):
    """Base for failures talking to the generation endpoint."""


class TransportError(GenerationBackendError):
    """The endpoint could not be reached or returned an HTTP error."""


class NonAudioResponseError(GenerationBackendError):
    """The endpoint responded, but not with decodable WAV audio."""


class DurationMismatchError(GenerationBackendError):
    """The generated audio's duration strays too far from the request."""


@dataclass(frozen=True)
class StemSet:
    """Pre-separated input: optional vocals plus the instrumental.

    When no separation is available the full mix goes in `instrumental`
    and `vocals` stays None.
    """

    instrumental: AudioBuffer
    vocals: AudioBuffer | None = None

    def __post_init__(self):
        if self.instrumental.n_samples == 0:
            raise ValueError("instrumental stem is empty")
        if self.vocals is not None and self.vocals.sample_rate != self.instrumental.sample_rate:
            raise ValueError("stems must share one sample rate; resample on ingestion")


@dataclass(frozen=True)
class RemixConfig:
    """Every knob of the pipeline in one place."""

    sample_rate: int = 44100
    conditioning_frame_rate_hz: float = 50.0
    beats_per_bar: int = 4
    min_bpm: float = 60.0
    max_bpm: float = 200.0
    beat_window_size: int = 1024
    beat_hop_size: int = 512
    chromagram: ChromagramConfig = field(default_factory=ChromagramConfig)
    recognition: RecognitionConfig = field(default_factory=RecognitionConfig)
    chord_source: str = "instrumental"
    wsola: WsolaConfig = field(default_factory=WsolaConfig)
    generated_gain: float = 1.0
    vocal_gain: float = 1.0
    ceiling_dbfs: float = -1.0
    # Generated-track tempo is re-estimated in a window this wide around
    # the requested BPM, which rules out octave errors.
    bpm_seed_tolerance: float = 0.10

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if self.conditioning_frame_rate_hz <= 0:
            raise ValueError("conditioning_frame_rate_hz must be > 0")
        if self.chord_source not in ("instrumental", "mix"):
            raise ValueError("chord_source must be 'instrumental' or 'mix'")
        if self.ceiling_dbfs > 0:
            raise ValueError("ceiling_dbfs must be <= 0")
        if not 0 < self.bpm_seed_tolerance < 1:
            raise ValueError("bpm_seed_tolerance must lie in (0, 1)")


@dataclass(frozen=True)
class ConditioningBundle:
    """Everything the generation request is built from."""

    beat_grid: BeatGrid
    chords: ChordSequence
    chroma: ChromaMatrix
    prompt: str
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        frame = 1.0 / self.chroma.frame_rate_hz
        if self.chroma.duration_s < self.chords.duration_s - frame:
            raise ValueError("chroma must cover the chord sequence to within one frame")


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    bpm: float
    duration_s: float
    chroma: ChromaMatrix

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.bpm <= 0:
            raise ValueError("bpm must be > 0")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")


GENREQ_FORMAT = "genreq/v1"


def generation_request_to_dict(req: GenerationRequest) -> dict:
    return {
        "format": GENREQ_FORMAT,
        "prompt": req.prompt,
        "bpm": float(req.bpm),
        "duration_s": float(req.duration_s),
        "chroma": chroma_matrix_to_dict(req.chroma),
    }


def generation_request_from_dict(doc: dict) -> GenerationRequest:
    if doc.get("format") != GENREQ_FORMAT:
        raise FormatError(f"format tag {doc.get('format')!r}, expected {GENREQ_FORMAT!r}")
    try:
        return GenerationRequest(
            str(doc["prompt"]),
            float(doc["bpm"]),
            float(doc["duration_s"]),
            chroma_matrix_from_dict(doc["chroma"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed generation request document: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"invalid generation request: {exc}") from exc


def write_generation_request(req: GenerationRequest, path) -> None:
    dump_document(generation_request_to_dict(req), path)


def read_generation_request(path) -> GenerationRequest:
    return generation_request_from_dict(load_document(path, GENREQ_FORMAT))


def ingest_stems(
    instrumental: AudioBuffer, vocals: AudioBuffer | None, config: RemixConfig
) -> StemSet:
    """Bring raw stems onto the pipeline sample rate."""
    try:
        instrumental = resample_linear(instrumental, config.sample_rate)
        if vocals is not None:
            vocals = resample_linear(vocals, config.sample_rate)
        return StemSet(instrumental, vocals)
    except ValueError as exc:
        raise PipelineStepError(2, str(exc)) from exc


def analyze_beats(buffer: AudioBuffer, config: RemixConfig) -> BeatGrid:
    """Step 1: onset envelope, tempo, rigid beat grid with downbeats."""
    try:
        envelope = onset_envelope(to_mono(buffer), config.beat_window_size, config.beat_hop_size)
        bpm = estimate_bpm(envelope, config.min_bpm, config.max_bpm)
        return track_beats(envelope, bpm, config.beats_per_bar)
    except (NoTempoError, ValueError) as exc:
        raise PipelineStepError(1, str(exc)) from exc


def extract_chords(buffer: AudioBuffer, bpm: float, config: RemixConfig) -> ChordSequence:
    """Step 3: chromagram plus template matching on the chosen source."""
    try:
        chromagram = compute_chromagram(to_mono(buffer), config.chromagram)
        if chromagram.n_frames == 0:
            raise ValueError("input too short for a single chromagram frame")
        return recognize_chords(
            chromagram,
            config.recognition,
            bpm=bpm,
            time_signature=TimeSignature(config.beats_per_bar, 4),
        )
    except ValueError as exc:
        raise PipelineStepError(3, str(exc)) from exc


def prepare_conditioning(stems: StemSet, prompt: str, config: RemixConfig) -> ConditioningBundle:
    """Steps 1-3: analyze the input and package the generation inputs.

    Beat analysis and chord extraction run on the instrumental stem (or
    the vocals+instrumental mix when so configured); the recognized
    chords are rendered to conditioning chroma at the configured rate.
    """
    analysis_source = stems.instrumental
    if config.chord_source == "mix" and stems.vocals is not None:
        n = max(stems.instrumental.n_samples, stems.vocals.n_samples)
        mixed = np.zeros((1, n))
        for stem in (stems.instrumental, stems.vocals):
            mixed[:, : stem.n_samples] += to_mono(stem).samples
        analysis_source = AudioBuffer(mixed, stems.instrumental.sample_rate)
    grid = analyze_beats(stems.instrumental, config)
    chords = extract_chords(analysis_source, grid.bpm, config)
    chroma = render_matrix(chords, config.conditioning_frame_rate_hz)
    return ConditioningBundle(grid, chords, chroma, prompt, stems.instrumental.duration_s)


def build_request(bundle: ConditioningBundle) -> GenerationRequest:
    return GenerationRequest(
        bundle.prompt, bundle.beat_grid.bpm, bundle.duration_s, bundle.chroma
    )


DEFAULT_TIMEOUT_S = 300.0
DURATION_TOLERANCE = 0.05


def request_generation(
    req: GenerationRequest,
    endpoint: str | None = None,
    mode: str = "live",
    out_path=None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> AudioBuffer | None:
    """POST a generation request, or write it to disk in dry_run mode.

    Live mode posts the request document as application/json, decodes
    the response as WAV, and checks the duration is within 5% of the
    request; transport failures, undecodable responses, and duration
    mismatches are reported as distinct errors.  dry_run writes the
    exact request document to out_path and returns None without touching
    the network.
    """
    if mode == "dry_run":
        if out_path is None:
            raise ValueError("dry_run mode needs an output path")
        write_generation_request(req, out_path)
        return None
    if mode != "live":
        raise ValueError(f"mode must be 'live' or 'dry_run', got {mode!r}")
    if not endpoint:
        raise TransportError("no endpoint configured; pass one or set CHORDWEAVE_ENDPOINT")
    body = json.dumps(generation_request_to_dict(req)).encode("utf-8")
    http_req = urllib.request.Request(
        endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(http_req, timeout=timeout_s) as response:
            payload = response.read()
    except urllib.error.HTTPError as exc:
        raise TransportError(f"endpoint returned HTTP {exc.code}: {exc.reason}") from exc
    except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
        raise TransportError(f"could not reach {endpoint}: {exc}") from exc
    try:
        generated = decode_wav(payload)
    except WavFormatError as exc:
        raise NonAudioResponseError(f"response is not WAV audio: {exc}") from exc
    if abs(generated.duration_s - req.duration_s) > DURATION_TOLERANCE * req.duration_s:
        raise DurationMismatchError(
            f"generated {generated.duration_s:.2f} s for a {req.duration_s:.2f} s request "
            f"(tolerance {DURATION_TOLERANCE:.0%})"
        )
    return generated


def estimate_generated_grid(
    generated: AudioBuffer, req: GenerationRequest, config: RemixConfig
) -> BeatGrid:
    """Beat grid of the generated track, tempo-seeded by the request.

    The tempo search is confined to a window around the requested BPM so
    a half- or double-time reading cannot slip in.
    """
    try:
        envelope = onset_envelope(
            to_mono(generated), config.beat_window_size, config.beat_hop_size
        )
        bpm = estimate_bpm(
            envelope,
            req.bpm * (1.0 - config.bpm_seed_tolerance),
            req.bpm * (1.0 + config.bpm_seed_tolerance),
        )
        return track_beats(envelope, bpm, config.beats_per_bar)
    except (NoTempoError, ValueError) as exc:
        raise PipelineStepError(4, str(exc)) from exc


def peak_normalize(buffer: AudioBuffer, ceiling_dbfs: float = -1.0) -> AudioBuffer:
    """Scale down iff any sample exceeds the ceiling; never scale up."""
    if ceiling_dbfs > 0:
        raise ValueError("ceiling_dbfs must be <= 0")
    ceiling = 10.0 ** (ceiling_dbfs / 20.0)
    peak = float(np.max(np.abs(buffer.samples))) if buffer.n_samples else 0.0
    if peak <= ceiling:
        return buffer
    return AudioBuffer(buffer.samples * (ceiling / peak), buffer.sample_rate)


def finalize_remix(
    generated: AudioBuffer,
    stems: StemSet,
    generated_grid: BeatGrid,
    input_grid: BeatGrid,
    config: RemixConfig | None = None,
) -> AudioBuffer:
    """Steps 4-5: warp the generated track onto the input grid and mix.

    The anchor map pairs generated downbeats with input downbeats; the
    warped track is resampled to the input rate, gains applied, vocals
    summed in (absent vocals, the warped background alone comes back),
    and the result peak-normalized to the ceiling iff it exceeds it.
    """
    if config is None:
        config = RemixConfig()
    if generated.n_samples == 0:
        raise PipelineStepError(4, "generated audio is empty")
    try:
        anchors = build_anchor_map(generated_grid, input_grid)
        warped = align_to_anchors(generated, anchors, config.wsola)
    except ValueError as exc:
        raise PipelineStepError(4, str(exc)) from exc
    try:
        warped = resample_linear(warped, stems.instrumental.sample_rate)
        background = warped.samples * config.generated_gain
        if stems.vocals is None:
            mixed = background
        else:
            vocals = stems.vocals
            if vocals.n_channels != warped.n_channels:
                if warped.n_channels == 1:
                    vocals = to_mono(vocals)
                else:
                    vocals = AudioBuffer(
                        np.repeat(to_mono(vocals).samples, warped.n_channels, axis=0),
                        vocals.sample_rate,
                    )
            n = max(background.shape[1], vocals.n_samples)
            mixed = np.zeros((background.shape[0], n))
            mixed[:, : background.shape[1]] = background
            mixed[:, : vocals.n_samples] += vocals.samples * config.vocal_gain
        return peak_normalize(
            AudioBuffer(mixed, stems.instrumental.sample_rate), config.ceiling_dbfs
        )
    except ValueError as exc:
        raise PipelineStepError(5, str(exc)) from exc


def run_remix(
    instrumental: AudioBuffer,
    vocals: AudioBuffer | None,
    prompt: str,
    config: RemixConfig | None = None,
    endpoint: str | None = None,
    mode: str = "live",
    out_path=None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
):
    """The whole pipeline; returns (bundle, request, mix-or-None).

    In dry_run mode the request document lands at out_path and the mix
    is None.
    """
    if config is None:
        config = RemixConfig()
    stems = ingest_stems(instrumental, vocals, config)
    bundle = prepare_conditioning(stems, prompt, config)
    req = build_request(bundle)
    generated = request_generation(req, endpoint, mode, out_path, timeout_s)
    if generated is None:
        return bundle, req, None
    generated_grid = estimate_generated_grid(generated, req, config)
    input_grid = bundle.beat_grid
    mix = finalize_remix(generated, stems, generated_grid, input_grid, config)
    return bundle, req, mix

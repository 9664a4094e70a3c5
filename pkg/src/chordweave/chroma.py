"""Chroma targets: chord symbols and sequences rendered as 12-bin vectors.

Bin order is chromatic from C (bin 0) to B (bin 11).  A chord becomes a
multi-hot vector over its pitch classes; a timed sequence becomes a
frame-rate matrix by sampling each frame at its centre time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chords import Chord, ChordSequence
from .formats import FormatError, dump_document, load_document

DEFAULT_FRAME_RATE_HZ = 50.0

# Lower-case bin labels for the CSV export, C..B with flats.
CSV_BIN_LABELS = ("c", "cs", "d", "eb", "e", "f", "fs", "g", "ab", "a", "bb", "b")


def chord_to_chroma(chord: Chord) -> np.ndarray:
    """A 12-float multi-hot vector with ones at the chord's pitch classes."""
    vec = np.zeros(12)
    for pc in chord.pitch_classes():
        vec[pc] = 1.0
    return vec


@dataclass(frozen=True, eq=False)
class ChromaMatrix:
    """A (frames, 12) non-negative matrix at a fixed frame rate."""

    values: np.ndarray
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != 12:
            raise ValueError(f"chroma matrix must be (frames, 12), got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("chroma values must be finite and non-negative")
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be > 0")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.frame_rate_hz

    def frame_time_s(self, index: int) -> float:
        """Centre time of frame `index`."""
        return (index + 0.5) / self.frame_rate_hz

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChromaMatrix):
            return NotImplemented
        return self.frame_rate_hz == other.frame_rate_hz and np.array_equal(
            self.values, other.values
        )


def render_matrix(
    seq: ChordSequence, frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
) -> ChromaMatrix:
    """Rasterise a chord sequence to frames sampled at their centre times.

    The frame count is round(duration * rate); a frame whose centre falls
    outside every event (including past the end) is all zeros.
    """
    if frame_rate_hz <= 0:
        raise ValueError("frame_rate_hz must be > 0")
    n_frames = int(round(seq.duration_s * frame_rate_hz))
    values = np.zeros((n_frames, 12))
    cache: dict[Chord, np.ndarray] = {}
    for k in range(n_frames):
        chord = seq.chord_at((k + 0.5) / frame_rate_hz)
        if chord is None or chord.is_no_chord:
            continue
        vec = cache.get(chord)
        if vec is None:
            vec = cache[chord] = chord_to_chroma(chord)
        values[k] = vec
    return ChromaMatrix(values, frame_rate_hz)


CHROMA_MATRIX_FORMAT = "chroma-matrix/v1"


def chroma_matrix_to_dict(matrix: ChromaMatrix) -> dict:
    return {
        "format": CHROMA_MATRIX_FORMAT,
        "frame_rate_hz": float(matrix.frame_rate_hz),
        "frames": matrix.n_frames,
        "data": [[float(v) for v in row] for row in matrix.values],
    }


def chroma_matrix_from_dict(doc: dict) -> ChromaMatrix:
    if doc.get("format") != CHROMA_MATRIX_FORMAT:
        raise FormatError(f"format tag {doc.get('format')!r}, expected {CHROMA_MATRIX_FORMAT!r}")
    try:
        rate = float(doc["frame_rate_hz"])
        count = int(doc["frames"])
        rows = doc["data"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed chroma matrix document: {exc}") from exc
    if not isinstance(rows, list):
        raise FormatError("data must be a list of rows")
    if len(rows) != count:
        raise FormatError(f"frame count {count} disagrees with {len(rows)} data rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 12:
            raise FormatError(f"frame {i} does not have 12 bins")
    try:
        return ChromaMatrix(np.array(rows, dtype=np.float64).reshape(len(rows), 12), rate)
    except ValueError as exc:
        raise FormatError(f"invalid chroma matrix: {exc}") from exc


def write_matrix(matrix: ChromaMatrix, path) -> None:
    dump_document(chroma_matrix_to_dict(matrix), path)


def read_matrix(path) -> ChromaMatrix:
    return chroma_matrix_from_dict(load_document(path, CHROMA_MATRIX_FORMAT))


def write_matrix_csv(matrix: ChromaMatrix, path) -> None:
    """CSV export: header row of bin labels, then one row per frame."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_BIN_LABELS) + "\n")
        for row in matrix.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

"""Command-line entry point: one subcommand per pipeline stage.

Each subcommand is a thin wrapper over the library; anything it can do,
the modules can do in-process.  Machine-readable results go to --out (or
stdout for JSON), diagnostics to stderr.  Exit codes: 0 success, 1 bad
input or arguments, 2 file I/O failure, 3 generation-endpoint failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import analysis, beats, chords, chroma, pipeline, timewarp
from .audio import read_wav, to_mono, write_wav
from .formats import FormatError, dumps_document
from .pipeline import GenerationBackendError, PipelineStepError

ENDPOINT_ENV_VAR = "CHORDWEAVE_ENDPOINT"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog.split()[0] + ": error: " + message)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sample-rate", type=int, default=44100, help="pipeline sample rate")
    common.add_argument(
        "--frame-rate", type=float, default=50.0, help="conditioning chroma frame rate (Hz)"
    )
    common.add_argument("-v", "--verbose", action="count", default=0, help="diagnostics to stderr")
    common.add_argument("--config", help="JSON file of default flag values (flags still win)")
    return common


def _info(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _emit_json(doc: dict, out: str | None) -> None:
    text = dumps_document(doc)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _recognition_config(args) -> analysis.RecognitionConfig:
    return analysis.RecognitionConfig(
        quality_names=tuple(q.strip() for q in args.qualities.split(",") if q.strip()),
        median_window=args.median_window,
        confidence_threshold=args.confidence_threshold,
        min_segment_s=args.min_segment_s,
    )


def _remix_config(args) -> pipeline.RemixConfig:
    return pipeline.RemixConfig(
        sample_rate=args.sample_rate,
        conditioning_frame_rate_hz=args.frame_rate,
        beats_per_bar=args.beats_per_bar,
        min_bpm=args.min_bpm,
        max_bpm=args.max_bpm,
        recognition=_recognition_config(args),
    )


def _cmd_parse(args) -> int:
    seq = chords.parse_progression(
        args.progression, args.bpm, chords.TimeSignature(args.beats_per_bar, args.beat_unit)
    )
    _info(args, f"{len(seq.events)} events over {seq.duration_s:g} s")
    _emit_json(chords.chord_sequence_to_dict(seq), args.out)
    return 0


def _cmd_encode(args) -> int:
    seq = chords.read_chord_sequence(args.chords)
    matrix = chroma.render_matrix(seq, args.frame_rate)
    _info(args, f"{matrix.n_frames} frames at {matrix.frame_rate_hz:g} Hz")
    if args.csv:
        if args.out is None:
            raise ValueError("--csv output needs --out")
        chroma.write_matrix_csv(matrix, args.out)
    else:
        _emit_json(chroma.chroma_matrix_to_dict(matrix), args.out)
    return 0


def _load_mono(path, sample_rate: int):
    from .audio import resample_linear

    return resample_linear(to_mono(read_wav(path)), sample_rate)


def _cmd_analyze_chords(args) -> int:
    audio = _load_mono(args.audio, args.sample_rate)
    bpm = args.bpm
    if bpm is None:
        envelope = beats.onset_envelope(audio)
        bpm = beats.estimate_bpm(envelope, args.min_bpm, args.max_bpm)
        _info(args, f"estimated tempo {bpm:.1f} BPM")
    chromagram = analysis.compute_chromagram(audio)
    seq = analysis.recognize_chords(chromagram, _recognition_config(args), bpm=bpm)
    _info(args, f"{len(seq.events)} chord segments")
    _emit_json(chords.chord_sequence_to_dict(seq), args.out)
    return 0


def _cmd_beats(args) -> int:
    audio = _load_mono(args.audio, args.sample_rate)
    envelope = beats.onset_envelope(audio)
    bpm = beats.estimate_bpm(envelope, args.min_bpm, args.max_bpm)
    grid = beats.track_beats(envelope, bpm, args.beats_per_bar)
    _info(args, f"{bpm:.1f} BPM, {len(grid.beats_s)} beats, {len(grid.downbeats_s)} downbeats")
    _emit_json(beats.beat_grid_to_dict(grid), args.out)
    return 0


def _cmd_melody(args) -> int:
    audio = _load_mono(args.audio, args.sample_rate)
    raw = analysis.compute_chromagram(
        audio, analysis.ChromagramConfig(normalization="none")
    )
    matrix = analysis.melody_one_hot(raw, args.silence_floor)
    _info(args, f"{matrix.n_frames} frames at {matrix.frame_rate_hz:g} Hz")
    if args.csv:
        if args.out is None:
            raise ValueError("--csv output needs --out")
        chroma.write_matrix_csv(matrix, args.out)
    else:
        _emit_json(chroma.chroma_matrix_to_dict(matrix), args.out)
    return 0


def _cmd_align(args) -> int:
    audio = read_wav(args.audio)
    source = beats.read_beat_grid(args.source_grid)
    target = beats.read_beat_grid(args.target_grid)
    anchors = timewarp.build_anchor_map(source, target)
    warped = timewarp.align_to_anchors(audio, anchors)
    _info(args, f"warped {audio.duration_s:.2f} s onto {warped.duration_s:.2f} s")
    write_wav(warped, args.out, args.encoding)
    return 0


def _grid_for(path, audio, args, seed_bpm=None):
    if path is not None:
        return beats.read_beat_grid(path)
    envelope = beats.onset_envelope(to_mono(audio))
    if seed_bpm is None:
        bpm = beats.estimate_bpm(envelope, args.min_bpm, args.max_bpm)
    else:
        bpm = beats.estimate_bpm(envelope, seed_bpm * 0.9, seed_bpm * 1.1)
    return beats.track_beats(envelope, bpm, args.beats_per_bar)


def _cmd_mix(args) -> int:
    generated = read_wav(args.generated)
    instrumental = read_wav(args.input)
    vocals = read_wav(args.vocals) if args.vocals else None
    if vocals is not None and vocals.sample_rate != instrumental.sample_rate:
        from .audio import resample_linear

        vocals = resample_linear(vocals, instrumental.sample_rate)
    stems = pipeline.StemSet(instrumental, vocals)
    input_grid = _grid_for(args.input_grid, instrumental, args)
    generated_grid = _grid_for(args.generated_grid, generated, args, seed_bpm=input_grid.bpm)
    config = pipeline.RemixConfig(
        sample_rate=instrumental.sample_rate,
        generated_gain=args.generated_gain,
        vocal_gain=args.vocal_gain,
        ceiling_dbfs=args.ceiling_dbfs,
    )
    mixed = pipeline.finalize_remix(generated, stems, generated_grid, input_grid, config)
    _info(args, f"mixed {mixed.duration_s:.2f} s")
    write_wav(mixed, args.out, args.encoding)
    return 0


def _cmd_remix(args) -> int:
    instrumental = read_wav(args.audio)
    vocals = read_wav(args.vocals) if args.vocals else None
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    config = _remix_config(args)
    if args.dry_run:
        pipeline.run_remix(
            instrumental, vocals, args.prompt, config, mode="dry_run", out_path=args.out
        )
        _info(args, f"request document written to {args.out}")
        return 0
    bundle, req, mixed = pipeline.run_remix(
        instrumental,
        vocals,
        args.prompt,
        config,
        endpoint=endpoint,
        mode="live",
        timeout_s=args.timeout_s,
    )
    _info(args, f"generated and mixed {mixed.duration_s:.2f} s at {bundle.beat_grid.bpm:.1f} BPM")
    write_wav(mixed, args.out, args.encoding)
    return 0


def _add_recognition_flags(parser) -> None:
    parser.add_argument("--qualities", default="maj,min", help="comma-separated chord qualities")
    parser.add_argument("--median-window", type=int, default=5)
    parser.add_argument("--confidence-threshold", type=float, default=0.5)
    parser.add_argument("--min-segment-s", type=float, default=0.3)


def _add_tempo_flags(parser) -> None:
    parser.add_argument("--min-bpm", type=float, default=60.0)
    parser.add_argument("--max-bpm", type=float, default=200.0)
    parser.add_argument("--beats-per-bar", type=int, default=4)


def build_parser() -> tuple[_Parser, list[argparse.ArgumentParser]]:
    common = _common_flags()
    parser = _Parser(prog="chordweave", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    parsers = []

    p = sub.add_parser("parse", parents=[common], help="progression text to chord-seq JSON")
    p.add_argument("progression", help='e.g. "C:maj F:maj,G:7 C:maj"')
    p.add_argument("--bpm", type=float, required=True)
    p.add_argument("--beats-per-bar", type=int, default=4)
    p.add_argument("--beat-unit", type=int, default=4)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.set_defaults(func=_cmd_parse)
    parsers.append(p)

    p = sub.add_parser("encode", parents=[common], help="chord-seq JSON to chroma-matrix JSON")
    p.add_argument("--chords", required=True, help="chord-seq document")
    p.add_argument("--csv", action="store_true", help="write CSV instead of JSON")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.set_defaults(func=_cmd_encode)
    parsers.append(p)

    p = sub.add_parser("analyze-chords", parents=[common], help="recognize chords in a WAV")
    p.add_argument("audio")
    p.add_argument("--bpm", type=float, help="skip tempo estimation and annotate with this")
    _add_tempo_flags(p)
    _add_recognition_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_analyze_chords)
    parsers.append(p)

    p = sub.add_parser("beats", parents=[common], help="tempo and beat grid of a WAV")
    p.add_argument("audio")
    _add_tempo_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_beats)
    parsers.append(p)

    p = sub.add_parser("melody", parents=[common], help="one-hot melody chroma of a WAV")
    p.add_argument("audio")
    p.add_argument("--silence-floor", type=float, default=1e-3)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_melody)
    parsers.append(p)

    p = sub.add_parser("align", parents=[common], help="warp a WAV between two beat grids")
    p.add_argument("audio")
    p.add_argument("--source-grid", required=True, help="beat-grid document of the audio")
    p.add_argument("--target-grid", required=True, help="beat-grid document to land on")
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="pcm16")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_align)
    parsers.append(p)

    p = sub.add_parser("mix", parents=[common], help="warp generated audio onto an input and mix")
    p.add_argument("generated")
    p.add_argument("--input", required=True, help="original input WAV (grid and rate reference)")
    p.add_argument("--vocals", help="vocal stem WAV to preserve")
    p.add_argument("--generated-grid", help="beat-grid document (estimated when omitted)")
    p.add_argument("--input-grid", help="beat-grid document (estimated when omitted)")
    _add_tempo_flags(p)
    p.add_argument("--generated-gain", type=float, default=1.0)
    p.add_argument("--vocal-gain", type=float, default=1.0)
    p.add_argument("--ceiling-dbfs", type=float, default=-1.0)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="pcm16")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mix)
    parsers.append(p)

    p = sub.add_parser("remix", parents=[common], help="full pipeline against an endpoint")
    p.add_argument("audio", help="input WAV (instrumental, or full mix)")
    p.add_argument("--prompt", required=True, help="style text for the generation backend")
    p.add_argument("--vocals", help="vocal stem WAV to preserve")
    p.add_argument("--dry-run", action="store_true", help="write the request document, no network")
    p.add_argument("--endpoint", help=f"generation URL (default ${ENDPOINT_ENV_VAR})")
    p.add_argument("--timeout-s", type=float, default=pipeline.DEFAULT_TIMEOUT_S)
    _add_tempo_flags(p)
    _add_recognition_flags(p)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="pcm16")
    p.add_argument("--out", required=True, help="request JSON (dry run) or mix WAV")
    p.set_defaults(func=_cmd_remix)
    parsers.append(p)

    return parser, parsers


def _apply_config_file(argv, parsers) -> None:
    """Seed parser defaults from --config's JSON; explicit flags still win."""
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path is None:
        return
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise FormatError("config file must hold a JSON object of flag values")
    values = {key.replace("-", "_").lstrip("_"): value for key, value in doc.items()}
    known = {
        action.dest for p in parsers for action in p._actions if action.dest != "help"
    }
    unknown = sorted(set(values) - known)
    if unknown:
        raise FormatError(f"config file sets unknown options: {', '.join(unknown)}")
    for p in parsers:
        p.set_defaults(**values)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, parsers = build_parser()
    try:
        _apply_config_file(argv, parsers)
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            print("chordweave: error: a command is required", file=sys.stderr)
            return 1
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if exc.code is None else int(exc.code)
    except GenerationBackendError as exc:
        print(f"chordweave: endpoint error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"chordweave: I/O error: {exc}", file=sys.stderr)
        return 2
    except (PipelineStepError, ValueError) as exc:
        print(f"chordweave: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()

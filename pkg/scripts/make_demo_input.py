"""Synthesize a demo input: accented click track plus triads per bar.

The result is the kind of signal the analysis stages have exact oracles
for, so a remix run on it can be checked by ear and by numbers.
"""
import argparse

from chordweave.audio import write_wav
from chordweave.chords import parse_progression
from chordweave.synth import chord_tones, click_track, concat, mix, silence


def build_demo_input(progression, bpm, sample_rate, start_s, click_amp=0.4, tone_amp=0.3):
    seq = parse_progression(progression, bpm=bpm)
    duration_s = seq.duration_s
    layers = [
        click_track(
            bpm, duration_s, sample_rate, accent_every=seq.time_signature.beats_per_bar,
            start_s=start_s, amplitude=click_amp,
        )
    ]
    for event in seq.events:
        tones = chord_tones(
            sorted(event.chord.pitch_classes()), event.duration_s, sample_rate,
            amplitude=tone_amp,
        )
        layers.append(concat([silence(event.start_s + start_s, sample_rate), tones]))
    return mix(layers)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_input.wav")
    parser.add_argument("--progression", default="C:maj G:maj C:maj G:maj")
    parser.add_argument("--bpm", type=float, default=120.0)
    parser.add_argument("--sample-rate", type=int, default=44100)
    parser.add_argument("--start-s", type=float, default=0.25,
                        help="lead-in before the first downbeat")
    parser.add_argument("--encoding", choices=["pcm16", "float32"], default="float32")
    args = parser.parse_args()

    buf = build_demo_input(args.progression, args.bpm, args.sample_rate, args.start_s)
    write_wav(buf, args.out, args.encoding)
    print(f"wrote {args.out}: {buf.duration_s:.2f} s at {args.bpm:g} BPM "
          f"({args.progression!r}, lead-in {args.start_s:g} s)")


if __name__ == "__main__":
    main()

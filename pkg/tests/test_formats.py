import json

import pytest

from chordweave.formats import FormatError, dump_document, dumps_document, load_document


def test_round_trip(tmp_path):
    doc = {"format": "chord-seq/v1", "bpm": 120.0, "events": []}
    path = tmp_path / "doc.json"
    dump_document(doc, path)
    assert load_document(path, "chord-seq/v1") == doc


def test_dump_ends_with_newline(tmp_path):
    path = tmp_path / "doc.json"
    dump_document({"format": "x/v1"}, path)
    assert path.read_bytes().endswith(b"\n")


def test_dumps_matches_dump(tmp_path):
    doc = {"format": "x/v1", "n": 3}
    path = tmp_path / "doc.json"
    dump_document(doc, path)
    assert path.read_text() == dumps_document(doc)


def test_format_tag_mismatch(tmp_path):
    path = tmp_path / "doc.json"
    dump_document({"format": "a/v1"}, path)
    with pytest.raises(FormatError):
        load_document(path, "b/v1")


def test_missing_format_tag(tmp_path):
    path = tmp_path / "doc.json"
    path.write_text(json.dumps({"bpm": 1}))
    with pytest.raises(FormatError):
        load_document(path, "a/v1")


def test_top_level_must_be_object(tmp_path):
    path = tmp_path / "doc.json"
    path.write_text("[1, 2]")
    with pytest.raises(FormatError):
        load_document(path)


def test_invalid_json(tmp_path):
    path = tmp_path / "doc.json"
    path.write_text("{nope")
    with pytest.raises(FormatError):
        load_document(path)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_document(tmp_path / "absent.json")

"""Versioned JSON document I/O shared by the interchange formats.

Every on-disk document is a JSON object with a "format" tag such as
"chord-seq/v1"; readers check the tag before touching anything else so a
wrong or future version fails loudly instead of half-parsing.
"""

from __future__ import annotations

import json
import os


class FormatError(ValueError):
    """Malformed document: bad JSON, wrong format tag, or invalid payload."""


def load_document(path: str | os.PathLike, expected_format: str | None = None) -> dict:
    """Read a JSON document, optionally checking its "format" tag."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"expected a JSON object, got {type(doc).__name__}")
    if expected_format is not None and doc.get("format") != expected_format:
        raise FormatError(f"format tag {doc.get('format')!r}, expected {expected_format!r}")
    return doc


def dump_document(doc: dict, path: str | os.PathLike) -> None:
    """Write a document as deterministic, human-diffable JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def dumps_document(doc: dict) -> str:
    """The exact text dump_document would write, as a string."""
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"

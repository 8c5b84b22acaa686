"""Canonical text serialization helpers.

Documents are plain dicts of JSON types with integers rendered as hex
strings; ``doc_bytes`` fixes key order and spacing so equal documents always
produce equal bytes (state hashing, envelope payloads, golden transcripts).
"""

from __future__ import annotations

import json

from .errors import ProtocolError


def doc_bytes(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def doc_from_bytes(data: bytes):
    try:
        return json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed message document: {exc}") from exc

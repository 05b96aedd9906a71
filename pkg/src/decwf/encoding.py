"""Canonical byte encodings used for hashing, signing and the wire."""

import hashlib
import json


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def load_json(data: bytes):
    return json.loads(data.decode())


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hexdigest(data: bytes, n: int = 16) -> str:
    return hashlib.sha256(data).hexdigest()[:n]

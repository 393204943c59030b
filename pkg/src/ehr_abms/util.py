"""Small shared helpers: canonical JSON, entropy sources, clocks, ids."""

from __future__ import annotations

import hashlib
import json
import random
import secrets
import uuid
from datetime import datetime, timezone
from typing import Any, Callable

from .errors import EntropyError

Entropy = Callable[[int], bytes]
Clock = Callable[[], datetime]


def os_entropy(n: int) -> bytes:
    return secrets.token_bytes(n)


def seeded_entropy(seed: int) -> Entropy:
    """Deterministic byte source for tests and reproducible runs. Not for production keys."""
    rng = random.Random(seed)
    return rng.randbytes


def draw(entropy: Entropy, n: int) -> bytes:
    try:
        out = entropy(n)
    except Exception as exc:  # noqa: BLE001 - any failure of the source is an entropy failure
        raise EntropyError(f"entropy source failed: {exc}") from exc
    if not isinstance(out, (bytes, bytearray)) or len(out) != n:
        raise EntropyError(f"entropy source returned {type(out).__name__} of wrong length")
    return bytes(out)


def new_event_id(entropy: Entropy) -> str:
    return str(uuid.UUID(bytes=draw(entropy, 16), version=4))


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(instant: datetime) -> Clock:
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return lambda: instant


def isoformat(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_iso(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()

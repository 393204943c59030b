"""Off-chain storage of encrypted EHR objects with one-time retrieval URLs.

Objects are content addressed (SHA-256 of the ciphertext bytes).  Tokens
are random 256-bit strings; the store keeps only their SHA-256 digests.
A token redeems at most once: redemption is a compare-and-set under a
lock, journaled before the ciphertext is handed out, so the redeemed
state also survives a restart.

Unknown, used and expired tokens all produce the same ``None`` result.
"""

from __future__ import annotations

import base64
import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path

from .errors import MalformedCiphertextError, UnknownObjectError
from .maabe import EhrCiphertext
from .util import Clock, Entropy, draw, isoformat, os_entropy, parse_iso, sha256_hex, utc_now

DEFAULT_TTL = timedelta(hours=24)
DEFAULT_BASE_URL = "https://edge.local"
TOKEN_BYTES = 32

UNREDEEMED, REDEEMED, EXPIRED = "unredeemed", "redeemed", "expired"


@dataclass(frozen=True)
class EhrObject:
    object_id: str
    ciphertext: bytes
    owner_gid: str
    created_at: datetime


@dataclass(frozen=True)
class OneTimeToken:
    token: str
    object_id: str
    state: str
    issued_at: datetime
    expires_at: datetime
    redeemed_at: datetime | None = None


@dataclass(frozen=True)
class _TokenRecord:
    digest: str
    object_id: str
    state: str
    issued_at: datetime
    expires_at: datetime
    redeemed_at: datetime | None = None


def token_digest(token: str) -> str:
    return sha256_hex(token.encode("ascii", errors="replace"))


def token_from_url(url: str) -> str:
    marker = "/once/"
    idx = url.rfind(marker)
    if idx < 0:
        raise ValueError(f"not a one-time URL: {url!r}")
    return url[idx + len(marker) :]


class EdgeStore:
    def __init__(
        self,
        data_dir: str | os.PathLike | None = None,
        *,
        clock: Clock = utc_now,
        entropy: Entropy = os_entropy,
        base_url: str = DEFAULT_BASE_URL,
        default_ttl: timedelta = DEFAULT_TTL,
    ):
        self._dir = Path(data_dir) if data_dir is not None else None
        self._clock = clock
        self._entropy = entropy
        self.base_url = base_url.rstrip("/")
        self.default_ttl = default_ttl
        self._objects: dict[str, EhrObject] = {}
        self._tokens: dict[str, _TokenRecord] = {}
        self._lock = threading.Lock()
        self._journal = None
        if self._dir is not None:
            (self._dir / "objects").mkdir(parents=True, exist_ok=True)
            self._load()
            self._journal = open(self._dir / "tokens.journal", "a", encoding="utf-8")

    # -- persistence

    def _load(self) -> None:
        for meta_path in (self._dir / "objects").glob("*.json"):
            meta = json.loads(meta_path.read_text())
            oid = meta["object_id"]
            data = (self._dir / "objects" / oid).read_bytes()
            self._objects[oid] = EhrObject(oid, data, meta["owner_gid"], parse_iso(meta["created_at"]))
        journal = self._dir / "tokens.journal"
        if not journal.exists():
            return
        for line in journal.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            op, digest = rec["op"], rec["digest"]
            if op == "issue":
                self._tokens[digest] = _TokenRecord(
                    digest, rec["object_id"], UNREDEEMED,
                    parse_iso(rec["issued_at"]), parse_iso(rec["expires_at"]),
                )
            elif op in (REDEEMED, EXPIRED) and digest in self._tokens:
                at = parse_iso(rec["at"])
                self._tokens[digest] = replace(
                    self._tokens[digest], state=op, redeemed_at=at if op == REDEEMED else None
                )

    def _journal_write(self, record: dict) -> None:
        if self._journal is None:
            return
        self._journal.write(json.dumps(record, sort_keys=True) + "\n")
        self._journal.flush()
        os.fsync(self._journal.fileno())

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None

    # -- objects

    def put_object(self, owner_gid: str, data: bytes) -> str:
        data = bytes(data)
        try:
            EhrCiphertext.from_bytes(data)
        except MalformedCiphertextError as exc:
            raise MalformedCiphertextError(f"refusing to store: {exc}") from exc
        oid = sha256_hex(data)
        with self._lock:
            if oid in self._objects:
                return oid
            obj = EhrObject(oid, data, owner_gid, self._clock())
            if self._dir is not None:
                obj_dir = self._dir / "objects"
                tmp = obj_dir / f".{oid}.tmp"
                tmp.write_bytes(data)
                os.replace(tmp, obj_dir / oid)
                (obj_dir / f"{oid}.json").write_text(
                    json.dumps({"object_id": oid, "owner_gid": owner_gid,
                                "created_at": isoformat(obj.created_at)})
                )
            self._objects[oid] = obj
        return oid

    def has_object(self, object_id: str) -> bool:
        return object_id in self._objects

    def get_object(self, object_id: str) -> EhrObject:
        try:
            return self._objects[object_id]
        except KeyError:
            raise UnknownObjectError(f"no object {object_id}") from None

    def object_count(self) -> int:
        return len(self._objects)

    # -- tokens

    def issue_token(self, object_id: str, ttl: timedelta | None = None) -> tuple[OneTimeToken, str]:
        if object_id not in self._objects:
            raise UnknownObjectError(f"no object {object_id}")
        ttl = self.default_ttl if ttl is None else ttl
        token = base64.urlsafe_b64encode(draw(self._entropy, TOKEN_BYTES)).rstrip(b"=").decode()
        digest = token_digest(token)
        now = self._clock()
        rec = _TokenRecord(digest, object_id, UNREDEEMED, now, now + ttl)
        with self._lock:
            self._journal_write({"op": "issue", "digest": digest, "object_id": object_id,
                                 "issued_at": isoformat(now), "expires_at": isoformat(rec.expires_at)})
            self._tokens[digest] = rec
        return (
            OneTimeToken(token, object_id, UNREDEEMED, now, rec.expires_at),
            f"{self.base_url}/once/{token}",
        )

    def token_state(self, token: str) -> str | None:
        rec = self._tokens.get(token_digest(token))
        return None if rec is None else rec.state

    def redeem(self, token: str) -> bytes | None:
        """Return the ciphertext on the first valid redemption, else None."""
        digest = token_digest(token)
        now = self._clock()
        with self._lock:
            rec = self._tokens.get(digest)
            if rec is None or rec.state != UNREDEEMED:
                return None
            if now > rec.expires_at:
                self._journal_write({"op": EXPIRED, "digest": digest, "at": isoformat(now)})
                self._tokens[digest] = replace(rec, state=EXPIRED)
                return None
            self._journal_write({"op": REDEEMED, "digest": digest, "at": isoformat(now)})
            self._tokens[digest] = replace(rec, state=REDEEMED, redeemed_at=now)
        return self._objects[rec.object_id].ciphertext

    def redeem_url(self, url: str) -> bytes | None:
        try:
            return self.redeem(token_from_url(url))
        except ValueError:
            return None

    def expire_sweep(self, now: datetime | None = None) -> int:
        now = self._clock() if now is None else now
        count = 0
        with self._lock:
            for digest, rec in list(self._tokens.items()):
                if rec.state == UNREDEEMED and rec.expires_at < now:
                    self._journal_write({"op": EXPIRED, "digest": digest, "at": isoformat(now)})
                    self._tokens[digest] = replace(rec, state=EXPIRED)
                    count += 1
        return count

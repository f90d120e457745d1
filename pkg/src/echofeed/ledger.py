"""User-owned consent ledger: a hash-chained, signed, append-only log.

Each block records one user action (a post, a consent grant or revocation,
or a token credit). Integrity rests on a canonical byte serialization of
the fields (index, prev_hash, timestamp, author, payload_type, payload), in
that order:

    index      8 bytes, unsigned big-endian
    prev_hash  32 bytes
    timestamp  8 bytes, unsigned big-endian (seconds since epoch)
    author     32 bytes (Ed25519 public key)
    type       1 byte
    payload    4-byte unsigned big-endian length, then the bytes

Both the block hash (SHA-256) and the author's Ed25519 signature are
computed over exactly these bytes; the stored JSON representation is just a
transport. The genesis block is system-authored (all-zero key) and carries
an all-zero signature, which verification accepts at index 0 only.

Consent and token balances are pure functions of the chain: replaying the
blocks reproduces them, and a user's latest consent block wins (default
before any consent block: False, opt-in).
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping

from . import _ed25519
from .errors import (
    InvalidPayloadError,
    ParseError,
    SigningFailureError,
    UnregisteredUserError,
    VerificationFailureError,
)
from .ratings import RatingMatrix, filter_users

ZERO_HASH = b"\x00" * 32
GENESIS_AUTHOR = b"\x00" * 32
EMPTY_SIGNATURE = b"\x00" * 64


class PayloadType(IntEnum):
    POST = 0
    CONSENT_GRANT = 1
    CONSENT_REVOKE = 2
    TOKEN_CREDIT = 3


_TYPE_NAMES = {
    PayloadType.POST: "Post",
    PayloadType.CONSENT_GRANT: "ConsentGrant",
    PayloadType.CONSENT_REVOKE: "ConsentRevoke",
    PayloadType.TOKEN_CREDIT: "TokenCredit",
}
_NAMES_TO_TYPE = {name: t for t, name in _TYPE_NAMES.items()}

# verification failure reasons, in check order
HASH_MISMATCH = "HashMismatch"
BROKEN_LINK = "BrokenLink"
BAD_INDEX = "BadIndex"
BAD_SIGNATURE = "BadSignature"


class Keypair:
    """Signing identity for one account: a 32-byte Ed25519 seed."""

    __slots__ = ("seed", "public_key")

    def __init__(self, seed: bytes):
        if len(seed) != _ed25519.SEED_SIZE:
            raise SigningFailureError(f"signing seed must be {_ed25519.SEED_SIZE} bytes")
        self.seed = bytes(seed)
        self.public_key = _ed25519.public_from_seed(self.seed)

    @classmethod
    def generate(cls) -> "Keypair":
        return cls(os.urandom(_ed25519.SEED_SIZE))

    def sign(self, message: bytes) -> bytes:
        try:
            return _ed25519.sign(self.seed, message)
        except Exception as exc:  # pragma: no cover - key material is pre-validated
            raise SigningFailureError(str(exc)) from exc


@dataclass(frozen=True)
class LedgerBlock:
    index: int
    prev_hash: bytes
    timestamp: int
    author: bytes
    payload_type: int
    payload: bytes
    signature: bytes
    hash: bytes

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "prev_hash_hex": self.prev_hash.hex(),
            "timestamp": self.timestamp,
            "author_hex": self.author.hex(),
            "payload_type": _TYPE_NAMES[PayloadType(self.payload_type)],
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
            "signature_hex": self.signature.hex(),
            "hash_hex": self.hash.hex(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LedgerBlock":
        return cls(
            index=int(doc["index"]),
            prev_hash=bytes.fromhex(doc["prev_hash_hex"]),
            timestamp=int(doc["timestamp"]),
            author=bytes.fromhex(doc["author_hex"]),
            payload_type=int(_NAMES_TO_TYPE[doc["payload_type"]]),
            payload=base64.b64decode(doc["payload_b64"]),
            signature=bytes.fromhex(doc["signature_hex"]),
            hash=bytes.fromhex(doc["hash_hex"]),
        )


@dataclass(frozen=True)
class UserAccount:
    """Replay-derived view of one account at the current chain tip."""

    public_key: bytes
    user_index: int | None
    consent: bool
    token_balance: int


@dataclass(frozen=True)
class PortableProfile:
    """Self-verifying export of one user's blocks, in ledger order."""

    public_key: bytes
    blocks: tuple[LedgerBlock, ...]
    chain_proof: tuple[bytes, ...]


@dataclass(frozen=True)
class ChainReport:
    valid: bool
    bad_index: int | None = None
    reason: str | None = None

    def __str__(self) -> str:
        if self.valid:
            return "valid"
        return f"invalid at index {self.bad_index}: {self.reason}"


class Ledger:
    """Append-only block container. Use the module functions to mutate."""

    def __init__(self, blocks: Iterable[LedgerBlock] = ()):
        self._blocks: list[LedgerBlock] = list(blocks)

    @property
    def blocks(self) -> list[LedgerBlock]:
        return self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def __getitem__(self, i: int) -> LedgerBlock:
        return self._blocks[i]

    def tip_hash(self) -> bytes:
        return self._blocks[-1].hash if self._blocks else ZERO_HASH


def signing_bytes(
    index: int,
    prev_hash: bytes,
    timestamp: int,
    author: bytes,
    payload_type: int,
    payload: bytes,
) -> bytes:
    """Canonical bytes covered by both the block hash and the signature."""
    return b"".join(
        (
            struct.pack(">Q", index),
            prev_hash,
            struct.pack(">Q", timestamp),
            author,
            struct.pack(">B", payload_type),
            struct.pack(">I", len(payload)),
            payload,
        )
    )


def block_hash(canonical: bytes) -> bytes:
    return hashlib.sha256(canonical).digest()


def new_ledger(timestamp: int = 0) -> Ledger:
    """Ledger holding only the system-authored genesis block."""
    canonical = signing_bytes(0, ZERO_HASH, timestamp, GENESIS_AUTHOR, PayloadType.POST, b"")
    genesis = LedgerBlock(
        index=0,
        prev_hash=ZERO_HASH,
        timestamp=timestamp,
        author=GENESIS_AUTHOR,
        payload_type=int(PayloadType.POST),
        payload=b"",
        signature=EMPTY_SIGNATURE,
        hash=block_hash(canonical),
    )
    return Ledger([genesis])


def _validate_payload(payload_type: int, payload: bytes) -> None:
    try:
        ptype = PayloadType(payload_type)
    except ValueError:
        raise InvalidPayloadError(f"unknown payload type {payload_type}") from None
    if ptype in (PayloadType.CONSENT_GRANT, PayloadType.CONSENT_REVOKE):
        if payload != b"":
            raise InvalidPayloadError(f"{_TYPE_NAMES[ptype]} payload must be empty")
    elif ptype is PayloadType.TOKEN_CREDIT:
        if len(payload) != 8:
            raise InvalidPayloadError("TokenCredit payload must be an 8-byte unsigned amount")


def append_event(
    ledger: Ledger,
    keypair: Keypair,
    payload_type: PayloadType | int,
    payload: bytes,
    timestamp: int,
) -> LedgerBlock:
    """Sign and append one block; returns it."""
    _validate_payload(int(payload_type), payload)
    if not 0 <= int(timestamp) < 2**64:
        raise InvalidPayloadError(f"timestamp must fit an unsigned 64-bit int, got {timestamp}")
    index = len(ledger)
    canonical = signing_bytes(
        index, ledger.tip_hash(), int(timestamp), keypair.public_key, int(payload_type), payload
    )
    block = LedgerBlock(
        index=index,
        prev_hash=ledger.tip_hash(),
        timestamp=int(timestamp),
        author=keypair.public_key,
        payload_type=int(payload_type),
        payload=bytes(payload),
        signature=keypair.sign(canonical),
        hash=block_hash(canonical),
    )
    ledger.blocks.append(block)
    return block


def set_consent(ledger: Ledger, keypair: Keypair, flag: bool, timestamp: int) -> LedgerBlock:
    """Record a consent grant (flag True) or revocation (False)."""
    ptype = PayloadType.CONSENT_GRANT if flag else PayloadType.CONSENT_REVOKE
    return append_event(ledger, keypair, ptype, b"", timestamp)


def credit_tokens(ledger: Ledger, keypair: Keypair, amount: int, timestamp: int) -> LedgerBlock:
    """Record a reward of `amount` tokens to the keypair's account."""
    amount = int(amount)
    if amount < 0:
        raise InvalidPayloadError(f"token amount must be >= 0, got {amount}")
    if amount >= 2**64:
        raise InvalidPayloadError(f"token amount too large for 8 bytes: {amount}")
    return append_event(
        ledger, keypair, PayloadType.TOKEN_CREDIT, amount.to_bytes(8, "big"), timestamp
    )


def verify_chain(ledger: Ledger) -> ChainReport:
    """Check every block: hash, linkage, index continuity, signature.

    Failures are reported (first one wins), never raised.
    """
    prev = ZERO_HASH
    for pos, block in enumerate(ledger.blocks):
        try:
            canonical = signing_bytes(
                block.index,
                block.prev_hash,
                block.timestamp,
                block.author,
                block.payload_type,
                block.payload,
            )
        except (struct.error, ValueError):
            # unencodable fields cannot hash to anything, let alone match
            return ChainReport(False, pos, HASH_MISMATCH)
        if block_hash(canonical) != block.hash:
            return ChainReport(False, pos, HASH_MISMATCH)
        if block.prev_hash != prev:
            return ChainReport(False, pos, BROKEN_LINK)
        if block.index != pos:
            return ChainReport(False, pos, BAD_INDEX)
        if block.author == GENESIS_AUTHOR:
            # only the genesis block may be unsigned, and its placeholder
            # signature is pinned so it is as tamper-evident as the rest
            if pos != 0 or block.signature != EMPTY_SIGNATURE:
                return ChainReport(False, pos, BAD_SIGNATURE)
        elif not _ed25519.verify(block.author, block.signature, canonical):
            return ChainReport(False, pos, BAD_SIGNATURE)
        prev = block.hash
    return ChainReport(True)


def _replay(blocks: Iterable[LedgerBlock]) -> dict[bytes, list]:
    """author -> [consent, balance], derived purely from the blocks."""
    state: dict[bytes, list] = {}
    for block in blocks:
        if block.author == GENESIS_AUTHOR:
            continue
        entry = state.setdefault(block.author, [False, 0])
        ptype = block.payload_type
        if ptype == PayloadType.CONSENT_GRANT:
            entry[0] = True
        elif ptype == PayloadType.CONSENT_REVOKE:
            entry[0] = False
        elif ptype == PayloadType.TOKEN_CREDIT:
            entry[1] += int.from_bytes(block.payload, "big")
    return state


def consent_state(ledger: Ledger, public_key: bytes) -> bool:
    entry = _replay(ledger.blocks).get(bytes(public_key))
    return entry[0] if entry else False


def balance(ledger: Ledger, public_key: bytes) -> int:
    entry = _replay(ledger.blocks).get(bytes(public_key))
    return entry[1] if entry else 0


def account_state(
    ledger: Ledger, public_key: bytes, user_index: int | None = None
) -> UserAccount:
    entry = _replay(ledger.blocks).get(bytes(public_key), [False, 0])
    return UserAccount(
        public_key=bytes(public_key),
        user_index=user_index,
        consent=entry[0],
        token_balance=entry[1],
    )


def consented_ratings(
    ledger: Ledger, matrix: RatingMatrix, registry: Mapping[int, bytes]
) -> RatingMatrix:
    """Sub-matrix of the observations whose users currently consent.

    Dimensions are unchanged; rows of non-consenting users simply become
    empty. Every user appearing in the matrix must be in the registry.
    """
    present = {obs.user for obs in matrix.observations}
    missing = sorted(u for u in present if u not in registry)
    if missing:
        raise UnregisteredUserError(f"users {missing} have no registered public key")
    state = _replay(ledger.blocks)
    consenting = frozenset(
        u for u in present if state.get(bytes(registry[u]), (False, 0))[0]
    )
    return filter_users(matrix, consenting)


def export_profile(ledger: Ledger, public_key: bytes) -> PortableProfile:
    """All blocks authored by this key, with their chain hashes."""
    public_key = bytes(public_key)
    blocks = tuple(b for b in ledger.blocks if b.author == public_key)
    if not blocks:
        raise UnregisteredUserError(f"no blocks authored by {public_key.hex()}")
    return PortableProfile(
        public_key=public_key,
        blocks=blocks,
        chain_proof=tuple(b.hash for b in blocks),
    )


def import_profile(profile: PortableProfile) -> UserAccount:
    """Re-verify an exported profile and rebuild its account view.

    Needs no access to the origin ledger: each block is checked for hash
    integrity, a valid signature under the profile key, and strictly
    ascending chain positions.
    """
    if not profile.blocks:
        raise VerificationFailureError("profile contains no blocks")
    if len(profile.chain_proof) != len(profile.blocks):
        raise VerificationFailureError("chain proof does not cover every block")
    last_index = -1
    for block, proof in zip(profile.blocks, profile.chain_proof):
        if block.author != profile.public_key:
            raise VerificationFailureError(
                f"block {block.index} authored by a different key"
            )
        try:
            canonical = signing_bytes(
                block.index,
                block.prev_hash,
                block.timestamp,
                block.author,
                block.payload_type,
                block.payload,
            )
        except (struct.error, ValueError) as exc:
            raise VerificationFailureError(f"block {block.index}: {exc}") from exc
        if block_hash(canonical) != block.hash or block.hash != proof:
            raise VerificationFailureError(f"block {block.index}: hash mismatch")
        if not _ed25519.verify(block.author, block.signature, canonical):
            raise VerificationFailureError(f"block {block.index}: bad signature")
        if block.index <= last_index:
            raise VerificationFailureError(f"block {block.index}: out of order")
        last_index = block.index
    state = _replay(profile.blocks)
    entry = state.get(profile.public_key, [False, 0])
    return UserAccount(
        public_key=profile.public_key,
        user_index=None,
        consent=entry[0],
        token_balance=entry[1],
    )


def save_ledger(ledger: Ledger, path: str | Path) -> None:
    """One block per line, JSON; integrity lives in the canonical bytes."""
    lines = [json.dumps(b.to_json_dict(), sort_keys=True) for b in ledger.blocks]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_ledger(path: str | Path) -> Ledger:
    path = Path(path)
    blocks = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            blocks.append(LedgerBlock.from_json_dict(json.loads(line)))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad ledger block: {exc}", lineno) from exc
    return Ledger(blocks)


def save_profile(profile: PortableProfile, path: str | Path) -> None:
    doc = {
        "public_key_hex": profile.public_key.hex(),
        "blocks": [b.to_json_dict() for b in profile.blocks],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_profile(path: str | Path) -> PortableProfile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        public_key = bytes.fromhex(doc["public_key_hex"])
        blocks = tuple(LedgerBlock.from_json_dict(b) for b in doc["blocks"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: not a valid profile file ({exc})") from exc
    return PortableProfile(
        public_key=public_key,
        blocks=blocks,
        chain_proof=tuple(b.hash for b in blocks),
    )

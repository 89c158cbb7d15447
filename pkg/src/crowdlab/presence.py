"""Witnessed-presence verification: QR tokens, challenge questions, puzzles.

QR tokens are keyed-MAC strings (base64 of question id, nonce, expiry, and
an HMAC-SHA-256 tag) that can be printed as QR codes and placed on physical
objects. Tokens are single-use: the nonce is consumed atomically on the
first decided verification.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import hmac
import secrets
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .asset import PoiQuestion


class Verdict(enum.Enum):
    PENDING = "Pending"
    VERIFIED = "Verified"
    REJECTED = "Rejected"


class UnknownQuestionError(Exception):
    pass


class AlreadyUsedError(Exception):
    pass


@dataclass(frozen=True)
class Challenge:
    id: str
    question_id: int
    kind: str  # "QrToken" | "ChallengeQuestion" | "Puzzle"
    payload: object
    expires_at: int  # epoch ms


@dataclass
class Proof:
    challenge_id: str
    response: str
    submitted_at: int
    verdict: Verdict = Verdict.PENDING


@dataclass(frozen=True)
class ProofPolicy:
    """Which questions demand a verified proof before an answer is accepted."""

    kind: str = "none"  # "none" | "mandatory" | "listed"
    question_ids: frozenset[int] = frozenset()


def require_proof(question: PoiQuestion, policy: ProofPolicy) -> bool:
    if policy.kind == "none":
        return False
    if policy.kind == "mandatory":
        return question.mandatory
    return question.id in policy.question_ids


def _encode_token(question_id: int, nonce: str, expires_at: int, secret: bytes) -> str:
    payload = f"{question_id}|{nonce}|{expires_at}"
    tag = hmac.new(secret, payload.encode(), hashlib.sha256).hexdigest()
    raw = f"{payload}|{tag}"
    # pad to a 3-byte multiple: the base64 form then has no '=' padding and
    # every character change alters the decoded bytes
    raw += "." * (-len(raw) % 3)
    return base64.urlsafe_b64encode(raw.encode()).decode()


def _decode_token(token: str) -> Optional[tuple[int, str, int, str]]:
    if "=" in token:  # canonical tokens are unpadded
        return None
    try:
        raw = base64.urlsafe_b64decode(token.encode()).decode()
        qid, nonce, expires_at, tag = raw.rstrip(".").split("|")
        if "." in raw.rstrip(".") or len(tag) != 64:
            return None
        return int(qid), nonce, int(expires_at), tag
    except (ValueError, UnicodeDecodeError):
        return None


class PresenceVerifier:
    """Issues challenges and decides proofs; one MAC secret per deployment."""

    def __init__(self, secret: bytes, nonce_source: Optional[Callable[[], str]] = None):
        self._secret = secret
        self._nonce_source = nonce_source or (lambda: secrets.token_hex(8))
        self._consumed: set[str] = set()
        self._lock = threading.Lock()
        self._puzzle_verifiers: dict[str, Callable[[Challenge, str], bool]] = {}

    def register_puzzle_verifier(
        self, name: str, fn: Callable[[Challenge, str], bool]
    ) -> None:
        self._puzzle_verifiers[name] = fn

    def issue_challenge(
        self,
        question_id: int,
        kind: str,
        ttl_s: float,
        now: int,
        known_questions: Optional[set[int]] = None,
        payload: object = None,
    ) -> Challenge:
        """Create a fresh challenge; for QrToken, `payload` is ignored and the
        token string is generated; for ChallengeQuestion, `payload` is a dict
        {"prompt": str, "accepted": set[str]}."""
        if known_questions is not None and question_id not in known_questions:
            raise UnknownQuestionError(question_id)
        nonce = self._nonce_source()
        expires_at = now + int(ttl_s * 1000)
        if kind == "QrToken":
            payload = _encode_token(question_id, nonce, expires_at, self._secret)
        return Challenge(
            id=f"ch-{question_id}-{nonce}",
            question_id=question_id,
            kind=kind,
            payload=payload,
            expires_at=expires_at,
        )

    def verify(self, challenge: Challenge, response: str, now: int) -> Verdict:
        """Decide a proof. Single-use: a token or challenge already decided
        as Verified raises AlreadyUsedError on re-presentation."""
        if challenge.kind == "QrToken":
            return self._verify_token(challenge, response, now)
        if challenge.kind == "ChallengeQuestion":
            return self._verify_question(challenge, response, now)
        if challenge.kind == "Puzzle":
            return self._verify_puzzle(challenge, response, now)
        return Verdict.REJECTED

    def _verify_token(self, challenge: Challenge, response: str, now: int) -> Verdict:
        decoded = _decode_token(response)
        if decoded is None:
            return Verdict.REJECTED
        qid, nonce, expires_at, tag = decoded
        payload = f"{qid}|{nonce}|{expires_at}"
        expected = hmac.new(self._secret, payload.encode(), hashlib.sha256).hexdigest()
        if not hmac.compare_digest(tag, expected):
            return Verdict.REJECTED
        if qid != challenge.question_id or now > expires_at:
            return Verdict.REJECTED
        with self._lock:
            if nonce in self._consumed:
                raise AlreadyUsedError(nonce)
            self._consumed.add(nonce)
        return Verdict.VERIFIED

    def _verify_question(self, challenge: Challenge, response: str, now: int) -> Verdict:
        if now > challenge.expires_at:
            return Verdict.REJECTED
        accepted = {a.casefold().strip() for a in challenge.payload["accepted"]}
        if response.casefold().strip() in accepted:
            with self._lock:
                if challenge.id in self._consumed:
                    raise AlreadyUsedError(challenge.id)
                self._consumed.add(challenge.id)
            return Verdict.VERIFIED
        return Verdict.REJECTED

    def _verify_puzzle(self, challenge: Challenge, response: str, now: int) -> Verdict:
        if now > challenge.expires_at:
            return Verdict.REJECTED
        name = challenge.payload.get("verifier") if isinstance(challenge.payload, dict) else None
        fn = self._puzzle_verifiers.get(name)
        if fn is None:
            return Verdict.REJECTED
        if fn(challenge, response):
            with self._lock:
                if challenge.id in self._consumed:
                    raise AlreadyUsedError(challenge.id)
                self._consumed.add(challenge.id)
            return Verdict.VERIFIED
        return Verdict.REJECTED

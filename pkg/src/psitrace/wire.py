"""JSON wire encoding for the protocol messages.

Big integers travel as lowercase minimal hex (no prefix, no leading zeros);
tags travel as fixed-width 64-char hex. Decoders are strict: anything a
compliant peer would never send is rejected, so the service layer can map
any decode failure straight to a protocol-violation response.
"""

from __future__ import annotations

import json
import re

from .apsi import ApsiDigest, ApsiRequest, ApsiResponse
from .errors import ProtocolViolationError
from .psica import PsiCaRequest, PsiCaResponse

PROTO_PSICA = "psica"
PROTO_APSI = "apsi"

_MINIMAL_HEX = re.compile(r"\A(0|[1-9a-f][0-9a-f]*)\Z")
_TAG_HEX = re.compile(r"\A[0-9a-f]{64}\Z")
_EPOCH_RE = re.compile(r"\A[0-9a-zA-Z._-]{1,64}\Z")


def encode_int(value: int) -> str:
    if value < 0:
        raise ValueError("wire integers are non-negative")
    return format(value, "x")


def decode_int(text) -> int:
    if not isinstance(text, str) or not _MINIMAL_HEX.match(text):
        raise ProtocolViolationError(f"not minimal lowercase hex: {text!r:.80}")
    return int(text, 16)


def encode_tag(tag: bytes) -> str:
    if len(tag) != 32:
        raise ValueError("tags are exactly 32 bytes")
    return tag.hex()


def decode_tag(text) -> bytes:
    if not isinstance(text, str) or not _TAG_HEX.match(text):
        raise ProtocolViolationError("tag is not 64 lowercase hex chars")
    return bytes.fromhex(text)


def check_epoch_id(value) -> str:
    if not isinstance(value, str) or not _EPOCH_RE.match(value):
        raise ProtocolViolationError("malformed epoch id")
    return value


def _int_list(obj, key: str) -> list[int]:
    value = obj.get(key)
    if not isinstance(value, list):
        raise ProtocolViolationError(f"field {key!r} must be a list")
    return [decode_int(item) for item in value]


def _tag_list(obj, key: str) -> list[bytes]:
    value = obj.get(key)
    if not isinstance(value, list):
        raise ProtocolViolationError(f"field {key!r} must be a list")
    return [decode_tag(item) for item in value]


def _check_obj(obj, expected_keys: set, proto: str | None = None) -> None:
    if not isinstance(obj, dict):
        raise ProtocolViolationError("message must be a JSON object")
    if set(obj) != expected_keys:
        raise ProtocolViolationError(f"message keys must be exactly {sorted(expected_keys)}")
    if proto is not None and obj.get("proto") != proto:
        raise ProtocolViolationError(f"proto field must be {proto!r}")


def encode_psica_request(req: PsiCaRequest) -> dict:
    return {"proto": PROTO_PSICA, "x": encode_int(req.x), "a": [encode_int(z) for z in req.a]}


def decode_psica_request(obj) -> PsiCaRequest:
    _check_obj(obj, {"proto", "x", "a"}, PROTO_PSICA)
    return PsiCaRequest(x=decode_int(obj["x"]), a=_int_list(obj, "a"))


def encode_psica_response(resp: PsiCaResponse) -> dict:
    return {
        "y": encode_int(resp.y),
        "a_prime": [encode_int(z) for z in resp.a_prime],
        "ts": [encode_tag(t) for t in resp.ts],
    }


def decode_psica_response(obj) -> PsiCaResponse:
    _check_obj(obj, {"y", "a_prime", "ts"})
    return PsiCaResponse(y=decode_int(obj["y"]), a_prime=_int_list(obj, "a_prime"), ts=_tag_list(obj, "ts"))


def encode_apsi_digest(digest: ApsiDigest) -> dict:
    return {"proto": PROTO_APSI, "epoch": digest.epoch_id, "ts": [encode_tag(t) for t in digest.ts]}


def decode_apsi_digest(obj) -> ApsiDigest:
    _check_obj(obj, {"proto", "epoch", "ts"}, PROTO_APSI)
    return ApsiDigest(epoch_id=check_epoch_id(obj["epoch"]), ts=_tag_list(obj, "ts"))


def encode_apsi_request(req: ApsiRequest) -> dict:
    return {"proto": PROTO_APSI, "epoch": req.epoch_id, "a": [encode_int(z) for z in req.a]}


def decode_apsi_request(obj) -> ApsiRequest:
    _check_obj(obj, {"proto", "epoch", "a"}, PROTO_APSI)
    return ApsiRequest(epoch_id=check_epoch_id(obj["epoch"]), a=_int_list(obj, "a"))


def encode_apsi_response(resp: ApsiResponse) -> dict:
    return {"y": encode_int(resp.y), "a_prime": [encode_int(z) for z in resp.a_prime]}


def decode_apsi_response(obj) -> ApsiResponse:
    _check_obj(obj, {"y", "a_prime"})
    return ApsiResponse(y=decode_int(obj["y"]), a_prime=_int_list(obj, "a_prime"))


def to_bytes(obj: dict) -> bytes:
    """Canonical compact JSON bytes for a wire message."""
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("ascii")


def from_bytes(data: bytes) -> dict:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolationError(f"body is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolViolationError("body must be a JSON object")
    return obj

"""End-user agent: query scheduling, protocol runs, warnings, feedback.

The agent binds the local contact ledger to the protocols. Warnings are
rendered locally and never transmitted; the only outbound traffic is blinded
protocol material and, with explicit consent, the anonymous feedback report.
"""

from __future__ import annotations

import enum
import logging
import random
import time
from dataclasses import dataclass

import requests

from . import apsi, psica, wire
from .arith import ModexpCounter
from .errors import (
    ConfigError,
    EmptyInputError,
    InvalidSignatureError,
    LimitExceededError,
    NetworkError,
    ProtocolViolationError,
    RejectedReportError,
    RetryLaterError,
    StaleEpochError,
    UnauthorizedElementError,
)
from .groups import GroupParams
from .ledger import ContactLedger
from .rsakeys import ApsiCommon

log = logging.getLogger(__name__)

DEFAULT_WINDOW_SECONDS = 86_400
DEFAULT_TIMEOUT_S = 600.0


class Tier(enum.IntEnum):
    NONE = 0
    LOW = 1
    ELEVATED = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class TierPolicy:
    """Cardinality thresholds for the warning tiers.

    Zero is always NONE and one contact is always LOW; only the upper two
    boundaries are configurable.
    """

    elevated_at: int = 2
    high_at: int = 5

    def __post_init__(self) -> None:
        if not 2 <= self.elevated_at <= self.high_at:
            raise ConfigError("need 2 <= elevated_at <= high_at")

    def tier_for(self, cardinality: int) -> Tier:
        if cardinality < 0:
            raise ValueError("cardinality cannot be negative")
        if cardinality == 0:
            return Tier.NONE
        if cardinality >= self.high_at:
            return Tier.HIGH
        if cardinality >= self.elevated_at:
            return Tier.ELEVATED
        return Tier.LOW


@dataclass
class Warning:
    cardinality: int
    tier: Tier
    issued_at: int


class QuerySchedule:
    """Next query time drawn uniformly over a sliding window."""

    def __init__(self, window_seconds: float = DEFAULT_WINDOW_SECONDS, rng: random.Random | None = None) -> None:
        if window_seconds <= 0:
            raise ConfigError("schedule window must be positive")
        self.window_seconds = window_seconds
        self.rng = rng if rng is not None else random.SystemRandom()
        self.next_fire: float | None = None

    def reschedule(self, now: float) -> float:
        self.next_fire = now + self.rng.random() * self.window_seconds
        return self.next_fire


class HttpTransport:
    """requests-backed client for the authority endpoints."""

    def __init__(self, base_url: str, timeout_s: float = DEFAULT_TIMEOUT_S) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.session = requests.Session()

    def close(self) -> None:
        self.session.close()

    def _call(self, method: str, path: str, obj: dict | None = None) -> dict:
        url = self.base_url + path
        try:
            if method == "GET":
                resp = self.session.get(url, timeout=self.timeout_s)
            else:
                resp = self.session.post(
                    url,
                    data=wire.to_bytes(obj if obj is not None else {}),
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout_s,
                )
        except requests.RequestException as exc:
            raise RetryLaterError(f"cannot reach {url}: {exc}") from exc
        body = self._parse_body(resp)
        if resp.status_code == 200:
            return body
        raise self._error_for(resp.status_code, body, url)

    @staticmethod
    def _parse_body(resp) -> dict:
        try:
            obj = resp.json()
        except ValueError:
            obj = {}
        return obj if isinstance(obj, dict) else {}

    @staticmethod
    def _error_for(status: int, body: dict, url: str) -> NetworkError | ProtocolViolationError | RejectedReportError:
        detail = body.get("detail", f"HTTP {status}")
        code = body.get("error", "")
        if status == 429:
            return RetryLaterError(detail)
        if status == 409:
            return StaleEpochError(detail)
        if status == 413:
            return LimitExceededError(detail)
        if status == 400:
            if code == "rejected-report":
                return RejectedReportError(detail)
            return ProtocolViolationError(detail)
        return NetworkError(f"{url} answered HTTP {status}: {detail}")

    def psica_query(self, request: psica.PsiCaRequest) -> psica.PsiCaResponse:
        return wire.decode_psica_response(self._call("POST", "/v1/psica/query", wire.encode_psica_request(request)))

    def apsi_digest(self) -> apsi.ApsiDigest:
        return wire.decode_apsi_digest(self._call("GET", "/v1/apsi/digest"))

    def apsi_query(self, request: apsi.ApsiRequest) -> apsi.ApsiResponse:
        return wire.decode_apsi_response(self._call("POST", "/v1/apsi/query", wire.encode_apsi_request(request)))

    def send_feedback(self, report: dict) -> None:
        self._call("POST", "/v1/feedback", report)

    def ca_sign(self, own_id: bytes, peer_id: bytes) -> int:
        body = self._call("POST", "/v1/ca/sign", {"own": own_id.hex(), "peer": peer_id.hex()})
        if "sigma" not in body:
            raise ProtocolViolationError("sign response lacks sigma")
        return wire.decode_int(body["sigma"])


def _query_once(
    ledger: ContactLedger,
    transport,
    params: GroupParams,
    common: ApsiCommon | None,
    protocol: str,
    counter: ModexpCounter | None,
) -> int:
    view = ledger.query_view()
    if not view:
        raise EmptyInputError("contact ledger is empty; nothing to query")
    if protocol == "psica":
        state, request = psica.client_prepare([peer for peer, _ in view], params, counter)
        response = transport.psica_query(request)
        return psica.client_finish(state, response, counter)
    if protocol == "apsi":
        if common is None:
            raise ConfigError("authorized protocol needs the authority's RSA parameters")
        unsigned = [peer for peer, sigma in view if sigma is None]
        if unsigned:
            raise UnauthorizedElementError(f"{len(unsigned)} contacts lack signatures; sign them first")
        state = apsi.client_prepare(view, common)
        digest = transport.apsi_digest()
        request = apsi.client_request(state, digest.epoch_id, counter)
        try:
            response = transport.apsi_query(request)
        except StaleEpochError:
            # Epoch rotated between digest fetch and query; refresh once.
            digest = transport.apsi_digest()
            request = apsi.client_request(state, digest.epoch_id, counter)
            response = transport.apsi_query(request)
        return apsi.client_finish(state, digest, response, counter)
    raise ConfigError(f"unknown protocol {protocol!r}")


def run_query(
    ledger: ContactLedger,
    transport,
    params: GroupParams,
    common: ApsiCommon | None = None,
    protocol: str = "psica",
    tier_policy: TierPolicy = TierPolicy(),
    counter: ModexpCounter | None = None,
    retries: int = 3,
    backoff_s: float = 5.0,
    clock=time.time,
    sleep=time.sleep,
) -> Warning:
    """One full protocol round against the authority, with transient retries.

    Transient transport failures back off exponentially; protocol errors
    surface immediately.
    """
    attempt = 0
    while True:
        try:
            cardinality = _query_once(ledger, transport, params, common, protocol, counter)
            break
        except RetryLaterError:
            attempt += 1
            if attempt > retries:
                raise
            delay = backoff_s * 2 ** (attempt - 1)
            log.info("query attempt %d failed; retrying in %.0fs", attempt, delay)
            sleep(delay)
    return Warning(cardinality=cardinality, tier=tier_policy.tier_for(cardinality), issued_at=int(clock()))


def schedule_loop(
    schedule: QuerySchedule,
    query_fn,
    iterations: int | None = None,
    clock=time.time,
    sleep=time.sleep,
) -> list:
    """Fire query_fn at each scheduled time, redraw, repeat.

    One query in flight at a time by construction. iterations=None loops
    until query_fn raises; tests pass a bound.
    """
    results = []
    fired = 0
    while iterations is None or fired < iterations:
        now = clock()
        if schedule.next_fire is None:
            schedule.reschedule(now)
        if now < schedule.next_fire:
            sleep(schedule.next_fire - now)
        results.append(query_fn())
        fired += 1
        schedule.reschedule(clock())
    return results


def send_feedback(
    transport,
    warning: Warning,
    demographics: dict,
    coarse_location: str,
    consent: bool,
) -> bool:
    """Post the anonymous report; returns False when skipped.

    Sent exactly three fields, nothing derived from the ledger. Requires
    explicit consent and at least one intersection match.
    """
    if not consent or warning.cardinality < 1:
        return False
    transport.send_feedback(
        {
            "demographics": dict(demographics),
            "intersection_size": warning.cardinality,
            "coarse_location": coarse_location,
        }
    )
    return True


def request_signature(transport, own_id: bytes, peer_id: bytes, common: ApsiCommon) -> int:
    """Ask the certification authority to sign one contact and verify it."""
    sigma = transport.ca_sign(own_id, peer_id)
    if not apsi.verify_signature(peer_id, sigma, common):
        raise InvalidSignatureError("authority returned a signature that does not verify")
    return sigma


def sign_ledger(ledger: ContactLedger, transport, own_id: bytes, common: ApsiCommon) -> int:
    """Sign every unsigned contact in the ledger via the CA endpoint."""
    return ledger.sign_contacts(lambda peer: transport.ca_sign(own_id, peer), common)

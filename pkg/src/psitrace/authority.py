"""Health-authority service: diagnosis database, epoch cache, HTTP endpoints.

The database holds 16-byte hashes of diagnosed-patient IDs. Per epoch the
service precomputes what both protocols can share across clients: the hashed
and permuted server set for the cardinality protocol, and the epoch exponent
plus published tag digest for the authorized protocol. Any database change
or epoch expiry invalidates the cache; the next request rebuilds it.

Endpoints (JSON bodies, see the wire module):
  POST /v1/psica/query   cardinality protocol round
  GET  /v1/apsi/digest   current epoch digest (optional ?epoch= check)
  POST /v1/apsi/query    authorized protocol round
  POST /v1/feedback      anonymous statistics report
  POST /v1/ca/sign       contact signing; only when the key file holds d
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from . import apsi, psica, wire
from .arith import ModexpCounter
from .errors import (
    LimitExceededError,
    ProtocolViolationError,
    RejectedReportError,
    RetryLaterError,
    StaleEpochError,
)
from .fdh import check_element
from .groups import GroupParams
from .rsakeys import ApsiCommon, RsaAuthorityKey

log = logging.getLogger(__name__)

DEFAULT_EPOCH_SECONDS = 24 * 3600
DEFAULT_MIN_INTERVAL_S = 3600
DEFAULT_MAX_BODY = 32 * 1024 * 1024

_HEX_ELEMENT = re.compile(r"\A[0-9a-f]{32}\Z")

# Report keys that could deanonymize the sender; presence rejects the report.
_FORBIDDEN_KEYS = frozenset(
    {
        "uid", "uids", "user", "user_id", "owner", "name", "email", "phone",
        "msisdn", "imei", "imsi", "mac", "ip", "ip_address", "device_id",
        "contact", "contacts", "contact_list", "peer", "peers", "peer_id",
        "ledger", "sigma", "signature",
    }
)
_MAX_REPORT_STRING = 64
_MAX_REPORT_KEYS = 16


class DiagnosisDb:
    """Set of diagnosed-ID hashes plus an insertion log."""

    def __init__(self) -> None:
        self._elements: set[bytes] = set()
        self._log: list[tuple[int, bytes]] = []
        self.version = 0

    def __len__(self) -> int:
        return len(self._elements)

    def __contains__(self, element: bytes) -> bool:
        return element in self._elements

    def elements(self) -> list[bytes]:
        """Insertion order; the cache permutes, so order carries no secrets."""
        return [el for _, el in self._log if el in self._elements]

    def add(self, element: bytes, now_ts: int | None = None) -> int:
        """Idempotent insert; returns the new size."""
        check_element(element)
        if element not in self._elements:
            self._elements.add(element)
            self._log.append((int(now_ts if now_ts is not None else time.time()), element))
            self.version += 1
        return len(self._elements)

    def insertion_log(self) -> list[tuple[int, bytes]]:
        return list(self._log)


def load_db(path: str | Path) -> DiagnosisDb:
    """DB file: newline-delimited lowercase hex hashes."""
    db = DiagnosisDb()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if not _HEX_ELEMENT.match(line):
            raise ProtocolViolationError(f"db line {lineno}: not a 32-char lowercase hex hash")
        db.add(bytes.fromhex(line))
    return db


def save_db(db: DiagnosisDb, path: str | Path) -> None:
    Path(path).write_text("".join(el.hex() + "\n" for el in db.elements()), encoding="utf-8")


@dataclass
class EpochCache:
    """Shared per-epoch precomputation, immutable once built."""

    epoch_id: str
    db_version: int
    expires_at: int
    hs_list: list[int]
    r_s: int
    digest: apsi.ApsiDigest


@dataclass
class FeedbackReport:
    demographics: dict
    intersection_size: int
    coarse_location: str
    received_at: int = 0


class MinIntervalLimiter:
    """Per-key admission: at most one query per min_interval_s."""

    def __init__(self, min_interval_s: float = DEFAULT_MIN_INTERVAL_S) -> None:
        self.min_interval_s = min_interval_s
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def admit(self, key: str, now: float) -> None:
        if self.min_interval_s <= 0:
            return
        with self._lock:
            last = self._last.get(key)
            if last is not None and now - last < self.min_interval_s:
                wait = self.min_interval_s - (now - last)
                raise RetryLaterError(f"query interval not elapsed; retry in {wait:.0f}s")
            self._last[key] = now


class AuthorityService:
    """Protocol-serving core; transport-agnostic, thread-safe."""

    def __init__(
        self,
        params: GroupParams,
        rsa: RsaAuthorityKey | ApsiCommon,
        db: DiagnosisDb | None = None,
        epoch_seconds: int = DEFAULT_EPOCH_SECONDS,
        v_max: int = psica.DEFAULT_V_MAX,
        min_interval_s: float = DEFAULT_MIN_INTERVAL_S,
        clock=time.time,
        db_path: str | Path | None = None,
    ) -> None:
        self.params = params
        if isinstance(rsa, RsaAuthorityKey):
            self.ca_key: RsaAuthorityKey | None = rsa
            self.common = rsa.common()
        else:
            self.ca_key = None
            self.common = rsa
        self.db = db if db is not None else DiagnosisDb()
        self.epoch_seconds = epoch_seconds
        self.v_max = v_max
        self.clock = clock
        self.limiter = MinIntervalLimiter(min_interval_s)
        self.feedback_log: list[FeedbackReport] = []
        self._db_path = Path(db_path) if db_path is not None else None
        self._db_stamp = self._file_stamp()
        self._cache: EpochCache | None = None
        self._lock = threading.Lock()

    # -- database -----------------------------------------------------------

    def _file_stamp(self):
        if self._db_path is None or not self._db_path.exists():
            return None
        st = os.stat(self._db_path)
        return (st.st_mtime_ns, st.st_size)

    def _maybe_reload_db(self) -> None:
        """Pick up edits made to the db file by the admin CLI."""
        if self._db_path is None:
            return
        stamp = self._file_stamp()
        if stamp != self._db_stamp:
            self._db_stamp = stamp
            if self._db_path.exists():
                self.db = load_db(self._db_path)
                self.db.version = int(time.time_ns())  # always beats the cached version

    def add_diagnosis(self, element: bytes) -> int:
        """Admin-only insert; cache staleness follows from the version bump."""
        with self._lock:
            return self.db.add(element, int(self.clock()))

    # -- epoch cache ---------------------------------------------------------

    def current_cache(self, counter: ModexpCounter | None = None) -> EpochCache:
        """Return a fresh cache, rebuilding under the lock when stale.

        Readers keep using the object they grabbed even if a rebuild swaps
        in a newer one mid-request; a request never sees a mix of epochs.
        """
        now = int(self.clock())
        with self._lock:
            self._maybe_reload_db()
            cache = self._cache
            if cache is not None and cache.db_version == self.db.version and now < cache.expires_at:
                return cache
            window = now // self.epoch_seconds
            epoch_id = f"e{window}.{self.db.version}"
            elements = self.db.elements()
            hs_list = psica.build_hs_cache(elements, self.params, counter)
            r_s = apsi.sample_epoch_secret(self.common)
            digest = apsi.server_publish_digest(elements, epoch_id, r_s, self.common, counter)
            cache = EpochCache(
                epoch_id=epoch_id,
                db_version=self.db.version,
                expires_at=(window + 1) * self.epoch_seconds,
                hs_list=hs_list,
                r_s=r_s,
                digest=digest,
            )
            self._cache = cache
            log.info("epoch cache rebuilt: id=%s w=%d", epoch_id, len(elements))
            return cache

    # -- protocol endpoints --------------------------------------------------

    def serve_psica(self, request: psica.PsiCaRequest, counter: ModexpCounter | None = None) -> psica.PsiCaResponse:
        cache = self.current_cache()
        response, _eph = psica.server_respond(request, cache.hs_list, self.params, self.v_max, counter)
        return response

    def serve_apsi_digest(self, epoch_id: str | None = None) -> apsi.ApsiDigest:
        cache = self.current_cache()
        if epoch_id is not None and epoch_id != cache.epoch_id:
            raise StaleEpochError(f"epoch {epoch_id!r} is not current")
        return cache.digest

    def serve_apsi(self, request: apsi.ApsiRequest, counter: ModexpCounter | None = None) -> apsi.ApsiResponse:
        cache = self.current_cache()
        if request.epoch_id != cache.epoch_id:
            raise StaleEpochError(f"epoch {request.epoch_id!r} is not current; refetch the digest")
        return apsi.server_respond(request, cache.r_s, self.common, self.v_max, counter)

    def sign_contact(self, own_id: bytes, peer_id: bytes) -> int:
        """CA role: blindless signing of a submitted contact pair."""
        if self.ca_key is None:
            raise ProtocolViolationError("this deployment does not hold the signing key")
        check_element(own_id)
        return apsi.ca_sign(peer_id, self.ca_key)

    # -- feedback ------------------------------------------------------------

    def accept_feedback(self, obj: dict) -> FeedbackReport:
        """Validate shape, screen for identifying material, append to the log."""
        report = self._screen_feedback(obj)
        with self._lock:
            self.feedback_log.append(report)
        return report

    def _screen_feedback(self, obj) -> FeedbackReport:
        if not isinstance(obj, dict) or set(obj) != {"demographics", "intersection_size", "coarse_location"}:
            raise RejectedReportError("report must carry exactly demographics, intersection_size, coarse_location")
        demographics = obj["demographics"]
        size = obj["intersection_size"]
        location = obj["coarse_location"]
        if not isinstance(demographics, dict) or len(demographics) > _MAX_REPORT_KEYS:
            raise RejectedReportError("demographics must be a small string map")
        if not isinstance(size, int) or isinstance(size, bool) or size < 1:
            raise RejectedReportError("intersection_size must be an integer >= 1")
        if not isinstance(location, str) or not 1 <= len(location) <= _MAX_REPORT_STRING:
            raise RejectedReportError("coarse_location must be a short string")
        strings = [location]
        for key, value in demographics.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise RejectedReportError("demographics entries must be strings")
            if len(key) > _MAX_REPORT_STRING or len(value) > _MAX_REPORT_STRING:
                raise RejectedReportError("demographics entries too long")
            strings += [key, value]
            if key.lower() in _FORBIDDEN_KEYS:
                raise RejectedReportError(f"forbidden field {key!r} in report")
        for s in strings:
            if re.search(r"[0-9a-fA-F]{32}", s):
                raise RejectedReportError("report contains identifier-like hex material")
        return FeedbackReport(
            demographics=dict(demographics),
            intersection_size=size,
            coarse_location=location,
            received_at=int(self.clock()),
        )

    def feedback_histogram(self) -> dict[int, int]:
        """Reports per intersection size, for offline aggregation."""
        hist: dict[int, int] = {}
        with self._lock:
            for report in self.feedback_log:
                hist[report.intersection_size] = hist.get(report.intersection_size, 0) + 1
        return hist


# -- HTTP layer ---------------------------------------------------------------

_ERROR_CODES = (
    (StaleEpochError, 409, "stale-epoch"),
    (LimitExceededError, 413, "limit-exceeded"),
    (RetryLaterError, 429, "retry-later"),
    (RejectedReportError, 400, "rejected-report"),
    (ProtocolViolationError, 400, "protocol-violation"),
)


class AuthorityHandler(BaseHTTPRequestHandler):
    """Thin JSON adapter over AuthorityService."""

    server_version = "psitrace-authority"
    protocol_version = "HTTP/1.1"
    max_body = DEFAULT_MAX_BODY

    @property
    def service(self) -> AuthorityService:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # default stderr chatter off
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, obj: dict, extra_headers: dict | None = None) -> None:
        body = wire.to_bytes(obj)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for k, v in (extra_headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, exc: Exception) -> None:
        for klass, status, code in _ERROR_CODES:
            if isinstance(exc, klass):
                headers = {"Retry-After": "60"} if status == 429 else None
                self._send_json(status, {"error": code, "detail": str(exc)}, headers)
                return
        log.exception("unhandled error serving request")
        self._send_json(500, {"error": "internal", "detail": "internal error"})

    def _read_body(self) -> bytes:
        length = self.headers.get("Content-Length")
        if length is None or not length.isdigit():
            raise ProtocolViolationError("Content-Length required")
        n = int(length)
        if n > self.max_body:
            raise LimitExceededError(f"body of {n} bytes exceeds limit {self.max_body}")
        return self.rfile.read(n)

    def do_GET(self) -> None:
        url = urlsplit(self.path)
        try:
            if url.path == "/v1/apsi/digest":
                query = parse_qs(url.query)
                epoch = query["epoch"][0] if "epoch" in query else None
                digest = self.service.serve_apsi_digest(epoch)
                self._send_json(200, wire.encode_apsi_digest(digest))
            else:
                self._send_json(404, {"error": "not-found", "detail": self.path})
        except Exception as exc:
            self._send_error_json(exc)

    def do_POST(self) -> None:
        url = urlsplit(self.path)
        try:
            routes = {
                "/v1/psica/query": self._post_psica,
                "/v1/apsi/query": self._post_apsi,
                "/v1/feedback": self._post_feedback,
                "/v1/ca/sign": self._post_sign,
            }
            handler = routes.get(url.path)
            if handler is None:
                self._send_json(404, {"error": "not-found", "detail": self.path})
                return
            handler(wire.from_bytes(self._read_body()))
        except Exception as exc:
            self._send_error_json(exc)

    def _client_key(self) -> str:
        return self.client_address[0]

    def _post_psica(self, obj: dict) -> None:
        self.service.limiter.admit(self._client_key(), self.service.clock())
        response = self.service.serve_psica(wire.decode_psica_request(obj))
        self._send_json(200, wire.encode_psica_response(response))

    def _post_apsi(self, obj: dict) -> None:
        self.service.limiter.admit(self._client_key(), self.service.clock())
        response = self.service.serve_apsi(wire.decode_apsi_request(obj))
        self._send_json(200, wire.encode_apsi_response(response))

    def _post_feedback(self, obj: dict) -> None:
        self.service.accept_feedback(obj)
        self._send_json(200, {"ok": True})

    def _post_sign(self, obj: dict) -> None:
        if not isinstance(obj, dict) or set(obj) != {"own", "peer"}:
            raise ProtocolViolationError("sign request must carry exactly own and peer")
        own, peer = obj["own"], obj["peer"]
        for value in (own, peer):
            if not isinstance(value, str) or not _HEX_ELEMENT.match(value):
                raise ProtocolViolationError("ids must be 32-char lowercase hex")
        sigma = self.service.sign_contact(bytes.fromhex(own), bytes.fromhex(peer))
        self._send_json(200, {"sigma": wire.encode_int(sigma)})


def make_http_server(service: AuthorityService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Bind a threading HTTP server; port 0 picks a free port."""
    server = ThreadingHTTPServer((host, port), AuthorityHandler)
    server.service = service  # type: ignore[attr-defined]
    return server


def serve_forever(service: AuthorityService, host: str, port: int) -> None:
    server = make_http_server(service, host, port)
    log.info("authority listening on %s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()

"""Client-side contact history: ingest, retention pruning, signatures, file IO.

Each qualifying proximity event appends one record. Repeat contacts with the
same peer stay separate records (duration detail is useful locally) but the
protocol query view collapses them to one element per distinct peer.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from pathlib import Path

from .apsi import verify_signature
from .errors import ConfigError, InvalidSignatureError
from .fdh import check_element
from .rsakeys import ApsiCommon

SECONDS_PER_DAY = 86_400


@dataclass(frozen=True)
class ProximityPolicy:
    """Thresholds deciding what counts as a contact and how long it is kept.

    t_min_s is inclusive: an event lasting exactly t_min_s is recorded.
    radius_m only matters to the event simulator; real ranging hardware is
    out of scope.
    """

    t_min_s: int = 300
    radius_m: float = 2.0
    window_days: int = 21

    def __post_init__(self) -> None:
        if self.t_min_s <= 0:
            raise ConfigError("t_min_s must be positive")
        if self.radius_m <= 0:
            raise ConfigError("radius_m must be positive")
        if self.window_days <= 0:
            raise ConfigError("window_days must be positive")


@dataclass
class ContactRecord:
    peer_id: bytes
    first_seen: int
    duration: int
    sigma: int | None = None


@dataclass
class ContactLedger:
    """Records sorted by first_seen; single writer."""

    owner_uid: str
    records: list[ContactRecord] = field(default_factory=list)

    def ingest_event(self, peer_id: bytes, start_ts: int, duration: int, policy: ProximityPolicy) -> bool:
        """Append a record iff the event lasted at least t_min_s.

        Inserts in first_seen order so the on-disk invariant (non-decreasing
        timestamps) holds no matter how events arrive.
        """
        check_element(peer_id)
        if start_ts < 0 or duration < 0:
            raise ValueError("timestamps and durations are non-negative")
        if duration < policy.t_min_s:
            return False
        record = ContactRecord(peer_id=peer_id, first_seen=int(start_ts), duration=int(duration))
        bisect.insort(self.records, record, key=lambda r: r.first_seen)
        return True

    def prune(self, now_ts: int, policy: ProximityPolicy) -> int:
        """Drop records older than the retention window; returns the count."""
        horizon = now_ts - policy.window_days * SECONDS_PER_DAY
        kept = [r for r in self.records if r.first_seen >= horizon]
        removed = len(self.records) - len(kept)
        self.records = kept
        return removed

    def query_view(self) -> list[tuple[bytes, int | None]]:
        """Distinct peers in first-seen order, each with its best signature.

        Any signed record of a peer supplies the signature, so re-signing
        after new events with an already-signed peer is unnecessary.
        """
        order: list[bytes] = []
        sigma_by_peer: dict[bytes, int | None] = {}
        for record in self.records:
            if record.peer_id not in sigma_by_peer:
                order.append(record.peer_id)
                sigma_by_peer[record.peer_id] = record.sigma
            elif sigma_by_peer[record.peer_id] is None:
                sigma_by_peer[record.peer_id] = record.sigma
        return [(peer, sigma_by_peer[peer]) for peer in order]

    def unsigned_peers(self) -> list[bytes]:
        """Distinct peers with no signed record, in first-seen order."""
        return [peer for peer, sigma in self.query_view() if sigma is None]

    def sign_contacts(self, sign_fn, common: ApsiCommon) -> int:
        """Fetch and store signatures for all unsigned peers.

        sign_fn(peer_id) -> sigma asks the certification authority. A sigma
        that fails verification raises and is never stored. Returns the
        number of records that gained a signature.
        """
        stored = 0
        for peer in self.unsigned_peers():
            sigma = sign_fn(peer)
            if not verify_signature(peer, sigma, common):
                raise InvalidSignatureError("authority returned a signature that does not verify")
            for record in self.records:
                if record.peer_id == peer and record.sigma is None:
                    record.sigma = sigma
                    stored += 1
        return stored

    def save(self, path: str | Path) -> None:
        lines = []
        for r in self.records:
            sigma = format(r.sigma, "x") if r.sigma is not None else "-"
            lines.append(f"{r.peer_id.hex()}\t{r.first_seen}\t{r.duration}\t{sigma}\n")
        Path(path).write_text("".join(lines), encoding="utf-8")


def load_ledger(path: str | Path, owner_uid: str = "") -> ContactLedger:
    """Parse a ledger file; any malformed line fails the whole load."""
    ledger = ContactLedger(owner_uid=owner_uid)
    last_seen = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        parts = line.split("\t")
        if len(parts) != 4:
            raise ConfigError(f"ledger line {lineno}: expected 4 tab-separated fields")
        try:
            peer_id = check_element(bytes.fromhex(parts[0]))
            first_seen = int(parts[1])
            duration = int(parts[2])
            sigma = None if parts[3] == "-" else int(parts[3], 16)
        except ValueError as exc:
            raise ConfigError(f"ledger line {lineno}: {exc}") from exc
        if first_seen < 0 or duration < 0:
            raise ConfigError(f"ledger line {lineno}: negative timestamp or duration")
        if last_seen is not None and first_seen < last_seen:
            raise ConfigError(f"ledger line {lineno}: timestamps must be non-decreasing")
        last_seen = first_seen
        ledger.records.append(ContactRecord(peer_id=peer_id, first_seen=first_seen, duration=duration, sigma=sigma))
    return ledger

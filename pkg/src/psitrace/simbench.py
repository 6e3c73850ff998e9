"""Synthetic scenarios, the plaintext oracle, and the benchmark runner.

Scenario generation runs on a seeded deterministic PRNG so runs are
bit-reproducible; the protocols underneath keep using the system CSPRNG,
which is fine because only their outputs (cardinalities) reach the results.
"""

from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import apsi, psica, wire
from .agent import Tier, TierPolicy
from .arith import ModexpCounter
from .errors import ConfigError
from .fdh import uid_to_element
from .groups import GroupParams
from .ledger import ContactLedger, ProximityPolicy
from .rsakeys import RsaAuthorityKey

BENCH_CSV_COLUMNS = ["protocol", "v", "w", "side", "phase", "ms_mean", "modexp", "bytes"]
SIM_CSV_COLUMNS = ["uid", "contacts", "cardinality", "tier"]

# Spread of contact durations beyond the qualifying minimum, seconds.
_DURATION_MEAN_EXTRA_S = 600.0


@dataclass(frozen=True)
class ScenarioConfig:
    population: int
    days: int
    contacts_per_day: float
    diagnosis_rate: float
    policy: ProximityPolicy = ProximityPolicy()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ConfigError("population must be at least 1")
        if self.days < 0 or self.contacts_per_day < 0:
            raise ConfigError("days and contact rate must be non-negative")
        if not 0 <= self.diagnosis_rate <= 1:
            raise ConfigError("diagnosis_rate must be in [0, 1]")


@dataclass
class Scenario:
    config: ScenarioConfig
    uids: list[str]
    elements: dict[str, bytes]
    ledgers: dict[str, ContactLedger]
    diagnosed: list[bytes]


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Seeded population, contact events, and diagnosis draws.

    Contacts are recorded by the initiating side only, so the expected
    ledger size is contacts_per_day * days per person.
    """
    rng = random.Random(config.seed)
    uids = [f"user-{i:05d}" for i in range(config.population)]
    elements = {uid: uid_to_element(uid) for uid in uids}
    ledgers = {uid: ContactLedger(owner_uid=uid) for uid in uids}

    for i, uid in enumerate(uids):
        for day in range(config.days):
            for _ in range(_poisson(rng, config.contacts_per_day)):
                if config.population < 2:
                    continue
                peer = rng.randrange(config.population - 1)
                if peer >= i:
                    peer += 1
                start_ts = day * 86_400 + rng.randrange(86_400)
                duration = config.policy.t_min_s + int(rng.expovariate(1.0 / _DURATION_MEAN_EXTRA_S))
                ledgers[uid].ingest_event(elements[uids[peer]], start_ts, duration, config.policy)

    diagnosed = [elements[uid] for uid in uids if rng.random() < config.diagnosis_rate]
    return Scenario(config=config, uids=uids, elements=elements, ledgers=ledgers, diagnosed=diagnosed)


def oracle_intersection(client_elements, server_elements) -> int:
    """Ground truth by direct plaintext comparison."""
    return len(set(client_elements) & set(server_elements))


@dataclass
class SimRow:
    uid: str
    contacts: int
    cardinality: int
    tier: str


def run_sim(
    config: ScenarioConfig,
    protocol: str,
    params: GroupParams,
    key: RsaAuthorityKey,
    tier_policy: TierPolicy = TierPolicy(),
) -> tuple[Scenario, list[SimRow]]:
    """Full pipeline: scenario, per-client protocol round, warning tiers.

    The diagnosed set plays the authority database; one shared offline
    precomputation serves every client, as a deployment would.
    """
    if protocol not in ("psica", "apsi"):
        raise ConfigError(f"unknown protocol {protocol!r}")
    scenario = generate_scenario(config)
    common = key.common()
    now_ts = config.days * 86_400

    hs_cache = psica.build_hs_cache(scenario.diagnosed, params) if protocol == "psica" else []
    if protocol == "apsi":
        r_s = apsi.sample_epoch_secret(common)
        digest = apsi.server_publish_digest(scenario.diagnosed, "sim", r_s, common)
        sigma_cache: dict[bytes, int] = {}

    rows = []
    for uid in scenario.uids:
        ledger = scenario.ledgers[uid]
        ledger.prune(now_ts, config.policy)
        view = ledger.query_view()
        if not view:
            rows.append(SimRow(uid=uid, contacts=0, cardinality=0, tier=Tier.NONE.label))
            continue
        if protocol == "psica":
            state, request = psica.client_prepare([peer for peer, _ in view], params)
            response, _ = psica.server_respond(request, hs_cache, params)
            cardinality = psica.client_finish(state, response)
        else:
            signed = []
            for peer, _ in view:
                if peer not in sigma_cache:
                    sigma_cache[peer] = apsi.ca_sign(peer, key)
                signed.append((peer, sigma_cache[peer]))
            state = apsi.client_prepare(signed, common)
            request = apsi.client_request(state, "sim")
            response = apsi.server_respond(request, r_s, common)
            cardinality = apsi.client_finish(state, digest, response)
        tier = tier_policy.tier_for(cardinality)
        rows.append(SimRow(uid=uid, contacts=len(view), cardinality=cardinality, tier=tier.label))
    return scenario, rows


def sim_rows_to_csv(rows: list[SimRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SIM_CSV_COLUMNS)
    for row in rows:
        writer.writerow([row.uid, row.contacts, row.cardinality, row.tier])
    return buf.getvalue()


def write_sim_csv(rows: list[SimRow], path: str | Path) -> None:
    Path(path).write_text(sim_rows_to_csv(rows), encoding="utf-8")


# -- benchmark ----------------------------------------------------------------


@dataclass
class PhaseStats:
    ms_mean: float = 0.0
    modexp: int = 0
    bytes: int = 0


@dataclass
class BenchResult:
    """Per-side, per-phase averages for one (protocol, v, w) configuration.

    modexp follows the per-element accounting: element plus public-value
    exponentiations on the client, element-only on the server; hashing and
    validation exponentiations are excluded. Offline phases run once and are
    shared across trials; online phases are averaged over all trials.
    """

    protocol: str
    v: int
    w: int
    trials: int
    phases: dict = field(default_factory=dict)  # (side, phase) -> PhaseStats

    def stats(self, side: str, phase: str) -> PhaseStats:
        return self.phases[(side, phase)]

    def online_ms(self, side: str) -> float:
        return self.stats(side, "online").ms_mean

    def offline_ms(self, side: str) -> float:
        return self.stats(side, "offline").ms_mean


def _client_count(counter: ModexpCounter) -> int:
    return counter.element + counter.public


def _server_count(counter: ModexpCounter) -> int:
    return counter.element


def gen_inputs(v: int, w: int, seed: int = 0, overlap: int | None = None) -> tuple[list[bytes], list[bytes], int]:
    """Distinct random elements with a planted overlap, reproducible by seed."""
    rng = random.Random(seed)
    if overlap is None:
        overlap = min(v, w) // 2
    if overlap > min(v, w):
        raise ConfigError("overlap cannot exceed either set size")
    pool: set[bytes] = set()
    while len(pool) < v + w - overlap:
        pool.add(rng.getrandbits(128).to_bytes(16, "big"))
    flat = sorted(pool)
    rng.shuffle(flat)
    client = flat[: v]
    server = flat[v - overlap : v - overlap + w]
    rng.shuffle(server)
    return client, server, overlap


def run_bench(
    protocol: str,
    v: int,
    w: int,
    trials: int = 20,
    params: GroupParams | None = None,
    key: RsaAuthorityKey | None = None,
    seed: int = 0,
) -> BenchResult:
    """Time both sides' offline and online phases over `trials` runs."""
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    if v < 1 or w < 0:
        raise ConfigError("need v >= 1 and w >= 0")
    if protocol == "psica":
        if params is None:
            from .presets import default_group_params

            params = default_group_params()
        return _bench_psica(v, w, trials, params, seed)
    if protocol == "apsi":
        if key is None:
            from .presets import default_rsa_key

            key = default_rsa_key()
        return _bench_apsi(v, w, trials, key, seed)
    raise ConfigError(f"unknown protocol {protocol!r}")


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - t0) * 1000.0


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _bench_psica(v: int, w: int, trials: int, params: GroupParams, seed: int) -> BenchResult:
    client, server, _ = gen_inputs(v, w, seed)
    result = BenchResult(protocol="psica", v=v, w=w, trials=trials)

    off_counter = ModexpCounter()
    hs_cache, off_ms = _timed(lambda: psica.build_hs_cache(server, params, off_counter))
    result.phases[("server", "offline")] = PhaseStats(off_ms, _server_count(off_counter), 0)

    c_off, s_on, c_on = [], [], []
    counters = {}
    request_bytes = response_bytes = 0
    for _ in range(trials):
        c1 = ModexpCounter()
        (state, request), ms = _timed(lambda: psica.client_prepare(client, params, c1))
        c_off.append(ms)
        s1 = ModexpCounter()
        (response, _eph), ms = _timed(
            lambda: psica.server_respond(request, hs_cache, params, max(v, psica.DEFAULT_V_MAX), s1, validate=False)
        )
        s_on.append(ms)
        c2 = ModexpCounter()
        _, ms = _timed(lambda: psica.client_finish(state, response, c2))
        c_on.append(ms)
        counters = {"c_off": c1, "s_on": s1, "c_on": c2}
        request_bytes = len(wire.to_bytes(wire.encode_psica_request(request)))
        response_bytes = len(wire.to_bytes(wire.encode_psica_response(response)))

    result.phases[("client", "offline")] = PhaseStats(_mean(c_off), _client_count(counters["c_off"]), 0)
    result.phases[("client", "online")] = PhaseStats(_mean(c_on), _client_count(counters["c_on"]), request_bytes)
    result.phases[("server", "online")] = PhaseStats(_mean(s_on), _server_count(counters["s_on"]), response_bytes)
    return result


def _bench_apsi(v: int, w: int, trials: int, key: RsaAuthorityKey, seed: int) -> BenchResult:
    client, server, _ = gen_inputs(v, w, seed)
    common = key.common()
    signed = [(c, apsi.ca_sign(c, key)) for c in client]
    r_s = apsi.sample_epoch_secret(common)
    result = BenchResult(protocol="apsi", v=v, w=w, trials=trials)

    off_counter = ModexpCounter()
    digest, off_ms = _timed(lambda: apsi.server_publish_digest(server, "bench", r_s, common, off_counter))
    digest_bytes = len(wire.to_bytes(wire.encode_apsi_digest(digest)))
    result.phases[("server", "offline")] = PhaseStats(off_ms, _server_count(off_counter), digest_bytes)

    c_off, s_on, c_on = [], [], []
    counters = {}
    request_bytes = response_bytes = 0
    for _ in range(trials):
        c1 = ModexpCounter()

        def _prepare():
            state = apsi.client_prepare(signed, common)
            return state, apsi.client_request(state, "bench", c1)

        (state, request), ms = _timed(_prepare)
        c_off.append(ms)
        s1 = ModexpCounter()
        response, ms = _timed(lambda: apsi.server_respond(request, r_s, common, max(v, apsi.DEFAULT_V_MAX), s1))
        s_on.append(ms)
        c2 = ModexpCounter()
        _, ms = _timed(lambda: apsi.client_finish(state, digest, response, c2))
        c_on.append(ms)
        counters = {"c_off": c1, "s_on": s1, "c_on": c2}
        request_bytes = len(wire.to_bytes(wire.encode_apsi_request(request)))
        response_bytes = len(wire.to_bytes(wire.encode_apsi_response(response)))

    result.phases[("client", "offline")] = PhaseStats(_mean(c_off), _client_count(counters["c_off"]), 0)
    result.phases[("client", "online")] = PhaseStats(_mean(c_on), _client_count(counters["c_on"]), request_bytes)
    result.phases[("server", "online")] = PhaseStats(_mean(s_on), _server_count(counters["s_on"]), response_bytes)
    return result


def bench_rows(result: BenchResult) -> list[list]:
    rows = []
    for side in ("client", "server"):
        for phase in ("offline", "online"):
            stats = result.stats(side, phase)
            rows.append(
                [result.protocol, result.v, result.w, side, phase, f"{stats.ms_mean:.3f}", stats.modexp, stats.bytes]
            )
    return rows


def write_bench_csv(results: list[BenchResult], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_CSV_COLUMNS)
    for result in results:
        writer.writerows(bench_rows(result))
    Path(path).write_text(buf.getvalue(), encoding="utf-8")

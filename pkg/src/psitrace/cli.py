"""Command-line entry points: authority, client, sim, bench.

Exit codes: 0 ok, 2 protocol violation, 3 network trouble, 4 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import agent, authority, presets, simbench
from .errors import (
    ConfigError,
    EmptyInputError,
    GenerationError,
    InvalidSignatureError,
    NetworkError,
    ProtocolViolationError,
    RejectedReportError,
    UnauthorizedElementError,
)
from .fdh import uid_to_element
from .groups import load_params
from .ledger import ContactLedger, ProximityPolicy, load_ledger
from .rsakeys import load_common, load_key

EXIT_OK = 0
EXIT_PROTOCOL = 2
EXIT_NETWORK = 3
EXIT_CONFIG = 4


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, GenerationError, UnauthorizedElementError)):
        return EXIT_CONFIG
    if isinstance(exc, NetworkError):
        return EXIT_NETWORK
    if isinstance(exc, (ProtocolViolationError, InvalidSignatureError, RejectedReportError)):
        return EXIT_PROTOCOL
    return EXIT_CONFIG


def _run(fn, args) -> int:
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return fn(args) or EXIT_OK
    except EmptyInputError as exc:
        print(f"nothing to do: {exc}")
        return EXIT_OK
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        code = _exit_code(exc)
        if code == EXIT_CONFIG and not isinstance(exc, (ConfigError, GenerationError, UnauthorizedElementError)):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def _load_group(path: str | None):
    return load_params(path) if path else presets.default_group_params()


def _load_rsa_any(path: str | None):
    """CA key when the file holds d, public triple otherwise."""
    if not path:
        return presets.default_rsa_key()
    try:
        return load_key(path)
    except ConfigError:
        return load_common(path)


def _element(hex_text: str) -> bytes:
    try:
        value = bytes.fromhex(hex_text)
    except ValueError as exc:
        raise ConfigError(f"not hex: {hex_text!r}") from exc
    if len(value) != 16:
        raise ConfigError("ids are 16 bytes (32 hex chars)")
    return value


def _policy_from_args(args) -> ProximityPolicy:
    return ProximityPolicy(t_min_s=args.t_min, window_days=args.window_days)


# -- authority ----------------------------------------------------------------


def authority_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="authority", description="Health-authority service and database admin.")
    _add_common_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--params", help="group parameter file (default: bundled)")
    p.add_argument("--rsa", help="RSA key file; with d this node also signs contacts")
    p.add_argument("--db", help="diagnosis database file, watched for edits")
    p.add_argument("--listen", default="127.0.0.1:8443", help="host:port")
    p.add_argument("--epoch-hours", type=float, default=24.0)
    p.add_argument("--v-max", type=int, default=100_000)
    p.add_argument("--min-interval-s", type=float, default=authority.DEFAULT_MIN_INTERVAL_S)
    p.set_defaults(fn=_authority_serve)

    p = sub.add_parser("add-diagnosis", help="insert one diagnosed-ID hash")
    p.add_argument("hash", help="32-char lowercase hex")
    p.add_argument("--db", required=True)
    p.set_defaults(fn=_authority_add)

    p = sub.add_parser("import-diagnoses", help="merge a newline-delimited hex file")
    p.add_argument("file")
    p.add_argument("--db", required=True)
    p.set_defaults(fn=_authority_import)

    args = parser.parse_args(argv)
    return _run(args.fn, args)


def _authority_serve(args) -> int:
    try:
        host, port_text = args.listen.rsplit(":", 1)
        port = int(port_text)
    except ValueError as exc:
        raise ConfigError(f"--listen must be host:port, got {args.listen!r}") from exc
    if args.epoch_hours <= 0:
        raise ConfigError("--epoch-hours must be positive")
    params = _load_group(args.params)
    rsa = _load_rsa_any(args.rsa)
    db = authority.load_db(args.db) if args.db and Path(args.db).exists() else None
    service = authority.AuthorityService(
        params=params,
        rsa=rsa,
        db=db,
        epoch_seconds=int(args.epoch_hours * 3600),
        v_max=args.v_max,
        min_interval_s=args.min_interval_s,
        db_path=args.db,
    )
    role = "query+sign" if service.ca_key is not None else "query"
    print(f"authority ({role}) listening on {host}:{port}, w={len(service.db)}")
    authority.serve_forever(service, host, port)
    return EXIT_OK


def _authority_add(args) -> int:
    db = authority.load_db(args.db) if Path(args.db).exists() else authority.DiagnosisDb()
    w = db.add(_element(args.hash))
    authority.save_db(db, args.db)
    print(f"w={w}")
    return EXIT_OK


def _authority_import(args) -> int:
    db = authority.load_db(args.db) if Path(args.db).exists() else authority.DiagnosisDb()
    incoming = authority.load_db(args.file)
    for element in incoming.elements():
        db.add(element)
    authority.save_db(db, args.db)
    print(f"w={len(db)}")
    return EXIT_OK


# -- client ---------------------------------------------------------------------


def client_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="client", description="Contact ledger and exposure queries.")
    _add_common_flags(parser)
    parser.add_argument("--ledger", default="contacts.tsv", help="ledger file path")
    parser.add_argument("--owner", default="local-user", help="own user ID")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record-contact", help="append a proximity event")
    p.add_argument("--peer", required=True, help="peer ID hash, 32 hex chars")
    p.add_argument("--start", type=int, required=True, help="unix seconds")
    p.add_argument("--duration", type=int, required=True, help="seconds")
    p.add_argument("--t-min", type=int, default=300)
    p.add_argument("--window-days", type=int, default=21)
    p.set_defaults(fn=_client_record)

    p = sub.add_parser("sign-contacts", help="obtain CA signatures for unsigned contacts")
    p.add_argument("--ca", required=True, help="certification authority base URL")
    p.add_argument("--rsa", help="RSA public parameter file (default: bundled)")
    p.set_defaults(fn=_client_sign)

    p = sub.add_parser("query", help="run one protocol round and print the warning")
    p.add_argument("--server", required=True, help="authority base URL")
    p.add_argument("--protocol", choices=["psica", "apsi"], default="psica")
    p.add_argument("--now", action="store_true", help="skip the randomized wait")
    p.add_argument("--window-s", type=float, default=agent.DEFAULT_WINDOW_SECONDS, help="schedule window")
    p.add_argument("--params", help="group parameter file (default: bundled)")
    p.add_argument("--rsa", help="RSA public parameter file (default: bundled)")
    p.add_argument("--t-min", type=int, default=300)
    p.add_argument("--window-days", type=int, default=21)
    p.add_argument("--state", default="warning.json", help="where to store the last warning")
    p.set_defaults(fn=_client_query)

    p = sub.add_parser("feedback", help="send the anonymous statistics report")
    p.add_argument("--server", required=True, help="authority base URL")
    p.add_argument("--consent", action="store_true", help="required to send anything")
    p.add_argument("--age-band", default="", help="e.g. 30-39")
    p.add_argument("--region", default="", help="coarse region label, e.g. R5")
    p.add_argument("--state", default="warning.json", help="warning file written by query")
    p.set_defaults(fn=_client_feedback)

    args = parser.parse_args(argv)
    return _run(args.fn, args)


def _load_ledger_file(args) -> ContactLedger:
    path = Path(args.ledger)
    if path.exists():
        return load_ledger(path, owner_uid=args.owner)
    return ContactLedger(owner_uid=args.owner)


def _client_record(args) -> int:
    ledger = _load_ledger_file(args)
    appended = ledger.ingest_event(_element(args.peer), args.start, args.duration, _policy_from_args(args))
    ledger.save(args.ledger)
    print("recorded" if appended else "below threshold, not recorded")
    return EXIT_OK


def _client_sign(args) -> int:
    ledger = _load_ledger_file(args)
    rsa = _load_rsa_any(args.rsa)
    common = rsa.common() if hasattr(rsa, "common") else rsa
    transport = agent.HttpTransport(args.ca)
    own_id = uid_to_element(args.owner)
    signed = agent.sign_ledger(ledger, transport, own_id, common)
    ledger.save(args.ledger)
    print(f"signed {signed} records")
    return EXIT_OK


def _client_query(args) -> int:
    ledger = _load_ledger_file(args)
    ledger.prune(int(time.time()), _policy_from_args(args))
    ledger.save(args.ledger)
    params = _load_group(args.params)
    rsa = _load_rsa_any(args.rsa)
    common = rsa.common() if hasattr(rsa, "common") else rsa
    if not args.now:
        schedule = agent.QuerySchedule(window_seconds=args.window_s)
        fire_at = schedule.reschedule(time.time())
        wait = max(0.0, fire_at - time.time())
        print(f"querying in {wait:.0f}s (randomized schedule; --now skips the wait)")
        time.sleep(wait)
    transport = agent.HttpTransport(args.server)
    warning = agent.run_query(ledger, transport, params, common, protocol=args.protocol)
    Path(args.state).write_text(
        json.dumps({"cardinality": warning.cardinality, "tier": warning.tier.label, "issued_at": warning.issued_at})
        + "\n",
        encoding="utf-8",
    )
    print(f"diagnosed contacts: {warning.cardinality}; warning tier: {warning.tier.label}")
    return EXIT_OK


def _client_feedback(args) -> int:
    if not args.consent:
        print("skipped: feedback needs --consent")
        return EXIT_OK
    state_path = Path(args.state)
    if not state_path.exists():
        raise ConfigError(f"no stored warning at {state_path}; run a query first")
    state = json.loads(state_path.read_text(encoding="utf-8"))
    warning = agent.Warning(
        cardinality=int(state["cardinality"]),
        tier=agent.Tier[state["tier"].upper()],
        issued_at=int(state["issued_at"]),
    )
    demographics = {}
    if args.age_band:
        demographics["age_band"] = args.age_band
    transport = agent.HttpTransport(args.server)
    sent = agent.send_feedback(transport, warning, demographics, args.region or "unspecified", consent=True)
    print("sent" if sent else "skipped: nothing worth reporting")
    return EXIT_OK


# -- sim ------------------------------------------------------------------------


def sim_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sim", description="Seeded end-to-end scenario runner.")
    _add_common_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="generate a scenario and query for every client")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--protocol", choices=["psica", "apsi"], default="psica")
    p.add_argument("--out", help="results CSV path (default: stdout)")
    p.add_argument("--params", help="group parameter file (default: bundled)")
    p.add_argument("--rsa", help="RSA key file with d (default: bundled)")
    p.set_defaults(fn=_sim_run)

    args = parser.parse_args(argv)
    return _run(args.fn, args)


def load_scenario_config(path: str | Path, seed_override: int | None = None) -> simbench.ScenarioConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("scenario config must be a JSON object")
    try:
        policy_obj = obj.get("policy", {})
        policy = ProximityPolicy(
            t_min_s=int(policy_obj.get("t_min_s", 300)),
            radius_m=float(policy_obj.get("radius_m", 2.0)),
            window_days=int(policy_obj.get("window_days", 21)),
        )
        config = simbench.ScenarioConfig(
            population=int(obj["population"]),
            days=int(obj["days"]),
            contacts_per_day=float(obj["contacts_per_day"]),
            diagnosis_rate=float(obj["diagnosis_rate"]),
            policy=policy,
            seed=int(seed_override if seed_override is not None else obj.get("seed", 0)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from exc
    return config


def _sim_run(args) -> int:
    config = load_scenario_config(args.config, args.seed)
    key = load_key(args.rsa) if args.rsa else presets.default_rsa_key()
    params = _load_group(args.params)
    scenario, rows = simbench.run_sim(config, args.protocol, params, key)
    csv_text = simbench.sim_rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv_text)
    warned = sum(1 for r in rows if r.tier != "none")
    print(
        f"population={config.population} diagnosed={len(scenario.diagnosed)} "
        f"warned={warned} protocol={args.protocol} seed={config.seed}",
        file=sys.stderr,
    )
    return EXIT_OK


# -- bench ----------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def bench_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bench", description="Protocol timing and accounting harness.")
    _add_common_flags(parser)
    parser.add_argument("--protocol", choices=["psica", "apsi"], default="psica")
    parser.add_argument("--v", default="1000", help="client sizes, comma-separated")
    parser.add_argument("--w", default="1000", help="server sizes, comma-separated")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--out", help="CSV output path")
    parser.add_argument("--seed", type=int, default=0, help="input-generation seed")
    parser.add_argument("--params", help="group parameter file (default: bundled)")
    parser.add_argument("--rsa", help="RSA key file with d (default: bundled)")
    parser.set_defaults(fn=_bench_run)
    args = parser.parse_args(argv)
    return _run(args.fn, args)


def _bench_run(args) -> int:
    params = _load_group(args.params)
    key = load_key(args.rsa) if args.rsa else presets.default_rsa_key()
    results = []
    print(",".join(simbench.BENCH_CSV_COLUMNS))
    for v in _int_list(args.v):
        for w in _int_list(args.w):
            result = simbench.run_bench(args.protocol, v, w, args.trials, params=params, key=key, seed=args.seed)
            results.append(result)
            for row in simbench.bench_rows(result):
                print(",".join(str(cell) for cell in row))
    if args.out:
        simbench.write_bench_csv(results, args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(client_main())

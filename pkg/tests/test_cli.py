"""End-to-end checks for the four console entry points."""

from __future__ import annotations

import json
import threading
import time

import pytest
from conftest import make_elements

from psitrace import authority
from psitrace.cli import (
    EXIT_CONFIG,
    EXIT_NETWORK,
    EXIT_OK,
    authority_main,
    bench_main,
    client_main,
    sim_main,
)

_PEERS = make_elements(4, seed=90)
_NOW = int(time.time())


@pytest.fixture(scope="module")
def server(group1024, rsa1024):
    """Live HTTP authority whose database contains _PEERS[0]."""
    db = authority.DiagnosisDb()
    db.add(_PEERS[0])
    db.add(make_elements(3, seed=91)[0])
    service = authority.AuthorityService(params=group1024, rsa=rsa1024, db=db, min_interval_s=0.0)
    httpd = authority.make_http_server(service, "127.0.0.1", 0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}"
    httpd.shutdown()


def _record(ledger_path, peer: bytes, start: int) -> int:
    return client_main(
        [
            "--ledger",
            str(ledger_path),
            "record-contact",
            "--peer",
            peer.hex(),
            "--start",
            str(start),
            "--duration",
            "600",
        ]
    )


def test_authority_add_and_import(tmp_path, capsys):
    db_path = tmp_path / "db.txt"
    element = _PEERS[0]
    assert authority_main(["add-diagnosis", element.hex(), "--db", str(db_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "w=1"
    # re-adding the same hash leaves the count unchanged
    assert authority_main(["add-diagnosis", element.hex(), "--db", str(db_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "w=1"

    merge_path = tmp_path / "incoming.txt"
    merge_path.write_text("".join(e.hex() + "\n" for e in _PEERS[:3]), encoding="utf-8")
    assert authority_main(["import-diagnoses", str(merge_path), "--db", str(db_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "w=3"
    assert sorted(authority.load_db(db_path).elements()) == sorted(_PEERS[:3])


def test_authority_add_rejects_bad_hash(tmp_path, capsys):
    db_path = tmp_path / "db.txt"
    assert authority_main(["add-diagnosis", "zz", "--db", str(db_path)]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err
    assert not db_path.exists()


def test_client_record_thresholds(tmp_path, capsys):
    ledger_path = tmp_path / "contacts.tsv"
    assert _record(ledger_path, _PEERS[0], _NOW - 5000) == EXIT_OK
    assert capsys.readouterr().out.strip() == "recorded"

    rc = client_main(
        [
            "--ledger",
            str(ledger_path),
            "record-contact",
            "--peer",
            _PEERS[1].hex(),
            "--start",
            str(_NOW - 4000),
            "--duration",
            "10",
        ]
    )
    assert rc == EXIT_OK
    assert "not recorded" in capsys.readouterr().out

    assert (
        client_main(
            [
                "--ledger",
                str(ledger_path),
                "record-contact",
                "--peer",
                "nothex",
                "--start",
                "1",
                "--duration",
                "600",
            ]
        )
        == EXIT_CONFIG
    )


def test_client_query_sign_apsi_feedback(tmp_path, capsys, server):
    ledger_path = tmp_path / "contacts.tsv"
    state_path = tmp_path / "warning.json"
    assert _record(ledger_path, _PEERS[0], _NOW - 5000) == EXIT_OK
    assert _record(ledger_path, _PEERS[1], _NOW - 3000) == EXIT_OK
    capsys.readouterr()

    rc = client_main(
        [
            "--ledger",
            str(ledger_path),
            "query",
            "--server",
            server,
            "--now",
            "--state",
            str(state_path),
        ]
    )
    assert rc == EXIT_OK
    assert "diagnosed contacts: 1; warning tier: low" in capsys.readouterr().out
    state = json.loads(state_path.read_text(encoding="utf-8"))
    assert state["cardinality"] == 1
    assert state["tier"] == "low"

    rc = client_main(["--ledger", str(ledger_path), "sign-contacts", "--ca", server])
    assert rc == EXIT_OK
    assert "signed 2 records" in capsys.readouterr().out

    rc = client_main(
        [
            "--ledger",
            str(ledger_path),
            "query",
            "--server",
            server,
            "--protocol",
            "apsi",
            "--now",
            "--state",
            str(state_path),
        ]
    )
    assert rc == EXIT_OK
    assert "diagnosed contacts: 1" in capsys.readouterr().out

    rc = client_main(
        [
            "--ledger",
            str(ledger_path),
            "feedback",
            "--server",
            server,
            "--consent",
            "--age-band",
            "30-39",
            "--region",
            "R5",
            "--state",
            str(state_path),
        ]
    )
    assert rc == EXIT_OK
    assert "sent" in capsys.readouterr().out


def test_client_feedback_requires_consent_and_state(tmp_path, capsys, server):
    rc = client_main(["--ledger", str(tmp_path / "l.tsv"), "feedback", "--server", server])
    assert rc == EXIT_OK
    assert "needs --consent" in capsys.readouterr().out

    rc = client_main(
        [
            "--ledger",
            str(tmp_path / "l.tsv"),
            "feedback",
            "--server",
            server,
            "--consent",
            "--state",
            str(tmp_path / "missing.json"),
        ]
    )
    assert rc == EXIT_CONFIG


def test_client_query_unreachable_server(tmp_path, capsys):
    ledger_path = tmp_path / "contacts.tsv"
    assert _record(ledger_path, _PEERS[0], _NOW - 5000) == EXIT_OK
    capsys.readouterr()
    rc = client_main(
        [
            "--ledger",
            str(ledger_path),
            "query",
            "--server",
            "http://127.0.0.1:9",
            "--now",
            "--state",
            str(tmp_path / "warning.json"),
        ]
    )
    assert rc == EXIT_NETWORK
    assert "error:" in capsys.readouterr().err


def test_client_query_empty_ledger_is_ok(tmp_path, capsys, server):
    rc = client_main(
        [
            "--ledger",
            str(tmp_path / "empty.tsv"),
            "query",
            "--server",
            server,
            "--now",
            "--state",
            str(tmp_path / "warning.json"),
        ]
    )
    assert rc == EXIT_OK
    assert "nothing to do" in capsys.readouterr().out


def test_sim_run_deterministic(tmp_path, capsys):
    config_path = tmp_path / "scenario.json"
    config_path.write_text(
        json.dumps(
            {
                "population": 12,
                "days": 2,
                "contacts_per_day": 1.5,
                "diagnosis_rate": 0.25,
                "seed": 3,
            }
        ),
        encoding="utf-8",
    )
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert sim_main(["run", "--config", str(config_path), "--out", str(out_a)]) == EXIT_OK
    assert sim_main(["run", "--config", str(config_path), "--out", str(out_b)]) == EXIT_OK
    capsys.readouterr()
    assert out_a.read_bytes() == out_b.read_bytes()
    header = out_a.read_text(encoding="utf-8").splitlines()[0]
    assert header == "uid,contacts,cardinality,tier"


def test_sim_rejects_bad_config(tmp_path, capsys):
    config_path = tmp_path / "scenario.json"
    config_path.write_text("{not json", encoding="utf-8")
    assert sim_main(["run", "--config", str(config_path)]) == EXIT_CONFIG
    config_path.write_text(json.dumps({"population": 5}), encoding="utf-8")
    assert sim_main(["run", "--config", str(config_path)]) == EXIT_CONFIG
    capsys.readouterr()


def test_bench_cli_writes_csv(tmp_path, capsys):
    out_path = tmp_path / "bench.csv"
    rc = bench_main(
        [
            "--protocol",
            "psica",
            "--v",
            "2",
            "--w",
            "3",
            "--trials",
            "1",
            "--out",
            str(out_path),
        ]
    )
    assert rc == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split(",")[0] == "protocol"
    assert len(lines) >= 5  # header plus one row per phase
    assert out_path.read_text(encoding="utf-8").count("\n") == 5

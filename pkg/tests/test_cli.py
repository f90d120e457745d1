import base64
import json

import pytest

from echofeed.cli import main
from echofeed.ledger import load_ledger, verify_chain
from echofeed.ratings import from_triplets, load_csv, write_csv


def run(capsys, *args):
    code = main([str(a) for a in args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def matrix_csv(tmp_path):
    rng_trips = [(u, e, 1.0 + ((u * 7 + e * 3) % 9) / 2) for u in range(10) for e in range(8)]
    matrix = from_triplets(rng_trips, 10, 8)
    path = tmp_path / "ratings.csv"
    write_csv(matrix, path)
    return path


@pytest.fixture
def consent_env(tmp_path, capsys):
    """Ledger + keystore with users 0..9, everyone consenting."""
    ledger = tmp_path / "chain.jsonl"
    keys = tmp_path / "keys.json"
    code, _, _ = run(
        capsys, "ledger", "init", "--out", ledger, "--keys", keys,
        "--users", 10, "--key-seed", 5, "--timestamp", 100,
    )
    assert code == 0
    for u in range(10):
        code, _, _ = run(
            capsys, "ledger", "consent", ledger, "--keys", keys,
            "--user", u, "--grant", "--timestamp", 101 + u,
        )
        assert code == 0
    return ledger, keys


# --- ingest ---


def test_ingest_valid(tmp_path, capsys, matrix_csv):
    out = tmp_path / "canonical.csv"
    code, stdout, _ = run(capsys, "ingest", matrix_csv, "--out", out)
    assert code == 0
    assert "80 observations" in stdout
    assert load_csv(out) == load_csv(matrix_csv)


def test_ingest_malformed_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,0,1.0\n0,1,oops\n")
    code, _, err = run(capsys, "ingest", bad, "--out", tmp_path / "x.csv")
    assert code == 1
    assert "line 2" in err


def test_ingest_empty_file(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = run(capsys, "ingest", empty, "--out", tmp_path / "x.csv")
    assert code == 1
    assert "error" in err


# --- train / eval / recommend ---


def test_train_writes_model_and_report(tmp_path, capsys, matrix_csv):
    model = tmp_path / "model.json"
    report = tmp_path / "report.json"
    code, stdout, _ = run(
        capsys, "train", matrix_csv, "--out", model, "--report", report,
        "--epochs", 30, "--holdout", 0.2, "--seed", 3,
    )
    assert code == 0
    assert "final_objective=" in stdout
    assert "rmse_holdout=" in stdout
    doc = json.loads(report.read_text())
    assert doc["epochs_run"] == 30
    assert len(doc["loss_history"]) == 30
    assert model.exists()


def test_train_deterministic_outputs(tmp_path, capsys, matrix_csv):
    outs = []
    for name in ("a", "b"):
        model = tmp_path / f"model_{name}.json"
        report = tmp_path / f"report_{name}.json"
        code, _, _ = run(
            capsys, "train", matrix_csv, "--out", model, "--report", report,
            "--epochs", 20, "--seed", 11,
        )
        assert code == 0
        outs.append((model.read_bytes(), report.read_bytes()))
    assert outs[0] == outs[1]


def test_train_with_ledger_credits_consenting_users(tmp_path, capsys, matrix_csv, consent_env):
    ledger, keys = consent_env
    # user 2 revokes before training
    run(capsys, "ledger", "consent", ledger, "--keys", keys,
        "--user", 2, "--revoke", "--timestamp", 200)
    code, _, _ = run(
        capsys, "train", matrix_csv, "--out", tmp_path / "m.json",
        "--ledger", ledger, "--keys", keys, "--reward", 3,
        "--epochs", 5, "--timestamp", 300,
    )
    assert code == 0
    assert verify_chain(load_ledger(ledger)).valid
    code, out, _ = run(capsys, "ledger", "balance", ledger, "--keys", keys, "--user", 0)
    assert code == 0 and out.strip() == "3"
    code, out, _ = run(capsys, "ledger", "balance", ledger, "--keys", keys, "--user", 2)
    assert code == 0 and out.strip() == "0"


def test_train_with_no_consenting_users_fails(tmp_path, capsys, matrix_csv):
    ledger = tmp_path / "chain.jsonl"
    keys = tmp_path / "keys.json"
    run(capsys, "ledger", "init", "--out", ledger, "--keys", keys,
        "--users", 10, "--timestamp", 100)
    code, _, err = run(
        capsys, "train", matrix_csv, "--out", tmp_path / "m.json",
        "--ledger", ledger, "--keys", keys,
    )
    assert code == 1
    assert "no observations" in err


def test_eval_prints_rmse(tmp_path, capsys, matrix_csv):
    model = tmp_path / "model.json"
    run(capsys, "train", matrix_csv, "--out", model, "--epochs", 30)
    code, stdout, _ = run(capsys, "eval", model, matrix_csv)
    assert code == 0
    assert stdout.startswith("rmse=")


def test_recommend_outputs_ranked_events(tmp_path, capsys, matrix_csv):
    model = tmp_path / "model.json"
    run(capsys, "train", matrix_csv, "--out", model, "--epochs", 30)
    out = tmp_path / "recs.json"
    code, stdout, _ = run(
        capsys, "recommend", model, matrix_csv, "--user", 0, "--top", 3, "--out", out
    )
    assert code == 0
    doc = json.loads(stdout)
    assert doc["user"] == 0
    assert len(doc["events"]) <= 3
    assert doc == json.loads(out.read_text())
    assert doc["scores"] == sorted(doc["scores"], reverse=True)


# --- simulate ---


def test_simulate_rounds_zero_single_row(tmp_path, capsys):
    out = tmp_path / "metrics.json"
    code, _, _ = run(
        capsys, "simulate", "--users", 12, "--events", 12, "--epochs", 20,
        "--rounds", 0, "--out", out, "--seed", 4,
    )
    assert code == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 1
    assert rows[0]["round"] == 0
    assert set(rows[0]) == {"round", "fragmentation_index", "n_observations", "rmse_holdout"}


def test_simulate_two_community_bubble(tmp_path, capsys):
    out = tmp_path / "metrics.json"
    code, _, _ = run(
        capsys, "simulate", "--users", 20, "--events", 20, "--rounds", 2,
        "--rec-k", 6, "--epochs", 60, "--seed", 2,
        "--in-rate", 0.6, "--cross-rate", 0.0, "--out", out,
    )
    assert code == 0
    rows = json.loads(out.read_text())
    assert rows[-1]["fragmentation_index"] >= 0.9
    assert rows[-1]["n_observations"] > rows[0]["n_observations"]


def test_simulate_deterministic_and_csv(tmp_path, capsys):
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / f"metrics_{name}.json"
        csv_out = tmp_path / f"metrics_{name}.csv"
        code, _, _ = run(
            capsys, "simulate", "--users", 12, "--events", 12, "--epochs", 20,
            "--rounds", 2, "--out", out, "--csv", csv_out, "--seed", 4,
        )
        assert code == 0
        blobs.append((out.read_bytes(), csv_out.read_bytes()))
    assert blobs[0] == blobs[1]
    header, *rows = (tmp_path / "metrics_a.csv").read_text().splitlines()
    assert header == "round,fragmentation_index,n_observations,rmse_holdout"
    assert len(rows) == 3


# --- ledger subcommands ---


def test_ledger_init_verify(tmp_path, capsys):
    ledger = tmp_path / "chain.jsonl"
    code, _, _ = run(capsys, "ledger", "init", "--out", ledger, "--timestamp", 7)
    assert code == 0
    code, stdout, _ = run(capsys, "ledger", "verify", ledger)
    assert code == 0
    assert stdout.strip() == "valid"


def test_ledger_append_and_tamper_detection(tmp_path, capsys, consent_env):
    ledger, keys = consent_env
    code, _, _ = run(
        capsys, "ledger", "append", ledger, "--keys", keys, "--user", 1,
        "--payload", "hello world", "--timestamp", 500,
    )
    assert code == 0
    lines = ledger.read_text().splitlines()
    doc = json.loads(lines[3])
    doc["payload_b64"] = base64.b64encode(b"evil").decode()
    lines[3] = json.dumps(doc, sort_keys=True)
    ledger.write_text("\n".join(lines) + "\n")
    code, stdout, _ = run(capsys, "ledger", "verify", ledger)
    assert code == 1
    assert "invalid at index 3" in stdout


def test_ledger_credit_append(tmp_path, capsys, consent_env):
    ledger, keys = consent_env
    code, _, _ = run(
        capsys, "ledger", "append", ledger, "--keys", keys, "--user", 4,
        "--type", "credit", "--amount", 9, "--timestamp", 600,
    )
    assert code == 0
    code, out, _ = run(capsys, "ledger", "balance", ledger, "--keys", keys, "--user", 4)
    assert out.strip() == "9"


def test_ledger_export_import_round_trip(tmp_path, capsys, consent_env):
    ledger, keys = consent_env
    run(capsys, "ledger", "append", ledger, "--keys", keys, "--user", 3,
        "--type", "credit", "--amount", 8, "--timestamp", 700)
    profile = tmp_path / "profile.json"
    code, _, _ = run(
        capsys, "ledger", "export", ledger, "--keys", keys, "--user", 3, "--out", profile
    )
    assert code == 0
    code, stdout, _ = run(capsys, "ledger", "import", profile)
    assert code == 0
    doc = json.loads(stdout)
    assert doc["consent"] is True
    assert doc["balance"] == 8


def test_ledger_import_rejects_tampered_profile(tmp_path, capsys, consent_env):
    ledger, keys = consent_env
    profile = tmp_path / "profile.json"
    run(capsys, "ledger", "export", ledger, "--keys", keys, "--user", 6, "--out", profile)
    doc = json.loads(profile.read_text())
    doc["blocks"][0]["timestamp"] += 1
    profile.write_text(json.dumps(doc))
    code, _, err = run(capsys, "ledger", "import", profile)
    assert code == 1
    assert "error" in err


def test_ledger_append_unknown_user(tmp_path, capsys, consent_env):
    ledger, keys = consent_env
    code, _, err = run(
        capsys, "ledger", "append", ledger, "--keys", keys, "--user", 42,
        "--payload", "x",
    )
    assert code == 1
    assert "keystore" in err


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_missing_file_is_domain_error(tmp_path, capsys):
    code, _, err = run(capsys, "eval", tmp_path / "nope.json", tmp_path / "nope.csv")
    assert code == 1
    assert "error" in err

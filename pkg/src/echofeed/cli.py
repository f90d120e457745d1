"""Command-line front end: ingest, train, eval, recommend, simulate, and
ledger operations, all emitting machine-readable output.

Every subcommand is deterministic given its flags and --seed; commands that
write ledger blocks take --timestamp to pin block times (wall clock is used
when the flag is absent). Exit codes: 0 success, 1 domain error, 2 usage
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import ledger as led
from .errors import EchoFeedError, UnregisteredUserError
from .model import init_model, load_model, save_model
from .ratings import load_csv, split_holdout, write_csv
from .simulate import (
    engagement_round,
    fragmentation_index,
    synth_community_matrix,
    top_k,
)
from .training import TrainConfig, rmse, train

METRIC_COLUMNS = ["round", "fragmentation_index", "n_observations", "rmse_holdout"]


def _now_or(timestamp: int | None) -> int:
    return int(time.time()) if timestamp is None else timestamp


def _derive_seed(key_seed: int, index: int) -> bytes:
    return hashlib.sha256(f"{key_seed}:{index}".encode("ascii")).digest()


def _write_keystore(path: Path, keypairs: dict[int, led.Keypair]) -> None:
    doc = {str(idx): kp.seed.hex() for idx, kp in sorted(keypairs.items())}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_keystore(path: Path) -> dict[int, led.Keypair]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {int(idx): led.Keypair(bytes.fromhex(seed)) for idx, seed in doc.items()}


def _keystore_entry(keystore: dict[int, led.Keypair], user: int) -> led.Keypair:
    if user not in keystore:
        raise UnregisteredUserError(f"user {user} not present in the keystore")
    return keystore[user]


def _resolve_author(args, parser) -> bytes:
    if args.author:
        return bytes.fromhex(args.author)
    if args.user is None or args.keys is None:
        parser.error("provide either --author or both --user and --keys")
    keystore = _load_keystore(Path(args.keys))
    if args.user not in keystore:
        parser.error(f"user {args.user} not present in keystore {args.keys}")
    return keystore[args.user].public_key


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        shuffle=not args.no_shuffle,
        tolerance=args.tolerance,
    )


def cmd_ingest(args) -> int:
    matrix = load_csv(args.csv)
    write_csv(matrix, args.out)
    print(f"wrote {len(matrix)} observations ({matrix.n_users}x{matrix.n_events}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    matrix = load_csv(args.matrix)
    ledger_obj = None
    keystore = None
    if args.ledger:
        ledger_obj = led.load_ledger(args.ledger)
        keystore = _load_keystore(Path(args.keys))
        registry = {idx: kp.public_key for idx, kp in keystore.items()}
        matrix = led.consented_ratings(ledger_obj, matrix, registry)
    train_m, test_m = split_holdout(matrix, args.holdout, args.seed)
    model = init_model(
        matrix.n_users, matrix.n_events, args.k, args.gamma, args.seed, args.scale
    )
    trained, report = train(model, train_m, _train_config(args))
    save_model(trained, args.out)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict()) + "\n", encoding="utf-8"
        )
    if ledger_obj is not None:
        ts = _now_or(args.timestamp)
        for idx in sorted(keystore):
            if led.consent_state(ledger_obj, keystore[idx].public_key):
                led.credit_tokens(ledger_obj, keystore[idx], args.reward, ts)
        led.save_ledger(ledger_obj, args.ledger)
    print(f"final_objective={report.loss_history[-1]!r}")
    if len(test_m):
        print(f"rmse_holdout={rmse(trained, test_m)!r}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    matrix = load_csv(args.matrix)
    print(f"rmse={rmse(model, matrix)!r}")
    return 0


def cmd_recommend(args) -> int:
    model = load_model(args.model)
    matrix = load_csv(args.matrix)
    recs = top_k(model, matrix, args.user, args.top, exclude_observed=not args.include_observed)
    doc = {"user": recs.user, "events": list(recs.events), "scores": list(recs.scores)}
    text = json.dumps(doc)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_simulate(args) -> int:
    matrix, labels = synth_community_matrix(
        args.users, args.events, args.communities, args.in_rate, args.cross_rate, args.seed
    )
    train_m, test_m = split_holdout(matrix, args.holdout, args.seed)
    config = _train_config(args)
    rows = []
    model = None
    for rnd in range(args.rounds + 1):
        if rnd > 0:
            train_m = engagement_round(train_m, model, args.accept_top, args.accept_value)
        fresh = init_model(
            args.users, args.events, args.k, args.gamma, args.seed, args.scale
        )
        model, _ = train(fresh, train_m, config)
        recs = [
            top_k(model, train_m, u, args.rec_k, exclude_observed=False)
            for u in range(args.users)
        ]
        rows.append(
            {
                "round": rnd,
                "fragmentation_index": fragmentation_index(recs, labels),
                "n_observations": len(train_m),
                "rmse_holdout": rmse(model, test_m) if len(test_m) else None,
            }
        )
    Path(args.out).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    if args.csv:
        lines = [",".join(METRIC_COLUMNS)]
        for row in rows:
            lines.append(
                ",".join("" if row[c] is None else repr(row[c]) for c in METRIC_COLUMNS)
            )
        Path(args.csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(rows)} rounds to {args.out}")
    return 0


def cmd_ledger(args, parser) -> int:
    action = args.action
    if action == "init":
        chain = led.new_ledger(_now_or(args.timestamp))
        led.save_ledger(chain, args.out)
        if args.users:
            keypairs = {
                i: led.Keypair(_derive_seed(args.key_seed, i)) for i in range(args.users)
            }
            _write_keystore(Path(args.keys), keypairs)
        print(f"initialized ledger at {args.out}")
        return 0

    if action == "import":
        account = led.import_profile(led.load_profile(args.profile))
        print(
            json.dumps(
                {
                    "public_key": account.public_key.hex(),
                    "consent": account.consent,
                    "balance": account.token_balance,
                }
            )
        )
        return 0

    chain = led.load_ledger(args.ledger)
    if action == "verify":
        report = led.verify_chain(chain)
        print(report)
        return 0 if report.valid else 1
    if action == "append":
        keystore = _load_keystore(Path(args.keys))
        kp = _keystore_entry(keystore, args.user)
        ts = _now_or(args.timestamp)
        if args.type == "credit":
            block = led.credit_tokens(chain, kp, args.amount, ts)
        else:
            block = led.append_event(
                chain, kp, led.PayloadType.POST, args.payload.encode("utf-8"), ts
            )
        led.save_ledger(chain, args.ledger)
        print(f"appended block {block.index}")
        return 0
    if action == "consent":
        keystore = _load_keystore(Path(args.keys))
        kp = _keystore_entry(keystore, args.user)
        block = led.set_consent(chain, kp, args.grant, _now_or(args.timestamp))
        led.save_ledger(chain, args.ledger)
        print(f"appended block {block.index}")
        return 0
    if action == "balance":
        author = _resolve_author(args, parser)
        print(led.balance(chain, author))
        return 0
    if action == "export":
        author = _resolve_author(args, parser)
        profile = led.export_profile(chain, author)
        led.save_profile(profile, args.out)
        print(f"exported {len(profile.blocks)} blocks to {args.out}")
        return 0
    raise AssertionError(f"unhandled ledger action {action}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echofeed",
        description="Latent-factor engagement recommender with a consent ledger",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train_flags = argparse.ArgumentParser(add_help=False)
    train_flags.add_argument("--k", type=int, default=2, help="latent dimension")
    train_flags.add_argument("--gamma", type=float, default=0.0, help="regularization weight")
    train_flags.add_argument("--lr", type=float, default=0.01, help="SGD learning rate")
    train_flags.add_argument("--epochs", type=int, default=100)
    train_flags.add_argument("--seed", type=int, default=0)
    train_flags.add_argument("--scale", type=float, default=0.1, help="init scale")
    train_flags.add_argument("--tolerance", type=float, default=0.0, help="early-stop tolerance")
    train_flags.add_argument("--no-shuffle", action="store_true")

    p = sub.add_parser("ingest", help="validate a ratings CSV and write it back canonically")
    p.add_argument("csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[train_flags], help="train a factor model by SGD")
    p.add_argument("matrix")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report", help="training report JSON path")
    p.add_argument("--holdout", type=float, default=0.0)
    p.add_argument("--ledger", help="consent ledger; train only on consenting users")
    p.add_argument("--keys", help="keystore JSON mapping user index to signing seed")
    p.add_argument("--reward", type=int, default=1, help="tokens credited per consenting user")
    p.add_argument("--timestamp", type=int, default=None)

    p = sub.add_parser("eval", help="holdout RMSE of a model on a matrix")
    p.add_argument("model")
    p.add_argument("matrix")

    p = sub.add_parser("recommend", help="top-K events for one user")
    p.add_argument("model")
    p.add_argument("matrix")
    p.add_argument("--user", type=int, required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--include-observed", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser(
        "simulate", parents=[train_flags], help="train/engage loop on planted communities"
    )
    p.add_argument("--users", type=int, default=40)
    p.add_argument("--events", type=int, default=40)
    p.add_argument("--communities", type=int, default=2)
    p.add_argument("--in-rate", type=float, default=0.5)
    p.add_argument("--cross-rate", type=float, default=0.0)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--accept-top", type=int, default=2)
    p.add_argument("--accept-value", type=float, default=4.0)
    p.add_argument("--rec-k", type=int, default=10, help="recommendations scored per user")
    p.add_argument("--holdout", type=float, default=0.1)
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.add_argument("--csv", help="also write metrics as CSV")
    p.add_argument("--timestamp", type=int, default=None,
                   help="accepted for uniform scripting; simulate output contains no timestamps")

    pl = sub.add_parser("ledger", help="consent ledger operations")
    actions = pl.add_subparsers(dest="action", required=True)

    a = actions.add_parser("init")
    a.add_argument("--out", required=True)
    a.add_argument("--keys", default="keys.json")
    a.add_argument("--users", type=int, default=0, help="generate this many keypairs")
    a.add_argument("--key-seed", type=int, default=0)
    a.add_argument("--timestamp", type=int, default=None)

    a = actions.add_parser("append")
    a.add_argument("ledger")
    a.add_argument("--keys", required=True)
    a.add_argument("--user", type=int, required=True)
    a.add_argument("--type", choices=["post", "credit"], default="post")
    a.add_argument("--payload", default="")
    a.add_argument("--amount", type=int, default=0)
    a.add_argument("--timestamp", type=int, default=None)

    a = actions.add_parser("consent")
    a.add_argument("ledger")
    a.add_argument("--keys", required=True)
    a.add_argument("--user", type=int, required=True)
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--grant", dest="grant", action="store_true")
    g.add_argument("--revoke", dest="grant", action="store_false")
    a.add_argument("--timestamp", type=int, default=None)

    a = actions.add_parser("verify")
    a.add_argument("ledger")

    for name in ("balance", "export"):
        a = actions.add_parser(name)
        a.add_argument("ledger")
        a.add_argument("--author", help="public key hex")
        a.add_argument("--user", type=int)
        a.add_argument("--keys")
        if name == "export":
            a.add_argument("--out", required=True)

    a = actions.add_parser("import")
    a.add_argument("profile")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train" and args.ledger and not args.keys:
        parser.error("--ledger requires --keys for the user registry")
    handlers = {
        "ingest": cmd_ingest,
        "train": cmd_train,
        "eval": cmd_eval,
        "recommend": cmd_recommend,
        "simulate": cmd_simulate,
    }
    try:
        if args.command == "ledger":
            return cmd_ledger(args, parser)
        return handlers[args.command](args)
    except (EchoFeedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

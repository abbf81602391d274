"""Operator entry points: `doorsim <command> [flags]`.

Flags are long-form only; anything structured lives in a JSON file passed
via --config. Exit codes: 0 success, 1 validation/usage error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import urllib.error
import urllib.request
from pathlib import Path

from . import __version__
from .cloud import CloudService
from .cloud.httpd import CloudHTTPServer
from .dataset import GeneratorConfig, generate_dataset, load_manifest, save_manifest
from .errors import DoorsimError, ValidationError
from .harness import ExperimentConfig, compare_backends, run_experiment
from .model import canonical_json

log = logging.getLogger("doorsim")

DEFAULT_SERVER = "http://127.0.0.1:8750"


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file for the command")
    parser.add_argument("--out", help="output file path")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")


def _load_config(path: str | None) -> dict:
    if not path:
        raise ValidationError("--config is required for this command")
    config_path = Path(path)
    if not config_path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(config_path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _post(server: str, path: str, body: dict) -> dict:
    request = urllib.request.Request(
        server.rstrip("/") + path,
        data=json.dumps(body).encode("utf-8"),
        headers={"content-type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(request) as response:
        payload = json.loads(response.read())
    if not payload.get("ok"):
        raise DoorsimError(payload.get("error", {}).get("message", "request failed"))
    return payload["data"]


def cmd_gen_dataset(args: argparse.Namespace) -> int:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    config = GeneratorConfig.from_dict(raw)
    log.info("generating %d positives for %d scenario(s), seed %d",
             config.positives, len(config.scenarios), config.seed)
    frames = generate_dataset(config)
    out = args.out or "dataset.ndjson"
    save_manifest(frames, out)
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
        raw.setdefault("network", {})["seed"] = args.seed
    return ExperimentConfig.from_dict(raw)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    report = run_experiment(config)
    summary = {
        "backend_id": report.backend_id,
        "counters": report.counters,
        "latency": report.latency.to_dict(),
    }
    print(canonical_json(summary))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(summary))
            fh.write("\n")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    out = args.out or "report.json"
    report = run_experiment(config, partial_trace_path=f"{out}.partial")
    report.write_json(out)
    if args.csv:
        report.write_csv(args.csv)
    overall = report.overall
    print(
        f"{report.backend_id}: accuracy={overall.accuracy:.3f} "
        f"f1={'n/a' if overall.f1 is None else f'{overall.f1:.3f}'} "
        f"mean_latency={report.latency.mean_ms:.1f} ms -> {out}"
    )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    backend_ids = raw.pop("backend_ids", None)
    if not backend_ids or len(backend_ids) < 2:
        raise ValidationError("compare config needs backend_ids with >= 2 entries")
    dataset = load_manifest(raw.get("dataset")) if raw.get("dataset") else None
    if dataset is None:
        raise ValidationError("compare config needs a dataset path")
    reports = []
    for backend_id in backend_ids:
        log.info("evaluating %s", backend_id)
        config = ExperimentConfig.from_dict({**raw, "backend_id": backend_id})
        reports.append(run_experiment(config, dataset=dataset))
    table = compare_backends(reports)
    out = args.out or "comparison.csv"
    if out.endswith(".json"):
        table.write_json(out)
    else:
        table.write_csv(out)
    for row in table.rows:
        f1 = "n/a" if row["f1"] == "" else f"{row['f1']:.4f}"
        print(
            f"{row['backend']}: f1={f1} mean_latency={row['mean_latency_ms']:.1f} ms "
            f"memory={row['memory_mb']} MB cpu={row['cpu_pct']}%"
        )
    print(f"wrote {out}")
    return 0


def cmd_serve_cloud(args: argparse.Namespace) -> int:
    raw = _load_config(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    host = raw.get("host", "127.0.0.1")
    port = int(raw.get("port", 8750))
    service = CloudService(seed=seed)
    server = CloudHTTPServer((host, port), service)
    print(f"serving mock cloud on http://{host}:{port} (seed {seed})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.server_close()
    return 0


def cmd_enroll(args: argparse.Namespace) -> int:
    raw = _load_config(args.config)
    server = args.server or raw.get("server", DEFAULT_SERVER)
    collection_id = raw.get("collection_id", "default")
    faces = raw.get("faces", {})
    if not faces:
        raise ValidationError("enroll config has no faces")
    for identity, category in sorted(faces.items()):
        data = _post(server, "/faces/enroll", {
            "collection_id": collection_id,
            "identity": identity,
            "category": category,
        })
        print(f"enrolled {identity} as {category} ({data['enrolled']} total)")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    server = args.server or DEFAULT_SERVER
    body = {"kind": args.kind, "device_id": args.device}
    if args.from_ms is not None or args.to_ms is not None:
        body["from"] = args.from_ms or 0
        body["to"] = args.to_ms or 0
    data = _post(server, "/query", body)
    print(data["summary"])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(data))
            fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doorsim",
        description="Deterministic device/edge/cloud simulator for doorbell video analytics",
    )
    parser.add_argument("--version", action="version", version=f"doorsim {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("gen-dataset", help="write a synthetic labeled manifest")
    _common_flags(sub)
    sub.set_defaults(func=cmd_gen_dataset)

    sub = commands.add_parser("simulate", help="run the pipeline once, print counters")
    _common_flags(sub)
    sub.set_defaults(func=cmd_simulate)

    sub = commands.add_parser("evaluate", help="run an experiment and write the report")
    _common_flags(sub)
    sub.add_argument("--csv", help="also write the per-scenario CSV table")
    sub.set_defaults(func=cmd_evaluate)

    sub = commands.add_parser("compare", help="evaluate several backends side by side")
    _common_flags(sub)
    sub.set_defaults(func=cmd_compare)

    sub = commands.add_parser("serve-cloud", help="serve the mock cloud over HTTP")
    _common_flags(sub)
    sub.set_defaults(func=cmd_serve_cloud)

    sub = commands.add_parser("enroll", help="enroll faces against a running cloud")
    _common_flags(sub)
    sub.add_argument("--server", help=f"cloud base URL (default {DEFAULT_SERVER})")
    sub.set_defaults(func=cmd_enroll)

    sub = commands.add_parser("query", help="ask the cloud about activity")
    _common_flags(sub)
    sub.add_argument("--server", help=f"cloud base URL (default {DEFAULT_SERVER})")
    sub.add_argument("--kind", required=True,
                     choices=["latest-activity", "daily-snapshot", "range-query"])
    sub.add_argument("--device", required=True)
    sub.add_argument("--from", dest="from_ms", type=int)
    sub.add_argument("--to", dest="to_ms", type=int)
    sub.set_defaults(func=cmd_query)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DoorsimError, urllib.error.URLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

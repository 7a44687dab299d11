"""Command-line surface of the audit engine.

Exit codes are a stable contract for scripting: 0 means fair (or plain
success), 1 means a bias verdict, 2 means a usage or data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, EvalConfig, load_config
from .decision import METRIC_KL, METRIC_TVD, render_report
from .manifest import RunManifest, build_manifest, canonical_json, sha256_hex
from .metrics import agreement
from .pipeline import (
    build_score_document,
    decide_from_document,
    render_score_document,
)
from .plan import build_plan, plan_summary, write_plan
from .records import (
    HUMAN_LAYER,
    MODEL_LAYER,
    RecordError,
    corrections_to_ndjson,
    distribution_of,
    merge_layers,
    parse_corrections,
    parse_records,
    write_records,
)

EXIT_OK = 0
EXIT_BIAS = 1
EXIT_ERROR = 2


class CliError(Exception):
    """Fatal usage/data error; message printed to stderr, exit code 2."""


def _load_config(path: str, seed: int | None) -> EvalConfig:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        lines = "\n".join(f"  - {v}" for v in exc.violations)
        raise CliError(f"invalid config {path}:\n{lines}") from exc
    return cfg.with_seed(seed) if seed is not None else cfg


def _read_records(path: str):
    errors: list[str] = []
    try:
        records = parse_records(path, error_sink=errors)
    except OSError as exc:
        raise CliError(f"cannot read records {path}: {exc}") from exc
    for msg in errors:
        print(f"warning: rejected record at {msg}", file=sys.stderr)
    if not records:
        raise CliError(f"no usable records in {path}")
    return records


def _read_corrections(path: str):
    errors: list[str] = []
    try:
        events = parse_corrections(path, error_sink=errors)
    except OSError as exc:
        raise CliError(f"cannot read corrections {path}: {exc}") from exc
    for msg in errors:
        print(f"warning: rejected correction at {msg}", file=sys.stderr)
    return events


def _read_confidences(path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    image_id = d["image_id"]
                    c = float(d["confidence"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CliError(f"{path}:{lineno}: bad confidence record: {exc}") from exc
                if not (0.0 <= c <= 1.0):
                    raise CliError(f"{path}:{lineno}: confidence {c} outside [0, 1]")
                out[image_id] = c
    except OSError as exc:
        raise CliError(f"cannot read confidences {path}: {exc}") from exc
    return out


def _read_series(path: str) -> list[float]:
    vals: list[float] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                try:
                    vals.append(float(text))
                except ValueError as exc:
                    raise CliError(f"{path}:{lineno}: not a number: {text!r}") from exc
    except OSError as exc:
        raise CliError(f"cannot read series {path}: {exc}") from exc
    return vals


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _score_inputs(args) -> tuple[EvalConfig, list, list, RunManifest]:
    cfg = _load_config(args.config, args.seed)
    records = _read_records(args.records)
    corrections = _read_corrections(args.corrections) if args.corrections else []
    if args.confidences:
        from .pipeline import apply_confidences

        records = apply_confidences(records, _read_confidences(args.confidences))
    inputs: dict[str, str] = {"records": args.records}
    hashes: dict[str, str] = {}
    if args.corrections:
        inputs["corrections"] = args.corrections
        hashes["corrections"] = sha256_hex(corrections_to_ndjson(corrections))
    if args.confidences:
        inputs["confidences"] = args.confidences
    manifest = build_manifest(cfg, inputs, hashes)
    return cfg, records, corrections, manifest


def _warn_empty_cells(cfg: EvalConfig, score_doc: dict) -> None:
    for layer, doc in score_doc["layers"].items():
        covered = {
            (v, q) for v, per_q in doc["score_table"]["cells"].items() for q in per_q
        }
        missing = [
            f"{v}/{q}" for v in cfg.attribute.values for q in cfg.queries if (v, q) not in covered
        ]
        if missing:
            shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
            print(
                f"warning: layer {layer}: {len(missing)} empty (value, query) cells: {shown}",
                file=sys.stderr,
            )


def cmd_plan(args) -> int:
    cfg = _load_config(args.config, args.seed)
    jobs = build_plan(cfg)
    s = plan_summary(jobs)
    print(
        f"plan: {s['images']} images across {s['jobs']} jobs "
        f"(diversity: {s['diversity_images']} images / {s['diversity_jobs']} jobs; "
        f"conditioned: {s['conditioned_images']} images / {s['conditioned_jobs']} jobs)"
    )
    if args.dry_run:
        return EXIT_OK
    if not args.out:
        raise CliError("plan: --out is required unless --dry-run")
    write_plan(jobs, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _load_config(args.config, args.seed)
    records = _read_records(args.records)
    if args.corrections:
        sink: list[str] = []
        records = merge_layers(records, _read_corrections(args.corrections), error_sink=sink)
        for msg in sink:
            print(f"warning: {msg}", file=sys.stderr)
    n_cond = sum(1 for r in records if r.conditioned_value is not None)
    print(f"records: {len(records)} ({len(records) - n_cond} unconditioned, {n_cond} conditioned)")
    try:
        dist = distribution_of(records, cfg.attribute)
        for label, p in zip(dist.labels, dist.probs):
            print(f"  {label}: {p:.4f}")
    except ValueError as exc:
        print(f"  distribution unavailable: {exc}")
    if args.out:
        write_records(records, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    cfg, records, corrections, manifest = _score_inputs(args)
    layers = (
        (MODEL_LAYER, HUMAN_LAYER)
        if args.layer == "both"
        else (args.layer,)
    )
    doc = build_score_document(cfg, records, corrections, manifest, layers=layers)
    if not doc["layers"]:
        raise CliError(f"layer {args.layer!r} unavailable (human layer needs --corrections)")
    _warn_empty_cells(cfg, doc)
    out = Path(args.out)
    _write(out, render_score_document(doc))
    _write(out.with_suffix(out.suffix + ".manifest.json"), canonical_json(manifest.full()))
    for layer, layer_doc in doc["layers"].items():
        n = len(
            [q for per_q in layer_doc["score_table"]["cells"].values() for q in per_q]
        )
        print(f"layer {layer}: {n} scored cells over {layer_doc['n_records']} records")
    print(f"wrote {out}")
    return EXIT_OK


def _load_score_doc(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read score document {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"corrupted score document {path}: {exc}") from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise CliError(f"corrupted score document {path}: missing layers")
    return doc


def _decide_and_write(doc: dict, cfg: EvalConfig, args, out_prefix: Path) -> int:
    from .pipeline import pick_layer

    requested = args.layer if args.layer != "both" else "auto"
    try:
        default_layer = pick_layer(doc, "auto" if args.layer == "both" else requested)
        layers = list(doc["layers"]) if args.layer == "both" else [default_layer]
        exit_code = EXIT_OK
        for layer in layers:
            report = decide_from_document(
                doc, cfg, layer=layer, metric=args.metric, complement_kl=args.eq6_literal
            )
            suffix = f".{layer}" if args.layer == "both" else ""
            _write(Path(f"{out_prefix}{suffix}.json"), render_report(report, "structured"))
            _write(Path(f"{out_prefix}{suffix}.txt"), render_report(report, "text"))
            print(f"[{layer}] verdict: {report.verdict}")
            for r in report.reasons:
                print(f"  {r}")
            if layer == default_layer:
                exit_code = EXIT_OK if report.passed else EXIT_BIAS
        return exit_code
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def cmd_decide(args) -> int:
    cfg = _load_config(args.config, args.seed)
    doc = _load_score_doc(args.scores)
    return _decide_and_write(doc, cfg, args, Path(args.out))


def cmd_audit(args) -> int:
    cfg, records, corrections, manifest = _score_inputs(args)
    doc = build_score_document(cfg, records, corrections, manifest)
    _warn_empty_cells(cfg, doc)
    out_prefix = Path(args.out)
    _write(Path(f"{out_prefix}.scores.json"), render_score_document(doc))
    _write(Path(f"{out_prefix}.manifest.json"), canonical_json(manifest.full()))
    return _decide_and_write(doc, cfg, args, out_prefix)


def cmd_agree(args) -> int:
    a = _read_series(args.series_a)
    b = _read_series(args.series_b)
    if len(a) != len(b):
        raise CliError(f"series length mismatch: {len(a)} vs {len(b)}")
    try:
        result = agreement(a, b)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(f"pearson={result.pearson:.6f} spearman={result.spearman:.6f} n={result.n}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _load_config(args.config, args.seed)
    records = _read_records(args.records)
    log_path = args.log or os.environ.get("TTIFAIR_LOG_PATH") or "ttifair-events.ndjson"
    image_root = args.images_root or os.environ.get("TTIFAIR_IMAGE_ROOT")
    token = args.token or os.environ.get("TTIFAIR_TOKEN")
    bind = args.bind or os.environ.get("TTIFAIR_BIND_ADDR") or "127.0.0.1:8021"
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise CliError(f"invalid bind address {bind!r} (expected host:port)")
    app = create_app(
        cfg,
        records,
        records_path=args.records,
        log_path=log_path,
        image_root=image_root,
        token=token,
    )
    print(f"serving on http://{bind} (log: {log_path})")
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttifair",
        description="Representativity fairness audit engine for text-to-image systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, records=False, out=False, scoring=False):
        p.add_argument("--config", required=True, help="audit definition file (YAML/JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config master seed")
        if records:
            p.add_argument("--records", required=True, help="line-delimited annotation records")
            p.add_argument("--corrections", help="append-only correction log")
        if scoring:
            p.add_argument("--confidences", help="relevance confidences (image_id, confidence)")
            p.add_argument(
                "--layer",
                choices=[MODEL_LAYER, HUMAN_LAYER, "both"],
                default="both",
                help="annotation layer(s) to process",
            )
        if out:
            p.add_argument("--out", required=True, help="output path / prefix")

    p = sub.add_parser("plan", help="emit the generation job matrix")
    common(p)
    p.add_argument("--out", help="plan file path")
    p.add_argument("--dry-run", action="store_true", help="print counts, write nothing")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("ingest", help="validate records, apply corrections, show distribution")
    common(p, records=True)
    p.add_argument("--out", help="write effective records here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("score", help="compute diversity and the score table")
    common(p, records=True, out=True, scoring=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("decide", help="run the verdict gates over a score document")
    common(p, out=True)
    p.add_argument("--scores", required=True, help="score document from `score`")
    p.add_argument("--metric", choices=[METRIC_KL, METRIC_TVD], default=METRIC_KL)
    p.add_argument(
        "--eq6-literal",
        action="store_true",
        help="gate on 1-exp(-KL) instead of exp(-KL) for the KL diversity score",
    )
    p.add_argument(
        "--layer",
        choices=[MODEL_LAYER, HUMAN_LAYER, "both", "auto"],
        default="auto",
        help="layer whose scores drive the verdict (auto: human when present)",
    )
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("audit", help="score + decide in one run")
    common(p, records=True, out=True, scoring=True)
    p.add_argument("--metric", choices=[METRIC_KL, METRIC_TVD], default=METRIC_KL)
    p.add_argument(
        "--eq6-literal",
        action="store_true",
        help="gate on 1-exp(-KL) instead of exp(-KL) for the KL diversity score",
    )
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("agree", help="Pearson/Spearman agreement of two numeric series")
    p.add_argument("series_a")
    p.add_argument("series_b")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("serve", help="run the annotation review / survey service")
    common(p, records=True)
    p.add_argument("--log", help="event log path (env: TTIFAIR_LOG_PATH)")
    p.add_argument("--images-root", help="directory of image files (env: TTIFAIR_IMAGE_ROOT)")
    p.add_argument("--bind", help="host:port (env: TTIFAIR_BIND_ADDR)")
    p.add_argument("--token", help="static bearer token (env: TTIFAIR_TOKEN)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RecordError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

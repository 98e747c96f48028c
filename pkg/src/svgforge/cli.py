"""Command-line interface.

Subcommands: normalize, render, loop, build-pref, stats, export-renders.
Logs are JSON lines on stderr; artifacts go where the flags say.  Exit
codes: 0 success (rejected samples are an outcome, not a failure), 1
when some inputs failed to process, 2 for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import metrics, prefdata
from .backend import HttpBackend, MockBackend
from .config import AppConfig, ConfigError, load_config
from .loop import LoopConfig, run_loop
from .normalize import (
    NormalizeConfig,
    Normalized,
    RejectError,
    canonical_document,
    normalize_pipeline,
)
from .parse import ParseError
from .raster.image import encode_png, encode_ppm, rasterize

logger = logging.getLogger("svgforge")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _configure_logging()
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return 2
    except OSError as exc:
        logger.error("i/o error: %s", exc)
        return 2


def _configure_logging():
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLineFormatter())
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(logging.INFO)


class _JsonLineFormatter(logging.Formatter):
    def format(self, record):
        entry = {
            "ts": round(record.created, 3),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
        }
        return json.dumps(entry, ensure_ascii=False)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svgforge",
        description="Canonicalize, render, critique-loop, and dataset-build for SVG icons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize a directory of SVG files")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--report", default=None, help="JSONL report path (default <out>/report.jsonl)")
    p.add_argument("--token-limit", type=int, default=None)
    p.add_argument("--token-divisor", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("render", help="render one SVG file to PNG or PPM")
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--out", dest="out_file", required=True)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--no-supersample", action="store_true")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("loop", help="run the generate/critique/refine loop")
    p.add_argument("--prompts", dest="prompts_file", default=None)
    p.add_argument("--prompt", default=None)
    p.add_argument("--backend", required=True, help='"mock:script.json" or "http"')
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_loop)

    p = sub.add_parser("build-pref", help="sample candidates and build preference pairs")
    p.add_argument("--prompts", dest="prompts_file", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--n", type=int, default=None, help="candidates per prompt")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--mode", choices=prefdata.PAIR_MODES, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_build_pref)

    p = sub.add_parser("stats", help="corpus statistics and render success rate")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--table", action="store_true", help="also print a text table")
    p.add_argument("--token-divisor", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("export-renders", help="render every normalizable file in a directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--size", type=int, default=224)
    p.set_defaults(func=_cmd_export_renders)

    return parser


# ---------------------------------------------------------------------------
# helpers


def _svg_files(directory: str) -> list[str]:
    try:
        names = sorted(os.listdir(directory))
    except OSError as exc:
        raise ConfigError(f"cannot list {directory}: {exc}") from exc
    return [os.path.join(directory, n) for n in names if n.lower().endswith(".svg")]


def _normalize_config(app: AppConfig, args) -> NormalizeConfig:
    cfg = app.normalize
    limit = args.token_limit if getattr(args, "token_limit", None) is not None else cfg.token_limit
    divisor = (args.token_divisor if getattr(args, "token_divisor", None) is not None
               else cfg.token_divisor)
    return NormalizeConfig(
        token_limit=limit,
        token_divisor=divisor,
        tokenizer_cmd=cfg.tokenizer_cmd,
        render_check_size=cfg.render_check_size,
    )


def _loop_config(app: AppConfig, args) -> LoopConfig:
    cfg = app.loop
    replacements = {}
    if getattr(args, "n_max", None) is not None:
        replacements["n_max"] = args.n_max
    if getattr(args, "tau", None) is not None:
        replacements["tau"] = args.tau
    if not replacements:
        return cfg
    import dataclasses

    return dataclasses.replace(cfg, **replacements)


def _make_backend(spec: str, app: AppConfig):
    """Build a backend from its CLI spec.

    Returns (backend, clock): mock backends pair with a deterministic
    counting clock so transcripts are byte-reproducible.
    """
    if spec.startswith("mock:"):
        path = spec[len("mock:"):]
        try:
            backend = MockBackend.from_file(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load mock script {path}: {exc}") from exc
        return backend, _counting_clock()
    if spec == "http":
        if not app.backend.endpoint:
            raise ConfigError("http backend requires [backend] endpoint in the config file")
        return HttpBackend(app.backend), time.time
    raise ConfigError(f"unknown backend spec {spec!r} (use mock:<script.json> or http)")


def _counting_clock(start: float = 0.0, step: float = 1.0):
    counter = itertools.count()
    return lambda: start + step * next(counter)


def _read_prompts(args) -> list[str]:
    if getattr(args, "prompt", None):
        return [args.prompt]
    path = getattr(args, "prompts_file", None)
    if not path:
        raise ConfigError("provide --prompt or --prompts")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            prompts = [line.strip() for line in fh]
    except OSError as exc:
        raise ConfigError(f"cannot read prompts {path}: {exc}") from exc
    prompts = [p for p in prompts if p]
    if not prompts:
        raise ConfigError(f"no prompts in {path}")
    return prompts


# ---------------------------------------------------------------------------
# subcommands


def _cmd_normalize(args) -> int:
    app = load_config(args.config)
    cfg = _normalize_config(app, args)
    files = _svg_files(args.in_dir)
    os.makedirs(args.out_dir, exist_ok=True)
    report_path = args.report or os.path.join(args.out_dir, "report.jsonl")

    def process(path: str):
        name = os.path.basename(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
            return name, normalize_pipeline(text, cfg), None
        except Exception as exc:  # report, keep going
            return name, None, f"{type(exc).__name__}: {exc}"

    workers = args.workers or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(process, files))
    else:
        outcomes = [process(path) for path in files]

    failures = 0
    kept = 0
    lines = []
    for name, result, error in outcomes:
        entry = {
            "file": name,
            "status": "",
            "reason": "",
            "commands": None,
            "colors": None,
            "token_estimate": None,
        }
        if error is not None:
            failures += 1
            entry["status"] = "error"
            entry["reason"] = error
            logger.warning("failed to process %s: %s", name, error)
        elif isinstance(result, Normalized):
            kept += 1
            entry["status"] = "kept"
            entry["commands"] = result.stats.commands
            entry["colors"] = result.stats.colors
            entry["token_estimate"] = result.stats.token_estimate
            out_path = os.path.join(args.out_dir, name)
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(result.text)
        else:
            entry["status"] = "rejected"
            reason = result.reason
            entry["reason"] = (
                f"{reason.kind}: {reason.detail}" if reason.detail else reason.kind
            )
        lines.append(json.dumps(entry, ensure_ascii=False))

    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    logger.info(
        "normalized %d files: %d kept, %d rejected, %d errors",
        len(files), kept, len(files) - kept - failures, failures,
    )
    return 1 if failures else 0


def _cmd_render(args) -> int:
    try:
        with open(args.in_file, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.in_file}: {exc}") from exc
    try:
        doc = canonical_document(text)
    except (ParseError, RejectError) as exc:
        logger.error("cannot bring %s to canonical form: %s", args.in_file, exc)
        return 1
    raster = rasterize(doc, args.size, args.size, supersample=not args.no_supersample)
    if args.out_file.lower().endswith(".ppm"):
        blob = encode_ppm(raster)
    else:
        blob = encode_png(raster)
    with open(args.out_file, "wb") as fh:
        fh.write(blob)
    logger.info("rendered %s -> %s (%dx%d)", args.in_file, args.out_file, args.size, args.size)
    return 0


def _cmd_loop(args) -> int:
    app = load_config(args.config)
    cfg = _loop_config(app, args)
    prompts = _read_prompts(args)
    backend, clock = _make_backend(args.backend, app)
    os.makedirs(args.out_dir, exist_ok=True)

    failures = 0
    for i, prompt in enumerate(prompts):
        run_dir = os.path.join(args.out_dir, f"{i:03d}")
        os.makedirs(run_dir, exist_ok=True)
        try:
            transcript = run_loop(prompt, backend, cfg, clock=clock)
            for record in transcript.iterations:
                if record.image_png is not None and record.image_ref:
                    with open(os.path.join(run_dir, record.image_ref), "wb") as fh:
                        fh.write(record.image_png)
            with open(os.path.join(run_dir, "transcript.json"), "w", encoding="utf-8") as fh:
                fh.write(transcript.to_json() + "\n")
        except Exception as exc:
            failures += 1
            logger.error("loop %03d failed: %s", i, exc)
            continue
        if transcript.terminated_by == "backend-failure":
            logger.warning(
                "loop %03d ended on backend failure: %s", i, transcript.backend_failure
            )
        logger.info(
            "loop %03d: %d iterations, terminated_by=%s, final_score=%s",
            i, len(transcript.iterations), transcript.terminated_by,
            transcript.final_score,
        )
    return 1 if failures else 0


def _cmd_build_pref(args) -> int:
    app = load_config(args.config)
    base = app.prefdata
    import dataclasses

    replacements = {}
    if args.n is not None:
        replacements["candidates"] = args.n
    if args.delta is not None:
        replacements["delta"] = args.delta
    if args.mode is not None:
        replacements["pair_mode"] = args.mode
    cfg = dataclasses.replace(base, **replacements) if replacements else base

    prompts = _read_prompts(args)
    backend, _clock = _make_backend(args.backend, app)
    bundle = prefdata.DatasetBundle()
    for i, prompt in enumerate(prompts):
        candidate_set = prefdata.run_candidates(prompt, backend, cfg)
        if candidate_set.scoring_failure:
            logger.warning(
                "prompt %d: scoring failed (%s); only render-success pairs possible",
                i, candidate_set.scoring_failure,
            )
        for failure in candidate_set.generation_failures:
            logger.warning("prompt %d: %s", i, failure)
        decisions = prefdata.build_pairs(candidate_set.candidates, cfg.delta, cfg.pair_mode)
        bundle.preference.extend(prefdata.pref_records(candidate_set, decisions))
        logger.info(
            "prompt %d: %d candidates, %d pairs",
            i, len(candidate_set.candidates), len(decisions),
        )
    manifest = prefdata.export_datasets(bundle, args.out_dir)
    logger.info(
        "wrote %d preference pairs to %s",
        manifest["files"]["pref.jsonl"]["count"], args.out_dir,
    )
    return 0


def _cmd_stats(args) -> int:
    app = load_config(args.config)
    cfg = _normalize_config(app, args)
    files = _svg_files(args.in_dir)
    report = metrics.corpus_stats(files, cfg)
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(metrics.report_json(report))
    if args.table:
        sys.stdout.write(metrics.report_table(report))
    logger.info("stats over %d files: rsr=%.2f kept=%d", report.files, report.rsr, report.kept)
    return 0


def _cmd_export_renders(args) -> int:
    files = _svg_files(args.in_dir)
    os.makedirs(args.out_dir, exist_ok=True)
    skipped = 0
    for path in files:
        name = os.path.splitext(os.path.basename(path))[0] + ".png"
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
            doc = canonical_document(text)
        except Exception as exc:
            skipped += 1
            logger.warning("skipping %s: %s", os.path.basename(path), exc)
            continue
        raster = rasterize(doc, args.size, args.size, supersample=True)
        with open(os.path.join(args.out_dir, name), "wb") as fh:
            fh.write(encode_png(raster))
    logger.info("rendered %d files, skipped %d", len(files) - skipped, skipped)
    return 0


if __name__ == "__main__":
    sys.exit(main())

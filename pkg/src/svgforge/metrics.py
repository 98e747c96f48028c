"""Corpus metrics and reports.

The headline number is the render success rate: the percentage of files
that can be brought to canonical form and show at least one pixel.
Neural quality metrics (FID, CLIP text-image score, aesthetic score,
human preference score) require models this toolkit does not ship, so
reports carry them as explicit nulls rather than omitting the columns.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .normalize import NormalizeConfig, Normalized, normalize_pipeline, token_proxy
from .raster.checks import render_check

__all__ = [
    "CorpusReport",
    "corpus_stats",
    "render_success_rate",
    "report_json",
    "report_table",
    "rsr_from_flags",
    "token_proxy",
]

NEURAL_METRICS = ("fid", "clip_t2i", "aesthetic", "hps")


@dataclass
class CorpusReport:
    files: int
    renderable: int
    rsr: float
    kept: int
    rejected: dict[str, int]
    mean_commands: float | None
    mean_colors: float | None
    mean_tokens: float | None
    command_histogram: dict[str, int]
    fid: float | None = None
    clip_t2i: float | None = None
    aesthetic: float | None = None
    hps: float | None = None

    def to_dict(self) -> dict:
        return {
            "files": self.files,
            "renderable": self.renderable,
            "rsr": self.rsr,
            "kept": self.kept,
            "rejected": dict(sorted(self.rejected.items())),
            "mean_commands": self.mean_commands,
            "mean_colors": self.mean_colors,
            "mean_tokens": self.mean_tokens,
            "command_histogram": dict(sorted(self.command_histogram.items())),
            "fid": self.fid,
            "clip_t2i": self.clip_t2i,
            "aesthetic": self.aesthetic,
            "hps": self.hps,
        }


def rsr_from_flags(flags) -> float:
    """Render success rate as a percentage, rounded to two decimals."""
    flags = list(flags)
    if not flags:
        return 0.0
    return round(100.0 * sum(1 for f in flags if f) / len(flags), 2)


def render_success_rate(texts) -> float:
    return rsr_from_flags(render_check(text).ok for text in texts)


def corpus_stats(paths, cfg: NormalizeConfig | None = None) -> CorpusReport:
    """Walk a list of SVG files (sorted by name for determinism) and
    aggregate renderability, keep/reject outcomes, and shape stats."""
    cfg = cfg or NormalizeConfig()
    ordered = sorted(paths, key=lambda p: os.path.basename(str(p)))
    renderable = 0
    kept = 0
    rejected: dict[str, int] = {}
    histogram: dict[str, int] = {}
    commands_sum = 0
    colors_sum = 0
    tokens_sum = 0

    for path in ordered:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        if render_check(text).ok:
            renderable += 1
        result = normalize_pipeline(text, cfg)
        if isinstance(result, Normalized):
            kept += 1
            commands_sum += result.stats.commands
            colors_sum += result.stats.colors
            tokens_sum += result.stats.token_estimate
            for letter, count in result.stats.command_histogram.items():
                histogram[letter] = histogram.get(letter, 0) + count
        else:
            kind = result.reason.kind
            rejected[kind] = rejected.get(kind, 0) + 1

    total = len(ordered)
    return CorpusReport(
        files=total,
        renderable=renderable,
        rsr=rsr_from_flags([True] * renderable + [False] * (total - renderable)),
        kept=kept,
        rejected=rejected,
        mean_commands=round(commands_sum / kept, 2) if kept else None,
        mean_colors=round(colors_sum / kept, 2) if kept else None,
        mean_tokens=round(tokens_sum / kept, 2) if kept else None,
        command_histogram=histogram,
    )


def report_json(report: CorpusReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


def report_table(report: CorpusReport) -> str:
    """Fixed-width text table; null metrics render as 'null'."""
    rows: list[tuple[str, object]] = [
        ("files", report.files),
        ("renderable", report.renderable),
        ("rsr", f"{report.rsr:.2f}"),
        ("kept", report.kept),
    ]
    for kind, count in sorted(report.rejected.items()):
        rows.append((f"rejected[{kind}]", count))
    rows.extend([
        ("mean_commands", _cell(report.mean_commands)),
        ("mean_colors", _cell(report.mean_colors)),
        ("mean_tokens", _cell(report.mean_tokens)),
    ])
    for letter, count in sorted(report.command_histogram.items()):
        rows.append((f"commands[{letter}]", count))
    for name in NEURAL_METRICS:
        rows.append((name, _cell(getattr(report, name))))
    width = max(len(name) for name, _ in rows) + 2
    return "\n".join(f"{name:<{width}}{value}" for name, value in rows) + "\n"


def _cell(value) -> str:
    return "null" if value is None else str(value)

"""Preference dataset construction and the DPO objective.

Candidate drafts for a prompt are compared pairwise under two rules, in
order of precedence:

1. Render-success priority: a draft that renders beats one that does
   not.  No scores needed.
2. High-score priority: between two rendering drafts, the higher-scored
   one wins when the gap exceeds the margin delta.

Identical drafts never form a pair.  Scoring uses a single batch request
carrying every renderable candidate's image; the judge returns one
integer score per image on a 1 to 100 scale.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

from .backend import BackendError, BackendRequest, Message
from .loop import (
    CritiqueParseError,
    LoopConfig,
    _evaluate_draft,
    _extract_json_object,
    build_generation_request,
)

PAIR_MODES = ("all-pairs", "best-vs-rest")


@dataclass(frozen=True)
class PrefConfig:
    candidates: int = 5
    sample_temperature: float = 0.9
    delta: float = 5.0              # minimum score gap for rule 2, on the 1-100 scale
    pair_mode: str = "all-pairs"
    scoring_retries: int = 1
    render_size: int = 512
    max_output_tokens: int = 4096

    def __post_init__(self):
        if self.candidates < 1:
            raise ValueError("need at least one candidate")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"unknown pair mode {self.pair_mode!r}")


@dataclass
class Candidate:
    index: int
    svg: str                 # canonical text when available, else extracted source
    render_ok: bool
    score: float | None = None
    image_png: bytes | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class PairDecision:
    winner: int   # candidate index
    loser: int
    rule: str     # "render-success" | "high-score"


@dataclass
class CandidateSet:
    prompt: str
    candidates: list[Candidate]
    scoring_failure: str | None = None
    generation_failures: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# pairing


def build_pairs(candidates: list[Candidate], delta: float = 5.0,
                mode: str = "all-pairs") -> list[PairDecision]:
    """Apply the pairing rules to a candidate list.

    all-pairs considers every unordered pair; best-vs-rest pairs only the
    top-scoring renderable candidate against the others.  Pairs whose
    two drafts are textually identical are skipped before any rule runs.
    """
    if mode not in PAIR_MODES:
        raise ValueError(f"unknown pair mode {mode!r}")

    if mode == "all-pairs":
        index_pairs = [
            (i, j)
            for i in range(len(candidates))
            for j in range(i + 1, len(candidates))
        ]
    else:
        best = _best_candidate(candidates)
        if best is None:
            return []
        index_pairs = [(best, j) for j in range(len(candidates)) if j != best]

    decisions = []
    for i, j in index_pairs:
        decision = _decide_pair(candidates[i], candidates[j], delta)
        if decision is not None:
            decisions.append(decision)
    return decisions


def _decide_pair(a: Candidate, b: Candidate, delta: float) -> PairDecision | None:
    if a.svg == b.svg:
        return None
    # Rule 1: render success dominates everything else.
    if a.render_ok and not b.render_ok:
        return PairDecision(a.index, b.index, "render-success")
    if b.render_ok and not a.render_ok:
        return PairDecision(b.index, a.index, "render-success")
    if not (a.render_ok and b.render_ok):
        return None
    # Rule 2: big enough score gap between two renderable drafts.
    if a.score is None or b.score is None:
        return None
    if a.score - b.score > delta:
        return PairDecision(a.index, b.index, "high-score")
    if b.score - a.score > delta:
        return PairDecision(b.index, a.index, "high-score")
    return None


def _best_candidate(candidates: list[Candidate]) -> int | None:
    best = None
    best_score = -math.inf
    for candidate in candidates:
        if candidate.render_ok and candidate.score is not None:
            # strict > keeps the earliest top scorer, deterministically
            if candidate.score > best_score:
                best = candidate.index
                best_score = candidate.score
    return best


# ---------------------------------------------------------------------------
# candidate generation and batch scoring

SCORING_TEMPLATE = (
    "You are scoring renderings of SVG icons drafted for this design goal:\n"
    "{prompt}\n\n"
    "There are {count} images attached, in order. Score each image on an "
    "integer scale of 1 to 100 for how well it satisfies the goal. Respond "
    "with a single JSON object with exactly one key per image, named "
    '"image_1_score", "image_2_score", and so on in attachment order. '
    "Output only the JSON object."
)


class ScoringParseError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


def build_scoring_request(prompt: str, images: list[bytes],
                          cfg: PrefConfig | None = None) -> BackendRequest:
    cfg = cfg or PrefConfig()
    if not images:
        raise ValueError("scoring request needs at least one image")
    messages = [Message("user", SCORING_TEMPLATE.format(prompt=prompt, count=len(images)))]
    for k, png in enumerate(images, start=1):
        messages.append(Message("user", f"Image {k}:", image_png=png))
    return BackendRequest(
        messages=tuple(messages),
        temperature=0.0,
        max_output_tokens=cfg.max_output_tokens,
        kind="scoring",
    )


def parse_scores(text: str, count: int) -> list[float]:
    """Parse the judge's JSON into a score per image, in order."""
    try:
        obj = _extract_json_object(text)
    except CritiqueParseError as exc:
        raise ScoringParseError(exc.reason, exc.detail) from exc
    scores = []
    for k in range(1, count + 1):
        key = f"image_{k}_score"
        if key not in obj:
            raise ScoringParseError("missing-field", key)
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScoringParseError("non-numeric-score", key)
        if not (1.0 <= float(value) <= 100.0):
            raise ScoringParseError("score-out-of-range", f"{key}={value}")
        scores.append(float(value))
    return scores


def run_candidates(prompt: str, backend, cfg: PrefConfig | None = None) -> CandidateSet:
    """Sample candidates, render them, and batch-score the renderable ones.

    A failed generation request drops that slot (there is nothing to
    prefer or disprefer); a scoring failure after the retry budget
    leaves scores unset, so only render-success pairs can form.
    """
    cfg = cfg or PrefConfig()
    loop_cfg = LoopConfig(
        gen_temperature=cfg.sample_temperature,
        render_size=cfg.render_size,
        max_output_tokens=cfg.max_output_tokens,
    )
    result = CandidateSet(prompt=prompt, candidates=[])

    for slot in range(cfg.candidates):
        request = build_generation_request(prompt, loop_cfg)
        try:
            response = backend.complete(request)
        except BackendError as exc:
            result.generation_failures.append(f"candidate {slot}: {exc}")
            continue
        record = _evaluate_draft(slot, response, 0.0, loop_cfg)
        result.candidates.append(Candidate(
            index=len(result.candidates),
            svg=record.best_svg() or "",
            render_ok=record.render_ok,
            image_png=record.image_png,
        ))

    renderable = [c for c in result.candidates if c.render_ok]
    if renderable:
        images = [c.image_png or b"" for c in renderable]
        request = build_scoring_request(prompt, images, cfg)
        failure = None
        for _ in range(cfg.scoring_retries + 1):
            try:
                response = backend.complete(request)
            except BackendError as exc:
                failure = f"backend: {exc}"
                continue
            try:
                scores = parse_scores(response.text, len(images))
            except ScoringParseError as exc:
                failure = f"parse: {exc}"
                continue
            for candidate, score in zip(renderable, scores):
                candidate.score = score
            failure = None
            break
        result.scoring_failure = failure
    return result


# ---------------------------------------------------------------------------
# DPO objective


@dataclass(frozen=True)
class DpoInputs:
    logp_policy_chosen: float
    logp_ref_chosen: float
    logp_policy_rejected: float
    logp_ref_rejected: float
    beta: float = 0.1


@dataclass(frozen=True)
class DpoResult:
    loss: float
    margin: float


def dpo_loss(inputs: DpoInputs) -> DpoResult:
    """Pure DPO loss for one preference pair.

    margin m is the difference of policy-vs-reference log-ratios between
    chosen and rejected; the loss is softplus(-beta * m), evaluated with
    the numerically stable form so huge margins neither overflow nor
    lose the tail.
    """
    values = (
        inputs.logp_policy_chosen, inputs.logp_ref_chosen,
        inputs.logp_policy_rejected, inputs.logp_ref_rejected,
    )
    if not all(math.isfinite(v) for v in values):
        raise ValueError("log probabilities must be finite")
    if not (inputs.beta > 0 and math.isfinite(inputs.beta)):
        raise ValueError("beta must be positive and finite")
    margin = (
        (inputs.logp_policy_chosen - inputs.logp_ref_chosen)
        - (inputs.logp_policy_rejected - inputs.logp_ref_rejected)
    )
    loss = _softplus(-inputs.beta * margin)
    return DpoResult(loss=loss, margin=margin)


def _softplus(x: float) -> float:
    # log(1 + e^x) without overflow for large |x|
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


# ---------------------------------------------------------------------------
# dataset records and files


@dataclass(frozen=True)
class DirectRecord:
    prompt: str
    svg: str


@dataclass(frozen=True)
class CritiqueRecord:
    prompt: str
    image_path: str
    critique_json: str


@dataclass(frozen=True)
class CorrectionRecord:
    prompt: str
    draft_svg: str
    critique_json: str
    target_svg: str


@dataclass(frozen=True)
class PrefRecord:
    prompt: str
    chosen: str
    rejected: str


@dataclass
class DatasetBundle:
    direct: list[DirectRecord] = field(default_factory=list)
    critique: list[CritiqueRecord] = field(default_factory=list)
    correction: list[CorrectionRecord] = field(default_factory=list)
    preference: list[PrefRecord] = field(default_factory=list)


_FILE_KINDS = {
    "direct.jsonl": ("direct", DirectRecord),
    "critique.jsonl": ("critique", CritiqueRecord),
    "correction.jsonl": ("correction", CorrectionRecord),
    "pref.jsonl": ("preference", PrefRecord),
}


def records_from_transcripts(transcripts) -> DatasetBundle:
    """Mine supervised records out of loop transcripts.

    Direct records pair the prompt with the run's final renderable SVG;
    critique records pair each rendered image with its real (not
    synthetic) critique; correction records link consecutive iterations
    through the critique that drove the revision.
    """
    bundle = DatasetBundle()
    for transcript in transcripts:
        if transcript.final_svg:
            final = None
            for record in transcript.iterations:
                if record.index == transcript.final_index:
                    final = record
            if final is not None and final.render_ok:
                bundle.direct.append(DirectRecord(transcript.prompt, transcript.final_svg))
        for record in transcript.iterations:
            if (record.critique is not None and not record.critique_synthetic
                    and record.image_ref):
                bundle.critique.append(CritiqueRecord(
                    transcript.prompt, record.image_ref,
                    critique_to_json(record.critique),
                ))
        for prev, nxt in zip(transcript.iterations, transcript.iterations[1:]):
            if prev.critique is None or not nxt.normalize_ok or not nxt.canonical_text:
                continue
            draft = prev.best_svg()
            if not draft or draft == nxt.canonical_text:
                continue
            bundle.correction.append(CorrectionRecord(
                prompt=transcript.prompt,
                draft_svg=draft,
                critique_json=critique_to_json(prev.critique),
                target_svg=nxt.canonical_text,
            ))
    return bundle


def critique_to_json(report) -> str:
    return json.dumps(
        {"score": report.score, "critique": report.critique,
         "suggestions": report.suggestions},
        ensure_ascii=False,
    )


def pref_records(candidate_set: CandidateSet,
                 decisions: list[PairDecision]) -> list[PrefRecord]:
    by_index = {c.index: c for c in candidate_set.candidates}
    records = []
    for decision in decisions:
        records.append(PrefRecord(
            prompt=candidate_set.prompt,
            chosen=by_index[decision.winner].svg,
            rejected=by_index[decision.loser].svg,
        ))
    return records


def export_datasets(bundle: DatasetBundle, out_dir) -> dict:
    """Write the four JSONL files plus a manifest with counts and hashes.

    Preference records are deduplicated on (prompt, chosen, rejected),
    keeping first occurrence; the manifest reports how many were
    dropped.
    """
    os.makedirs(out_dir, exist_ok=True)
    seen = set()
    unique_prefs = []
    for record in bundle.preference:
        key = (record.prompt, record.chosen, record.rejected)
        if key in seen:
            continue
        seen.add(key)
        unique_prefs.append(record)
    dropped = len(bundle.preference) - len(unique_prefs)

    contents = {
        "direct.jsonl": bundle.direct,
        "critique.jsonl": bundle.critique,
        "correction.jsonl": bundle.correction,
        "pref.jsonl": unique_prefs,
    }
    manifest: dict = {"files": {}, "preference_duplicates_dropped": dropped}
    for name, records in contents.items():
        path = os.path.join(out_dir, name)
        blob = "".join(
            json.dumps(asdict(r), ensure_ascii=False) + "\n" for r in records
        ).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(blob)
        manifest["files"][name] = {
            "count": len(records),
            "sha256": hashlib.sha256(blob).hexdigest(),
        }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def import_datasets(out_dir) -> DatasetBundle:
    """Read back what export_datasets wrote."""
    bundle = DatasetBundle()
    for name, (attr, cls) in _FILE_KINDS.items():
        path = os.path.join(out_dir, name)
        if not os.path.exists(path):
            continue
        records = getattr(bundle, attr)
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(cls(**json.loads(line)))
    return bundle

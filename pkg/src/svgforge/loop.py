"""Generate / critique / refine loop.

A deterministic state machine over a pluggable backend.  Iteration 0 is
the initial draft; each later iteration revises the previous draft using
the critique of its rendering.  The loop stops when a critique score
reaches the threshold, when the refinement budget is exhausted, or when
the backend fails outright.  The final answer is the best-scoring draft,
with ties going to the latest.

Drafts that cannot be rendered are not sent for critique; they receive a
synthetic zero-score critique so the next round knows what to fix.
Critique responses that cannot be parsed are re-asked a bounded number
of times, then scored zero.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

from . import normalize as normalize_mod
from .backend import BackendError, BackendRequest, BackendResponse, Message
from .parse import ParseError
from .raster.checks import has_painted_pixel
from .raster.image import encode_png, rasterize

TERMINATION_KINDS = ("threshold", "max-iterations", "backend-failure")

CRITIQUE_FIELDS = ("score", "critique", "suggestions")


@dataclass(frozen=True)
class LoopConfig:
    n_max: int = 3                    # refinement rounds after the initial draft
    tau: float = 9.5                  # stop as soon as a score reaches this
    gen_temperature: float = 0.5
    critique_temperature: float = 0.0
    refine_temperature: float = 0.0
    render_size: int = 512
    critique_parse_retries: int = 2
    max_output_tokens: int = 4096

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if not (0.0 <= self.tau <= 10.0):
            raise ValueError("tau must lie in [0, 10]")


@dataclass(frozen=True)
class CritiqueReport:
    score: float
    critique: str
    suggestions: str


class CritiqueParseError(ValueError):
    """A critique response that does not contain the promised JSON."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass
class IterationRecord:
    index: int
    raw_text: str                 # full model output
    svg_text: str                 # extracted <svg>...</svg> source, or ""
    canonical_text: str           # canonical form, or "" if normalization failed
    normalize_ok: bool
    normalize_detail: str
    render_ok: bool
    render_detail: str
    image_ref: str | None
    critique: CritiqueReport | None
    critique_synthetic: bool
    critique_failure: str | None
    critique_retries: int
    started: float
    ended: float
    image_png: bytes | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("image_png")
        if self.critique is not None:
            out["critique"] = asdict(self.critique)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        critique = data.get("critique")
        if critique is not None:
            critique = CritiqueReport(**critique)
        return cls(
            index=data["index"],
            raw_text=data["raw_text"],
            svg_text=data["svg_text"],
            canonical_text=data["canonical_text"],
            normalize_ok=data["normalize_ok"],
            normalize_detail=data["normalize_detail"],
            render_ok=data["render_ok"],
            render_detail=data["render_detail"],
            image_ref=data.get("image_ref"),
            critique=critique,
            critique_synthetic=data["critique_synthetic"],
            critique_failure=data.get("critique_failure"),
            critique_retries=data.get("critique_retries", 0),
            started=data["started"],
            ended=data["ended"],
        )

    def best_svg(self) -> str | None:
        if self.normalize_ok and self.canonical_text:
            return self.canonical_text
        return self.svg_text or None


@dataclass
class LoopTranscript:
    prompt: str
    config: dict
    iterations: list[IterationRecord]
    terminated_by: str | None
    backend_failure: str | None
    final_index: int | None
    final_svg: str | None
    final_score: float | None
    started: float
    ended: float

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "config": self.config,
            "iterations": [it.to_dict() for it in self.iterations],
            "terminated_by": self.terminated_by,
            "backend_failure": self.backend_failure,
            "final_index": self.final_index,
            "final_svg": self.final_svg,
            "final_score": self.final_score,
            "started": self.started,
            "ended": self.ended,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "LoopTranscript":
        return cls(
            prompt=data["prompt"],
            config=dict(data["config"]),
            iterations=[IterationRecord.from_dict(d) for d in data["iterations"]],
            terminated_by=data.get("terminated_by"),
            backend_failure=data.get("backend_failure"),
            final_index=data.get("final_index"),
            final_svg=data.get("final_svg"),
            final_score=data.get("final_score"),
            started=data["started"],
            ended=data["ended"],
        )

    @classmethod
    def from_json(cls, text: str) -> "LoopTranscript":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# prompt construction

GENERATION_TEMPLATE = (
    "Generate an SVG icon for the following description:\n"
    "{prompt}\n\n"
    "Respond with one complete <svg> document and nothing else."
)

CRITIQUE_TEMPLATE = (
    "You are reviewing an SVG icon. The attached image is a rendering of a "
    "draft for this design goal:\n"
    "{prompt}\n\n"
    "Judge how well the rendering satisfies the goal. Respond with a single "
    "JSON object containing exactly these fields:\n"
    '  "score": a number from 0.0 to 10.0 rating the draft,\n'
    '  "critique": a short assessment of what works and what does not,\n'
    '  "suggestions": concrete revision advice, or a note that none is '
    "needed.\n"
    "Output only the JSON object."
)

CORRECTION_TEMPLATE = (
    "Revise a draft SVG icon using reviewer feedback.\n\n"
    "Design goal:\n{prompt}\n\n"
    "Draft SVG code:\n{draft}\n\n"
    "Reviewer critique:\n{critique}\n\n"
    "Revision suggestions:\n{suggestions}\n\n"
    "Respond with one complete improved <svg> document and nothing else."
)


def fence(text: str) -> str:
    """Wrap text in a backtick fence longer than any run it contains."""
    longest = 0
    run = 0
    for ch in text:
        run = run + 1 if ch == "`" else 0
        longest = max(longest, run)
    ticks = "`" * max(3, longest + 1)
    return f"{ticks}\n{text}\n{ticks}"


def build_generation_request(prompt: str, cfg: LoopConfig) -> BackendRequest:
    return BackendRequest(
        messages=(Message("user", GENERATION_TEMPLATE.format(prompt=prompt)),),
        temperature=cfg.gen_temperature,
        max_output_tokens=cfg.max_output_tokens,
        kind="generation",
    )


def build_critique_request(prompt: str, image_png: bytes, cfg: LoopConfig) -> BackendRequest:
    return BackendRequest(
        messages=(
            Message("user", CRITIQUE_TEMPLATE.format(prompt=prompt), image_png=image_png),
        ),
        temperature=cfg.critique_temperature,
        max_output_tokens=cfg.max_output_tokens,
        kind="critique",
    )


def build_correction_request(prompt: str, draft_svg: str, report: CritiqueReport,
                             image_png: bytes | None, cfg: LoopConfig) -> BackendRequest:
    text = CORRECTION_TEMPLATE.format(
        prompt=fence(prompt),
        draft=fence(draft_svg),
        critique=fence(report.critique or "none"),
        suggestions=fence(report.suggestions or "none"),
    )
    # Corrections ask for SVG output, so they are generation-kind requests.
    return BackendRequest(
        messages=(Message("user", text, image_png=image_png),),
        temperature=cfg.refine_temperature,
        max_output_tokens=cfg.max_output_tokens,
        kind="generation",
    )


# ---------------------------------------------------------------------------
# critique parsing


def parse_critique(text: str) -> CritiqueReport:
    """Extract the {score, critique, suggestions} JSON object from text.

    Tolerates prose around the object; the first parseable balanced JSON
    object wins.  Raises CritiqueParseError with a machine-readable
    reason otherwise.
    """
    obj = _extract_json_object(text)
    for name in CRITIQUE_FIELDS:
        if name not in obj:
            raise CritiqueParseError("missing-field", name)
    score = obj["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise CritiqueParseError("non-numeric-score", repr(score))
    if not (0.0 <= float(score) <= 10.0):
        raise CritiqueParseError("score-out-of-range", str(score))
    critique = obj["critique"]
    suggestions = obj["suggestions"]
    if not isinstance(critique, str) or not isinstance(suggestions, str):
        raise CritiqueParseError("bad-field-type", "critique and suggestions must be strings")
    return CritiqueReport(score=float(score), critique=critique, suggestions=suggestions)


def _extract_json_object(text: str) -> dict:
    start = text.find("{")
    if start == -1:
        raise CritiqueParseError("no-json", "no opening brace")
    saw_balanced = False
    while start != -1:
        candidate = _balanced_span(text, start)
        if candidate is not None:
            saw_balanced = True
            try:
                obj = json.loads(candidate)
            except json.JSONDecodeError:
                obj = None
            if isinstance(obj, dict):
                return obj
        start = text.find("{", start + 1)
    raise CritiqueParseError(
        "invalid-json" if saw_balanced else "no-json",
        "no parseable JSON object",
    )


def _balanced_span(text: str, start: int) -> str | None:
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


# ---------------------------------------------------------------------------
# the loop


def should_terminate(iteration_index: int, score: float, cfg: LoopConfig) -> str | None:
    """Termination decision after an iteration completes.

    The threshold is inclusive: score >= tau stops.  Hitting the
    refinement budget stops regardless of score.
    """
    if score >= cfg.tau:
        return "threshold"
    if iteration_index >= cfg.n_max:
        return "max-iterations"
    return None


def extract_svg(text: str) -> str | None:
    """Cut the outermost <svg>...</svg> span out of model output."""
    start = text.find("<svg")
    end = text.rfind("</svg>")
    if start == -1 or end == -1 or end < start:
        return None
    return text[start:end + len("</svg>")]


def run_loop(prompt: str, backend, cfg: LoopConfig | None = None,
             clock=time.time) -> LoopTranscript:
    """Run the full loop for one prompt.  Deterministic given a
    deterministic backend and clock."""
    cfg = cfg or LoopConfig()
    run_started = clock()
    iterations: list[IterationRecord] = []
    terminated_by: str | None = None
    backend_failure: str | None = None
    prev_record: IterationRecord | None = None

    for index in range(cfg.n_max + 1):
        started = clock()
        if index == 0:
            request = build_generation_request(prompt, cfg)
        else:
            assert prev_record is not None and prev_record.critique is not None
            request = build_correction_request(
                prompt,
                prev_record.best_svg() or "",
                prev_record.critique,
                prev_record.image_png,
                cfg,
            )
        try:
            response = backend.complete(request)
        except BackendError as exc:
            terminated_by = "backend-failure"
            backend_failure = f"generation: {exc}"
            break

        record = _evaluate_draft(index, response, started, cfg)

        if record.render_ok:
            failure = _run_critique(record, prompt, backend, cfg)
            if failure is not None:
                record.ended = clock()
                iterations.append(record)
                terminated_by = "backend-failure"
                backend_failure = f"critique: {failure}"
                break
        else:
            # Nothing to show the critic; synthesize a floor-score
            # critique that tells the next round what went wrong.
            record.critique = CritiqueReport(
                score=0.0,
                critique=f"the draft did not render: {record.render_detail}",
                suggestions="produce one complete, valid <svg> document",
            )
            record.critique_synthetic = True

        record.ended = clock()
        iterations.append(record)
        prev_record = record

        assert record.critique is not None
        decision = should_terminate(index, record.critique.score, cfg)
        if decision is not None:
            terminated_by = decision
            break

    final_index, final_svg, final_score = _select_final(iterations)
    return LoopTranscript(
        prompt=prompt,
        config=_config_snapshot(cfg),
        iterations=iterations,
        terminated_by=terminated_by,
        backend_failure=backend_failure,
        final_index=final_index,
        final_svg=final_svg,
        final_score=final_score,
        started=run_started,
        ended=clock(),
    )


def _evaluate_draft(index: int, response: BackendResponse, started: float,
                    cfg: LoopConfig) -> IterationRecord:
    raw = response.text
    svg_text = extract_svg(raw)
    record = IterationRecord(
        index=index,
        raw_text=raw,
        svg_text=svg_text or "",
        canonical_text="",
        normalize_ok=False,
        normalize_detail="",
        render_ok=False,
        render_detail="",
        image_ref=None,
        critique=None,
        critique_synthetic=False,
        critique_failure=None,
        critique_retries=0,
        started=started,
        ended=started,
    )
    if svg_text is None:
        record.normalize_detail = "no <svg> element in response"
        record.render_detail = record.normalize_detail
        return record

    try:
        doc = normalize_mod.canonical_document(svg_text)
    except ParseError as exc:
        record.normalize_detail = f"parse: {exc}"
        record.render_detail = record.normalize_detail
        return record
    except normalize_mod.RejectError as exc:
        record.normalize_detail = f"{exc.reason.kind}: {exc.reason.detail}"
        record.render_detail = record.normalize_detail
        return record

    record.normalize_ok = True
    record.canonical_text = normalize_mod.serialize_canonical(doc)
    if not has_painted_pixel(doc):
        record.render_detail = "no painted pixel"
        return record

    raster = rasterize(doc, cfg.render_size, cfg.render_size, supersample=True)
    record.image_png = encode_png(raster)
    record.image_ref = f"iter_{record.index}.png"
    record.render_ok = True
    return record


def _run_critique(record: IterationRecord, prompt: str, backend,
                  cfg: LoopConfig) -> str | None:
    """Ask for a critique, retrying parse failures.  Returns a backend
    failure description, or None on success (including the synthetic
    zero-score fallback after exhausted retries)."""
    request = build_critique_request(prompt, record.image_png or b"", cfg)
    last_reason = ""
    for attempt in range(cfg.critique_parse_retries + 1):
        try:
            response = backend.complete(request)
        except BackendError as exc:
            return str(exc)
        try:
            record.critique = parse_critique(response.text)
            record.critique_retries = attempt
            return None
        except CritiqueParseError as exc:
            last_reason = exc.reason
            record.critique_retries = attempt + 1
    record.critique = CritiqueReport(
        score=0.0,
        critique=f"critique response could not be parsed ({last_reason})",
        suggestions="",
    )
    record.critique_synthetic = True
    record.critique_failure = last_reason
    return None


def _select_final(iterations: list[IterationRecord]
                  ) -> tuple[int | None, str | None, float | None]:
    best: IterationRecord | None = None
    for record in iterations:
        if record.critique is None:
            continue
        # >= so later iterations win ties
        if best is None or record.critique.score >= best.critique.score:
            best = record
    if best is None:
        if iterations:
            last = iterations[-1]
            return last.index, last.best_svg(), None
        return None, None, None
    return best.index, best.best_svg(), best.critique.score


def _config_snapshot(cfg: LoopConfig) -> dict:
    return {
        "n_max": cfg.n_max,
        "tau": cfg.tau,
        "gen_temperature": cfg.gen_temperature,
        "critique_temperature": cfg.critique_temperature,
        "refine_temperature": cfg.refine_temperature,
        "render_size": cfg.render_size,
        "critique_parse_retries": cfg.critique_parse_retries,
        "max_output_tokens": cfg.max_output_tokens,
    }

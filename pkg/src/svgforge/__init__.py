"""svgforge: canonicalizing SVG toolkit.

Parse a lenient subset of SVG, normalize it to a compact canonical form,
rasterize it without external renderers, drive a generate/critique/refine
loop against a pluggable model backend, and build preference datasets
from the transcripts.
"""

__version__ = "0.1.0"

from .model import (
    CANONICAL_VIEW_BOX,
    Arc,
    CanonicalDocument,
    CanonicalPath,
    Close,
    Cubic,
    Line,
    Move,
)
from .normalize import (
    NormalizeConfig,
    Normalized,
    RejectReason,
    Rejected,
    normalize_pipeline,
    token_proxy,
)
from .parse import ParseError, Rgb, parse_document, parse_path_data

__all__ = [
    "CANONICAL_VIEW_BOX",
    "Arc",
    "CanonicalDocument",
    "CanonicalPath",
    "Close",
    "Cubic",
    "Line",
    "Move",
    "NormalizeConfig",
    "Normalized",
    "ParseError",
    "RejectReason",
    "Rejected",
    "Rgb",
    "normalize_pipeline",
    "parse_document",
    "parse_path_data",
    "token_proxy",
]

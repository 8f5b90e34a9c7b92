"""Pattern-guided adversarial insertions for source-code classifiers."""

import json as _json

from ._astveil import (
    ConfigError,
    Error,
    FormatError,
    NonUtf8Input,
    SurrogateFiller,
    SurrogateVictim,
    Unavailable,
    UnsupportedLanguage,
    cork_term,
    count_masks,
    count_tokens,
    has_parse_error,
    replace_masks,
    run,
    sexp,
)
from ._astveil import parse as _parse

__version__ = "0.1.0"


def parse(text, language):
    """Parse source text and return the graph as a dict."""
    return _json.loads(_parse(text, language))

"""Declarative retrieval pipelines over a positional inverted index."""

from ._core import FlowrankError, Pipeline, build_index, tokenize

__all__ = ["FlowrankError", "Pipeline", "build_index", "tokenize"]
__version__ = "0.1.0"

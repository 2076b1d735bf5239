"""Next-activity prediction for business process event streams."""

from ._core import (
    Automaton,
    ConfigError,
    DatasetError,
    StreamingModel,
    build_alergia,
    build_bag,
    build_fpt,
    build_ngram,
    run,
)

__all__ = [
    "Automaton",
    "ConfigError",
    "DatasetError",
    "StreamingModel",
    "build_alergia",
    "build_bag",
    "build_fpt",
    "build_ngram",
    "run",
]

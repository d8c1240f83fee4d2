"""QA over KB + text facts, explanation methods, and their evaluation."""

__version__ = "0.1.0"

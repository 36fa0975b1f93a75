"""finrag: a modular evaluation engine for financial RAG pipelines."""

__version__ = "0.1.0"

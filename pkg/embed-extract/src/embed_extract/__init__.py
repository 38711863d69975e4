"""Turn a JSONL text corpus into fixed-size sentence embedding vectors."""

__version__ = "0.1.0"

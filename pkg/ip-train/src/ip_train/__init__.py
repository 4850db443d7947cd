"""Transformer fine-tuning harness for utterance-level intent prediction."""

__version__ = "0.1.0"

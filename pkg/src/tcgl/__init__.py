"""Desk-scale temporal contrastive graph learning on synthetic videos."""

__version__ = "0.1.0"
